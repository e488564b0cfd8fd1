"""Base event extraction model.

Pipeline per sentence: token encoder, two CRF identification layers (trigger
spans, argument spans), span classifiers for event type and argument role,
and a learned global-feature score over the predicted event graph. The CRF
identification layers tag with typed BIO labels but only their spans are
kept; types and roles always come from the span classifiers.

The total training loss is the sum of the two identification NLLs, the two
classification cross-entropies, and the global-feature gap, averaged over
the batch. Per-pair losses (one trigger plus one argument treated as the
entire gold annotation) are exposed separately so the self-training loop
can weight each pseudo prediction on its own.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from sklearn.base import BaseEstimator
from torch import nn

from .corpus import LabeledSentence
from .crf import LinearChainCrf
from .encoding import TokenEncoder, Vocab, pad_batch
from .errors import EmptyInput, EmptySpan, NonFiniteLoss, OutOfBounds, ShapeMismatch
from .labels import LabelSchema, bio_to_spans, repair_bio, spans_to_bio


@dataclass(frozen=True)
class TriggerPrediction:
    span: tuple[int, int]
    event_type: str
    probability: float


@dataclass(frozen=True)
class ArgumentPrediction:
    trigger_index: int
    span: tuple[int, int]
    role: str
    probability: float


@dataclass(frozen=True)
class EventGraphPrediction:
    triggers: tuple[TriggerPrediction, ...] = ()
    arguments: tuple[ArgumentPrediction, ...] = ()


def gold_prediction(sentence: LabeledSentence) -> EventGraphPrediction:
    """View a gold annotation as a prediction graph with probability 1."""
    triggers = []
    arguments = []
    for i, ev in enumerate(sentence.events):
        triggers.append(TriggerPrediction(span=ev.trigger_span, event_type=ev.event_type, probability=1.0))
        for arg in ev.args:
            arguments.append(
                ArgumentPrediction(trigger_index=i, span=(arg.start, arg.end), role=arg.role, probability=1.0)
            )
    return EventGraphPrediction(triggers=tuple(triggers), arguments=tuple(arguments))


# ---------------------------------------------------------------------------
# Global features
# ---------------------------------------------------------------------------

DEFAULT_TEMPLATES = ("role_within_type", "role_pair_shared_span")


@dataclass(frozen=True)
class GlobalFeatureConfig:
    """Indicator templates over a sentence's predicted event graph."""

    templates: tuple[str, ...] = DEFAULT_TEMPLATES


class GlobalFeatures:
    """Materialized feature index for a schema plus template set."""

    def __init__(self, schema: LabelSchema, config: GlobalFeatureConfig | None = None):
        self.config = config or GlobalFeatureConfig()
        self.index: dict[tuple, int] = {}
        for template in self.config.templates:
            if template == "role_within_type":
                for t in schema.trigger_types:
                    for r in schema.argument_roles:
                        self.index[("rwt", t, r)] = len(self.index)
            elif template == "role_pair_shared_span":
                pairs = [(t, r) for t in schema.trigger_types for r in schema.argument_roles]
                for t1, r1 in pairs:
                    for t2, r2 in pairs:
                        self.index[("rps", t1, r1, t2, r2)] = len(self.index)
            else:
                raise ValueError(f"unknown global feature template {template!r}")

    def __len__(self) -> int:
        return len(self.index)

    def extract(self, graph: EventGraphPrediction) -> dict[int, float]:
        counts: dict[int, float] = {}

        def bump(key):
            idx = self.index.get(key)
            if idx is not None:
                counts[idx] = counts.get(idx, 0.0) + 1.0

        trigger_types = [t.event_type for t in graph.triggers]
        for arg in graph.arguments:
            bump(("rwt", trigger_types[arg.trigger_index], arg.role))
        for i, a in enumerate(graph.arguments):
            for b in graph.arguments[i + 1:]:
                if a.trigger_index != b.trigger_index and a.span == b.span:
                    bump(("rps", trigger_types[a.trigger_index], a.role,
                          trigger_types[b.trigger_index], b.role))
        return counts


def global_score(graph: EventGraphPrediction, features: GlobalFeatures, weights: torch.Tensor) -> torch.Tensor:
    """Dot product of the template weights with the graph's feature counts."""
    counts = features.extract(graph)
    if not counts:
        return weights.sum() * 0.0
    idx = torch.tensor(list(counts.keys()), dtype=torch.long, device=weights.device)
    val = torch.tensor(list(counts.values()), dtype=weights.dtype, device=weights.device)
    return (weights[idx] * val).sum()


# ---------------------------------------------------------------------------
# Span utilities and classifiers
# ---------------------------------------------------------------------------


def span_representation(reps: torch.Tensor, span: tuple[int, int]) -> torch.Tensor:
    """Mean of the token vectors inside a half-open span."""
    start, end = span
    if start >= end:
        raise EmptySpan(f"span ({start}, {end}) is empty")
    if start < 0 or end > reps.shape[0]:
        raise OutOfBounds(f"span ({start}, {end}) outside sequence of {reps.shape[0]}")
    return reps[start:end].mean(dim=0)


class _ExtractorModule(nn.Module):
    def __init__(self, vocab_size: int, schema: LabelSchema, n_global: int,
                 dim: int, n_layers: int, n_heads: int, ffn_dim: int, max_len: int):
        super().__init__()
        self.encoder = TokenEncoder(vocab_size, dim, n_layers, n_heads, ffn_dim, max_len)
        self.trigger_crf = LinearChainCrf(dim, len(schema.trigger_tags))
        self.argument_crf = LinearChainCrf(dim, len(schema.role_tags))
        self.trigger_cls = nn.Linear(dim, len(schema.trigger_types))
        self.role_cls = nn.Linear(2 * dim, len(schema.argument_roles) + 1)
        self.global_weights = nn.Parameter(torch.randn(max(n_global, 1)) * 0.01)


class EventExtractor(BaseEstimator):
    """Trigger/argument extraction model with a scikit-learn flavored API."""

    def __init__(
        self,
        hidden_dim: int = 64,
        num_layers: int = 2,
        num_heads: int = 4,
        ffn_dim: int = 128,
        max_len: int = 64,
        epochs: int = 10,
        lr: float = 1e-3,
        batch_size: int = 16,
        seed: int = 0,
        global_templates: tuple[str, ...] = DEFAULT_TEMPLATES,
    ):
        self.hidden_dim = hidden_dim
        self.num_layers = num_layers
        self.num_heads = num_heads
        self.ffn_dim = ffn_dim
        self.max_len = max_len
        self.epochs = epochs
        self.lr = lr
        self.batch_size = batch_size
        self.seed = seed
        self.global_templates = global_templates

    # -- construction -------------------------------------------------------

    def build(
        self,
        sentences: list[LabeledSentence],
        schema: LabelSchema | None = None,
        vocab_sentences: list[LabeledSentence] | None = None,
    ) -> "EventExtractor":
        """Initialize vocabulary, schema, and parameters without training.

        vocab_sentences widens the token table beyond the training data,
        e.g. over an unlabeled pool whose words self-training will visit.
        """
        if schema is None:
            types = sorted({ev.event_type for s in sentences for ev in s.events})
            roles = sorted({a.role for s in sentences for ev in s.events for a in ev.args})
            if not types or not roles:
                raise ValueError("cannot infer a label schema from event-free data")
            schema = LabelSchema(trigger_types=tuple(types), argument_roles=tuple(roles))
        self.schema_ = schema
        self.vocab_ = Vocab.build(
            [list(s.tokens) for s in sentences]
            + [list(s.tokens) for s in (vocab_sentences or [])]
        )
        self.features_ = GlobalFeatures(schema, GlobalFeatureConfig(tuple(self.global_templates)))
        torch.manual_seed(self.seed)
        self.module_ = _ExtractorModule(
            vocab_size=len(self.vocab_),
            schema=schema,
            n_global=len(self.features_),
            dim=self.hidden_dim,
            n_layers=self.num_layers,
            n_heads=self.num_heads,
            ffn_dim=self.ffn_dim,
            max_len=self.max_len,
        )
        self.history_: list[dict] = []
        return self

    def _check_built(self):
        if not hasattr(self, "module_"):
            raise RuntimeError("extractor is not fitted; call fit() or build() first")

    # -- parameter groups ----------------------------------------------------

    def encoder_parameters(self):
        return list(self.module_.encoder.parameters())

    def head_parameters(self):
        encoder_ids = {id(p) for p in self.module_.encoder.parameters()}
        return [p for p in self.module_.parameters() if id(p) not in encoder_ids]

    def stage2_frozen_parameters(self):
        """The identification (CRF) layers and the global feature weights
        stay fixed during self-training; only the encoder and the two span
        classifiers keep learning."""
        return [
            *self.module_.trigger_crf.parameters(),
            *self.module_.argument_crf.parameters(),
            self.module_.global_weights,
        ]

    # -- encoding ------------------------------------------------------------

    def encode(self, tokens: list[str]) -> torch.Tensor:
        """Contextual representation of one sentence, shape (N, dim)."""
        self._check_built()
        if len(tokens) == 0:
            raise EmptyInput("cannot encode an empty sentence")
        with torch.no_grad():
            reps, _ = self.encode_batch([list(tokens)])
        return reps[0, : len(tokens)]

    def encode_batch(self, token_lists: list[list[str]]) -> tuple[torch.Tensor, torch.Tensor]:
        """Gradient-enabled padded batch encoding; returns (reps, lengths)."""
        self._check_built()
        ids = [self.vocab_.encode(toks) for toks in token_lists]
        batch, lengths = pad_batch(ids)
        return self.module_.encoder(batch, lengths), lengths

    # -- classifiers ----------------------------------------------------------

    def classify_trigger(self, span_vec: torch.Tensor) -> torch.Tensor:
        if span_vec.shape[-1] != self.hidden_dim:
            raise ShapeMismatch(f"expected width {self.hidden_dim}")
        return torch.softmax(self.module_.trigger_cls(span_vec), dim=-1)

    def classify_role(self, trigger_vec: torch.Tensor, arg_vec: torch.Tensor) -> torch.Tensor:
        if trigger_vec.shape[-1] != self.hidden_dim or arg_vec.shape[-1] != self.hidden_dim:
            raise ShapeMismatch(f"expected width {self.hidden_dim}")
        return torch.softmax(self.module_.role_cls(torch.cat([trigger_vec, arg_vec], dim=-1)), dim=-1)

    # -- losses ---------------------------------------------------------------

    def _bio_tensors(self, sentences: list[LabeledSentence], max_len: int):
        schema = self.schema_
        trig_tags, arg_tags = [], []
        for sent in sentences:
            n = len(sent.tokens)
            t_spans = [(ev.trigger_start, ev.trigger_end, ev.event_type) for ev in sent.events]
            a_spans = [(a.start, a.end, a.role) for ev in sent.events for a in ev.args]
            trig = spans_to_bio(t_spans, n, schema.trigger_tags) + [0] * (max_len - n)
            arg = spans_to_bio(a_spans, n, schema.role_tags) + [0] * (max_len - n)
            trig_tags.append(trig)
            arg_tags.append(arg)
        return torch.tensor(trig_tags, dtype=torch.long), torch.tensor(arg_tags, dtype=torch.long)

    def _classification_losses(self, reps: torch.Tensor, sentences: list[LabeledSentence]):
        """Per-sentence summed cross-entropies for trigger types and roles."""
        module = self.module_
        schema = self.schema_
        dtype = reps.dtype
        tri_loss = torch.zeros(len(sentences), dtype=dtype)
        arg_loss = torch.zeros(len(sentences), dtype=dtype)

        trig_vecs, trig_targets, trig_owner = [], [], []
        pair_vecs, pair_targets, pair_owner = [], [], []
        for b, sent in enumerate(sentences):
            spans = {}
            for ev in sent.events:
                for a in ev.args:
                    spans.setdefault((a.start, a.end), None)
            arg_spans = sorted(spans)
            for ev in sent.events:
                tvec = span_representation(reps[b], ev.trigger_span)
                trig_vecs.append(tvec)
                trig_targets.append(schema.type_id(ev.event_type))
                trig_owner.append(b)
                roles = {(a.start, a.end): a.role for a in ev.args}
                for span in arg_spans:
                    avec = span_representation(reps[b], span)
                    pair_vecs.append(torch.cat([tvec, avec]))
                    pair_targets.append(schema.role_id(roles.get(span, "O")))
                    pair_owner.append(b)
        if trig_vecs:
            logits = module.trigger_cls(torch.stack(trig_vecs))
            losses = F.cross_entropy(logits, torch.tensor(trig_targets), reduction="none")
            tri_loss = tri_loss.index_add(0, torch.tensor(trig_owner), losses)
        if pair_vecs:
            logits = module.role_cls(torch.stack(pair_vecs))
            losses = F.cross_entropy(logits, torch.tensor(pair_targets), reduction="none")
            arg_loss = arg_loss.index_add(0, torch.tensor(pair_owner), losses)
        return tri_loss, arg_loss

    def _global_losses(self, reps: torch.Tensor, lengths: torch.Tensor, sentences: list[LabeledSentence]):
        """Hinge gap between predicted-graph and gold-graph global scores."""
        weights = self.module_.global_weights
        predictions = self._predict_from_reps(reps.detach(), lengths)
        gaps = []
        for sent, pred in zip(sentences, predictions):
            pred_score = global_score(pred, self.features_, weights)
            gold_score = global_score(gold_prediction(sent), self.features_, weights)
            gaps.append(torch.clamp(pred_score - gold_score, min=0.0))
        return torch.stack(gaps)

    def supervised_loss(self, sentences: list[LabeledSentence], include_global: bool = True):
        """Full training loss on gold sentences; returns (total, components)."""
        self._check_built()
        if not sentences:
            raise EmptyInput("empty batch")
        reps, lengths = self.encode_batch([list(s.tokens) for s in sentences])
        return self.supervised_loss_from_reps(reps, lengths, sentences, include_global)

    def supervised_loss_from_reps(self, reps, lengths, sentences, include_global: bool = True):
        module = self.module_
        max_len = reps.shape[1]
        trig_tags, arg_tags = self._bio_tensors(sentences, max_len)
        tri_i = module.trigger_crf.nll(reps, trig_tags, lengths)
        arg_i = module.argument_crf.nll(reps, arg_tags, lengths)
        tri_c, arg_c = self._classification_losses(reps, sentences)
        if include_global:
            glob = self._global_losses(reps, lengths, sentences)
        else:
            glob = torch.zeros_like(tri_i)
        total = (tri_i + arg_i + tri_c + arg_c + glob).mean()
        components = {
            "trigger_identification": tri_i.mean(),
            "argument_identification": arg_i.mean(),
            "trigger_classification": tri_c.mean(),
            "argument_classification": arg_c.mean(),
            "global": glob.mean(),
        }
        return total, components

    def pair_losses(
        self,
        reps: torch.Tensor,
        lengths: torch.Tensor,
        pairs: list[tuple[int, tuple[int, int], str, tuple[int, int], str]],
        include_global: bool = False,
    ) -> torch.Tensor:
        """Per-pair supervised loss, treating each (trigger, argument, role)
        tuple as the entire gold annotation of its sentence.

        pairs entries: (row index into reps, trigger span, event type,
        argument span, role).
        """
        self._check_built()
        module = self.module_
        schema = self.schema_
        max_len = reps.shape[1]

        rows = torch.tensor([p[0] for p in pairs], dtype=torch.long)
        pair_reps = reps[rows]
        pair_lengths = lengths[rows]
        trig_tags, arg_tags = [], []
        for _, tspan, ttype, aspan, role in pairs:
            trig_tags.append(spans_to_bio([(tspan[0], tspan[1], ttype)], max_len, schema.trigger_tags))
            arg_tags.append(spans_to_bio([(aspan[0], aspan[1], role)], max_len, schema.role_tags))
        tri_i = module.trigger_crf.nll(pair_reps, torch.tensor(trig_tags, dtype=torch.long), pair_lengths)
        arg_i = module.argument_crf.nll(pair_reps, torch.tensor(arg_tags, dtype=torch.long), pair_lengths)

        trig_vecs, type_ids, role_pair_vecs, role_ids = [], [], [], []
        for row, tspan, ttype, aspan, role in pairs:
            tvec = span_representation(reps[row], tspan)
            avec = span_representation(reps[row], aspan)
            trig_vecs.append(tvec)
            type_ids.append(schema.type_id(ttype))
            role_pair_vecs.append(torch.cat([tvec, avec]))
            role_ids.append(schema.role_id(role))
        tri_c = F.cross_entropy(
            module.trigger_cls(torch.stack(trig_vecs)), torch.tensor(type_ids), reduction="none"
        )
        arg_c = F.cross_entropy(
            module.role_cls(torch.stack(role_pair_vecs)), torch.tensor(role_ids), reduction="none"
        )
        total = tri_i + arg_i + tri_c + arg_c
        if include_global:
            weights = module.global_weights
            predictions = self._predict_from_reps(reps.detach(), lengths)
            gaps = []
            for row, tspan, ttype, aspan, role in pairs:
                gold = EventGraphPrediction(
                    triggers=(TriggerPrediction(span=tspan, event_type=ttype, probability=1.0),),
                    arguments=(ArgumentPrediction(trigger_index=0, span=aspan, role=role, probability=1.0),),
                )
                gaps.append(
                    torch.clamp(
                        global_score(predictions[row], self.features_, weights)
                        - global_score(gold, self.features_, weights),
                        min=0.0,
                    )
                )
            total = total + torch.stack(gaps)
        return total

    # -- training --------------------------------------------------------------

    def fit(self, sentences: list[LabeledSentence], schema: LabelSchema | None = None):
        """Stage-1 supervised training."""
        if not hasattr(self, "module_"):
            self.build(sentences, schema)
        rng = np.random.default_rng(self.seed)
        optimizer = torch.optim.Adam(self.module_.parameters(), lr=self.lr)
        for epoch in range(self.epochs):
            self.train_epoch(sentences, optimizer, rng, epoch)
        return self

    def train_epoch(self, sentences, optimizer, rng, epoch: int) -> float:
        """One supervised pass; returns the mean batch loss."""
        order = rng.permutation(len(sentences))
        losses = []
        self.module_.train()
        for start in range(0, len(order), self.batch_size):
            batch = [sentences[i] for i in order[start : start + self.batch_size]]
            total, _ = self.supervised_loss(batch)
            if not torch.isfinite(total):
                raise NonFiniteLoss(f"supervised loss diverged in epoch {epoch}")
            optimizer.zero_grad()
            total.backward()
            optimizer.step()
            losses.append(float(total.detach()))
        mean_loss = float(np.mean(losses)) if losses else 0.0
        self.history_.append({"epoch": epoch, "loss": mean_loss})
        return mean_loss

    # -- prediction --------------------------------------------------------------

    def predict(self, sentences, batch_size: int = 128) -> list[EventGraphPrediction]:
        """Decode event graphs for LabeledSentence objects or token lists."""
        self._check_built()
        token_lists = [list(s.tokens) if isinstance(s, LabeledSentence) else list(s) for s in sentences]
        if any(len(t) == 0 for t in token_lists):
            raise EmptyInput("cannot predict on an empty sentence")
        out: list[EventGraphPrediction] = []
        self.module_.eval()
        for start in range(0, len(token_lists), batch_size):
            chunk = token_lists[start : start + batch_size]
            with torch.no_grad():
                reps, lengths = self.encode_batch(chunk)
                out.extend(self._predict_from_reps(reps, lengths))
        return out

    def _predict_from_reps(self, reps, lengths) -> list[EventGraphPrediction]:
        module = self.module_
        schema = self.schema_
        with torch.no_grad():
            trig_paths = module.trigger_crf.decode_batch(reps, lengths)
            arg_paths = module.argument_crf.decode_batch(reps, lengths)
            predictions = []
            for b in range(reps.shape[0]):
                t_tags = repair_bio(trig_paths[b], schema.trigger_tags)
                a_tags = repair_bio(arg_paths[b], schema.role_tags)
                t_spans = [(s, e) for s, e, _ in bio_to_spans(t_tags, schema.trigger_tags)]
                a_spans = [(s, e) for s, e, _ in bio_to_spans(a_tags, schema.role_tags)]
                triggers = []
                arguments = []
                for span in t_spans:
                    dist = self.classify_trigger(span_representation(reps[b], span))
                    type_id = int(dist.argmax())
                    triggers.append(
                        TriggerPrediction(
                            span=span,
                            event_type=schema.type_name(type_id),
                            probability=float(dist[type_id]),
                        )
                    )
                for ti, span_t in enumerate(t_spans):
                    tvec = span_representation(reps[b], span_t)
                    for span_a in a_spans:
                        dist = self.classify_role(tvec, span_representation(reps[b], span_a))
                        role_id = int(dist.argmax())
                        if role_id == schema.role_o_id:
                            continue
                        arguments.append(
                            ArgumentPrediction(
                                trigger_index=ti,
                                span=span_a,
                                role=schema.role_name(role_id),
                                probability=float(dist[role_id]),
                            )
                        )
                predictions.append(
                    EventGraphPrediction(triggers=tuple(triggers), arguments=tuple(arguments))
                )
        return predictions
