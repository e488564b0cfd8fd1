"""Compatibility scorer for (event type, graph path, argument role) triples.

The scorer embeds the serialized path between a predicted trigger and
argument, runs a small self-attention stack over it, mean-pools, and emits
a correctness probability through a sigmoid head. Training uses binary
cross-entropy on gold pairs against role-swapped negatives. A path-free
variant (use_path=False) sees only the event mention itself and serves as
the ablation baseline.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from sklearn.base import BaseEstimator
from torch import nn

from .amr.graph import AmrGraph, ScoringSequence, align_nodes, serialize_path, shortest_path
from .amr.relations import RelationGroup, group_index
from .corpus import LabeledSentence
from .encoding import SelfAttentionBlock, TokenEncoder, Vocab, pad_batch
from .errors import DegenerateLabelSpace, NonFiniteLoss, OutOfBounds, UnalignedNode
from .labels import LabelSchema

KIND_NODE, KIND_EDGE, KIND_TYPE, KIND_ROLE = 0, 1, 2, 3
FALLBACK_ELEMENTS_KEY = "~span"


@dataclass(frozen=True)
class ScoringExample:
    """One scorer input: serialized sequence, source tokens, binary label.

    node_spans resolves the sequence's node ids to token spans; a missing
    entry surfaces as UnalignedNode at embedding time, not construction.
    """

    sequence: ScoringSequence
    tokens: tuple[str, ...]
    node_spans: dict[str, tuple[int, int] | None]
    label: int


def make_scoring_example(
    tokens,
    graph: AmrGraph,
    event_type: str,
    path,
    role: str,
    label: int,
) -> ScoringExample:
    sequence = serialize_path(event_type, path, role)
    spans = {n.id: n.token_span for n in graph.nodes}
    node_spans = {
        elem_id: spans.get(elem_id)
        for kind, elem_id in sequence.elements
        if kind == "node"
    }
    return ScoringExample(
        sequence=sequence, tokens=tuple(tokens), node_spans=node_spans, label=label
    )


def mention_sequence(event_type: str, trigger_span, arg_span, role: str) -> ScoringSequence:
    """Path-free input: [event type, trigger node, argument node, role]."""
    return ScoringSequence(
        event_type=event_type,
        elements=(
            ("node", f"{FALLBACK_ELEMENTS_KEY}:{trigger_span[0]}:{trigger_span[1]}"),
            ("node", f"{FALLBACK_ELEMENTS_KEY}:{arg_span[0]}:{arg_span[1]}"),
        ),
        role=role,
    )


def span_keyed_example(tokens, event_type: str, trigger_span, arg_span, role: str, label: int) -> ScoringExample:
    seq = mention_sequence(event_type, trigger_span, arg_span, role)
    node_spans = {
        f"{FALLBACK_ELEMENTS_KEY}:{s}:{e}": (s, e) for s, e in (trigger_span, arg_span)
    }
    return ScoringExample(sequence=seq, tokens=tuple(tokens), node_spans=node_spans, label=label)


def make_negatives(
    gold_examples: list[ScoringExample],
    roles: list[str],
    rng: np.random.Generator,
) -> list[ScoringExample]:
    """One role-swapped negative per positive; the wrong role is sampled
    uniformly from the remaining roles."""
    if len(roles) < 2:
        raise DegenerateLabelSpace("need at least two roles to sample a wrong one")
    negatives = []
    for ex in gold_examples:
        alternatives = [r for r in roles if r != ex.sequence.role]
        wrong = alternatives[int(rng.integers(len(alternatives)))]
        negatives.append(
            ScoringExample(
                sequence=ScoringSequence(
                    event_type=ex.sequence.event_type,
                    elements=ex.sequence.elements,
                    role=wrong,
                ),
                tokens=ex.tokens,
                node_spans=ex.node_spans,
                label=0,
            )
        )
    return negatives


def build_scoring_examples(
    sentences: list[LabeledSentence],
    amr: dict[str, AmrGraph],
    use_path: bool = True,
) -> list[ScoringExample]:
    """Positive examples from gold annotations and their graphs."""
    examples = []
    for sent in sentences:
        graph = amr.get(sent.sent_id)
        if graph is None:
            continue
        for ev in sent.events:
            for arg in ev.args:
                if use_path:
                    example = _path_example(
                        sent.tokens, graph, ev.trigger_span, ev.event_type,
                        (arg.start, arg.end), arg.role, label=1,
                    )
                else:
                    example = span_keyed_example(
                        sent.tokens, ev.event_type, ev.trigger_span,
                        (arg.start, arg.end), arg.role, label=1,
                    )
                examples.append(example)
    return examples


def _path_example(tokens, graph, trigger_span, event_type, arg_span, role, label) -> ScoringExample:
    aligned = align_nodes(graph, list(tokens), [trigger_span, arg_span])
    src, dst = aligned
    if src is not None and dst is not None and src != dst:
        path = shortest_path(graph, src, dst)
        example = make_scoring_example(tokens, graph, event_type, path, role, label)
        spans = dict(example.node_spans)
        # endpoints fall back to the mention spans if the graph nodes are bare
        if spans.get(src) is None:
            spans[src] = tuple(trigger_span)
        if spans.get(dst) is None:
            spans[dst] = tuple(arg_span)
        return ScoringExample(
            sequence=example.sequence, tokens=example.tokens, node_spans=spans, label=label
        )
    # unalignable pair: degrade to the mention plus the synthetic relation
    seq = mention_sequence(event_type, trigger_span, arg_span, role)
    seq = ScoringSequence(
        event_type=seq.event_type,
        elements=(seq.elements[0], ("edge", RelationGroup.OTHERS.value), seq.elements[1]),
        role=seq.role,
    )
    node_spans = {
        f"{FALLBACK_ELEMENTS_KEY}:{s}:{e}": (s, e) for s, e in (trigger_span, arg_span)
    }
    return ScoringExample(sequence=seq, tokens=tuple(tokens), node_spans=node_spans, label=label)


class _ScorerModule(nn.Module):
    def __init__(self, vocab_size: int, n_types: int, n_roles: int, dim: int,
                 n_layers: int, n_heads: int, ffn_dim: int, max_seq_len: int,
                 max_sentence_len: int):
        super().__init__()
        self.encoder = TokenEncoder(vocab_size, dim, 2, n_heads, ffn_dim, max_sentence_len)
        self.relation_emb = nn.Embedding(len(RelationGroup), dim)
        self.type_emb = nn.Embedding(n_types, dim)
        self.role_emb = nn.Embedding(n_roles + 1, dim)
        self.position_emb = nn.Embedding(max_seq_len, dim)
        self.kind_emb = nn.Embedding(4, dim)
        self.blocks = nn.ModuleList(
            SelfAttentionBlock(dim, n_heads, ffn_dim) for _ in range(n_layers)
        )
        self.norm = nn.LayerNorm(dim)
        self.head = nn.Linear(dim, 1)


class CompatibilityScorer(BaseEstimator):
    """Correctness estimator for predicted (trigger, argument, role) pairs."""

    def __init__(
        self,
        hidden_dim: int = 64,
        num_attention_layers: int = 2,
        num_heads: int = 4,
        ffn_dim: int = 128,
        epochs: int = 40,
        lr: float = 1e-3,
        batch_size: int = 32,
        seed: int = 0,
        use_path: bool = True,
        use_positions: bool = True,
        use_token_types: bool = True,
        max_seq_len: int = 32,
        max_sentence_len: int = 64,
    ):
        self.hidden_dim = hidden_dim
        self.num_attention_layers = num_attention_layers
        self.num_heads = num_heads
        self.ffn_dim = ffn_dim
        self.epochs = epochs
        self.lr = lr
        self.batch_size = batch_size
        self.seed = seed
        self.use_path = use_path
        self.use_positions = use_positions
        self.use_token_types = use_token_types
        self.max_seq_len = max_seq_len
        self.max_sentence_len = max_sentence_len

    # -- construction ---------------------------------------------------------

    def build(self, schema: LabelSchema, sentences: list[list[str]]) -> "CompatibilityScorer":
        self.schema_ = schema
        self.vocab_ = Vocab.build(sentences)
        torch.manual_seed(self.seed)
        self.module_ = _ScorerModule(
            vocab_size=len(self.vocab_),
            n_types=len(schema.trigger_types),
            n_roles=len(schema.argument_roles),
            dim=self.hidden_dim,
            n_layers=self.num_attention_layers,
            n_heads=self.num_heads,
            ffn_dim=self.ffn_dim,
            max_seq_len=self.max_seq_len,
            max_sentence_len=self.max_sentence_len,
        )
        self.history_: list[dict] = []
        return self

    def _check_built(self):
        if not hasattr(self, "module_"):
            raise RuntimeError("scorer is not fitted; call fit() or build() first")

    # -- embedding ------------------------------------------------------------

    def _rows(self, example: ScoringExample, token_reps: torch.Tensor):
        """Per-element rows from one sentence's contextual token matrix."""
        module = self.module_
        schema = self.schema_
        seq = example.sequence
        if len(seq) > self.max_seq_len:
            raise OutOfBounds(f"sequence of {len(seq)} elements exceeds {self.max_seq_len}")
        rows = [module.type_emb.weight[schema.type_id(seq.event_type)]]
        kinds = [KIND_TYPE]
        for kind, elem_id in seq.elements:
            if kind == "node":
                span = example.node_spans.get(elem_id)
                if span is None:
                    raise UnalignedNode(f"path node {elem_id} has no token span")
                rows.append(token_reps[span[0]: span[1]].mean(dim=0))
                kinds.append(KIND_NODE)
            else:
                rows.append(module.relation_emb.weight[group_index(RelationGroup(elem_id))])
                kinds.append(KIND_EDGE)
        rows.append(module.role_emb.weight[schema.role_id(seq.role)])
        kinds.append(KIND_ROLE)
        h = torch.stack(rows)
        if self.use_positions:
            h = h + module.position_emb.weight[: h.shape[0]]
        if self.use_token_types:
            h = h + module.kind_emb(torch.tensor(kinds, dtype=torch.long))
        return h

    def embed_sequence(self, example: ScoringExample) -> torch.Tensor:
        """Initial row-per-element representation, positions and token types
        added in."""
        self._check_built()
        ids, lengths = pad_batch([self.vocab_.encode(list(example.tokens))])
        token_reps = self.module_.encoder(ids, lengths)[0]
        return self._rows(example, token_reps)

    def _logit(self, example: ScoringExample) -> torch.Tensor:
        h = self.embed_sequence(example).unsqueeze(0)
        for block in self.module_.blocks:
            h = block(h)
        pooled = self.module_.norm(h[0]).mean(dim=0)
        return self.module_.head(pooled).squeeze(-1)

    def _batched_logits(self, examples: list[ScoringExample]) -> torch.Tensor:
        """Padded-batch forward used during training; numerically equivalent
        to the per-example path up to float reduction order."""
        module = self.module_
        row_of: dict[tuple[str, ...], int] = {}
        for ex in examples:
            row_of.setdefault(ex.tokens, len(row_of))
        ids = [self.vocab_.encode(list(tokens)) for tokens in row_of]
        batch, lengths = pad_batch(ids)
        token_reps = module.encoder(batch, lengths)

        per_example = [self._rows(ex, token_reps[row_of[ex.tokens]]) for ex in examples]
        max_rows = max(h.shape[0] for h in per_example)
        stacked = torch.zeros(len(examples), max_rows, self.hidden_dim, dtype=per_example[0].dtype)
        mask = torch.zeros(len(examples), max_rows, dtype=torch.bool)
        for i, h in enumerate(per_example):
            stacked[i, : h.shape[0]] = h
            mask[i, : h.shape[0]] = True
        h = stacked
        for block in module.blocks:
            h = block(h, mask)
        normed = module.norm(h)
        fmask = mask.unsqueeze(-1).to(normed.dtype)
        pooled = (normed * fmask).sum(dim=1) / fmask.sum(dim=1)
        return module.head(pooled).squeeze(-1)

    # -- scoring ----------------------------------------------------------------

    def score(self, example: ScoringExample) -> float:
        """Correctness probability in (0, 1)."""
        self._check_built()
        with torch.no_grad():
            return float(torch.sigmoid(self._logit(example)))

    def score_many(self, examples: list[ScoringExample]) -> list[float]:
        # scored one by one: per-example output must not depend on batch
        # composition
        return [self.score(ex) for ex in examples]

    def make_pair_example(
        self,
        tokens,
        graph: AmrGraph | None,
        trigger_span,
        event_type: str,
        arg_span,
        role: str,
    ) -> ScoringExample:
        """Build the scoring input for one predicted pair, honoring the
        path/no-path mode."""
        if self.use_path and graph is not None:
            return _path_example(tokens, graph, trigger_span, event_type, arg_span, role, label=0)
        return span_keyed_example(tokens, event_type, trigger_span, arg_span, role, label=0)

    def score_pair(
        self,
        tokens,
        graph: AmrGraph | None,
        trigger_span,
        event_type: str,
        arg_span,
        role: str,
    ) -> float:
        """Align, extract the path, serialize, and score one predicted pair.

        With use_path=False (or no graph) only the mention itself is scored.
        """
        return self.score(self.make_pair_example(tokens, graph, trigger_span, event_type, arg_span, role))

    def score_examples_batched(self, examples: list[ScoringExample], chunk: int = 64) -> list[float]:
        """Throughput-oriented scoring for the self-training loop; outputs
        may differ from score() only in float reduction order."""
        self._check_built()
        out: list[float] = []
        with torch.no_grad():
            for start in range(0, len(examples), chunk):
                logits = self._batched_logits(examples[start : start + chunk])
                out.extend(float(v) for v in torch.sigmoid(logits))
        return out

    # -- training -----------------------------------------------------------------

    def fit(self, examples: list[ScoringExample], schema: LabelSchema | None = None):
        """Minimize BCE over labeled examples, then freeze the parameters."""
        labels = {ex.label for ex in examples}
        if labels != {0, 1}:
            raise DegenerateLabelSpace("training needs both positive and negative examples")
        if not hasattr(self, "module_"):
            if schema is None:
                raise ValueError("schema required on first fit")
            self.build(schema, [list(ex.tokens) for ex in examples])
        rng = np.random.default_rng(self.seed)
        optimizer = torch.optim.Adam(self.module_.parameters(), lr=self.lr)
        self.module_.train()
        for epoch in range(self.epochs):
            order = rng.permutation(len(examples))
            epoch_loss = 0.0
            for start in range(0, len(order), self.batch_size):
                batch = [examples[i] for i in order[start: start + self.batch_size]]
                logits = self._batched_logits(batch)
                targets = torch.tensor([float(ex.label) for ex in batch], dtype=logits.dtype)
                loss = F.binary_cross_entropy_with_logits(logits, targets)
                if not torch.isfinite(loss):
                    raise NonFiniteLoss(f"scorer loss diverged in epoch {epoch}")
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                epoch_loss += float(loss.detach()) * len(batch)
            self.history_.append({"epoch": epoch, "bce": epoch_loss / len(examples)})
        self.freeze()
        return self

    def freeze(self):
        self._check_built()
        self.module_.eval()
        for p in self.module_.parameters():
            p.requires_grad_(False)

    def mean_bce(self, examples: list[ScoringExample]) -> float:
        self._check_built()
        with torch.no_grad():
            logits = self._batched_logits(examples)
            targets = torch.tensor([float(ex.label) for ex in examples], dtype=logits.dtype)
            return float(F.binary_cross_entropy_with_logits(logits, targets))
