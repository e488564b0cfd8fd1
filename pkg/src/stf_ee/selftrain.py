"""Two-stage training: supervised warm-up, then minibatch self-training.

Stage 2 mixes one labeled minibatch and one pseudo-labeled minibatch per
update. Each pseudo pair's supervised loss is multiplied by a frozen weight
in [-1, 1] obtained from the compatibility score (2c - 1), so confidently
wrong pseudo labels push the model away from them while uncertain ones
contribute almost nothing. The vanilla baseline instead keeps
high-probability predictions at full weight, and the supervised baseline is
the degenerate case with no unlabeled data at all; all three share one loop
so that like-for-like comparisons differ only in how pseudo samples are
built and weighted.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
import torch

from .amr.graph import AmrGraph
from .corpus import LabeledSentence, sample_wrong_role
from .errors import NonFiniteLoss, OutOfRange, UnalignedNode
from .extractor import EventExtractor
from .scorer import CompatibilityScorer

logger = logging.getLogger(__name__)


def compat_transform(c: float) -> float:
    """Affine map from a correctness probability to a signed loss weight."""
    if not 0.0 <= c <= 1.0:
        raise OutOfRange(f"compatibility must be in [0, 1], got {c}")
    return 2.0 * c - 1.0


def beta_schedule(epoch: int, total_epochs: int) -> float:
    """Linear ramp of the self-training mixing ratio."""
    if total_epochs <= 0:
        raise OutOfRange("total_epochs must be positive")
    if not 0 <= epoch <= total_epochs:
        raise OutOfRange(f"epoch {epoch} outside [0, {total_epochs}]")
    return epoch / total_epochs


@dataclass(frozen=True)
class PseudoSample:
    """One predicted (trigger, argument, role) tuple on an unlabeled sentence."""

    sent_index: int
    sent_id: str
    tokens: tuple[str, ...]
    trigger_span: tuple[int, int]
    trigger_type: str
    trigger_probability: float
    arg_span: tuple[int, int]
    role: str
    model_probability: float
    compatibility: float | None = None
    weight: float = 1.0
    corrupted: bool = False


def threshold_filter(samples: list[PseudoSample], s_st: float) -> list[PseudoSample]:
    """Keep confidently-positive (c > s) and confidently-negative (c < 1-s)
    samples; equality drops."""
    if not 0.5 <= s_st <= 1.0:
        raise OutOfRange(f"certainty threshold must be in [0.5, 1], got {s_st}")
    kept = []
    for sample in samples:
        if sample.compatibility is None:
            raise ValueError(f"sample on {sample.sent_id} has no compatibility score")
        if sample.compatibility > s_st or sample.compatibility < 1.0 - s_st:
            kept.append(sample)
    return kept


@dataclass
class StfConfig:
    """Training schedule and optimizer knobs for both stages."""

    stage1_epochs: int = 10
    total_epochs: int = 70
    labeled_batch_size: int = 16
    stage2_batch_size: int = 10
    stage1_lr: float = 1e-3
    encoder_lr: float = 1e-4
    head_lr: float = 1e-3
    encoder_weight_decay: float = 1e-5
    head_weight_decay: float = 5e-5
    vanilla_threshold: float = 0.9
    certainty_threshold: float | None = None
    pseudo_noise_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.stage1_epochs <= 0 or self.total_epochs <= 0:
            raise OutOfRange("epoch counts must be positive")
        if not 0.5 <= self.vanilla_threshold <= 1.0:
            raise OutOfRange("vanilla threshold must be in [0.5, 1]")
        if self.certainty_threshold is not None and not 0.5 <= self.certainty_threshold <= 1.0:
            raise OutOfRange("certainty threshold must be in [0.5, 1]")
        if not 0.0 <= self.pseudo_noise_rate <= 1.0:
            raise OutOfRange("pseudo_noise_rate must be in [0, 1]")
        if self.labeled_batch_size <= 0 or self.stage2_batch_size <= 0:
            raise OutOfRange("batch sizes must be positive")


@dataclass
class EpochRecord:
    epoch: int
    stage: int
    beta: float
    labeled_loss: float
    stf_loss: float
    pseudo_count: int
    mean_compatibility: float | None
    dev_metrics: dict = field(default_factory=dict)
    state: dict | None = None

    def log_record(self) -> dict:
        return {
            "epoch": self.epoch,
            "beta": self.beta,
            "labeled_loss": self.labeled_loss,
            "stf_loss": self.stf_loss,
            "pseudo_count": self.pseudo_count,
            "mean_compatibility": self.mean_compatibility,
            "dev_metrics": self.dev_metrics,
        }

    @property
    def criteria(self) -> dict:
        out = {}
        if self.mean_compatibility is not None:
            out["avg_compat"] = self.mean_compatibility
        if "arg_c_f1" in self.dev_metrics:
            out["dev_f1"] = self.dev_metrics["arg_c_f1"]
        return out


@dataclass
class CheckpointSeries:
    records: list[EpochRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def final(self) -> EpochRecord:
        return self.records[-1]

    def write_log(self, path: str):
        with open(path, "w", encoding="utf-8") as fh:
            for rec in self.records:
                fh.write(json.dumps(rec.log_record()) + "\n")


# ---------------------------------------------------------------------------
# Pseudo-label generation
# ---------------------------------------------------------------------------


def generate_pseudo_labels(
    extractor: EventExtractor,
    unlabeled: list[LabeledSentence],
    scorer: CompatibilityScorer,
    amr: dict[str, AmrGraph],
    noise_rate: float = 0.0,
    rng: np.random.Generator | None = None,
    score_cache: dict | None = None,
) -> list[PseudoSample]:
    """Predict on the unlabeled pool, score every (trigger, argument, role)
    pair against its graph path, and attach the transformed weights.

    Sentences without a graph are skipped and counted; optional role noise
    corrupts predictions before scoring, emulating a weaker extractor.
    """
    predictions = extractor.predict(unlabeled)
    roles = list(extractor.schema_.argument_roles)
    candidates = []  # (index, sentence, graph, trigger, argument, role, corrupted, key)
    missing_amr = 0
    unaligned = 0
    for index, (sent, pred) in enumerate(zip(unlabeled, predictions)):
        if not pred.arguments:
            continue
        graph = amr.get(sent.sent_id)
        if graph is None:
            missing_amr += 1
            continue
        for arg in pred.arguments:
            trig = pred.triggers[arg.trigger_index]
            role, corrupted = arg.role, False
            if noise_rate > 0.0 and rng is not None and rng.random() < noise_rate:
                role = sample_wrong_role(role, roles, rng)
                corrupted = True
            key = (sent.sent_id, trig.span, trig.event_type, arg.span, role)
            candidates.append((index, sent, graph, trig, arg, role, corrupted, key))

    # scores are constant for a frozen scorer, so they are cached by pair
    # identity; a None entry marks a pair that cannot be embedded
    scores: dict = score_cache if score_cache is not None else {}
    fresh = [c for c in candidates if c[7] not in scores]
    batched = hasattr(scorer, "make_pair_example") and hasattr(scorer, "score_examples_batched")
    if fresh and batched:
        examples, keys = [], []
        for index, sent, graph, trig, arg, role, corrupted, key in fresh:
            if key in scores:
                continue
            example = scorer.make_pair_example(
                sent.tokens, graph, trig.span, trig.event_type, arg.span, role
            )
            if any(v is None for v in example.node_spans.values()):
                unaligned += 1
                scores[key] = None
                continue
            examples.append(example)
            keys.append(key)
            scores[key] = 0.0  # placeholder so duplicate keys batch once
        for key, c in zip(keys, scorer.score_examples_batched(examples)):
            scores[key] = c
    elif fresh:
        for index, sent, graph, trig, arg, role, corrupted, key in fresh:
            if key in scores:
                continue
            try:
                scores[key] = scorer.score_pair(
                    sent.tokens, graph, trig.span, trig.event_type, arg.span, role
                )
            except UnalignedNode:
                unaligned += 1
                scores[key] = None

    samples: list[PseudoSample] = []
    for index, sent, graph, trig, arg, role, corrupted, key in candidates:
        c = scores[key]
        if c is None:
            continue
        samples.append(
            PseudoSample(
                sent_index=index,
                sent_id=sent.sent_id,
                tokens=sent.tokens,
                trigger_span=trig.span,
                trigger_type=trig.event_type,
                trigger_probability=trig.probability,
                arg_span=arg.span,
                role=role,
                model_probability=arg.probability,
                compatibility=c,
                weight=compat_transform(c),
                corrupted=corrupted,
            )
        )
    if missing_amr:
        logger.warning("skipped %d unlabeled sentences without an AMR graph", missing_amr)
    if unaligned:
        logger.warning("skipped %d pairs whose path nodes lack token spans", unaligned)
    return samples


def generate_vanilla_pseudo_labels(
    extractor: EventExtractor,
    unlabeled: list[LabeledSentence],
    threshold: float,
    noise_rate: float = 0.0,
    rng: np.random.Generator | None = None,
) -> list[PseudoSample]:
    """Probability-filtered pseudo labels at unit weight.

    Noise is injected before filtering and leaves the model probability
    untouched, mirroring the calibration gap of an overconfident model.
    """
    predictions = extractor.predict(unlabeled)
    roles = list(extractor.schema_.argument_roles)
    samples = []
    for index, (sent, pred) in enumerate(zip(unlabeled, predictions)):
        for arg in pred.arguments:
            trig = pred.triggers[arg.trigger_index]
            role, corrupted = arg.role, False
            if noise_rate > 0.0 and rng is not None and rng.random() < noise_rate:
                role = sample_wrong_role(role, roles, rng)
                corrupted = True
            if arg.probability <= threshold:
                continue
            samples.append(
                PseudoSample(
                    sent_index=index,
                    sent_id=sent.sent_id,
                    tokens=sent.tokens,
                    trigger_span=trig.span,
                    trigger_type=trig.event_type,
                    trigger_probability=trig.probability,
                    arg_span=arg.span,
                    role=role,
                    model_probability=arg.probability,
                    compatibility=None,
                    weight=1.0,
                    corrupted=corrupted,
                )
            )
    return samples


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------


def stf_loss(
    extractor: EventExtractor,
    labeled_batch: list[LabeledSentence],
    pseudo_batch: list[PseudoSample],
    beta: float,
    include_global: bool = True,
):
    """Combined loss: labeled supervised term plus beta times the mean of
    weight-scaled per-pair losses. Weights are constants; no gradient flows
    through them."""
    if beta < 0:
        raise OutOfRange(f"beta must be non-negative, got {beta}")
    labeled_total, _ = extractor.supervised_loss(labeled_batch, include_global=include_global)
    if not pseudo_batch:
        zero = labeled_total.detach() * 0.0
        return labeled_total, float(labeled_total.detach()), float(zero)
    pseudo_term = weighted_pseudo_loss(extractor, pseudo_batch, include_global=include_global)
    total = labeled_total + beta * pseudo_term
    return total, float(labeled_total.detach()), float(pseudo_term.detach())


def weighted_pseudo_loss(
    extractor: EventExtractor,
    pseudo_batch: list[PseudoSample],
    include_global: bool = False,
) -> torch.Tensor:
    """Mean over the batch of weight * per-pair supervised loss."""
    sentences: list[tuple[str, ...]] = []
    row_of: dict[tuple[str, ...], int] = {}
    pairs = []
    for sample in pseudo_batch:
        key = sample.tokens
        if key not in row_of:
            row_of[key] = len(sentences)
            sentences.append(key)
        pairs.append(
            (row_of[key], sample.trigger_span, sample.trigger_type, sample.arg_span, sample.role)
        )
    reps, lengths = extractor.encode_batch([list(t) for t in sentences])
    losses = extractor.pair_losses(reps, lengths, pairs, include_global=include_global)
    weights = torch.tensor([s.weight for s in pseudo_batch], dtype=losses.dtype)
    return (weights * losses).mean()


# ---------------------------------------------------------------------------
# Training loops
# ---------------------------------------------------------------------------


def _stage2_optimizer(extractor: EventExtractor, config: StfConfig):
    frozen = {id(p) for p in extractor.stage2_frozen_parameters()}
    for p in extractor.stage2_frozen_parameters():
        p.requires_grad_(False)
    encoder = [p for p in extractor.encoder_parameters() if id(p) not in frozen]
    heads = [p for p in extractor.head_parameters() if id(p) not in frozen]
    return torch.optim.SGD(
        [
            {"params": encoder, "lr": config.encoder_lr, "weight_decay": config.encoder_weight_decay},
            {"params": heads, "lr": config.head_lr, "weight_decay": config.head_weight_decay},
        ]
    )


def _serialize_batch(labeled_batch, pseudo_batch) -> str:
    payload = {
        "labeled": [s.sent_id for s in labeled_batch],
        "pseudo": [
            {
                "sent_id": p.sent_id,
                "trigger": list(p.trigger_span),
                "type": p.trigger_type,
                "arg": list(p.arg_span),
                "role": p.role,
                "weight": p.weight,
            }
            for p in pseudo_batch
        ],
    }
    return json.dumps(payload)


def _stage2_epoch(
    extractor: EventExtractor,
    labeled: list[LabeledSentence],
    pseudo: list[PseudoSample],
    beta: float,
    optimizer,
    rng: np.random.Generator,
    config: StfConfig,
):
    order = rng.permutation(len(labeled))
    pseudo_order = list(rng.permutation(len(pseudo))) if pseudo else []
    extractor.module_.train()
    labeled_losses, stf_losses = [], []
    cursor = 0
    for start in range(0, len(order), config.stage2_batch_size):
        batch = [labeled[i] for i in order[start : start + config.stage2_batch_size]]
        pseudo_batch: list[PseudoSample] = []
        if pseudo_order and beta > 0:
            for _ in range(min(config.stage2_batch_size, len(pseudo_order))):
                pseudo_batch.append(pseudo[pseudo_order[cursor % len(pseudo_order)]])
                cursor += 1
        total, labeled_val, stf_val = stf_loss(
            extractor, batch, pseudo_batch, beta, include_global=False
        )
        if not torch.isfinite(total):
            raise NonFiniteLoss(
                "stage-2 loss diverged; offending batch: "
                + _serialize_batch(batch, pseudo_batch)
            )
        optimizer.zero_grad()
        total.backward()
        optimizer.step()
        labeled_losses.append(labeled_val)
        stf_losses.append(stf_val)
    return float(np.mean(labeled_losses)), float(np.mean(stf_losses))


def _snapshot(extractor: EventExtractor) -> dict:
    return {k: v.detach().clone() for k, v in extractor.module_.state_dict().items()}


def _dev_metrics(extractor, dev):
    if not dev:
        return {}
    from .metrics import f1_argument_classification, f1_trigger_classification

    preds = extractor.predict(dev)
    golds = [s for s in dev]
    tri = f1_trigger_classification(preds, golds)
    arg = f1_argument_classification(preds, golds)
    return {"tri_c_f1": tri.f1, "arg_c_f1": arg.f1}


def _mean_heldout_compat(extractor, scorer, heldout, amr, cache):
    if not heldout or scorer is None or amr is None:
        return None
    from .metrics import average_compatibility

    return average_compatibility(extractor, scorer, heldout, amr, score_cache=cache)


def _self_train(
    labeled: list[LabeledSentence],
    unlabeled: list[LabeledSentence],
    scorer: CompatibilityScorer | None,
    config: StfConfig,
    amr: dict[str, AmrGraph] | None,
    mode: str,
    heldout: list[LabeledSentence] | None = None,
    dev: list[LabeledSentence] | None = None,
    extractor: EventExtractor | None = None,
) -> tuple[EventExtractor, CheckpointSeries]:
    rng = np.random.default_rng(config.seed)
    if extractor is None:
        extractor = EventExtractor(
            epochs=config.stage1_epochs,
            lr=config.stage1_lr,
            batch_size=config.labeled_batch_size,
            seed=config.seed,
        ).build(labeled, vocab_sentences=unlabeled + (heldout or []))

    series = CheckpointSeries()
    compat_cache: dict = {}
    heldout_cache: dict = {}

    stage1_opt = torch.optim.Adam(extractor.module_.parameters(), lr=config.stage1_lr)
    for epoch in range(1, config.stage1_epochs + 1):
        loss = extractor.train_epoch(labeled, stage1_opt, rng, epoch)
        series.records.append(
            EpochRecord(
                epoch=epoch,
                stage=1,
                beta=0.0,
                labeled_loss=loss,
                stf_loss=0.0,
                pseudo_count=0,
                mean_compatibility=_mean_heldout_compat(extractor, scorer, heldout, amr, heldout_cache),
                dev_metrics=_dev_metrics(extractor, dev),
                state=_snapshot(extractor),
            )
        )

    optimizer = _stage2_optimizer(extractor, config)
    for step in range(1, config.total_epochs + 1):
        if mode == "stf":
            beta = beta_schedule(step, config.total_epochs)
            pseudo = []
            if unlabeled:
                pseudo = generate_pseudo_labels(
                    extractor,
                    unlabeled,
                    scorer,
                    amr or {},
                    noise_rate=config.pseudo_noise_rate,
                    rng=rng,
                    score_cache=compat_cache,
                )
                if config.certainty_threshold is not None:
                    pseudo = threshold_filter(pseudo, config.certainty_threshold)
        elif mode == "vanilla":
            beta = 1.0
            pseudo = []
            if unlabeled:
                pseudo = generate_vanilla_pseudo_labels(
                    extractor,
                    unlabeled,
                    threshold=config.vanilla_threshold,
                    noise_rate=config.pseudo_noise_rate,
                    rng=rng,
                )
        else:
            raise ValueError(f"unknown mode {mode!r}")

        labeled_loss, stf_val = _stage2_epoch(
            extractor, labeled, pseudo, beta, optimizer, rng, config
        )
        compat_values = [p.compatibility for p in pseudo if p.compatibility is not None]
        series.records.append(
            EpochRecord(
                epoch=config.stage1_epochs + step,
                stage=2,
                beta=beta,
                labeled_loss=labeled_loss,
                stf_loss=stf_val,
                pseudo_count=len(pseudo),
                mean_compatibility=_mean_heldout_compat(extractor, scorer, heldout, amr, heldout_cache)
                if heldout
                else (float(np.mean(compat_values)) if compat_values else None),
                dev_metrics=_dev_metrics(extractor, dev),
                state=_snapshot(extractor),
            )
        )
    return extractor, series


def run_stf(
    labeled: list[LabeledSentence],
    unlabeled: list[LabeledSentence],
    scorer: CompatibilityScorer | None,
    config: StfConfig,
    amr: dict[str, AmrGraph] | None = None,
    heldout: list[LabeledSentence] | None = None,
    dev: list[LabeledSentence] | None = None,
    extractor: EventExtractor | None = None,
):
    """Supervised stage plus compatibility-weighted self-training.

    Pseudo labels are regenerated from the current model every epoch; the
    frozen scorer's outputs feed the per-pair weights. With an empty
    unlabeled pool this reduces to a purely supervised run of the same
    length.
    """
    if unlabeled and scorer is None:
        raise ValueError("a trained scorer is required when unlabeled data is given")
    return _self_train(
        labeled, unlabeled, scorer, config, amr, "stf",
        heldout=heldout, dev=dev, extractor=extractor,
    )


def vanilla_self_train(
    labeled: list[LabeledSentence],
    unlabeled: list[LabeledSentence],
    config: StfConfig,
    heldout: list[LabeledSentence] | None = None,
    dev: list[LabeledSentence] | None = None,
    scorer: CompatibilityScorer | None = None,
    amr: dict[str, AmrGraph] | None = None,
    extractor: EventExtractor | None = None,
):
    """Probability-thresholded self-training baseline.

    The scorer/amr arguments are only used for logging held-out
    compatibility; they never influence training.
    """
    return _self_train(
        labeled, unlabeled, scorer, config, amr, "vanilla",
        heldout=heldout, dev=dev, extractor=extractor,
    )
