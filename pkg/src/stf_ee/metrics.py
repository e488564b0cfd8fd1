"""Evaluation: span-matching F1, scorer agreement, compatibility-based
model selection, and threshold sweep reporting.

Span matching is exact token-interval equality, matched one-to-one greedily
in gold order. An argument counts as correct only when its span, role, and
the event type of its attached trigger all match, the strictest of the
common conventions.
"""
from __future__ import annotations

import io
import logging
from dataclasses import dataclass

from .amr.graph import AmrGraph
from .corpus import FlaggedPrediction, LabeledSentence
from .errors import EmptySeries, LengthMismatch, MissingAmr
from .extractor import EventExtractor, EventGraphPrediction, gold_prediction

logger = logging.getLogger(__name__)

AGREEMENT_THRESHOLD = 0.5
SWEEP_THRESHOLDS = (0.5, 0.6, 0.7, 0.8, 0.9)


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int


def _prf(tp: int, fp: int, fn: int) -> PRF:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return PRF(precision=precision, recall=recall, f1=f1, tp=tp, fp=fp, fn=fn)


def _as_graph(obj) -> EventGraphPrediction:
    if isinstance(obj, EventGraphPrediction):
        return obj
    if isinstance(obj, LabeledSentence):
        return gold_prediction(obj)
    raise TypeError(f"expected a prediction graph or labeled sentence, got {type(obj)!r}")


def _match_counts(pred_items: list, gold_items: list) -> tuple[int, int, int]:
    matched = [False] * len(pred_items)
    tp = 0
    for gold in gold_items:
        for i, pred in enumerate(pred_items):
            if not matched[i] and pred == gold:
                matched[i] = True
                tp += 1
                break
    return tp, len(pred_items) - tp, len(gold_items) - tp


def f1_trigger_classification(pred_graphs, gold_graphs) -> PRF:
    """Micro-averaged trigger F1: span and event type must both match."""
    if len(pred_graphs) != len(gold_graphs):
        raise LengthMismatch(f"{len(pred_graphs)} predictions vs {len(gold_graphs)} golds")
    tp = fp = fn = 0
    for pred, gold in zip(pred_graphs, gold_graphs):
        pred, gold = _as_graph(pred), _as_graph(gold)
        p_items = [(t.span, t.event_type) for t in pred.triggers]
        g_items = [(t.span, t.event_type) for t in gold.triggers]
        a, b, c = _match_counts(p_items, g_items)
        tp, fp, fn = tp + a, fp + b, fn + c
    return _prf(tp, fp, fn)


def f1_argument_classification(pred_graphs, gold_graphs) -> PRF:
    """Micro-averaged argument F1: span, role, and attached trigger's event
    type must all match."""
    if len(pred_graphs) != len(gold_graphs):
        raise LengthMismatch(f"{len(pred_graphs)} predictions vs {len(gold_graphs)} golds")
    tp = fp = fn = 0
    for pred, gold in zip(pred_graphs, gold_graphs):
        pred, gold = _as_graph(pred), _as_graph(gold)
        p_items = [
            (a.span, a.role, pred.triggers[a.trigger_index].event_type) for a in pred.arguments
        ]
        g_items = [
            (a.span, a.role, gold.triggers[a.trigger_index].event_type) for a in gold.arguments
        ]
        a, b, c = _match_counts(p_items, g_items)
        tp, fp, fn = tp + a, fp + b, fn + c
    return _prf(tp, fp, fn)


def _score_pairs(scorer, work: list[tuple]) -> list[float]:
    """work rows: (tokens, graph, trigger_span, event_type, arg_span, role).
    Uses the scorer's batched path when it has one."""
    if hasattr(scorer, "make_pair_example") and hasattr(scorer, "score_examples_batched"):
        examples = [scorer.make_pair_example(*row) for row in work]
        return scorer.score_examples_batched(examples)
    return [scorer.score_pair(*row) for row in work]


def scorer_agreement(
    scorer,
    flags: list[FlaggedPrediction],
    sentences_by_id: dict[str, LabeledSentence],
    amr: dict[str, AmrGraph],
) -> dict:
    """Score flagged predictions and compare the c > 0.5 verdict to the gold
    correctness flag. Returns accuracy plus PRF on the 'correct' class."""
    work = []
    for flag in flags:
        sent = sentences_by_id.get(flag.sent_id)
        if sent is None:
            raise MissingAmr(f"no sentence for {flag.sent_id}")
        graph = amr.get(flag.sent_id)
        if graph is None:
            raise MissingAmr(f"no AMR graph for {flag.sent_id}")
        work.append((
            sent.tokens,
            graph,
            (flag.trigger_start, flag.trigger_end),
            flag.event_type,
            (flag.arg_start, flag.arg_end),
            flag.role,
        ))
    tp = fp = fn = tn = 0
    for flag, c in zip(flags, _score_pairs(scorer, work)):
        verdict = c > AGREEMENT_THRESHOLD
        if verdict and flag.flag:
            tp += 1
        elif verdict and not flag.flag:
            fp += 1
        elif not verdict and flag.flag:
            fn += 1
        else:
            tn += 1
    total = tp + fp + fn + tn
    accuracy = (tp + tn) / total if total else 0.0
    return {"accuracy": accuracy, "prf": _prf(tp, fp, fn), "count": total}


def average_compatibility(
    extractor: EventExtractor,
    scorer,
    heldout: list[LabeledSentence],
    amr: dict[str, AmrGraph],
    score_cache: dict | None = None,
) -> float:
    """Mean compatibility over all predicted pairs on the held-out pool.

    A model that predicts nothing scores 0 (with a warning); a missing
    graph for a sentence that has predictions is an error.
    """
    predictions = extractor.predict(heldout)
    scores: list[float] = []
    for sent, pred in zip(heldout, predictions):
        if not pred.arguments:
            continue
        graph = amr.get(sent.sent_id)
        if graph is None:
            raise MissingAmr(f"no AMR graph for held-out sentence {sent.sent_id}")
        for arg in pred.arguments:
            trig = pred.triggers[arg.trigger_index]
            key = (sent.sent_id, trig.span, trig.event_type, arg.span, arg.role)
            if score_cache is not None and key in score_cache:
                scores.append(score_cache[key])
                continue
            c = scorer.score_pair(
                sent.tokens, graph, trig.span, trig.event_type, arg.span, arg.role
            )
            if score_cache is not None:
                score_cache[key] = c
            scores.append(c)
    if not scores:
        logger.warning("extractor produced no predictions on the held-out pool")
        return 0.0
    return float(sum(scores) / len(scores))


def _criterion_value(record, criterion: str) -> float:
    if hasattr(record, "criteria"):
        values = record.criteria
    elif isinstance(record, dict):
        values = record
    else:
        raise TypeError(f"cannot read criteria from {type(record)!r}")
    if criterion not in values:
        raise KeyError(f"checkpoint record has no {criterion!r} value")
    return float(values[criterion])


def select_checkpoint(records, criterion: str):
    """Argmax of the criterion over the series; ties go to the earliest."""
    records = list(records)
    if not records:
        raise EmptySeries("no checkpoints to select from")
    best = records[0]
    best_value = _criterion_value(best, criterion)
    for record in records[1:]:
        value = _criterion_value(record, criterion)
        if value > best_value:
            best, best_value = record, value
    return best


def sweep_report(results: list[dict]) -> dict:
    """Render threshold-sweep results as sorted rows plus CSV plot data.

    Each input row carries at least {threshold, f1}; extra keys (e.g.
    retained sample counts) pass through.
    """
    rows = sorted((dict(r) for r in results), key=lambda r: r["threshold"])
    buf = io.StringIO()
    buf.write("threshold,f1\n")
    for row in rows:
        buf.write(f"{row['threshold']},{row['f1']}\n")
    return {"rows": rows, "csv": buf.getvalue()}
