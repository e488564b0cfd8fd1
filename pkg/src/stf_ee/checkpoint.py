"""Self-describing checkpoint archives (format tag "stf-ee.ckpt.v1").

One archive holds the parameter tensors, the label schema, the vocabulary,
the estimator hyperparameters, a config hash, and free-form metadata.
Extractor and scorer checkpoints share the format and differ by role tag.
"""
from __future__ import annotations

import torch

from .encoding import Vocab
from .errors import IoError, SchemaError
from .extractor import EventExtractor, GlobalFeatureConfig, GlobalFeatures
from .labels import LabelSchema
from .scorer import CompatibilityScorer

FORMAT_TAG = "stf-ee.ckpt.v1"


def _save(path: str, payload: dict):
    try:
        torch.save(payload, path)
    except OSError as exc:
        raise IoError(f"cannot write checkpoint {path}: {exc}") from exc


def _load(path: str) -> dict:
    try:
        payload = torch.load(path, map_location="cpu", weights_only=False)
    except OSError as exc:
        raise IoError(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format") != FORMAT_TAG:
        raise SchemaError(f"{path} is not a {FORMAT_TAG} archive")
    return payload


def save_extractor(path: str, extractor: EventExtractor, config_hash: str = "", meta: dict | None = None):
    extractor._check_built()
    _save(
        path,
        {
            "format": FORMAT_TAG,
            "role": "extractor",
            "params": extractor.get_params(),
            "schema": extractor.schema_.to_dict(),
            "vocab": extractor.vocab_.to_list(),
            "state": extractor.module_.state_dict(),
            "config_hash": config_hash,
            "meta": meta or {},
        },
    )


def load_extractor(path: str) -> EventExtractor:
    payload = _load(path)
    if payload.get("role") != "extractor":
        raise SchemaError(f"{path} holds a {payload.get('role')!r} checkpoint, not an extractor")
    extractor = EventExtractor(**payload["params"])
    schema = LabelSchema.from_dict(payload["schema"])
    extractor.schema_ = schema
    extractor.vocab_ = Vocab(payload["vocab"])
    extractor.features_ = GlobalFeatures(
        schema, GlobalFeatureConfig(tuple(extractor.global_templates))
    )
    torch.manual_seed(extractor.seed)
    from .extractor import _ExtractorModule

    extractor.module_ = _ExtractorModule(
        vocab_size=len(extractor.vocab_),
        schema=schema,
        n_global=len(extractor.features_),
        dim=extractor.hidden_dim,
        n_layers=extractor.num_layers,
        n_heads=extractor.num_heads,
        ffn_dim=extractor.ffn_dim,
        max_len=extractor.max_len,
    )
    extractor.module_.load_state_dict(payload["state"])
    extractor.history_ = payload["meta"].get("history", [])
    return extractor


def save_scorer(path: str, scorer: CompatibilityScorer, config_hash: str = "", meta: dict | None = None):
    scorer._check_built()
    _save(
        path,
        {
            "format": FORMAT_TAG,
            "role": "scorer",
            "params": scorer.get_params(),
            "schema": scorer.schema_.to_dict(),
            "vocab": scorer.vocab_.to_list(),
            "state": scorer.module_.state_dict(),
            "config_hash": config_hash,
            "meta": meta or {},
        },
    )


def load_scorer(path: str) -> CompatibilityScorer:
    payload = _load(path)
    if payload.get("role") != "scorer":
        raise SchemaError(f"{path} holds a {payload.get('role')!r} checkpoint, not a scorer")
    scorer = CompatibilityScorer(**payload["params"])
    schema = LabelSchema.from_dict(payload["schema"])
    scorer.schema_ = schema
    scorer.vocab_ = Vocab(payload["vocab"])
    torch.manual_seed(scorer.seed)
    from .scorer import _ScorerModule

    scorer.module_ = _ScorerModule(
        vocab_size=len(scorer.vocab_),
        n_types=len(schema.trigger_types),
        n_roles=len(schema.argument_roles),
        dim=scorer.hidden_dim,
        n_layers=scorer.num_attention_layers,
        n_heads=scorer.num_heads,
        ffn_dim=scorer.ffn_dim,
        max_seq_len=scorer.max_seq_len,
        max_sentence_len=scorer.max_sentence_len,
    )
    scorer.module_.load_state_dict(payload["state"])
    scorer.history_ = payload["meta"].get("history", [])
    scorer.freeze()
    return scorer
