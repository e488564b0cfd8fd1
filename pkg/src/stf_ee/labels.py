"""Label schema for triggers and argument roles, plus BIO tagset helpers.

Trigger types and argument roles are ordered label sets with dense integer
ids. Each identification task gets a BIO tagset over its own label set with
the O tag fixed at id 0, so an all-O decode is always the smallest-id
sequence.
"""
from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class LabelSchema:
    """Ordered trigger-type and argument-role label sets."""

    trigger_types: tuple[str, ...]
    argument_roles: tuple[str, ...]

    trigger_tags: tuple[str, ...] = field(init=False)
    role_tags: tuple[str, ...] = field(init=False)

    def __post_init__(self):
        if not self.trigger_types or not self.argument_roles:
            raise ValueError("schema needs at least one trigger type and one role")
        if len(set(self.trigger_types)) != len(self.trigger_types):
            raise ValueError("duplicate trigger types")
        if len(set(self.argument_roles)) != len(self.argument_roles):
            raise ValueError("duplicate argument roles")
        object.__setattr__(self, "trigger_tags", bio_tagset(self.trigger_types))
        object.__setattr__(self, "role_tags", bio_tagset(self.argument_roles))

    # -- trigger types ----------------------------------------------------
    def type_id(self, name: str) -> int:
        return self.trigger_types.index(name)

    def type_name(self, idx: int) -> str:
        return self.trigger_types[idx]

    # -- argument roles ---------------------------------------------------
    # The role classifier predicts over roles plus a trailing O class for
    # "this span is not an argument of this trigger".
    @property
    def role_o_id(self) -> int:
        return len(self.argument_roles)

    def role_id(self, name: str) -> int:
        if name == "O":
            return self.role_o_id
        return self.argument_roles.index(name)

    def role_name(self, idx: int) -> str:
        if idx == self.role_o_id:
            return "O"
        return self.argument_roles[idx]

    def to_dict(self) -> dict:
        return {
            "trigger_types": list(self.trigger_types),
            "argument_roles": list(self.argument_roles),
        }

    @staticmethod
    def from_dict(d: dict) -> "LabelSchema":
        return LabelSchema(
            trigger_types=tuple(d["trigger_types"]),
            argument_roles=tuple(d["argument_roles"]),
        )


def bio_tagset(labels: tuple[str, ...]) -> tuple[str, ...]:
    """O plus B-x/I-x per label; O takes id 0."""
    tags = ["O"]
    for lab in labels:
        tags.append(f"B-{lab}")
        tags.append(f"I-{lab}")
    return tuple(tags)


def spans_to_bio(spans: list[tuple[int, int, str]], length: int, tagset: tuple[str, ...]) -> list[int]:
    """Render (start, end, label) spans as BIO tag ids; first span wins on overlap."""
    index = {tag: i for i, tag in enumerate(tagset)}
    tags = [0] * length
    for start, end, label in spans:
        if any(tags[i] != 0 for i in range(start, end)):
            continue
        tags[start] = index[f"B-{label}"]
        for i in range(start + 1, end):
            tags[i] = index[f"I-{label}"]
    return tags


def bio_to_spans(tag_ids: list[int], tagset: tuple[str, ...]) -> list[tuple[int, int, str]]:
    """Decode BIO tag ids into (start, end, label) spans.

    Assumes a repaired sequence (see :func:`repair_bio`); a stray I-x is
    treated as opening a span, matching the repair rule.
    """
    spans = []
    start, label = None, None
    for i, tid in enumerate(tag_ids):
        tag = tagset[tid]
        if tag == "O":
            if start is not None:
                spans.append((start, i, label))
                start, label = None, None
        elif tag.startswith("B-"):
            if start is not None:
                spans.append((start, i, label))
            start, label = i, tag[2:]
        else:  # I-x
            if start is None or tag[2:] != label:
                if start is not None:
                    spans.append((start, i, label))
                start, label = i, tag[2:]
    if start is not None:
        spans.append((start, len(tag_ids), label))
    return spans


def repair_bio(tag_ids: list[int], tagset: tuple[str, ...]) -> list[int]:
    """Turn I-x tags that do not continue a B-x/I-x run into B-x."""
    index = {tag: i for i, tag in enumerate(tagset)}
    repaired = list(tag_ids)
    for i, tid in enumerate(repaired):
        tag = tagset[tid]
        if not tag.startswith("I-"):
            continue
        prev = tagset[repaired[i - 1]] if i > 0 else "O"
        if prev not in (f"B-{tag[2:]}", f"I-{tag[2:]}"):
            repaired[i] = index[f"B-{tag[2:]}"]
    return repaired
