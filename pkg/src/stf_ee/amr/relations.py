"""Coarse relation categories for AMR edges.

The full AMR relation inventory is collapsed into 19 groups. Grouping is a
total function: inverse relations ("-of") are reduced to their base name
first, prefix families (prep-*, op*) are matched by prefix, and anything
unrecognized falls into OTHERS.
"""
from __future__ import annotations

from enum import Enum


class RelationGroup(Enum):
    ARG0 = "ARG0"
    ARG1 = "ARG1"
    ARG2 = "ARG2"
    ARG3 = "ARG3"
    ARG4 = "ARG4"
    DESTINATION = "Destination"
    SOURCE = "Source"
    INSTRUMENT = "Instrument"
    BENEFICIARY = "Beneficiary"
    PREP = "PrepRoles"
    OP = "OpRoles"
    ENTITY = "EntityRole"
    ARGX = "ArgXRole"
    PLACE = "PlaceRole"
    MEDIUM = "MediumRole"
    MODIFIER = "ModifierRole"
    PART_WHOLE = "PartWholeRole"
    TIME = "TimeRole"
    OTHERS = "Others"


N_RELATION_GROUPS = len(RelationGroup)

# Exact-name table. ARG5 is claimed by both the Arg-X family and the catch-all
# bucket in the source inventory; the specific family wins here.
_EXACT: dict[str, RelationGroup] = {
    "ARG0": RelationGroup.ARG0,
    "ARG1": RelationGroup.ARG1,
    "ARG2": RelationGroup.ARG2,
    "ARG3": RelationGroup.ARG3,
    "ARG4": RelationGroup.ARG4,
    "destination": RelationGroup.DESTINATION,
    "source": RelationGroup.SOURCE,
    "instrument": RelationGroup.INSTRUMENT,
    "beneficiary": RelationGroup.BENEFICIARY,
    "wiki": RelationGroup.ENTITY,
    "name": RelationGroup.ENTITY,
    "ARG5": RelationGroup.ARGX,
    "ARG6": RelationGroup.ARGX,
    "ARG7": RelationGroup.ARGX,
    "ARG8": RelationGroup.ARGX,
    "ARG9": RelationGroup.ARGX,
    "location": RelationGroup.PLACE,
    "path": RelationGroup.PLACE,
    "direction": RelationGroup.PLACE,
    "manner": RelationGroup.MEDIUM,
    "poss": RelationGroup.MEDIUM,
    "medium": RelationGroup.MEDIUM,
    "topic": RelationGroup.MEDIUM,
    "domain": RelationGroup.MODIFIER,
    "mod": RelationGroup.MODIFIER,
    "example": RelationGroup.MODIFIER,
    "part": RelationGroup.PART_WHOLE,
    "consist": RelationGroup.PART_WHOLE,
    "subevent": RelationGroup.PART_WHOLE,
    "subset": RelationGroup.PART_WHOLE,
    "calendar": RelationGroup.TIME,
    "century": RelationGroup.TIME,
    "day": RelationGroup.TIME,
    "dayperiod": RelationGroup.TIME,
    "decade": RelationGroup.TIME,
    "era": RelationGroup.TIME,
    "month": RelationGroup.TIME,
    "quarter": RelationGroup.TIME,
    "season": RelationGroup.TIME,
    "timezone": RelationGroup.TIME,
    "weekday": RelationGroup.TIME,
    "year": RelationGroup.TIME,
    "year2": RelationGroup.TIME,
    "time": RelationGroup.TIME,
}

# One representative raw relation per group, used when synthesizing or
# relabeling edges.
CANONICAL_RAW: dict[RelationGroup, str] = {
    RelationGroup.ARG0: ":ARG0",
    RelationGroup.ARG1: ":ARG1",
    RelationGroup.ARG2: ":ARG2",
    RelationGroup.ARG3: ":ARG3",
    RelationGroup.ARG4: ":ARG4",
    RelationGroup.DESTINATION: ":destination",
    RelationGroup.SOURCE: ":source",
    RelationGroup.INSTRUMENT: ":instrument",
    RelationGroup.BENEFICIARY: ":beneficiary",
    RelationGroup.PREP: ":prep-in",
    RelationGroup.OP: ":op1",
    RelationGroup.ENTITY: ":name",
    RelationGroup.ARGX: ":ARG5",
    RelationGroup.PLACE: ":location",
    RelationGroup.MEDIUM: ":manner",
    RelationGroup.MODIFIER: ":mod",
    RelationGroup.PART_WHOLE: ":part",
    RelationGroup.TIME: ":time",
    RelationGroup.OTHERS: ":mode",
}


def normalize_relation(raw: str) -> str:
    """Strip the leading colon and a trailing '-of' inversion marker."""
    rel = raw[1:] if raw.startswith(":") else raw
    if rel.endswith("-of") and rel != "-of":
        rel = rel[:-3]
    return rel


def group_relation(raw: str) -> RelationGroup:
    """Map a raw PENMAN relation string to its coarse group. Total."""
    rel = normalize_relation(raw)
    hit = _EXACT.get(rel)
    if hit is not None:
        return hit
    if rel.startswith("prep"):
        return RelationGroup.PREP
    if rel.startswith("op"):
        return RelationGroup.OP
    return RelationGroup.OTHERS


def group_index(group: RelationGroup) -> int:
    """Dense 0-based id, stable across runs (enum declaration order)."""
    return list(RelationGroup).index(group)
