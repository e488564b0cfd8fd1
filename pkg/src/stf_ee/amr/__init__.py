from .graph import (
    AmrEdge,
    AmrGraph,
    AmrNode,
    AmrPath,
    ScoringSequence,
    align_nodes,
    serialize_path,
    shortest_path,
)
from .penman import (
    apply_alignments,
    load_alignments_jsonl,
    load_amr_bundle,
    parse_penman,
    save_amr_bundle,
    to_penman,
)
from .relations import (
    CANONICAL_RAW,
    N_RELATION_GROUPS,
    RelationGroup,
    group_index,
    group_relation,
)

__all__ = [
    "AmrEdge",
    "AmrGraph",
    "AmrNode",
    "AmrPath",
    "ScoringSequence",
    "align_nodes",
    "serialize_path",
    "shortest_path",
    "apply_alignments",
    "load_alignments_jsonl",
    "load_amr_bundle",
    "parse_penman",
    "save_amr_bundle",
    "to_penman",
    "CANONICAL_RAW",
    "N_RELATION_GROUPS",
    "RelationGroup",
    "group_index",
    "group_relation",
]
