import numpy as np
import pytest

from stf_ee.amr.graph import (
    AmrEdge,
    AmrGraph,
    AmrNode,
    AmrPath,
    ScoringSequence,
    align_nodes,
    serialize_path,
    shortest_path,
)
from stf_ee.amr.penman import parse_penman, to_penman
from stf_ee.amr.relations import RelationGroup, group_relation
from stf_ee.errors import MalformedPenman, UnknownNode

# Independent restatement of the full grouping table, row by row.
GROUP_TABLE = {
    RelationGroup.ARG0: ["ARG0"],
    RelationGroup.ARG1: ["ARG1"],
    RelationGroup.ARG2: ["ARG2"],
    RelationGroup.ARG3: ["ARG3"],
    RelationGroup.ARG4: ["ARG4"],
    RelationGroup.DESTINATION: ["destination"],
    RelationGroup.SOURCE: ["source"],
    RelationGroup.INSTRUMENT: ["instrument"],
    RelationGroup.BENEFICIARY: ["beneficiary"],
    RelationGroup.PREP: ["prep-against", "prep-in", "prep-with", "prep-out-of"],
    RelationGroup.OP: ["op1", "op2", "op3", "op17"],
    RelationGroup.ENTITY: ["wiki", "name"],
    RelationGroup.ARGX: ["ARG5", "ARG6", "ARG7", "ARG8", "ARG9"],
    RelationGroup.PLACE: ["location", "path", "direction"],
    RelationGroup.MEDIUM: ["manner", "poss", "medium", "topic"],
    RelationGroup.MODIFIER: ["domain", "mod", "example"],
    RelationGroup.PART_WHOLE: ["part", "consist", "subevent", "subset"],
    RelationGroup.TIME: [
        "calendar", "century", "day", "dayperiod", "decade", "era", "month",
        "quarter", "season", "timezone", "weekday", "year", "year2", "time",
    ],
    RelationGroup.OTHERS: [
        "purpose", "li", "quant", "polarity", "condition", "extent", "degree",
        "snt1", "snt2", "snt3", "concession", "ord", "unit", "mode", "value",
        "frequency", "polite", "age", "accompanier", "snt4", "snt5", "snt6",
        "snt7", "snt8", "snt9", "snt10", "snt11", "scale", "conj-as-if", "rel",
    ],
}


class TestGroupRelation:
    def test_full_table_round_trips(self):
        for group, relations in GROUP_TABLE.items():
            for rel in relations:
                assert group_relation(":" + rel) is group, rel
                assert group_relation(rel) is group, rel

    def test_documented_examples(self):
        assert group_relation(":ARG0") is RelationGroup.ARG0
        assert group_relation(":location") is RelationGroup.PLACE
        assert group_relation(":prep-against") is RelationGroup.PREP
        assert group_relation(":snt7") is RelationGroup.OTHERS

    def test_unknown_relations_fall_through(self):
        for rel in (":totally-made-up", ":snt99", ":xyz", ""):
            assert group_relation(rel) is RelationGroup.OTHERS

    def test_inverse_suffix_stripped_before_lookup(self):
        assert group_relation(":ARG0-of") is RelationGroup.ARG0
        assert group_relation(":location-of") is RelationGroup.PLACE
        assert group_relation(":consist-of") is RelationGroup.PART_WHOLE

    def test_total_and_deterministic(self):
        rng = np.random.default_rng(0)
        alphabet = "abcdefghijklmnopqrstuvwxyz-0123456789"
        for _ in range(200):
            rel = ":" + "".join(
                alphabet[int(i)] for i in rng.integers(len(alphabet), size=int(rng.integers(1, 12)))
            )
            assert group_relation(rel) is group_relation(rel)


class TestParsePenman:
    def test_smallest_legal_expression(self):
        graph = parse_penman("(k / kill-01)")
        assert len(graph.nodes) == 1
        assert graph.nodes[0].concept == "kill-01"
        assert graph.edges == ()
        assert graph.root == "k"

    def test_hand_parsed_nested_expression(self):
        text = '(k / kill-01 :ARG0 (c / commando) :location (i / country :name (n / name :op1 "Iraq")))'
        graph = parse_penman(text)
        concepts = sorted(n.concept for n in graph.nodes)
        assert concepts == ["Iraq", "commando", "country", "kill-01", "name"]
        edges = sorted((g.node(e.src).concept, e.raw_relation, g.node(e.dst).concept) for g in [graph] for e in graph.edges)
        assert edges == [
            ("country", ":name", "name"),
            ("kill-01", ":ARG0", "commando"),
            ("kill-01", ":location", "country"),
            ("name", ":op1", "Iraq"),
        ]

    def test_unbalanced_parenthesis(self):
        with pytest.raises(MalformedPenman):
            parse_penman("(k / kill-01 :ARG0")

    def test_missing_concept(self):
        with pytest.raises(MalformedPenman):
            parse_penman("(k)")

    def test_conflicting_redefinition(self):
        with pytest.raises(MalformedPenman):
            parse_penman("(k / kill-01 :ARG0 (k / die-01))")

    def test_trailing_garbage(self):
        with pytest.raises(MalformedPenman):
            parse_penman("(k / kill-01) (x / extra)")

    def test_reentrancy_resolves_to_one_node(self):
        graph = parse_penman("(w / want-01 :ARG0 (b / boy) :ARG1 (g / go-02 :ARG0 b))")
        assert len(graph.nodes) == 3
        targets = [e.dst for e in graph.edges if e.raw_relation == ":ARG0"]
        assert targets == ["b", "b"]

    def test_inverse_relation_flips_direction(self):
        graph = parse_penman("(b / boy :ARG0-of (w / want-01))")
        (edge,) = graph.edges
        assert edge.raw_relation == ":ARG0"
        assert graph.node(edge.src).concept == "want-01"
        assert graph.node(edge.dst).concept == "boy"

    def test_constants_become_leaf_nodes(self):
        graph = parse_penman('(p / polarity-test :polarity - :quant 5)')
        concepts = sorted(n.concept for n in graph.nodes)
        assert concepts == ["-", "5", "polarity-test"]


def _graph_signature(graph: AmrGraph):
    nodes = sorted(n.concept for n in graph.nodes)
    edges = sorted(
        (graph.node(e.src).concept, e.raw_relation, graph.node(e.dst).concept)
        for e in graph.edges
    )
    return nodes, edges


class TestRoundTrip:
    CASES = [
        "(k / kill-01)",
        '(k / kill-01 :ARG0 (c / commando) :location (i / country :name (n / name :op1 "Iraq")))',
        "(w / want-01 :ARG0 (b / boy) :ARG1 (g / go-02 :ARG0 b))",
        "(b / boy :ARG0-of (w / want-01 :ARG1 (h / home)))",
        '(s / say-01 :ARG1 (x / thing :mod "multi word"))',
    ]

    @pytest.mark.parametrize("text", CASES)
    def test_parse_serialize_parse_is_isomorphic(self, text):
        first = parse_penman(text)
        second = parse_penman(to_penman(first))
        assert _graph_signature(first) == _graph_signature(second)

    def test_generated_graphs_round_trip(self):
        from stf_ee.corpus import SynthConfig, generate_synthetic

        corpus = generate_synthetic(SynthConfig(n_labeled=30, n_unlabeled=0, n_heldout=0, seed=5))
        for graph in corpus.amr.values():
            again = parse_penman(to_penman(graph))
            assert _graph_signature(graph) == _graph_signature(again)


class TestAlignNodes:
    def _graph(self):
        return AmrGraph(
            nodes=(
                AmrNode("a", "attack-01", (2, 3)),
                AmrNode("b", "soldier", (1, 2)),
                AmrNode("c", "city", (2, 4)),
                AmrNode("d", "bare"),
            ),
            edges=(AmrEdge("a", "b", ":ARG0"), AmrEdge("a", "c", ":location")),
            root="a",
        )

    def test_exact_match(self):
        graph = AmrGraph(
            nodes=(AmrNode("x", "word", (2, 3)),), edges=(), root="x"
        )
        assert align_nodes(graph, ["t"] * 6, [(2, 3)]) == ["x"]

    def test_max_overlap_wins(self):
        graph = AmrGraph(
            nodes=(AmrNode("p", "one", (1, 2)), AmrNode("q", "two", (2, 4))),
            edges=(),
            root="p",
        )
        # overlap with (1,4): p gives 1 token, q gives 2
        assert align_nodes(graph, ["t"] * 6, [(1, 4)]) == ["q"]

    def test_leftmost_breaks_overlap_ties(self):
        graph = AmrGraph(
            nodes=(AmrNode("p", "one", (3, 4)), AmrNode("q", "two", (1, 2))),
            edges=(),
            root="p",
        )
        assert align_nodes(graph, ["t"] * 6, [(1, 4)]) == ["q"]

    def test_no_overlap_is_absent(self):
        assert align_nodes(self._graph(), ["t"] * 8, [(5, 6)]) == [None]


def _random_graph(rng: np.random.Generator):
    n = int(rng.integers(2, 13))
    nodes = tuple(AmrNode(f"n{i}", f"c{i}") for i in range(n))
    n_edges = int(rng.integers(1, max(2, 2 * n)))
    edges = []
    for _ in range(n_edges):
        a, b = rng.integers(n), rng.integers(n)
        if a == b:
            continue
        edges.append(AmrEdge(f"n{int(a)}", f"n{int(b)}", ":ARG0"))
    return AmrGraph(nodes=nodes, edges=tuple(edges), root="n0"), n


def _floyd_warshall(graph: AmrGraph, n: int) -> np.ndarray:
    dist = np.full((n, n), np.inf)
    np.fill_diagonal(dist, 0.0)
    for e in graph.edges:
        i, j = int(e.src[1:]), int(e.dst[1:])
        dist[i, j] = dist[j, i] = 1.0
    for k in range(n):
        dist = np.minimum(dist, dist[:, k:k + 1] + dist[k:k + 1, :])
    return dist


class TestShortestPath:
    def test_adjacent_nodes(self):
        graph = AmrGraph(
            nodes=(AmrNode("a", "x"), AmrNode("b", "y")),
            edges=(AmrEdge("a", "b", ":ARG0"),),
            root="a",
        )
        path = shortest_path(graph, "a", "b")
        assert path.nodes == ("a", "b")
        assert len(path) == 3
        assert not path.synthetic_fallback

    def test_matches_floyd_warshall_on_random_graphs(self):
        rng = np.random.default_rng(42)
        for _ in range(100):
            graph, n = _random_graph(rng)
            oracle = _floyd_warshall(graph, n)
            for i in range(n):
                for j in range(n):
                    if i == j:
                        continue
                    path = shortest_path(graph, f"n{i}", f"n{j}")
                    if np.isinf(oracle[i, j]):
                        assert path.synthetic_fallback
                    else:
                        assert not path.synthetic_fallback
                        assert len(path.edges) == int(oracle[i, j])

    def test_disconnected_pair_gets_fallback_edge(self):
        graph = AmrGraph(
            nodes=(AmrNode("a", "x"), AmrNode("b", "y")), edges=(), root="a"
        )
        path = shortest_path(graph, "a", "b")
        assert path.synthetic_fallback
        assert path.nodes == ("a", "b")
        assert path.edges[0].group is RelationGroup.OTHERS

    def test_unknown_node(self):
        graph = AmrGraph(nodes=(AmrNode("a", "x"),), edges=(), root="a")
        with pytest.raises(UnknownNode):
            shortest_path(graph, "a", "zz")

    def test_lexicographic_tie_break(self):
        # two equal-length routes a->b->d and a->c->d; b < c
        graph = AmrGraph(
            nodes=(AmrNode("a", "w"), AmrNode("b", "x"), AmrNode("c", "y"), AmrNode("d", "z")),
            edges=(
                AmrEdge("a", "c", ":ARG0"),
                AmrEdge("c", "d", ":ARG0"),
                AmrEdge("a", "b", ":ARG1"),
                AmrEdge("b", "d", ":ARG1"),
            ),
            root="a",
        )
        assert shortest_path(graph, "a", "d").nodes == ("a", "b", "d")


class TestSerializePath:
    def _path(self, *node_edge_pairs):
        nodes = [node_edge_pairs[0]]
        edges = []
        for i in range(1, len(node_edge_pairs), 2):
            edges.append(AmrEdge(nodes[-1], node_edge_pairs[i + 1], node_edge_pairs[i]))
            nodes.append(node_edge_pairs[i + 1])
        return AmrPath(nodes=tuple(nodes), edges=tuple(edges))

    def test_figure_style_sequence(self):
        # trigger -> ARG0 -> commandos -> PLACE -> Iraq, flanked by type/role
        path = self._path("killed", ":ARG0", "commandos", ":location", "Iraq")
        seq = serialize_path("Life:Die", path, "Other")
        flat = [seq.event_type] + [i for _, i in seq.elements] + [seq.role]
        assert flat == ["Life:Die", "killed", "ARG0", "commandos", "PlaceRole", "Iraq", "Other"]

    def test_introduction_example(self):
        path = self._path("killed", ":ARG0", "troop", ":medium", "guns")
        seq = serialize_path("Conflict:Attack", path, "Instrument")
        flat = [seq.event_type] + [i for _, i in seq.elements] + [seq.role]
        assert flat == [
            "Conflict:Attack", "killed", "ARG0", "troop", "MediumRole", "guns", "Instrument",
        ]

    def test_minimal_path_length_five(self):
        path = self._path("t", ":time", "a")
        seq = serialize_path("T", path, "R")
        assert len(seq) == 5
        assert seq.elements[0] == ("node", "t")
        assert seq.elements[-1] == ("node", "a")

    def test_length_invariant(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            k = int(rng.integers(1, 6))
            parts = ["n0"]
            for i in range(k):
                parts.extend([":ARG0", f"n{i + 1}"])
            path = self._path(*parts)
            seq = serialize_path("T", path, "R")
            assert len(seq) == 2 * len(path.nodes) + 1
            assert seq.elements[0][0] == "node" and seq.elements[-1][0] == "node"

    def test_sequence_validates_structure(self):
        with pytest.raises(ValueError):
            ScoringSequence(event_type="T", elements=(("edge", "ARG0"),), role="R")
