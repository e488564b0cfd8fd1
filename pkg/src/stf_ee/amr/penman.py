"""PENMAN parsing and serialization.

Covers the notation subset used by AMR corpora: variable/concept nodes,
relations, reentrant variable references, and attribute constants. Constants
become leaf nodes whose concept is the constant itself, so the rest of the
package sees one uniform graph model. Inverse relations (":ARG0-of") are
normalized to their base relation with the edge direction flipped.

Wiki-link resolution and other long-tail PENMAN features are out of scope.
"""
from __future__ import annotations

import json
import re

from ..errors import DuplicateSentId, IoError, MalformedPenman, SchemaError
from .graph import AmrEdge, AmrGraph, AmrNode

_TOKEN_RE = re.compile(
    r"""\s*(?:
        (?P<lparen>\()
      | (?P<rparen>\))
      | (?P<slash>/)
      | (?P<string>"(?:[^"\\]|\\.)*")
      | (?P<relation>:[^\s()":]+)
      | (?P<atom>[^\s()":/]+)
    )""",
    re.VERBOSE,
)

_BARE_CONCEPT_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_.+-]*$")


def _tokenize(text: str) -> list[tuple[str, str]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise MalformedPenman(f"unexpected character at offset {pos}: {text[pos]!r}")
        pos = m.end()
        if m.lastgroup is None:  # trailing whitespace
            break
        tokens.append((m.lastgroup, m.group(m.lastgroup)))
    return tokens


def _collect_variables(tokens: list[tuple[str, str]]) -> dict[str, str]:
    """First pass: variables are atoms in '( var /' position. Conflicting
    re-definitions are rejected; identical ones collapse to one node."""
    variables: dict[str, str] = {}
    for i in range(len(tokens) - 2):
        if tokens[i][0] == "lparen" and tokens[i + 1][0] == "atom" and tokens[i + 2][0] == "slash":
            var = tokens[i + 1][1]
            if i + 3 >= len(tokens) or tokens[i + 3][0] not in ("atom", "string"):
                raise MalformedPenman(f"variable {var} has no concept")
            concept = _strip_quotes(tokens[i + 3])
            if var in variables and variables[var] != concept:
                raise MalformedPenman(
                    f"variable {var} defined as both {variables[var]!r} and {concept!r}"
                )
            variables[var] = concept
    return variables


def _strip_quotes(token: tuple[str, str]) -> str:
    kind, value = token
    if kind == "string":
        return value[1:-1].replace('\\"', '"').replace("\\\\", "\\")
    return value


class _Parser:
    def __init__(self, tokens: list[tuple[str, str]]):
        self.tokens = tokens
        self.pos = 0
        self.variables = _collect_variables(tokens)
        self.defined: set[str] = set()
        self.constants: list[AmrNode] = []
        self.edges: list[tuple[str, str, str]] = []  # (head, raw relation, target)

    def peek(self) -> tuple[str, str] | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self, kind: str | None = None) -> tuple[str, str]:
        tok = self.peek()
        if tok is None:
            raise MalformedPenman("unexpected end of input (unbalanced parentheses?)")
        if kind is not None and tok[0] != kind:
            raise MalformedPenman(f"expected {kind}, found {tok[1]!r}")
        self.pos += 1
        return tok

    def fresh_constant(self, concept: str) -> str:
        base = f"_c{len(self.constants)}"
        node_id = base
        bump = 0
        while node_id in self.variables:
            bump += 1
            node_id = f"{base}_{bump}"
        self.constants.append(AmrNode(id=node_id, concept=concept))
        return node_id

    def parse_node(self) -> str:
        self.take("lparen")
        var_tok = self.take()
        if var_tok[0] != "atom":
            raise MalformedPenman(f"expected a variable, found {var_tok[1]!r}")
        var = var_tok[1]
        slash = self.peek()
        if slash is None or slash[0] != "slash":
            raise MalformedPenman(f"variable {var} is missing a concept")
        self.take("slash")
        self.take()  # concept already recorded by _collect_variables
        self.defined.add(var)

        while True:
            tok = self.peek()
            if tok is None:
                raise MalformedPenman("unexpected end of input (unbalanced parentheses?)")
            if tok[0] == "rparen":
                self.take()
                return var
            if tok[0] != "relation":
                raise MalformedPenman(f"expected a relation or ')', found {tok[1]!r}")
            relation = self.take()[1]
            target = self.parse_target()
            self.add_edge(var, relation, target)

    def parse_target(self) -> str:
        tok = self.peek()
        if tok is None:
            raise MalformedPenman("relation without a target")
        if tok[0] == "lparen":
            return self.parse_node()
        if tok[0] == "string":
            return self.fresh_constant(_strip_quotes(self.take()))
        if tok[0] == "atom":
            value = self.take()[1]
            if value in self.variables:
                return value  # reentrant reference
            return self.fresh_constant(value)
        raise MalformedPenman(f"invalid relation target {tok[1]!r}")

    def add_edge(self, head: str, relation: str, target: str):
        rel = relation[1:]
        if rel.endswith("-of") and rel != "-of":
            self.edges.append((target, ":" + rel[:-3], head))
        else:
            self.edges.append((head, relation, target))


def parse_penman(text: str) -> AmrGraph:
    """Parse one PENMAN expression into an AmrGraph."""
    tokens = _tokenize(text)
    if not tokens:
        raise MalformedPenman("empty input")
    parser = _Parser(tokens)
    root = parser.parse_node()
    if parser.peek() is not None:
        raise MalformedPenman(f"trailing content after root node: {parser.peek()[1]!r}")
    undefined = set(parser.variables) - parser.defined
    if undefined:
        raise MalformedPenman(f"variables never defined: {sorted(undefined)}")
    nodes = tuple(
        AmrNode(id=var, concept=concept) for var, concept in parser.variables.items()
    ) + tuple(parser.constants)
    edges = tuple(AmrEdge(src=s, dst=d, raw_relation=r) for s, r, d in parser.edges)
    return AmrGraph(nodes=nodes, edges=edges, root=root)


def _render_concept(concept: str) -> str:
    if _BARE_CONCEPT_RE.match(concept):
        return concept
    escaped = concept.replace("\\", "\\\\").replace('"', '\\"')
    return f'"{escaped}"'


def to_penman(graph: AmrGraph) -> str:
    """Serialize a graph back to a single-line PENMAN expression.

    Reentrancies appear as bare variable references; edges that must be
    walked against their stored direction get an '-of' inversion.
    """
    incident: dict[str, list[tuple[int, AmrEdge, bool]]] = {n.id: [] for n in graph.nodes}
    for i, edge in enumerate(graph.edges):
        incident[edge.src].append((i, edge, True))
        if edge.dst != edge.src:
            incident[edge.dst].append((i, edge, False))

    emitted: set[int] = set()
    visited: set[str] = set()

    def emit(node_id: str) -> str:
        visited.add(node_id)
        node = graph.node(node_id)
        parts = [f"({node_id} / {_render_concept(node.concept)}"]
        pending = sorted(
            (e for e in incident[node_id] if e[0] not in emitted),
            key=lambda e: (e[1].raw_relation, not e[2], e[0]),
        )
        for index, edge, forward in pending:
            if index in emitted:
                continue
            emitted.add(index)
            rel = edge.raw_relation if forward else edge.raw_relation + "-of"
            target = edge.dst if forward else edge.src
            if target in visited:
                parts.append(f"{rel} {target}")
            else:
                parts.append(f"{rel} {emit(target)}")
        return " ".join(parts) + ")"

    text = emit(graph.root)
    unreached = {n.id for n in graph.nodes} - visited
    if unreached:
        raise ValueError(f"graph is not connected from root: {sorted(unreached)} unreachable")
    return text


# ---------------------------------------------------------------------------
# Bundle files: blank-line-separated blocks with ::id / ::tok / ::align
# comment lines ahead of each PENMAN expression.
# ---------------------------------------------------------------------------

_ALIGN_RE = re.compile(r"^(?P<node>\S+)-(?P<start>\d+):(?P<end>\d+)$")


def load_amr_bundle(path: str) -> dict[str, AmrGraph]:
    """Read a PENMAN bundle file into a sent_id -> graph map.

    Alignment comments populate token spans on the named nodes.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read AMR bundle {path}: {exc}") from exc

    graphs: dict[str, AmrGraph] = {}
    for block_no, block in enumerate(_split_blocks(text), start=1):
        sent_id, tokens, aligns, penman_text = _parse_block(block, block_no)
        if sent_id is None:
            raise SchemaError(f"block {block_no}: missing '# ::id' line")
        if sent_id in graphs:
            raise DuplicateSentId(sent_id)
        graph = parse_penman(penman_text)
        spans: dict[str, tuple[int, int]] = {}
        for node_id, start, end in aligns:
            if not graph.has_node(node_id):
                raise SchemaError(f"block {block_no}: alignment names unknown node {node_id}")
            if tokens is not None and end > len(tokens):
                raise SchemaError(
                    f"block {block_no}: alignment {node_id}-{start}:{end} exceeds sentence"
                )
            spans[node_id] = (start, end)
        graphs[sent_id] = graph.with_spans(spans)
    return graphs


def _split_blocks(text: str) -> list[list[str]]:
    blocks: list[list[str]] = []
    current: list[str] = []
    for line in text.splitlines():
        if line.strip():
            current.append(line)
        elif current:
            blocks.append(current)
            current = []
    if current:
        blocks.append(current)
    return blocks


def _parse_block(lines: list[str], block_no: int):
    sent_id = None
    tokens = None
    aligns: list[tuple[str, int, int]] = []
    penman_lines: list[str] = []
    for line in lines:
        stripped = line.strip()
        if stripped.startswith("# ::id"):
            sent_id = stripped[len("# ::id"):].strip()
        elif stripped.startswith("# ::tok"):
            tokens = stripped[len("# ::tok"):].split()
        elif stripped.startswith("# ::align"):
            m = _ALIGN_RE.match(stripped[len("# ::align"):].strip())
            if m is None:
                raise SchemaError(f"block {block_no}: bad alignment line {stripped!r}")
            aligns.append((m.group("node"), int(m.group("start")), int(m.group("end"))))
        elif stripped.startswith("#"):
            continue
        else:
            penman_lines.append(line)
    if not penman_lines:
        raise MalformedPenman(f"block {block_no}: no PENMAN expression")
    return sent_id, tokens, aligns, "\n".join(penman_lines)


def save_amr_bundle(
    path: str,
    graphs: dict[str, AmrGraph],
    tokens: dict[str, list[str]] | None = None,
):
    """Write graphs as a bundle with id/tok/align comments."""
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for sent_id, graph in graphs.items():
                fh.write(f"# ::id {sent_id}\n")
                if tokens is not None and sent_id in tokens:
                    fh.write(f"# ::tok {' '.join(tokens[sent_id])}\n")
                for node in graph.nodes:
                    if node.token_span is not None:
                        start, end = node.token_span
                        fh.write(f"# ::align {node.id}-{start}:{end}\n")
                fh.write(to_penman(graph) + "\n\n")
    except OSError as exc:
        raise IoError(f"cannot write AMR bundle {path}: {exc}") from exc


def load_alignments_jsonl(path: str) -> dict[str, dict[str, tuple[int, int]]]:
    """Alternative alignment source: one JSON record per line with
    sent_id / node_id / start / end fields."""
    out: dict[str, dict[str, tuple[int, int]]] = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    sent_id = rec["sent_id"]
                    node_id = rec["node_id"]
                    start, end = int(rec["start"]), int(rec["end"])
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise SchemaError(f"{path}:{line_no}: bad alignment record: {exc}") from exc
                out.setdefault(sent_id, {})[node_id] = (start, end)
    except OSError as exc:
        raise IoError(f"cannot read alignments {path}: {exc}") from exc
    return out


def apply_alignments(
    graphs: dict[str, AmrGraph],
    alignments: dict[str, dict[str, tuple[int, int]]],
) -> dict[str, AmrGraph]:
    return {
        sent_id: graph.with_spans(alignments.get(sent_id, {}))
        for sent_id, graph in graphs.items()
    }
