"""Datasets: labeled event sentences, AMR bundles, and a synthetic corpus
generator.

The generator jointly emits template-grammar sentences, gold event
annotations, and aligned AMR graphs in which the first edge of the shortest
trigger-to-argument path encodes the gold role. Role ambiguity on the text
side is controlled by occasionally dropping the preposition cue, and the
places word pool is shared between several roles, so the surface form alone
underdetermines some roles while the graph never does (at zero edge noise).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .amr.graph import AmrEdge, AmrGraph, AmrNode
from .amr.relations import CANONICAL_RAW, RelationGroup
from .errors import ConfigError, IoError, OutOfRange, SchemaError


@dataclass(frozen=True)
class Argument:
    start: int
    end: int
    role: str


@dataclass(frozen=True)
class EventMention:
    trigger_start: int
    trigger_end: int
    event_type: str
    args: tuple[Argument, ...] = ()

    @property
    def trigger_span(self) -> tuple[int, int]:
        return (self.trigger_start, self.trigger_end)


@dataclass(frozen=True)
class LabeledSentence:
    sent_id: str
    tokens: tuple[str, ...]
    events: tuple[EventMention, ...] = ()

    def __post_init__(self):
        n = len(self.tokens)
        occupied: list[tuple[int, int]] = []
        for ev in self.events:
            spans = [ev.trigger_span] + [(a.start, a.end) for a in ev.args]
            for start, end in spans:
                if not 0 <= start < end <= n:
                    raise SchemaError(
                        f"{self.sent_id}: span ({start}, {end}) outside {n}-token sentence"
                    )
            for prev in occupied:
                if ev.trigger_start < prev[1] and prev[0] < ev.trigger_end:
                    raise SchemaError(f"{self.sent_id}: overlapping trigger spans")
            occupied.append(ev.trigger_span)


@dataclass(frozen=True)
class FlaggedPrediction:
    """A prediction-shaped record with a known correctness flag, used to
    evaluate how well a scorer separates right from wrong argument roles."""

    sent_id: str
    trigger_start: int
    trigger_end: int
    event_type: str
    arg_start: int
    arg_end: int
    role: str
    flag: int  # 1 iff role is the gold role for this pair


# ---------------------------------------------------------------------------
# JSON Lines IO
# ---------------------------------------------------------------------------


def _sentence_to_record(sent: LabeledSentence) -> dict:
    return {
        "sent_id": sent.sent_id,
        "tokens": list(sent.tokens),
        "events": [
            {
                "trigger": {"start": ev.trigger_start, "end": ev.trigger_end, "type": ev.event_type},
                "args": [{"start": a.start, "end": a.end, "role": a.role} for a in ev.args],
            }
            for ev in sent.events
        ],
    }


def _sentence_from_record(rec: dict, line_no: int, path: str) -> LabeledSentence:
    try:
        events = tuple(
            EventMention(
                trigger_start=int(ev["trigger"]["start"]),
                trigger_end=int(ev["trigger"]["end"]),
                event_type=str(ev["trigger"]["type"]),
                args=tuple(
                    Argument(start=int(a["start"]), end=int(a["end"]), role=str(a["role"]))
                    for a in ev.get("args", [])
                ),
            )
            for ev in rec.get("events", [])
        )
        return LabeledSentence(
            sent_id=str(rec["sent_id"]),
            tokens=tuple(str(t) for t in rec["tokens"]),
            events=events,
        )
    except SchemaError as exc:
        raise SchemaError(f"{path}:{line_no}: {exc}") from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{path}:{line_no}: malformed record: {exc!r}") from exc


def load_labeled(path: str) -> list[LabeledSentence]:
    """Read a labeled (or unlabeled, events-free) JSONL dataset."""
    sentences = []
    try:
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise SchemaError(f"{path}:{line_no}: invalid JSON: {exc}") from exc
                sentences.append(_sentence_from_record(rec, line_no, path))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return sentences


def save_labeled(path: str, sentences: list[LabeledSentence], with_events: bool = True):
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for sent in sentences:
                rec = _sentence_to_record(sent)
                if not with_events:
                    rec["events"] = []
                fh.write(json.dumps(rec) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_flags(path: str) -> list[FlaggedPrediction]:
    flags = []
    try:
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    flags.append(
                        FlaggedPrediction(
                            sent_id=str(rec["sent_id"]),
                            trigger_start=int(rec["trigger"]["start"]),
                            trigger_end=int(rec["trigger"]["end"]),
                            event_type=str(rec["trigger"]["type"]),
                            arg_start=int(rec["arg"]["start"]),
                            arg_end=int(rec["arg"]["end"]),
                            role=str(rec["role"]),
                            flag=int(rec["flag"]),
                        )
                    )
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise SchemaError(f"{path}:{line_no}: malformed flag record: {exc!r}") from exc
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return flags


def save_flags(path: str, flags: list[FlaggedPrediction]):
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for f in flags:
                rec = {
                    "sent_id": f.sent_id,
                    "trigger": {"start": f.trigger_start, "end": f.trigger_end, "type": f.event_type},
                    "arg": {"start": f.arg_start, "end": f.arg_end},
                    "role": f.role,
                    "flag": f.flag,
                }
                fh.write(json.dumps(rec) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Synthetic corpus
# ---------------------------------------------------------------------------

PEOPLE = [
    "soldiers", "rebels", "police", "officers", "workers", "militants",
    "villagers", "guards", "protesters", "civilians", "commandos", "journalists",
    "farmers", "students", "marines", "pilots", "sailors", "clerks",
    "miners", "drivers", "nurses", "engineers", "lawyers", "merchants",
    "refugees", "smugglers", "insurgents", "diplomats", "officials", "senators",
    "clerics", "teachers", "traders", "fighters", "scouts", "deputies",
]
OBJECTS = [
    "rifles", "grenades", "trucks", "mortars", "drones", "missiles",
    "cannons", "knives", "pistols", "rockets", "jeeps", "tanks",
    "radios", "shovels", "machetes", "crates", "barrels", "flares",
    "carbines", "launchers", "wagons", "sabers", "bayonets", "howitzers",
]
PLACES = [
    "baghdad", "mosul", "karbala", "basra", "fallujah", "tikrit",
    "kirkuk", "samarra", "ramadi", "najaf", "kufa", "amara",
    "baqubah", "taji", "balad", "hilla", "kut", "nasiriyah",
    "duhok", "erbil", "zakho", "sinjar", "haditha", "rawa",
    "anah", "qaim", "rutba", "diwaniyah",
]
TIMES = [
    "monday", "tuesday", "wednesday", "thursday", "friday", "saturday",
    "sunday", "january", "march", "june", "september", "november",
    "midnight", "noon", "dawn", "dusk",
]
NEUTRAL_VERBS = ["waited", "rested", "slept", "stood", "lingered", "paused", "idled", "loitered"]

EVENT_TYPE_TRIGGERS: list[tuple[str, list[str]]] = [
    ("Attack", ["attacked", "bombed", "raided", "ambushed", "stormed", "shelled", "torched", "besieged"]),
    ("Transport", ["moved", "shipped", "ferried", "hauled", "convoyed", "trucked", "airlifted", "relocated"]),
    ("Meet", ["visited", "gathered", "convened", "assembled", "huddled", "conferred", "reunited", "congregated"]),
    ("Hire", ["hired", "recruited", "enlisted", "appointed", "drafted", "conscripted", "contracted", "deputized"]),
    ("Injure", ["wounded", "injured", "maimed", "battered", "bruised", "crippled", "scarred", "concussed"]),
    ("Broadcast", ["announced", "reported", "declared", "proclaimed", "denounced", "publicized", "disclosed", "trumpeted"]),
]

# role -> (word pool name, preposition cue, AMR relation group)
ROLE_SPECS: list[tuple[str, str, str | None, RelationGroup]] = [
    ("Agent", "people", None, RelationGroup.ARG0),
    ("Patient", "patient", None, RelationGroup.ARG1),
    ("Instrument", "objects", "with", RelationGroup.INSTRUMENT),
    ("Place", "places", "in", RelationGroup.PLACE),
    ("Time", "times", "on", RelationGroup.TIME),
    ("Destination", "places", "to", RelationGroup.DESTINATION),
    ("Source", "places", "from", RelationGroup.SOURCE),
    ("Beneficiary", "people", "for", RelationGroup.BENEFICIARY),
]

ROLE_RELATION: dict[str, RelationGroup] = {name: grp for name, _, _, grp in ROLE_SPECS}


@dataclass
class SynthConfig:
    """Knobs for the synthetic corpus.

    label_noise_rate controls the fraction of corrupted roles among the
    prediction-shaped flag records the generator emits for scorer
    evaluation; amr_edge_noise_rate relabels graph edges to emulate
    system-produced (rather than gold) graphs.
    """

    n_event_types: int = 4
    n_roles: int = 6
    vocab_size: int = 0  # 0 = use the full built-in lexicons
    n_labeled: int = 900
    n_unlabeled: int = 2800
    n_heldout: int = 100
    amr_edge_noise_rate: float = 0.0
    label_noise_rate: float = 0.0
    seed: int = 0
    event_rate: float = 0.21
    second_event_rate: float = 0.15
    p_drop_preposition: float = 0.35
    p_extra_hop: float = 0.25

    def __post_init__(self):
        if not 2 <= self.n_roles <= len(ROLE_SPECS):
            raise ConfigError(f"n_roles must be in [2, {len(ROLE_SPECS)}]")
        if not 1 <= self.n_event_types <= len(EVENT_TYPE_TRIGGERS):
            raise ConfigError(f"n_event_types must be in [1, {len(EVENT_TYPE_TRIGGERS)}]")
        for name in ("amr_edge_noise_rate", "label_noise_rate", "event_rate",
                     "second_event_rate", "p_drop_preposition", "p_extra_hop"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {value}")
        for name in ("n_labeled", "n_unlabeled", "n_heldout"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if self.n_labeled < 1:
            raise ConfigError("n_labeled must be positive")

    @property
    def event_types(self) -> list[str]:
        return [name for name, _ in EVENT_TYPE_TRIGGERS[: self.n_event_types]]

    @property
    def roles(self) -> list[str]:
        return [spec[0] for spec in ROLE_SPECS[: self.n_roles]]


class SynthCorpus(NamedTuple):
    labeled: list[LabeledSentence]
    unlabeled: list[LabeledSentence]  # gold events retained for oracles; savers drop them
    heldout: list[LabeledSentence]
    amr: dict[str, AmrGraph]
    flags: list[FlaggedPrediction]


class _Lexicon:
    def __init__(self, config: SynthConfig):
        pools = {
            "people": list(PEOPLE),
            "objects": list(OBJECTS),
            "places": list(PLACES),
            "times": list(TIMES),
        }
        if config.vocab_size:
            total = sum(len(v) for v in pools.values())
            if config.vocab_size < 2 * len(pools):
                raise ConfigError("vocab_size too small: need at least 2 words per pool")
            for key in pools:
                share = max(2, round(config.vocab_size * len(pools[key]) / total))
                pools[key] = pools[key][:share]
        pools["patient"] = pools["people"] + pools["objects"]
        self.pools = pools
        self.triggers = {
            name: words for name, words in EVENT_TYPE_TRIGGERS[: config.n_event_types]
        }
        self.role_specs = {
            spec[0]: spec for spec in ROLE_SPECS[: config.n_roles]
        }

    def sample(self, rng: np.random.Generator, pool: str) -> str:
        words = self.pools[pool]
        return words[int(rng.integers(len(words)))]

    def sample_trigger(self, rng: np.random.Generator, event_type: str) -> str:
        words = self.triggers[event_type]
        return words[int(rng.integers(len(words)))]


@dataclass
class _GraphDraft:
    nodes: list[AmrNode] = field(default_factory=list)
    edges: list[AmrEdge] = field(default_factory=list)

    def add_node(self, concept: str, span: tuple[int, int] | None) -> str:
        node_id = f"x{len(self.nodes)}"
        self.nodes.append(AmrNode(id=node_id, concept=concept, token_span=span))
        return node_id

    def add_edge(self, src: str, dst: str, group: RelationGroup):
        self.edges.append(AmrEdge(src=src, dst=dst, raw_relation=CANONICAL_RAW[group]))

    def build(self, root: str) -> AmrGraph:
        return AmrGraph(nodes=tuple(self.nodes), edges=tuple(self.edges), root=root)


def _render_event(
    rng: np.random.Generator,
    lex: _Lexicon,
    config: SynthConfig,
    tokens: list[str],
    draft: _GraphDraft,
    reuse_agent: tuple[tuple[int, int], str] | None = None,
) -> tuple[EventMention, str, dict[str, str]]:
    """Append one event clause to tokens and its subgraph to the draft.

    Returns the mention, its trigger node id, and a role -> node id map.
    reuse_agent shares an existing (span, node id) as this event's Agent,
    creating a reentrant node.
    """
    event_type = config.event_types[int(rng.integers(len(config.event_types)))]
    roles = config.roles

    args: list[tuple[str, str]] = []  # (role, word)
    if reuse_agent is None and "Agent" in roles and rng.random() < 0.9:
        args.append(("Agent", lex.sample(rng, "people")))
    if "Patient" in roles and rng.random() < 0.75:
        args.append(("Patient", lex.sample(rng, "patient")))
    optional = [r for r in roles if r not in ("Agent", "Patient")]
    for role in optional:
        if rng.random() < 0.30:
            args.append((role, lex.sample(rng, lex.role_specs[role][1])))
    if not args and reuse_agent is None:
        args.append(("Agent", lex.sample(rng, "people")))

    # surface order: agent, trigger, patient, then shuffled optional slots
    trigger_word = lex.sample_trigger(rng, event_type)
    arg_records: list[tuple[str, int, int, str | None]] = []  # role, start, end, prep token or None

    agent = next((a for a in args if a[0] == "Agent"), None)
    patient = next((a for a in args if a[0] == "Patient"), None)
    rest = [a for a in args if a[0] not in ("Agent", "Patient")]
    rest_order = list(rng.permutation(len(rest)))

    if agent is not None:
        tokens.append("the")
        arg_records.append(("Agent", len(tokens), len(tokens) + 1, None))
        tokens.append(agent[1])
    trigger_start = len(tokens)
    tokens.append(trigger_word)
    trigger_end = len(tokens)
    if patient is not None:
        tokens.append("the")
        arg_records.append(("Patient", len(tokens), len(tokens) + 1, None))
        tokens.append(patient[1])
    for idx in rest_order:
        role, word = rest[idx]
        prep = lex.role_specs[role][2]
        drop = rng.random() < config.p_drop_preposition
        prep_token = None
        if prep is not None and not drop:
            prep_token = prep
            tokens.append(prep)
        arg_records.append((role, len(tokens), len(tokens) + 1, prep_token))
        tokens.append(word)

    # graph: trigger node, one edge per argument; the first hop always
    # carries the role's relation group
    trig_node = draft.add_node(f"{trigger_word}-01", (trigger_start, trigger_end))
    arguments: list[Argument] = []
    arg_nodes: dict[str, str] = {}
    for role, start, end, prep_token in arg_records:
        arg_node = draft.add_node(tokens[start], (start, end))
        group = ROLE_RELATION[role]
        if prep_token is not None and rng.random() < config.p_extra_hop:
            hop = draft.add_node(prep_token, (start - 1, start))
            draft.add_edge(trig_node, hop, group)
            draft.add_edge(hop, arg_node, RelationGroup.MODIFIER)
        else:
            draft.add_edge(trig_node, arg_node, group)
        arguments.append(Argument(start=start, end=end, role=role))
        arg_nodes.setdefault(role, arg_node)

    if reuse_agent is not None:
        span, shared_node = reuse_agent
        draft.add_edge(trig_node, shared_node, ROLE_RELATION["Agent"])
        arguments.insert(0, Argument(start=span[0], end=span[1], role="Agent"))
        arg_nodes.setdefault("Agent", shared_node)

    event = EventMention(
        trigger_start=trigger_start,
        trigger_end=trigger_end,
        event_type=event_type,
        args=tuple(arguments),
    )
    return event, trig_node, arg_nodes


def _render_eventless(rng: np.random.Generator, lex: _Lexicon, config: SynthConfig):
    tokens: list[str] = ["the", lex.sample(rng, "people")]
    verb = NEUTRAL_VERBS[int(rng.integers(len(NEUTRAL_VERBS)))]
    verb_pos = len(tokens)
    tokens.append(verb)
    draft = _GraphDraft()
    root = draft.add_node(f"{verb}-01", (verb_pos, verb_pos + 1))
    subj = draft.add_node(tokens[1], (1, 2))
    draft.add_edge(root, subj, RelationGroup.ARG0)
    if rng.random() < 0.5:
        tokens.append("in")
        place = lex.sample(rng, "places")
        pos = len(tokens)
        tokens.append(place)
        node = draft.add_node(place, (pos, pos + 1))
        draft.add_edge(root, node, RelationGroup.PLACE)
    return tokens, draft.build(root)


def _render_sentence(rng: np.random.Generator, lex: _Lexicon, config: SynthConfig, sent_id: str):
    if rng.random() >= config.event_rate:
        tokens, graph = _render_eventless(rng, lex, config)
        return LabeledSentence(sent_id=sent_id, tokens=tuple(tokens), events=()), graph

    tokens: list[str] = []
    draft = _GraphDraft()
    first, first_node, first_args = _render_event(rng, lex, config, tokens, draft)
    events = [first]
    if rng.random() < config.second_event_rate and len(tokens) <= 12:
        and_pos = len(tokens)
        tokens.append("and")
        agent_arg = next((a for a in first.args if a.role == "Agent"), None)
        reuse = None
        if agent_arg is not None and rng.random() < 0.5:
            reuse = ((agent_arg.start, agent_arg.end), first_args["Agent"])
        second, second_node, _ = _render_event(rng, lex, config, tokens, draft, reuse_agent=reuse)
        events.append(second)
        and_node = draft.add_node("and", (and_pos, and_pos + 1))
        draft.add_edge(and_node, first_node, RelationGroup.OP)
        draft.add_edge(and_node, second_node, RelationGroup.OP)
        root = and_node
    else:
        root = first_node
    sentence = LabeledSentence(sent_id=sent_id, tokens=tuple(tokens), events=tuple(events))
    return sentence, draft.build(root)


def sample_wrong_role(role: str, roles: list[str], rng: np.random.Generator) -> str:
    from .errors import DegenerateLabelSpace

    alternatives = [r for r in roles if r != role]
    if not alternatives:
        raise DegenerateLabelSpace("need at least two argument roles to corrupt one")
    return alternatives[int(rng.integers(len(alternatives)))]


def generate_synthetic(config: SynthConfig) -> SynthCorpus:
    """Deterministically build the labeled/unlabeled/heldout splits, one
    aligned AMR graph per sentence, and flagged prediction records."""
    rng = np.random.default_rng(config.seed)
    lex = _Lexicon(config)

    amr: dict[str, AmrGraph] = {}

    def make_split(prefix: str, count: int) -> list[LabeledSentence]:
        out = []
        for i in range(count):
            sent_id = f"{prefix}-{i:05d}"
            sentence, graph = _render_sentence(rng, lex, config, sent_id)
            if config.amr_edge_noise_rate > 0:
                graph = inject_amr_noise(graph, config.amr_edge_noise_rate, rng)
            amr[sent_id] = graph
            out.append(sentence)
        return out

    labeled = make_split("tr", config.n_labeled)
    unlabeled = make_split("un", config.n_unlabeled)
    heldout = make_split("ho", config.n_heldout)

    flags: list[FlaggedPrediction] = []
    for sent in unlabeled + heldout:
        for ev in sent.events:
            for arg in ev.args:
                role, flag = arg.role, 1
                if rng.random() < config.label_noise_rate:
                    role = sample_wrong_role(arg.role, config.roles, rng)
                    flag = 0
                flags.append(
                    FlaggedPrediction(
                        sent_id=sent.sent_id,
                        trigger_start=ev.trigger_start,
                        trigger_end=ev.trigger_end,
                        event_type=ev.event_type,
                        arg_start=arg.start,
                        arg_end=arg.end,
                        role=role,
                        flag=flag,
                    )
                )
    return SynthCorpus(labeled=labeled, unlabeled=unlabeled, heldout=heldout, amr=amr, flags=flags)


def inject_amr_noise(graph: AmrGraph, rate: float, rng: np.random.Generator) -> AmrGraph:
    """Relabel each edge to a uniformly random different group with the
    given probability; node structure is untouched."""
    if not 0.0 <= rate <= 1.0:
        raise OutOfRange(f"noise rate must be in [0, 1], got {rate}")
    groups = list(RelationGroup)
    new_edges = []
    for edge in graph.edges:
        if rng.random() < rate:
            others = [g for g in groups if g != edge.group]
            new_group = others[int(rng.integers(len(others)))]
            new_edges.append(
                AmrEdge(src=edge.src, dst=edge.dst, raw_relation=CANONICAL_RAW[new_group])
            )
        else:
            new_edges.append(edge)
    return AmrGraph(nodes=graph.nodes, edges=tuple(new_edges), root=graph.root)
