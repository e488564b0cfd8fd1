from collections import Counter

import numpy as np
import pytest
import torch

from stf_ee.amr.graph import align_nodes, shortest_path
from stf_ee.corpus import SynthConfig, generate_synthetic
from stf_ee.errors import DegenerateLabelSpace, UnalignedNode
from stf_ee.labels import LabelSchema
from stf_ee.scorer import (
    CompatibilityScorer,
    ScoringExample,
    build_scoring_examples,
    make_negatives,
    span_keyed_example,
)

SCHEMA = LabelSchema(
    trigger_types=("Attack", "Transport", "Meet", "Hire"),
    argument_roles=("Agent", "Patient", "Instrument", "Place", "Time", "Destination"),
)


@pytest.fixture(scope="module")
def corpus():
    return generate_synthetic(
        SynthConfig(n_labeled=160, n_unlabeled=60, n_heldout=20, seed=21, label_noise_rate=0.5)
    )


@pytest.fixture(scope="module")
def positives(corpus):
    examples = build_scoring_examples(corpus.labeled, corpus.amr)
    assert examples, "generator produced no gold pairs"
    return examples


@pytest.fixture(scope="module")
def built_scorer(corpus, positives):
    scorer = CompatibilityScorer(seed=5)
    scorer.build(SCHEMA, [list(ex.tokens) for ex in positives])
    return scorer


class TestEmbedSequence:
    def test_minimal_sequence_three_rows(self, built_scorer):
        ex = span_keyed_example(("the", "raid", "began"), "Attack", (1, 2), (1, 2), "Agent", 1)
        minimal = ScoringExample(
            sequence=ex.sequence.__class__(
                event_type="Attack", elements=(ex.sequence.elements[0],), role="Agent"
            ),
            tokens=ex.tokens,
            node_spans=ex.node_spans,
            label=1,
        )
        h = built_scorer.embed_sequence(minimal)
        assert h.shape == (3, built_scorer.hidden_dim)

    def test_row_count_equals_sequence_length(self, corpus, built_scorer):
        # multi-hop paths included: row count always tracks the sequence
        lengths_seen = set()
        for ex in build_scoring_examples(corpus.labeled, corpus.amr):
            h = built_scorer.embed_sequence(ex)
            assert h.shape == (len(ex.sequence), built_scorer.hidden_dim)
            lengths_seen.add(len(ex.sequence))
        assert 7 in lengths_seen, "expected at least one two-hop path"

    def test_unaligned_node_raises(self, built_scorer, positives):
        ex = positives[0]
        broken = ScoringExample(
            sequence=ex.sequence,
            tokens=ex.tokens,
            node_spans={k: None for k in ex.node_spans},
            label=ex.label,
        )
        with pytest.raises(UnalignedNode):
            built_scorer.embed_sequence(broken)

    def test_position_flag_controls_order_sensitivity(self, positives):
        ex = next(e for e in positives if len(e.sequence.elements) >= 3)
        permuted = ScoringExample(
            sequence=ex.sequence.__class__(
                event_type=ex.sequence.event_type,
                elements=tuple(reversed(ex.sequence.elements)),
                role=ex.sequence.role,
            ),
            tokens=ex.tokens,
            node_spans=ex.node_spans,
            label=ex.label,
        )
        with_pos = CompatibilityScorer(seed=9, use_positions=True).build(
            SCHEMA, [list(ex.tokens)]
        )
        without_pos = CompatibilityScorer(seed=9, use_positions=False).build(
            SCHEMA, [list(ex.tokens)]
        )
        assert with_pos.score(ex) != pytest.approx(with_pos.score(permuted), abs=1e-9)
        assert without_pos.score(ex) == pytest.approx(without_pos.score(permuted), abs=1e-9)


class TestScore:
    def test_score_in_open_interval(self, built_scorer, positives):
        for ex in positives[:10]:
            c = built_scorer.score(ex)
            assert 0.0 < c < 1.0

    def test_zero_head_gives_exactly_half(self, corpus, positives):
        scorer = CompatibilityScorer(seed=1).build(SCHEMA, [list(positives[0].tokens)])
        with torch.no_grad():
            scorer.module_.head.weight.zero_()
            scorer.module_.head.bias.zero_()
        assert scorer.score(positives[0]) == 0.5

    def test_deterministic(self, built_scorer, positives):
        ex = positives[0]
        assert built_scorer.score(ex) == built_scorer.score(ex)

    def test_batch_independent(self, built_scorer, positives):
        singles = [built_scorer.score(ex) for ex in positives[:6]]
        batched = built_scorer.score_many(positives[:6])
        reversed_batch = built_scorer.score_many(list(reversed(positives[:6])))
        assert singles == batched
        assert list(reversed(singles)) == reversed_batch


class TestMakeNegatives:
    def test_forced_alternative_with_two_roles(self, positives):
        rng = np.random.default_rng(0)
        ex = positives[0]
        gold_role = ex.sequence.role
        other = "Patient" if gold_role != "Patient" else "Agent"
        negatives = make_negatives([ex], [gold_role, other], rng)
        assert negatives[0].sequence.role == other
        assert negatives[0].label == 0

    def test_one_negative_per_positive(self, positives):
        rng = np.random.default_rng(1)
        negatives = make_negatives(positives, list(SCHEMA.argument_roles), rng)
        assert len(negatives) == len(positives)
        for pos, neg in zip(positives, negatives):
            assert neg.sequence.role != pos.sequence.role
            assert neg.sequence.elements == pos.sequence.elements
            assert neg.tokens == pos.tokens

    def test_wrong_roles_uniform(self):
        roles = ["R0", "R1", "R2", "R3", "R4"]
        ex = span_keyed_example(("a", "b"), "Attack", (0, 1), (1, 2), "R0", 1)
        rng = np.random.default_rng(2)
        draws = Counter(
            make_negatives([ex], roles, rng)[0].sequence.role for _ in range(10000)
        )
        for role in roles[1:]:
            assert abs(draws[role] / 10000 - 0.25) <= 0.02
        assert draws["R0"] == 0

    def test_degenerate_label_space(self, positives):
        rng = np.random.default_rng(3)
        with pytest.raises(DegenerateLabelSpace):
            make_negatives(positives[:1], [positives[0].sequence.role], rng)


class TestTraining:
    def test_constant_half_gives_ln2(self, corpus, positives):
        scorer = CompatibilityScorer(seed=1).build(SCHEMA, [list(positives[0].tokens)])
        with torch.no_grad():
            scorer.module_.head.weight.zero_()
            scorer.module_.head.bias.zero_()
        rng = np.random.default_rng(0)
        negatives = make_negatives(positives[:8], list(SCHEMA.argument_roles), rng)
        bce = scorer.mean_bce(positives[:8] + negatives)
        assert bce == pytest.approx(float(np.log(2.0)), abs=1e-6)

    def test_requires_both_labels(self, positives):
        scorer = CompatibilityScorer(seed=2)
        with pytest.raises(DegenerateLabelSpace):
            scorer.fit(positives[:4], schema=SCHEMA)

    def test_loss_decreases_and_separates(self, corpus, positives):
        rng = np.random.default_rng(4)
        negatives = make_negatives(positives, list(SCHEMA.argument_roles), rng)
        examples = positives + negatives
        scorer = CompatibilityScorer(seed=4, epochs=30)
        scorer.build(SCHEMA, [list(ex.tokens) for ex in examples])
        before = scorer.mean_bce(examples)
        scorer.fit(examples, schema=SCHEMA)
        after = scorer.mean_bce(examples)
        assert after < before

        pos_scores = scorer.score_many(positives)
        neg_scores = scorer.score_many(negatives)
        assert float(np.mean(pos_scores)) >= 0.9
        assert float(np.mean(neg_scores)) <= 0.1

        # accuracy on the deterministic (event type, first edge, role) rule
        correct = sum(c > 0.5 for c in pos_scores) + sum(c <= 0.5 for c in neg_scores)
        assert correct / (len(pos_scores) + len(neg_scores)) >= 0.95

    def test_parameters_frozen_after_fit(self, corpus, positives):
        rng = np.random.default_rng(5)
        negatives = make_negatives(positives[:16], list(SCHEMA.argument_roles), rng)
        scorer = CompatibilityScorer(seed=6, epochs=2)
        scorer.fit(positives[:16] + negatives, schema=SCHEMA)
        assert all(not p.requires_grad for p in scorer.module_.parameters())


class TestNoAmrVariant:
    def test_mention_sequence_length_always_four(self, corpus):
        examples = build_scoring_examples(corpus.labeled, corpus.amr, use_path=False)
        assert examples
        for ex in examples:
            assert len(ex.sequence) == 4

    def test_zero_head_gives_half(self, corpus):
        examples = build_scoring_examples(corpus.labeled[:20], corpus.amr, use_path=False)
        scorer = CompatibilityScorer(seed=7, use_path=False).build(
            SCHEMA, [list(ex.tokens) for ex in examples]
        )
        with torch.no_grad():
            scorer.module_.head.weight.zero_()
            scorer.module_.head.bias.zero_()
        assert scorer.score(examples[0]) == 0.5

    def test_score_pair_uses_mention_only(self, corpus, built_scorer):
        sent = next(s for s in corpus.labeled if s.events and s.events[0].args)
        ev = sent.events[0]
        arg = ev.args[0]
        no_amr = CompatibilityScorer(seed=8, use_path=False).build(SCHEMA, [list(sent.tokens)])
        c_with_graph = no_amr.score_pair(
            sent.tokens, corpus.amr[sent.sent_id], ev.trigger_span, ev.event_type,
            (arg.start, arg.end), arg.role,
        )
        c_without_graph = no_amr.score_pair(
            sent.tokens, None, ev.trigger_span, ev.event_type, (arg.start, arg.end), arg.role,
        )
        assert c_with_graph == c_without_graph
