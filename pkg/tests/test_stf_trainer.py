import numpy as np
import pytest
import torch

from stf_ee.corpus import SynthConfig, generate_synthetic
from stf_ee.errors import OutOfRange
from stf_ee.extractor import EventExtractor
from stf_ee.labels import LabelSchema
from stf_ee.selftrain import (
    PseudoSample,
    StfConfig,
    beta_schedule,
    compat_transform,
    generate_pseudo_labels,
    generate_vanilla_pseudo_labels,
    run_stf,
    stf_loss,
    threshold_filter,
    vanilla_self_train,
    weighted_pseudo_loss,
)


class TestCompatTransform:
    def test_endpoints_exact(self):
        assert compat_transform(0.0) == -1.0
        assert compat_transform(0.5) == 0.0
        assert compat_transform(1.0) == 1.0

    def test_out_of_range(self):
        for bad in (-0.01, 1.01, 2.0):
            with pytest.raises(OutOfRange):
                compat_transform(bad)

    def test_range_contract(self):
        for c in np.linspace(0, 1, 21):
            assert -1.0 <= compat_transform(float(c)) <= 1.0


class TestBetaSchedule:
    def test_documented_points(self):
        assert beta_schedule(0, 70) == 0.0
        assert beta_schedule(70, 70) == 1.0
        assert beta_schedule(35, 70) == 0.5

    def test_out_of_range(self):
        with pytest.raises(OutOfRange):
            beta_schedule(71, 70)
        with pytest.raises(OutOfRange):
            beta_schedule(-1, 70)
        with pytest.raises(OutOfRange):
            beta_schedule(1, 0)


def _sample(c, sent_id="s"):
    return PseudoSample(
        sent_index=0,
        sent_id=sent_id,
        tokens=("a", "b"),
        trigger_span=(0, 1),
        trigger_type="T",
        trigger_probability=0.9,
        arg_span=(1, 2),
        role="R",
        model_probability=0.9,
        compatibility=c,
        weight=compat_transform(c) if c is not None else 1.0,
    )


class TestThresholdFilter:
    def test_half_retains_everything_but_exact_half(self):
        samples = [_sample(c) for c in (0.0, 0.3, 0.5, 0.7, 1.0)]
        kept = threshold_filter(samples, 0.5)
        assert [s.compatibility for s in kept] == [0.0, 0.3, 0.7, 1.0]

    def test_confident_positive_retained(self):
        assert threshold_filter([_sample(0.95)], 0.9)

    def test_confident_negative_retained(self):
        assert threshold_filter([_sample(0.07)], 0.9)

    def test_uncertain_dropped(self):
        assert threshold_filter([_sample(0.6)], 0.9) == []

    def test_monotone_nesting(self):
        rng = np.random.default_rng(0)
        samples = [_sample(float(c)) for c in rng.random(200)]
        previous = None
        for s_st in (0.5, 0.6, 0.7, 0.8, 0.9):
            kept = {id(s) for s in threshold_filter(samples, s_st)}
            if previous is not None:
                assert kept <= previous
            previous = kept

    def test_out_of_range(self):
        with pytest.raises(OutOfRange):
            threshold_filter([], 0.4)


class TestStfConfig:
    def test_validation(self):
        with pytest.raises(OutOfRange):
            StfConfig(total_epochs=0)
        with pytest.raises(OutOfRange):
            StfConfig(vanilla_threshold=0.2)
        with pytest.raises(OutOfRange):
            StfConfig(certainty_threshold=0.3)
        with pytest.raises(OutOfRange):
            StfConfig(pseudo_noise_rate=-0.1)


@pytest.fixture(scope="module")
def small_world():
    corpus = generate_synthetic(
        SynthConfig(n_labeled=80, n_unlabeled=60, n_heldout=15, seed=13, event_rate=0.5)
    )
    types = sorted({ev.event_type for s in corpus.labeled for ev in s.events})
    roles = sorted({a.role for s in corpus.labeled for ev in s.events for a in ev.args})
    schema = LabelSchema(tuple(types), tuple(roles))
    extractor = EventExtractor(seed=7, epochs=6).fit(corpus.labeled, schema=schema)
    return corpus, schema, extractor


class OracleScorer:
    """Returns 1.0 for predictions that match gold pairs, 0.0 otherwise."""

    def __init__(self, sentences):
        self.gold = {}
        for s in sentences:
            for ev in s.events:
                for a in ev.args:
                    self.gold[(s.tokens, ev.trigger_span, (a.start, a.end))] = (
                        ev.event_type,
                        a.role,
                    )

    def score_pair(self, tokens, graph, trigger_span, event_type, arg_span, role):
        return float(self.gold.get((tuple(tokens), tuple(trigger_span), tuple(arg_span))) == (event_type, role))


class ConstantScorer:
    def __init__(self, c):
        self.c = c

    def score_pair(self, *args, **kwargs):
        return self.c


class TestGeneratePseudoLabels:
    def test_eventless_predictions_make_no_samples(self, small_world):
        corpus, schema, extractor = small_world
        quiet = [s for s, p in zip(corpus.unlabeled, extractor.predict(corpus.unlabeled)) if not p.arguments]
        samples = generate_pseudo_labels(extractor, quiet, ConstantScorer(0.7), corpus.amr)
        assert samples == []

    def test_oracle_scorer_gives_unit_weights_on_correct(self, small_world):
        corpus, schema, extractor = small_world
        oracle = OracleScorer(corpus.unlabeled)
        samples = generate_pseudo_labels(extractor, corpus.unlabeled, oracle, corpus.amr)
        for s in samples:
            assert s.weight in (-1.0, 1.0)
            if s.compatibility == 1.0:
                assert s.weight == 1.0

    def test_sample_count_matches_predicted_pairs(self, small_world):
        corpus, schema, extractor = small_world
        predictions = extractor.predict(corpus.unlabeled)
        expected = sum(len(p.arguments) for p in predictions)
        samples = generate_pseudo_labels(extractor, corpus.unlabeled, ConstantScorer(0.6), corpus.amr)
        assert len(samples) == expected

    def test_missing_amr_skipped(self, small_world, caplog):
        corpus, schema, extractor = small_world
        with_preds = [
            s for s, p in zip(corpus.unlabeled, extractor.predict(corpus.unlabeled)) if p.arguments
        ]
        samples = generate_pseudo_labels(extractor, with_preds, ConstantScorer(0.6), amr={})
        assert samples == []

    def test_noise_corrupts_requested_fraction(self, small_world):
        corpus, schema, extractor = small_world
        rng = np.random.default_rng(3)
        samples = generate_pseudo_labels(
            extractor, corpus.unlabeled, ConstantScorer(0.6), corpus.amr,
            noise_rate=0.5, rng=rng,
        )
        if len(samples) >= 30:
            rate = sum(s.corrupted for s in samples) / len(samples)
            assert 0.3 <= rate <= 0.7


class TestStfLoss:
    def test_zero_weights_reduce_to_labeled_loss(self, small_world):
        corpus, schema, extractor = small_world
        batch = corpus.labeled[:4]
        pseudo = [
            PseudoSample(0, "x", corpus.labeled[0].tokens, (1, 2), schema.trigger_types[0],
                         0.9, (0, 1), schema.argument_roles[0], 0.9, 0.5, 0.0)
        ]
        total, labeled_val, stf_val = stf_loss(extractor, batch, pseudo, beta=0.7)
        expected, _ = extractor.supervised_loss(batch)
        assert float(total.detach()) == pytest.approx(float(expected.detach()), abs=1e-6)
        assert stf_val == pytest.approx(0.0, abs=1e-9)

    def test_beta_zero_ignores_pseudo(self, small_world):
        corpus, schema, extractor = small_world
        batch = corpus.labeled[:4]
        pseudo = [
            PseudoSample(0, "x", corpus.labeled[0].tokens, (1, 2), schema.trigger_types[0],
                         0.9, (0, 1), schema.argument_roles[0], 0.9, 1.0, 1.0)
        ]
        total, _, _ = stf_loss(extractor, batch, pseudo, beta=0.0)
        expected, _ = extractor.supervised_loss(batch)
        assert float(total.detach()) == pytest.approx(float(expected.detach()), abs=1e-6)

    def test_negative_beta_rejected(self, small_world):
        corpus, schema, extractor = small_world
        with pytest.raises(OutOfRange):
            stf_loss(extractor, corpus.labeled[:2], [], beta=-0.5)

    def test_gradient_scales_with_weight_and_beta(self, small_world):
        """For one pseudo sample, grad(beta * w * L) == beta * w * grad(L).

        Run in float64 so rounding noise sits far below the tolerance.
        """
        corpus, schema, _ = small_world
        extractor = EventExtractor(seed=7).build(corpus.labeled, schema=schema)
        extractor.module_.double()
        sent = next(s for s in corpus.labeled if s.events and s.events[0].args)
        ev = sent.events[0]
        arg = ev.args[0]
        beta, weight = 0.6, -0.5

        def pseudo(w):
            return [
                PseudoSample(0, sent.sent_id, sent.tokens, ev.trigger_span, ev.event_type,
                             0.9, (arg.start, arg.end), arg.role, 0.9, None, w)
            ]

        params = [p for p in extractor.module_.parameters() if p.requires_grad]

        unweighted = weighted_pseudo_loss(extractor, pseudo(1.0))
        grads_base = torch.autograd.grad(unweighted, params, allow_unused=True)

        weighted = beta * weighted_pseudo_loss(extractor, pseudo(weight))
        grads_scaled = torch.autograd.grad(weighted, params, allow_unused=True)

        for g_base, g_scaled in zip(grads_base, grads_scaled):
            if g_base is None:
                assert g_scaled is None
                continue
            assert torch.allclose(g_scaled, beta * weight * g_base, atol=1e-6)

    def test_additivity(self, small_world):
        corpus, schema, extractor = small_world
        batch = corpus.labeled[:3]
        sent = next(s for s in corpus.labeled if s.events and s.events[0].args)
        ev, arg = sent.events[0], sent.events[0].args[0]
        pseudo = [
            PseudoSample(0, sent.sent_id, sent.tokens, ev.trigger_span, ev.event_type,
                         0.9, (arg.start, arg.end), arg.role, 0.9, 0.8, 0.6),
            PseudoSample(0, sent.sent_id, sent.tokens, ev.trigger_span, ev.event_type,
                         0.9, (arg.start, arg.end), arg.role, 0.9, 0.2, -0.6),
        ]
        beta = 0.4
        total, _, _ = stf_loss(extractor, batch, pseudo, beta)
        labeled_only, _ = extractor.supervised_loss(batch)
        pseudo_only = weighted_pseudo_loss(extractor, pseudo)
        assert float(total.detach()) == pytest.approx(
            float(labeled_only.detach()) + beta * float(pseudo_only.detach()), abs=1e-6
        )


def _tiny_config(**kwargs):
    defaults = dict(
        stage1_epochs=2,
        total_epochs=3,
        labeled_batch_size=8,
        stage2_batch_size=8,
        seed=17,
    )
    defaults.update(kwargs)
    return StfConfig(**defaults)


class TestRunStf:
    def test_empty_pool_equals_supervised_continuation(self, small_world):
        corpus, schema, _ = small_world
        config = _tiny_config()
        _, stf_series = run_stf(corpus.labeled, [], None, config)
        _, vanilla_series = vanilla_self_train(corpus.labeled, [], config)
        stf_losses = [(r.labeled_loss, r.stf_loss) for r in stf_series.records]
        vanilla_losses = [(r.labeled_loss, r.stf_loss) for r in vanilla_series.records]
        assert stf_losses == vanilla_losses
        assert all(r.pseudo_count == 0 for r in stf_series.records)

    def test_checkpoint_count(self, small_world):
        corpus, schema, _ = small_world
        config = _tiny_config()
        _, series = run_stf(corpus.labeled, [], None, config)
        assert len(series) == config.stage1_epochs + config.total_epochs
        assert all(r.state is not None for r in series.records)

    def test_deterministic_logs(self, small_world):
        corpus, schema, _ = small_world
        config = _tiny_config()
        oracle = OracleScorer(corpus.unlabeled)
        _, a = run_stf(corpus.labeled, corpus.unlabeled[:30], oracle, config, amr=corpus.amr)
        _, b = run_stf(corpus.labeled, corpus.unlabeled[:30], oracle, config, amr=corpus.amr)
        assert [r.log_record() for r in a.records] == [r.log_record() for r in b.records]

    def test_scorer_required_with_unlabeled(self, small_world):
        corpus, schema, _ = small_world
        with pytest.raises(ValueError):
            run_stf(corpus.labeled, corpus.unlabeled, None, _tiny_config())


class TestVanilla:
    def test_threshold_one_keeps_nothing(self, small_world):
        corpus, schema, extractor = small_world
        samples = generate_vanilla_pseudo_labels(extractor, corpus.unlabeled, threshold=1.0)
        assert samples == []

    def test_retained_probabilities_exceed_threshold(self, small_world):
        corpus, schema, extractor = small_world
        samples = generate_vanilla_pseudo_labels(extractor, corpus.unlabeled, threshold=0.9)
        for s in samples:
            assert s.model_probability > 0.9
            assert s.weight == 1.0 and s.compatibility is None

    def test_pseudo_set_shrinks_with_threshold(self, small_world):
        corpus, schema, extractor = small_world
        sizes = [
            len(generate_vanilla_pseudo_labels(extractor, corpus.unlabeled, threshold=t))
            for t in (0.5, 0.7, 0.9, 1.0)
        ]
        assert sizes == sorted(sizes, reverse=True)
