import json

import numpy as np
import pytest

from infomenu.core import (
    Experiment,
    FiniteInstance,
    baseline_action,
    baseline_utility,
    experiment_value,
    full_information_value,
    responsive_value,
)


def brute_force_value(inst, kernel, i, weights=None):
    """Independent oracle: loop over signals, actions, states explicitly."""
    w = inst.prior if weights is None else weights
    total = 0.0
    for s in range(kernel.shape[1]):
        best = -np.inf
        for a in range(inst.n_actions):
            acc = 0.0
            for k in range(inst.n_states):
                acc += w[k] * kernel[k, s] * inst.utilities[i, k, a]
            best = max(best, acc)
        total += best
    return total


class TestConstruction:
    def test_prior_must_sum_to_one(self):
        with pytest.raises(ValueError, match="sums to"):
            FiniteInstance(
                states=("w0", "w1"),
                prior=np.array([0.6, 0.5]),
                actions=("a0",),
                utilities=np.zeros((1, 2, 1)),
                type_dist=np.array([1.0]),
            )

    def test_sum_tolerance_is_strict(self):
        # 1e-8 off fails, 1e-10 off passes
        with pytest.raises(ValueError):
            FiniteInstance(
                states=("w0", "w1"),
                prior=np.array([0.5 + 1e-8, 0.5]),
                actions=("a0",),
                utilities=np.zeros((1, 2, 1)),
                type_dist=np.array([1.0]),
            )
        FiniteInstance(
            states=("w0", "w1"),
            prior=np.array([0.5 + 1e-10, 0.5]),
            actions=("a0",),
            utilities=np.zeros((1, 2, 1)),
            type_dist=np.array([1.0]),
        )

    def test_negative_weights_rejected(self):
        with pytest.raises(ValueError):
            FiniteInstance(
                states=("w0", "w1"),
                prior=np.array([1.5, -0.5]),
                actions=("a0",),
                utilities=np.zeros((1, 2, 1)),
                type_dist=np.array([1.0]),
            )

    def test_utilities_outside_unit_interval_rejected(self):
        for bad in (-0.01, 1.01):
            with pytest.raises(ValueError, match="utilities"):
                FiniteInstance(
                    states=("w0",),
                    prior=np.array([1.0]),
                    actions=("a0",),
                    utilities=np.full((1, 1, 1), bad),
                    type_dist=np.array([1.0]),
                )

    def test_kernel_rows_must_be_distributions(self):
        with pytest.raises(ValueError):
            Experiment(signals=("s0", "s1"), kernel=np.array([[0.7, 0.2]]))
        with pytest.raises(ValueError):
            Experiment(signals=("s0", "s1"), kernel=np.array([[1.2, -0.2]]))

    def test_instances_are_immutable(self, matching_instance):
        with pytest.raises(ValueError):
            matching_instance.prior[0] = 0.9


class TestBaseline:
    def test_matching_instance(self, matching_instance):
        assert baseline_utility(matching_instance, 0) == pytest.approx(0.5, abs=1e-12)

    def test_single_action_is_plain_average(self):
        rng = np.random.default_rng(0)
        prior = rng.dirichlet(np.ones(4))
        u = rng.random((1, 4, 1))
        inst = FiniteInstance(
            states=tuple("wxyz"), prior=prior, actions=("a0",),
            utilities=u, type_dist=np.array([1.0]),
        )
        assert baseline_utility(inst, 0) == pytest.approx(float(prior @ u[0, :, 0]), abs=1e-12)

    def test_three_state_corpus_by_enumeration(self, skewed_instance):
        expected = max(
            float(skewed_instance.prior @ skewed_instance.utilities[0, :, a])
            for a in range(skewed_instance.n_actions)
        )
        assert baseline_utility(skewed_instance, 0) == pytest.approx(expected, abs=1e-12)

    def test_argmax_tie_breaks_low(self):
        inst = FiniteInstance(
            states=("w0",), prior=np.array([1.0]), actions=("a0", "a1"),
            utilities=np.array([[[0.4, 0.4]]]), type_dist=np.array([1.0]),
        )
        assert baseline_action(inst, 0) == 0

    def test_index_out_of_range(self, matching_instance):
        with pytest.raises(IndexError):
            baseline_utility(matching_instance, 1)


class TestExperimentValue:
    def test_null_experiment_equals_baseline(self, skewed_instance):
        null = Experiment.null(skewed_instance.n_states)
        assert experiment_value(skewed_instance, null, 0) == pytest.approx(
            baseline_utility(skewed_instance, 0), abs=1e-12
        )

    def test_identity_resolves_matching(self, matching_instance):
        ident = Experiment.full_revelation(matching_instance.states)
        assert experiment_value(matching_instance, ident, 0) == pytest.approx(1.0, abs=1e-12)

    def test_random_kernel_against_brute_force(self, skewed_instance):
        rng = np.random.default_rng(7)
        kernel = rng.dirichlet(np.ones(2), size=3)
        exp = Experiment(signals=("s0", "s1"), kernel=kernel)
        assert experiment_value(skewed_instance, exp, 0) == pytest.approx(
            brute_force_value(skewed_instance, kernel, 0), abs=1e-12
        )

    def test_dimension_mismatch(self, matching_instance):
        with pytest.raises(ValueError):
            experiment_value(matching_instance, Experiment.null(3), 0)


class TestResponsiveValue:
    def test_identity_on_matching(self, matching_instance):
        ident = Experiment(signals=matching_instance.actions, kernel=np.eye(2))
        assert responsive_value(matching_instance, ident, 0) == pytest.approx(1.0)

    def test_anti_identity_always_wrong(self, matching_instance):
        anti = Experiment(signals=matching_instance.actions, kernel=np.eye(2)[::-1].copy())
        assert responsive_value(matching_instance, anti, 0) == pytest.approx(0.0)

    def test_corpus_kernel_direct_sum(self, corpus_322):
        rng = np.random.default_rng(11)
        kernel = rng.dirichlet(np.ones(2), size=3)
        exp = Experiment(signals=corpus_322.actions, kernel=kernel)
        expected = sum(
            corpus_322.prior[k] * kernel[k, a] * corpus_322.utilities[1, k, a]
            for k in range(3)
            for a in range(2)
        )
        assert responsive_value(corpus_322, exp, 1) == pytest.approx(expected, abs=1e-12)

    def test_signal_action_mismatch(self, matching_instance):
        exp = Experiment(signals=("x", "y"), kernel=np.eye(2))
        with pytest.raises(ValueError):
            responsive_value(matching_instance, exp, 0)


@pytest.fixture(scope="module")
def random_instances():
    from infomenu.bench import random_instance

    return [random_instance(2, 3, 4, seed=s) for s in range(8)]


class TestValueProperties:

    def test_information_never_hurts_and_full_info_caps(self, random_instances):
        rng = np.random.default_rng(1)
        for inst in random_instances:
            for _ in range(5):
                kernel = rng.dirichlet(np.ones(3), size=inst.n_states)
                exp = Experiment(signals=("s0", "s1", "s2"), kernel=kernel)
                for i in range(inst.n_types):
                    v = experiment_value(inst, exp, i)
                    assert v >= baseline_utility(inst, i) - 1e-12
                    assert v <= full_information_value(inst, i) + 1e-12

    def test_responsive_below_best_response(self, random_instances):
        rng = np.random.default_rng(2)
        for inst in random_instances:
            kernel = rng.dirichlet(np.ones(inst.n_actions), size=inst.n_states)
            exp = Experiment(signals=inst.actions, kernel=kernel)
            for i in range(inst.n_types):
                assert responsive_value(inst, exp, i) <= experiment_value(inst, exp, i) + 1e-12

    def test_relabeling_invariance(self, random_instances):
        rng = np.random.default_rng(3)
        for inst in random_instances:
            kernel = rng.dirichlet(np.ones(3), size=inst.n_states)
            perm = rng.permutation(3)
            a = experiment_value(inst, Experiment(("s0", "s1", "s2"), kernel), 0)
            b = experiment_value(inst, Experiment(("s0", "s1", "s2"), kernel[:, perm]), 0)
            assert a == pytest.approx(b, abs=1e-12)

    def test_value_convex_in_kernel(self, random_instances):
        rng = np.random.default_rng(4)
        for inst in random_instances:
            k1 = rng.dirichlet(np.ones(3), size=inst.n_states)
            k2 = rng.dirichlet(np.ones(3), size=inst.n_states)
            lam = float(rng.random())
            mix = lam * k1 + (1 - lam) * k2
            signals = ("s0", "s1", "s2")
            v_mix = experiment_value(inst, Experiment(signals, mix), 0)
            v_split = lam * experiment_value(inst, Experiment(signals, k1), 0) + (
                1 - lam
            ) * experiment_value(inst, Experiment(signals, k2), 0)
            assert v_mix <= v_split + 1e-12


class TestJson:
    def test_round_trip(self, corpus_322):
        again = FiniteInstance.from_json(corpus_322.to_json())
        assert again.states == corpus_322.states
        assert np.array_equal(again.utilities, corpus_322.utilities)
        assert np.array_equal(again.prior, corpus_322.prior)

    def test_extra_fields_rejected(self, matching_instance):
        data = matching_instance.to_dict()
        data["comment"] = "nope"
        with pytest.raises(ValueError, match="unknown instance fields"):
            FiniteInstance.from_dict(data)

    def test_missing_fields_rejected(self, matching_instance):
        data = matching_instance.to_dict()
        del data["prior"]
        with pytest.raises(ValueError, match="missing instance fields"):
            FiniteInstance.from_dict(data)

    def test_exact_field_names(self, matching_instance):
        assert set(json.loads(matching_instance.to_json())) == {
            "states", "prior", "actions", "type_dist", "utilities",
        }
