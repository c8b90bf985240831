import itertools
import math

import numpy as np
import pytest
from scipy.optimize import linprog

from infomenu.bench import (
    ViolationReport,
    _best_assignment,
    build_diff_value_instance,
    check_ic_ir,
    check_obedience,
    finite_grid_oracle,
    finite_single_experiment_revenue,
    gaussian_grid_oracle,
    instance_hash,
    price_assignment,
    random_gaussian_instance,
    random_instance,
    single_item_full_revelation_revenue,
)
from infomenu.core import Experiment, Menu, MenuEntry
from infomenu.gaussian import GaussianInstance, full_surplus_revenue
from infomenu.menu_lp import solve_exact


def lp_price_oracle(own, cross, baselines, f):
    """scipy reference for the closed-form price optimizer."""
    n = len(f)
    A_ub, b_ub = [], []
    for i in range(n):
        row = np.zeros(n)
        row[i] = 1.0
        A_ub.append(row)
        b_ub.append(own[i] - baselines[i])
        for j in range(n):
            if i == j:
                continue
            row = np.zeros(n)
            row[i], row[j] = 1.0, -1.0
            A_ub.append(row)
            b_ub.append(own[i] - cross[i, j])
    res = linprog(
        -np.asarray(f), A_ub=np.asarray(A_ub), b_ub=np.asarray(b_ub),
        bounds=[(None, None)] * n, method="highs",
    )
    if res.status == 2:
        return None
    return -res.fun


class TestViolationReport:
    def test_pass_iff_max_below_tolerance(self):
        rep = ViolationReport.build(["a", "b"], [1e-8, -0.2], tolerance=1e-6)
        assert rep.passed and rep.max_residual == pytest.approx(1e-8)
        rep = ViolationReport.build(["a", "b"], [1e-8, 2e-6], tolerance=1e-6)
        assert not rep.passed
        assert rep.worst() == ("b", pytest.approx(2e-6))


class TestCheckIcIr:
    def test_solver_output_passes(self):
        for seed in (31, 32):
            inst = random_instance(2, 3, 3, seed=seed)
            report = solve_exact(inst)
            assert check_ic_ir(inst, report.menu, tol=1e-6).passed

    def test_injected_price_bump_shows_up_exactly(self, corpus_322):
        menu = solve_exact(corpus_322).menu
        entries = list(menu.entries)
        entries[0] = MenuEntry(entries[0].experiment, entries[0].price + 0.1)
        bumped = Menu.build(entries, corpus_322.type_dist)
        rep = check_ic_ir(corpus_322, bumped, tol=1e-6)
        label, value = rep.worst()
        assert not rep.passed
        assert value == pytest.approx(0.1, abs=1e-9)
        assert label in ("IR(0)", "IC(0,1)")

    def test_null_menu_passes(self, corpus_322):
        from infomenu.core import baseline_action

        # responsive form: constantly recommend each type's baseline action
        entries = []
        for i in range(2):
            col = baseline_action(corpus_322, i)
            kernel = np.zeros((3, 2))
            kernel[:, col] = 1.0
            entries.append(MenuEntry(Experiment(corpus_322.actions, kernel), 0.0))
        menu = Menu.build(entries, corpus_322.type_dist)
        assert check_ic_ir(corpus_322, menu, tol=1e-9).passed
        # general form: a single uninformative signal, valued by best response
        null = Experiment.null(3)
        general = Menu.build([MenuEntry(null, 0.0)] * 2, corpus_322.type_dist)
        assert check_ic_ir(corpus_322, general, tol=1e-9, responsive=False).passed


class TestCheckObedience:
    def test_identity_on_matching_has_half_slack(self, matching_instance):
        ident = Experiment(signals=matching_instance.actions, kernel=np.eye(2))
        menu = Menu.build([MenuEntry(ident, 0.0)], matching_instance.type_dist)
        rep = check_obedience(matching_instance, menu)
        assert rep.passed
        assert np.allclose(rep.residuals, -0.5)

    def test_anti_identity_fails_by_half(self, matching_instance):
        anti = Experiment(signals=matching_instance.actions, kernel=np.eye(2)[::-1].copy())
        menu = Menu.build([MenuEntry(anti, 0.0)], matching_instance.type_dist)
        rep = check_obedience(matching_instance, menu)
        assert not rep.passed
        assert rep.max_residual == pytest.approx(0.5, abs=1e-12)

    def test_coarsened_solver_output_passes(self, corpus_322):
        menu = solve_exact(corpus_322).menu
        assert check_obedience(corpus_322, menu, tol=1e-6).passed


class TestPriceAssignment:
    def test_matches_lp_on_random_values(self):
        rng = np.random.default_rng(12)
        for n in (1, 2, 3):
            for _ in range(60):
                own = rng.random(n)
                cross = rng.random((n, n))
                baselines = 0.2 * rng.random(n)
                f = rng.dirichlet(np.ones(n))
                got = price_assignment(own, cross, baselines, f)
                want = lp_price_oracle(own, cross, baselines, f)
                if want is None:
                    assert got is None
                else:
                    assert got is not None
                    assert got[0] == pytest.approx(want, abs=1e-8)

    def test_infeasible_cycle_detected(self):
        own = np.array([0.0, 0.0])
        cross = np.array([[0.0, 1.0], [1.0, 0.0]])  # each type envies the other
        assert price_assignment(own, cross, np.zeros(2), np.array([0.5, 0.5])) is None


class TestBestAssignment:
    @staticmethod
    def brute_force(AV, GV, baselines, f):
        n, N = AV.shape
        best = -math.inf
        for combo in itertools.product(range(N), repeat=n):
            own = np.array([AV[i, combo[i]] for i in range(n)])
            cross = np.array([[GV[i, combo[j]] for j in range(n)] for i in range(n)])
            priced = price_assignment(own, cross, baselines, f)
            if priced is not None:
                best = max(best, priced[0])
        return best

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_matches_brute_force(self, n):
        rng = np.random.default_rng(n)
        for trial in range(8):
            N = 7
            AV = rng.random((n, N))
            GV = AV + 0.3 * rng.random((n, N)) - 0.15
            baselines = 0.1 * rng.random(n)
            f = rng.dirichlet(np.ones(n))
            fast = _best_assignment(AV, GV, baselines, f)
            slow = self.brute_force(AV, GV, baselines, f)
            assert fast == pytest.approx(slow, abs=1e-9)


class TestGridOracles:
    def test_finite_never_exceeds_exact(self):
        for seed in (41, 42, 43):
            inst = random_instance(2, 2, 3, seed=seed)
            grid = finite_grid_oracle(inst, grid_step=0.05)
            exact = solve_exact(inst).objective
            assert grid.revenue <= exact + 1e-7
            assert exact <= grid.revenue + grid.gap_bound

    def test_single_type_fast_path_equals_enumeration(self):
        inst = random_instance(1, 2, 2, seed=44)
        fast = finite_grid_oracle(inst, grid_step=0.25)
        # enumerate 5^2 kernels explicitly
        from infomenu.bench import _simplex_grid
        from infomenu.core import baseline_utility, responsive_value

        rows = _simplex_grid(2, 0.25)
        best = -math.inf
        for r0 in rows:
            for r1 in rows:
                exp = Experiment(signals=inst.actions, kernel=np.stack([r0, r1]))
                best = max(best, responsive_value(inst, exp, 0))
        expected = inst.type_dist[0] * (best - baseline_utility(inst, 0))
        assert fast.revenue == pytest.approx(expected, abs=1e-12)

    def test_gaussian_separated_reaches_full_surplus(self):
        inst = GaussianInstance(
            d=2, thetas=np.array([[1.0, 0.0], [0.0, 2.0]]), type_dist=np.array([0.5, 0.5])
        )
        grid = gaussian_grid_oracle(inst, grid_step=0.05)
        full = full_surplus_revenue(inst)
        assert grid.revenue <= full + 1e-9
        assert grid.revenue >= full - grid.gap_bound

    def test_gaussian_single_type(self):
        inst = GaussianInstance(d=2, thetas=np.array([[0.8, 0.6]]), type_dist=np.array([1.0]))
        grid = gaussian_grid_oracle(inst, grid_step=0.05)
        assert grid.revenue <= 1.0 + 1e-9
        assert grid.revenue >= 1.0 - grid.gap_bound

    def test_gaussian_three_types_three_dims(self):
        from infomenu.gaussian import solve_menu_sdp

        inst = random_gaussian_instance(3, 3, seed=77)
        grid = gaussian_grid_oracle(inst, grid_step=0.2)
        sol = solve_menu_sdp(inst)
        assert grid.revenue <= sol.objective + 1e-7
        assert sol.objective <= grid.revenue + grid.gap_bound

    def test_gaussian_size_guard(self):
        inst = random_gaussian_instance(2, 4, seed=0)
        with pytest.raises(ValueError, match="d <= 3"):
            gaussian_grid_oracle(inst, 0.5)

    def test_step_must_divide_one(self, corpus_322):
        with pytest.raises(ValueError, match="divide"):
            finite_grid_oracle(corpus_322, grid_step=0.03)


class TestSingleItemBenchmarks:
    def test_diff_value_family_numbers(self):
        inst = build_diff_value_instance(2, 0.1)
        assert np.allclose(inst.type_dist, [10 / 11, 1 / 11])
        assert np.allclose((inst.thetas**2).sum(axis=1), [10.0, 100.0])
        assert full_surplus_revenue(inst) == pytest.approx(200 / 11, abs=1e-9)
        assert single_item_full_revelation_revenue(inst) == pytest.approx(10.0, abs=1e-9)

    def test_alpha_one_degenerates_to_uniform(self):
        inst = build_diff_value_instance(3, 1.0)
        assert np.allclose(inst.type_dist, 1 / 3)
        assert full_surplus_revenue(inst) == pytest.approx(1.0, abs=1e-12)

    def test_ratio_bound(self):
        inst = build_diff_value_instance(2, 0.1)
        ratio = single_item_full_revelation_revenue(inst) / full_surplus_revenue(inst)
        assert ratio == pytest.approx(0.55, abs=1e-9)
        assert ratio <= 1 / (2 * 0.9) + 1e-12

    def test_single_and_identical_types(self):
        single = GaussianInstance(d=2, thetas=np.array([[1.0, 2.0]]), type_dist=np.array([1.0]))
        assert single_item_full_revelation_revenue(single) == pytest.approx(5.0)
        twins = GaussianInstance(
            d=2, thetas=np.array([[1.0, 2.0], [1.0, 2.0]]), type_dist=np.array([0.5, 0.5])
        )
        assert single_item_full_revelation_revenue(twins) == pytest.approx(5.0)

    def test_finite_single_item_is_lower_bound(self):
        for seed in (61, 62):
            inst = random_instance(3, 2, 3, seed=seed)
            assert finite_single_experiment_revenue(inst) <= solve_exact(inst).objective + 1e-7


class TestCorpusGenerators:
    def test_reproducibility(self):
        a = random_instance(2, 2, 3, seed=5)
        b = random_instance(2, 2, 3, seed=5)
        assert instance_hash(a) == instance_hash(b)
        assert instance_hash(a) != instance_hash(random_instance(2, 2, 3, seed=6))
        ga = random_gaussian_instance(2, 3, seed=5)
        gb = random_gaussian_instance(2, 3, seed=5)
        assert instance_hash(ga) == instance_hash(gb)

    def test_manifest_matches_recomputation(self):
        from infomenu.bench import load_corpus_manifest, finite_corpus_instance

        manifest = load_corpus_manifest()
        assert manifest["version"] == 1
        # all pinned generator hashes
        for k, h in enumerate(manifest["generator_checksums_random_2_2_3"]):
            assert instance_hash(random_instance(2, 2, 3, seed=k)) == h
        # spot-check instance hashes and revenues
        for entry in manifest["finite"][:5]:
            inst, meta = finite_corpus_instance(entry["seed"])
            assert instance_hash(inst) == entry["sha256"]
            assert solve_exact(inst).objective == pytest.approx(
                entry["revenue_exact"], abs=1e-7
            )
        for entry in manifest["gaussian_d2n2"][:3]:
            inst = random_gaussian_instance(2, 2, seed=entry["seed"])
            assert instance_hash(inst) == entry["sha256"]

    def test_manifest_revenue_ordering(self):
        # R_one <= R_menu <= R_full-info across the whole pinned corpus
        from infomenu.bench import load_corpus_manifest

        for entry in load_corpus_manifest()["finite"]:
            assert entry["revenue_single"] <= entry["revenue_exact"] + 1e-7
            assert entry["revenue_exact"] <= entry["revenue_full_info"] + 1e-7
            if entry["revenue_full_info"] > 1e-9:
                ratio = entry["revenue_exact"] / entry["revenue_full_info"]
                assert 1.0 / entry["n"] - 1e-9 <= ratio <= 1.0 + 1e-9
