"""Independent checkers and oracles for menu solvers.

Nothing here shares code with the LP/SDP solve paths: feasibility checks
recompute values from first principles, and the grid oracles lower-bound the
optimal revenue by enumerating discretized experiments and pricing each
assignment exactly. The price polytope (per-type upper bounds plus pairwise
difference constraints) is min-closed, so its componentwise-max point is the
optimal price vector for any positive type weights; it comes from shortest
paths of length at most n-1, which keeps assignment pricing closed-form for
the n <= 3 sizes enumerated here.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .core import (
    FiniteInstance,
    Menu,
    baseline_utility,
    experiment_value,
    full_information_value,
    responsive_value,
)
from .gaussian import GaussianInstance

MAX_ASSIGNMENT_EVALS = 80_000_000
MAX_KERNEL_CANDIDATES = 5_000_000


@dataclass(frozen=True)
class ViolationReport:
    """Labeled constraint residuals; positive means violated."""

    labels: tuple[str, ...]
    residuals: NDArray[np.float64]
    tolerance: float
    max_residual: float
    passed: bool

    @classmethod
    def build(cls, labels, residuals, tolerance: float) -> "ViolationReport":
        residuals = np.asarray(residuals, dtype=float)
        worst = float(residuals.max()) if residuals.size else 0.0
        return cls(
            labels=tuple(labels),
            residuals=residuals,
            tolerance=float(tolerance),
            max_residual=worst,
            passed=worst <= tolerance,
        )

    def worst(self) -> tuple[str, float]:
        if not self.labels:
            return ("", 0.0)
        k = int(np.argmax(self.residuals))
        return (self.labels[k], float(self.residuals[k]))

    def to_dict(self) -> dict:
        return {
            "residuals": {l: float(r) for l, r in zip(self.labels, self.residuals)},
            "max_residual": self.max_residual,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def check_ic_ir(
    inst: FiniteInstance,
    menu: Menu,
    tol: float = 1e-6,
    weights: NDArray[np.float64] | None = None,
    responsive: bool = True,
) -> ViolationReport:
    """IC/IR residuals of a menu, recomputed from the instance directly.

    Own entries are read obediently when ``responsive`` (solver menus are
    action-labeled); pass responsive=False to value them by best response
    instead, for menus over arbitrary signal sets.
    """
    n = inst.n_types
    if len(menu.entries) != n:
        raise ValueError("menu entry count does not match the instance")
    own_value = responsive_value if responsive else experiment_value
    own = np.array(
        [own_value(inst, menu.entries[i].experiment, i, weights) for i in range(n)]
    )
    prices = menu.prices
    labels, residuals = [], []
    for i in range(n):
        net = own[i] - prices[i]
        for j in range(n):
            if i == j:
                continue
            cross = experiment_value(inst, menu.entries[j].experiment, i, weights)
            labels.append(f"IC({i},{j})")
            residuals.append((cross - prices[j]) - net)
        labels.append(f"IR({i})")
        residuals.append(baseline_utility(inst, i, weights) - net)
    return ViolationReport.build(labels, residuals, tol)


def check_obedience(
    inst: FiniteInstance,
    menu: Menu,
    tol: float = 1e-6,
    weights: NDArray[np.float64] | None = None,
) -> ViolationReport:
    """Per-signal obedience residuals for action-labeled menus.

    For type i and signal a, playing a must beat any deviation a' under the
    weight the experiment puts on a.
    """
    w = inst.prior if weights is None else np.asarray(weights, dtype=float)
    labels, residuals = [], []
    for i, entry in enumerate(menu.entries):
        kern = entry.experiment.kernel
        if kern.shape[1] != inst.n_actions:
            raise ValueError("obedience needs action-labeled experiments")
        # score[a, a'] = sum_w weight(w) pi(a|w) u_i(w, a')
        score = kern.T @ (w[:, None] * inst.utilities[i])
        for a in range(inst.n_actions):
            for a_dev in range(inst.n_actions):
                if a_dev == a:
                    continue
                labels.append(f"OB({i},{a},{a_dev})")
                residuals.append(score[a, a_dev] - score[a, a])
    return ViolationReport.build(labels, residuals, tol)


# -- exact pricing of a fixed experiment assignment --------------------------


def price_assignment(
    own_values: NDArray[np.float64],
    cross_values: NDArray[np.float64],
    baselines: NDArray[np.float64],
    f: NDArray[np.float64],
) -> tuple[float, NDArray[np.float64]] | None:
    """Optimal prices for fixed experiments; None when no IC prices exist.

    own_values[i] is type i's (obedient) value of its own entry,
    cross_values[i, j] its best-response value of entry j. Solves
    max f.t subject to t_i <= own_i - baseline_i and
    t_i - t_j <= own_i - cross_ij via the componentwise-max price profile.
    """
    n = f.shape[0]
    A = own_values - baselines
    C = own_values[:, None] - cross_values
    t = A.astype(float).copy()
    for _ in range(max(n - 1, 1)):
        changed = False
        for i in range(n):
            for j in range(n):
                if i != j and t[j] + C[i, j] < t[i] - 1e-15:
                    t[i] = t[j] + C[i, j]
                    changed = True
        if not changed:
            break
    for i in range(n):
        for j in range(n):
            if i != j and t[i] > t[j] + C[i, j] + 1e-9:
                return None
    return float(f @ t), t


# -- grid oracles ------------------------------------------------------------


@dataclass(frozen=True)
class GridOracleResult:
    """A certified lower bound on optimal revenue from grid enumeration.

    The truth lies in [revenue, revenue + gap_bound]: snapping the optimal
    menu's experiments to the grid moves each constraint by a Lipschitz
    amount, and repairing prices afterwards costs at most ``gap_bound``.
    """

    revenue: float
    gap_bound: float
    n_candidates: int


def _simplex_grid(m: int, step: float) -> NDArray[np.float64]:
    q = round(1.0 / step)
    if abs(q * step - 1.0) > 1e-9:
        raise ValueError("grid step must evenly divide 1")
    pts = []
    for comp in itertools.combinations(range(q + m - 1), m - 1):
        prev, row = -1, []
        for c in comp:
            row.append(c - prev - 1)
            prev = c
        row.append(q + m - 2 - prev)
        pts.append(row)
    return np.asarray(pts, dtype=float) / q


def _outer_sum(vectors: list[NDArray[np.float64]]) -> NDArray[np.float64]:
    """Flattened sum v_1[i_1] + ... + v_S[i_S] over the index product."""
    S = len(vectors)
    total = np.zeros(tuple(v.shape[0] for v in vectors))
    for s, v in enumerate(vectors):
        shape = [1] * S
        shape[s] = v.shape[0]
        total = total + v.reshape(shape)
    return total.ravel()


def _pareto_front(own: NDArray, crosses: NDArray) -> NDArray[np.intp]:
    """Candidate indices not dominated in (own value up, every cross view down)."""
    order = np.lexsort((np.arange(own.shape[0]), -own))
    kept: list[int] = []
    kept_cross: list[NDArray] = []
    for idx in order:
        c = crosses[:, idx]
        if not any(np.all(kc <= c + 1e-15) for kc in kept_cross):
            kept.append(int(idx))
            kept_cross.append(c)
    return np.asarray(kept, dtype=np.intp)


def _best_two_slot(alpha1, gamma2_slot1, alpha2, gamma1_slot2, u1, u2, f) -> float:
    """Exact best revenue over two candidate slots in O(N log N).

    With A_i the IR caps and C_ij the IC difference caps, the optimal prices
    are t1* = min(A_1, A_2 + C_12) and symmetrically t2*, feasible exactly
    when C_12 + C_21 >= 0. Everything splits into a slot-1 term plus a
    slot-2 term under a single sortable coupling constraint.
    """
    phi = f[0] * alpha1 + f[1] * np.minimum(-u2, alpha1 - gamma2_slot1 - u1)
    psi = f[1] * alpha2 + f[0] * np.minimum(-u1, alpha2 - gamma1_slot2 - u2)
    s = alpha1 - gamma2_slot1
    r = gamma1_slot2 - alpha2
    order = np.argsort(s, kind="stable")
    s_sorted = s[order]
    suffix = np.maximum.accumulate(phi[order][::-1])[::-1]
    pos = np.searchsorted(s_sorted, r, side="left")
    valid = pos < s_sorted.shape[0]
    if not np.any(valid):
        return -math.inf
    best = suffix[np.minimum(pos, s_sorted.shape[0] - 1)] + psi
    return float(best[valid].max())


def _best_three_slot(AV, GV, baselines, f) -> float:
    """Exact best revenue over three candidate slots, Pareto-pruned.

    Prices for a fixed assignment come from shortest paths of length <= 2 in
    the difference-constraint graph; assignments with a negative cycle admit
    no IC prices and are masked out.
    """
    fronts = []
    for w in range(3):
        others = np.array([i for i in range(3) if i != w])
        fronts.append(_pareto_front(AV[w], GV[others]))
    P, Q, R = (len(fr) for fr in fronts)
    if P * Q * R > MAX_ASSIGNMENT_EVALS:
        raise ValueError(
            f"pruned assignment count {P}x{Q}x{R} too large; coarsen the grid"
        )
    own = [AV[w][fronts[w]] for w in range(3)]
    view = {(i, w): GV[i][fronts[w]] for i in range(3) for w in range(3)}
    A = [own[w] - baselines[w] for w in range(3)]

    best = -math.inf
    neg_inf = -math.inf
    for p in range(P):
        a0 = A[0][p]
        c01 = own[0][p] - view[(0, 1)]            # (Q,)
        c02 = own[0][p] - view[(0, 2)]            # (R,)
        c10 = own[1] - view[(1, 0)][p]            # (Q,)
        c20 = own[2] - view[(2, 0)][p]            # (R,)
        c12 = own[1][:, None] - view[(1, 2)][None, :]  # (Q, R)
        c21 = own[2][None, :] - view[(2, 1)][:, None]  # (Q, R)

        feasible = (
            ((c01 + c10) >= -1e-12)[:, None]
            & ((c02 + c20) >= -1e-12)[None, :]
            & ((c12 + c21) >= -1e-12)
            & ((c01[:, None] + c12 + c20[None, :]) >= -1e-12)
            & ((c02[None, :] + c21 + c10[:, None]) >= -1e-12)
        )
        if not feasible.any():
            continue

        t0 = np.minimum(
            np.minimum((A[1] + c01)[:, None], (A[2] + c02)[None, :]),
            np.minimum(A[1][:, None] + c21 + c02[None, :], A[2][None, :] + c12 + c01[:, None]),
        )
        t0 = np.minimum(t0, a0)
        t1 = np.minimum(A[1][:, None], a0 + c10[:, None])
        t1 = np.minimum(t1, A[2][None, :] + c12)
        t1 = np.minimum(t1, (a0 + c20)[None, :] + c12)
        t1 = np.minimum(t1, (A[2] + c02)[None, :] + c10[:, None])
        t2 = np.minimum(A[2][None, :], (a0 + c20)[None, :])
        t2 = np.minimum(t2, A[1][:, None] + c21)
        t2 = np.minimum(t2, (a0 + c10)[:, None] + c21)
        t2 = np.minimum(t2, (A[1] + c01)[:, None] + c20[None, :])

        rev = f[0] * t0 + f[1] * t1 + f[2] * t2
        rev = np.where(feasible, rev, neg_inf)
        m = float(rev.max())
        if m > best:
            best = m
    return best


def _best_assignment(AV, GV, baselines, f) -> float:
    """Best revenue over per-slot candidate assignments with exact pricing.

    AV[i, c]: obedient value of candidate c to type i (when c fills slot i);
    GV[i, c]: best-response value (when type i eyes slot c from outside).
    """
    n = f.shape[0]
    if n == 1:
        return float(f[0] * (AV[0].max() - baselines[0]))
    if n == 2:
        return _best_two_slot(AV[0], GV[1], AV[1], GV[0], baselines[0], baselines[1], f)
    if n == 3:
        return _best_three_slot(AV, GV, np.asarray(baselines), np.asarray(f))
    raise ValueError("grid oracles support at most 3 types")


def finite_grid_oracle(inst: FiniteInstance, grid_step: float = 0.05) -> GridOracleResult:
    """Lower-bound optimal menu revenue by enumerating row-discretized kernels.

    Every kernel whose rows live on the step-``grid_step`` simplex grid is a
    candidate for every slot; each assignment is priced exactly. Values are
    separable across kernel rows, so the per-candidate summaries are built by
    outer sums rather than materializing kernels.
    """
    n, S, m = inst.n_types, inst.n_states, inst.n_actions
    if n > 3:
        raise ValueError("finite grid oracle supports at most 3 types")
    rows = _simplex_grid(m, grid_step)
    G = rows.shape[0]
    N = G**S
    eps = 1.5 * (0.5 * m * grid_step)
    gap = min(n * eps, 3.0 * math.sqrt(eps))
    if n == 1:
        # No IC rows: the obedient value is separable across kernel rows, so
        # the best grid kernel maximizes each row independently.
        best = sum(
            float((rows @ (inst.prior[s] * inst.utilities[0, s])).max())
            for s in range(S)
        )
        revenue = float(inst.type_dist[0] * (best - baseline_utility(inst, 0)))
        return GridOracleResult(revenue=revenue, gap_bound=gap, n_candidates=N)
    if N > MAX_KERNEL_CANDIDATES:
        raise ValueError(
            f"{N} kernel candidates (grid {G}^{S}); coarsen the step or shrink the instance"
        )
    w = inst.prior
    AV = np.empty((n, N))
    GV = np.empty((n, N))
    for i in range(n):
        AV[i] = _outer_sum([rows @ (w[s] * inst.utilities[i, s]) for s in range(S)])
        gv = np.zeros(N)
        for a in range(m):
            per_resp = [
                _outer_sum([w[s] * rows[:, a] * inst.utilities[i, s, a_resp] for s in range(S)])
                for a_resp in range(m)
            ]
            gv += np.maximum.reduce(per_resp)
        GV[i] = gv
    baselines = np.array([baseline_utility(inst, i) for i in range(n)])
    # Snapping a kernel row to the grid moves it at most (m/2)*step in L1,
    # shifting obedient values by half that and best-response values by all of
    # it; repairing prices after the snap costs at most min(n*eps, 3*sqrt(eps)).
    revenue = _best_assignment(AV, GV, baselines, inst.type_dist)
    return GridOracleResult(revenue=revenue, gap_bound=gap, n_candidates=N)


def _ball_candidates(d: int, step: float) -> NDArray[np.float64]:
    axis = np.arange(-1.0, 1.0 + step / 2, step)
    pts = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    norms = np.linalg.norm(pts, axis=1)
    inside = pts[norms <= 1.0 + 1e-12]
    nonzero = pts[norms > 1e-12]
    boundary = nonzero / np.linalg.norm(nonzero, axis=1, keepdims=True)
    return np.vstack([inside, boundary])


def gaussian_grid_oracle(inst: GaussianInstance, grid_step: float) -> GridOracleResult:
    """Lower-bound optimal scalar-experiment revenue over gridded directions.

    Directions are lattice points of the unit ball (plus their normalizations,
    so the sphere is covered) and each assignment is priced exactly. Requires
    d <= 3 and n <= 3; the combinatorics explode beyond that.
    """
    n, d = inst.n_types, inst.d
    if d > 3 or n > 3:
        raise ValueError("gaussian grid oracle is restricted to d <= 3 and n <= 3")
    cands = _ball_candidates(d, grid_step)
    W = (inst.thetas @ cands.T) ** 2  # W[i, c] = (theta_i . v_c)^2
    baselines = np.zeros(n)
    revenue = _best_assignment(W, W, baselines, inst.type_dist)

    # Any direction in the ball is within sqrt(d)*step of a candidate; each
    # squared projection moves by at most the pinned Lipschitz constant times
    # that, and price repair costs n times the per-row shift.
    norms = np.linalg.norm(inst.thetas, axis=1)
    lipschitz = float((2.0 * norms * (1.0 + norms)).max())
    eps = 2.0 * lipschitz * grid_step * math.sqrt(d)
    gap = n * eps
    return GridOracleResult(revenue=revenue, gap_bound=gap, n_candidates=cands.shape[0])


# -- reference benchmarks -----------------------------------------------------


def single_item_full_revelation_revenue(inst: GaussianInstance) -> float:
    """Best posted price for a single fully revealing product (Gaussian types)."""
    surplus = (inst.thetas**2).sum(axis=1)
    best = 0.0
    for t in surplus:
        rev = float(t * inst.type_dist[surplus >= t - 1e-12].sum())
        best = max(best, rev)
    return best


def finite_single_experiment_revenue(inst: FiniteInstance) -> float:
    """Best posted price for one shared fully revealing experiment.

    A documented lower bound on the best single-experiment menu: full
    revelation maximizes every type's willingness to pay, and the price runs
    over the type surpluses.
    """
    surplus = np.array(
        [
            full_information_value(inst, i) - baseline_utility(inst, i)
            for i in range(inst.n_types)
        ]
    )
    best = 0.0
    for t in surplus:
        rev = float(t * inst.type_dist[surplus >= t - 1e-12].sum())
        best = max(best, rev)
    return best


def build_diff_value_instance(n: int, alpha: float) -> GaussianInstance:
    """The axis-aligned family whose menu revenue dwarfs single-product revenue.

    Type i (1-based) has theta_i = alpha^(-i/2) e_i and weight
    alpha^i / sum_k alpha^k, in dimension d = n. Orthogonality makes it
    separated, so optimal menu revenue equals full surplus n / sum_k alpha^k.
    """
    if not 0 < alpha <= 1:
        raise ValueError("alpha must be in (0, 1]")
    powers = alpha ** np.arange(1, n + 1)
    f = powers / powers.sum()
    thetas = np.diag(alpha ** (-np.arange(1, n + 1) / 2.0))
    return GaussianInstance(d=n, thetas=thetas, type_dist=f)


# -- corpus generation ---------------------------------------------------------


def random_instance(n: int, m: int, num_states: int, seed: int) -> FiniteInstance:
    """Reproducible random finite instance; utilities uniform on [0, 1]."""
    rng = np.random.default_rng(seed)
    utilities = rng.random((n, num_states, m))
    prior = rng.dirichlet(np.ones(num_states))
    type_dist = rng.dirichlet(np.ones(n))
    return FiniteInstance(
        states=tuple(f"w{s}" for s in range(num_states)),
        prior=prior,
        actions=tuple(f"a{a}" for a in range(m)),
        utilities=utilities,
        type_dist=type_dist,
    )


def random_gaussian_instance(n: int, d: int, seed: int) -> GaussianInstance:
    """Reproducible random Gaussian instance; theta entries standard normal.

    The type distribution is uniform: margin-sized revenue effects should not
    be masked by vanishing type weights.
    """
    rng = np.random.default_rng(seed)
    thetas = rng.standard_normal((n, d))
    return GaussianInstance(d=d, thetas=thetas, type_dist=np.full(n, 1.0 / n))


def instance_hash(obj) -> str:
    return hashlib.sha256(
        json.dumps(obj.to_dict(), sort_keys=True).encode()
    ).hexdigest()


_FINITE_SIZE_COMBOS = {
    1: [(2, 2), (3, 2), (4, 2), (2, 3), (3, 3), (4, 3)],
    2: [(2, 2), (3, 2), (4, 2), (2, 3)],
    3: [(2, 2), (3, 2)],
}


def finite_corpus_instance(k: int) -> tuple[FiniteInstance, dict]:
    """The k-th pinned corpus instance, sized to keep the grid oracle tractable."""
    rng = np.random.default_rng(k)
    n = int(rng.integers(1, 4))
    num_states, m = _FINITE_SIZE_COMBOS[n][int(rng.integers(len(_FINITE_SIZE_COMBOS[n])))]
    inst = random_instance(n, m, num_states, seed=10_000 + k)
    meta = {"seed": k, "n": n, "m": m, "num_states": num_states}
    return inst, meta


FINITE_CORPUS_SIZE = 50
GAUSSIAN_SMALL_CORPUS_SIZE = 25
GRID_STEP_FINITE = 0.05
GRID_STEP_GAUSSIAN = 0.01


def build_corpus_manifest(progress: bool = False) -> dict:
    """Recompute the pinned corpus: hashes and reference revenues.

    Heavy enough to be a CLI command rather than an import-time side effect;
    the committed copy lives in the package's data directory and the tests
    hold recomputations to it.
    """
    from .gaussian import solve_menu_sdp
    from .menu_lp import full_info_revenue, solve_exact

    finite = []
    for k in range(FINITE_CORPUS_SIZE):
        inst, meta = finite_corpus_instance(k)
        report = solve_exact(inst)
        grid = finite_grid_oracle(inst, GRID_STEP_FINITE)
        meta.update(
            sha256=instance_hash(inst),
            revenue_exact=report.objective,
            status=report.status,
            revenue_grid=grid.revenue,
            grid_gap=grid.gap_bound,
            revenue_single=finite_single_experiment_revenue(inst),
            revenue_full_info=full_info_revenue(inst),
        )
        finite.append(meta)
        if progress:
            print(f"finite corpus {k}: R*={report.objective:.6f}")

    gaussian = []
    for k in range(GAUSSIAN_SMALL_CORPUS_SIZE):
        inst = random_gaussian_instance(2, 2, seed=k)
        sol = solve_menu_sdp(inst)
        gaussian.append(
            {
                "seed": k,
                "sha256": instance_hash(inst),
                "sdp_objective": sol.objective,
                "status": sol.status,
            }
        )
        if progress:
            print(f"gaussian corpus {k}: sdp={sol.objective:.6f}")

    generator_checksums = [
        instance_hash(random_instance(2, 2, 3, seed=k)) for k in range(100)
    ]
    return {
        "version": 1,
        "finite": finite,
        "gaussian_d2n2": gaussian,
        "generator_checksums_random_2_2_3": generator_checksums,
    }


def default_manifest_path():
    from pathlib import Path

    return Path(__file__).parent / "data" / "corpus_manifest.json"


def load_corpus_manifest(path=None) -> dict:
    from pathlib import Path

    path = Path(path) if path is not None else default_manifest_path()
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
