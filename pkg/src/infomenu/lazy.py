"""Sample-based near-optimal menus with only sampling access to the state space.

Given a buyer's declared type and the realized state, the mechanism draws a
small i.i.d. batch of additional states, solves the menu LP on the empirical
distribution (after uniformly permuting the batch so the realized state's slot
carries no information), and emits a signal for the realized state plus the
declared type's price. Exchangeability of the batch makes the implied direct
mechanism incentive compatible in expectation; concentration makes its revenue
near-optimal.

Also here: the constructive feasibility-repair used to certify near-optimality
(shift prices, let every type re-pick its favorite entry, then coarsen each
experiment to a responsive one) and Monte Carlo revenue estimation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np
from numpy.typing import NDArray

from . import conic
from .core import Experiment, FiniteInstance, Menu, MenuEntry
from .menu_lp import LpSolveReport, build_menu_lp_from_values, solve_menu_lp


class StateOracle(Protocol):
    """Sampling access to the state space plus utility evaluation.

    States are opaque tokens; draws must be i.i.d. from the underlying prior.
    """

    n_types: int
    n_actions: int
    type_dist: NDArray[np.float64]

    def sample_states(self, rng: np.random.Generator, count: int) -> list:
        ...

    def utilities(self, states: Sequence) -> NDArray[np.float64]:
        """(n_types, len(states), n_actions) utilities in [0, 1]."""
        ...


class FiniteStateOracle:
    """Oracle view of a finite instance; state tokens are state indices."""

    def __init__(self, inst: FiniteInstance):
        self.inst = inst
        self.n_types = inst.n_types
        self.n_actions = inst.n_actions
        self.type_dist = inst.type_dist

    def sample_states(self, rng: np.random.Generator, count: int) -> list:
        return list(rng.choice(self.inst.n_states, size=count, p=self.inst.prior))

    def utilities(self, states: Sequence) -> NDArray[np.float64]:
        idx = [int(s) for s in states]
        return self.inst.utilities[:, idx, :]


class UniformLineOracle:
    """Built-in continuous oracle: states uniform on [0, 1], threshold actions.

    Type i tracks the curve w -> w**(i+1); action j is the grid point
    (j + 0.5) / m, scored by 1 - |curve - grid point| (always in [0, 1]).
    Exists so the mechanism can be exercised on a genuinely infinite state
    space.
    """

    def __init__(self, n_types: int = 2, n_actions: int = 3):
        self.n_types = n_types
        self.n_actions = n_actions
        self.type_dist = np.full(n_types, 1.0 / n_types)

    def sample_states(self, rng: np.random.Generator, count: int) -> list:
        return list(rng.random(count))

    def utilities(self, states: Sequence) -> NDArray[np.float64]:
        w = np.asarray(states, dtype=float)
        grid = (np.arange(self.n_actions) + 0.5) / self.n_actions
        out = np.empty((self.n_types, len(w), self.n_actions))
        for i in range(self.n_types):
            curve = w ** (i + 1)
            out[i] = 1.0 - np.abs(curve[:, None] - grid[None, :])
        return out


BUILTIN_ORACLES = {
    "uniform-line": UniformLineOracle,
}


def sample_budget(n: int, m: int, epsilon: float, delta: float, c: float = 1.0) -> int:
    """Batch size sufficient for an epsilon-optimal menu with confidence 1 - delta.

    Evaluates ceil(c * min(n^2/eps^2, 1/eps^4) * m * ln(m n / delta)), floored
    at 1. The leading constant is not pinned down by theory and is exposed as
    ``c``; the default 1 is calibrated empirically in the acceptance suite.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must be in (0, 1)")
    if not 0 < delta < 1:
        raise ValueError("delta must be in (0, 1)")
    if c <= 0:
        raise ValueError("scale constant must be positive")
    if n < 1 or m < 1:
        raise ValueError("need n >= 1 and m >= 1")
    branch = min(n * n / epsilon**2, 1.0 / epsilon**4)
    return max(1, math.ceil(c * branch * m * math.log(m * n / delta)))


def certified_violation_bound(n: int, m: int, K: int, delta: float) -> float:
    """Hoeffding bound on each empirical IC/IR row's deviation from the truth."""
    return 2.0 * math.sqrt(m * math.log(2.0 * m * n / delta) / K)


@dataclass(frozen=True)
class LazyTranscript:
    """Reproducibility record of one mechanism run.

    ``states`` is the sample multiset after permutation; ``realized_position``
    locates the realized state inside it.
    """

    seed: int | None
    declared_type: int
    states: tuple
    permutation: tuple[int, ...]
    realized_position: int
    status: str
    lp_objective: float | None
    lp_residual: float | None
    certified_bound: float
    prices: NDArray[np.float64] | None
    rows_at_realized: NDArray[np.float64] | None
    signal: int | None
    price: float | None

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "declared_type": self.declared_type,
            "states": [s.item() if hasattr(s, "item") else s for s in self.states],
            "permutation": list(self.permutation),
            "realized_position": self.realized_position,
            "status": self.status,
            "lp_objective": self.lp_objective,
            "lp_residual": self.lp_residual,
            "certified_bound": self.certified_bound,
            "prices": None if self.prices is None else self.prices.tolist(),
            "rows_at_realized": None
            if self.rows_at_realized is None
            else self.rows_at_realized.tolist(),
            "signal": self.signal,
            "price": self.price,
        }


class LazyRunError(RuntimeError):
    """The empirical LP failed (status carried along)."""

    def __init__(self, status: str):
        super().__init__(f"empirical menu LP ended with status {status!r}")
        self.status = status


def run_lazy_on_samples(
    oracle: StateOracle,
    declared_type: int,
    states: Sequence,
    realized_position: int,
    rng: np.random.Generator,
    delta: float = 0.1,
    seed: int | None = None,
    permutation: Sequence[int] | None = None,
) -> tuple[int, float, LazyTranscript]:
    """LP-solve a fixed sample multiset and signal for the realized entry.

    Split out of :func:`run_lazy_experiment` so tests can control the sample
    order directly (e.g. to verify permutation symmetry).
    """
    K = len(states)
    if not 0 <= realized_position < K:
        raise ValueError("realized_position out of range")
    if not 0 <= declared_type < oracle.n_types:
        raise IndexError("declared type out of range")
    utilities = oracle.utilities(states)
    weights = np.full(K, 1.0 / K)
    lp = build_menu_lp_from_values(utilities, oracle.type_dist, weights)
    report = solve_menu_lp(lp)
    bound = certified_violation_bound(oracle.n_types, oracle.n_actions, K, delta)
    if report.status != conic.STATUS_OPTIMAL or report.menu is None:
        raise LazyRunError(report.status)

    rows = np.stack(
        [e.experiment.kernel[realized_position] for e in report.menu.entries]
    )
    row = rows[declared_type]
    signal = int(rng.choice(oracle.n_actions, p=row))
    price = float(report.menu.entries[declared_type].price)
    transcript = LazyTranscript(
        seed=seed,
        declared_type=declared_type,
        states=tuple(states),
        permutation=tuple(int(p) for p in (permutation if permutation is not None else range(K))),
        realized_position=int(realized_position),
        status=report.status,
        lp_objective=report.objective,
        lp_residual=report.max_constraint_residual,
        certified_bound=bound,
        prices=report.menu.prices,
        rows_at_realized=rows,
        signal=signal,
        price=price,
    )
    return signal, price, transcript


def run_lazy_experiment(
    oracle: StateOracle,
    declared_type: int,
    realized_state,
    K: int,
    seed: int | None = None,
    rng: np.random.Generator | None = None,
    delta: float = 0.1,
) -> tuple[int, float, LazyTranscript]:
    """One mechanism run: sample, permute, solve the empirical LP, signal, price.

    Deterministic given (seed, inputs): a single generator drives the state
    draws, the batch permutation, and the signal draw.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    if rng is None:
        rng = np.random.default_rng(seed)
    extra = oracle.sample_states(rng, K - 1) if K > 1 else []
    samples = [realized_state] + list(extra)
    # The LP is symmetric in its inputs only up to solver tie-breaking; an
    # explicit uniform permutation restores exchangeability of the batch.
    permutation = rng.permutation(K)
    permuted = [samples[p] for p in permutation]
    realized_position = int(np.nonzero(permutation == 0)[0][0])
    return run_lazy_on_samples(
        oracle,
        declared_type,
        permuted,
        realized_position,
        rng,
        delta=delta,
        seed=seed,
        permutation=permutation,
    )


def run_lazy_state_independent_price(
    oracle: StateOracle,
    declared_type: int,
    realized_state,
    K: int,
    seed: int | None = None,
    delta: float = 0.1,
) -> tuple[int, float, LazyTranscript, LazyTranscript]:
    """Variant whose price is independent of the realized state.

    The signal comes from a run on the realized state; the price from a
    second, independent run whose input state is itself drawn from the prior.
    The marginal revenue distribution matches the state-dependent mechanism.
    """
    root = np.random.default_rng(seed)
    signal_rng, price_rng = root.spawn(2)
    signal, _, signal_tr = run_lazy_experiment(
        oracle, declared_type, realized_state, K, rng=signal_rng, delta=delta
    )
    fresh_state = oracle.sample_states(price_rng, 1)[0]
    _, price, price_tr = run_lazy_experiment(
        oracle, declared_type, fresh_state, K, rng=price_rng, delta=delta
    )
    return signal, price, signal_tr, price_tr


# -- feasibility repair ----------------------------------------------------


def _entry_values(
    utilities: NDArray[np.float64],
    weights: NDArray[np.float64],
    menu: Menu,
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    """Best-response values W[i, j], obedient own values, and baselines."""
    n = utilities.shape[0]
    W = np.empty((n, n))
    own = np.empty(n)
    for j, entry in enumerate(menu.entries):
        kern = entry.experiment.kernel
        # payoff[i, s, a'] = sum_k w_k pi_j(s|k) u_i(k, a')
        payoff = np.einsum("ks,ika->isa", weights[:, None] * kern, utilities)
        W[:, j] = payoff.max(axis=2).sum(axis=1)
        if kern.shape[1] == utilities.shape[2]:
            own[j] = float(np.einsum("k,ka,ka->", weights, kern, utilities[j]))
        else:
            own[j] = W[j, j]
    baselines = np.array([(weights @ utilities[i]).max() for i in range(n)])
    return W, own, baselines


def menu_lp_form_residual(
    utilities: NDArray[np.float64],
    weights: NDArray[np.float64],
    type_dist: NDArray[np.float64],
    menu: Menu,
) -> tuple[float, str]:
    """Worst residual of the LP's IC/IR rows, with the offending row's label.

    Own entries are read obediently when action-labeled (same width as the
    action space), otherwise by best response.
    """
    n = len(type_dist)
    W, own, baselines = _entry_values(utilities, weights, menu)
    prices = menu.prices
    worst, label = -math.inf, ""
    for i in range(n):
        net_own = own[i] - prices[i]
        for j in range(n):
            if i == j:
                continue
            r = (W[i, j] - prices[j]) - net_own
            if r > worst:
                worst, label = r, f"IC({i},{j})"
        r = baselines[i] - net_own
        if r > worst:
            worst, label = r, f"IR({i})"
    return float(worst), label


def coarsen_kernel(
    kernel: NDArray[np.float64],
    utilities_i: NDArray[np.float64],
    weights: NDArray[np.float64],
) -> NDArray[np.float64]:
    """Relabel signals by the target type's best response and merge duplicates.

    The result is action-labeled; the target type's value is preserved exactly
    and every other type's value weakly drops (merging signals is a coarsening
    in the Blackwell order).
    """
    m = utilities_i.shape[1]
    # score[s, a] = sum_k w_k pi(s|k) u_i(k, a)
    score = kernel.T @ (weights[:, None] * utilities_i)
    best = score.argmax(axis=1)
    out = np.zeros((kernel.shape[0], m))
    for s, a in enumerate(best):
        out[:, a] += kernel[:, s]
    return out


def coarsen_to_responsive(
    inst_or_utilities: FiniteInstance | NDArray[np.float64],
    menu: Menu,
    weights: NDArray[np.float64] | None = None,
) -> Menu:
    """Coarsen each menu entry to a responsive, action-labeled experiment.

    Accepts a finite instance (values under its prior, or explicit weights
    over its states) or a raw utilities array over an arbitrary support.
    """
    if isinstance(inst_or_utilities, FiniteInstance):
        inst = inst_or_utilities
        utilities = inst.utilities
        if weights is None:
            weights = inst.prior
        signals = inst.actions
    else:
        utilities = np.asarray(inst_or_utilities, dtype=float)
        if weights is None:
            raise ValueError("weights are required with a raw utilities array")
        signals = tuple(f"a{a}" for a in range(utilities.shape[2]))
    weights = np.asarray(weights, dtype=float)

    n = utilities.shape[0]
    if len(menu.entries) != n:
        raise ValueError("menu entry count does not match the type count")
    entries = []
    for i, entry in enumerate(menu.entries):
        new_kernel = coarsen_kernel(entry.experiment.kernel, utilities[i], weights)
        entries.append(
            MenuEntry(Experiment(signals=signals, kernel=new_kernel), entry.price)
        )
    type_dist = (
        inst_or_utilities.type_dist
        if isinstance(inst_or_utilities, FiniteInstance)
        else None
    )
    if type_dist is None:
        return Menu(entries=tuple(entries), revenue=menu.revenue,
                    max_violation=menu.max_violation)
    return Menu.build(entries, type_dist, max_violation=menu.max_violation)


def repair_menu_prices(
    inst_or_utilities: FiniteInstance | NDArray[np.float64],
    menu: Menu,
    epsilon: float,
    weights: NDArray[np.float64] | None = None,
    type_dist: NDArray[np.float64] | None = None,
) -> Menu:
    """Turn an epsilon-approximately-feasible menu into an exactly feasible one.

    Two price adjustments are tried: (A) sort prices nondecreasing and charge
    the rank-r type r*epsilon less; (B) shrink every price to
    (1 - sqrt(eps)) * price - eps. After either shift every type re-picks its
    best entry and the picked experiments are coarsened to responsive form,
    which makes IC/IR hold exactly. The higher-revenue feasible result is
    returned; the revenue loss is at most min(n*eps, 3*sqrt(eps)).

    Raises ValueError if the input violates some IC/IR row by more than
    ``epsilon`` (the offending row is named).
    """
    if isinstance(inst_or_utilities, FiniteInstance):
        inst = inst_or_utilities
        utilities = inst.utilities
        if weights is None:
            weights = inst.prior
        type_dist = inst.type_dist
    else:
        utilities = np.asarray(inst_or_utilities, dtype=float)
        if weights is None or type_dist is None:
            raise ValueError("weights and type_dist are required with raw utilities")
    weights = np.asarray(weights, dtype=float)
    type_dist = np.asarray(type_dist, dtype=float)
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")

    worst, label = menu_lp_form_residual(utilities, weights, type_dist, menu)
    if worst > epsilon + 1e-12:
        raise ValueError(
            f"menu violates {label} by {worst:.6g}, more than epsilon={epsilon:.6g}"
        )
    if worst <= 1e-12:
        return menu

    n = len(type_dist)
    prices = menu.prices

    def attempt(new_prices: NDArray[np.float64]) -> Menu | None:
        W, _, baselines = _entry_values(utilities, weights, menu)
        nets = W - new_prices[None, :]
        entries = []
        chosen_prices = np.empty(n)
        for i in range(n):
            best = float(nets[i].max())
            candidates = [j for j in range(n) if nets[i, j] >= best - 1e-12]
            if i in candidates:
                pick = i
            else:
                pick = max(candidates, key=lambda j: (new_prices[j], -j))
            if nets[i, pick] < baselines[i] - 1e-12:
                return None
            kern = coarsen_kernel(
                menu.entries[pick].experiment.kernel, utilities[i], weights
            )
            signals = tuple(f"a{a}" for a in range(utilities.shape[2]))
            entries.append(
                MenuEntry(Experiment(signals=signals, kernel=kern), float(new_prices[pick]))
            )
            chosen_prices[i] = new_prices[pick]
        repaired = Menu.build(entries, type_dist)
        residual, _ = menu_lp_form_residual(utilities, weights, type_dist, repaired)
        if residual > 1e-9:
            return None
        return Menu(
            entries=repaired.entries,
            revenue=repaired.revenue,
            max_violation=residual,
        )

    # Mode A: ranks are 1-based positions in nondecreasing price order.
    order = np.argsort(prices, kind="stable")
    ranks = np.empty(n, dtype=int)
    ranks[order] = np.arange(1, n + 1)
    cand_a = attempt(prices - ranks * epsilon)
    # Mode B: affine shrink.
    cand_b = attempt((1.0 - math.sqrt(epsilon)) * prices - epsilon)

    candidates = [c for c in (cand_a, cand_b) if c is not None]
    if not candidates:
        raise RuntimeError("price repair failed to produce a feasible menu")
    return max(candidates, key=lambda c: c.revenue)


# -- Monte Carlo revenue ----------------------------------------------------


@dataclass(frozen=True)
class RevenueEstimate:
    mean: float
    ci_halfwidth: float
    n_trials: int
    prices: NDArray[np.float64]

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "ci_halfwidth": self.ci_halfwidth,
            "n_trials": self.n_trials,
        }


def _revenue_trial(oracle: StateOracle, K: int, seed: int, trial: int, delta: float) -> float:
    rng = np.random.default_rng([seed, trial])
    declared = int(rng.choice(oracle.n_types, p=oracle.type_dist))
    state = oracle.sample_states(rng, 1)[0]
    _, price, _ = run_lazy_experiment(oracle, declared, state, K, rng=rng, delta=delta)
    return price


def estimate_mechanism_revenue(
    oracle: StateOracle,
    K: int,
    trials: int,
    seed: int = 0,
    delta: float = 0.1,
    jobs: int = 1,
) -> RevenueEstimate:
    """Mean charged price over independent runs with (type, state) ~ (f, prior).

    Each trial owns the RNG stream keyed by (seed, trial index), so results do
    not depend on scheduling or worker count.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            prices = list(
                pool.map(
                    _revenue_trial,
                    [oracle] * trials,
                    [K] * trials,
                    [seed] * trials,
                    range(trials),
                    [delta] * trials,
                )
            )
    else:
        prices = [_revenue_trial(oracle, K, seed, t, delta) for t in range(trials)]
    arr = np.asarray(prices)
    mean = float(arr.mean())
    half = 1.96 * float(arr.std(ddof=1)) / math.sqrt(trials) if trials > 1 else 0.0
    return RevenueEstimate(mean=mean, ci_halfwidth=half, n_trials=trials, prices=arr)
