"""Revenue-maximizing menus of experiments over a discrete (or empirical) prior.

One LP builder serves both the exact solve (weights = true prior) and the
sample-based solve (weights = empirical frequencies over a drawn multiset).
The formulation keeps per-type signaling kernels with action-labeled signals,
prices, and auxiliary variables that linearize the deviating buyer's
best response to each signal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from . import conic
from .core import (
    Experiment,
    FiniteInstance,
    Menu,
    MenuEntry,
    baseline_utility,
    experiment_value,
    full_information_value,
    responsive_value,
)

RESIDUAL_LIMIT = 1e-6


@dataclass
class MenuLpProblem:
    """An assembled menu LP plus the index maps needed to read a solution back.

    Attributes:
        weights: probability weight per support entry.
        utilities: array (n_types, n_support, n_actions) of buyer utilities at
            the support points.
        type_dist: buyer type distribution.
        problem: the underlying conic problem (no PSD blocks).
        kernel_vars: kernel_vars[i][k][a] is the variable id of pi_i(a | w_k).
        price_vars: price variable id per type.
        aux_vars: aux_vars[a][i][j] bounds type i's payoff from signal a of
            menu entry j under the deviating best response.
        baselines: per-type best utility under the weights with no information.
    """

    weights: NDArray[np.float64]
    utilities: NDArray[np.float64]
    type_dist: NDArray[np.float64]
    problem: conic.ConicProblem
    kernel_vars: NDArray[np.intp]
    price_vars: NDArray[np.intp]
    aux_vars: NDArray[np.intp]
    baselines: NDArray[np.float64]


@dataclass(frozen=True)
class LpSolveReport:
    """Outcome of a menu LP solve.

    ``status`` is one of optimal | infeasible | unbounded | numerical-failure.
    ``ir_slack`` reports per-type slack in the participation rows at the
    solution (nonnegative when feasible).
    """

    status: str
    objective: float | None
    menu: Menu | None
    max_constraint_residual: float | None
    ir_slack: NDArray[np.float64] | None = None

    def to_dict(self) -> dict:
        out = {
            "status": self.status,
            "revenue": self.objective,
            "max_constraint_residual": self.max_constraint_residual,
        }
        if self.menu is not None:
            out["menu"] = [
                {"kernel": e.experiment.kernel.tolist(), "price": e.price}
                for e in self.menu.entries
            ]
            # prices are unconstrained in the LP; surface it if one goes negative
            out["min_price"] = float(self.menu.prices.min())
            out["has_negative_price"] = bool(self.menu.prices.min() < -1e-9)
        if self.ir_slack is not None:
            out["ir_slack"] = self.ir_slack.tolist()
        return out


def build_menu_lp_from_values(
    utilities: NDArray[np.float64],
    type_dist: NDArray[np.float64],
    weights: NDArray[np.float64],
    tolerance: float | None = None,
) -> MenuLpProblem:
    """Assemble the menu LP from raw utility evaluations at support points.

    Args:
        utilities: (n_types, n_support, n_actions) utilities in [0, 1].
        type_dist: distribution over types.
        weights: probability weight per support point (sums to 1).

    The LP maximizes expected price subject to, for every ordered type pair
    (i, j), the truthful obedient payoff of i beating its best payoff from
    taking entry j and relabeling signals, plus participation rows against the
    no-information baseline under the same weights, plus row-stochasticity.
    """
    utilities = np.asarray(utilities, dtype=float)
    weights = np.asarray(weights, dtype=float)
    type_dist = np.asarray(type_dist, dtype=float)
    if utilities.ndim != 3:
        raise ValueError("utilities must be (n_types, n_support, n_actions)")
    n, K, m = utilities.shape
    if weights.shape != (K,):
        raise ValueError("weights length does not match support size")
    if abs(float(weights.sum()) - 1.0) > 1e-9 or np.any(weights < -1e-12):
        raise ValueError("weights must be a probability vector")
    if type_dist.shape != (n,):
        raise ValueError("type_dist length does not match utilities")

    prob = conic.ConicProblem()
    if tolerance is not None:
        prob.tolerance = tolerance
    kernel_vars = np.empty((n, K, m), dtype=np.intp)
    for i in range(n):
        for k in range(K):
            for a in range(m):
                kernel_vars[i, k, a] = prob.add_scalar(0.0, None, f"pi[{i},{k},{a}]")
    price_vars = np.array([prob.add_scalar(None, None, f"t[{i}]") for i in range(n)])
    aux_vars = np.empty((m, n, n), dtype=np.intp)
    for a in range(m):
        for i in range(n):
            for j in range(n):
                aux_vars[a, i, j] = prob.add_scalar(None, None, f"v[{a},{i},{j}]")

    prob.set_objective(
        "max", [(int(price_vars[i]), float(type_dist[i])) for i in range(n)]
    )

    # wu[i, k, a] = weight_k * u_i(w_k, a): the LP's recurring coefficient.
    wu = weights[None, :, None] * utilities

    def own_terms(i: int) -> list[tuple[int, float]]:
        return [
            (int(kernel_vars[i, k, a]), float(wu[i, k, a]))
            for k in range(K)
            for a in range(m)
        ]

    baselines = np.array([float((weights @ utilities[i]).max()) for i in range(n)])

    for i in range(n):
        own = own_terms(i)
        # Truthful-vs-entry-j rows, including j = i (dominates disobedience).
        for j in range(n):
            terms = list(own)
            terms.append((int(price_vars[i]), -1.0))
            terms.append((int(price_vars[j]), 1.0))
            for a in range(m):
                terms.append((int(aux_vars[a, i, j]), -1.0))
            prob.add_row(">=", 0.0, terms)
        # Participation against the empirical baseline.
        terms = list(own)
        terms.append((int(price_vars[i]), -1.0))
        prob.add_row(">=", float(baselines[i]), terms)

    # aux[a, i, j] >= sum_k weight_k * pi_j(a | w_k) * u_i(w_k, a') for every a'.
    for a in range(m):
        for i in range(n):
            for j in range(n):
                for a_resp in range(m):
                    terms = [(int(aux_vars[a, i, j]), 1.0)]
                    terms += [
                        (int(kernel_vars[j, k, a]), float(-wu[i, k, a_resp]))
                        for k in range(K)
                    ]
                    prob.add_row(">=", 0.0, terms)

    for i in range(n):
        for k in range(K):
            prob.add_row(
                "==", 1.0, [(int(kernel_vars[i, k, a]), 1.0) for a in range(m)]
            )

    return MenuLpProblem(
        weights=weights,
        utilities=utilities,
        type_dist=type_dist,
        problem=prob,
        kernel_vars=kernel_vars,
        price_vars=price_vars,
        aux_vars=aux_vars,
        baselines=baselines,
    )


def build_menu_lp(
    inst: FiniteInstance,
    weights: NDArray[np.float64] | None = None,
    support: list[int] | None = None,
) -> MenuLpProblem:
    """Menu LP for a finite instance over its prior or any re-weighted support.

    ``support`` selects state indices (repeats allowed, so an i.i.d. sample
    multiset can be passed literally); ``weights`` then runs over the support
    entries. With neither given, the true prior over all states is used.
    """
    if support is None:
        support = list(range(inst.n_states))
        if weights is None:
            weights = inst.prior
    elif weights is None:
        weights = np.full(len(support), 1.0 / len(support))
    for k in support:
        if not 0 <= k < inst.n_states:
            raise ValueError(f"support index {k} out of range")
    utilities = inst.utilities[:, support, :]
    return build_menu_lp_from_values(utilities, inst.type_dist, np.asarray(weights, dtype=float))


def solve_menu_lp(lp: MenuLpProblem) -> LpSolveReport:
    """Solve an assembled menu LP and read the menu back out of the solution."""
    result = conic.solve(lp.problem)
    if result.status != conic.STATUS_OPTIMAL:
        return LpSolveReport(result.status, None, None, result.primal_residual)

    x = result.scalar_values
    n, K, m = lp.utilities.shape
    kernels = x[lp.kernel_vars]
    # Tidy solver round-off so Experiment's row-stochastic check passes.
    kernels = np.clip(kernels, 0.0, None)
    kernels /= kernels.sum(axis=2, keepdims=True)
    prices = x[lp.price_vars]

    entries = []
    signals = tuple(f"a{a}" for a in range(m))
    for i in range(n):
        exp = Experiment(signals=signals, kernel=kernels[i])
        entries.append(MenuEntry(experiment=exp, price=float(prices[i])))

    residual, ir_slack = _lp_menu_residual(lp, kernels, prices)
    status = result.status
    if residual > RESIDUAL_LIMIT:
        status = conic.STATUS_NUMERICAL
    menu = Menu.build(entries, lp.type_dist, max_violation=residual)
    return LpSolveReport(
        status=status,
        objective=float(result.objective),
        menu=menu,
        max_constraint_residual=residual,
        ir_slack=ir_slack,
    )


def _lp_menu_residual(
    lp: MenuLpProblem, kernels: NDArray[np.float64], prices: NDArray[np.float64]
) -> tuple[float, NDArray[np.float64]]:
    """Worst violation of the LP's truthful/participation rows by a menu."""
    n, K, m = lp.utilities.shape
    wu = lp.weights[None, :, None] * lp.utilities
    own = np.einsum("ika,ika->i", wu, kernels)
    # cross[i, j] = best payoff of type i from entry j with relabeled signals.
    signal_payoff = np.einsum("jka,ikb->ijab", kernels * lp.weights[None, :, None], lp.utilities)
    cross = signal_payoff.max(axis=3).sum(axis=2)
    worst = 0.0
    for i in range(n):
        for j in range(n):
            worst = max(worst, (cross[i, j] - prices[j]) - (own[i] - prices[i]))
    ir_slack = own - prices - lp.baselines
    worst = max(worst, float(-ir_slack.min()))
    return worst, ir_slack


def solve_exact(inst: FiniteInstance) -> LpSolveReport:
    """Optimal menu under the true prior, returned in responsive (obedient) form."""
    from .lazy import coarsen_to_responsive

    lp = build_menu_lp(inst)
    report = solve_menu_lp(lp)
    if report.menu is None:
        return report
    menu = coarsen_to_responsive(inst, report.menu)
    residual = menu_residual(inst, menu)
    status = report.status
    if residual > RESIDUAL_LIMIT:
        status = conic.STATUS_NUMERICAL
    menu = Menu(entries=menu.entries, revenue=menu.revenue, max_violation=residual)
    return LpSolveReport(
        status=status,
        objective=report.objective,
        menu=menu,
        max_constraint_residual=residual,
        ir_slack=report.ir_slack,
    )


def menu_residual(
    inst: FiniteInstance, menu: Menu, weights: NDArray[np.float64] | None = None
) -> float:
    """Max IC/IR violation of a responsive menu, own entries read obediently."""
    n = inst.n_types
    own = np.array(
        [responsive_value(inst, menu.entries[i].experiment, i, weights) for i in range(n)]
    )
    prices = menu.prices
    worst = 0.0
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            cross = experiment_value(inst, menu.entries[j].experiment, i, weights)
            worst = max(worst, (cross - prices[j]) - (own[i] - prices[i]))
        worst = max(worst, baseline_utility(inst, i, weights) - (own[i] - prices[i]))
    return worst


def full_info_revenue(inst: FiniteInstance) -> float:
    """Revenue with no information asymmetry: each type pays its full surplus."""
    surplus = np.array(
        [
            full_information_value(inst, i) - baseline_utility(inst, i)
            for i in range(inst.n_types)
        ]
    )
    return float(inst.type_dist @ surplus)
