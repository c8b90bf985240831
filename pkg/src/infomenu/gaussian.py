"""Menu pricing for d-dimensional Gaussian states and quadratic-loss buyers.

The state is N(0, I) in R^d; a buyer of type i wants to estimate theta_i . w
and suffers squared loss. Every experiment's worth to such a buyer is pinned
down by its expected posterior covariance, which reduces menu design to scalar
Gaussian experiments (project the state on a direction, add noise). On that
parameterization the revenue problem is a nonconvex QCQP with an exact SDP
relaxation; the rank-one extraction, the full-surplus separation test, and the
deterministic lifting for d >= n live here too.

Prices throughout are surplus-relative: the no-information baseline
-||theta||^2 is dropped from both sides of every constraint, so a type's
willingness to pay for experiment (v, sigma^2) with ||v||^2 + sigma^2 = 1 is
(theta . v)^2.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from . import conic

EIG_TOL = 1e-7

_GAUSSIAN_FIELDS = {"d", "thetas", "type_dist"}


@dataclass(frozen=True)
class GaussianInstance:
    """Preference vectors (one per type) and a type distribution with f_i > 0."""

    d: int
    thetas: NDArray[np.float64]
    type_dist: NDArray[np.float64]

    def __post_init__(self) -> None:
        thetas = np.ascontiguousarray(self.thetas, dtype=np.float64)
        f = np.ascontiguousarray(self.type_dist, dtype=np.float64)
        thetas.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "thetas", thetas)
        object.__setattr__(self, "type_dist", f)
        if thetas.ndim != 2 or thetas.shape[1] != self.d:
            raise ValueError("thetas must be (n_types, d)")
        if not np.all(np.isfinite(thetas)):
            raise ValueError("thetas must be finite")
        if f.shape != (thetas.shape[0],):
            raise ValueError("type_dist length must match thetas")
        if abs(float(f.sum()) - 1.0) > 1e-9 or np.any(f <= 0):
            raise ValueError("type_dist must be strictly positive and sum to 1")

    @property
    def n_types(self) -> int:
        return self.thetas.shape[0]

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "thetas": self.thetas.tolist(),
            "type_dist": self.type_dist.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GaussianInstance":
        extra = set(data) - _GAUSSIAN_FIELDS
        if extra:
            raise ValueError(f"unknown instance fields: {sorted(extra)}")
        missing = _GAUSSIAN_FIELDS - set(data)
        if missing:
            raise ValueError(f"missing instance fields: {sorted(missing)}")
        return cls(
            d=int(data["d"]),
            thetas=np.asarray(data["thetas"], dtype=float),
            type_dist=np.asarray(data["type_dist"], dtype=float),
        )

    @classmethod
    def from_json(cls, text: str) -> "GaussianInstance":
        return cls.from_dict(json.loads(text))

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def whiten_prior(
    mean: NDArray[np.float64],
    cov: NDArray[np.float64],
    thetas: NDArray[np.float64],
) -> NDArray[np.float64]:
    """Map preference vectors for a general N(mean, cov) prior to N(0, I) form.

    With w = mean + cov^(1/2) z, estimating theta . w is estimating
    (cov^(1/2) theta) . z up to a constant the action absorbs, so the
    transformed vectors are cov^(1/2) theta (symmetric square root).
    """
    cov = np.asarray(cov, dtype=float)
    vals, vecs = np.linalg.eigh(0.5 * (cov + cov.T))
    if np.any(vals < -1e-12):
        raise ValueError("covariance must be PSD")
    root = vecs @ np.diag(np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T
    return np.asarray(thetas, dtype=float) @ root.T


@dataclass(frozen=True)
class ScalarGaussianExperiment:
    """Signal = (v . state) + N(0, sigma2) noise; (0, 0) is rejected as degenerate.

    The canonical no-information experiment is v = 0 with sigma2 = 1. Scaling
    (v, sigma) jointly never changes the information content; ``normalized``
    rescales so that ||v||^2 + sigma2 = 1.
    """

    v: NDArray[np.float64]
    sigma2: float

    def __post_init__(self) -> None:
        v = np.ascontiguousarray(self.v, dtype=np.float64)
        v.setflags(write=False)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "sigma2", float(self.sigma2))
        if v.ndim != 1:
            raise ValueError("v must be a vector")
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be nonnegative")
        if self.power <= 0:
            raise ValueError("degenerate experiment: v = 0 with sigma2 = 0")

    @property
    def power(self) -> float:
        return float(self.v @ self.v) + self.sigma2

    def normalized(self) -> "ScalarGaussianExperiment":
        s = math.sqrt(self.power)
        return ScalarGaussianExperiment(v=self.v / s, sigma2=self.sigma2 / s**2)

    @classmethod
    def null(cls, d: int) -> "ScalarGaussianExperiment":
        return cls(v=np.zeros(d), sigma2=1.0)

    def to_dict(self) -> dict:
        return {"v": self.v.tolist(), "sigma2": self.sigma2}


@dataclass(frozen=True)
class GaussianMenuEntry:
    experiment: ScalarGaussianExperiment
    price: float


@dataclass(frozen=True)
class GaussianMenu:
    """Scalar-experiment menu; prices are surplus-relative (see module docs)."""

    entries: tuple[GaussianMenuEntry, ...]
    revenue: float

    @classmethod
    def build(cls, entries, type_dist) -> "GaussianMenu":
        entries = tuple(entries)
        if len(entries) != len(type_dist):
            raise ValueError("entry count must equal the number of types")
        revenue = float(np.dot(type_dist, [e.price for e in entries]))
        return cls(entries=entries, revenue=revenue)

    @property
    def prices(self) -> NDArray[np.float64]:
        return np.array([e.price for e in self.entries])

    @property
    def directions(self) -> NDArray[np.float64]:
        return np.stack([e.experiment.v for e in self.entries])

    def to_dict(self) -> dict:
        return {
            "entries": [
                {"v": e.experiment.v.tolist(),
                 "sigma2": e.experiment.sigma2,
                 "price": e.price}
                for e in self.entries
            ],
            "revenue": self.revenue,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GaussianMenu":
        entries = tuple(
            GaussianMenuEntry(
                ScalarGaussianExperiment(np.asarray(e["v"], dtype=float), e["sigma2"]),
                float(e["price"]),
            )
            for e in data["entries"]
        )
        return cls(entries=entries, revenue=float(data["revenue"]))


def posterior_covariance_scalar(
    exp: ScalarGaussianExperiment, d: int
) -> NDArray[np.float64]:
    """Posterior covariance of an N(0, I_d) state given the scalar signal.

    Jointly Gaussian conditioning gives I - v v^T / (||v||^2 + sigma2),
    independent of the observed signal value.
    """
    if exp.v.shape != (d,):
        raise ValueError("direction dimension does not match d")
    return np.eye(d) - np.outer(exp.v, exp.v) / exp.power


def scalar_experiment_value(
    exp: ScalarGaussianExperiment, theta: NDArray[np.float64]
) -> float:
    """Value (v . theta)^2 / (||v||^2 + sigma2) - ||theta||^2; always in [-||theta||^2, 0]."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != exp.v.shape:
        raise ValueError("theta dimension does not match the experiment")
    return float((exp.v @ theta) ** 2 / exp.power - theta @ theta)


def reduce_to_scalar(
    M: NDArray[np.float64], theta: NDArray[np.float64]
) -> ScalarGaussianExperiment:
    """Scalar experiment matching an information matrix's value for ``theta``.

    ``M`` is I minus an expected posterior covariance, so 0 <= M <= I. The
    returned experiment (v = M theta, sigma2 = theta^T (M - M^2) theta) gives
    the target type exactly theta^T (M - I) theta and every other type at most
    its value under M.
    """
    M = np.asarray(M, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] != theta.shape[0]:
        raise ValueError("M must be square and match theta")
    if not np.allclose(M, M.T, atol=1e-9):
        raise ValueError("M must be symmetric")
    eig = np.linalg.eigvalsh(0.5 * (M + M.T))
    if eig.min() < -1e-9 or eig.max() > 1.0 + 1e-9:
        raise ValueError("M must satisfy 0 <= M <= I")
    v = M @ theta
    sigma2 = float(theta @ (M @ theta) - (M @ theta) @ (M @ theta))
    sigma2 = max(sigma2, 0.0)
    if float(v @ v) <= 0.0 and sigma2 <= 0.0:
        return ScalarGaussianExperiment.null(theta.shape[0])
    return ScalarGaussianExperiment(v=v, sigma2=sigma2)


# -- SDP menu design ---------------------------------------------------------


@dataclass
class MenuSdpProblem:
    problem: conic.ConicProblem
    matrix_ids: list[int]
    price_ids: list[int]
    inst: GaussianInstance


@dataclass(frozen=True)
class SdpSolution:
    """Per-type information matrices and prices from the SDP relaxation."""

    status: str
    objective: float | None
    V: tuple[NDArray[np.float64], ...] | None
    prices: NDArray[np.float64] | None


def build_menu_sdp(inst: GaussianInstance) -> MenuSdpProblem:
    """Assemble the exact SDP relaxation of the scalar-experiment menu QCQP.

    Variables are one matrix V_i in [0, I] per type plus prices; type i values
    entry j at <V_j, theta_i theta_i^T>.
    """
    n, d = inst.n_types, inst.d
    prob = conic.ConicProblem()
    matrix_ids = [prob.add_psd_matrix(d, upper=1.0, name=f"V[{i}]") for i in range(n)]
    price_ids = [prob.add_scalar(None, None, f"t[{i}]") for i in range(n)]
    prob.set_objective(
        "max", [(price_ids[i], float(inst.type_dist[i])) for i in range(n)]
    )
    outer = [np.outer(inst.thetas[i], inst.thetas[i]) for i in range(n)]
    for i in range(n):
        prob.add_row(
            ">=", 0.0, [(price_ids[i], -1.0)], [(matrix_ids[i], outer[i])]
        )
        for j in range(n):
            if j == i:
                continue
            prob.add_row(
                ">=",
                0.0,
                [(price_ids[i], -1.0), (price_ids[j], 1.0)],
                [(matrix_ids[i], outer[i]), (matrix_ids[j], -outer[i])],
            )
    return MenuSdpProblem(problem=prob, matrix_ids=matrix_ids, price_ids=price_ids, inst=inst)


def solve_menu_sdp(inst: GaussianInstance) -> SdpSolution:
    """Solve the menu SDP; matrices come back symmetrized and spectrum-checked."""
    sdp = build_menu_sdp(inst)
    result = conic.solve(sdp.problem)
    if result.status != conic.STATUS_OPTIMAL:
        return SdpSolution(status=result.status, objective=None, V=None, prices=None)
    mats = []
    for b in sdp.matrix_ids:
        V = result.matrix_values[b]
        V = 0.5 * (V + V.T)
        eig = np.linalg.eigvalsh(V)
        if eig.min() < -EIG_TOL or eig.max() > 1.0 + EIG_TOL:
            return SdpSolution(
                status=conic.STATUS_NUMERICAL, objective=None, V=None, prices=None
            )
        mats.append(V)
    prices = np.array([result.scalar_values[i] for i in sdp.price_ids])
    return SdpSolution(
        status=result.status,
        objective=float(result.objective),
        V=tuple(mats),
        prices=prices,
    )


def extract_rank_one(sol: SdpSolution, inst: GaussianInstance) -> GaussianMenu:
    """Read a rank-one (scalar-experiment) menu out of an SDP solution.

    Sets v_i = V_i theta_i / sqrt(theta_i^T V_i theta_i), which preserves every
    constraint value and the objective. A type with theta_i^T V_i theta_i ~ 0
    gets the canonical no-information experiment.
    """
    if sol.status != conic.STATUS_OPTIMAL or sol.V is None:
        raise ValueError(f"cannot extract from a solve with status {sol.status!r}")
    entries = []
    for i in range(inst.n_types):
        theta = inst.thetas[i]
        quad = float(theta @ sol.V[i] @ theta)
        if quad <= 1e-12:
            exp = ScalarGaussianExperiment.null(inst.d)
        else:
            v = sol.V[i] @ theta / math.sqrt(quad)
            norm2 = float(v @ v)
            if norm2 > 1.0:
                # spectrum check bounds the overshoot by ~EIG_TOL; renormalize
                v = v / math.sqrt(norm2)
                norm2 = 1.0
            exp = ScalarGaussianExperiment(v=v, sigma2=max(0.0, 1.0 - norm2))
        entries.append(GaussianMenuEntry(exp, float(sol.prices[i])))
    return GaussianMenu.build(entries, inst.type_dist)


def solve_gaussian_menu(inst: GaussianInstance) -> tuple[GaussianMenu, SdpSolution]:
    """SDP solve plus rank-one extraction in one call."""
    sol = solve_menu_sdp(inst)
    if sol.status != conic.STATUS_OPTIMAL:
        raise RuntimeError(f"menu SDP ended with status {sol.status!r}")
    return extract_rank_one(sol, inst), sol


# -- structure results -------------------------------------------------------


@dataclass(frozen=True)
class FullSurplusReport:
    separated: bool
    worst_pair: tuple[int, int] | None
    margin: float


def check_full_surplus(inst: GaussianInstance) -> FullSurplusReport:
    """Test |theta_i . theta_j| <= ||theta_i||^2 for every ordered pair i != j.

    The margin is the smallest slack; it is exactly zero at the boundary and
    +inf for a single type (no pairs to violate).
    """
    n = inst.n_types
    if n == 1:
        return FullSurplusReport(separated=True, worst_pair=None, margin=math.inf)
    G = inst.thetas @ inst.thetas.T
    margin, worst = math.inf, None
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            slack = float(G[i, i] - abs(G[i, j]))
            if slack < margin:
                margin, worst = slack, (i, j)
    return FullSurplusReport(separated=margin >= 0.0, worst_pair=worst, margin=margin)


def full_surplus_revenue(inst: GaussianInstance) -> float:
    """Revenue with no information asymmetry: sum_i f_i ||theta_i||^2."""
    return float(inst.type_dist @ (inst.thetas**2).sum(axis=1))


def full_surplus_menu(inst: GaussianInstance) -> GaussianMenu:
    """The menu v_i = theta_i/||theta_i||, t_i = ||theta_i||^2.

    Feasible (hence optimal, extracting everything) exactly when the instance
    is separated.
    """
    entries = []
    for i in range(inst.n_types):
        theta = inst.thetas[i]
        norm = float(np.linalg.norm(theta))
        if norm == 0.0:
            entries.append(GaussianMenuEntry(ScalarGaussianExperiment.null(inst.d), 0.0))
        else:
            entries.append(
                GaussianMenuEntry(
                    ScalarGaussianExperiment(v=theta / norm, sigma2=0.0),
                    float(norm**2),
                )
            )
    return GaussianMenu.build(entries, inst.type_dist)


def lift_to_deterministic(menu: GaussianMenu, inst: GaussianInstance) -> GaussianMenu:
    """Push every direction to unit norm without touching prices or constraints.

    Needs d >= n. For a type with ||v_i|| < 1, a direction orthogonal to all
    other types' preference vectors exists; moving v_i along it (sign-aligned
    with theta_i's view) to unit norm leaves every other type's valuation of
    entry i unchanged and weakly raises type i's own.
    """
    from scipy.linalg import qr

    n, d = inst.n_types, inst.d
    if d < n:
        raise ValueError(
            f"deterministic lifting needs d >= n (got d={d}, n={n}); "
            "in lower dimension randomized experiments can be necessary"
        )
    if len(menu.entries) != n:
        raise ValueError("menu entry count does not match the instance")
    entries = []
    for i, entry in enumerate(menu.entries):
        v = entry.experiment.v.copy()
        norm2 = float(v @ v)
        if norm2 >= 1.0 - 1e-12:
            entries.append(entry)
            continue
        others = np.delete(inst.thetas, i, axis=0).T  # d x (n-1)
        if others.shape[1] == 0:
            delta = np.zeros(d)
            delta[0] = 1.0
        else:
            Q, R, _ = qr(others, pivoting=True)
            diag = np.abs(np.diag(R))
            tol = max(others.shape) * np.finfo(float).eps * (diag.max() if diag.size else 0.0)
            rank = int((diag > tol).sum())
            if rank >= d:
                raise ValueError(
                    f"other types' preference vectors span all of R^{d}; "
                    "no lifting direction exists for type "
                    f"{i} (degenerate with d >= n)"
                )
            delta = Q[:, rank]
        theta = inst.thetas[i]
        if (theta @ v) * (theta @ delta) < 0:
            delta = -delta
        # ||v + alpha delta||^2 = 1 with ||delta|| = 1: nonnegative root.
        b = float(v @ delta)
        alpha = -b + math.sqrt(b * b + 1.0 - norm2)
        lifted = v + alpha * delta
        lifted /= float(np.linalg.norm(lifted))
        entries.append(
            GaussianMenuEntry(ScalarGaussianExperiment(v=lifted, sigma2=0.0), entry.price)
        )
    return GaussianMenu.build(entries, inst.type_dist)


def evaluate_gaussian_menu(menu: GaussianMenu, inst: GaussianInstance, tol: float = 1e-6):
    """Residuals of the scalar-experiment QCQP rows for a concrete menu."""
    from .bench import ViolationReport

    n = inst.n_types
    if len(menu.entries) != n:
        raise ValueError("menu entry count does not match the instance")
    dirs = menu.directions
    prices = menu.prices
    values = (inst.thetas @ dirs.T) ** 2  # values[i, j] = (theta_i . v_j)^2
    labels, residuals = [], []
    for i in range(n):
        net_own = values[i, i] - prices[i]
        for j in range(n):
            if i == j:
                continue
            labels.append(f"IC({i},{j})")
            residuals.append((values[i, j] - prices[j]) - net_own)
        labels.append(f"IR({i})")
        residuals.append(-net_own)
        labels.append(f"NORM({i})")
        residuals.append(float(np.linalg.norm(dirs[i])) - 1.0)
    return ViolationReport.build(labels, residuals, tol)
