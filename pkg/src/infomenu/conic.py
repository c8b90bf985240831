"""Thin, solver-agnostic layer over linear and semidefinite conic programs.

Problems mix free/bounded scalar variables with symmetric matrix variables
constrained to ``0 <= X <= upper * I`` in the Loewner order. Pure-LP problems
(no matrix blocks) are dispatched to scipy's HiGHS; anything with a matrix
block goes through cvxpy with an interior-point conic solver. Either way the
returned point is re-verified against the problem's own rows before a status
of "optimal" is reported.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from numpy.typing import NDArray
from scipy.optimize import linprog

DEFAULT_TOLERANCE = 1e-8

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_UNBOUNDED = "unbounded"
STATUS_NUMERICAL = "numerical-failure"

_SENSES = ("<=", ">=", "==")

TOLERANCE_ENV_VAR = "INFOMENU_SOLVER_TOL"


def default_tolerance() -> float:
    """Solver tolerance, overridable via the INFOMENU_SOLVER_TOL env var."""
    raw = os.environ.get(TOLERANCE_ENV_VAR)
    if raw is None:
        return DEFAULT_TOLERANCE
    tol = float(raw)
    if not 0 < tol < 1:
        raise ValueError(f"{TOLERANCE_ENV_VAR} must be in (0, 1), got {raw!r}")
    return tol


@dataclass
class _Row:
    sense: str
    rhs: float
    scalar_terms: list[tuple[int, float]]
    matrix_terms: list[tuple[int, NDArray[np.float64]]]


@dataclass
class ConicProblem:
    """A linear objective over scalar and PSD-box matrix variables.

    Matrix blocks are symmetric with spectrum confined to [0, upper]; pass
    ``upper=None`` for a plain PSD cone. Rows are linear in everything.
    The problem becomes immutable once solved (or explicitly finalized).
    """

    tolerance: float = field(default_factory=default_tolerance)
    max_iterations: int = 200_000
    deterministic: bool = True

    _scalar_bounds: list[tuple[float | None, float | None]] = field(default_factory=list)
    _scalar_names: list[str] = field(default_factory=list)
    _matrix_dims: list[int] = field(default_factory=list)
    _matrix_uppers: list[float | None] = field(default_factory=list)
    _matrix_names: list[str] = field(default_factory=list)
    _rows: list[_Row] = field(default_factory=list)
    _obj_sense: str = "max"
    _obj_scalar: list[tuple[int, float]] = field(default_factory=list)
    _obj_matrix: list[tuple[int, NDArray[np.float64]]] = field(default_factory=list)
    _finalized: bool = False

    # -- construction ------------------------------------------------------

    def _mutable(self) -> None:
        if self._finalized:
            raise RuntimeError("problem is finalized; build a new one to modify")

    def add_scalar(
        self,
        lower: float | None = None,
        upper: float | None = None,
        name: str | None = None,
    ) -> int:
        self._mutable()
        self._scalar_bounds.append((lower, upper))
        self._scalar_names.append(name or f"x{len(self._scalar_bounds) - 1}")
        return len(self._scalar_bounds) - 1

    def add_scalars(self, count: int, lower=None, upper=None, name: str | None = None) -> list[int]:
        base = name or "x"
        return [self.add_scalar(lower, upper, f"{base}[{k}]") for k in range(count)]

    def add_psd_matrix(self, dim: int, upper: float | None = None, name: str | None = None) -> int:
        """Symmetric dim x dim block with 0 <= X (<= upper * I when given)."""
        self._mutable()
        if dim < 1:
            raise ValueError("matrix dimension must be positive")
        self._matrix_dims.append(dim)
        self._matrix_uppers.append(upper)
        self._matrix_names.append(name or f"X{len(self._matrix_dims) - 1}")
        return len(self._matrix_dims) - 1

    def add_row(
        self,
        sense: str,
        rhs: float,
        scalar_terms: list[tuple[int, float]] | None = None,
        matrix_terms: list[tuple[int, NDArray[np.float64]]] | None = None,
    ) -> None:
        """Constrain sum(c*x) + sum(<A, X>) {<=,>=,==} rhs."""
        self._mutable()
        if sense not in _SENSES:
            raise ValueError(f"sense must be one of {_SENSES}")
        scalar_terms = [(int(i), float(c)) for i, c in (scalar_terms or [])]
        matrix_terms = [
            (int(b), np.asarray(A, dtype=float)) for b, A in (matrix_terms or [])
        ]
        for i, _ in scalar_terms:
            if not 0 <= i < len(self._scalar_bounds):
                raise ValueError(f"row references undeclared scalar {i}")
        for b, A in matrix_terms:
            if not 0 <= b < len(self._matrix_dims):
                raise ValueError(f"row references undeclared matrix {b}")
            d = self._matrix_dims[b]
            if A.shape != (d, d) or not np.allclose(A, A.T, atol=1e-12):
                raise ValueError("matrix coefficients must be symmetric and match the block")
        self._rows.append(_Row(sense, float(rhs), scalar_terms, matrix_terms))

    def set_objective(
        self,
        sense: str,
        scalar_terms: list[tuple[int, float]] | None = None,
        matrix_terms: list[tuple[int, NDArray[np.float64]]] | None = None,
    ) -> None:
        self._mutable()
        if sense not in ("max", "min"):
            raise ValueError("objective sense must be 'max' or 'min'")
        self._obj_sense = sense
        self._obj_scalar = [(int(i), float(c)) for i, c in (scalar_terms or [])]
        self._obj_matrix = [
            (int(b), np.asarray(A, dtype=float)) for b, A in (matrix_terms or [])
        ]

    def finalize(self) -> None:
        self._finalized = True

    @property
    def n_scalars(self) -> int:
        return len(self._scalar_bounds)

    @property
    def n_matrix_blocks(self) -> int:
        return len(self._matrix_dims)

    @property
    def n_rows(self) -> int:
        return len(self._rows)

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "tolerance": self.tolerance,
            "max_iterations": self.max_iterations,
            "deterministic": self.deterministic,
            "scalars": [
                {"name": n, "lower": lo, "upper": hi}
                for n, (lo, hi) in zip(self._scalar_names, self._scalar_bounds)
            ],
            "matrices": [
                {"name": n, "dim": d, "upper": u}
                for n, d, u in zip(self._matrix_names, self._matrix_dims, self._matrix_uppers)
            ],
            "objective": {
                "sense": self._obj_sense,
                "scalar_terms": [[i, c] for i, c in self._obj_scalar],
                "matrix_terms": [[b, A.tolist()] for b, A in self._obj_matrix],
            },
            "rows": [
                {
                    "sense": r.sense,
                    "rhs": r.rhs,
                    "scalar_terms": [[i, c] for i, c in r.scalar_terms],
                    "matrix_terms": [[b, A.tolist()] for b, A in r.matrix_terms],
                }
                for r in self._rows
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ConicProblem":
        prob = cls(
            tolerance=float(data["tolerance"]),
            max_iterations=int(data["max_iterations"]),
            deterministic=bool(data["deterministic"]),
        )
        for s in data["scalars"]:
            prob.add_scalar(s["lower"], s["upper"], s["name"])
        for mdesc in data["matrices"]:
            prob.add_psd_matrix(mdesc["dim"], mdesc["upper"], mdesc["name"])
        prob.set_objective(
            data["objective"]["sense"],
            [(i, c) for i, c in data["objective"]["scalar_terms"]],
            [(b, np.asarray(A)) for b, A in data["objective"]["matrix_terms"]],
        )
        for r in data["rows"]:
            prob.add_row(
                r["sense"],
                r["rhs"],
                [(i, c) for i, c in r["scalar_terms"]],
                [(b, np.asarray(A)) for b, A in r["matrix_terms"]],
            )
        return prob

    def dump_text(self) -> str:
        """Human-readable dump for bug reports; not a stable format."""
        lines = [f"{self._obj_sense} objective over {self.n_scalars} scalars, "
                 f"{self.n_matrix_blocks} matrix blocks, {self.n_rows} rows"]
        obj = " + ".join(
            [f"{c:g}*{self._scalar_names[i]}" for i, c in self._obj_scalar]
            + [f"<A,{self._matrix_names[b]}>" for b, _ in self._obj_matrix]
        )
        lines.append(f"  {self._obj_sense} {obj}")
        for r in self._rows:
            terms = " + ".join(
                [f"{c:g}*{self._scalar_names[i]}" for i, c in r.scalar_terms]
                + [f"<A,{self._matrix_names[b]}>" for b, _ in r.matrix_terms]
            )
            lines.append(f"  {terms} {r.sense} {r.rhs:g}")
        for n, d, u in zip(self._matrix_names, self._matrix_dims, self._matrix_uppers):
            upper = f" <= {u:g}*I" if u is not None else ""
            lines.append(f"  0 <= {n} ({d}x{d}){upper}")
        return "\n".join(lines)


@dataclass(frozen=True)
class ConicResult:
    status: str
    objective: float | None
    scalar_values: NDArray[np.float64] | None
    matrix_values: tuple[NDArray[np.float64], ...] | None
    primal_residual: float | None
    dual_objective: float | None = None


def _row_value(row: _Row, x: NDArray[np.float64], mats) -> float:
    v = sum(c * x[i] for i, c in row.scalar_terms)
    v += sum(float(np.tensordot(A, mats[b])) for b, A in row.matrix_terms)
    return v


def _primal_residual(prob: ConicProblem, x, mats) -> float:
    worst = 0.0
    for row in prob._rows:
        v = _row_value(row, x, mats)
        if row.sense == "<=":
            worst = max(worst, v - row.rhs)
        elif row.sense == ">=":
            worst = max(worst, row.rhs - v)
        else:
            worst = max(worst, abs(v - row.rhs))
    for i, (lo, hi) in enumerate(prob._scalar_bounds):
        if lo is not None:
            worst = max(worst, lo - x[i])
        if hi is not None:
            worst = max(worst, x[i] - hi)
    for b, X in enumerate(mats):
        eig = np.linalg.eigvalsh(X)
        worst = max(worst, -float(eig.min()))
        upper = prob._matrix_uppers[b]
        if upper is not None:
            worst = max(worst, float(eig.max()) - upper)
    return worst


def _solve_lp(prob: ConicProblem) -> ConicResult:
    n = prob.n_scalars
    sign = -1.0 if prob._obj_sense == "max" else 1.0
    c = np.zeros(n)
    for i, coef in prob._obj_scalar:
        c[i] += sign * coef

    ub_rows, ub_rhs, eq_rows, eq_rhs = [], [], [], []
    for row in prob._rows:
        idx = [i for i, _ in row.scalar_terms]
        val = [v for _, v in row.scalar_terms]
        if row.sense == "<=":
            ub_rows.append((idx, val))
            ub_rhs.append(row.rhs)
        elif row.sense == ">=":
            ub_rows.append((idx, [-v for v in val]))
            ub_rhs.append(-row.rhs)
        else:
            eq_rows.append((idx, val))
            eq_rhs.append(row.rhs)

    def build(rows):
        data, ri, ci = [], [], []
        for r, (idx, val) in enumerate(rows):
            for i, v in zip(idx, val):
                ri.append(r)
                ci.append(i)
                data.append(v)
        return sp.csr_matrix((data, (ri, ci)), shape=(len(rows), n))

    kwargs = {}
    if ub_rows:
        kwargs["A_ub"] = build(ub_rows)
        kwargs["b_ub"] = np.array(ub_rhs)
    if eq_rows:
        kwargs["A_eq"] = build(eq_rows)
        kwargs["b_eq"] = np.array(eq_rhs)

    res = linprog(
        c,
        bounds=list(prob._scalar_bounds),
        method="highs",
        options={"presolve": True},
        **kwargs,
    )
    if res.status == 2:
        return ConicResult(STATUS_INFEASIBLE, None, None, None, None)
    if res.status == 3:
        return ConicResult(STATUS_UNBOUNDED, None, None, None, None)
    if res.status != 0 or res.x is None:
        return ConicResult(STATUS_NUMERICAL, None, None, None, None)

    x = np.asarray(res.x)
    residual = _primal_residual(prob, x, ())
    objective = float(sign * res.fun) if prob._obj_sense == "max" else float(res.fun)
    # HiGHS residuals are tiny but not exactly zero; gate on the requested tolerance.
    status = STATUS_OPTIMAL if residual <= prob.tolerance else STATUS_NUMERICAL
    dual = None
    return ConicResult(status, objective, x, (), residual, dual)


def _solve_sdp(prob: ConicProblem) -> ConicResult:
    import cvxpy as cp

    x = cp.Variable(prob.n_scalars) if prob.n_scalars else None
    mats = [cp.Variable((d, d), symmetric=True) for d in prob._matrix_dims]

    cons = []
    for i, (lo, hi) in enumerate(prob._scalar_bounds):
        if lo is not None:
            cons.append(x[i] >= lo)
        if hi is not None:
            cons.append(x[i] <= hi)
    for b, (d, upper) in enumerate(zip(prob._matrix_dims, prob._matrix_uppers)):
        cons.append(mats[b] >> 0)
        if upper is not None:
            cons.append(upper * np.eye(d) - mats[b] >> 0)

    def expr(scalar_terms, matrix_terms):
        e = 0
        for i, coef in scalar_terms:
            e = e + coef * x[i]
        for b, A in matrix_terms:
            e = e + cp.sum(cp.multiply(A, mats[b]))
        return e

    for row in prob._rows:
        lhs = expr(row.scalar_terms, row.matrix_terms)
        if row.sense == "<=":
            cons.append(lhs <= row.rhs)
        elif row.sense == ">=":
            cons.append(lhs >= row.rhs)
        else:
            cons.append(lhs == row.rhs)

    objective = expr(prob._obj_scalar, prob._obj_matrix)
    cp_obj = cp.Maximize(objective) if prob._obj_sense == "max" else cp.Minimize(objective)
    problem = cp.Problem(cp_obj, cons)

    solver_tol = min(prob.tolerance * 1e-2, 1e-9)
    attempts = [
        (cp.CLARABEL, {"tol_gap_abs": solver_tol, "tol_gap_rel": solver_tol,
                       "tol_feas": solver_tol, "max_iter": 200}),
        (cp.CLARABEL, {}),
        (cp.SCS, {"eps": 1e-9, "max_iters": prob.max_iterations}),
    ]
    last_status = STATUS_NUMERICAL
    import warnings

    for solver, opts in attempts:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                problem.solve(solver=solver, **opts)
        except (cp.SolverError, ValueError):
            continue
        status = problem.status
        if status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
            return ConicResult(STATUS_INFEASIBLE, None, None, None, None)
        if status in (cp.UNBOUNDED, cp.UNBOUNDED_INACCURATE):
            return ConicResult(STATUS_UNBOUNDED, None, None, None, None)
        if status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
            continue
        xv = np.asarray(x.value) if x is not None else np.zeros(0)
        mv = tuple(0.5 * (np.asarray(M.value) + np.asarray(M.value).T) for M in mats)
        residual = _primal_residual(prob, xv, mv)
        # Solver labels are advisory; certify the point against our own rows.
        scale = 1.0 + abs(float(problem.value))
        if residual <= prob.tolerance * scale:
            return ConicResult(
                STATUS_OPTIMAL, float(problem.value), xv, mv, residual, None
            )
        last_status = STATUS_NUMERICAL
    return ConicResult(last_status, None, None, None, None)


def solve(prob: ConicProblem) -> ConicResult:
    """Solve a finalized (or finalize-on-solve) conic problem deterministically."""
    prob.finalize()
    if prob.n_matrix_blocks == 0:
        return _solve_lp(prob)
    return _solve_sdp(prob)
