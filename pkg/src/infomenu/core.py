"""Finite decision-problem instances, statistical experiments, and their value algebra.

A buyer facing an uncertain state chooses an action; an experiment maps each
state to a distribution over signals. The value of an experiment to a buyer
type is the expected utility of best-responding to each signal, minus nothing
(baselines are handled by callers). All utilities live in [0, 1]; instances
outside that range are rejected at construction rather than renormalized.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

PROB_TOL = 1e-9

_INSTANCE_FIELDS = {"states", "prior", "actions", "type_dist", "utilities"}


def _as_readonly(a: NDArray[np.float64]) -> NDArray[np.float64]:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def _check_distribution(w: NDArray[np.float64], what: str) -> None:
    if w.ndim != 1 or w.size == 0:
        raise ValueError(f"{what} must be a nonempty vector")
    if np.any(w < -PROB_TOL) or np.any(np.isnan(w)):
        raise ValueError(f"{what} has negative or NaN entries")
    total = float(w.sum())
    if abs(total - 1.0) > PROB_TOL:
        raise ValueError(f"{what} sums to {total!r}, expected 1 within {PROB_TOL}")


@dataclass(frozen=True)
class FiniteInstance:
    """A finite-state, finite-action decision problem with heterogeneous buyer types.

    Attributes:
        states: state identifiers.
        prior: common prior over states (sums to 1 within 1e-9).
        actions: action identifiers.
        utilities: array of shape (n_types, n_states, n_actions) with entries
            in [0, 1], indexed [type][state][action].
        type_dist: distribution over buyer types.
    """

    states: tuple[str, ...]
    prior: NDArray[np.float64]
    actions: tuple[str, ...]
    utilities: NDArray[np.float64]
    type_dist: NDArray[np.float64]

    def __post_init__(self) -> None:
        object.__setattr__(self, "states", tuple(str(s) for s in self.states))
        object.__setattr__(self, "actions", tuple(str(a) for a in self.actions))
        object.__setattr__(self, "prior", _as_readonly(np.asarray(self.prior)))
        object.__setattr__(self, "type_dist", _as_readonly(np.asarray(self.type_dist)))
        object.__setattr__(self, "utilities", _as_readonly(np.asarray(self.utilities)))
        if len(self.states) < 1:
            raise ValueError("need at least one state")
        if len(self.actions) < 1:
            raise ValueError("need at least one action")
        _check_distribution(self.prior, "prior")
        _check_distribution(self.type_dist, "type_dist")
        if self.prior.shape != (len(self.states),):
            raise ValueError("prior length does not match states")
        expected = (len(self.type_dist), len(self.states), len(self.actions))
        if self.utilities.shape != expected:
            raise ValueError(
                f"utilities shape {self.utilities.shape} != {expected} "
                "(expected [type][state][action])"
            )
        if np.any(self.utilities < -0.0) or np.any(self.utilities > 1.0):
            raise ValueError("utilities must lie in [0, 1]; pre-normalize inputs")

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    @property
    def n_types(self) -> int:
        return len(self.type_dist)

    def state_index(self, state: str) -> int:
        try:
            return self.states.index(str(state))
        except ValueError:
            raise KeyError(f"unknown state {state!r}") from None

    def to_dict(self) -> dict:
        return {
            "states": list(self.states),
            "prior": self.prior.tolist(),
            "actions": list(self.actions),
            "type_dist": self.type_dist.tolist(),
            "utilities": self.utilities.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FiniteInstance":
        extra = set(data) - _INSTANCE_FIELDS
        if extra:
            raise ValueError(f"unknown instance fields: {sorted(extra)}")
        missing = _INSTANCE_FIELDS - set(data)
        if missing:
            raise ValueError(f"missing instance fields: {sorted(missing)}")
        return cls(
            states=tuple(data["states"]),
            prior=np.asarray(data["prior"], dtype=float),
            actions=tuple(data["actions"]),
            utilities=np.asarray(data["utilities"], dtype=float),
            type_dist=np.asarray(data["type_dist"], dtype=float),
        )

    @classmethod
    def from_json(cls, text: str) -> "FiniteInstance":
        return cls.from_dict(json.loads(text))

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


@dataclass(frozen=True)
class Experiment:
    """A signaling scheme: row-stochastic kernel from states to signals."""

    signals: tuple[str, ...]
    kernel: NDArray[np.float64]

    def __post_init__(self) -> None:
        object.__setattr__(self, "signals", tuple(str(s) for s in self.signals))
        object.__setattr__(self, "kernel", _as_readonly(np.asarray(self.kernel)))
        if self.kernel.ndim != 2 or self.kernel.shape[1] != len(self.signals):
            raise ValueError("kernel must be (n_states, n_signals)")
        if np.any(self.kernel < -PROB_TOL) or np.any(np.isnan(self.kernel)):
            raise ValueError("kernel has negative or NaN entries")
        rows = self.kernel.sum(axis=1)
        if np.any(np.abs(rows - 1.0) > PROB_TOL):
            raise ValueError("kernel rows must each sum to 1 within 1e-9")

    @property
    def n_states(self) -> int:
        return self.kernel.shape[0]

    @classmethod
    def null(cls, n_states: int) -> "Experiment":
        """The no-information experiment: one signal carrying all mass."""
        return cls(signals=("s0",), kernel=np.ones((n_states, 1)))

    @classmethod
    def full_revelation(cls, states: Sequence[str]) -> "Experiment":
        """One signal per state, emitted deterministically."""
        n = len(states)
        return cls(signals=tuple(str(s) for s in states), kernel=np.eye(n))

    def to_dict(self) -> dict:
        return {"signals": list(self.signals), "kernel": self.kernel.tolist()}


@dataclass(frozen=True)
class MenuEntry:
    experiment: Experiment
    price: float


@dataclass(frozen=True)
class Menu:
    """Per-type experiment/price pairs with revenue metadata.

    ``max_violation`` records the largest IC/IR residual found by whatever
    check produced this menu (None if never checked).
    """

    entries: tuple[MenuEntry, ...]
    revenue: float
    max_violation: float | None = None

    @classmethod
    def build(
        cls,
        entries: Sequence[MenuEntry],
        type_dist: NDArray[np.float64],
        max_violation: float | None = None,
    ) -> "Menu":
        entries = tuple(entries)
        if len(entries) != len(type_dist):
            raise ValueError("entry count must equal the number of types")
        revenue = float(np.dot(type_dist, [e.price for e in entries]))
        return cls(entries=entries, revenue=revenue, max_violation=max_violation)

    @property
    def prices(self) -> NDArray[np.float64]:
        return np.array([e.price for e in self.entries])

    def check_revenue(self, type_dist: NDArray[np.float64]) -> None:
        expected = float(np.dot(type_dist, self.prices))
        if abs(expected - self.revenue) > PROB_TOL:
            raise ValueError("revenue does not match type-weighted prices")

    def to_dict(self) -> dict:
        return {
            "entries": [
                {"kernel": e.experiment.kernel.tolist(),
                 "signals": list(e.experiment.signals),
                 "price": e.price}
                for e in self.entries
            ],
            "revenue": self.revenue,
            "max_violation": self.max_violation,
        }


def _resolve_weights(
    inst: FiniteInstance, weights: NDArray[np.float64] | None
) -> NDArray[np.float64]:
    if weights is None:
        return inst.prior
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (inst.n_states,):
        raise ValueError("weights length does not match states")
    return weights


def baseline_utility(
    inst: FiniteInstance, i: int, weights: NDArray[np.float64] | None = None
) -> float:
    """Best expected utility of type ``i`` acting on the prior alone.

    ``weights`` substitutes an alternative distribution over the instance's
    states (used by the empirical-LP path).
    """
    if not 0 <= i < inst.n_types:
        raise IndexError(f"type index {i} out of range")
    w = _resolve_weights(inst, weights)
    return float(np.max(w @ inst.utilities[i]))


def baseline_action(
    inst: FiniteInstance, i: int, weights: NDArray[np.float64] | None = None
) -> int:
    """Argmax action behind :func:`baseline_utility`; ties go to the lowest index."""
    if not 0 <= i < inst.n_types:
        raise IndexError(f"type index {i} out of range")
    w = _resolve_weights(inst, weights)
    return int(np.argmax(w @ inst.utilities[i]))


def experiment_value(
    inst: FiniteInstance,
    exp: Experiment,
    i: int,
    weights: NDArray[np.float64] | None = None,
) -> float:
    """Value of an experiment to type ``i``: best response per signal, summed.

    Computes ``sum_s max_a sum_w weight(w) * kernel(s|w) * u_i(w, a)``. Equals
    the baseline for the null experiment and the full-information value for the
    fully revealing one.
    """
    if not 0 <= i < inst.n_types:
        raise IndexError(f"type index {i} out of range")
    if exp.n_states != inst.n_states:
        raise ValueError("experiment kernel does not match instance states")
    w = _resolve_weights(inst, weights)
    # weighted[s, a] = sum_w weight(w) * kernel(s|w) * u_i(w, a)
    weighted = exp.kernel.T @ (w[:, None] * inst.utilities[i])
    return float(weighted.max(axis=1).sum())


def responsive_value(
    inst: FiniteInstance,
    exp: Experiment,
    i: int,
    weights: NDArray[np.float64] | None = None,
) -> float:
    """Obedient reading of an action-labeled experiment: signal a means "play a".

    Linear in the kernel, and never exceeds :func:`experiment_value` of the
    same kernel.
    """
    if not 0 <= i < inst.n_types:
        raise IndexError(f"type index {i} out of range")
    if exp.signals != inst.actions:
        raise ValueError("responsive value needs signals identical to actions")
    if exp.n_states != inst.n_states:
        raise ValueError("experiment kernel does not match instance states")
    w = _resolve_weights(inst, weights)
    return float(np.einsum("w,wa,wa->", w, exp.kernel, inst.utilities[i]))


def full_information_value(
    inst: FiniteInstance, i: int, weights: NDArray[np.float64] | None = None
) -> float:
    """Value of learning the state exactly: ``sum_w weight(w) max_a u_i(w, a)``."""
    if not 0 <= i < inst.n_types:
        raise IndexError(f"type index {i} out of range")
    w = _resolve_weights(inst, weights)
    return float(w @ inst.utilities[i].max(axis=1))
