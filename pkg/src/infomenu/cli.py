"""Command-line entry point for batch solves and benchmark reproduction.

All outputs are JSON and embed the seed, tolerances, and tool version so a
rerun with the same config reproduces them byte for byte (timestamps are
deliberately omitted). Exit codes: 0 optimal/pass, 2 infeasible or failed
check, 3 numerical failure, 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__, bench, conic, gaussian, lazy, menu_lp
from .core import Experiment, FiniteInstance, Menu, MenuEntry

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_NUMERICAL = 3
EXIT_USAGE = 64


@dataclass
class RunConfig:
    command: str
    input_path: str | None = None
    epsilon: float | None = None
    delta: float | None = None
    budget: int | None = None
    trials: int | None = None
    seed: int = 0
    grid_step: float | None = None
    output_path: str | None = None
    tolerance: float | None = None


class UsageError(Exception):
    pass


def _load_finite(path: str) -> FiniteInstance:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return FiniteInstance.from_json(fh.read())
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot load finite instance from {path}: {exc}") from exc


def _load_gaussian(path: str) -> gaussian.GaussianInstance:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return gaussian.GaussianInstance.from_json(fh.read())
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot load gaussian instance from {path}: {exc}") from exc


def _emit(payload: dict, config: RunConfig) -> None:
    payload = {
        "tool_version": __version__,
        "seed": config.seed,
        "solver_tolerance": conic.default_tolerance(),
        **payload,
    }
    text = json.dumps(payload, indent=2, sort_keys=True)
    if config.output_path:
        with open(config.output_path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _status_exit(status: str) -> int:
    if status == conic.STATUS_OPTIMAL:
        return EXIT_OK
    if status in (conic.STATUS_INFEASIBLE, conic.STATUS_UNBOUNDED):
        return EXIT_INFEASIBLE
    return EXIT_NUMERICAL


def cmd_solve_exact(config: RunConfig) -> int:
    inst = _load_finite(config.input_path)
    report = menu_lp.solve_exact(inst)
    payload = report.to_dict()
    if report.menu is not None:
        check = bench.check_ic_ir(inst, report.menu, tol=config.tolerance or 1e-6)
        payload["ic_ir"] = check.to_dict()
    _emit(payload, config)
    return _status_exit(report.status)


def _resolve_oracle(config: RunConfig):
    """An oracle source is an instance JSON path or 'builtin:<name>'."""
    spec = config.input_path
    if spec.startswith("builtin:"):
        name = spec.split(":", 1)[1]
        factory = lazy.BUILTIN_ORACLES.get(name)
        if factory is None:
            raise UsageError(
                f"unknown built-in oracle {name!r}; known: {sorted(lazy.BUILTIN_ORACLES)}"
            )
        return factory(), None
    inst = _load_finite(spec)
    return lazy.FiniteStateOracle(inst), inst


def cmd_lazy(config: RunConfig, state: str | None, declared: int, sample_state: bool) -> int:
    oracle, inst = _resolve_oracle(config)
    if config.budget is not None:
        K = config.budget
    else:
        K = lazy.sample_budget(
            oracle.n_types, oracle.n_actions, config.epsilon, config.delta
        )
    rng = np.random.default_rng(config.seed)
    if sample_state:
        realized = oracle.sample_states(rng, 1)[0]
    elif state is not None:
        try:
            realized = inst.state_index(state) if inst is not None else float(state)
        except (KeyError, ValueError) as exc:
            raise UsageError(f"bad --state: {exc}") from exc
    else:
        raise UsageError("provide --state or --sample-state")
    try:
        signal, price, transcript = lazy.run_lazy_experiment(
            oracle, declared, realized, K, rng=rng, seed=config.seed,
            delta=config.delta or 0.1,
        )
    except lazy.LazyRunError as exc:
        _emit({"status": exc.status}, config)
        return _status_exit(exc.status)
    payload = {
        "K": K,
        "signal": inst.actions[signal] if inst is not None else signal,
        "price": price,
        "transcript": transcript.to_dict(),
    }
    _emit(payload, config)
    return EXIT_OK


def cmd_lazy_revenue(config: RunConfig, jobs: int) -> int:
    oracle, inst = _resolve_oracle(config)
    if config.budget is not None:
        K = config.budget
    else:
        K = lazy.sample_budget(
            oracle.n_types, oracle.n_actions, config.epsilon, config.delta
        )
    est = lazy.estimate_mechanism_revenue(
        oracle, K, config.trials, seed=config.seed, jobs=jobs
    )
    payload = {
        "K": K,
        "trials": config.trials,
        "estimate": est.to_dict(),
        "epsilon": config.epsilon,
    }
    if inst is not None:
        payload["exact_revenue"] = menu_lp.solve_exact(inst).objective
    _emit(payload, config)
    return EXIT_OK


def cmd_gaussian(config: RunConfig, lift: bool, check_surplus: bool) -> int:
    inst = _load_gaussian(config.input_path)
    sol = gaussian.solve_menu_sdp(inst)
    if sol.status != conic.STATUS_OPTIMAL:
        _emit({"status": sol.status}, config)
        return _status_exit(sol.status)
    menu = gaussian.extract_rank_one(sol, inst)
    if lift:
        try:
            menu = gaussian.lift_to_deterministic(menu, inst)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    report = gaussian.evaluate_gaussian_menu(menu, inst, tol=config.tolerance or 1e-6)
    payload = {
        "status": sol.status,
        "revenue": sol.objective,
        "menu": menu.to_dict(),
        "qcqp_check": report.to_dict(),
    }
    if check_surplus:
        surplus = gaussian.check_full_surplus(inst)
        payload["full_surplus"] = {
            "separated": surplus.separated,
            "worst_pair": surplus.worst_pair,
            # a single type has no pairs; keep the JSON strict-parser-safe
            "margin": surplus.margin if np.isfinite(surplus.margin) else None,
            "full_surplus_revenue": gaussian.full_surplus_revenue(inst),
        }
    if config.grid_step is not None:
        grid = bench.gaussian_grid_oracle(inst, config.grid_step)
        payload["grid_oracle"] = {
            "revenue": grid.revenue,
            "gap_bound": grid.gap_bound,
            "n_candidates": grid.n_candidates,
        }
    _emit(payload, config)
    if not report.passed:
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_bench_diff(config: RunConfig, n: int, alpha: float) -> int:
    inst = bench.build_diff_value_instance(n, alpha)
    r_full = gaussian.full_surplus_revenue(inst)
    surplus = gaussian.check_full_surplus(inst)
    # Separated by construction, so the optimal menu extracts full surplus and
    # no solver needs to run; the SDP cross-check happens in the test suite.
    r_menu = r_full if surplus.separated else None
    r_one = bench.single_item_full_revelation_revenue(inst)
    payload = {
        "n": n,
        "alpha": alpha,
        "revenue_single": r_one,
        "revenue_menu": r_menu,
        "revenue_full_info": r_full,
        "separated": surplus.separated,
        "ratio_single_to_menu": None if not r_menu else r_one / r_menu,
        "ratio_bound": None if alpha >= 1 else 1.0 / (n * (1.0 - alpha)),
        "ratio_bound_note": "bound 1/(n(1-alpha)) diverges at alpha=1" if alpha >= 1 else None,
    }
    _emit(payload, config)
    return EXIT_OK


def cmd_check(config: RunConfig, menu_path: str) -> int:
    inst = _load_finite(config.input_path)
    try:
        with open(menu_path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        entries = [
            MenuEntry(
                Experiment(
                    signals=tuple(e.get("signals", inst.actions)),
                    kernel=np.asarray(e["kernel"], dtype=float),
                ),
                float(e["price"]),
            )
            for e in data["entries"]
        ]
        menu = Menu.build(entries, inst.type_dist)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot load menu from {menu_path}: {exc}") from exc
    responsive = all(
        e.experiment.signals == inst.actions for e in menu.entries
    )
    report = bench.check_ic_ir(
        inst, menu, tol=config.tolerance or 1e-6, responsive=responsive
    )
    payload = {"ic_ir": report.to_dict(), "responsive_reading": responsive}
    if responsive:
        payload["obedience"] = bench.check_obedience(
            inst, menu, tol=config.tolerance or 1e-6
        ).to_dict()
    _emit(payload, config)
    return EXIT_OK if report.passed else EXIT_INFEASIBLE


def cmd_gen_corpus(config: RunConfig) -> int:
    manifest = bench.build_corpus_manifest(progress=False)
    path = config.output_path or str(bench.default_manifest_path())
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="infomenu",
        description="Revenue-maximizing menus of statistical experiments.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, needs_input=True):
        if needs_input:
            p.add_argument("instance", help="instance JSON path")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--output", default=None, help="write JSON here instead of stdout")
        p.add_argument("--tolerance", type=float, default=None, help="check tolerance")

    p = sub.add_parser("solve-exact", help="solve the menu LP under the true prior")
    add_common(p)

    p = sub.add_parser("lazy", help="run the sample-based mechanism once")
    add_common(p)
    p.add_argument("--type", type=int, required=True, dest="declared")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--state", default=None, help="realized state identifier")
    group.add_argument("--sample-state", action="store_true")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--budget", type=int, default=None, help="override the sample budget K")

    p = sub.add_parser("lazy-revenue", help="Monte Carlo revenue of the mechanism")
    add_common(p)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("gaussian", help="solve the scalar-experiment menu SDP")
    add_common(p)
    p.add_argument("--lift", action="store_true", help="lift to deterministic experiments")
    p.add_argument("--check-surplus", action="store_true")
    p.add_argument("--grid-check", type=float, default=None, dest="grid_step",
                   help="cross-check against the grid oracle at this step")

    p = sub.add_parser("bench-diff", help="differentiated-products benchmark family")
    add_common(p, needs_input=False)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--alpha", type=float, default=0.1)

    p = sub.add_parser("check", help="verify a menu file against an instance")
    add_common(p)
    p.add_argument("--menu", required=True, help="menu JSON path")

    p = sub.add_parser("gen-corpus", help="regenerate the pinned corpus manifest")
    add_common(p, needs_input=False)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage problems; remap to the documented code.
        if exc.code not in (0, None):
            return EXIT_USAGE
        return 0

    config = RunConfig(
        command=args.command,
        input_path=getattr(args, "instance", None),
        epsilon=getattr(args, "epsilon", None),
        delta=getattr(args, "delta", None),
        budget=getattr(args, "budget", None),
        trials=getattr(args, "trials", None),
        seed=args.seed,
        grid_step=getattr(args, "grid_step", None),
        output_path=args.output,
        tolerance=args.tolerance,
    )
    try:
        if config.epsilon is not None and not 0 < config.epsilon < 1:
            raise UsageError("--epsilon must be in (0, 1)")
        if config.delta is not None and not 0 < config.delta < 1:
            raise UsageError("--delta must be in (0, 1)")
        if args.command == "solve-exact":
            return cmd_solve_exact(config)
        if args.command == "lazy":
            return cmd_lazy(config, args.state, args.declared, args.sample_state)
        if args.command == "lazy-revenue":
            return cmd_lazy_revenue(config, args.jobs)
        if args.command == "gaussian":
            return cmd_gaussian(config, args.lift, args.check_surplus)
        if args.command == "bench-diff":
            return cmd_bench_diff(config, args.n, args.alpha)
        if args.command == "check":
            return cmd_check(config, args.menu)
        if args.command == "gen-corpus":
            return cmd_gen_corpus(config)
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
