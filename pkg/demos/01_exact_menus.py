"""Selling information with a menu: exact solves on small finite instances.

A seller who observes the state posts a menu of signaling schemes with
prices. Each buyer type picks the entry maximizing its expected utility net
of price. This script solves the revenue-maximization LP exactly and pokes
at the solution.
"""

import numpy as np

from infomenu import (
    FiniteInstance,
    baseline_utility,
    check_ic_ir,
    check_obedience,
    finite_single_experiment_revenue,
    full_info_revenue,
    full_information_value,
    solve_exact,
)
from infomenu.bench import random_instance

# The classic warm-up: two equally likely states, two actions, a single type
# that gets utility 1 for matching the action to the state.
matching = FiniteInstance(
    states=("rain", "sun"),
    prior=np.array([0.5, 0.5]),
    actions=("umbrella", "shades"),
    utilities=np.eye(2)[None, :, :],
    type_dist=np.array([1.0]),
)

report = solve_exact(matching)
print("== matching instance ==")
print(f"revenue: {report.objective:.4f} (baseline {baseline_utility(matching, 0):.2f},"
      f" full information {full_information_value(matching, 0):.2f})")
print("optimal kernel (rows = states, cols = recommended actions):")
print(np.round(report.menu.entries[0].experiment.kernel, 6))

# With one type the seller extracts exactly the full-information surplus; the
# interesting screening happens with heterogeneous types.
inst = random_instance(n=3, m=2, num_states=3, seed=62)
report = solve_exact(inst)
print("\n== three-type random instance ==")
print(f"revenue: {report.objective:.6f}")
for i, entry in enumerate(report.menu.entries):
    print(f"type {i}: price {entry.price:.6f}")
print("IC/IR check:", check_ic_ir(inst, report.menu).passed)
print("obedience check:", check_obedience(inst, report.menu).passed)

# How much of the gap between "one product" and "omniscient seller" does the
# menu close?
r_one = finite_single_experiment_revenue(inst)
r_full = full_info_revenue(inst)
print(f"\nsingle fully revealing product: {r_one:.6f}")
print(f"optimal menu:                   {report.objective:.6f}")
print(f"no information asymmetry:       {r_full:.6f}")
closed = (report.objective - r_one) / (r_full - r_one)
print(f"menu closes {100 * closed:.1f}% of the gap")
