"""Validate the permutation structure of the coupling flows against quadrature.

One mode (m = 2 of N = 4) is integrated by Gauss-Hermite quadrature of the
one-loop integrand and every quartic and sextic coupling of the result is read
off a complex torus. The explicit increments (flow_g4, flow_g6) must match.
Competing hypotheses for the two uncertain coefficients are evaluated on the
same data and reported alongside: weight 1 instead of 2 on the triple
product, and a 1/beta factor on the tree term.
"""

from __future__ import annotations

import math

from .core import FlowParams
from .coupling_flow import CouplingTable, flow_g4, flow_g6, loop_increment, tree_increment
from .generalized_flow import GeneralizedPotential, brute_force_couplings

TOLERANCE = 1e-6

# quadratic, quartic, sextic, octic derivatives at the origin
PROBE_TABLES = {
    "quartic": [0.0, 0.0, 1.0, 0.0, 0.7],
    "quartic_sextic": [0.0, 0.0, 1.3, 0.0, 0.5, 0.0, 0.4],
    "quartic_sextic_octic": [0.0, 0.0, 0.8, 0.0, 0.6, 0.0, -0.3, 0.0, 0.9],
}


def _weight_one(r: int) -> int:
    return (-1) ** (r - 1)


def seed_check(beta: float = 3.0, tol: float = TOLERANCE) -> dict:
    """Run all probes; returns a report dict with a top-level ``passed`` flag."""
    params = FlowParams.from_beta(4, beta)
    m = 2
    rows = []
    alt = []
    for name, derivs in PROBE_TABLES.items():
        order = 8
        t = CouplingTable.from_local(derivs, m, order)
        bf = brute_force_couplings(GeneralizedPotential.from_table(t), m, params)
        for k in sorted(bf, key=lambda k: (len(k), k)):
            if len(k) not in (4, 6):
                continue
            oracle = bf[k] - t.get(k)
            if len(k) == 4:
                formula = flow_g4(t, k, m, params)
            else:
                formula = flow_g6(t, k, m, params)
            rows.append({"table": name, "momenta": list(k), "formula": formula, "oracle": oracle,
                         "abs_error": abs(formula - oracle), "passed": abs(formula - oracle) <= tol})
            if len(k) == 6:
                loop1 = loop_increment(t, k, m, params, weights=_weight_one)
                tree = tree_increment(t, k, m, params)
                loop = loop_increment(t, k, m, params)
                alt.append({"table": name, "momenta": list(k), "oracle": oracle,
                            "triple_weight_one": loop1 + tree,
                            "tree_over_beta": loop + tree / params.beta})
    passed = all(r["passed"] for r in rows)

    def worst(key):
        return max((abs(a[key] - a["oracle"]) for a in alt), default=0.0)

    return {
        "passed": passed,
        "tolerance": tol,
        "beta": beta,
        "n_checks": len(rows),
        "max_abs_error": max(r["abs_error"] for r in rows),
        "checks": rows,
        "alternatives": {
            "triple_weight_one_max_error": worst("triple_weight_one"),
            "tree_over_beta_max_error": worst("tree_over_beta"),
            "details": alt,
        },
        "counts": {
            "quartic_pairings": 3,
            "sextic_two_block_partitions": 15,
            "sextic_three_pair_partitions": 15,
            "sextic_three_pair_weight": 2,
            "sextic_tree_ordered_splits": math.comb(6, 3),
        },
    }
