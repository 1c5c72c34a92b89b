"""Seed-length comparison between a cascade and one dense sign matrix.

Two accountings are reported. ``*_field_bits`` charges every drawn
coefficient the full ``ceil(log2 p)`` bits of the 2^61-1 field.
``*_scaled_bits`` charges ``ceil(log2 n)`` bits where ``n`` is the domain of
the family that uses it, i.e. a field just large enough for that stage; only
this accounting exposes the ``log d`` versus ``log(1/delta) * log d`` gap.
"""

from __future__ import annotations

import math

from .cascade import plan_cascade, scaled_seed_bits
from .dense_jl import plan_dense
from .field_hash import DEFAULT_PRIME, field_bits

EPS_GRID = (0.1, 0.25)
DELTA_GRID = (2.0**-10, 2.0**-20, 2.0**-32, 2.0**-64)
D_GRID = (10**6, 10**9, 2**40)


def crossover_row(epsilon: float, delta: float, d: int) -> dict:
    dense = plan_dense(epsilon, delta)
    plan = plan_cascade(epsilon, delta, d)
    dense_scaled = dense.r * math.ceil(math.log2(dense.k * d))
    casc_scaled = scaled_seed_bits(plan)
    dims = plan.dims
    instantiable = all(dims[i] * s.k <= DEFAULT_PRIME for i, s in enumerate(plan.stages))
    return {
        "epsilon": epsilon,
        "delta": delta,
        "d": d,
        "dense_k": dense.k,
        "dense_r": dense.r,
        "dense_field_bits": dense.r * field_bits(),
        "dense_scaled_bits": dense_scaled,
        "cascade_stages": [[s.k, s.r] for s in plan.stages],
        "cascade_field_bits": plan.total_seed_bits,
        "cascade_scaled_bits": casc_scaled,
        "cascade_wins": bool(plan.stages) and casc_scaled < dense_scaled,
        "instantiable": instantiable,
    }


def crossover_table(eps_grid=EPS_GRID, delta_grid=DELTA_GRID, d_grid=D_GRID) -> list[dict]:
    return [crossover_row(e, dl, d) for e in eps_grid for dl in delta_grid for d in d_grid]


def format_crossover(rows) -> str:
    head = "| eps | log2(1/delta) | log2 d | dense bits | cascade bits | stages | cascade wins |"
    lines = [head, "|" + "---|" * 7]
    for r in rows:
        lines.append(
            "| {} | {:g} | {:.1f} | {} | {} | {} | {} |".format(
                r["epsilon"],
                math.log2(1 / r["delta"]),
                math.log2(r["d"]),
                r["dense_scaled_bits"],
                r["cascade_scaled_bits"],
                len(r["cascade_stages"]),
                "yes" if r["cascade_wins"] else "no",
            )
        )
    return "\n".join(lines) + "\n"
