"""Gradual dimension reduction through a chain of dense sign embeddings.

With per-stage failure probability ``delta'`` and distortion ``eps'`` the
intermediate dimensions are ``k_j = ceil(eps'^-2 * t_j)`` where
``t_j = (1/delta')^(1/2^j)``, so each stage squares away half of the
exponent. Stage ``j`` needs only ``r_j ~ log2(1/delta')^2 / t_j``-wise
independent entries, which is what makes the chain cheaper in seed than a
single ``log(1/delta)``-wise independent matrix on huge inputs. A final stage
lands in ``final_k = ceil(c_k * eps'^-2 * log2(1/delta'))``.

Planning rules:

* a level ``j`` is a candidate while the previous ``t_{j-1}`` exceeds the stop
  threshold ``c_stop * log2(1/delta')^3``;
* a candidate is kept only when ``final_k < k_j < d`` (never embed upward,
  dimensions strictly decrease);
* ``delta' = delta / (j_star + 1)`` and ``eps' = eps / (2 * (j_star + 1))``
  with ``j_star`` the number of kept levels, resolved by fixed-point
  iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dense_jl import DEFAULT_C_K, DenseJLMatrix, DenseJLParams, check_eps_delta, sample_dense
from .errors import InvalidParameterError, ShapeError
from .field_hash import DEFAULT_PRIME, derive_seed, field_bits

DEFAULT_C_STOP = 1.0
DEFAULT_C_R = 1.0
_MAX_FIXED_POINT_ROUNDS = 6


@dataclass(frozen=True)
class CascadeStage:
    k: int
    r: int
    # None for the final stage
    t: float | None = None


@dataclass(frozen=True)
class CascadePlan:
    epsilon: float
    delta: float
    d: int
    eps_prime: float
    delta_prime: float
    stages: tuple[CascadeStage, ...]
    j_star: int
    final_k: int
    total_seed_bits: int
    start_level: int | None
    t_values: tuple[float, ...] = field(default=())
    p: int = DEFAULT_PRIME

    @property
    def dims(self) -> list[int]:
        """Dimension chain ``[d, k_1, ..., final_k]`` (just ``[d]`` when empty)."""
        return [self.d] + [s.k for s in self.stages]

    @property
    def output_dim(self) -> int:
        return self.stages[-1].k if self.stages else self.d

    def to_dict(self) -> dict:
        return {
            "eps": self.epsilon,
            "delta": self.delta,
            "d": self.d,
            "eps_prime": self.eps_prime,
            "delta_prime": self.delta_prime,
            "stages": [{"k": s.k, "r": s.r} for s in self.stages],
            "j_star": self.j_star,
            "final_k": self.final_k,
            "total_seed_bits": self.total_seed_bits,
            "start_level": self.start_level,
            "t_values": list(self.t_values),
        }


def t_sequence(delta_prime: float, stop: float = 2.0) -> list[float]:
    """``t_1, t_2, ...`` for ``t_j = (1/delta')^(1/2^j)``, up to the first ``t_j <= stop``.

    Computed by repeated square roots, so powers of two come out exact.
    """
    if not 0 < delta_prime < 1:
        raise InvalidParameterError(f"delta' must lie in (0, 1), got {delta_prime}")
    t = 1.0 / delta_prime
    out = []
    while t > stop:
        t = math.sqrt(t)
        out.append(t)
    return out


def stage_order(lg: float, t: float, c_r: float = DEFAULT_C_R) -> int:
    """Even independence order ``2*ceil(c_r * lg^2 / t)``, at least 2."""
    return max(2, 2 * math.ceil(c_r * lg * lg / t))


def _layout(epsilon, delta, d, guess, c_k, c_stop, c_r):
    delta_p = delta / (guess + 1)
    eps_p = epsilon / (2 * (guess + 1))
    lg = math.log2(1 / delta_p)
    inv2 = (1.0 / eps_p) ** 2
    final_k = math.ceil(c_k * inv2 * lg)
    threshold = c_stop * lg**3
    t_values = tuple(t_sequence(delta_p))
    levels = []
    start = None
    prev = 1.0 / delta_p
    j = 0
    while prev > threshold:
        j += 1
        t = math.sqrt(prev)
        kj = math.ceil(inv2 * t)
        if kj < d and start is None:
            start = j
        if final_k < kj < d:
            levels.append(CascadeStage(kj, stage_order(lg, t, c_r), t))
        prev = t
    return delta_p, eps_p, lg, final_k, levels, start, t_values


def plan_cascade(
    epsilon: float,
    delta: float,
    d: int,
    *,
    c_k: float = DEFAULT_C_K,
    c_stop: float = DEFAULT_C_STOP,
    c_r: float = DEFAULT_C_R,
    p: int = DEFAULT_PRIME,
) -> CascadePlan:
    """Stage schedule and seed ledger for embedding ``R^d`` with ``(epsilon, delta)``.

    Returns the identity plan (no stages) when ``d <= final_k``.
    """
    check_eps_delta(epsilon, delta)
    if d < 1:
        raise InvalidParameterError(f"d must be >= 1, got {d}")
    guess = 0
    seen = set()
    for _ in range(_MAX_FIXED_POINT_ROUNDS):
        layout = _layout(epsilon, delta, d, guess, c_k, c_stop, c_r)
        count = len(layout[4])
        if count <= guess or count in seen:
            # guess already covers every kept level: budget split is valid
            guess = max(guess, count)
            break
        seen.add(count)
        guess = count
    delta_p, eps_p, lg, final_k, levels, start, t_values = _layout(epsilon, delta, d, guess, c_k, c_stop, c_r)
    if d <= final_k:
        return CascadePlan(epsilon, delta, d, eps_p, delta_p, (), 0, final_k, 0, start, t_values, p)
    stages = tuple(levels) + (CascadeStage(final_k, stage_order(lg, lg, c_r)),)
    bits = sum(s.r for s in stages) * field_bits(p)
    return CascadePlan(epsilon, delta, d, eps_p, delta_p, stages, len(levels), final_k, bits, start, t_values, p)


def cascade_seed_bits(plan: CascadePlan, p: int | None = None) -> int:
    """Sum of ``r_j * ceil(log2 p)`` over all stages."""
    return sum(s.r for s in plan.stages) * field_bits(plan.p if p is None else p)


def scaled_seed_bits(plan: CascadePlan) -> int:
    """Seed bits when each stage's field is just large enough for its domain.

    Stage ``j`` draws ``r_j`` elements of a field of size ``>= k_{j-1} * k_j``.
    """
    dims = plan.dims
    return sum(s.r * math.ceil(math.log2(dims[i] * s.k)) for i, s in enumerate(plan.stages))


class CascadeTransform:
    def __init__(self, plan: CascadePlan, matrices: list[DenseJLMatrix]):
        dims = plan.dims
        if len(matrices) != len(plan.stages):
            raise InvalidParameterError("one matrix per stage is required")
        for i, m in enumerate(matrices):
            if m.shape != (dims[i + 1], dims[i]):
                raise InvalidParameterError(f"stage {i} has shape {m.shape}, expected {(dims[i + 1], dims[i])}")
        self.plan = plan
        self.matrices = list(matrices)

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim not in (1, 2) or x.shape[0] != self.plan.d:
            raise ShapeError(f"expected leading dimension {self.plan.d}, got shape {x.shape}")
        y = x.copy()
        for m in self.matrices:
            y = m.apply(y)
        return y


def sample_cascade(plan: CascadePlan, seed: bytes) -> CascadeTransform:
    dims = plan.dims
    mats = []
    for i, s in enumerate(plan.stages):
        params = DenseJLParams(plan.eps_prime, plan.delta_prime, s.k, s.r, "cascade")
        mats.append(sample_dense(params, dims[i], derive_seed(seed, "stage", i), plan.p))
    return CascadeTransform(plan, mats)


def apply_cascade(t: CascadeTransform, x) -> np.ndarray:
    return t.apply(x)


def custom_plan(d: int, stages, p: int = DEFAULT_PRIME) -> CascadePlan:
    """Plan with a hand-picked ``[(k, r), ...]`` schedule, for experiments and tests."""
    st = tuple(CascadeStage(int(k), int(r)) for k, r in stages)
    bits = sum(s.r for s in st) * field_bits(p)
    final_k = st[-1].k if st else d
    return CascadePlan(float("nan"), float("nan"), d, float("nan"), float("nan"), st, max(0, len(st) - 1), final_k, bits, None, (), p)
