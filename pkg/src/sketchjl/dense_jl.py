"""Dense sign matrices with r-wise independent entries.

Entry ``(i, j)`` of the ``k x d`` matrix is ``sign(i*d + j) / sqrt(k)`` where
``sign`` is one r-wise independent family over ``[k*d] -> {-1, +1}``. The
matrix is generated block-of-rows at a time and never stored.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, ShapeError, UnsupportedParametersError
from .field_hash import DEFAULT_PRIME, PolyHashFamily, field_bits, sample_family

PAPER_DENSE_CONSTANT = 4 * 64**2
DEFAULT_C_K = 4.0

# entries generated per block when applying implicitly
_BLOCK_ENTRIES = 1 << 20


class AnalysisConstantsWarning(UserWarning):
    """Raised when a plan uses the proof constants, which are far from tight."""


def check_eps_delta(epsilon: float, delta: float) -> None:
    # epsilon = 1/2 itself is accepted; desk experiments run at that value
    if not 0 < epsilon <= 0.5:
        raise InvalidParameterError(f"epsilon must lie in (0, 1/2], got {epsilon}")
    if not 0 < delta < 0.5:
        raise InvalidParameterError(f"delta must lie in (0, 1/2), got {delta}")


def sign_order(delta: float) -> int:
    """Even independence order ``2*ceil(log2(1/delta))`` for the sign entries."""
    return 2 * math.ceil(math.log2(1 / delta))


@dataclass(frozen=True)
class DenseJLParams:
    epsilon: float
    delta: float
    k: int
    r: int
    profile: str = "practical"

    def __post_init__(self):
        if self.k < 1:
            raise InvalidParameterError(f"k must be >= 1, got {self.k}")
        if self.r < 2 or self.r % 2:
            raise InvalidParameterError(f"r must be even and >= 2, got {self.r}")

    def to_dict(self) -> dict:
        return {"epsilon": self.epsilon, "delta": self.delta, "k": self.k, "r": self.r, "profile": self.profile}


def plan_dense(epsilon: float, delta: float, profile: str = "practical", c_k: float = DEFAULT_C_K) -> DenseJLParams:
    """Target dimension and independence order for a dense sign matrix.

    ``practical``: ``k = ceil(c_k * eps^-2 * ln(1/delta))``.
    ``paper``: ``k = ceil(4 * 64^2 * eps^-2 * log2(1/delta))``.
    Both use ``r = 2 * ceil(log2(1/delta))``.
    """
    check_eps_delta(epsilon, delta)
    if profile == "practical":
        k = math.ceil(c_k * math.log(1 / delta) / epsilon**2)
    elif profile in ("paper", "paper-faithful"):
        k = math.ceil(PAPER_DENSE_CONSTANT * math.log2(1 / delta) / epsilon**2)
        warnings.warn("paper constants are analysis-grade; k is very large", AnalysisConstantsWarning, stacklevel=2)
        profile = "paper"
    else:
        raise InvalidParameterError(f"unknown dense profile {profile!r}")
    return DenseJLParams(epsilon, delta, k, sign_order(delta), profile)


class DenseJLMatrix:
    """Implicit ``k x d`` matrix of ``+-1/sqrt(k)`` entries."""

    def __init__(self, params: DenseJLParams, d: int, entry_family: PolyHashFamily):
        if d < 1:
            raise InvalidParameterError(f"d must be >= 1, got {d}")
        if entry_family.domain_size != params.k * d or entry_family.range_size != 2:
            raise InvalidParameterError("entry family must map [k*d] to 2 values")
        self.params = params
        self.d = d
        self.entry_family = entry_family
        self.entry_scale = 1.0 / math.sqrt(params.k)

    @property
    def k(self) -> int:
        return self.params.k

    @property
    def shape(self) -> tuple[int, int]:
        return (self.params.k, self.d)

    def seed_bits(self) -> int:
        return self.entry_family.seed_bits

    def _rows(self, start: int, stop: int) -> np.ndarray:
        idx = np.arange(start * self.d, stop * self.d, dtype=np.int64)
        signs = self.entry_family.sign_batch(idx).reshape(stop - start, self.d)
        return signs * self.entry_scale

    def apply(self, x) -> np.ndarray:
        """``A @ x`` for a vector of length ``d`` or a ``(d, q)`` stack of vectors."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim not in (1, 2) or x.shape[0] != self.d:
            raise ShapeError(f"expected leading dimension {self.d}, got shape {x.shape}")
        k = self.params.k
        step = max(1, _BLOCK_ENTRIES // self.d)
        if step >= k:
            return self._rows(0, k) @ x
        out = np.empty((k,) + x.shape[1:])
        for start in range(0, k, step):
            stop = min(k, start + step)
            out[start:stop] = self._rows(start, stop) @ x
        return out

    def materialize(self) -> np.ndarray:
        """Explicit matrix built entry by entry from the reference evaluator."""
        k, d = self.shape
        fam = self.entry_family
        out = np.empty((k, d))
        for i in range(k):
            for j in range(d):
                out[i, j] = fam.sign_eval(i * d + j) * self.entry_scale
        return out


def sample_dense(params: DenseJLParams, d: int, seed: bytes, p: int = DEFAULT_PRIME) -> DenseJLMatrix:
    n = params.k * d
    if n > p:
        raise UnsupportedParametersError(f"k*d = {n} exceeds the field size")
    return DenseJLMatrix(params, d, sample_family(params.r, n, 2, seed, p))


def apply_dense(A: DenseJLMatrix, x) -> np.ndarray:
    return A.apply(x)


def dense_seed_bits(r: int, p: int = DEFAULT_PRIME) -> int:
    return r * field_bits(p)
