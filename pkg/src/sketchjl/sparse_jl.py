"""Sparse JL embedding with bounded-independence hashing, and its streaming sketch.

The embedding is ``A @ Q`` where ``Q`` replicates each input coordinate
``alpha`` times scaled by ``c = 1/sqrt(alpha)`` (the spreader), and ``A`` is a
``k x (d*alpha)`` matrix with a single ``+-1`` per column: column ``u`` has
``sign(u)`` in row ``h(u)``. ``h`` is ``r_h``-wise independent and ``sign`` is
``r_sigma``-wise independent. Neither matrix is ever formed; replica ``i`` of
input coordinate ``j`` (both 0-based) is spread index ``u = j*alpha + i``.

All indices in this API are 0-based. The text file formats in
:mod:`sketchjl.formats` are 1-based.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .dense_jl import AnalysisConstantsWarning, check_eps_delta, sign_order
from .errors import DomainOverflowError, InvalidParameterError, ShapeError, UnsupportedParametersError
from .field_hash import (
    DEFAULT_PRIME,
    MERSENNE_61,
    PolyHashFamily,
    derive_seed,
    field_bits,
    parse_seed,
    sample_family,
)

PAPER_SPARSE_CONSTANT = 28 * 64**2
DEFAULT_C_K = 4.0
DEFAULT_C_ALPHA = 1.0
DEFAULT_C_H = 1.0
DEFAULT_VARIANT_EXPONENT = 2.0


def next_pow2(v: float) -> int:
    n = 1
    while n < v:
        n *= 2
    return n


@dataclass(frozen=True)
class SparseParams:
    d: int
    k: int
    alpha: int
    r_h: int
    r_sigma: int
    epsilon: float | None = None
    delta: float | None = None
    profile: str = "custom"
    variant: str = "main"
    p: int = DEFAULT_PRIME

    def __post_init__(self):
        if self.d < 1 or self.k < 1:
            raise InvalidParameterError("d and k must be positive")
        if self.alpha < 1 or self.alpha & (self.alpha - 1):
            raise InvalidParameterError(f"alpha must be a power of 2, got {self.alpha}")
        if self.r_h < 1 or self.r_sigma < 1:
            raise InvalidParameterError("independence orders must be positive")
        if self.D > self.p or self.k > self.p:
            raise DomainOverflowError(f"spread dimension D={self.D} or k={self.k} exceeds the field size")

    @property
    def c(self) -> float:
        return 1.0 / math.sqrt(self.alpha)

    @property
    def D(self) -> int:
        return self.d * self.alpha

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "delta": self.delta,
            "d": self.d,
            "k": self.k,
            "alpha": self.alpha,
            "c": self.c,
            "D": self.D,
            "r_h": self.r_h,
            "r_sigma": self.r_sigma,
            "p": self.p,
            "profile": self.profile,
            "variant": self.variant,
            "seed_bits": seed_bits_for(self.r_h, self.r_sigma, self.p),
        }


def plan_sparse(
    epsilon: float,
    delta: float,
    d: int,
    profile: str = "practical",
    variant: str = "main",
    *,
    c_k: float = DEFAULT_C_K,
    c_alpha: float = DEFAULT_C_ALPHA,
    c_h: float = DEFAULT_C_H,
    variant_exponent: float = DEFAULT_VARIANT_EXPONENT,
    p: int = DEFAULT_PRIME,
) -> SparseParams:
    """Choose ``k``, ``alpha``, ``r_h`` and ``r_sigma`` for target ``(epsilon, delta)``.

    ``profile`` selects the constant in ``k``: ``practical`` uses
    ``c_k * eps^-2 * log2(1/delta)``, ``paper`` uses ``28 * 64^2`` in place of
    ``c_k``. ``variant`` selects the shape of ``alpha`` and ``r_h``:

    * ``main``: ``alpha >= c_alpha/eps * log2(1/delta) * log2(k/delta)``,
      ``r_h = 2*ceil(c_h * log2(k/delta))``.
    * ``variant``: ``alpha >= c_alpha/eps * log2(1/delta)^2 * eps^(-2*variant_exponent/log2(1/delta))``,
      ``r_h = 2*ceil(c_h * log2(1/delta))``.

    ``alpha`` is rounded up to a power of two; ``c = 1/sqrt(alpha)`` is then
    an exact dyadic value whenever ``alpha`` is a power of four.
    """
    check_eps_delta(epsilon, delta)
    if d < 1:
        raise InvalidParameterError(f"d must be >= 1, got {d}")
    inv_eps = 1.0 / epsilon
    lg = math.log2(1 / delta)
    if profile == "practical":
        k = math.ceil(c_k * inv_eps**2 * lg)
    elif profile in ("paper", "paper-faithful"):
        k = math.ceil(PAPER_SPARSE_CONSTANT * inv_eps**2 * lg)
        warnings.warn("paper constants are analysis-grade; k is very large", AnalysisConstantsWarning, stacklevel=2)
        profile = "paper"
    else:
        raise InvalidParameterError(f"unknown sparse profile {profile!r}")
    lgk = math.log2(k / delta)
    if variant == "main":
        alpha = next_pow2(c_alpha * inv_eps * lg * lgk)
        r_h = 2 * math.ceil(c_h * lgk)
    elif variant == "variant":
        alpha = next_pow2(c_alpha * inv_eps * lg**2 * epsilon ** (-2 * variant_exponent / lg))
        r_h = 2 * math.ceil(c_h * lg)
    else:
        raise InvalidParameterError(f"unknown sparse variant {variant!r}")
    return SparseParams(d, k, alpha, r_h, sign_order(delta), epsilon, delta, profile, variant, p)


def seed_bits_for(r_h: int, r_sigma: int, p: int = DEFAULT_PRIME) -> int:
    return (r_h + r_sigma) * field_bits(p)


def spread(x, params: SparseParams) -> np.ndarray:
    """Replicate every coordinate ``alpha`` times, scaled by ``c``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (params.d,):
        raise ShapeError(f"expected a vector of length {params.d}, got shape {x.shape}")
    return np.repeat(x * params.c, params.alpha)


class SparseJLTransform:
    """A seeded sparse embedding ``R^d -> R^k``.

    ``hash_evaluations`` counts evaluations of ``h`` and ``sign`` made by
    :meth:`apply` and by sketches built on this transform.
    """

    def __init__(self, params: SparseParams, h: PolyHashFamily, sigma: PolyHashFamily):
        if h.domain_size != params.D or h.range_size != params.k:
            raise InvalidParameterError("h must map [D] to [k]")
        if sigma.domain_size != params.D or sigma.range_size != 2:
            raise InvalidParameterError("sigma must map [D] to 2 values")
        if h.r != params.r_h or sigma.r != params.r_sigma:
            raise InvalidParameterError("family degrees disagree with the parameters")
        self.params = params
        self.h = h
        self.sigma = sigma
        self.hash_evaluations = 0

    @property
    def k(self) -> int:
        return self.params.k

    @property
    def d(self) -> int:
        return self.params.d

    def seed_bits(self) -> int:
        return seed_bits(self)

    def _coords(self, x):
        """Normalize input to parallel arrays of 0-based indices and values."""
        if _looks_dense(x):
            arr = np.asarray(x, dtype=np.float64)
            if arr.shape != (self.params.d,):
                raise ShapeError(f"expected a vector of length {self.params.d}, got shape {arr.shape}")
            js = np.flatnonzero(arr)
            return js.astype(np.int64), arr[js]
        pairs = list(x)
        js = np.array([int(j) for j, _ in pairs], dtype=np.int64)
        vs = np.array([float(v) for _, v in pairs], dtype=np.float64)
        if js.size and (js.min() < 0 or js.max() >= self.params.d):
            bad = int(np.flatnonzero((js < 0) | (js >= self.params.d))[0])
            raise ShapeError(f"coordinate {int(js[bad])} at position {bad} outside [0, {self.params.d})")
        return js, vs

    def _scatter(self, js, vs, y):
        prm = self.params
        if self.h.p != MERSENNE_61:
            self._scatter_reference(js, vs, y)
        else:
            _kernels.sparse_scatter(
                self.h._coeff_array, self.sigma._coeff_array, prm.k, prm.alpha, prm.c, js, vs, y
            )
        self.hash_evaluations += 2 * prm.alpha * len(js)

    def _scatter_reference(self, js, vs, y):
        prm = self.params
        c = prm.c
        for j, v in zip(js.tolist(), vs.tolist()):
            cv = c * v
            for i in range(prm.alpha):
                u = j * prm.alpha + i
                row = self.h.eval(u)
                if self.sigma.eval(u):
                    y[row] -= cv
                else:
                    y[row] += cv

    def apply(self, x) -> np.ndarray:
        """Embed ``x``, a dense vector of length ``d`` or an iterable of ``(j, v)`` pairs.

        Only the ``alpha * nnz`` spread coordinates are touched. A coordinate
        list may repeat indices; terms are accumulated in list order.
        """
        js, vs = self._coords(x)
        y = np.zeros(self.params.k)
        self._scatter(js, vs, y)
        return y

    def hash_columns(self) -> tuple[np.ndarray, np.ndarray]:
        """Row index and sign of every column of ``A`` (length ``D`` each)."""
        u = np.arange(self.params.D, dtype=np.int64)
        return self.h.eval_batch(u), self.sigma.sign_batch(u)

    def hash_matrix(self) -> np.ndarray:
        """Explicit ``k x D`` matrix ``A`` from the reference evaluator."""
        prm = self.params
        out = np.zeros((prm.k, prm.D))
        for u in range(prm.D):
            out[self.h.eval(u), u] = self.sigma.sign_eval(u)
        return out

    def spreader_matrix(self) -> np.ndarray:
        prm = self.params
        q = np.zeros((prm.D, prm.d))
        for j in range(prm.d):
            q[j * prm.alpha : (j + 1) * prm.alpha, j] = prm.c
        return q

    def materialize(self) -> np.ndarray:
        """Explicit ``k x d`` product ``A @ Q``."""
        return self.hash_matrix() @ self.spreader_matrix()

    def to_descriptor(self) -> dict:
        prm = self.params
        return {
            "d": prm.d,
            "k": prm.k,
            "alpha": prm.alpha,
            "c": prm.c,
            "r_h": prm.r_h,
            "r_sigma": prm.r_sigma,
            "p": prm.p,
            "seed_h": self.h.seed.hex(),
            "seed_sigma": self.sigma.seed.hex(),
            "profile": prm.profile,
        }

    @classmethod
    def from_descriptor(cls, desc: dict) -> "SparseJLTransform":
        try:
            params = SparseParams(
                d=int(desc["d"]),
                k=int(desc["k"]),
                alpha=int(desc["alpha"]),
                r_h=int(desc["r_h"]),
                r_sigma=int(desc["r_sigma"]),
                profile=str(desc.get("profile", "custom")),
                p=int(desc.get("p", DEFAULT_PRIME)),
            )
            seed_h = parse_seed(desc["seed_h"])
            seed_sigma = parse_seed(desc["seed_sigma"])
        except KeyError as exc:
            raise InvalidParameterError(f"transform descriptor lacks {exc}") from exc
        if "c" in desc and not math.isclose(float(desc["c"]), params.c, rel_tol=1e-12):
            raise InvalidParameterError("descriptor c disagrees with 1/sqrt(alpha)")
        return sample_sparse_from_seeds(params, seed_h, seed_sigma)


def _looks_dense(x) -> bool:
    if isinstance(x, np.ndarray):
        return x.ndim == 1
    if isinstance(x, (list, tuple)):
        return bool(x) and not isinstance(x[0], (tuple, list, np.ndarray))
    return False


def sample_sparse_from_seeds(params: SparseParams, seed_h: bytes, seed_sigma: bytes) -> SparseJLTransform:
    if params.D > params.p:
        raise UnsupportedParametersError("spread dimension exceeds the field size")
    h = sample_family(params.r_h, params.D, params.k, seed_h, params.p)
    sigma = sample_family(params.r_sigma, params.D, 2, seed_sigma, params.p)
    return SparseJLTransform(params, h, sigma)


def sample_sparse(params: SparseParams, seed: bytes) -> SparseJLTransform:
    """Transform named by one master seed; ``h`` and ``sign`` get derived sub-seeds."""
    return sample_sparse_from_seeds(params, derive_seed(seed, "h"), derive_seed(seed, "sigma"))


def apply_sparse(t: SparseJLTransform, x) -> np.ndarray:
    return t.apply(x)


def seed_bits(t: SparseJLTransform) -> int:
    """Random bits naming ``t``: ``(r_h + r_sigma) * ceil(log2 p)``."""
    return seed_bits_for(t.params.r_h, t.params.r_sigma, t.params.p)


class TurnstileSketch:
    """Running embedding of a vector receiving additive updates ``x[j] += v``.

    ``y`` always equals the embedding of the net update vector. Each update
    evaluates ``h`` and ``sign`` at the ``alpha`` replicas of ``j``. Not safe
    for concurrent writers; hand readers a :meth:`copy`.
    """

    def __init__(self, transform: SparseJLTransform):
        self.transform = transform
        self.y = np.zeros(transform.params.k)
        self.updates_applied = 0

    def update(self, j: int, v: float) -> "TurnstileSketch":
        d = self.transform.params.d
        if not 0 <= j < d:
            raise ShapeError(f"coordinate {j} outside [0, {d})")
        self.transform._scatter(np.array([j], dtype=np.int64), np.array([float(v)]), self.y)
        self.updates_applied += 1
        return self

    def update_many(self, updates) -> "TurnstileSketch":
        """Apply ``(j, v)`` pairs in order; same result as calling :meth:`update` on each."""
        js, vs = self.transform._coords(list(updates))
        self.transform._scatter(js, vs, self.y)
        self.updates_applied += len(js)
        return self

    def copy(self) -> "TurnstileSketch":
        other = TurnstileSketch(self.transform)
        other.y = self.y.copy()
        other.updates_applied = self.updates_applied
        return other


def update_sketch(s: TurnstileSketch, j: int, v: float) -> TurnstileSketch:
    return s.update(j, v)
