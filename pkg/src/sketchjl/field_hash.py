"""r-wise independent hash families over a prime field.

A family member is a uniformly random polynomial of degree < r over GF(p),
evaluated as ``(poly(x) mod p) mod m``. Coefficients are never stored: they are
re-derived from a seed by expanding it with SHAKE-256 and rejection sampling
``ceil(log2 p)``-bit little-endian words that are ``>= p``.

Coefficients are ordered low-to-high, ``coeffs[i]`` multiplies ``x**i``.

The default field is GF(2^61 - 1). Reducing into ``m`` buckets with ``mod m``
introduces a bias of at most ``m/p`` per output value, negligible for
``m <= 2^32``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _kernels
from .errors import (
    InvalidParameterError,
    InvalidSeedError,
    OutOfDomainError,
    UnsupportedParametersError,
    WrongRangeError,
)

MERSENNE_61 = _kernels.P61
DEFAULT_PRIME = MERSENNE_61

_EXPAND_TAG = b"sketchjl/field-coeffs/v1"
_DERIVE_TAG = b"sketchjl/derive/v1"


@lru_cache(maxsize=64)
def _check_prime(p: int) -> None:
    from sympy import isprime

    if p < 2 or not isprime(p):
        raise UnsupportedParametersError(f"field modulus {p} is not prime")
    if p >= 1 << 62:
        raise UnsupportedParametersError("field modulus must be below 2^62")


def field_bits(p: int = DEFAULT_PRIME) -> int:
    """Bits needed to name one field element, ``ceil(log2 p)``."""
    return (p - 1).bit_length()


def expand_seed(seed: bytes, count: int, p: int = DEFAULT_PRIME) -> list[int]:
    """First ``count`` uniform elements of GF(p) drawn from ``seed``."""
    if not seed:
        raise InvalidSeedError("seed must be a non-empty byte string")
    bits = field_bits(p)
    width = (bits + 7) // 8
    mask = (1 << bits) - 1
    xof = hashlib.shake_256(_EXPAND_TAG + len(seed).to_bytes(4, "little") + seed)
    out: list[int] = []
    nbytes = width * (2 * count + 4)
    while True:
        stream = xof.digest(nbytes)
        out.clear()
        for off in range(0, nbytes - width + 1, width):
            v = int.from_bytes(stream[off : off + width], "little") & mask
            if v < p:
                out.append(v)
                if len(out) == count:
                    return out
        # SHAKE output is prefix-stable, so asking for more extends the stream
        nbytes *= 2


def derive_seed(master: bytes, label: str, index: int | None = None) -> bytes:
    """Deterministic 16-byte sub-seed of ``master`` for a named purpose."""
    if not master:
        raise InvalidSeedError("seed must be a non-empty byte string")
    h = hashlib.sha256(_DERIVE_TAG)
    h.update(len(master).to_bytes(4, "little") + master)
    h.update(label.encode())
    if index is not None:
        h.update(b"#" + index.to_bytes(8, "little"))
    return h.digest()[:16]


def trial_seed(rng_seed: int, trial: int) -> bytes:
    """Seed of the ``trial``-th transform in a reproducible Monte Carlo run."""
    return derive_seed(rng_seed.to_bytes(8, "little", signed=True), "trial", trial)


def parse_seed(text: str) -> bytes:
    try:
        seed = bytes.fromhex(text)
    except ValueError as exc:
        raise InvalidSeedError(f"seed is not a hex string: {text!r}") from exc
    if not seed:
        raise InvalidSeedError("seed must be non-empty")
    return seed


@dataclass(frozen=True)
class PolyHashFamily:
    """One member of the degree-(r-1) polynomial hash family ``[n] -> [m]``."""

    coeffs: tuple[int, ...]
    domain_size: int
    range_size: int
    p: int = DEFAULT_PRIME
    seed: bytes | None = None
    _coeff_array: np.ndarray | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        _check_prime(self.p)
        if len(self.coeffs) < 1:
            raise InvalidParameterError("a family needs at least one coefficient")
        if any(not 0 <= a < self.p for a in self.coeffs):
            raise InvalidParameterError("coefficients must lie in [0, p)")
        if self.domain_size < 1 or self.domain_size > self.p:
            raise UnsupportedParametersError(f"domain size {self.domain_size} must be in [1, p]")
        if self.range_size < 1 or self.range_size > self.p:
            raise UnsupportedParametersError(f"range size {self.range_size} must be in [1, p]")
        object.__setattr__(self, "coeffs", tuple(int(a) for a in self.coeffs))
        if self.p == MERSENNE_61:
            object.__setattr__(self, "_coeff_array", np.array(self.coeffs, dtype=np.uint64))

    @property
    def r(self) -> int:
        return len(self.coeffs)

    @property
    def seed_bits(self) -> int:
        return self.r * field_bits(self.p)

    def eval(self, x: int) -> int:
        """Horner evaluation, the reference semantics for every other path."""
        if not 0 <= x < self.domain_size:
            raise OutOfDomainError(f"point {x} outside domain [0, {self.domain_size})")
        acc = 0
        for a in reversed(self.coeffs):
            acc = (acc * x + a) % self.p
        return acc % self.range_size

    def eval_batch(self, xs, method: str = "auto") -> np.ndarray:
        """Evaluate at every point of ``xs``; ``result[i] == eval(xs[i])``.

        ``method`` is ``"auto"`` (compiled Horner on the Mersenne field,
        reference loop otherwise), ``"reference"``, ``"horner"`` or
        ``"subproduct"`` (subproduct-tree multipoint evaluation).
        """
        pts = self._check_points(xs)
        if pts.size == 0:
            return np.zeros(0, dtype=np.int64)
        if method == "auto":
            method = "horner" if self._coeff_array is not None else "reference"
        if method == "horner":
            if self._coeff_array is None:
                raise UnsupportedParametersError("compiled Horner needs the 2^61-1 field")
            raw = _kernels.horner(self._coeff_array, pts.astype(np.uint64))
            return (raw % np.uint64(self.range_size)).astype(np.int64)
        if method == "reference":
            return np.array([self.eval(int(x)) for x in pts], dtype=np.int64)
        if method == "subproduct":
            raw = multipoint_eval(self.coeffs, [int(x) for x in pts], self.p)
            return np.array([v % self.range_size for v in raw], dtype=np.int64)
        raise InvalidParameterError(f"unknown evaluation method {method!r}")

    def sign_eval(self, x: int) -> int:
        """Map the hash value 0 to +1 and 1 to -1."""
        self._require_signs()
        return 1 - 2 * self.eval(x)

    def sign_batch(self, xs, method: str = "auto") -> np.ndarray:
        self._require_signs()
        return (1 - 2 * self.eval_batch(xs, method)).astype(np.int8)

    def _require_signs(self):
        if self.range_size != 2:
            raise WrongRangeError(f"sign evaluation needs range size 2, got {self.range_size}")

    def _check_points(self, xs) -> np.ndarray:
        pts = np.asarray(xs, dtype=np.int64).reshape(-1)
        if pts.size:
            bad = np.flatnonzero((pts < 0) | (pts >= self.domain_size))
            if bad.size:
                pos = int(bad[0])
                raise OutOfDomainError(
                    f"point {int(pts[pos])} at position {pos} outside domain [0, {self.domain_size})",
                    position=pos,
                )
        return pts

    def to_record(self) -> dict:
        if self.seed is None:
            raise InvalidSeedError("only seeded families can be serialized")
        return {"p": self.p, "r": self.r, "n": self.domain_size, "m": self.range_size, "seed": self.seed.hex()}

    @classmethod
    def from_record(cls, record: dict) -> "PolyHashFamily":
        return sample_family(
            int(record["r"]), int(record["n"]), int(record["m"]), parse_seed(record["seed"]), p=int(record["p"])
        )


def sample_family(r: int, n: int, m: int, seed: bytes, p: int = DEFAULT_PRIME) -> PolyHashFamily:
    """Draw the family member named by ``seed``.

    The coefficients are the first ``r`` elements of the seed expansion, so
    the same ``(r, seed, p)`` always yields the same polynomial.
    """
    if r < 1:
        raise InvalidParameterError(f"independence order must be >= 1, got {r}")
    if n > p or m > p:
        raise UnsupportedParametersError(f"domain {n} and range {m} must not exceed p={p}")
    if m < 2:
        raise UnsupportedParametersError(f"range size must be >= 2, got {m}")
    if not seed:
        raise InvalidSeedError("seed must be a non-empty byte string")
    _check_prime(p)
    return PolyHashFamily(tuple(expand_seed(seed, r, p)), n, m, p, bytes(seed))


def sample_coeff_matrix(seeds, r: int, p: int = MERSENNE_61) -> np.ndarray:
    """Coefficient rows for many seeds at once, shape ``(len(seeds), r)``."""
    rows = [expand_seed(s, r, p) for s in seeds]
    return np.array(rows, dtype=np.uint64).reshape(len(rows), r)


# -- subproduct-tree multipoint evaluation ---------------------------------


def _poly_mul(a, b, p):
    out = [0] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        if ai:
            for j, bj in enumerate(b):
                out[i + j] = (out[i + j] + ai * bj) % p
    return out


def _poly_rem_monic(f, g, p):
    """Remainder of ``f`` modulo the monic polynomial ``g``."""
    dg = len(g) - 1
    if len(f) <= dg:
        return list(f)
    rem = list(f)
    for top in range(len(rem) - 1, dg - 1, -1):
        q = rem[top]
        if q:
            shift = top - dg
            for i in range(dg):
                rem[shift + i] = (rem[shift + i] - q * g[i]) % p
        rem[top] = 0
    return rem[:dg]


def _subproduct_levels(points, p):
    levels = [[[(-x) % p, 1] for x in points]]
    while len(levels[-1]) > 1:
        prev = levels[-1]
        nxt = [_poly_mul(prev[i], prev[i + 1], p) for i in range(0, len(prev) - 1, 2)]
        if len(prev) % 2:
            nxt.append(prev[-1])
        levels.append(nxt)
    return levels


def _descend(f, levels, p):
    rems = [_poly_rem_monic(f, levels[-1][0], p)]
    for lvl in range(len(levels) - 2, -1, -1):
        nodes = levels[lvl]
        nxt = []
        for i, rem in enumerate(rems):
            left = 2 * i
            nxt.append(_poly_rem_monic(rem, nodes[left], p))
            if left + 1 < len(nodes):
                nxt.append(_poly_rem_monic(rem, nodes[left + 1], p))
        rems = nxt
    return [rem[0] if rem else 0 for rem in rems]


def multipoint_eval(coeffs, points, p: int) -> list[int]:
    """Values ``poly(x) mod p`` at every point via subproduct-tree remainders.

    Points are processed in blocks of a power of two at least ``len(coeffs)``;
    duplicates are allowed.
    """
    if not points:
        return []
    block = 1
    while block < len(coeffs):
        block *= 2
    f = [a % p for a in coeffs]
    out: list[int] = []
    for start in range(0, len(points), block):
        chunk = points[start : start + block]
        out.extend(_descend(f, _subproduct_levels(chunk, p), p))
    return out
