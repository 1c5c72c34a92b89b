"""Collision-matrix measurements and Monte Carlo tail experiments.

For a bucket assignment ``h`` of the spread vector ``xt`` (length ``D``) the
collision matrix is ``T[s, t] = xt[s] * xt[t] * [s != t and h(s) == h(t)]``.
The embedding error is the sign quadratic form
``Z = ||A xt||^2 - ||xt||^2 = sigma^T T sigma``, so the Frobenius and operator
norms of ``T`` control how concentrated the embedding is. Dense ``T`` is only
built for ``D <= 4096``; the experiments use the bucket block structure
instead (``T`` is block diagonal with blocks ``v v^T - diag(v^2)``).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import beta as beta_dist

from . import _kernels
from .cascade import sample_cascade
from .errors import CapacityError, InvalidInputError, InvalidParameterError, ShapeError
from .field_hash import PolyHashFamily, derive_seed, sample_coeff_matrix, trial_seed
from .sparse_jl import SparseParams, spread

MAX_DENSE_D = 4096
EIGEN_RTOL = 1e-10
EIGENBOUND_SLACK = 1e-9

KINDS = ("frobenius", "operator", "distortion")


def _buckets(h, D: int) -> np.ndarray:
    if isinstance(h, PolyHashFamily):
        if h.domain_size < D:
            raise ShapeError(f"hash domain {h.domain_size} smaller than D={D}")
        return h.eval_batch(np.arange(D))
    b = np.asarray(h, dtype=np.int64)
    if b.shape != (D,):
        raise ShapeError(f"expected {D} bucket indices, got shape {b.shape}")
    return b


def build_T(h, xt) -> np.ndarray:
    """Dense collision matrix; ``h`` is a hash family or a bucket index per coordinate."""
    xt = np.asarray(xt, dtype=np.float64)
    D = xt.shape[0]
    if D > MAX_DENSE_D:
        raise CapacityError(f"D={D} exceeds the dense limit {MAX_DENSE_D}")
    b = _buckets(h, D)
    same = b[:, None] == b[None, :]
    np.fill_diagonal(same, False)
    return np.where(same, np.multiply.outer(xt, xt), 0.0)


def frobenius_sq(T) -> float:
    """Sum of squared entries, summed exactly then rounded once."""
    T = np.asarray(T, dtype=np.float64)
    nz = T[T != 0.0]
    return math.fsum((nz * nz).tolist())


def frobenius_sq_pairs(h, xt) -> float:
    """``2 * sum_{s<t, h(s)=h(t)} (xt[s] xt[t])^2`` without forming ``T``."""
    xt = np.asarray(xt, dtype=np.float64)
    b = _buckets(h, xt.shape[0])
    terms = []
    for bucket in np.unique(b):
        members = xt[b == bucket]
        if len(members) < 2:
            continue
        prods = np.multiply.outer(members, members)[np.triu_indices(len(members), 1)]
        terms.extend((prods * prods).tolist())
    return 2.0 * math.fsum(terms)


def operator_norm(T) -> float:
    """Largest eigenvalue magnitude of a symmetric matrix."""
    T = np.asarray(T, dtype=np.float64)
    if T.shape[0] > MAX_DENSE_D:
        raise CapacityError(f"dimension {T.shape[0]} exceeds the dense limit {MAX_DENSE_D}")
    if T.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvalsh(T))))


def operator_norm_power(T, iters: int = 5000, tol: float = 1e-14, seed: int = 0) -> float:
    """Power iteration on ``T @ T``; slower fallback for :func:`operator_norm`."""
    T = np.asarray(T, dtype=np.float64)
    n = T.shape[0]
    if n == 0 or not np.any(T):
        return 0.0
    v = np.random.default_rng(seed).standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = T @ (T @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        if abs(nw - lam) <= tol * nw:
            lam = nw
            break
        lam = nw
    return math.sqrt(lam)


@dataclass(frozen=True)
class BucketMasses:
    alpha_js: np.ndarray

    @property
    def total(self) -> float:
        return math.fsum(self.alpha_js.tolist())

    @property
    def max(self) -> float:
        return float(self.alpha_js.max()) if self.alpha_js.size else 0.0


def bucket_masses(h, xt, k: int) -> BucketMasses:
    """Squared mass landing in each of the ``k`` buckets."""
    xt = np.asarray(xt, dtype=np.float64)
    b = _buckets(h, xt.shape[0])
    if b.size and (b.min() < 0 or b.max() >= k):
        raise ShapeError(f"bucket index outside [0, {k})")
    sq = xt * xt
    out = np.zeros(k)
    for bucket in np.unique(b):
        out[bucket] = math.fsum(sq[b == bucket].tolist())
    return BucketMasses(out)


@dataclass(frozen=True)
class EigenboundResult:
    operator_norm: float
    max_bucket_mass: float
    c_sq: float
    bound: float
    holds: bool


def check_eigenbound(h, xt, k: int, c: float) -> tuple[bool, EigenboundResult]:
    """Verify ``||T||_2 <= max(c^2, max_j alpha_j)``, which holds for every ``h``."""
    xt = np.asarray(xt, dtype=np.float64)
    if xt.size and np.max(np.abs(xt)) > c:
        raise InvalidInputError(f"||xt||_inf = {np.max(np.abs(xt))} exceeds c = {c}")
    b = _buckets(h, xt.shape[0])
    norm = operator_norm(build_T(b, xt))
    masses = bucket_masses(b, xt, k)
    bound = max(c * c, masses.max)
    ok = norm <= bound + EIGENBOUND_SLACK
    return ok, EigenboundResult(norm, masses.max, c * c, bound, ok)


def quadratic_form(T, signs) -> float:
    """``signs^T T signs`` summed exactly."""
    T = np.asarray(T, dtype=np.float64)
    s = np.asarray(signs, dtype=np.float64)
    rows, cols = np.nonzero(T)
    return math.fsum((T[rows, cols] * s[rows] * s[cols]).tolist())


def embedding_error(transform, x) -> float:
    """``||A xt||^2 - ||xt||^2`` with every sum taken exactly.

    Each output coordinate is an exactly rounded sum of its signed spread
    terms, so the result differs from :func:`quadratic_form` only by the final
    roundings, not by the accumulation order of :meth:`apply`.
    """
    xt = spread(x, transform.params)
    rows, signs = transform.hash_columns()
    terms = signs * xt
    y = np.zeros(transform.params.k)
    for row in np.unique(rows[xt != 0.0]):
        y[row] = math.fsum(terms[rows == row].tolist())
    return math.fsum((y * y).tolist()) - math.fsum((xt * xt).tolist())


# -- statistics --------------------------------------------------------------


def clopper_pearson_upper(failures: int, trials: int, level: float = 0.95) -> float:
    """Exact one-sided upper confidence bound on a binomial rate."""
    if trials <= 0:
        return 1.0
    if failures >= trials:
        return 1.0
    return float(beta_dist.ppf(level, failures + 1, trials - failures))


@dataclass
class ExperimentReport:
    name: str
    kind: str
    parameters: dict
    trials: int
    failures: int
    empirical_rate: float
    binomial_95_upper: float
    bound: float
    threshold: float
    passed: bool
    degenerate: bool = False
    p99_statistic: float | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["pass"] = out.pop("passed")
        return out


def make_report(name, kind, parameters, trials, failures, bound, threshold, stats=None, extra=None):
    if failures > trials:
        raise InvalidParameterError("failures cannot exceed trials")
    degenerate = trials == 0
    rate = failures / trials if trials else 0.0
    upper = clopper_pearson_upper(failures, trials)
    p99 = float(np.quantile(stats, 0.99)) if stats is not None and len(stats) else None
    return ExperimentReport(
        name=name,
        kind=kind,
        parameters=parameters,
        trials=trials,
        failures=failures,
        empirical_rate=rate,
        binomial_95_upper=upper,
        bound=bound,
        threshold=threshold,
        passed=(not degenerate) and upper <= bound,
        degenerate=degenerate,
        p99_statistic=p99,
        extra=extra or {},
    )


# -- Monte Carlo -------------------------------------------------------------


def named_vector(name: str, d: int) -> np.ndarray:
    """Unit test vectors: ``e1``, ``ones`` (normalized) or ``geometric`` (``2^-i``, normalized)."""
    if name == "e1":
        x = np.zeros(d)
        x[0] = 1.0
        return x
    if name == "ones":
        return np.full(d, 1.0 / math.sqrt(d))
    if name == "geometric":
        x = 2.0 ** -np.arange(d)
        return x / np.linalg.norm(x)
    raise InvalidParameterError(f"unknown test vector {name!r}")


def batch_hashes(params: SparseParams, seeds, points) -> tuple[np.ndarray, np.ndarray]:
    """Buckets and signs at ``points`` for the transforms named by ``seeds``.

    Row ``b`` matches ``sample_sparse(params, seeds[b])`` exactly.
    """
    pts = np.asarray(points, dtype=np.uint64)
    ch = sample_coeff_matrix([derive_seed(s, "h") for s in seeds], params.r_h, params.p)
    cs = sample_coeff_matrix([derive_seed(s, "sigma") for s in seeds], params.r_sigma, params.p)
    hv = (_kernels.horner_many(ch, pts) % np.uint64(params.k)).astype(np.int64)
    sv = 1.0 - 2.0 * (_kernels.horner_many(cs, pts) & np.uint64(1)).astype(np.float64)
    return hv, sv


def _block_operator_norm(buckets: np.ndarray, vals: np.ndarray) -> float:
    order = np.argsort(buckets, kind="stable")
    b = buckets[order]
    v = vals[order]
    uniq, start, counts = np.unique(b, return_index=True, return_counts=True)
    multi = counts >= 2
    if not multi.any():
        return 0.0
    starts = start[multi]
    sizes = counts[multi]
    m = int(sizes.max())
    V = np.zeros((len(sizes), m))
    for i in range(m):
        have = sizes > i
        V[have, i] = v[starts[have] + i]
    blocks = V[:, :, None] * V[:, None, :]
    idx = np.arange(m)
    blocks[:, idx, idx] = 0.0
    return float(np.max(np.abs(np.linalg.eigvalsh(blocks))))


def _trial_stats(kind, params, x, xt_support, support, hv, sv):
    k = params.k
    nb = hv.shape[0]
    offs = (np.arange(nb, dtype=np.int64) * k)[:, None]
    flat = (hv + offs).ravel()
    if kind == "distortion":
        y = np.bincount(flat, weights=(sv * xt_support).ravel(), minlength=nb * k).reshape(nb, k)
        norm_sq = float(x @ x)
        return np.abs((y * y).sum(axis=1) - norm_sq)
    sq = np.broadcast_to(xt_support * xt_support, hv.shape)
    if kind == "frobenius":
        mass = np.bincount(flat, weights=sq.ravel(), minlength=nb * k).reshape(nb, k)
        quart = np.bincount(flat, weights=(sq * sq).ravel(), minlength=nb * k).reshape(nb, k)
        return (mass * mass - quart).sum(axis=1)
    if kind == "operator":
        return np.array([_block_operator_norm(hv[b], xt_support) for b in range(nb)])
    raise InvalidParameterError(f"unknown experiment kind {kind!r}")


def tail_statistics(kind, params: SparseParams, x, trials: int, rng_seed: int, batch: int = 256) -> np.ndarray:
    """Per-trial statistic: ``||T||_F^2``, ``||T||_2`` or ``| ||Ax||^2 - ||x||^2 |``.

    Trial ``i`` uses the transform ``sample_sparse(params, trial_seed(rng_seed, i))``.
    """
    if kind not in KINDS:
        raise InvalidParameterError(f"unknown experiment kind {kind!r}")
    x = np.asarray(x, dtype=np.float64)
    xt = spread(x, params)
    if kind in ("frobenius", "operator") and params.D > MAX_DENSE_D:
        raise CapacityError(f"D={params.D} exceeds {MAX_DENSE_D}")
    support = np.flatnonzero(xt)
    xt_support = xt[support]
    out = np.empty(trials)
    for start in range(0, trials, batch):
        stop = min(trials, start + batch)
        seeds = [trial_seed(rng_seed, i) for i in range(start, stop)]
        hv, sv = batch_hashes(params, seeds, support)
        out[start:stop] = _trial_stats(kind, params, x, xt_support, support, hv, sv)
    return out


def norm_statistics(params: SparseParams, X, trials: int, rng_seed: int, batch: int = 256) -> np.ndarray:
    """``||A x||^2`` for each row ``x`` of ``X``, shape ``(trials, len(X))``.

    Hashes are evaluated once per trial on the union of the supports, so
    several test vectors share the cost. Trial ``i`` uses the same transform
    as :func:`tail_statistics`.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != params.d:
        raise ShapeError(f"expected vectors of length {params.d}, got shape {X.shape}")
    XT = np.stack([spread(x, params) for x in X])
    support = np.flatnonzero(np.any(XT != 0.0, axis=0))
    vals = XT[:, support]
    k = params.k
    out = np.empty((trials, X.shape[0]))
    for start in range(0, trials, batch):
        stop = min(trials, start + batch)
        seeds = [trial_seed(rng_seed, i) for i in range(start, stop)]
        hv, sv = batch_hashes(params, seeds, support)
        nb = stop - start
        flat = (hv + (np.arange(nb, dtype=np.int64) * k)[:, None]).ravel()
        for q in range(X.shape[0]):
            y = np.bincount(flat, weights=(sv * vals[q]).ravel(), minlength=nb * k).reshape(nb, k)
            out[start:stop, q] = (y * y).sum(axis=1)
    return out


def cascade_norms(plan, X, trials: int, rng_seed: int) -> np.ndarray:
    """``||C x||^2`` per trial and row of ``X`` for cascades ``sample_cascade(plan, trial_seed(rng_seed, i))``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != plan.d:
        raise ShapeError(f"expected vectors of length {plan.d}, got shape {X.shape}")
    out = np.empty((trials, X.shape[0]))
    for i in range(trials):
        Y = sample_cascade(plan, trial_seed(rng_seed, i)).apply(X.T)
        out[i] = (Y * Y).sum(axis=0)
    return out


def lemma_threshold(kind: str, params: SparseParams) -> tuple[float, float]:
    """``(threshold, allowed failure rate)`` for a tail experiment."""
    eps, delta = params.epsilon, params.delta
    if eps is None or delta is None:
        raise InvalidParameterError("tail experiments need epsilon and delta in the parameters")
    if kind == "frobenius":
        return 7.0 / params.k, delta
    if kind == "operator":
        return eps / (128.0 * math.log2(1 / delta)), delta
    if kind == "distortion":
        return eps, 3 * delta
    raise InvalidParameterError(f"unknown experiment kind {kind!r}")


def tail_experiment(
    kind: str,
    params: SparseParams,
    trials: int,
    rng_seed: int,
    vector: str = "ones",
    name: str | None = None,
) -> ExperimentReport:
    """Count trials whose statistic exceeds the lemma threshold and bound the rate.

    Passes iff the one-sided 95% Clopper-Pearson upper bound on the failure
    rate is at most the allowed rate (``delta``, ``delta``, ``3*delta``).
    Distortion is measured relative to ``||x||^2``. The operator kind also
    reports, under ``extra``, the looser threshold ``eps / log2(1/delta)``.
    """
    if trials < 0:
        raise InvalidParameterError("trials must be non-negative")
    threshold, allowed = lemma_threshold(kind, params)
    x = named_vector(vector, params.d)
    stats = tail_statistics(kind, params, x, trials, rng_seed) if trials else np.zeros(0)
    limit = threshold * float(x @ x) if kind == "distortion" else threshold
    failures = int(np.count_nonzero(stats > limit))
    extra = {}
    if kind == "operator" and trials:
        loose = params.epsilon / math.log2(1 / params.delta)
        loose_fail = int(np.count_nonzero(stats > loose))
        loose_upper = clopper_pearson_upper(loose_fail, trials)
        extra = {
            "practical_threshold": loose,
            "practical_failures": loose_fail,
            "practical_binomial_95_upper": loose_upper,
            "practical_pass": loose_upper <= allowed,
        }
    parameters = {
        "vector": vector,
        "rng_seed": rng_seed,
        **{k: v for k, v in params.to_dict().items() if k in ("epsilon", "delta", "d", "k", "alpha", "c", "D", "r_h", "r_sigma")},
    }
    return make_report(
        name or f"{kind}-{vector}", kind, parameters, trials, failures, allowed, threshold, stats, extra
    )


def eigenbound_sweep(params: SparseParams, instances: int, rng_seed: int, name: str | None = None) -> ExperimentReport:
    """Run :func:`check_eigenbound` on random ``(h, xt)``; any violation fails."""
    rng = np.random.default_rng(rng_seed)
    failures = 0
    worst = []
    for i in range(instances):
        x = rng.standard_normal(params.d)
        x /= np.linalg.norm(x)
        xt = spread(x, params)
        seed = trial_seed(rng_seed, i)
        hv, _ = batch_hashes(params, [seed], np.arange(params.D))
        ok, res = check_eigenbound(hv[0], xt, params.k, params.c)
        failures += not ok
        worst.append(res.operator_norm / res.bound if res.bound else 0.0)
    parameters = {"rng_seed": rng_seed, "d": params.d, "k": params.k, "alpha": params.alpha, "D": params.D, "r_h": params.r_h}
    report = make_report(name or "eigenbound", "eigenbound", parameters, instances, failures, 0.0, 1.0, worst)
    report.passed = instances > 0 and failures == 0
    return report
