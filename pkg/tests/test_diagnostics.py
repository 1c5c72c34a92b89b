import math

import numpy as np
import pytest
from scipy.stats import binom

from sketchjl.diagnostics import (
    KINDS,
    batch_hashes,
    bucket_masses,
    build_T,
    check_eigenbound,
    clopper_pearson_upper,
    eigenbound_sweep,
    embedding_error,
    frobenius_sq,
    frobenius_sq_pairs,
    make_report,
    named_vector,
    norm_statistics,
    operator_norm,
    operator_norm_power,
    quadratic_form,
    tail_experiment,
    tail_statistics,
)
from sketchjl.errors import CapacityError, InvalidInputError, InvalidParameterError, ShapeError
from sketchjl.field_hash import trial_seed
from sketchjl.sparse_jl import SparseParams, plan_sparse, sample_sparse, spread

HALF = np.full(4, 0.5)
COLLIDE = [0, 0, 1, 2]


def test_collision_matrix_example():
    T = build_T(COLLIDE, HALF)
    want = np.zeros((4, 4))
    want[0, 1] = want[1, 0] = 0.25
    np.testing.assert_array_equal(T, want)
    assert frobenius_sq(T) == frobenius_sq_pairs(COLLIDE, HALF) == 0.125
    assert operator_norm(T) == 0.25
    assert abs(operator_norm_power(T) - 0.25) < 1e-12


def test_bucket_masses_example():
    m = bucket_masses(COLLIDE, HALF, 3)
    np.testing.assert_array_equal(m.alpha_js, [0.5, 0.25, 0.25])
    assert m.total == 1.0
    assert m.max == 0.5
    ok, res = check_eigenbound(COLLIDE, HALF, 3, 0.5)
    assert ok and res.operator_norm == 0.25 and res.bound == 0.5


def test_no_collisions_means_zero():
    T = build_T([0, 1, 2, 3], HALF)
    assert not np.any(T)
    assert operator_norm(T) == 0.0 == operator_norm_power(T)


def test_matrix_properties(rng):
    for _ in range(20):
        D = int(rng.integers(2, 60))
        h = rng.integers(0, 5, D)
        xt = rng.standard_normal(D)
        T = build_T(h, xt)
        np.testing.assert_array_equal(T, T.T)
        assert np.trace(T) == 0.0
        # block diagonal once coordinates are sorted by bucket
        order = np.argsort(h, kind="stable")
        Ts = T[np.ix_(order, order)]
        hs = h[order]
        assert not np.any(Ts[hs[:, None] != hs[None, :]])
        assert abs(operator_norm_power(T) - operator_norm(T)) <= 1e-6 * max(1.0, operator_norm(T))


def test_dual_formulas(rng):
    prm = SparseParams(8, 16, 16, 6, 4)
    for i in range(30):
        t = sample_sparse(prm, trial_seed(2, i))
        x = rng.standard_normal(8)
        xt = spread(x, prm)
        rows, signs = t.hash_columns()
        T = build_T(rows, xt)
        fa, fb = frobenius_sq(T), frobenius_sq_pairs(rows, xt)
        assert abs(fa - fb) <= 4 * np.spacing(fa)
        z = quadratic_form(T, signs)
        assert abs(z - embedding_error(t, x)) <= 8 * np.spacing(math.fsum(xt * xt))


def test_capacity_and_input_errors():
    with pytest.raises(CapacityError):
        build_T(np.zeros(5000, dtype=int), np.zeros(5000))
    with pytest.raises(ShapeError):
        build_T([0, 1], np.zeros(3))
    with pytest.raises(InvalidInputError):
        check_eigenbound([0, 0], [1.0, 0.1], 2, 0.5)
    with pytest.raises(ShapeError):
        bucket_masses([0, 5], [1.0, 1.0], 3)


def cp_oracle(f, n, level=0.95):
    # largest p with P[X <= f] >= 1 - level, by bisection on the binomial CDF
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = (lo + hi) / 2
        if binom.cdf(f, n, mid) > 1 - level:
            lo = mid
        else:
            hi = mid
    return lo


@pytest.mark.parametrize("f,n", [(0, 10), (0, 1000), (3, 100), (50, 1000), (7, 20000)])
def test_clopper_pearson_against_binomial(f, n):
    assert clopper_pearson_upper(f, n) == pytest.approx(cp_oracle(f, n), abs=1e-9)


def test_clopper_pearson_edges():
    assert clopper_pearson_upper(0, 0) == 1.0
    assert clopper_pearson_upper(5, 5) == 1.0
    assert clopper_pearson_upper(0, 20000) == pytest.approx(1 - 0.05 ** (1 / 20000))


def test_named_vectors():
    for name in ("e1", "ones", "geometric"):
        assert math.isclose(float(np.linalg.norm(named_vector(name, 7))), 1.0)
    with pytest.raises(InvalidParameterError):
        named_vector("x", 3)


def test_batch_hashes_match_transforms():
    prm = plan_sparse(0.25, 0.05, 3)
    seeds = [trial_seed(4, i) for i in range(5)]
    pts = np.arange(prm.D)
    hv, sv = batch_hashes(prm, seeds, pts)
    for b, s in enumerate(seeds):
        rows, signs = sample_sparse(prm, s).hash_columns()
        np.testing.assert_array_equal(hv[b], rows)
        np.testing.assert_array_equal(sv[b], signs)


def test_trial_statistics_match_direct_computation():
    prm = plan_sparse(0.25, 0.05, 2)
    x = named_vector("geometric", 2)
    xt = spread(x, prm)
    stats = {kind: tail_statistics(kind, prm, x, 6, rng_seed=9, batch=4) for kind in KINDS}
    norms = norm_statistics(prm, x[None, :], 6, rng_seed=9, batch=4)[:, 0]
    for i in range(6):
        t = sample_sparse(prm, trial_seed(9, i))
        rows, _ = t.hash_columns()
        T = build_T(rows, xt)
        assert math.isclose(stats["frobenius"][i], frobenius_sq(T), rel_tol=1e-12, abs_tol=1e-18)
        assert math.isclose(stats["operator"][i], operator_norm(T), rel_tol=1e-9, abs_tol=1e-15)
        y = t.apply(x)
        assert math.isclose(stats["distortion"][i], abs(float(y @ y) - 1), abs_tol=1e-12)
        assert math.isclose(norms[i], float(y @ y), rel_tol=1e-12)


def test_report_fields_and_determinism():
    prm = plan_sparse(0.25, 0.05, 4)
    a = tail_experiment("frobenius", prm, 200, rng_seed=1)
    b = tail_experiment("frobenius", prm, 200, rng_seed=1)
    assert a.to_dict() == b.to_dict()
    d = a.to_dict()
    for key in ("name", "trials", "failures", "empirical_rate", "binomial_95_upper", "bound", "threshold", "pass"):
        assert key in d
    assert d["threshold"] == 7 / 277
    assert d["pass"] == (d["binomial_95_upper"] <= d["bound"])


def test_zero_trials_is_degenerate():
    rep = tail_experiment("distortion", plan_sparse(0.25, 0.05, 4), 0, rng_seed=1)
    assert rep.degenerate and not rep.passed and rep.empirical_rate == 0.0
    with pytest.raises(InvalidParameterError):
        make_report("x", "frobenius", {}, 3, 4, 0.1, 0.1)
    with pytest.raises(InvalidParameterError):
        tail_experiment("bogus", plan_sparse(0.25, 0.05, 4), 5, rng_seed=1)


def test_operator_report_includes_practical_threshold():
    rep = tail_experiment("operator", plan_sparse(0.25, 0.05, 1), 50, rng_seed=3)
    assert rep.threshold == pytest.approx(0.25 / (128 * math.log2(20)))
    assert rep.extra["practical_threshold"] == pytest.approx(0.25 / math.log2(20))


def test_eigenbound_sweep_small():
    rep = eigenbound_sweep(SparseParams(8, 16, 8, 6, 4), 30, rng_seed=5)
    assert rep.passed and rep.failures == 0 and rep.trials == 30
