import math

import numpy as np
import pytest

from iterchaos.dist_moments import BASELINE_FAMILIES, Model, moments
from iterchaos.grid_basis import BasisSpec, Grid, StepFn
from iterchaos.mc_engine import (
    THREADS_ENV,
    batch_values,
    default_workers,
    estimate,
    replicate_values,
    sample,
    sample_batch,
    summarize,
    uniforms,
)
from iterchaos.stochastic_integral import IntegralSpec, second_moment, z_path_fast

GAUSS = Model.parse("gaussian")


def test_same_seed_replicate_is_identical(model):
    a, b = sample(model, 16, 3, 5), sample(model, 16, 3, 5)
    assert np.array_equal(a.x, b.x)
    assert (a.seed, a.replicate) == (3, 5)
    assert not np.array_equal(a.x, sample(model, 16, 3, 6).x)
    assert not np.array_equal(a.x, sample(model, 16, 4, 5).x)


def test_prefix_stability():
    # variable j reads the j-th uniform whatever N is
    assert np.array_equal(sample(GAUSS, 4, 1, 0).x, sample(GAUSS, 32, 1, 0).x[:4])


def test_rademacher_values():
    x = sample_batch(Model.parse("rademacher"), 8, 0, range(200))
    assert set(np.unique(x)) == {-1.0, 1.0}


def test_twopoint_values():
    x = sample_batch(Model.parse("twopoint:0.2"), 8, 0, range(200))
    assert set(np.unique(x)) == {2.0, -0.5}


def test_uniforms_open_interval():
    u = uniforms(0, 0, 100000)
    assert u.min() > 0.0 and u.max() < 1.0


def test_per_index_model():
    m = Model.parse("rademacher,gaussian")
    x = sample_batch(m, 2, 0, range(100))
    assert set(np.unique(x[:, 0])) == {-1.0, 1.0}
    assert len(np.unique(x[:, 1])) == 100


def test_constant_functional():
    est = estimate(lambda r: 2.5, GAUSS, 4, 50, 0)
    assert est.mean == 2.5 and est.stderr == 0.0


def test_non_finite_aborts_with_index():
    with pytest.raises(FloatingPointError, match="replicate 7"):
        replicate_values(lambda r: math.inf if r.replicate == 7 else 0.0, GAUSS, 2, 20, 0)
    with pytest.raises(FloatingPointError, match="replicate 6$"):
        batch_values(lambda x: np.where(np.arange(len(x)) == 6, np.nan, 0.0), GAUSS, 2, 2048, 0)


def test_summarize_needs_two():
    with pytest.raises(ValueError):
        summarize(np.array([1.0]), 0)


def test_worker_invariance():
    f = lambda x: np.column_stack([x.sum(axis=1), (x**2).mean(axis=1)])
    a = batch_values(f, Model.parse("exp"), 8, 5000, 9, workers=1)
    b = batch_values(f, Model.parse("exp"), 8, 5000, 9, workers=8)
    assert np.array_equal(a, b)
    g = lambda r: float(r.x[0] * r.x[1])
    assert np.array_equal(replicate_values(g, GAUSS, 2, 600, 1, 1), replicate_values(g, GAUSS, 2, 600, 1, 4))


def test_default_workers_env(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "6")
    assert default_workers() == 6
    monkeypatch.setenv(THREADS_ENV, "zero")
    assert default_workers() == 1


def test_centered_exponential_fourth_moment():
    est = estimate(lambda r: r.x[0] ** 4, Model.parse("exp"), 1, 100000, 2)
    assert est.within(9.0)


def test_gaussian_baseline_second_moment():
    b = BasisSpec(Grid(1.0, 4))
    one = StepFn.constant(b.grid)
    vals = batch_values(lambda x: z_path_fast(one, one, b, x)[:, -1] ** 2, GAUSS, 16, 100000, 3)
    est = summarize(vals, 3)
    exact = second_moment(IntegralSpec(one, one, 1.0, b, GAUSS))["direct"]
    assert exact == pytest.approx(0.5)
    assert est.within(exact)


@pytest.mark.slow
def test_gaussian_mean_clt_band():
    x = batch_values(lambda x: x[:, 0], GAUSS, 1, 10**6, 0)
    assert abs(x.mean()) < 3e-3


@pytest.mark.slow
@pytest.mark.parametrize("fam", BASELINE_FAMILIES, ids=str)
def test_first_eight_moments(fam):
    M = 10**6
    x = batch_values(lambda x: x[:, 0], Model(fam), 1, M, 1)
    m = moments(fam)
    for k in range(1, 9):
        v = x**k
        se = v.std(ddof=1) / math.sqrt(M)
        assert abs(v.mean() - m[k]) <= 4 * se + 1e-12, (k, v.mean(), m[k], se)
