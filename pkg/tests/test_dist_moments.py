import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from iterchaos.dist_moments import (
    BASELINE_FAMILIES,
    CENTERED_EXPONENTIAL,
    GAUSSIAN,
    RADEMACHER,
    UNIFORM,
    DistFamily,
    DistributionError,
    Model,
    MomentTable,
    exact_moments,
    exact_orthopoly,
    moments,
    orthopoly,
    orthopoly_from_table,
    poly_eval,
    poly_expect,
    poly_mul,
)


def test_gaussian_moments():
    m = moments(GAUSSIAN)
    assert (m[3], m[4], m[6], m[8]) == (0.0, 3.0, 15.0, 105.0)


def test_rademacher_moments():
    m = moments(RADEMACHER)
    assert all(m[k] == (1.0 if k % 2 == 0 else 0.0) for k in range(9))


def test_centered_exponential_moments():
    m = moments(CENTERED_EXPONENTIAL)
    assert [m[k] for k in range(9)] == [1, 0, 1, 2, 9, 44, 265, 1854, 14833]


def test_uniform_moments():
    m = moments(UNIFORM)
    assert m[4] == pytest.approx(9 / 5)
    assert m[6] == pytest.approx(27 / 7)


@pytest.mark.parametrize("fam", BASELINE_FAMILIES, ids=str)
def test_moments_against_quadrature(fam):
    # independent check: numerical integration / atom sums
    from scipy import integrate, stats

    m = moments(fam)
    for k in range(1, 9):
        if fam.tag == "gaussian":
            ref = stats.norm.moment(k)
        elif fam.tag == "uniform":
            ref = integrate.quad(lambda x: x**k / (2 * math.sqrt(3)), -math.sqrt(3), math.sqrt(3))[0]
        elif fam.tag == "centered_exponential":
            ref = integrate.quad(lambda x: (x - 1) ** k * math.exp(-x), 0, math.inf)[0]
        else:
            ref = sum(p * v**k for v, p in fam.atoms)
        assert m[k] == pytest.approx(ref, rel=1e-9, abs=1e-12)


def test_beyond_tabulated_moment_rejected():
    with pytest.raises(DistributionError):
        moments(GAUSSIAN)[9]


def test_gaussian_is_hermite():
    op = orthopoly(GAUSSIAN)
    assert op.P[2] == (-1.0, 0.0, 1.0)
    assert op.P[4] == (3.0, 0.0, -6.0, 0.0, 1.0)
    assert np.array_equal(op.gamma, op.Gamma)
    assert op.Gamma[3, 1] == 3.0 and op.Gamma[3, 3] == 1.0


def test_centered_exponential_p2():
    op = orthopoly(CENTERED_EXPONENTIAL)
    assert op.P[2] == (-1.0, -2.0, 1.0)
    assert op.gamma[2, 1] == 2.0 and op.gamma[2, 0] == 1.0
    assert op.q == (1.0, 1.0, 4.0, 36.0, 576.0)


@pytest.mark.parametrize("fam", BASELINE_FAMILIES, ids=str)
def test_orthogonality(fam):
    op, m = orthopoly(fam), moments(fam)
    for a in range(5):
        for b in range(5):
            e = poly_expect(poly_mul(op.P[a], op.P[b]), m)
            if a == b:
                assert e == pytest.approx(op.q[a], abs=1e-12)
            else:
                assert abs(e) < 1e-12


@pytest.mark.parametrize("fam", BASELINE_FAMILIES, ids=str)
def test_connection_roundtrip(fam):
    op = orthopoly(fam)
    for n in range(5):
        back = np.zeros(n + 1)
        for k in range(n + 1):
            back[: len(op.P[k])] += op.gamma[n, k] * np.array(op.P[k])[: n + 1]
        target = np.zeros(n + 1)
        target[n] = 1.0
        assert np.allclose(back, target, atol=1e-12)


@pytest.mark.parametrize("fam", [GAUSSIAN, RADEMACHER, UNIFORM], ids=str)
def test_symmetric_parity(fam):
    g = orthopoly(fam).gamma
    for n in range(5):
        for k in range(n + 1):
            if (n - k) % 2:
                assert g[n, k] == 0.0


@pytest.mark.parametrize("fam", BASELINE_FAMILIES, ids=str)
def test_gamma21_is_skewness(fam):
    op = orthopoly(fam)
    assert op.gamma[2, 1] == pytest.approx(moments(fam)[3], abs=1e-14)
    assert op.Gamma[2, 1] == 0.0


@pytest.mark.parametrize("fam", [RADEMACHER, DistFamily("twopoint", 0.2)], ids=str)
def test_atomic_null_polynomials(fam):
    op = orthopoly(fam)
    assert op.q[2:] == (0.0, 0.0, 0.0)
    assert op.is_null(2) and not op.is_null(1)
    for v, _ in fam.atoms:
        for n in (2, 3, 4):
            assert abs(poly_eval(op.P[n], v)) < 1e-12


def test_degenerate_hankel_rejected():
    # three-atom law disguised as a moment table with no atom count
    vals, probs = np.array([-1.0, 0.0, 1.0]), np.array([0.25, 0.5, 0.25])
    vals = vals / math.sqrt(0.5)
    m = MomentTable(tuple(float(np.sum(probs * vals**k)) for k in range(9)))
    with pytest.raises(DistributionError, match="degenerate"):
        orthopoly_from_table(m)


@pytest.mark.parametrize("fam", BASELINE_FAMILIES, ids=str)
@given(x=st.floats(-4, 4))
def test_recurrence_eval_matches_coefficients(fam, x):
    op = orthopoly(fam)
    for n in range(5):
        assert float(op.eval(n, x)) == pytest.approx(poly_eval(op.P[n], x), abs=1e-9)


@pytest.mark.parametrize("fam", BASELINE_FAMILIES, ids=str)
def test_exact_tables_agree_with_floats(fam):
    em, eP = exact_moments(fam), exact_orthopoly(fam)
    assert all(isinstance(x, Fraction) for x in em)
    assert np.allclose([float(x) for x in em], moments(fam).m, rtol=1e-15)
    for a, b in zip(eP, orthopoly(fam).P):
        assert np.allclose([float(x) for x in a], b, atol=1e-13)
    for n in range(1, 5):
        assert sum(c * em[i] for i, c in enumerate(eP[n])) == 0


def test_exact_moments_irrational_family():
    assert exact_moments(DistFamily("twopoint", 0.3)) is None
    assert exact_moments(DistFamily("twopoint", 0.2))[3] == Fraction(3, 2)


def test_parse_and_model():
    assert DistFamily.parse("exp") == CENTERED_EXPONENTIAL
    assert DistFamily.parse("twopoint:0.2") == DistFamily("twopoint", 0.2)
    m = Model.parse("exp,gaussian")
    assert m.family(1) == GAUSSIAN and not m.is_gaussian
    assert str(m) == "centered_exponential,gaussian"
    with pytest.raises(DistributionError):
        m.family(2)
    for bad in ("cauchy", "twopoint", "twopoint:1.5", "gaussian:0.3"):
        with pytest.raises(DistributionError):
            DistFamily.parse(bad)
