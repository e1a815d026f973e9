import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from youden_drm.core import (
    BasisSpec,
    DataError,
    DomainError,
    TwoSampleData,
    WeightedCdf,
    all_candidate_bases,
    basis_eval,
    validate,
)


def test_validate_minimal_ok():
    d = TwoSampleData([1, 2], [3, 4])
    rep = validate(d, BasisSpec.parse("log_x"))
    assert rep.rho == 0.5
    assert (rep.n0, rep.n1, rep.x_min, rep.x_max) == (2, 2, 1.0, 4.0)


def test_validate_log_of_negative():
    with pytest.raises(DomainError):
        validate(TwoSampleData([-1, 2], [3, 4]), BasisSpec.parse("log(x)"))


def test_linear_basis_accepts_negative():
    validate(TwoSampleData([-1, 2], [3, 4]), BasisSpec.parse("x"))


@pytest.mark.parametrize("h,d", [([1], [3, 4]), ([1, 2], [3]), ([], [1, 2])])
def test_size_error(h, d):
    with pytest.raises(DataError):
        TwoSampleData(h, d)


def test_nonfinite_rejected():
    with pytest.raises(DataError):
        TwoSampleData([1, np.nan], [3, 4])
    with pytest.raises(DataError):
        TwoSampleData([1, 2], [3, np.inf])


def test_pooled_layout():
    d = TwoSampleData([3, 1, 2], [9, 7])
    assert d.pooled.tolist() == [1, 2, 3, 7, 9]
    assert d.group.tolist() == [0, 0, 0, 1, 1]
    assert d.rho == pytest.approx(0.4)


def test_basis_eval_examples():
    np.testing.assert_allclose(basis_eval(BasisSpec.parse("log_x"), math.e), [1.0, 1.0])
    np.testing.assert_allclose(basis_eval(BasisSpec.parse("x,x2"), 2.0), [1.0, 2.0, 4.0])
    d = BasisSpec.parse("log_x").dq(1.9640)
    assert d[0] == pytest.approx(0.50917, abs=1e-5)  # value printed to 5 decimals
    h = 1e-6
    fd = (math.log(1.9640 + h) - math.log(1.9640 - h)) / (2 * h)
    assert d[0] == pytest.approx(fd, rel=1e-6)


def test_basis_parsing_and_errors():
    assert BasisSpec.parse('["log(x)", "x^2"]').terms == ("log_x", "x2")
    assert BasisSpec.parse("log_x, x2").label == "log(x) + x^2"
    for bad in ("", "x,x", "sin"):
        with pytest.raises(ValueError):
            BasisSpec.parse(bad)


def test_candidate_set():
    c = all_candidate_bases()
    assert len(c) == 15
    assert len({b.terms for b in c}) == 15


@pytest.mark.parametrize("basis", all_candidate_bases(), ids=lambda b: b.label)
def test_derivative_matches_finite_differences(basis):
    x = np.random.default_rng(7).uniform(0.2, 6.0, 100)
    h = 1e-6 * x
    fd = (basis.q(x + h) - basis.q(x - h)) / (2 * h)[:, None]
    an = basis.dq(x)
    # relative error, with an absolute floor where a derivative is near zero
    np.testing.assert_allclose(an, fd, rtol=1e-6, atol=1e-7)


@given(st.floats(0.01, 100.0), st.sampled_from(all_candidate_bases()))
def test_leading_column_is_one(x, basis):
    Q = basis.Q(x)
    assert Q.shape == (basis.p + 1,)
    assert Q[0] == 1.0


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=30), st.data())
def test_weighted_cdf_monotone_right_continuous(support, data):
    m = np.array(data.draw(st.lists(st.floats(0, 1), min_size=len(support), max_size=len(support))))
    if m.sum() == 0:
        m[0] = 1.0
    m = m / m.sum()
    F = WeightedCdf(support, m)
    grid = np.sort(np.concatenate([F.support, F.support - 1e-9, F.support + 1e-9, [-1e9, 1e9]]))
    vals = F(grid)
    assert np.all(np.diff(vals) >= -1e-15)
    assert F(1e300) == pytest.approx(1.0, abs=1e-8)
    assert F(-1e300) == 0.0
    for s in F.support:
        nxt = np.nextafter(s, np.inf)
        if nxt not in F.support:
            assert F(s) == F(nxt)
        # value at a jump includes the jump
        assert F(s) == pytest.approx(F.masses[F.support <= s].sum(), abs=1e-12)


def test_weighted_cdf_quantile_left_continuous():
    F = WeightedCdf([0.0, 1.0], [0.5, 0.5])
    assert F.quantile(0.5) == 0.0
    assert F.quantile(0.5000001) == 1.0
    assert F.quantile(0.25) == 0.0
    assert F.var() == pytest.approx(0.25)


def test_weighted_cdf_rejects_negative_mass():
    with pytest.raises(ValueError):
        WeightedCdf([0, 1], [1.5, -0.5])
