import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tpace.data import TimeDoublet
from tpace.errors import DegenerateDataError, ParameterError
from tpace.survival import km_estimate, logrank_arrays, logrank_test, mdd, one_sided_p

import oracles
from conftest import make_dataset


def test_km_textbook():
    # 6 subjects: events at 1, 2 (two), 4; censored at 3 and 5
    curve = km_estimate([TimeDoublet(t, d) for t, d in [(1, 1), (2, 1), (2, 1), (3, 0), (4, 1), (5, 0)]])
    assert curve.times.tolist() == [1, 2, 3, 4, 5]
    expected = [5 / 6, 5 / 6 * 3 / 5, 5 / 6 * 3 / 5, 5 / 6 * 3 / 5 * 1 / 2, 5 / 6 * 3 / 5 * 1 / 2]
    assert np.allclose(curve.survival, expected, rtol=0, atol=1e-15)
    assert curve.steps[1].at_risk == 5 and curve.steps[1].events == 2
    assert curve.survival_at(0.5) == 1.0
    assert curve.survival_at(3.7) == pytest.approx(0.5)
    assert curve.median() == 2


def test_km_median_not_reached_and_empty():
    assert km_estimate([TimeDoublet(1.0, 0), TimeDoublet(2.0, 1), TimeDoublet(3.0, 0), TimeDoublet(4.0, 0)]).median() == math.inf
    with pytest.raises(DegenerateDataError):
        km_estimate([])


def test_logrank_matches_hand_computation():
    data, expected_e, variance, z = oracles.logrank_by_hand()
    res = logrank_arrays(data["time"], data["event"], data["experimental"])
    assert res.expected_experimental == pytest.approx(expected_e, abs=1e-12)
    assert res.variance == pytest.approx(variance, abs=1e-12)
    assert res.z == pytest.approx(z, abs=1e-12)
    assert res.chi_square == pytest.approx(z * z, abs=1e-12)
    assert res.p_one_sided == pytest.approx(0.5 * (1 + math.erf(z / math.sqrt(2))), abs=1e-12)
    assert res.observed_experimental + res.observed_control == 4


def test_logrank_dataset_wrapper(tiny):
    direct = logrank_arrays(tiny.time, tiny.event, tiny.experimental)
    assert logrank_test(tiny) == direct


def test_logrank_no_events():
    with pytest.raises(DegenerateDataError, match="degenerate: no events"):
        logrank_arrays([1.0, 2.0], [0, 0], [True, False])


def test_logrank_sign_convention():
    # experimental events all late: z < 0, small one-sided p
    time = list(range(1, 21))
    exp = [t > 10 for t in time]
    res = logrank_arrays(time, [1] * 20, exp)
    assert res.z < 0 and res.p_one_sided < 0.01
    assert res.p_two_sided == pytest.approx(2 * res.p_one_sided)


def test_one_sided_p_symmetry():
    assert one_sided_p(0.0) == 0.5
    assert one_sided_p(-1.959963984540054) == pytest.approx(0.025, abs=1e-12)


@given(st.floats(10, 5000), st.floats(0.05, 0.95))
@settings(max_examples=100, deadline=None)
def test_mdd_matches_independent_formula(n, a):
    assert mdd(n, a) == pytest.approx(oracles.mdd_by_hand(n, a), rel=1e-12)


def test_mdd_validation():
    for bad in [(0, 0.5), (10, 0.0), (10, 1.0)]:
        with pytest.raises(ParameterError):
            mdd(*bad)
    with pytest.raises(ParameterError):
        mdd(10, 0.5, 0.0)


def test_mdd_monotone_in_events():
    values = [mdd(n, 2 / 3) for n in (50, 100, 349, 1000)]
    assert values == sorted(values)
