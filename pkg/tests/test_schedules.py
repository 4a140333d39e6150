import pytest
from hypothesis import given
from hypothesis import strategies as st

from td3fg.errors import InvalidScheduleError
from td3fg.schedules import ScheduleSet, linear_decay, rl_weight


@pytest.mark.parametrize("t,expected", [(0, 1.0), (100, 0.0), (150, 0.0), (25, 0.75)])
def test_linear_decay_values(t, expected):
    assert linear_decay(t, 100) == expected


@pytest.mark.parametrize("horizon", [0, -5])
def test_linear_decay_rejects_bad_horizon(horizon):
    with pytest.raises(InvalidScheduleError):
        linear_decay(3, horizon)


@pytest.mark.parametrize("t,expected", [(0, 0.2), (100, 1.0), (50, 0.7)])
def test_rl_weight_values(t, expected):
    s = ScheduleSet(T1=200, T2=100, T3=100, theta_offset=0.2)
    assert rl_weight(t, s) == pytest.approx(expected, abs=1e-15)


def test_schedule_set_validation():
    with pytest.raises(InvalidScheduleError):
        ScheduleSet(T1=0)
    with pytest.raises(InvalidScheduleError):
        ScheduleSet(theta_offset=1.5)


def test_stock_relation():
    s = ScheduleSet.from_total(10_000)
    assert s.T2 == s.T3 == 5_000
    assert ScheduleSet() == s


def test_bc_scale_multiplies_gamma():
    s = ScheduleSet(T1=10, T2=10, T3=10, bc_scale=3.0)
    assert s.bc_weight(0) == 3.0
    assert s.bc_weight(5) == pytest.approx(1.5)
    assert s.bc_weight(10) == 0.0


@given(st.integers(0, 10_000), st.integers(1, 5_000), st.floats(0.0, 1.0))
def test_delta_saturates_after_crossover(t, T3, offset):
    s = ScheduleSet(T1=T3, T2=T3, T3=T3, theta_offset=offset)
    d = rl_weight(t, s)
    assert offset - 1e-12 <= d <= 1.0
    if t >= T3 * (1.0 - offset):
        assert d == pytest.approx(1.0, abs=1e-12)


@given(st.integers(0, 5_000), st.integers(1, 5_000))
def test_decays_are_monotone(t, T):
    assert linear_decay(t + 1, T) <= linear_decay(t, T)
    assert 0.0 <= linear_decay(t, T) <= 1.0
