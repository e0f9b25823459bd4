import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from anneal_co.schedule import constant_schedule, make_schedule, temperature


def test_linear_example():
    s = make_schedule("linear", 1.0, 0.001, 500)
    assert s.alpha == pytest.approx(1.998)
    assert temperature(s, 0) == 1.0
    assert temperature(s, 500) == 0.001
    assert temperature(s, 1) == pytest.approx(1 / 2.998)
    assert round(temperature(s, 1), 5) == 0.33356


def test_convex_and_degenerate_examples():
    assert make_schedule("convex", 1.0, 0.001, 500).alpha == pytest.approx((1000 ** (1 / 3) - 1) / 500)
    assert round(make_schedule("convex", 1.0, 0.001, 500).alpha, 3) == 0.018
    flat = make_schedule("linear", 1.0, 1.0, 10)
    assert flat.alpha == 0.0
    assert np.all(flat.temperatures() == 1.0)
    assert np.all(constant_schedule(0.5, 7).temperatures() == 0.5)


@pytest.mark.parametrize(
    "args", [("linear", 0.001, 1.0, 5), ("linear", 1.0, 0.0, 5), ("linear", 1.0, 0.1, 0), ("cubic", 1.0, 0.1, 5)]
)
def test_parameter_errors(args):
    with pytest.raises(ValueError):
        make_schedule(*args)


def test_index_errors():
    s = make_schedule("concave", 2.0, 0.01, 4)
    for k in (-1, 5):
        with pytest.raises(IndexError):
            s.temperature(k)


@settings(max_examples=60, deadline=None)
@given(
    kind=st.sampled_from(["linear", "concave", "convex"]),
    tauK=st.floats(1e-4, 1.0),
    ratio=st.floats(1.0, 1e5),
    K=st.integers(1, 600),
)
def test_endpoints_and_monotone(kind, tauK, ratio, K):
    s = make_schedule(kind, tauK * ratio, tauK, K)
    t = s.temperatures()
    assert t[0] == s.tau0
    assert abs(t[-1] - tauK) <= 1e-9
    assert np.all(np.diff(t) <= 0)
    assert all(s.temperature(k) == t[k] for k in (0, K // 2, K))
    # the closed form lands on tauK before the endpoint is pinned
    assert s.tau0 / (1 + s.alpha * K) ** s.power == pytest.approx(tauK, rel=1e-9)


def test_linear_has_constant_inverse_temperature_steps():
    s = make_schedule("linear", 7.3, 0.001, 500)
    inv = 1.0 / s.temperatures()
    steps = np.diff(inv)
    np.testing.assert_allclose(steps, steps[0], rtol=1e-9)
