import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nitride_rts.special import airy_quad, airy_scaled, scaling_exponent

mp.mp.dps = 40


def _reference(x):
    """Scaled quadruple from mpmath at 40 digits."""
    xi = mp.mpf(2) / 3 * mp.mpf(x) ** mp.mpf(1.5) if x > 0 else mp.mpf(0)
    up, down = mp.exp(xi), mp.exp(-xi)
    return (
        float(mp.airyai(x) * up),
        float(mp.airybi(x) * down),
        float(mp.airyai(x, 1) * up),
        float(mp.airybi(x, 1) * down),
    )


def _maclaurin(x, terms=60):
    """Ai, Bi from the power series about 0 (independent of any library routine)."""
    c1 = 1 / (3 ** (2 / 3) * math.gamma(2 / 3))
    c2 = 1 / (3 ** (1 / 3) * math.gamma(1 / 3))
    f = g = 0.0
    tf, tg = 1.0, x
    for k in range(terms):
        f += tf
        g += tg
        tf *= x**3 / ((3 * k + 2) * (3 * k + 3))
        tg *= x**3 / ((3 * k + 3) * (3 * k + 4))
    return c1 * f - c2 * g, math.sqrt(3) * (c1 * f + c2 * g)


@pytest.mark.parametrize("x", [-40.0, -12.5, -3.3, -1e-6, 0.0, 0.7, 2.1, 8.0, 24.99, 25.01, 75.0, 200.0])
def test_scaled_values_match_high_precision(x):
    quad, xi = airy_scaled(np.array([x]))
    ref = _reference(x)
    got = [quad.ai[0], quad.bi[0], quad.aip[0], quad.bip[0]]
    for g, r in zip(got, ref):
        # absolute floor covers the zeros of the oscillatory branch
        assert abs(g - r) <= 1e-12 * max(abs(r), 1e-3)
    assert xi[0] == pytest.approx(float(scaling_exponent(x)))


@pytest.mark.parametrize("x", [-2.0, -0.5, 0.0, 0.3, 1.5])
def test_series_oracle_near_origin(x):
    ai, bi = _maclaurin(x)
    q = airy_quad(np.array([x]))
    assert q.ai[0] == pytest.approx(ai, rel=1e-12, abs=1e-15)
    assert q.bi[0] == pytest.approx(bi, rel=1e-12, abs=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=-60.0, max_value=400.0, allow_nan=False))
def test_wronskian_scaled(x):
    # the exponential factors cancel: Ai Bi' - Ai' Bi = 1/pi in scaled form too
    q, _ = airy_scaled(np.array([x]))
    w = q.ai[0] * q.bip[0] - q.aip[0] * q.bi[0]
    assert w == pytest.approx(1 / math.pi, rel=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.floats(min_value=-30.0, max_value=150.0, allow_nan=False))
def test_random_points_against_mpmath(x):
    quad, _ = airy_scaled(np.array([x]))
    ref = _reference(x)
    for g, r in zip([quad.ai[0], quad.bi[0], quad.aip[0], quad.bip[0]], ref):
        assert abs(g - r) <= 1e-11 * max(abs(r), 1e-3)


def test_shapes_and_scalar_input():
    q, xi = airy_scaled(1.0)
    assert np.ndim(q.ai) == 0 and np.ndim(xi) == 0
    q, xi = airy_scaled(np.zeros((3, 4)))
    assert q.bi.shape == (3, 4)


def test_unscaled_overflow_is_reported():
    with pytest.raises(OverflowError):
        airy_quad(np.array([150.0]))


def test_non_finite_argument_rejected():
    with pytest.raises(ValueError):
        airy_scaled(np.array([np.nan]))
