"""Airy functions of real argument with an overflow-safe scaled form.

For x > 0 the scaled values carry Ai(x) exp(+xi) and Bi(x) exp(-xi) with
xi = (2/3) x^(3/2); for x <= 0 no factor is split off. This matches the
convention of :func:`scipy.special.airye`. The values come from
:func:`scipy.special.airy` for x <= 25 and from :func:`scipy.special.airye`
beyond.
"""

from typing import NamedTuple

import numpy as np
from scipy import special


_DIRECT_LIMIT = 25.0


class AiryQuad(NamedTuple):
    """Values of Ai, Bi, Ai' and Bi' at one argument (or an array of them)."""

    ai: np.ndarray
    bi: np.ndarray
    aip: np.ndarray
    bip: np.ndarray


def scaling_exponent(x):
    """Exponent xi = (2/3) x^(3/2) for x > 0, zero otherwise."""
    x = np.asarray(x, dtype=float)
    return np.where(x > 0.0, (2.0 / 3.0) * np.abs(x) ** 1.5, 0.0)


def airy_scaled(x):
    """Scaled Airy quadruple and the split-off exponent.

    Returns ``(quad, xi)`` such that ``Ai = quad.ai * exp(-xi)``,
    ``Ai' = quad.aip * exp(-xi)``, ``Bi = quad.bi * exp(xi)`` and
    ``Bi' = quad.bip * exp(xi)``.
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("Airy argument must be finite")
    xi = scaling_exponent(x)
    # cephes airy is much faster than airye and neither underflows nor
    # overflows for moderate arguments; scale it by hand there
    small = x <= _DIRECT_LIMIT
    eai, eaip, ebi, ebip = (np.empty_like(x) for _ in range(4))
    if np.any(small):
        ai, aip, bi, bip = special.airy(x[small])
        grow = np.exp(xi[small])
        eai[small], eaip[small] = ai * grow, aip * grow
        ebi[small], ebip[small] = bi / grow, bip / grow
    if not np.all(small):
        big = ~small
        eai[big], eaip[big], ebi[big], ebip[big] = special.airye(x[big])
    return AiryQuad(eai, ebi, eaip, ebip), xi


def airy_quad(x):
    """Unscaled Ai, Bi, Ai', Bi' at ``x``.

    Raises
    ------
    OverflowError
        If Bi or Bi' exceeds the floating-point range at any argument; use
        :func:`airy_scaled` there.
    """
    quad, xi = airy_scaled(x)
    with np.errstate(over="ignore"):
        grow = np.exp(xi)
        decay = np.exp(-xi)
        bi = quad.bi * grow
        bip = quad.bip * grow
    if not (np.all(np.isfinite(bi)) and np.all(np.isfinite(bip))):
        raise OverflowError("Bi overflows at the requested argument; use airy_scaled")
    return AiryQuad(quad.ai * decay, bi, quad.aip * decay, bip)
