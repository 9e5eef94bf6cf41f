"""Kernel functions, kernel moments and bandwidth rules of thumb.

Two kernel families are supported: the Epanechnikov density K(u) =
0.75 (1 - u^2) on [-1, 1], and the fourth-order combination
2 sqrt(2) K(sqrt(2) u) - K(u), which integrates to one, has a vanishing
second moment, and takes negative values near the edge of its support.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError

SQRT2 = math.sqrt(2.0)

#: Scale of an (approximately) uniform design on [0, 1]; the scaled time
#: points tau_t = t/T behave like uniform draws, whose standard deviation
#: is 1/sqrt(12).
UNIFORM_DESIGN_SCALE = 1.0 / math.sqrt(12.0)

#: Rule-of-thumb constant for local linear smoothing with the Epanechnikov
#: kernel.
ROT_CONSTANT = 2.34


class Kernel(enum.Enum):
    """Kernel family. Both members are supported on [-1, 1]."""

    EPANECHNIKOV = "epanechnikov"
    FOURTH_ORDER_EPANECHNIKOV = "fourth-order-epanechnikov"

    @property
    def support(self) -> tuple[float, float]:
        return (-1.0, 1.0)


def _epanechnikov(u: np.ndarray) -> np.ndarray:
    return np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u), 0.0)


def kernel_eval(kernel: Kernel, u):
    """Evaluate the kernel at `u` (scalar or array)."""
    ua = np.asarray(u, dtype=float)
    if kernel is Kernel.EPANECHNIKOV:
        out = _epanechnikov(ua)
    elif kernel is Kernel.FOURTH_ORDER_EPANECHNIKOV:
        out = 2.0 * SQRT2 * _epanechnikov(SQRT2 * ua) - _epanechnikov(ua)
    else:  # pragma: no cover - enum is closed
        raise InputError(f"unknown kernel {kernel!r}")
    return out if isinstance(u, np.ndarray) else float(out)


def _adaptive_simpson(f, a, b, tol):
    """Adaptive Simpson quadrature with absolute tolerance `tol`."""

    def simpson(fa, fm, fb, a_, b_):
        return (b_ - a_) / 6.0 * (fa + 4.0 * fm + fb)

    def recurse(a_, b_, fa, fm, fb, whole, tol_, depth):
        m = 0.5 * (a_ + b_)
        lm, rm = 0.5 * (a_ + m), 0.5 * (m + b_)
        flm, frm = f(lm), f(rm)
        left = simpson(fa, flm, fm, a_, m)
        right = simpson(fm, frm, fb, m, b_)
        if depth <= 0 or abs(left + right - whole) <= 15.0 * tol_:
            return left + right + (left + right - whole) / 15.0
        return recurse(a_, m, fa, flm, fm, left, tol_ / 2.0, depth - 1) + recurse(
            m, b_, fm, frm, fb, right, tol_ / 2.0, depth - 1
        )

    fa, fb, fm = f(a), f(b), f(0.5 * (a + b))
    whole = simpson(fa, fm, fb, a, b)
    return recurse(a, b, fa, fm, fb, whole, tol, 48)


def kernel_moment(kernel: Kernel, j: int, squared: bool = False, tol: float = 1e-10) -> float:
    """Kernel moment of order `j` by adaptive Simpson quadrature on [-1, 1].

    Returns the integral of u^j K(u) when `squared` is false and of
    u^j K(u)^2 otherwise. Closed forms exist for both families, but the
    quadrature path doubles as an independent oracle in the test suite.
    """
    if j < 0 or j > 4:
        raise InputError(f"moment order must be in 0..4, got {j}")

    def f(u):
        k = kernel_eval(kernel, u)
        return (u**j) * (k * k if squared else k)

    # Split at the kink of the fourth-order kernel (|u| = 1/sqrt(2)) and at 0
    # so the integrand is smooth on each subinterval.
    knots = [-1.0, -1.0 / SQRT2, 0.0, 1.0 / SQRT2, 1.0]
    return sum(
        _adaptive_simpson(f, lo, hi, tol / (len(knots) - 1))
        for lo, hi in zip(knots[:-1], knots[1:])
    )


@dataclass(frozen=True)
class Bandwidths:
    """Bandwidth bundle in scaled-time units: preliminary `h`, pooled/IC
    `h1`, post-grouping `h2` and test `h3`."""

    h: float
    h1: float
    h2: float
    h3: float

    def __post_init__(self):
        for name in ("h", "h1", "h2", "h3"):
            v = getattr(self, name)
            if not (0.0 < v < 1.0):
                raise InputError(f"bandwidth {name}={v} must lie in (0, 1)")


def rule_of_thumb(t_len: int, kind: str, sigma: float = UNIFORM_DESIGN_SCALE, n: int = 1) -> float:
    """Rule-of-thumb bandwidth 2.34 * sigma * (effective sample)^(-rate).

    kind 'preliminary' uses T^(-1/5), 'pooled' uses (N*T)^(-1/5) and 'test'
    uses T^(-2/5). For preliminary/pooled fits pass sigma = 1/sqrt(12) (the
    uniform design scale, the default); for the test pass the group residual
    scale.
    """
    if t_len < 2:
        raise InputError(f"need t_len >= 2, got {t_len}")
    if n < 1:
        raise InputError(f"need n >= 1, got {n}")
    if not sigma > 0.0:
        raise InputError(f"need sigma > 0, got {sigma}")
    if kind == "preliminary":
        return ROT_CONSTANT * sigma * float(t_len) ** (-0.2)
    if kind == "pooled":
        return ROT_CONSTANT * sigma * float(n * t_len) ** (-0.2)
    if kind == "test":
        return ROT_CONSTANT * sigma * float(t_len) ** (-0.4)
    raise InputError(f"unknown bandwidth kind {kind!r}")
