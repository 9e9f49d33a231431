"""
Scalar special functions and wavenumber-dependent constants.

Everything here is a pure function of its arguments. The guards reject
parameters within ``GUARD_TOL`` (relative to pi) of the singular sets, so no
NaN or infinity leaves the module without an error.
"""

import cmath
import logging
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import NearNyquist, SingularParameter

logger = logging.getLogger(__name__)

GUARD_TOL = 1e-8

# Below this modulus the closed form of B(z) is replaced by its Taylor series.
SERIES_THRESHOLD = 1e-3


@dataclass(frozen=True)
class WaveParameters:
    k: float
    L: float
    h: float

    @property
    def s(self):
        return self.k * self.h

    @property
    def t(self):
        return self.k * self.L

    @classmethod
    def for_grid(cls, k, L, n, tol=GUARD_TOL):
        params = cls(k=float(k), L=float(L), h=float(L) / n)
        nyquist_guard(params.k, params.h, tol)
        return params


def _near_multiple(x, period, tol):
    """Return the nearest nonzero multiple m of ``period`` if x is within tol*pi of it."""
    m = round(x / period)
    if m != 0 and abs(x - m * period) / math.pi <= tol:
        return m
    return None


def bernoulli(z):
    """Bernoulli function B(z) = z / (e^z - 1) with B(0) = 1."""
    z = complex(z)
    if not cmath.isfinite(z):
        raise SingularParameter(f"bernoulli argument {z!r} is not finite")
    if abs(z) < SERIES_THRESHOLD:
        z2 = z * z
        return 1.0 - z / 2.0 + z2 / 12.0 - z2 * z2 / 720.0
    # Poles of B sit at 2*pi*i*m, m != 0.
    if abs(z.real) / math.pi <= GUARD_TOL:
        m = _near_multiple(z.imag, 2.0 * math.pi, GUARD_TOL)
        if m is not None:
            raise SingularParameter(f"bernoulli argument {z!r} is at the pole 2*pi*i*{m}")
    # e^z - 1 = 2 sinh(z/2) e^{z/2} avoids the cancellation of e^z - 1.
    half = 0.5 * z
    return half * cmath.exp(-half) / cmath.sinh(half)


def theta(s, tol=GUARD_TOL):
    """Phase-fitted weight s^2 / (4 sin^2(s/2)), equal to |B(is)|^2."""
    s = float(s)
    if s == 0.0:
        return 1.0
    m = _near_multiple(s, 2.0 * math.pi, tol)
    if m is not None:
        raise SingularParameter(f"theta is singular at s={s!r} (near {2 * m}*pi)")
    ratio = (0.5 * s) / math.sin(0.5 * s)
    return ratio * ratio


def phase_factor_m(s):
    """Boundary correction factor m(s) = e^{-is/2} cos(s/2)."""
    s = float(s)
    return cmath.exp(-0.5j * s) * math.cos(0.5 * s)


def shifted_wavenumber(k, h, tol=GUARD_TOL):
    """Shifted wavenumber (2/h) sin(kh/2), i.e. k / sqrt(theta(kh))."""
    theta(k * h, tol)
    return 2.0 / h * math.sin(0.5 * k * h)


def stability_constant_a0(s, t, L, tol=GUARD_TOL):
    """Stability constant A_0(s, t) of the discrete well-posedness estimate."""
    if t <= 0 or L <= 0:
        raise ValueError(f"A_0 needs t > 0 and L > 0, got t={t!r}, L={L!r}")
    m = round(s / math.pi)
    if m % 2 == 1 and abs(s - m * math.pi) / math.pi <= tol:
        raise SingularParameter(f"sec(s/2) is singular at s={s!r} (near {m}*pi)")
    weight = theta(s, tol)
    sec = abs(1.0 / math.cos(0.5 * s))
    return L / math.sqrt(2.0 * weight) * sec + L / (2.0 * t) * sec * sec


def nyquist_guard(k, h, tol=GUARD_TOL):
    """Reject kh within ``tol`` (relative to pi) of a nonzero multiple of pi."""
    kh = k * h
    m = _near_multiple(kh, math.pi, tol)
    if m is not None:
        logger.debug("nyquist guard tripped: kh=%r multiple=%d tol=%g", kh, m, tol)
        raise NearNyquist(kh, m, tol)


def envelope_g(t):
    """g(t) = sin^2(sqrt t) / t, the envelope behind the interior multiplier bound."""
    return envelope_h(t) ** 2


def envelope_h(t):
    """h(t) = sin(sqrt t) / sqrt t, the envelope behind the boundary multiplier bound."""
    return np.sinc(np.sqrt(t) / np.pi)


def envelope_derivative_sup(which, samples=100_000, t_min=1e-6, t_max=1e4):
    """Largest |g'(t)| (or |h'(t)|) over a log-spaced sample of (0, t_max].

    Central differences with step 1e-6 * max(t, 1), clipped to t/2 so the
    stencil stays inside the domain. A numerical check, not a proof.
    """
    if samples < 1000:
        raise ValueError(f"need at least 1000 samples, got {samples}")
    envelopes = {"g": envelope_g, "h": envelope_h}
    try:
        fn = envelopes[which]
    except KeyError:
        raise ValueError(f"unknown envelope {which!r}; expected 'g' or 'h'") from None

    t = np.logspace(math.log10(t_min), math.log10(t_max), samples)
    step = np.minimum(1e-6 * np.maximum(t, 1.0), 0.5 * t)
    derivative = (fn(t + step) - fn(t - step)) / (2.0 * step)
    return float(np.max(np.abs(derivative)))
