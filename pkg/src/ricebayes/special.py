"""Modified Bessel functions I0, I1 and the Fisher-information integral Psi.

Bessel evaluation uses the ascending power series for arguments up to
``SERIES_MAX`` and the Hankel asymptotic expansion of the exponentially
scaled functions beyond it.  Both branches are evaluated with Horner's
rule on whole arrays, so the routines are cheap enough to sit inside an
MCMC inner loop.

``psi`` is the scalar integral

    Psi(rho) = int_0^inf y^3/rho^2 exp(-y^2/(2 rho) - rho/2) I1(y)^2/I0(y) dy - rho

which enters every entry of the Rician Fisher information.  With
``y = sqrt(2 rho) v`` the integrand becomes ``4 v^3 exp(-(v - s)^2)
I1*(y)^2 / I0*(y)`` with ``s = sqrt(rho/2)``: a unit-width Gaussian bump
whatever the value of rho, integrated by adaptive Gauss-Kronrod.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import erfc

from .errors import DomainError, QuadratureError
from .quadrature import gauss_kronrod

SERIES_MAX = 25.0

_N_SERIES = 90
_fact = [math.factorial(m) for m in range(_N_SERIES + 2)]
# I0(y) = sum t^m / (m!)^2,  I1(y) = (y/2) sum t^m / (m! (m+1)!),  t = y^2/4
_C0 = np.array([1.0 / (_fact[m] * _fact[m]) for m in range(_N_SERIES)])
_C1 = np.array([1.0 / (_fact[m] * _fact[m + 1]) for m in range(_N_SERIES)])


def _series_terms_needed(t):
    # smallest M such that the dropped tail is below 1e-18 of the sum
    total, term, m = 1.0, 1.0, 0
    while True:
        m += 1
        term *= t / (m * m)
        total += term
        if m > math.sqrt(t) and term < 1e-18 * total:
            return m + 1


# terms for I0 dominate those for I1 at the same t
_TERMS_BY_T = np.array([_series_terms_needed(float(t))
                        for t in range(int(SERIES_MAX ** 2 / 4) + 2)])


def _asymptotic_coefficients(order, count):
    # I_nu*(y) ~ (2 pi y)^(-1/2) sum_k (-1)^k prod_{j<=k}(4nu^2-(2j-1)^2) / (k! 8^k) y^-k
    mu = 4.0 * order * order
    coef = [1.0]
    for k in range(1, count):
        coef.append(-coef[-1] * (mu - (2 * k - 1) ** 2) / (k * 8.0))
    return np.array(coef)


_N_ASYM = 24
_A0 = _asymptotic_coefficients(0, _N_ASYM)
_A1 = _asymptotic_coefficients(1, _N_ASYM)


def _as_array(y, name="y"):
    arr = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    if np.any(arr < 0):
        raise DomainError(f"{name} must be nonnegative")
    return arr


def _horner(coef, z, count):
    out = np.full_like(z, coef[count - 1])
    for c in coef[count - 2::-1]:
        out *= z
        out += c
    return out


def _series_sums(y, need_i1):
    t = 0.25 * y * y
    count = int(_TERMS_BY_T[int(math.ceil(t.max()))]) if t.size else 1
    count = min(count, _N_SERIES)
    s0 = _horner(_C0, t, count)
    s1 = _horner(_C1, t, count) if need_i1 else None
    return s0, s1


def _asymptotic_sums(y, need_i1):
    z = 1.0 / y
    s0 = _horner(_A0, z, _N_ASYM)
    s1 = _horner(_A1, z, _N_ASYM) if need_i1 else None
    return s0, s1


def _split(y):
    small = y <= SERIES_MAX
    return small, ~small


def _wrap(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


def bessel_i0_scaled(y):
    """Exponentially scaled modified Bessel function ``exp(-y) I0(y)``.

    Accepts a scalar or an array of nonnegative finite values.
    """
    arr = _as_array(y)
    flat = np.atleast_1d(arr).ravel()
    out = np.empty_like(flat)
    small, large = _split(flat)
    if small.any():
        ys = flat[small]
        out[small] = np.exp(-ys) * _series_sums(ys, False)[0]
    if large.any():
        yl = flat[large]
        out[large] = _asymptotic_sums(yl, False)[0] / np.sqrt(2.0 * np.pi * yl)
    return _wrap(out.reshape(arr.shape), y)


def bessel_i1_scaled(y):
    """Exponentially scaled modified Bessel function ``exp(-y) I1(y)``."""
    arr = _as_array(y)
    flat = np.atleast_1d(arr).ravel()
    out = np.empty_like(flat)
    small, large = _split(flat)
    if small.any():
        ys = flat[small]
        out[small] = np.exp(-ys) * 0.5 * ys * _series_sums(ys, True)[1]
    if large.any():
        yl = flat[large]
        out[large] = _asymptotic_sums(yl, True)[1] / np.sqrt(2.0 * np.pi * yl)
    return _wrap(out.reshape(arr.shape), y)


def log_bessel_i0(y):
    """Natural log of I0(y), finite for every representable ``y >= 0``."""
    arr = _as_array(y)
    flat = np.atleast_1d(arr).ravel()
    out = np.empty_like(flat)
    small, large = _split(flat)
    if small.any():
        out[small] = np.log(_series_sums(flat[small], False)[0])
    if large.any():
        yl = flat[large]
        out[large] = (yl + np.log(_asymptotic_sums(yl, False)[0])
                      - 0.5 * np.log(2.0 * np.pi * yl))
    return _wrap(out.reshape(arr.shape), y)


def bessel_ratio(y):
    """``I1(y) / I0(y)``, in ``[0, 1)`` and increasing in ``y``."""
    arr = _as_array(y)
    flat = np.atleast_1d(arr).ravel()
    out = np.empty_like(flat)
    small, large = _split(flat)
    if small.any():
        ys = flat[small]
        s0, s1 = _series_sums(ys, True)
        out[small] = 0.5 * ys * s1 / s0
    if large.any():
        s0, s1 = _asymptotic_sums(flat[large], True)
        out[large] = s1 / s0
    return _wrap(out.reshape(arr.shape), y)


def _squared_ratio_scaled(y):
    # I1*(y)^2 / I0*(y) without the domain checks, y >= 0
    flat = y.ravel()
    out = np.empty_like(flat)
    small, large = _split(flat)
    if small.any():
        ys = flat[small]
        s0, s1 = _series_sums(ys, True)
        half = 0.5 * ys
        out[small] = np.exp(-ys) * half * half * s1 * s1 / s0
    if large.any():
        yl = flat[large]
        s0, s1 = _asymptotic_sums(yl, True)
        out[large] = s1 * s1 / s0 / np.sqrt(2.0 * np.pi * yl)
    return out.reshape(y.shape)


# -- Psi ---------------------------------------------------------------------

# Integration runs over v in [0, s + _TAIL_CUT]; the dropped tail is bounded
# by the envelope 4 v^3 exp(-(v - s)^2) since I1*^2 / I0* <= 1.
_TAIL_CUT = 9.0


def _tail_envelope(s, c):
    # int_c^inf 4 (s + w)^3 exp(-w^2) dw, closed form term by term
    e = math.exp(-c * c)
    m0 = 0.5 * math.sqrt(math.pi) * erfc(c)
    m1 = 0.5 * e
    m2 = 0.5 * c * e + 0.5 * m0
    m3 = 0.5 * (c * c + 1.0) * e
    return 4.0 * (s ** 3 * m0 + 3 * s * s * m1 + 3 * s * m2 + m3)


def _psi_integrand(v, s, scale):
    g = v - s
    return 4.0 * v ** 3 * np.exp(-g * g) * _squared_ratio_scaled(scale * v)


def _fisher_integral(rho, epsrel=1e-14):
    """The integral part of Psi (i.e. Psi + rho) for an array of rho values.

    Returns the values and certified absolute error bounds.
    """
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    s = np.sqrt(0.5 * rho)
    scale = np.sqrt(2.0 * rho)
    # unit-width starting panels around the Gaussian bump
    offsets = np.arange(-8.0, _TAIL_CUT + 1.0)
    edges = np.maximum(s[:, None] + offsets[None, :], 0.0)
    edges[:, 0] = 0.0
    lo = edges[:, :-1]
    hi = edges[:, 1:]
    owner = np.repeat(np.arange(rho.size), lo.shape[1])
    vals, errs = gauss_kronrod(
        _psi_integrand, lo.ravel(), hi.ravel(),
        args=(np.repeat(s, lo.shape[1]), np.repeat(scale, lo.shape[1])),
        epsabs=1e-300, epsrel=epsrel)
    total = np.bincount(owner, weights=vals, minlength=rho.size)
    err = np.bincount(owner, weights=errs, minlength=rho.size)
    tail = np.array([_tail_envelope(si, _TAIL_CUT) for si in s])
    err = err + tail + 8.0 * np.finfo(float).eps * total
    return total, err


def _check_rho(rho):
    arr = np.asarray(rho, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError("rho must be positive and finite")
    return arr


def psi_with_error(rho):
    """Psi(rho) together with a certified absolute error bound."""
    arr = _check_rho(rho)
    integral, err = _fisher_integral(arr.ravel())
    value = integral - arr.ravel()
    err = err + 4.0 * np.finfo(float).eps * (integral + arr.ravel())
    if np.any(err > 1e-8):
        raise QuadratureError(f"Psi error bound {err.max():.3g} exceeds 1e-8")
    value = value.reshape(arr.shape)
    err = err.reshape(arr.shape)
    if arr.ndim == 0:
        return float(value), float(err)
    return value, err


def psi(rho):
    """Psi(rho), strictly increasing from 0 towards 1."""
    return psi_with_error(rho)[0]


def jeffreys_factor_with_error(rho):
    """``(rho + 1) Psi(rho) - rho`` by direct quadrature, with error bound.

    This is ``alpha^4 / 4`` times the determinant of the per-observation
    Fisher information; its square root is the Jeffreys prior up to the
    ``1/alpha^2`` scale factor.
    """
    arr = _check_rho(rho)
    r = arr.ravel()
    integral, err = _fisher_integral(r)
    value = (r + 1.0) * (integral - r) - r
    eps = np.finfo(float).eps
    err = (r + 1.0) * err + 8.0 * eps * ((r + 1.0) * integral + r * (r + 2.0))
    if np.any(value - err <= 0):
        bad = r[value - err <= 0]
        raise DomainError(
            f"Jeffreys factor not certified positive at rho={bad[0]:.3g}")
    if arr.ndim == 0:
        return float(value[0]), float(err[0])
    return value.reshape(arr.shape), err.reshape(arr.shape)


def jeffreys_factor(rho):
    return jeffreys_factor_with_error(rho)[0]


@dataclass(frozen=True, eq=False)
class PsiTable:
    """Tabulated Psi and Jeffreys factor on a log-spaced rho grid.

    Psi is interpolated with a monotone piecewise cubic in log rho and
    clamped to the open unit interval.  The Jeffreys factor is carried as
    its logarithm (interpolated the same way) so that it keeps full
    relative accuracy where it is tiny.  Outside ``[rho_min, rho_max]``
    both are continued with power laws fitted to the end slopes.
    """

    log_rho: np.ndarray
    psi_knots: np.ndarray
    log_factor_knots: np.ndarray
    rho_min: float
    rho_max: float
    order: int = 3

    def __post_init__(self):
        object.__setattr__(self, "_psi", PchipInterpolator(self.log_rho, self.psi_knots,
                                                           extrapolate=False))
        object.__setattr__(self, "_logf", PchipInterpolator(self.log_rho, self.log_factor_knots,
                                                            extrapolate=False))
        lr = self.log_rho
        # log-log slopes at the two ends
        lo_psi = (math.log(self.psi_knots[1]) - math.log(self.psi_knots[0])) / (lr[1] - lr[0])
        hi_gap = (math.log1p(-self.psi_knots[-1]) - math.log1p(-self.psi_knots[-2])) / (lr[-1] - lr[-2])
        lo_f = (self.log_factor_knots[1] - self.log_factor_knots[0]) / (lr[1] - lr[0])
        hi_f = (self.log_factor_knots[-1] - self.log_factor_knots[-2]) / (lr[-1] - lr[-2])
        object.__setattr__(self, "_slopes", (lo_psi, hi_gap, lo_f, hi_f))

    @property
    def knots(self):
        return self.log_rho.size

    def psi(self, rho):
        arr = _check_rho(rho)
        x = np.log(np.atleast_1d(arr).ravel())
        out = np.empty_like(x)
        lo_psi, hi_gap, _, _ = self._slopes
        below = x < self.log_rho[0]
        above = x > self.log_rho[-1]
        inside = ~(below | above)
        out[inside] = self._psi(x[inside])
        out[below] = self.psi_knots[0] * np.exp(lo_psi * (x[below] - self.log_rho[0]))
        out[above] = -np.expm1(math.log1p(-self.psi_knots[-1])
                               + hi_gap * (x[above] - self.log_rho[-1]))
        tiny = np.nextafter(0.0, 1.0)
        out = np.clip(out, tiny, np.nextafter(1.0, 0.0))
        return _wrap(out.reshape(arr.shape), rho)

    def log_jeffreys_factor(self, rho):
        """Log of ``(rho + 1) Psi(rho) - rho``."""
        arr = np.asarray(rho, dtype=float)
        x = np.log(np.atleast_1d(arr).ravel())
        out = np.empty_like(x)
        _, _, lo_f, hi_f = self._slopes
        below = x < self.log_rho[0]
        above = x > self.log_rho[-1]
        inside = ~(below | above)
        out[inside] = self._logf(x[inside])
        out[below] = self.log_factor_knots[0] + lo_f * (x[below] - self.log_rho[0])
        out[above] = self.log_factor_knots[-1] + hi_f * (x[above] - self.log_rho[-1])
        # the factor never exceeds 1
        np.minimum(out, 0.0, out=out)
        return _wrap(out.reshape(arr.shape), rho)

    def jeffreys_factor(self, rho):
        return np.exp(self.log_jeffreys_factor(rho))


def build_psi_table(rho_min, rho_max, knots=256):
    """Tabulate Psi on ``knots`` log-spaced points of ``[rho_min, rho_max]``."""
    if not (np.isfinite(rho_min) and np.isfinite(rho_max)) or not 0 < rho_min < rho_max:
        raise DomainError("need 0 < rho_min < rho_max")
    if knots < 16:
        raise DomainError("need at least 16 knots")
    log_rho = np.linspace(math.log(rho_min), math.log(rho_max), int(knots))
    rho = np.exp(log_rho)
    integral, err = _fisher_integral(rho)
    psi_knots = integral - rho
    factor = (rho + 1.0) * psi_knots - rho
    if np.any(err > 1e-8):
        raise QuadratureError("Psi knot error exceeds 1e-8")
    if np.any(np.diff(psi_knots) <= 0) or np.any(psi_knots <= 0) or np.any(psi_knots >= 1):
        raise QuadratureError("tabulated Psi is not increasing inside (0, 1)")
    if np.any(factor <= 0):
        raise QuadratureError("Jeffreys factor lost positivity at the low end of the table; "
                              "raise rho_min")
    return PsiTable(log_rho=log_rho, psi_knots=psi_knots, log_factor_knots=np.log(factor),
                    rho_min=float(rho_min), rho_max=float(rho_max))


@lru_cache(maxsize=None)
def default_psi_table():
    """Shared table over ``[1e-4, 1e4]`` used by the priors and samplers."""
    return build_psi_table(1e-4, 1e4, knots=321)
