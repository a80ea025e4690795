"""One-dimensional stripe energy ``e_tau(h)`` and optimal stripe widths.

For density-1/2 stripes of width ``h`` (period ``2h``)::

    e_tau(h) = -1/h + C(sigma/h) / h^(q-1),   sigma = tau^(1/beta)
    C(s)     = 4 c1 c2 * S_{q-2}(s)
    S_m(s)   = sum_{k>=0} (2k+1+s)^(-m) - (2k+2+s)^(-m)

The paired series ``S_m`` converges for every ``m > 0``; it is summed directly
for ``k < K`` and the remainder is taken from the Euler-Maclaurin formula,
whose error for a completely monotone summand is bounded by the first
omitted term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from .kernel import ModelParams, c1_constant, c2_constant

SCAN_FLOOR = 1e-2
SCAN_CEIL = 1e3
SCAN_POINTS = 200


@dataclass(frozen=True)
class SeriesValue:
    value: float | np.ndarray
    truncation_k: int
    tail_bound: float


@dataclass
class PeriodResult:
    h: float
    energy: float
    multiplicity: list[float] = field(default_factory=list)
    at_scan_floor: bool = False
    derivative: float = float("nan")


# ---------------------------------------------------------------------------
# paired series


def _rising(m: float, n: int) -> float:
    out = 1.0
    for j in range(n):
        out *= m + j
    return out


def _g_deriv(m: float, k: float, s, n: int):
    """n-th derivative in k of ``(2k+1+s)^-m - (2k+2+s)^-m``."""
    coef = (-2.0) ** n * _rising(m, n)
    return coef * ((2 * k + 1 + s) ** (-m - n) - (2 * k + 2 + s) ** (-m - n))


def _g_integral(m: float, K: int, s):
    """``int_K^inf g(k) dk = 1/2 int_{2K+1+s}^{2K+2+s} x^-m dx``."""
    a = 2 * K + 1 + s
    if m == 1:
        return 0.5 * np.log1p(1.0 / a)
    # (a+1)^(1-m) - a^(1-m) computed as a^(1-m) * expm1((1-m) log1p(1/a))
    return 0.5 * a ** (1 - m) * np.expm1((1 - m) * np.log1p(1.0 / a)) / (1 - m)


def paired_sum(m: float, s, tol: float = 1e-14, k_start: int = 8):
    """Return ``(S_m(s), K, bound)`` with ``|S_m - value| <= bound <= tol``."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    if not m > 0:
        raise ValueError(f"paired series needs a positive exponent, got {m}")
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(s_arr < 0):
        raise ValueError("s must be >= 0")
    s_min = float(s_arr.min())
    K = k_start
    while True:
        bound = abs(_g_deriv(m, K, s_min, 5)) / 30240.0
        if bound <= tol or K > 1 << 20:
            break
        K *= 2
    if bound > tol:
        raise ArithmeticError(f"paired series did not reach tol={tol}")
    k = np.arange(K, dtype=float)[:, None]
    head = ((2 * k + 1 + s_arr) ** (-m) - (2 * k + 2 + s_arr) ** (-m)).sum(axis=0)
    tail = (_g_integral(m, K, s_arr) + 0.5 * _g_deriv(m, K, s_arr, 0)
            - _g_deriv(m, K, s_arr, 1) / 12.0 + _g_deriv(m, K, s_arr, 3) / 720.0)
    value = head + tail
    if np.ndim(s) == 0:
        value = float(value[0])
    return value, K, float(bound)


def paired_sum_hurwitz(m: float, s):
    """Cross-check of ``S_m`` through Hurwitz zeta (m > 1) or digamma (m = 1)."""
    s = np.asarray(s, dtype=float)
    if m == 1:
        return 0.5 * (special.digamma((2 + s) / 2) - special.digamma((1 + s) / 2))
    return 2.0 ** (-m) * (special.zeta(m, (1 + s) / 2) - special.zeta(m, (2 + s) / 2))


def _series_prefactor(params: ModelParams) -> float:
    return 4.0 * c1_constant(params.d, params.p) * c2_constant(params.q)


def c_series(s, params: ModelParams, tol: float = 1e-14) -> SeriesValue:
    """``C(s)`` with a guaranteed truncation bound."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    if params.q < 3:
        raise ValueError("series diverges for q < 3")
    pref = _series_prefactor(params)
    val, K, bound = paired_sum(params.q - 2, s, tol / pref)
    return SeriesValue(pref * np.asarray(val) if np.ndim(val) else pref * val, K, pref * bound)


def c_series_derivatives(s, params: ModelParams, tol: float = 1e-14):
    """``(C, dC/ds, d2C/ds2)`` from the term-wise differentiated paired series."""
    q = params.q
    pref = _series_prefactor(params)
    c0 = paired_sum(q - 2, s, tol / pref)[0]
    c1 = paired_sum(q - 1, s, tol / pref)[0]
    c2 = paired_sum(q, s, tol / pref)[0]
    return pref * c0, -pref * (q - 2) * c1, pref * (q - 2) * (q - 1) * c2


# ---------------------------------------------------------------------------
# energy density and derivatives


def _check_h(h):
    h = np.asarray(h, dtype=float)
    if np.any(~(h > 0)):
        raise ValueError("stripe width h must be positive")
    return h


def _scalar_or_array(x, like):
    return float(x) if np.ndim(like) == 0 else x


def e_tau(h, params: ModelParams, tol: float = 1e-14):
    h = _check_h(h)
    s = params.sigma / h
    C = c_series(s, params, tol).value
    return _scalar_or_array(-1.0 / h + C / h ** (params.q - 1), h)


def de_tau(h, params: ModelParams, tol: float = 1e-14):
    h = _check_h(h)
    q = params.q
    s = params.sigma / h
    C, dC, _ = c_series_derivatives(s, params, tol)
    out = 1.0 / h**2 - (q - 1) * C / h**q - s * dC / h**q
    return _scalar_or_array(out, h)


def d2e_tau(h, params: ModelParams, tol: float = 1e-14):
    """Second h-derivative.

    The ``s C'(s)`` coefficient is ``2q``: ``(q-1)`` and ``q`` from
    differentiating the powers of ``h`` plus one from differentiating
    ``s = sigma/h`` inside ``s C'(s)``.
    """
    h = _check_h(h)
    q = params.q
    s = params.sigma / h
    C, dC, d2C = c_series_derivatives(s, params, tol)
    out = (-2.0 / h**3 + q * (q - 1) * C / h ** (q + 1)
           + 2 * q * s * dC / h ** (q + 1) + s * s * d2C / h ** (q + 1))
    return _scalar_or_array(out, h)


def e_tau_min_closed_form(params: ModelParams) -> tuple[float, float]:
    """``(h*_0, e_0(h*_0))`` at tau = 0: ``h^(q-2) = (q-1) C(0)``."""
    q = params.q
    C0 = c_series(0.0, params).value
    h0 = ((q - 1) * C0) ** (1.0 / (q - 2))
    return h0, -(q - 2) / ((q - 1) * h0)


# ---------------------------------------------------------------------------
# optimal widths


def h_star(params: ModelParams, tol: float = 1e-12) -> PeriodResult:
    """Global minimiser of ``e_tau`` over ``h > 0``: log scan, then root of ``de_tau``."""
    grid = np.logspace(math.log10(SCAN_FLOOR), math.log10(SCAN_CEIL), SCAN_POINTS)
    vals = e_tau(grid, params)
    i = int(np.argmin(vals))
    if i == 0 or i == len(grid) - 1:
        raise ArithmeticError("no interior minimum located")
    lo, hi = grid[i - 1], grid[i + 1]
    if not (de_tau(lo, params) < 0 < de_tau(hi, params)):
        raise ArithmeticError("no interior minimum located")
    h = optimize.brentq(lambda x: de_tau(x, params), lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
    der = de_tau(h, params)
    if abs(der) > tol:
        raise ArithmeticError(f"stationarity residual {der:.3e} exceeds tol")
    return PeriodResult(h=h, energy=e_tau(h, params), multiplicity=[h],
                        at_scan_floor=i <= 1, derivative=der)


def commensurate_widths(length: float, floor: float = SCAN_FLOOR) -> np.ndarray:
    """Widths ``length/(2k)`` for ``k = 1..k_max`` with the last one below ``floor``."""
    k_max = max(1, int(math.floor(length / (2 * floor))) + 1)
    return length / (2.0 * np.arange(1, k_max + 1))


def h_box(L: float, params: ModelParams, tol: float = 1e-12) -> PeriodResult:
    """Best stripe width among those commensurate with the box side ``L``."""
    if not L > 0:
        raise ValueError("L must be positive")
    widths = commensurate_widths(L)
    vals = e_tau(widths, params)
    i = int(np.argmin(vals))
    emin = float(vals[i])
    ties = sorted(float(w) for w in widths[vals <= emin + tol])
    h = float(widths[i])
    return PeriodResult(h=h, energy=emin, multiplicity=ties,
                        at_scan_floor=i == len(widths) - 1,
                        derivative=de_tau(h, params))


def h_interval(length: float, params: ModelParams, tol: float = 1e-12) -> PeriodResult:
    """``h_tau(I)``: same discrete problem for an interval of the given length."""
    return h_box(length, params, tol)


@dataclass(frozen=True)
class ConvexityWindow:
    c1bar: float
    c2bar: float
    c3bar: float
    argmin_d2: float


def convexity_window(params: ModelParams, eps: float, n_grid: int = 2001) -> ConvexityWindow:
    """Sublevel window ``{h: e_tau(h) <= e_0(h*_0) + eps}`` and min of ``d2e_tau`` on it."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    _, e0 = e_tau_min_closed_form(params)
    target = e0 + eps
    if target >= 0:
        raise ValueError("eps too large: window would be unbounded")
    centre = h_star(params).h
    if e_tau(centre, params) > target:
        raise ArithmeticError(f"window empty at h={centre!r}")

    def f(h):
        return e_tau(h, params) - target

    lo = SCAN_FLOOR
    if f(lo) <= 0:
        raise ArithmeticError(f"window reaches the scan floor at h={lo!r}")
    hi = 2 * centre
    while f(hi) <= 0:
        hi *= 2
        if hi > 1e12:
            raise ArithmeticError("window unbounded above")
    c1bar = optimize.brentq(f, lo, centre, xtol=1e-14)
    c2bar = optimize.brentq(f, centre, hi, xtol=1e-14)
    grid = np.linspace(c1bar, c2bar, n_grid)
    d2 = d2e_tau(grid, params)
    j = int(np.argmin(d2))
    if not d2[j] > 0:
        raise ArithmeticError(f"second derivative non-positive at h={grid[j]!r}")
    return ConvexityWindow(c1bar, c2bar, float(d2[j]), float(grid[j]))
