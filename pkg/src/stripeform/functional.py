"""Direct evaluation of the periodic energy and its slicing decomposition.

The energy of an ``L``-periodic set is evaluated as

    F = ((m1 - 1) Per_1(E) - int K_tau(z) g_E(z) dz) / L^d,

where ``g_E(z) = int_{[0,L)^d} |chi_E(x) - chi_E(x+z)| dx`` and ``m1`` is the
first moment of the marginal kernel (the moment term of the functional does
not depend on the direction of the normal).  The slicing decomposition
splits the same quantity into one-dimensional terms ``r`` attached to
boundary points of slices and cross terms ``v``, ``w`` built from

    f_E(t, z) = |chi_E(t + z_i e_i) - chi_E(t)| |chi_E(t + z_perp) - chi_E(t)|.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from . import setgeom
from ._weights import lattice_weights
from .kernel import (ModelParams, TAU_ZERO_MSG, c1_constant, c2_constant,
                     first_moment_quadrature, kernel_constants, khat_tau)
from .setgeom import PeriodicSet, SliceProfile
from .stripe1d import h_star

MAX_ALIGNED_N = {1: 1 << 16, 2: 512, 3: 48}


@dataclass(frozen=True)
class QuadratureSpec:
    """Discretization controls.

    ``periodization_terms`` is the number of kernel images (per side) whose
    cell integrals are computed explicitly; ``None`` picks the largest count
    that fits the lattice budget.  ``zeta_cutoff``, when given, overrides it
    with an explicit window half-width in units of length.  ``grid_n`` is the
    resolution used for box unions whose corners are not on a coarser
    commensurate grid.
    """

    zeta_cutoff: float | None = None
    periodization_terms: int | None = None
    grid_n: int = 64
    tol: float = 1e-9

    def __post_init__(self):
        if self.grid_n < 4:
            raise ValueError("grid_n must be >= 4")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.periodization_terms is not None and self.periodization_terms < 1:
            raise ValueError("periodization_terms must be >= 1")
        if self.zeta_cutoff is not None and not self.zeta_cutoff > 0:
            raise ValueError("zeta_cutoff must be positive")

    def images(self, L: float) -> int | None:
        if self.zeta_cutoff is not None:
            return max(1, int(math.ceil(self.zeta_cutoff / L - 0.5)))
        return self.periodization_terms


@dataclass
class EnergyReport:
    total: float
    perimeter_term: float
    kernel_moment_term: float
    nonlocal_term: float
    per_direction: list = field(default_factory=list)
    method: str = "direct"
    error_bound: float = 0.0
    grid_n: int = 0
    exact_grid: bool = True
    is_equality_candidate: bool = False
    flags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["per_direction"] = [
            {"r_sum": r, "v_sum": v, "w_sum": w} for r, v, w in self.per_direction]
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _require_tau(params: ModelParams) -> None:
    if params.tau <= 0:
        raise ValueError(TAU_ZERO_MSG)


@lru_cache(maxsize=64)
def _h_star_cached(params: ModelParams) -> float:
    return h_star(params.with_tau(params.tau)).h


# ---------------------------------------------------------------------------
# grid representation


def _aligned_n(E: PeriodicSet) -> int | None:
    """Smallest ``n >= 4`` with every box corner on the ``L/n`` lattice."""
    if not E.boxes.size:
        return 4
    den = 1
    for x in np.unique(E.boxes / E.period):
        f = Fraction(float(x)).limit_denominator(1 << 14)
        if abs(float(f) - x) > 1e-12:
            return None
        den = den * f.denominator // math.gcd(den, f.denominator)
        if den > MAX_ALIGNED_N.get(E.dim, 32):
            return None
    return den * int(math.ceil(4 / den))


GRID_CAP = {1: 1 << 16, 2: 512, 3: 16}


def as_grid(E: PeriodicSet, quad: QuadratureSpec) -> tuple[PeriodicSet, bool]:
    """Grid version of ``E`` and whether it represents ``E`` exactly.

    Box unions whose corners lie on a lattice ``L/n0`` are rasterized exactly
    on the smallest multiple of ``n0`` that reaches ``quad.grid_n`` (capped
    per dimension); other box unions are sampled at ``quad.grid_n``.
    """
    if E.is_grid:
        return E, True
    target = min(quad.grid_n, GRID_CAP.get(E.dim, 8))
    n0 = _aligned_n(E)
    if n0 is not None:
        n = n0 * max(1, target // n0)
        return setgeom.rasterize(E, n), True
    return setgeom.rasterize(E, target), False


def _weights_for(G: PeriodicSet, params: ModelParams, quad: QuadratureSpec):
    return lattice_weights(G.n, float(G.period), G.dim, float(params.p),
                           float(params.tau), quad.images(G.period))


def autocorrelation_g(G: PeriodicSet) -> np.ndarray:
    """Lattice values ``g_E(a m)`` from the cyclic autocorrelation of the grid."""
    X = G.grid.astype(float)
    axes = tuple(range(G.dim))
    F = np.fft.rfftn(X, axes=axes)
    overlap = np.rint(np.fft.irfftn(F * np.conj(F), s=X.shape, axes=axes))
    cellvol = G.cell**G.dim
    return 2.0 * (float(X.sum()) - overlap) * cellvol


# ---------------------------------------------------------------------------
# direct energy


def direct_energy(E: PeriodicSet, params: ModelParams,
                  quad: QuadratureSpec | None = None) -> EnergyReport:
    _require_tau(params)
    quad = quad or QuadratureSpec()
    if E.dim != params.d:
        raise ValueError("set dimension and params.d differ")
    G, exact = as_grid(E, quad)
    L, d = E.period, E.dim
    per = setgeom.per1(E) if exact else setgeom.per1(G)
    m1 = kernel_constants(params).m1
    lw = _weights_for(G, params, quad)
    g = autocorrelation_g(G)
    nonlocal_ = float(np.sum(g * lw.weights))
    vol = L**d
    total = ((m1 - 1.0) * per - nonlocal_) / vol
    spread = float(np.max(np.abs(g - g.mean()))) if g.size else 0.0
    bound = 2.0 * abs(lw.far_mass) * spread / vol + quad.tol * abs(m1 * per) / vol * 1e-3
    flags = []
    if not exact:
        flags.append("rasterized")
        bound += per * (L / G.n) * kernel_constants(params).m1 / vol
    try:
        if G.n < 4 * L / _h_star_cached(params):
            flags.append("coarse_grid")
    except ArithmeticError:
        pass
    return EnergyReport(total=total, perimeter_term=-per / vol,
                        kernel_moment_term=m1 * per / vol,
                        nonlocal_term=nonlocal_ / vol, method="direct",
                        error_bound=bound, grid_n=G.n, exact_grid=exact,
                        is_equality_candidate=setgeom.stripe_direction(E) is not None,
                        flags=flags)


def direct_energy_1d_quadrature(profile: SliceProfile, params: ModelParams,
                                tol: float = 1e-11) -> float:
    """Oracle for one-dimensional sets by adaptive quadrature in ``z``.

    ``g_E`` is computed exactly from interval overlaps and ``m1`` by
    quadrature; no lattice weights are involved.
    """
    _require_tau(params)
    if params.d != 1:
        raise ValueError("the quadrature oracle is one-dimensional")
    L = profile.period
    n = len(profile)
    if n == 0:
        return 0.0
    intervals = _inside_intervals(profile)
    vol = profile.measure()

    def overlap(z):
        z = z % L
        tot = 0.0
        for a, b in intervals:
            for c, e in intervals:
                for shift in (-L, 0.0, L):
                    lo = max(a, c - z + shift)
                    hi = min(b, e - z + shift)
                    if hi > lo:
                        tot += hi - lo
        return tot

    def integrand(z):
        return (abs(z) + params.sigma) ** (-params.p) * 2.0 * (vol - overlap(z))

    b = profile.boundaries
    kinks = np.unique(np.mod(np.subtract.outer(b, b).ravel(), L))
    reach = 64
    edges = np.unique(np.concatenate([k * L + kinks for k in range(reach)] + [[reach * L]]))
    near = sum(integrate.quad(integrand, lo, hi, epsabs=0, epsrel=tol)[0]
               for lo, hi in zip(edges[:-1], edges[1:]))
    # beyond the window g is replaced by its period mean; the oscillating
    # remainder integrates to O(K'(X) L^2)
    g_mean = 2.0 * (vol - vol * vol / L)
    x = reach * L + params.sigma
    tail = g_mean * x ** (1 - params.p) / (params.p - 1)
    nonlocal_ = 2.0 * (near + tail)
    m1 = first_moment_quadrature(params)
    return ((m1 - 1.0) * n - nonlocal_) / L


def _inside_intervals(profile: SliceProfile) -> list[tuple[float, float]]:
    b, L = profile.boundaries, profile.period
    if not b.size:
        return [(0.0, L)] if profile.starts_inside else []
    start = 0 if profile.starts_inside else 1
    out = []
    for k in range(start, b.size, 2):
        lo, hi = b[k], b[(k + 1) % b.size]
        if hi <= lo:
            hi += L
        out.append((lo, hi))
    return out


# ---------------------------------------------------------------------------
# one-dimensional term r


def _phi2(x, params: ModelParams):
    """``int_x^inf int_y^inf Khat``: ``c1 c2 (x + sigma)^-beta``."""
    c = c1_constant(params.d, params.p) * c2_constant(params.q)
    return c * (np.asarray(x, dtype=float) + params.sigma) ** (-params.beta)


def _phi2_periodic(y, L: float, params: ModelParams):
    """``sum_{t>=0} phi2(y + tL)`` up to a constant independent of ``y``.

    The constant vanishes for ``beta > 1``; for ``beta = 1`` the series
    diverges and only differences with zero net coefficient are meaningful.
    """
    c = c1_constant(params.d, params.p) * c2_constant(params.q)
    x = (np.asarray(y, dtype=float) + params.sigma) / L
    if params.beta == 1:
        return -c / L * special.digamma(x)
    return c * L ** (-params.beta) * special.zeta(params.beta, x)


def r_tau_profile(profile: SliceProfile, params: ModelParams) -> np.ndarray:
    """``r_tau`` at every boundary point of a periodic profile.

    With ``phi2`` the double antiderivative of the marginal kernel,

        r(s) = -1 + phi2(s - s-) + phi2(s+ - s)
               + sum_{j>=1} (-1)^(j+1) [phi2(R_j - s) - phi2(R_j - s-)]
               + sum_{j>=1} (-1)^(j+1) [phi2(s - L_j) - phi2(s+ - L_j)],

    where ``R_1 = s+ < R_2 < ...`` and ``L_1 = s- > L_2 > ...`` are the
    boundary points to either side.  The ``m1`` terms cancel identically.
    Periodic images are summed in closed form (Hurwitz zeta or digamma).
    """
    _require_tau(params)
    b = profile.boundaries
    n = b.size
    if n < 2:
        return np.empty(0)
    L = profile.period
    k = np.arange(n)[:, None]
    j = np.arange(1, n + 1)[None, :]
    sign = np.where(j % 2 == 1, 1.0, -1.0)
    s = b[:, None]
    s_minus = (b[np.arange(n) - 1] - np.where(np.arange(n) == 0, L, 0.0))[:, None]
    s_plus = (b[(np.arange(n) + 1) % n] + np.where(np.arange(n) == n - 1, L, 0.0))[:, None]
    right = b[(k + j) % n] + L * ((k + j) // n)
    left = b[(k - j) % n] - L * ((n - 1 - k + j) // n)
    P = lambda y: _phi2_periodic(y, L, params)  # noqa: E731
    sum_r = (sign * (P(right - s) - P(right - s_minus))).sum(axis=1)
    sum_l = (sign * (P(s - left) - P(s_plus - left))).sum(axis=1)
    near = _phi2(s - s_minus, params) + _phi2(s_plus - s, params)
    return (-1.0 + near + sum_r[:, None] + sum_l[:, None]).ravel()


def r_tau_1d(profile: SliceProfile, s: float, params: ModelParams,
             quad: QuadratureSpec | None = None) -> float:
    """``r_tau(E, s)`` for the boundary point ``s`` of a periodic profile."""
    b = profile.boundaries
    if b.size < 2:
        raise ValueError("profile needs at least two boundary points")
    k = int(np.argmin(np.abs(b - s)))
    if abs(b[k] - s) > 1e-12 * max(1.0, profile.period):
        raise ValueError(f"{s!r} is not a boundary point")
    return float(r_tau_profile(profile, params)[k])


def r_tau_1d_quadrature(profile: SliceProfile, s: float, params: ModelParams,
                        reach: float = 40.0, tol: float = 1e-10) -> float:
    """Oracle for ``r_tau_1d``: nested quadrature of the defining integrals.

    The inner integral over ``rho`` is computed up to ``reach`` periods; past
    that the opposite phase is replaced by its volume fraction.
    """
    _require_tau(params)
    L = profile.period
    s_minus, s_plus = setgeom.neighbors(profile, s)
    rmax = reach * L
    b = profile.boundaries
    pts = np.concatenate([b + t * L for t in range(-int(reach) - 2, int(reach) + 3)])
    pts.sort()
    frac = profile.measure() / L
    c1 = c1_constant(params.d, params.p)

    def khat(r):
        return float(khat_tau(r, params))

    def opposite_mass(u, direction):
        # mass of Khat over rho in (0, rmax) with chi(u + direction*rho) != chi(u)
        here = bool(profile.indicator(u))
        if direction > 0:
            cuts = pts[(pts > u) & (pts < u + rmax)] - u
        else:
            cuts = (u - pts[(pts < u) & (pts > u - rmax)])[::-1]
        edges = np.concatenate([[0.0], cuts, [rmax]])
        tot = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            mid = u + direction * 0.5 * (lo + hi)
            if bool(profile.indicator(mid)) != here:
                tot += integrate.quad(khat, lo, hi, epsabs=0, epsrel=tol)[0]
        theta = frac if not here else 1.0 - frac
        return tot + theta * c1 * (rmax + params.sigma) ** (1 - params.q) / (params.q - 1)

    a_part = integrate.quad(lambda u: opposite_mass(u, +1), s_minus, s,
                            epsabs=0, epsrel=tol, limit=200)[0]
    b_part = integrate.quad(lambda u: opposite_mass(u, -1), s, s_plus,
                            epsabs=0, epsrel=tol, limit=200)[0]
    m1 = first_moment_quadrature(params)
    return -1.0 + m1 - a_part - b_part


# ---------------------------------------------------------------------------
# cross terms v, w and the decomposition


def _cell_w(G: PeriodicSet, i: int, W: np.ndarray) -> np.ndarray:
    """Cell integrals of ``w_i``: ``(a^d/d) sum_m W[m] D_i(c, m_i) D_perp(c, m_perp)``.

    ``D`` are indicator differences between cell ``c`` and its translates; for
    binary values ``(X_c - A)(X_c - B) = X_c - X_c A - X_c B + A B`` reduces
    the double sum to cyclic convolutions (``W`` is even in every axis).
    """
    d = G.dim
    if d == 1:
        return np.zeros(G.grid.shape)
    X = np.moveaxis(G.grid.astype(float), i, 0)
    Wi = np.moveaxis(W, i, 0)
    N = X.shape[0]
    perp_axes = tuple(range(1, d))
    total = Wi.sum()
    w_par = Wi.sum(axis=perp_axes)                 # weights over m_i
    w_perp = Wi.sum(axis=0)                        # weights over m_perp
    # sum_{m_i} w_par[m_i] X[c + m_i e_i]
    conv_par = np.real(np.fft.ifft(np.fft.fft(X, axis=0)
                                   * np.fft.fft(w_par)[(slice(None),) + (None,) * (d - 1)],
                                   axis=0))
    conv_perp = np.fft.irfftn(np.fft.rfftn(X, axes=perp_axes)
                              * np.fft.rfftn(w_perp)[None], s=X.shape[1:], axes=perp_axes)
    # T[c] = sum_{m_i} X[c + m_i e_i] sum_{m_perp} W[m_i, m_perp] X[c + m_perp]
    FW = np.fft.rfftn(Wi, axes=perp_axes)          # (m_i, k_perp)
    FX = np.fft.rfftn(X, axes=perp_axes)           # (c_i, k_perp)
    T = np.empty_like(X)
    shift_idx = (np.arange(N)[:, None] + np.arange(N)[None, :]) % N  # [c_i, m_i]
    block = max(1, int(2_000_000 // max(1, X[0].size * N)))
    for start in range(0, N, block):
        rows = np.arange(start, min(N, start + block))
        U = np.fft.irfftn(FX[rows][:, None] * FW[None], s=X.shape[1:],
                          axes=tuple(range(2, d + 1)))      # (c_i, m_i, c_perp)
        Xs = X[shift_idx[rows]]                               # (c_i, m_i, c_perp)
        T[rows] = np.sum(Xs * U, axis=1)
    Wc = X * total - X * conv_par - X * conv_perp + T
    Wc = Wc * G.cell**d / d
    Wc[np.abs(Wc) < 1e-300] = 0.0
    return np.moveaxis(np.maximum(Wc, 0.0), 0, i)


@dataclass
class DirectionTerms:
    """Per-direction fields on the grid.

    ``rv_face[c]`` holds ``r + v`` for the boundary point on the lower face
    of cell ``c`` along ``e_i`` (zero if that face is not a boundary); ``r_face``
    and ``v_face`` are the separate parts; ``w_cell[c]`` is the integral of
    ``w_i`` over cell ``c``.
    """

    r_face: np.ndarray
    v_face: np.ndarray
    w_cell: np.ndarray

    @property
    def rv_face(self) -> np.ndarray:
        return self.r_face + self.v_face


def _direction_terms(G: PeriodicSet, i: int, params: ModelParams, W: np.ndarray) -> DirectionTerms:
    d, N, L = G.dim, G.n, G.period
    a = G.cell
    w_cell = _cell_w(G, i, W)
    X = np.moveaxis(G.grid, i, -1).reshape(-1, N)
    Wl = np.moveaxis(w_cell, i, -1).reshape(-1, N)
    r_face = np.zeros(X.shape)
    v_face = np.zeros(X.shape)
    cache: dict[bytes, np.ndarray] = {}
    for row in range(X.shape[0]):
        line = X[row]
        faces = np.nonzero(line != np.roll(line, 1))[0]
        if not faces.size:
            continue
        key = line.tobytes()
        if key not in cache:
            cache[key] = r_tau_profile(setgeom.grid_line_profile(line, L), params)
        r_face[row, faces] = cache[key]
        # v(s) = 1/2 * integral of w over (s-, s+), per unit perpendicular measure
        csum = np.concatenate([[0.0], np.cumsum(np.tile(Wl[row], 3))])
        nb = faces.size
        lo = faces[np.arange(nb) - 1] - np.where(np.arange(nb) == 0, N, 0) + N
        hi = faces[(np.arange(nb) + 1) % nb] + np.where(np.arange(nb) == nb - 1, N, 0) + N
        seg = csum[hi] - csum[lo]
        v_face[row, faces] = 0.5 * seg / a ** (d - 1)
    shape = np.moveaxis(G.grid, i, -1).shape
    return DirectionTerms(np.moveaxis(r_face.reshape(shape), -1, i),
                          np.moveaxis(v_face.reshape(shape), -1, i), w_cell)


def decomposition_fields(E: PeriodicSet, params: ModelParams,
                         quad: QuadratureSpec | None = None):
    """Grid used and the per-direction ``r``, ``v``, ``w`` fields (cached on ``E``)."""
    _require_tau(params)
    quad = quad or QuadratureSpec()
    key = ("decomposition", params, quad)
    if key in E._cache:
        return E._cache[key]
    G, exact = as_grid(E, quad)
    W = _weights_for(G, params, quad).weights
    terms = [_direction_terms(G, i, params, W) for i in range(G.dim)]
    E._cache[key] = (G, exact, terms)
    return E._cache[key]


def rvw_terms(E: PeriodicSet, i: int, tperp, params: ModelParams,
              quad: QuadratureSpec | None = None):
    """Boundary points ``(s, r_i, v_i)`` of the slice at ``tperp`` and ``w_i`` along it.

    The ``w`` values are cell averages of ``w_i`` (per unit volume) along the
    slice, one per cell.
    """
    G, _, terms = decomposition_fields(E, params, quad)
    a = G.cell
    idx = [min(int(np.mod(x, G.period) / a), G.n - 1) for x in np.atleast_1d(tperp)]
    index = tuple(idx[:i] + [slice(None)] + idx[i:])
    t = terms[i]
    r_line, v_line = t.r_face[index], t.v_face[index]
    line = G.grid[index]
    faces = np.nonzero(line != np.roll(line, 1))[0]
    points = [(float(f * a), float(r_line[f]), float(v_line[f])) for f in faces]
    return points, t.w_cell[index] / a**G.dim


def decomposed_energy(E: PeriodicSet, params: ModelParams,
                      quad: QuadratureSpec | None = None) -> EnergyReport:
    quad = quad or QuadratureSpec()
    G, exact, terms = decomposition_fields(E, params, quad)
    d, L = G.dim, G.period
    a = G.cell
    per_dir = []
    for t in terms:
        per_dir.append((float(t.r_face.sum() * a ** (d - 1)),
                        float(t.v_face.sum() * a ** (d - 1)),
                        float(t.w_cell.sum())))
    vol = L**d
    total = sum(r + v + w for r, v, w in per_dir) / vol
    per = setgeom.per1(G)
    m1 = kernel_constants(params).m1
    lw = _weights_for(G, params, quad)
    g = autocorrelation_g(G)
    spread = float(np.max(np.abs(g - g.mean()))) if g.size else 0.0
    bound = 2.0 * abs(lw.far_mass) * spread / vol
    flags = [] if exact else ["rasterized"]
    return EnergyReport(total=total, perimeter_term=-per / vol,
                        kernel_moment_term=m1 * per / vol,
                        nonlocal_term=float("nan"), per_direction=per_dir,
                        method="decomposed", error_bound=bound, grid_n=G.n,
                        exact_grid=exact,
                        is_equality_candidate=setgeom.stripe_direction(E) is not None,
                        flags=flags)


# ---------------------------------------------------------------------------
# localized energies


def _cyclic_box_sum(F: np.ndarray, k: int) -> np.ndarray:
    """``S[lo] = sum of F over the cyclic box [lo, lo + k)^d``."""
    out = F
    for axis in range(F.ndim):
        n = out.shape[axis]
        ext = np.concatenate([out, np.take(out, np.arange(k - 1), axis=axis)], axis=axis)
        c = np.cumsum(ext, axis=axis)
        zero = np.zeros_like(np.take(c, [0], axis=axis))
        c = np.concatenate([zero, c], axis=axis)
        out = np.take(c, np.arange(k, k + n), axis=axis) - np.take(c, np.arange(n), axis=axis)
    return out


@dataclass(frozen=True)
class LocalEnergy:
    per_direction: tuple
    total: float
    cube_cells: int


def _cube_cells(G: PeriodicSet, l: float) -> int:
    if not 0 < l < G.period:
        raise ValueError("need 0 < l < L")
    k = l / G.cell
    if abs(k - round(k)) > 1e-9 or round(k) < 1:
        raise ValueError(f"cube side {l!r} is not a whole number of cells (cell {G.cell!r})")
    return int(round(k))


def local_energy_field(E: PeriodicSet, l: float, params: ModelParams,
                       quad: QuadratureSpec | None = None) -> np.ndarray:
    """``Fbar_i`` for every grid-aligned cube; shape ``(d,) + (n,)*d``.

    Entry ``[i][lo]`` belongs to the cube with lower corner ``lo * a``, that is
    ``z = lo * a + l/2``.
    """
    G, _, terms = decomposition_fields(E, params, quad)
    k = _cube_cells(G, l)
    d, a = G.dim, G.cell
    out = np.empty((d,) + G.grid.shape)
    for i, t in enumerate(terms):
        dens = t.rv_face * a ** (d - 1) + t.w_cell
        out[i] = _cyclic_box_sum(dens, k) / l**d
    return out


def local_energy(E: PeriodicSet, z, l: float, params: ModelParams,
                 quad: QuadratureSpec | None = None) -> LocalEnergy:
    """``Fbar_i(E, Q_l(z))`` with ``Q_l(z) = z + [-l/2, l/2)^d`` snapped to the grid."""
    G, _, _ = decomposition_fields(E, params, quad)
    k = _cube_cells(G, l)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    lo = np.mod(np.round((z - l / 2) / G.cell).astype(int), G.n)
    field_ = local_energy_field(E, l, params, quad)
    vals = tuple(float(field_[(i,) + tuple(lo)]) for i in range(G.dim))
    return LocalEnergy(vals, float(sum(vals)), k)


def local_volume_fraction(E: PeriodicSet, l: float, quad: QuadratureSpec | None = None) -> np.ndarray:
    """``|E cap Q| / |Q|`` for every grid-aligned cube (same indexing as above)."""
    G, _ = as_grid(E, quad or QuadratureSpec())
    k = _cube_cells(G, l)
    return _cyclic_box_sum(G.grid.astype(float), k) / k**G.dim


def energy_gap_identity(E: PeriodicSet, params: ModelParams,
                        quad: QuadratureSpec | None = None) -> float:
    """``direct - decomposed`` predicted from ``g_E`` along coordinate subspaces.

    Equals ``(1/(d L^d)) sum_i int K [sum_{j != i} g(z_j e_j) - g(z_perp_i)]``,
    which is non-negative by subadditivity of ``g_E`` and vanishes on stripes.
    """
    quad = quad or QuadratureSpec()
    G, _ = as_grid(E, quad)
    d, L = G.dim, G.period
    if d == 1:
        return 0.0
    W = _weights_for(G, params, quad).weights
    g = autocorrelation_g(G)
    total = 0.0
    for i in range(d):
        # g restricted to the axis e_j (others zero) and to the hyperplane z_i = 0
        for j in range(d):
            if j == i:
                continue
            idx = tuple(slice(None) if a_ == j else 0 for a_ in range(d))
            total += float(np.sum(g[idx] * W.sum(axis=tuple(a_ for a_ in range(d) if a_ != j))))
        idx = tuple(0 if a_ == i else slice(None) for a_ in range(d))
        total -= float(np.sum(g[idx] * W.sum(axis=i)))
    return total / (d * L**d)
