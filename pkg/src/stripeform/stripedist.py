"""Distance of a set to unions of stripes inside a cube, and cube labelling.

Inside a cube ``Q`` with side ``l`` a union of stripes oriented along ``e_i``
is a binary profile ``g(t)`` in the coordinate ``t = x_i``.  The ``L^1``
distance then only depends on the column occupancy

    a(t) = |E cap Q cap {x_i = t}| / l^(d-1),

and equals ``(1/l) int [g (1 - a) + (1 - g) a] dt``.  The profile is
discretized on ``resolution`` bins and minimized by dynamic programming.
Runs of ``g`` that lie strictly inside the cube must be at least ``eta``
long; the first and last runs are cut by the cube and are unconstrained.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy import ndimage

from .setgeom import PeriodicSet


@dataclass(frozen=True)
class Cube:
    """Half-open cube ``lower + [0, side)^d`` (taken periodically)."""

    lower: tuple
    side: float

    @classmethod
    def centered(cls, z, side: float) -> "Cube":
        z = np.atleast_1d(np.asarray(z, dtype=float))
        return cls(tuple(float(v) for v in z - side / 2), float(side))

    @property
    def center(self) -> np.ndarray:
        return np.asarray(self.lower) + self.side / 2


@dataclass(frozen=True)
class FitProfile:
    """Binary profile on ``resolution`` equal bins across the cube along ``e_i``."""

    start: float
    side: float
    values: np.ndarray

    @property
    def boundaries(self) -> np.ndarray:
        v = self.values
        k = np.nonzero(v[1:] != v[:-1])[0] + 1
        return self.start + k * (self.side / v.size)


@dataclass(frozen=True)
class StripeFitResult:
    distance: float
    direction: int
    profile: FitProfile
    eta: float
    error_bound: float


# ---------------------------------------------------------------------------
# occupancy


def _cyclic_overlap(lo, hi, c_lo, c_hi, L):
    """Length of ``[lo, hi) cap ([c_lo, c_hi) + L Z)``, broadcasting."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    total = np.zeros(np.broadcast(lo, hi, c_lo, c_hi).shape)
    k_min = int(np.floor((np.min(lo) - np.max(c_hi)) / L))
    k_max = int(np.ceil((np.max(hi) - np.min(c_lo)) / L))
    for k in range(k_min, k_max + 1):
        total += np.clip(np.minimum(hi, c_hi + k * L) - np.maximum(lo, c_lo + k * L), 0.0, None)
    return total


def column_occupancy(E: PeriodicSet, Q: Cube, i: int, resolution: int) -> np.ndarray:
    """``a(t)`` averaged over each of ``resolution`` bins along ``e_i``."""
    if resolution < 1:
        raise ValueError("resolution must be positive")
    d, L, l = E.dim, E.period, Q.side
    if not 0 < l <= L:
        raise ValueError("cube side must be in (0, L]")
    lower = np.asarray(Q.lower, dtype=float)
    edges = lower[i] + np.linspace(0.0, l, resolution + 1)
    binw = l / resolution
    if E.is_grid:
        n, a = E.n, E.cell
        c_lo = np.arange(n) * a
        weights = []
        for j in range(d):
            if j == i:
                weights.append(_cyclic_overlap(edges[:-1, None], edges[1:, None],
                                               c_lo[None, :], c_lo[None, :] + a, L))
            else:
                weights.append(_cyclic_overlap(lower[j], lower[j] + l, c_lo, c_lo + a, L))
        X = np.moveaxis(E.grid.astype(float), i, 0)
        perp = [weights[j] for j in range(d) if j != i]
        for w in reversed(perp):
            X = X @ w
        occ = weights[i] @ X
    else:
        occ = np.zeros(resolution)
        for box in E.boxes:
            w = _cyclic_overlap(edges[:-1], edges[1:], box[i, 0], box[i, 1], L)
            for j in range(d):
                if j != i:
                    w = w * float(_cyclic_overlap(lower[j], lower[j] + l, box[j, 0], box[j, 1], L))
            occ += w
    return np.clip(occ / (binw * l ** (d - 1)), 0.0, 1.0)


# ---------------------------------------------------------------------------
# dynamic programme and its brute-force oracle


def eta_cells(eta: float, side: float, resolution: int) -> int:
    return max(1, int(math.ceil(eta / (side / resolution) - 1e-9)))


@numba.njit(cache=True)
def _dp_fit(cost0, cost1, E):
    n = cost0.size
    S = 2 * (E + 1) * 2
    INF = 1e300
    cur = np.full(S, INF)
    back = np.full((n, S), -1, dtype=np.int64)
    for v in range(2):
        c = cost0[0] if v == 0 else cost1[0]
        cur[(v * (E + 1) + 1) * 2 + 1] = c
    for k in range(1, n):
        nxt = np.full(S, INF)
        for s in range(S):
            if cur[s] >= INF:
                continue
            first = s % 2
            rest = s // 2
            age = rest % (E + 1)
            v = rest // (E + 1)
            # continue the current run
            na = age + 1 if age < E else E
            t = (v * (E + 1) + na) * 2 + first
            c = cur[s] + (cost0[k] if v == 0 else cost1[k])
            if c < nxt[t]:
                nxt[t] = c
                back[k, t] = s
            # start a new run
            if first == 1 or age >= E:
                w = 1 - v
                t = (w * (E + 1) + 1) * 2
                c = cur[s] + (cost0[k] if w == 0 else cost1[k])
                if c < nxt[t]:
                    nxt[t] = c
                    back[k, t] = s
        cur = nxt
    best = 0
    for s in range(S):
        if cur[s] < cur[best]:
            best = s
    values = np.empty(n, dtype=np.int64)
    s = best
    for k in range(n - 1, -1, -1):
        values[k] = (s // 2) // (E + 1)
        s = back[k, s]
    return cur[best], values


def _profile_cost(occ: np.ndarray):
    return occ.copy(), 1.0 - occ  # cost of g=0 and g=1 per bin (in bin units)


def feasible(values, E: int) -> bool:
    """Interior runs of ``values`` are at least ``E`` bins long."""
    v = np.asarray(values)
    cuts = np.nonzero(v[1:] != v[:-1])[0] + 1
    runs = np.diff(np.concatenate([[0], cuts, [v.size]]))
    return bool(np.all(runs[1:-1] >= E))


def fit_profile(occ: np.ndarray, E: int) -> tuple[float, np.ndarray]:
    """Minimal mean cost and optimal bin values for occupancy ``occ``."""
    c0, c1 = _profile_cost(np.asarray(occ, dtype=float))
    cost, values = _dp_fit(c0, c1, int(E))
    return float(cost) / occ.size, values.astype(bool)


def fit_profile_brute(occ: np.ndarray, E: int) -> tuple[float, np.ndarray]:
    """Exhaustive search over all feasible binary profiles (small inputs only)."""
    occ = np.asarray(occ, dtype=float)
    n = occ.size
    if n > 16:
        raise ValueError("brute force limited to 16 bins")
    best, arg = np.inf, None
    for bits in itertools.product((0, 1), repeat=n):
        g = np.array(bits)
        if not feasible(g, E):
            continue
        c = float(np.sum(g * (1 - occ) + (1 - g) * occ))
        if c < best - 1e-15:
            best, arg = c, g
    return best / n, arg.astype(bool)


def d_eta_i(E: PeriodicSet, Q: Cube, i: int, eta: float, resolution: int,
            strict: bool = True) -> StripeFitResult:
    """``D^i_eta(E, Q)`` on a ``resolution``-bin discretization of the profile."""
    if not eta > 0:
        raise ValueError("eta must be positive")
    binw = Q.side / resolution
    if strict and binw > eta / 4 * (1 + 1e-12):
        raise ValueError(f"resolution cell {binw:.4g} exceeds eta/4 = {eta / 4:.4g}")
    occ = column_occupancy(E, Q, i, resolution)
    dist, values = fit_profile(occ, eta_cells(eta, Q.side, resolution))
    prof = FitProfile(Q.lower[i], Q.side, values)
    nb = prof.boundaries.size
    return StripeFitResult(dist, i, prof, eta, nb * binw / Q.side)


def d_eta(E: PeriodicSet, Q: Cube, eta: float, resolution: int,
          strict: bool = True) -> StripeFitResult:
    """``min_i D^i_eta``; ties go to the lowest axis."""
    best = None
    for i in range(E.dim):
        r = d_eta_i(E, Q, i, eta, resolution, strict)
        if best is None or r.distance < best.distance:
            best = r
    return best


@numba.njit(cache=True)
def _dp_batch(occ, E):
    out = np.empty(occ.shape[0])
    for r in range(occ.shape[0]):
        c0 = occ[r].copy()
        c1 = 1.0 - c0
        out[r] = _dp_fit(c0, c1, E)[0] / c0.size
    return out


def occupancy_field(E: PeriodicSet, l: float, z_axis: np.ndarray, i: int,
                    resolution: int) -> np.ndarray:
    """Column occupancy of ``Q_l(z)`` for every ``z`` on the product grid ``z_axis^d``.

    Output shape is ``(nz,)*d + (resolution,)``.
    """
    d, L = E.dim, E.period
    lower = np.asarray(z_axis, dtype=float) - l / 2
    nz = lower.size
    frac = np.linspace(0.0, l, resolution + 1)
    lo_b = lower[:, None] + frac[None, :-1]
    hi_b = lower[:, None] + frac[None, 1:]
    binw = l / resolution
    if E.is_grid:
        n, a = E.n, E.cell
        c_lo = np.arange(n) * a
        perp_w = _cyclic_overlap(lower[:, None], lower[:, None] + l, c_lo[None, :], c_lo[None, :] + a, L)
        bin_w = _cyclic_overlap(lo_b[..., None], hi_b[..., None], c_lo, c_lo + a, L)  # (nz, res, n)
        X = np.moveaxis(E.grid.astype(float), i, -1)  # perpendicular axes first, in order
        for _ in range(d - 1):
            # contract the leading perpendicular axis, append the z axis at the end
            X = np.tensordot(X, perp_w, axes=([0], [1]))
        # X now has shape (n_i, nz_perp...) ; contract n_i with bins
        occ = np.tensordot(bin_w, X, axes=([2], [0]))  # (nz_i, res, nz_perp...)
        occ = np.moveaxis(occ, 1, -1)  # (nz_i, nz_perp..., res)
    else:
        occ = np.zeros((nz,) * d + (resolution,))
        for box in E.boxes:
            wi = _cyclic_overlap(lo_b, hi_b, box[i, 0], box[i, 1], L)  # (nz, res)
            term = wi
            for j in range(d):
                if j != i:
                    wj = _cyclic_overlap(lower, lower + l, box[j, 0], box[j, 1], L)
                    term = np.multiply.outer(term, wj)
            # term axes: (z_i, res, z_perp...)
            occ += np.moveaxis(term, 1, -1)
    # reorder z axes from (z_i, z_perp...) to (z_0, ..., z_{d-1})
    occ = np.moveaxis(occ, 0, i)
    return np.clip(occ / (binw * l ** (d - 1)), 0.0, 1.0)


def d_eta_field(E: PeriodicSet, l: float, z_axis: np.ndarray, eta: float,
                resolution: int) -> np.ndarray:
    """``D^i_eta(E, Q_l(z))`` for all directions and all ``z``, shape ``(d,) + (nz,)*d``."""
    E_cells = eta_cells(eta, l, resolution)
    out = []
    for i in range(E.dim):
        occ = occupancy_field(E, l, z_axis, i, resolution)
        flat = np.ascontiguousarray(occ.reshape(-1, resolution))
        out.append(_dp_batch(flat, E_cells).reshape(occ.shape[:-1]))
    return np.stack(out)


def d_eta_all(E: PeriodicSet, Q: Cube, eta: float, resolution: int,
              strict: bool = True) -> np.ndarray:
    return np.array([d_eta_i(E, Q, i, eta, resolution, strict).distance
                     for i in range(E.dim)])


# ---------------------------------------------------------------------------
# cube classification

A_MINUS1 = -1
A_ZERO = 0


def label_name(code: int) -> str:
    if code == A_MINUS1:
        return "A_minus1"
    if code == A_ZERO:
        return "A_0"
    return f"A_{code}"


@dataclass
class CubeLabels:
    """Labels on a periodic z-grid.

    ``label`` codes: ``-1`` for A_-1, ``0`` for A_0 and ``i + 1`` for A_i
    (stripes with boundaries orthogonal to ``e_i``).  ``raw`` holds the
    threshold labels before dilation.  ``b_l`` marks z-points in the trimmed
    set ``B_l``.
    """

    z_axis: np.ndarray
    distances: np.ndarray           # shape (d,) + grid
    raw: np.ndarray
    label: np.ndarray
    b_l: np.ndarray
    rho: float
    flags: list = field(default_factory=list)

    def rows(self):
        d = self.distances.shape[0]
        for idx in itertools.product(range(self.z_axis.size), repeat=d):
            z = [float(self.z_axis[k]) for k in idx]
            dist = [float(self.distances[(j,) + idx]) for j in range(d)]
            yield z, label_name(int(self.label[idx])), dist

    def to_csv(self) -> str:
        d = self.distances.shape[0]
        head = [f"z{j + 1}" for j in range(d)] + ["label"] + [f"d{j + 1}" for j in range(d)]
        lines = [",".join(head)]
        for z, lab, dist in self.rows():
            lines.append(",".join([f"{v:.17g}" for v in z] + [lab] + [f"{v:.17g}" for v in dist]))
        return "\n".join(lines) + "\n"


def _raw_labels(dist: np.ndarray, delta: float) -> np.ndarray:
    below = dist <= delta
    nb = below.sum(axis=0)
    raw = np.where(nb >= 2, A_MINUS1, A_ZERO)
    unique = (nb == 1) & (dist.min(axis=0) < delta)
    raw = np.where(unique, np.argmax(below, axis=0) + 1, raw)
    # D >= delta in every direction (or exactly delta in one) stays A_0
    return raw


def _dilate(mask: np.ndarray, radius: int) -> np.ndarray:
    if radius <= 0 or not mask.any():
        return mask.copy()
    out = mask.copy()
    for axis in range(mask.ndim):
        acc = out.copy()
        for s in range(1, radius + 1):
            acc |= np.roll(out, s, axis=axis) | np.roll(out, -s, axis=axis)
        out = acc
    return out


def _periodic_components(mask: np.ndarray):
    lab, n = ndimage.label(mask)
    parent = list(range(n + 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for axis in range(mask.ndim):
        a = np.take(lab, 0, axis=axis)
        b = np.take(lab, -1, axis=axis)
        for u, v in zip(a.ravel(), b.ravel()):
            if u and v:
                ru, rv = find(u), find(v)
                if ru != rv:
                    parent[ru] = rv
    roots = np.array([find(k) for k in range(n + 1)])
    return roots[lab]


def _check_orientation(raw: np.ndarray, comp: np.ndarray, z_axis: np.ndarray) -> None:
    for axis in range(raw.ndim):
        nb_raw = np.roll(raw, -1, axis=axis)
        nb_comp = np.roll(comp, -1, axis=axis)
        bad = (comp > 0) & (nb_comp == comp) & (raw != nb_raw)
        if bad.any():
            idx = tuple(int(k) for k in np.argwhere(bad)[0])
            jdx = list(idx)
            jdx[axis] = (jdx[axis] + 1) % raw.shape[axis]
            z1 = [float(z_axis[k]) for k in idx]
            z2 = [float(z_axis[k]) for k in jdx]
            raise ValueError(f"inconsistent orientation between z={z1} and z={z2}; "
                             "the z-grid or profile resolution is too coarse")


def _trim_lines(mask: np.ndarray, axis: int, cut: int, min_len: int) -> np.ndarray:
    """Trim ``cut`` points from both ends of each run along ``axis``; drop short runs."""
    m = np.moveaxis(mask, axis, -1)
    out = np.zeros_like(m)
    n = m.shape[-1]
    for idx in np.ndindex(m.shape[:-1]):
        line = m[idx]
        if line.all():
            out[idx] = True
            continue
        if not line.any():
            continue
        start = int(np.argmin(line))  # a point outside, so runs do not wrap through it
        rolled = np.roll(line, -start)
        cuts = np.nonzero(np.diff(np.concatenate([[0], rolled.astype(int), [0]])))[0]
        res = np.zeros(n, dtype=bool)
        for lo, hi in zip(cuts[0::2], cuts[1::2]):
            if hi - lo > min_len:
                res[lo + cut:hi - cut] = True
        out[idx] = np.roll(res, start)
    return np.moveaxis(out, -1, axis)


def classify_cubes(E: PeriodicSet, l: float, eta: float, delta: float,
                   resolution: int, z_step: float | None = None,
                   lipschitz_c: float = 1.0) -> CubeLabels:
    """Label a periodic z-grid of cubes ``Q_l(z)`` as A_-1, A_0 or A_i.

    ``rho = delta * l / lipschitz_c`` is the dilation radius of the A_0 seed
    set.  The z spacing defaults to the largest divisor of ``L`` not
    exceeding ``rho/4``; a coarser explicit spacing is allowed but flagged.
    """
    L, d = E.period, E.dim
    if not 0 < l < L:
        raise ValueError("need 0 < l < L")
    rho = delta * l / lipschitz_c
    flags = []
    if z_step is None:
        z_step = L / math.ceil(L / (rho / 4))
    nz = int(round(L / z_step))
    z_step = L / nz
    if z_step > rho / 4 * (1 + 1e-9):
        flags.append("coarse_z_grid")
        warnings.warn(f"z spacing {z_step:.4g} exceeds rho/4 = {rho / 4:.4g}")
    z_axis = np.arange(nz) * z_step
    dist = d_eta_field(E, l, z_axis, eta, resolution)
    raw = _raw_labels(dist, delta)
    a0 = _dilate(raw == A_ZERO, int(math.floor(rho / z_step + 1e-9)))
    am1 = _dilate(raw == A_MINUS1, int(math.floor(1.0 / z_step + 1e-9)))
    label = raw.copy()
    label[a0] = A_ZERO
    label[am1] = A_MINUS1
    rest = ~(a0 | am1)
    comp = _periodic_components(rest)
    _check_orientation(np.where(rest, raw, 0), np.where(rest, comp, 0), z_axis)
    b_l = np.zeros(raw.shape, dtype=bool)
    cut = int(round(l / 4 / z_step))
    min_len = int(round(l / 2 / z_step))
    for i in range(d):
        a_i = rest & (raw == i + 1)
        b_l |= _trim_lines(a_i, i, cut, min_len)
    return CubeLabels(z_axis, dist, raw, label, b_l, rho, flags)


def fit_lipschitz(E: PeriodicSet, l: float, eta: float, resolution: int,
                  pairs: np.ndarray) -> float:
    """``max |D(z) - D(z')| * l / |z - z'|_1`` over the given ``(2, d)`` pairs."""
    worst = 0.0
    for z, zp in pairs:
        dz = float(np.abs(np.asarray(z) - np.asarray(zp)).sum())
        if dz == 0:
            continue
        D1 = d_eta(E, Cube.centered(z, l), eta, resolution, strict=False).distance
        D2 = d_eta(E, Cube.centered(zp, l), eta, resolution, strict=False).distance
        worst = max(worst, abs(D1 - D2) * l / dz)
    return worst
