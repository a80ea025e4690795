"""Periodic subsets of R^d: exact box unions, binary grids, slices and 1-perimeter.

Boxes are half-open, ``[lo, hi)`` in every coordinate, so a point on a lower
face is inside and a point on an upper face is outside.  A box union is
stored after reduction into ``[0, L)^d``: boxes that wrap around the period
are split into pieces.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

COMMENSURATE_TOL = 1e-12


@dataclass(frozen=True)
class SliceProfile:
    """A one-dimensional ``period``-periodic set given by its boundary points."""

    period: float
    boundaries: np.ndarray
    starts_inside: bool

    def __post_init__(self):
        b = np.asarray(self.boundaries, dtype=float)
        if b.ndim != 1:
            raise ValueError("boundaries must be one-dimensional")
        if b.size and (b[0] < 0 or b[-1] >= self.period or np.any(np.diff(b) <= 0)):
            raise ValueError("boundaries must be strictly increasing in [0, period)")
        if b.size % 2:
            raise ValueError("a periodic profile has an even number of boundaries")
        object.__setattr__(self, "boundaries", b)

    def __len__(self):
        return self.boundaries.size

    def indicator(self, x) -> np.ndarray:
        """Value of the indicator at ``x`` (periodically)."""
        x = np.mod(np.asarray(x, dtype=float), self.period)
        if not self.boundaries.size:
            return np.full(x.shape, self.starts_inside, dtype=bool)
        # number of boundaries <= x, counted cyclically from boundaries[0]
        k = np.searchsorted(self.boundaries, x, side="right")
        k = np.where(k == 0, self.boundaries.size, k)
        inside = (k - 1) % 2 == 0
        return inside if self.starts_inside else ~inside

    def gaps(self) -> np.ndarray:
        """``gaps[k]`` is the distance from ``boundaries[k]`` to the next boundary."""
        b = self.boundaries
        return np.diff(np.append(b, b[0] + self.period))

    def measure(self) -> float:
        if not self.boundaries.size:
            return self.period if self.starts_inside else 0.0
        g = self.gaps()
        return float(g[0::2].sum() if self.starts_inside else g[1::2].sum())


def profile_from_intervals(intervals, period: float) -> SliceProfile:
    """Profile of a union of half-open intervals inside ``[0, period)``."""
    iv = sorted((float(a), float(b)) for a, b in intervals if b > a)
    merged: list[list[float]] = []
    for a, b in iv:
        if merged and a <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    if not merged:
        return SliceProfile(period, np.empty(0), False)
    if merged[0][0] <= 0 and merged[-1][1] >= period:
        if len(merged) == 1:
            return SliceProfile(period, np.empty(0), True)
        # interval wrapping through 0
        first = merged.pop(0)
        merged[-1][1] = period + first[1]
    pts = []
    for a, b in merged:
        pts.extend([a, b % period if b > period else b])
    pts = [p % period for p in pts]
    order = np.argsort(pts, kind="stable")
    pts = np.asarray(pts)[order]
    # a boundary at index 0 of the merged list is an entry point iff even
    starts_inside = bool(order[0] % 2 == 0)
    return SliceProfile(period, pts, starts_inside)


def neighbors(profile: SliceProfile, s: float) -> tuple[float, float]:
    """Cyclic predecessor and successor of the boundary point ``s``, unwrapped."""
    b = profile.boundaries
    if b.size < 2:
        raise ValueError("profile needs at least two boundary points")
    k = int(np.argmin(np.abs(b - s)))
    if not np.isclose(b[k], s, rtol=0, atol=1e-12 * max(1.0, profile.period)):
        raise ValueError(f"{s!r} is not a boundary point")
    n, L = b.size, profile.period
    s_minus = b[k - 1] - (L if k == 0 else 0.0)
    s_plus = b[(k + 1) % n] + (L if k == n - 1 else 0.0)
    return float(s_minus), float(s_plus)


# ---------------------------------------------------------------------------
# periodic sets


@dataclass(frozen=True, eq=False)
class PeriodicSet:
    """An ``L``-periodic set, either a box union (``boxes``) or a grid (``grid``).

    ``boxes`` has shape ``(k, d, 2)`` with ``[lo, hi)`` per axis inside
    ``[0, L]``.  ``grid`` is a boolean array of shape ``(n,) * d`` with cell side
    ``L/n``.
    """

    period: float
    dim: int
    boxes: np.ndarray | None = None
    grid: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not self.period > 0:
            raise ValueError("period must be positive")
        if (self.boxes is None) == (self.grid is None):
            raise ValueError("give exactly one of boxes or grid")
        if self.grid is not None:
            g = np.asarray(self.grid, dtype=bool)
            if g.ndim != self.dim or len(set(g.shape)) != 1:
                raise ValueError("grid must be a cube array of dimension dim")
            if g.shape[0] < 4:
                raise ValueError("grid needs n >= 4")
            g = g.copy()
            g.setflags(write=False)
            object.__setattr__(self, "grid", g)
        else:
            b = np.asarray(self.boxes, dtype=float).reshape(-1, self.dim, 2)
            b = _normalize_boxes(b, self.period)
            _check_disjoint(b)
            b.setflags(write=False)
            object.__setattr__(self, "boxes", b)

    # constructors -----------------------------------------------------------

    @classmethod
    def from_boxes(cls, boxes, L: float, d: int) -> "PeriodicSet":
        return cls(period=float(L), dim=int(d), boxes=np.asarray(boxes, dtype=float))

    @classmethod
    def from_grid(cls, grid, L: float) -> "PeriodicSet":
        g = np.asarray(grid, dtype=bool)
        return cls(period=float(L), dim=g.ndim, grid=g)

    # basic queries ------------------------------------------------------------

    @property
    def is_grid(self) -> bool:
        return self.grid is not None

    @property
    def n(self) -> int | None:
        return None if self.grid is None else self.grid.shape[0]

    @property
    def cell(self) -> float:
        if self.grid is None:
            raise ValueError("box unions have no cell size")
        return self.period / self.grid.shape[0]

    def contains(self, x) -> np.ndarray:
        """Membership of points ``x`` (last axis = coordinates), periodically."""
        x = np.mod(np.asarray(x, dtype=float).reshape(-1, self.dim), self.period)
        if self.is_grid:
            idx = np.minimum((x / self.cell).astype(int), self.n - 1)
            return self.grid[tuple(idx.T)]
        lo, hi = self.boxes[None, :, :, 0], self.boxes[None, :, :, 1]
        inside = np.all((x[:, None, :] >= lo) & (x[:, None, :] < hi), axis=2)
        return inside.any(axis=1)

    def volume(self) -> float:
        if self.is_grid:
            return float(self.grid.sum()) * self.cell**self.dim
        return float(np.prod(self.boxes[:, :, 1] - self.boxes[:, :, 0], axis=1).sum())

    def volume_fraction(self) -> float:
        return self.volume() / self.period**self.dim


def _normalize_boxes(boxes: np.ndarray, L: float) -> np.ndarray:
    """Reduce boxes mod ``L``, splitting those that wrap around the period."""
    out = []
    for box in boxes:
        pieces_per_axis = []
        for lo, hi in box:
            if not hi > lo:
                raise ValueError(f"box has empty extent [{lo}, {hi})")
            if hi - lo >= L:
                pieces_per_axis.append([(0.0, L)])
                continue
            lo_m = lo % L
            hi_m = lo_m + (hi - lo)
            if hi_m <= L:
                pieces_per_axis.append([(lo_m, hi_m)])
            else:
                pieces_per_axis.append([(lo_m, L), (0.0, hi_m - L)])
        for combo in itertools.product(*pieces_per_axis):
            out.append(np.array(combo))
    if not out:
        return np.empty((0, boxes.shape[1] if boxes.ndim == 3 else 0, 2))
    return np.array(out)


def _check_disjoint(boxes: np.ndarray) -> None:
    for a, b in itertools.combinations(range(len(boxes)), 2):
        lo = np.maximum(boxes[a, :, 0], boxes[b, :, 0])
        hi = np.minimum(boxes[a, :, 1], boxes[b, :, 1])
        if np.all(hi > lo):
            raise ValueError(f"boxes {a} and {b} overlap")


def make_stripes(direction: int, h: float, phase: float, L: float, d: int) -> PeriodicSet:
    """Stripes ``[2kh, (2k+1)h) + phase`` along ``e_direction``, constant in the rest."""
    if not 0 <= direction < d:
        raise ValueError("direction out of range")
    if not (h > 0 and 2 * h <= L * (1 + COMMENSURATE_TOL)):
        raise ValueError("need 0 < 2h <= L")
    k = L / (2 * h)
    if abs(k - round(k)) > COMMENSURATE_TOL * max(1.0, k):
        raise ValueError(f"L={L!r} is not a multiple of the period 2h={2 * h!r}")
    k = int(round(k))
    boxes = []
    for j in range(k):
        box = [(0.0, L)] * d
        lo = phase + 2 * j * h
        box[direction] = (lo, lo + h)
        boxes.append(box)
    return PeriodicSet.from_boxes(boxes, L, d)


def empty_set(L: float, d: int) -> PeriodicSet:
    return PeriodicSet(period=float(L), dim=d, boxes=np.empty((0, d, 2)))


def full_set(L: float, d: int) -> PeriodicSet:
    return PeriodicSet.from_boxes([[(0.0, L)] * d], L, d)


def checkerboard(cell: float, L: float, d: int) -> PeriodicSet:
    """Alternating cubes of side ``cell``; ``L/(2 cell)`` must be an integer."""
    k = L / cell
    if abs(k - round(k)) > 1e-9 or int(round(k)) % 2:
        raise ValueError("L must be an even multiple of the cell")
    k = int(round(k))
    boxes = [[(L * c / k, L * (c + 1) / k) for c in idx]
             for idx in itertools.product(range(k), repeat=d) if sum(idx) % 2 == 0]
    return PeriodicSet.from_boxes(boxes, L, d)


# ---------------------------------------------------------------------------
# arrangement of a box union: the coarsest product grid resolving every face


def _arrangement(E: PeriodicSet):
    """Breakpoints per axis and the membership array of the elementary cells."""
    if "arrangement" in E._cache:
        return E._cache["arrangement"]
    L = E.period
    axes = []
    for i in range(E.dim):
        pts = {0.0, L}
        if E.boxes.size:
            pts.update(E.boxes[:, i, :].ravel().tolist())
        axes.append(np.array(sorted(pts)))
    mids = [0.5 * (a[1:] + a[:-1]) for a in axes]
    mesh = np.stack(np.meshgrid(*mids, indexing="ij"), axis=-1)
    member = E.contains(mesh.reshape(-1, E.dim)).reshape(mesh.shape[:-1])
    E._cache["arrangement"] = (axes, member)
    return axes, member


def per1i(E: PeriodicSet, i: int) -> float:
    """Faces orthogonal to ``e_i`` weighted by their (d-1)-measure."""
    if E.is_grid:
        g = E.grid
        return float((g != np.roll(g, 1, axis=i)).sum()) * E.cell ** (E.dim - 1)
    axes, member = _arrangement(E)
    jumps = (member != np.roll(member, 1, axis=i)).astype(float)
    widths = [np.diff(a) for a in axes]
    area = np.ones(())
    for j in range(E.dim):
        w = np.ones_like(widths[j]) if j == i else widths[j]
        area = np.multiply.outer(area, w)
    return float((jumps * area).sum())


def per1(E: PeriodicSet) -> float:
    return sum(per1i(E, i) for i in range(E.dim))


def slice_set(E: PeriodicSet, i: int, xperp) -> SliceProfile:
    """1D profile of ``E`` along ``e_i`` through the perpendicular point ``xperp``."""
    L = E.period
    xperp = np.mod(np.atleast_1d(np.asarray(xperp, dtype=float)), L)
    if xperp.size != E.dim - 1:
        raise ValueError("xperp must have d-1 coordinates")
    if E.is_grid:
        a = E.cell
        idx = [min(int(x / a), E.n - 1) for x in xperp]
        index = idx[:i] + [slice(None)] + idx[i:]
        return grid_line_profile(E.grid[tuple(index)], L)
    perp = [j for j in range(E.dim) if j != i]
    intervals = []
    for box in E.boxes:
        if all(box[j, 0] <= x < box[j, 1] for j, x in zip(perp, xperp)):
            intervals.append((box[i, 0], box[i, 1]))
    return profile_from_intervals(intervals, L)


def grid_line_profile(line, L: float) -> SliceProfile:
    line = np.asarray(line, dtype=bool)
    n = line.size
    a = L / n
    change = np.nonzero(line != np.roll(line, 1))[0]
    if not change.size:
        return SliceProfile(L, np.empty(0), bool(line[0]))
    return SliceProfile(L, change * a, bool(line[change[0]]))


def slicing_perimeter(E: PeriodicSet, i: int) -> float:
    """``per1i`` recomputed by integrating slice boundary counts over ``xperp``."""
    L = E.period
    if E.is_grid:
        pts_1d = (np.arange(E.n) + 0.5) * E.cell
        grids = [pts_1d] * (E.dim - 1)
        weight = E.cell ** (E.dim - 1)
        return float(sum(len(slice_set(E, i, x)) * weight
                         for x in itertools.product(*grids)))
    axes, _ = _arrangement(E)
    perp = [axes[j] for j in range(E.dim) if j != i]
    total = 0.0
    for cell in itertools.product(*[range(len(a) - 1) for a in perp]):
        mid = [0.5 * (a[c] + a[c + 1]) for a, c in zip(perp, cell)]
        vol = np.prod([a[c + 1] - a[c] for a, c in zip(perp, cell)]) if perp else 1.0
        total += len(slice_set(E, i, mid)) * vol
    return float(total)


def rasterize(E: PeriodicSet, n: int) -> PeriodicSet:
    """Grid of ``n^d`` cells, each filled iff its centre lies in ``E``."""
    if E.is_grid and E.n == n:
        return E
    c = (np.arange(n) + 0.5) * (E.period / n)
    mesh = np.stack(np.meshgrid(*[c] * E.dim, indexing="ij"), axis=-1)
    g = E.contains(mesh.reshape(-1, E.dim)).reshape((n,) * E.dim)
    return PeriodicSet.from_grid(g, E.period)


def complement(E: PeriodicSet) -> PeriodicSet:
    if E.is_grid:
        return PeriodicSet.from_grid(~E.grid, E.period)
    axes, member = _arrangement(E)
    boxes = []
    for idx in zip(*np.nonzero(~member)):
        boxes.append([(axes[j][c], axes[j][c + 1]) for j, c in enumerate(idx)])
    return PeriodicSet(period=E.period, dim=E.dim,
                       boxes=np.array(boxes).reshape(-1, E.dim, 2))


def translate(E: PeriodicSet, shift) -> PeriodicSet:
    """``E + shift``; for grids the shift must be a whole number of cells."""
    shift = np.asarray(shift, dtype=float).reshape(E.dim)
    if E.is_grid:
        cells = shift / E.cell
        if np.any(np.abs(cells - np.round(cells)) > 1e-9):
            raise ValueError("grid translations must be whole cells")
        return PeriodicSet.from_grid(
            np.roll(E.grid, tuple(int(c) for c in np.round(cells)), axis=tuple(range(E.dim))),
            E.period)
    b = E.boxes.copy()
    b += shift[None, :, None]
    return PeriodicSet(period=E.period, dim=E.dim, boxes=b)


def permute_axes(E: PeriodicSet, order) -> PeriodicSet:
    order = list(order)
    if E.is_grid:
        return PeriodicSet.from_grid(np.transpose(E.grid, order), E.period)
    return PeriodicSet(period=E.period, dim=E.dim, boxes=E.boxes[:, order, :])


def stripe_direction(E: PeriodicSet) -> int | None:
    """Axis ``i`` if ``E`` is constant in every direction except ``e_i``.

    Sets that are constant in every direction (empty or full) return 0.
    """
    if E.is_grid:
        g = E.grid
        varying = [i for i in range(E.dim) if np.any(g != np.roll(g, 1, axis=i))]
    else:
        varying = [i for i in range(E.dim) if per1i(E, i) > 0]
    if not varying:
        return 0
    return varying[0] if len(varying) == 1 else None


def grid_alignment(E: PeriodicSet, n: int) -> bool:
    """Whether every box coordinate is a multiple of ``L/n`` (exact rasterization)."""
    if E.is_grid:
        return n % E.n == 0
    if not E.boxes.size:
        return True
    x = E.boxes / (E.period / n)
    return bool(np.all(np.abs(x - np.round(x)) <= 1e-9))


# ---------------------------------------------------------------------------
# text I/O


def format_set(E: PeriodicSet) -> str:
    if E.is_grid:
        bits = E.grid.ravel().astype(np.int8)
        runs = []
        start = 0
        change = np.nonzero(np.diff(bits))[0] + 1
        for stop in list(change) + [bits.size]:
            runs.append(f"{bits[start]}x{stop - start}")
            start = stop
        return f"{E.dim} {E.period!r} grid {E.n}\n" + " ".join(runs) + "\n"
    lines = [f"{E.dim} {E.period!r} boxes"]
    for box in E.boxes:
        lines.append(" ".join(repr(float(v)) for v in box.ravel()))
    return "\n".join(lines) + "\n"


def parse_set(text: str) -> PeriodicSet:
    """Inverse of :func:`format_set`; errors carry the offending line number."""
    lines = [(k + 1, ln.strip()) for k, ln in enumerate(text.splitlines())]
    lines = [(k, ln) for k, ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise ValueError("line 1: empty set file")
    k0, header = lines[0]
    parts = header.split()
    try:
        d, L, repr_ = int(parts[0]), float(parts[1]), parts[2]
    except (IndexError, ValueError) as exc:
        raise ValueError(f"line {k0}: bad header {header!r}") from exc
    if repr_ == "boxes":
        boxes = []
        for k, ln in lines[1:]:
            try:
                vals = [float(v) for v in ln.split()]
            except ValueError as exc:
                raise ValueError(f"line {k}: non-numeric box row") from exc
            if len(vals) != 2 * d:
                raise ValueError(f"line {k}: expected {2 * d} numbers, got {len(vals)}")
            boxes.append(np.array(vals).reshape(d, 2))
        return PeriodicSet(period=L, dim=d, boxes=np.array(boxes).reshape(-1, d, 2))
    if repr_ == "grid":
        try:
            n = int(parts[3])
        except (IndexError, ValueError) as exc:
            raise ValueError(f"line {k0}: grid header needs n") from exc
        bits = []
        for k, ln in lines[1:]:
            for tok in ln.split():
                try:
                    b, c = tok.split("x")
                    if b not in ("0", "1"):
                        raise ValueError
                    bits.append(np.full(int(c), b == "1"))
                except ValueError as exc:
                    raise ValueError(f"line {k}: bad run token {tok!r}") from exc
        flat = np.concatenate(bits) if bits else np.empty(0, dtype=bool)
        if flat.size != n**d:
            raise ValueError(f"line {lines[-1][0]}: expected {n**d} cells, got {flat.size}")
        return PeriodicSet.from_grid(flat.reshape((n,) * d), L)
    raise ValueError(f"line {k0}: unknown representation {repr_!r}")


def write_set(E: PeriodicSet, path) -> None:
    Path(path).write_text(format_set(E))


def read_set(path) -> PeriodicSet:
    return parse_set(Path(path).read_text())
