"""Executable checks of the quantitative statements and desk-scale comparisons.

Every check returns a :class:`CheckOutcome` whose ``margin`` is the slack of
the tested inequality at the worst sample (``passed`` iff ``margin >= 0``).
Random ensembles are driven by an explicit seed stored in the witness.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import setgeom, stripedist
from .functional import (QuadratureSpec, decomposed_energy, direct_energy,
                         local_energy_field, local_volume_fraction,
                         r_tau_profile)
from .kernel import ModelParams, c1_constant, c2_constant
from .setgeom import PeriodicSet, SliceProfile
from .stripe1d import (convexity_window, d2e_tau, de_tau, e_tau, h_box,
                       h_interval, h_star)


@dataclass
class CheckOutcome:
    name: str
    passed: bool
    witness: dict
    margin: float
    samples: int
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else repr(v)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _outcome(name, margin, witness, samples, details=None) -> CheckOutcome:
    return CheckOutcome(name, bool(margin >= 0), witness, float(margin), int(samples),
                        details or {})


# ---------------------------------------------------------------------------
# random one-dimensional profiles


def random_profile(rng: np.random.Generator, period: float, mean_count: float,
                   gap_floor: float) -> SliceProfile:
    """Poisson number of boundaries (made even, at least 2) with all gaps >= gap_floor.

    Gaps are ``gap_floor`` plus a uniform (Dirichlet) split of the remaining
    length, which is the law of uniform points conditioned on the gap floor.
    """
    n = int(rng.poisson(mean_count))
    n = max(2, n + n % 2)
    n_max = int(period // gap_floor) if gap_floor > 0 else n
    n_max -= n_max % 2
    if n_max < 2:
        raise ValueError("gap floor too large for the period")
    n = min(n, n_max)
    spare = period - n * gap_floor
    gaps = gap_floor + spare * rng.dirichlet(np.ones(n))
    pts = np.mod(rng.uniform(0, period) + np.concatenate([[0.0], np.cumsum(gaps[:-1])]), period)
    pts = np.sort(pts)
    if np.any(np.diff(pts) <= 0):
        pts = np.unique(pts)
        pts = pts[: pts.size - pts.size % 2]
    return SliceProfile(period, pts, bool(rng.integers(2)))


def jittered_stripes(rng: np.random.Generator, period: float, h: float,
                     gap_floor: float, jitter: float = 0.15) -> SliceProfile:
    """Commensurate stripes of width near ``h`` with each boundary moved by ``jitter * h``."""
    k = max(1, int(round(period / (2 * h * rng.uniform(0.85, 1.15)))))
    w = period / (2 * k)
    pts = rng.uniform(0, period) + w * np.arange(2 * k)
    pts = pts + rng.uniform(-jitter, jitter, size=pts.size) * w
    gaps = np.diff(np.append(pts, pts[0] + period))
    if np.any(gaps < gap_floor):
        return random_profile(rng, period, period / h, gap_floor)
    return SliceProfile(period, np.sort(np.mod(pts, period)), bool(rng.integers(2)))


def _neighbor_gaps(profile: SliceProfile):
    g = profile.gaps()
    return np.roll(g, 1), g  # (s - s-, s+ - s) per boundary


def penalization_lower_bound(gap_minus, gap_plus, params: ModelParams):
    """Right-hand side ``-1 + C1 C2 [min(gap-^-beta, 1/tau) + min(gap+^-beta, 1/tau)]``."""
    c = c1_constant(params.d, params.p) * c2_constant(params.q)
    b, t = params.beta, params.tau
    return -1.0 + c * (np.minimum(np.asarray(gap_minus, float) ** -b, 1 / t)
                       + np.minimum(np.asarray(gap_plus, float) ** -b, 1 / t))


def estimate_eta0(params: ModelParams, samples: int = 400, seed: int = 0) -> float:
    """Largest ``eta`` such that ``min(gap-, gap+) < eta`` forced ``r > 0`` on an ensemble.

    Profiles mix all gap scales from ``sigma/10`` up to a few optimal widths;
    the estimate is the smallest nearest-gap among points with ``r <= 0``.
    """
    rng = np.random.default_rng(seed)
    hs = h_star(params).h
    floor = params.sigma / 10
    eta0 = np.inf
    for _ in range(samples):
        period = hs * rng.uniform(4, 16)
        mean = period / (hs * rng.uniform(0.05, 2.0))
        prof = random_profile(rng, period, mean, floor)
        if prof.boundaries.size < 2:
            continue
        r = r_tau_profile(prof, params)
        gm, gp = _neighbor_gaps(prof)
        bad = r <= 0
        if bad.any():
            eta0 = min(eta0, float(np.min(np.minimum(gm, gp)[bad])))
    return eta0


# ---------------------------------------------------------------------------
# checks


def check_stripe_equality(params: ModelParams, cases, tol: float = 1e-5,
                          quad: QuadratureSpec | None = None) -> CheckOutcome:
    """``|direct - decomposed| <= tol * |direct|`` on stripes; ``cases`` are ``(h, L)``."""
    quad = quad or QuadratureSpec()
    worst, wit, rows = -np.inf, {}, []
    for h, L in cases:
        E = setgeom.make_stripes(0, h, 0.0, L, params.d)
        a = direct_energy(E, params, quad).total
        b = decomposed_energy(E, params, quad).total
        dev = abs(a - b) / max(abs(a), 1e-300)
        rows.append({"h": h, "L": L, "direct": a, "decomposed": b, "rel_dev": dev})
        if dev > worst:
            worst, wit = dev, rows[-1]
    return _outcome("stripe_equality", tol - worst, wit, len(rows), {"rows": rows})


def perturbed_stripe_gap(params: ModelParams, h: float, L: float, shift: float,
                         quad: QuadratureSpec | None = None) -> tuple[float, float]:
    """``(direct, decomposed)`` for stripes with one interface displaced by ``shift``.

    The displaced interface is confined to half of the box in the second
    coordinate so the set is no longer a union of stripes.
    """
    quad = quad or QuadratureSpec()
    d = params.d
    k = int(round(L / (2 * h)))
    boxes = []
    for j in range(k):
        lo = 2 * j * h
        if j == 0 and d >= 2:
            rest = [(0.0, L)] * (d - 2)
            boxes.append([(lo, lo + h + shift), (0.0, L / 2)] + rest)
            boxes.append([(lo, lo + h), (L / 2, L)] + rest)
        else:
            boxes.append([(lo, lo + h + (shift if j == 0 else 0.0))] + [(0.0, L)] * (d - 1))
    E = PeriodicSet.from_boxes(boxes, L, d)
    return direct_energy(E, params, quad).total, decomposed_energy(E, params, quad).total


def check_lower_bound(params: ModelParams, n: int = 64, samples: int = 100,
                      tol: float = 1e-6, seed: int = 0,
                      quad: QuadratureSpec | None = None) -> CheckOutcome:
    """``decomposed <= direct + tol`` on random grid sets (mixture of coarse blobs)."""
    quad = quad or QuadratureSpec()
    rng = np.random.default_rng(seed)
    L = float(n) / 4
    worst, wit = np.inf, {}
    for k in range(samples):
        G = random_grid_set(rng, n, L, params.d)
        a = direct_energy(G, params, quad).total
        b = decomposed_energy(G, params, quad).total
        m = a + tol - b
        if m < worst:
            worst, wit = m, {"seed": seed, "index": k, "direct": a, "decomposed": b}
    return _outcome("lower_bound", worst, wit, samples)


def random_grid_set(rng: np.random.Generator, n: int, L: float, d: int) -> PeriodicSet:
    """Random grid set: i.i.d. cells at a random block scale, randomly shifted."""
    block = int(rng.choice([1, 2, 4, 8]))
    m = max(1, n // block)
    coarse = rng.random((m,) * d) < rng.uniform(0.2, 0.8)
    grid = coarse
    for axis in range(d):
        grid = np.repeat(grid, block, axis=axis)
    grid = grid[(slice(0, n),) * d]
    if grid.shape[0] < n:
        grid = np.pad(grid, [(0, n - grid.shape[0])] * d, mode="wrap")
    shift = tuple(int(v) for v in rng.integers(0, n, size=d))
    return PeriodicSet.from_grid(np.roll(grid, shift, axis=tuple(range(d))), L)


def check_penalization_bound(params: ModelParams, samples: int = 1000, seed: int = 0,
                             gap_floor: float | None = None) -> CheckOutcome:
    """``r_tau(E, s)`` against its lower bound in terms of the neighbouring gaps.

    ``gap_floor`` defaults to half the empirical ``eta0``.
    """
    eta0 = estimate_eta0(params, seed=seed)
    if gap_floor is None:
        gap_floor = eta0 / 2 if math.isfinite(eta0) else params.sigma
    rng = np.random.default_rng(seed + 1)
    hs = h_star(params).h
    worst, wit, points = np.inf, {}, 0
    for k in range(samples):
        period = hs * rng.uniform(4, 16)
        prof = random_profile(rng, period, period / (hs * rng.uniform(0.2, 2.0)), gap_floor)
        r = r_tau_profile(prof, params)
        gm, gp = _neighbor_gaps(prof)
        slack = r - penalization_lower_bound(gm, gp, params)
        points += r.size
        j = int(np.argmin(slack))
        if slack[j] < worst:
            worst = float(slack[j])
            wit = {"seed": seed, "index": k, "period": period,
                   "boundaries": prof.boundaries, "point": int(j),
                   "r": float(r[j]), "gap_minus": float(gm[j]), "gap_plus": float(gp[j])}
    return _outcome("penalization_bound", worst, wit, points,
                    {"eta0": eta0, "gap_floor": gap_floor, "profiles": samples})


def one_d_optimization_values(params: ModelParams, interval_len: float, samples: int,
                              seed: int = 0, gap_floor: float | None = None) -> np.ndarray:
    """``sum_{s in I} r_tau(E, s) - |I| e_tau(h_tau(I))`` over random profiles.

    Profiles have period ``2|I|`` and ``I = [0, |I|)``.  Half of them are
    uniform (Poisson count, gap floor), half are jittered commensurate
    stripes with a random width near ``h_tau(I)``, which probe the boundary
    deficit of near-optimal sets.
    """
    rng = np.random.default_rng(seed)
    hs = h_star(params).h
    if gap_floor is None:
        gap_floor = params.sigma
    e_I = h_interval(interval_len, params).energy
    period = 2 * interval_len
    out = np.empty(samples)
    for k in range(samples):
        if k % 2:
            prof = jittered_stripes(rng, period, hs, gap_floor)
        else:
            prof = random_profile(rng, period, period / hs, gap_floor)
        r = r_tau_profile(prof, params)
        inside = prof.boundaries < interval_len
        out[k] = r[inside].sum() - interval_len * e_I
    return out


def periodic_profile_value(params: ModelParams, interval_len: float, phase: float = 0.0) -> float:
    """The same quantity for the best commensurate stripes of ``I``."""
    h = h_interval(interval_len, params).h
    period = 2 * interval_len
    k = int(round(period / h))
    pts = np.mod(phase + h * np.arange(k), period)
    prof = SliceProfile(period, np.sort(pts), True)
    r = r_tau_profile(prof, params)
    inside = prof.boundaries < interval_len
    return float(r[inside].sum() - interval_len * h_interval(interval_len, params).energy)


def check_1d_optimization(params: ModelParams, multiples=(10, 20, 40), samples: int = 1000,
                          seed: int = 0, gap_floor: float | None = None,
                          periodic_tol: float = 2.0) -> CheckOutcome:
    """Uniform lower bound of the 1D optimization quantity over ``|I|``.

    The fitted ``C0`` is the worst deficit over the smallest interval; the
    check fails if a larger interval is worse by more than that amount
    (growth with ``|I|``) or if the commensurate periodic profile is not
    within ``periodic_tol`` of zero.
    """
    hs = h_star(params).h
    if gap_floor is None:
        eta0 = estimate_eta0(params, seed=seed)
        gap_floor = eta0 / 2 if math.isfinite(eta0) else params.sigma
    mins, periodic = {}, {}
    for m in multiples:
        vals = one_d_optimization_values(params, m * hs, samples, seed + m, gap_floor)
        mins[m] = float(vals.min())
        periodic[m] = periodic_profile_value(params, m * hs)
    c0 = max(0.0, -mins[multiples[0]])
    growth = min(mins[m] + 2 * c0 + 1.0 for m in multiples)
    per_ok = min(periodic_tol - abs(v) for v in periodic.values())
    margin = min(growth, per_ok)
    return _outcome("1d_optimization", margin,
                    {"seed": seed, "min_values": mins, "periodic": periodic},
                    samples * len(multiples),
                    {"C0_fitted": max(0.0, -min(mins.values())), "gap_floor": gap_floor})


def check_convexity_and_window(params: ModelParams, taus=(0.01, 0.005),
                               lengths=(20, 40, 80, 160, 320), eps: float = 0.01) -> CheckOutcome:
    """``h_box(L)`` in the convexity window, ``d2e > 0`` there, bounded drift ``|h_box - h*| L``.

    The drift bound is ``2 h*^2``: consecutive admissible widths near ``h*``
    are ``~2 h*^2 / L`` apart.
    """
    rows, margin, wit = [], np.inf, {}
    for tau in taus:
        p = params.with_tau(tau)
        win = convexity_window(p, eps)
        hs = h_star(p)
        for L in lengths:
            hb = h_box(L, p)
            d2 = float(d2e_tau(hb.h, p))
            drift = abs(hb.h - hs.h) * L
            row = {"tau": tau, "L": L, "h_box": hb.h, "h_star": hs.h, "drift": drift,
                   "d2e": d2, "de": float(de_tau(hb.h, p)),
                   "energy_gap_times_L": (hb.energy - hs.energy) * L,
                   "c1bar": win.c1bar, "c2bar": win.c2bar, "c3bar": win.c3bar}
            rows.append(row)
            m = min(hb.h - win.c1bar, win.c2bar - hb.h, d2, 2 * hs.h**2 - drift)
            if m < margin:
                margin, wit = m, row
    drifts = [r["drift"] for r in rows]
    return _outcome("convexity_window", margin, wit, len(rows),
                    {"rows": rows, "max_drift": max(drifts)})


def kernel_difference_sups(params: ModelParams, tau: float, window, n_grid: int = 401):
    grid = np.linspace(window.c1bar, window.c2bar, n_grid)
    p0, pt = params.with_tau(0.0), params.with_tau(tau)
    return (float(np.max(np.abs(e_tau(grid, pt) - e_tau(grid, p0)))),
            float(np.max(np.abs(de_tau(grid, pt) - de_tau(grid, p0)))),
            float(np.max(np.abs(d2e_tau(grid, pt) - d2e_tau(grid, p0)))))


def check_kernel_difference_bounds(params: ModelParams, taus=(1e-2, 1e-3, 1e-4),
                                   eps: float = 0.02, slope_tol: float = 0.1) -> CheckOutcome:
    """Log-log slope of the sup differences against ``tau^(1/beta)`` is ``1 +- slope_tol``."""
    window = convexity_window(params.with_tau(0.0), eps)
    zero = kernel_difference_sups(params, 0.0, window)
    sig = np.array([t ** (1 / params.beta) for t in taus])
    sups = np.array([kernel_difference_sups(params, t, window) for t in taus])
    slopes = np.diff(np.log(sups), axis=0) / np.diff(np.log(sig))[:, None]
    margin = slope_tol - float(np.max(np.abs(slopes - 1.0)))
    if max(zero) > 0:
        margin = -max(zero)
    return _outcome("kernel_differences", margin, {"slopes": slopes, "sups": sups},
                    len(taus), {"window": (window.c1bar, window.c2bar), "tau0_diffs": zero})


# ---------------------------------------------------------------------------
# pattern comparison


def _grid_pattern(mask: np.ndarray, L: float) -> PeriodicSet:
    return PeriodicSet.from_grid(mask, L)


def droplet_lattice(n: int, L: float, per_side: int) -> PeriodicSet:
    """Square droplets on a square lattice, side rounded to whole cells (density ~ 1/2)."""
    if n % per_side:
        raise ValueError("per_side must divide n")
    P = n // per_side
    s = int(round(P / math.sqrt(2)))
    tile = np.zeros((P, P), dtype=bool)
    tile[:s, :s] = True
    return _grid_pattern(np.tile(tile, (per_side, per_side)), L)


def diagonal_stripes(n: int, L: float, k: int) -> PeriodicSet:
    """Staircase stripes ``((i + j) // k) % 2 == 0``; needs ``2k | n``."""
    if n % (2 * k):
        raise ValueError("2k must divide n")
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    return _grid_pattern(((i + j) // k) % 2 == 0, L)


def compare_patterns(params: ModelParams, L: float, n: int = 240,
                     checker_ks=range(3, 13), quad: QuadratureSpec | None = None) -> list[dict]:
    """Direct energies of stripes and competitors, sorted by energy."""
    if params.d != 2:
        raise ValueError("pattern comparison is two-dimensional")
    quad = quad or QuadratureSpec(grid_n=n)
    hb = h_box(L, params)
    rows = []

    def add(kind, label, E):
        rep = direct_energy(E, params, quad)
        rows.append({"pattern": kind, "label": label, "energy": rep.total,
                     "error_bound": rep.error_bound, "grid_n": rep.grid_n,
                     "volume_fraction": E.volume_fraction()})

    add("stripes", f"h={hb.h:.6g} (optimal)", setgeom.make_stripes(0, hb.h, 0.0, L, 2))
    k_opt = int(round(L / (2 * hb.h)))
    ks = {k_opt - 1, k_opt + 1, int(round(L / (2 * 0.7 * hb.h)))} - {k_opt, 0}
    for k in sorted(ks):
        h = L / (2 * k)
        add("stripes_off_period", f"h={h:.6g}", setgeom.make_stripes(0, h, 0.0, L, 2))
    for k in checker_ks:
        c = L / (2 * k)
        add("checkerboard", f"cell={c:.6g}", setgeom.checkerboard(c, L, 2))
    a = L / n
    for m in sorted({m for m in range(2, 25) if n % m == 0
                     and abs(L / m - 2 * hb.h) <= hb.h}):
        add("droplets", f"lattice={L / m:.6g}", droplet_lattice(n, L, m))
    target = hb.h * math.sqrt(2) / a
    ks = sorted((k for k in range(1, n // 2 + 1) if n % (2 * k) == 0),
                key=lambda k: abs(k - target))[:2]
    for k in sorted(ks):
        add("diagonal", f"width={k * a / math.sqrt(2):.6g}", diagonal_stripes(n, L, k))
    rows.sort(key=lambda r: r["energy"])
    return rows


def check_symmetry_breaking(params: ModelParams, L: float, n: int = 240) -> CheckOutcome:
    rows = compare_patterns(params, L, n)
    best = rows[0]
    others = [r for r in rows if not (r["pattern"] == "stripes")]
    runner = min(others, key=lambda r: r["energy"])
    stripes = next(r for r in rows if r["pattern"] == "stripes")
    margin = runner["energy"] - stripes["energy"] - runner["error_bound"] - stripes["error_bound"]
    return _outcome("symmetry_breaking", margin, {"best": best, "runner_up": runner},
                    len(rows), {"rows": rows})


# ---------------------------------------------------------------------------
# local quantities


def check_nearly_full_cubes(E: PeriodicSet, l: float, params: ModelParams, delta: float,
                            eta0: float, quad: QuadratureSpec | None = None) -> CheckOutcome:
    """``Fbar >= -delta d / eta0`` on cubes with ``min(|Q\\E|, |E cap Q|) <= delta l^d``."""
    F = local_energy_field(E, l, params, quad).sum(axis=0)
    frac = local_volume_fraction(E, l, quad)
    sel = np.minimum(frac, 1 - frac) <= delta
    if not sel.any():
        return _outcome("nearly_full_cubes", 0.0, {}, 0)
    slack = F[sel] + delta * params.d / eta0
    j = int(np.argmin(slack))
    return _outcome("nearly_full_cubes", float(slack[j]),
                    {"cube": np.argwhere(sel)[j], "Fbar": float(F[sel][j])}, int(sel.sum()))


def rigidity_probe(sets: dict, params: ModelParams, taus, M: float, l: float,
                   eta: float, resolution: int = 32,
                   quad: QuadratureSpec | None = None) -> list[dict]:
    """``max D_eta`` over grid-aligned cubes with ``Fbar <= M`` for each set and ``tau``."""
    rows = []
    for name, E in sets.items():
        G, _ = (E, True) if E.is_grid else (setgeom.rasterize(E, (quad or QuadratureSpec()).grid_n), False)
        z_axis = np.arange(G.n) * G.cell + l / 2
        D = stripedist.d_eta_field(G, l, z_axis, eta, resolution).min(axis=0)
        for tau in taus:
            F = local_energy_field(G, l, params.with_tau(tau), quad).sum(axis=0)
            sel = F <= M
            rows.append({"set": name, "tau": tau, "cubes_in_class": int(sel.sum()),
                         "max_D_eta": float(D[sel].max()) if sel.any() else float("nan"),
                         "max_Fbar": float(F.max())})
    return rows


# ---------------------------------------------------------------------------
# suites


def default_params() -> dict:
    return {"1d": ModelParams(1, 3.0, 0.01), "2d": ModelParams(2, 4.0, 0.02)}


def _suite_table(seed: int) -> dict:
    p1, p2 = default_params()["1d"], default_params()["2d"]
    hs1 = h_star(p1).h
    hs2 = h_star(p2).h
    L2 = round(8 * 2 * hs2)
    return {
        "stripe-equality": lambda: check_stripe_equality(
            p2, [(L2 / 16, L2), (L2 / 8, L2), (L2 / 24, L2)]),
        "lower-bound": lambda: check_lower_bound(p2, samples=20, seed=seed),
        "penalization": lambda: check_penalization_bound(p1, 300, seed),
        "1d-optimization": lambda: check_1d_optimization(p1, samples=200, seed=seed),
        "convexity": lambda: check_convexity_and_window(p1),
        "kernel-differences": lambda: check_kernel_difference_bounds(p1),
        "symmetry-breaking": lambda: check_symmetry_breaking(p2, L2),
        "closed-form": lambda: _closed_form_check(hs1),
    }


def _closed_form_check(hs1: float) -> CheckOutcome:
    p0 = ModelParams(1, 3.0, 0.0)
    r = h_star(p0)
    margin = min(1e-8 - abs(r.h - 4 * math.log(2)),
                 1e-10 - abs(r.energy + 1 / (8 * math.log(2))))
    return _outcome("closed_form", margin, {"h": r.h, "energy": r.energy}, 1)


SUITES = tuple(_suite_table(0)) + ("all",)


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("STRIPE_THREADS", "1")))
    except ValueError:
        return 1


def run_suite(name: str, seed: int = 0) -> list[CheckOutcome]:
    table = _suite_table(seed)
    if name == "all":
        names = list(table)
    elif name in table:
        names = [name]
    else:
        raise KeyError(f"unknown suite {name!r}; available: {', '.join(SUITES)}")
    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        futures = {n: pool.submit(table[n]) for n in names}
        results = {n: f.result() for n, f in futures.items()}
    return [results[n] for n in sorted(results)]


def report_json(outcomes: list[CheckOutcome]) -> str:
    return json.dumps({"checks": [o.to_dict() for o in outcomes],
                       "passed": all(o.passed for o in outcomes)}, sort_keys=True, indent=1)


def report_text(outcomes: list[CheckOutcome]) -> str:
    lines = [f"{'check':<22} {'status':<6} {'margin':>14} {'samples':>8}"]
    for o in outcomes:
        lines.append(f"{o.name:<22} {'PASS' if o.passed else 'FAIL':<6} "
                     f"{o.margin:>14.6g} {o.samples:>8d}")
    return "\n".join(lines)
