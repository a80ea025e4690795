"""Kernel weights for piecewise-constant (grid) sets.

For a grid set with cell side ``a`` the function
``g_E(z) = int |chi_E(x) - chi_E(x+z)| dx`` is exactly the multilinear (tent)
interpolation of its lattice values, so

    int_{R^d} K_tau(z) g_E(z) dz = sum_m g_E(a m) W[m],
    W[m] = sum_n int K_tau(z) prod_i Lambda(z_i/a - m_i - n_i N) dz,

with ``Lambda`` the unit hat function and ``N = L/a``.  Cell integrals are
computed by Gauss-Legendre rules (graded towards the origin where the kernel
varies on the scale ``sigma``) inside a window of images; the kernel mass
beyond the window is spread uniformly over the lattice.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .kernel import ModelParams, kernel_mass

# Lattice sites kept explicitly per computation, by dimension.
WINDOW_BUDGET = {1: 2_000_001, 2: 1_500_000, 3: 2_000_000}


@dataclass(frozen=True)
class LatticeWeights:
    weights: np.ndarray      # W_eff on the N^d periodic lattice
    window_half: int         # explicit lattice window |m_i| <= window_half
    far_mass: float          # kernel mass assigned by the uniform far-field rule
    total_mass: float


def _gauss(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _graded_rule(ratio: float, n: int = 16):
    """Rule on ``[0, 1]`` with panels ``[0, r], [r, 2r], [2r, 4r], ...``."""
    x0, w0 = _gauss(n)
    edges = [0.0]
    step = ratio
    while edges[-1] + step < 1.0 and step > 0:
        edges.append(edges[-1] + step)
        step = edges[-1]
    edges.append(1.0)
    xs, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        xs.append(lo + (hi - lo) * x0)
        ws.append((hi - lo) * w0)
    return np.concatenate(xs), np.concatenate(ws)


def _corner_moments(cells: np.ndarray, x1: np.ndarray, w1: np.ndarray,
                    a: float, params: ModelParams) -> np.ndarray:
    """``a^d int_cell K(a(j+u)) prod phi_bits(u) du`` for each cell and corner.

    ``cells`` has shape ``(k, d)`` of non-negative cell indices; output has
    shape ``(k, 2^d)`` with corners ordered as ``itertools.product((0,1), ...)``.
    """
    d = cells.shape[1]
    nodes = np.stack(np.meshgrid(*[x1] * d, indexing="ij"), -1).reshape(-1, d)
    wts = np.prod(np.stack(np.meshgrid(*[w1] * d, indexing="ij"), -1).reshape(-1, d), axis=1)
    basis = np.empty((2**d, nodes.shape[0]))
    for b, bits in enumerate(itertools.product((0, 1), repeat=d)):
        phi = np.ones(nodes.shape[0])
        for i, bit in enumerate(bits):
            phi *= nodes[:, i] if bit else 1.0 - nodes[:, i]
        basis[b] = phi * wts
    out = np.empty((cells.shape[0], 2**d))
    sigma, p = params.sigma, params.p
    chunk = max(1, 4_000_000 // nodes.shape[0])
    for start in range(0, cells.shape[0], chunk):
        c = cells[start:start + chunk]
        r = a * (c.sum(axis=1)[:, None] + nodes.sum(axis=1)[None, :])
        out[start:start + chunk] = ((r + sigma) ** (-p)) @ basis.T
    return out * a**d


def _cell_moments(J: int, d: int, a: float, params: ModelParams) -> np.ndarray:
    """Corner moments for all cells ``[0, J)^d``, shape ``(J,)*d + (2,)*d``."""
    idx = np.stack(np.meshgrid(*[np.arange(J)] * d, indexing="ij"), -1).reshape(-1, d)
    reach = idx.max(axis=1)
    out = np.empty((idx.shape[0], 2**d))
    origin = reach == 0
    ratio = min(1.0, params.sigma / a)
    out[origin] = _corner_moments(idx[origin], *_graded_rule(ratio), a, params)
    for lo, hi, n in ((1, 4, 16), (5, 16, 8), (17, None, 4)):
        sel = (reach >= lo) & ((reach <= hi) if hi is not None else True)
        if np.any(sel):
            out[sel] = _corner_moments(idx[sel], *_gauss(n), a, params)
    return out.reshape((J,) * d + (2,) * d)


def _lattice_from_moments(M: np.ndarray, d: int) -> np.ndarray:
    """Hat-function weights ``W0[m]`` for lattice points ``0 <= m_i < J``.

    A lattice point collects the ``phi_0`` moment of the cell to its right
    and the ``phi_1`` moment of the cell to its left; at ``m_i = 0`` the left
    cell is the mirror image of cell 0, whose mirrored ``phi_1`` is ``phi_0``.
    """
    T = M
    for axis in range(d):
        right = np.take(T, 0, axis=d)
        left = np.take(T, 1, axis=d)
        n = right.shape[axis]
        shifted = np.concatenate([np.take(right, [0], axis=axis),
                                  np.take(left, np.arange(n - 1), axis=axis)], axis=axis)
        T = right + shifted
    return T


@lru_cache(maxsize=32)
def lattice_weights(N: int, L: float, d: int, p: float, tau: float,
                    images: int | None = None) -> LatticeWeights:
    """Periodized hat-function weights ``W_eff`` for an ``N^d`` grid of side ``L``."""
    params = ModelParams(d, p, tau)
    a = L / N
    if images is None:
        half = int((WINDOW_BUDGET.get(d, 100_000) ** (1.0 / d) - 1) // 2)
        images = max(1, int((half - N // 2) // N))
    half = images * N + N // 2
    J = half + 1
    M = _cell_moments(J, d, a, params)
    W0 = _lattice_from_moments(M, d)  # lattice points 0..J-1 per axis
    # fold the symmetric window |m_i| <= half onto the periodic lattice
    m = np.arange(-half, half + 1)
    fold = np.mod(m, N)
    w1 = np.ones(m.size)
    if N % 2 == 0:
        w1[0] = w1[-1] = 0.5  # -half and half are the same residue
    # W0 depends on |m| per axis
    full = W0[np.ix_(*[np.abs(m)] * d)]
    weight = np.ones(())
    for _ in range(d):
        weight = np.multiply.outer(weight, w1)
    full = full * weight
    for axis in range(d):
        acc = np.zeros(full.shape[:axis] + (N,) + full.shape[axis + 1:])
        np.add.at(acc, (slice(None),) * axis + (fold,), full)
        full = acc
    W = full
    total = kernel_mass(params)
    far = total - float(W.sum())
    W = W + far / N**d
    W.setflags(write=False)
    return LatticeWeights(W, half, far, total)
