"""Power-law interaction kernel, its perpendicular marginal and moments.

The kernel is ``K_1(z) = (|z|_1 + 1)^(-p)`` and its rescaling
``K_tau(z) = tau^(-p/beta) K_1(z tau^(-1/beta))``.  Writing
``sigma = tau^(1/beta)`` this is simply ``(|z|_1 + sigma)^(-p)``, which is the
form used for every evaluation below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate

TAU_ZERO_MSG = "kernel undefined at tau=0; use limit formulas in stripe1d"


@dataclass(frozen=True)
class ModelParams:
    """Dimension ``d``, exponent ``p`` and the parameter ``tau``.

    ``beta = p - d - 1`` and ``q = p - d + 1`` are derived.  ``L`` is an
    optional box side attached per computation.
    """

    d: int
    p: float
    tau: float
    L: float | None = None
    beta: float = field(init=False)
    q: float = field(init=False)

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.d}")
        if self.p < self.d + 2:
            raise ValueError(f"need p >= d + 2, got p={self.p}, d={self.d}")
        if not self.tau >= 0:
            raise ValueError(f"tau must be >= 0, got {self.tau}")
        if self.L is not None and not self.L > 0:
            raise ValueError(f"box side must be positive, got {self.L}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "beta", self.p - self.d - 1)
        object.__setattr__(self, "q", self.p - self.d + 1)

    @property
    def sigma(self) -> float:
        """Kernel saturation length ``tau^(1/beta)``."""
        return self.tau ** (1.0 / self.beta)

    def with_tau(self, tau: float) -> "ModelParams":
        return replace(self, tau=tau)

    def with_L(self, L: float) -> "ModelParams":
        return replace(self, L=L)


@dataclass(frozen=True)
class KernelConstants:
    c1: float
    c2: float
    m1: float
    jc_analogue: float


def _require_tau(params: ModelParams) -> None:
    if params.tau <= 0:
        raise ValueError(TAU_ZERO_MSG)


def k1(zeta, p: float) -> float | np.ndarray:
    """``(|zeta|_1 + 1)^(-p)``; ``zeta`` has the coordinates on its last axis."""
    z = np.asarray(zeta, dtype=float)
    r = np.abs(z).sum(axis=-1) if z.ndim else abs(float(z))
    return (r + 1.0) ** (-p)


def k_tau(zeta, params: ModelParams):
    _require_tau(params)
    z = np.asarray(zeta, dtype=float)
    r = np.abs(z).sum(axis=-1) if z.ndim else abs(float(z))
    return radial_k_tau(r, params)


def radial_k_tau(r, params: ModelParams):
    """``K_tau`` as a function of the l1 radius ``r``."""
    return (np.asarray(r, dtype=float) + params.sigma) ** (-params.p)


def c1_constant(d: int, p: float) -> float:
    """``int_{R^(d-1)} (|xi|_1 + 1)^(-p) dxi``; equal to 1 when d = 1."""
    if d == 1:
        return 1.0
    q = p - d + 1
    return 2.0 ** (d - 1) * math.exp(math.lgamma(q) - math.lgamma(p))


def c2_constant(q: float) -> float:
    return 1.0 / ((q - 1.0) * (q - 2.0))


def khat_tau(rho, params: ModelParams):
    """Marginal of ``K_tau`` over the d-1 perpendicular coordinates.

    Closed form ``c1 (|rho| + sigma)^(-q)``, equivalently
    ``tau^(-q/beta) Khat_1(rho tau^(-1/beta))``.
    """
    _require_tau(params)
    c1 = c1_constant(params.d, params.p)
    return c1 * (np.abs(np.asarray(rho, dtype=float)) + params.sigma) ** (-params.q)


def kernel_constants(params: ModelParams) -> KernelConstants:
    c1 = c1_constant(params.d, params.p)
    c2 = c2_constant(params.q)
    jc = 2.0 * c1 * c2
    m1 = jc / params.tau if params.tau > 0 else math.inf
    return KernelConstants(c1=c1, c2=c2, m1=m1, jc_analogue=jc)


def kernel_mass(params: ModelParams) -> float:
    """``int_{R^d} K_tau = 2^d Gamma(p-d)/Gamma(p) sigma^(d-p)``."""
    _require_tau(params)
    d, p = params.d, params.p
    return 2.0 ** d * math.exp(math.lgamma(p - d) - math.lgamma(p)) * params.sigma ** (d - p)


# ---------------------------------------------------------------------------
# Quadrature oracles.  These never use the closed forms above.


def l1_shell_density(r, n: int):
    """Surface density of ``{|xi|_1 = r}`` in R^n: ``2^n r^(n-1)/(n-1)!``."""
    return 2.0 ** n * np.asarray(r, dtype=float) ** (n - 1) / math.factorial(n - 1)


def semi_infinite_quad(f, edges, tol: float = 1e-13) -> float:
    """``int_{edges[0]}^inf f`` on the given finite panels plus an inverted tail.

    The tail beyond ``edges[-1]`` is mapped by ``x = 1/u`` so algebraic decay
    becomes a smooth integrand on a bounded interval.
    """
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(f, a, b, epsabs=0.0, epsrel=tol, limit=400)
        total += val
    x_max = edges[-1]

    def inverted(u):
        return f(1.0 / u) / (u * u) if u > 0 else 0.0

    val, _ = integrate.quad(inverted, 0.0, 1.0 / x_max, epsabs=0.0, epsrel=tol, limit=400)
    return total + val


def radial_integral(f, n: int, tol: float = 1e-13) -> float:
    """``int_{R^n} f(|xi|_1) dxi`` by adaptive quadrature of the radial reduction."""
    if n == 0:
        return float(f(0.0))
    return semi_infinite_quad(lambda r: f(r) * l1_shell_density(r, n),
                              [0.0, 0.5, 2.0, 10.0, 100.0], tol)


def khat_quadrature(rho: float, params: ModelParams) -> float:
    """Oracle for ``khat_tau``: integrate ``K_tau`` over the perpendicular space."""
    _require_tau(params)
    a = abs(rho) + params.sigma
    p = params.p
    n = params.d - 1
    if n == 0:
        return a ** (-p)
    return radial_integral(lambda r: (r + a) ** (-p), n)


def first_moment_quadrature(params: ModelParams) -> float:
    """Oracle for ``m1``: nested quadrature of ``|rho|`` times the quadrature marginal."""
    _require_tau(params)
    s = params.sigma
    edges = sorted({0.0, s, 10 * s, 100 * s, 1.0, 10.0, 100.0})
    return 2.0 * semi_infinite_quad(lambda rho: rho * khat_quadrature(rho, params), edges, 1e-12)
