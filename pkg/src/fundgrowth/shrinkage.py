"""Shrinkage of the filtered growth-optimal portfolio.

The filtered portfolio maximises expected log-growth given the observations,
but realised growth scatters widely around that target when the posterior
covariance is large.  The shrunk portfolio instead minimises the mean squared
deviation of realised growth from the achievable optimum,

    objective(pi) = ||dC^{1/2} (pi - nu_hat)||^4 / 4 + ||kappa^{1/2} dC pi||^2,

whose unique minimiser is ``(id + kappa dC / b)^{-1} nu_hat`` with the scalar
``b`` (the growth given up locally) solving a one-dimensional fixed-point
equation.  With a single fund, or with Bayesian updating under a constant
covariance rate, the minimiser collapses to a uniform multiplier ``a`` of the
filtered portfolio, available in closed form via Cardano's formula.

All functions are pure and safe for unrestricted concurrent use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NoConvergence, SingularC
from .psd import CovMatrix

# Residual target |f(b) - b| <= RESIDUAL_TOL * max(1, b).
RESIDUAL_TOL = 1e-12
MAX_ITERATIONS = 200
# ||h z|| below this relative level counts as z in ker(h): no shrinkage.
_DEGENERATE_RTOL = 1e-14


@dataclass(frozen=True)
class FixedPointResult:
    """Solution of ``sum_i (s_i/(s_i+b))^2 w_i / 2 = b``."""

    b: float
    iterations: int
    residual: float
    degenerate: bool


@dataclass(frozen=True)
class ShrinkResult:
    """Shrunk portfolio and the scalars describing the trade it makes.

    ``b`` is the expected growth given up relative to the filtered portfolio,
    ``e_sq`` the minimised squared tracking error, ``psi`` the uniform-case
    parameter, and ``a`` the uniform multiplier (populated when the problem
    is genuinely uniform: one fund, or curvature proportional to identity).
    """

    rho: np.ndarray
    b: float
    a: Optional[float]
    psi: float
    e_sq: float
    iterations: int
    residual: float
    degenerate: bool


def _eigen_fixed_point(s: np.ndarray, w: np.ndarray):
    """Return f and f' for f(b) = sum_i w_i s_i^2 / (s_i + b)^2 / 2."""
    mask = s > 0.0
    s = s[mask]
    w = w[mask]

    def f(b: float) -> float:
        q = s / (s + b)
        return 0.5 * float(np.sum(w * q * q))

    def fp(b: float) -> float:
        return -float(np.sum(w * s * s / (s + b) ** 3))

    return f, fp


def solve_b(h: CovMatrix, z: np.ndarray) -> FixedPointResult:
    """Solve the scalar fixed point for the growth give-up ``b``.

    ``f`` is strictly decreasing and convex on ``(0, inf)``, so the fixed
    point is unique and lies in ``(0, f(0))`` with ``f(0) <= ||z||^2 / 2``.
    The iteration brackets it between a secant step from above and a Newton
    step from below, falling back to plain bisection whenever a step leaves
    the bracket.  If ``h z = 0`` the problem is degenerate and ``b = 0``.
    """
    z = np.asarray(z, dtype=float).reshape(-1)
    if z.size != h.dim:
        raise ValueError(f"z has size {z.size}, h has dim {h.dim}")
    h_norm = float(h.eigenvalues[0])
    z_norm = float(np.linalg.norm(z))
    if float(np.linalg.norm(h.entries @ z)) <= _DEGENERATE_RTOL * h_norm * z_norm:
        return FixedPointResult(b=0.0, iterations=0, residual=0.0, degenerate=True)

    weights = (h.eigenvectors.T @ z) ** 2
    f, fp = _eigen_fixed_point(h.eigenvalues, weights)

    lo, hi = 0.0, f(0.0)
    f_lo, f_hi = f(lo), f(hi)
    for iteration in range(1, MAX_ITERATIONS + 1):
        if abs(f_hi - hi) <= RESIDUAL_TOL * max(1.0, hi):
            return FixedPointResult(hi, iteration, abs(f_hi - hi), False)
        if abs(f_lo - lo) <= RESIDUAL_TOL * max(1.0, lo):
            return FixedPointResult(lo, iteration, abs(f_lo - lo), False)
        width = hi - lo
        if width <= 0.0:
            break
        # Two accelerated candidates: a Newton step from the upper end lands
        # below the fixed point, the bracket chord's diagonal crossing lands
        # above it (both by convexity).  Classify by sign so round-off cannot
        # corrupt the bracket.
        slope = fp(hi)
        newton = (f_hi - slope * hi) / (1.0 - slope)
        chord_slope = (f_hi - f_lo) / width
        chord = (f_lo - lo * chord_slope) / (1.0 - chord_slope)
        for cand in (newton, chord):
            if math.isfinite(cand) and lo < cand < hi:
                f_c = f(cand)
                if f_c > cand:
                    lo, f_lo = cand, f_c
                else:
                    hi, f_hi = cand, f_c
        # Safeguard: when acceleration fails to halve the bracket, bisect so
        # convergence stays geometric no matter how lopsided f is.
        if hi - lo > 0.5 * width:
            mid = 0.5 * (lo + hi)
            f_m = f(mid)
            if f_m > mid:
                lo, f_lo = mid, f_m
            else:
                hi, f_hi = mid, f_m
    raise NoConvergence(f"fixed point not reached after {MAX_ITERATIONS} iterations")


def shrink_portfolio(nu_hat: np.ndarray, kappa: CovMatrix, d_c: CovMatrix) -> ShrinkResult:
    """Portfolio minimising mean squared deviation from the achievable growth.

    Requires ``d_c`` positive definite and ``kappa`` PSD.  The returned
    ``rho`` satisfies ``rho = (id + kappa dC / b)^{-1} nu_hat`` and gives up
    ``b = ||dC^{1/2}(rho - nu_hat)||^2 / 2`` of growth; in the degenerate
    case ``kappa dC nu_hat = 0`` no shrinkage happens and ``rho = nu_hat``.
    """
    nu_hat = np.asarray(nu_hat, dtype=float).reshape(-1)
    w = d_c.eigenvalues
    if w[-1] <= 1e-12 * w[0] or w[0] <= 0.0:
        raise SingularC("dC must be positive definite")
    if kappa.dim != d_c.dim or nu_hat.size != d_c.dim:
        raise ValueError("nu_hat, kappa and dC dims disagree")

    root = (d_c.eigenvectors * np.sqrt(w)) @ d_c.eigenvectors.T
    inv_root = (d_c.eigenvectors / np.sqrt(w)) @ d_c.eigenvectors.T
    h = CovMatrix(root @ kappa.entries @ root)
    z = root @ nu_hat

    d_f = 0.5 * float(z @ z)
    d_v_sq = float(z @ h.entries @ z)
    psi = 13.5 * d_f * d_f / d_v_sq if d_v_sq > 0.0 else math.inf

    fp = solve_b(h, z)
    if fp.degenerate:
        return ShrinkResult(
            rho=nu_hat.copy(), b=0.0, a=1.0, psi=psi, e_sq=0.0,
            iterations=fp.iterations, residual=fp.residual, degenerate=True,
        )

    s = h.eigenvalues
    coords = h.eigenvectors.T @ z
    y = h.eigenvectors @ (coords * (fp.b / (s + fp.b)))
    rho = inv_root @ y

    e_sq = fp.b ** 2 + float(y @ h.entries @ y)
    spread = float(s[0] - s[-1])
    uniform = h.dim == 1 or spread <= 1e-12 * max(s[0], 1.0)
    a = fp.b / (fp.b + float(s.mean())) if uniform else None
    return ShrinkResult(
        rho=rho, b=fp.b, a=a, psi=psi, e_sq=e_sq,
        iterations=fp.iterations, residual=fp.residual, degenerate=False,
    )


def cardano_a(psi: float) -> float:
    """Uniform shrink factor in closed form.

    ``a`` is the root in ``[0, 1)`` of ``a = (4 psi / 27) (1 - a)^3`` (the
    stationarity condition of the uniform tracking objective), given by
    Cardano's formula.  Monotone increasing in ``psi`` with ``a(0) = 0``.
    Tiny arguments use a series to dodge cancellation; huge ones evaluate the
    radical in the log domain to dodge overflow.
    """
    if psi < 0.0:
        raise ValueError("psi must be nonnegative")
    if psi == 0.0:
        return 0.0
    if psi < 1e-8:
        coeff = 4.0 * psi / 27.0
        return coeff * (1.0 - 3.0 * coeff)
    if psi > 1e300:
        log_q = 0.5 * math.log(psi) + math.log(2.0)
    else:
        log_q = math.log(math.sqrt(1.0 + psi) + math.sqrt(psi))
    t = math.exp((2.0 / 3.0) * log_q)
    return 1.0 - 3.0 / (1.0 + t + 1.0 / t)


def psi_one_fund(nu_hat: float, kappa: float) -> float:
    """Uniform-case parameter with a single fund: ``(3/2)^3 nu_hat^2 / kappa``.

    Under Bayesian updating ``nu_hat^2 / kappa = R^2 / C``, so the value
    depends only on integrated quantities, never on the covariance rate.
    """
    if kappa <= 0.0:
        raise ValueError("kappa must be positive")
    return 3.375 * nu_hat * nu_hat / kappa


def psi_constant_cov(r_cum: np.ndarray, c_cum: CovMatrix) -> float:
    """Uniform-case parameter under a constant covariance rate: ``(3/2)^3 R'C^{-1}R``."""
    r_cum = np.asarray(r_cum, dtype=float).reshape(-1)
    w = c_cum.eigenvalues
    if w[-1] <= 1e-12 * w[0] or w[0] <= 0.0:
        raise SingularC("cumulative covariance is not positive definite")
    kappa = (c_cum.eigenvectors / w) @ c_cum.eigenvectors.T
    return 3.375 * float(r_cum @ kappa @ r_cum)
