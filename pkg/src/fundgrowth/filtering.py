"""Posterior law of the growth-optimal portfolio under partial information.

Under a Gaussian prior the conditional law of the growth-optimal portfolio
given the observed returns is Gaussian with mean ``C^{-1} R`` and covariance
``C^{-1}``, where ``R`` and ``C`` are the cumulative return vector and
integrated covariance including their prior anchors.  In one dimension the
prior may be truncated to an interval, with closed-form moments.

The module also provides the growth functionals built from those two
moments: the achievable growth increment, the expected growth given up to
estimation uncertainty (``tr(kappa dC) / 2``), its restriction to a smaller
investment universe, and the conditional variance of a portfolio's growth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.special import ndtr

from .errors import DegenerateInterval, SingularC
from .psd import CovMatrix, Projection, subspace_pinv

MatrixLike = Union[CovMatrix, np.ndarray]

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _as_cov(m: MatrixLike) -> CovMatrix:
    return m if isinstance(m, CovMatrix) else CovMatrix(m)


def _pd_inverse(c: CovMatrix) -> np.ndarray:
    w = c.eigenvalues
    if w[0] <= 0.0 or w[-1] <= 1e-12 * w[0]:
        raise SingularC("cumulative covariance is not positive definite")
    return (c.eigenvectors / w) @ c.eigenvectors.T


@dataclass(frozen=True)
class PosteriorState:
    """Posterior mean and covariance together with the statistics behind them.

    ``r_cum`` and ``c_cum`` include the prior anchors ``kappa0^{-1} nu0`` and
    ``kappa0^{-1}`` when an informative prior is used; with zero anchors the
    state realises the uninformative-prior limit once ``c_cum`` is positive
    definite.  Instances are immutable; updating returns a new value.
    """

    r_cum: np.ndarray
    c_cum: CovMatrix
    nu_hat: np.ndarray
    kappa: CovMatrix
    truncation: Optional[tuple[float, float]] = None

    @property
    def dim(self) -> int:
        return self.r_cum.size

    def update(self, d_r: np.ndarray, d_c: MatrixLike) -> "PosteriorState":
        """Fold one observation increment into the cumulative statistics."""
        d_c = _as_cov(d_c)
        r_new = self.r_cum + np.asarray(d_r, dtype=float).reshape(-1)
        c_new = CovMatrix(self.c_cum.entries + d_c.entries)
        if self.truncation is not None:
            lo, hi = self.truncation
            return truncated_posterior_1d(float(r_new[0]), float(c_new.entries[0, 0]), lo, hi)
        return gaussian_posterior(r_new, c_new)


def gaussian_posterior(r_cum: np.ndarray, c_cum: MatrixLike) -> PosteriorState:
    """Gaussian posterior: mean ``C^{-1} R``, covariance ``C^{-1}``."""
    r_cum = np.asarray(r_cum, dtype=float).reshape(-1)
    c_cum = _as_cov(c_cum)
    if r_cum.size != c_cum.dim:
        raise ValueError(f"R has size {r_cum.size}, C has dim {c_cum.dim}")
    kappa = _pd_inverse(c_cum)
    return PosteriorState(
        r_cum=r_cum,
        c_cum=c_cum,
        nu_hat=kappa @ r_cum,
        kappa=CovMatrix(kappa),
    )


def _phi(x: float) -> float:
    return math.exp(-0.5 * x * x) / _SQRT_2PI if math.isfinite(x) else 0.0


def _x_phi(x: float) -> float:
    # x * pdf(x), with the correct zero limit at +-infinity.
    return x * _phi(x) if math.isfinite(x) else 0.0


def truncated_posterior_1d(r_cum: float, c_cum: float, lower: float, upper: float) -> PosteriorState:
    """One-dimensional posterior under a prior truncated to ``(lower, upper)``.

    The conditional law is a truncated normal; mean and variance follow the
    usual closed forms in the standardised endpoints
    ``lower*sqrt(C) - R/sqrt(C)`` and ``upper*sqrt(C) - R/sqrt(C)``.
    Raises ``DegenerateInterval`` when the interval carries no mass.
    """
    if not c_cum > 0.0:
        raise SingularC("cumulative covariance must be positive")
    if not lower < upper:
        raise ValueError(f"empty interval ({lower}, {upper})")
    root_c = math.sqrt(c_cum)
    lo = lower * root_c - r_cum / root_c if math.isfinite(lower) else -math.inf
    hi = upper * root_c - r_cum / root_c if math.isfinite(upper) else math.inf
    mass = float(ndtr(hi) - ndtr(lo))
    if mass < 1e-300:
        raise DegenerateInterval(f"interval ({lower}, {upper}) carries no posterior mass")
    ratio = (_phi(lo) - _phi(hi)) / mass
    nu_hat = r_cum / c_cum + ratio / root_c
    kappa = (1.0 + (_x_phi(lo) - _x_phi(hi)) / mass - ratio ** 2) / c_cum
    return PosteriorState(
        r_cum=np.array([float(r_cum)]),
        c_cum=CovMatrix([[float(c_cum)]]),
        nu_hat=np.array([nu_hat]),
        kappa=CovMatrix([[kappa]]),
        truncation=(lower, upper),
    )


def truncated_posterior_box_mc(
    r_cum: np.ndarray,
    c_cum: MatrixLike,
    lower: np.ndarray,
    upper: np.ndarray,
    n_draws: int = 100_000,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Experimental: posterior moments under a hyper-rectangle truncation.

    Rejection sampling from the unrestricted Gaussian posterior; returns
    ``(mean, covariance, n_accepted)``.  Monte-Carlo only, with no accuracy
    guarantee, and deliberately kept out of the acceptance surface.
    """
    state = gaussian_posterior(r_cum, c_cum)
    lower = np.asarray(lower, dtype=float).reshape(-1)
    upper = np.asarray(upper, dtype=float).reshape(-1)
    rng = np.random.default_rng(seed)
    root = (state.kappa.eigenvectors * np.sqrt(state.kappa.eigenvalues)) @ state.kappa.eigenvectors.T
    draws = state.nu_hat + rng.standard_normal((n_draws, state.dim)) @ root
    keep = np.all((draws > lower) & (draws < upper), axis=1)
    kept = draws[keep]
    if kept.shape[0] < 2:
        raise DegenerateInterval("box carries too little posterior mass to estimate moments")
    return kept.mean(axis=0), np.cov(kept.T, ddof=1).reshape(state.dim, state.dim), kept.shape[0]


def f_growth_increment(nu_hat: np.ndarray, d_c: MatrixLike) -> float:
    """Achievable growth increment ``nu_hat' dC nu_hat / 2`` under observation."""
    nu_hat = np.asarray(nu_hat, dtype=float).reshape(-1)
    d_c = _as_cov(d_c)
    return 0.5 * float(nu_hat @ d_c.entries @ nu_hat)


def growth_loss(kappa: MatrixLike, d_c: MatrixLike) -> float:
    """Expected growth given up to estimation uncertainty: ``tr(kappa dC) / 2``.

    With ``kappa = C^{-1}`` this equals half the increment of
    ``log det(C)``.
    """
    kappa = _as_cov(kappa)
    d_c = _as_cov(d_c)
    if kappa.dim != d_c.dim:
        raise ValueError("kappa and dC dims disagree")
    return 0.5 * float(np.trace(kappa.entries @ d_c.entries))


def restricted_growth_loss(kappa: MatrixLike, d_c: MatrixLike, p: Projection) -> float:
    """Growth loss when investment is restricted to the range of ``p``.

    Never exceeds the unrestricted loss, and is monotone in the projection:
    smaller investment universes lose less growth to estimation.
    """
    kappa = _as_cov(kappa)
    d_c = _as_cov(d_c)
    pinv = subspace_pinv(d_c, p)
    pe = p.entries
    inner = pe @ d_c.entries @ kappa.entries @ d_c.entries @ pe
    return 0.5 * float(np.trace(pinv @ inner))


def portfolio_growth_variance(pi: np.ndarray, kappa: MatrixLike, d_c: MatrixLike) -> float:
    """Conditional variance of a portfolio's growth: ``pi' dC kappa dC pi``."""
    pi = np.asarray(pi, dtype=float).reshape(-1)
    kappa = _as_cov(kappa)
    d_c = _as_cov(d_c)
    v = d_c.entries @ pi
    return float(v @ kappa.entries @ v)
