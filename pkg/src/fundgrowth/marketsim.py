"""Synthetic market paths for Monte-Carlo verification.

Simulates discrete excess-return increments under full information: a drawn
(optionally truncated) Gaussian growth-optimal portfolio, a constant
covariance rate against an operational clock, and an optional fund structure
in which asset returns are spanned by a small number of funds plus drift-free
orthogonal noise.

Path generation is pure given (inputs, seed); sweeps may run concurrently
with per-path seeds derived as ``seed + path_index``.
"""

from __future__ import annotations

import datetime
import math
from dataclasses import dataclass
from typing import IO, Optional

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import BadTruncation, ConfigError, EmptyGrid, RankDeficient
from .psd import CovMatrix, sqrt_entries

# Trading-day step of the operational clock, used as the default everywhere.
DEFAULT_STEP = 1.0 / 252.0

_REJECTION_CAP = 1_000_000
_REJECTION_BATCH = 256


@dataclass(frozen=True)
class PriorSpec:
    """Gaussian prior on the growth-optimal portfolio, optionally truncated.

    Truncation to an open interval ``(lower, upper)`` is supported only in
    dimension one.
    """

    mean: np.ndarray
    cov: CovMatrix
    truncation: Optional[tuple[float, float]] = None

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        object.__setattr__(self, "mean", mean)
        if self.cov.dim != mean.size:
            raise ValueError(f"mean has size {mean.size}, cov has dim {self.cov.dim}")
        if self.truncation is not None:
            if mean.size != 1:
                raise BadTruncation("truncation interval requires dimension one")
            lower, upper = self.truncation
            if not lower < upper:
                raise BadTruncation(f"empty truncation interval ({lower}, {upper})")

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class FundSpec:
    """Fund structure of a market: loadings, exposures, residual noise.

    ``beta = c f (f' c f)^{-1}`` makes the residual returns
    ``dN = dR - beta dR_f`` instantaneously uncorrelated with the fund
    returns; ``residual_cov`` is the implied covariance rate of ``dN`` and
    annihilates ``f`` by construction.
    """

    f: np.ndarray
    beta: np.ndarray
    residual_cov: CovMatrix
    cov_rate: CovMatrix

    def __post_init__(self):
        f = np.asarray(self.f, dtype=float)
        beta = np.asarray(self.beta, dtype=float)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "beta", beta)
        if f.shape != beta.shape:
            raise ValueError("f and beta must share the assets x funds shape")
        c = self.cov_rate.entries
        tol = 1e-9 * max(1.0, float(np.abs(c).max()))
        if np.abs(beta @ (f.T @ c @ f) - c @ f).max() > tol:
            raise ValueError("beta does not satisfy beta (f'cf) = cf")
        if np.abs(self.residual_cov.entries @ f).max() > tol:
            raise ValueError("residual covariance does not annihilate the funds")

    @property
    def assets(self) -> int:
        return self.f.shape[0]

    @property
    def funds(self) -> int:
        return self.f.shape[1]


@dataclass(frozen=True)
class MarketPath:
    """One simulated path: clock grid, per-step excess-return increments."""

    times: np.ndarray
    increments: np.ndarray
    nu_true: np.ndarray
    cov_rate: CovMatrix
    seed: int

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        incr = np.asarray(self.increments, dtype=float)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "increments", incr)
        object.__setattr__(self, "nu_true", np.asarray(self.nu_true, float).reshape(-1))
        if incr.shape[0] != times.size - 1:
            raise ValueError("increment rows must match the number of clock steps")

    @property
    def n_steps(self) -> int:
        return self.increments.shape[0]

    @property
    def dim(self) -> int:
        return self.increments.shape[1]

    def cumulative_returns(self) -> np.ndarray:
        return np.cumsum(self.increments, axis=0)

    def realized_quadratic_covariation(self) -> np.ndarray:
        """Sum of the outer products of the increments."""
        return self.increments.T @ self.increments


def uniform_clock(steps: int, step: float = DEFAULT_STEP, start: float = 0.0) -> np.ndarray:
    """Evenly spaced operational clock ``start, start+step, ...`` (steps+1 points)."""
    if steps < 1:
        raise EmptyGrid("clock needs at least one step")
    if step <= 0.0:
        raise ValueError("clock step must be positive")
    return start + step * np.arange(steps + 1, dtype=float)


def draw_prior(spec: PriorSpec, seed: int) -> np.ndarray:
    """One draw from the prior; deterministic for a fixed seed.

    The truncated variant rejects in batches up to a hard cap, then falls back
    to inverse-CDF sampling on the interval.
    """
    rng = np.random.default_rng(seed)
    if spec.truncation is None:
        root = sqrt_entries(spec.cov)
        return spec.mean + root @ rng.standard_normal(spec.dim)

    lower, upper = spec.truncation
    mu = float(spec.mean[0])
    sd = math.sqrt(float(spec.cov.entries[0, 0]))
    if sd == 0.0:
        return np.array([mu])
    attempts = 0
    while attempts < _REJECTION_CAP:
        batch = mu + sd * rng.standard_normal(_REJECTION_BATCH)
        inside = np.flatnonzero((batch > lower) & (batch < upper))
        if inside.size:
            return np.array([batch[inside[0]]])
        attempts += _REJECTION_BATCH
    return np.array([_truncated_inverse_cdf(rng, mu, sd, lower, upper)])


def _truncated_inverse_cdf(rng, mu: float, sd: float, lower: float, upper: float) -> float:
    """Inverse-CDF draw on an interval, via the survival function in the tails.

    Far from the mean, ``ndtr`` saturates at 1.0 and the naive quantile
    collapses; mapping a right-tail interval through ``1 - Phi`` (and the
    left tail by mirror symmetry) keeps full precision where rejection
    sampling has no chance.
    """
    alpha = (lower - mu) / sd
    beta = (upper - mu) / sd
    if alpha >= 0.0:       # right tail
        u = rng.uniform(float(ndtr(-beta)), float(ndtr(-alpha)))
        return mu - sd * float(ndtri(u))
    if beta <= 0.0:        # left tail
        u = rng.uniform(float(ndtr(alpha)), float(ndtr(beta)))
        return mu + sd * float(ndtri(u))
    u = rng.uniform(float(ndtr(alpha)), float(ndtr(beta)))
    return mu + sd * float(ndtri(u))


def simulate_path(nu: np.ndarray, c: CovMatrix, clock: np.ndarray, seed: int) -> MarketPath:
    """Euler step simulation of ``dR = c nu dO + c^{1/2} sqrt(dO) xi``."""
    nu = np.asarray(nu, dtype=float).reshape(-1)
    clock = np.asarray(clock, dtype=float)
    if clock.ndim != 1 or clock.size < 2:
        raise EmptyGrid("clock needs at least one step")
    d_o = np.diff(clock)
    if np.any(d_o <= 0.0):
        raise ValueError("clock must be strictly increasing")
    if nu.size != c.dim:
        raise ValueError(f"nu has size {nu.size}, covariance has dim {c.dim}")
    rng = np.random.default_rng(seed)
    xi = rng.standard_normal((d_o.size, c.dim))
    root = sqrt_entries(c)
    drift = np.outer(d_o, c.entries @ nu)
    incr = drift + np.sqrt(d_o)[:, None] * (xi @ root)
    return MarketPath(times=clock, increments=incr, nu_true=nu, cov_rate=c, seed=seed)


def build_fund_model(c: CovMatrix, f: np.ndarray) -> FundSpec:
    """Fund structure implied by a covariance rate and full-rank loadings."""
    f = np.asarray(f, dtype=float)
    if f.ndim != 2 or f.shape[0] != c.dim or not 1 <= f.shape[1] <= f.shape[0]:
        raise ValueError(f"loadings shape {f.shape} incompatible with dim {c.dim}")
    sv = np.linalg.svd(f, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] <= 1e-10 * sv[0]:
        raise RankDeficient("fund loadings are numerically dependent")
    gram = f.T @ c.entries @ f
    gw = np.linalg.eigvalsh(gram)
    if gw[0] <= 1e-12 * max(gw[-1], 0.0) or gw[-1] <= 0.0:
        raise RankDeficient("fund covariance f'cf is numerically singular")
    beta = np.linalg.solve(gram, (c.entries @ f).T).T
    residual = c.entries - beta @ gram @ beta.T
    # When the funds span everything the residual is zero up to round-off,
    # which looks indefinite at its own scale; clean it at the scale of c.
    rw, rv = np.linalg.eigh(0.5 * (residual + residual.T))
    rw = np.where(rw > 1e-14 * float(np.abs(c.entries).max()), rw, 0.0)
    residual = (rv * rw) @ rv.T
    return FundSpec(f=f, beta=beta, residual_cov=CovMatrix(residual), cov_rate=c)


@dataclass(frozen=True)
class ResidualDriftReport:
    """Per-asset residual drift estimates from a one-step Monte-Carlo sweep."""

    drift: np.ndarray
    stderr: np.ndarray
    n_paths: int

    @property
    def z_scores(self) -> np.ndarray:
        safe = np.where(self.stderr > 0.0, self.stderr, np.inf)
        return self.drift / safe


def residual_drift_check(
    spec: FundSpec,
    theta: np.ndarray,
    n_paths: int,
    seed: int,
    d_o: float = DEFAULT_STEP,
    nu_offset: Optional[np.ndarray] = None,
) -> ResidualDriftReport:
    """Estimate drift rates of the residual returns ``dN = dR - beta dR_f``.

    With the growth-optimal portfolio inside the fund span (``nu = f theta``)
    every residual drift is zero in expectation; ``nu_offset`` adds an
    out-of-span component so the rejection direction can be exercised too.
    """
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.size != spec.funds:
        raise ValueError(f"theta has size {theta.size}, model has {spec.funds} funds")
    nu = spec.f @ theta
    if nu_offset is not None:
        nu = nu + np.asarray(nu_offset, dtype=float).reshape(-1)
    c = spec.cov_rate
    rng = np.random.default_rng(seed)
    xi = rng.standard_normal((n_paths, spec.assets))
    d_r = d_o * (c.entries @ nu) + math.sqrt(d_o) * (xi @ sqrt_entries(c))
    strip = np.eye(spec.assets) - spec.beta @ spec.f.T
    d_n = d_r @ strip.T
    drift = d_n.mean(axis=0) / d_o
    stderr = d_n.std(axis=0, ddof=1) / math.sqrt(n_paths) / d_o
    return ResidualDriftReport(drift=drift, stderr=stderr, n_paths=n_paths)


# ---------------------------------------------------------------------------
# Scenario configs and CSV export
# ---------------------------------------------------------------------------

_SCENARIO_KEYS = {
    "dim", "cov", "cov_preset", "prior_mean", "prior_cov", "truncation_l",
    "truncation_r", "nu", "dt", "steps", "o_start", "seed", "f", "theta",
    "drift_check_paths",
}


@dataclass(frozen=True)
class SimScenario:
    """Parsed simulation scenario (see ``parse_scenario`` for the format)."""

    dim: int
    cov: CovMatrix
    prior: PriorSpec
    dt: float = DEFAULT_STEP
    steps: int = 252
    o_start: float = 0.0
    seed: int = 0
    nu: Optional[np.ndarray] = None
    f: Optional[np.ndarray] = None
    theta: Optional[np.ndarray] = None
    drift_check_paths: int = 100_000

    @property
    def funds(self) -> Optional[int]:
        return None if self.f is None else self.f.shape[1]


def _parse_matrix(text: str) -> np.ndarray:
    rows = [r for r in (s.strip() for s in text.split(";")) if r]
    return np.array([[float(x) for x in row.split(",")] for row in rows])


def _parse_vector(text: str) -> np.ndarray:
    return np.array([float(x) for x in text.split(",")])


def parse_scenario(text: str) -> SimScenario:
    """Parse a plain ``key = value`` scenario description.

    Vectors are comma-separated, matrices use ``;`` between rows, ``#`` starts
    a comment.  Unknown keys are rejected.
    """
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {body!r}")
        key, value = (s.strip() for s in body.split("=", 1))
        if key not in _SCENARIO_KEYS:
            raise ConfigError(f"line {lineno}: unknown scenario key {key!r}")
        raw[key] = value

    if "dim" not in raw:
        raise ConfigError("scenario must declare 'dim'")
    dim = int(raw["dim"])

    if "cov" in raw:
        cov = CovMatrix(_parse_matrix(raw["cov"]))
    elif "cov_preset" in raw:
        name = raw["cov_preset"]
        if name == "identity":
            cov = CovMatrix(np.eye(dim))
        elif name == "us_one_fund":
            # annualised rate; with the default trading-day step this gives
            # 18% annualised volatility
            cov = CovMatrix(np.eye(dim) * 0.18 ** 2)
        else:
            raise ConfigError(f"unknown cov_preset {name!r}")
    else:
        raise ConfigError("scenario must declare 'cov' or 'cov_preset'")
    if cov.dim != dim:
        raise ConfigError(f"cov has dim {cov.dim}, scenario declares {dim}")

    mean = _parse_vector(raw["prior_mean"]) if "prior_mean" in raw else np.zeros(dim)
    prior_cov = CovMatrix(_parse_matrix(raw["prior_cov"])) if "prior_cov" in raw else CovMatrix(np.eye(dim))
    truncation = None
    if "truncation_l" in raw or "truncation_r" in raw:
        lo = float(raw.get("truncation_l", "-inf"))
        hi = float(raw.get("truncation_r", "inf"))
        truncation = (lo, hi)
    prior = PriorSpec(mean=mean, cov=prior_cov, truncation=truncation)

    f = _parse_matrix(raw["f"]) if "f" in raw else None
    theta = _parse_vector(raw["theta"]) if "theta" in raw else None
    if f is not None and theta is None:
        raise ConfigError("fund scenarios must declare 'theta'")

    return SimScenario(
        dim=dim,
        cov=cov,
        prior=prior,
        dt=float(raw.get("dt", DEFAULT_STEP)),
        steps=int(raw.get("steps", 252)),
        o_start=float(raw.get("o_start", 0.0)),
        seed=int(raw.get("seed", 0)),
        nu=_parse_vector(raw["nu"]) if "nu" in raw else None,
        f=f,
        theta=theta,
        drift_check_paths=int(raw.get("drift_check_paths", 100_000)),
    )


def run_scenario(scenario: SimScenario, seed: Optional[int] = None) -> MarketPath:
    """Simulate one path for a scenario, drawing ``nu`` from the prior if unset."""
    seed = scenario.seed if seed is None else seed
    if scenario.nu is not None:
        nu = np.asarray(scenario.nu, dtype=float).reshape(-1)
    elif scenario.theta is not None and scenario.f is not None:
        nu = scenario.f @ np.asarray(scenario.theta, dtype=float)
    else:
        nu = draw_prior(scenario.prior, seed)
    clock = uniform_clock(scenario.steps, scenario.dt, scenario.o_start)
    # Path noise uses an offset stream so it never aliases the prior draw.
    return simulate_path(nu, scenario.cov, clock, seed + 1)


def write_path_csv(
    path: MarketPath,
    out: IO[str],
    fund: Optional[FundSpec] = None,
    start_date: datetime.date = datetime.date(1927, 7, 1),
) -> int:
    """Write a path in the backtest input schema ``date,ret_1..ret_K,rf``.

    Fund scenarios export the fund returns ``f' dR``; otherwise each asset is
    exported as its own column.  Simulated returns are already excess returns,
    so ``rf`` is written as zero.  Returns the number of data rows written.
    """
    rets = path.increments if fund is None else path.increments @ fund.f
    k = rets.shape[1]
    out.write("date," + ",".join(f"ret_{j + 1}" for j in range(k)) + ",rf\n")
    day = start_date
    for row in rets:
        cells = ",".join(repr(float(v)) for v in row)
        out.write(f"{day.isoformat()},{cells},0.0\n")
        day = day + datetime.timedelta(days=1)
    return rets.shape[0]
