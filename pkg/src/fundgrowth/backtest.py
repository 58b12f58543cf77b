"""Daily backtest of the filtered and shrunk growth-optimal portfolios.

The pipeline mirrors a long-sample equity study: dividend-adjusted daily fund
returns are turned into excess returns, the cumulative return vector ``R`` and
the cumulative squared-return matrix ``C`` are accumulated, and after a
burn-in long enough to make ``C`` positive definite (the uninformative-prior
limit) the per-day posterior ``nu_hat = C^{-1} R``, the uniform shrink factor
``a``, and log-wealth tracks for the market, the filtered portfolio, and its
shrunk version are produced, together with the achievable-growth process
``F``.

Wealth compounds discretely through ``log(1 + pi' x)`` while ``F`` uses the
instantaneous form on the daily squared returns; the two agree only in the
continuous-time limit, and the gap is visible in the outputs rather than
hidden.
"""

from __future__ import annotations

import csv
import datetime
import math
import warnings
from dataclasses import dataclass
from typing import IO, Optional, Sequence

import numpy as np

from . import filtering, shrinkage
from .errors import (
    ConfigError,
    EmptySeries,
    InsufficientBurnIn,
    MissingColumns,
    NonMonotoneDates,
    ParseError,
)
from .psd import CovMatrix

DEFAULT_BURN_IN = 7500   # trading days, about 30 years

# log1p argument floor: a daily move that would wipe the portfolio is clamped
# and counted instead of poisoning the whole track with -inf.
_WEALTH_FLOOR = 1e-12


@dataclass(frozen=True)
class ReturnSeries:
    """Cleaned per-date fund returns and risk-free rates, strictly date-sorted."""

    dates: tuple
    fund_returns: np.ndarray
    risk_free: np.ndarray

    def __post_init__(self):
        rets = np.atleast_2d(np.asarray(self.fund_returns, dtype=float))
        rf = np.asarray(self.risk_free, dtype=float).reshape(-1)
        object.__setattr__(self, "fund_returns", rets)
        object.__setattr__(self, "risk_free", rf)
        object.__setattr__(self, "dates", tuple(self.dates))
        if len(self.dates) == 0:
            raise EmptySeries("return series has no rows")
        if rets.shape[0] != len(self.dates) or rf.size != len(self.dates):
            raise ValueError("dates, fund_returns and risk_free lengths disagree")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise NonMonotoneDates("dates must be strictly increasing")

    @property
    def n(self) -> int:
        return len(self.dates)

    @property
    def k(self) -> int:
        return self.fund_returns.shape[1]

    def slices(self, n_chunks: int) -> list["ReturnSeries"]:
        """Split into contiguous chunks (for streaming-equivalence checks)."""
        bounds = np.linspace(0, self.n, n_chunks + 1).astype(int)
        return [
            ReturnSeries(
                dates=self.dates[a:b],
                fund_returns=self.fund_returns[a:b],
                risk_free=self.risk_free[a:b],
            )
            for a, b in zip(bounds, bounds[1:])
            if b > a
        ]


@dataclass(frozen=True)
class IngestResult:
    series: ReturnSeries
    rows_read: int
    rows_dropped: int


def ingest_csv(path: str, drop_policy: str = "skip") -> IngestResult:
    """Parse a ``date,ret_1..ret_K,rf`` CSV into a cleaned return series.

    Malformed rows are dropped with a warning under ``drop_policy='skip'`` or
    raise ``ParseError`` under ``'error'``.  Missing risk-free cells are
    forward-filled (zero before the first observation); rows missing a fund
    return are dropped.  Rows come back date-sorted; duplicate dates raise
    ``NonMonotoneDates``.
    """
    if drop_policy not in ("skip", "error"):
        raise ConfigError(f"unknown drop_policy {drop_policy!r}")
    with open(path, "r", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptySeries(f"{path} is empty") from None
        header = [h.strip() for h in header]
        k = len(header) - 2
        expected = ["date"] + [f"ret_{j + 1}" for j in range(k)] + ["rf"]
        if k < 1 or header != expected:
            raise ParseError(1, f"header {header!r} does not match date,ret_1..ret_K,rf")

        rows: list[tuple[datetime.date, list[float], Optional[float]]] = []
        rows_read = 0
        dropped = 0
        for lineno, cells in enumerate(reader, start=2):
            if not cells or (len(cells) == 1 and not cells[0].strip()):
                continue
            rows_read += 1
            try:
                if len(cells) != k + 2:
                    raise ValueError(f"expected {k + 2} cells, got {len(cells)}")
                day = datetime.date.fromisoformat(cells[0].strip())
                rets = [float(cell) for cell in cells[1:-1]]
                rf_cell = cells[-1].strip()
                rf = float(rf_cell) if rf_cell else None
            except ValueError as exc:
                if drop_policy == "error":
                    raise ParseError(lineno, str(exc)) from None
                dropped += 1
                continue
            rows.append((day, rets, rf))

    if not rows:
        raise EmptySeries(f"{path} contains no usable rows")
    if dropped:
        warnings.warn(f"{path}: dropped {dropped} malformed row(s)", stacklevel=2)

    rows.sort(key=lambda row: row[0])
    dates = [row[0] for row in rows]
    rets = np.array([row[1] for row in rows], dtype=float)
    rf = np.empty(len(rows))
    last = 0.0
    for i, row in enumerate(rows):
        if row[2] is not None:
            last = row[2]
        rf[i] = last
    series = ReturnSeries(dates=tuple(dates), fund_returns=rets, risk_free=rf)
    return IngestResult(series=series, rows_read=rows_read, rows_dropped=dropped)


@dataclass(frozen=True)
class BacktestConfig:
    """Knobs for the daily pipeline.

    ``clock`` is recorded for reporting only: every output of the pipeline is
    built from the cumulative ``R`` and ``C`` and does not depend on how
    operational time is counted.  ``prior='anchored'`` folds ``kappa0^{-1}``
    and ``kappa0^{-1} nu0`` into the accumulators, allowing ``burn_in = 0``.
    """

    burn_in_days: int = DEFAULT_BURN_IN
    clock: str = "trading"
    prior: str = "uninformative"
    nu0: Optional[np.ndarray] = None
    kappa0: Optional[np.ndarray] = None
    truncation_l: Optional[float] = None
    truncation_r: Optional[float] = None
    drop_policy: str = "skip"
    demean_covariance: bool = False
    force_a: Optional[float] = None
    force_nu_hat: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.clock not in ("trading", "calendar"):
            raise ConfigError(f"unknown clock {self.clock!r}")
        if self.prior not in ("uninformative", "anchored"):
            raise ConfigError(f"unknown prior {self.prior!r}")
        if self.prior == "anchored" and (self.nu0 is None or self.kappa0 is None):
            raise ConfigError("anchored prior needs nu0 and kappa0")
        if self.burn_in_days < 0:
            raise ConfigError("burn_in_days must be nonnegative")

    @property
    def truncation(self) -> Optional[tuple[float, float]]:
        if self.truncation_l is None and self.truncation_r is None:
            return None
        lo = -math.inf if self.truncation_l is None else self.truncation_l
        hi = math.inf if self.truncation_r is None else self.truncation_r
        return (lo, hi)


_CONFIG_KEYS = {
    "burn_in_days", "clock", "prior", "nu0", "kappa0", "truncation_l",
    "truncation_r", "drop_policy", "demean_covariance", "force_a",
    "force_nu_hat",
}


def parse_backtest_config(text: str) -> BacktestConfig:
    """Parse ``key = value`` lines into a config; unknown keys are rejected."""
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {body!r}")
        key, value = (s.strip() for s in body.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        values[key] = value
    kwargs: dict = {}
    if "burn_in_days" in values:
        kwargs["burn_in_days"] = int(values["burn_in_days"])
    for key in ("clock", "prior", "drop_policy"):
        if key in values:
            kwargs[key] = values[key]
    for key in ("truncation_l", "truncation_r", "force_a"):
        if key in values:
            kwargs[key] = float(values[key])
    if "demean_covariance" in values:
        kwargs["demean_covariance"] = values["demean_covariance"].lower() in ("1", "true", "yes")
    if "nu0" in values:
        kwargs["nu0"] = np.array([float(v) for v in values["nu0"].split(",")])
    if "force_nu_hat" in values:
        kwargs["force_nu_hat"] = np.array([float(v) for v in values["force_nu_hat"].split(",")])
    if "kappa0" in values:
        rows = [r for r in values["kappa0"].split(";") if r.strip()]
        kwargs["kappa0"] = np.array([[float(v) for v in row.split(",")] for row in rows])
    return BacktestConfig(**kwargs)


@dataclass
class BacktestSeries:
    """Per-date record of the pipeline; estimate columns are NaN in burn-in."""

    dates: tuple
    excess: np.ndarray
    r_cum: np.ndarray
    c_cum: np.ndarray
    nu_hat: np.ndarray
    kappa: np.ndarray
    psi: np.ndarray
    a: np.ndarray
    rho: np.ndarray
    log_wealth_market: np.ndarray
    log_wealth_nuhat: np.ndarray
    log_wealth_shrunk: np.ndarray
    f_growth: np.ndarray
    burn_in: int
    floored_steps: int

    @property
    def n(self) -> int:
        return len(self.dates)

    @property
    def k(self) -> int:
        return self.excess.shape[1]


class BacktestEngine:
    """Streaming accumulator; feeding rows one at a time or in chunks is
    equivalent to a single pass."""

    def __init__(self, k: int, config: BacktestConfig):
        self.k = k
        self.config = config
        if config.truncation is not None and k != 1:
            raise ConfigError("truncation requires a single fund")
        if config.prior == "anchored":
            kappa0 = CovMatrix(config.kappa0)
            w = kappa0.eigenvalues
            if w[-1] <= 1e-12 * w[0] or w[0] <= 0.0:
                raise ConfigError("kappa0 must be positive definite")
            c0 = (kappa0.eigenvectors / w) @ kappa0.eigenvectors.T
            r0 = c0 @ np.asarray(config.nu0, dtype=float).reshape(-1)
            if r0.size != k:
                raise ConfigError(f"nu0 has size {r0.size}, series has {k} fund(s)")
        else:
            c0 = np.zeros((k, k))
            r0 = np.zeros(k)
        self._r = r0
        self._c = 0.5 * (c0 + c0.T)
        self._mean = np.zeros(k)
        self._t = 0
        self.floored_steps = 0
        self._force_nu = (
            None if config.force_nu_hat is None
            else np.asarray(config.force_nu_hat, dtype=float).reshape(-1)
        )
        self._nan_vec = np.full(k, math.nan)
        self._nan_mat = np.full((k, k), math.nan)
        self._nan_vec.setflags(write=False)
        self._nan_mat.setflags(write=False)

        self._dates: list = []
        self._excess: list = []
        self._r_rows: list = []
        self._c_rows: list = []
        self._nu_rows: list = []
        self._kap_rows: list = []
        self._psi: list = []
        self._a: list = []
        self._lw_m: list = []
        self._lw_n: list = []
        self._lw_s: list = []
        self._f: list = []

        self._prev_nu: Optional[np.ndarray] = None
        self._prev_a = math.nan
        self._cur_m = self._cur_n = self._cur_s = self._cur_f = math.nan

    # -- accumulation ------------------------------------------------------

    def _accumulate(self, x: np.ndarray) -> None:
        self._r = self._r + x
        if self.config.demean_covariance:
            n = self._t + 1
            delta = x - self._mean
            self._mean = self._mean + delta / n
            self._c = self._c + delta[:, None] * (x - self._mean)
        else:
            self._c = self._c + x[:, None] * x

    def _posterior(self):
        cfg = self.config
        if cfg.truncation is not None:
            state = filtering.truncated_posterior_1d(
                float(self._r[0]), float(self._c[0, 0]), *cfg.truncation
            )
            nu = state.nu_hat
            kap = state.kappa.entries
        elif self.k == 1:
            c = float(self._c[0, 0])
            nu = np.array([float(self._r[0]) / c])
            kap = np.array([[1.0 / c]])
        else:
            state = filtering.gaussian_posterior(self._r, CovMatrix(0.5 * (self._c + self._c.T)))
            nu = state.nu_hat
            kap = state.kappa.entries
        if self._force_nu is not None:
            nu = self._force_nu
        if self.k == 1:
            psi = shrinkage.psi_one_fund(float(nu[0]), float(kap[0, 0]))
        else:
            psi = 3.375 * float(nu @ self._c @ nu)  # = (3/2)^3 R'C^{-1}R when nu = C^{-1}R
        a = cfg.force_a if cfg.force_a is not None else shrinkage.cardano_a(psi)
        return nu, kap, psi, a

    def step(self, day, returns: Sequence[float], rf: float) -> None:
        x = np.asarray(returns, dtype=float).reshape(-1) - rf
        self._accumulate(x)
        t = self._t
        burn_in = self.config.burn_in_days

        if t < burn_in:
            nu = kap = None
            psi = a = math.nan
        else:
            if t == burn_in:
                w = np.linalg.eigvalsh(0.5 * (self._c + self._c.T))
                if w[0] <= 1e-12 * max(w[-1], 0.0) or w[-1] <= 0.0:
                    raise InsufficientBurnIn(
                        "cumulative covariance is not positive definite at burn-in end"
                    )
                self._cur_m = self._cur_n = self._cur_s = self._cur_f = 0.0
            else:
                prev_nu, prev_a = self._prev_nu, self._prev_a
                market = float(x.mean())  # equal weight across the K funds
                growth = float(prev_nu @ x)
                self._cur_m += self._log1p_floor(market)
                self._cur_n += self._log1p_floor(growth)
                self._cur_s += self._log1p_floor(prev_a * growth)
                self._cur_f += 0.5 * growth * growth
            nu, kap, psi, a = self._posterior()
            self._prev_nu, self._prev_a = nu, a

        self._dates.append(day)
        self._excess.append(x)
        # _accumulate rebinds (never mutates) _r and _c, so rows can share.
        self._r_rows.append(self._r)
        self._c_rows.append(self._c)
        self._nu_rows.append(self._nan_vec if nu is None else np.asarray(nu, dtype=float))
        self._kap_rows.append(self._nan_mat if kap is None else np.asarray(kap, dtype=float))
        self._psi.append(psi)
        self._a.append(a)
        self._lw_m.append(self._cur_m)
        self._lw_n.append(self._cur_n)
        self._lw_s.append(self._cur_s)
        self._f.append(self._cur_f)
        self._t += 1

    def _log1p_floor(self, gross_change: float) -> float:
        if gross_change <= -1.0 + _WEALTH_FLOOR:
            self.floored_steps += 1
            return math.log(_WEALTH_FLOOR)
        return math.log1p(gross_change)

    def extend(self, series: ReturnSeries) -> "BacktestEngine":
        if series.k != self.k:
            raise ValueError(f"series has {series.k} fund(s), engine expects {self.k}")
        for i in range(series.n):
            self.step(series.dates[i], series.fund_returns[i], float(series.risk_free[i]))
        return self

    def result(self) -> BacktestSeries:
        if self._t <= self.config.burn_in_days:
            raise InsufficientBurnIn(
                f"series has {self._t} row(s), burn-in needs more than "
                f"{self.config.burn_in_days}"
            )
        a = np.array(self._a)
        nu = np.array(self._nu_rows)
        return BacktestSeries(
            dates=tuple(self._dates),
            excess=np.array(self._excess),
            r_cum=np.array(self._r_rows),
            c_cum=np.array(self._c_rows),
            nu_hat=nu,
            kappa=np.array(self._kap_rows),
            psi=np.array(self._psi),
            a=a,
            rho=a[:, None] * nu,
            log_wealth_market=np.array(self._lw_m),
            log_wealth_nuhat=np.array(self._lw_n),
            log_wealth_shrunk=np.array(self._lw_s),
            f_growth=np.array(self._f),
            burn_in=self.config.burn_in_days,
            floored_steps=self.floored_steps,
        )


def run_backtest(series: ReturnSeries, config: Optional[BacktestConfig] = None) -> BacktestSeries:
    """One-pass backtest of a return series (see the module docstring)."""
    config = config or BacktestConfig()
    if series.n <= config.burn_in_days:
        raise InsufficientBurnIn(
            f"series has {series.n} row(s), burn-in needs more than {config.burn_in_days}"
        )
    return BacktestEngine(series.k, config).extend(series).result()


@dataclass(frozen=True)
class WealthTable:
    """Post-burn-in log-wealth tracks plus achievable growth, aligned by date."""

    dates: tuple
    market: np.ndarray
    nuhat: np.ndarray
    shrunk: np.ndarray
    f_growth: np.ndarray


def wealth_tracks(bt: BacktestSeries) -> WealthTable:
    sl = slice(bt.burn_in, bt.n)
    return WealthTable(
        dates=bt.dates[sl],
        market=bt.log_wealth_market[sl],
        nuhat=bt.log_wealth_nuhat[sl],
        shrunk=bt.log_wealth_shrunk[sl],
        f_growth=bt.f_growth[sl],
    )


# ---------------------------------------------------------------------------
# CSV output / input of backtest results
# ---------------------------------------------------------------------------

def output_columns(k: int) -> list[str]:
    """Column order of the output CSV; ``c_ij`` entries trail the core set."""
    cols = ["date"] + [f"nu_hat_{j + 1}" for j in range(k)]
    cols += ["a", "F", "logW_market", "logW_nuhat", "logW_shrunk"]
    cols += [f"c_{i + 1}{j + 1}" for i in range(k) for j in range(i, k)]
    return cols


def write_backtest_csv(bt: BacktestSeries, out: IO[str]) -> int:
    """Write the post-burn-in rows; full-precision floats keep output stable."""
    k = bt.k
    out.write(",".join(output_columns(k)) + "\n")
    count = 0
    for t in range(bt.burn_in, bt.n):
        cells = [bt.dates[t].isoformat()]
        cells += [repr(float(v)) for v in bt.nu_hat[t]]
        cells += [
            repr(float(bt.a[t])),
            repr(float(bt.f_growth[t])),
            repr(float(bt.log_wealth_market[t])),
            repr(float(bt.log_wealth_nuhat[t])),
            repr(float(bt.log_wealth_shrunk[t])),
        ]
        cells += [repr(float(bt.c_cum[t, i, j])) for i in range(k) for j in range(i, k)]
        out.write(",".join(cells) + "\n")
        count += 1
    return count


def read_backtest_csv(path: str) -> dict:
    """Read a backtest output CSV into named columns.

    Returns a dict with ``dates`` plus one numpy array per column; raises
    ``MissingColumns`` when the required core columns are absent.
    """
    with open(path, "r", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingColumns(f"{path} is empty") from None
        rows = [cells for cells in reader if cells]
    k = sum(1 for name in header if name.startswith("nu_hat_"))
    required = set(output_columns(k)) if k else {"date"}
    missing = required - set(header)
    if k == 0 or missing:
        raise MissingColumns(f"{path} lacks required columns: {sorted(missing) or 'nu_hat_*'}")
    table: dict = {"k": k}
    idx = {name: i for i, name in enumerate(header)}
    table["dates"] = tuple(datetime.date.fromisoformat(row[idx["date"]]) for row in rows)
    for name in header:
        if name == "date":
            continue
        col = idx[name]
        table[name] = np.array([float(row[col]) for row in rows])
    return table
