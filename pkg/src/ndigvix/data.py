"""Return ingestion and the synthetic data bundle (returns, option chains, rates)."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .calibration import ReturnSeries
from .levy import NDIGParams, _increments
from .pricing import PricerConfig, carr_madan_call, put_from_parity
from .vix import CHAIN_COLUMNS


class IngestError(ValueError):
    pass


def ingest_returns(path) -> ReturnSeries:
    """Read ``date,close`` or ``date,log_return`` CSV into a ReturnSeries."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if header not in (["date", "close"], ["date", "log_return"]):
            raise IngestError(f"{path}:1: header must be date,close or date,log_return, got {','.join(header)}")
        kind = header[1]
        dates, vals, seen = [], [], set()
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2 or not row[0].strip() or not row[1].strip():
                raise IngestError(f"{path}:{lineno}: expected two non-empty fields, got {row}")
            try:
                d = np.datetime64(row[0].strip(), "D")
                v = float(row[1])
            except ValueError as exc:
                raise IngestError(f"{path}:{lineno}: {exc}") from exc
            if not math.isfinite(v):
                raise IngestError(f"{path}:{lineno}: non-finite value {row[1]!r}")
            if kind == "close" and v <= 0:
                raise IngestError(f"{path}:{lineno}: close must be positive")
            if d in seen:
                raise IngestError(f"{path}:{lineno}: duplicate date {d}")
            if dates and d < dates[-1]:
                raise IngestError(f"{path}:{lineno}: date {d} is earlier than {dates[-1]}")
            seen.add(d)
            dates.append(d)
            vals.append(v)
    if kind == "close":
        if len(vals) < 2:
            raise IngestError(f"{path}: need at least two closes")
        return ReturnSeries(np.array(dates[1:]), np.diff(np.log(vals)))
    if not vals:
        raise IngestError(f"{path}: no data rows")
    return ReturnSeries(np.array(dates), np.array(vals))


# ----------------------------------------------------------------------------
# synthetic bundle

def default_synthetic_params() -> NDIGParams:
    # daily units, zero mean, negative skew
    return NDIGParams.from_vector(0.004, 0.01, -0.004, 0.0, 5.0, 5.0)


@dataclass(frozen=True)
class SyntheticConfig:
    params: NDIGParams = field(default_factory=default_synthetic_params)
    n_returns: int = 3000
    start: str = "2010-01-04"
    S0: float = 100.0
    r: float = 0.01
    chain_step: int = 5          # trading days between chain dates
    chain_offset: int = 252      # first chain date index
    expiries: tuple = (28, 35)   # calendar days
    strike_lo: float = 0.6       # strike range relative to spot
    strike_hi: float = 1.6
    strike_step: float = 0.01
    vol_persistence: float = 0.98  # AR(1) of the log vol factor used for chains
    vol_of_vol: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.n_returns < 2:
            raise ValueError("n_returns must be at least 2")
        if not 0 < self.strike_lo < 1 < self.strike_hi:
            raise ValueError("strike range must bracket the spot")
        if not (0 <= self.vol_persistence < 1 and self.vol_of_vol >= 0):
            raise ValueError("need 0 <= vol_persistence < 1 and vol_of_vol >= 0")


@dataclass
class Bundle:
    returns: Path
    chain: Path
    rates: Path


def _scaled(p: NDIGParams, c: float) -> NDIGParams:
    return NDIGParams.from_vector(c * p.mu3, c * p.sigma3, c * p.gamma, c * p.rho, p.lambda_T, p.lambda_U)


def _fmt(x: float) -> str:
    return repr(round(float(x), 10))


def generate_synthetic(cfg: SyntheticConfig, out_dir) -> Bundle:
    """Write returns.csv (date,close), chain.csv and rates.csv under ``out_dir``.

    Closes follow the NDIG law with constant parameters. Chains are priced by
    the FFT pricer with the same parameters multiplied by a persistent random
    volatility factor, so the implied index moves over time.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ss_ret, ss_vol = np.random.SeedSequence(cfg.seed).spawn(2)
    x = _increments(cfg.params, np.ones(1), np.random.default_rng(ss_ret), cfg.n_returns)[2][:, 0]
    dates = np.busday_offset(np.datetime64(cfg.start, "D"), np.arange(cfg.n_returns + 1), roll="forward")
    closes = cfg.S0 * np.exp(np.concatenate([[0.0], np.cumsum(x)]))

    rng = np.random.default_rng(ss_vol)
    logc = np.empty(closes.size)
    logc[0] = 0.0
    shocks = rng.standard_normal(closes.size) * cfg.vol_of_vol
    for t in range(1, closes.size):
        logc[t] = cfg.vol_persistence * logc[t - 1] + shocks[t]

    bundle = Bundle(out / "returns.csv", out / "chain.csv", out / "rates.csv")
    with open(bundle.returns, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("date", "close"))
        for d, c in zip(dates, closes):
            w.writerow((str(d), repr(float(c))))

    rel = np.round(np.arange(cfg.strike_lo, cfg.strike_hi + 1e-9, cfg.strike_step), 10)
    chain_idx = range(min(cfg.chain_offset, closes.size - 1), closes.size, cfg.chain_step)
    with open(bundle.chain, "w", newline="") as fh, open(bundle.rates, "w", newline="") as fr:
        w = csv.writer(fh)
        w.writerow(CHAIN_COLUMNS)
        wr = csv.writer(fr)
        wr.writerow(("date", "r"))
        for i in chain_idx:
            S = float(closes[i])
            pc = PricerConfig(S0=S, r=cfg.r, n_grid=32768, eta=0.05, periods_per_year=252.0)
            p = _scaled(cfg.params, float(np.exp(logc[i])))
            K = np.round(S * rel, 4)
            wr.writerow((str(dates[i]), repr(cfg.r)))
            for days in cfg.expiries:
                tau = days / 365.0
                calls = carr_madan_call(p, pc, K, tau)
                puts = put_from_parity(calls, S, K, cfg.r, tau, tol=1e-8 * S)
                expiry = dates[i] + np.timedelta64(days, "D")
                for kind, prices in (("call", calls), ("put", puts)):
                    for k, mid in zip(K, prices):
                        mid = max(float(mid), 0.0)
                        bid = 0.0 if mid < 0.01 else 0.95 * mid
                        ask = 1.05 * mid + 0.01
                        w.writerow((str(dates[i]), str(expiry), repr(float(k)), kind,
                                    _fmt(bid), _fmt(ask), _fmt(mid)))
    return bundle
