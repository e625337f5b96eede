"""CBOE-style 30-day volatility index and the NDIG intrinsic-time volatility series."""

from __future__ import annotations

import csv
import logging
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .calibration import CalibrationResult
from .levy import MomentsUndefinedError, ndig_moments
from .pricing import OptionQuote

log = logging.getLogger(__name__)

MINUTES_PER_DAY = 1440
MINUTES_PER_YEAR = 365 * MINUTES_PER_DAY
TARGET_MINUTES = 30 * MINUTES_PER_DAY
NEAR_DAYS = (23, 30)
NEXT_DAYS = (31, 37)


@dataclass(frozen=True)
class TermStrip:
    """Calls and puts of one expiry. ``expiry_days`` counts calendar days to expiry."""

    expiry_days: float
    quotes: tuple[OptionQuote, ...]
    r: float = 0.0
    bids: dict | None = None  # (strike, kind) -> bid, enables the zero-bid cut-off

    def __post_init__(self):
        if not NEAR_DAYS[0] <= self.expiry_days <= NEXT_DAYS[1]:
            raise ValueError(f"expiry {self.expiry_days} days outside the [23, 37] day window")
        object.__setattr__(self, "quotes", tuple(self.quotes))

    @property
    def minutes(self) -> float:
        return self.expiry_days * MINUTES_PER_DAY

    @property
    def tau(self) -> float:
        return self.minutes / MINUTES_PER_YEAR


@dataclass(frozen=True)
class VixInputs:
    w1: float
    w2: float
    sigma1: float
    sigma2: float

    def __post_init__(self):
        if not (0 <= self.w1 <= 1 and 0 <= self.w2 <= 1) or abs(self.w1 + self.w2 - 1) > 1e-12:
            raise ValueError(f"weights must lie in [0, 1] and sum to 1, got {self.w1}, {self.w2}")
        if self.sigma1 < 0 or self.sigma2 < 0:
            raise ValueError("volatilities must be non-negative")


@dataclass
class VolSeries:
    dates: np.ndarray
    values: np.ndarray
    normalization: str = "raw"
    loc: float = 0.0
    scale: float = 1.0
    skipped: list = field(default_factory=list)

    def __post_init__(self):
        self.dates = np.asarray(self.dates, dtype="datetime64[D]")
        self.values = np.asarray(self.values, dtype=float)
        if self.dates.shape != self.values.shape:
            raise ValueError("dates and values must have equal length")
        if self.normalization not in ("raw", "zscore"):
            raise ValueError("normalization must be 'raw' or 'zscore'")

    def __len__(self):
        return self.values.size

    def raw_values(self) -> np.ndarray:
        """Undo the recorded affine map."""
        return self.values * self.scale + self.loc


def _strike_table(strip: TermStrip):
    table = defaultdict(dict)
    for q in strip.quotes:
        table[q.strike][q.kind] = q.price
    strikes = np.array(sorted(table))
    if strikes.size < 3:
        raise ValueError("strip needs at least three strikes")
    return strikes, table


def forward_level(strip: TermStrip) -> tuple[float, float]:
    """Forward from put-call parity at the strike with the smallest |C - P|; returns (F, K0)."""
    strikes, table = _strike_table(strip)
    both = [K for K in strikes if "call" in table[K] and "put" in table[K]]
    if not both:
        raise ValueError("no strike quotes both a call and a put")
    k_star = min(both, key=lambda K: abs(table[K]["call"] - table[K]["put"]))
    F = k_star + np.exp(strip.r * strip.tau) * (table[k_star]["call"] - table[k_star]["put"])
    below = strikes[strikes <= F]
    if below.size == 0:
        raise ValueError("no strike at or below the forward")
    return float(F), float(below[-1])


def _otm_side(strikes, prices, bids):
    """Keep quotes moving away from K0 until two consecutive zero bids."""
    out_k, out_p = [], []
    zeros = 0
    for K, p, b in zip(strikes, prices, bids):
        if b is not None and b <= 0:
            zeros += 1
            if zeros >= 2:
                break
            continue
        zeros = 0
        if p > 0:
            out_k.append(K)
            out_p.append(p)
    return out_k, out_p


def term_variance(strip: TermStrip) -> float:
    """Model-free variance of one expiry from its out-of-the-money strip."""
    strikes, table = _strike_table(strip)
    F, K0 = forward_level(strip)
    bid = (lambda K, kind: strip.bids.get((K, kind))) if strip.bids else (lambda K, kind: None)

    put_k = [K for K in strikes[::-1] if K < K0 and "put" in table[K]]
    pk, pp = _otm_side(put_k, [table[K]["put"] for K in put_k], [bid(K, "put") for K in put_k])
    call_k = [K for K in strikes if K > K0 and "call" in table[K]]
    ck, cp = _otm_side(call_k, [table[K]["call"] for K in call_k], [bid(K, "call") for K in call_k])
    if len(pk) < 3 or len(ck) < 3:
        raise ValueError(f"need at least 3 OTM quotes per side, got {len(pk)} puts and {len(ck)} calls")
    at = table[K0]
    q0 = 0.5 * (at["call"] + at["put"]) if "call" in at and "put" in at else at.get("put", at.get("call"))

    K = np.array(pk[::-1] + [K0] + ck)
    Q = np.array(pp[::-1] + [q0] + cp)
    dK = np.empty_like(K)
    dK[1:-1] = 0.5 * (K[2:] - K[:-2])
    dK[0] = K[1] - K[0]
    dK[-1] = K[-1] - K[-2]
    T = strip.tau
    total = np.sum(dK / K**2 * Q) * np.exp(strip.r * T)
    return float(2.0 / T * total - (F / K0 - 1.0) ** 2 / T)


def interpolation_weights(near_minutes: float, next_minutes: float,
                          target_minutes: float = TARGET_MINUTES) -> tuple[float, float]:
    """Minute-accurate weights bracketing the 30-day target."""
    if not near_minutes <= target_minutes <= next_minutes or near_minutes == next_minutes:
        raise ValueError("expiries must bracket the 30-day target")
    w1 = (next_minutes - target_minutes) / (next_minutes - near_minutes)
    return w1, 1.0 - w1


def vix_value(inputs: VixInputs) -> float:
    return 100.0 * float(np.sqrt(inputs.w1 * inputs.sigma1**2 + inputs.w2 * inputs.sigma2**2))


def vix_inputs(near: TermStrip, nxt: TermStrip) -> VixInputs:
    """Assemble weights and term volatilities for two strips.

    The minute weights sum to one; each term variance is multiplied by
    T_j / T_30 so that W1 s1^2 + W2 s2^2 equals the CBOE interpolation.
    """
    w1, w2 = interpolation_weights(near.minutes, nxt.minutes)
    s1 = np.sqrt(max(term_variance(near), 0.0) * near.minutes / TARGET_MINUTES)
    s2 = np.sqrt(max(term_variance(nxt), 0.0) * nxt.minutes / TARGET_MINUTES)
    return VixInputs(w1, w2, float(s1), float(s2))


def vix_from_strips(near: TermStrip, nxt: TermStrip) -> float:
    return vix_value(vix_inputs(near, nxt))


# ----------------------------------------------------------------------------
# NDIG volatility and normalization

def ndig_vvix_series(rolling, periods_per_year: float = 252.0, require_converged: bool = False) -> VolSeries:
    """Annualized one-period NDIG standard deviation per calibration window.

    Windows with errors or undefined moments are skipped and listed in ``skipped``.
    """
    dates, values, skipped = [], [], []
    for r in rolling:
        if r.error is not None or (require_converged and not r.converged):
            skipped.append((r.end_date, r.error or "not converged"))
            continue
        try:
            var = ndig_moments(r.params)[1]
        except MomentsUndefinedError as exc:
            skipped.append((r.end_date, str(exc)))
            continue
        dates.append(r.end_date)
        values.append(np.sqrt(var * periods_per_year))
    return VolSeries(np.array(dates, dtype="datetime64[D]"), np.array(values), "raw", skipped=skipped)


def normalize(series: VolSeries) -> VolSeries:
    """Z-score with population variance; the affine map is kept for inversion."""
    x = series.raw_values()
    if x.size < 2:
        raise ValueError("need at least two values")
    mu, sd = float(x.mean()), float(x.std())
    if not sd > 0:
        raise ValueError("zero variance: cannot normalize")
    return VolSeries(series.dates, (x - mu) / sd, "zscore", mu, sd, list(series.skipped))


def historical_vol(values, window: int = 1008, periods_per_year: float = 252.0) -> np.ndarray:
    """Rolling close-to-close standard deviation of log changes, annualized.

    Entry i uses the ``window`` log changes ending at i; earlier entries are NaN.
    """
    x = np.log(np.asarray(values, dtype=float))
    d = np.diff(x)
    out = np.full(x.size, np.nan)
    if d.size < window:
        return out
    c1 = np.concatenate([[0.0], np.cumsum(d)])
    c2 = np.concatenate([[0.0], np.cumsum(d * d)])
    s1 = c1[window:] - c1[:-window]
    s2 = c2[window:] - c2[:-window]
    var = (s2 - s1 * s1 / window) / (window - 1)
    out[window:] = np.sqrt(np.maximum(var, 0.0) * periods_per_year)
    return out


# ----------------------------------------------------------------------------
# CSV

CHAIN_COLUMNS = ("date", "expiry_date", "strike", "kind", "bid", "ask", "mid")


def read_rates(path) -> dict:
    with open(path, newline="") as fh:
        return {np.datetime64(row["date"], "D"): float(row["r"]) for row in csv.DictReader(fh)}


def read_chain(path) -> dict:
    """Option chain CSV grouped as {date: {expiry: [(strike, kind, bid, mid), ...]}}."""
    chain: dict = defaultdict(lambda: defaultdict(list))
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.DictReader(fh), start=2):
            try:
                d = np.datetime64(row["date"], "D")
                e = np.datetime64(row["expiry_date"], "D")
                kind = row["kind"]
                if kind not in ("call", "put"):
                    raise ValueError(f"bad kind {kind!r}")
                chain[d][e].append((float(row["strike"]), kind, float(row["bid"]), float(row["mid"])))
            except (KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{i}: {exc}") from exc
    return chain


def strip_from_rows(rows, expiry_days: float, r: float) -> TermStrip:
    quotes = tuple(OptionQuote(K, expiry_days / 365.0, kind, mid) for K, kind, _, mid in rows)
    bids = {(K, kind): bid for K, kind, bid, _ in rows}
    return TermStrip(expiry_days, quotes, r, bids)


def vix_series_from_chain(chain: dict, rates: dict) -> VolSeries:
    """Index value per quote date from the near (23-30 day) and next (31-37 day) expiries."""
    dates, values, skipped = [], [], []
    for d in sorted(chain):
        by_exp = chain[d]
        days = {e: int((e - d) / np.timedelta64(1, "D")) for e in by_exp}
        near = [e for e, n in days.items() if NEAR_DAYS[0] <= n <= NEAR_DAYS[1]]
        nxt = [e for e, n in days.items() if NEXT_DAYS[0] <= n <= NEXT_DAYS[1]]
        if not near or not nxt:
            skipped.append((d, "missing near or next expiry"))
            continue
        e1, e2 = max(near), min(nxt)
        r = rates.get(d, 0.0)
        try:
            v = vix_from_strips(strip_from_rows(by_exp[e1], days[e1], r),
                                strip_from_rows(by_exp[e2], days[e2], r))
        except ValueError as exc:
            skipped.append((d, str(exc)))
            continue
        dates.append(d)
        values.append(v)
    return VolSeries(np.array(dates, dtype="datetime64[D]"), np.array(values), "raw", skipped=skipped)


def write_vvix_csv(path, raw: VolSeries, normalized: VolSeries) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("date", "raw", "normalized"))
        for d, a, b in zip(raw.dates, raw.values, normalized.values):
            w.writerow((str(d), repr(float(a)), repr(float(b))))
