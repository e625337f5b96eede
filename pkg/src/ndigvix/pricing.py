"""European option pricing under the NDIG log-price by Carr-Madan FFT inversion."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import optimize, stats
from scipy.interpolate import PchipInterpolator

from .levy import NDIGParams, cgf, exponential_moment_exists, log_cf

log = logging.getLogger(__name__)

# cap on the damping parameter; keeps the surface stable as required (a < 1)
A_CAP = 0.99


class DampingError(ValueError):
    """No admissible damping parameter, or the configured one is outside the valid region."""


class ArbitrageError(ValueError):
    pass


class PricingError(ArithmeticError):
    pass


@dataclass(frozen=True)
class PricerConfig:
    """FFT pricer settings.

    ``a=None`` picks min(0.99 a_max, 0.99). ``periods_per_year`` converts year
    maturities into the time unit of the NDIG parameters (252 for parameters
    fitted to daily returns, 1 for annual parameters).
    """

    S0: float = 100.0
    r: float = 0.0
    q: float = 0.0
    a: float | None = None
    n_grid: int = 16384
    eta: float = 0.025
    periods_per_year: float = 1.0

    def __post_init__(self):
        if not self.S0 > 0:
            raise ValueError("S0 must be positive")
        if self.n_grid < 4 or self.n_grid & (self.n_grid - 1):
            raise ValueError(f"n_grid must be a power of two, got {self.n_grid}")
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.a is not None and not 0 < self.a < 1:
            raise DampingError(f"damping parameter must lie in (0, 1), got {self.a}")
        if not self.periods_per_year > 0:
            raise ValueError("periods_per_year must be positive")


@dataclass(frozen=True)
class OptionQuote:
    strike: float
    maturity: float
    kind: str
    price: float

    def __post_init__(self):
        if self.kind not in ("call", "put"):
            raise ValueError(f"kind must be 'call' or 'put', got {self.kind!r}")
        if not (self.strike > 0 and self.maturity > 0):
            raise ValueError("strike and maturity must be positive")
        if not self.price >= 0:
            raise ValueError("price must be non-negative")


@dataclass
class VolSurface:
    strikes: np.ndarray
    maturities: np.ndarray
    implied_vols: np.ndarray  # (len(maturities), len(strikes))
    call_prices: np.ndarray
    put_prices: np.ndarray

    def __post_init__(self):
        shape = (len(self.maturities), len(self.strikes))
        for name in ("implied_vols", "call_prices", "put_prices"):
            if np.shape(getattr(self, name)) != shape:
                raise ValueError(f"{name} must have shape {shape}")


# ----------------------------------------------------------------------------
# damping parameter

def a_max(p: NDIGParams) -> float:
    """Closed-form upper bound on the damping parameter.

    sqrt(rho^2 + lam_U (1 - lam_U sigma^2 / (4 lam_T))) / sigma^2 - rho / sigma^2 - 1
    """
    s2 = p.sigma3**2
    radicand = p.rho**2 + p.lambda_U * (1 - p.lambda_U * s2 / (4 * p.lambda_T))
    if radicand < 0:
        raise DampingError(f"negative radicand {radicand:.6g}: no valid damping region")
    return np.sqrt(radicand) / s2 - p.rho / s2 - 1


def exact_damping_limit(p: NDIGParams, upper: float = 1e6) -> float:
    """Largest a with E[exp((1 + a) X_1)] finite, found by bisection."""
    if not exponential_moment_exists(1.0, p):
        raise DampingError("E[exp(X_1)] is infinite; no risk-neutral correction exists")
    lo, hi = 0.0, 1.0
    while exponential_moment_exists(1.0 + hi, p):
        lo, hi = hi, 2 * hi
        if hi > upper:
            return np.inf
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if exponential_moment_exists(1.0 + mid, p):
            lo = mid
        else:
            hi = mid
    return lo


def effective_a(p: NDIGParams, cfg: PricerConfig | None = None) -> float:
    """Damping parameter used for pricing; validated against both bounds."""
    bound = min(a_max(p), exact_damping_limit(p))
    if cfg is not None and cfg.a is not None:
        if not 0 < cfg.a < min(1.0, bound):
            raise DampingError(f"a={cfg.a} outside (0, {min(1.0, bound):.6g})")
        return cfg.a
    if bound <= 0:
        raise DampingError(f"upper bound on a is {bound:.6g}; no a > 0 exists")
    return min(0.99 * bound, A_CAP)


# ----------------------------------------------------------------------------
# FFT pricing

def martingale_shift(p: NDIGParams, cfg: PricerConfig) -> float:
    """Per-unit-time drift correction log E[exp(X_1)] removed under the pricing measure."""
    k1 = cgf(1.0, p)
    if not np.isfinite(k1):
        raise PricingError("E[exp(X_1)] is infinite")
    return float(k1)


def log_price_cf(u, p: NDIGParams, cfg: PricerConfig, tau: float):
    """Risk-neutral characteristic function of ln S_tau (mean-correcting measure)."""
    u = np.asarray(u, dtype=complex)
    t_model = tau * cfg.periods_per_year
    shift = martingale_shift(p, cfg)
    drift = np.log(cfg.S0) + (cfg.r - cfg.q) * tau
    return np.exp(1j * u * drift + t_model * (log_cf(u, p) - 1j * u * shift))


def _simpson_weights(n: int) -> np.ndarray:
    w = np.where(np.arange(n) % 2 == 0, 2.0, 4.0)
    w[0] = 1.0
    return w / 3.0


def fft_call_grid(p: NDIGParams, cfg: PricerConfig, tau: float, a: float | None = None):
    """Call prices on the FFT log-strike grid centred at ln S0.

    Returns (log_strikes, prices).
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    if a is None:
        a = effective_a(p, cfg)
    n, eta = cfg.n_grid, cfg.eta
    dk = 2 * np.pi / (n * eta)
    b = 0.5 * n * dk
    k0 = np.log(cfg.S0) - b
    v = eta * np.arange(n)
    u = v - 1j * (a + 1)
    phi = log_price_cf(u, p, cfg, tau)
    bad = ~np.isfinite(phi)
    if bad.any():
        raise PricingError(f"characteristic function is not finite at v={v[bad][0]:.6g}")
    denom = a * a + a - v * v + 1j * (2 * a + 1) * v
    psi = np.exp(-cfg.r * tau) * phi / denom
    x = np.exp(-1j * v * k0) * psi * eta * _simpson_weights(n)
    k = k0 + dk * np.arange(n)
    prices = np.exp(-a * k) / np.pi * np.fft.fft(x).real
    log.debug("fft pricing: tau=%g a=%g martingale shift=%.10g", tau, a, martingale_shift(p, cfg))
    return k, prices


def carr_madan_call(p: NDIGParams, cfg: PricerConfig, strikes, tau: float, a: float | None = None):
    """European call prices at ``strikes`` for maturity ``tau`` (years)."""
    strikes = np.asarray(strikes, dtype=float)
    if np.any(strikes <= 0):
        raise ValueError("strikes must be positive")
    k, c = fft_call_grid(p, cfg, tau, a)
    lk = np.log(strikes)
    if lk.min() < k[0] or lk.max() > k[-1]:
        raise ValueError("strikes fall outside the FFT log-strike grid")
    # only the neighbourhood of the requested strikes is interpolated
    lo = max(np.searchsorted(k, lk.min()) - 4, 0)
    hi = min(np.searchsorted(k, lk.max()) + 5, k.size)
    out = PchipInterpolator(k[lo:hi], c[lo:hi])(lk)
    floor = -1e-8 * cfg.S0
    if np.any(out < floor):
        raise PricingError(f"negative call price {out.min():.3g}; refine eta/n_grid")
    return np.maximum(out, 0.0)


def put_from_parity(call, S0, K, r, tau, q: float = 0.0, tol: float = 1e-10):
    """Put price from put-call parity P = C - S0 e^{-q tau} + K e^{-r tau}.

    Puts below ``-tol`` raise; FFT-priced deep in-the-money calls may need a
    looser ``tol`` of order 1e-8 S0.
    """
    put = np.asarray(call, dtype=float) - S0 * np.exp(-q * tau) + np.asarray(K, dtype=float) * np.exp(-r * tau)
    if np.any(put < -tol):
        raise ArbitrageError(f"parity gives a negative put price {np.min(put):.3g}")
    put = np.maximum(put, 0.0)
    return put if put.ndim else float(put)


# ----------------------------------------------------------------------------
# Black-Scholes inversion

def bs_price(S0, K, r, tau, sigma, kind="call", q=0.0):
    S0, K, sigma = np.asarray(S0, float), np.asarray(K, float), np.asarray(sigma, float)
    sq = sigma * np.sqrt(tau)
    d1 = (np.log(S0 / K) + (r - q + 0.5 * sigma**2) * tau) / sq
    d2 = d1 - sq
    df_s, df_k = S0 * np.exp(-q * tau), K * np.exp(-r * tau)
    if kind == "call":
        return df_s * stats.norm.cdf(d1) - df_k * stats.norm.cdf(d2)
    return df_k * stats.norm.cdf(-d2) - df_s * stats.norm.cdf(-d1)


def price_bounds(S0, K, r, tau, kind="call", q=0.0) -> tuple[float, float]:
    df_s, df_k = S0 * np.exp(-q * tau), K * np.exp(-r * tau)
    if kind == "call":
        return max(df_s - df_k, 0.0), df_s
    return max(df_k - df_s, 0.0), df_k


def implied_vol(quote: OptionQuote, S0: float, r: float, q: float = 0.0,
                lo: float = 1e-6, hi: float = 5.0) -> float:
    """Black-Scholes volatility reproducing ``quote.price`` (bracketed Brent search)."""
    K, tau, kind = quote.strike, quote.maturity, quote.kind
    lower, upper = price_bounds(S0, K, r, tau, kind, q)
    tol = 1e-12 * S0
    if not lower - tol <= quote.price < upper:
        raise ValueError(f"price {quote.price:.10g} outside no-arbitrage bounds ({lower:.10g}, {upper:.10g})")
    f = lambda s: float(bs_price(S0, K, r, tau, s, kind, q)) - quote.price  # noqa: E731
    f_lo = f(lo)
    if f_lo >= 0:
        return lo
    if f(hi) <= 0:
        raise ValueError(f"implied volatility above {hi}")
    return optimize.brentq(f, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=500)


def price_surface(p: NDIGParams, cfg: PricerConfig, strikes, maturities) -> VolSurface:
    strikes = np.asarray(strikes, dtype=float)
    maturities = np.asarray(maturities, dtype=float)
    calls = np.empty((maturities.size, strikes.size))
    puts = np.empty_like(calls)
    vols = np.empty_like(calls)
    for i, tau in enumerate(maturities):
        c = carr_madan_call(p, cfg, strikes, tau)
        calls[i] = c
        puts[i] = put_from_parity(c, cfg.S0, strikes, cfg.r, tau, cfg.q)
        for j, K in enumerate(strikes):
            vols[i, j] = implied_vol(OptionQuote(K, tau, "call", c[j]), cfg.S0, cfg.r, cfg.q)
    if not np.all(np.isfinite(vols)):
        raise PricingError("surface contains non-finite implied volatilities")
    return VolSurface(strikes, maturities, vols, calls, puts)


# ----------------------------------------------------------------------------
# CSV

GRID_COLUMNS = ("maturity_years", "strike", "kind", "price", "implied_vol")


def write_option_grid(path, surface: VolSurface) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(GRID_COLUMNS)
        for i, tau in enumerate(surface.maturities):
            for kind, prices in (("call", surface.call_prices), ("put", surface.put_prices)):
                for j, K in enumerate(surface.strikes):
                    w.writerow([repr(float(tau)), repr(float(K)), kind,
                                repr(float(prices[i, j])), repr(float(surface.implied_vols[i, j]))])


def read_option_grid(path) -> list[tuple[OptionQuote, float]]:
    """Rows of an option-grid CSV as (quote, implied_vol) pairs."""
    out = []
    with open(Path(path), newline="") as fh:
        for row in csv.DictReader(fh):
            q = OptionQuote(float(row["strike"]), float(row["maturity_years"]), row["kind"], float(row["price"]))
            out.append((q, float(row["implied_vol"])))
    return out
