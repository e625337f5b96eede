"""Monte Carlo scenarios from a fitted ARFIMA-FIGARCH model with NDIG-shaped innovations."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .fracts import TRUNC, ArfimaParams, FigarchParams, filter_series, ljung_box, simulate
from .levy import NDIGParams, _increments, ndig_moments
from .ratios import RatioConfig, rachev_ratio, rolling_ratios, starr

_BLOCK = 1000
QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)


@dataclass(frozen=True)
class ScenarioConfig:
    arfima: ArfimaParams
    figarch: FigarchParams
    horizon: int
    n_scenarios: int = 10_000
    innovation_model: NDIGParams | None = None  # None: standard normal
    seed: int = 0
    burn: int = 1000
    trunc: int = TRUNC

    def __post_init__(self):
        if self.n_scenarios < 1:
            raise ValueError("n_scenarios must be at least 1")
        if self.horizon < 20:
            raise ValueError("horizon must be at least 20")
        if self.burn < 0:
            raise ValueError("burn must be non-negative")


@dataclass
class Scenarios:
    z: np.ndarray        # (S, horizon) simulated series
    eps: np.ndarray
    sigma2: np.ndarray
    cfg: ScenarioConfig

    @property
    def innovations(self) -> np.ndarray:
        return self.eps / np.sqrt(self.sigma2)


def standardized_innovations(p: NDIGParams | None, n: int, seed) -> np.ndarray:
    """``n`` one-period NDIG increments mapped to mean 0 and variance 1."""
    rng = np.random.default_rng(seed)
    if p is None:
        return rng.standard_normal(n)
    m, v = ndig_moments(p)[:2]
    x = _increments(p, np.ones(1), rng, n)[2][:, 0]
    return (x - m) / np.sqrt(v)


def simulate_scenarios(cfg: ScenarioConfig, start: int = 0, stop: int | None = None) -> Scenarios:
    """Scenarios ``start`` to ``stop`` of ``cfg.n_scenarios``.

    Each scenario has its own seed spawned from the master seed, so results do
    not depend on how scenarios are grouped into blocks or slices.
    """
    stop = cfg.n_scenarios if stop is None else stop
    if not 0 <= start < stop <= cfg.n_scenarios:
        raise ValueError(f"need 0 <= start < stop <= {cfg.n_scenarios}, got {start}, {stop}")
    n = cfg.horizon + cfg.burn
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.n_scenarios)[start:stop]
    parts = {"z": [], "eps": [], "sigma2": []}
    for lo in range(0, len(children), _BLOCK):
        block = children[lo:lo + _BLOCK]
        nu = np.stack([standardized_innovations(cfg.innovation_model, n, c) for c in block])
        out = simulate(cfg.arfima, cfg.figarch, nu, cfg.trunc, cfg.burn)
        for k in parts:
            parts[k].append(out[k])
    return Scenarios(*(np.concatenate(parts[k]) for k in ("z", "eps", "sigma2")), cfg)


# ----------------------------------------------------------------------------

@dataclass
class Panel:
    rachev: np.ndarray
    starr: np.ndarray
    flags: list

    def summary(self, quantiles=QUANTILES) -> dict:
        ok = np.array([f == "valid" for f in self.flags])
        return {
            "rachev": np.quantile(self.rachev[ok], quantiles) if ok.any() else np.full(len(quantiles), np.nan),
            "starr": np.quantile(self.starr[ok], quantiles) if ok.any() else np.full(len(quantiles), np.nan),
            "quantiles": np.asarray(quantiles),
            "n_valid": int(ok.sum()),
        }


def signal_noise_panel(innovations, ratio_cfg: RatioConfig = RatioConfig()) -> Panel:
    """Whole-path Rachev ratio and STARR for each scenario (rows of ``innovations``)."""
    x = np.atleast_2d(np.asarray(innovations, dtype=float))
    if x.shape[1] < ratio_cfg.window:
        raise ValueError("horizon shorter than the ratio window")
    r, s, flags = [], [], []
    for row in x:
        a, fa = rachev_ratio(row, ratio_cfg)
        b, fb = starr(row, ratio_cfg.gamma)
        r.append(a)
        s.append(b)
        flags.append(fa if fa != "valid" else fb)
    return Panel(np.array(r), np.array(s), flags)


@dataclass
class WhitenessReport:
    lags: tuple
    stats: tuple
    pvalues: tuple
    degenerate: bool = False
    alpha: float = 0.05
    notes: list = field(default_factory=list)

    @property
    def white(self) -> bool:
        """No rejection at any tested lag."""
        return not self.degenerate and all(p > self.alpha for p in self.pvalues)


def whiteness_tests(series, lags=(10, 20), alpha: float = 0.05) -> WhitenessReport:
    x = np.asarray(series, dtype=float)
    x = x[np.isfinite(x)]
    if x.size <= 5 * max(lags):
        raise ValueError(f"need more than {5 * max(lags)} finite values, got {x.size}")
    if np.ptp(x) == 0:
        nan = tuple(float("nan") for _ in lags)
        return WhitenessReport(tuple(lags), nan, nan, True, alpha, ["constant series"])
    res = [ljung_box(x, k) for k in lags]
    return WhitenessReport(tuple(lags), tuple(q for q, _ in res), tuple(p for _, p in res), False, alpha)


def refiltered_innovations(sc: Scenarios) -> np.ndarray:
    """Standardized residuals recovered by filtering each simulated path."""
    cfg = sc.cfg
    return np.stack([filter_series(z, cfg.arfima, cfg.figarch, cfg.trunc).innovations for z in sc.z])


def shock_whiteness(innovations, ratio_cfg: RatioConfig, lag: int = 20, alpha: float = 0.05) -> np.ndarray:
    """Per-scenario Ljung-Box p-values of the rolling Rachev and STARR series.

    Returns an (S, 2) array; columns are Rachev and STARR.
    """
    out = []
    for row in np.atleast_2d(innovations):
        rs = rolling_ratios(row, ratio_cfg)
        pv = []
        for series in (rs.rachev, rs.starr):
            rep = whiteness_tests(series, (lag,), alpha)
            pv.append(np.nan if rep.degenerate else rep.pvalues[0])
        out.append(pv)
    return np.array(out)


# ----------------------------------------------------------------------------
# CSV

def write_panel_csv(path, panel: Panel) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("scenario_id", "rachev", "starr"))
        for i, (a, b) in enumerate(zip(panel.rachev, panel.starr)):
            w.writerow((i, repr(float(a)), repr(float(b))))


def write_panel_summary(path, panel: Panel) -> None:
    s = panel.summary()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("quantile", "rachev", "starr"))
        for q, a, b in zip(s["quantiles"], s["rachev"], s["starr"]):
            w.writerow((repr(float(q)), repr(float(a)), repr(float(b))))
