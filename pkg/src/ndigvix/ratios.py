"""Average value-at-risk, Rachev ratio, STARR and an axiom harness for ratio measures."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class RatioConfig:
    beta: float = 0.05   # reward tail of the Rachev ratio
    gamma: float = 0.05  # risk tail
    window: int = 250
    step: int = 1

    def __post_init__(self):
        if not (0 < self.beta <= 1 and 0 < self.gamma <= 1):
            raise ValueError(f"tail levels must lie in (0, 1], got {self.beta}, {self.gamma}")
        if self.window < 20:
            raise ValueError("window must be at least 20")
        if self.step < 1:
            raise ValueError("step must be positive")


@dataclass
class RatioSeries:
    dates: np.ndarray
    rachev: np.ndarray
    starr: np.ndarray
    flags: list  # "valid" or the reason a window is invalid

    @property
    def valid(self) -> np.ndarray:
        return np.array([f == "valid" for f in self.flags], dtype=bool)

    def __len__(self):
        return len(self.flags)


def _tail_weights(n: int, level: float) -> np.ndarray:
    """Lebesgue measure of [(i-1)/n, i/n] within [0, level] for i = 1..n."""
    i = np.arange(1, n + 1)
    return np.clip(np.minimum(i / n, level) - (i - 1) / n, 0.0, None)


def avar(sample, level: float) -> float:
    """Empirical AVaR with losses positive: -(1/level) * int_0^level q_u du.

    Observations straddling the level boundary carry fractional weight, so the
    value equals the integral of the empirical quantile function.
    """
    x = np.sort(np.asarray(sample, dtype=float).ravel())
    if x.size == 0:
        raise ValueError("empty sample")
    if not 0 < level <= 1:
        raise ValueError(f"level must lie in (0, 1], got {level}")
    return float(-(_tail_weights(x.size, level) @ x) / level)


def rachev_ratio(sample, cfg: RatioConfig) -> tuple[float, str]:
    """AVaR_beta(-X) / AVaR_gamma(X), with a flag instead of an exception on a bad denominator."""
    x = np.asarray(sample, dtype=float)
    den = avar(x, cfg.gamma)
    if not den > 0:
        return float("nan"), "non-positive AVaR"
    return avar(-x, cfg.beta) / den, "valid"


def starr(sample, gamma: float) -> tuple[float, str]:
    """(E X)^+ / (AVaR_gamma X)^+."""
    x = np.asarray(sample, dtype=float)
    den = max(avar(x, gamma), 0.0)
    if den == 0:
        return float("nan"), "non-positive AVaR"
    return max(float(x.mean()), 0.0) / den, "valid"


def rolling_ratios(innovations, cfg: RatioConfig = RatioConfig(), dates=None) -> RatioSeries:
    """Ratios on windows of ``cfg.window`` observations, stepping by ``cfg.step``.

    Each value is stamped with the date of the last observation in its window.
    """
    x = np.asarray(innovations, dtype=float)
    if x.size < cfg.window:
        raise ValueError(f"series of length {x.size} is shorter than the window {cfg.window}")
    ends = np.arange(cfg.window, x.size + 1, cfg.step)
    windows = np.lib.stride_tricks.sliding_window_view(x, cfg.window)[ends - cfg.window]
    srt = np.sort(windows, axis=1)
    w = cfg.window
    lo = -(srt @ _tail_weights(w, cfg.gamma)) / cfg.gamma
    hi = (srt[:, ::-1] @ _tail_weights(w, cfg.beta)) / cfg.beta
    ok = lo > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        rach = np.where(ok, hi / lo, np.nan)
        st = np.where(ok, np.maximum(windows.mean(axis=1), 0.0) / lo, np.nan)
    flags = ["valid" if v else "non-positive AVaR" for v in ok]
    if dates is None:
        d = ends - 1
    else:
        d = np.asarray(dates)[ends - 1]
    return RatioSeries(d, rach, st, flags)


# ----------------------------------------------------------------------------
# axiom harness

@dataclass
class AxiomVerdict:
    passed: bool
    checked: int
    counterexamples: list = field(default_factory=list)


@dataclass
class Panel:
    samples: list
    dominated: list      # (X, Y) with X >= Y scenario by scenario
    mixtures: list       # (X, Y, lam)
    scalings: list       # (X, c)
    reorderings: list    # (X, permuted X)


def default_panel(seed: int = 0, n: int = 200, n_samples: int = 40) -> Panel:
    """Random skewed, heavy-tailed and shifted samples with derived pairs."""
    rng = np.random.default_rng(seed)
    gens = [
        lambda: rng.standard_normal(n),
        lambda: rng.standard_t(3, n),
        lambda: rng.lognormal(0, 0.8, n) - 1.2,
        lambda: 1.5 - rng.lognormal(0, 0.8, n),
        lambda: np.where(rng.random(n) < 0.1, rng.normal(-4, 1, n), rng.normal(0.4, 0.5, n)),
        lambda: np.where(rng.random(n) < 0.1, rng.normal(5, 1, n), rng.normal(-0.3, 0.5, n)),
    ]
    samples = []
    for i in range(n_samples):
        x = gens[i % len(gens)]()
        samples.append(x + rng.uniform(-0.3, 0.5))
    dominated = [(x + np.abs(rng.standard_normal(n)) * rng.uniform(0, 1), x) for x in samples]
    lams = np.linspace(0.1, 0.9, 9)
    mixtures = [(samples[i], samples[j], lam)
                for i in range(n_samples) for j in range(i + 1, n_samples) for lam in lams]
    scalings = [(x, c) for x in samples for c in (0.1, 2.0, 100.0)]
    reorderings = [(x, rng.permutation(x)) for x in samples]
    return Panel(samples, dominated, mixtures, scalings, reorderings)


def axiom_check(measure: Callable, panel: Panel, tol: float = 1e-12, keep: int = 5) -> dict:
    """Verdicts for monotonicity (M), quasi-concavity (Q), scale invariance (S)
    and distribution dependence (D). ``measure`` maps a sample to (value, flag);
    cases with an invalid value are not counted.
    """
    def val(x):
        v, flag = measure(x)
        return v if flag == "valid" else None

    def run(cases, test):
        bad, n = [], 0
        for case in cases:
            res = test(*case)
            if res is None:
                continue
            n += 1
            if not res[0] and len(bad) < keep:
                bad.append(res[1])
            elif not res[0]:
                bad.append(None)
        cx = [b for b in bad if b is not None]
        return AxiomVerdict(not bad, n, cx)

    def m(x, y):
        a, b = val(x), val(y)
        if a is None or b is None:
            return None
        return a >= b - tol * max(1.0, abs(b)), {"ratio_X": a, "ratio_Y": b}

    def q(x, y, lam):
        a, b, c = val(x), val(y), val(lam * x + (1 - lam) * y)
        if a is None or b is None or c is None:
            return None
        lo = min(a, b)
        return c >= lo - tol * max(1.0, abs(lo)), {"lambda": lam, "ratio_X": a, "ratio_Y": b, "ratio_mix": c}

    def s(x, c):
        a, b = val(x), val(c * x)
        if a is None or b is None:
            return None
        return abs(a - b) <= tol * max(1.0, abs(a)), {"c": c, "ratio_X": a, "ratio_cX": b}

    def d(x, y):
        a, b = val(x), val(y)
        if a is None or b is None:
            return None
        return abs(a - b) <= tol * max(1.0, abs(a)), {"ratio_X": a, "ratio_perm": b}

    return {"M": run(panel.dominated, m), "Q": run(panel.mixtures, q),
            "S": run(panel.scalings, s), "D": run(panel.reorderings, d)}


def format_report(name: str, report: dict) -> str:
    lines = [f"[{name}]"]
    for ax, v in report.items():
        lines.append(f"{ax}: {'pass' if v.passed else 'FAIL'} ({v.checked} cases)")
        for c in v.counterexamples:
            lines.append("  counterexample: " + ", ".join(f"{k}={val:.6g}" for k, val in c.items()))
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------------------
# CSV

SHOCK_COLUMNS = ("date", "rachev", "starr", "valid_flag")


def write_shocks_csv(path, series: RatioSeries) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SHOCK_COLUMNS)
        for d, a, b, f in zip(series.dates, series.rachev, series.starr, series.flags):
            w.writerow((str(d), repr(float(a)), repr(float(b)), f))
