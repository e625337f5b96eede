"""Moment plus characteristic-function calibration of NDIG parameters.

The objective is

    (dM1)^2 + (dM2)^2 + (dM3)^2 + (dM4)^2 + dCF

with dMk = 1 - model_k / empirical_k for mean, variance, skewness and
kurtosis, and dCF a Gaussian-weighted L2 distance between the empirical and
model characteristic functions. Subordinator means are pinned to 1 and gamma
is set on every evaluation so that the model mean equals the sample mean.

Fits run on returns divided by their sample standard deviation; location and
scale parameters are mapped back afterwards, so a rescaled series yields
rescaled parameters.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats
from scipy.stats import qmc

from .levy import MomentsUndefinedError, NDIGParams, log_cf, ndig_cumulants

log = logging.getLogger(__name__)

TERM_NAMES = ("dM1", "dM2", "dM3", "dM4", "dCF")
# box for (mu3, sigma3, rho, lambda_T, lambda_U) in standardized units
BOUNDS = ((-0.5, 0.5), (1e-4, 2.0), (-5.0, 5.0), (1e-2, 1e4), (1e-2, 1e4))
_PENALTY = 1e6


@dataclass(frozen=True)
class ReturnSeries:
    dates: np.ndarray
    log_returns: np.ndarray

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        x = np.asarray(self.log_returns, dtype=float)
        if dates.shape != x.shape or x.ndim != 1:
            raise ValueError("dates and log_returns must be 1-d and of equal length")
        if not np.all(np.isfinite(x)):
            raise ValueError("log_returns contain NaN or infinite values")
        if dates.size > 1 and np.any(np.diff(dates) <= np.timedelta64(0, "D")):
            raise ValueError("dates must be strictly increasing")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "log_returns", x)

    def __len__(self) -> int:
        return self.log_returns.size

    def window(self, start: int, stop: int) -> "ReturnSeries":
        return ReturnSeries(self.dates[start:stop], self.log_returns[start:stop])

    @classmethod
    def from_array(cls, x, start="2000-01-03") -> "ReturnSeries":
        x = np.asarray(x, dtype=float)
        dates = np.busday_offset(np.datetime64(start, "D"), np.arange(x.size), roll="forward")
        return cls(dates, x)


@dataclass(frozen=True)
class CFGrid:
    """Trapezoid grid on [-V, V] with weight exp(-v^2 / 2), in standardized units."""

    V: float = 50.0
    n_nodes: int = 201

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        v = np.linspace(-self.V, self.V, self.n_nodes)
        w = np.exp(-0.5 * v * v) * (v[1] - v[0])
        w[[0, -1]] *= 0.5
        return v, w


@dataclass(frozen=True)
class CalibrationConfig:
    n_starts: int = 8
    max_evals: int = 3000
    seed: int = 12345
    grid: CFGrid = field(default_factory=CFGrid)
    probe_step: float = 0.01
    max_polish: int = 8


@dataclass(frozen=True)
class CalibrationResult:
    params: NDIGParams
    objective_value: float
    term_values: tuple[float, float, float, float, float]
    converged: bool
    n_evals: int
    end_date: np.datetime64 | None = None
    error: str | None = None

    def __post_init__(self):
        if abs(self.objective_value - sum(self.term_values)) > 1e-12:
            raise ValueError("objective must equal the sum of its terms")


@dataclass(frozen=True)
class RollingConfig:
    window: int = 1008
    step: int = 21

    def __post_init__(self):
        if self.window < 30:
            raise ValueError("window must be at least 30")
        if self.step < 1:
            raise ValueError("step must be at least 1")


def empirical_moments(s) -> tuple[float, float, float, float]:
    """Unbiased sample mean, variance, skewness and (non-excess) kurtosis."""
    x = s.log_returns if isinstance(s, ReturnSeries) else np.asarray(s, dtype=float)
    if x.size < 30:
        raise ValueError(f"need at least 30 observations, got {x.size}")
    mean, var = float(x.mean()), float(x.var(ddof=1))
    # a constant series can leave a rounding-level variance; test the range instead
    if np.ptp(x) == 0:
        raise MomentsUndefinedError("variance 0: skewness and kurtosis undefined")
    skew = float(stats.skew(x, bias=False))
    kurt = float(stats.kurtosis(x, fisher=True, bias=False)) + 3.0
    return mean, var, skew, kurt


def empirical_cf(x: np.ndarray, v: np.ndarray) -> np.ndarray:
    # chunked over nodes to bound memory for long series
    out = np.empty(v.size, dtype=complex)
    for i in range(0, v.size, 16):
        out[i:i + 16] = np.exp(1j * np.outer(v[i:i + 16], x)).mean(axis=1)
    return out


def cf_distance(s, p: NDIGParams, grid: CFGrid = CFGrid()) -> float:
    """Weighted L2 distance between empirical and model CFs.

    Nodes are taken in standardized units, v / sd(x), so the statistic does
    not depend on the scale of the returns.
    """
    x = s.log_returns if isinstance(s, ReturnSeries) else np.asarray(s, dtype=float)
    v, w = grid.nodes()
    u = v / x.std(ddof=1)
    diff = empirical_cf(x, u) - np.exp(log_cf(u, p))
    return float(np.sum(w * np.abs(diff) ** 2))


class Objective:
    """Five-term calibration objective on standardized data."""

    def __init__(self, z: np.ndarray, grid: CFGrid):
        self.z = z
        self.moments = empirical_moments(z)
        self.v, self.w = grid.nodes()
        self.ecf = empirical_cf(z, self.v)
        self.n_evals = 0

    def params(self, theta) -> NDIGParams:
        mu3, sigma3, rho, lam_T, lam_U = theta
        gamma = self.moments[0] - mu3 - rho
        return NDIGParams.from_vector(mu3, sigma3, gamma, rho, lam_T, lam_U)

    def terms(self, theta) -> tuple[float, ...]:
        p = self.params(theta)
        k1, k2, k3, k4 = ndig_cumulants(p)
        model = (k1, k2, k3 / k2**1.5, 3.0 + k4 / k2**2)
        dm = tuple((1.0 - m / e) ** 2 if e != 0 else (m - e) ** 2 for m, e in zip(model, self.moments))
        diff = self.ecf - np.exp(log_cf(self.v, p))
        dcf = float(np.sum(self.w * (diff.real**2 + diff.imag**2)))
        return dm + (dcf,)

    def __call__(self, y) -> float:
        self.n_evals += 1
        theta = _from_unconstrained(y)
        if theta is None:
            return _PENALTY
        try:
            val = sum(self.terms(theta))
        except (ValueError, ZeroDivisionError, FloatingPointError):
            return _PENALTY
        return val if np.isfinite(val) else _PENALTY


# optimizer coordinates: (mu3, log sigma3, rho, log lambda_T, log lambda_U)
_LOG = np.array([False, True, False, True, True])
_LO = np.array([b[0] for b in BOUNDS])
_HI = np.array([b[1] for b in BOUNDS])
_YLO = np.array([np.log(lo) if lg else lo for lo, lg in zip(_LO, _LOG)])
_YHI = np.array([np.log(hi) if lg else hi for hi, lg in zip(_HI, _LOG)])


def _to_unconstrained(theta) -> np.ndarray:
    theta = np.clip(np.asarray(theta, dtype=float), _LO, _HI)
    return np.where(_LOG, np.log(np.where(_LOG, theta, 1.0)), theta)


def _from_unconstrained(y):
    y = np.asarray(y, dtype=float)
    if np.any(y < _YLO - 1e-12) or np.any(y > _YHI + 1e-12):
        return None
    return np.where(_LOG, np.exp(y), y)


def _standardize_params(p: NDIGParams, scale: float) -> np.ndarray:
    return np.array([p.mu3 / scale, p.sigma3 / scale, p.rho / scale, p.lambda_T, p.lambda_U])


def _probe(obj: Objective, theta: np.ndarray, f0: float, step: float):
    """Return an improving axis perturbation of +-step (relative), or None."""
    for i in range(theta.size):
        h = step * max(abs(theta[i]), 1e-3)
        for sgn in (1.0, -1.0):
            t = theta.copy()
            t[i] += sgn * h
            if np.any(t < _LO) or np.any(t > _HI):
                continue
            f = obj(_to_unconstrained(t))
            if f < f0 - 1e-14 * max(1.0, abs(f0)):
                return t, f
    return None


def _nelder_mead(obj: Objective, y0, max_evals: int):
    bounds = list(zip(_YLO, _YHI))
    return optimize.minimize(obj, y0, method="Nelder-Mead", bounds=bounds,
                             options={"maxfev": max_evals, "xatol": 1e-7, "fatol": 1e-13,
                                      "adaptive": True})


def fit_ndig(s: ReturnSeries, init: NDIGParams | None = None,
             cfg: CalibrationConfig = CalibrationConfig(), n_starts: int | None = None) -> CalibrationResult:
    """Fit NDIG parameters to a return series by multistart Nelder-Mead."""
    if len(s) < 252:
        raise ValueError(f"need at least 252 observations, got {len(s)}")
    x = s.log_returns
    scale = float(x.std(ddof=1))
    if np.ptp(x) == 0:
        raise MomentsUndefinedError("constant return series")
    obj = Objective(x / scale, cfg.grid)

    starts = []
    if init is not None:
        starts.append(_to_unconstrained(_standardize_params(init, scale)))
    n_lhs = cfg.n_starts if n_starts is None else n_starts
    if n_lhs > 0:
        lhs = qmc.LatinHypercube(d=5, seed=cfg.seed).random(n_lhs)
        starts.extend(qmc.scale(lhs, _YLO, _YHI))

    best_y, best_f, all_ok = None, np.inf, True
    for y0 in starts:
        res = _nelder_mead(obj, y0, cfg.max_evals)
        if res.fun < best_f:
            best_y, best_f, all_ok = res.x, float(res.fun), bool(res.success)
    # restarting from the best vertex rebuilds a collapsed simplex
    for _ in range(cfg.max_polish):
        res = _nelder_mead(obj, best_y, cfg.max_evals)
        if not res.fun < best_f - 1e-12 * max(1.0, best_f):
            break
        best_y, best_f, all_ok = res.x, float(res.fun), bool(res.success)

    converged = all_ok
    for _ in range(cfg.max_polish):
        theta = _from_unconstrained(best_y)
        found = _probe(obj, theta, best_f, cfg.probe_step)
        if found is None:
            break
        res = _nelder_mead(obj, _to_unconstrained(found[0]), cfg.max_evals)
        if res.fun < best_f:
            best_y, best_f = res.x, float(res.fun)
        else:
            best_y, best_f = _to_unconstrained(found[0]), found[1]
    else:
        converged = False

    theta = _from_unconstrained(best_y)
    if theta is None or best_f >= _PENALTY:
        raise RuntimeError("calibration found no admissible parameters")
    terms = tuple(float(t) for t in obj.terms(theta))
    ps = obj.params(theta)
    params = NDIGParams.from_vector(ps.mu3 * scale, ps.sigma3 * scale, ps.gamma * scale, ps.rho * scale,
                                    ps.lambda_T, ps.lambda_U)
    return CalibrationResult(params, float(sum(terms)), terms, bool(converged), obj.n_evals,
                             end_date=s.dates[-1] if len(s) else None)


def rolling_fit(s: ReturnSeries, cfg: RollingConfig = RollingConfig(),
                calib: CalibrationConfig = CalibrationConfig(), warm_starts: int = 0) -> list[CalibrationResult]:
    """One fit per window; each window after the first starts from its predecessor's optimum.

    Warm-started windows use ``warm_starts`` additional Latin-hypercube starts.
    A window that raises is recorded with ``error`` set and does not stop the run.
    """
    if cfg.window > len(s):
        raise ValueError(f"window {cfg.window} exceeds series length {len(s)}")
    results: list[CalibrationResult] = []
    prev = None
    for start in range(0, len(s) - cfg.window + 1, cfg.step):
        w = s.window(start, start + cfg.window)
        try:
            if prev is None:
                r = fit_ndig(w, None, calib)
            else:
                r = fit_ndig(w, prev, calib, n_starts=warm_starts)
            prev = r.params
        except (ValueError, RuntimeError, ArithmeticError) as exc:
            log.warning("window ending %s failed: %s", w.dates[-1], exc)
            nan = float("nan")
            r = CalibrationResult(prev or NDIGParams(), nan, (nan,) * 5, False, 0, w.dates[-1], str(exc))
        results.append(r)
    return results


PARAM_COLUMNS = ("date", "mu3", "sigma3", "rho", "lambda_T", "lambda_U", "gamma", "objective", "converged")


def write_params_csv(path, results) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PARAM_COLUMNS)
        for r in results:
            p = r.params
            w.writerow([str(r.end_date), repr(p.mu3), repr(p.sigma3), repr(p.rho), repr(p.lambda_T),
                        repr(p.lambda_U), repr(p.gamma), repr(r.objective_value), int(r.converged)])


def read_params_csv(path) -> list[CalibrationResult]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            p = NDIGParams.from_vector(row["mu3"], row["sigma3"], row["gamma"], row["rho"],
                                       row["lambda_T"], row["lambda_U"])
            obj = float(row["objective"])
            # individual terms are not stored; the total is carried in the last slot
            out.append(CalibrationResult(p, obj, (0.0, 0.0, 0.0, 0.0, obj), bool(int(row["converged"])), 0,
                                         np.datetime64(row["date"], "D")))
    return out
