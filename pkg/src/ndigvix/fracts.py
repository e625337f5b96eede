"""ARFIMA(1,d,1)-FIGARCH(1,d,1) filtering, simulation and quasi-maximum likelihood.

Mean:      (1 - phi L)(1 - L)^d_m (z_t - mu) = (1 + theta L) eps_t
Variance:  (1 - phi_v L)(1 - L)^d_v eps_t^2 = omega + (1 - beta L) nu_t,  nu_t = eps_t^2 - sigma_t^2

The variance equation is evaluated as the recursion

    sigma_t^2 = omega + beta sigma_{t-1}^2 + delta(L) eps_t^2,
    delta(L) = 1 - beta L - (1 - phi_v L)(1 - L)^d_v,

which is the ARCH(inf) form sigma^2 = omega / (1 - beta) + lambda(L) eps^2 with
lambda(L) = delta(L) / (1 - beta L). With d_v = 0 it is GARCH(1,1) with
alpha = phi_v - beta, and with d_m = 0 the mean filter is ARMA(1,1).
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass

import numpy as np
from scipy import optimize, signal, stats

TRUNC = 1000


class FigarchWeightError(ValueError):
    """ARCH(inf) weights turn negative: the parameter set is rejected."""


@dataclass(frozen=True)
class ArfimaParams:
    phi: float = 0.0
    theta: float = 0.0
    d_m: float = 0.0
    mu: float = 0.0

    def __post_init__(self):
        for k in ("phi", "theta", "d_m", "mu"):
            object.__setattr__(self, k, float(getattr(self, k)))
        if not (abs(self.phi) < 1 and abs(self.theta) < 1):
            raise ValueError(f"ARMA coefficients must be inside the unit interval: {self.phi}, {self.theta}")
        if not 0 <= self.d_m < 0.5:
            raise ValueError(f"d_m must lie in [0, 0.5), got {self.d_m}")


@dataclass(frozen=True)
class FigarchParams:
    omega: float = 0.05
    beta: float = 0.5
    phi_v: float = 0.6
    d_v: float = 0.0

    def __post_init__(self):
        for k in ("omega", "beta", "phi_v", "d_v"):
            object.__setattr__(self, k, float(getattr(self, k)))
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        if not (0 <= self.beta < 1 and abs(self.phi_v) < 1):
            raise ValueError(f"need 0 <= beta < 1 and |phi_v| < 1, got {self.beta}, {self.phi_v}")
        if not 0 <= self.d_v < 1:
            raise ValueError(f"d_v must lie in [0, 1), got {self.d_v}")


@dataclass
class TsFit:
    arfima: ArfimaParams
    figarch: FigarchParams
    eps: np.ndarray
    cond_var: np.ndarray
    innovations: np.ndarray
    loglik: float
    converged: bool = True
    burn: int = 0

    def summary(self) -> dict:
        out = {f"arfima.{k}": v for k, v in asdict(self.arfima).items()}
        out.update({f"figarch.{k}": v for k, v in asdict(self.figarch).items()})
        out.update(loglik=self.loglik, converged=self.converged, n=self.innovations.size, burn=self.burn)
        return out


# ----------------------------------------------------------------------------
# filters

def frac_diff_coeffs(d: float, n: int) -> np.ndarray:
    """Coefficients pi_0..pi_n of (1 - L)^d."""
    if n < 1:
        raise ValueError("n must be at least 1")
    k = np.arange(1, n + 1)
    return np.concatenate([[1.0], np.cumprod((k - 1 - d) / k)])


def _causal_conv(x: np.ndarray, h: np.ndarray) -> np.ndarray:
    """y_t = sum_k h_k x_{t-k} over the sample (zero presample), along the last axis."""
    n = x.shape[-1]
    h = h[: n]
    nz = np.flatnonzero(h)
    if nz.size <= 2:
        y = np.zeros_like(x, dtype=float)
        for k in nz:
            y[..., k:] += h[k] * x[..., : n - k]
        return y
    return signal.fftconvolve(x, np.broadcast_to(h, x.shape[:-1] + h.shape), axes=-1)[..., :n]


def arfima_filter(series, p: ArfimaParams, trunc: int = TRUNC) -> np.ndarray:
    """Residuals eps_t of the ARFIMA(1,d,1) mean equation; presample values equal mu."""
    if trunc < 100:
        raise ValueError("trunc must be at least 100")
    x = np.asarray(series, dtype=float) - p.mu
    w = x if p.d_m == 0 else _causal_conv(x, frac_diff_coeffs(p.d_m, trunc))
    # (1 + theta L) eps = (1 - phi L) w
    return signal.lfilter([1.0, -p.phi], [1.0, p.theta], w, axis=-1)


def figarch_delta(p: FigarchParams, trunc: int = TRUNC) -> np.ndarray:
    """delta_0..delta_trunc with delta(L) = 1 - beta L - (1 - phi_v L)(1 - L)^d_v."""
    c = np.convolve([1.0, -p.phi_v], frac_diff_coeffs(p.d_v, trunc))[: trunc + 1]
    delta = -c
    delta[0] += 1.0
    delta[1] -= p.beta
    return delta


def arch_weights(p: FigarchParams, trunc: int = TRUNC) -> np.ndarray:
    """ARCH(inf) weights lambda_1..lambda_trunc."""
    delta = figarch_delta(p, trunc)
    return signal.lfilter([1.0], [1.0, -p.beta], delta)[1:]


def check_weights(p: FigarchParams, trunc: int = TRUNC) -> np.ndarray:
    lam = arch_weights(p, trunc)
    neg = np.flatnonzero(lam < -1e-14)
    if neg.size:
        raise FigarchWeightError(f"ARCH weight lambda_{neg[0] + 1} = {lam[neg[0]]:.3g} < 0")
    return lam


def unconditional_variance(p: FigarchParams, trunc: int = TRUNC) -> float:
    """Fixed point omega / (1 - beta - sum delta) of the truncated recursion."""
    denom = 1.0 - p.beta - figarch_delta(p, trunc)[1:].sum()
    if denom <= 0:
        return p.omega / (1 - p.beta)
    return p.omega / denom


def figarch_variance(eps2, p: FigarchParams, trunc: int = TRUNC, backcast: float | None = None) -> np.ndarray:
    """Conditional variances sigma_t^2 given squared residuals.

    Presample eps^2 and sigma^2 are set to ``backcast`` (default: mean of eps2).
    """
    e2 = np.asarray(eps2, dtype=float)
    if not np.all(np.isfinite(e2)):
        raise ValueError("non-finite residuals")
    check_weights(p, trunc)
    bc = float(e2.mean()) if backcast is None else float(backcast)
    delta = figarch_delta(p, trunc)
    e2x = np.concatenate([np.full(trunc, bc), e2])
    arch = _causal_conv(e2x, delta)[trunc:]
    sig2, _ = signal.lfilter([1.0], [1.0, -p.beta], p.omega + arch, zi=[p.beta * bc])
    if not np.all(sig2 > 0):
        raise FigarchWeightError("conditional variance is not positive")
    return sig2


def gaussian_loglik(eps: np.ndarray, sig2: np.ndarray) -> float:
    return float(-0.5 * np.sum(np.log(2 * np.pi) + np.log(sig2) + eps * eps / sig2))


def filter_series(series, arfima: ArfimaParams, figarch: FigarchParams, trunc: int = TRUNC,
                  burn: int = 0) -> TsFit:
    eps = arfima_filter(series, arfima, trunc)
    sig2 = figarch_variance(eps**2, figarch, trunc)
    e, s = eps[burn:], sig2[burn:]
    return TsFit(arfima, figarch, e, s, e / np.sqrt(s), gaussian_loglik(e, s), True, burn)


# ----------------------------------------------------------------------------
# simulation

def simulate(arfima: ArfimaParams, figarch: FigarchParams, innovations, trunc: int = TRUNC,
             burn: int = 0) -> dict:
    """Run the recursion on standardized innovations of shape (n,) or (S, n).

    Returns arrays ``z``, ``eps``, ``sigma2`` with the first ``burn`` steps dropped.
    """
    nu = np.atleast_2d(np.asarray(innovations, dtype=float))
    S, n = nu.shape
    check_weights(figarch, trunc)
    # lag coefficients, oldest lag first, with exact-zero tails dropped
    delta = np.trim_zeros(figarch_delta(figarch, trunc)[1:], "b")[::-1]
    pi = np.trim_zeros(frac_diff_coeffs(arfima.d_m, trunc)[1:], "b")[::-1]
    kd, kp = delta.size, pi.size
    h0 = unconditional_variance(figarch, trunc)

    e2 = np.full((S, trunc + n), h0)
    x = np.zeros((S, trunc + n))
    eps = np.zeros((S, n))
    sig2 = np.empty((S, n))
    prev_s2 = np.full(S, h0)
    prev_w = np.zeros(S)
    prev_e = np.zeros(S)
    long_mean = arfima.d_m != 0
    for t in range(n):
        j = trunc + t
        s2 = figarch.omega + figarch.beta * prev_s2 + e2[:, j - kd:j] @ delta
        e = np.sqrt(s2) * nu[:, t]
        w = arfima.phi * prev_w + e + arfima.theta * prev_e
        x[:, j] = w - x[:, j - kp:j] @ pi if long_mean else w
        e2[:, j] = e * e
        sig2[:, t] = s2
        eps[:, t] = e
        prev_s2, prev_w, prev_e = s2, w, e
    z = arfima.mu + x[:, trunc:]
    out = {"z": z[:, burn:], "eps": eps[:, burn:], "sigma2": sig2[:, burn:]}
    if np.ndim(innovations) == 1:
        out = {k: v[0] for k, v in out.items()}
    return out


# ----------------------------------------------------------------------------
# estimation

_PEN = 1e12


def _nm(f, x0, bounds, maxfev):
    return optimize.minimize(f, x0, method="Nelder-Mead", bounds=bounds,
                             options={"maxfev": maxfev, "xatol": 1e-7, "fatol": 1e-9, "adaptive": True})


def _mean_objective(z, mu, trunc, fix_d):
    def f(x):
        phi, theta = x[0], x[1]
        d = 0.0 if fix_d else x[2]
        try:
            eps = arfima_filter(z, ArfimaParams(phi, theta, d, mu), trunc)
        except ValueError:
            return _PEN
        v = float(np.mean(eps * eps))
        return v if np.isfinite(v) else _PEN
    return f


def _var_negloglik(eps, trunc, fix_d):
    e2 = eps * eps

    def f(x):
        try:
            p = FigarchParams(np.exp(x[0]), x[1], x[2], 0.0 if fix_d else x[3])
            s2 = figarch_variance(e2, p, trunc)
        except ValueError:
            return _PEN
        ll = gaussian_loglik(eps, s2)
        return -ll if np.isfinite(ll) else _PEN
    return f


def fit_arfima_figarch(series, trunc: int = TRUNC, fix_d: bool = False, joint: bool = True,
                       maxfev: int = 2000) -> TsFit:
    """Two-stage QMLE (mean by conditional sum of squares, then Gaussian variance
    likelihood) followed by one joint Nelder-Mead pass over all parameters.

    ``fix_d=True`` fits the ARMA(1,1)-GARCH(1,1) special case.
    """
    z = np.asarray(series, dtype=float)
    if z.size < 500:
        raise ValueError(f"need at least 500 observations, got {z.size}")
    mu = float(z.mean())
    converged = True

    f_mean = _mean_objective(z, mu, trunc, fix_d)
    mean_bounds = [(-0.99, 0.99), (-0.99, 0.99)] + ([] if fix_d else [(0.0, 0.499)])
    starts = [(0.0, 0.0, 0.2), (0.5, 0.0, 0.0), (0.2, -0.2, 0.35), (-0.3, 0.3, 0.1)]
    best = None
    for s in starts:
        r = _nm(f_mean, s[: len(mean_bounds)], mean_bounds, maxfev)
        if best is None or r.fun < best.fun:
            best = r
    converged &= bool(best.success)
    xm = best.x
    arfima = ArfimaParams(xm[0], xm[1], 0.0 if fix_d else xm[2], mu)
    eps = arfima_filter(z, arfima, trunc)

    v0 = float(np.var(eps))
    f_var = _var_negloglik(eps, trunc, fix_d)
    var_bounds = [(np.log(v0) - 15, np.log(v0) + 3), (0.0, 0.98), (-0.98, 0.98)] + ([] if fix_d else [(0.0, 0.98)])
    vstarts = [(np.log(0.1 * v0), 0.5, 0.8, 0.2), (np.log(0.3 * v0), 0.2, 0.5, 0.0),
               (np.log(0.05 * v0), 0.7, 0.9, 0.4)]
    bestv = None
    for s in vstarts:
        r = _nm(f_var, s[: len(var_bounds)], var_bounds, maxfev)
        if bestv is None or r.fun < bestv.fun:
            bestv = r
    if bestv.fun >= _PEN:
        raise RuntimeError("variance equation: no admissible starting point")
    converged &= bool(bestv.success)
    xv = bestv.x

    if joint:
        nm_ = len(mean_bounds)

        def f_joint(x):
            try:
                a = ArfimaParams(x[0], x[1], 0.0 if fix_d else x[2], mu)
                e = arfima_filter(z, a, trunc)
            except ValueError:
                return _PEN
            return _var_negloglik(e, trunc, fix_d)(x[nm_:])

        rj = _nm(f_joint, np.concatenate([xm, xv]), mean_bounds + var_bounds, maxfev)
        if rj.fun <= bestv.fun:
            xm, xv = rj.x[:nm_], rj.x[nm_:]
        else:
            converged = False

    arfima = ArfimaParams(xm[0], xm[1], 0.0 if fix_d else xm[2], mu)
    figarch = FigarchParams(float(np.exp(xv[0])), xv[1], xv[2], 0.0 if fix_d else xv[3])
    fit = filter_series(z, arfima, figarch, trunc)
    fit.converged = converged
    return fit


# ----------------------------------------------------------------------------
# diagnostics

def acf(series, max_lag: int) -> np.ndarray:
    """Sample autocorrelations at lags 0..max_lag (denominator n)."""
    x = np.asarray(series, dtype=float)
    if not max_lag < x.size / 4:
        raise ValueError("max_lag must be below a quarter of the sample length")
    d = x - x.mean()
    denom = float(d @ d)
    if denom == 0:
        raise ValueError("constant series has no autocorrelation")
    return np.array([1.0] + [float(d[k:] @ d[:-k]) / denom for k in range(1, max_lag + 1)])


def ljung_box(series, lag: int) -> tuple[float, float]:
    """Ljung-Box Q statistic and chi-square p-value at ``lag``."""
    x = np.asarray(series, dtype=float)
    n = x.size
    r = acf(x, lag)[1:] if lag < n / 4 else _acf_unchecked(x, lag)
    q = n * (n + 2) * float(np.sum(r**2 / (n - np.arange(1, lag + 1))))
    return q, float(stats.chi2.sf(q, lag))


def _acf_unchecked(x, lag):
    d = x - x.mean()
    denom = float(d @ d)
    return np.array([float(d[k:] @ d[:-k]) / denom for k in range(1, lag + 1)])


# ----------------------------------------------------------------------------
# CSV

def write_ts_csv(path, dates, values, fit: TsFit) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("date", "value", "eps", "sigma2", "innovation"))
        for row in zip(dates[fit.burn:], values[fit.burn:], fit.eps, fit.cond_var, fit.innovations):
            w.writerow((str(row[0]),) + tuple(repr(float(v)) for v in row[1:]))


def write_summary(path, fit: TsFit) -> None:
    with open(path, "w") as fh:
        for k, v in fit.summary().items():
            fh.write(f"{k} = {v!r}\n" if isinstance(v, float) else f"{k} = {v}\n")
