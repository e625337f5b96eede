"""Inverse Gaussian subordinators and the doubly subordinated NDIG log-price.

The log-price is

    X_t = X_0 + mu3 t + gamma U_t + rho T(U_t) + sigma3 B(T(U_t))

with U and T independent IG Levy subordinators and B a standard Brownian
motion. For an IG Levy process with IG(mean mu, shape lam) at t = 1 the
marginal at time t is IG(mean mu t, shape lam t^2), and the cumulant
generating function per unit time is

    kappa(z) = (lam / mu) * (1 - sqrt(1 - 2 mu^2 z / lam)).

Conditioning on the clocks gives the cumulant generating function of X_1,

    K(w) = mu3 w + kappa_U(gamma w + kappa_T(rho w + sigma3^2 w^2 / 2)),

and the characteristic function psi(v) = exp(K(i v)).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import factorial
from typing import Iterator, Sequence

import numpy as np
from scipy import stats

# Paths are simulated in fixed-size blocks, each with its own child seed, so
# the output does not depend on how blocks are scheduled.
_BLOCK = 65536


class MomentsUndefinedError(ValueError):
    """Raised when standardized moments of X_1 do not exist for a parameter set."""


@dataclass(frozen=True)
class IGParams:
    """Inverse Gaussian law of a subordinator at t = 1: mean ``mu``, shape ``lam``."""

    mu: float = 1.0
    lam: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.mu) and self.mu > 0):
            raise ValueError(f"IG mean must be positive, got {self.mu}")
        if not (np.isfinite(self.lam) and self.lam > 0):
            raise ValueError(f"IG shape must be positive, got {self.lam}")

    def cumulants(self) -> tuple[float, float, float, float]:
        mu, lam = self.mu, self.lam
        return (mu, mu**3 / lam, 3 * mu**5 / lam**2, 15 * mu**7 / lam**3)

    def cgf(self, z):
        """Cumulant generating function per unit time (principal square root)."""
        z = np.asarray(z)
        # 1 - sqrt(1 - x) written as x / (1 + sqrt(1 - x)) to avoid cancellation
        x = 2 * self.mu**2 * z / self.lam
        out = 2 * self.mu * z / (1 + np.sqrt(1 - x + 0j))
        if np.isrealobj(z):
            return out.real
        return out

    def cgf_limit(self) -> float:
        """Largest real argument for which the exponential moment is finite."""
        return self.lam / (2 * self.mu**2)


@dataclass(frozen=True)
class NDIGParams:
    mu3: float = 0.0
    sigma3: float = 0.2
    gamma: float = 0.0
    rho: float = 0.0
    igT: IGParams = field(default_factory=IGParams)
    igU: IGParams = field(default_factory=IGParams)

    def __post_init__(self):
        for name in ("mu3", "gamma", "rho"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if not (np.isfinite(self.sigma3) and self.sigma3 >= 0):
            raise ValueError(f"sigma3 must be non-negative, got {self.sigma3}")

    @property
    def lambda_T(self) -> float:
        return self.igT.lam

    @property
    def lambda_U(self) -> float:
        return self.igU.lam

    @classmethod
    def from_vector(cls, mu3, sigma3, gamma, rho, lambda_T, lambda_U, mu_T=1.0, mu_U=1.0):
        return cls(mu3=float(mu3), sigma3=float(sigma3), gamma=float(gamma), rho=float(rho),
                   igT=IGParams(float(mu_T), float(lambda_T)),
                   igU=IGParams(float(mu_U), float(lambda_U)))

    def as_dict(self) -> dict[str, float]:
        return {
            "mu3": self.mu3, "sigma3": self.sigma3, "gamma": self.gamma, "rho": self.rho,
            "mu_T": self.igT.mu, "lambda_T": self.igT.lam,
            "mu_U": self.igU.mu, "lambda_U": self.igU.lam,
        }

    @classmethod
    def from_dict(cls, d) -> "NDIGParams":
        return cls.from_vector(d["mu3"], d["sigma3"], d.get("gamma", 0.0), d.get("rho", 0.0),
                               d["lambda_T"], d["lambda_U"],
                               d.get("mu_T", 1.0), d.get("mu_U", 1.0))

    def with_(self, **changes) -> "NDIGParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class SamplePath:
    times: np.ndarray
    values: np.ndarray
    seed: int


@dataclass(frozen=True)
class SimulatedPaths:
    """Batch of simulated NDIG paths stored as arrays of shape (n_paths, len(times)).

    ``U`` and ``TU`` hold the two clocks U_t and T(U_t) along each path.
    """

    times: np.ndarray
    values: np.ndarray
    U: np.ndarray
    TU: np.ndarray
    seed: int

    def __len__(self) -> int:
        return self.values.shape[0]

    def __getitem__(self, i: int) -> SamplePath:
        return SamplePath(self.times, self.values[i], self.seed)

    def __iter__(self) -> Iterator[SamplePath]:
        for i in range(len(self)):
            yield self[i]


# ----------------------------------------------------------------------------
# inverse Gaussian

def ig_pdf(x, p: IGParams):
    """IG(mean mu, shape lam) density."""
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(x <= 0):
        raise ValueError("ig_pdf requires x > 0")
    mu, lam = p.mu, p.lam
    out = np.sqrt(lam / (2 * np.pi * x**3)) * np.exp(-lam * (x - mu) ** 2 / (2 * mu**2 * x))
    return out if out.ndim else float(out)


def _ig_draw(mean, shape, rng: np.random.Generator, size=None):
    """Michael-Schucany-Haas transformation sampler for IG(mean, shape).

    The smaller root of the quadratic is computed as mean^2 / larger root,
    which avoids cancellation when shape >> mean.
    """
    mean = np.asarray(mean, dtype=float)
    shape = np.asarray(shape, dtype=float)
    if size is None:
        size = np.broadcast(mean, shape).shape
    y = rng.standard_normal(size) ** 2
    u = rng.random(size)
    safe_mean = np.where(mean > 0, mean, 1.0)
    safe_shape = np.where(shape > 0, shape, 1.0)
    my = safe_mean * y
    big = safe_mean + safe_mean * (my + np.sqrt(4 * safe_shape * my + my * my)) / (2 * safe_shape)
    small = safe_mean**2 / big
    x = np.where(u <= safe_mean / (safe_mean + small), small, big)
    return np.where(mean > 0, x, 0.0)


def ig_sample(p: IGParams, t: float, n: int, seed=None) -> np.ndarray:
    """Draw ``n`` values of an IG subordinator at time ``t``: IG(mean mu t, shape lam t^2)."""
    if not t > 0:
        raise ValueError("t must be positive")
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    return _ig_draw(p.mu * t, p.lam * t * t, rng, size=int(n))


# ----------------------------------------------------------------------------
# transforms

def cgf(w, p: NDIGParams):
    """Real cumulant generating function log E[exp(w X_1)]; NaN outside its domain."""
    w = np.asarray(w, dtype=float)
    s_T = p.rho * w + 0.5 * p.sigma3**2 * w * w
    inner = p.igT.cgf(np.minimum(s_T, p.igT.cgf_limit()))
    z_U = p.gamma * w + inner
    outer = p.igU.cgf(np.minimum(z_U, p.igU.cgf_limit()))
    ok = (s_T <= p.igT.cgf_limit()) & (z_U <= p.igU.cgf_limit())
    out = np.where(ok, p.mu3 * w + outer, np.nan)
    return out if out.ndim else float(out)


def exponential_moment_exists(w: float, p: NDIGParams) -> bool:
    return bool(np.isfinite(cgf(w, p)))


def log_cf(v, p: NDIGParams):
    """Characteristic exponent log psi(v) of X_1, principal branches throughout.

    Complex ``v`` is accepted inside the strip where the exponential moment exists.
    """
    v = np.asarray(v)
    iv = 1j * v
    s_T = p.rho * iv + 0.5 * p.sigma3**2 * iv * iv
    z_U = p.gamma * iv + p.igT.cgf(s_T)
    return p.mu3 * iv + p.igU.cgf(z_U)


def ndig_cf(v, p: NDIGParams):
    """Characteristic function E[exp(i v X_1)]."""
    out = np.exp(log_cf(v, p))
    return out if np.ndim(out) else complex(out)


# ----------------------------------------------------------------------------
# moments

def _series_compose(kappas: Sequence[float], inner: np.ndarray) -> np.ndarray:
    """Taylor coefficients (order <= 4) of sum_n kappas[n-1]/n! * g(w)^n, g(0) = 0."""
    order = len(inner) - 1
    out = np.zeros(order + 1)
    power = np.zeros(order + 1)
    power[0] = 1.0
    for n, k in enumerate(kappas, start=1):
        power = np.convolve(power, inner)[: order + 1]
        out += k / factorial(n) * power
    return out


def ndig_cumulants(p: NDIGParams) -> tuple[float, float, float, float]:
    """First four cumulants of X_1 by composing the two IG cumulant series."""
    inner_T = np.array([0.0, p.rho, 0.5 * p.sigma3**2, 0.0, 0.0])
    z_U = _series_compose(p.igT.cumulants(), inner_T)
    z_U[1] += p.gamma
    coeffs = _series_compose(p.igU.cumulants(), z_U)
    coeffs[1] += p.mu3
    return tuple(float(coeffs[k] * factorial(k)) for k in range(1, 5))


def cumulants_to_moments(k1, k2, k3, k4) -> tuple[float, float, float, float]:
    if not (np.isfinite(k2) and k2 > 0):
        raise MomentsUndefinedError(f"variance {k2!r} is not positive; skewness and kurtosis undefined")
    return (k1, k2, k3 / k2**1.5, 3.0 + k4 / k2**2)


def ndig_moments(p: NDIGParams) -> tuple[float, float, float, float]:
    """(mean, variance, skewness, kurtosis) of X_1; kurtosis is not excess."""
    return cumulants_to_moments(*ndig_cumulants(p))


def ndig_cumulants_fd(p: NDIGParams, h: float = 1e-3) -> tuple[float, float, float, float]:
    """Cumulants from 4th-order central differences of log psi at 0.

    Independent of the series composition; used as a cross-check.
    """
    # d^k/dv^k log psi(0) = i^k * kappa_k
    g = lambda v: log_cf(v, p)  # noqa: E731
    f = {j: g(j * h) for j in range(-3, 4)}
    d1 = (-f[2] + 8 * f[1] - 8 * f[-1] + f[-2]) / (12 * h)
    d2 = (-f[2] + 16 * f[1] - 30 * f[0] + 16 * f[-1] - f[-2]) / (12 * h**2)
    d3 = (-f[3] + 8 * f[2] - 13 * f[1] + 13 * f[-1] - 8 * f[-2] + f[-3]) / (8 * h**3)
    d4 = (-f[3] + 12 * f[2] - 39 * f[1] + 56 * f[0] - 39 * f[-1] + 12 * f[-2] - f[-3]) / (6 * h**4)
    return ((d1 / 1j).real, (-d2).real, (d3 / -1j).real, d4.real)


# ----------------------------------------------------------------------------
# simulation

def _increments(p: NDIGParams, dt: np.ndarray, rng: np.random.Generator, n: int):
    """Clock and log-price increments for ``n`` paths over steps ``dt``."""
    size = (n, len(dt))
    dU = _ig_draw(p.igU.mu * dt, p.igU.lam * dt * dt, rng, size)
    dTU = _ig_draw(p.igT.mu * dU, p.igT.lam * dU * dU, rng, size)
    z = rng.standard_normal(size)
    dX = p.mu3 * dt + p.gamma * dU + p.rho * dTU + p.sigma3 * np.sqrt(dTU) * z
    return dU, dTU, dX


def ndig_simulate(p: NDIGParams, grid, n_paths: int, seed: int = 0, x0: float = 0.0) -> SimulatedPaths:
    """Exact simulation of NDIG paths on ``grid`` by double subordination."""
    times = np.asarray(grid, dtype=float)
    if times.ndim != 1 or times.size < 2:
        raise ValueError("grid needs at least two points")
    if times[0] != 0 or np.any(np.diff(times) <= 0):
        raise ValueError("grid must start at 0 and be strictly increasing")
    if n_paths < 1:
        raise ValueError("n_paths must be at least 1")
    dt = np.diff(times)
    children = np.random.SeedSequence(seed).spawn(-(-n_paths // _BLOCK))
    parts = []
    for i, child in enumerate(children):
        m = min(_BLOCK, n_paths - i * _BLOCK)
        parts.append(_increments(p, dt, np.random.default_rng(child), m))
    dU, dTU, dX = (np.concatenate([q[j] for q in parts]) for j in range(3))

    def accumulate(inc, start):
        out = np.empty((n_paths, times.size))
        out[:, 0] = start
        np.cumsum(inc, axis=1, out=out[:, 1:])
        out[:, 1:] += start
        return out

    return SimulatedPaths(times, accumulate(dX, x0), accumulate(dU, 0.0), accumulate(dTU, 0.0), seed)


def ndig_sample_x(p: NDIGParams, n: int, seed=None, t: float = 1.0) -> np.ndarray:
    """Draw ``n`` i.i.d. values of X_t - X_0."""
    return ndig_simulate(p, [0.0, t], n, seed=seed).values[:, 1]


def mc_cf(x: np.ndarray, v) -> tuple[np.ndarray, np.ndarray]:
    """Sample characteristic function and the standard error of the complex mean."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    est = np.empty(v.size, dtype=complex)
    se = np.empty(v.size)
    n = x.size
    for j, vj in enumerate(v):
        e = np.exp(1j * vj * x)
        est[j] = e.mean()
        se[j] = np.sqrt((e.real.var(ddof=1) + e.imag.var(ddof=1)) / n)
    return est, se


def normality_pvalue(x: np.ndarray, p: NDIGParams) -> float:
    """KS p-value of a sample of X_1 against N(mu3 + gamma + rho, sigma3^2)."""
    loc = p.mu3 + p.gamma * p.igU.mu + p.rho * p.igT.mu * p.igU.mu
    return float(stats.kstest(x, "norm", args=(loc, p.sigma3)).pvalue)
