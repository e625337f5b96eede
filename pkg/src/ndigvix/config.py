"""Pipeline configuration stored as a flat INI-style key-value file."""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, fields, replace
from pathlib import Path


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    # inputs: an empty returns path makes `run` generate the synthetic bundle
    returns: str = ""
    chain: str = ""
    rates: str = ""
    out: str = "out"
    seed: int = 0
    # synthetic data
    n_returns: int = 3000
    # calibration
    window: int = 252
    step: int = 5
    n_starts: int = 8
    warm_starts: int = 0
    periods_per_year: float = 252.0
    # pricing
    n_grid: int = 16384
    eta: float = 0.025
    strikes: tuple = (80.0, 90.0, 100.0, 110.0, 120.0)
    maturities: tuple = (0.25, 0.5, 1.0)
    # time series
    trunc: int = 1000
    # shocks
    beta: float = 0.05
    gamma: float = 0.05
    ratio_window: int = 250
    # scenarios
    scenarios: int = 1000
    burn: int = 1000
    horizon: int = 0  # 0: length of the fitted series

    def __post_init__(self):
        if self.window < 30 or self.step < 1:
            raise ConfigError("window must be at least 30 and step at least 1")
        if not (0 < self.beta <= 1 and 0 < self.gamma <= 1):
            raise ConfigError("tail levels must lie in (0, 1]")
        if self.ratio_window < 20:
            raise ConfigError("ratio_window must be at least 20")
        if self.scenarios < 1 or self.burn < 0 or self.horizon < 0:
            raise ConfigError("scenarios must be positive, burn and horizon non-negative")
        if self.trunc < 100:
            raise ConfigError("trunc must be at least 100")

    def with_(self, **kw) -> "PipelineConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    # -- text form ---------------------------------------------------------
    def dumps(self, exclude=()) -> str:
        cp = configparser.ConfigParser()
        cp["pipeline"] = {f.name: _emit(getattr(self, f.name)) for f in fields(self) if f.name not in exclude}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def loads(cls, text: str) -> "PipelineConfig":
        cp = configparser.ConfigParser()
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from exc
        if not cp.has_section("pipeline"):
            raise ConfigError("missing [pipeline] section")
        known = {f.name: f for f in fields(cls)}
        kw = {}
        for key, raw in cp["pipeline"].items():
            if key not in known:
                raise ConfigError(f"unknown key {key!r}")
            kw[key] = _parse(raw, type(getattr(cls(), key)), key)
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file {p} does not exist")
        return cls.loads(p.read_text())

    def save(self, path, exclude=()) -> None:
        Path(path).write_text(self.dumps(exclude))

    def digest(self) -> str:
        """Hash of every setting except the output directory."""
        return hashlib.sha256(self.dumps(exclude=("out",)).encode()).hexdigest()

    def check_inputs(self) -> None:
        for name in ("returns", "chain", "rates"):
            path = getattr(self, name)
            if path and not Path(path).is_file():
                raise ConfigError(f"{name} file {path} does not exist")
        if self.chain and not self.rates:
            raise ConfigError("chain given without rates")


def _emit(v) -> str:
    if isinstance(v, tuple):
        return " ".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(raw: str, kind, key: str):
    try:
        if kind is tuple:
            return tuple(float(x) for x in raw.split())
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc
