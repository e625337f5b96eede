"""End-to-end batch pipeline: data -> calibration -> pricing -> indices -> time series -> shocks -> scenarios."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fracts, ratios, scenarios, vix
from .calibration import CalibrationConfig, RollingConfig, read_params_csv, rolling_fit, write_params_csv
from .config import ConfigError, PipelineConfig
from .data import IngestError, SyntheticConfig, generate_synthetic, ingest_returns
from .pricing import PricerConfig, price_surface, write_option_grid

log = logging.getLogger(__name__)

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3
MIN_TS_LENGTH = 500

ARTIFACTS = ("params.csv", "option_grid.csv", "vvix.csv", "vix.csv", "ts_vvix.csv",
             "shocks.csv", "scenario_panel.csv", "comparison.csv")
STAGES = ("gen", "calibrate", "price", "vix", "fit-ts", "shocks", "simulate", "compare")


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class RunReport:
    exit_code: int
    manifest: Path | None
    stages: dict = field(default_factory=dict)
    message: str = ""


# ----------------------------------------------------------------------------
# small readers

def read_columns(path, *names):
    """Columns of a headed CSV: the first is parsed as dates, the rest as floats."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    missing = [n for n in names if rows and n not in rows[0]]
    if missing:
        raise ValueError(f"{path}: missing columns {missing}")
    out = [np.array([r[names[0]] for r in rows], dtype="datetime64[D]")]
    out += [np.array([float(r[n]) for r in rows]) for n in names[1:]]
    return out


def read_summary(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        if "=" in line:
            k, v = (s.strip() for s in line.split("=", 1))
            out[k] = v
    return out


def ts_params_from_summary(summary: dict):
    a = fracts.ArfimaParams(*(float(summary[f"arfima.{k}"]) for k in ("phi", "theta", "d_m", "mu")))
    f = fracts.FigarchParams(*(float(summary[f"figarch.{k}"]) for k in ("omega", "beta", "phi_v", "d_v")))
    return a, f


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ----------------------------------------------------------------------------
# validation

def resolve_inputs(cfg: PipelineConfig) -> PipelineConfig:
    """Point the config at the synthetic bundle under ``out/data`` when no returns file is given."""
    if cfg.returns:
        return cfg
    data = Path(cfg.out) / "data"
    return cfg.with_(returns=str(data / "returns.csv"), chain=str(data / "chain.csv"),
                     rates=str(data / "rates.csv"))


def validate(cfg: PipelineConfig, n_returns: int) -> None:
    """Checks that need only the sample length; raise ConfigError before any fitting."""
    if cfg.window > n_returns:
        raise ConfigError(f"window {cfg.window} exceeds the sample length {n_returns}")
    n_windows = (n_returns - cfg.window) // cfg.step + 1
    if n_windows < MIN_TS_LENGTH:
        raise ConfigError(f"{n_windows} calibration windows; the time-series fit needs {MIN_TS_LENGTH}"
                          " (lower step or window, or supply more data)")
    horizon = cfg.horizon or n_windows
    if horizon < cfg.ratio_window or n_windows < cfg.ratio_window:
        raise ConfigError(f"ratio window {cfg.ratio_window} exceeds the series length")


# ----------------------------------------------------------------------------
# stages; each reads its inputs from files so it can run on its own

def stage_gen(cfg: PipelineConfig, out: Path) -> list[Path]:
    b = generate_synthetic(SyntheticConfig(n_returns=cfg.n_returns, seed=cfg.seed), out / "data")
    return [b.returns, b.chain, b.rates]


def stage_calibrate(cfg: PipelineConfig, out: Path) -> list[Path]:
    s = ingest_returns(cfg.returns)
    res = rolling_fit(s, RollingConfig(cfg.window, cfg.step),
                      CalibrationConfig(n_starts=cfg.n_starts, seed=cfg.seed + 12345), cfg.warm_starts)
    if all(r.error is not None for r in res):
        raise RuntimeError("every calibration window failed")
    path = out / "params.csv"
    write_params_csv(path, res)
    return [path]


def stage_price(cfg: PipelineConfig, out: Path) -> list[Path]:
    res = [r for r in read_params_csv(out / "params.csv") if np.isfinite(r.objective_value)]
    if not res:
        raise RuntimeError("no calibrated parameters to price with")
    pc = PricerConfig(S0=100.0, n_grid=cfg.n_grid, eta=cfg.eta, periods_per_year=cfg.periods_per_year)
    surface = price_surface(res[-1].params, pc, cfg.strikes, cfg.maturities)
    path = out / "option_grid.csv"
    write_option_grid(path, surface)
    return [path]


def stage_vix(cfg: PipelineConfig, out: Path) -> list[Path]:
    raw = vix.ndig_vvix_series(read_params_csv(out / "params.csv"), cfg.periods_per_year)
    for d, why in raw.skipped:
        log.warning("VVIX skips %s: %s", d, why)
    p1 = out / "vvix.csv"
    vix.write_vvix_csv(p1, raw, vix.normalize(raw))
    p2 = out / "vix.csv"
    with open(p2, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("date", "vix"))
        if cfg.chain:
            cur = vix.vix_series_from_chain(vix.read_chain(cfg.chain), vix.read_rates(cfg.rates))
            for d, why in cur.skipped:
                log.warning("VIX skips %s: %s", d, why)
            for d, v in zip(cur.dates, cur.values):
                w.writerow((str(d), repr(float(v))))
    return [p1, p2]


def stage_fit_ts(cfg: PipelineConfig, out: Path) -> list[Path]:
    written = []
    dates, raw, norm = read_columns(out / "vvix.csv", "date", "raw", "normalized")
    fit = fracts.fit_arfima_figarch(norm, trunc=cfg.trunc)
    fracts.write_ts_csv(out / "ts_vvix.csv", dates, norm, fit)
    fracts.write_summary(out / "ts_vvix_summary.txt", fit)
    written += [out / "ts_vvix.csv", out / "ts_vvix_summary.txt"]
    vd, vv = read_columns(out / "vix.csv", "date", "vix")
    if vv.size:
        fit_v = fracts.fit_arfima_figarch(vv, trunc=cfg.trunc, fix_d=True)
        fracts.write_ts_csv(out / "ts_vix.csv", vd, vv, fit_v)
        fracts.write_summary(out / "ts_vix_summary.txt", fit_v)
        written += [out / "ts_vix.csv", out / "ts_vix_summary.txt"]
    return written


def stage_shocks(cfg: PipelineConfig, out: Path) -> list[Path]:
    dates, innov = read_columns(out / "ts_vvix.csv", "date", "innovation")
    rc = ratios.RatioConfig(cfg.beta, cfg.gamma, cfg.ratio_window)
    series = ratios.rolling_ratios(innov, rc, dates)
    p1 = out / "shocks.csv"
    ratios.write_shocks_csv(p1, series)
    panel = ratios.default_panel(cfg.seed)
    text = ratios.format_report("STARR", ratios.axiom_check(lambda x: ratios.starr(x, cfg.gamma), panel))
    text += ratios.format_report("Rachev", ratios.axiom_check(lambda x: ratios.rachev_ratio(x, rc), panel))
    rep = scenarios.whiteness_tests(innov)
    text += "[innovation whiteness]\n" + "".join(
        f"ljung_box lag {k}: Q = {q:.6g}, p = {p:.6g}\n" for k, q, p in zip(rep.lags, rep.stats, rep.pvalues))
    p2 = out / "axiom_report.txt"
    p2.write_text(text)
    return [p1, p2]


def stage_simulate(cfg: PipelineConfig, out: Path) -> list[Path]:
    a, f = ts_params_from_summary(read_summary(out / "ts_vvix_summary.txt"))
    n_fit = int(read_summary(out / "ts_vvix_summary.txt")["n"])
    res = [r for r in read_params_csv(out / "params.csv") if np.isfinite(r.objective_value)]
    sc_cfg = scenarios.ScenarioConfig(a, f, cfg.horizon or n_fit, cfg.scenarios, res[-1].params,
                                      cfg.seed, cfg.burn, cfg.trunc)
    sc = scenarios.simulate_scenarios(sc_cfg)
    panel = scenarios.signal_noise_panel(sc.innovations, ratios.RatioConfig(cfg.beta, cfg.gamma, cfg.ratio_window))
    p1, p2 = out / "scenario_panel.csv", out / "scenario_summary.csv"
    scenarios.write_panel_csv(p1, panel)
    scenarios.write_panel_summary(p2, panel)
    return [p1, p2]


def stage_compare(cfg: PipelineConfig, out: Path) -> list[Path]:
    vd, vvix_raw, vvix_norm, vvix_nu = _ts_columns(out / "vvix.csv", out / "ts_vvix.csv")
    path = out / "comparison.csv"
    cur = {}
    if (out / "ts_vix.csv").is_file():
        d, val, nu = read_columns(out / "ts_vix.csv", "date", "value", "innovation")
        cur = {k: (a, b) for k, a, b in zip(d, val, nu)}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("date", "vvix_raw", "vvix_normalized", "vvix_innovation", "vix", "vix_innovation"))
        for d, a, b, c in zip(vd, vvix_raw, vvix_norm, vvix_nu):
            x, y = cur.get(d, (float("nan"), float("nan")))
            w.writerow((str(d), repr(float(a)), repr(float(b)), repr(float(c)), repr(float(x)), repr(float(y))))
    lines = []
    for name, nu in (("vvix", vvix_nu), ("vix", np.array([v[1] for v in cur.values()]))):
        if nu.size > 100:
            rep = scenarios.whiteness_tests(nu[np.isfinite(nu)])
            lines += [f"{name}.ljung_box.{k} = {p!r}" for k, p in zip(rep.lags, rep.pvalues)]
            lines.append(f"{name}.innovation_sd = {float(np.nanstd(nu))!r}")
    (out / "comparison_summary.txt").write_text("\n".join(lines) + "\n")
    return [path, out / "comparison_summary.txt"]


def _ts_columns(vvix_csv, ts_csv):
    d, raw, norm = read_columns(vvix_csv, "date", "raw", "normalized")
    td, nu = read_columns(ts_csv, "date", "innovation")
    lookup = dict(zip(td, nu))
    return d, raw, norm, np.array([lookup.get(x, np.nan) for x in d])


STAGE_FUNCS = {"gen": stage_gen, "calibrate": stage_calibrate, "price": stage_price, "vix": stage_vix,
               "fit-ts": stage_fit_ts, "shocks": stage_shocks, "simulate": stage_simulate,
               "compare": stage_compare}


def run_stage(name: str, cfg: PipelineConfig, out: Path) -> list[Path]:
    try:
        return STAGE_FUNCS[name](cfg, out)
    except (ConfigError, IngestError):
        raise
    except Exception as exc:  # noqa: BLE001 - every stage failure is reported the same way
        raise StageError(name, exc) from exc


# ----------------------------------------------------------------------------
# figures

def write_figures(out: Path) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "ndigvix"
    fig_dir = out / "figures"
    fig_dir.mkdir(exist_ok=True)
    paths = []

    def save(fig, name):
        p = fig_dir / name
        fig.savefig(p, format="svg", metadata={"Date": None})
        plt.close(fig)
        paths.append(p)

    d, raw, norm, vvix_nu, cur_v, cur_nu = read_columns(
        out / "comparison.csv", "date", "vvix_raw", "vvix_normalized", "vvix_innovation", "vix", "vix_innovation")

    fig, ax = plt.subplots(2, 1, figsize=(8, 5), sharex=True)
    ax[0].plot(d, raw, lw=0.8)
    ax[0].set_ylabel("annualized sd")
    ax[1].plot(d, norm, lw=0.8)
    ax[1].set_ylabel("z-score")
    ax[0].set_title("NDIG volatility index")
    save(fig, "vvix.svg")

    fig, ax = plt.subplots(2, 1, figsize=(8, 5), sharex=True)
    ax[0].plot(d, cur_nu, lw=0.6)
    ax[0].set_ylabel("VIX innovation")
    ax[1].plot(d, vvix_nu, lw=0.6, color="C1")
    ax[1].set_ylabel("VVIX innovation")
    ax[0].set_title("Standardized innovations")
    save(fig, "vix_vs_vvix.svg")

    fig, ax = plt.subplots(figsize=(6, 4))
    lags = np.arange(41)
    ax.stem(lags, fracts.acf(norm, 40))
    ax.axhline(2 / np.sqrt(norm.size), ls="--", c="k", lw=0.7)
    ax.axhline(-2 / np.sqrt(norm.size), ls="--", c="k", lw=0.7)
    ax.set_xlabel("lag")
    ax.set_title("VVIX autocorrelation")
    save(fig, "acf.svg")

    sd, rach, st = read_columns(out / "shocks.csv", "date", "rachev", "starr")
    fig, ax = plt.subplots(2, 1, figsize=(8, 5), sharex=True)
    ax[0].plot(sd, rach, lw=0.8)
    ax[0].set_ylabel("Rachev")
    ax[1].plot(sd, st, lw=0.8, color="C2")
    ax[1].set_ylabel("STARR")
    ax[0].set_title("Uncertainty shocks")
    save(fig, "shocks.svg")

    with open(out / "scenario_panel.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    pr = np.array([float(r["rachev"]) for r in rows])
    ps = np.array([float(r["starr"]) for r in rows])
    fig, ax = plt.subplots(1, 2, figsize=(8, 3.5))
    ax[0].hist(pr[np.isfinite(pr)], bins=40)
    ax[0].set_title("Rachev across scenarios")
    ax[1].hist(ps[np.isfinite(ps)], bins=40, color="C2")
    ax[1].set_title("STARR across scenarios")
    save(fig, "scenarios.svg")
    return paths


# ----------------------------------------------------------------------------

def write_manifest(cfg: PipelineConfig, out: Path, stages: dict, status: str) -> Path:
    def entry(p: Path):
        return {"path": p.relative_to(out).as_posix(), "sha256": sha256(p)}

    artifacts = [entry(out / a) for a in ARTIFACTS if (out / a).is_file()]
    extras = sorted({p for files in stages.values() for p in files} - {out / a for a in ARTIFACTS},
                    key=lambda p: p.as_posix())
    manifest = {
        "status": status,
        "seed": cfg.seed,
        "config_sha256": cfg.digest(),
        "artifacts": artifacts,
        "supplementary": [entry(p) for p in extras if p.is_file()],
        "stages": {k: "ok" for k in stages},
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def run_pipeline(cfg: PipelineConfig, stages=STAGES) -> RunReport:
    """Run ``stages`` in order; a failing stage stops the run but the manifest is still written.

    Configuration problems are reported with exit code 2 before anything is computed.
    """
    out = Path(cfg.out)
    original = cfg
    generated = not cfg.returns
    cfg = resolve_inputs(cfg)
    try:
        if not generated:
            cfg.check_inputs()
        if "calibrate" in stages:
            fresh = generated and "gen" in stages
            n = cfg.n_returns if fresh else len(ingest_returns(cfg.returns))
            validate(cfg, n)
        out.mkdir(parents=True, exist_ok=True)
    except (ConfigError, IngestError, OSError) as exc:
        return RunReport(EXIT_VALIDATION, None, {}, str(exc))

    done: dict = {}
    status, code, msg = "ok", EXIT_OK, ""
    try:
        for name in stages:
            if name == "gen" and not generated:
                continue
            log.info("stage %s", name)
            done[name] = run_stage(name, cfg, out)
        if set(stages) >= {"compare", "shocks", "simulate"}:
            done["figures"] = write_figures(out)
    except (ConfigError, IngestError) as exc:
        status, code, msg = "validation error", EXIT_VALIDATION, str(exc)
    except StageError as exc:
        status, code, msg = f"failed at {exc.stage}", EXIT_NUMERICAL, str(exc)
        log.error("%s", exc)
    # the run directory is implied by where the file lives; keeping it out makes reruns hash alike
    original.save(out / "config.ini", exclude=("out",))
    done.setdefault("config", []).append(out / "config.ini")
    manifest = write_manifest(original, out, done, status)
    return RunReport(code, manifest, done, msg)
