"""Experiment orchestration: run configuration, trace/summary emission and
rate reports for the two imaging problem families."""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import datagen
from .exceptions import ConfigError
from .metrics import SqueezeSchedule
from .problems import KLTVDeblur, WeightedL2Denoise
from .solver import (EpsilonSchedule, SolveResult, SolverConfig, TraceRecord,
                     solve)

PROBLEMS = ("wl2tv-denoise", "kltv-deblur")
METRIC_MODES = ("identity", "split", "constant")

CSV_COLUMNS = ("k", "F", "eF", "tau", "L_est", "bt_trials", "inner_iters",
               "gap", "eps", "time_s")


@dataclass
class RunConfig:
    """Fully resolved settings of one experiment run."""

    problem: str = "wl2tv-denoise"
    source: str = "piecewise"
    input: Optional[str] = None          # PGM path; overrides source
    scale: int = 32
    range_lo: float = 0.0
    range_hi: float = 400.0
    sigma_psf: float = 0.0
    b: float = 0.01
    seed: int = 0
    # model
    lam: float = 0.15
    eps_q: float = 1e-4
    mu_f: str = "auto"                   # "auto", or a number as text
    mu_g: str = "auto"
    # solver
    rho: float = 0.8
    delta: float = 1.0
    L0: float = 30.0
    t0: float = 1.01
    maxiter: int = 500
    max_bt: int = 10
    eps_mode: str = "theta-adaptive"
    eps_a: float = 0.5
    eps_b: float = 0.5
    eps_c: float = 1.0
    eps_p: float = 2.1
    inner_cap: int = 2000
    rel_tol: float = 0.0                 # 0 disables the stopping rule
    # metric
    metric: str = "split"
    s1: float = 1.0
    s2: float = 2.0
    # reference / outputs
    reference_iters: int = 5000
    trace: Optional[str] = None
    out: Optional[str] = None
    outdir: str = "runs"
    label: str = "run"

    def validate(self) -> None:
        if self.problem not in PROBLEMS:
            raise ConfigError(f"problem: must be one of {PROBLEMS}")
        if self.metric not in METRIC_MODES:
            raise ConfigError(f"metric: must be one of {METRIC_MODES}")
        if self.metric == "constant" and self.problem != "wl2tv-denoise":
            raise ConfigError("metric: constant mode only applies to wl2tv-denoise")
        if self.input is not None and not Path(self.input).exists():
            raise ConfigError(f"input: file {self.input!r} does not exist")
        if self.range_hi <= self.range_lo or self.range_lo < 0:
            raise ConfigError("range_lo/range_hi: need hi > lo >= 0")
        if self.scale < 8:
            raise ConfigError("scale: must be at least 8")
        for name in ("lam", "b", "L0", "rho", "delta"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name}: must be positive")
        if self.maxiter < 1:
            raise ConfigError("maxiter: must be positive")

    def resolved_mu(self, model) -> tuple[float, float]:
        mu_f = model.mu_f if self.mu_f == "auto" else float(self.mu_f)
        mu_g = model.mu_g if self.mu_g == "auto" else float(self.mu_g)
        return mu_f, mu_g

    def experiment_spec(self) -> datagen.ExperimentSpec:
        return datagen.ExperimentSpec(
            source=self.input if self.input else self.source,
            scale=self.scale, intensity_range=(self.range_lo, self.range_hi),
            sigma_psf=self.sigma_psf, background=self.b, rng_seed=self.seed)

    def epsilon_schedule(self) -> EpsilonSchedule:
        return EpsilonSchedule(mode=self.eps_mode, a=self.eps_a, b=self.eps_b,
                               c=self.eps_c, p=self.eps_p)

    def build_model(self, z, op):
        if self.problem == "wl2tv-denoise":
            return WeightedL2Denoise(z, self.b, self.lam)
        return KLTVDeblur(z, self.b, op, self.lam, self.eps_q)

    def solver_config(self, model) -> SolverConfig:
        mu_f, mu_g = self.resolved_mu(model)
        strategy = model.metric_strategy(
            self.metric, SqueezeSchedule(self.s1, self.s2)) \
            if self.metric != "identity" else model.metric_strategy("identity")
        return SolverConfig(
            L0=self.L0, rho=self.rho, delta=self.delta, t0=self.t0,
            mu_f=mu_f, mu_g=mu_g, max_outer=self.maxiter, max_bt=self.max_bt,
            eps=self.epsilon_schedule(), inner_max=self.inner_cap,
            rel_tol=self.rel_tol if self.rel_tol > 0 else None,
            metric_strategy=strategy)


_CASTS = {int: int, float: float, str: str}


def config_from_mapping(mapping: dict, base: Optional[RunConfig] = None) -> RunConfig:
    """Build a RunConfig from flat key=value text entries."""
    cfg = base if base is not None else RunConfig()
    known = {f.name: f for f in fields(RunConfig)}
    for key, raw in mapping.items():
        name = key.replace("-", "_")
        if name == "lambda":
            name = "lam"
        if name not in known:
            raise ConfigError(f"unknown configuration key {key!r}")
        current = getattr(cfg, name)
        if raw is None:
            continue
        if name in ("trace", "out", "input"):
            setattr(cfg, name, str(raw))
        elif isinstance(current, bool):
            setattr(cfg, name, str(raw).lower() in ("1", "true", "yes"))
        elif isinstance(current, int) and not isinstance(current, bool):
            setattr(cfg, name, int(raw))
        elif isinstance(current, float):
            setattr(cfg, name, float(raw))
        else:
            setattr(cfg, name, str(raw))
    return cfg


def parse_config_file(path) -> dict:
    """Flat ``key = value`` text; '#' starts a comment."""
    mapping = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = body.split("=", 1)
        mapping[key.strip()] = value.strip()
    return mapping


@dataclass
class ExperimentResult:
    config: RunConfig
    result: SolveResult
    f_star: float
    x_star: np.ndarray
    trace_path: Path
    summary_path: Path
    echo_path: Path
    out_path: Optional[Path]
    model: object


def write_trace_csv(path, trace: list[TraceRecord], f_star: float) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in trace:
            ef = (r.F_value - f_star) / abs(f_star) if f_star else math.nan
            writer.writerow([r.k, f"{r.F_value:.17g}", f"{ef:.17g}",
                             f"{r.tau:.17g}", f"{r.L_est:.17g}", r.bt_trials,
                             r.inner_iters, f"{r.gap:.17g}", f"{r.eps:.17g}",
                             f"{r.elapsed_s:.6f}"])


def read_trace_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = {}
    for col in CSV_COLUMNS:
        out[col] = np.array([float(row[col]) for row in rows])
    return out


def write_config_echo(path, cfg: RunConfig, extra: dict) -> None:
    lines = [f"{f.name} = {getattr(cfg, f.name)}" for f in fields(RunConfig)]
    lines += [f"{k} = {v}" for k, v in extra.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def run_experiment(cfg: RunConfig) -> ExperimentResult:
    """Simulate data, solve, and write trace/summary/echo artifacts."""
    cfg.validate()
    outdir = Path(cfg.outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    spec = cfg.experiment_spec()
    gt, z, op = datagen.make_experiment(spec)
    model = cfg.build_model(z, op)
    problem = model.to_composite()
    solver_cfg = cfg.solver_config(model)
    x0 = z.copy()

    # the reference shares the run's initial Lipschitz estimate so that all
    # experiment variants on one dataset compare against one cached oracle
    ref_cfg = datagen.plain_reference_config(L0=cfg.L0,
                                             iters=cfg.reference_iters)
    x_star, f_star, _ = datagen.reference_solution(
        problem, ref_cfg, x0, cache_dir=outdir / ".refcache")

    started = time.perf_counter()
    result = solve(problem, solver_cfg, x0, f_star=f_star)
    wall = time.perf_counter() - started

    trace_path = Path(cfg.trace) if cfg.trace else outdir / f"{cfg.label}_trace.csv"
    write_trace_csv(trace_path, result.trace, f_star)

    summary_path = outdir / f"{cfg.label}_summary.txt"
    final_ef = (result.trace[-1].F_value - f_star) / abs(f_star)
    total_inner = sum(r.inner_iters for r in result.trace)
    summary_path.write_text(
        f"problem = {cfg.problem}\n"
        f"iterations = {len(result.trace)}\n"
        f"final_F = {result.trace[-1].F_value:.12g}\n"
        f"reference_F = {f_star:.12g}\n"
        f"final_eF = {final_ef:.6g}\n"
        f"total_time_s = {wall:.3f}\n"
        f"total_inner_iterations = {total_inner}\n")

    echo_path = outdir / f"{cfg.label}_config.txt"
    write_config_echo(echo_path, cfg, {
        "resolved_mu_f": solver_cfg.mu_f, "resolved_mu_g": solver_cfg.mu_g,
        "model_L_f": model.L_f, "reference_F": f_star})

    out_path = None
    if cfg.out:
        out_path = Path(cfg.out)
        if out_path.suffix.lower() == ".pgm":
            lo, hi = cfg.range_lo, cfg.range_hi
            scaled = (result.x - lo) / (hi - lo) * 65535.0
            datagen.write_pgm(out_path, scaled)
        else:
            datagen.write_reference(out_path, result.x,
                                    result.trace[-1].F_value)

    return ExperimentResult(config=cfg, result=result, f_star=f_star,
                            x_star=x_star, trace_path=trace_path,
                            summary_path=summary_path, echo_path=echo_path,
                            out_path=out_path, model=model)


# ---------------------------------------------------------------------------
# rate reports
# ---------------------------------------------------------------------------

@dataclass
class RateReport:
    loglog_slope: float
    max_tail_ratio: float
    contraction_theory: Optional[float]
    certificate_pass: Optional[bool]
    tail_points: int

    def render(self) -> str:
        lines = [
            f"log-log tail slope          : {self.loglog_slope:.3f}",
            f"max tail ratio eF(k+1)/eF(k): {self.max_tail_ratio:.6f}",
        ]
        if self.contraction_theory is not None:
            lines.append(
                f"theoretical contraction     : {self.contraction_theory:.6f}")
        if self.certificate_pass is not None:
            lines.append(
                f"certificate                 : "
                f"{'pass' if self.certificate_pass else 'FAIL'}")
        return "\n".join(lines)


EF_FLOOR = 1e-13


def rate_report(ks: np.ndarray, ef: np.ndarray, *,
                mu: float = 0.0, rho: float = 0.8, l_f: Optional[float] = None,
                mu_g: float = 0.0, eta_sup: float = 1.0,
                certificate_pass: Optional[bool] = None) -> RateReport:
    """Tail-decay diagnostics of a relative-error trace.

    Fits ``log eF`` against ``log k`` over the final third (sublinear regime)
    and reports the largest consecutive error ratio there (linear regime),
    ignoring entries at or below the resolution floor of the reference.
    """
    ks = np.asarray(ks, dtype=float)
    ef = np.asarray(ef, dtype=float)
    if len(ks) < 9 or np.all(ef == ef[0]):
        raise ValueError("trace too short or degenerate for a rate report")
    tail = slice(2 * len(ks) // 3, None)
    kt, et = ks[tail], ef[tail]
    keep = et > EF_FLOOR
    slope = math.nan
    if np.count_nonzero(keep) >= 3:
        slope = float(np.polyfit(np.log(kt[keep]), np.log(et[keep]), 1)[0])
    ratios = [et[i + 1] / et[i] for i in range(len(et) - 1)
              if et[i] > EF_FLOOR and et[i + 1] > EF_FLOOR]
    max_ratio = max(ratios) if ratios else 0.0
    contraction = None
    if l_f is not None and mu > 0:
        contraction = 1.0 - math.sqrt(mu * rho / (l_f * eta_sup + mu_g * rho))
    return RateReport(loglog_slope=slope, max_tail_ratio=max_ratio,
                      contraction_theory=contraction,
                      certificate_pass=certificate_pass,
                      tail_points=int(np.count_nonzero(keep)))


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

def preset_configs(name: str, scale: int = 32, outdir: str = "runs",
                   seed: int = 0) -> list[RunConfig]:
    """Small parameter sweeps mirroring the experiment presets."""
    if name == "moon-armijo-vs-adaptive":
        runs = []
        for delta in (1.0, 0.99):
            runs.append(RunConfig(
                problem="wl2tv-denoise", source="piecewise", scale=scale,
                range_lo=0.0, range_hi=400.0, sigma_psf=0.0, b=0.01,
                lam=0.15, rho=0.8, delta=delta, L0=30.0, t0=1.01,
                maxiter=500, metric="split", s1=1.0, s2=2.0, seed=seed,
                outdir=outdir, label=f"moon_delta{delta:g}"))
        return runs
    if name == "deblur-phantom":
        runs = []
        for delta in (1.0, 0.98):
            # the tiny L0 needs a deep shrink once the first momentum step
            # exposes the curvature at noisy desk scale (up to ~30 trials)
            runs.append(RunConfig(
                problem="kltv-deblur", source="piecewise", scale=scale,
                range_lo=0.0, range_hi=1.0, sigma_psf=1.4, b=0.01,
                lam=0.004, eps_q=1e-4, rho=0.85, delta=delta, L0=0.1,
                t0=1.01, maxiter=300, max_bt=30, metric="split", s1=1.0,
                s2=2.0, seed=seed, outdir=outdir,
                label=f"phantom_delta{delta:g}"))
        return runs
    raise ConfigError(f"unknown preset {name!r}")


def run_preset(name: str, scale: int = 32, outdir: str = "runs",
               seed: int = 0) -> list[ExperimentResult]:
    return [run_experiment(cfg) for cfg in preset_configs(name, scale, outdir, seed)]
