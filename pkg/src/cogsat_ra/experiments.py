"""Batch experiments writing self-describing CSV files."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from . import asymptotics as asy
from . import rng as _rng
from .channel import BeamGainModel, ChannelParams, sample_channels
from .config import RunConfig
from .problem import Problem
from .scenario import Region, generate_scenario
from .solvers import solve_all, solve_centralized_oracle

COMPARISON_COLUMNS = [
    "L", "rate_decentralized_mean", "rate_equal_split_mean",
    "ci_decentralized_low", "ci_decentralized_high", "ci_equal_split_low", "ci_equal_split_high",
    "win_fraction", "c1_satisfaction_rate", "c1_full_decentralized", "c1_full_equal_split",
]
ORACLE_COLUMNS = ["trial", "rate", "n", "q", "m", "assigned", "power"]


def region_of(cfg: RunConfig) -> Region:
    return Region(cfg.region, cfg.region_size)


def bound_config(cfg: RunConfig) -> asy.BoundConfig:
    return asy.BoundConfig(epsilon=cfg.epsilon, L_values=tuple(cfg.L), trials=cfg.trials, seed=cfg.seed,
                           lambda_=cfg.lambda_, beta=cfg.beta, N=cfg.N, B=cfg.B, region=region_of(cfg),
                           C=cfg.C, alpha=cfg.alpha, I_th=cfg.I_th, p_max=cfg.p_max, workers=cfg.workers)


# Execution settings that do not affect results stay out of the CSV preamble.
_UNRECORDED = ("out", "workers")


def render_csv(cfg: RunConfig, columns, rows, extra: dict | None = None) -> str:
    buf = io.StringIO()
    for line in cfg.emit().splitlines():
        if line.split(" = ", 1)[0] not in _UNRECORDED:
            buf.write(f"# {line}\n")
    buf.write(f"# rng = {_rng.ALGORITHM}\n")
    for k, v in (extra or {}).items():
        buf.write(f"# {k} = {v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


def write_csv(path: Path, text: str) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(text.encode("utf-8"))
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


@dataclass
class LemmaResult:
    series: dict[str, asy.EstimateSeries]
    paths: list[Path]
    tripped: list[str] = field(default_factory=list)


def run_lemma_experiments(cfg: RunConfig) -> LemmaResult:
    """Estimate the probability series of ``cfg.experiment`` and write one CSV per series.

    ``lemma3`` writes ``lemma3_pf.csv``; ``lemma4`` writes ``lemma4_pc.csv``;
    ``theorem1`` writes ``theorem1_ps.csv`` (caps without ``p_max``) and
    ``theorem1_ps_pmax.csv``.
    """
    bc = bound_config(cfg)
    if cfg.experiment == "lemma3":
        series = {"pf": asy.estimate_pf(bc, estimator=cfg.pf_estimator)}
    elif cfg.experiment == "lemma4":
        series = {"pc": asy.estimate_pc(bc)}
    elif cfg.experiment == "theorem1":
        series = {"ps": asy.estimate_ps(bc), "ps_pmax": asy.estimate_ps(bc, include_pmax=True)}
    else:
        raise ValueError(f"{cfg.experiment} is not a lemma experiment")
    out = Path(cfg.out)
    paths = []
    tripped = []
    for name, s in series.items():
        if not all(0.0 <= p.estimate <= 1.0 and p.ci_high > p.ci_low for p in s.points):
            tripped.append(f"{name}: estimate outside [0, 1] or empty interval")
        text = render_csv(cfg, asy.CSV_COLUMNS, s.csv_rows(), {"series": s.name})
        paths.append(write_csv(out / f"{cfg.experiment}_{name}.csv", text))
    if "ps_pmax" in series:
        for a, b in zip(series["ps"].points, series["ps_pmax"].points):
            if np.any(b.per_trial < a.per_trial):
                tripped.append(f"theorem1: enforcing p_max lowered P_s at L={a.L}")
    return LemmaResult(series, paths, tripped)


def build_problem(cfg: RunConfig, L: int, trial: int, lambda_: float | None = None) -> Problem:
    """Scenario, channels and problem for one paired trial of the solver comparison.

    ``lambda_=None`` takes the cap factor from the instance's own ``L / K``.
    """
    s = _rng.trial_seed(cfg.seed, trial)
    region = region_of(cfg)
    N, B, M = cfg.N, cfg.B, cfg.M
    sc = generate_scenario((N, B, M), L, region, s)
    params = ChannelParams(C=cfg.C, alpha=cfg.alpha, sigma_s=cfg.sigma_s,
                           beam_model=BeamGainModel.grid(region, N, B, cfg.g0, cfg.theta))
    ch = sample_channels(sc, params, s)
    return Problem.from_channels(ch, cfg.I_th, cfg.p_max, lambda_)


def _comparison_kernel(trials, cfg: RunConfig, L: int) -> np.ndarray:
    out = np.empty((len(trials), 7))
    for i, t in enumerate(trials):
        pr = build_problem(cfg, L, t)
        dec = solve_all(pr, "decentralized")
        eq = solve_all(pr, "equal_split")
        fd = pr.feasibility(dec.assignment, dec.P)
        fe = pr.feasibility(eq.assignment, eq.P)
        structure_ok = all((fd.c2, fd.c3, fd.c4, fd.c5, fe.c2, fe.c3, fe.c4, fe.c5))
        out[i] = (dec.rate, eq.rate, fd.c1_fraction, fd.c1, fe.c1, fe.c1_fraction, structure_ok)
    return out


@dataclass
class ComparisonResult:
    rows: list[dict]
    per_trial: dict[int, np.ndarray]
    path: Path | None
    tripped: list[str] = field(default_factory=list)


def _mean_ci(x: np.ndarray) -> tuple[float, float, float]:
    mean = math.fsum(x.tolist()) / len(x)
    if len(x) < 2:
        return mean, mean, mean
    half = float(stats.t.ppf(0.975, len(x) - 1)) * float(np.std(x, ddof=1)) / math.sqrt(len(x))
    return mean, mean - half, mean + half


def run_solver_comparison(cfg: RunConfig) -> ComparisonResult:
    """Paired decentralized vs equal-split trials at every ``L``; writes ``compare_solvers.csv``.

    ``c1_satisfaction_rate`` is the decentralized solutions' mean fraction of
    satisfied (PU, subband) constraints; the ``c1_full_*`` columns are the
    fractions of trials meeting every constraint.
    """
    rows, per_trial, tripped = [], {}, []
    for L in cfg.L:
        res = asy.run_trials(_comparison_kernel, cfg.trials, (cfg, L), cfg.workers, chunk=25)
        per_trial[L] = res
        dec, eq = res[:, 0], res[:, 1]
        md, lo_d, hi_d = _mean_ci(dec)
        me, lo_e, hi_e = _mean_ci(eq)
        rows.append({
            "L": L, "rate_decentralized_mean": md, "rate_equal_split_mean": me,
            "ci_decentralized_low": lo_d, "ci_decentralized_high": hi_d,
            "ci_equal_split_low": lo_e, "ci_equal_split_high": hi_e,
            "win_fraction": float(np.mean(dec > eq)),
            "c1_satisfaction_rate": math.fsum(res[:, 2].tolist()) / len(res),
            "c1_full_decentralized": float(np.mean(res[:, 3])),
            "c1_full_equal_split": float(np.mean(res[:, 4])),
        })
        if not np.all(res[:, 4]):
            tripped.append(f"equal split violated C1 at L={L}")
        if not np.all(res[:, 6]):
            tripped.append(f"a solver violated C2-C5 at L={L}")
    text = render_csv(cfg, COMPARISON_COLUMNS,
                      [[r["L"]] + [repr(float(r[c])) for c in COMPARISON_COLUMNS[1:]] for r in rows])
    path = write_csv(Path(cfg.out) / "compare_solvers.csv", text)
    return ComparisonResult(rows, per_trial, path, tripped)


def oracle_regression_rows(cfg: RunConfig) -> list[list]:
    rows = []
    for t in range(cfg.trials):
        pr = build_problem(cfg, cfg.L[0], t)
        sol = solve_centralized_oracle(pr, cfg.levels, "full")
        for (n, q, m), a in np.ndenumerate(sol.assignment.A):
            rows.append([t, repr(sol.rate), n, q, m, int(a), repr(float(sol.P[n, q, m]))])
    return rows


def run_oracle_regression(cfg: RunConfig) -> Path:
    """Exhaustive-oracle solutions of ``cfg.trials`` tiny instances; writes ``oracle_regression.csv``."""
    text = render_csv(cfg, ORACLE_COLUMNS, oracle_regression_rows(cfg))
    return write_csv(Path(cfg.out) / "oracle_regression.csv", text)


def run(cfg: RunConfig) -> tuple[list[Path], list[str]]:
    """Dispatch on ``cfg.experiment``; returns written paths and tripped invariants."""
    if cfg.experiment in ("lemma3", "lemma4", "theorem1"):
        res = run_lemma_experiments(cfg)
        return res.paths, res.tripped
    if cfg.experiment == "compare_solvers":
        res = run_solver_comparison(cfg)
        return [res.path], res.tripped
    return [run_oracle_regression(cfg)], []
