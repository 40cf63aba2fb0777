"""Monte Carlo estimators and closed-form bounds for the asymptotic regime.

Estimators
    * :func:`estimate_pf` -- probability that an SU's closest PU is farther
      than ``L**(-(1-eps)/2)``.
    * :func:`estimate_pc` -- probability that a PU's closest co-channel SU is
      nearer than ``K_bar**(-(1+eps)/2)``.
    * :func:`estimate_ps` -- fraction of interference constraints met when
      every SU transmits at its peak-power cap.

Trials use per-trial seeds ``rng.trial_seed(seed, t)``, shared across the
points of a sweep, so per-trial values are reproducible whatever the
execution order or worker count.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.spatial.distance import cdist
from statsmodels.stats.proportion import proportion_confint

from . import rng as _rng
from .channel import ChannelRealization
from .errors import InvalidConfigError
from .problem import C1_RELATIVE_SLACK, lemma1_power_cap, theorem1_power_cap
from .scenario import Region, Scenario, cochannel_sets, generate_scenario, scaling_from

# --------------------------------------------------------------------------
# configuration and results


@dataclass(frozen=True)
class BoundConfig:
    """Sweep settings.

    Exactly one of ``lambda_`` (``K = round(L / lambda_)``) or ``beta``
    (``K = floor(L**beta)``) fixes the SU count; the SUs are then laid out as
    ``(N, B, M)`` with ``M = max(1, round(K / (N*B)))``.
    """

    epsilon: float = 0.5
    L_values: tuple[int, ...] = (100, 316, 1000, 3162, 10000)
    trials: int = 10_000
    seed: int = 0
    lambda_: float | None = 10.0
    beta: float | None = None
    N: int = 5
    B: int = 2
    region: Region = field(default_factory=Region.disk)
    C: float = 1.0
    alpha: float = 2.0
    I_th: float = 1.0
    p_max: float = 10.0
    workers: int = 1
    enforce_theorem_range: bool = False

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise InvalidConfigError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.trials < 100:
            raise InvalidConfigError(f"trials must be >= 100, got {self.trials}")
        if (self.lambda_ is None) == (self.beta is None):
            raise InvalidConfigError("set exactly one of lambda_ and beta")
        if self.lambda_ is not None and not self.lambda_ > 0:
            raise InvalidConfigError("lambda must be positive")
        if self.beta is not None and not 0 < self.beta < 1:
            raise InvalidConfigError("beta must lie in (0, 1)")
        if self.N < 1 or self.B < 1 or any(L < 1 for L in self.L_values):
            raise InvalidConfigError("N, B and every L must be >= 1")
        if self.enforce_theorem_range and self.beta is not None:
            top = theorem_epsilon_limit(self.beta)
            if not self.epsilon < top:
                raise InvalidConfigError(f"epsilon must be < {top:.6g} for beta={self.beta}")

    def dims_for(self, L: int) -> tuple[int, int, int]:
        if self.lambda_ is not None:
            K = max(1, round(L / self.lambda_))
        else:
            K = scaling_from(L, self.beta).K
        return (self.N, self.B, max(1, round(K / (self.N * self.B))))


@dataclass
class EstimatePoint:
    L: int
    K: int
    K_bar: int
    estimate: float
    ci_low: float
    ci_high: float
    trials: int
    analytic_bound: float | None = None
    per_trial: np.ndarray | None = field(default=None, repr=False)

    @property
    def half_width(self) -> float:
        return max(self.estimate - self.ci_low, self.ci_high - self.estimate)


@dataclass
class EstimateSeries:
    name: str
    points: list[EstimatePoint]

    @property
    def estimates(self) -> np.ndarray:
        return np.array([p.estimate for p in self.points])

    @property
    def L_values(self) -> list[int]:
        return [p.L for p in self.points]

    def csv_rows(self) -> list[list]:
        rows = []
        for p in self.points:
            rows.append([p.L, p.K, p.K_bar, repr(p.estimate), repr(p.ci_low), repr(p.ci_high), p.trials,
                         "" if p.analytic_bound is None else repr(p.analytic_bound)])
        return rows


CSV_COLUMNS = ["L", "K", "K_bar", "estimate", "ci_low", "ci_high", "trials", "analytic_bound"]


def wilson_interval(p_hat: float, n: int) -> tuple[float, float]:
    """95% Wilson score interval for a proportion observed on ``n`` trials."""
    lo, hi = proportion_confint(p_hat * n, n, alpha=0.05, method="wilson")
    return float(lo), float(hi)


def _point(L, K, K_bar, values: np.ndarray, bound=None, interval: str = "wilson") -> EstimatePoint:
    est = math.fsum(values.tolist()) / len(values)
    if interval == "wilson":
        lo, hi = wilson_interval(est, len(values))
    else:
        half = 1.959963984540054 * float(np.std(values, ddof=1)) / math.sqrt(len(values))
        lo, hi = max(est - half, 0.0), min(est + half, 1.0)
    return EstimatePoint(L, K, K_bar, est, lo, hi, len(values), bound, values)


# --------------------------------------------------------------------------
# trial execution


def run_trials(kernel: Callable, trials: int, args: tuple, workers: int = 1, chunk: int = 500) -> np.ndarray:
    """Evaluate ``kernel(trial_indices, *args)`` over all trials; results in trial order."""
    chunks = [range(s, min(s + chunk, trials)) for s in range(0, trials, chunk)]
    if workers <= 1:
        parts = [kernel(c, *args) for c in chunks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(kernel, chunks, *[[a] * len(chunks) for a in args]))
    return np.concatenate(parts)


def pf_threshold(L: int, epsilon: float) -> float:
    return L ** (-(1 - epsilon) / 2)


def pc_threshold(K_bar: int, epsilon: float) -> float:
    return K_bar ** (-(1 + epsilon) / 2)


def far_pu_indicator(su_xy, pu_xy, radius: float) -> bool:
    """True when no PU lies within ``radius`` of the SU."""
    pu = np.asarray(pu_xy, dtype=float).reshape(-1, 2)
    d = np.hypot(pu[:, 0] - su_xy[0], pu[:, 1] - su_xy[1])
    return bool(d.min() > radius)


def close_su_indicator(pu_xy, su_xy, radius: float) -> bool:
    """True when some co-channel SU lies strictly within ``radius`` of the PU."""
    su = np.asarray(su_xy, dtype=float).reshape(-1, 2)
    d = np.hypot(su[:, 0] - pu_xy[0], su[:, 1] - pu_xy[1])
    return bool(d.min() < radius)


def disk_coverage_fraction(center, radius: float, region: Region) -> float:
    """Fraction of a disk region's area inside the circle ``B(center, radius)``."""
    if region.shape != "disk":
        raise InvalidConfigError("coverage fraction is implemented for disk regions only")
    R = region.size
    d = math.dist(center, region.center)
    r = radius
    if d + r <= R:
        area = math.pi * r * r
    elif d >= R + r:
        area = 0.0
    elif d + R <= r:
        area = math.pi * R * R
    else:
        a = r * r * math.acos(max(-1.0, min(1.0, (d * d + r * r - R * R) / (2 * d * r))))
        b = R * R * math.acos(max(-1.0, min(1.0, (d * d + R * R - r * r) / (2 * d * R))))
        c = 0.5 * math.sqrt(max(0.0, (-d + r + R) * (d + r - R) * (d - r + R) * (d + r + R)))
        area = a + b - c
    return area / region.area


def _pf_kernel(trials, cfg: BoundConfig, L: int, radius: float, estimator: str) -> np.ndarray:
    out = np.empty(len(trials))
    for i, t in enumerate(trials):
        s = _rng.trial_seed(cfg.seed, t)
        su = cfg.region.sample(_rng.stream(s, _rng.SU_STREAM, 0), 1)[0]
        if estimator == "conditional":
            frac = disk_coverage_fraction(su, radius, cfg.region)
            out[i] = math.exp(L * math.log1p(-frac)) if frac < 1 else 0.0
        else:
            pus = cfg.region.sample(_rng.stream(s, _rng.PU_STREAM, 0), L)
            out[i] = far_pu_indicator(su, pus, radius)
    return out


def estimate_pf(config: BoundConfig, threshold: float | None = None, estimator: str = "indicator") -> EstimateSeries:
    """Probability that an SU has no PU within ``L**(-(1-eps)/2)``.

    ``estimator='indicator'`` counts trials (Wilson interval).
    ``estimator='conditional'`` averages the exact conditional probability
    ``(1 - |B(su, r) & region| / |region|)**L`` over random SU positions
    (disk regions only); it resolves values far below ``1 / trials``.
    """
    if estimator not in ("indicator", "conditional"):
        raise InvalidConfigError(f"unknown estimator {estimator!r}")
    points = []
    for L in config.L_values:
        N, B, M = config.dims_for(L)
        radius = pf_threshold(L, config.epsilon) if threshold is None else threshold
        vals = run_trials(_pf_kernel, config.trials, (config, L, radius, estimator), config.workers)
        points.append(_point(L, N * B * M, N * B, vals, analytic_pf_bound(L, config.epsilon),
                             "wilson" if estimator == "indicator" else "normal"))
    return EstimateSeries("P_f", points)


def _pc_kernel(trials, cfg: BoundConfig, dims, radius: float, placement: str, cochannel: str) -> np.ndarray:
    N, B, M = dims
    out = np.empty(len(trials))
    for i, t in enumerate(trials):
        s = _rng.trial_seed(cfg.seed, t)
        if placement == "center":
            pu = np.asarray(cfg.region.center)
        else:
            pu = cfg.region.sample(_rng.stream(s, _rng.PU_STREAM, 0), 1)[0]
        sus = cfg.region.sample(_rng.stream(s, _rng.SU_STREAM, 0), N * B * M).reshape(N, B, M, 2)
        group = sus[:, :, 0, :] if cochannel == "subband" else sus
        out[i] = close_su_indicator(pu, group, radius)
    return out


def estimate_pc(config: BoundConfig, threshold: float | None = None, pu_placement: str = "uniform",
                cochannel: str = "subband") -> EstimateSeries:
    """Probability that a PU has a co-channel SU within ``K_bar**(-(1+eps)/2)``.

    The co-channel set is the ``N*B`` SUs on subband 0 under the identity
    assignment; ``cochannel='all'`` uses every SU instead (``K_bar = K``).
    The ``analytic_bound`` column holds ``1 - analytic_pc_bound``, the upper
    bound on this probability for a PU at the region center.
    """
    if pu_placement not in ("uniform", "center"):
        raise InvalidConfigError(f"unknown PU placement {pu_placement!r}")
    if cochannel not in ("subband", "all"):
        raise InvalidConfigError(f"unknown co-channel mode {cochannel!r}")
    points = []
    for L in config.L_values:
        dims = config.dims_for(L)
        K = dims[0] * dims[1] * dims[2]
        K_bar = dims[0] * dims[1] if cochannel == "subband" else K
        radius = pc_threshold(K_bar, config.epsilon) if threshold is None else threshold
        vals = run_trials(_pc_kernel, config.trials, (config, dims, radius, pu_placement, cochannel),
                          config.workers)
        points.append(_point(L, K, K_bar, vals, 1.0 - analytic_pc_bound(K_bar, config.epsilon)))
    return EstimateSeries("P_c", points)


def satisfied_fraction(scenario: Scenario, powers: np.ndarray, C: float, alpha: float, I_th: float,
                       block: int = 2_000_000) -> float:
    """Fraction of (PU, subband) constraints met under the identity assignment.

    ``powers`` has shape (N, B, M); SU ``(n, b, slot)`` transmits on subband ``slot``.
    """
    N, B, M = scenario.dims
    pus = scenario.pu_positions
    L = len(pus)
    per = max(1, block // max(1, N * B * L))
    ok = 0
    for m0 in range(0, M, per):
        ms = range(m0, min(M, m0 + per))
        sus = scenario.su_positions[:, :, m0:ms.stop, :].transpose(2, 0, 1, 3).reshape(-1, 2)
        p = powers[:, :, m0:ms.stop].transpose(2, 0, 1).reshape(len(ms), N * B)
        r2 = cdist(sus, pus, "sqeuclidean").reshape(len(ms), N * B, L)
        gain = C / r2 ** (alpha / 2)
        interference = np.einsum("mk,mkl->ml", p, gain)
        ok += int(np.count_nonzero(interference <= I_th * (1 + C1_RELATIVE_SLACK)))
    return ok / (L * M)


def theorem_powers(scenario: Scenario, C: float, alpha: float, I_th: float, lambda_: float,
                   p_max: float = math.inf) -> np.ndarray:
    """Every SU at ``theorem1_power_cap`` of its nearest-PU gain, shape (N, B, M)."""
    from .scenario import nearest_pu_distances

    d, _ = nearest_pu_distances(scenario)
    F_k = C / d**alpha
    return np.asarray(theorem1_power_cap(F_k, I_th, lambda_, p_max)).reshape(scenario.dims)


def _ps_kernel(trials, cfg: BoundConfig, L: int, dims, include_pmax: bool, zero_power: bool) -> np.ndarray:
    N, B, M = dims
    lam = L / (N * B * M)
    out = np.empty(len(trials))
    for i, t in enumerate(trials):
        sc = generate_scenario(dims, L, cfg.region, _rng.trial_seed(cfg.seed, t))
        if zero_power:
            P = np.zeros(dims)
        else:
            P = theorem_powers(sc, cfg.C, cfg.alpha, cfg.I_th, lam, cfg.p_max if include_pmax else math.inf)
        out[i] = satisfied_fraction(sc, P, cfg.C, cfg.alpha, cfg.I_th)
    return out


def estimate_ps(config: BoundConfig, include_pmax: bool = False, zero_power: bool = False) -> EstimateSeries:
    """Average fraction of satisfied interference constraints at the peak-power caps.

    Caps use ``lambda = L / K`` of each point.  The interval is a Wilson
    interval on the trial-averaged fraction with ``n = trials``.
    """
    points = []
    for L in config.L_values:
        dims = config.dims_for(L)
        vals = run_trials(_ps_kernel, config.trials, (config, L, dims, include_pmax, zero_power),
                          config.workers, chunk=50)
        points.append(_point(L, dims[0] * dims[1] * dims[2], dims[0] * dims[1], vals))
    return EstimateSeries("P_s", points)


# --------------------------------------------------------------------------
# closed forms


def analytic_pf_log_bound(L: int, epsilon: float) -> float:
    """Natural log of ``(1 - 1/(4 L**(1-eps)))**L``."""
    x = 1.0 / (4.0 * L ** (1.0 - epsilon))
    return L * math.log1p(-x) if x < 1 else -math.inf


def analytic_pf_bound(L: int, epsilon: float) -> float:
    """Upper bound on ``P_f`` for an SU on the border of a unit disk."""
    return math.exp(analytic_pf_log_bound(L, epsilon))


def analytic_pc_bound(K_bar: int, epsilon: float) -> float:
    """Lower bound ``(1 - K_bar**-(1+eps))**K_bar`` on ``p(d_PU > threshold)`` at the disk center."""
    x = K_bar ** -(1.0 + epsilon)
    return math.exp(K_bar * math.log1p(-x)) if x < 1 else 0.0


def residual_interference_bound(I_th: float, K_bar: int, L: int, epsilon: float, alpha: float = 2.0) -> float:
    """``I_th (K_bar - 1) K_bar**((1+eps) a/2) / L**((1-eps) a/2)``; ``alpha=2`` is the free-space form."""
    h = alpha / 2.0
    return I_th * (K_bar - 1) * K_bar ** ((1 + epsilon) * h) / L ** ((1 - epsilon) * h)


def theorem_epsilon_limit(beta: float) -> float:
    """Upper end of the epsilon range ``2(1 - beta) / (1 + beta/2)``."""
    return 2 * (1 - beta) / (1 + beta / 2)


@dataclass
class ResidualReport:
    """Outcome of :func:`verify_residual_bound` for one scenario.

    ``cases`` holds ``(subband, su, lhs, bound)`` for every applicable
    reference SU.
    """

    applicable: int = 0
    violations: int = 0
    cases: list = field(default_factory=list)

    @property
    def status(self) -> str:
        if self.applicable == 0:
            return "not applicable"
        return "violated" if self.violations else "holds"

    @property
    def min_margin(self) -> float:
        return min((b - l for _, _, l, b in self.cases), default=math.inf)


def verify_residual_bound(scenario: Scenario, channels: ChannelRealization, epsilon: float,
                          I_th: float = 1.0, alpha: float = 2.0, slot_to_subband=None,
                          rtol: float = 1e-12) -> ResidualReport:
    """Check the residual-interference bound wherever its geometric events hold.

    For each subband and each co-channel SU ``k`` with closest PU ``l``:
    event E1 requires every co-channel SU to have its closest PU within
    ``L**(-(1-eps)/2)``; event E2 requires every other co-channel SU to be
    farther than ``K_bar**(-(1+eps)/2)`` from ``l``.  When both hold, the
    interference the others cause at ``l`` with the ``I_th / F`` nearest-PU caps must not
    exceed :func:`residual_interference_bound`.
    """
    N, B, M = scenario.dims
    L = scenario.L
    K_bar = N * B
    F = channels.F_det.reshape(N * B * M, L)
    nearest = np.argmax(F, axis=1)
    F_near = F[np.arange(len(F)), nearest]
    pu = scenario.pu_positions
    su = scenario.su_flat
    d_su = np.hypot(*(su - pu[nearest]).T)
    bound = residual_interference_bound(I_th, K_bar, L, epsilon, alpha)
    r_far = pc_threshold(K_bar, epsilon)
    caps = lemma1_power_cap(F_near, I_th)
    report = ResidualReport()
    for m, group in enumerate(cochannel_sets(scenario.dims, slot_to_subband)):
        if not np.all(d_su[group] < pf_threshold(L, epsilon)):
            continue
        for k in group:
            l = nearest[k]
            others = group[group != k]
            r = np.hypot(*(su[others] - pu[l]).T)
            if not np.all(r > r_far):
                continue
            lhs = math.fsum((caps[others] * F[others, l]).tolist())
            report.applicable += 1
            report.cases.append((m, int(k), lhs, bound))
            if lhs > bound * (1 + rtol):
                report.violations += 1
    return report


def residual_sweep(trials: int, L: int, beta: float, epsilon: float, N: int, B: int, seed: int,
                   region: Region | None = None, workers: int = 1) -> dict:
    """Run :func:`verify_residual_bound` on ``trials`` random scenarios with ``K = floor(L**beta)``."""
    K = scaling_from(L, beta).K
    dims = (N, B, max(1, round(K / (N * B))))
    region = region or Region.disk()
    res = run_trials(_residual_kernel, trials, (L, dims, epsilon, seed, region), workers, chunk=250)
    return {"dims": dims, "trials": trials, "applicable_trials": int(np.count_nonzero(res[:, 0])),
            "applicable_cases": int(res[:, 0].sum()), "violations": int(res[:, 1].sum())}


def _residual_kernel(trials, L, dims, epsilon, seed, region) -> np.ndarray:
    from .channel import ChannelParams, sample_channels

    params = ChannelParams()
    out = np.zeros((len(trials), 2))
    for i, t in enumerate(trials):
        s = _rng.trial_seed(seed, t)
        sc = generate_scenario(dims, L, region, s)
        rep = verify_residual_bound(sc, sample_channels(sc, params, s), epsilon)
        out[i] = rep.applicable, rep.violations
    return out
