"""Run configuration: flat ``key = value`` files plus command-line overrides."""
from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

from .errors import InvalidConfigError

EXPERIMENTS = ("lemma3", "lemma4", "theorem1", "compare_solvers", "oracle_regression")

_LEMMA_L = (100, 316, 1000, 3162, 10000)

# Experiment-dependent defaults; applied where the user gave no value.
_DEFAULTS = {
    "lemma3": dict(N=5, B=2, M=None, L=_LEMMA_L, lambda_=10.0, trials=10_000, region="disk"),
    "lemma4": dict(N=5, B=2, M=None, L=_LEMMA_L, lambda_=10.0, trials=10_000, region="disk"),
    "theorem1": dict(N=5, B=2, M=None, L=_LEMMA_L, lambda_=10.0, trials=10_000, region="disk"),
    "compare_solvers": dict(N=5, B=2, M=3, L=(50, 100, 200, 400), lambda_=None, trials=200,
                            region="square", g0=1e10),
    "oracle_regression": dict(N=2, B=1, M=2, L=(3,), lambda_=None, trials=5, region="square"),
}


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    N: int = 5
    B: int = 2
    M: int | None = None
    L: tuple[int, ...] = _LEMMA_L
    lambda_: float | None = 10.0
    beta: float | None = None
    epsilon: float = 0.5
    trials: int = 10_000
    seed: int = 0
    C: float = 1.0
    alpha: float = 2.0
    sigma_s: float = 0.0
    g0: float = 1.0
    theta: float = 0.3
    I_th: float = 1.0
    p_max: float = 10.0
    region: str = "disk"
    region_size: float = 1.0
    levels: int = 8
    pf_estimator: str = "indicator"
    workers: int = 1
    out: str = "results"

    def __post_init__(self):
        validate(self)

    def emit(self) -> str:
        """Effective configuration as ``key = value`` lines (parseable by :func:`loads`)."""
        return "".join(f"{_key_name(f.name)} = {_fmt(getattr(self, f.name))}\n" for f in fields(self))


def _key_name(attr: str) -> str:
    return "lambda" if attr == "lambda_" else attr


def _attr_name(key: str) -> str:
    return "lambda_" if key == "lambda" else key


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, tuple):
        return ",".join(str(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


_TYPES = {
    "experiment": str, "N": int, "B": int, "M": "opt_int", "L": "int_list", "lambda_": "opt_float",
    "beta": "opt_float", "epsilon": float, "trials": int, "seed": int, "C": float, "alpha": float,
    "sigma_s": float, "g0": float, "theta": float, "I_th": float, "p_max": float, "region": str,
    "region_size": float, "levels": int, "pf_estimator": str, "workers": int, "out": str,
}


def _convert(key: str, raw):
    kind = _TYPES[key]
    if not isinstance(raw, str):
        return tuple(int(x) for x in raw) if kind == "int_list" else raw
    text = raw.strip()
    try:
        if kind == "int_list":
            return tuple(int(float(x)) for x in text.replace(" ", ",").split(",") if x)
        if kind in ("opt_int", "opt_float"):
            if text.lower() == "none":
                return None
            return int(text) if kind == "opt_int" else float(text)
        if kind is int:
            value = float(text)
            if value != int(value):
                raise ValueError
            return int(value)
        if kind is float:
            return float(text)
        return text
    except ValueError:
        raise InvalidConfigError(f"{_key_name(key)}: cannot parse {raw!r} as {kind if isinstance(kind, str) else kind.__name__}") from None


def validate(cfg: RunConfig) -> None:
    def bad(key, msg):
        raise InvalidConfigError(f"{key}: {msg}")

    if cfg.experiment not in EXPERIMENTS:
        bad("experiment", f"must be one of {', '.join(EXPERIMENTS)}")
    for key in ("N", "B", "trials", "workers"):
        if getattr(cfg, key) < 1:
            bad(key, "must be >= 1")
    if cfg.M is not None and cfg.M < 1:
        bad("M", "must be >= 1")
    if not cfg.L or any(L < 1 for L in cfg.L):
        bad("L", "needs at least one value, all >= 1")
    if not 0 < cfg.epsilon < 1:
        bad("epsilon", f"must lie in the open interval (0, 1) required by the distance bounds, got {cfg.epsilon}")
    if cfg.lambda_ is not None and cfg.beta is not None:
        bad("lambda", "set lambda or beta, not both")
    if cfg.lambda_ is not None and not cfg.lambda_ > 0:
        bad("lambda", "must be positive")
    if cfg.beta is not None and not 0 < cfg.beta < 1:
        bad("beta", "must lie in (0, 1)")
    if cfg.experiment in ("lemma3", "lemma4", "theorem1"):
        if cfg.lambda_ is None and cfg.beta is None:
            bad("lambda", "lemma experiments need lambda or beta")
        if cfg.trials < 100:
            bad("trials", "probability estimates need >= 100 trials")
    for key in ("C", "alpha", "theta", "g0", "I_th", "p_max", "region_size"):
        if not getattr(cfg, key) > 0:
            bad(key, "must be positive")
    if not cfg.sigma_s >= 0:
        bad("sigma_s", "must be nonnegative")
    if cfg.region not in ("disk", "square"):
        bad("region", "must be 'disk' or 'square'")
    if cfg.pf_estimator not in ("indicator", "conditional"):
        bad("pf_estimator", "must be 'indicator' or 'conditional'")
    if not 2 <= cfg.levels <= 12:
        bad("levels", "must lie in [2, 12]")
    if cfg.experiment == "oracle_regression" and (cfg.N * cfg.B > 3 or (cfg.M or 1) > 3):
        bad("N", "oracle instances need N*B <= 3 and M <= 3")
    if cfg.experiment in ("compare_solvers", "oracle_regression") and cfg.M is None:
        bad("M", "solver experiments need an explicit M")
    if cfg.experiment == "compare_solvers" and min(cfg.L) < cfg.N * cfg.B * cfg.M:
        bad("L", f"peak-power caps need L >= K = N*B*M = {cfg.N * cfg.B * cfg.M}")


def loads(text: str) -> dict:
    """Parse ``key = value`` lines into raw strings; ``#`` starts a comment."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise InvalidConfigError(f"line {lineno}: expected 'key = value'")
        raw[key.strip()] = value.strip()
    return raw


def parse_config(path: str | Path | None = None, overrides: dict | None = None,
                 experiment: str | None = None) -> RunConfig:
    """Build a validated :class:`RunConfig`; ``overrides`` win over file values."""
    raw: dict = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise InvalidConfigError(f"config: file not found: {p}")
        raw.update(loads(p.read_text(encoding="utf-8")))
    for k, v in (overrides or {}).items():
        if v is not None:
            raw[k] = v
    if experiment is not None:
        raw["experiment"] = experiment
    values = {}
    for key, value in raw.items():
        attr = _attr_name(key)
        if attr not in _TYPES:
            raise InvalidConfigError(f"{key}: unknown configuration key")
        values[attr] = _convert(attr, value)
    exp = values.get("experiment")
    if exp is None:
        raise InvalidConfigError("experiment: missing")
    if exp not in EXPERIMENTS:
        raise InvalidConfigError(f"experiment: must be one of {', '.join(EXPERIMENTS)}")
    for attr, default in _DEFAULTS[exp].items():
        values.setdefault(attr, default)
    if "beta" in values and values["beta"] is not None and "lambda_" not in raw and "lambda" not in raw:
        values["lambda_"] = None
    return RunConfig(**values)


def with_overrides(cfg: RunConfig, **changes) -> RunConfig:
    return replace(cfg, **changes)
