"""Channel gains: SU-to-PU path loss with additive shadowing, SU-to-beam gains."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from . import rng as _rng
from .errors import CoincidentNodesError, InvalidConfigError
from .scenario import Region, Scenario


@dataclass(frozen=True, eq=False)
class BeamGainModel:
    """Gaussian beam pattern: ``g0 * exp(-|x - c|^2 / theta^2)``.

    ``beam_centers`` has shape (N, B, 2).
    """

    g0: float
    theta: float
    beam_centers: np.ndarray

    def __post_init__(self):
        if not self.g0 > 0 or not self.theta > 0:
            raise InvalidConfigError("beam model needs g0 > 0 and theta > 0")
        c = np.asarray(self.beam_centers, dtype=float)
        if c.ndim != 3 or c.shape[-1] != 2:
            raise InvalidConfigError(f"beam_centers must have shape (N, B, 2), got {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "beam_centers", c)

    @classmethod
    def grid(cls, region: Region, N: int, B: int, g0: float = 1.0, theta: float = 0.3) -> "BeamGainModel":
        """Beams at the cell centers of a near-square grid over the region's bounding box.

        Every operator uses the same layout (row-major beam order).
        """
        cols = math.ceil(math.sqrt(B))
        rows = math.ceil(B / cols)
        half = region.size if region.shape == "disk" else region.size / 2
        cx, cy = region.center
        xs = cx - half + (np.arange(cols) + 0.5) * (2 * half / cols)
        ys = cy - half + (np.arange(rows) + 0.5) * (2 * half / rows)
        pts = np.array([(x, y) for y in ys for x in xs][:B])
        return cls(g0, theta, np.broadcast_to(pts, (N, B, 2)).copy())

    @property
    def shape(self) -> tuple[int, int]:
        return self.beam_centers.shape[:2]


@dataclass(frozen=True)
class ChannelParams:
    C: float = 1.0
    alpha: float = 2.0
    sigma_s: float = 0.0
    beam_model: BeamGainModel | None = None
    min_gain: float = 1e-12
    shadow_beams: bool = False

    def __post_init__(self):
        if not self.C > 0:
            raise InvalidConfigError(f"C must be positive, got {self.C}")
        if not self.alpha > 0:
            raise InvalidConfigError(f"alpha must be positive, got {self.alpha}")
        if not self.sigma_s >= 0:
            raise InvalidConfigError(f"sigma_s must be nonnegative, got {self.sigma_s}")
        if not self.min_gain > 0:
            raise InvalidConfigError(f"min_gain must be positive, got {self.min_gain}")


def expected_gain_su_to_pu(params: ChannelParams, r):
    """Deterministic path gain ``C / r**alpha``; accepts scalars or arrays."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0):
        raise CoincidentNodesError("SU-PU distance must be positive")
    g = params.C / r_arr**params.alpha
    return float(g) if g.ndim == 0 else g


def sample_gain_su_to_pu(params: ChannelParams, r, shadow_sample):
    """Shadowed gain, clamped below at ``params.min_gain``."""
    g = np.maximum(np.asarray(expected_gain_su_to_pu(params, r)) + shadow_sample, params.min_gain)
    return float(g) if g.ndim == 0 else g


def gain_su_to_beam(params: ChannelParams, su_position, operator: int, beam: int, shadow: float = 0.0) -> float:
    model = params.beam_model
    if model is None:
        raise InvalidConfigError("channel params carry no beam model")
    N, B = model.shape
    if not (0 <= operator < N and 0 <= beam < B):
        raise InvalidConfigError(f"unknown beam ({operator}, {beam})")
    c = model.beam_centers[operator, beam]
    d2 = (float(su_position[0]) - c[0]) ** 2 + (float(su_position[1]) - c[1]) ** 2
    return max(model.g0 * math.exp(-d2 / model.theta**2) + shadow, params.min_gain)


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """Gain tensors for one scenario.

    F_det: (N, Q, L) deterministic SU-to-PU gain.
    F:     (N, Q, L, M) shadowed SU-to-PU gain (a read-only broadcast of F_det
           when there is no shadowing).
    G:     (N, Q, B, M) SU-to-beam gain, beam index over the SU's own operator.
    """

    F_det: np.ndarray
    F: np.ndarray
    G: np.ndarray
    min_gain: float = 1e-12
    meta: dict = field(default_factory=dict)

    @property
    def dims(self) -> tuple[int, int, int, int]:
        N, Q, L = self.F_det.shape
        return N, Q, L, self.F.shape[-1]

    def __eq__(self, other):
        if not isinstance(other, ChannelRealization):
            return NotImplemented
        return all(np.array_equal(a, b) for a, b in
                   ((self.F_det, other.F_det), (self.F, other.F), (self.G, other.G)))

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "q", "l_or_b", "m", "kind", "value"])
        for kind, T in (("F", self.F), ("G", self.G)):
            for (n, q, j, m), v in np.ndenumerate(T):
                w.writerow([n, q, j, m, kind, repr(float(v))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


def sample_channels(scenario: Scenario, params: ChannelParams, seed: int) -> ChannelRealization:
    """Draw F and G for ``scenario``.

    Raises :class:`CoincidentNodesError` when an SU sits on a PU; callers
    should redraw the scenario.
    """
    N, B, M = scenario.dims
    Q = B * M
    su = scenario.su_flat
    r = cdist(su, scenario.pu_positions)
    if np.any(r == 0):
        raise CoincidentNodesError("an SU coincides with a PU; redraw the scenario")
    F_det = np.maximum(params.C / r**params.alpha, params.min_gain).reshape(N, Q, scenario.L)
    if params.sigma_s > 0:
        s = _rng.stream(seed, _rng.SHADOW_STREAM).normal(0.0, params.sigma_s, size=(N, Q, scenario.L, M))
        F = np.maximum(F_det[..., None] + s, params.min_gain)
    else:
        F = np.broadcast_to(F_det[..., None], (N, Q, scenario.L, M))

    model = params.beam_model or BeamGainModel.grid(scenario.region, N, B)
    if model.shape != (N, B):
        raise InvalidConfigError(f"beam model has shape {model.shape}, scenario needs {(N, B)}")
    pos = su.reshape(N, Q, 1, 2)
    d2 = np.sum((pos - model.beam_centers[:, None, :, :]) ** 2, axis=-1)
    G_det = model.g0 * np.exp(-d2 / model.theta**2)
    if params.shadow_beams and params.sigma_s > 0:
        s = _rng.stream(seed, _rng.BEAM_SHADOW_STREAM).normal(0.0, params.sigma_s, size=(N, Q, B, M))
        G = np.maximum(G_det[..., None] + s, params.min_gain)
    else:
        G = np.broadcast_to(np.maximum(G_det, params.min_gain)[..., None], (N, Q, B, M))
    F_det.setflags(write=False)
    for T in (F, G):
        if T.flags.writeable:
            T.setflags(write=False)
    return ChannelRealization(F_det=F_det, F=F, G=G, min_gain=params.min_gain,
                              meta={"subband_independent": not (params.sigma_s > 0)})
