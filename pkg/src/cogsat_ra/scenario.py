"""Random network geometry: regions, PU/SU placement and nearest-node distances."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import mpmath
import numpy as np
from scipy.spatial import cKDTree

from . import rng as _rng
from .errors import InvalidConfigError

Dims = tuple[int, int, int]

_MAX_REDRAWS = 100


@dataclass(frozen=True)
class Region:
    """Closed disk or axis-aligned square.

    ``size`` is the radius for a disk and the side length for a square.
    """

    shape: str = "disk"
    size: float = 1.0
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.shape not in ("disk", "square"):
            raise InvalidConfigError(f"region shape must be 'disk' or 'square', got {self.shape!r}")
        if not self.size > 0:
            raise InvalidConfigError(f"region size must be positive, got {self.size}")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    @classmethod
    def disk(cls, radius: float = 1.0, center=(0.0, 0.0)) -> "Region":
        return cls("disk", radius, center)

    @classmethod
    def square(cls, side: float = 1.0, center=(0.0, 0.0)) -> "Region":
        return cls("square", side, center)

    @property
    def area(self) -> float:
        if self.shape == "disk":
            return math.pi * self.size**2
        return self.size**2

    @property
    def diameter(self) -> float:
        return 2 * self.size if self.shape == "disk" else math.sqrt(2) * self.size

    def contains(self, points) -> np.ndarray | bool:
        """Boundary-inclusive membership test for one point or an (n, 2) array."""
        p = np.asarray(points, dtype=float)
        d = p - np.asarray(self.center)
        if self.shape == "disk":
            inside = np.einsum("...i,...i->...", d, d) <= self.size**2
        else:
            inside = np.all(np.abs(d) <= self.size / 2, axis=-1)
        return bool(inside) if inside.ndim == 0 else inside

    def sample(self, gen: np.random.Generator, n: int) -> np.ndarray:
        """Draw ``n`` i.i.d. uniform points; disks use rejection from the bounding square."""
        half = self.size if self.shape == "disk" else self.size / 2
        c = np.asarray(self.center)
        if self.shape == "square":
            return c + gen.uniform(-half, half, size=(n, 2))
        out = np.empty((n, 2))
        filled = 0
        while filled < n:
            need = n - filled
            cand = gen.uniform(-half, half, size=(int(need * 1.3) + 8, 2))
            cand = cand[np.einsum("ij,ij->i", cand, cand) <= half * half][:need]
            out[filled:filled + len(cand)] = cand
            filled += len(cand)
        return out + c

    def describe(self) -> str:
        return f"{self.shape} size={self.size!r} center={self.center[0]!r},{self.center[1]!r}"

    @classmethod
    def parse(cls, text: str) -> "Region":
        """Inverse of :meth:`describe`; also accepts the short forms ``disk`` / ``square``."""
        parts = text.split()
        if not parts:
            raise InvalidConfigError("empty region description")
        kw = {}
        for token in parts[1:]:
            key, _, val = token.partition("=")
            if key == "size":
                kw["size"] = float(val)
            elif key == "center":
                x, y = val.split(",")
                kw["center"] = (float(x), float(y))
            else:
                raise InvalidConfigError(f"unknown region field {key!r}")
        return cls(parts[0], **kw)


@dataclass(frozen=True)
class ScalingParams:
    L: int
    K: int
    K_bar: int
    beta: float | None = None

    @property
    def lambda_(self) -> float:
        return self.L / self.K

    @property
    def theorem_regime(self) -> bool:
        """Whether the co-channel count satisfies ``K_bar**2 <= K``."""
        return self.K_bar**2 <= self.K


def _floor_power(L: int, beta: float) -> int:
    with mpmath.workdps(60):
        return int(mpmath.floor(mpmath.power(mpmath.mpf(L), mpmath.mpf(beta))))


def scaling_from(L: int, beta: float, K_bar: int = 1) -> ScalingParams:
    """Scaling with ``K = floor(L**beta)``, evaluated in 60-digit arithmetic."""
    if not 0 < beta < 1:
        raise InvalidConfigError(f"beta must lie in (0, 1), got {beta}")
    if L < 1:
        raise InvalidConfigError(f"L must be >= 1, got {L}")
    K = max(1, _floor_power(int(L), beta))
    return ScalingParams(L=int(L), K=K, K_bar=K_bar, beta=beta)


def dims_for(K: int, N: int, B: int) -> Dims:
    """Dimensions (N, B, M) whose SU count N*B*M is closest to ``K`` (M >= 1)."""
    M = max(1, round(K / (N * B)))
    return (N, B, M)


def distance(p, q) -> float:
    """Euclidean distance between two 2-D points."""
    return math.hypot(float(p[0]) - float(q[0]), float(p[1]) - float(q[1]))


@dataclass(frozen=True, eq=False)
class Scenario:
    """PU and SU positions.

    ``su_positions`` has shape (N, B, M, 2): operator, beam, slot.  Flat SU
    indices run over that array in C order, so index ``(n*B + b)*M + slot``.
    Within an operator the SU index is ``q = b*M + slot``.
    """

    region: Region
    pu_positions: np.ndarray
    su_positions: np.ndarray
    scaling: ScalingParams = field(default=None)

    def __post_init__(self):
        pu = np.ascontiguousarray(self.pu_positions, dtype=float).reshape(-1, 2)
        su = np.ascontiguousarray(self.su_positions, dtype=float)
        if su.ndim != 4 or su.shape[-1] != 2:
            raise InvalidConfigError(f"su_positions must have shape (N, B, M, 2), got {su.shape}")
        pu.setflags(write=False)
        su.setflags(write=False)
        object.__setattr__(self, "pu_positions", pu)
        object.__setattr__(self, "su_positions", su)
        if self.scaling is None:
            N, B, M = su.shape[:3]
            object.__setattr__(self, "scaling", ScalingParams(L=len(pu), K=N * B * M, K_bar=N * B))

    @property
    def dims(self) -> Dims:
        N, B, M = self.su_positions.shape[:3]
        return (N, B, M)

    @property
    def L(self) -> int:
        return len(self.pu_positions)

    @property
    def K(self) -> int:
        N, B, M = self.dims
        return N * B * M

    @property
    def su_flat(self) -> np.ndarray:
        return self.su_positions.reshape(-1, 2)

    def su_index(self, n: int, b: int, slot: int) -> int:
        N, B, M = self.dims
        return (n * B + b) * M + slot

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return (self.region == other.region and self.scaling == other.scaling
                and np.array_equal(self.pu_positions, other.pu_positions)
                and np.array_equal(self.su_positions, other.su_positions))

    # CSV interchange -------------------------------------------------------------

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write(f"# region = {self.region.describe()}\n")
        N, B, M = self.dims
        buf.write(f"# dims = {N},{B},{M}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["kind", "operator", "beam", "slot", "x", "y"])
        for x, y in self.pu_positions:
            w.writerow(["pu", "", "", "", repr(float(x)), repr(float(y))])
        for n in range(N):
            for b in range(B):
                for s in range(M):
                    x, y = self.su_positions[n, b, s]
                    w.writerow(["su", n, b, s, repr(float(x)), repr(float(y))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    @classmethod
    def from_csv(cls, source) -> "Scenario":
        """Load a scenario written by :meth:`to_csv` (path or CSV text)."""
        text = source if isinstance(source, str) and "\n" in source else Path(source).read_text(encoding="utf-8")
        meta = {}
        rows = []
        for line in text.splitlines():
            if line.startswith("#"):
                key, _, val = line[1:].partition("=")
                meta[key.strip()] = val.strip()
            elif line.strip():
                rows.append(line)
        reader = csv.DictReader(rows)
        pus, sus = [], {}
        for row in reader:
            xy = (float(row["x"]), float(row["y"]))
            if row["kind"] == "pu":
                pus.append(xy)
            elif row["kind"] == "su":
                sus[(int(row["operator"]), int(row["beam"]), int(row["slot"]))] = xy
            else:
                raise InvalidConfigError(f"unknown node kind {row['kind']!r}")
        if "dims" in meta:
            N, B, M = (int(v) for v in meta["dims"].split(","))
        else:
            N, B, M = (max(k[i] for k in sus) + 1 for i in range(3))
        su = np.empty((N, B, M, 2))
        for (n, b, s), xy in sus.items():
            su[n, b, s] = xy
        if len(sus) != N * B * M:
            raise InvalidConfigError("SU rows do not cover every (operator, beam, slot)")
        region = Region.parse(meta["region"]) if "region" in meta else Region.disk()
        return cls(region, np.array(pus).reshape(-1, 2), su)


def _check_dims(dims: Sequence[int], L: int) -> Dims:
    if len(dims) != 3:
        raise InvalidConfigError(f"dims must be (N, B, M), got {dims!r}")
    N, B, M = (int(v) for v in dims)
    for name, v in (("N", N), ("B", B), ("M", M), ("L", L)):
        if v < 1:
            raise InvalidConfigError(f"{name} must be >= 1, got {v}")
    return N, B, M


def generate_scenario(dims: Sequence[int], L: int, region: Region, seed: int,
                      scaling: ScalingParams | None = None) -> Scenario:
    """Place ``L`` PUs and ``N*B*M`` SUs uniformly in ``region``.

    PUs and SUs come from separate substreams of ``seed``, so SU positions do
    not depend on ``L``.  A draw that puts an SU exactly on a PU is rejected
    and redrawn from the next attempt counter.
    """
    N, B, M = _check_dims(dims, L)
    K = N * B * M
    if scaling is None:
        scaling = ScalingParams(L=int(L), K=K, K_bar=N * B)
    for attempt in range(_MAX_REDRAWS):
        pus = region.sample(_rng.stream(seed, _rng.PU_STREAM, attempt), int(L))
        sus = region.sample(_rng.stream(seed, _rng.SU_STREAM, attempt), K)
        d, _ = cKDTree(pus).query(sus)
        if np.all(d > 0):
            return Scenario(region, pus, sus.reshape(N, B, M, 2), scaling)
    raise RuntimeError("could not draw a collision-free scenario")  # pragma: no cover


def nearest_pu_distance(scenario: Scenario, su_index: int) -> tuple[float, int]:
    """Distance from SU ``su_index`` to its closest PU, and that PU's index."""
    if scenario.L == 0:
        raise InvalidConfigError("scenario has no PUs")
    diff = scenario.pu_positions - scenario.su_flat[su_index]
    d = np.hypot(diff[:, 0], diff[:, 1])
    j = int(np.argmin(d))
    return float(d[j]), j


def nearest_pu_distances(scenario: Scenario) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-PU distance and index for every SU (flat order), via a k-d tree."""
    if scenario.L == 0:
        raise InvalidConfigError("scenario has no PUs")
    d, idx = cKDTree(scenario.pu_positions).query(scenario.su_flat)
    return np.asarray(d, dtype=float), np.asarray(idx, dtype=int)


def nearest_su_distance(scenario: Scenario, pu_index: int, cochannel_sus: Iterable[int]) -> float:
    """Distance from PU ``pu_index`` to the closest SU among ``cochannel_sus``."""
    idx = np.fromiter(cochannel_sus, dtype=int)
    if idx.size == 0:
        raise InvalidConfigError("co-channel SU set is empty")
    diff = scenario.su_flat[idx] - scenario.pu_positions[pu_index]
    return float(np.min(np.hypot(diff[:, 0], diff[:, 1])))


def cochannel_sets(dims: Sequence[int], slot_to_subband: np.ndarray | None = None) -> list[np.ndarray]:
    """Flat SU indices sharing each subband.

    ``slot_to_subband`` has shape (N, B, M) and gives the subband of every
    SU; the default identity assignment puts slot ``s`` on subband ``s``.
    """
    N, B, M = dims
    if slot_to_subband is None:
        slot_to_subband = np.broadcast_to(np.arange(M), (N, B, M))
    flat = np.asarray(slot_to_subband).reshape(-1)
    return [np.flatnonzero(flat == m) for m in range(M)]
