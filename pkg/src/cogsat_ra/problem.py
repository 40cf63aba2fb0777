"""The sum-rate problem: variables, interference, rates and constraint checks.

Shapes used throughout (0-based indices):

* ``A``, ``P``: (N, Q, M) with ``Q = B*M``; SU ``q`` of an operator sits in
  beam ``q // M``.
* ``F``: (N, Q, L, M), or the subband-independent ``F_det`` of shape (N, Q, L).
* ``G``: (N, Q, B, M), gain from SU ``q`` of operator ``n`` to that
  operator's beam ``b``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidConfigError, InvalidInputError

C1_RELATIVE_SLACK = 1e-9


def beam_of(Q: int, M: int) -> np.ndarray:
    """Beam index of every in-operator SU index ``q``."""
    return np.arange(Q) // M


def _assignment_violations(A: np.ndarray, B: int) -> dict[str, float]:
    N, Q, M = A.shape
    if Q != B * M:
        raise InvalidInputError(f"assignment has Q={Q}, expected B*M={B * M}")
    c2 = float(np.max(np.minimum(np.abs(A), np.abs(A - 1)), initial=0.0))
    per_beam = A.reshape(N, B, M, M).sum(axis=2)  # (N, B, M) SUs of a beam on subband m
    c4 = float(np.max(np.abs(per_beam - 1), initial=0.0))
    c5 = float(np.max(np.abs(A.sum(axis=2) - 1), initial=0.0))
    return {"C2": c2, "C4": c4, "C5": c5}


@dataclass(frozen=True, eq=False)
class Assignment:
    """Binary subband assignment; each beam's block is an M x M permutation matrix."""

    A: np.ndarray
    B: int

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        if A.ndim != 3:
            raise InvalidInputError(f"assignment must be 3-D (N, Q, M), got shape {A.shape}")
        bad = {k: v for k, v in _assignment_violations(A, self.B).items() if v > 0}
        if bad:
            raise InvalidInputError(f"invalid assignment, violated: {sorted(bad)}")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)

    @classmethod
    def from_permutations(cls, perms) -> "Assignment":
        """Build from ``perms[n, b, slot] = subband`` (shape (N, B, M))."""
        perms = np.asarray(perms, dtype=int)
        N, B, M = perms.shape
        A = np.zeros((N, B * M, M))
        n_idx, b_idx, s_idx = np.indices(perms.shape)
        A[n_idx, b_idx * M + s_idx, perms] = 1.0
        return cls(A, B)

    @classmethod
    def identity(cls, N: int, B: int, M: int) -> "Assignment":
        return cls.from_permutations(np.broadcast_to(np.arange(M), (N, B, M)))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.A.shape

    @property
    def M(self) -> int:
        return self.A.shape[2]

    def subband_of(self) -> np.ndarray:
        """Subband of every SU, shape (N, Q)."""
        return np.argmax(self.A, axis=2)

    def permutations(self) -> np.ndarray:
        N, Q, M = self.A.shape
        return self.subband_of().reshape(N, self.B, M)

    def __eq__(self, other):
        return isinstance(other, Assignment) and self.B == other.B and np.array_equal(self.A, other.A)


@dataclass(frozen=True, eq=False)
class PowerAllocation:
    P: np.ndarray
    p_max: float = math.inf

    def __post_init__(self):
        P = np.array(self.P, dtype=float)
        if np.any(P < 0) or np.any(P > self.p_max):
            raise InvalidInputError("powers must lie in [0, p_max]")
        P.setflags(write=False)
        object.__setattr__(self, "P", P)


@dataclass(frozen=True, eq=False)
class Thresholds:
    """Interference-temperature thresholds, shape (L, M)."""

    I_th: np.ndarray

    def __post_init__(self):
        I = np.array(self.I_th, dtype=float)
        if I.ndim != 2:
            raise InvalidInputError(f"thresholds must have shape (L, M), got {I.shape}")
        if not np.all(I > 0):
            raise InvalidConfigError("interference thresholds must be positive")
        I.setflags(write=False)
        object.__setattr__(self, "I_th", I)

    @classmethod
    def uniform(cls, value: float, L: int, M: int) -> "Thresholds":
        return cls(np.full((L, M), float(value)))

    def split(self, N: int) -> "Thresholds":
        return Thresholds(self.I_th / N)


@dataclass(frozen=True)
class FeasibilityReport:
    """Per-constraint status; ``worst`` holds the largest violation of each constraint."""

    c1: bool
    c2: bool
    c3: bool
    c4: bool
    c5: bool
    worst: dict
    c1_fraction: float

    @property
    def feasible(self) -> bool:
        return self.c1 and self.c2 and self.c3 and self.c4 and self.c5


def _A(A) -> np.ndarray:
    return A.A if isinstance(A, Assignment) else np.asarray(A, dtype=float)


def _P(P) -> np.ndarray:
    return P.P if isinstance(P, PowerAllocation) else np.asarray(P, dtype=float)


def _gain_lm(F: np.ndarray, M: int) -> np.ndarray:
    F = np.asarray(F, dtype=float)
    if F.ndim == 3:
        return np.broadcast_to(F[..., None], F.shape + (M,))
    return F


def interference(A, P, F) -> np.ndarray:
    """Aggregate SU interference at every PU and subband, shape (L, M)."""
    A, P = _A(A), _P(P)
    if A.shape != P.shape:
        raise InvalidInputError(f"A has shape {A.shape} but P has {P.shape}")
    F = np.asarray(F, dtype=float)
    if F.shape[:2] != A.shape[:2] or (F.ndim == 4 and F.shape[3] != A.shape[2]):
        raise InvalidInputError(f"gain tensor shape {F.shape} does not match {A.shape}")
    if F.ndim == 3:
        return np.einsum("nqm,nql->lm", A * P, F)
    return np.einsum("nqm,nqlm->lm", A * P, F)


def interference_at_pu(A, P, F, l: int, m: int) -> float:
    A, P = _A(A), _P(P)
    if A.shape != P.shape:
        raise InvalidInputError(f"A has shape {A.shape} but P has {P.shape}")
    F = _gain_lm(F, A.shape[2])
    if F.shape[:2] != A.shape[:2]:
        raise InvalidInputError(f"gain tensor shape {F.shape} does not match {A.shape}")
    return float(np.sum(A[:, :, m] * F[:, :, l, m] * P[:, :, m]))


def intra_sat_interference(A, P, G, n: int, b: int, q: int, m: int) -> float:
    """Interference at beam ``b`` of satellite ``n`` on subband ``m`` seen by SU ``q``.

    Only operator ``n``'s own SUs contribute.
    """
    A, P, G = _A(A), _P(P), np.asarray(G, dtype=float)
    if G.shape[:2] != A.shape[:2] or G.shape[3] != A.shape[2]:
        raise InvalidInputError(f"G has shape {G.shape}, incompatible with {A.shape}")
    terms = A[n, :, m] * G[n, :, b, m] * P[n, :, m]
    return float(np.sum(np.delete(terms, q)))


def su_rates(A, P, G, n: int) -> np.ndarray:
    """Per-SU, per-subband rate terms of operator ``n``, shape (Q, M)."""
    A, P, G = _A(A), _P(P), np.asarray(G, dtype=float)
    N, Q, M = A.shape
    if G.shape != (N, Q, G.shape[2], M):
        raise InvalidInputError(f"G has shape {G.shape}, incompatible with {A.shape}")
    B = G.shape[2]
    if Q != B * M:
        raise InvalidInputError(f"Q={Q} is not B*M={B * M}")
    own = beam_of(Q, M)
    # rx[q, i, m]: power of SU i on subband m as received by the beam serving q
    rx = A[n][None, :, :] * G[n][:, own, :].transpose(1, 0, 2) * P[n][None, :, :]
    signal = np.einsum("qqm->qm", rx)
    J = _offdiag_sum(rx)
    return A[n] * np.log2(1.0 + signal / (1.0 + J))


def _offdiag_sum(rx: np.ndarray) -> np.ndarray:
    Q = rx.shape[0]
    mask = ~np.eye(Q, dtype=bool)
    return np.einsum("qim,qi->qm", rx, mask)


def operator_rate(A, P, G, n: int) -> float:
    """Sum-rate of operator ``n`` in bit/s/Hz, unit noise power."""
    return float(np.sum(su_rates(A, P, G, n)))


def total_rate(A, P, G) -> float:
    N = _A(A).shape[0]
    return math.fsum(operator_rate(A, P, G, n) for n in range(N))


def check_feasibility(A, P, F_det, thresholds: Thresholds, p_max: float = math.inf,
                      B: int | None = None, F=None) -> FeasibilityReport:
    """Evaluate C1 to C5.

    C1 uses ``F_det`` unless a realized gain tensor ``F`` is passed
    (strict mode).  A relative slack of 1e-9 absorbs summation noise.
    """
    A_arr, P_arr = _A(A), _P(P)
    if B is None:
        if not isinstance(A, Assignment):
            raise InvalidInputError("B is required when A is a raw array")
        B = A.B
    I = interference(A_arr, P_arr, F_det if F is None else F)
    I_th = thresholds.I_th
    if I.shape != I_th.shape:
        raise InvalidInputError(f"thresholds shape {I_th.shape} does not match {I.shape}")
    ok = I <= I_th * (1 + C1_RELATIVE_SLACK)
    worst = _assignment_violations(A_arr, B)
    worst["C1"] = float(max(np.max(I - I_th), 0.0))
    worst["C3"] = float(max(np.max(P_arr - p_max, initial=0.0), np.max(-P_arr, initial=0.0), 0.0))
    return FeasibilityReport(
        c1=bool(np.all(ok)), c2=worst["C2"] == 0, c3=worst["C3"] == 0,
        c4=worst["C4"] == 0, c5=worst["C5"] == 0, worst=worst,
        c1_fraction=float(np.mean(ok)),
    )


def lemma1_power_cap(F_k, I_th):
    """Largest power an SU can use without exceeding ``I_th`` at its closest PU."""
    F = np.asarray(F_k, dtype=float)
    if np.any(F <= 0):
        raise InvalidInputError("gain must be positive")
    cap = np.asarray(I_th, dtype=float) / F
    return float(cap) if cap.ndim == 0 else cap


def theorem1_power_cap(F_k, I_th, lambda_, p_max=math.inf):
    """Peak-power cap ``min(I_th / F_k * (1 - 1/lambda), p_max)``.

    ``lambda_ = inf`` gives the asymptotic cap ``min(I_th / F_k, p_max)``.
    """
    if not lambda_ >= 1:
        raise InvalidConfigError(f"lambda must be >= 1, got {lambda_}")
    cap = np.minimum(np.asarray(lemma1_power_cap(F_k, I_th)) * (1.0 - 1.0 / lambda_), p_max)
    return float(cap) if cap.ndim == 0 else cap


def solution_to_csv(A, P, path=None) -> str:
    A, P = _A(A), _P(P)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "q", "m", "assigned", "power"])
    for (n, q, m), a in np.ndenumerate(A):
        w.writerow([n, q, m, int(a), repr(float(P[n, q, m]))])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def solution_from_csv(text: str, B: int) -> tuple[Assignment, np.ndarray]:
    rows = list(csv.DictReader(line for line in text.splitlines() if line and not line.startswith("#")))
    shape = tuple(max(int(r[k]) for r in rows) + 1 for k in ("n", "q", "m"))
    A = np.zeros(shape)
    P = np.zeros(shape)
    for r in rows:
        idx = (int(r["n"]), int(r["q"]), int(r["m"]))
        A[idx] = int(r["assigned"])
        P[idx] = float(r["power"])
    return Assignment(A, B), P


@dataclass(frozen=True, eq=False)
class Problem:
    """One instance of the constrained sum-rate problem.

    ``lambda_`` is the asymptotic index used by the peak-power caps; ``None``
    means ``L / K`` of the instance.
    """

    G: np.ndarray
    F_det: np.ndarray
    thresholds: Thresholds
    p_max: float = math.inf
    lambda_: float | None = None
    F: np.ndarray | None = None

    def __post_init__(self):
        N, Q, B, M = np.shape(self.G)
        if np.shape(self.F_det)[:2] != (N, Q) or Q != B * M:
            raise InvalidInputError("G and F_det shapes are inconsistent")
        if self.thresholds.I_th.shape != (np.shape(self.F_det)[2], M):
            raise InvalidInputError("thresholds must have shape (L, M)")

    @classmethod
    def from_channels(cls, channels, I_th: float | np.ndarray, p_max: float = math.inf,
                      lambda_: float | None = None) -> "Problem":
        N, Q, L, M = channels.dims
        th = Thresholds.uniform(I_th, L, M) if np.ndim(I_th) == 0 else Thresholds(I_th)
        return cls(G=channels.G, F_det=channels.F_det, thresholds=th, p_max=p_max,
                   lambda_=lambda_, F=channels.F)

    @property
    def dims(self) -> tuple[int, int, int]:
        N, Q, B, M = self.G.shape
        return N, B, M

    @property
    def N(self) -> int:
        return self.G.shape[0]

    @property
    def B(self) -> int:
        return self.G.shape[2]

    @property
    def M(self) -> int:
        return self.G.shape[3]

    @property
    def L(self) -> int:
        return self.F_det.shape[2]

    @property
    def K(self) -> int:
        return self.G.shape[0] * self.G.shape[1]

    @property
    def asymptotic_index(self) -> float:
        return self.L / self.K if self.lambda_ is None else self.lambda_

    def nearest_pu_gain(self) -> np.ndarray:
        """Deterministic gain from every SU to its closest PU, shape (N, Q)."""
        return self.F_det.max(axis=2)

    def feasibility(self, A, P) -> FeasibilityReport:
        return check_feasibility(A, P, self.F_det, self.thresholds, self.p_max, B=self.B)
