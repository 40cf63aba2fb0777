"""Resource-allocation solvers.

* :func:`solve_decentralized` -- per-operator optimisation under the per-SU
  peak-power caps ``min(I_th / F_k * (1 - 1/lambda), p_max)``.
* :func:`solve_equal_split` -- per-operator optimisation with every
  interference budget divided by ``N``.
* :func:`solve_centralized_oracle` -- exhaustive search on a power grid for
  tiny instances.

Both per-operator solvers see only an :class:`OperatorView`.  The operator
rate and the constraints separate over subbands once the assignment is
fixed, so a solver evaluates each (subband, co-channel tuple) pair once and
the assignment search combines the cached values.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import InvalidConfigError, OracleSizeError
from .problem import Assignment, Problem, theorem1_power_cap, total_rate, operator_rate

_INV_PHI = (math.sqrt(5) - 1) / 2
_TIE_RTOL = 1e-12

MAX_SWEEPS = 200
SWEEP_RTOL = 1e-8
GOLDEN_TOL = 1e-10
EXHAUSTIVE_MAX_M = 6
EXHAUSTIVE_MAX_COMBOS = 200_000


@dataclass(frozen=True, eq=False)
class OperatorView:
    """Everything one operator knows.

    G: (Q, B, M) gains from its SUs to its own beams.
    F_det: (Q, L) deterministic gains from its SUs to every PU.
    I_th: (L, M) thresholds.  N is the (public) operator count.
    """

    n: int
    N: int
    B: int
    M: int
    G: np.ndarray
    F_det: np.ndarray
    I_th: np.ndarray
    p_max: float
    lambda_: float

    @property
    def Q(self) -> int:
        return self.B * self.M

    @property
    def subband_independent(self) -> bool:
        return bool(np.all(self.G == self.G[..., :1]) and np.all(self.I_th == self.I_th[:, :1]))

    def nearest_pu_gain(self) -> np.ndarray:
        return self.F_det.max(axis=1)


def operator_view(problem: Problem, n: int) -> OperatorView:
    lam = problem.asymptotic_index
    return OperatorView(n=n, N=problem.N, B=problem.B, M=problem.M,
                        G=np.asarray(problem.G[n]), F_det=np.asarray(problem.F_det[n]),
                        I_th=problem.thresholds.I_th, p_max=problem.p_max, lambda_=lam)


@dataclass
class Solution:
    """Assignment and powers; per-operator solutions have a leading axis of length 1."""

    assignment: Assignment
    P: np.ndarray
    rate: float
    solver: str
    operator: int | None = None
    meta: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# scalar building blocks


def golden_section_max(f: Callable[[float], float], lo: float, hi: float, tol: float = GOLDEN_TOL):
    """Golden-section search for a maximiser of ``f`` on ``[lo, hi]``."""
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def power_best_response(objective: Callable[[float], float], cap: float, current: float | None = None,
                        monotone: bool = False, tol: float = GOLDEN_TOL) -> float:
    """Maximiser of ``objective`` over ``[0, cap]``.

    Candidates are both endpoints, the golden-section point and ``current``;
    ties go to the earlier candidate in that order, so a monotone objective
    returns an exact endpoint.
    """
    if cap <= 0:
        return 0.0
    if monotone:
        return cap
    cands = [0.0, cap]
    x, _ = golden_section_max(objective, 0.0, cap, tol)
    cands.append(x)
    if current is not None and 0.0 <= current <= cap:
        cands.append(current)
    best, fbest = cands[0], objective(cands[0])
    for x in cands[1:]:
        fx = objective(x)
        if fx > fbest:
            best, fbest = x, fx
    return best


def assignment_search(rate_evaluator: Callable[[np.ndarray], float], B: int, M: int,
                      mode: str = "auto") -> tuple[np.ndarray, float]:
    """Per-beam permutations maximising ``rate_evaluator``.

    ``rate_evaluator`` takes ``perms`` of shape (B, M), ``perms[b, slot] =
    subband``.  ``exhaustive`` enumerates in lexicographic order and keeps the
    first maximiser; ``local`` starts from the identity and applies improving
    within-beam 2-swaps until none is left.  ``auto`` is exhaustive for
    ``M <= 6`` unless the joint enumeration exceeds 200k candidates.
    """
    if M < 1:
        raise InvalidConfigError("M must be >= 1")
    if mode == "auto":
        combos = math.factorial(M) ** B
        mode = "exhaustive" if M <= EXHAUSTIVE_MAX_M and combos <= EXHAUSTIVE_MAX_COMBOS else "local"
    if mode == "exhaustive":
        best, fbest = None, -math.inf
        for combo in itertools.product(itertools.permutations(range(M)), repeat=B):
            perms = np.array(combo, dtype=int).reshape(B, M)
            v = rate_evaluator(perms)
            if best is None or v > fbest + _TIE_RTOL * abs(fbest):
                best, fbest = perms, v
        return best, fbest
    if mode != "local":
        raise InvalidConfigError(f"unknown assignment search mode {mode!r}")
    perms = np.tile(np.arange(M), (B, 1))
    fbest = rate_evaluator(perms)
    improved = True
    while improved:
        improved = False
        for b in range(B):
            for i in range(M):
                for j in range(i + 1, M):
                    cand = perms.copy()
                    cand[b, i], cand[b, j] = cand[b, j], cand[b, i]
                    v = rate_evaluator(cand)
                    if v > fbest + _TIE_RTOL * abs(fbest):
                        perms, fbest, improved = cand, v, True
    return perms, fbest


# --------------------------------------------------------------------------
# per-subband power problem


def _subband_rate(g: np.ndarray, p: Sequence[float]) -> float:
    """Sum over the co-channel SUs of ``log2(1 + g_ii p_i / (1 + sum_{j!=i} g_ij p_j))``.

    ``g[i, j]`` is the gain from SU ``j`` to the beam serving SU ``i``.
    """
    k = len(p)
    total = 0.0
    for i in range(k):
        J = 0.0
        gi = g[i]
        for j in range(k):
            if j != i:
                J += gi[j] * p[j]
        total += math.log2(1.0 + gi[i] * p[i] / (1.0 + J))
    return total


def _subband_rate_grad(g: np.ndarray, p: np.ndarray) -> tuple[float, np.ndarray]:
    """Vectorised :func:`_subband_rate` and its gradient in ``p``."""
    total = 1.0 + g @ p
    own = np.diag(g) * p
    interf = total - own
    rate = float(np.sum(np.log2(total) - np.log2(interf)))
    w_total = 1.0 / total
    w_interf = 1.0 / interf
    grad = (g.T @ w_total - (g.T @ w_interf - np.diag(g) * w_interf)) / math.log(2)
    return rate, grad


def _polish(g: np.ndarray, top: np.ndarray, p0: list[float], rows: np.ndarray | None = None,
            budget: np.ndarray | None = None) -> list[float]:
    """Multi-start refinement of a best-response point.

    Coordinate moves stall at local optima: two co-channel SUs may each be
    best off silent given the other, and with shared budget rows one SU's
    increase is blocked by another's share.  SLSQP is started from ``p0``
    and from each single-SU vertex (that SU at ``top``, the rest silent);
    the best feasible point is kept, with ties going to ``p0``.
    """
    k = len(p0)
    scale = np.where(top > 0, top, 1.0)
    A = None if rows is None else (rows * scale[:, None]).T / budget[:, None]  # A x <= 1

    def feasible(x):
        x = np.clip(x, 0.0, 1.0)
        if A is None:
            return x
        load = float(np.max(A @ x, initial=0.0))
        return x / load if load > 1.0 else x

    def neg(x):
        r, gr = _subband_rate_grad(g, x * scale)
        return -r, -gr * scale

    g_list = g.tolist()
    best_x, best_r = np.asarray(p0) / scale, _subband_rate(g_list, list(p0))
    cons = [] if A is None else [{"type": "ineq", "fun": lambda x: 1.0 - A @ x, "jac": lambda x: -A}]
    for x0 in [best_x] + [np.eye(k)[i] for i in range(k)]:
        res = minimize(neg, feasible(x0), jac=True, method="SLSQP", bounds=[(0.0, 1.0)] * k,
                       constraints=cons, options={"maxiter": 200, "ftol": 1e-12})
        x = feasible(res.x)
        r = _subband_rate(g_list, list(x * scale))
        if r > best_r * (1 + _TIE_RTOL):
            best_x, best_r = x, r
    return [float(v) for v in np.minimum(best_x * scale, top)]


class _SubbandSolver:
    """Cyclic best response for the SUs of one operator sharing a subband."""

    def __init__(self, view: OperatorView, split: float | None, caps: np.ndarray | None):
        self.view = view
        self.split = split
        self.caps = caps
        self.cache: dict = {}
        self.solves = 0
        self.sweeps_total = 0
        self.shared = view.subband_independent

    def upper(self, i: int, m: int, qs, p, rows, budget) -> float:
        """Largest feasible power for member ``i`` with the others fixed."""
        if self.split is None:
            return float(self.caps[qs[i], m])
        resid = budget.copy()
        for j, qj in enumerate(qs):
            if j != i and p[j] > 0:
                resid -= rows[j] * p[j]
        u = float(np.min(resid / rows[i]))
        return min(max(u, 0.0), self.view.p_max)

    def solve(self, m: int, qs: tuple[int, ...]) -> tuple[float, list[float]]:
        key = qs if self.shared else (m, qs)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        v = self.view
        k = len(qs)
        beams = [q // v.M for q in qs]
        g = np.array([[v.G[qj, beams[i], m] for qj in qs] for i in range(k)])
        g_list = g.tolist()
        rows = budget = None
        if self.split is None:
            p = [0.5 * float(self.caps[q, m]) for q in qs]
        else:
            rows = v.F_det[list(qs)]
            budget = v.I_th[:, m] / self.split
            alone = [min(float(np.min(budget / rows[i])), v.p_max) for i in range(k)]
            p = [a / max(2, k) for a in alone]
        # an SU whose power reaches no other co-channel beam has a monotone objective
        decoupled = [all(g[j, i] == 0 for j in range(k) if j != i) for i in range(k)]
        f_old = _subband_rate(g_list, p)
        sweeps = 0
        for sweeps in range(1, MAX_SWEEPS + 1):
            for i in range(k):
                u = self.upper(i, m, qs, p, rows, budget)

                def obj(x, i=i):
                    p[i] = x
                    return _subband_rate(g_list, p)

                cur = p[i]
                p[i] = power_best_response(obj, u, current=cur if cur <= u else None,
                                           monotone=decoupled[i])
            f_new = _subband_rate(g_list, p)
            if abs(f_new - f_old) <= SWEEP_RTOL * max(abs(f_old), 1e-300):
                f_old = f_new
                break
            f_old = f_new
        top = [float(self.caps[q, m]) for q in qs] if self.split is None else alone
        if k > 1 and not all(decoupled) and any(x > 0 for x in top):
            polished = _polish(g, np.array(top), p, rows, budget)
            if polished != p:
                p = polished
                f_old = _subband_rate(g_list, p)
        self.solves += 1
        self.sweeps_total += sweeps
        out = (f_old, list(p))
        self.cache[key] = out
        return out


def _members(perms: np.ndarray, M: int) -> list[list[int]]:
    """For each subband, the in-operator SU indices (one per beam) assigned to it."""
    B = perms.shape[0]
    members = [[0] * B for _ in range(M)]
    for b in range(B):
        for slot in range(M):
            members[perms[b, slot]][b] = b * M + slot
    return members


def _solve_local(view: OperatorView, name: str, split: float | None, caps: np.ndarray | None,
                 mode: str) -> Solution:
    sub = _SubbandSolver(view, split, caps)
    M, B = view.M, view.B

    def evaluate(perms):
        return math.fsum(sub.solve(m, tuple(qs))[0] for m, qs in enumerate(_members(perms, M)))

    perms, _ = assignment_search(evaluate, B, M, mode)
    P = np.zeros((1, view.Q, M))
    for m, qs in enumerate(_members(perms, M)):
        _, p = sub.solve(m, tuple(qs))
        P[0, list(qs), m] = p
    assignment = Assignment.from_permutations(perms[None])
    G = view.G[None]
    rate = operator_rate(assignment, P, G, 0)
    return Solution(assignment, P, rate, name, operator=view.n,
                    meta={"subproblems": sub.solves, "sweeps": sub.sweeps_total,
                          "search": mode, "lambda": view.lambda_})


def decentralized_caps(view: OperatorView) -> np.ndarray:
    """Peak-power caps of shape (Q, M) from each SU's nearest-PU deterministic gain.

    The threshold is the one of that nearest PU on each subband.
    """
    nearest = np.argmax(view.F_det, axis=1)
    F_k = view.F_det[np.arange(view.Q), nearest]
    return np.asarray(theorem1_power_cap(F_k[:, None], view.I_th[nearest], view.lambda_, view.p_max))


def solve_decentralized(view: OperatorView, mode: str = "auto") -> Solution:
    """Best operator rate under the per-SU caps; uses no other operator's data."""
    caps = decentralized_caps(view)
    return _solve_local(view, "decentralized", None, caps, mode)


def solve_equal_split(view: OperatorView, split_factor: float | None = None, mode: str = "auto") -> Solution:
    """Best operator rate with every budget scaled by ``split_factor`` (default 1/N)."""
    factor = 1.0 / view.N if split_factor is None else split_factor
    return _solve_local(view, "equal_split", 1.0 / factor, None, mode)


def combine(solutions: Sequence[Solution], problem: Problem, name: str | None = None) -> Solution:
    """Stack per-operator solutions into a full-system solution."""
    sols = sorted(solutions, key=lambda s: s.operator)
    A = np.concatenate([s.assignment.A for s in sols], axis=0)
    P = np.concatenate([s.P for s in sols], axis=0)
    assignment = Assignment(A, problem.B)
    return Solution(assignment, P, total_rate(assignment, P, problem.G), name or sols[0].solver,
                    meta={"per_operator": [s.rate for s in sols]})


def solve_all(problem: Problem, method: str, mode: str = "auto") -> Solution:
    """Run ``method`` ('decentralized' or 'equal_split') for every operator independently."""
    fn = {"decentralized": solve_decentralized, "equal_split": solve_equal_split}.get(method)
    if fn is None:
        raise InvalidConfigError(f"unknown solver {method!r}")
    return combine([fn(operator_view(problem, n), mode=mode) for n in range(problem.N)], problem)


# --------------------------------------------------------------------------
# exhaustive oracle


def oracle_upper_bounds(problem: Problem, constraint: str, caps=None) -> np.ndarray:
    """Per-SU, per-subband top of the oracle's power grid, shape (N, Q, M).

    Every feasible power of SU k on subband m is at most ``I_th(l, m) / F_kl``
    for all l, so the grid spans ``[0, min(p_max, that bound)]`` without
    excluding feasible points.
    """
    N, Q = problem.G.shape[:2]
    I = problem.thresholds.I_th  # (L, M)
    if constraint == "caps":
        if caps is None:
            raise InvalidConfigError("constraint='caps' needs caps")
        caps = np.asarray(caps, dtype=float)
        if caps.ndim == 2:
            caps = caps[..., None]
        return np.broadcast_to(caps, (N, Q, problem.M)).copy()
    share = 1.0 if constraint == "full" else float(problem.N)
    if constraint not in ("full", "split"):
        raise InvalidConfigError(f"unknown oracle constraint {constraint!r}")
    bound = np.min((I[None, None, :, :] / share) / problem.F_det[..., None], axis=2)
    return np.minimum(bound, problem.p_max)


def solve_centralized_oracle(problem: Problem, power_grid_levels: int = 8, constraint: str = "full",
                             caps=None) -> Solution:
    """Exhaustive maximiser over all assignments and grid powers.

    ``constraint`` selects the feasible set: ``full`` (all C1 rows),
    ``split`` (each operator's own share ``I_th / N``) or ``caps`` (per-SU
    caps only).  Ties go to the lexicographically smallest assignment and then
    the smallest grid index.
    """
    N, B, M = problem.dims
    if N * B > 3 or M > 3 or power_grid_levels > 12 or power_grid_levels < 2:
        raise OracleSizeError(f"oracle limited to N*B <= 3, M <= 3, 2 <= levels <= 12; "
                              f"got N*B={N * B}, M={M}, levels={power_grid_levels}")
    upper = oracle_upper_bounds(problem, constraint, caps)
    G, F, I = problem.G, problem.F_det, problem.thresholds.I_th
    users = [(n, b) for n in range(N) for b in range(B)]
    k = len(users)
    frac = np.linspace(0.0, 1.0, power_grid_levels)
    grid_idx = np.array(list(itertools.product(range(power_grid_levels), repeat=k)))  # (S, k)
    best_cache: dict = {}

    def subband_best(m: int, slots: tuple[int, ...]):
        key = (m, slots)
        if key in best_cache:
            return best_cache[key]
        qs = [b * M + s for (n, b), s in zip(users, slots)]
        ops = [n for n, _ in users]
        pw = frac[grid_idx] * np.array([upper[n, q, m] for n, q in zip(ops, qs)])  # (S, k)
        rate = np.zeros(len(pw))
        for i, (n, b) in enumerate(users):
            J = np.zeros(len(pw))
            for j, (nj, bj) in enumerate(users):
                if j != i and nj == n:
                    J += G[n, qs[j], b, m] * pw[:, j]
            rate += np.log2(1.0 + G[n, qs[i], b, m] * pw[:, i] / (1.0 + J))
        ok = np.ones(len(pw), dtype=bool)
        if constraint != "caps":
            groups = [list(range(k))] if constraint == "full" else \
                [[i for i in range(k) if users[i][0] == n] for n in range(N)]
            limit = I[:, m] if constraint == "full" else I[:, m] / N
            for grp in groups:
                rows = np.stack([F[ops[i], qs[i]] for i in grp])  # (g, L)
                load = pw[:, grp] @ rows  # (S, L)
                ok &= np.all(load <= limit * (1 + 1e-9), axis=1)
        rate = np.where(ok, rate, -np.inf)
        s = int(np.argmax(rate))
        best_cache[key] = (float(rate[s]), pw[s].copy())
        return best_cache[key]

    beam_perms = list(itertools.permutations(range(M)))
    best = None
    for combo in itertools.product(beam_perms, repeat=k):
        inv = [np.argsort(p) for p in combo]  # inv[u][m] = slot of user u on subband m
        vals = [subband_best(m, tuple(int(inv[u][m]) for u in range(k))) for m in range(M)]
        v = math.fsum(r for r, _ in vals)
        if best is None or v > best[0] + _TIE_RTOL * abs(best[0]):
            best = (v, combo, vals)
    v, combo, vals = best
    perms = np.array(combo, dtype=int).reshape(N, B, M)
    assignment = Assignment.from_permutations(perms)
    P = np.zeros((N, B * M, M))
    for m, (_, pw) in enumerate(vals):
        inv = [np.argsort(p) for p in combo]
        for u, (n, b) in enumerate(users):
            P[n, b * M + int(inv[u][m]), m] = pw[u]
    return Solution(assignment, P, total_rate(assignment, P, G), f"oracle_{constraint}",
                    meta={"levels": power_grid_levels, "grid_upper": upper})
