import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cogsat_ra.errors import InvalidConfigError, InvalidInputError
from cogsat_ra.problem import (Assignment, PowerAllocation, Thresholds, check_feasibility, interference,
                               interference_at_pu, intra_sat_interference, lemma1_power_cap,
                               operator_rate, solution_from_csv, solution_to_csv, theorem1_power_cap,
                               total_rate)


def random_instance(rs, N=None, B=None, M=None, L=None):
    N = N or int(rs.integers(1, 4))
    B = B or int(rs.integers(1, 4))
    M = M or int(rs.integers(1, 4))
    L = L or int(rs.integers(1, 6))
    perms = np.array([[rs.permutation(M) for _ in range(B)] for _ in range(N)])
    A = Assignment.from_permutations(perms)
    P = rs.uniform(0, 5, (N, B * M, M))
    F = rs.lognormal(0, 1, (N, B * M, L, M))
    G = rs.lognormal(0, 1, (N, B * M, B, M))
    return A, P, F, G


def naive_interference(A, P, F, l, m):
    total = 0.0
    for n in range(A.shape[0]):
        for q in range(A.shape[1]):
            total += A[n, q, m] * F[n, q, l, m] * P[n, q, m]
    return total


def naive_rate(A, P, G, n, B, M):
    total = 0.0
    for q in range(B * M):
        b = q // M
        for m in range(M):
            if A[n, q, m] == 0:
                continue
            J = 0.0
            for i in range(B * M):
                if i != q:
                    J += A[n, i, m] * G[n, i, b, m] * P[n, i, m]
            total += math.log2(1 + G[n, q, b, m] * P[n, q, m] / (1 + J))
    return total


# assignment -----------------------------------------------------------------------

def test_assignment_rejects_invalid():
    with pytest.raises(InvalidInputError):
        Assignment(np.ones((1, 2, 2)), B=1)
    with pytest.raises(InvalidInputError):
        Assignment(np.array([[[0.5, 0.5], [0.5, 0.5]]]), B=1)


@given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 4), st.randoms())
def test_assignment_permutation_roundtrip(N, B, M, r):
    perms = np.array([[r.sample(range(M), M) for _ in range(B)] for _ in range(N)])
    A = Assignment.from_permutations(perms)
    np.testing.assert_array_equal(A.permutations(), perms)
    for n in range(N):
        for b in range(B):
            block = A.A[n, b * M:(b + 1) * M]
            np.testing.assert_array_equal(block.sum(0), 1)
            np.testing.assert_array_equal(block.sum(1), 1)


def test_power_allocation_bounds():
    PowerAllocation(np.array([0.0, 1.0]), p_max=1.0)
    with pytest.raises(InvalidInputError):
        PowerAllocation(np.array([-1e-3]))
    with pytest.raises(InvalidInputError):
        PowerAllocation(np.array([2.0]), p_max=1.0)


def test_thresholds_positive():
    with pytest.raises(InvalidConfigError):
        Thresholds(np.array([[1.0, 0.0]]))
    np.testing.assert_array_equal(Thresholds.uniform(2.0, 3, 2).split(4).I_th, np.full((3, 2), 0.5))


# interference ---------------------------------------------------------------------

def test_interference_single_term():
    A = Assignment.identity(1, 1, 1)
    assert interference_at_pu(A, np.array([[[3.0]]]), np.array([[[[2.0]]]]), 0, 0) == 6


def test_interference_zero_power():
    rs = np.random.default_rng(0)
    A, P, F, _ = random_instance(rs)
    assert interference_at_pu(A, np.zeros_like(P), F, 0, 0) == 0
    assert np.all(interference(A, np.zeros_like(P), F) == 0)


def test_interference_shape_mismatch():
    A = Assignment.identity(1, 1, 2)
    with pytest.raises(InvalidInputError):
        interference_at_pu(A, np.zeros((1, 2, 3)), np.ones((1, 2, 1, 2)), 0, 0)
    with pytest.raises(InvalidInputError):
        interference(A, np.zeros((1, 2, 2)), np.ones((2, 2, 1, 2)))


def test_interference_matches_naive_1000_instances():
    rs = np.random.default_rng(2024)
    for _ in range(1000):
        A, P, F, _ = random_instance(rs)
        I = interference(A, P, F)
        L, M = I.shape
        for l in range(L):
            for m in range(M):
                ref = naive_interference(A.A, P, F, l, m)
                assert I[l, m] == pytest.approx(ref, rel=1e-12, abs=0)
                assert interference_at_pu(A, P, F, l, m) == pytest.approx(ref, rel=1e-12, abs=0)


def test_interference_det_gain_broadcast():
    rs = np.random.default_rng(3)
    A, P, F, _ = random_instance(rs)
    F_det = F[..., 0]
    np.testing.assert_allclose(interference(A, P, F_det),
                               interference(A, P, np.repeat(F_det[..., None], A.M, axis=-1)), rtol=1e-14)


@given(st.integers(0, 10**6), st.floats(-3, 3), st.floats(-3, 3))
def test_interference_linear_in_power(seed, a, b):
    rs = np.random.default_rng(seed)
    A, P1, F, _ = random_instance(rs)
    P2 = rs.uniform(0, 5, P1.shape)
    lhs = interference(A, a * P1 + b * P2, F)
    rhs = a * interference(A, P1, F) + b * interference(A, P2, F)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-10, atol=1e-10 * (1 + np.abs(rhs).max()))


# intra-satellite interference ---------------------------------------------------------

def test_intra_single_beam_is_zero():
    rs = np.random.default_rng(1)
    A, P, _, G = random_instance(rs, B=1, M=3)
    for q in range(3):
        assert intra_sat_interference(A, P, G, 0, 0, q, int(A.subband_of()[0, q])) == 0


def test_intra_two_beams_unit_partner():
    A = Assignment.identity(1, 2, 1)
    P = np.ones((1, 2, 1))
    G = np.ones((1, 2, 2, 1))
    assert intra_sat_interference(A, P, G, 0, 0, 0, 0) == 1


def test_intra_matches_bruteforce():
    rs = np.random.default_rng(7)
    for _ in range(200):
        A, P, _, G = random_instance(rs)
        N, Q, M = A.shape
        n = int(rs.integers(N))
        q = int(rs.integers(Q))
        m = int(A.subband_of()[n, q])
        b = q // M
        ref = sum(A.A[n, i, m] * G[n, i, b, m] * P[n, i, m] for i in range(Q) if i != q)
        assert intra_sat_interference(A, P, G, n, b, q, m) == pytest.approx(ref, rel=1e-12, abs=0)


# rates ---------------------------------------------------------------------------------

def test_rate_single_su():
    A = Assignment.identity(1, 1, 1)
    assert operator_rate(A, np.ones((1, 1, 1)), np.ones((1, 1, 1, 1)), 0) == 1.0


def test_rate_two_cochannel_beams():
    A = Assignment.identity(1, 2, 1)
    r = operator_rate(A, np.ones((1, 2, 1)), np.ones((1, 2, 2, 1)), 0)
    assert r == pytest.approx(2 * math.log2(1.5), rel=1e-15)
    assert math.log2(1.5) == pytest.approx(0.58496, abs=1e-5)


def test_rates_match_naive_1000_instances():
    rs = np.random.default_rng(99)
    for _ in range(1000):
        A, P, _, G = random_instance(rs)
        N, Q, M = A.shape
        B = Q // M
        per = [naive_rate(A.A, P, G, n, B, M) for n in range(N)]
        for n in range(N):
            assert operator_rate(A, P, G, n) == pytest.approx(per[n], rel=1e-12, abs=1e-300)
        assert total_rate(A, P, G) == pytest.approx(math.fsum(per), rel=1e-12, abs=1e-300)


def test_total_rate_single_operator_and_zero_power():
    rs = np.random.default_rng(5)
    A, P, _, G = random_instance(rs, N=1)
    assert total_rate(A, P, G) == operator_rate(A, P, G, 0)
    assert total_rate(A, np.zeros_like(P), G) == 0


@given(st.integers(0, 10**6), st.floats(0, 10), st.floats(0, 10))
def test_rate_monotone_in_own_power_single_beam(seed, p1, p2):
    rs = np.random.default_rng(seed)
    A, P, _, G = random_instance(rs, B=1)
    q = int(rs.integers(P.shape[1]))
    m = int(A.subband_of()[0, q])
    lo, hi = sorted((p1, p2))
    Pa, Pb = P.copy(), P.copy()
    Pa[0, q, m], Pb[0, q, m] = lo, hi
    assert operator_rate(A, Pb, G, 0) >= operator_rate(A, Pa, G, 0)


# feasibility ------------------------------------------------------------------------------

def test_feasibility_zero_power():
    rs = np.random.default_rng(11)
    A, P, F, _ = random_instance(rs)
    rep = check_feasibility(A, np.zeros_like(P), F[..., 0], Thresholds.uniform(1.0, F.shape[2], A.M), p_max=1)
    assert rep.feasible


def test_feasibility_c1_violation_magnitude():
    A = Assignment.identity(1, 1, 1)
    rep = check_feasibility(A, np.array([[[1.0]]]), np.array([[[2.0]]]), Thresholds.uniform(1.0, 1, 1))
    assert not rep.c1 and rep.c2 and rep.c3 and rep.c4 and rep.c5
    assert rep.worst["C1"] == 1.0
    assert not rep.feasible


def test_feasibility_flags_structure_and_power():
    A = np.array([[[1.0, 1.0], [0.0, 0.0]]])
    rep = check_feasibility(A, np.array([[[0.5, 3.0], [0.0, 0.0]]]), np.ones((1, 2, 1)),
                            Thresholds.uniform(10.0, 1, 2), p_max=2.0, B=1)
    assert not rep.c3 and rep.c4 and not rep.c5 and rep.c2
    assert rep.worst["C3"] == 1.0
    both_on_one = np.array([[[1.0, 0.0], [1.0, 0.0]]])
    rep = check_feasibility(both_on_one, np.zeros((1, 2, 2)), np.ones((1, 2, 1)),
                            Thresholds.uniform(10.0, 1, 2), B=1)
    assert not rep.c4 and rep.c5


def test_feasibility_relative_slack():
    A = Assignment.identity(1, 1, 1)
    th = Thresholds.uniform(1.0, 1, 1)
    assert check_feasibility(A, np.array([[[1 + 5e-10]]]), np.ones((1, 1, 1)), th).c1
    assert not check_feasibility(A, np.array([[[1 + 5e-9]]]), np.ones((1, 1, 1)), th).c1


# caps ----------------------------------------------------------------------------------------

def test_lemma1_cap():
    assert lemma1_power_cap(4.0, 1.0) == 0.25
    big = lemma1_power_cap(1e-12, 1.0)
    assert math.isfinite(big) and big == pytest.approx(1e12)
    with pytest.raises(InvalidInputError):
        lemma1_power_cap(0.0, 1.0)


@given(st.floats(1e-6, 1e6), st.floats(1e-3, 1e3))
def test_lemma1_cap_saturates_nearest_pu(F, I_th):
    A = Assignment.identity(1, 1, 1)
    cap = lemma1_power_cap(F, I_th)
    val = interference_at_pu(A, np.array([[[cap]]]), np.array([[[[F]]]]), 0, 0)
    assert val == pytest.approx(I_th, rel=1e-12)


def test_theorem1_cap():
    assert theorem1_power_cap(4.0, 1.0, 10.0, 1.0) == pytest.approx(0.225, rel=1e-15)
    assert theorem1_power_cap(4.0, 1.0, math.inf) == 0.25
    assert theorem1_power_cap(4.0, 1.0, 10.0, p_max=0.1) == 0.1
    with pytest.raises(InvalidConfigError):
        theorem1_power_cap(4.0, 1.0, 0.5)


def test_solution_csv_roundtrip():
    rs = np.random.default_rng(8)
    A, P, _, _ = random_instance(rs, N=2, B=2, M=3)
    text = solution_to_csv(A, P * A.A)
    assert text.splitlines()[0] == "n,q,m,assigned,power"
    A2, P2 = solution_from_csv(text, B=2)
    assert A2 == A
    np.testing.assert_array_equal(P2, P * A.A)
