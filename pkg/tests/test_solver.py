"""Tests for the feasibility solver.

Verdicts are cross-checked against scipy (linprog for pure LPs,
scipy.optimize.milp for mixed problems) on randomized instances, and against
exhaustive binary enumeration for small mixed problems.  Witnesses are
replayed through the independent row checker.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog, milp as scipy_milp
from scipy.optimize import Bounds, LinearConstraint as SciLinCon

from swainval.milp import MilpProblem, Witness, verify
from swainval.solver import (
    BUDGET_EXCEEDED,
    FEASIBLE,
    INFEASIBLE,
    SolverConfig,
    SolveResult,
    check_certificate,
    solve_milp,
)


def random_lp(rng, n=6, m=8) -> MilpProblem:
    """Random bounded LP; roughly half are feasible."""
    p = MilpProblem("rand")
    lo = rng.uniform(-5, 0, n)
    hi = lo + rng.uniform(0.5, 6, n)
    for j in range(n):
        p.add_continuous(f"v{j}", lo[j], hi[j])
    A = rng.uniform(-2, 2, (m, n))
    A[rng.uniform(size=(m, n)) < 0.4] = 0.0
    centre = (lo + hi) / 2
    for i in range(m):
        rel = ("<=", ">=", "=")[int(rng.integers(3))]
        rhs = float(A[i] @ centre + rng.uniform(-3, 3))
        p.add_constraint(f"r{i}", [(A[i, j], f"v{j}") for j in range(n)], rel, rhs)
    return p.seal()


def random_mip(rng, n=4, nb=5, m=7) -> MilpProblem:
    p = MilpProblem("randmip")
    lo = rng.uniform(-3, 0, n)
    hi = lo + rng.uniform(0.5, 4, n)
    for j in range(n):
        p.add_continuous(f"v{j}", lo[j], hi[j])
    for j in range(nb):
        p.add_binary(f"d{j}")
    names = [f"v{j}" for j in range(n)] + [f"d{j}" for j in range(nb)]
    centre = np.concatenate([(lo + hi) / 2, np.full(nb, 0.5)])
    A = rng.uniform(-2, 2, (m, n + nb))
    A[rng.uniform(size=(m, n + nb)) < 0.35] = 0.0
    for i in range(m):
        rel = ("<=", ">=", "=")[int(rng.integers(3))]
        rhs = float(A[i] @ centre + rng.uniform(-2.0, 2.0))
        p.add_constraint(f"r{i}", [(A[i, j], names[j]) for j in range(n + nb)],
                         rel, rhs)
    return p.seal()


def scipy_feasible(p: MilpProblem) -> bool:
    A, rel, b, lo, hi, is_bin, _ = p.to_arrays()
    n = A.shape[1]
    if np.any(is_bin):
        cons = []
        for i in range(A.shape[0]):
            if rel[i] == "<=":
                cons.append(SciLinCon(A[i], -np.inf, b[i]))
            elif rel[i] == ">=":
                cons.append(SciLinCon(A[i], b[i], np.inf))
            else:
                cons.append(SciLinCon(A[i], b[i], b[i]))
        res = scipy_milp(c=np.zeros(n), constraints=cons,
                         integrality=is_bin.astype(int),
                         bounds=Bounds(lo, hi))
        return res.status == 0
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for i in range(A.shape[0]):
        if rel[i] == "<=":
            A_ub.append(A[i]); b_ub.append(b[i])
        elif rel[i] == ">=":
            A_ub.append(-A[i]); b_ub.append(-b[i])
        else:
            A_eq.append(A[i]); b_eq.append(b[i])
    res = linprog(np.zeros(n),
                  A_ub=np.array(A_ub) if A_ub else None,
                  b_ub=np.array(b_ub) if b_ub else None,
                  A_eq=np.array(A_eq) if A_eq else None,
                  b_eq=np.array(b_eq) if b_eq else None,
                  bounds=list(zip(lo, hi)), method="highs")
    return res.status == 0


def enumerate_feasible(p: MilpProblem) -> bool:
    """Ground truth: try every binary assignment, solving the continuous rest
    with scipy."""
    A, rel, b, lo, hi, is_bin, _ = p.to_arrays()
    bins = np.where(is_bin)[0]
    n = A.shape[1]
    for bits in range(2 ** len(bins)):
        lo2, hi2 = lo.copy(), hi.copy()
        for pos, j in enumerate(bins):
            v = float((bits >> pos) & 1)
            lo2[j] = hi2[j] = v
        A_ub, b_ub, A_eq, b_eq = [], [], [], []
        for i in range(A.shape[0]):
            if rel[i] == "<=":
                A_ub.append(A[i]); b_ub.append(b[i])
            elif rel[i] == ">=":
                A_ub.append(-A[i]); b_ub.append(-b[i])
            else:
                A_eq.append(A[i]); b_eq.append(b[i])
        res = linprog(np.zeros(n),
                      A_ub=np.array(A_ub) if A_ub else None,
                      b_ub=np.array(b_ub) if b_ub else None,
                      A_eq=np.array(A_eq) if A_eq else None,
                      b_eq=np.array(b_eq) if b_eq else None,
                      bounds=list(zip(lo2, hi2)), method="highs")
        if res.status == 0:
            return True
    return False


class TestPureLp:
    def test_trivial_feasible(self):
        p = MilpProblem()
        p.add_continuous("x", 0.0, 1.0)
        p.add_constraint("r", [(1.0, "x")], ">=", 0.5)
        p.seal()
        res = solve_milp(p)
        assert res.is_feasible
        assert 0.5 - 1e-9 <= res.witness["x"] <= 1.0 + 1e-9

    def test_trivial_infeasible(self):
        p = MilpProblem()
        p.add_continuous("x", 0.0, 1.0)
        p.add_constraint("r", [(1.0, "x")], ">=", 1.5)
        p.seal()
        res = solve_milp(p)
        assert res.is_infeasible

    def test_equality_chain(self):
        # x0 = 1, x_{k+1} = 0.5 x_k + 1 for 10 steps, all within loose bounds
        p = MilpProblem()
        for k in range(11):
            p.add_continuous(f"x{k}", -10.0, 10.0)
        p.add_constraint("init", [(1.0, "x0")], "=", 1.0)
        for k in range(10):
            p.add_constraint(f"dyn{k}", [(1.0, f"x{k + 1}"), (-0.5, f"x{k}")], "=", 1.0)
        p.seal()
        res = solve_milp(p)
        assert res.is_feasible
        x = 1.0
        for k in range(10):
            x = 0.5 * x + 1.0
            assert res.witness[f"x{k + 1}"] == pytest.approx(x, abs=1e-7)

    def test_no_rows_bounds_only(self):
        p = MilpProblem()
        p.add_continuous("x", 2.0, 3.0)
        p.seal()
        res = solve_milp(p)
        assert res.is_feasible and 2.0 <= res.witness["x"] <= 3.0

    @pytest.mark.parametrize("seed", range(60))
    def test_against_scipy_linprog(self, seed):
        rng = np.random.default_rng(seed)
        p = random_lp(rng)
        res = solve_milp(p)
        assert res.decided
        assert res.is_feasible == scipy_feasible(p), f"seed {seed}"
        if res.is_feasible:
            ok, violations = verify(p, res.witness)
            assert ok, violations

    def test_free_variable(self):
        p = MilpProblem()
        p.add_continuous("x", -math.inf, math.inf)
        p.add_continuous("y", 0.0, 1.0)
        p.add_constraint("r1", [(1.0, "x"), (1.0, "y")], "=", 7.5)
        p.add_constraint("r2", [(1.0, "x")], "<=", 100.0)
        p.seal()
        res = solve_milp(p)
        assert res.is_feasible
        assert res.witness["x"] + res.witness["y"] == pytest.approx(7.5, abs=1e-7)


class TestMixedInteger:
    def test_forced_binary_combination(self):
        # x = 2 d0 + d1 with x pinned to 3 forces d0 = d1 = 1
        p = MilpProblem()
        p.add_continuous("x", 3.0, 3.0)
        p.add_binary("d0")
        p.add_binary("d1")
        p.add_constraint("mix", [(1.0, "x"), (-2.0, "d0"), (-1.0, "d1")], "=", 0.0)
        p.seal()
        res = solve_milp(p)
        assert res.is_feasible
        assert res.witness["d0"] == 1.0 and res.witness["d1"] == 1.0

    def test_integer_infeasible_lp_feasible(self):
        # 2 d = 1 is LP-feasible (d = 0.5) but integer-infeasible
        p = MilpProblem()
        p.add_binary("d")
        p.add_constraint("r", [(2.0, "d")], "=", 1.0)
        p.seal()
        res = solve_milp(p)
        assert res.is_infeasible

    def test_one_active_mode_selection(self):
        # exactly one of three shifted intervals must hold; only mode 2 fits
        M = 100.0
        p2 = MilpProblem()
        p2.add_continuous("x", 4.6, 4.6)
        for i in range(3):
            p2.add_binary(f"d{i}")
        for i, (lo, hi) in enumerate([(-1.0, 1.0), (2.0, 3.0), (4.0, 5.0)]):
            p2.add_constraint(f"lo{i}", [(1.0, "x"), (-M, f"d{i}")], ">=", lo - M)
            p2.add_constraint(f"hi{i}", [(1.0, "x"), (M, f"d{i}")], "<=", hi + M)
        p2.add_constraint("pick", [(1.0, f"d{i}") for i in range(3)], "=", 1.0)
        p2.seal()
        res = solve_milp(p2)
        assert res.is_feasible
        assert res.witness["d2"] == 1.0
        assert res.witness["d0"] == 0.0 and res.witness["d1"] == 0.0

    @pytest.mark.parametrize("seed", range(40))
    def test_against_exhaustive_enumeration(self, seed):
        rng = np.random.default_rng(1000 + seed)
        p = random_mip(rng)
        res = solve_milp(p)
        assert res.decided
        assert res.is_feasible == enumerate_feasible(p), f"seed {seed}"
        if res.is_feasible:
            ok, violations = verify(p, res.witness)
            assert ok, violations

    @pytest.mark.parametrize("seed", range(10))
    def test_larger_against_scipy_milp(self, seed):
        rng = np.random.default_rng(2000 + seed)
        p = random_mip(rng, n=6, nb=12, m=10)
        res = solve_milp(p)
        assert res.decided
        assert res.is_feasible == scipy_feasible(p), f"seed {seed}"
        if res.is_feasible:
            ok, violations = verify(p, res.witness)
            assert ok, violations


class TestDeterminism:
    def test_same_answer_every_run(self):
        rng = np.random.default_rng(42)
        p = random_mip(rng, n=5, nb=8, m=9)
        first = solve_milp(p)
        for _ in range(3):
            again = solve_milp(p)
            assert again.status == first.status
            assert again.nodes == first.nodes
            if first.witness is not None:
                assert again.witness.assignment == first.witness.assignment

    def test_presolve_off_agrees(self):
        for seed in range(15):
            rng = np.random.default_rng(3000 + seed)
            p = random_mip(rng)
            a = solve_milp(p)
            b = solve_milp(p, SolverConfig(presolve=False))
            assert a.status == b.status

    def test_rounding_heuristic_off_agrees(self):
        for seed in range(15):
            rng = np.random.default_rng(4000 + seed)
            p = random_mip(rng)
            a = solve_milp(p)
            b = solve_milp(p, SolverConfig(rounding_heuristic=False))
            assert a.status == b.status


class TestBudgets:
    def test_node_limit(self):
        rng = np.random.default_rng(7)
        p = random_mip(rng, n=4, nb=14, m=6)
        res = solve_milp(p, SolverConfig(node_limit=1, rounding_heuristic=False))
        assert res.status in (FEASIBLE, INFEASIBLE, BUDGET_EXCEEDED)
        res0 = solve_milp(p, SolverConfig(node_limit=0))
        assert res0.status == BUDGET_EXCEEDED

    def test_time_limit_zero(self):
        rng = np.random.default_rng(8)
        p = random_mip(rng)
        res = solve_milp(p, SolverConfig(time_limit=0.0))
        assert res.status == BUDGET_EXCEEDED


class TestCertificates:
    def test_infeasible_lp_has_valid_certificate(self):
        p = MilpProblem()
        p.add_continuous("x", 0.0, 1.0)
        p.add_continuous("y", 0.0, 1.0)
        p.add_constraint("r1", [(1.0, "x"), (1.0, "y")], ">=", 3.0)
        p.seal()
        res = solve_milp(p)
        assert res.is_infeasible
        assert res.certificate is not None
        assert check_certificate(p, res.certificate)

    def test_certificates_on_random_infeasible_lps(self):
        found = 0
        for seed in range(40):
            rng = np.random.default_rng(5000 + seed)
            p = random_lp(rng)
            res = solve_milp(p)
            if res.is_infeasible and res.certificate is not None:
                assert check_certificate(p, res.certificate), f"seed {seed}"
                found += 1
        assert found >= 3  # the sampler produces plenty of infeasible LPs

    def test_bogus_certificate_rejected(self):
        p = MilpProblem()
        p.add_continuous("x", 0.0, 1.0)
        p.add_constraint("r1", [(1.0, "x")], "<=", 0.5)
        p.seal()
        assert not check_certificate(p, [1.0])   # wrong sign for a <= row
        assert not check_certificate(p, [-1.0])  # feasible problem: no proof


class TestWitnessQuality:
    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10 ** 6))
    def test_witness_replays_within_tolerance(self, seed):
        rng = np.random.default_rng(seed)
        p = random_mip(rng, n=3, nb=4, m=5)
        res = solve_milp(p)
        if res.is_feasible:
            ok, violations = verify(p, res.witness, tol=1e-6)
            assert ok, violations
