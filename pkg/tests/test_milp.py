"""Tests for the MILP feasibility container, abs-value transform, big-M
derivation, LP-format round trip and witness verification.

Big-M oracles are hand-computed interval bounds; the abs-value transform is
checked by exhaustive witness evaluation over a sign/value grid.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swainval.milp import (
    BadBigM,
    BadBounds,
    DuplicateName,
    MilpProblem,
    NotSealed,
    UnboundedSet,
    Witness,
    add_abs_var,
    big_m_for_pair,
    bound_by_abs,
    encode_abs_leq,
    export_lp,
    parse_lp,
    row_bounds,
    verify,
)
from swainval.model import AffineMode, HyperRectangle, SwitchedAffineModel


def scalar_model(a=0.5, b=1.0, c=2.0, f=1.0, x_bound=10.0, noise=0.5, u_bound=2.0):
    mode = AffineMode.certain([[a]], [[b]], [[c]], [f])
    return SwitchedAffineModel([mode], HyperRectangle.ball(x_bound, 1),
                               HyperRectangle.ball(noise, 1),
                               HyperRectangle.ball(u_bound, 1))


class TestProblemBuilding:
    def test_variables_and_rows(self):
        p = MilpProblem("toy")
        p.add_continuous("x", -1.0, 2.0)
        p.add_binary("b")
        p.add_constraint("r1", [(1.0, "x"), (3.0, "b")], "<=", 2.0)
        p.seal()
        assert p.n_vars == 2 and p.n_rows == 1
        assert p.bounds_of("x") == (-1.0, 2.0)
        assert p.is_binary("b") and not p.is_binary("x")
        assert p.binary_vars == ("b",)

    def test_duplicate_names(self):
        p = MilpProblem()
        p.add_continuous("x", 0, 1)
        with pytest.raises(DuplicateName):
            p.add_continuous("x", 0, 1)
        with pytest.raises(DuplicateName):
            p.add_binary("x")
        p.add_constraint("r", [(1.0, "x")], "<=", 1.0)
        with pytest.raises(DuplicateName):
            p.add_constraint("r", [(1.0, "x")], ">=", 0.0)

    def test_bad_bounds(self):
        p = MilpProblem()
        with pytest.raises(BadBounds):
            p.add_continuous("x", 1.0, 0.0)
        with pytest.raises(BadBounds):
            p.add_continuous("y", math.nan, 1.0)

    def test_term_merging_and_degenerate_rows(self):
        p = MilpProblem()
        p.add_continuous("x", 0, 1)
        p.add_constraint("merge", [(1.0, "x"), (2.0, "x")], "<=", 5.0)
        assert p.constraints[-1].terms == ((3.0, "x"),)
        # cancelling terms leave 0 <= 5: trivially true, row dropped
        p.add_constraint("cancel", [(1.0, "x"), (-1.0, "x")], "<=", 5.0)
        assert p.n_rows == 1
        with pytest.raises(BadBounds):
            p.add_constraint("impossible", [(1.0, "x"), (-1.0, "x")], "<=", -1.0)
        with pytest.raises(KeyError):
            p.add_constraint("unknown", [(1.0, "nope")], "<=", 0.0)

    def test_sealing(self):
        p = MilpProblem()
        p.add_continuous("x", 0, 1)
        with pytest.raises(NotSealed):
            p.to_arrays()
        p.seal()
        with pytest.raises(NotSealed):
            p.add_continuous("y", 0, 1)
        with pytest.raises(NotSealed):
            p.add_constraint("r", [(1.0, "x")], "<=", 1.0)

    def test_to_arrays(self):
        p = MilpProblem()
        p.add_continuous("x", -2.0, 2.0)
        p.add_binary("b")
        p.add_constraint("r1", [(1.0, "x"), (-4.0, "b")], "<=", 0.0)
        p.add_constraint("r2", [(1.0, "x")], "=", 1.0)
        p.seal()
        A, rel, b, lo, hi, binmask, names = p.to_arrays()
        np.testing.assert_array_equal(A, [[1.0, -4.0], [1.0, 0.0]])
        assert list(rel) == ["<=", "="]
        np.testing.assert_array_equal(b, [0.0, 1.0])
        np.testing.assert_array_equal(lo, [-2.0, 0.0])
        np.testing.assert_array_equal(hi, [2.0, 1.0])
        np.testing.assert_array_equal(binmask, [False, True])
        assert names == ("x", "b")


class TestAbsTransform:
    def test_grid_of_witnesses(self):
        # z must equal |y| exactly for either binary value, and x must obey
        # |x| <= c z; check every combination on a sign/value grid.
        for y_val in (-0.75, -0.3, 0.0, 0.4, 0.75):
            p = MilpProblem()
            p.add_continuous("y", -0.75, 0.75)
            p.add_continuous("x", -10.0, 10.0)
            z, b = add_abs_var(p, "y", big_m=1.575)
            bound_by_abs(p, "x", 2.0, z)
            p.seal()
            b_val = 1.0 if y_val >= 0 else 0.0
            good = Witness({"y": y_val, "x": 1.5 * abs(y_val), z: abs(y_val), b: b_val})
            ok, violations = verify(p, good)
            assert ok, violations
            # wrong z (too large) must be rejected
            bad = Witness({"y": y_val, "x": 0.0, z: abs(y_val) + 0.5, b: b_val})
            ok, _ = verify(p, bad)
            assert not ok
            # x exceeding c |y| must be rejected
            bad_x = Witness({"y": y_val, "x": 2.0 * abs(y_val) + 0.1,
                             z: abs(y_val), b: b_val})
            ok, _ = verify(p, bad_x)
            assert not ok

    def test_flipped_binary_forces_zero(self):
        # with b = 1 but y < 0 the rows force z = y < 0 <= z: infeasible
        p = MilpProblem()
        p.add_continuous("y", -1.0, 1.0)
        z, b = add_abs_var(p, "y", big_m=2.0)
        p.seal()
        ok, _ = verify(p, Witness({"y": -0.5, z: 0.5, b: 1.0}))
        assert not ok
        ok, _ = verify(p, Witness({"y": -0.5, z: 0.5, b: 0.0}))
        assert ok

    def test_big_m_too_small(self):
        p = MilpProblem()
        p.add_continuous("y", -3.0, 3.0)
        with pytest.raises(BadBigM):
            add_abs_var(p, "y", big_m=5.9)  # needs >= 6

    def test_unbounded_y(self):
        p = MilpProblem()
        p.add_continuous("y", -math.inf, 1.0)
        with pytest.raises(UnboundedSet):
            add_abs_var(p, "y", big_m=100.0)

    def test_one_shot_wrapper(self):
        p = MilpProblem()
        p.add_continuous("y", -1.0, 1.0)
        p.add_continuous("x", -5.0, 5.0)
        z, b = encode_abs_leq(p, "x", 0.5, "y", big_m=2.0)
        p.seal()
        ok, _ = verify(p, Witness({"y": 0.8, "x": 0.4, z: 0.8, b: 1.0}))
        assert ok
        ok, _ = verify(p, Witness({"y": 0.8, "x": 0.401, z: 0.8, b: 1.0}))
        assert not ok

    def test_negative_factor_rejected(self):
        p = MilpProblem()
        p.add_continuous("y", -1.0, 1.0)
        p.add_continuous("x", -1.0, 1.0)
        z, _ = add_abs_var(p, "y", big_m=2.0)
        with pytest.raises(ValueError):
            bound_by_abs(p, "x", -1.0, z)


class TestBigM:
    def test_single_model_hand_computed(self):
        # state row: 0.5*10 + 1*2 + 1 + 10 = 18; output row: 2*10 + 0.5 = 20.5
        model = scalar_model()
        state, out = row_bounds(model)
        assert state == pytest.approx(18.0)
        assert out == pytest.approx(20.5)
        assert big_m_for_pair(model) == pytest.approx(1.05 * 20.5)

    def test_pair_sums_output_bounds(self):
        # matching row couples both outputs: M >= out_a + out_b
        model = scalar_model()
        assert big_m_for_pair(model, model) == pytest.approx(1.05 * 41.0)

    def test_pair_uses_input_intersection(self):
        a = scalar_model(u_bound=2.0)
        b = scalar_model(u_bound=1.0)
        # intersection U = [-1, 1]: state rows 0.5*10 + 1 + 1 + 10 = 17
        state, _ = row_bounds(a, a.input_set.intersect(b.input_set))
        assert state == pytest.approx(17.0)
        assert big_m_for_pair(a, b) == pytest.approx(1.05 * 41.0)

    def test_uncertainty_radii_enter(self):
        mode = AffineMode(A=[[0.5]], B=[[1.0]], C=[[2.0]], f=[1.0],
                          hatA=[[0.1]], hatB=[[0.2]], hatC=[[0.3]], hatf=[0.4])
        model = SwitchedAffineModel([mode], HyperRectangle.ball(10, 1),
                                    HyperRectangle.ball(0.5, 1),
                                    HyperRectangle.ball(2, 1))
        state, out = row_bounds(model)
        # (0.5+0.1)*10 + (1+0.2)*2 + 1 + 0.4 + 10 = 19.8
        assert state == pytest.approx(19.8)
        # (2+0.3)*10 + 0.5 = 23.5
        assert out == pytest.approx(23.5)

    def test_unbounded_sets_rejected(self):
        model = SwitchedAffineModel(
            [AffineMode.certain([[1.0]], [[1.0]], [[1.0]], [0.0])],
            HyperRectangle([-math.inf], [math.inf]),
            HyperRectangle.ball(1, 1), HyperRectangle.ball(1, 1))
        with pytest.raises(UnboundedSet):
            big_m_for_pair(model)


def build_round_trip_problem() -> MilpProblem:
    p = MilpProblem("round-trip")
    p.add_continuous("x[0][0]", -1.5, 2.5)
    p.add_continuous("free_var", -math.inf, math.inf)
    p.add_continuous("pinned", 0.25, 0.25)
    p.add_binary("d[0][1][2]")
    p.add_constraint("dyn[0]", [(1.0, "x[0][0]"), (-0.3333333333333333, "free_var"),
                                (21.5, "d[0][1][2]")], "<=", 21.0)
    p.add_constraint("out[0]", [(2.0, "x[0][0]"), (1e-07, "pinned")], "=", 0.5)
    p.add_constraint("low[0]", [(-1.0, "x[0][0]"), (-1.0, "free_var")], ">=", -4.0)
    return p.seal()


class TestLpRoundTrip:
    def test_export_is_deterministic(self):
        p = build_round_trip_problem()
        assert export_lp(p) == export_lp(p)

    def test_round_trip_preserves_everything(self):
        p = build_round_trip_problem()
        q = parse_lp(export_lp(p))
        assert set(q.variable_names) == set(p.variable_names)
        for name in p.variable_names:
            assert q.bounds_of(name) == p.bounds_of(name)
            assert q.is_binary(name) == p.is_binary(name)
        rows_p = {r.name: (dict((v, c) for c, v in r.terms), r.relation, r.rhs)
                  for r in p.constraints}
        rows_q = {r.name: (dict((v, c) for c, v in r.terms), r.relation, r.rhs)
                  for r in q.constraints}
        assert rows_p == rows_q

    def test_double_round_trip_is_stable(self):
        p = build_round_trip_problem()
        text1 = export_lp(parse_lp(export_lp(p)))
        text2 = export_lp(parse_lp(text1))
        assert text1 == text2

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(-1e6, 1e6, allow_nan=False).map(float),
                    min_size=1, max_size=6))
    def test_coefficients_survive_bit_exactly(self, coefs):
        p = MilpProblem()
        for i in range(len(coefs)):
            p.add_continuous(f"v{i}", -10.0, 10.0)
        p.add_constraint("r", [(c, f"v{i}") for i, c in enumerate(coefs) if c != 0.0],
                         "<=", 1.0)
        p.seal()
        q = parse_lp(export_lp(p))
        if p.n_rows:
            got = dict((v, c) for c, v in q.constraints[0].terms)
            for i, c in enumerate(coefs):
                if c != 0.0:
                    assert got[f"v{i}"] == c  # bit-exact through %.17g

    def test_requires_sealed(self):
        p = MilpProblem()
        p.add_continuous("x", 0, 1)
        with pytest.raises(NotSealed):
            export_lp(p)


class TestVerify:
    def test_detects_each_violation_kind(self):
        p = MilpProblem()
        p.add_continuous("x", 0.0, 1.0)
        p.add_binary("b")
        p.add_constraint("le", [(1.0, "x")], "<=", 0.5)
        p.add_constraint("ge", [(1.0, "x"), (1.0, "b")], ">=", 0.5)
        p.add_constraint("eq", [(2.0, "x"), (-1.0, "b")], "=", 0.0)
        p.seal()
        ok, v = verify(p, Witness({"x": 0.5, "b": 1.0}))
        assert ok, v
        assert not verify(p, Witness({"x": 1.5, "b": 1.0}))[0]   # bound
        assert not verify(p, Witness({"x": 0.5, "b": 0.5}))[0]   # integrality
        assert not verify(p, Witness({"x": 0.6, "b": 1.0}))[0]   # <= row (0.6 > 0.5)
        assert not verify(p, Witness({"x": 0.25, "b": 0.0}))[0]  # >= and = rows
        ok, v = verify(p, Witness({"x": 0.5}))
        assert not ok and any("missing" in msg for msg in v)

    def test_tolerance(self):
        p = MilpProblem()
        p.add_continuous("x", 0.0, 1.0)
        p.add_constraint("le", [(1.0, "x")], "<=", 0.5)
        p.seal()
        assert verify(p, Witness({"x": 0.5 + 5e-7}))[0]
        assert not verify(p, Witness({"x": 0.5 + 5e-6}))[0]
