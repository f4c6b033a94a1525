"""Exact feasibility solver for mixed-integer linear problems.

The solver answers one question: does a sealed :class:`~swainval.milp.MilpProblem`
admit an assignment satisfying every row, bound and integrality restriction?
It combines

* a bounded-variable phase-1 primal simplex (artificial variables, Dantzig
  pricing with a Bland anti-cycling fallback, explicit basis inverse with
  periodic refactorization), and
* depth-first branch and bound on the binaries (most-fractional branching,
  ties broken by lowest index, the 1-branch explored first), with an
  interval presolve at every node: fixed-variable propagation, redundant-row
  dropping and bound tightening, which together also propagate the
  one-active-mode equalities exactly.

Feasible answers always carry a witness that has been re-checked against the
original problem; infeasible answers at the root carry a dual ray that
certifies infeasibility against the original rows and bounds.  All rules are
deterministic: the same problem yields the same answer, witness and node
count on every run.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from .milp import EQ, GE, LE, MilpProblem, Witness, verify

__all__ = [
    "SolverConfig",
    "SolveResult",
    "SolverNumericalError",
    "FEASIBLE",
    "INFEASIBLE",
    "BUDGET_EXCEEDED",
    "solve_milp",
    "check_certificate",
]

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
BUDGET_EXCEEDED = "budget_exceeded"

_HUGE = 1e30
_NEAR_HUGE = 1e29


class SolverNumericalError(RuntimeError):
    """The solver could not produce a numerically trustworthy answer."""


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances, budgets and rule choices for :func:`solve_milp`."""

    feas_tolerance: float = 1e-6
    int_tolerance: float = 1e-6
    node_limit: int = 1_000_000
    time_limit: float | None = None      # wall-clock seconds
    branch_rule: str = "most-fractional"  # or "first-fractional"
    node_order: str = "one-first"         # or "zero-first"
    presolve: bool = True
    rounding_heuristic: bool = True
    sos1_branching: bool = True           # s-way branch on exactly-one rows
    refactor_every: int = 100
    bland_after: int = 150                # degenerate pivots before Bland mode


@dataclass(frozen=True)
class SolveResult:
    """Outcome of a feasibility solve.

    ``certificate`` (when present) is a dual vector over the problem rows
    proving infeasibility against the original bounds; it is only produced
    when infeasibility is established without branching.
    """

    status: str
    witness: Witness | None
    nodes: int
    lp_iterations: int
    wall_time: float
    message: str = ""
    certificate: tuple[float, ...] | None = None

    @property
    def is_feasible(self) -> bool:
        return self.status == FEASIBLE

    @property
    def is_infeasible(self) -> bool:
        return self.status == INFEASIBLE

    @property
    def decided(self) -> bool:
        return self.status in (FEASIBLE, INFEASIBLE)


# -- bounded-variable phase-1 simplex ----------------------------------------

_AT_LB, _AT_UB, _FREE, _BASIC = 0, 1, 2, 3
_PIV_TOL = 1e-9
_RC_TOL = 1e-9


def _phase1_simplex(A: np.ndarray, b: np.ndarray, lo: np.ndarray,
                    hi: np.ndarray, cfg: SolverConfig,
                    ) -> tuple[bool, np.ndarray | None, np.ndarray | None, int]:
    """Find z with A z = b, lo <= z <= hi, or prove none exists.

    Returns (feasible, z, duals y, iterations); y is the phase-1 multiplier
    vector at the final basis (a Farkas ray when infeasible).
    """
    m, n = A.shape
    if m == 0:
        z = np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0))
        return True, z, np.zeros(0), 0

    # start every structural/slack variable at a finite bound (or 0 if free)
    z0 = np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0))
    state = np.full(n + m, _BASIC, dtype=np.int8)
    state[:n] = np.where(np.isfinite(lo), _AT_LB,
                         np.where(np.isfinite(hi), _AT_UB, _FREE))

    r = b - A @ z0
    sgn = np.where(r >= 0.0, 1.0, -1.0)
    A_ext = np.hstack([A, np.diag(sgn)])
    lo_ext = np.concatenate([lo, np.zeros(m)])
    hi_ext = np.concatenate([hi, np.full(m, np.inf)])
    cost = np.concatenate([np.zeros(n), np.ones(m)])

    z = np.concatenate([z0, np.zeros(m)])
    basis = np.arange(n, n + m)
    B_inv = np.diag(sgn)          # inverse of diag(sgn) is itself
    x_B = np.abs(r)
    c_B = np.ones(m)

    fixed = (hi_ext - lo_ext) <= 1e-12
    max_iter = 50 * (m + n) + 2000
    bland = False
    stall = 0
    last_obj = float(np.sum(x_B))
    iters = 0

    def refactor():
        nonlocal B_inv, x_B
        try:
            B_inv = np.linalg.inv(A_ext[:, basis])
        except np.linalg.LinAlgError as err:
            raise SolverNumericalError("singular basis at refactorization") from err
        nb = state != _BASIC
        x_B = B_inv @ (b - A_ext[:, nb] @ z[nb])

    while True:
        iters += 1
        if iters > max_iter:
            raise SolverNumericalError(
                f"simplex exceeded {max_iter} iterations on a {m}x{n} problem")

        y = B_inv.T @ c_B
        rc = cost - A_ext.T @ y
        elig = (((state == _AT_LB) & (rc < -_RC_TOL))
                | ((state == _AT_UB) & (rc > _RC_TOL))
                | ((state == _FREE) & (np.abs(rc) > _RC_TOL))) & ~fixed
        if not np.any(elig):
            obj = float(c_B @ x_B)
            if obj <= cfg.feas_tolerance:
                zz = z.copy()
                zz[basis] = x_B
                return True, zz[:n], y, iters
            return False, None, y, iters

        idx = np.where(elig)[0]
        e = int(idx[0]) if bland else int(idx[int(np.argmax(np.abs(rc[idx])))])
        d = 1.0 if (state[e] == _AT_LB or (state[e] == _FREE and rc[e] < 0)) else -1.0

        w = B_inv @ A_ext[:, e]
        dw = d * w

        # ratio test over blocking basics (both directions merged)
        down = dw > _PIV_TOL           # basic decreases toward its lower bound
        up = dw < -_PIV_TOL            # basic increases toward its upper bound
        positions = np.concatenate([np.where(down)[0], np.where(up)[0]])
        if positions.size:
            gaps_dn = np.maximum(x_B[down] - lo_ext[basis[down]], 0.0)
            gaps_up = np.maximum(hi_ext[basis[up]] - x_B[up], 0.0)
            ratios = np.concatenate([gaps_dn / dw[down], gaps_up / (-dw[up])])
            to_upper = np.concatenate([np.zeros(int(down.sum()), dtype=bool),
                                       np.ones(int(up.sum()), dtype=bool)])
            rmin = float(np.min(ratios))
            near = ratios <= rmin + 1e-12
            cand = np.where(near)[0]
            if bland:
                pick = int(cand[int(np.argmin(basis[positions[cand]]))])
            else:
                piv_sizes = np.abs(dw[positions[cand]])
                best = np.where(piv_sizes >= piv_sizes.max() - 1e-15)[0]
                pick = int(cand[best[int(np.argmin(basis[positions[cand[best]]]))]])
            step_rows = max(rmin, 0.0)
            leave_pos = int(positions[pick])
            leave_to_upper = bool(to_upper[pick])
        else:
            step_rows = math.inf
            leave_pos = -1
            leave_to_upper = False

        own_gap = hi_ext[e] - lo_ext[e]
        flip = math.isfinite(own_gap) and own_gap < step_rows - 1e-12
        step = own_gap if flip else step_rows
        if not math.isfinite(step):
            raise SolverNumericalError("phase-1 ray with unbounded objective decrease")

        if step <= 1e-12:
            stall += 1
            if stall > cfg.bland_after:
                bland = True
        else:
            stall = 0

        x_B -= dw * step
        if flip:
            z[e] = hi_ext[e] if d > 0 else lo_ext[e]
            state[e] = _AT_UB if d > 0 else _AT_LB
            continue

        leaving = int(basis[leave_pos])
        piv = w[leave_pos]
        if abs(piv) < _PIV_TOL / 10:
            raise SolverNumericalError("pivot element vanished during basis change")
        enter_val = z[e] + d * step
        z[leaving] = hi_ext[leaving] if leave_to_upper else lo_ext[leaving]
        state[leaving] = _AT_UB if leave_to_upper else _AT_LB
        basis[leave_pos] = e
        state[e] = _BASIC
        x_B[leave_pos] = enter_val
        c_B[leave_pos] = cost[e]

        B_inv[leave_pos, :] /= piv
        rows = np.arange(m) != leave_pos
        B_inv[rows, :] -= np.outer(w[rows], B_inv[leave_pos, :])

        if iters % cfg.refactor_every == 0:
            refactor()
        obj = float(c_B @ x_B)
        if obj > last_obj + 1e-7:
            refactor()                   # monotonicity lost: clean the basis
            obj = float(c_B @ x_B)
        last_obj = obj


# -- interval presolve --------------------------------------------------------

class _Presolver:
    """Bound propagation over the fixed rows; built once, run per node."""

    def __init__(self, A: np.ndarray, rel: np.ndarray, b: np.ndarray,
                 is_bin: np.ndarray):
        self.A, self.rel, self.b, self.is_bin = A, rel, b, is_bin
        self.A_pos = np.maximum(A, 0.0)
        self.A_neg = np.minimum(A, 0.0)
        # every row normalized to <= form for tightening; EQ rows enter twice
        blocks, rhs = [], []
        for mask, sgn in ((rel != GE, 1.0), (rel != LE, -1.0)):
            if np.any(mask):
                blocks.append(sgn * A[mask])
                rhs.append(sgn * b[mask])
        self.N = np.vstack(blocks) if blocks else np.zeros((0, A.shape[1]))
        self.nb = np.concatenate(rhs) if rhs else np.zeros(0)
        self.N_pos = self.N > 1e-12
        self.N_neg = self.N < -1e-12

    def run(self, lo: np.ndarray, hi: np.ndarray, feas_tol: float,
            max_rounds: int = 8) -> tuple[bool, np.ndarray, np.ndarray, np.ndarray]:
        """Returns (consistent, lo, hi, active_row_mask)."""
        lo, hi = lo.copy(), hi.copy()
        rel, b = self.rel, self.b
        m = self.A.shape[0]
        active = np.ones(m, dtype=bool)
        for _ in range(max_rounds):
            if np.any(lo > hi + 1e-9):
                return False, lo, hi, active
            wlo = np.clip(lo, -_HUGE, _HUGE)
            whi = np.clip(hi, -_HUGE, _HUGE)
            minact = self.A_pos @ wlo + self.A_neg @ whi
            maxact = self.A_pos @ whi + self.A_neg @ wlo
            le_like = rel != GE
            ge_like = rel != LE
            if np.any(le_like & (minact > b + feas_tol) & (minact < _NEAR_HUGE)):
                return False, lo, hi, active
            if np.any(ge_like & (maxact < b - feas_tol) & (maxact > -_NEAR_HUGE)):
                return False, lo, hi, active
            redundant = np.ones(m, dtype=bool)
            redundant &= np.where(le_like, maxact <= b, True)
            redundant &= np.where(ge_like, minact >= b, True)
            active = ~redundant

            # min activity of the <=-normalized rows, vectorized
            nmin = np.where(self.N_pos, self.N * wlo[None, :], 0.0).sum(axis=1) \
                + np.where(self.N_neg, self.N * whi[None, :], 0.0).sum(axis=1)
            surplus = self.nb - nmin
            usable = (np.abs(nmin) < _NEAR_HUGE) & (surplus >= -feas_tol)
            new_lo, new_hi = lo.copy(), hi.copy()
            with np.errstate(divide="ignore", invalid="ignore"):
                cand_ub = np.where(self.N_pos & usable[:, None],
                                   wlo[None, :] + surplus[:, None] / self.N,
                                   np.inf)
                ub = cand_ub.min(axis=0) if cand_ub.size else np.full(len(lo), np.inf)
                cand_lb = np.where(self.N_neg & usable[:, None],
                                   whi[None, :] + surplus[:, None] / self.N,
                                   -np.inf)
                lb = cand_lb.max(axis=0) if cand_lb.size else np.full(len(lo), -np.inf)
            ub = np.where(np.isnan(ub) | (ub > _NEAR_HUGE), np.inf, ub)
            lb = np.where(np.isnan(lb) | (lb < -_NEAR_HUGE), -np.inf, lb)
            new_hi = np.minimum(new_hi, ub)
            new_lo = np.maximum(new_lo, lb)
            # integrality rounding for binaries
            bb = self.is_bin
            new_lo[bb] = np.where(new_lo[bb] > 1e-9, 1.0, 0.0)
            new_hi[bb] = np.where(new_hi[bb] < 1.0 - 1e-9, 0.0, 1.0)
            new_lo = np.maximum(new_lo, lo)
            new_hi = np.minimum(new_hi, hi)
            done = (np.all(new_lo <= lo + 1e-9) and np.all(new_hi >= hi - 1e-9))
            lo, hi = new_lo, new_hi
            if done:
                break
        if np.any(lo > hi + 1e-9):
            return False, lo, hi, active
        return True, lo, hi, active


# -- node LP assembly ---------------------------------------------------------

def _solve_node_lp(A, rel, b, lo, hi, active, cfg):
    """Equality-form build (slack per inequality row) and phase-1 solve."""
    Aa, ba = A[active], b[active]
    ra = rel[active]
    ineq = np.where(ra != EQ)[0]
    ma = Aa.shape[0]
    S = np.zeros((ma, len(ineq)))
    for col, i in enumerate(ineq):
        S[i, col] = 1.0 if ra[i] == LE else -1.0
    A_eq = np.hstack([Aa, S]) if len(ineq) else Aa
    lo_eq = np.concatenate([lo, np.zeros(len(ineq))])
    hi_eq = np.concatenate([hi, np.full(len(ineq), np.inf)])
    feasible, zz, y, iters = _phase1_simplex(A_eq, ba, lo_eq, hi_eq, cfg)
    x = zz[: A.shape[1]] if feasible else None
    return feasible, x, y, iters


def check_certificate(problem: MilpProblem, y, tol: float = 1e-7) -> bool:
    """Does the dual vector prove the LP relaxation empty?

    The ray must price inequality rows with the right sign (y <= 0 on <=
    rows, y >= 0 on >= rows) and satisfy  max_{lo<=z<=hi} (A^T y) . z  <
    y . b, which no point inside the bounds can allow.
    """
    A, rel, b, lo, hi, _, _ = problem.to_arrays()
    y = np.asarray(y, dtype=float)
    if y.shape != (A.shape[0],):
        return False
    if np.any((rel == LE) & (y > tol)) or np.any((rel == GE) & (y < -tol)):
        return False
    d = A.T @ y
    box_max = 0.0
    for j in range(A.shape[1]):
        if d[j] > tol:
            if not math.isfinite(hi[j]):
                return False
            box_max += d[j] * hi[j]
        elif d[j] < -tol:
            if not math.isfinite(lo[j]):
                return False
            box_max += d[j] * lo[j]
    return box_max < float(y @ b) - tol


# -- branch and bound -----------------------------------------------------------

def _sos1_groups(A, rel, b, is_bin) -> list[tuple[int, ...]]:
    """Exactly-one rows over binaries: EQ rows of +1 coefficients, rhs 1.

    Any integral solution sets exactly one member of such a group to 1, so
    branching can enumerate the members instead of splitting one binary at
    a time — the branch tree then follows the problem's own choice
    structure (one mode per step) instead of a generic 0/1 tree.
    """
    groups: list[tuple[int, ...]] = []
    seen: set[tuple[int, ...]] = set()
    for i in range(A.shape[0]):
        if rel[i] != EQ or abs(b[i] - 1.0) > 1e-12:
            continue
        cols = np.nonzero(A[i])[0]
        if len(cols) < 2 or not np.all(is_bin[cols]):
            continue
        if not np.allclose(A[i, cols], 1.0, rtol=0.0, atol=1e-12):
            continue
        key = tuple(int(c) for c in cols)
        if key not in seen:
            seen.add(key)
            groups.append(key)
    return groups


def solve_milp(problem: MilpProblem, config: SolverConfig | None = None,
               ) -> SolveResult:
    """Decide feasibility of a sealed problem; witnesses are re-verified."""
    cfg = config or SolverConfig()
    if not problem.sealed:
        problem.seal()
    A, rel, b, lo0, hi0, is_bin, names = problem.to_arrays()
    bin_idx = np.where(is_bin)[0]
    member_group: dict[int, tuple[int, ...]] = {}
    if cfg.sos1_branching:
        for group in _sos1_groups(A, rel, b, is_bin):
            for j in group:
                member_group.setdefault(j, group)
    presolver = _Presolver(A, rel, b, is_bin)
    all_rows = np.ones(len(b), dtype=bool)
    t0 = time.perf_counter()
    nodes = 0
    iters_total = 0

    def out_of_budget() -> bool:
        if nodes >= cfg.node_limit:
            return True
        return cfg.time_limit is not None and (time.perf_counter() - t0) > cfg.time_limit

    def make_witness(x: np.ndarray) -> Witness:
        return Witness({name: float(v) for name, v in zip(names, x)})

    def finish(status, witness=None, message="", certificate=None) -> SolveResult:
        return SolveResult(status, witness, nodes, iters_total,
                           time.perf_counter() - t0, message, certificate)

    def checked_witness(x: np.ndarray) -> Witness:
        w = make_witness(x)
        ok, violations = verify(problem, w, tol=10 * cfg.feas_tolerance,
                                int_tol=cfg.int_tolerance)
        if not ok:
            raise SolverNumericalError(
                "witness failed verification: " + "; ".join(violations[:4]))
        return w

    def try_assignment(lo, hi, x_hint) -> np.ndarray | None:
        """Fix every binary at round(x_hint) and solve the continuous rest."""
        nonlocal iters_total
        lo2, hi2 = lo.copy(), hi.copy()
        snapped = np.round(np.clip(x_hint[bin_idx], 0.0, 1.0))
        lo2[bin_idx] = snapped
        hi2[bin_idx] = snapped
        if cfg.presolve:
            ok, lo2, hi2, active = presolver.run(lo2, hi2, cfg.feas_tolerance)
            if not ok:
                return None
        else:
            active = all_rows
        feasible, x, _, its = _solve_node_lp(A, rel, b, lo2, hi2, active, cfg)
        iters_total += its
        if not feasible:
            return None
        x = x.copy()
        x[bin_idx] = snapped
        return x

    def root_infeasible(y) -> SolveResult:
        """Infeasibility before any branching; attach a clean certificate."""
        nonlocal iters_total, nodes
        if cfg.presolve:
            # duals from a presolve-tightened LP do not certify the original
            # bounds; re-derive them on the untouched problem
            feasible, x, y, its = _solve_node_lp(A, rel, b, lo0, hi0, all_rows, cfg)
            iters_total += its
            nodes += 1
            if feasible:
                # presolve and LP disagree (numerical edge): restart without it
                inner = solve_milp(problem, replace(cfg, presolve=False))
                return SolveResult(inner.status, inner.witness,
                                   nodes + inner.nodes,
                                   iters_total + inner.lp_iterations,
                                   time.perf_counter() - t0,
                                   "presolve disagreed; re-solved without it",
                                   inner.certificate)
        cert = None
        if y is not None and check_certificate(problem, y, cfg.feas_tolerance):
            cert = tuple(map(float, y))
        return finish(INFEASIBLE, certificate=cert)

    if np.any(lo0 > hi0):
        return finish(INFEASIBLE, message="empty variable bounds")

    # DFS over bound boxes; entries are pushed so the preferred branch pops first
    stack: list[tuple[np.ndarray, np.ndarray]] = [(lo0.copy(), hi0.copy())]
    branched = False

    while stack:
        if out_of_budget():
            return finish(BUDGET_EXCEEDED, message=f"stopped after {nodes} nodes")
        lo, hi = stack.pop()
        is_root = not branched and not stack
        if cfg.presolve:
            ok, lo, hi, active = presolver.run(lo, hi, cfg.feas_tolerance)
            if not ok:
                if is_root:
                    return root_infeasible(None)
                continue
        else:
            active = all_rows
        nodes += 1
        feasible, x, y, its = _solve_node_lp(A, rel, b, lo, hi, active, cfg)
        iters_total += its
        if not feasible:
            if is_root:
                return root_infeasible(y)
            continue

        frac = np.abs(x[bin_idx] - np.round(x[bin_idx]))
        open_mask = (hi[bin_idx] - lo[bin_idx]) > 0.5   # not yet fixed
        if is_root and cfg.rounding_heuristic and np.any(frac > cfg.int_tolerance):
            guess = try_assignment(lo, hi, x)
            if guess is not None:
                return finish(FEASIBLE, witness=checked_witness(guess),
                              message="rounding heuristic")

        if np.all(frac <= cfg.int_tolerance):
            if not np.any(open_mask):
                xx = x.copy()
                if len(bin_idx):
                    xx[bin_idx] = np.round(xx[bin_idx])
                return finish(FEASIBLE, witness=checked_witness(xx))
            clean = try_assignment(lo, hi, x)
            if clean is not None:
                return finish(FEASIBLE, witness=checked_witness(clean))
            # integral relaxation but the exact fixing failed: split on the
            # first open binary so the search stays exhaustive
            j = int(bin_idx[np.where(open_mask)[0][0]])
        else:
            masked = np.where(open_mask, frac, -1.0)
            if cfg.branch_rule == "first-fractional":
                j = int(bin_idx[int(np.where(masked > cfg.int_tolerance)[0][0])])
            else:
                j = int(bin_idx[int(np.argmax(masked))])
        branched = True
        group = member_group.get(j)
        if group is not None:
            # Enumerate the group's one-hot assignments; push the child the
            # relaxation prefers last so the DFS dives into it first.
            pinned = [m for m in group if lo[m] > 0.5]
            members = pinned[:1] if pinned else [m for m in group if hi[m] > 0.5]
            members.sort(key=lambda m: (x[m], -m))
            for m in members:
                lo_c, hi_c = lo.copy(), hi.copy()
                lo_c[m] = 1.0
                for other in group:
                    if other != m:
                        hi_c[other] = 0.0
                stack.append((lo_c, hi_c))
            continue
        lo_zero, hi_zero = lo.copy(), hi.copy()
        hi_zero[j] = 0.0
        lo_one, hi_one = lo.copy(), hi.copy()
        lo_one[j] = 1.0
        if cfg.node_order == "zero-first":
            stack.append((lo_one, hi_one))
            stack.append((lo_zero, hi_zero))
        else:
            stack.append((lo_zero, hi_zero))
            stack.append((lo_one, hi_one))

    return finish(INFEASIBLE)
