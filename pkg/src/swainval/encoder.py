"""Mixed-integer encodings of trajectory-consistency questions.

Two builders are provided.  ``encode_invalidation`` turns a switched affine
model plus an observed input-output window into a mixed-integer feasibility
problem whose solutions are exactly the admissible explanations of the data:
a state trajectory inside the state set, a noise sequence inside the noise
set, normalized structured-uncertainty draws in [-1, 1], and a hidden mode
sequence.  Infeasibility means the window invalidates the model.

``encode_t_detectability`` couples two models over a shared, unknown input
sequence and asks whether any length-T behaviour (T transitions, T+1 output
samples) is common to both.  Infeasibility certifies that every window the
second model can generate invalidates the first, which is what makes
receding-horizon monitoring raise an alarm within T steps of a persistent
change.  An optional *indicator* restricts the second model's first W mode
choices to a given word language, for changes that are only detectable when
a particular mode pattern actually occurs.

Naming conventions inside the encodings (mode indices are 1-based, array
indices 0-based):

=====================  =====================================================
``x[k][j]``            state of the first model at sample k, component j
``xb[k][j]``           state of the second model (pair encodings)
``eta[k][q]``          measurement noise, first model
``etab[k][q]``         measurement noise, second model
``u[k][c]``            shared input (pair encodings; data in invalidation)
``a[i][k]``            binary: mode i of the model is active at step k
``d[i][j][k]``         binary: modes (i, j) of the pair are active at step k
``ZA[i][k][r][c]``     product hatA[r,c] * Delta^A[r,c] * x_k[c], mode i
``ZB[i][k][r][c]``     product hatB[r,c] * Delta^B[r,c] * u_k[c], mode i
``ZC[i][k][q][c]``     product hatC[q,c] * Delta^C[q,c] * x_k[c], mode i
``DB[i][k][r][c]``     Delta^B itself where the input is data
``Df[i][k][r]``        Delta^f itself (the offset uncertainty is not bilinear)
``absx[k][c]``         shared auxiliary |x_k[c]| backing the Z bounds
=====================  =====================================================

Bilinear products Z are linearized exactly with ``|Z| <= hat * |x|`` plus a
one-binary absolute-value encoding of ``|x|`` that is shared by every Z
touching the same component.

Both builders tighten the relaxation with a conservative reachability
envelope: the state variables of sample k are bounded by the k-step interval
image of the admissible state box (hulled over modes, intersected with the
box, padded by a hair against rounding), and every mode-gated row carries
the smallest big-M constant valid for its own mode, step and row, derived
from the same intervals.  The ``big_m`` field on an encoding records the
largest row constant actually used (or the caller's override, applied to
every row).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Union

import numpy as np

from .milp import (EQ, FEAS_TOL, GE, LE, MilpProblem, Witness, add_abs_var,
                   bound_by_abs, _interval_product, _require_bounded)
from .model import (DimensionError, HyperRectangle, SimulationDraw,
                    SwitchedAffineModel, Trajectory)
from .solver import (BUDGET_EXCEEDED, FEASIBLE, INFEASIBLE, SolveResult,
                     SolverConfig, solve_milp)

__all__ = [
    "CONSISTENT", "INVALIDATED", "UNDECIDED",
    "InputOutsideAdmissibleSet", "EmptyInputIntersection",
    "WindowTooLong", "BadMode", "BadIndicator",
    "ExplicitWords", "StructuredTuple", "CountBand", "Indicator",
    "prefix_indicator", "indicator_window",
    "InvalidationEncoding", "PairEncoding",
    "encode_invalidation", "encode_t_detectability", "apply_indicator",
    "Explanation", "CommonBehavior",
    "decode_invalidation_witness", "decode_pair_witness",
    "InvalidationResult", "check_invalidation",
]

CONSISTENT = "consistent"
INVALIDATED = "invalidated"
UNDECIDED = "undecided"

_TINY = 1e-12


class InputOutsideAdmissibleSet(ValueError):
    """An observed input sample falls outside the model's input set."""

    def __init__(self, k: int, value: np.ndarray):
        super().__init__(f"input sample {k} lies outside the admissible input set")
        self.k = k
        self.value = np.asarray(value, dtype=float)


class EmptyInputIntersection(ValueError):
    """The two models admit no common input, so no shared behaviour exists."""


class WindowTooLong(ValueError):
    """An indicator window exceeds the encoding horizon."""


class BadMode(ValueError):
    """An indicator references a mode index the model does not have."""


class BadIndicator(ValueError):
    """An indicator is structurally invalid."""


# -- indicators --------------------------------------------------------------


@dataclass(frozen=True)
class ExplicitWords:
    """A finite set of allowed mode words, all of the same length.

    Mode indices are 1-based.  A pair encoding restricted by this indicator
    admits only behaviours whose second-model mode sequence starts with one
    of the words.
    """

    words: tuple[tuple[int, ...], ...]

    def __init__(self, words):
        tidy = tuple(tuple(int(m) for m in w) for w in words)
        if not tidy:
            raise BadIndicator("an explicit-word indicator needs at least one word")
        W = len(tidy[0])
        if W < 1:
            raise BadIndicator("indicator words must have length >= 1")
        if any(len(w) != W for w in tidy):
            raise BadIndicator("all indicator words must have the same length")
        if any(m < 1 for w in tidy for m in w):
            raise BadMode("mode indices in indicator words are 1-based")
        object.__setattr__(self, "words", tidy)

    @property
    def window(self) -> int:
        return len(self.words[0])


@dataclass(frozen=True)
class StructuredTuple:
    """Counting indicator (S, W, m, O): within the first W steps, the number
    of second-model modes drawn from S is '<' (at most m-1), '=' (exactly m)
    or '>' (at least m)."""

    modes: tuple[int, ...]
    window: int
    count: int
    relation: str

    def __init__(self, modes, window: int, count: int, relation: str):
        tidy = tuple(sorted({int(m) for m in modes}))
        if not tidy:
            raise BadIndicator("the mode set S of a structured indicator is empty")
        if any(m < 1 for m in tidy):
            raise BadMode("mode indices in indicators are 1-based")
        window = int(window)
        count = int(count)
        if window < 1:
            raise BadIndicator("the indicator window W must be >= 1")
        if not 0 <= count <= window:
            raise BadIndicator(f"the count m must satisfy 0 <= m <= W, got {count}")
        if relation not in ("<", "=", ">"):
            raise BadIndicator(f"the relation O must be '<', '=' or '>', got {relation!r}")
        object.__setattr__(self, "modes", tidy)
        object.__setattr__(self, "window", window)
        object.__setattr__(self, "count", count)
        object.__setattr__(self, "relation", relation)


@dataclass(frozen=True)
class CountBand:
    """Normal form of a counting restriction over a (possibly truncated)
    window: at_least <= #{k < window : mode_k in modes} <= at_most.

    This is what a structured indicator reduces to when a horizon shorter
    than its window forces reasoning about word prefixes.
    """

    modes: tuple[int, ...]
    window: int
    at_least: int
    at_most: int

    def __init__(self, modes, window: int, at_least: int, at_most: int):
        tidy = tuple(sorted({int(m) for m in modes}))
        if not tidy or any(m < 1 for m in tidy):
            raise BadIndicator("a count band needs a nonempty set of 1-based modes")
        window = int(window)
        at_least = max(0, int(at_least))
        at_most = min(int(at_most), window)
        if window < 1:
            raise BadIndicator("the count-band window must be >= 1")
        if at_least > at_most:
            raise BadIndicator("the count band is empty (at_least > at_most)")
        object.__setattr__(self, "modes", tidy)
        object.__setattr__(self, "window", window)
        object.__setattr__(self, "at_least", at_least)
        object.__setattr__(self, "at_most", at_most)


Indicator = Union[ExplicitWords, StructuredTuple, CountBand]


def indicator_window(indicator: Indicator) -> int:
    return indicator.window


def prefix_indicator(indicator: Indicator, horizon: int) -> Indicator:
    """Restrict an indicator to what it implies about the first ``horizon``
    mode choices.

    A word of the original language may extend past the horizon; the
    restriction keeps exactly its length-``horizon`` prefixes.  For a
    counting indicator with window W > horizon this yields a count *band*:
    a prefix can already show at most min(m, horizon) hits and, since only
    W - horizon steps remain, must already show at least m - (W - horizon).
    """
    if horizon < 1:
        raise ValueError("the horizon must be >= 1")
    if isinstance(indicator, ExplicitWords):
        if indicator.window <= horizon:
            return indicator
        seen = []
        for w in indicator.words:
            p = w[:horizon]
            if p not in seen:
                seen.append(p)
        return ExplicitWords(tuple(seen))
    if isinstance(indicator, CountBand):
        if indicator.window <= horizon:
            return indicator
        slack = indicator.window - horizon
        return CountBand(indicator.modes, horizon,
                         indicator.at_least - slack,
                         min(indicator.at_most, horizon))
    if isinstance(indicator, StructuredTuple):
        W, m, O = indicator.window, indicator.count, indicator.relation
        if O == "<":
            lo, hi = 0, m - 1
        elif O == "=":
            lo, hi = m, m
        else:
            lo, hi = m, W
        if W <= horizon:
            return indicator
        slack = W - horizon
        return CountBand(indicator.modes, horizon, lo - slack, min(hi, horizon))
    raise TypeError(f"not an indicator: {indicator!r}")


# -- encodings ---------------------------------------------------------------


@dataclass
class InvalidationEncoding:
    """A sealed-ready feasibility problem for one model and one data window.

    ``var_index`` maps semantic roles to variable names:

    - ``("x", k)`` / ``("eta", k)``: tuples of names, one per component;
    - ``("a", i, k)``: the mode binary;
    - ``("ZA", i, k)`` / ``("ZC", i, k)``: dicts ``(row, col) -> name``;
    - ``("DB", i, k)``: dict ``(row, col) -> name``;
    - ``("Df", i, k)``: dict ``row -> name``;
    - ``("absx", k, c)``: the shared |x_k[c]| auxiliary.
    """

    problem: MilpProblem
    var_index: dict
    big_m: float
    model: SwitchedAffineModel
    trajectory: Trajectory

    @property
    def n_samples(self) -> int:
        return len(self.trajectory)


@dataclass
class PairEncoding:
    """A feasibility problem for a shared length-``horizon`` behaviour.

    ``horizon`` counts transitions: the encoding couples ``horizon + 1``
    output samples and ``horizon`` dynamics steps of both models over one
    shared input sequence.  ``var_index`` follows the same role scheme as
    ``InvalidationEncoding``, with second-model roles suffixed ``b``
    (``("xb", k)``, ``("ZAb", j, k)``, ...), pair binaries under
    ``("d", i, j, k)`` and shared inputs under ``("u", k)``.

    When every mode of both models shares one identical, certain output map
    the per-mode output rows of the two sides collapse to ungated matching
    equalities (``collapsed`` is then True) and the final sample needs no
    mode binaries.
    """

    problem: MilpProblem
    var_index: dict
    big_m: float
    system: SwitchedAffineModel
    fault: SwitchedAffineModel
    horizon: int
    input_set: HyperRectangle
    collapsed: bool
    binary_steps: tuple[int, ...]
    indicator: Indicator | None = None


def _check_trajectory(model: SwitchedAffineModel, traj: Trajectory) -> None:
    if traj.inputs.shape[1] != model.n_u:
        raise DimensionError(
            f"trajectory has {traj.inputs.shape[1]} input columns, model expects {model.n_u}")
    if traj.outputs.shape[1] != model.n_y:
        raise DimensionError(
            f"trajectory has {traj.outputs.shape[1]} output columns, model expects {model.n_y}")


def _add_box_vars(p: MilpProblem, stem: str, k: int, box: HyperRectangle) -> tuple[str, ...]:
    return tuple(p.add_continuous(f"{stem}[{k}][{j}]", box.lower[j], box.upper[j])
                 for j in range(box.dim))


def _add_interval_vars(p: MilpProblem, stem: str, k: int,
                       lo: np.ndarray, hi: np.ndarray) -> tuple[str, ...]:
    return tuple(p.add_continuous(f"{stem}[{k}][{j}]", float(lo[j]), float(hi[j]))
                 for j in range(len(lo)))


_TUBE_PAD = 1e-9


def _propagate_boxes(model: SwitchedAffineModel, n_samples: int, drive):
    """Conservative per-sample envelope of model-consistent state windows.

    Starting from the admissible state box, the box of sample k + 1 is the
    interval hull over modes of the one-step update applied to the box of
    sample k — ``drive(i, k)`` supplies mode i's input contribution at step
    k as an interval — intersected with the admissible box and padded by a
    hair against rounding.  Any state window every model explanation can
    use stays inside the envelope, so it is safe to bound the encoding's
    state variables by it.

    Returns ``(boxes, dyn_lo, dyn_hi, out_lo, out_hi)``: per-sample
    ``(lower, upper)`` pairs plus the per-(step, mode) update and output
    expression intervals from which row-specific big-M constants derive.
    """
    xl0 = np.asarray(model.state_set.lower, dtype=float)
    xu0 = np.asarray(model.state_set.upper, dtype=float)
    el = np.asarray(model.noise_set.lower, dtype=float)
    eu = np.asarray(model.noise_set.upper, dtype=float)
    boxes = [(xl0, xu0)]
    dyn_lo: list[list[np.ndarray]] = []
    dyn_hi: list[list[np.ndarray]] = []
    out_lo: list[list[np.ndarray]] = []
    out_hi: list[list[np.ndarray]] = []
    for k in range(n_samples):
        xl, xu = boxes[k]
        xmax = np.maximum(np.abs(xl), np.abs(xu))
        olo: list[np.ndarray] = []
        ohi: list[np.ndarray] = []
        for mode in model.modes:
            clo, chi = _interval_product(mode.C, xl, xu)
            spread = mode.hatC @ xmax
            olo.append(clo + el - spread)
            ohi.append(chi + eu + spread)
        out_lo.append(olo)
        out_hi.append(ohi)
        if k == n_samples - 1:
            break
        slo: list[np.ndarray] = []
        shi: list[np.ndarray] = []
        for i, mode in enumerate(model.modes, start=1):
            alo, ahi = _interval_product(mode.A, xl, xu)
            spread = mode.hatA @ xmax + mode.hatf
            dlo, dhi = drive(i, k)
            slo.append(alo + mode.f - spread + dlo)
            shi.append(ahi + mode.f + spread + dhi)
        dyn_lo.append(slo)
        dyn_hi.append(shi)
        nxl = np.maximum(xl0, np.min(slo, axis=0) - _TUBE_PAD)
        nxu = np.minimum(xu0, np.max(shi, axis=0) + _TUBE_PAD)
        if np.any(nxl > nxu):
            # No window this long exists at all; keep the loose box and let
            # the rows certify the infeasibility.
            nxl, nxu = xl0, xu0
        boxes.append((nxl, nxu))
    return boxes, dyn_lo, dyn_hi, out_lo, out_hi


class _AbsCache:
    """Shared |v| auxiliaries: one (z, binary) pair per underlying variable."""

    def __init__(self, p: MilpProblem, var_index: dict, stem: str):
        self.p = p
        self.var_index = var_index
        self.stem = stem
        self._cache: dict[tuple[int, int], str] = {}

    def get(self, k: int, c: int, name: str, sup_abs: float) -> str:
        key = (k, c)
        if key not in self._cache:
            z, _b = add_abs_var(self.p, name, big_m=2.0 * sup_abs,
                                tag=f"{self.stem}[{k}][{c}]")
            self._cache[key] = z
            self.var_index[(self.stem, k, c)] = z
        return self._cache[key]


def _gated_rows(p: MilpProblem, stem: str, terms, rhs: float, big_m: float,
                gate_terms) -> None:
    """Add |sum(terms) - rhs| <= big_m * (1 - gate) as two rows.

    ``gate_terms`` is a list of (coef, binary) whose integral value is 0
    or 1; the row pair binds exactly when the gate is 1.
    """
    up = list(terms) + [(big_m * c, v) for c, v in gate_terms]
    lo = list(terms) + [(-big_m * c, v) for c, v in gate_terms]
    p.add_constraint(f"{stem}+", up, LE, rhs + big_m)
    p.add_constraint(f"{stem}-", lo, GE, rhs - big_m)


def _uncertain_state_terms(p: MilpProblem, var_index: dict, absx: _AbsCache,
                           mode, za_role: str, df_role: str, i: int, k: int,
                           x_names, xmax) -> dict[int, list[tuple[float, str]]]:
    """Create ZA / Df variables for (mode i, step k); return per-row terms."""
    per_row: dict[int, list[tuple[float, str]]] = {}
    za_names: dict[tuple[int, int], str] = {}
    for r, c in zip(*np.nonzero(mode.hatA)):
        r, c = int(r), int(c)
        bound = mode.hatA[r, c] * xmax[c]
        za = p.add_continuous(f"{za_role}[{i}][{k}][{r}][{c}]", -bound, bound)
        z = absx.get(k, c, x_names[c], xmax[c])
        bound_by_abs(p, za, float(mode.hatA[r, c]), z)
        za_names[(r, c)] = za
        per_row.setdefault(r, []).append((-1.0, za))
    if za_names:
        var_index[(za_role, i, k)] = za_names
    df_names: dict[int, str] = {}
    for r in np.nonzero(mode.hatf)[0]:
        r = int(r)
        df = p.add_continuous(f"{df_role}[{i}][{k}][{r}]", -1.0, 1.0)
        df_names[r] = df
        per_row.setdefault(r, []).append((-float(mode.hatf[r]), df))
    if df_names:
        var_index[(df_role, i, k)] = df_names
    return per_row


def _output_terms(p: MilpProblem, var_index: dict, absx: _AbsCache, mode,
                  role: str, i: int, k: int, x_names, eta_names, xmax,
                  sign: float = 1.0) -> list[list[tuple[float, str]]]:
    """Terms of the uncertain output map for (mode i, sample k), per row q."""
    n_y = mode.n_y
    rows: list[list[tuple[float, str]]] = [[] for _ in range(n_y)]
    for q in range(n_y):
        for j, coef in enumerate(mode.C[q]):
            if coef != 0.0:
                rows[q].append((sign * float(coef), x_names[j]))
        rows[q].append((sign, eta_names[q]))
    zc_names: dict[tuple[int, int], str] = {}
    for q, c in zip(*np.nonzero(mode.hatC)):
        q, c = int(q), int(c)
        bound = mode.hatC[q, c] * xmax[c]
        zc = p.add_continuous(f"{role}[{i}][{k}][{q}][{c}]", -bound, bound)
        z = absx.get(k, c, x_names[c], xmax[c])
        bound_by_abs(p, zc, float(mode.hatC[q, c]), z)
        zc_names[(q, c)] = zc
        rows[q].append((sign, zc))
    if zc_names:
        var_index[(role, i, k)] = zc_names
    return rows


def encode_invalidation(model: SwitchedAffineModel, trajectory: Trajectory,
                        *, big_m: float | None = None) -> InvalidationEncoding:
    """Build the consistency feasibility problem for one data window.

    Raises InputOutsideAdmissibleSet when an observed input violates the
    model's input set (such data can never be explained, whatever the
    states), and UnboundedSet when the admissible sets are too loose to
    derive a big-M constant.
    """
    _check_trajectory(model, trajectory)
    N = len(trajectory)
    if N < 1:
        raise ValueError("the data window must contain at least one sample")
    U = model.input_set
    for k in range(N):
        if model.n_u and not U.contains(trajectory.inputs[k], tol=1e-9):
            raise InputOutsideAdmissibleSet(k, trajectory.inputs[k])

    # Row-specific big-M values and per-sample state bounds: the reachability
    # envelope (the observed input enters exactly, not via its box) shrinks
    # the variable boxes, and each gated row gets the smallest constant that
    # provably relaxes it over the envelope.  An explicit ``big_m`` bypasses
    # the interval machinery entirely and is applied to every row.
    if big_m is not None:
        fixed = float(big_m)
        tube = [(np.asarray(model.state_set.lower, dtype=float),
                 np.asarray(model.state_set.upper, dtype=float))] * N

        def dyn_m(i: int, k: int, r: int) -> float:
            return fixed

        def out_m(i: int, k: int, q: int) -> float:
            return fixed

        M = fixed
    else:
        _require_bounded(model.state_set, "the state set")
        _require_bounded(model.noise_set, "the noise set")

        def data_drive(i: int, k: int) -> tuple[np.ndarray, np.ndarray]:
            if not model.n_u:
                zero = np.zeros(model.n)
                return zero, zero
            mode = model.modes[i - 1]
            push = mode.B @ trajectory.inputs[k]
            slack = mode.hatB @ np.abs(trajectory.inputs[k])
            return push - slack, push + slack

        tube, step_lo, step_hi, expr_lo, expr_hi = \
            _propagate_boxes(model, N, data_drive)

        def dyn_m(i: int, k: int, r: int) -> float:
            lo_next, hi_next = tube[k + 1]
            return 1.05 * max(hi_next[r] - step_lo[k][i - 1][r],
                              step_hi[k][i - 1][r] - lo_next[r], 1e-6)

        def out_m(i: int, k: int, q: int) -> float:
            y = float(trajectory.outputs[k, q])
            return 1.05 * max(y - expr_lo[k][i - 1][q],
                              expr_hi[k][i - 1][q] - y, 1e-6)

        M = max(max((dyn_m(i, k, r) for i in range(1, model.s + 1)
                     for k in range(N - 1) for r in range(model.n)),
                    default=0.0),
                max(out_m(i, k, q) for i in range(1, model.s + 1)
                    for k in range(N) for q in range(model.n_y)))

    p = MilpProblem(name=f"invalidation[{model.name or 'model'}][N={N}]")
    var_index: dict = {}
    xmaxes = [np.maximum(np.abs(lo), np.abs(hi)) for lo, hi in tube]

    x = [_add_interval_vars(p, "x", k, *tube[k]) for k in range(N)]
    eta = [_add_box_vars(p, "eta", k, model.noise_set) for k in range(N)]
    for k in range(N):
        var_index[("x", k)] = x[k]
        var_index[("eta", k)] = eta[k]
    a = {}
    for k in range(N):
        for i in range(1, model.s + 1):
            a[(i, k)] = p.add_binary(f"a[{i}][{k}]")
            var_index[("a", i, k)] = a[(i, k)]
        p.add_constraint(f"mode[{k}]", [(1.0, a[(i, k)]) for i in range(1, model.s + 1)],
                         EQ, 1.0)

    absx = _AbsCache(p, var_index, "absx")
    for k in range(N):
        u_k = trajectory.inputs[k] if model.n_u else np.zeros(0)
        y_k = trajectory.outputs[k]
        for i, mode in enumerate(model.modes, start=1):
            gate = [(1.0, a[(i, k)])]
            out_rows = _output_terms(p, var_index, absx, mode, "ZC", i, k,
                                     x[k], eta[k], xmaxes[k])
            for q in range(model.n_y):
                _gated_rows(p, f"out[{i}][{k}][{q}]", out_rows[q],
                            float(y_k[q]), out_m(i, k, q), gate)
            if k == N - 1:
                continue
            unc = _uncertain_state_terms(p, var_index, absx, mode, "ZA", "Df",
                                         i, k, x[k], xmaxes[k])
            db_names: dict[tuple[int, int], str] = {}
            for r, c in zip(*np.nonzero(mode.hatB)):
                r, c = int(r), int(c)
                db = p.add_continuous(f"DB[{i}][{k}][{r}][{c}]", -1.0, 1.0)
                db_names[(r, c)] = db
                coef = -float(mode.hatB[r, c] * u_k[c])
                if coef != 0.0:
                    unc.setdefault(r, []).append((coef, db))
            if db_names:
                var_index[("DB", i, k)] = db_names
            drive = mode.B @ u_k if model.n_u else np.zeros(model.n)
            for r in range(model.n):
                terms = [(1.0, x[k + 1][r])]
                terms += [(-float(coef), x[k][j])
                          for j, coef in enumerate(mode.A[r]) if coef != 0.0]
                terms += unc.get(r, [])
                rhs = float(drive[r] + mode.f[r])
                _gated_rows(p, f"dyn[{i}][{k}][{r}]", terms, rhs,
                            dyn_m(i, k, r), gate)

    return InvalidationEncoding(p, var_index, M, model, trajectory)


def _common_certain_output(system: SwitchedAffineModel,
                           fault: SwitchedAffineModel) -> bool:
    ref = system.modes[0].C
    for model in (system, fault):
        for mode in model.modes:
            if np.any(mode.hatC != 0.0) or not np.array_equal(mode.C, ref):
                return False
    return True


def encode_t_detectability(system: SwitchedAffineModel,
                           fault: SwitchedAffineModel, horizon: int, *,
                           indicator: Indicator | None = None,
                           big_m: float | None = None) -> PairEncoding:
    """Couple two models over one unknown input for ``horizon`` transitions.

    The problem is feasible iff some input-output window of horizon + 1
    samples lies in both models' behaviours; infeasibility certifies
    detectability at this horizon.  Raises EmptyInputIntersection when the
    models share no admissible input at all.
    """
    if horizon < 1:
        raise ValueError("the horizon must be >= 1 (it counts transitions)")
    if system.n_y != fault.n_y:
        raise DimensionError("the two models must share the output dimension")
    if system.n_u != fault.n_u:
        raise DimensionError("the two models must share the input dimension")
    T = int(horizon)
    n_u = system.n_u
    U = system.input_set.intersect(fault.input_set) if n_u \
        else HyperRectangle([], [])
    if n_u and U.is_empty:
        raise EmptyInputIntersection(
            "the models admit no common input, so no shared behaviour exists")

    collapsed = _common_certain_output(system, fault)
    binary_steps = tuple(range(T)) if collapsed else tuple(range(T + 1))

    # Row-specific big-M values and per-sample state bounds from each side's
    # reachability envelope (inputs enter via the shared box); the scalar
    # stored on the encoding is the largest row constant (or the caller's
    # override, which bypasses the interval machinery and binds every row).
    if big_m is not None:
        fixed = float(big_m)
        tube1 = [(np.asarray(system.state_set.lower, dtype=float),
                  np.asarray(system.state_set.upper, dtype=float))] * (T + 1)
        tube2 = [(np.asarray(fault.state_set.lower, dtype=float),
                  np.asarray(fault.state_set.upper, dtype=float))] * (T + 1)

        def dyn_m(side: int, i: int, k: int, r: int) -> float:
            return fixed

        def match_m(i: int, j: int, k: int, q: int) -> float:
            return fixed

        M = fixed
    else:
        for model in (system, fault):
            _require_bounded(model.state_set, "the state set")
            _require_bounded(model.noise_set, "the noise set")
        if n_u:
            _require_bounded(U, "the input set")

        def box_drive(model: SwitchedAffineModel):
            if not n_u:
                zero = np.zeros(model.n)
                per_mode = [(zero, zero)] * model.s
            else:
                ul = np.asarray(U.lower, dtype=float)
                uu = np.asarray(U.upper, dtype=float)
                um = np.maximum(np.abs(ul), np.abs(uu))
                per_mode = []
                for mode in model.modes:
                    blo, bhi = _interval_product(mode.B, ul, uu)
                    spread = mode.hatB @ um
                    per_mode.append((blo - spread, bhi + spread))
            return lambda i, k: per_mode[i - 1]

        tube1, s_lo, s_hi, s_olo, s_ohi = \
            _propagate_boxes(system, T + 1, box_drive(system))
        tube2, f_lo, f_hi, f_olo, f_ohi = \
            _propagate_boxes(fault, T + 1, box_drive(fault))

        def dyn_m(side: int, i: int, k: int, r: int) -> float:
            if side == 1:
                tube, lo, hi = tube1, s_lo, s_hi
            else:
                tube, lo, hi = tube2, f_lo, f_hi
            lo_next, hi_next = tube[k + 1]
            return 1.05 * max(hi_next[r] - lo[k][i - 1][r],
                              hi[k][i - 1][r] - lo_next[r], 1e-6)

        def match_m(i: int, j: int, k: int, q: int) -> float:
            return 1.05 * max(s_ohi[k][i - 1][q] - f_olo[k][j - 1][q],
                              f_ohi[k][j - 1][q] - s_olo[k][i - 1][q], 1e-6)

        M = max(max(dyn_m(1, i, k, r) for i in range(1, system.s + 1)
                    for k in range(T) for r in range(system.n)),
                max(dyn_m(2, j, k, r) for j in range(1, fault.s + 1)
                    for k in range(T) for r in range(fault.n)))
        if not collapsed:
            M = max(M, max(match_m(i, j, k, q)
                           for i in range(1, system.s + 1)
                           for j in range(1, fault.s + 1)
                           for k in range(T + 1)
                           for q in range(system.n_y)))

    p = MilpProblem(name=f"detectability[T={T}]")
    var_index: dict = {}
    xmax1 = [np.maximum(np.abs(lo), np.abs(hi)) for lo, hi in tube1]
    xmax2 = [np.maximum(np.abs(lo), np.abs(hi)) for lo, hi in tube2]
    umax = np.maximum(np.abs(U.lower), np.abs(U.upper)) if n_u else np.zeros(0)

    x1 = [_add_interval_vars(p, "x", k, *tube1[k]) for k in range(T + 1)]
    x2 = [_add_interval_vars(p, "xb", k, *tube2[k]) for k in range(T + 1)]
    e1 = [_add_box_vars(p, "eta", k, system.noise_set) for k in range(T + 1)]
    e2 = [_add_box_vars(p, "etab", k, fault.noise_set) for k in range(T + 1)]
    u = [_add_box_vars(p, "u", k, U) for k in range(T)]
    for k in range(T + 1):
        var_index[("x", k)] = x1[k]
        var_index[("xb", k)] = x2[k]
        var_index[("eta", k)] = e1[k]
        var_index[("etab", k)] = e2[k]
    for k in range(T):
        var_index[("u", k)] = u[k]

    d = {}
    for k in binary_steps:
        for i in range(1, system.s + 1):
            for j in range(1, fault.s + 1):
                d[(i, j, k)] = p.add_binary(f"d[{i}][{j}][{k}]")
                var_index[("d", i, j, k)] = d[(i, j, k)]
        p.add_constraint(f"pair[{k}]",
                         [(1.0, d[(i, j, k)])
                          for i in range(1, system.s + 1)
                          for j in range(1, fault.s + 1)],
                         EQ, 1.0)

    absx1 = _AbsCache(p, var_index, "absx")
    absx2 = _AbsCache(p, var_index, "absxb")
    absu = _AbsCache(p, var_index, "absu")

    def input_terms(p_, mode, role: str, i: int, k: int):
        """B u + ZB terms (shared input is a variable here)."""
        per_row: dict[int, list[tuple[float, str]]] = {}
        for r in range(mode.n):
            row = [(-float(coef), u[k][c])
                   for c, coef in enumerate(mode.B[r]) if coef != 0.0]
            if row:
                per_row[r] = row
        zb_names: dict[tuple[int, int], str] = {}
        for r, c in zip(*np.nonzero(mode.hatB)):
            r, c = int(r), int(c)
            bound = mode.hatB[r, c] * umax[c]
            zb = p_.add_continuous(f"{role}[{i}][{k}][{r}][{c}]", -bound, bound)
            z = absu.get(k, c, u[k][c], umax[c])
            bound_by_abs(p_, zb, float(mode.hatB[r, c]), z)
            zb_names[(r, c)] = zb
            per_row.setdefault(r, []).append((-1.0, zb))
        if zb_names:
            var_index[(role, i, k)] = zb_names
        return per_row

    def state_rows(model, x_, absx_, xmax_, side: int):
        s_other = fault.s if side == 1 else system.s
        stem = "dyn" if side == 1 else "dynb"
        za_role, df_role = ("ZA", "Df") if side == 1 else ("ZAb", "Dfb")
        zbrole = "ZB" if side == 1 else "ZBb"
        for k in range(T):
            for i, mode in enumerate(model.modes, start=1):
                if side == 1:
                    gate = [(1.0, d[(i, j, k)]) for j in range(1, s_other + 1)]
                else:
                    gate = [(1.0, d[(jj, i, k)]) for jj in range(1, s_other + 1)]
                unc = _uncertain_state_terms(p, var_index, absx_, mode,
                                             za_role, df_role, i, k, x_[k],
                                             xmax_[k])
                drive = input_terms(p, mode, zbrole, i, k) if n_u else {}
                for r in range(mode.n):
                    terms = [(1.0, x_[k + 1][r])]
                    terms += [(-float(coef), x_[k][j])
                              for j, coef in enumerate(mode.A[r]) if coef != 0.0]
                    terms += unc.get(r, [])
                    terms += drive.get(r, [])
                    _gated_rows(p, f"{stem}[{i}][{k}][{r}]", terms,
                                float(mode.f[r]), dyn_m(side, i, k, r), gate)

    state_rows(system, x1, absx1, xmax1, side=1)
    state_rows(fault, x2, absx2, xmax2, side=2)

    if collapsed:
        C = system.modes[0].C
        for k in range(T + 1):
            for q in range(system.n_y):
                terms = [(float(coef), x1[k][j])
                         for j, coef in enumerate(C[q]) if coef != 0.0]
                terms += [(-float(coef), x2[k][j])
                          for j, coef in enumerate(C[q]) if coef != 0.0]
                terms += [(1.0, e1[k][q]), (-1.0, e2[k][q])]
                p.add_constraint(f"match[{k}][{q}]", terms, EQ, 0.0)
    else:
        for k in range(T + 1):
            side1 = {}
            side2 = {}
            for i, mode in enumerate(system.modes, start=1):
                side1[i] = _output_terms(p, var_index, absx1, mode, "ZC",
                                         i, k, x1[k], e1[k], xmax1[k])
            for j, mode in enumerate(fault.modes, start=1):
                side2[j] = _output_terms(p, var_index, absx2, mode, "ZCb",
                                         j, k, x2[k], e2[k], xmax2[k],
                                         sign=-1.0)
            for i in range(1, system.s + 1):
                for j in range(1, fault.s + 1):
                    gate = [(1.0, d[(i, j, k)])]
                    for q in range(system.n_y):
                        terms = side1[i][q] + side2[j][q]
                        _gated_rows(p, f"match[{i}][{j}][{k}][{q}]",
                                    terms, 0.0, match_m(i, j, k, q), gate)

    enc = PairEncoding(p, var_index, M, system, fault, T, U, collapsed,
                       binary_steps)
    if indicator is not None:
        apply_indicator(enc, indicator)
    return enc


def apply_indicator(enc: PairEncoding, indicator: Indicator) -> None:
    """Restrict the second model's first W mode choices to the indicator.

    Raises WindowTooLong when the window exceeds the encoding horizon and
    BadMode when the indicator references a mode the second model lacks.
    Counting indicators become one linear row over the pair binaries; an
    explicit word set uses one selection binary per word with an exact
    product linearization.
    """
    if enc.indicator is not None:
        raise BadIndicator("this encoding already carries an indicator")
    W = indicator_window(indicator)
    if W > enc.horizon:
        raise WindowTooLong(
            f"indicator window {W} exceeds the encoding horizon {enc.horizon}")
    p = enc.problem
    s1, s2 = enc.system.s, enc.fault.s

    def occupancy(j: int, k: int) -> list[tuple[float, str]]:
        return [(1.0, enc.var_index[("d", i, j, k)]) for i in range(1, s1 + 1)]

    def check_modes(modes) -> None:
        for m in modes:
            if not 1 <= m <= s2:
                raise BadMode(f"indicator mode {m} not in 1..{s2}")

    if isinstance(indicator, (StructuredTuple, CountBand)):
        check_modes(indicator.modes)
        terms = [t for k in range(W) for j in indicator.modes
                 for t in occupancy(j, k)]
        if isinstance(indicator, StructuredTuple):
            if indicator.relation == "<":
                p.add_constraint("ind.count", terms, LE, indicator.count - 1)
            elif indicator.relation == "=":
                p.add_constraint("ind.count", terms, EQ, indicator.count)
            else:
                p.add_constraint("ind.count", terms, GE, indicator.count)
        else:
            if indicator.at_least > 0:
                p.add_constraint("ind.count.lo", terms, GE, indicator.at_least)
            if indicator.at_most < W:
                p.add_constraint("ind.count.hi", terms, LE, indicator.at_most)
    elif isinstance(indicator, ExplicitWords):
        for w in indicator.words:
            check_modes(w)
        word_bins = []
        for widx, word in enumerate(indicator.words):
            b = p.add_binary(f"ind.word[{widx}]")
            word_bins.append(b)
            sels = []
            for k, mode_j in enumerate(word):
                sel = p.add_continuous(f"ind.sel[{widx}][{k}]", 0.0, 1.0)
                sels.append(sel)
                occ = occupancy(mode_j, k)
                p.add_constraint(f"ind.sel.b[{widx}][{k}]",
                                 [(1.0, sel), (-1.0, b)], LE, 0.0)
                p.add_constraint(f"ind.sel.d[{widx}][{k}]",
                                 [(1.0, sel)] + [(-c, v) for c, v in occ], LE, 0.0)
                p.add_constraint(f"ind.sel.lo[{widx}][{k}]",
                                 [(1.0, sel), (-1.0, b)] + [(-c, v) for c, v in occ],
                                 GE, -1.0)
            p.add_constraint(f"ind.word.all[{widx}]",
                             [(1.0, s) for s in sels] + [(-float(W), b)], EQ, 0.0)
        p.add_constraint("ind.some.word", [(1.0, b) for b in word_bins], GE, 1.0)
    else:
        raise TypeError(f"not an indicator: {indicator!r}")
    enc.indicator = indicator


# -- witness decoding --------------------------------------------------------


@dataclass(frozen=True)
class Explanation:
    """A decoded consistency witness: everything needed to replay the data."""

    states: np.ndarray          # (N, n)
    noise: np.ndarray           # (N, n_y)
    mode_sequence: tuple[int, ...]  # 0-based, per sample
    draw: SimulationDraw


def _recover_delta(z_value: float, hat: float, carrier: float) -> float:
    denom = hat * carrier
    if abs(denom) <= _TINY:
        return 0.0
    return float(np.clip(z_value / denom, -1.0, 1.0))


def _decode_side(model: SwitchedAffineModel, w: Witness, var_index: Mapping,
                 n_samples: int, *, x_role: str, eta_role: str,
                 mode_of, za_role: str, zb_role: str, db_role: str | None,
                 df_role: str, zc_role: str,
                 u_data: np.ndarray | None) -> Explanation:
    n, n_u, n_y = model.n, model.n_u, model.n_y
    states = np.array([[w[v] for v in var_index[(x_role, k)]]
                       for k in range(n_samples)])
    noise = np.array([[w[v] for v in var_index[(eta_role, k)]]
                      for k in range(n_samples)]).reshape(n_samples, n_y)
    modes0 = tuple(mode_of(k) for k in range(n_samples))
    DA = np.zeros((n_samples, n, n))
    DB = np.zeros((n_samples, n, n_u))
    DC = np.zeros((n_samples, n_y, n))
    Df = np.zeros((n_samples, n))
    for k in range(n_samples):
        i = modes0[k] + 1
        mode = model.modes[modes0[k]]
        for (r, c), name in var_index.get((za_role, i, k), {}).items():
            DA[k, r, c] = _recover_delta(w[name], mode.hatA[r, c], states[k, c])
        for (q, c), name in var_index.get((zc_role, i, k), {}).items():
            DC[k, q, c] = _recover_delta(w[name], mode.hatC[q, c], states[k, c])
        for r, name in var_index.get((df_role, i, k), {}).items():
            Df[k, r] = float(np.clip(w[name], -1.0, 1.0))
        if db_role is not None:
            for (r, c), name in var_index.get((db_role, i, k), {}).items():
                DB[k, r, c] = float(np.clip(w[name], -1.0, 1.0))
        elif n_u:
            for (r, c), name in var_index.get((zb_role, i, k), {}).items():
                carrier = u_data[k, c] if k < len(u_data) else 0.0
                DB[k, r, c] = _recover_delta(w[name], mode.hatB[r, c], carrier)
    draw = SimulationDraw(states[0], modes0, noise, DA, DB, DC, Df)
    return Explanation(states, noise, modes0, draw)


def decode_invalidation_witness(enc: InvalidationEncoding, w: Witness) -> Explanation:
    """Invert the change of variables: recover states, noise, the mode
    sequence and normalized uncertainty draws from a feasible assignment."""
    s = enc.model.s

    def mode_of(k: int) -> int:
        return max(range(1, s + 1),
                   key=lambda i: w[enc.var_index[("a", i, k)]]) - 1

    return _decode_side(enc.model, w, enc.var_index, enc.n_samples,
                        x_role="x", eta_role="eta", mode_of=mode_of,
                        za_role="ZA", zb_role="", db_role="DB",
                        df_role="Df", zc_role="ZC", u_data=None)


@dataclass(frozen=True)
class CommonBehavior:
    """A decoded shared behaviour of a model pair.

    ``inputs`` has horizon + 1 rows; the final row is zero padding so the
    arrays replay directly through ``simulate`` (which consumes one input
    per sample), and only the first ``horizon`` rows are constrained.
    """

    inputs: np.ndarray    # (T + 1, n_u)
    outputs: np.ndarray   # (T + 1, n_y)
    system: Explanation
    fault: Explanation


def decode_pair_witness(enc: PairEncoding, w: Witness) -> CommonBehavior:
    T = enc.horizon
    s1, s2 = enc.system.s, enc.fault.s
    n_u = enc.system.n_u

    def pair_of(k: int) -> tuple[int, int]:
        kk = k if k in enc.binary_steps else enc.binary_steps[-1]
        return max(((i, j) for i in range(1, s1 + 1) for j in range(1, s2 + 1)),
                   key=lambda ij: w[enc.var_index[("d", ij[0], ij[1], kk)]])

    pairs = [pair_of(k) for k in range(T + 1)]
    u = np.zeros((T + 1, n_u))
    for k in range(T):
        u[k] = [w[v] for v in enc.var_index[("u", k)]]

    sys_expl = _decode_side(enc.system, w, enc.var_index, T + 1,
                            x_role="x", eta_role="eta",
                            mode_of=lambda k: pairs[k][0] - 1,
                            za_role="ZA", zb_role="ZB", db_role=None,
                            df_role="Df", zc_role="ZC", u_data=u)
    fault_expl = _decode_side(enc.fault, w, enc.var_index, T + 1,
                              x_role="xb", eta_role="etab",
                              mode_of=lambda k: pairs[k][1] - 1,
                              za_role="ZAb", zb_role="ZBb", db_role=None,
                              df_role="Dfb", zc_role="ZCb", u_data=u)
    outputs = np.zeros((T + 1, enc.system.n_y))
    for k in range(T + 1):
        mode = enc.system.modes[sys_expl.mode_sequence[k]]
        C_k = mode.C + mode.hatC * sys_expl.draw.DC[k]
        outputs[k] = C_k @ sys_expl.states[k] + sys_expl.noise[k]
    return CommonBehavior(u, outputs, sys_expl, fault_expl)


# -- one-call invalidation ----------------------------------------------------


@dataclass(frozen=True)
class InvalidationResult:
    """Outcome of a consistency check on one data window.

    ``verdict`` is ``"consistent"`` (a witness explains the data),
    ``"invalidated"`` (provably no admissible explanation) or
    ``"undecided"`` (the solver hit its budget; surfaced, never silently
    mapped to either decision).
    """

    verdict: str
    reason: str
    solve: SolveResult | None = None
    explanation: Explanation | None = None
    encoding: InvalidationEncoding | None = field(default=None, repr=False)

    @property
    def is_consistent(self) -> bool:
        return self.verdict == CONSISTENT

    @property
    def is_invalidated(self) -> bool:
        return self.verdict == INVALIDATED

    @property
    def decided(self) -> bool:
        return self.verdict != UNDECIDED


def check_invalidation(model: SwitchedAffineModel, trajectory: Trajectory, *,
                       config: SolverConfig | None = None,
                       big_m: float | None = None) -> InvalidationResult:
    """Decide whether a data window lies in the model's behaviour set."""
    config = config or SolverConfig()
    try:
        enc = encode_invalidation(model, trajectory, big_m=big_m)
    except InputOutsideAdmissibleSet as err:
        return InvalidationResult(
            INVALIDATED,
            f"input sample {err.k} lies outside the admissible input set")
    enc.problem.seal()
    res = solve_milp(enc.problem, config)
    if res.status == FEASIBLE:
        return InvalidationResult(CONSISTENT, "found an admissible explanation",
                                  res, decode_invalidation_witness(enc, res.witness),
                                  enc)
    if res.status == INFEASIBLE:
        return InvalidationResult(INVALIDATED,
                                  "no admissible explanation exists", res,
                                  None, enc)
    return InvalidationResult(UNDECIDED,
                              f"solver budget exhausted: {res.message}", res,
                              None, enc)
