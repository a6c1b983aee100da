"""Pointwise-in-time control QP.

At every update instant the controller solves

    minimize    u^T u              (+ p * delta^2 when the stabilization
    subject to  zeta_i(x, u) >= 0   row is relaxed with slack delta >= 0)
                eta(x, u)   <= 0
                u_l <= u <= u_u

where every constraint row is affine in ``u``.  Problems here are tiny
(m <= 4 inputs, a handful of rows), so the solver is a dense primal
active-set method with exact line search, plus an interval-intersection
closed form for the ubiquitous single-input case.  The two routes are
independent implementations and are tested against each other.

The slack is a fallback, not a blend: a relaxed problem is first solved
with the slack pinned to zero, and the penalized objective only arbitrates
when the strict rows genuinely conflict.  Solving the blended objective
unconditionally would leak a slack of ``mu/(2p)`` (``mu`` the stabilization
row's multiplier) into every feasible update instant.

Infeasibility is a first-class outcome — the simulator needs to know the
moment safety and stabilization rows stop being jointly satisfiable — so
``solve`` raises :class:`Infeasible` with the most-violated row rather than
returning a least-squares compromise.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .affine_system import ContractViolation, StateVector
from .certificates import LyapunovCertificate, SafetySpec

__all__ = [
    "QpRow",
    "QpProblem",
    "QpSolution",
    "Infeasible",
    "NumericalFailure",
    "StateOutsideSafeSet",
    "DegenerateGradient",
    "solve",
    "assemble",
    "analytic_clf_input",
]

FEAS_TOL = 1e-8  # solution row-feasibility guarantee
ACTIVE_TOL = 1e-8  # |row value| below this counts as tight
STAT_TOL = 1e-6  # KKT stationarity residual
_CHECK_TOL = 1e-9  # internal feasibility acceptance while searching


class Infeasible(RuntimeError):
    """The constraint polytope is empty."""

    def __init__(self, message: str, most_violated_row: int | None = None):
        super().__init__(message)
        self.most_violated_row = most_violated_row


class NumericalFailure(RuntimeError):
    """Conditioning breakdown inside the solver."""


class StateOutsideSafeSet(RuntimeError):
    """A state violated ``h_i(x) > 0`` where a QP was to be assembled."""

    def __init__(self, barrier_index: int, h_value: float):
        super().__init__(
            f"state is outside the safe set: h[{barrier_index}] = {h_value:.6g} <= 0"
        )
        self.barrier_index = barrier_index
        self.h_value = h_value


class DegenerateGradient(RuntimeError):
    """The Lyapunov input gradient vanishes; no tight input exists."""


@dataclass(frozen=True)
class QpRow:
    """One affine constraint: ``coeff . u + offset  (sense)  0``."""

    coeff: np.ndarray
    offset: float
    sense: Literal["GEQ", "LEQ"]

    def __post_init__(self):
        c = np.asarray(self.coeff, dtype=float).reshape(-1).copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeff", c)
        object.__setattr__(self, "offset", float(self.offset))
        if self.sense not in ("GEQ", "LEQ"):
            raise ContractViolation(f"sense must be GEQ or LEQ, got {self.sense!r}")

    def value(self, u: np.ndarray, slack: float = 0.0) -> float:
        """Signed satisfaction margin: >= 0 means the row holds."""
        raw = float(self.coeff @ u) + self.offset
        if self.sense == "GEQ":
            return raw
        return -(raw - slack)


@dataclass(frozen=True)
class QpProblem:
    """``min u.u`` over affine rows and a box; optionally a relaxed
    stabilization row.

    When ``relax_clf`` is a weight ``p >= 0`` and the rows are jointly
    infeasible, every LEQ row gains a shared slack ``delta >= 0`` (the row
    becomes ``a.u + b <= delta``) and the objective becomes
    ``u.u + p delta^2`` — the standard way to keep the program alive when
    safety and stabilization rows conflict.  While the strict rows remain
    feasible the slack stays exactly zero and the solution is the strict
    minimizer.
    """

    dim: int
    rows: tuple
    lower: np.ndarray
    upper: np.ndarray
    relax_clf: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))
        lo = np.asarray(self.lower, dtype=float).reshape(-1).copy()
        hi = np.asarray(self.upper, dtype=float).reshape(-1).copy()
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if self.dim <= 0:
            raise ContractViolation(f"dim must be positive, got {self.dim}")
        if lo.shape[0] != self.dim or hi.shape[0] != self.dim:
            raise ContractViolation("box bounds must have length dim")
        if np.any(lo > hi):
            raise ContractViolation("box must satisfy lower <= upper elementwise")
        for i, row in enumerate(self.rows):
            if row.coeff.shape[0] != self.dim:
                raise ContractViolation(
                    f"row {i} coefficient has length {row.coeff.shape[0]}, expected {self.dim}"
                )
        if self.relax_clf is not None and not (self.relax_clf >= 0.0):
            raise ContractViolation(f"relax_clf must be >= 0, got {self.relax_clf}")


@dataclass(frozen=True)
class QpSolution:
    u_star: np.ndarray
    slack: float
    active_set: tuple
    objective: float


# --------------------------------------------------------------------------
# canonical form:  minimize 1/2 z^T H z  subject to  A z <= b
# --------------------------------------------------------------------------


def _canonical(p: QpProblem):
    """Rows + box (+ slack column when relaxed) as ``A z <= b``.

    Returns (H, A, b, n_vars, row_map) where row_map[i] is the QpProblem row
    index for canonical row i, or -1 for box/slack housekeeping rows.
    """
    relaxed = p.relax_clf is not None
    n = p.dim + (1 if relaxed else 0)
    A_rows, b_vals, row_map = [], [], []
    for i, row in enumerate(p.rows):
        if row.sense == "GEQ":
            a = np.zeros(n)
            a[: p.dim] = -row.coeff
            A_rows.append(a)
            b_vals.append(row.offset)
        else:
            a = np.zeros(n)
            a[: p.dim] = row.coeff
            if relaxed:
                a[-1] = -1.0  # a.u - delta <= -offset
            A_rows.append(a)
            b_vals.append(-row.offset)
        row_map.append(i)
    for j in range(p.dim):
        a = np.zeros(n)
        a[j] = 1.0
        A_rows.append(a)
        b_vals.append(p.upper[j])
        row_map.append(-1)
        a = np.zeros(n)
        a[j] = -1.0
        A_rows.append(a)
        b_vals.append(-p.lower[j])
        row_map.append(-1)
    if relaxed:
        a = np.zeros(n)
        a[-1] = -1.0  # delta >= 0
        A_rows.append(a)
        b_vals.append(0.0)
        row_map.append(-1)
    H = np.diag([2.0] * p.dim + ([2.0 * max(p.relax_clf, 1e-12)] if relaxed else []))
    return H, np.array(A_rows), np.array(b_vals), n, row_map


def _find_feasible_point(p: QpProblem, A: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    """Deterministic feasible start, or raise :class:`Infeasible`.

    Tries the clamped origin first (feasible in the vast majority of update
    instants), then falls back to enumerating basic points: the box makes
    the polytope bounded, so if it is nonempty some intersection of n
    constraint hyperplanes is feasible.
    """
    z0 = np.zeros(n)
    z0[: p.dim] = np.clip(0.0, p.lower, p.upper)
    if p.relax_clf is not None:
        # a slack value large enough to satisfy every relaxed row at u = z0
        need = 0.0
        for row in p.rows:
            if row.sense == "LEQ":
                need = max(need, float(row.coeff @ z0[: p.dim]) + row.offset)
        z0[-1] = need
    if np.all(A @ z0 <= b + _CHECK_TOL):
        return z0

    n_rows = A.shape[0]
    for subset in itertools.combinations(range(n_rows), n):
        M = A[list(subset)]
        rhs = b[list(subset)]
        try:
            z = np.linalg.solve(M, rhs)
        except np.linalg.LinAlgError:
            continue
        if np.all(A @ z <= b + _CHECK_TOL):
            return z

    viol = A @ z0 - b
    worst = int(np.argmax(viol))
    raise Infeasible(
        f"constraint polytope is empty (worst canonical row {worst}, "
        f"violation {viol[worst]:.6g})",
        most_violated_row=worst,
    )


def _active_set_iterate(H, A, b, z0, max_iter=200):
    """Textbook primal active-set for strictly convex H, from a feasible z0.

    Each iteration solves the equality-constrained subproblem on the working
    set, then either takes the full step, blocks on the nearest inactive row
    (exact line search ratio test), or drops the most negative multiplier.
    """
    z = z0.copy()
    n = z.shape[0]
    n_rows = A.shape[0]
    work: list[int] = [
        i for i in range(n_rows) if A[i] @ z >= b[i] - ACTIVE_TOL
    ]
    # keep the working set independent from the start
    while len(work) > 0 and np.linalg.matrix_rank(A[work], tol=1e-12) < len(work):
        work.pop()

    for _ in range(max_iter):
        k = len(work)
        kkt = np.zeros((n + k, n + k))
        kkt[:n, :n] = H
        if k:
            Aw = A[work]
            kkt[:n, n:] = Aw.T
            kkt[n:, :n] = Aw
        rhs = np.concatenate([np.zeros(n), b[work]]) if k else np.zeros(n)
        try:
            sol = np.linalg.solve(kkt, rhs)
        except np.linalg.LinAlgError:
            sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
        z_eq, lam = sol[:n], sol[n:]
        d = z_eq - z

        if np.max(np.abs(d)) <= 1e-12:
            if k == 0 or np.min(lam) >= -1e-9:
                return z, sorted(work)
            work.pop(int(np.argmin(lam)))
            continue

        alpha = 1.0
        blocker = -1
        for i in range(n_rows):
            if i in work:
                continue
            denom = float(A[i] @ d)
            if denom > 1e-12:
                room = max(b[i] - float(A[i] @ z), 0.0)
                ratio = room / denom
                if ratio < alpha - 1e-15:
                    alpha = ratio
                    blocker = i
        z = z + alpha * d
        if blocker >= 0:
            trial = work + [blocker]
            if np.linalg.matrix_rank(A[trial], tol=1e-12) == len(trial):
                work = trial
    raise NumericalFailure("active-set iteration did not converge")


def _solve_active_set(p: QpProblem) -> QpSolution:
    H, A, b, n, _ = _canonical(p)
    z0 = _find_feasible_point(p, A, b, n)
    z, _work = _active_set_iterate(H, A, b, z0)
    u = z[: p.dim]
    slack = float(z[-1]) if p.relax_clf is not None else 0.0
    return _package(p, u, slack)


def _screen_rows(p: QpProblem):
    """Split rows into ones that can actually bind and tolerance-vacuous ones.

    A row whose worst value over the whole box stays within -FEAS_TOL can
    never be violated beyond the advertised solution guarantee, so it is
    dropped before dispatch; a hard row whose best value still violates
    beyond FEAS_TOL is hopeless and raises outright.  Running this filter
    once, ahead of both methods, pins identical semantics for degenerate
    rows (zero or sub-tolerance coefficients) in the closed form and the
    active-set iteration — otherwise exact interval arithmetic and the
    iteration's tolerance checks disagree on them.

    Returns ``(reduced_problem, kept_indices)``.
    """
    kept_rows, kept_idx = [], []
    for i, row in enumerate(p.rows):
        lo_val = hi_val = row.offset
        for j in range(p.dim):
            a = float(row.coeff[j])
            if a == 0.0:
                continue
            prod_lo, prod_hi = sorted((a * float(p.lower[j]), a * float(p.upper[j])))
            lo_val += prod_lo
            hi_val += prod_hi
        worst = lo_val if row.sense == "GEQ" else -hi_val
        best = hi_val if row.sense == "GEQ" else -lo_val
        soft = p.relax_clf is not None and row.sense == "LEQ"
        if best < -FEAS_TOL and not soft:
            raise Infeasible(
                f"row {i} is violated beyond tolerance everywhere in the box",
                most_violated_row=i,
            )
        if worst >= -FEAS_TOL:
            continue
        kept_rows.append(row)
        kept_idx.append(i)
    if len(kept_rows) == len(p.rows):
        return p, kept_idx
    reduced = QpProblem(
        dim=p.dim,
        rows=tuple(kept_rows),
        lower=p.lower,
        upper=p.upper,
        relax_clf=p.relax_clf,
    )
    return reduced, kept_idx


def _solve_interval(p: QpProblem) -> QpSolution:
    """Closed form for m = 1: intersect half-lines, project the origin."""
    if p.dim != 1:
        raise ContractViolation("interval method applies to 1-D problems only")
    if p.relax_clf is not None:
        raise ContractViolation("interval method does not support relax_clf")
    lo, hi = float(p.lower[0]), float(p.upper[0])
    for i, row in enumerate(p.rows):
        a = float(row.coeff[0])
        bound_below = (row.sense == "GEQ") == (a > 0.0)
        if a == 0.0:
            ok = (
                row.offset >= -FEAS_TOL
                if row.sense == "GEQ"
                else row.offset <= FEAS_TOL
            )
            if not ok:
                raise Infeasible(
                    f"row {i} is unsatisfiable for any u", most_violated_row=i
                )
            continue
        cut = -row.offset / a
        if bound_below:
            lo = max(lo, cut)
        else:
            hi = min(hi, cut)
    if lo > hi + _CHECK_TOL:
        mid = np.array([min(max(0.0, min(lo, hi)), max(lo, hi))])
        viols = [-row.value(mid) for row in p.rows]
        worst = int(np.argmax(viols)) if viols else 0
        raise Infeasible(
            f"empty feasible interval [{lo:.6g}, {hi:.6g}]", most_violated_row=worst
        )
    if lo > hi:  # crossing within tolerance: collapse to the midpoint
        lo = hi = 0.5 * (lo + hi)
    u = np.array([min(max(0.0, lo), hi)])
    return _package(p, u, 0.0)


def _package(p: QpProblem, u: np.ndarray, slack: float) -> QpSolution:
    u = np.clip(u, p.lower, p.upper)  # remove round-off excursions
    active = tuple(
        i for i, row in enumerate(p.rows) if abs(row.value(u, slack)) <= ACTIVE_TOL
    )
    for i, row in enumerate(p.rows):
        if row.value(u, slack) < -FEAS_TOL:
            raise NumericalFailure(
                f"solver returned an infeasible point (row {i}, "
                f"margin {row.value(u, slack):.3g})"
            )
    objective = float(u @ u)
    if p.relax_clf is not None:
        objective += p.relax_clf * slack * slack
    return QpSolution(u_star=u, slack=float(slack), active_set=active, objective=objective)


def _dispatch(p: QpProblem, method: str) -> QpSolution:
    reduced, kept = _screen_rows(p)
    try:
        if method == "interval" or (method == "auto" and p.dim == 1):
            sol = _solve_interval(reduced)
        else:
            sol = _solve_active_set(reduced)
    except Infeasible as err:
        row = err.most_violated_row
        if row is not None and 0 <= row < len(kept):
            err.most_violated_row = kept[row]
        raise
    if len(kept) != len(p.rows):
        # re-derive the active set and feasibility guarantee over all rows
        return _package(p, sol.u_star, sol.slack)
    return sol


def solve(p: QpProblem, method: str = "auto") -> QpSolution:
    """Global minimizer of the strictly convex program.

    ``method="auto"`` picks the interval closed form for unrelaxed 1-D
    problems and the active-set iteration otherwise; both can be forced for
    cross-checking.  A relaxed problem is solved strictly first; the slack
    and its penalty only enter once the strict rows prove infeasible.
    """
    if method not in ("auto", "active_set", "interval"):
        raise ContractViolation(f"unknown method {method!r}")
    if p.relax_clf is not None:
        if method == "interval":
            raise ContractViolation("interval method does not support relax_clf")
        strict = QpProblem(dim=p.dim, rows=p.rows, lower=p.lower, upper=p.upper)
        try:
            return solve(strict, method=method)
        except Infeasible:
            return _dispatch(p, "active_set")
    return _dispatch(p, method)


def assemble(
    x: StateVector,
    safety: SafetySpec,
    clf: LyapunovCertificate,
    box,
    relax_clf: float | None = None,
) -> QpProblem:
    """Build the update-instant QP at state ``x``.

    One GEQ row per barrier, one LEQ stabilization row, box bounds attached.
    Requires the state strictly inside the safe set (every ``h_i(x) > 0``):
    outside it the barrier rows certify nothing, so assembly refuses.
    """
    xe = x.entries if isinstance(x, StateVector) else np.asarray(x, dtype=float)
    for i, cert in enumerate(safety.barriers):
        h = float(cert.h_eval(xe))
        if h <= 0.0:
            raise StateOutsideSafeSet(barrier_index=i, h_value=h)
    rows = []
    m = None
    for cert in safety.barriers:
        a, b = cert.zeta_affine(xe)
        a = np.asarray(a, dtype=float).reshape(-1)
        m = a.shape[0] if m is None else m
        rows.append(QpRow(coeff=a, offset=float(b), sense="GEQ"))
    a, b = clf.eta_affine(xe)
    rows.append(QpRow(coeff=np.asarray(a, float).reshape(-1), offset=float(b), sense="LEQ"))
    lower, upper = box
    lower = np.broadcast_to(np.asarray(lower, dtype=float).reshape(-1), (m,))
    upper = np.broadcast_to(np.asarray(upper, dtype=float).reshape(-1), (m,))
    return QpProblem(
        dim=m, rows=tuple(rows), lower=lower, upper=upper, relax_clf=relax_clf
    )


def analytic_clf_input(x: StateVector, clf: LyapunovCertificate) -> np.ndarray:
    """The single input making the stabilization row exactly tight
    (``eta(x, u*) = 0``); scalar-input systems only.

    Useful for analysis — the closed loop under this input realizes the
    decay rate ``V' = -epsilon V`` pointwise — but the controller itself
    uses the QP, which coasts with smaller inputs whenever the row is slack.
    """
    xe = x.entries if isinstance(x, StateVector) else np.asarray(x, dtype=float)
    a, b = clf.eta_affine(xe)
    a = np.asarray(a, dtype=float).reshape(-1)
    if a.shape[0] != 1:
        raise ContractViolation("analytic tight input is defined for scalar input only")
    if abs(float(a[0])) < 1e-12:
        raise DegenerateGradient(
            f"input gradient of V vanishes at x={xe.tolist()}; no tight input exists"
        )
    return np.array([-float(b) / float(a[0])])
