"""Closed-loop simulation of the self-triggered controller.

The loop alternates three steps: solve the control QP at the current state,
ask the trigger how long that input may be held (or hold for a fixed period
in the baseline mode), then integrate the plant under the held input.

Between updates the plant is integrated with fixed-step classical RK4, the
last partial step shortened to land exactly on the next update instant.
Safety margins ``h_i`` and the Lyapunov value are logged at every
integration substep — not just at update instants — so that violations
*between* samples, the very failure mode that motivates self-triggering,
are visible in the trace.

Failures never raise out of :func:`run`; they terminate the run with a
recorded reason so that comparisons can still be tabulated.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .affine_system import AffineSystem, ContractViolation, StateVector
from .certificates import LyapunovCertificate, SafetySpec
from .qp_solver import (
    Infeasible,
    NumericalFailure,
    StateOutsideSafeSet,
    assemble,
    solve,
)
from .trigger import NonpositiveMargin, TriggerConfig, TriggerDecision, decide

__all__ = [
    "SimConfig",
    "UpdateRecord",
    "SimTrace",
    "run",
    "integrate_held",
    "compare",
    "ComparisonRow",
    "ComparisonReport",
    "violation_intervals",
]

_ZERO_STEP = 1e-12  # substep remainders below this are folded away


@dataclass(frozen=True)
class SimConfig:
    """Run parameters.

    ``dt_int`` must resolve the shortest possible hold: at least four
    substeps inside ``tau_min`` in self-triggered mode, at least ten inside
    ``t_p`` in periodic mode.  This keeps the logged margins trustworthy —
    a violation shorter than a substep could otherwise slip between samples.
    """

    x0: np.ndarray
    dt_int: float
    goal_radius: float = 1e-2
    t_end: float = 20.0
    mode: str = "self_triggered"
    t_p: float | None = None
    trigger: TriggerConfig = field(default_factory=TriggerConfig)
    relax_clf: float | None = None

    def __post_init__(self):
        x0 = np.asarray(
            self.x0.entries if isinstance(self.x0, StateVector) else self.x0,
            dtype=float,
        ).reshape(-1).copy()
        x0.setflags(write=False)
        object.__setattr__(self, "x0", x0)
        if not np.all(np.isfinite(x0)):
            raise ContractViolation(f"x0 must be finite, got {x0}")
        if not (self.dt_int > 0.0):
            raise ContractViolation(f"dt_int must be positive, got {self.dt_int}")
        if not (self.goal_radius > 0.0):
            raise ContractViolation(
                f"goal_radius must be positive, got {self.goal_radius}"
            )
        if not (self.t_end > 0.0):
            raise ContractViolation(f"t_end must be positive, got {self.t_end}")
        if self.mode not in ("self_triggered", "periodic"):
            raise ContractViolation(
                f"mode must be 'self_triggered' or 'periodic', got {self.mode!r}"
            )
        if self.mode == "periodic":
            if self.t_p is None or not (self.t_p > 0.0):
                raise ContractViolation("periodic mode requires a positive t_p")
            if self.dt_int > self.t_p / 10.0 + 1e-15:
                raise ContractViolation(
                    f"dt_int={self.dt_int} too coarse for t_p={self.t_p}: "
                    "need dt_int <= t_p/10"
                )
        else:
            if self.dt_int > self.trigger.tau_min / 4.0 + 1e-15:
                raise ContractViolation(
                    f"dt_int={self.dt_int} too coarse for tau_min={self.trigger.tau_min}: "
                    "need dt_int <= tau_min/4"
                )


@dataclass(frozen=True)
class UpdateRecord:
    """One update instant: the new held input and how it was decided."""

    t: float
    u: np.ndarray
    decision: TriggerDecision | None  # None marks a fixed-period update
    qp_active_set: tuple
    qp_status: str
    row: int  # index of this instant's row in the sample arrays


@dataclass
class SimTrace:
    """Time-ordered record of one closed-loop run.

    Sample arrays have one row per logged instant (update instants plus
    every integration substep).  ``u`` holds the input in force from that
    instant onward; within any inter-update interval it is constant (the
    hold contract), and the final row repeats the last held input.
    """

    t: np.ndarray
    states: np.ndarray
    u: np.ndarray
    h: np.ndarray
    v: np.ndarray
    is_update: np.ndarray
    updates: list
    terminated: str
    min_margin: float
    min_margin_time: float
    min_margin_barrier: int
    violated: bool
    goal_time: float | None


def _field(sys: AffineSystem, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    f = np.asarray(sys.drift(x), dtype=float).reshape(-1)
    g = np.asarray(sys.input_map(x), dtype=float).reshape(sys.state_dim, sys.input_dim)
    return f + g @ u


def _rk4_step(sys: AffineSystem, x: np.ndarray, u: np.ndarray, dt: float) -> np.ndarray:
    k1 = _field(sys, x, u)
    k2 = _field(sys, x + 0.5 * dt * k1, u)
    k3 = _field(sys, x + 0.5 * dt * k2, u)
    k4 = _field(sys, x + dt * k3, u)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _substeps(duration: float, dt_int: float) -> list:
    """Fixed steps of ``dt_int`` covering ``duration`` exactly, the last one
    shortened (or a lone short step when the hold is shorter than one step)."""
    if duration <= 0.0:
        return []
    n_full = int(duration // dt_int)
    rem = duration - n_full * dt_int
    if n_full == 0:
        return [duration]
    steps = [dt_int] * n_full
    if rem > _ZERO_STEP:
        steps.append(rem)
    elif rem != 0.0:
        steps[-1] = dt_int + rem  # fold float dust into the final step
    return steps


def integrate_held(
    sys: AffineSystem, x: StateVector, u, duration: float, dt_int: float
) -> StateVector:
    """Advance the plant ``duration`` seconds under a held input."""
    if duration < 0.0:
        raise ContractViolation(f"duration must be >= 0, got {duration}")
    if not (dt_int > 0.0):
        raise ContractViolation(f"dt_int must be positive, got {dt_int}")
    uv = np.asarray(u, dtype=float).reshape(-1)
    xe = x.entries.copy()
    for dt in _substeps(duration, dt_int):
        xe = _rk4_step(sys, xe, uv, dt)
    return StateVector(entries=xe, time=x.time + duration)


def run(
    sys: AffineSystem,
    safety: SafetySpec,
    clf: LyapunovCertificate,
    box,
    cfg: SimConfig,
) -> SimTrace:
    """Execute one closed-loop run and return its trace.

    Self-triggered mode computes each hold duration from the trigger;
    periodic mode holds for exactly ``t_p``.  Termination reasons:
    ``GOAL`` (entered the goal ball), ``T_END`` (horizon), ``INFEASIBLE_QP``
    (safety and stabilization rows no longer jointly satisfiable), or
    ``NONPOSITIVE_MARGIN`` (an update instant found the state outside the
    safe set — the periodic baseline's failure mode).
    """
    n_barriers = len(safety.barriers)
    m = sys.input_dim
    rows_t, rows_x, rows_u, rows_h, rows_v, rows_up = [], [], [], [], [], []
    updates: list = []

    def log(t, x, u, is_update):
        rows_t.append(t)
        rows_x.append(x.copy())
        rows_u.append(u.copy())
        rows_h.append([float(c.h_eval(x)) for c in safety.barriers])
        rows_v.append(float(clf.v_eval(x)))
        rows_up.append(is_update)

    x = np.asarray(cfg.x0, dtype=float).copy()
    t = 0.0
    u_held = np.zeros(m)
    terminated = None
    goal_time = None

    while True:
        if float(np.linalg.norm(x - clf.target)) < cfg.goal_radius:
            terminated = "GOAL"
            goal_time = t
            log(t, x, u_held, False)
            break
        if t >= cfg.t_end - 1e-12:
            terminated = "T_END"
            log(t, x, u_held, False)
            break

        state = StateVector(entries=x, time=t)
        try:
            problem = assemble(state, safety, clf, box, relax_clf=cfg.relax_clf)
            sol = solve(problem)
        except StateOutsideSafeSet:
            terminated = "NONPOSITIVE_MARGIN"
            log(t, x, u_held, False)
            break
        except (Infeasible, NumericalFailure):
            terminated = "INFEASIBLE_QP"
            log(t, x, u_held, False)
            break

        u_held = sol.u_star
        if cfg.mode == "self_triggered":
            try:
                decision = decide(safety, clf, sys, state, u_held, cfg.trigger)
            except NonpositiveMargin:
                terminated = "NONPOSITIVE_MARGIN"
                log(t, x, u_held, False)
                break
            tau = decision.tau
        else:
            decision = None
            tau = cfg.t_p

        log(t, x, u_held, True)
        updates.append(
            UpdateRecord(
                t=t,
                u=u_held.copy(),
                decision=decision,
                qp_active_set=sol.active_set,
                qp_status="ok",
                row=len(rows_t) - 1,
            )
        )

        tau_eff = min(tau, cfg.t_end - t)
        steps = _substeps(tau_eff, cfg.dt_int)
        elapsed = 0.0
        for j, dt in enumerate(steps):
            x = _rk4_step(sys, x, u_held, dt)
            elapsed += dt
            if j < len(steps) - 1:
                log(t + elapsed, x, u_held, False)
        t = t + tau_eff

    t_arr = np.asarray(rows_t, dtype=float)
    h_arr = np.asarray(rows_h, dtype=float).reshape(len(rows_t), n_barriers)
    flat = int(np.argmin(h_arr))
    min_row, min_bar = divmod(flat, n_barriers)
    min_margin = float(h_arr[min_row, min_bar])
    return SimTrace(
        t=t_arr,
        states=np.asarray(rows_x, dtype=float),
        u=np.asarray(rows_u, dtype=float),
        h=h_arr,
        v=np.asarray(rows_v, dtype=float),
        is_update=np.asarray(rows_up, dtype=bool),
        updates=updates,
        terminated=terminated,
        min_margin=min_margin,
        min_margin_time=float(t_arr[min_row]),
        min_margin_barrier=int(min_bar),
        violated=bool(min_margin < 0.0),
        goal_time=goal_time,
    )


def violation_intervals(trace: SimTrace, barrier_index: int) -> list:
    """Contiguous sample-time windows where ``h_i < 0``: ``[(t_in, t_out), ...]``."""
    neg = trace.h[:, barrier_index] < 0.0
    out = []
    start = None
    for i, flag in enumerate(neg):
        if flag and start is None:
            start = trace.t[i]
        elif not flag and start is not None:
            out.append((float(start), float(trace.t[i])))
            start = None
    if start is not None:
        out.append((float(start), float(trace.t[-1])))
    return out


@dataclass(frozen=True)
class ComparisonRow:
    mode: str
    t_p: float | None
    n_updates: int
    min_margin: float
    violated: bool
    t_converge: float | None
    mean_interval: float
    max_interval: float
    terminated: str


@dataclass(frozen=True)
class ComparisonReport:
    rows: tuple


def _intervals(trace: SimTrace) -> np.ndarray:
    times = np.array([u.t for u in trace.updates], dtype=float)
    if times.shape[0] < 2:
        return np.zeros(0)
    return np.diff(times)


def compare(
    sys: AffineSystem,
    safety: SafetySpec,
    clf: LyapunovCertificate,
    box,
    base_cfg: SimConfig,
    t_p_list: Sequence[float],
) -> ComparisonReport:
    """Run the self-triggered controller once and the fixed-period baseline
    at each listed period; tabulate update counts, margins, and outcomes.

    A listed period shorter than ``10 * dt_int`` refines that run's
    integration step to ``t_p / 10`` so the margin log keeps resolving the
    hold (rather than rejecting the period outright).
    """
    if len(t_p_list) == 0:
        raise ContractViolation("t_p_list must be nonempty")

    def _row(trace: SimTrace, mode: str, t_p: float | None) -> ComparisonRow:
        gaps = _intervals(trace)
        return ComparisonRow(
            mode=mode,
            t_p=t_p,
            n_updates=len(trace.updates),
            min_margin=trace.min_margin,
            violated=trace.violated,
            t_converge=trace.goal_time,
            mean_interval=float(np.mean(gaps)) if gaps.size else math.nan,
            max_interval=float(np.max(gaps)) if gaps.size else math.nan,
            terminated=trace.terminated,
        )

    self_cfg = dataclasses.replace(base_cfg, mode="self_triggered", t_p=None)
    rows = [_row(run(sys, safety, clf, box, self_cfg), "self_triggered", None)]
    for t_p in t_p_list:
        per_cfg = dataclasses.replace(
            base_cfg,
            mode="periodic",
            t_p=float(t_p),
            dt_int=min(base_cfg.dt_int, float(t_p) / 10.0),
        )
        rows.append(_row(run(sys, safety, clf, box, per_cfg), "periodic", float(t_p)))
    return ComparisonReport(rows=tuple(rows))
