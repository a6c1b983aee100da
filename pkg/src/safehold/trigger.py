"""Self-triggered hold durations.

Given the state and the input just computed by the QP, this module answers:
*how long may that input be held before any certificate could be lost?*

Two independent clocks are computed and the earlier one fires:

* **Barrier safe period.**  A Lipschitz declaration on the closed-loop
  field yields the trajectory envelope ``rbar(t) = (||f(x_k)+g(x_k)u_k|| /
  L) (e^{L (t - t_k)} - 1)`` — the comparison-principle bound on how far the
  state can drift from ``x_k`` under the held input.  Each barrier then
  minorizes its constraint value by ``zeta_low(t) = zeta(x_k, u_k) +
  (t - t_k) * rate_bound(x_k, u_k, rbar(t))``: the slope is the worst rate
  over the reachable ball, and because the balls are nested in ``t`` the
  substitution of a time-varying slope keeps the minorant valid.  The hold
  is safe until the first root of ``zeta_low``.

* **Descent update period.**  With curvature bound ``D >= V''`` along the
  held flow, ``V(t_k + tau) <= V_k + tau V' + tau^2 D / 2``; the nonzero
  root ``tau = -2 V' / D`` of the right-hand side returning to ``V_k`` is
  the longest hold for which the Lyapunov value provably has not increased.

The root search for the barrier clock brackets from the left and returns
the left endpoint on termination, so the reported period is always an
under-approximation of the true crossing — conservative in the safe
direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .affine_system import AffineSystem, ContractViolation, StateVector, eval_vector_field
from .certificates import (
    BarrierCertificate,
    LyapunovCertificate,
    SafetySpec,
    zeta,
)

__all__ = [
    "NonpositiveMargin",
    "TrajectoryBound",
    "TriggerConfig",
    "TriggerDecision",
    "trajectory_bound",
    "zeta_lower_bound",
    "cbf_safe_period",
    "clf_update_period",
    "combine_periods",
    "decide",
]

# A barrier value this far below zero at an update instant signals a broken
# QP/trigger contract; smaller excursions are solver round-off (the QP
# guarantees rows only to its own feasibility tolerance).
_MARGIN_SLOP = 1e-8


class NonpositiveMargin(RuntimeError):
    """A barrier constraint was already violated when a safe period was requested."""

    def __init__(self, barrier_index: int, value: float):
        super().__init__(
            f"zeta[{barrier_index}] = {value:.6g} < 0 at the update instant; "
            "the safe-period construction requires a nonnegative start"
        )
        self.barrier_index = barrier_index
        self.value = value


@dataclass(frozen=True)
class TrajectoryBound:
    """Envelope ``rbar(t)`` on the drift of the held-input trajectory from
    its anchor state."""

    speed_norm: float
    lipschitz_const: float
    anchor_time: float

    def __post_init__(self):
        if self.speed_norm < 0.0:
            raise ContractViolation(f"speed_norm must be >= 0, got {self.speed_norm}")
        if not (self.lipschitz_const > 0.0):
            raise ContractViolation(
                f"lipschitz_const must be positive, got {self.lipschitz_const}"
            )

    def value(self, t: float) -> float:
        """``rbar(t)`` for ``t >= anchor_time``."""
        dt = t - self.anchor_time
        if dt < 0.0:
            raise ContractViolation(f"t={t} precedes the anchor time {self.anchor_time}")
        return (self.speed_norm / self.lipschitz_const) * math.expm1(
            self.lipschitz_const * dt
        )


@dataclass(frozen=True)
class TriggerConfig:
    """Dwell-time window and root-finding controls.

    ``tau_min`` is a floor with no counterpart in the certificate math: it
    exists because floating-point roots arbitrarily close to zero would
    stall the loop.  Whenever it binds, the formal guarantee does not cover
    the forced dwell, and the decision is labeled accordingly.
    """

    tau_min: float = 1e-4
    tau_max: float = 2.0
    root_tol: float = 1e-8
    root_method: str = "bisection"

    def __post_init__(self):
        if not (0.0 < self.tau_min < self.tau_max):
            raise ContractViolation(
                f"need 0 < tau_min < tau_max, got [{self.tau_min}, {self.tau_max}]"
            )
        if not (self.root_tol > 0.0):
            raise ContractViolation(f"root_tol must be positive, got {self.root_tol}")
        if self.root_method not in ("bisection", "secant"):
            raise ContractViolation(
                f"root_method must be 'bisection' or 'secant', got {self.root_method!r}"
            )


@dataclass(frozen=True)
class TriggerDecision:
    """Outcome of one trigger evaluation.

    ``limiting`` names the binding clock: ``"CBF(i)"`` (barrier ``i``'s safe
    period), ``"CLF"`` (descent period), or ``"TAU_MAX"`` / ``"TAU_MIN"``
    when the clamp window overrode the raw minimum.
    """

    tau_cbf_per_barrier: tuple
    tau_cbf: float
    tau_clf: float
    tau: float
    limiting: str


def trajectory_bound(sys: AffineSystem, x_k: StateVector, u_k) -> TrajectoryBound:
    """Drift envelope for holding ``u_k`` from ``x_k``."""
    speed = float(np.linalg.norm(eval_vector_field(sys, x_k, u_k)))
    return TrajectoryBound(
        speed_norm=speed,
        lipschitz_const=sys.lipschitz_const,
        anchor_time=x_k.time,
    )


def zeta_lower_bound(
    cert: BarrierCertificate,
    x_k: StateVector,
    u_k,
    bound: TrajectoryBound,
    t: float,
) -> float:
    """Certified minorant of ``zeta(x(t), u_k)`` along the held trajectory.

    Valid because the rate bound is evaluated over the ball of radius
    ``rbar(t)``, the trajectory up to ``t`` never leaves that ball, and the
    balls are nested as ``t`` grows.
    """
    xe = x_k.entries
    uv = np.asarray(u_k, dtype=float).reshape(-1)
    z0 = zeta(cert, x_k, uv)
    dt = t - bound.anchor_time
    if dt < 0.0:
        raise ContractViolation(f"t={t} precedes the anchor time {bound.anchor_time}")
    if dt == 0.0:
        return z0
    return z0 + dt * float(cert.rate_bound(xe, uv, bound.value(t)))


def _left_root(g, hi: float, tol: float, method: str) -> float:
    """First zero of ``g`` on ``[0, hi]`` given ``g(0) >= 0 > g(hi)``.

    Returns the left endpoint of the final bracket, i.e. a point where the
    minorant is still nonnegative — an under-approximation of the crossing.
    The secant variant accelerates inside the bracket and falls back to a
    midpoint split whenever its step leaves the bracket or stalls.
    """
    lo, g_lo = 0.0, g(0.0)
    g_hi = g(hi)
    while hi - lo > tol:
        if method == "secant" and g_hi != g_lo:
            mid = hi - g_hi * (hi - lo) / (g_hi - g_lo)
            if not (lo + 0.1 * tol < mid < hi - 0.1 * tol):
                mid = 0.5 * (lo + hi)
        else:
            mid = 0.5 * (lo + hi)
        g_mid = g(mid)
        if g_mid >= 0.0:
            lo, g_lo = mid, g_mid
        else:
            hi, g_hi = mid, g_mid
    return lo


def cbf_safe_period(
    safety: SafetySpec,
    sys: AffineSystem,
    x_k: StateVector,
    u_k,
    cfg: TriggerConfig,
):
    """Largest certified-safe hold per barrier and their minimum.

    For each barrier the minorant ``zeta_low`` starts at ``zeta(x_k, u_k) >=
    0``; if it is still nonnegative at ``tau_max`` there is no crossing at
    all on the horizon (the minorant's slope is nonincreasing, so an interior
    dip clearing back above zero is impossible) and the barrier reports
    ``tau_max``.  Otherwise the single crossing is bracketed and returned
    from the left.
    """
    bound = trajectory_bound(sys, x_k, u_k)
    uv = np.asarray(u_k, dtype=float).reshape(-1)
    per_barrier = []
    for i, cert in enumerate(safety.barriers):
        z0 = zeta(cert, x_k, uv)
        if z0 < -_MARGIN_SLOP:
            raise NonpositiveMargin(barrier_index=i, value=z0)
        z0 = max(z0, 0.0)

        def g(tau, _cert=cert, _z0=z0):
            if tau == 0.0:
                return _z0
            return _z0 + tau * float(
                _cert.rate_bound(x_k.entries, uv, bound.value(bound.anchor_time + tau))
            )

        if g(cfg.tau_max) >= 0.0:
            per_barrier.append(cfg.tau_max)
        else:
            per_barrier.append(_left_root(g, cfg.tau_max, cfg.root_tol, cfg.root_method))
    tau_cbf = min(per_barrier)
    return tau_cbf, np.array(per_barrier)


def clf_update_period(
    clf: LyapunovCertificate,
    x_k: StateVector,
    u_k,
    cfg: TriggerConfig,
) -> float:
    """Descent-lemma hold duration ``-2 V' / D``.

    ``V' >= 0`` cannot happen when the stabilization row was just enforced
    on a state with ``V > 0``; if it shows up numerically (essentially at
    the target, where ``V -> 0``), the degenerate root is clamped to
    ``tau_min`` rather than raised, so the loop can limp to its goal test.
    A nonpositive curvature bound means the quadratic majorant never comes
    back up, and the horizon cap is returned.
    """
    xe = x_k.entries
    uv = np.asarray(u_k, dtype=float).reshape(-1)
    v_prime = float(clf.vdot_eval(xe, uv))
    if v_prime >= 0.0:
        return cfg.tau_min
    d = float(clf.curvature_bound(xe, uv))
    if d <= 0.0:
        return cfg.tau_max
    return -2.0 * v_prime / d


def combine_periods(
    tau_cbf: float, per_barrier, tau_clf: float, cfg: TriggerConfig
) -> TriggerDecision:
    """Clamp ``min(tau_cbf, tau_clf)`` to the dwell window and label the
    binding clock.

    Ties between barrier and descent clocks resolve to the barrier (it is
    the safety-critical one).
    """
    per_barrier = np.asarray(per_barrier, dtype=float)
    raw = min(tau_cbf, tau_clf)
    tau = min(max(raw, cfg.tau_min), cfg.tau_max)
    if raw < cfg.tau_min:
        limiting = "TAU_MIN"
    elif raw > cfg.tau_max:
        limiting = "TAU_MAX"
    elif tau_cbf <= tau_clf:
        limiting = f"CBF({int(np.argmin(per_barrier))})"
    else:
        limiting = "CLF"
    return TriggerDecision(
        tau_cbf_per_barrier=tuple(float(t) for t in per_barrier),
        tau_cbf=float(tau_cbf),
        tau_clf=float(tau_clf),
        tau=float(tau),
        limiting=limiting,
    )


def decide(
    safety: SafetySpec,
    clf: LyapunovCertificate,
    sys: AffineSystem,
    x_k: StateVector,
    u_k,
    cfg: TriggerConfig,
) -> TriggerDecision:
    """Combine both clocks into the next hold duration:
    ``tau = clamp(min(tau_cbf, tau_clf), tau_min, tau_max)``."""
    tau_cbf, per_barrier = cbf_safe_period(safety, sys, x_k, u_k, cfg)
    tau_clf = clf_update_period(clf, x_k, u_k, cfg)
    return combine_periods(tau_cbf, per_barrier, tau_clf, cfg)
