"""Barrier and Lyapunov certificates.

A barrier certificate packages one safety function ``h`` together with
everything the controller needs from it:

* the constraint evaluator ``zeta(x, u) = a(x)^T u + b(x)`` whose
  nonnegativity is the barrier row of the control QP (for relative degree
  ``r`` this is the exponential-barrier form ``Lf^r h + Lg Lf^(r-1) h * u
  + K ξ`` with transverse state ``ξ = [h, hdot, ...]``),
* a ``rate_bound(x_k, u_k, r)`` evaluator returning a lower bound on
  ``d zeta/dt`` over the ball of radius ``r`` around ``x_k`` under the held
  input — the ingredient that turns a Lipschitz trajectory bound into a
  safe hold duration.

A Lyapunov certificate packages ``V`` with its decay rate ``epsilon``, the
affine constraint row ``eta(x,u) = LfV + LgV*u + eps*V`` (``eta <= 0`` is
the stabilization row of the QP), the exact derivative ``V'`` along the
closed loop, and a curvature bound ``D >= V''`` along held-input flows used
by the descent-lemma hold duration.

Relative-degree-1 barriers with a linear class-K multiplier are the special
case ``zeta = Lf h + Lg h * u + k h`` of the same form; only linear
multipliers are supported (they keep every row affine in ``u``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .affine_system import ContractViolation, StateVector

__all__ = [
    "BarrierCertificate",
    "LyapunovCertificate",
    "SafetySpec",
    "zeta",
    "eta",
    "lyapunov_value",
    "validate_gain_row",
    "double_integrator_safety",
    "double_integrator_clf",
]

# Extremal constants of the quadratic form V = e^2 + e*v + v^2 over its own
# sublevel set {V <= c}: max |v| = (2/sqrt(3)) sqrt(c) and
# max |2e + 3v| = sqrt(28/3) sqrt(c).  Derived by maximizing a linear form
# over the ellipse (Lagrange conditions); used by the curvature bound.
_MAX_ABS_V = 2.0 / math.sqrt(3.0)
_MAX_ABS_2E3V = math.sqrt(28.0 / 3.0)


def _entries(x) -> np.ndarray:
    if isinstance(x, StateVector):
        return x.entries
    return np.asarray(x, dtype=float)


def _scalar_input(u) -> float:
    arr = np.asarray(u, dtype=float).reshape(-1)
    if arr.shape[0] != 1:
        raise ContractViolation(f"expected a scalar input, got length {arr.shape[0]}")
    return float(arr[0])


def validate_gain_row(gain_row: Sequence[float]) -> bool:
    """True iff the gain row places the companion closed loop in the stable
    half plane.

    The row ``K = [K_0, ..., K_{r-1}]`` induces the characteristic
    polynomial ``s^r + K_{r-1} s^(r-1) + ... + K_0``; the certificate is
    valid exactly when all roots have negative real part.  For r <= 2 the
    sign conditions are necessary and sufficient; higher orders go through
    a Routh-Hurwitz table.
    """
    k = np.asarray(gain_row, dtype=float).reshape(-1)
    r = k.shape[0]
    if r == 0:
        return False
    if not np.all(np.isfinite(k)):
        return False
    if r <= 2:
        return bool(np.all(k > 0.0))
    # coefficients of s^r + c[1] s^(r-1) + ... + c[r], highest power first
    coeffs = np.concatenate(([1.0], k[::-1]))
    if np.any(coeffs <= 0.0):
        return False  # necessary condition for Hurwitz
    n = coeffs.shape[0]
    rows = [coeffs[0::2].copy(), coeffs[1::2].copy()]
    width = rows[0].shape[0]
    rows[1] = np.pad(rows[1], (0, width - rows[1].shape[0]))
    for _ in range(n - 2):
        top, mid = rows[-2], rows[-1]
        if abs(mid[0]) < 1e-300:
            return False  # degenerate table: treat as not provably stable
        new = np.zeros(width)
        for j in range(width - 1):
            new[j] = (mid[0] * top[j + 1] - top[0] * mid[j + 1]) / mid[0]
        rows.append(new)
    first_col = np.array([row[0] for row in rows[: n]])
    return bool(np.all(first_col > 0.0))


@dataclass(frozen=True)
class BarrierCertificate:
    """One safety function with its constraint row and worst-case rate bound.

    Evaluator conventions: all callbacks take a plain state array.
    ``zeta_affine(x) -> (a, b)`` with ``zeta(x,u) = a^T u + b``;
    ``rate_bound(x, u, r)`` lower-bounds ``d zeta/dt`` over the closed ball
    of radius ``r`` centered at ``x`` with ``u`` held.
    """

    h_eval: Callable[[np.ndarray], float]
    relative_degree: int
    gain_row: tuple
    transverse_eval: Callable[[np.ndarray], np.ndarray]
    zeta_affine: Callable[[np.ndarray], tuple]
    rate_bound: Callable[[np.ndarray, np.ndarray, float], float]
    label: str = "barrier"

    def __post_init__(self):
        object.__setattr__(self, "gain_row", tuple(float(g) for g in self.gain_row))
        if self.relative_degree < 1:
            raise ContractViolation(
                f"relative_degree must be >= 1, got {self.relative_degree}"
            )
        if len(self.gain_row) != self.relative_degree:
            raise ContractViolation(
                f"gain_row has length {len(self.gain_row)}, expected relative_degree="
                f"{self.relative_degree}"
            )
        if not validate_gain_row(self.gain_row):
            raise ContractViolation(
                f"gain_row {self.gain_row} does not place the companion closed loop "
                "in the stable half plane"
            )


@dataclass(frozen=True)
class LyapunovCertificate:
    """Exponentially-stabilizing Lyapunov candidate with its QP row and
    curvature bound.

    ``eta_affine(x) -> (a, b)`` with ``eta(x,u) = a^T u + b``; ``eta <= 0``
    enforces ``V' <= -epsilon V`` pointwise.  ``curvature_bound(x, u)``
    must dominate the second time derivative of ``V`` along the held-input
    flow anywhere in the sublevel set ``{V <= V(x)}`` — that is what makes
    the descent-lemma hold duration sound.
    """

    v_eval: Callable[[np.ndarray], float]
    eta_affine: Callable[[np.ndarray], tuple]
    vdot_eval: Callable[[np.ndarray, np.ndarray], float]
    epsilon: float
    curvature_bound: Callable[[np.ndarray, np.ndarray], float]
    target: np.ndarray

    def __post_init__(self):
        if not (self.epsilon > 0.0 and np.isfinite(self.epsilon)):
            raise ContractViolation(f"epsilon must be positive, got {self.epsilon}")
        tgt = np.asarray(self.target, dtype=float).reshape(-1).copy()
        tgt.setflags(write=False)
        object.__setattr__(self, "target", tgt)


@dataclass(frozen=True)
class SafetySpec:
    """Ordered collection of barrier certificates defining the safe set."""

    barriers: tuple

    def __post_init__(self):
        object.__setattr__(self, "barriers", tuple(self.barriers))
        if len(self.barriers) == 0:
            raise ContractViolation("SafetySpec needs at least one barrier")

    def __len__(self) -> int:
        return len(self.barriers)


def zeta(cert: BarrierCertificate, x, u) -> float:
    """Barrier constraint value ``zeta(x, u)``; ``zeta >= 0`` is the QP row."""
    a, b = cert.zeta_affine(_entries(x))
    return float(np.dot(np.asarray(a, float), np.asarray(u, float).reshape(-1)) + b)


def eta(cert: LyapunovCertificate, x, u) -> float:
    """Stabilization constraint value ``eta(x, u)``; ``eta <= 0`` is the QP row."""
    a, b = cert.eta_affine(_entries(x))
    return float(np.dot(np.asarray(a, float), np.asarray(u, float).reshape(-1)) + b)


def lyapunov_value(cert: LyapunovCertificate, x) -> float:
    return float(cert.v_eval(_entries(x)))


def double_integrator_safety(
    x1_min: float,
    x1_max: float,
    x2_min: float,
    x2_max: float,
    position_gains: Sequence[float],
    velocity_gain: float,
    rate_bound_mode: str = "tight",
) -> SafetySpec:
    """Box constraints for the double integrator as four barrier certificates.

    Position bounds have relative degree 2 (the input appears in the second
    derivative of ``h``), so they carry the two-gain row ``position_gains =
    [K_p, K_v]`` acting on ``[h, hdot]``.  Velocity bounds have relative
    degree 1 with linear multiplier ``velocity_gain``.

    The four constraint rows, with ``Kp, Kv = position_gains`` and
    ``k = velocity_gain``:

    ==  =================  ==========================================
    i   keeps              zeta_i(x, u)
    ==  =================  ==========================================
    1   x1 >= x1_min        u + Kv*x2 + Kp*(x1 - x1_min)
    2   x1 <= x1_max       -u - Kv*x2 + Kp*(x1_max - x1)
    3   x2 >= x2_min        u + k*(x2 - x2_min)
    4   x2 <= x2_max       -u + k*(x2_max - x2)
    ==  =================  ==========================================

    Rate bounds over a ball of radius r: differentiating each row along the
    held flow gives ``zeta1' = Kv*u + Kp*x2``, ``zeta2' = -Kv*u - Kp*x2``,
    ``zeta3' = k*u``, ``zeta4' = -k*u``.  Only the state-dependent ``x2``
    terms vary over the ball, so in ``"tight"`` mode (default) the held
    control term enters exactly and only ``x2`` is relaxed by ``r``.  In
    ``"conservative"`` mode the control term is replaced by
    ``-(coefficient)*|u|`` regardless of its actual sign — a blunter but
    still valid minorant, kept for cross-checking.
    """
    if not (x1_min < x1_max):
        raise ContractViolation(f"need x1_min < x1_max, got [{x1_min}, {x1_max}]")
    if not (x2_min < x2_max):
        raise ContractViolation(f"need x2_min < x2_max, got [{x2_min}, {x2_max}]")
    gains = np.asarray(position_gains, dtype=float).reshape(-1)
    if gains.shape[0] != 2:
        raise ContractViolation(
            f"position_gains must have length 2, got {gains.shape[0]}"
        )
    if not validate_gain_row(gains):
        raise ContractViolation(f"position_gains {gains.tolist()} are not stabilizing")
    k = float(velocity_gain)
    if not (k > 0.0):
        raise ContractViolation(f"velocity_gain must be positive, got {k}")
    if rate_bound_mode not in ("tight", "conservative"):
        raise ContractViolation(
            f"rate_bound_mode must be 'tight' or 'conservative', got {rate_bound_mode!r}"
        )
    kp, kv = float(gains[0]), float(gains[1])
    conservative = rate_bound_mode == "conservative"

    def _rate_pos_lower(x, u, r):
        u0 = _scalar_input(u)
        ctrl = -kv * abs(u0) if conservative else kv * u0
        return ctrl + kp * (x[1] - r)

    def _rate_pos_upper(x, u, r):
        u0 = _scalar_input(u)
        ctrl = -kv * abs(u0) if conservative else -kv * u0
        return ctrl - kp * (x[1] + r)

    def _rate_vel_lower(x, u, r):
        u0 = _scalar_input(u)
        return -k * abs(u0) if conservative else k * u0

    def _rate_vel_upper(x, u, r):
        u0 = _scalar_input(u)
        return -k * abs(u0) if conservative else -k * u0

    barrier_1 = BarrierCertificate(
        h_eval=lambda x: float(x[0] - x1_min),
        relative_degree=2,
        gain_row=(kp, kv),
        transverse_eval=lambda x: np.array([x[0] - x1_min, x[1]]),
        zeta_affine=lambda x: (np.array([1.0]), kv * x[1] + kp * (x[0] - x1_min)),
        rate_bound=_rate_pos_lower,
        label="x1 >= x1_min",
    )
    barrier_2 = BarrierCertificate(
        h_eval=lambda x: float(x1_max - x[0]),
        relative_degree=2,
        gain_row=(kp, kv),
        transverse_eval=lambda x: np.array([x1_max - x[0], -x[1]]),
        zeta_affine=lambda x: (np.array([-1.0]), -kv * x[1] + kp * (x1_max - x[0])),
        rate_bound=_rate_pos_upper,
        label="x1 <= x1_max",
    )
    barrier_3 = BarrierCertificate(
        h_eval=lambda x: float(x[1] - x2_min),
        relative_degree=1,
        gain_row=(k,),
        transverse_eval=lambda x: np.array([x[1] - x2_min]),
        zeta_affine=lambda x: (np.array([1.0]), k * (x[1] - x2_min)),
        rate_bound=_rate_vel_lower,
        label="x2 >= x2_min",
    )
    barrier_4 = BarrierCertificate(
        h_eval=lambda x: float(x2_max - x[1]),
        relative_degree=1,
        gain_row=(k,),
        transverse_eval=lambda x: np.array([x2_max - x[1]]),
        zeta_affine=lambda x: (np.array([-1.0]), k * (x2_max - x[1])),
        rate_bound=_rate_vel_upper,
        label="x2 <= x2_max",
    )
    return SafetySpec(barriers=(barrier_1, barrier_2, barrier_3, barrier_4))


def double_integrator_clf(
    x1_d: float,
    x2_d: float = 0.0,
    epsilon: float = 0.8,
) -> LyapunovCertificate:
    """Quadratic Lyapunov candidate for driving the double integrator to
    ``(x1_d, x2_d)``.

    With ``e = x1 - x1_d`` and ``v = x2 - x2_d``:

        V    = e^2 + e v + v^2            (positive definite about the target)
        V'   = (2e + v) x2 + (e + 2v) u
        eta  = V' + epsilon V             (<= 0 is the QP row)

    Curvature bound: along a held-input flow,
    ``V'' = 2 x2^2 + (2e + 3v + 2 x2_d) u + 2 u^2``.  Maximizing each
    state-dependent factor over the sublevel set {V <= V(x_k)} (where the
    state remains while the descent certificate holds) gives

        D = 2 (mv + |x2_d|)^2 + (m23 + 2|x2_d|) |u| + 2 u^2,
        mv = (2/sqrt 3) sqrt(V_k),  m23 = sqrt(28/3) sqrt(V_k),

    which strictly dominates V'' everywhere in the sublevel set — the
    ellipse-exact sharpening of the blunter triangle-inequality constants.
    For the usual ``x2_d = 0`` this is
    ``(8/3) V + sqrt(28/3) sqrt(V) |u| + 2 u^2``.
    """
    x1d = float(x1_d)
    x2d = float(x2_d)

    def _v(x):
        e = x[0] - x1d
        v = x[1] - x2d
        return e * e + e * v + v * v

    def _eta_affine(x):
        e = x[0] - x1d
        v = x[1] - x2d
        lf = (2.0 * e + v) * x[1]
        lg = e + 2.0 * v
        return (np.array([lg]), lf + epsilon * _v(x))

    def _vdot(x, u):
        e = x[0] - x1d
        v = x[1] - x2d
        return (2.0 * e + v) * x[1] + (e + 2.0 * v) * _scalar_input(u)

    def _curvature(x, u):
        u0 = abs(_scalar_input(u))
        sqrt_v = math.sqrt(max(_v(x), 0.0))
        max_speed = _MAX_ABS_V * sqrt_v + abs(x2d)
        max_mixed = _MAX_ABS_2E3V * sqrt_v + 2.0 * abs(x2d)
        return 2.0 * max_speed * max_speed + max_mixed * u0 + 2.0 * u0 * u0

    return LyapunovCertificate(
        v_eval=_v,
        eta_affine=_eta_affine,
        vdot_eval=_vdot,
        epsilon=float(epsilon),
        curvature_bound=_curvature,
        target=np.array([x1d, x2d]),
    )
