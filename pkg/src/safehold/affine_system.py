"""Control-affine plant models.

A plant is ``xdot = f(x) + g(x) u`` with a user-declared Lipschitz constant
for the closed-loop vector field.  The Lipschitz constant is what turns a
held (zeroth-order-hold) input into a computable trajectory bound, so it is
carried on the system itself rather than threaded through every call.

Only pointwise evaluation is required anywhere downstream: plants are
supplied as evaluator callbacks, and no symbolic differentiation happens
here or elsewhere in the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "ContractViolation",
    "StateVector",
    "AffineSystem",
    "eval_vector_field",
    "double_integrator",
    "LipschitzEstimate",
    "estimate_lipschitz",
]


class ContractViolation(ValueError):
    """An argument violated a documented precondition (bad shape, sign, ...)."""


def _as_vector(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ContractViolation(f"{name} must be a 1-D vector, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class StateVector:
    """A plant state ``entries`` tagged with the simulation time it belongs to.

    Entries must be finite: NaN/inf states are rejected at construction so
    they can never propagate into the simulator or the trigger math.
    """

    entries: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        arr = _as_vector(self.entries, "entries")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)
        object.__setattr__(self, "time", float(self.time))
        if not np.all(np.isfinite(arr)):
            raise ContractViolation(f"state entries must be finite, got {arr}")
        if self.time < 0.0:
            raise ContractViolation(f"time must be nonnegative, got {self.time}")

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class AffineSystem:
    """Control-affine plant ``xdot = f(x) + g(x) u``.

    ``lipschitz_const`` is a user declaration: a bound L such that the
    closed-loop field ``F(x) = f(x) + g(x) u`` (u held constant) satisfies
    ``||F(x) - F(y)|| <= L ||x - y||`` over the operating region.  It is
    validated only for positivity -- no general algorithm can certify it --
    and every trajectory bound derived from it is only as valid as the
    declaration.  See :func:`estimate_lipschitz` for an empirical helper.
    """

    state_dim: int
    input_dim: int
    drift: Callable[[np.ndarray], np.ndarray]
    input_map: Callable[[np.ndarray], np.ndarray]
    lipschitz_const: float
    label: str = field(default="affine system")

    def __post_init__(self):
        if self.state_dim <= 0 or self.input_dim <= 0:
            raise ContractViolation(
                f"dimensions must be positive, got n={self.state_dim}, m={self.input_dim}"
            )
        if not (self.lipschitz_const > 0.0 and np.isfinite(self.lipschitz_const)):
            raise ContractViolation(
                f"lipschitz_const must be a positive finite real, got {self.lipschitz_const}"
            )


def eval_vector_field(sys: AffineSystem, x: StateVector, u) -> np.ndarray:
    """Evaluate ``f(x) + g(x) u`` at a state under input ``u``."""
    xe = x.entries
    if xe.shape[0] != sys.state_dim:
        raise ContractViolation(
            f"state has length {xe.shape[0]}, system expects {sys.state_dim}"
        )
    uv = _as_vector(u, "u")
    if uv.shape[0] != sys.input_dim:
        raise ContractViolation(
            f"input has length {uv.shape[0]}, system expects {sys.input_dim}"
        )
    f = _as_vector(sys.drift(xe), "drift(x)")
    if f.shape[0] != sys.state_dim:
        raise ContractViolation(
            f"drift returned length {f.shape[0]}, expected {sys.state_dim}"
        )
    g = np.asarray(sys.input_map(xe), dtype=float)
    g = g.reshape(sys.state_dim, sys.input_dim)
    return f + g @ uv


def double_integrator(lipschitz_const: float = 1.0) -> AffineSystem:
    """The planar double integrator: ``x1dot = x2``, ``x2dot = u``.

    The closed-loop field under held input is ``F(x) = [x2, u]``, whose
    exact Lipschitz constant is 1 (the default).
    """
    return AffineSystem(
        state_dim=2,
        input_dim=1,
        drift=lambda x: np.array([x[1], 0.0]),
        input_map=lambda x: np.array([[0.0], [1.0]]),
        lipschitz_const=lipschitz_const,
        label="double integrator",
    )


@dataclass(frozen=True)
class LipschitzEstimate:
    """Empirical Lipschitz ratio — an estimate, never a certified bound.

    ``value`` is the largest observed ``||F(x)-F(y)|| / ||x-y||`` over the
    sampled pairs.  It lower-bounds the true constant; treat it as a sanity
    check on a declared ``lipschitz_const``, not a substitute for one.
    """

    value: float
    pairs: int
    is_certified: bool = False


def estimate_lipschitz(
    sys: AffineSystem,
    state_low,
    state_high,
    u_low,
    u_high,
    pairs: int = 20000,
    rng: np.random.Generator | None = None,
) -> LipschitzEstimate:
    """Sample random state pairs (with a shared held input) in a box and
    report the max difference ratio of the closed-loop field.

    The result is flagged as an estimate; it is never substituted for the
    system's declared constant.
    """
    if pairs <= 0:
        raise ContractViolation(f"pairs must be positive, got {pairs}")
    lo = _as_vector(state_low, "state_low")
    hi = _as_vector(state_high, "state_high")
    if lo.shape[0] != sys.state_dim or hi.shape[0] != sys.state_dim:
        raise ContractViolation("state box must match the system's state dimension")
    if np.any(lo >= hi):
        raise ContractViolation("state box must satisfy low < high elementwise")
    ul = _as_vector(u_low, "u_low")
    uh = _as_vector(u_high, "u_high")
    if ul.shape[0] != sys.input_dim or uh.shape[0] != sys.input_dim:
        raise ContractViolation("input box must match the system's input dimension")
    if rng is None:
        rng = np.random.default_rng(0)

    best = 0.0
    for _ in range(pairs):
        xa = rng.uniform(lo, hi)
        xb = rng.uniform(lo, hi)
        gap = np.linalg.norm(xa - xb)
        if gap < 1e-12:
            continue
        u = rng.uniform(ul, uh)
        fa = _as_vector(sys.drift(xa), "drift") + np.asarray(sys.input_map(xa), float).reshape(
            sys.state_dim, sys.input_dim
        ) @ u
        fb = _as_vector(sys.drift(xb), "drift") + np.asarray(sys.input_map(xb), float).reshape(
            sys.state_dim, sys.input_dim
        ) @ u
        ratio = np.linalg.norm(fa - fb) / gap
        if ratio > best:
            best = ratio
    return LipschitzEstimate(value=float(best), pairs=pairs)
