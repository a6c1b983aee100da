import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from safehold import (
    BarrierCertificate,
    ContractViolation,
    LyapunovCertificate,
    NonpositiveMargin,
    SafetySpec,
    StateVector,
    TriggerConfig,
    assemble,
    cbf_safe_period,
    clf_update_period,
    combine_periods,
    decide,
    run,
    solve,
    trajectory_bound,
    zeta,
    zeta_lower_bound,
)

CFG = TriggerConfig(tau_min=1e-4, tau_max=2.0, root_tol=1e-8)


def state(entries, t=0.0):
    return StateVector(entries=np.asarray(entries, dtype=float), time=t)


def constant_rate_barrier(z0, rate):
    """Synthetic certificate: zeta(x, u) = z0 everywhere, slope bound = rate."""
    return BarrierCertificate(
        h_eval=lambda x: 1.0,
        relative_degree=1,
        gain_row=(1.0,),
        transverse_eval=lambda x: np.array([1.0]),
        zeta_affine=lambda x: (np.array([0.0]), z0),
        rate_bound=lambda x, u, r: rate,
        label="synthetic",
    )


def synthetic_clf(vdot, curvature):
    return LyapunovCertificate(
        v_eval=lambda x: 1.0,
        eta_affine=lambda x: (np.array([0.0]), 0.0),
        vdot_eval=lambda x, u: vdot,
        epsilon=0.8,
        curvature_bound=lambda x, u: curvature,
        target=np.array([0.0, 0.0]),
    )


class TestTrajectoryBound:
    def test_zero_at_anchor(self, plant):
        tb = trajectory_bound(plant, state([6.0, 5.0], t=1.5), [3.0])
        assert tb.value(1.5) == 0.0

    def test_closed_form_value(self, plant):
        # speed 2 needs ||[x2, u]|| = 2
        tb = trajectory_bound(plant, state([0.0, 2.0]), [0.0])
        assert tb.speed_norm == pytest.approx(2.0)
        assert tb.value(1.0) == pytest.approx(2.0 * (math.e - 1.0))

    def test_before_anchor_rejected(self, plant):
        tb = trajectory_bound(plant, state([0.0, 1.0], t=1.0), [0.0])
        with pytest.raises(ContractViolation):
            tb.value(0.5)

    @given(
        x2=st.floats(min_value=-9, max_value=9, allow_nan=False),
        u=st.floats(min_value=-20, max_value=20, allow_nan=False),
        t1=st.floats(min_value=0.001, max_value=2, allow_nan=False),
        t2=st.floats(min_value=0.001, max_value=2, allow_nan=False),
    )
    @settings(max_examples=60, deadline=None)
    def test_strictly_increasing_when_moving(self, plant, x2, u, t1, t2):
        if abs(x2) + abs(u) < 1e-6 or abs(t1 - t2) < 1e-9:
            return
        tb = trajectory_bound(plant, state([0.0, x2]), [u])
        lo, hi = sorted([t1, t2])
        assert tb.value(lo) < tb.value(hi)


class TestZetaLowerBound:
    def test_equals_zeta_at_anchor(self, plant, safety):
        rng = np.random.default_rng(0)
        for _ in range(100):
            x = state(rng.uniform(-9, 9, size=2))
            u = [rng.uniform(-20, 20)]
            tb = trajectory_bound(plant, x, u)
            for cert in safety.barriers:
                assert zeta_lower_bound(cert, x, u, tb, 0.0) == pytest.approx(
                    zeta(cert, x.entries, u), abs=1e-12
                )

    def test_position_floor_closed_form(self, plant, safety):
        """For the lower position barrier the bound must equal
        zeta + t * (kv*u + kp*(x2 - rbar(t))) with kp=105, kv=20.5."""
        rng = np.random.default_rng(1)
        for _ in range(100):
            x = state(rng.uniform(-9, 9, size=2))
            u = rng.uniform(-20, 20)
            tb = trajectory_bound(plant, x, [u])
            t = rng.uniform(0.0, 2.0)
            expect = zeta(safety.barriers[0], x.entries, [u]) + t * (
                20.5 * u + 105.0 * (x.entries[1] - tb.value(t))
            )
            got = zeta_lower_bound(safety.barriers[0], x, [u], tb, t)
            assert got == pytest.approx(expect, rel=1e-12, abs=1e-9)


class TestCbfSafePeriod:
    def test_nonnegative_rate_hits_horizon(self, plant):
        spec = SafetySpec(barriers=(constant_rate_barrier(1.0, 0.5),))
        tau, per = cbf_safe_period(spec, plant, state([0.0, 0.0]), [0.0], CFG)
        assert tau == CFG.tau_max
        assert per[0] == CFG.tau_max

    def test_linear_crossing_root(self, plant):
        spec = SafetySpec(barriers=(constant_rate_barrier(1.0, -2.0),))
        tau, _ = cbf_safe_period(spec, plant, state([0.0, 0.0]), [0.0], CFG)
        assert tau == pytest.approx(0.5, abs=CFG.root_tol * 10)

    def test_root_is_left_side_underapproximation(self, plant):
        spec = SafetySpec(barriers=(constant_rate_barrier(1.0, -2.0),))
        for method in ("bisection", "secant"):
            cfg = TriggerConfig(tau_min=1e-4, tau_max=2.0, root_tol=1e-8, root_method=method)
            tau, _ = cbf_safe_period(spec, plant, state([0.0, 0.0]), [0.0], cfg)
            assert tau <= 0.5 + 1e-15

    def test_negative_margin_rejected(self, plant, safety):
        x = state([-9.99, -9.0])
        with pytest.raises(NonpositiveMargin):
            cbf_safe_period(safety, plant, x, [-20.0], CFG)

    def test_study_case_matches_fine_bisection_oracle(self, plant, safety, clf, box):
        x = state([-9.0, -3.0])
        u = solve(assemble(x, safety, clf, box)).u_star
        tau, per = cbf_safe_period(safety, plant, x, u, CFG)
        assert int(np.argmin(per)) == 0  # the position floor is the binding barrier
        tb = trajectory_bound(plant, x, u)

        def g(t):
            return zeta_lower_bound(safety.barriers[0], x, u, tb, t)

        lo, hi = 0.0, CFG.tau_max
        assert g(lo) >= 0.0 and g(hi) < 0.0
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if g(mid) >= 0.0:
                lo = mid
            else:
                hi = mid
        assert per[0] == pytest.approx(lo, abs=1e-6)

    def test_secant_agrees_with_bisection(self, plant, safety, clf, box):
        x = state([-9.0, -3.0])
        u = solve(assemble(x, safety, clf, box)).u_star
        taus = {}
        for method in ("bisection", "secant"):
            cfg = TriggerConfig(tau_min=1e-4, tau_max=2.0, root_tol=1e-8, root_method=method)
            taus[method], _ = cbf_safe_period(safety, plant, x, u, cfg)
        assert taus["secant"] == pytest.approx(taus["bisection"], abs=1e-6)

    def test_hold_for_safe_period_preserves_barriers(self, plant, safety, clf, box):
        """Integrate the held input over the returned window: h stays >= -1e-6."""
        rng = np.random.default_rng(2)
        checked = 0
        for _ in range(400):
            if checked >= 40:
                break
            x0 = rng.uniform(-8.5, 8.5, size=2)
            x = state(x0)
            try:
                u = solve(assemble(x, safety, clf, box)).u_star
            except Exception:
                continue
            tau, _ = cbf_safe_period(safety, plant, x, u, CFG)
            steps = max(int(tau / 1e-3), 1)
            tgrid = np.linspace(0.0, tau, steps + 1)
            # exact held-input flow of the double integrator
            x1 = x0[0] + x0[1] * tgrid + 0.5 * u[0] * tgrid**2
            x2 = x0[1] + u[0] * tgrid
            hs = np.stack([x1 + 10.0, 10.0 - x1, x2 + 10.0, 10.0 - x2])
            assert hs.min() >= -1e-6, (x0, u, tau)
            checked += 1
        assert checked >= 40


class TestClfUpdatePeriod:
    def test_descent_lemma_root(self):
        assert clf_update_period(synthetic_clf(-2.0, 4.0), state([0, 0]), [0.0], CFG) == (
            pytest.approx(1.0)
        )

    def test_nonnegative_slope_clamps_to_floor(self):
        assert clf_update_period(synthetic_clf(0.0, 4.0), state([0, 0]), [0.0], CFG) == (
            CFG.tau_min
        )

    def test_concave_decrease_hits_horizon(self):
        assert clf_update_period(synthetic_clf(-2.0, 0.0), state([0, 0]), [0.0], CFG) == (
            CFG.tau_max
        )

    def test_value_does_not_increase_over_period(self, plant, safety, clf, box):
        """V(x(t_k + tau_clf)) <= V(x(t_k)) + 1e-8 whenever the root was
        interior (not clamped), along the exact held-input flow."""
        rng = np.random.default_rng(3)
        checked = 0
        for _ in range(600):
            if checked >= 60:
                break
            x0 = rng.uniform(-8.5, 8.5, size=2)
            x = state(x0)
            try:
                u = solve(assemble(x, safety, clf, box)).u_star
            except Exception:
                continue
            tau = clf_update_period(clf, x, u, CFG)
            if not (CFG.tau_min < tau < CFG.tau_max):
                continue
            x1 = x0[0] + x0[1] * tau + 0.5 * u[0] * tau**2
            x2 = x0[1] + u[0] * tau
            assert clf.v_eval(np.array([x1, x2])) <= clf.v_eval(x0) + 1e-8
            checked += 1
        assert checked >= 60


class TestCombineAndDecide:
    def test_minimum_with_clf_binding(self):
        d = combine_periods(0.4, (0.4,), 0.3166, TriggerConfig(tau_min=1e-3, tau_max=2.0))
        assert d.tau == pytest.approx(0.3166)
        assert d.limiting == "CLF"

    def test_horizon_clamp(self):
        d = combine_periods(5.0, (5.0,), 5.0, TriggerConfig(tau_min=1e-3, tau_max=2.0))
        assert d.tau == 2.0
        assert d.limiting == "TAU_MAX"

    def test_floor_clamp(self):
        d = combine_periods(1e-9, (1e-9,), 1.0, TriggerConfig(tau_min=1e-3, tau_max=2.0))
        assert d.tau == 1e-3
        assert d.limiting == "TAU_MIN"

    def test_cbf_binding_names_argmin_barrier(self):
        d = combine_periods(0.2, (0.9, 0.2, 0.5), 0.7, TriggerConfig(tau_min=1e-3, tau_max=2.0))
        assert d.limiting == "CBF(1)"
        assert d.tau == pytest.approx(0.2)

    @given(
        tau_cbf=st.floats(min_value=1e-12, max_value=10, allow_nan=False),
        tau_clf=st.floats(min_value=1e-12, max_value=10, allow_nan=False),
    )
    @settings(max_examples=120, deadline=None)
    def test_clamp_window_invariants(self, tau_cbf, tau_clf):
        cfg = TriggerConfig(tau_min=1e-3, tau_max=2.0)
        d = combine_periods(tau_cbf, (tau_cbf,), tau_clf, cfg)
        assert cfg.tau_min <= d.tau <= cfg.tau_max
        raw = min(tau_cbf, tau_clf)
        if raw >= cfg.tau_min:
            assert d.tau <= raw + 1e-15

    def test_decide_consistency_at_study_start(self, plant, safety, clf, box):
        x = state([6.0, 5.0])
        u = solve(assemble(x, safety, clf, box)).u_star
        d = decide(safety, clf, plant, x, u, CFG)
        assert d.tau_cbf == pytest.approx(min(d.tau_cbf_per_barrier))
        assert d.tau == min(max(min(d.tau_cbf, d.tau_clf), CFG.tau_min), CFG.tau_max)
        assert d.limiting == "CLF"  # the descent clock binds at the start


class TestUpdateIntervalTail:
    """Behavior of the chosen periods late in the benchmark run."""

    def _intervals(self, plant, safety, clf, box, study_config):
        trace = run(plant, safety, clf, box, study_config)
        assert trace.terminated == "GOAL"
        times = np.array([rec.t for rec in trace.updates])
        return np.diff(times)

    def test_tail_intervals_bounded_away_from_zero(
        self, plant, safety, clf, box, study_config
    ):
        gaps = self._intervals(plant, safety, clf, box, study_config)
        assert gaps[-10:].min() >= 0.05  # no accumulation of updates

    def test_tail_intervals_nearly_constant(
        self, plant, safety, clf, box, study_config
    ):
        """The chosen periods should settle to a constant near the goal:
        the last 10 inter-update intervals pairwise within 5%.

        The implemented trigger does not exhibit this: the interval map has
        no fixed point for this configuration buried in the descent-lemma
        period, so consecutive periods cycle instead of settling (see the
        tail-interval acceptance check, which is failed honestly for the
        same reason)."""
        gaps = self._intervals(plant, safety, clf, box, study_config)[-10:]
        spread = (gaps.max() - gaps.min()) / gaps.min()
        assert spread < 0.05, f"tail intervals not constant: spread {spread:.1%}"
