#!/usr/bin/env python3
"""Run the benchmark double-integrator study through the library API.

Simulates the self-triggered controller from x0 = (6, 5) toward x1 = -7
inside the +/-10 box and prints where the updates landed, which clock was
binding, and the closed-loop outcome.  Pass --periodic to watch the
fixed-period baseline violate the position floor instead.
"""

import argparse

import numpy as np

from safehold import (
    SimConfig,
    TriggerConfig,
    double_integrator,
    double_integrator_clf,
    double_integrator_safety,
    run,
    violation_intervals,
)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--periodic", action="store_true", help="fixed-period baseline")
    ap.add_argument("--t-p", type=float, default=0.75, help="baseline period [s]")
    ap.add_argument("--t-end", type=float, default=20.0, help="horizon [s]")
    ap.add_argument("--show-updates", type=int, default=12, help="update rows to print")
    args = ap.parse_args()

    sys_ = double_integrator()
    safety = double_integrator_safety(
        -10.0, 10.0, -10.0, 10.0, position_gains=(105.0, 20.5), velocity_gain=2.0
    )
    clf = double_integrator_clf(x1_d=-7.0, epsilon=0.8)
    box = (np.array([-20.0]), np.array([20.0]))
    cfg = SimConfig(
        x0=np.array([6.0, 5.0]),
        dt_int=0.0025,
        t_end=args.t_end,
        mode="periodic" if args.periodic else "self_triggered",
        t_p=args.t_p if args.periodic else None,
        trigger=TriggerConfig(tau_min=0.01, tau_max=2.0),
    )

    trace = run(sys_, safety, clf, box, cfg)

    print(f"mode: {cfg.mode}   updates: {len(trace.updates)}   samples: {trace.t.size}")
    print(f"terminated: {trace.terminated}   t_final: {trace.t[-1]:.4f} s")
    print(
        f"min margin: {trace.min_margin:.6f} "
        f"(h{trace.min_margin_barrier + 1} at t = {trace.min_margin_time:.4f} s)"
    )
    for i in range(4):
        for a, b in violation_intervals(trace, i):
            print(f"  h{i + 1} < 0 on [{a:.4f}, {b:.4f}] s")

    head = trace.updates[: args.show_updates]
    print(f"\nfirst {len(head)} updates:")
    print(f"{'t':>9} {'u':>10} {'tau_cbf':>9} {'tau_clf':>9} {'tau':>9}  limiting")
    for rec in head:
        d = rec.decision
        if d is None:
            print(f"{rec.t:>9.4f} {rec.u[0]:>10.4f} {'-':>9} {'-':>9} {'-':>9}  PERIODIC")
        else:
            print(
                f"{rec.t:>9.4f} {rec.u[0]:>10.4f} {d.tau_cbf:>9.4f} "
                f"{d.tau_clf:>9.4f} {d.tau:>9.4f}  {d.limiting}"
            )
    if len(trace.updates) >= 11:
        gaps = np.diff([rec.t for rec in trace.updates])
        print(f"\ntail update interval (mean of last 10): {np.mean(gaps[-10:]):.4f} s")


if __name__ == "__main__":
    main()
