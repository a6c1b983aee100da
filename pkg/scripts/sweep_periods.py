#!/usr/bin/env python3
"""Sweep fixed-period baselines against the self-triggered controller.

For each period in a list, runs the benchmark double-integrator study with
that zero-order-hold period and tabulates update counts, worst margins, and
outcomes next to the self-triggered run.  Shows the trade the trigger
removes: long periods violate the safety box, short ones burn updates.
"""

import argparse

import numpy as np

from safehold import (
    SimConfig,
    TriggerConfig,
    compare,
    double_integrator,
    double_integrator_clf,
    double_integrator_safety,
)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument(
        "--periods",
        default="0.75,0.5,0.3,0.1,0.05",
        help="comma-separated hold periods [s]",
    )
    ap.add_argument("--t-end", type=float, default=20.0, help="horizon [s]")
    args = ap.parse_args()
    periods = [float(tok) for tok in args.periods.replace(",", " ").split()]

    sys_ = double_integrator()
    safety = double_integrator_safety(
        -10.0, 10.0, -10.0, 10.0, position_gains=(105.0, 20.5), velocity_gain=2.0
    )
    clf = double_integrator_clf(x1_d=-7.0, epsilon=0.8)
    box = (np.array([-20.0]), np.array([20.0]))
    base = SimConfig(
        x0=np.array([6.0, 5.0]),
        dt_int=0.0025,
        t_end=args.t_end,
        trigger=TriggerConfig(tau_min=0.01, tau_max=2.0),
    )

    report = compare(sys_, safety, clf, box, base, periods)
    print(
        f"{'mode':<16}{'t_p':>7}{'updates':>9}{'min_margin':>13}"
        f"{'violated':>10}{'t_goal':>9}{'mean_int':>10}  terminated"
    )
    for row in report.rows:
        print(
            f"{row.mode:<16}"
            f"{'-' if row.t_p is None else format(row.t_p, '.3g'):>7}"
            f"{row.n_updates:>9}"
            f"{row.min_margin:>13.4g}"
            f"{'yes' if row.violated else 'no':>10}"
            f"{'-' if row.t_converge is None else format(row.t_converge, '.4g'):>9}"
            f"{'-' if np.isnan(row.mean_interval) else format(row.mean_interval, '.3g'):>10}"
            f"  {row.terminated}"
        )


if __name__ == "__main__":
    main()
