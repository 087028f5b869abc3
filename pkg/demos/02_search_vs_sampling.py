"""Compare mesh search against uniform random sampling at equal budgets.

Both estimators return a lower bound on the true greatest changing rate; the
interesting question is which one gets closer for the same number of network
queries. Runs paired comparisons over several inputs and norm orders and
prints a small table.
"""

import numpy as np

from safequant import (NormBall, lipschitz_metric, make_ci_case,
                       random_sampling_baseline)

from importlib import import_module
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))
demo1 = import_module("01_safe_radius")


def main() -> None:
    centers = [np.array(c) for c in
               [(0.3, 0.7), (0.5, 0.5), (0.7, 0.3), (0.35, 0.6), (0.6, 0.4)]]
    budget = 5_000
    print(f"budget: {budget} evaluations per run\n")
    print(f"{'p':>4} {'center':>12} {'search Q':>10} {'sampling Q':>11} {'winner':>8}")
    for p in (1, 2, np.inf):
        for seed, center in enumerate(centers):
            net = demo1.build_net(seed=101 + seed)
            expr = make_ci_case(1, net.forward_single(center))
            ball = NormBall(center, radius=0.2, p=p)
            q_search = lipschitz_metric(net, expr, ball, budget=budget,
                                        seed=seed).Q_estimate
            q_sample = random_sampling_baseline(net, expr, ball, budget,
                                                seed=seed).Q_estimate
            winner = "search" if q_search >= q_sample else "sampling"
            p_disp = "inf" if np.isinf(p) else int(p)
            c_disp = f"({center[0]:.2f}, {center[1]:.2f})"
            print(f"{p_disp:>4} {c_disp:>12} {q_search:>10.4f} "
                  f"{q_sample:>11.4f} {winner:>8}")


if __name__ == "__main__":
    main()
