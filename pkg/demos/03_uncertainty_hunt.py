"""Hunt for inputs where a classifier cannot make up its mind.

Constructs a 3-class network whose decision boundaries all meet at one point
inside the unit square, so the output there is exactly uniform. Starting from
a confidently classified input nearby, the search minimizes the KL divergence
of the output from uniform until it lands on the meeting point, then reports
the abstention witness and the (monotone) KL trajectory.
"""

import numpy as np

from safequant import Dense, Network, Softmax, label, uncertainty_search


def build_triple_point_net(center=(0.62, 0.38), scale=4.0) -> Network:
    # Three logits that are linear forms vanishing at `center`, with weight
    # rows spaced 120 degrees apart: each pair of classes ties on a ray from
    # the center, and all three tie exactly at the center.
    angles = np.deg2rad([90.0, 210.0, 330.0])
    w = scale * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    b = -w @ np.asarray(center, dtype=np.float64)
    return Network([Dense(w, b), Softmax()], input_shape=2)


def main() -> None:
    net = build_triple_point_net()
    x = np.array([0.55, 0.45])
    dec = label(net.forward_single(x), epsilon_label=0.1)
    print(f"start {x.round(2)}: output {net.forward_single(x).round(4)} "
          f"-> label {dec.label}")

    report, trajectory = uncertainty_search(net, x, ball_radius=0.4, p=2,
                                            epsilon=0.01, budget=10_000, seed=0)

    print("\nKL trajectory (best-so-far, every 20th batch):")
    for batch, kl in trajectory[::20]:
        print(f"  batch {batch:>4}: KL = {kl:.3e}")
    print(f"  batch {trajectory[-1][0]:>4}: KL = {trajectory[-1][1]:.3e}")

    if report.risk_found is None:
        print("\nno uncertainty example found in this ball")
        return
    w = report.risk_found.x
    out = net.forward_single(w)
    print(f"\nuncertainty example at {w.round(4)}")
    print(f"  output {out.round(4)} -> label {label(out, 0.1).label} (abstains)")
    print(f"  queries used: {report.fevals}")


if __name__ == "__main__":
    main()
