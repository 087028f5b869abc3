"""Certify a conservative safe radius around one input of a tiny classifier.

Builds a 2-input, 8-hidden-unit ReLU network with fixed weights, estimates
the greatest changing rate Q of its top-label confidence gap over a sup-norm
ball, and turns that into a radius d' = min(s(x)/Q, d) inside which the label
cannot flip (against the estimated rate). The estimate is cross-checked
against an exhaustive grid, which is tractable at two dimensions.
"""

import numpy as np

from safequant import (Dense, MadsConfig, Network, NormBall, ReLU, Softmax,
                       certify_radius, grid_oracle, lipschitz_metric,
                       make_ci_case)


def build_net(seed: int = 101) -> Network:
    rng = np.random.default_rng(seed)
    return Network([
        Dense(rng.normal(scale=1.5, size=(8, 2)), rng.normal(scale=0.3, size=8)),
        ReLU(),
        Dense(rng.normal(scale=1.5, size=(2, 8)), rng.normal(scale=0.3, size=2)),
        Softmax(),
    ], input_shape=2)


def main() -> None:
    net = build_net()
    x = np.array([0.4, 0.55])
    out = net.forward_single(x)
    print(f"center output: {out.round(4)}  (top label {int(np.argmax(out)) + 1})")

    # Property: confidence gap between the top label and the runner-up.
    expr = make_ci_case(1, out)
    ball = NormBall(x, radius=0.2, p=np.inf)

    report = lipschitz_metric(net, expr, ball, budget=20_000, seed=0)
    d_prime, cert = certify_radius(report)
    print(f"search estimate:  Q = {report.Q_estimate:.5f}  "
          f"({report.fevals} evals in {report.batches} batches)")
    print(f"certified radius: d' = {d_prime:.5f}  "
          f"(clamped={cert.radius_clamped}, provenance={cert.q_provenance})")

    truth = grid_oracle(net, expr, ball, points_per_dim=401)
    gap = abs(report.Q_estimate - truth.Q_estimate) / truth.Q_estimate
    print(f"grid ground truth: Q = {truth.Q_estimate:.5f}  "
          f"(search within {gap:.2%})")

    # Sanity sweep: no point inside d' should violate the property.
    inner = NormBall(x, d_prime, np.inf).box()
    axes = [np.linspace(inner.lower[i], inner.upper[i], 801) for i in (0, 1)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    violations = int(np.sum(expr.evaluate_many(net.forward(pts)) < 0))
    print(f"violations inside d' on an 801x801 grid: {violations}")


if __name__ == "__main__":
    main()
