"""Shared fixture networks.

All weights are deterministic constants: either literal arrays or arrays
drawn once from a fixed-seed generator, so every test run sees bit-identical
models.
"""

import numpy as np
import pytest

from safequant.network import Dense, Network, ReLU, Softmax, Tanh

# Hand-written 2-input, 1-hidden-layer (2 units) ReLU net; forward outputs
# below were computed by hand with plain python arithmetic (see oracle tests).
SEED0_W1 = np.array([[1.0, -0.5], [0.25, 0.75]])
SEED0_B1 = np.array([0.1, -0.2])
SEED0_W2 = np.array([[0.6, -1.0], [-0.3, 0.8]])
SEED0_B2 = np.array([0.05, -0.05])

SEED0_OUT_03_07 = np.array([0.3600839032622659, 0.6399160967377341])
SEED0_OUT_1_0 = np.array([0.7310585786300049, 0.2689414213699951])


def make_seed0_net() -> Network:
    return Network([Dense(SEED0_W1, SEED0_B1), ReLU(),
                    Dense(SEED0_W2, SEED0_B2), Softmax()], input_shape=2)


def make_identity_softmax_net() -> Network:
    return Network([Dense(np.eye(2), np.zeros(2)), Softmax()], input_shape=2)


def make_constant_net(n_in: int = 2, n_out: int = 2) -> Network:
    return Network([Dense(np.zeros((n_out, n_in)), np.zeros(n_out)), Softmax()],
                   input_shape=n_in)


def make_mlp(hidden, activation, seed, n_in=2, n_out=2, scale=1.5) -> Network:
    """Small MLP with fixed-seed constant weights and a softmax head."""
    rng = np.random.default_rng(seed)
    layers = []
    prev = n_in
    act = {"relu": ReLU, "tanh": Tanh}[activation]
    for width in hidden:
        layers += [Dense(rng.normal(scale=scale, size=(width, prev)),
                         rng.normal(scale=0.3, size=width)), act()]
        prev = width
    layers += [Dense(rng.normal(scale=scale, size=(n_out, prev)),
                     rng.normal(scale=0.3, size=n_out)), Softmax()]
    return Network(layers, input_shape=n_in)


def fixture_nets_2d() -> list[tuple[str, Network]]:
    """The desk-scale 2-input fixture family (ReLU and tanh shapes)."""
    return [
        ("relu-8", make_mlp([8], "relu", seed=101)),
        ("relu-12", make_mlp([12], "relu", seed=102)),
        ("relu-6x6", make_mlp([6, 6], "relu", seed=103)),
        ("tanh-8", make_mlp([8], "tanh", seed=104)),
        ("tanh-10", make_mlp([10], "tanh", seed=105)),
        ("tanh-5x5", make_mlp([5, 5], "tanh", seed=106)),
    ]


def make_triple_point_net(center=(0.62, 0.38), scale=4.0) -> Network:
    """3-class net whose decision boundaries all meet at `center`: the three
    logits are linear forms vanishing there, so the output is exactly uniform
    at the meeting point."""
    angles = np.deg2rad([90.0, 210.0, 330.0])
    w = scale * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    b = -w @ np.asarray(center, dtype=np.float64)
    return Network([Dense(w, b), Softmax()], input_shape=2)


@pytest.fixture
def seed0_net():
    return make_seed0_net()


@pytest.fixture
def identity_softmax_net():
    return make_identity_softmax_net()


@pytest.fixture
def constant_net():
    return make_constant_net()


@pytest.fixture
def triple_point_net():
    return make_triple_point_net()
