"""Small deterministic networks and datasets for tests, demos and the benchmark harness."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .network import LabeledInput, Network, forward, predict_label


def make_rng(seed: int | None = None) -> np.random.Generator:
    """RNG seeded from ``seed``, else from the ``LG_SEED`` environment variable, else 0."""
    if seed is None:
        seed = int(os.environ.get("LG_SEED", "0"))
    return np.random.default_rng(seed)


def two_layer_example() -> Network:
    """2-2-1 network: hidden ``(2x+y, x+2y)``, output ``-h1 + h2``, zero biases."""
    return Network.from_arrays([[[2.0, 1.0], [1.0, 2.0]], [[-1.0, 1.0]]], [[0.0, 0.0], [0.0]])


def random_network(rng: np.random.Generator, widths: list[int], bias_scale: float = 0.3) -> Network:
    weights, biases = [], []
    for d_in, d_out in zip(widths[:-1], widths[1:]):
        weights.append(rng.normal(0.0, 1.0 / np.sqrt(d_in), size=(d_out, d_in)) * 1.5)
        biases.append(rng.normal(0.0, bias_scale, size=d_out))
    return Network.from_arrays(weights, biases)


# weight-layer counts 2..5, widths 2..24
FIXTURE_WIDTHS = [
    [2, 3, 2],
    [2, 8, 3],
    [3, 6, 6, 4],
    [4, 12, 10],
    [5, 16, 16, 5],
    [6, 24, 12, 8, 10],
    [8, 10, 10, 10, 10, 10],
    [3, 5, 5, 5, 3],
    [10, 24, 24, 10],
    [2, 4, 4, 4, 4, 2],
    [12, 20, 6],
    [7, 9, 14, 9, 4],
]

# at most 3 inputs and 6 hidden neurons, so at most 6 unstable ReLUs
TINY_WIDTHS = [
    [2, 4, 3],
    [2, 3, 3, 3],
    [3, 5, 3],
    [3, 6, 4],
    [2, 2, 2, 2, 3],
    [2, 6, 2],
]


def fixture_networks(seed: int = 7) -> list[Network]:
    rng = np.random.default_rng(seed)
    return [random_network(rng, w) for w in FIXTURE_WIDTHS]


def tiny_networks(seed: int = 11) -> list[Network]:
    rng = np.random.default_rng(seed)
    return [random_network(rng, w, bias_scale=0.2) for w in TINY_WIDTHS]


def labelled_points(net: Network, points) -> list[LabeledInput]:
    """Label ``points`` with the network's own prediction, skipping ties."""
    out = []
    for p in np.atleast_2d(points):
        label = predict_label(forward(net, p))
        if isinstance(label, int):
            out.append(LabeledInput(p, label, index=len(out)))
    return out


def threshold_network() -> Network:
    """One input, three classes.

    Scores are ``(0.7, -relu(x), relu(x))``: class 0 wins for ``x < 0.7`` and class 2
    above it, class 1 never wins.
    """
    return Network.from_arrays(
        [[[1.0]], [[0.0], [-1.0], [1.0]]],
        [[0.0], [0.7, 0.0, 0.0]],
    )


def notch_network(threshold: float = 1.2) -> Network:
    """Two inputs, four hidden units, three classes.

    Class 1 scores ``n(x) + n(y)`` with ``n(t) = relu(2t - 1) - relu(2t - 1.5)``, a ramp
    that saturates at 0.5 for ``t >= 0.75``; class 0 is the constant ``threshold`` and
    class 2 the constant -1.  The ReLU relaxation over ``[0, 1]^2`` overestimates the
    class-1 maximum (true value 1.0), so a threshold a little above 1 is only certified
    after splitting.
    """
    w1 = [[2.0, 0.0], [2.0, 0.0], [0.0, 2.0], [0.0, 2.0]]
    b1 = [-1.0, -1.5, -1.0, -1.5]
    w2 = [[0.0, 0.0, 0.0, 0.0], [1.0, -1.0, 1.0, -1.0], [0.0, 0.0, 0.0, 0.0]]
    b2 = [threshold, 0.0, -1.0]
    return Network.from_arrays([w1, w2], [b1, b2])


@dataclass
class SpeedupSuite:
    net: Network
    inputs: list[LabeledInput]
    eps: float
    adversarial: list[int]


def speedup_suite(n_inputs: int = 50, n_classes: int = 10, seed: int = 3) -> SpeedupSuite:
    """Non-robust inputs where one high-index label sits just below the true one.

    Input ``j`` drives class ``j`` through an identity hidden unit; a second bank of
    random hidden units adds a small nonlinear perturbation to every score.  Each input
    puts the true class at 0.6 and its runner-up (from the upper half of the labels)
    within ``eps`` of it, so ``eps`` is enough to flip it while the rest stay far below.
    """
    rng = np.random.default_rng(seed)
    d = n_classes
    n_noise = 12
    w1 = np.vstack([np.eye(d), rng.normal(0.0, 1.0, size=(n_noise, d))])
    b1 = np.concatenate([np.zeros(d), rng.normal(0.0, 0.3, size=n_noise)])
    w2 = np.hstack([np.eye(d), 0.01 * rng.normal(0.0, 1.0, size=(d, n_noise))])
    b2 = np.zeros(d)
    net = Network.from_arrays([w1, w2], [b1, b2])

    eps = 0.05
    half = n_classes // 2
    inputs, adversarial = [], []
    while len(inputs) < n_inputs:
        original = int(rng.integers(0, half))
        adv = int(rng.integers(half, n_classes))
        x = rng.uniform(0.05, 0.35, size=d)
        x[original] = 0.6
        x[adv] = 0.6 - rng.uniform(0.01, 0.04)
        if predict_label(forward(net, x)) != original:
            continue
        inputs.append(LabeledInput(x, original, index=len(inputs)))
        adversarial.append(adv)
    return SpeedupSuite(net, inputs, eps, adversarial)
