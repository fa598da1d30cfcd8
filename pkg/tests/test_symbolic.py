import numpy as np
import pytest

from labelguard.interval import Interval
from labelguard.network import DimensionError, Layer, Network, forward, input_box, naive_interval_forward
from labelguard.symbolic import (
    BoundedNeuron,
    LinExpr,
    SymbolicInterval,
    affine_step,
    concretize,
    evaluate,
    propagate,
    relaxation_slopes,
    relu_relax,
)

from conftest import sample_box
from oracles import batch_forward, grid

EPS_VALUES = (0.0, 0.01, 0.05, 0.1, 0.25)
BOX = [Interval(1, 3), Interval(2, 4)]


def lin(coeffs, const=0.0):
    return LinExpr(np.array(coeffs, dtype=float), const)


def identity_inputs(d):
    return [SymbolicInterval(LinExpr.variable(i, d), LinExpr.variable(i, d)) for i in range(d)]


def test_evaluate():
    assert evaluate(lin([2, 1]), [3, 4]) == 10
    assert evaluate(lin([0, 0], 5), [0.3, -2]) == 5
    assert evaluate(lin([-1, 1]), [1, 2]) == 1
    with pytest.raises(DimensionError):
        evaluate(lin([1, 1]), [1, 2, 3])


def test_concretize():
    assert concretize(lin([-1, 1]), BOX) == Interval(-1, 3)
    assert concretize(lin([0, 0], 2.5), BOX) == Interval(2.5, 2.5)


def test_concretize_matches_grid_search(rng):
    pts = grid([1, 2], [3, 4], 41)
    e = lin([2, 1])
    vals = pts @ e.coeffs
    assert (vals.min(), vals.max()) == (4.0, 10.0)
    assert concretize(e, BOX) == Interval(4, 10)
    for _ in range(20):
        e = lin(rng.normal(size=2), rng.normal())
        vals = grid([1, 2], [3, 4], 3) @ e.coeffs + e.constant  # vertices are in the 3-level grid
        iv = concretize(e, BOX)
        assert iv.lo == pytest.approx(vals.min(), abs=1e-12)
        assert iv.hi == pytest.approx(vals.max(), abs=1e-12)


def test_affine_step_example(example_net):
    hidden = affine_step(identity_inputs(2), example_net.layers[0])
    assert hidden[0].lower.same_as(lin([2, 1])) and hidden[0].upper.same_as(lin([2, 1]))
    assert hidden[1].lower.same_as(lin([1, 2])) and hidden[1].upper.same_as(lin([1, 2]))
    out = affine_step(hidden, example_net.layers[1])
    assert out[0].lower.same_as(lin([-1, 1])) and out[0].upper.same_as(lin([-1, 1]))


def test_affine_step_negative_weight_swaps_sides():
    prev = [SymbolicInterval(lin([1, 0], -1), lin([1, 0], 1))]
    out = affine_step(prev, Layer([[-2.0]], [0.5]))
    assert out[0].lower.same_as(lin([-2, 0], -1.5))
    assert out[0].upper.same_as(lin([-2, 0], 2.5))


def test_affine_step_zero_layer():
    out = affine_step(identity_inputs(2), Layer(np.zeros((2, 2)), [3.0, -1.0]))
    assert out[0].lower.same_as(lin([0, 0], 3)) and out[1].upper.same_as(lin([0, 0], -1))


def test_relu_relax_cases():
    x = lin([1.0])
    pos = relu_relax(BoundedNeuron(SymbolicInterval(x, x), Interval(1, 3)))
    assert pos.sym.lower.same_as(x) and pos.sym.upper.same_as(x)
    neg = relu_relax(BoundedNeuron(SymbolicInterval(x, x), Interval(-3, -1)))
    assert neg.sym.lower.same_as(lin([0.0])) and neg.sym.upper.same_as(lin([0.0]))
    assert neg.concrete == Interval(0, 0)


def test_relu_relax_unstable_example():
    x = lin([1.0])
    out = relu_relax(BoundedNeuron(SymbolicInterval(x, x), Interval(-1, 3)))
    assert out.sym.upper.same_as(lin([0.75], 0.75), tol=1e-15)
    assert out.sym.lower.same_as(lin([0.75]), tol=1e-15)
    xs = np.linspace(-1, 3, 10_001)
    relu = np.maximum(0, xs)
    assert np.all(evaluate(out.sym.lower, xs[:, None]) <= relu + 1e-12)
    assert np.all(relu <= evaluate(out.sym.upper, xs[:, None]) + 1e-12)


def test_relu_relax_borders():
    x = lin([1.0])
    # l == 0 is stable-positive, u == 0 is stable-zero
    at_zero = relu_relax(BoundedNeuron(SymbolicInterval(x, x), Interval(0, 2)))
    assert at_zero.sym.upper.same_as(x)
    to_zero = relu_relax(BoundedNeuron(SymbolicInterval(x, x), Interval(-2, 0)))
    assert to_zero.sym.upper.same_as(lin([0.0]))
    flat = relu_relax(BoundedNeuron(SymbolicInterval(x, x), Interval(0, 0)))
    assert flat.concrete == Interval(0, 0)


@pytest.mark.parametrize("mode", ["parallel", "area"])
def test_relaxation_planes_valid(rng, mode):
    for _ in range(50):
        l = -rng.uniform(0.01, 5)
        u = rng.uniform(0.01, 5)
        a_up, a_lo = relaxation_slopes(l, u, mode)
        assert u / (u - l) <= a_up <= 1 and 0 <= a_lo <= 1
        xs = np.linspace(l, u, 10_001)
        relu = np.maximum(0, xs)
        assert np.all(a_lo * xs <= relu + 1e-12)
        assert np.all(relu <= a_up * (xs - l) + 1e-12)


def test_area_relaxation_picks_larger_side():
    assert relaxation_slopes(-1.0, 3.0, "area")[1] == 1.0
    assert relaxation_slopes(-3.0, 1.0, "area")[1] == 0.0


def test_propagate_example(example_net):
    res = propagate(example_net, BOX)
    assert res.output_intervals() == [Interval(-1, 3)]
    out = res.output[0]
    assert out.sym.lower.same_as(lin([-1, 1])) and out.sym.upper.same_as(lin([-1, 1]))
    assert res.unstable() == []


def test_propagate_single_unstable_neuron():
    net = Network.from_arrays([[[1.0]], [[1.0]]], [[0.0], [0.0]])
    res = propagate(net, [Interval(-1, 1)])
    bound = res.output_intervals()[0]
    xs = np.linspace(-1, 1, 10_000)[:, None]
    true = batch_forward(net, xs)[:, 0]
    assert true.min() == 0.0 and true.max() == 1.0
    assert bound.lo <= true.min() and true.max() <= bound.hi
    assert bound == Interval(0.0, 1.0)  # the [-0.5, 1] relaxation is met with relu's [0, 1]
    sym = res.output[0].sym
    assert sym.lower.same_as(lin([0.5])) and sym.upper.same_as(lin([0.5], 0.5))


def test_width_zero_box_is_forward(fixture_nets, rng):
    for net in fixture_nets:
        x = rng.uniform(0, 1, net.input_dim)
        res = propagate(net, input_box(x, 0.0))
        ref = forward(net, x)
        np.testing.assert_allclose(res.output_lo, ref, rtol=1e-9, atol=1e-12)
        np.testing.assert_allclose(res.output_hi, ref, rtol=1e-9, atol=1e-12)


def test_dimension_mismatch(example_net):
    with pytest.raises(DimensionError):
        propagate(example_net, [Interval(0, 1)])
    with pytest.raises(ValueError):
        propagate(example_net, BOX, relaxation="bogus")


@pytest.mark.parametrize("mode", ["parallel", "area"])
def test_soundness_sampled(fixture_nets, rng, mode):
    for net in fixture_nets:
        for eps in EPS_VALUES:
            x = rng.uniform(0, 1, net.input_dim)
            res = propagate(net, input_box(x, eps), mode)
            pts = sample_box(rng, res.box_lo, res.box_hi, 2000)
            vals = batch_forward(net, pts)
            out = res.output_layer.pre
            lower = pts @ out.lower_coeffs.T + out.lower_const
            upper = pts @ out.upper_coeffs.T + out.upper_const
            tol = 1e-9 * (1 + np.abs(vals))
            assert np.all(lower <= vals + tol)
            assert np.all(vals <= upper + tol)
            assert np.all(vals >= res.output_lo - tol) and np.all(vals <= res.output_hi + tol)


def test_symbolic_interval_ordered_on_box(fixture_nets, rng):
    for net in fixture_nets:
        x = rng.uniform(0, 1, net.input_dim)
        res = propagate(net, input_box(x, 0.1))
        pts = sample_box(rng, res.box_lo, res.box_hi, 500)
        for lb in res.layers:
            for sym in filter(None, (lb.pre, lb.post)):
                lower = pts @ sym.lower_coeffs.T + sym.lower_const
                upper = pts @ sym.upper_coeffs.T + sym.upper_const
                assert np.all(lower <= upper + 1e-9)


def test_never_looser_than_naive(fixture_nets, rng):
    for net in fixture_nets:
        for eps in EPS_VALUES:
            box = input_box(rng.uniform(0, 1, net.input_dim), eps)
            res = propagate(net, box)
            for got, naive in zip(res.output_intervals(), naive_interval_forward(net, box)):
                assert got.issubset(naive, tol=1e-9 * (1 + abs(naive.lo) + abs(naive.hi)))


def test_stable_networks_are_exact(rng):
    # positive weights/biases on a non-negative box keep every neuron active
    for _ in range(5):
        ws = [rng.uniform(0, 1, (4, 3)), rng.uniform(0, 1, (4, 4)), rng.normal(size=(2, 4))]
        bs = [rng.uniform(0, 1, 4), rng.uniform(0, 1, 4), rng.normal(size=2)]
        net = Network.from_arrays(ws, bs)
        res = propagate(net, input_box(rng.uniform(0, 1, 3), 0.2))
        assert res.unstable() == []
        out = res.output_layer.pre
        np.testing.assert_array_equal(out.lower_coeffs, out.upper_coeffs)
        np.testing.assert_array_equal(out.lower_const, out.upper_const)


def test_fixed_phases_sound_on_their_region(tiny_nets, rng):
    for net in tiny_nets:
        x = rng.uniform(0.2, 0.8, net.input_dim)
        root = propagate(net, input_box(x, 0.2))
        if not root.unstable():
            continue
        k, i = root.unstable()[0]
        pts = sample_box(rng, root.box_lo, root.box_hi, 5000)
        h = pts
        for layer in net.layers[:k]:
            h = np.maximum(h @ layer.weights.T + layer.bias, 0)
        z = (h @ net.layers[k].weights.T + net.layers[k].bias)[:, i]
        vals = batch_forward(net, pts)
        for active, region in ((True, z >= 0), (False, z <= 0)):
            res = propagate(net, (root.box_lo, root.box_hi), phases={(k, i): active})
            assert not res.infeasible
            inside = vals[region]
            assert np.all(inside >= res.output_lo - 1e-9)
            assert np.all(inside <= res.output_hi + 1e-9)
