"""Symbolic interval propagation with linear ReLU relaxation.

Every neuron carries a pair of affine expressions over the network inputs that bound
its value from below and above on the input box.  Unstable ReLUs (pre-activation
range strictly straddling zero) are replaced by the planes

    upper:  a_up * (z - l),   a_up = u / (u - l)
    lower:  a_lo * z,         a_lo in [0, 1]

Internally a layer's expressions are stored as coefficient matrices so a whole layer
is pushed through one matrix product; :class:`LinExpr` and friends are per-neuron
views for callers that want them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .interval import Interval
from .network import DimensionError, Layer, Network, box_arrays

RELAXATIONS = ("parallel", "area")

# (layer index, neuron index) -> True for active (identity), False for inactive (zero)
Phases = Mapping[tuple[int, int], bool]


@dataclass(frozen=True, eq=False)
class LinExpr:
    coeffs: np.ndarray
    constant: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=float))
        object.__setattr__(self, "constant", float(self.constant))

    @classmethod
    def variable(cls, index: int, dim: int) -> "LinExpr":
        coeffs = np.zeros(dim)
        coeffs[index] = 1.0
        return cls(coeffs, 0.0)

    @classmethod
    def const(cls, value: float, dim: int) -> "LinExpr":
        return cls(np.zeros(dim), value)

    def __add__(self, other: "LinExpr") -> "LinExpr":
        return LinExpr(self.coeffs + other.coeffs, self.constant + other.constant)

    def __sub__(self, other: "LinExpr") -> "LinExpr":
        return LinExpr(self.coeffs - other.coeffs, self.constant - other.constant)

    def __rmul__(self, c: float) -> "LinExpr":
        return LinExpr(c * self.coeffs, c * self.constant)

    def __neg__(self) -> "LinExpr":
        return LinExpr(-self.coeffs, -self.constant)

    def same_as(self, other: "LinExpr", tol: float = 0.0) -> bool:
        return (
            np.allclose(self.coeffs, other.coeffs, rtol=0, atol=tol)
            and abs(self.constant - other.constant) <= tol
        )

    def __repr__(self):
        terms = [f"{c:+g}*x{i}" for i, c in enumerate(self.coeffs) if c != 0]
        return "LinExpr(" + " ".join(terms + [f"{self.constant:+g}"]) + ")"


@dataclass(frozen=True, eq=False)
class SymbolicInterval:
    lower: LinExpr
    upper: LinExpr


@dataclass(frozen=True, eq=False)
class BoundedNeuron:
    sym: SymbolicInterval
    concrete: Interval

    @property
    def l(self) -> float:
        return self.concrete.lo

    @property
    def u(self) -> float:
        return self.concrete.hi


def evaluate(e: LinExpr, p) -> float:
    p = np.asarray(p, dtype=float)
    if p.shape[-1:] != e.coeffs.shape:
        raise DimensionError(f"point has {p.shape[-1]} values, expression has {e.coeffs.size}")
    return e.constant + p @ e.coeffs


def concretize(e: LinExpr, box: Sequence[Interval]) -> Interval:
    """Exact range of ``e`` over the box."""
    if len(box) != e.coeffs.size:
        raise DimensionError(f"box has {len(box)} dimensions, expression has {e.coeffs.size}")
    lo, hi = box_arrays(box)
    pos = np.maximum(e.coeffs, 0.0)
    neg = np.minimum(e.coeffs, 0.0)
    return Interval(e.constant + pos @ lo + neg @ hi, e.constant + pos @ hi + neg @ lo)


# ----------------------------------------------------------------- layer-wise arrays


@dataclass(frozen=True, eq=False)
class SymbolicBounds:
    """Lower/upper affine expressions for a vector of neurons, as matrices (neurons x inputs)."""

    lower_coeffs: np.ndarray
    lower_const: np.ndarray
    upper_coeffs: np.ndarray
    upper_const: np.ndarray

    @classmethod
    def identity(cls, dim: int) -> "SymbolicBounds":
        eye = np.eye(dim)
        zero = np.zeros(dim)
        return cls(eye, zero, eye, zero)

    @classmethod
    def from_intervals(cls, syms: Sequence[SymbolicInterval]) -> "SymbolicBounds":
        return cls(
            np.array([s.lower.coeffs for s in syms]),
            np.array([s.lower.constant for s in syms]),
            np.array([s.upper.coeffs for s in syms]),
            np.array([s.upper.constant for s in syms]),
        )

    def __len__(self):
        return self.lower_const.size

    def interval(self, i: int) -> SymbolicInterval:
        return SymbolicInterval(
            LinExpr(self.lower_coeffs[i].copy(), self.lower_const[i]),
            LinExpr(self.upper_coeffs[i].copy(), self.upper_const[i]),
        )

    def intervals(self) -> list[SymbolicInterval]:
        return [self.interval(i) for i in range(len(self))]

    def concretize(self, lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Concrete lower bound of the lower expressions and upper bound of the upper ones."""
        lc, uc = self.lower_coeffs, self.upper_coeffs
        low = np.maximum(lc, 0.0) @ lo + np.minimum(lc, 0.0) @ hi + self.lower_const
        high = np.maximum(uc, 0.0) @ hi + np.minimum(uc, 0.0) @ lo + self.upper_const
        return low, high

    def affine(self, layer: Layer) -> "SymbolicBounds":
        wp = np.maximum(layer.weights, 0.0)
        wn = np.minimum(layer.weights, 0.0)
        return SymbolicBounds(
            wp @ self.lower_coeffs + wn @ self.upper_coeffs,
            wp @ self.lower_const + wn @ self.upper_const + layer.bias,
            wp @ self.upper_coeffs + wn @ self.lower_coeffs,
            wp @ self.upper_const + wn @ self.lower_const + layer.bias,
        )


def relaxation_slopes(l, u, mode: str = "parallel"):
    """Upper and lower slopes for unstable neurons (requires ``l < 0 < u`` elementwise)."""
    l = np.asarray(l, dtype=float)
    u = np.asarray(u, dtype=float)
    a_up = u / (u - l)
    if mode == "parallel":
        a_lo = a_up
    elif mode == "area":
        a_lo = np.where(u >= -l, 1.0, 0.0)
    else:
        raise ValueError(f"unknown relaxation {mode!r}; expected one of {RELAXATIONS}")
    return a_up, a_lo


# neuron status codes
INACTIVE, ACTIVE, UNSTABLE = 0, 1, 2


def classify(l: np.ndarray, u: np.ndarray, fixed: dict[int, bool] | None = None) -> np.ndarray:
    """Stable-zero when ``u <= 0``, identity when ``l >= 0``, otherwise unstable.

    Fixed phases override the bound-based classification.
    """
    status = np.where(u <= 0.0, INACTIVE, np.where(l >= 0.0, ACTIVE, UNSTABLE))
    for i, active in (fixed or {}).items():
        status[i] = ACTIVE if active else INACTIVE
    return status


def relax_arrays(
    pre: SymbolicBounds, status: np.ndarray, l: np.ndarray, u: np.ndarray, mode: str = "parallel"
) -> SymbolicBounds:
    lower_scale = np.where(status == ACTIVE, 1.0, 0.0)
    upper_scale = lower_scale.copy()
    upper_shift = np.zeros_like(l)
    unstable = status == UNSTABLE
    if unstable.any():
        a_up, a_lo = relaxation_slopes(l[unstable], u[unstable], mode)
        upper_scale[unstable] = a_up
        lower_scale[unstable] = a_lo
        upper_shift[unstable] = -a_up * l[unstable]
    return SymbolicBounds(
        lower_scale[:, None] * pre.lower_coeffs,
        lower_scale * pre.lower_const,
        upper_scale[:, None] * pre.upper_coeffs,
        upper_scale * pre.upper_const + upper_shift,
    )


# -------------------------------------------------------------- per-neuron operations


def affine_step(prev: Sequence[SymbolicInterval], layer: Layer) -> list[SymbolicInterval]:
    if len(prev) != layer.in_size:
        raise DimensionError(f"layer expects {layer.in_size} inputs, got {len(prev)}")
    return SymbolicBounds.from_intervals(prev).affine(layer).intervals()


def relu_relax(n: BoundedNeuron, mode: str = "parallel") -> BoundedNeuron:
    """Apply the three-case ReLU rule to one neuron whose concrete bounds are current."""
    l, u = n.concrete.lo, n.concrete.hi
    status = classify(np.array([l]), np.array([u]))
    out = relax_arrays(
        SymbolicBounds.from_intervals([n.sym]), status, np.array([l]), np.array([u]), mode
    ).interval(0)
    return BoundedNeuron(out, Interval(max(0.0, l), max(0.0, u)))


# ---------------------------------------------------------------------- propagation


@dataclass(frozen=True, eq=False)
class LayerBounds:
    """Bounds for one network layer: pre-activation expressions/ranges and, for hidden layers,
    the post-ReLU expressions/ranges."""

    pre: SymbolicBounds
    pre_lo: np.ndarray
    pre_hi: np.ndarray
    status: np.ndarray | None = None
    post: SymbolicBounds | None = None
    post_lo: np.ndarray | None = None
    post_hi: np.ndarray | None = None

    def neurons(self, which: str = "pre") -> list[BoundedNeuron]:
        sym = self.pre if which == "pre" else self.post
        lo, hi = (self.pre_lo, self.pre_hi) if which == "pre" else (self.post_lo, self.post_hi)
        return [BoundedNeuron(sym.interval(i), Interval(lo[i], hi[i])) for i in range(len(sym))]


@dataclass(frozen=True, eq=False)
class PropagationResult:
    box_lo: np.ndarray
    box_hi: np.ndarray
    layers: list[LayerBounds]
    relaxation: str = "parallel"
    phases: dict = field(default_factory=dict)
    # a fixed phase contradicts the propagated bounds, so no input realises it
    infeasible: bool = False

    @property
    def output_layer(self) -> LayerBounds:
        return self.layers[-1]

    @property
    def output(self) -> list[BoundedNeuron]:
        return self.output_layer.neurons("pre")

    @property
    def output_lo(self) -> np.ndarray:
        return self.output_layer.pre_lo

    @property
    def output_hi(self) -> np.ndarray:
        return self.output_layer.pre_hi

    def output_intervals(self) -> list[Interval]:
        return [Interval(a, b) for a, b in zip(self.output_lo, self.output_hi)]

    def unstable(self) -> list[tuple[int, int]]:
        """Hidden neurons whose phase is neither fixed nor implied by their bounds."""
        return [
            (k, int(i))
            for k, lb in enumerate(self.layers[:-1])
            for i in np.flatnonzero(lb.status == UNSTABLE)
        ]

    def difference_upper_bound(self, target: int, original: int) -> float:
        """Upper bound of ``out[target] - out[original]`` from ``upper_t - lower_o`` over the box."""
        out = self.output_layer.pre
        coeffs = out.upper_coeffs[target] - out.lower_coeffs[original]
        const = out.upper_const[target] - out.lower_const[original]
        return float(
            const + np.maximum(coeffs, 0.0) @ self.box_hi + np.minimum(coeffs, 0.0) @ self.box_lo
        )


def _meet(lo_a, hi_a, lo_b, hi_b):
    lo = np.maximum(lo_a, lo_b)
    hi = np.minimum(hi_a, hi_b)
    # both ranges are sound; any crossing is rounding noise
    return lo, np.maximum(hi, lo)


def propagate(
    net: Network,
    box: Sequence[Interval] | tuple[np.ndarray, np.ndarray],
    relaxation: str = "parallel",
    phases: Phases | None = None,
) -> PropagationResult:
    """Push symbolic intervals through ``net`` over ``box``.

    ``box`` is a sequence of :class:`Interval` or a ``(lo, hi)`` pair of arrays.
    Concrete ranges are the intersection of the symbolic concretization and interval
    arithmetic on the previous layer's ranges, so they are never looser than
    :func:`~labelguard.network.naive_interval_forward`.
    """
    if relaxation not in RELAXATIONS:
        raise ValueError(f"unknown relaxation {relaxation!r}; expected one of {RELAXATIONS}")
    if isinstance(box, tuple) and len(box) == 2 and isinstance(box[0], np.ndarray):
        lo, hi = (np.asarray(b, dtype=float) for b in box)
    else:
        if len(box) != net.input_dim:
            raise DimensionError(f"box has {len(box)} dimensions, network expects {net.input_dim}")
        lo, hi = box_arrays(box)
    if lo.shape != (net.input_dim,) or hi.shape != (net.input_dim,):
        raise DimensionError(f"box must have {net.input_dim} dimensions")

    phases = dict(phases or {})
    per_layer: dict[int, dict[int, bool]] = {}
    for (k, i), active in phases.items():
        per_layer.setdefault(k, {})[i] = bool(active)

    sym = SymbolicBounds.identity(net.input_dim)
    prev_lo, prev_hi = lo, hi
    layers = []
    infeasible = False
    last = len(net.layers) - 1
    for k, layer in enumerate(net.layers):
        pre = sym.affine(layer)
        s_lo, s_hi = pre.concretize(lo, hi)
        wp = np.maximum(layer.weights, 0.0)
        wn = np.minimum(layer.weights, 0.0)
        n_lo = wp @ prev_lo + wn @ prev_hi + layer.bias
        n_hi = wp @ prev_hi + wn @ prev_lo + layer.bias
        pre_lo, pre_hi = _meet(s_lo, s_hi, n_lo, n_hi)
        if k == last:
            layers.append(LayerBounds(pre, pre_lo, pre_hi))
            break

        fixed = per_layer.get(k, {})
        for i, active in fixed.items():
            if (active and pre_hi[i] < 0.0) or (not active and pre_lo[i] > 0.0):
                infeasible = True
        status = classify(pre_lo, pre_hi, fixed)
        sym = relax_arrays(pre, status, pre_lo, pre_hi, relaxation)
        post_lo = np.where(status == INACTIVE, 0.0, np.maximum(pre_lo, 0.0))
        post_hi = np.where(status == INACTIVE, 0.0, np.maximum(pre_hi, 0.0))
        layers.append(LayerBounds(pre, pre_lo, pre_hi, status, sym, post_lo, post_hi))
        prev_lo, prev_hi = post_lo, post_hi

    return PropagationResult(lo, hi, layers, relaxation, phases, infeasible)
