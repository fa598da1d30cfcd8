"""ReLU feed-forward networks: representation, file loading and concrete/interval evaluation.

A network with layers ``(W0, b0), ..., (WL, bL)`` computes
``x_{k+1} = relu(W_k x_k + b_k)`` for every layer but the last, which is affine only.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .interval import Interval


class NetworkFormatError(ValueError):
    """Weight or dataset file could not be parsed."""

    def __init__(self, message: str, path=None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)
        self.path = path
        self.line = line


class DimensionError(ValueError):
    """Shapes of layers, inputs or boxes do not line up."""


class _TieType:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "Tie"

    def __reduce__(self):
        return (_TieType, ())


#: Returned by :func:`predict_label` when the maximum output is attained more than once.
TIE = _TieType()


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Layer:
    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w = _frozen(self.weights)
        b = _frozen(self.bias)
        if w.ndim != 2:
            raise DimensionError(f"weight matrix must be 2-D, got shape {w.shape}")
        if b.shape != (w.shape[0],):
            raise DimensionError(
                f"bias length {b.size} does not match weight row count {w.shape[0]}"
            )
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def in_size(self) -> int:
        return self.weights.shape[1]

    @property
    def out_size(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True, eq=False)
class Network:
    """Immutable stack of dense layers; ReLU after every layer except the last."""

    layers: tuple[Layer, ...]

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise DimensionError("a network needs at least one layer")
        for k in range(1, len(layers)):
            if layers[k].in_size != layers[k - 1].out_size:
                raise DimensionError(
                    f"layer {k} expects {layers[k].in_size} inputs but layer {k - 1} "
                    f"produces {layers[k - 1].out_size}"
                )
        object.__setattr__(self, "layers", layers)

    @classmethod
    def from_arrays(cls, weights: Sequence, biases: Sequence) -> "Network":
        if len(weights) != len(biases):
            raise DimensionError("weights and biases must have the same number of layers")
        return cls(tuple(Layer(w, b) for w, b in zip(weights, biases)))

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_size

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_size

    @property
    def widths(self) -> list[int]:
        return [self.input_dim] + [layer.out_size for layer in self.layers]

    @property
    def hidden_layers(self) -> tuple[Layer, ...]:
        return self.layers[:-1]

    def __call__(self, x):
        return forward(self, x)


@dataclass(frozen=True, eq=False)
class LabeledInput:
    values: np.ndarray
    label: int
    index: int = field(default=0, compare=False)

    def __post_init__(self):
        v = _frozen(self.values)
        if v.ndim != 1:
            raise DimensionError("input values must be a vector")
        if np.any(v < 0.0) or np.any(v > 1.0):
            raise ValueError("input values must lie in [0, 1]")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "label", int(self.label))

    def check_against(self, net: Network) -> None:
        if self.values.size != net.input_dim:
            raise DimensionError(
                f"input has {self.values.size} values, network expects {net.input_dim}"
            )
        if not 0 <= self.label < net.output_dim:
            raise DimensionError(f"label {self.label} out of range for {net.output_dim} classes")


# --------------------------------------------------------------------------- loading


def _data_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield lineno, line


def _parse_reals(line: str, lineno: int, path) -> list[float]:
    try:
        return [float(tok) for tok in line.split()]
    except ValueError as exc:
        raise NetworkFormatError(f"cannot parse number ({exc})", path, lineno) from None


def parse_network(text: str, path=None) -> Network:
    lines = list(_data_lines(text))
    if not lines:
        raise NetworkFormatError("empty weight file", path, 1)

    lineno, header = lines[0]
    tokens = header.split()
    try:
        n_layers = int(tokens[0])
        widths = [int(t) for t in tokens[1:]]
    except ValueError:
        raise NetworkFormatError(f"malformed header {header!r}", path, lineno) from None
    if n_layers < 1:
        raise NetworkFormatError("layer count must be positive", path, lineno)
    if len(widths) != n_layers + 1:
        raise NetworkFormatError(
            f"header declares {n_layers} layers so needs {n_layers + 1} widths, got {len(widths)}",
            path,
            lineno,
        )
    if any(w <= 0 for w in widths):
        raise NetworkFormatError("layer widths must be positive", path, lineno)

    body = iter(lines[1:])
    layers = []
    for k in range(n_layers):
        d_in, d_out = widths[k], widths[k + 1]
        rows = []
        for r in range(d_out + 1):
            try:
                lineno, line = next(body)
            except StopIteration:
                raise DimensionError(
                    f"{path or 'weight file'}: layer {k} is incomplete: header declares "
                    f"{n_layers} layers but the body ends after {len(layers)} complete layer(s)"
                ) from None
            vals = _parse_reals(line, lineno, path)
            expected = d_in if r < d_out else d_out
            if len(vals) != expected:
                what = f"weight row {r}" if r < d_out else "bias"
                raise DimensionError(
                    f"{path or 'weight file'}:{lineno}: layer {k} {what} has {len(vals)} "
                    f"entries, expected {expected}"
                )
            rows.append(vals)
        layers.append(Layer(np.array(rows[:-1]), np.array(rows[-1])))

    leftover = next(body, None)
    if leftover is not None:
        raise DimensionError(
            f"{path or 'weight file'}:{leftover[0]}: trailing data after the "
            f"{n_layers} declared layers"
        )
    return Network(tuple(layers))


def load_network(path) -> Network:
    path = Path(path)
    return parse_network(path.read_text(), path)


def dump_network(net: Network) -> str:
    out = [" ".join(str(w) for w in [len(net.layers)] + net.widths)]
    for k, layer in enumerate(net.layers):
        out.append(f"# layer {k}")
        for row in layer.weights:
            out.append(" ".join(repr(float(v)) for v in row))
        out.append(" ".join(repr(float(v)) for v in layer.bias))
    return "\n".join(out) + "\n"


def save_network(net: Network, path) -> None:
    Path(path).write_text(dump_network(net))


def load_dataset(path, input_dim: int | None = None) -> list[LabeledInput]:
    """Read ``label, v1, ..., vd`` rows. Blank and ``#`` lines are skipped."""
    path = Path(path)
    inputs = []
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
                continue
            try:
                label = int(row[0])
                values = [float(v) for v in row[1:]]
            except ValueError as exc:
                raise NetworkFormatError(f"bad dataset row ({exc})", path, lineno) from None
            if input_dim is not None and len(values) != input_dim:
                raise DimensionError(
                    f"{path}:{lineno}: row has {len(values)} values, network expects {input_dim}"
                )
            try:
                inputs.append(LabeledInput(np.array(values), label, index=len(inputs)))
            except ValueError as exc:
                raise NetworkFormatError(str(exc), path, lineno) from None
    return inputs


def save_dataset(inputs: Sequence[LabeledInput], path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        for item in inputs:
            writer.writerow([item.label] + [repr(float(v)) for v in item.values])


# ------------------------------------------------------------------------ evaluation


def forward(net: Network, x) -> np.ndarray:
    """Concrete forward pass. Accepts one point ``(d,)`` or a batch ``(n, d)``."""
    h = np.asarray(x, dtype=float)
    if h.shape[-1:] != (net.input_dim,):
        raise DimensionError(f"input has shape {h.shape}, network expects {net.input_dim} values")
    last = len(net.layers) - 1
    for k, layer in enumerate(net.layers):
        h = h @ layer.weights.T + layer.bias
        if k < last:
            h = np.maximum(h, 0.0)
    return h


def predict_label(out) -> int | _TieType:
    out = np.asarray(out, dtype=float)
    if out.size == 0:
        raise ValueError("empty output vector")
    best = out.max()
    winners = np.flatnonzero(out == best)
    if winners.size > 1:
        return TIE
    return int(winners[0])


def naive_bounds(net: Network, lo, hi) -> tuple[np.ndarray, np.ndarray]:
    """Array form of :func:`naive_interval_forward`."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if lo.shape != (net.input_dim,) or hi.shape != (net.input_dim,):
        raise DimensionError(f"box must have {net.input_dim} dimensions")
    last = len(net.layers) - 1
    for k, layer in enumerate(net.layers):
        lo, hi = affine_interval(layer, lo, hi)
        if k < last:
            lo, hi = np.maximum(lo, 0.0), np.maximum(hi, 0.0)
    return lo, hi


def affine_interval(layer: Layer, lo: np.ndarray, hi: np.ndarray):
    wp = np.maximum(layer.weights, 0.0)
    wn = np.minimum(layer.weights, 0.0)
    return wp @ lo + wn @ hi + layer.bias, wp @ hi + wn @ lo + layer.bias


def naive_interval_forward(net: Network, box: Sequence[Interval]) -> list[Interval]:
    if len(box) != net.input_dim:
        raise DimensionError(f"box has {len(box)} dimensions, network expects {net.input_dim}")
    lo, hi = naive_bounds(net, [b.lo for b in box], [b.hi for b in box])
    return [Interval(a, b) for a, b in zip(lo, hi)]


def input_box(x: LabeledInput | np.ndarray, eps: float, clip: bool = True) -> list[Interval]:
    """L-infinity ball of radius ``eps`` around ``x``, clipped to ``[0, 1]`` unless ``clip=False``."""
    if eps < 0:
        raise ValueError(f"eps must be non-negative, got {eps}")
    values = x.values if isinstance(x, LabeledInput) else np.asarray(x, dtype=float)
    lo, hi = values - eps, values + eps
    if clip:
        lo, hi = np.maximum(lo, 0.0), np.minimum(hi, 1.0)
    return [Interval(a, b) for a, b in zip(lo, hi)]


def box_arrays(box: Sequence[Interval]) -> tuple[np.ndarray, np.ndarray]:
    return np.array([b.lo for b in box], dtype=float), np.array([b.hi for b in box], dtype=float)
