"""Fully connected feedforward networks: data model, realization, counts, file format.

A network is an ordered tuple of ``(W_k, B_k)`` pairs.  Hidden layers apply an
activation componentwise; the output layer is affine and always has width 1.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

FORMAT_TAG = "ANNv1"

# upper bound on (rows x width) entries materialised at once during realization
_CHUNK_ENTRIES = 1 << 22


class ShapeError(ValueError):
    """Raised when a weight, bias or input does not fit the layer chain."""


class NetworkFormatError(ValueError):
    """Raised when a network file cannot be parsed."""


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def identity(x: np.ndarray) -> np.ndarray:
    return x


@dataclass(frozen=True, eq=False)
class Network:
    """Immutable layered network ``((W_1, B_1), ..., (W_L, B_L))``.

    ``W_k`` has shape ``(l_k, l_{k-1})`` and ``B_k`` has shape ``(l_k,)``.  At
    least one hidden layer is required and the output width must be 1.
    """

    layers: tuple[tuple[np.ndarray, np.ndarray], ...]

    def __post_init__(self) -> None:
        layers = tuple(self.layers)
        if len(layers) < 2:
            raise ShapeError(f"network needs at least 2 layers, got {len(layers)}")
        frozen = []
        prev = None
        for k, (w, b) in enumerate(layers, start=1):
            w = np.array(w, dtype=np.float64, copy=True)
            b = np.array(b, dtype=np.float64, copy=True).reshape(-1)
            if w.ndim != 2:
                raise ShapeError(f"layer {k}: weights must be a matrix, got ndim={w.ndim}")
            if w.shape[0] == 0 or w.shape[1] == 0:
                raise ShapeError(f"layer {k}: empty weight matrix {w.shape}")
            if prev is not None and w.shape[1] != prev:
                raise ShapeError(
                    f"layer {k}: weights have {w.shape[1]} columns, previous layer width is {prev}"
                )
            if b.shape[0] != w.shape[0]:
                raise ShapeError(
                    f"layer {k}: bias length {b.shape[0]} != weight rows {w.shape[0]}"
                )
            w.setflags(write=False)
            b.setflags(write=False)
            frozen.append((w, b))
            prev = w.shape[0]
        if prev != 1:
            raise ShapeError(f"output width must be 1, got {prev}")
        object.__setattr__(self, "layers", tuple(frozen))

    @property
    def input_dim(self) -> int:
        return self.layers[0][0].shape[1]

    @property
    def widths(self) -> tuple[int, ...]:
        """Layer widths ``(l_0, l_1, ..., l_L)``."""
        return (self.input_dim,) + tuple(w.shape[0] for w, _ in self.layers)

    @property
    def depth(self) -> int:
        return len(self.layers)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Network) or self.widths != other.widths:
            return NotImplemented if not isinstance(other, Network) else False
        return all(
            np.array_equal(w1, w2) and np.array_equal(b1, b2)
            for (w1, b1), (w2, b2) in zip(self.layers, other.layers)
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"Network(widths={self.widths})"


def from_layers(layers: Iterable[tuple[Sequence, Sequence]]) -> Network:
    return Network(tuple((np.asarray(w, float), np.asarray(b, float)) for w, b in layers))


def realize(
    net: Network,
    x,
    activation: Callable[[np.ndarray], np.ndarray] = relu,
):
    """Evaluate the realization of ``net``.

    ``x`` is either one input vector of length ``input_dim`` (returns a float)
    or a batch of shape ``(m, input_dim)`` (returns an array of shape ``(m,)``).
    The activation is applied on hidden layers only.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    batch = x[None, :] if single else x
    if batch.ndim != 2 or batch.shape[1] != net.input_dim:
        raise ShapeError(
            f"layer 1: input has dimension {batch.shape[-1] if batch.ndim else 0}, "
            f"expected {net.input_dim}"
        )
    widest = max(net.widths)
    rows = max(1, _CHUNK_ENTRIES // widest)
    out = np.empty(batch.shape[0])
    last = len(net.layers) - 1
    for start in range(0, batch.shape[0], rows):
        h = batch[start : start + rows]
        for k, (w, b) in enumerate(net.layers):
            h = h @ w.T + b
            if k < last:
                h = activation(h)
        out[start : start + rows] = h[:, 0]
    return float(out[0]) if single else out


def param_count(net: Network) -> int:
    """Total number of weights and biases, zeros included."""
    widths = net.widths
    return sum(widths[k] * (widths[k - 1] + 1) for k in range(1, len(widths)))


def nonzero_param_count(net: Network) -> int:
    """Number of strictly nonzero weight and bias entries."""
    return sum(int(np.count_nonzero(w)) + int(np.count_nonzero(b)) for w, b in net.layers)


# ---------------------------------------------------------------------------
# text format
# ---------------------------------------------------------------------------


def dumps_network(net: Network) -> str:
    lines = [FORMAT_TAG, " ".join(str(l) for l in net.widths)]
    for w, b in net.layers:
        for row in w:
            lines.append(" ".join(repr(float(v)) for v in row))
        lines.append(" ".join(repr(float(v)) for v in b))
    return "\n".join(lines) + "\n"


def loads_network(text: str) -> Network:
    lines = text.splitlines()
    if not lines or lines[0].strip() != FORMAT_TAG:
        raise NetworkFormatError(f"line 1: expected header {FORMAT_TAG!r}")
    if len(lines) < 2:
        raise NetworkFormatError("line 2: missing layer widths")
    try:
        widths = [int(tok) for tok in lines[1].split()]
    except ValueError as exc:
        raise NetworkFormatError(f"line 2: non-integer layer width ({exc})") from None
    if len(widths) < 3:
        raise NetworkFormatError(f"line 2: need at least 3 widths (2 layers), got {len(widths)}")
    if any(l <= 0 for l in widths):
        raise NetworkFormatError("line 2: layer widths must be positive")
    if widths[-1] != 1:
        raise NetworkFormatError(f"line 2: output width must be 1, got {widths[-1]}")

    expected_lines = 2 + sum(l + 1 for l in widths[1:])
    body = [ln for ln in lines[2:]]
    while body and not body[-1].strip():
        body.pop()
    if len(body) + 2 != expected_lines:
        n_tokens = sum(widths[k] * (widths[k - 1] + 1) for k in range(1, len(widths)))
        raise NetworkFormatError(
            f"expected {expected_lines} lines holding {n_tokens} numeric tokens, "
            f"found {len(body) + 2} lines"
        )

    def row(lineno: int, count: int) -> list[float]:
        toks = lines[lineno - 1].split()
        if len(toks) != count:
            raise NetworkFormatError(f"line {lineno}: expected {count} tokens, got {len(toks)}")
        vals = []
        for col, tok in enumerate(toks, start=1):
            try:
                vals.append(float(tok))
            except ValueError:
                raise NetworkFormatError(
                    f"line {lineno}, token {col}: non-numeric value {tok!r}"
                ) from None
        return vals

    layers = []
    lineno = 3
    for k in range(1, len(widths)):
        w = [row(lineno + i, widths[k - 1]) for i in range(widths[k])]
        lineno += widths[k]
        b = row(lineno, widths[k])
        lineno += 1
        layers.append((np.array(w), np.array(b)))
    try:
        return Network(tuple(layers))
    except ShapeError as exc:
        raise NetworkFormatError(str(exc)) from None


def save_network(net: Network, sink) -> None:
    """Write ``net`` to a path, a text stream or a binary stream."""
    text = dumps_network(net)
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "w", encoding="ascii") as fh:
            fh.write(text)
    elif isinstance(sink, io.TextIOBase):
        sink.write(text)
    else:
        sink.write(text.encode("ascii"))


def load_network(source) -> Network:
    """Read a network from a path, a text stream or a binary stream."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="ascii") as fh:
            text = fh.read()
    else:
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode("ascii")
    return loads_network(text)
