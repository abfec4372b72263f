"""Minimal feed-forward ReLU regression network with exact backprop.

Default architecture 6-6-4-1-1: three ReLU hidden layers and an identity
output. Networks are immutable once built; training returns a new network.
The JSON file format stores every float with 17 significant digits, which
round-trips 64-bit values exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .closedloop import NormSpec

DEFAULT_WIDTHS = (6, 6, 4, 1, 1)


class NetworkFormatError(ValueError):
    pass


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int):
        self.epoch = epoch
        super().__init__(f"training loss diverged at epoch {epoch}")


@dataclass(frozen=True)
class Layer:
    w: np.ndarray          # (out, in)
    b: np.ndarray          # (out,)
    act: str               # "relu" | "id"

    def __post_init__(self):
        object.__setattr__(self, "w", np.asarray(self.w, dtype=float))
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float))
        if self.w.ndim != 2 or self.b.ndim != 1 or self.w.shape[0] != self.b.shape[0]:
            raise NetworkFormatError("layer shape mismatch")
        if self.act not in ("relu", "id"):
            raise NetworkFormatError(f"unknown activation {self.act!r}")
        if not (np.isfinite(self.w).all() and np.isfinite(self.b).all()):
            raise NetworkFormatError("non-finite layer parameters")


@dataclass(frozen=True)
class Network:
    layers: tuple
    norm: NormSpec | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        for a, b in zip(self.layers, self.layers[1:]):
            if b.w.shape[1] != a.w.shape[0]:
                raise NetworkFormatError("adjacent layer widths disagree")

    @property
    def widths(self) -> tuple:
        return (self.layers[0].w.shape[1],) + tuple(l.w.shape[0] for l in self.layers)

    @property
    def n_in(self) -> int:
        return self.layers[0].w.shape[1]

    @property
    def n_out(self) -> int:
        return self.layers[-1].w.shape[0]

    @property
    def n_relu(self) -> int:
        return sum(l.w.shape[0] for l in self.layers if l.act == "relu")


def init_network(widths=DEFAULT_WIDTHS, seed: int = 0, norm: NormSpec | None = None) -> Network:
    """Seeded uniform +-sqrt(6/(fan_in+fan_out)) weights; ReLU everywhere but
    the identity output layer.

    Hidden biases start at +0.01, and a single-neuron ReLU layer draws
    nonnegative incoming weights: its inputs are ReLU outputs, so the
    preactivation starts positive. With zero-mean weights such a bottleneck
    is born dead (zero gradient, permanently constant network) for roughly
    half of all seeds.
    """
    rng = np.random.default_rng(seed)
    layers = []
    for i, (n_in, n_out) in enumerate(zip(widths, widths[1:])):
        bound = math.sqrt(6.0 / (n_in + n_out))
        w = rng.uniform(-bound, bound, size=(n_out, n_in))
        act = "id" if i == len(widths) - 2 else "relu"
        if act == "relu" and n_out == 1 and i > 0:
            w = np.abs(w)
        b = np.zeros(n_out) if act == "id" else np.full(n_out, 0.01)
        layers.append(Layer(w, b, act))
    return Network(tuple(layers), norm=norm, meta={"seed": seed})


# ---------------------------------------------------------------------------
# evaluation

def _apply_act(z: np.ndarray, act: str) -> np.ndarray:
    return np.maximum(z, 0.0) if act == "relu" else z


def forward_core_batch(net: Network, X: np.ndarray) -> np.ndarray:
    """Raw network on (n, d) inputs, no normalization. Returns (n, n_out)."""
    a = np.atleast_2d(np.asarray(X, dtype=float))
    for layer in net.layers:
        a = _apply_act(a @ layer.w.T + layer.b, layer.act)
    return a


def forward(net: Network, x, use_norm: bool = False):
    """Scalar output for a single input vector (vector if n_out > 1).

    With use_norm the input is normalized and the output denormalized via the
    attached NormSpec.
    """
    x = np.asarray(x, dtype=float)
    if use_norm:
        if net.norm is None:
            raise ValueError("network has no NormSpec")
        from .closedloop import denormalize_out, normalize
        y = forward_core_batch(net, normalize(x, net.norm))[0]
        y = denormalize_out(y, net.norm)
    else:
        y = forward_core_batch(net, x)[0]
    return float(y[0]) if y.shape[0] == 1 else y


def forward_batch(net: Network, X: np.ndarray, use_norm: bool = False) -> np.ndarray:
    """(n,) outputs for single-output nets, else (n, n_out)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if use_norm:
        if net.norm is None:
            raise ValueError("network has no NormSpec")
        from .closedloop import denormalize_out, normalize
        Y = forward_core_batch(net, normalize(X, net.norm))
        Y = denormalize_out(Y, net.norm)
    else:
        Y = forward_core_batch(net, X)
    return Y[:, 0] if Y.shape[1] == 1 else Y


def forward_preacts(net: Network, x) -> list:
    """Per-layer pre-activation vectors for one raw (unnormalized-path) input."""
    a = np.asarray(x, dtype=float)
    pres = []
    for layer in net.layers:
        z = layer.w @ a + layer.b
        pres.append(z)
        a = _apply_act(z, layer.act)
    return pres


def _forward_trace(net: Network, X: np.ndarray):
    """Activations per layer for backprop: returns (acts, pres)."""
    acts = [np.atleast_2d(np.asarray(X, dtype=float))]
    pres = []
    for layer in net.layers:
        z = acts[-1] @ layer.w.T + layer.b
        pres.append(z)
        acts.append(_apply_act(z, layer.act))
    return acts, pres


@dataclass
class Gradient:
    dw: list
    db: list

    def scaled(self, f: float) -> "Gradient":
        return Gradient([w * f for w in self.dw], [b * f for b in self.db])

    def add_(self, other: "Gradient", f: float = 1.0):
        for i in range(len(self.dw)):
            self.dw[i] += f * other.dw[i]
            self.db[i] += f * other.db[i]
        return self

    def max_abs(self) -> float:
        return max(max(np.abs(w).max() for w in self.dw),
                   max(np.abs(b).max() for b in self.db))


def _backprop_from_output(net: Network, acts, pres, dL_dy: np.ndarray) -> Gradient:
    """Parameter gradient given dL/d(output) of shape (n, n_out)."""
    n = dL_dy.shape[0]
    dw = [None] * len(net.layers)
    db = [None] * len(net.layers)
    delta = dL_dy
    for i in reversed(range(len(net.layers))):
        layer = net.layers[i]
        if layer.act == "relu":
            delta = delta * (pres[i] > 0.0)
        dw[i] = delta.T @ acts[i] / n
        db[i] = delta.sum(axis=0) / n
        if i > 0:
            delta = delta @ layer.w
    return Gradient(dw, db)


def mse(net: Network, X: np.ndarray, Y: np.ndarray) -> float:
    pred = forward_batch(net, X)
    return float(np.mean((pred - np.asarray(Y, dtype=float)) ** 2))


def rmse(net: Network, X: np.ndarray, Y: np.ndarray) -> float:
    return math.sqrt(mse(net, X, Y))


def gradient(net: Network, X: np.ndarray, Y: np.ndarray, loss: str = "mse") -> Gradient:
    """Exact batch-loss gradient; ReLU subgradient 0 at kinks.

    loss "mse" is the mean squared error; "rmse" chains through the square
    root (subgradient 0 when the loss is exactly zero).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.asarray(Y, dtype=float).reshape(-1)
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    acts, pres = _forward_trace(net, X)
    resid = acts[-1][:, 0] - Y
    # d(mean(r^2))/dy = 2 r / n, the 1/n lives in _backprop_from_output
    g = _backprop_from_output(net, acts, pres, (2.0 * resid)[:, None])
    if loss == "rmse":
        r = math.sqrt(float(np.mean(resid ** 2)))
        g = g.scaled(0.0 if r == 0.0 else 0.5 / r)
    elif loss != "mse":
        raise ValueError(f"unknown loss {loss!r}")
    return g


def input_gradient(net: Network, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """d/dx of the per-sample squared error (f(x)-y)^2, shape (n, d)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.asarray(Y, dtype=float).reshape(-1)
    acts, pres = _forward_trace(net, X)
    delta = 2.0 * (acts[-1][:, 0] - Y)[:, None]
    for i in reversed(range(len(net.layers))):
        layer = net.layers[i]
        if layer.act == "relu":
            delta = delta * (pres[i] > 0.0)
        delta = delta @ layer.w
    return delta


def output_input_gradient(net: Network, X: np.ndarray) -> np.ndarray:
    """d f(x) / dx for each sample, shape (n, d)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    acts, pres = _forward_trace(net, X)
    delta = np.ones((X.shape[0], net.n_out))
    for i in reversed(range(len(net.layers))):
        layer = net.layers[i]
        if layer.act == "relu":
            delta = delta * (pres[i] > 0.0)
        delta = delta @ layer.w
    return delta


def apply_gradient(net: Network, g: Gradient, lr: float) -> Network:
    layers = tuple(Layer(l.w - lr * gw, l.b - lr * gb, l.act)
                   for l, gw, gb in zip(net.layers, g.dw, g.db))
    return Network(layers, norm=net.norm, meta=dict(net.meta))


def train(net: Network, X: np.ndarray, Y: np.ndarray, epochs: int = 2000,
          lr: float = 0.02, seed: int = 0, batch_size: int = 32) -> Network:
    """Plain mini-batch gradient descent on the MSE; deterministic in seed.

    Expects normalized data (inputs and outputs in the unit box). The result
    carries training settings and the final train RMSE in meta.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.asarray(Y, dtype=float).reshape(-1)
    rng = np.random.default_rng(seed)
    cur = net
    n = X.shape[0]
    for epoch in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            g = gradient(cur, X[idx], Y[idx], loss="mse")
            cur = apply_gradient(cur, g, lr)
        if not math.isfinite(mse(cur, X[:1], Y[:1])):
            raise TrainingDivergedError(epoch)
    final = rmse(cur, X, Y)
    if not math.isfinite(final):
        raise TrainingDivergedError(epochs - 1)
    meta = dict(cur.meta)
    meta.update({"kind": meta.get("kind", "naive"), "epochs": epochs, "lr": lr,
                 "seed": seed, "batch_size": batch_size, "train_rmse": final})
    return Network(cur.layers, norm=cur.norm, meta=meta)


# ---------------------------------------------------------------------------
# structural transforms

def embed_normalization(net: Network) -> Network:
    """Fold the NormSpec into the first and last layers.

    The returned network takes raw inputs and yields raw outputs:
    forward(embedded, x) == forward(net, x, use_norm=True) up to rounding.
    """
    if net.norm is None:
        raise ValueError("network has no NormSpec to embed")
    spec = net.norm
    lo = np.array(spec.in_min)
    scale = 1.0 / (np.array(spec.in_max) - lo)

    first = net.layers[0]
    w0 = first.w * scale[None, :]
    b0 = first.b - first.w @ (lo * scale)
    out_range = spec.out_max - spec.out_min
    last = net.layers[-1]
    if last.act != "id":
        raise ValueError("output layer must be identity to embed denormalization")
    wl = last.w * out_range
    bl = last.b * out_range + spec.out_min

    layers = (Layer(w0, b0, first.act),) + net.layers[1:-1] + (Layer(wl, bl, last.act),)
    meta = dict(net.meta)
    meta["normalization"] = "embedded"
    return Network(layers, norm=None, meta=meta)


def double_network(net: Network) -> Network:
    """Block-diagonal duplication: inputs split into two halves feeding two
    independent copies; outputs are (f(x_a), f(x_b))."""
    layers = []
    for l in net.layers:
        o, i = l.w.shape
        w = np.zeros((2 * o, 2 * i))
        w[:o, :i] = l.w
        w[o:, i:] = l.w
        b = np.concatenate([l.b, l.b])
        layers.append(Layer(w, b, l.act))
    meta = dict(net.meta)
    meta["doubled"] = True
    return Network(tuple(layers), norm=None, meta=meta)


# ---------------------------------------------------------------------------
# file format

def _f17(v: float) -> float:
    return float(format(v, ".17g"))


def save(net: Network, path):
    doc = {
        "widths": list(net.widths),
        "layers": [{"w": [[_f17(v) for v in row] for row in l.w],
                    "b": [_f17(v) for v in l.b],
                    "act": l.act} for l in net.layers],
        "norm": None if net.norm is None else {
            "in_min": [_f17(v) for v in net.norm.in_min],
            "in_max": [_f17(v) for v in net.norm.in_max],
            "out_min": _f17(net.norm.out_min),
            "out_max": _f17(net.norm.out_max),
        },
        "meta": net.meta,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load(path) -> Network:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise NetworkFormatError(f"invalid JSON: {exc}") from exc
    for key in ("widths", "layers"):
        if key not in doc:
            raise NetworkFormatError(f"missing field '{key}'")
    layers = []
    for i, ld in enumerate(doc["layers"]):
        for key in ("w", "b", "act"):
            if key not in ld:
                raise NetworkFormatError(f"missing field 'layers[{i}].{key}'")
        layers.append(Layer(np.array(ld["w"], dtype=float),
                            np.array(ld["b"], dtype=float), ld["act"]))
    norm = None
    if doc.get("norm") is not None:
        nd = doc["norm"]
        for key in ("in_min", "in_max", "out_min", "out_max"):
            if key not in nd:
                raise NetworkFormatError(f"missing field 'norm.{key}'")
        norm = NormSpec(tuple(nd["in_min"]), tuple(nd["in_max"]),
                        nd["out_min"], nd["out_max"])
    net = Network(tuple(layers), norm=norm, meta=doc.get("meta", {}))
    if list(net.widths) != list(doc["widths"]):
        raise NetworkFormatError("declared widths do not match layer shapes")
    return net
