"""Stacked LSTM with inter-layer dropout and a linear read-out, in numpy.

Arrays follow a (time, batch, feature) layout.  Each layer keeps its four
gates stacked in one matrix, in the order input, forget, output,
candidate::

    z = x @ W.T + h_prev @ U.T + b
    i, f, o = sigmoid(z[:3u]);  g = tanh(z[3u:])
    c = f * c_prev + i * g;     h = o * tanh(c)

Everything is float64 so finite-difference checks of ``backward`` are
meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError

GATES = ("i", "f", "o", "c")


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass
class LayerWeights:
    W: np.ndarray  # (4 * units, in_dim)
    U: np.ndarray  # (4 * units, units)
    b: np.ndarray  # (4 * units,)

    @property
    def units(self) -> int:
        return self.U.shape[1]

    @property
    def in_dim(self) -> int:
        return self.W.shape[1]

    def gate(self, name: str):
        """(W_g, U_g, b_g) views for one gate."""
        k = GATES.index(name)
        u = self.units
        sl = slice(k * u, (k + 1) * u)
        return self.W[sl], self.U[sl], self.b[sl]


@dataclass
class LstmModel:
    layers: list
    head_w: np.ndarray  # (units,)
    head_b: np.ndarray  # (1,)
    dropout_keep: float = 1.0
    input_mode: str = "sequence"

    def __post_init__(self):
        if not self.layers:
            raise ContractError("model needs at least one layer")
        if not 0.0 < self.dropout_keep <= 1.0:
            raise ContractError(f"dropout_keep must lie in (0, 1], got {self.dropout_keep}")
        for lower, upper in zip(self.layers, self.layers[1:]):
            if upper.in_dim != lower.units:
                raise ContractError("layer input width must equal the previous layer's units")
        if self.head_w.shape != (self.layers[-1].units,):
            raise ContractError("head width must equal the last layer's units")

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def units(self) -> int:
        return self.layers[-1].units

    def params(self) -> dict:
        """Named views of every trainable array, in a fixed order."""
        out = {}
        for k, layer in enumerate(self.layers):
            out[f"layers.{k}.W"] = layer.W
            out[f"layers.{k}.U"] = layer.U
            out[f"layers.{k}.b"] = layer.b
        out["head.w"] = self.head_w
        out["head.b"] = self.head_b
        return out

    def copy(self) -> "LstmModel":
        return LstmModel(
            [LayerWeights(l.W.copy(), l.U.copy(), l.b.copy()) for l in self.layers],
            self.head_w.copy(),
            self.head_b.copy(),
            self.dropout_keep,
            self.input_mode,
        )

    def predict_one(self, x: np.ndarray, state: "LstmState | None" = None):
        """Inference on a single example; returns (prediction, state_out).

        Sequence mode takes an (n, in_dim) window and ignores ``state``;
        flat mode takes one (in_dim,) vector and continues from ``state``.
        """
        if self.input_mode == "sequence":
            preds, _, _ = forward(self, x[:, None, :])
            return float(preds[-1, 0]), None
        preds, state_out, _ = forward(self, x[None, None, :], state)
        return float(preds[0, 0]), state_out


@dataclass
class LstmState:
    h: list
    c: list

    def copy(self) -> "LstmState":
        return LstmState([a.copy() for a in self.h], [a.copy() for a in self.c])


def zero_state(model: LstmModel, batch: int = 1) -> LstmState:
    return LstmState(
        [np.zeros((batch, l.units)) for l in model.layers],
        [np.zeros((batch, l.units)) for l in model.layers],
    )


def _uniform(rng, shape, fan_in, fan_out):
    s = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-s, s, size=shape)


def init_model(layer_count: int, units: int, in_dim: int, dropout_keep: float = 1.0,
               seed: int = 0, input_mode: str = "sequence") -> LstmModel:
    if layer_count < 1 or units < 1 or in_dim < 1:
        raise ContractError("layer_count, units and in_dim must be positive")
    rng = np.random.default_rng(seed)
    layers = []
    width = in_dim
    for _ in range(layer_count):
        W = _uniform(rng, (4 * units, width), width, units)
        U = _uniform(rng, (4 * units, units), units, units)
        b = np.zeros(4 * units)
        b[units : 2 * units] = 1.0
        layers.append(LayerWeights(W, U, b))
        width = units
    head_w = _uniform(rng, (units,), units, 1)
    return LstmModel(layers, head_w, np.zeros(1), dropout_keep, input_mode)


def _activate(z, c_prev, u):
    sig = sigmoid(z[..., : 3 * u])
    i = sig[..., :u]
    f = sig[..., u : 2 * u]
    o = sig[..., 2 * u :]
    g = np.tanh(z[..., 3 * u :])
    c = f * c_prev + i * g
    tc = np.tanh(c)
    return sig, g, c, tc, o * tc


def cell_step(layer: LayerWeights, x, h_prev, c_prev):
    """One timestep of one layer; returns (h, c, cache)."""
    if x.shape[-1] != layer.in_dim or h_prev.shape[-1] != layer.units:
        raise ContractError(
            f"cell expects input width {layer.in_dim} and state width {layer.units}"
        )
    z = x @ layer.W.T + h_prev @ layer.U.T + layer.b
    sig, g, c, tc, h = _activate(z, c_prev, layer.units)
    u = layer.units
    cache = {"i": sig[..., :u], "f": sig[..., u : 2 * u], "o": sig[..., 2 * u :],
             "g": g, "c_prev": c_prev, "tanh_c": tc}
    return h, c, cache


def sample_masks(model: LstmModel, steps: int, batch: int, rng) -> list:
    """Inverted-dropout masks (values 0 or 1/keep) for each layer boundary."""
    p = model.dropout_keep
    return [
        (rng.random((steps, batch, layer.units)) < p) / p
        for layer in model.layers[:-1]
    ]


def _layer_forward(xw, UT, acts, cands, cells, tcs, hs):
    """Fill one layer's per-step buffers; hs[0] and cells[0] hold the incoming state."""
    T, B, G = xw.shape
    u = G // 4
    # tanh(s * z) gives both nonlinearities: sigmoid(z) = 0.5 + 0.5 * tanh(z / 2)
    scale = np.full(G, 0.5)
    scale[3 * u :] = 1.0
    xw = xw * scale
    UT = UT * scale
    z = np.empty((B, G))
    tmp = np.empty((B, u))
    for t in range(T):
        np.matmul(hs[t], UT, out=z)
        z += xw[t]
        np.tanh(z, out=z)
        a = acts[t]
        np.multiply(z[:, : 3 * u], 0.5, out=a)
        a += 0.5
        g = cands[t]
        g[...] = z[:, 3 * u :]
        c = cells[t + 1]
        np.multiply(a[:, u : 2 * u], cells[t], out=c)
        np.multiply(a[:, :u], g, out=tmp)
        c += tmp
        np.tanh(c, out=tcs[t])
        np.multiply(a[:, 2 * u :], tcs[t], out=hs[t + 1])


def _layer_backward(dH, acts, cands, cells, tcs, U, dZ):
    """Backpropagate through time for one layer, writing dLoss/dz into ``dZ``."""
    T, B, u = dH.shape
    dh = np.empty((B, u))
    dh_next = np.zeros((B, u))
    dc = np.zeros((B, u))
    tmp = np.empty((B, u))
    for t in range(T - 1, -1, -1):
        a = acts[t]
        i, f, o = a[:, :u], a[:, u : 2 * u], a[:, 2 * u :]
        g, tc = cands[t], tcs[t]
        dz = dZ[t]
        np.add(dH[t], dh_next, out=dh)
        # dc carries dc_next = dc * f from the previous iteration
        np.multiply(tc, tc, out=tmp)
        np.subtract(1.0, tmp, out=tmp)
        tmp *= o
        tmp *= dh
        dc += tmp
        # output gate: dh * tanh(c) * o * (1 - o)
        np.multiply(dh, tc, out=dz[:, 2 * u : 3 * u])
        dz[:, 2 * u : 3 * u] *= o
        np.subtract(1.0, o, out=tmp)
        dz[:, 2 * u : 3 * u] *= tmp
        # input gate: dc * g * i * (1 - i)
        np.multiply(dc, g, out=dz[:, :u])
        dz[:, :u] *= i
        np.subtract(1.0, i, out=tmp)
        dz[:, :u] *= tmp
        # forget gate: dc * c_prev * f * (1 - f)
        np.multiply(dc, cells[t], out=dz[:, u : 2 * u])
        dz[:, u : 2 * u] *= f
        np.subtract(1.0, f, out=tmp)
        dz[:, u : 2 * u] *= tmp
        # candidate: dc * i * (1 - g^2)
        np.multiply(g, g, out=tmp)
        np.subtract(1.0, tmp, out=tmp)
        tmp *= i
        np.multiply(dc, tmp, out=dz[:, 3 * u :])
        dc *= f
        np.matmul(dz, U, out=dh_next)


@dataclass
class Tape:
    inputs: list  # per layer: (T, B, in_dim) as fed to that layer
    acts: list  # per layer: (T, B, 3u) sigmoid gates
    cands: list  # per layer: (T, B, u) candidate
    cells: list  # per layer: (T + 1, B, u), row 0 is c_prev
    tanh_cells: list
    hiddens: list  # per layer: (T + 1, B, u), row 0 is h_prev
    masks: list | None = field(default=None)


def forward(model: LstmModel, inputs: np.ndarray, state: LstmState | None = None,
            masks: list | None = None):
    """Run the stack over ``inputs`` of shape (T, B, in_dim).

    Returns ``(predictions, state_out, tape)`` where predictions has shape
    (T, B): the head is applied to the top layer's hidden state at every
    step.  Sequence-mode callers read the last row.  ``masks`` of None
    means inference (no dropout).
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 3 or inputs.shape[2] != model.in_dim:
        raise ContractError(
            f"expected input of shape (T, B, {model.in_dim}), got {inputs.shape}"
        )
    T, B, _ = inputs.shape
    if state is None:
        state = zero_state(model, B)
    if masks is not None and len(masks) != len(model.layers) - 1:
        raise ContractError("need one dropout mask per layer boundary")

    tape = Tape([], [], [], [], [], [], masks)
    x = inputs
    h_out, c_out = [], []
    for k, layer in enumerate(model.layers):
        u = layer.units
        xw = x @ layer.W.T + layer.b
        acts = np.empty((T, B, 3 * u))
        cands = np.empty((T, B, u))
        cells = np.empty((T + 1, B, u))
        tcs = np.empty((T, B, u))
        hs = np.empty((T + 1, B, u))
        hs[0] = state.h[k]
        cells[0] = state.c[k]
        _layer_forward(xw, layer.U.T.copy(), acts, cands, cells, tcs, hs)
        tape.inputs.append(x)
        tape.acts.append(acts)
        tape.cands.append(cands)
        tape.cells.append(cells)
        tape.tanh_cells.append(tcs)
        tape.hiddens.append(hs)
        h_out.append(hs[T].copy())
        c_out.append(cells[T].copy())
        x = hs[1:]
        if masks is not None and k < len(model.layers) - 1:
            x = x * masks[k]
    preds = x @ model.head_w + model.head_b[0]
    return preds, LstmState(h_out, c_out), tape


def backward(model: LstmModel, tape: Tape, d_pred: np.ndarray) -> dict:
    """Gradients of a loss w.r.t. every parameter, given dLoss/dprediction.

    ``d_pred`` has the (T, B) shape of the forward predictions; put zeros
    where a prediction does not enter the loss.  The incoming state is
    treated as a constant.
    """
    if len(tape.inputs) != len(model.layers):
        raise ContractError("tape was recorded with a different number of layers")
    for layer, x, hs in zip(model.layers, tape.inputs, tape.hiddens):
        if x.shape[2] != layer.in_dim or hs.shape[2] != layer.units:
            raise ContractError("tape does not match the model's dimensions")
    d_pred = np.asarray(d_pred, dtype=np.float64)
    top = tape.hiddens[-1][1:]
    if d_pred.shape != top.shape[:2]:
        raise ContractError(f"d_pred shape {d_pred.shape} != {top.shape[:2]}")

    grads = {}
    grads["head.w"] = np.einsum("tb,tbu->u", d_pred, top)
    grads["head.b"] = np.array([d_pred.sum()])
    dH = d_pred[..., None] * model.head_w

    for k in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[k]
        u = layer.units
        acts, cands = tape.acts[k], tape.cands[k]
        cells, tcs, hs = tape.cells[k], tape.tanh_cells[k], tape.hiddens[k]
        T, B = acts.shape[:2]
        dZ = np.empty((T, B, 4 * u))
        _layer_backward(dH, acts, cands, cells, tcs, layer.U, dZ)
        flat = dZ.reshape(T * B, 4 * u)
        grads[f"layers.{k}.W"] = flat.T @ tape.inputs[k].reshape(T * B, -1)
        grads[f"layers.{k}.U"] = flat.T @ hs[:-1].reshape(T * B, u)
        grads[f"layers.{k}.b"] = flat.sum(axis=0)
        if k > 0:
            dH = dZ @ layer.W
            if tape.masks is not None:
                dH = dH * tape.masks[k - 1]
    return {name: grads[name] for name in model.params()}
