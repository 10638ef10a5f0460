"""LSTM cells whose four gates come out of a single mega linear map.

``FdhtLstmCell`` stacks the input-to-hidden and hidden-to-hidden maps of
all four gates into one matrix and stores that matrix in HT form with
root rank 4, so the leading output mode selects the gate. The input
vector, zero padding and previous hidden state are concatenated to the
factorizable length prod(n_shape), pushed through the HT kernel once per
time step, and split gate-major in the order f, u, c, o.

``DenseLstmCell`` is the uncompressed counterpart with one explicit
(4H x (n_in + H)) matrix. Both cells expose the same stepping and
backward interface so the training harness and the trajectory tests can
drive either.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grad import backward_from_tape
from .ht import HTWeight, init_ht_weight, output_from_tape, run_plan
from .tensor import tensorize, vectorize

MODES = ("full", "input-only")
GATE_ORDER = ("f", "u", "c", "o")


@dataclass(eq=False)
class LstmState:
    h: np.ndarray
    c: np.ndarray


@dataclass(eq=False)
class Head:
    """Dense classifier on the final hidden state."""

    w: np.ndarray  # (classes, hidden)
    b: np.ndarray  # (classes,)


def make_head(classes: int, hidden_size: int, seed) -> Head:
    rng = np.random.default_rng(seed)
    w = rng.normal(0.0, hidden_size ** -0.5, size=(classes, hidden_size))
    return Head(w, np.zeros(classes))


def sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax_cross_entropy(logits, label: int):
    """Mean-ready loss and dL/dlogits for one example."""
    if not 0 <= label < logits.size:
        raise ValueError(f"label {label} out of range for {logits.size} classes")
    shifted = logits - np.max(logits)
    log_z = np.log(np.sum(np.exp(shifted)))
    loss = log_z - shifted[label]
    dlogits = np.exp(shifted - log_z)
    dlogits[label] -= 1.0
    return float(loss), dlogits


class FdhtLstmCell:
    """LSTM cell with the entire gate-stacked weight matrix in HT form.

    mode "full": the HT map consumes [x | zeros(pad_len) | h].
    mode "input-only": the HT map consumes only [x | zeros], and a dense
    (4H x H) recurrent matrix supplies the hidden-to-hidden terms, one
    H x H block per gate.
    """

    def __init__(self, weight: HTWeight, n_x: int, mode: str = "full",
                 biases=None, recurrent=None):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
        if weight.root_rank != 4:
            raise ValueError(f"cell weight needs root rank 4, got {weight.root_rank}")
        self.weight = weight
        self.n_x = int(n_x)
        self.mode = mode
        self.hidden_size = int(np.prod(weight.m_shape))
        self.pad_len = weight.in_size - self.n_x - self.hidden_size
        if self.pad_len < 0:
            raise ValueError(
                f"prod(n_shape)={weight.in_size} too small: needs at least "
                f"n_x + hidden = {self.n_x + self.hidden_size}"
            )
        h = self.hidden_size
        if biases is None:
            biases = {g: np.zeros(h) for g in GATE_ORDER}
            biases["f"] = np.ones(h)
        self.biases = {g: np.asarray(biases[g], dtype=np.float64) for g in GATE_ORDER}
        if mode == "input-only":
            if recurrent is None:
                raise ValueError("input-only mode needs a recurrent matrix")
            self.recurrent = np.asarray(recurrent, dtype=np.float64)
            if self.recurrent.shape != (4 * h, h):
                raise ValueError(
                    f"recurrent matrix must be {(4 * h, h)}, got {self.recurrent.shape}"
                )
        else:
            self.recurrent = None

    def init_state(self) -> LstmState:
        return LstmState(np.zeros(self.hidden_size), np.zeros(self.hidden_size))

    def params(self) -> dict[str, np.ndarray]:
        p = {f"ht.{i}": f for i, f in enumerate(self.weight.factors)}
        for g in GATE_ORDER:
            p[f"b_{g}"] = self.biases[g]
        if self.recurrent is not None:
            p["recurrent"] = self.recurrent
        return p

    def _pack(self, x, h):
        buf = np.zeros(self.weight.in_size)
        buf[: self.n_x] = x
        if self.mode == "full":
            buf[self.n_x + self.pad_len:] = h
        return buf

    def _preactivation(self, x, h, with_tape=False):
        packed = self._pack(x, h)
        values = run_plan(self.weight, tensorize(packed, self.weight.n_shape))
        z = vectorize(output_from_tape(self.weight, values))
        if self.recurrent is not None:
            z = z + self.recurrent @ h
        return (z, values) if with_tape else (z, None)

    def step(self, x, state: LstmState) -> LstmState:
        state, _ = self.step_cached(x, state, with_tape=False)
        return state

    def step_cached(self, x, state: LstmState, with_tape=True):
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        if x.size != self.n_x:
            raise ValueError(f"input has length {x.size}, expected {self.n_x}")
        z, tape = self._preactivation(x, state.h, with_tape)
        new_state, gates = _gate_forward(z, self.biases, state.c, self.hidden_size)
        cache = {"tape": tape, "gates": gates, "h_prev": state.h}
        return new_state, cache

    def step_backward(self, cache, dh, dc, grads):
        """Accumulate parameter gradients for one step; returns
        (dh_prev, dc_prev, dx)."""
        dz, db, dc_prev = _gate_backward(cache["gates"], dh, dc)
        for g, dbg in zip(GATE_ORDER, db):
            grads[f"b_{g}"] += dbg
        ht_grads = backward_from_tape(self.weight, cache["tape"], dz)
        for i, fg in enumerate(ht_grads.factors):
            grads[f"ht.{i}"] += fg
        dx = ht_grads.input[: self.n_x]
        if self.mode == "full":
            dh_prev = ht_grads.input[self.n_x + self.pad_len:]
        else:
            grads["recurrent"] += np.outer(dz, cache["h_prev"])
            dh_prev = self.recurrent.T @ dz
        return dh_prev, dc_prev, dx


class DenseLstmCell:
    """Plain LSTM with an explicit stacked weight matrix, used both as the
    training baseline and as the trajectory oracle vehicle."""

    def __init__(self, w: np.ndarray, n_x: int, biases=None):
        self.w = np.asarray(w, dtype=np.float64)
        self.n_x = int(n_x)
        if self.w.shape[0] % 4:
            raise ValueError(f"weight rows must be a multiple of 4, got {self.w.shape[0]}")
        self.hidden_size = self.w.shape[0] // 4
        self.pad_len = self.w.shape[1] - self.n_x - self.hidden_size
        if self.pad_len < 0:
            raise ValueError("weight columns must cover n_x + hidden")
        h = self.hidden_size
        if biases is None:
            biases = {g: np.zeros(h) for g in GATE_ORDER}
            biases["f"] = np.ones(h)
        self.biases = {g: np.asarray(biases[g], dtype=np.float64) for g in GATE_ORDER}

    def init_state(self) -> LstmState:
        return LstmState(np.zeros(self.hidden_size), np.zeros(self.hidden_size))

    def params(self) -> dict[str, np.ndarray]:
        p = {"w": self.w}
        for g in GATE_ORDER:
            p[f"b_{g}"] = self.biases[g]
        return p

    def _pack(self, x, h):
        buf = np.zeros(self.w.shape[1])
        buf[: self.n_x] = x
        buf[self.n_x + self.pad_len:] = h
        return buf

    def step(self, x, state: LstmState) -> LstmState:
        state, _ = self.step_cached(x, state)
        return state

    def step_cached(self, x, state: LstmState, with_tape=True):
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        packed = self._pack(x, state.h)
        z = self.w @ packed
        new_state, gates = _gate_forward(z, self.biases, state.c, self.hidden_size)
        cache = {"packed": packed, "gates": gates}
        return new_state, cache

    def step_backward(self, cache, dh, dc, grads):
        dz, db, dc_prev = _gate_backward(cache["gates"], dh, dc)
        for g, dbg in zip(GATE_ORDER, db):
            grads[f"b_{g}"] += dbg
        grads["w"] += np.outer(dz, cache["packed"])
        d_packed = self.w.T @ dz
        dx = d_packed[: self.n_x]
        dh_prev = d_packed[self.n_x + self.pad_len:]
        return dh_prev, dc_prev, dx


def make_dense_cell(n_x: int, hidden_size: int, seed) -> DenseLstmCell:
    rng = np.random.default_rng(seed)
    fan_in = n_x + hidden_size
    w = rng.normal(0.0, fan_in ** -0.5, size=(4 * hidden_size, fan_in))
    return DenseLstmCell(w, n_x)


def _gate_forward(z, biases, c_prev, h_size):
    zr = z.reshape(4, h_size)
    f = sigmoid(zr[0] + biases["f"])
    u = sigmoid(zr[1] + biases["u"])
    c_in = np.tanh(zr[2] + biases["c"])
    o = sigmoid(zr[3] + biases["o"])
    c = f * c_prev + u * c_in
    tanh_c = np.tanh(c)
    h = o * tanh_c
    gates = (f, u, c_in, o, c_prev, tanh_c)
    return LstmState(h, c), gates


def _gate_backward(gates, dh, dc):
    f, u, c_in, o, c_prev, tanh_c = gates
    do = dh * tanh_c * o * (1.0 - o)
    dc_total = dc + dh * o * (1.0 - tanh_c ** 2)
    df = dc_total * c_prev * f * (1.0 - f)
    du = dc_total * c_in * u * (1.0 - u)
    dc_in = dc_total * u * (1.0 - c_in ** 2)
    dc_prev = dc_total * f
    dz = np.concatenate([df, du, dc_in, do])
    return dz, (df, du, dc_in, do), dc_prev


def make_cell(n_x, n_shape, m_shape, leaf_rank, internal_rank,
              mode: str = "full", seed=0) -> FdhtLstmCell:
    """Build an FDHT cell: HT weight with root rank 4, zero biases except a
    forget-gate bias of 1, and zero-padding from n_x + hidden up to
    prod(n_shape)."""
    hidden = int(np.prod(m_shape))
    total = int(np.prod(n_shape))
    if total < n_x + hidden:
        raise ValueError(
            f"prod(n_shape)={total} too small: needs at least "
            f"n_x + hidden = {n_x + hidden}"
        )
    weight = init_ht_weight(m_shape, n_shape, leaf_rank, internal_rank, 4, seed)
    recurrent = None
    if mode == "input-only":
        rng = np.random.default_rng((seed, 1))
        recurrent = rng.normal(0.0, hidden ** -0.5, size=(4 * hidden, hidden))
    return FdhtLstmCell(weight, n_x, mode, recurrent=recurrent)


def lstm_step(cell, x, state: LstmState) -> LstmState:
    """One recurrence step: pack, apply the mega layer, gate, update."""
    return cell.step(x, state)


def forward_sequence(cell, head: Head, xs) -> np.ndarray:
    """Run the cell over a sequence from the zero state and return the
    classifier logits on the final hidden state."""
    if len(xs) == 0:
        raise ValueError("cannot run an empty sequence")
    state = cell.init_state()
    for x in xs:
        state = cell.step(x, state)
    return head.w @ state.h + head.b


def zero_grads(cell, head: Head) -> dict[str, np.ndarray]:
    grads = {k: np.zeros_like(v) for k, v in cell.params().items()}
    grads["head.w"] = np.zeros_like(head.w)
    grads["head.b"] = np.zeros_like(head.b)
    return grads


def bptt(cell, head: Head, batch, dropout_rate: float = 0.0, rng=None,
         return_input_grads: bool = False):
    """Mean softmax cross-entropy over a batch of (sequence, label) pairs
    and its gradients with respect to every cell, bias and head parameter.

    Dropout, when enabled, is applied to the final hidden state before the
    head (inverted scaling) and needs an ``rng``. Returns (loss, grads) or
    (loss, grads, input_grads) where input_grads[i][t] is dL/dx_t for
    example i.
    """
    if len(batch) == 0:
        raise ValueError("batch must be non-empty")
    if dropout_rate > 0 and rng is None:
        raise ValueError("dropout needs an rng")
    grads = zero_grads(cell, head)
    total_loss = 0.0
    all_input_grads = []
    for xs, label in batch:
        if len(xs) == 0:
            raise ValueError("cannot run an empty sequence")
        state = cell.init_state()
        caches = []
        for x in xs:
            state, cache = cell.step_cached(x, state)
            caches.append(cache)
        h_final = state.h
        if dropout_rate > 0:
            mask = (rng.random(h_final.size) >= dropout_rate) / (1.0 - dropout_rate)
            h_used = h_final * mask
        else:
            mask = None
            h_used = h_final
        logits = head.w @ h_used + head.b
        loss, dlogits = softmax_cross_entropy(logits, label)
        total_loss += loss

        grads["head.w"] += np.outer(dlogits, h_used)
        grads["head.b"] += dlogits
        dh = head.w.T @ dlogits
        if mask is not None:
            dh = dh * mask
        dc = np.zeros_like(dh)
        input_grads = [None] * len(xs)
        for t in range(len(xs) - 1, -1, -1):
            dh, dc, dx = cell.step_backward(caches[t], dh, dc, grads)
            input_grads[t] = dx
        all_input_grads.append(input_grads)

    b = float(len(batch))
    for k in grads:
        grads[k] /= b
    loss = total_loss / b
    if return_input_grads:
        return loss, grads, [[g / b for g in seq] for seq in all_input_grads]
    return loss, grads
