"""Dense numerical core for the segment embedding toolkit.

Hand-rolled LSTM machinery on float64 numpy arrays: single cell steps,
bidirectional sequence encoding, decoding conditioned on the encoder summary
at every step, masked mean squared error, backpropagation through time,
plain SGD, and a finite-difference gradient checker.

Gate order in every stacked LSTM tensor is (input, forget, candidate,
output). Operations are pure functions of their inputs: identical inputs
give bit-identical outputs, and trailing zero padding beyond a sequence's
valid length never influences a result.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, NumericError, StateError

__all__ = [
    "Sequence",
    "RnnState",
    "LstmParams",
    "EncoderParams",
    "DecoderParams",
    "lstm_step",
    "encode",
    "encode_with_tape",
    "encode_backward",
    "decode",
    "decode_with_tape",
    "decode_backward",
    "mse_loss",
    "sgd_step",
    "grad_check",
    "GradCheckReport",
    "TensorCheck",
]


def sigmoid(x):
    # tanh form stays finite for any argument magnitude
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class Sequence:
    """A run of feature frames with an explicit valid length.

    ``frames`` is ``(num_frames, feature_dim)``; rows at and beyond
    ``valid_len`` are zero padding and are excluded from every operation.
    """

    __slots__ = ("frames", "valid_len")

    def __init__(self, frames, valid_len=None):
        frames = np.asarray(frames, dtype=np.float64)
        if frames.ndim != 2:
            raise DataError(f"sequence frames must be 2-D, got shape {frames.shape}")
        if valid_len is None:
            valid_len = frames.shape[0]
        valid_len = int(valid_len)
        if not 1 <= valid_len <= frames.shape[0]:
            raise DataError(
                f"valid_len must be in [1, {frames.shape[0]}], got {valid_len}"
            )
        if not np.isfinite(frames).all():
            raise DataError("sequence frames contain non-finite values")
        if valid_len < frames.shape[0] and np.any(frames[valid_len:]):
            raise DataError("padding rows beyond valid_len must be all zero")
        self.frames = frames
        self.valid_len = valid_len

    @property
    def feature_dim(self) -> int:
        return self.frames.shape[1]

    @property
    def valid_frames(self) -> np.ndarray:
        return self.frames[: self.valid_len]

    def __repr__(self):
        return f"Sequence(valid_len={self.valid_len}, feature_dim={self.feature_dim})"


class RnnState:
    """Hidden and cell vectors of one LSTM."""

    __slots__ = ("h", "c")

    def __init__(self, h, c):
        h = np.asarray(h, dtype=np.float64)
        c = np.asarray(c, dtype=np.float64)
        if h.ndim != 1 or c.ndim != 1 or h.shape != c.shape:
            raise ConfigError(f"state vectors must be 1-D and equal length, got {h.shape} / {c.shape}")
        self.h = h
        self.c = c

    @classmethod
    def zeros(cls, hidden_dim: int) -> "RnnState":
        return cls(np.zeros(hidden_dim), np.zeros(hidden_dim))


class LstmParams:
    """Weights of one LSTM cell with the four gates stacked row-wise.

    ``w_x`` is (4*hidden, input), ``w_h`` is (4*hidden, hidden), ``b`` is
    (4*hidden,). The same class doubles as the shape-congruent gradient
    accumulator for a cell.
    """

    __slots__ = ("w_x", "w_h", "b")

    def __init__(self, w_x, w_h, b):
        w_x = np.asarray(w_x, dtype=np.float64)
        w_h = np.asarray(w_h, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        if w_x.ndim != 2 or w_x.shape[0] % 4 != 0:
            raise ConfigError(f"w_x must be (4*hidden, input), got shape {w_x.shape}")
        hidden = w_x.shape[0] // 4
        if w_h.shape != (4 * hidden, hidden):
            raise ConfigError(
                f"w_h shape {w_h.shape} inconsistent with w_x shape {w_x.shape}"
            )
        if b.shape != (4 * hidden,):
            raise ConfigError(f"b shape {b.shape} inconsistent with w_x shape {w_x.shape}")
        for name, t in (("w_x", w_x), ("w_h", w_h), ("b", b)):
            if not np.isfinite(t).all():
                raise ConfigError(f"parameter tensor {name} contains non-finite values")
        self.w_x = w_x
        self.w_h = w_h
        self.b = b

    @property
    def input_dim(self) -> int:
        return self.w_x.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.w_x.shape[0] // 4

    @classmethod
    def zeros(cls, input_dim: int, hidden_dim: int) -> "LstmParams":
        return cls(
            np.zeros((4 * hidden_dim, input_dim)),
            np.zeros((4 * hidden_dim, hidden_dim)),
            np.zeros(4 * hidden_dim),
        )

    @classmethod
    def init(cls, input_dim: int, hidden_dim: int, rng: np.random.Generator) -> "LstmParams":
        # uniform +-1/sqrt(hidden); forget-gate bias 1 keeps the gate open early
        scale = 1.0 / np.sqrt(hidden_dim)
        w_x = rng.uniform(-scale, scale, (4 * hidden_dim, input_dim))
        w_h = rng.uniform(-scale, scale, (4 * hidden_dim, hidden_dim))
        b = np.zeros(4 * hidden_dim)
        b[hidden_dim : 2 * hidden_dim] = 1.0
        return cls(w_x, w_h, b)

    def zeros_like(self) -> "LstmParams":
        return LstmParams.zeros(self.input_dim, self.hidden_dim)

    def tensors(self, prefix: str = ""):
        return [
            (prefix + "w_x", self.w_x),
            (prefix + "w_h", self.w_h),
            (prefix + "b", self.b),
        ]


class EncoderParams:
    """Bidirectional encoder: one forward and one backward cell, each with
    hidden size embed_dim / 2; final states are concatenated."""

    __slots__ = ("fwd", "bwd")

    def __init__(self, fwd: LstmParams, bwd: LstmParams):
        if fwd.input_dim != bwd.input_dim or fwd.hidden_dim != bwd.hidden_dim:
            raise ConfigError(
                "forward and backward cells must share input and hidden dims"
            )
        self.fwd = fwd
        self.bwd = bwd

    @property
    def feature_dim(self) -> int:
        return self.fwd.input_dim

    @property
    def embed_dim(self) -> int:
        return 2 * self.fwd.hidden_dim

    @classmethod
    def init(cls, feature_dim: int, embed_dim: int, rng: np.random.Generator) -> "EncoderParams":
        if embed_dim <= 0 or embed_dim % 2 != 0:
            raise ConfigError(f"embed_dim must be a positive even integer, got {embed_dim}")
        half = embed_dim // 2
        return cls(LstmParams.init(feature_dim, half, rng), LstmParams.init(feature_dim, half, rng))

    @classmethod
    def zeros(cls, feature_dim: int, embed_dim: int) -> "EncoderParams":
        if embed_dim <= 0 or embed_dim % 2 != 0:
            raise ConfigError(f"embed_dim must be a positive even integer, got {embed_dim}")
        half = embed_dim // 2
        return cls(LstmParams.zeros(feature_dim, half), LstmParams.zeros(feature_dim, half))

    def zeros_like(self) -> "EncoderParams":
        return EncoderParams(self.fwd.zeros_like(), self.bwd.zeros_like())

    def tensors(self, prefix: str = ""):
        return self.fwd.tensors(prefix + "fwd.") + self.bwd.tensors(prefix + "bwd.")


class DecoderParams:
    """Unidirectional decoder cell plus linear output projection.

    The cell consumes concat(previous frame, z) at every step, so its input
    dim is feature_dim + embed_dim; its hidden size equals embed_dim so the
    encoder summary can seed the hidden state directly.
    """

    __slots__ = ("cell", "w_out", "b_out")

    def __init__(self, cell: LstmParams, w_out, b_out):
        w_out = np.asarray(w_out, dtype=np.float64)
        b_out = np.asarray(b_out, dtype=np.float64)
        if w_out.ndim != 2:
            raise ConfigError(f"w_out must be 2-D, got shape {w_out.shape}")
        feature_dim = w_out.shape[0]
        if w_out.shape[1] != cell.hidden_dim:
            raise ConfigError(
                f"w_out shape {w_out.shape} inconsistent with cell hidden dim {cell.hidden_dim}"
            )
        if b_out.shape != (feature_dim,):
            raise ConfigError(f"b_out shape {b_out.shape} inconsistent with w_out {w_out.shape}")
        if cell.input_dim != feature_dim + cell.hidden_dim:
            raise ConfigError(
                f"decoder cell input dim {cell.input_dim} must equal "
                f"feature_dim + embed_dim = {feature_dim + cell.hidden_dim}"
            )
        if not (np.isfinite(w_out).all() and np.isfinite(b_out).all()):
            raise ConfigError("parameter tensor w_out/b_out contains non-finite values")
        self.cell = cell
        self.w_out = w_out
        self.b_out = b_out

    @property
    def feature_dim(self) -> int:
        return self.w_out.shape[0]

    @property
    def embed_dim(self) -> int:
        return self.cell.hidden_dim

    @classmethod
    def init(cls, feature_dim: int, embed_dim: int, rng: np.random.Generator) -> "DecoderParams":
        cell = LstmParams.init(feature_dim + embed_dim, embed_dim, rng)
        scale = 1.0 / np.sqrt(embed_dim)
        w_out = rng.uniform(-scale, scale, (feature_dim, embed_dim))
        return cls(cell, w_out, np.zeros(feature_dim))

    @classmethod
    def zeros(cls, feature_dim: int, embed_dim: int) -> "DecoderParams":
        cell = LstmParams.zeros(feature_dim + embed_dim, embed_dim)
        return cls(cell, np.zeros((feature_dim, embed_dim)), np.zeros(feature_dim))

    def zeros_like(self) -> "DecoderParams":
        return DecoderParams.zeros(self.feature_dim, self.embed_dim)

    def tensors(self, prefix: str = ""):
        return self.cell.tensors(prefix + "cell.") + [
            (prefix + "w_out", self.w_out),
            (prefix + "b_out", self.b_out),
        ]


def lstm_step(params: LstmParams, x, state: RnnState) -> RnnState:
    """One LSTM update. Pure; returns a fresh state."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (params.input_dim,):
        raise ConfigError(
            f"input x has shape {x.shape}, w_x expects length {params.input_dim}"
        )
    if state.h.shape != (params.hidden_dim,):
        raise ConfigError(
            f"state has hidden length {state.h.shape[0]}, cell expects {params.hidden_dim}"
        )
    hidden = params.hidden_dim
    pre = params.w_x @ x + params.w_h @ state.h + params.b
    gates = sigmoid(pre)
    i = gates[:hidden]
    f = gates[hidden : 2 * hidden]
    g = np.tanh(pre[2 * hidden : 3 * hidden])
    o = gates[3 * hidden :]
    c = f * state.c + i * g
    h = o * np.tanh(c)
    return RnnState(h, c)


class _LstmTape:
    """Per-step activations recorded by a forward run, consumed by BPTT."""

    __slots__ = ("xs", "i", "f", "g", "o", "tc", "h", "h_prev", "c_prev", "h0", "c0")


def _lstm_run(params: LstmParams, xs: np.ndarray, h0=None, c0=None) -> _LstmTape:
    steps = xs.shape[0]
    hidden = params.hidden_dim
    h = np.zeros(hidden) if h0 is None else np.asarray(h0, dtype=np.float64)
    c = np.zeros(hidden) if c0 is None else np.asarray(c0, dtype=np.float64)

    tape = _LstmTape()
    tape.xs = xs
    tape.h0 = h
    tape.c0 = c
    tape.i = np.empty((steps, hidden))
    tape.f = np.empty((steps, hidden))
    tape.g = np.empty((steps, hidden))
    tape.o = np.empty((steps, hidden))
    tape.tc = np.empty((steps, hidden))
    tape.h = np.empty((steps, hidden))
    tape.h_prev = np.empty((steps, hidden))
    tape.c_prev = np.empty((steps, hidden))

    pre_all = xs @ params.w_x.T + params.b
    w_h = params.w_h
    for t in range(steps):
        pre = pre_all[t] + w_h @ h
        gates = sigmoid(pre)
        i = gates[:hidden]
        f = gates[hidden : 2 * hidden]
        g = np.tanh(pre[2 * hidden : 3 * hidden])
        o = gates[3 * hidden :]
        tape.h_prev[t] = h
        tape.c_prev[t] = c
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        tape.i[t] = i
        tape.f[t] = f
        tape.g[t] = g
        tape.o[t] = o
        tape.tc[t] = tc
        tape.h[t] = h
    return tape


def _lstm_backward(params: LstmParams, tape: _LstmTape, dh_out: np.ndarray, dc_last=None):
    """BPTT through one recorded run.

    ``dh_out[t]`` is the upstream gradient on the step-t hidden output (the
    recurrent path is handled internally). Returns (cell gradients, input
    gradients, gradient on h0, gradient on c0).
    """
    steps, hidden = tape.i.shape
    dpre_all = np.empty((steps, 4 * hidden))
    dh_rec = np.zeros(hidden)
    dc_rec = np.zeros(hidden) if dc_last is None else np.array(dc_last, dtype=np.float64)
    w_h_t = params.w_h.T
    for t in range(steps - 1, -1, -1):
        i = tape.i[t]
        f = tape.f[t]
        g = tape.g[t]
        o = tape.o[t]
        tc = tape.tc[t]
        dh = dh_out[t] + dh_rec
        do = dh * tc
        dc = dc_rec + dh * o * (1.0 - tc * tc)
        dpre = dpre_all[t]
        dpre[:hidden] = (dc * g) * i * (1.0 - i)
        dpre[hidden : 2 * hidden] = (dc * tape.c_prev[t]) * f * (1.0 - f)
        dpre[2 * hidden : 3 * hidden] = (dc * i) * (1.0 - g * g)
        dpre[3 * hidden :] = do * o * (1.0 - o)
        dh_rec = w_h_t @ dpre
        dc_rec = dc * f
    grads = LstmParams(
        dpre_all.T @ tape.xs,
        dpre_all.T @ tape.h_prev,
        dpre_all.sum(axis=0),
    )
    dxs = dpre_all @ params.w_x
    return grads, dxs, dh_rec, dc_rec


class EncodeTape:
    __slots__ = ("fwd", "bwd")

    def __init__(self, fwd: _LstmTape, bwd: _LstmTape):
        self.fwd = fwd
        self.bwd = bwd


def encode_with_tape(enc: EncoderParams, seq: Sequence):
    """Bidirectional encoding that records activations for the backward pass."""
    if seq.feature_dim != enc.feature_dim:
        raise ConfigError(
            f"sequence feature_dim {seq.feature_dim} does not match encoder "
            f"feature_dim {enc.feature_dim}"
        )
    xs = seq.valid_frames
    fwd = _lstm_run(enc.fwd, xs)
    bwd = _lstm_run(enc.bwd, xs[::-1])
    z = np.concatenate([fwd.h[-1], bwd.h[-1]])
    return z, EncodeTape(fwd, bwd)


def encode(enc: EncoderParams, seq: Sequence) -> np.ndarray:
    """Fixed-length summary of a sequence: concat of the two directions'
    final hidden states, length embed_dim. Padding frames are excluded."""
    z, _ = encode_with_tape(enc, seq)
    return z


def encode_backward(enc: EncoderParams, tape: EncodeTape, dz: np.ndarray) -> EncoderParams:
    """Gradients of both encoder cells given the gradient on the summary z."""
    if tape is None:
        raise StateError("encode_backward requires the tape from encode_with_tape")
    half = enc.fwd.hidden_dim
    steps = tape.fwd.i.shape[0]
    dh_f = np.zeros((steps, half))
    dh_f[-1] = dz[:half]
    g_fwd, _, _, _ = _lstm_backward(enc.fwd, tape.fwd, dh_f)
    dh_b = np.zeros((steps, half))
    dh_b[-1] = dz[half:]
    g_bwd, _, _, _ = _lstm_backward(enc.bwd, tape.bwd, dh_b)
    return EncoderParams(g_fwd, g_bwd)


class DecodeTape:
    __slots__ = ("cell", "pred")

    def __init__(self, cell: _LstmTape, pred: np.ndarray):
        self.cell = cell
        self.pred = pred


def decode_with_tape(dec: DecoderParams, z: np.ndarray, target: Sequence):
    """Teacher-forced decode that records activations for the backward pass.

    The hidden state starts at z, the cell state at zero; step t consumes
    concat(target frame t-1, z), with a zero vector standing in at t = 1.
    Returns (predicted frames (valid_len, feature_dim), tape).
    """
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (dec.embed_dim,):
        raise ConfigError(f"z has shape {z.shape}, decoder expects length {dec.embed_dim}")
    if target.feature_dim != dec.feature_dim:
        raise ConfigError(
            f"target feature_dim {target.feature_dim} does not match decoder "
            f"feature_dim {dec.feature_dim}"
        )
    steps = target.valid_len
    d = dec.feature_dim
    u = np.empty((steps, d + dec.embed_dim))
    u[0, :d] = 0.0
    u[1:, :d] = target.frames[: steps - 1]
    u[:, d:] = z
    cell_tape = _lstm_run(dec.cell, u, h0=z)
    pred = cell_tape.h @ dec.w_out.T + dec.b_out
    return pred, DecodeTape(cell_tape, pred)


def decode(dec: DecoderParams, z: np.ndarray, target: Sequence, teacher_forcing: bool = True) -> Sequence:
    """Emit target.valid_len frames conditioned on z at every step.

    With teacher forcing the previous *target* frame feeds each step;
    otherwise the previous prediction does (free running).
    """
    if teacher_forcing:
        pred, _ = decode_with_tape(dec, z, target)
        return Sequence(pred)
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (dec.embed_dim,):
        raise ConfigError(f"z has shape {z.shape}, decoder expects length {dec.embed_dim}")
    if target.feature_dim != dec.feature_dim:
        raise ConfigError(
            f"target feature_dim {target.feature_dim} does not match decoder "
            f"feature_dim {dec.feature_dim}"
        )
    d = dec.feature_dim
    state = RnnState(z.copy(), np.zeros(dec.embed_dim))
    prev = np.zeros(d)
    pred = np.empty((target.valid_len, d))
    for t in range(target.valid_len):
        state = lstm_step(dec.cell, np.concatenate([prev, z]), state)
        prev = dec.w_out @ state.h + dec.b_out
        pred[t] = prev
    return Sequence(pred)


def decode_backward(dec: DecoderParams, tape: DecodeTape, dpred: np.ndarray):
    """Gradients of the decoder and of z given gradients on the predictions.

    z receives contributions from every step's input concat and from the
    hidden-state initialisation. Valid for teacher-forced tapes.
    """
    if tape is None:
        raise StateError("decode_backward requires the tape from decode_with_tape")
    cell_tape = tape.cell
    w_out_g = dpred.T @ cell_tape.h
    b_out_g = dpred.sum(axis=0)
    dh_out = dpred @ dec.w_out
    cell_g, dxs, dh0, _ = _lstm_backward(dec.cell, cell_tape, dh_out)
    dz = dxs[:, dec.feature_dim :].sum(axis=0) + dh0
    return DecoderParams(cell_g, w_out_g, b_out_g), dz


def mse_loss(pred: Sequence, target: Sequence):
    """Sum of squared differences over valid frames, plus d(loss)/d(pred).

    Padding frames contribute nothing to either output.
    """
    if pred.valid_len != target.valid_len:
        raise DataError(
            f"valid_len mismatch: pred {pred.valid_len} vs target {target.valid_len}"
        )
    if pred.feature_dim != target.feature_dim:
        raise DataError(
            f"feature_dim mismatch: pred {pred.feature_dim} vs target {target.feature_dim}"
        )
    diff = pred.valid_frames - target.valid_frames
    return float(np.sum(diff * diff)), 2.0 * diff


def sgd_step(params, grads, learning_rate: float):
    """In-place p <- p - lr * g over every tensor pair. Returns params."""
    if learning_rate < 0:
        raise ConfigError(f"learning_rate must be non-negative, got {learning_rate}")
    for (name, p), (_, g) in zip(params.tensors(), grads.tensors()):
        if p.shape != g.shape:
            raise ConfigError(f"gradient shape {g.shape} does not match {name} {p.shape}")
        if not np.isfinite(g).all():
            raise NumericError(f"non-finite gradient entry in tensor {name}")
        p -= learning_rate * g
    return params


@dataclass
class TensorCheck:
    name: str
    max_rel_err: float
    passed: bool


@dataclass
class GradCheckReport:
    checks: list
    step: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __str__(self):
        lines = [f"{'tensor':<24} {'max rel err':>12}  status"]
        for c in self.checks:
            lines.append(f"{c.name:<24} {c.max_rel_err:>12.3e}  {'ok' if c.passed else 'FAIL'}")
        return "\n".join(lines)


def grad_check(loss_fn, tensors, analytic, step: float = 1e-5, tolerance: float = 1e-4,
               floor: float = 1e-4) -> GradCheckReport:
    """Compare analytic gradients against central finite differences.

    ``loss_fn()`` re-evaluates the scalar loss at the current parameter
    values; ``tensors`` is a list of (name, array) pairs that are perturbed
    in place and restored; ``analytic`` maps names to gradient arrays.

    Per-entry relative error uses max(|analytic|, |numeric|, floor) as the
    denominator: both sides below the floor are compared absolutely, which
    keeps finite-difference noise (~1e-9 at these loss scales) from
    inflating the ratio on near-zero gradients.
    """
    checks = []
    for name, p in tensors:
        a = analytic[name]
        worst = 0.0
        flat = p.reshape(-1)
        aflat = np.asarray(a).reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + step
            lp = loss_fn()
            flat[idx] = orig - step
            lm = loss_fn()
            flat[idx] = orig
            numeric = (lp - lm) / (2.0 * step)
            rel = abs(aflat[idx] - numeric) / max(abs(aflat[idx]), abs(numeric), floor)
            if rel > worst:
                worst = rel
        checks.append(TensorCheck(name, worst, worst <= tolerance))
    return GradCheckReport(checks, step, tolerance)
