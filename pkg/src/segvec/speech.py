"""Encoder-decoder training over a segmented speech corpus.

Two context objectives are supported. In skipgram mode each segment is
encoded once and the shared decoder reconstructs every in-window neighbor
from that encoding; the summed reconstruction error drives the update. In
cbow mode the in-window neighbors are encoded by the shared encoder, their
summed encodings condition the decoder, and the center segment is the
reconstruction target.

After training, skipgram instance embeddings are the per-segment encodings;
cbow instance embeddings are the context sums the decoder consumed (segments
without any in-window neighbor get none).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, asdict

import numpy as np

from . import nn
from .corpus import SegmentedCorpus, window_neighbors, DEFAULT_MAX_LEN
from .errors import ConfigError, ParseError

__all__ = [
    "MODES",
    "TrainConfig",
    "SegmentEmbedder",
    "ContextExample",
    "build_examples",
    "train",
    "embed_instances",
    "save_model",
    "load_model",
]

logger = logging.getLogger(__name__)

MODES = ("skipgram", "cbow")

CHECKPOINT_MAGIC = "segvec-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    mode: str = "skipgram"
    embed_dim: int = 50
    window: int = 3
    learning_rate: float = 1e-3
    epochs: int = 500
    batch_size: int = 1
    seed: int = 0
    max_len: int = DEFAULT_MAX_LEN
    clip_norm: float | None = None

    def validate(self) -> "TrainConfig":
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.embed_dim <= 0 or self.embed_dim % 2 != 0:
            raise ConfigError(f"embed_dim must be a positive even integer, got {self.embed_dim}")
        if self.window < 1:
            raise ConfigError(f"window must be >= 1, got {self.window}")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.max_len < 1:
            raise ConfigError(f"max_len must be >= 1, got {self.max_len}")
        if self.clip_norm is not None and not self.clip_norm > 0:
            raise ConfigError(f"clip_norm must be positive when set, got {self.clip_norm}")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d).validate()


class SegmentEmbedder:
    """Encoder + shared decoder with the configuration that built them."""

    def __init__(self, encoder: nn.EncoderParams, decoder: nn.DecoderParams,
                 config: TrainConfig):
        if encoder.embed_dim != config.embed_dim:
            raise ConfigError(
                f"encoder embed_dim {encoder.embed_dim} does not match config {config.embed_dim}"
            )
        if decoder.embed_dim != config.embed_dim:
            raise ConfigError(
                f"decoder embed_dim {decoder.embed_dim} does not match config {config.embed_dim}"
            )
        if decoder.feature_dim != encoder.feature_dim:
            raise ConfigError("encoder and decoder disagree on feature_dim")
        self.encoder = encoder
        self.decoder = decoder
        self.config = config

    @property
    def feature_dim(self) -> int:
        return self.encoder.feature_dim

    @classmethod
    def create(cls, feature_dim: int, config: TrainConfig,
               rng: np.random.Generator) -> "SegmentEmbedder":
        config.validate()
        enc = nn.EncoderParams.init(feature_dim, config.embed_dim, rng)
        dec = nn.DecoderParams.init(feature_dim, config.embed_dim, rng)
        return cls(enc, dec, config)

    @classmethod
    def zeros(cls, feature_dim: int, config: TrainConfig) -> "SegmentEmbedder":
        config.validate()
        enc = nn.EncoderParams.zeros(feature_dim, config.embed_dim)
        dec = nn.DecoderParams.zeros(feature_dim, config.embed_dim)
        return cls(enc, dec, config)

    def tensors(self):
        return self.encoder.tensors("encoder.") + self.decoder.tensors("decoder.")

    def encode_segment(self, seq: nn.Sequence) -> np.ndarray:
        return nn.encode(self.encoder, seq)


@dataclass(frozen=True)
class ContextExample:
    """One window position: the anchor segment index and its in-window
    partner indices. Skipgram encodes the anchor and decodes each partner;
    cbow encodes the partners and decodes the anchor."""

    anchor: int
    partners: tuple


def build_examples(corpus: SegmentedCorpus, window: int) -> list:
    examples = []
    for lo, hi in corpus.utterance_spans:
        n = hi - lo
        for i in range(n):
            nbrs = window_neighbors(n, i, window)
            if nbrs:
                examples.append(ContextExample(lo + i, tuple(lo + j for j in nbrs)))
    return examples


def _masked_mse(pred: np.ndarray, target: nn.Sequence):
    diff = pred - target.valid_frames
    return float(np.sum(diff * diff)), 2.0 * diff


def _iadd(dst, src) -> None:
    for (_, d), (_, s) in zip(dst.tensors(), src.tensors()):
        d += s


def example_gradients(model: SegmentEmbedder, corpus: SegmentedCorpus,
                      example: ContextExample):
    """Loss, decoded frame count, and full parameter gradients for one
    window position under the model's mode."""
    segs = corpus.segments
    enc, dec = model.encoder, model.decoder
    if model.config.mode == "skipgram":
        z, enc_tape = nn.encode_with_tape(enc, segs[example.anchor].seq)
        dec_grads = dec.zeros_like()
        dz = np.zeros(model.config.embed_dim)
        loss = 0.0
        frames = 0
        for m in example.partners:
            target = segs[m].seq
            pred, dec_tape = nn.decode_with_tape(dec, z, target)
            part, dpred = _masked_mse(pred, target)
            loss += part
            frames += target.valid_len
            g, dz_m = nn.decode_backward(dec, dec_tape, dpred)
            _iadd(dec_grads, g)
            dz += dz_m
        enc_grads = nn.encode_backward(enc, enc_tape, dz)
        return loss, frames, enc_grads, dec_grads

    # cbow: the decoder consumes the exact sum of the partner encodings
    tapes = []
    z = np.zeros(model.config.embed_dim)
    for m in example.partners:
        z_m, tape = nn.encode_with_tape(enc, segs[m].seq)
        z += z_m
        tapes.append(tape)
    target = segs[example.anchor].seq
    pred, dec_tape = nn.decode_with_tape(dec, z, target)
    loss, dpred = _masked_mse(pred, target)
    dec_grads, dz = nn.decode_backward(dec, dec_tape, dpred)
    enc_grads = enc.zeros_like()
    for tape in tapes:
        _iadd(enc_grads, nn.encode_backward(enc, tape, dz))
    return loss, target.valid_len, enc_grads, dec_grads


def _clip_gradients(enc_grads, dec_grads, clip_norm: float) -> float:
    total = 0.0
    for _, g in enc_grads.tensors() + dec_grads.tensors():
        total += float(np.sum(g * g))
    norm = float(np.sqrt(total))
    if norm > clip_norm:
        scale = clip_norm / norm
        for _, g in enc_grads.tensors() + dec_grads.tensors():
            g *= scale
    return norm


def train(corpus: SegmentedCorpus, config: TrainConfig):
    """Train a SegmentEmbedder; returns (model, per-epoch mean frame loss).

    Pure SGD over window examples, order reshuffled each epoch from the
    seed. batch_size > 1 sums gradients over that many examples before each
    update. The loss trace entry for an epoch is total squared error divided
    by the number of decoded frames.
    """
    config.validate()
    if corpus.total_segments == 0:
        raise ConfigError("corpus has no segments")
    examples = build_examples(corpus, config.window)
    if not examples:
        raise ConfigError("no training examples: every utterance has a single word")

    ss = np.random.SeedSequence(config.seed)
    init_seed, shuffle_seed = ss.spawn(2)
    model = SegmentEmbedder.create(corpus.feature_dim, config,
                                   np.random.default_rng(init_seed))
    shuffle_rng = np.random.default_rng(shuffle_seed)

    trace = []
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(len(examples))
        epoch_loss = 0.0
        epoch_frames = 0
        batch_enc = model.encoder.zeros_like()
        batch_dec = model.decoder.zeros_like()
        in_batch = 0
        for pos, idx in enumerate(order):
            loss, frames, enc_g, dec_g = example_gradients(model, corpus, examples[idx])
            epoch_loss += loss
            epoch_frames += frames
            _iadd(batch_enc, enc_g)
            _iadd(batch_dec, dec_g)
            in_batch += 1
            if in_batch == config.batch_size or pos == len(order) - 1:
                if config.clip_norm is not None:
                    norm = _clip_gradients(batch_enc, batch_dec, config.clip_norm)
                    if norm > config.clip_norm:
                        logger.warning(
                            "epoch %d: gradient norm %.3g clipped to %.3g",
                            epoch + 1, norm, config.clip_norm,
                        )
                nn.sgd_step(model.encoder, batch_enc, config.learning_rate)
                nn.sgd_step(model.decoder, batch_dec, config.learning_rate)
                batch_enc = model.encoder.zeros_like()
                batch_dec = model.decoder.zeros_like()
                in_batch = 0
        trace.append(epoch_loss / epoch_frames)
        logger.debug("epoch %d/%d: mean frame loss %.6g", epoch + 1, config.epochs, trace[-1])
    return model, trace


def embed_instances(model: SegmentEmbedder, corpus: SegmentedCorpus) -> dict:
    """Instance embedding table: word -> list of vectors in corpus order.

    Skipgram: one encoding per segment. Cbow: one context-sum per segment
    that has at least one in-window neighbor.
    """
    if corpus.total_segments and corpus.feature_dim != model.feature_dim:
        raise ConfigError(
            f"corpus feature_dim {corpus.feature_dim} does not match model "
            f"feature_dim {model.feature_dim}"
        )
    table: dict = {}
    segs = corpus.segments
    if model.config.mode == "skipgram":
        for seg in segs:
            table.setdefault(seg.word, []).append(nn.encode(model.encoder, seg.seq))
        return table
    for example in build_examples(corpus, model.config.window):
        z = np.zeros(model.config.embed_dim)
        for m in example.partners:
            z += nn.encode(model.encoder, segs[m].seq)
        table.setdefault(segs[example.anchor].word, []).append(z)
    return table


def _fmt(x: float) -> str:
    return repr(float(x))


def save_model(model: SegmentEmbedder, path) -> None:
    """Versioned text checkpoint: config plus every named tensor with its
    shape header. Values round-trip exactly."""
    meta = {"feature_dim": model.feature_dim, "config": model.config.to_dict()}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}\n")
        fh.write("meta " + json.dumps(meta, sort_keys=True) + "\n")
        for name, t in model.tensors():
            dims = " ".join(str(d) for d in t.shape)
            fh.write(f"tensor {name} {dims}\n")
            rows = t.reshape(1, -1) if t.ndim == 1 else t
            for row in rows:
                fh.write(" ".join(_fmt(v) for v in row) + "\n")
        fh.write("end\n")


def load_model(path) -> SegmentEmbedder:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.readlines()
    if not lines:
        raise ParseError("empty checkpoint file", path=path, line=1)
    header = lines[0].split()
    if len(header) != 2 or header[0] != CHECKPOINT_MAGIC:
        raise ParseError(f"bad checkpoint header {lines[0].strip()!r}", path=path, line=1)
    if int(header[1]) != CHECKPOINT_VERSION:
        raise ParseError(f"unsupported checkpoint version {header[1]}", path=path, line=1)
    if len(lines) < 2 or not lines[1].startswith("meta "):
        raise ParseError("missing meta line", path=path, line=2)
    try:
        meta = json.loads(lines[1][5:])
        config = TrainConfig.from_dict(meta["config"])
        feature_dim = int(meta["feature_dim"])
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ParseError(f"bad meta line: {exc}", path=path, line=2)

    model = SegmentEmbedder.zeros(feature_dim, config)
    expected = dict(model.tensors())
    filled = set()
    i = 2
    n = len(lines)
    while i < n:
        line = lines[i].strip()
        i += 1
        if not line:
            continue
        if line == "end":
            break
        parts = line.split()
        if parts[0] != "tensor" or len(parts) < 3:
            raise ParseError(f"expected tensor header, got {line!r}", path=path, line=i)
        name = parts[1]
        if name not in expected:
            raise ParseError(f"unknown tensor {name!r}", path=path, line=i)
        if name in filled:
            raise ParseError(f"duplicate tensor {name!r}", path=path, line=i)
        try:
            shape = tuple(int(d) for d in parts[2:])
        except ValueError:
            raise ParseError(f"non-integer shape in {line!r}", path=path, line=i)
        dst = expected[name]
        if shape != dst.shape:
            raise ParseError(f"tensor {name!r} shape {shape} does not match expected {dst.shape}",
                             path=path, line=i)
        n_rows = 1 if len(shape) == 1 else shape[0]
        row_len = shape[0] if len(shape) == 1 else shape[1]
        for r in range(n_rows):
            if i >= n:
                raise ParseError(f"unexpected end of file inside tensor {name!r}",
                                 path=path, line=n)
            vals = lines[i].split()
            i += 1
            if len(vals) != row_len:
                raise ParseError(f"expected {row_len} values, got {len(vals)}", path=path, line=i)
            try:
                row = np.array([float(v) for v in vals])
            except ValueError:
                raise ParseError("non-numeric tensor value", path=path, line=i)
            if len(shape) == 1:
                dst[:] = row
            else:
                dst[r] = row
        filled.add(name)
    else:
        raise ParseError("missing 'end' marker", path=path, line=n)
    missing = set(expected) - filled
    if missing:
        raise ParseError(f"checkpoint missing tensors: {sorted(missing)}", path=path, line=n)
    return model
