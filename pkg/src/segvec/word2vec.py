"""Text-side baseline: skipgram and cbow word embeddings trained with
negative sampling on corpus transcripts.

Window enumeration matches the speech side exactly (full +-k window, never
crossing an utterance boundary) so the two models see the same context
structure. The input embedding matrix rows are the published vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .corpus import window_neighbors
from .errors import ConfigError
from .evaluation import EmbeddingSet

__all__ = ["TextVocab", "sigmoid_logloss", "train_w2v"]


@dataclass
class TextVocab:
    words: list          # index -> word
    index: dict          # word -> index
    counts: np.ndarray   # index -> frequency
    noise_probs: np.ndarray  # unigram^exponent, normalized
    noise_cdf: np.ndarray

    @classmethod
    def build(cls, token_lists, noise_exponent: float = 0.75) -> "TextVocab":
        counts: dict = {}
        for toks in token_lists:
            for tok in toks:
                w = tok.lower()
                counts[w] = counts.get(w, 0) + 1
        if not counts:
            raise ConfigError("empty vocabulary: no tokens in corpus")
        # frequency-descending with lexical tie break keeps indices stable
        words = sorted(counts, key=lambda w: (-counts[w], w))
        index = {w: i for i, w in enumerate(words)}
        freq = np.array([counts[w] for w in words], dtype=np.float64)
        probs = freq ** noise_exponent
        probs /= probs.sum()
        return cls(words, index, freq, probs, np.cumsum(probs))

    def __len__(self):
        return len(self.words)

    def sample_noise(self, rng: np.random.Generator) -> int:
        return int(np.searchsorted(self.noise_cdf, rng.random(), side="right"))


def sigmoid_logloss(score: float):
    """Loss -log(sigmoid(score)) and its derivative, stable for any score."""
    if score >= 0:
        loss = math.log1p(math.exp(-score))
        sig = 1.0 / (1.0 + math.exp(-score))
    else:
        loss = -score + math.log1p(math.exp(score))
        sig = math.exp(score) / (1.0 + math.exp(score))
    return loss, sig - 1.0


def _sigmoid(score: float) -> float:
    if score >= 0:
        return 1.0 / (1.0 + math.exp(-score))
    e = math.exp(score)
    return e / (1.0 + e)


def train_w2v(token_lists, mode: str = "skipgram", embed_dim: int = 50,
              window: int = 3, negatives: int = 5, epochs: int = 5,
              learning_rate: float = 0.025, seed: int = 0,
              noise_exponent: float = 0.75) -> EmbeddingSet:
    """Negative-sampling word2vec over per-utterance token lists.

    Skipgram maximizes log sigma(u_ctx . v_center) plus the negative terms
    for each in-window pair; cbow predicts the center from the mean of the
    context input vectors. Deterministic given the seed.
    """
    if mode not in ("skipgram", "cbow"):
        raise ConfigError(f"mode must be 'skipgram' or 'cbow', got {mode!r}")
    if embed_dim < 1:
        raise ConfigError(f"embed_dim must be >= 1, got {embed_dim}")
    if window < 1:
        raise ConfigError(f"window must be >= 1, got {window}")
    if negatives < 0:
        raise ConfigError(f"negatives must be >= 0, got {negatives}")
    if epochs < 0:
        raise ConfigError(f"epochs must be >= 0, got {epochs}")
    if not learning_rate > 0:
        raise ConfigError(f"learning_rate must be positive, got {learning_rate}")

    vocab = TextVocab.build(token_lists, noise_exponent)
    sentences = [
        np.array([vocab.index[t.lower()] for t in toks], dtype=np.int64)
        for toks in token_lists
        if toks
    ]

    ss = np.random.SeedSequence(seed)
    init_seed, order_seed, noise_seed = ss.spawn(3)
    init_rng = np.random.default_rng(init_seed)
    order_rng = np.random.default_rng(order_seed)
    noise_rng = np.random.default_rng(noise_seed)

    v_count = len(vocab)
    w_in = (init_rng.random((v_count, embed_dim)) - 0.5) / embed_dim
    w_out = np.zeros((v_count, embed_dim))

    def pair_update(v: np.ndarray, positive: int) -> None:
        # v is updated in place after all target rows are
        dv = np.zeros(embed_dim)
        for target, label in _targets(positive):
            row = w_out[target]
            g = _sigmoid(float(row @ v)) - label
            dv += g * row
            w_out[target] = row - learning_rate * g * v
        v -= learning_rate * dv

    def _targets(positive: int):
        yield positive, 1.0
        for _ in range(negatives):
            j = vocab.sample_noise(noise_rng)
            if j != positive:
                yield j, 0.0

    for _ in range(epochs):
        for si in order_rng.permutation(len(sentences)):
            sent = sentences[si]
            n = len(sent)
            for pos in range(n):
                ctx_positions = window_neighbors(n, pos, window)
                if not ctx_positions:
                    continue
                if mode == "skipgram":
                    center = int(sent[pos])
                    for cp in ctx_positions:
                        pair_update(w_in[center], int(sent[cp]))
                else:
                    ctx_ids = sent[ctx_positions]
                    mean = w_in[ctx_ids].mean(axis=0)
                    before = mean.copy()
                    pair_update(mean, int(sent[pos]))
                    w_in[ctx_ids] += (mean - before) / len(ctx_ids)

    return EmbeddingSet({w: w_in[i].copy() for i, w in enumerate(vocab.words)})
