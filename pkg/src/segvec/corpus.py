"""Corpus ingestion and preparation.

Reads per-utterance acoustic feature matrices and word-boundary alignments,
slices word-labelled segments, enumerates context windows for training, and
generates synthetic corpora for desk-scale verification.

File formats:

* Feature file (UTF-8 text): repeated blocks of
  ``<utt_id> <num_frames> <feature_dim>`` followed by num_frames lines of
  feature_dim space-separated floats.
* Alignment file: lines ``<utt_id> <word> <start_frame> <end_frame>`` with
  half-open [start, end) frame ranges; ``#`` lines are comments.

Both round-trip exactly through save/load.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ParseError, ValidationError
from .nn import Sequence

__all__ = [
    "Utterance",
    "WordAlignment",
    "Segment",
    "SegmentedCorpus",
    "TrainingPair",
    "CbowGroup",
    "load_features",
    "save_features",
    "load_alignments",
    "save_alignments",
    "segment",
    "window_neighbors",
    "make_skipgram_pairs",
    "make_cbow_groups",
    "transcripts",
    "generate_synthetic",
    "standardize_utterances",
    "DEFAULT_MAX_LEN",
]

DEFAULT_MAX_LEN = 100  # frames; 1 s at the conventional 10 ms shift


@dataclass
class Utterance:
    utt_id: str
    features: np.ndarray  # (num_frames, feature_dim)
    frame_shift_ms: float = 10.0

    @property
    def num_frames(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]


@dataclass
class WordAlignment:
    utt_id: str
    word: str
    start_frame: int
    end_frame: int  # exclusive


@dataclass
class Segment:
    utt_id: str
    word: str
    seq: Sequence


@dataclass
class SegmentedCorpus:
    segments: list
    utterance_spans: list  # [lo, hi) index ranges into segments, one utterance each
    vocab: dict  # word -> frequency

    @property
    def total_segments(self) -> int:
        return len(self.segments)

    @property
    def feature_dim(self) -> int:
        if not self.segments:
            raise ConfigError("corpus has no segments")
        return self.segments[0].seq.feature_dim

    def __len__(self):
        return len(self.segments)


@dataclass(frozen=True)
class TrainingPair:
    center: int
    context: int
    offset: int  # context position minus center position, in [-k, k] \ {0}


@dataclass(frozen=True)
class CbowGroup:
    target: int
    contexts: tuple


def _fmt(x: float) -> str:
    return repr(float(x))


def load_features(path) -> list:
    """Parse a feature file into Utterances; dims must agree across blocks."""
    utterances = []
    seen = set()
    feature_dim = None
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.readlines()
    i = 0
    n = len(lines)
    while i < n:
        line = lines[i]
        i += 1
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ParseError(f"expected '<utt_id> <num_frames> <dim>' header, got {line.strip()!r}",
                             path=path, line=i)
        utt_id = parts[0]
        try:
            num_frames = int(parts[1])
            dim = int(parts[2])
        except ValueError:
            raise ParseError(f"non-integer frame count or dim in header {line.strip()!r}",
                             path=path, line=i)
        if num_frames < 1 or dim < 1:
            raise ParseError(f"frame count and dim must be positive, got {num_frames} x {dim}",
                             path=path, line=i)
        if feature_dim is None:
            feature_dim = dim
        elif dim != feature_dim:
            raise ParseError(f"feature dim {dim} differs from earlier dim {feature_dim}",
                             path=path, line=i)
        if utt_id in seen:
            raise ParseError(f"duplicate utterance id {utt_id!r}", path=path, line=i)
        seen.add(utt_id)
        rows = np.empty((num_frames, dim))
        for r in range(num_frames):
            if i >= n:
                raise ParseError(f"unexpected end of file inside utterance {utt_id!r}",
                                 path=path, line=n)
            row_line = lines[i]
            i += 1
            vals = row_line.split()
            if len(vals) != dim:
                raise ParseError(f"expected {dim} values, got {len(vals)}", path=path, line=i)
            try:
                rows[r] = [float(v) for v in vals]
            except ValueError:
                raise ParseError(f"non-numeric value in frame row", path=path, line=i)
            if not np.isfinite(rows[r]).all():
                raise ParseError("non-finite value in frame row", path=path, line=i)
        utterances.append(Utterance(utt_id, rows))
    return utterances


def save_features(utterances, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for utt in utterances:
            fh.write(f"{utt.utt_id} {utt.num_frames} {utt.feature_dim}\n")
            for row in utt.features:
                fh.write(" ".join(_fmt(v) for v in row) + "\n")


def load_alignments(path) -> list:
    """Parse, lowercase, group per utterance, sort by start, check overlap."""
    raw = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            parts = stripped.split()
            if len(parts) != 4:
                raise ParseError(f"expected '<utt_id> <word> <start> <end>', got {stripped!r}",
                                 path=path, line=lineno)
            utt_id, word, start_s, end_s = parts
            try:
                start = int(start_s)
                end = int(end_s)
            except ValueError:
                raise ParseError(f"non-integer frame index in {stripped!r}", path=path, line=lineno)
            if start < 0 or end <= start:
                raise ParseError(f"need 0 <= start < end, got [{start}, {end})",
                                 path=path, line=lineno)
            raw.append(WordAlignment(utt_id, word.lower(), start, end))

    by_utt = {}
    for ali in raw:
        by_utt.setdefault(ali.utt_id, []).append(ali)
    out = []
    for utt_id, group in by_utt.items():
        group.sort(key=lambda a: (a.start_frame, a.end_frame))
        for prev, cur in zip(group, group[1:]):
            if cur.start_frame < prev.end_frame:
                raise ValidationError(
                    f"overlapping alignments in utterance {utt_id!r}: "
                    f"{prev.word!r} [{prev.start_frame},{prev.end_frame}) and "
                    f"{cur.word!r} [{cur.start_frame},{cur.end_frame})"
                )
        out.extend(group)
    return out


def save_alignments(alignments, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ali in alignments:
            fh.write(f"{ali.utt_id} {ali.word} {ali.start_frame} {ali.end_frame}\n")


def segment(utterances, alignments, max_len: int = DEFAULT_MAX_LEN) -> SegmentedCorpus:
    """Slice word segments out of the utterance matrices.

    Segments longer than max_len frames are truncated to max_len to bound
    the cost of backpropagation through time.
    """
    if max_len < 1:
        raise ConfigError(f"max_len must be >= 1, got {max_len}")
    utt_map = {u.utt_id: u for u in utterances}
    by_utt = {}
    for ali in alignments:
        if ali.utt_id not in utt_map:
            raise ValidationError(f"alignment references unknown utterance {ali.utt_id!r}")
        utt = utt_map[ali.utt_id]
        if ali.end_frame > utt.num_frames:
            raise ValidationError(
                f"alignment [{ali.start_frame},{ali.end_frame}) for {ali.word!r} exceeds "
                f"utterance {ali.utt_id!r} length {utt.num_frames}"
            )
        by_utt.setdefault(ali.utt_id, []).append(ali)

    segments = []
    spans = []
    vocab = {}
    for utt in utterances:
        group = by_utt.get(utt.utt_id)
        if not group:
            continue
        lo = len(segments)
        for ali in group:
            length = min(ali.end_frame - ali.start_frame, max_len)
            frames = np.array(utt.features[ali.start_frame : ali.start_frame + length])
            segments.append(Segment(utt.utt_id, ali.word, Sequence(frames)))
            vocab[ali.word] = vocab.get(ali.word, 0) + 1
        spans.append((lo, len(segments)))
    return SegmentedCorpus(segments, spans, vocab)


def window_neighbors(n_items: int, pos: int, k: int) -> list:
    """Positions within +-k of pos, excluding pos, clipped to [0, n_items)."""
    lo = max(0, pos - k)
    hi = min(n_items, pos + k + 1)
    return [m for m in range(lo, hi) if m != pos]


def make_skipgram_pairs(corpus: SegmentedCorpus, k: int, seed=None) -> list:
    """One (center, context) pair per in-window neighbor, never crossing an
    utterance boundary. With a seed, the emission order is shuffled
    deterministically; otherwise it is corpus order."""
    if k < 1:
        raise ConfigError(f"window k must be >= 1, got {k}")
    pairs = []
    for lo, hi in corpus.utterance_spans:
        n = hi - lo
        for i in range(n):
            for j in window_neighbors(n, i, k):
                pairs.append(TrainingPair(lo + i, lo + j, j - i))
    if seed is not None:
        rng = np.random.default_rng(seed)
        order = rng.permutation(len(pairs))
        pairs = [pairs[i] for i in order]
    return pairs


def make_cbow_groups(corpus: SegmentedCorpus, k: int) -> list:
    """One group per segment that has at least one in-window neighbor."""
    if k < 1:
        raise ConfigError(f"window k must be >= 1, got {k}")
    groups = []
    for lo, hi in corpus.utterance_spans:
        n = hi - lo
        for i in range(n):
            nbrs = window_neighbors(n, i, k)
            if nbrs:
                groups.append(CbowGroup(lo + i, tuple(lo + j for j in nbrs)))
    return groups


def transcripts(alignments) -> list:
    """Per-utterance token lists in time order (utterances in first-seen order)."""
    by_utt = {}
    for ali in alignments:
        by_utt.setdefault(ali.utt_id, []).append(ali)
    out = []
    for utt_id, group in by_utt.items():
        group = sorted(group, key=lambda a: a.start_frame)
        out.append([a.word for a in group])
    return out


def generate_synthetic(corpus_text, feature_dim: int = 13, len_range=(4, 9),
                       noise_sigma: float = 0.1, seed: int = 0):
    """Render token lists as synthetic utterances with known word identity.

    Each word type gets a fixed prototype frame drawn once from the seed;
    each token becomes a segment of random length in len_range whose frames
    are prototype + iid Gaussian noise. Returns (utterances, alignments).
    """
    if not corpus_text or all(len(toks) == 0 for toks in corpus_text):
        raise ConfigError("corpus_text must contain at least one token")
    lo, hi = int(len_range[0]), int(len_range[1])
    if lo < 1 or hi < lo:
        raise ConfigError(f"len_range must satisfy 1 <= lo <= hi, got ({lo}, {hi})")
    if feature_dim < 1:
        raise ConfigError(f"feature_dim must be >= 1, got {feature_dim}")
    if noise_sigma < 0:
        raise ConfigError(f"noise_sigma must be >= 0, got {noise_sigma}")

    rng = np.random.default_rng(seed)
    prototypes = {}
    for toks in corpus_text:
        for tok in toks:
            w = tok.lower()
            if w not in prototypes:
                prototypes[w] = rng.standard_normal(feature_dim)

    utterances = []
    alignments = []
    for ui, toks in enumerate(corpus_text):
        if not toks:
            raise ConfigError(f"utterance {ui} has no tokens")
        utt_id = f"synth{ui:04d}"
        pieces = []
        cursor = 0
        for tok in toks:
            w = tok.lower()
            length = int(rng.integers(lo, hi + 1))
            frames = prototypes[w] + noise_sigma * rng.standard_normal((length, feature_dim))
            pieces.append(frames)
            alignments.append(WordAlignment(utt_id, w, cursor, cursor + length))
            cursor += length
        utterances.append(Utterance(utt_id, np.concatenate(pieces, axis=0)))
    return utterances, alignments


def standardize_utterances(utterances) -> list:
    """Corpus-wide per-dimension mean/variance normalization (population
    statistics over all frames). Constant dimensions are left centered."""
    if not utterances:
        return []
    stacked = np.concatenate([u.features for u in utterances], axis=0)
    mean = stacked.mean(axis=0)
    std = stacked.std(axis=0)
    std[std == 0.0] = 1.0
    return [
        Utterance(u.utt_id, (u.features - mean) / std, u.frame_shift_ms)
        for u in utterances
    ]
