"""Embedding persistence, similarity scoring, and analysis.

Covers cosine similarity, Spearman rank correlation against human-rated
word-pair benchmarks, per-word instance averaging, the instance-variation
study, nearest-neighbor queries, and the text file formats for embeddings
and benchmarks.

Embedding file format: first line ``<count> <dim>``, then one line per word
``<word> <v1> ... <vdim>``. The averaged-embedding reader requires unique
words; the instance-table reader permits repeats (one line per instance, in
corpus order).
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    CoverageError,
    DataError,
    ParseError,
    UndefinedCorrelationError,
    UndefinedSimilarityError,
    UnknownWordError,
)

__all__ = [
    "EmbeddingSet",
    "Benchmark",
    "EvalResult",
    "BucketStats",
    "VarianceReport",
    "VARIANCE_BUCKETS",
    "average_instances",
    "cosine",
    "spearman",
    "evaluate",
    "variance_study",
    "word_variation",
    "nearest_neighbors",
    "save_embeddings",
    "load_embeddings",
    "save_instance_table",
    "load_instance_table",
    "load_benchmark",
    "load_benchmark_dir",
]


class EmbeddingSet:
    """word -> fixed-length vector, with lowercase unique keys."""

    def __init__(self, vectors, dim: int | None = None):
        self.vectors: dict = {}
        self.dim = dim
        items = vectors.items() if hasattr(vectors, "items") else vectors
        for word, vec in items:
            self.add(word, vec)
        if self.dim is None:
            raise DataError("cannot build an empty embedding set without an explicit dim")

    def add(self, word: str, vec) -> None:
        vec = np.asarray(vec, dtype=np.float64)
        if vec.ndim != 1:
            raise DataError(f"embedding for {word!r} must be 1-D, got shape {vec.shape}")
        if self.dim is None:
            self.dim = vec.shape[0]
        elif vec.shape[0] != self.dim:
            raise DataError(
                f"embedding for {word!r} has dim {vec.shape[0]}, expected {self.dim}"
            )
        if not np.isfinite(vec).all():
            raise DataError(f"embedding for {word!r} contains non-finite values")
        key = word.lower()
        if key in self.vectors:
            raise DataError(f"duplicate word {key!r}")
        self.vectors[key] = vec

    def __len__(self):
        return len(self.vectors)

    def __contains__(self, word):
        return word.lower() in self.vectors

    def __getitem__(self, word):
        key = word.lower()
        if key not in self.vectors:
            raise UnknownWordError(f"word {key!r} not in embedding set")
        return self.vectors[key]

    def words(self):
        return list(self.vectors)

    def items(self):
        return self.vectors.items()


@dataclass
class Benchmark:
    name: str
    pairs: list  # (word1, word2, human_score)


@dataclass
class EvalResult:
    name: str
    rho: float
    pairs_used: int
    pairs_skipped: int


@dataclass
class BucketStats:
    label: str
    lo: int
    hi: int | None
    word_count: int
    mean_variation: float | None


@dataclass
class VarianceReport:
    buckets: list


VARIANCE_BUCKETS = ((5, 99), (100, 999), (1000, 9999), (10000, None))


def average_instances(table: dict) -> EmbeddingSet:
    """Arithmetic mean of each word's instance vectors."""
    if not table:
        raise DataError("instance table is empty")
    dim = None
    out = {}
    for word, instances in table.items():
        if not instances:
            raise DataError(f"word {word!r} has no instance vectors")
        try:
            mat = np.asarray(instances, dtype=np.float64)
        except ValueError:
            raise DataError(f"instances of {word!r} have inconsistent dimensions")
        if mat.ndim != 2:
            raise DataError(f"instances of {word!r} have inconsistent dimensions")
        if dim is None:
            dim = mat.shape[1]
        elif mat.shape[1] != dim:
            raise DataError(
                f"instances of {word!r} have dim {mat.shape[1]}, expected {dim}"
            )
        out[word] = mat.mean(axis=0)
    return EmbeddingSet(out)


def cosine(u, v) -> float:
    """u . v / (|u| |v|); undefined when either norm is zero."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DataError(f"vector shapes differ: {u.shape} vs {v.shape}")
    uu = float(u @ u)
    vv = float(v @ v)
    if uu == 0.0 or vv == 0.0:
        raise UndefinedSimilarityError("cosine undefined for a zero-norm vector")
    return float(u @ v) / float(np.sqrt(uu * vv))


def _fractional_ranks(values: np.ndarray) -> np.ndarray:
    """Ranks starting at 1; tied values share the average of their span."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    i = 0
    n = len(values)
    while i < n:
        j = i
        while j + 1 < n and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(a, b) -> float:
    """Pearson correlation of fractional ranks."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DataError(f"inputs must be equal-length 1-D lists, got {a.shape} vs {b.shape}")
    if len(a) < 2:
        raise DataError(f"need at least 2 observations, got {len(a)}")
    ra = _fractional_ranks(a)
    rb = _fractional_ranks(b)
    da = ra - ra.mean()
    db = rb - rb.mean()
    var_a = float(da @ da)
    var_b = float(db @ db)
    if var_a == 0.0 or var_b == 0.0:
        raise UndefinedCorrelationError("rank correlation undefined for a constant list")
    return float(da @ db) / float(np.sqrt(var_a * var_b))


def evaluate(embeddings: EmbeddingSet, benchmark: Benchmark) -> EvalResult:
    """Spearman rho between model cosines and human scores.

    Pairs with a missing word or an undefined cosine are skipped and
    counted, never substituted.
    """
    model_scores = []
    human_scores = []
    skipped = 0
    for w1, w2, score in benchmark.pairs:
        if w1 not in embeddings or w2 not in embeddings:
            skipped += 1
            continue
        try:
            sim = cosine(embeddings[w1], embeddings[w2])
        except UndefinedSimilarityError:
            skipped += 1
            continue
        model_scores.append(sim)
        human_scores.append(score)
    used = len(model_scores)
    if used < 2:
        raise CoverageError(
            f"benchmark {benchmark.name!r}: only {used} of {len(benchmark.pairs)} "
            f"pairs covered by the embedding vocabulary",
            pairs_used=used,
            pairs_skipped=skipped,
        )
    return EvalResult(benchmark.name, spearman(model_scores, human_scores), used, skipped)


def word_variation(instances) -> float:
    """Mean over dimensions of the population standard deviation across a
    word's instance vectors."""
    mat = np.asarray(instances, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[0] < 1:
        raise DataError("instances must form a non-empty 2-D array")
    return float(mat.std(axis=0).mean())


def variance_study(table: dict, min_count: int = 5) -> VarianceReport:
    """Bucket words by instance count and average their variation.

    Words with fewer than min_count instances are excluded entirely.
    """
    if not table:
        raise DataError("instance table is empty")
    sums = [0.0 for _ in VARIANCE_BUCKETS]
    counts = [0 for _ in VARIANCE_BUCKETS]
    for word, instances in table.items():
        n = len(instances)
        if n < min_count:
            continue
        m_w = word_variation(instances)
        for bi, (lo, hi) in enumerate(VARIANCE_BUCKETS):
            if n >= lo and (hi is None or n <= hi):
                sums[bi] += m_w
                counts[bi] += 1
                break
    buckets = []
    for (lo, hi), total, count in zip(VARIANCE_BUCKETS, sums, counts):
        label = f"{lo}-{hi}" if hi is not None else f">={lo}"
        mean = total / count if count else None
        buckets.append(BucketStats(label, lo, hi, count, mean))
    return VarianceReport(buckets)


def nearest_neighbors(embeddings: EmbeddingSet, word: str, top_n: int) -> list:
    """Other words ranked by descending cosine; ties break lexicographically."""
    if top_n < 0:
        raise ConfigError(f"top_n must be >= 0, got {top_n}")
    query = embeddings[word]  # raises UnknownWordError
    key = word.lower()
    scored = []
    for other, vec in embeddings.items():
        if other == key:
            continue
        try:
            scored.append((other, cosine(query, vec)))
        except UndefinedSimilarityError:
            continue
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored[:top_n]


def _fmt(x: float) -> str:
    return repr(float(x))


def save_embeddings(embeddings: EmbeddingSet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(embeddings)} {embeddings.dim}\n")
        for word, vec in embeddings.items():
            fh.write(word + " " + " ".join(_fmt(v) for v in vec) + "\n")


def _parse_embedding_lines(path):
    """Yield (line_number, word, vector) for each body line; validates the
    header count and per-line dimensionality."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.readlines()
    if not lines or not lines[0].strip():
        raise ParseError("missing '<count> <dim>' header", path=path, line=1)
    head = lines[0].split()
    if len(head) != 2:
        raise ParseError(f"expected '<count> <dim>' header, got {lines[0].strip()!r}",
                         path=path, line=1)
    try:
        count = int(head[0])
        dim = int(head[1])
    except ValueError:
        raise ParseError(f"non-integer header {lines[0].strip()!r}", path=path, line=1)
    if count < 0 or dim < 1:
        raise ParseError(f"invalid header values {count} x {dim}", path=path, line=1)
    body = [(no, ln) for no, ln in enumerate(lines[1:], 2) if ln.strip()]
    if len(body) != count:
        raise ParseError(f"header says {count} entries but file has {len(body)}",
                         path=path, line=1)
    entries = []
    for no, ln in body:
        parts = ln.split()
        if len(parts) != dim + 1:
            raise ParseError(f"expected a word and {dim} values, got {len(parts)} fields",
                             path=path, line=no)
        try:
            vec = np.array([float(v) for v in parts[1:]])
        except ValueError:
            raise ParseError("non-numeric embedding value", path=path, line=no)
        if not np.isfinite(vec).all():
            raise ParseError("non-finite embedding value", path=path, line=no)
        entries.append((no, parts[0].lower(), vec))
    return dim, entries


def load_embeddings(path) -> EmbeddingSet:
    dim, entries = _parse_embedding_lines(path)
    out = EmbeddingSet({}, dim=dim)
    for no, word, vec in entries:
        if word in out:
            raise ParseError(f"duplicate word {word!r}", path=path, line=no)
        out.add(word, vec)
    return out


def save_instance_table(table: dict, path, dim: int | None = None) -> None:
    """Instance embeddings in the embedding format with repeated word keys,
    one line per instance, order preserved."""
    rows = [(w, vec) for w, instances in table.items() for vec in instances]
    if dim is None:
        if not rows:
            raise DataError("cannot infer dim for an empty instance table")
        dim = len(rows[0][1])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(rows)} {dim}\n")
        for word, vec in rows:
            if len(vec) != dim:
                raise DataError(f"instance of {word!r} has dim {len(vec)}, expected {dim}")
            fh.write(word + " " + " ".join(_fmt(v) for v in vec) + "\n")


def load_instance_table(path) -> dict:
    _, entries = _parse_embedding_lines(path)
    table: dict = {}
    for _, word, vec in entries:
        table.setdefault(word, []).append(vec)
    return table


def load_benchmark(path, name: str | None = None) -> Benchmark:
    """Word-pair/score lines, whitespace or tab separated; '#' comments."""
    if name is None:
        name = os.path.splitext(os.path.basename(path))[0]
    pairs = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            parts = stripped.split()
            if len(parts) != 3:
                raise ParseError(f"expected '<word1> <word2> <score>', got {stripped!r}",
                                 path=path, line=lineno)
            try:
                score = float(parts[2])
            except ValueError:
                raise ParseError(f"non-numeric score {parts[2]!r}", path=path, line=lineno)
            if not np.isfinite(score):
                raise ParseError(f"non-finite score {parts[2]!r}", path=path, line=lineno)
            pairs.append((parts[0].lower(), parts[1].lower(), score))
    if not pairs:
        raise ParseError("benchmark file has no pairs", path=path, line=1)
    return Benchmark(name, pairs)


def load_benchmark_dir(path) -> list:
    """All non-hidden files in the directory, named by filename stem."""
    if not os.path.isdir(path):
        raise ConfigError(f"benchmark directory {path!r} does not exist")
    names = sorted(
        entry for entry in os.listdir(path)
        if not entry.startswith(".") and os.path.isfile(os.path.join(path, entry))
    )
    return [load_benchmark(os.path.join(path, entry)) for entry in names]
