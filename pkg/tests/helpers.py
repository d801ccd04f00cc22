"""Shared test substrate: independent oracles and corpus builders.

The oracles here deliberately avoid the library's own code paths (counting
ranks instead of argsort, plain Python summation instead of vectorized
numpy) so agreement with the implementation is meaningful.
"""

import math

import numpy as np

from segvec.corpus import Segment, SegmentedCorpus
from segvec.nn import Sequence


def oracle_spearman(a, b):
    """Brute-force rank-then-Pearson: O(n^2) counting ranks, direct sums."""
    def ranks(values):
        out = []
        for v in values:
            smaller = sum(1 for u in values if u < v)
            equal = sum(1 for u in values if u == v)
            out.append(smaller + (equal - 1) / 2.0 + 1.0)
        return out

    ra, rb = ranks(list(a)), ranks(list(b))
    n = len(ra)
    ma = sum(ra) / n
    mb = sum(rb) / n
    cov = sum((x - ma) * (y - mb) for x, y in zip(ra, rb))
    va = sum((x - ma) ** 2 for x in ra)
    vb = sum((y - mb) ** 2 for y in rb)
    return cov / math.sqrt(va * vb)


def oracle_pair_count(length, k):
    """Number of in-window ordered (center, context) pairs by enumeration."""
    return sum(
        1
        for n in range(length)
        for m in range(length)
        if m != n and abs(m - n) <= k
    )


def oracle_context_sizes(length, k):
    """Context count for each position by enumeration."""
    return [
        sum(1 for m in range(length) if m != n and abs(m - n) <= k)
        for n in range(length)
    ]


def oracle_word_variation(instances):
    """Mean over dimensions of the population std, in plain Python."""
    rows = [list(map(float, v)) for v in instances]
    n = len(rows)
    dim = len(rows[0])
    total = 0.0
    for d in range(dim):
        col = [r[d] for r in rows]
        mean = sum(col) / n
        var = sum((x - mean) ** 2 for x in col) / n
        total += math.sqrt(var)
    return total / dim


def random_corpus(rng, n_utts=2, words_per_utt=3, feature_dim=2, max_frames=4):
    """Segmented corpus of random segments, one distinct word per slot."""
    segments = []
    spans = []
    vocab = {}
    for u in range(n_utts):
        lo = len(segments)
        for w in range(words_per_utt):
            word = f"w{u}_{w}"
            frames = rng.standard_normal((int(rng.integers(1, max_frames + 1)), feature_dim))
            segments.append(Segment(f"u{u}", word, Sequence(frames)))
            vocab[word] = vocab.get(word, 0) + 1
        spans.append((lo, len(segments)))
    return SegmentedCorpus(segments, spans, vocab)


def two_topic_tokens(seed, min_tokens=2000, words_per_topic=10, utt_len=(6, 12)):
    """Token stream where each utterance draws from one of two word pools."""
    rng = np.random.default_rng(seed)
    topic_a = [f"a{i}" for i in range(words_per_topic)]
    topic_b = [f"b{i}" for i in range(words_per_topic)]
    token_lists = []
    total = 0
    while total < min_tokens:
        topic = topic_a if rng.random() < 0.5 else topic_b
        n = int(rng.integers(utt_len[0], utt_len[1]))
        token_lists.append([topic[int(rng.integers(words_per_topic))] for _ in range(n)])
        total += n
    return token_lists, topic_a, topic_b


def planted_benchmark_pairs(topic_a, topic_b):
    """Gold pairs: 1.0 for same-topic, 0.0 for cross-topic."""
    words = topic_a + topic_b
    pairs = []
    for i, w1 in enumerate(words):
        for w2 in words[i + 1 :]:
            same = (w1 in topic_a) == (w2 in topic_a)
            pairs.append((w1, w2, 1.0 if same else 0.0))
    return pairs
