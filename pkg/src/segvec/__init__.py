"""Semantic embeddings for spoken-word segments.

An encoder-decoder network turns variable-length acoustic feature segments
into fixed-length vectors, trained by predicting nearby segments (skipgram)
or by reconstructing a segment from its neighbors (cbow). The package also
ships a negative-sampling word2vec baseline over the transcripts and a
word-similarity evaluation pipeline.
"""

__version__ = "0.1.0"

from .corpus import (
    SegmentedCorpus,
    Utterance,
    WordAlignment,
    generate_synthetic,
    load_alignments,
    load_features,
    make_cbow_groups,
    make_skipgram_pairs,
    save_alignments,
    save_features,
    segment,
    transcripts,
)
from .errors import SegvecError
from .evaluation import (
    Benchmark,
    EmbeddingSet,
    EvalResult,
    average_instances,
    cosine,
    evaluate,
    load_benchmark,
    load_benchmark_dir,
    load_embeddings,
    load_instance_table,
    nearest_neighbors,
    save_embeddings,
    save_instance_table,
    spearman,
    variance_study,
)
from .nn import Sequence
from .speech import SegmentEmbedder, TrainConfig, embed_instances, load_model, save_model, train
from .word2vec import train_w2v

__all__ = [
    "__version__",
    "SegvecError",
    "Sequence",
    "Utterance",
    "WordAlignment",
    "SegmentedCorpus",
    "load_features",
    "save_features",
    "load_alignments",
    "save_alignments",
    "segment",
    "transcripts",
    "generate_synthetic",
    "make_skipgram_pairs",
    "make_cbow_groups",
    "TrainConfig",
    "SegmentEmbedder",
    "train",
    "embed_instances",
    "save_model",
    "load_model",
    "train_w2v",
    "EmbeddingSet",
    "Benchmark",
    "EvalResult",
    "average_instances",
    "cosine",
    "spearman",
    "evaluate",
    "variance_study",
    "nearest_neighbors",
    "save_embeddings",
    "load_embeddings",
    "save_instance_table",
    "load_instance_table",
    "load_benchmark",
    "load_benchmark_dir",
]
