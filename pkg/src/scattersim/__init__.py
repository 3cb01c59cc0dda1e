"""Timbre similarity search from spectrotemporal modulation features.

The package computes joint time-frequency scattering features of isolated
musical notes, compresses them with a median-based logarithm, learns a
large-margin nearest-neighbor (LMNN) metric against human free-sorting
judgments, and answers ranked query-by-example searches.
"""

from .audio import AudioClip, read_wav, write_wav
from .config import AnalysisConfig, LmnnConfig, RunConfig
from .corpus import (IMT, Corpus, CorpusEntry, expand_clusters,
                     parse_imt_name, render_imt_name, scan_corpus,
                     split_corpus)
from .features import (FeatureStore, Gaussianizer, apply_gaussianizer,
                       build_store, fit_gaussianizer)
from .metric import MetricMatrix, metric_distance, train_lmnn
from .mfcc import mfcc, mfcc_gram
from .perceptual import (Annotation, ClusterGraph, annotation_to_graph,
                         build_hypergraph, partition_hypergraph)
from .retrieval import EvalReport, RankedResult, evaluate, knn_query
from .scalogram import Scalogram, scalogram
from .scattering import (rate_scale_slice, scattering_vector,
                         separable_scattering)
from .synth import Prototype, make_synthetic_corpus

__all__ = [
    "AnalysisConfig", "LmnnConfig", "RunConfig",
    "AudioClip", "read_wav", "write_wav",
    "IMT", "Corpus", "CorpusEntry", "parse_imt_name", "render_imt_name",
    "scan_corpus", "expand_clusters", "split_corpus",
    "FeatureStore", "Gaussianizer", "build_store", "fit_gaussianizer",
    "apply_gaussianizer",
    "MetricMatrix", "train_lmnn", "metric_distance",
    "mfcc", "mfcc_gram",
    "Annotation", "ClusterGraph", "annotation_to_graph",
    "build_hypergraph", "partition_hypergraph",
    "RankedResult", "EvalReport", "knn_query", "evaluate",
    "Scalogram", "scalogram",
    "scattering_vector", "separable_scattering", "rate_scale_slice",
    "Prototype", "make_synthetic_corpus",
]

__version__ = "0.1.0"
