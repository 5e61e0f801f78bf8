from .coherence import lexical_next_sentence_probability, semantic_coherence
from .fusion import FusionPair, distance_histogram, find_fusion_pairs, pairs_to_csv
from .importance import ImportanceTrace, importance_trace
from .locality import LocalityCurve, TfidfSentenceEmbedder, VectorFileEmbedder, locality_curve
from .memory import MemoryReport, counting_model, measure, memory_bench, reports_to_csv

__all__ = [
    "FusionPair",
    "ImportanceTrace",
    "LocalityCurve",
    "MemoryReport",
    "TfidfSentenceEmbedder",
    "VectorFileEmbedder",
    "counting_model",
    "distance_histogram",
    "find_fusion_pairs",
    "importance_trace",
    "lexical_next_sentence_probability",
    "locality_curve",
    "measure",
    "memory_bench",
    "pairs_to_csv",
    "reports_to_csv",
    "semantic_coherence",
]
