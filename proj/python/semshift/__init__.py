"""Diachronic word embeddings, semantic change detection and document scoring.

The heavy lifting lives in the compiled extension; this package re-exports
its public names.
"""

from semshift._core import (
    AlignmentMap,
    CorpusSlices,
    Document,
    EmbeddingModel,
    InnovationRecord,
    PlantedWord,
    RegressionResult,
    ScoreRow,
    SemshiftError,
    SynthConfig,
    SynthResult,
    TestResult,
    TrainConfig,
    UsageScore,
    Vocabulary,
    apply_alignment,
    brute_force_usage_score,
    cameron_trivedi,
    change_score,
    exact_softmax_oracle,
    filter_candidate,
    fit_poisson,
    generate,
    ks_two_sample,
    lr_test,
    near_neighbors,
    nce_posterior,
    procrustes_align,
    quartile_bin,
    rank_innovations,
    run_pipeline,
    score_documents,
    slice,
    tokenize,
    train_nce,
    unique_token_count,
    usage_progressiveness,
)

__all__ = [
    "AlignmentMap",
    "CorpusSlices",
    "Document",
    "EmbeddingModel",
    "InnovationRecord",
    "PlantedWord",
    "RegressionResult",
    "ScoreRow",
    "SemshiftError",
    "SynthConfig",
    "SynthResult",
    "TestResult",
    "TrainConfig",
    "UsageScore",
    "Vocabulary",
    "apply_alignment",
    "brute_force_usage_score",
    "cameron_trivedi",
    "change_score",
    "exact_softmax_oracle",
    "filter_candidate",
    "fit_poisson",
    "generate",
    "ks_two_sample",
    "lr_test",
    "near_neighbors",
    "nce_posterior",
    "procrustes_align",
    "quartile_bin",
    "rank_innovations",
    "run_pipeline",
    "score_documents",
    "slice",
    "tokenize",
    "train_nce",
    "unique_token_count",
    "usage_progressiveness",
]
