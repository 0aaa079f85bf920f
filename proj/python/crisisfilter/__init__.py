"""Perceptual-hash deduplication, relevancy filtering and evaluation for
crisis image streams."""

from ._core import (
    HashWindow,
    Model,
    auc_pr,
    cli,
    decode_image,
    encode_image,
    evaluate,
    extract_features,
    generate_corpus,
    hamming,
    permutation_test,
    phash,
    phash_file,
    read_image,
    run_pipeline,
    to_hex,
    train,
    tune_threshold,
)

__all__ = [
    "HashWindow",
    "Model",
    "auc_pr",
    "cli",
    "decode_image",
    "encode_image",
    "evaluate",
    "extract_features",
    "generate_corpus",
    "hamming",
    "permutation_test",
    "phash",
    "phash_file",
    "read_image",
    "run_pipeline",
    "to_hex",
    "train",
    "tune_threshold",
]

__version__ = "0.1.0"
