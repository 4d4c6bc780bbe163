"""Auto-tuning of LLVM new pass manager pipelines."""

from ._core import (
    MockBackend,
    NpmtuneError,
    PassRegistry,
    aggregate,
    default_registry,
    format_pipeline,
    leaf_sequence,
    load_registry,
    load_registry_file,
    mine,
    overoz,
    refine,
    schedule,
    search,
    validate_pipeline,
)

__all__ = [
    "MockBackend",
    "NpmtuneError",
    "PassRegistry",
    "aggregate",
    "default_registry",
    "format_pipeline",
    "leaf_sequence",
    "load_registry",
    "load_registry_file",
    "mine",
    "overoz",
    "refine",
    "schedule",
    "search",
    "validate_pipeline",
]
