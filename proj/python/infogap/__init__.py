from ._core import (
    ConfigError,
    DomainError,
    InfogapError,
    InputError,
    __version__,
    bottleneck,
    fit_gam,
    geodesic_distances,
    hash_embed,
    hdbscan,
    icc_from_components,
    permutation_test,
    rips_persistence,
    run_pipeline,
    segment_novel,
    spearman,
    split_sentences,
    wasserstein,
    window_spans,
)

__all__ = [
    "ConfigError",
    "DomainError",
    "InfogapError",
    "InputError",
    "__version__",
    "bottleneck",
    "fit_gam",
    "geodesic_distances",
    "hash_embed",
    "hdbscan",
    "icc_from_components",
    "permutation_test",
    "rips_persistence",
    "run_pipeline",
    "segment_novel",
    "spearman",
    "split_sentences",
    "wasserstein",
    "window_spans",
]
