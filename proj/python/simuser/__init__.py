"""Simulated users for recommender evaluation.

The heavy lifting lives in the compiled ``_core`` module; paths may be
``str`` or ``pathlib.Path``.
"""

from ._core import (
    SimuserError,
    blend,
    classification_metrics,
    engagement_metrics,
    error_metrics,
    load_config,
    load_dataset,
    paired_t_test,
    path_count,
    pathsim,
    pickiness,
    ranking_metrics,
    report,
    run,
    split,
    task,
)

__all__ = [
    "SimuserError",
    "blend",
    "classification_metrics",
    "engagement_metrics",
    "error_metrics",
    "load_config",
    "load_dataset",
    "paired_t_test",
    "path_count",
    "pathsim",
    "pickiness",
    "ranking_metrics",
    "report",
    "run",
    "split",
    "task",
]

__version__ = "0.1.0"
