"""Post-hoc analytics: statistics kernel, embedding geometry, and tables."""

from .geometry import (
    Trajectory,
    build_trajectory,
    centroid,
    cosine_distance,
    embedding_diagnostics,
    pca_project,
    trajectory_drift,
)
from .stats import (
    StatResult,
    cohens_d,
    rank_correlation,
    rankdata,
    t_two_sided_p,
    wilcoxon_signed_rank,
)
from .tables import (
    CrosstabResult,
    HypothesisOutcome,
    crosstab_trigger_drift,
    quadrant_analysis,
    window_dynamics,
)

__all__ = [
    "CrosstabResult",
    "HypothesisOutcome",
    "StatResult",
    "Trajectory",
    "build_trajectory",
    "centroid",
    "cohens_d",
    "cosine_distance",
    "crosstab_trigger_drift",
    "embedding_diagnostics",
    "pca_project",
    "quadrant_analysis",
    "rank_correlation",
    "rankdata",
    "t_two_sided_p",
    "trajectory_drift",
    "wilcoxon_signed_rank",
    "window_dynamics",
]
