"""Rating alignment, orthogonality-weighted integration, and subset selection.

The package turns heterogeneous per-document quality scores into one
integrated rating: each rater's scale is mapped to pairwise-judge win
rates, raters are weighted by how orthogonal and how reliable they are,
and a subset is selected from the combined rating.
"""

from __future__ import annotations

from .alignment import (
    AlignmentError,
    RaterProfile,
    WinRateCurve,
    WinRatePoint,
    align_corpus,
    build_profiles,
    fit_win_rate_curve,
    intrinsic_reliability,
    profiles_from_json,
    profiles_to_json,
    reference_winrate_table,
)
from .corpus import Corpus, CorpusError, Document, RaterSpec, ScoreColumn, ingest, percentile_rank
from .integration import (
    AllRatersCollapsedError,
    IntegrationError,
    IntegrationModel,
    IntegrationParams,
    OrthogonalityGraph,
    build_graph,
    build_model,
    collapse_correlated,
    degree_centrality,
    integrated_rating,
    integrated_ratings,
    orthogonality,
    pearson,
    power_iterate,
)
from .judge import (
    COMPARE_QUALITY_TEMPLATE,
    DIMENSION_CHECK_TEMPLATE,
    PROMPT_TEMPLATES,
    ComparisonOutcome,
    EndpointJudge,
    Judge,
    JudgeCache,
    JudgeError,
    SyntheticJudge,
    render_prompt,
)
from .pipeline import ConfigError, PipelineConfig, StageError, inspect_artifact, run_pipeline
from .seeding import derive_seed
from .selection import (
    SelectionError,
    SelectionManifest,
    SelectionPlan,
    baseline_integrations,
    iteration_bound,
    progressive_select,
    sample_with_temperature,
    select,
    select_top_k,
)
from .spline import NaturalCubicSpline, SplineError
from .synthbench import (
    LatentSpec,
    SynthBenchError,
    SyntheticRater,
    default_scenario,
    evaluate,
    format_report,
    generate,
    run_ablation,
    write_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "AlignmentError",
    "AllRatersCollapsedError",
    "COMPARE_QUALITY_TEMPLATE",
    "ComparisonOutcome",
    "ConfigError",
    "Corpus",
    "CorpusError",
    "DIMENSION_CHECK_TEMPLATE",
    "Document",
    "EndpointJudge",
    "IntegrationError",
    "IntegrationModel",
    "IntegrationParams",
    "Judge",
    "JudgeCache",
    "JudgeError",
    "LatentSpec",
    "NaturalCubicSpline",
    "OrthogonalityGraph",
    "PROMPT_TEMPLATES",
    "PipelineConfig",
    "RaterProfile",
    "RaterSpec",
    "ScoreColumn",
    "SelectionError",
    "SelectionManifest",
    "SelectionPlan",
    "SplineError",
    "StageError",
    "SynthBenchError",
    "SyntheticJudge",
    "SyntheticRater",
    "WinRateCurve",
    "WinRatePoint",
    "align_corpus",
    "baseline_integrations",
    "build_graph",
    "build_model",
    "build_profiles",
    "collapse_correlated",
    "default_scenario",
    "degree_centrality",
    "derive_seed",
    "evaluate",
    "fit_win_rate_curve",
    "format_report",
    "generate",
    "ingest",
    "inspect_artifact",
    "integrated_rating",
    "integrated_ratings",
    "intrinsic_reliability",
    "iteration_bound",
    "orthogonality",
    "pearson",
    "percentile_rank",
    "power_iterate",
    "profiles_from_json",
    "profiles_to_json",
    "progressive_select",
    "reference_winrate_table",
    "render_prompt",
    "run_ablation",
    "run_pipeline",
    "sample_with_temperature",
    "select",
    "select_top_k",
    "write_scenario",
]
