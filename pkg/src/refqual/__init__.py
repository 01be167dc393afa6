"""Research-quality indicator pipeline.

Scores journal articles with a pluggable LLM backend under REF-derived
evaluator prompts, computes field/year-normalised citation indicators,
and compares both indicator families against departmental-average gold
scores with rank correlations, bootstrap intervals, and a cost-efficiency
analysis of model mixes.
"""

from .analysis import (
    BootstrapInterval,
    CorrelationResult,
    TheoreticalMax,
    bootstrap_ci,
    ci_overlap,
    mean_score_summary,
    per_uoa_correlations,
    per_year_trend,
    scale_to_max,
    spearman,
    weighted_mean_correlation,
)
from .corpus import (
    Article,
    Corpus,
    DepartmentProfile,
    attach_gold_scores,
    departmental_mean,
    filter_short_abstracts,
    load_corpus,
    save_corpus,
)
from .costmodel import ComboPoint, cost_curve, pareto_front
from .errors import (
    BackendError,
    DataError,
    DegenerateDataError,
    FatalBackendError,
    RefqualError,
    TransientBackendError,
)
from .gateway import (
    MockBackend,
    MockModelBehavior,
    ModelSpec,
    RawReport,
    RunLedger,
    ScoreCache,
    ScoreRequest,
    mock_generate,
    schedule_runs,
    submit,
)
from .indicators import (
    CitationRecord,
    FieldYearReference,
    NlcsValue,
    batch_nlcs,
    build_reference,
    nlcs,
)
from .prompts import PromptPair, UoaGroup, build_prompt, group_for_uoa, system_prompt
from .report_parser import (
    ManualDiscard,
    Method,
    ParsedScore,
    Unresolved,
    average_runs,
    combine_models,
    parse_report,
    resolve_manually,
)

__version__ = "0.1.0"
