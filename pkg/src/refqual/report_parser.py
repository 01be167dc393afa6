"""Star-score extraction from narrative evaluation reports.

Precedence: a stated overall score wins; otherwise the mean of the three
dimension scores (originality, significance, rigour); otherwise the report
joins the unresolved queue for manual adjudication. The labelled fixture
corpus under tests/ is the executable specification of this grammar.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping

from .errors import DataError
from .gateway import RawReport

log = logging.getLogger(__name__)

# A star value: "3*", "3 stars", "3.5*", or a bare number next to a label.
_VALUE = r"(\d+(?:\.\d+)?)\s*(?:\*+|stars?\b)?"
_SEP = r"(?:\s*(?::|-|–|=|\bis\b|\bof\b)\s*|\s+)"
# A short run of plain words may sit between "overall" and its value
# ("Overall this article is 3*"); punctuation breaks the bridge.
_GAP = r"(?:\s+[A-Za-z]+){0,3}?"

_OVERALL_RE = re.compile(
    rf"\b(?:overall(?:\s+(?:score|rating|assessment|quality))?|final\s+score){_GAP}{_SEP}{_VALUE}",
    re.IGNORECASE,
)
_DIM_RES = {
    "originality": re.compile(rf"\boriginality{_SEP}{_VALUE}", re.IGNORECASE),
    "significance": re.compile(rf"\bsignificance{_SEP}{_VALUE}", re.IGNORECASE),
    "rigour": re.compile(rf"\brigou?r{_SEP}{_VALUE}", re.IGNORECASE),
}

NO_SCORE_TOKENS = frozenset({"no score", "noscore", "none", "n"})


class Method(Enum):
    OVERALL_STATED = "OverallStated"
    DIMENSION_MEAN = "DimensionMean"
    MANUAL = "Manual"


@dataclass(frozen=True)
class ParsedScore:
    article_id: str
    model_id: str
    run_index: int
    resolved: float
    method: Method
    overall: float | None = None
    dims: tuple[float, float, float] | None = None

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.article_id, self.model_id, self.run_index)


@dataclass(frozen=True)
class Unresolved:
    """A report the grammar could not score; queued for manual resolution."""

    article_id: str
    model_id: str
    run_index: int
    report_text: str

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.article_id, self.model_id, self.run_index)


@dataclass(frozen=True)
class ManualDiscard:
    """A manually adjudicated report that genuinely contains no score."""

    article_id: str
    model_id: str
    run_index: int
    reason: str = "no score given"


def _clamp(value: float) -> float:
    return min(4.0, max(1.0, value))


def parse_report(report: RawReport) -> ParsedScore | Unresolved:
    """Extract the star score from one report under the precedence rules.

    Fractional stated values such as ``3.5*`` are accepted verbatim;
    values outside [1, 4] are clamped. A report yielding neither an
    overall nor all three dimension scores becomes ``Unresolved``.
    """
    text = report.report_text
    if not text or not text.strip():
        raise DataError(f"empty report text for {report.key}")
    # Markdown bold markers would split "Overall" from its value; plain '*'
    # stays because it is star notation.
    cleaned = text.replace("**", "")

    overall_match = _OVERALL_RE.search(cleaned)
    dims_found: dict[str, float] = {}
    for name, pattern in _DIM_RES.items():
        m = pattern.search(cleaned)
        if m:
            dims_found[name] = _clamp(float(m.group(1)))
    dims = None
    if len(dims_found) == 3:
        dims = (dims_found["originality"], dims_found["significance"], dims_found["rigour"])

    if overall_match:
        overall = _clamp(float(overall_match.group(1)))
        return ParsedScore(
            article_id=report.article_id,
            model_id=report.model_id,
            run_index=report.run_index,
            resolved=overall,
            method=Method.OVERALL_STATED,
            overall=overall,
            dims=dims,
        )
    if dims is not None:
        return ParsedScore(
            article_id=report.article_id,
            model_id=report.model_id,
            run_index=report.run_index,
            resolved=math.fsum(dims) / 3.0,
            method=Method.DIMENSION_MEAN,
            dims=dims,
        )
    return Unresolved(
        article_id=report.article_id,
        model_id=report.model_id,
        run_index=report.run_index,
        report_text=text,
    )


def resolve_manually(item: Unresolved, entry: str | float) -> ParsedScore | ManualDiscard:
    """Apply a human adjudication to one unresolved report.

    ``entry`` is either a score in [1, 4] or a no-score token; anything
    else raises so the calling prompt loop can re-ask.
    """
    if isinstance(entry, str) and entry.strip().lower() in NO_SCORE_TOKENS:
        return ManualDiscard(item.article_id, item.model_id, item.run_index)
    try:
        value = float(entry)
    except (TypeError, ValueError):
        raise DataError(f"cannot interpret manual entry {entry!r} as a score") from None
    if not 1.0 <= value <= 4.0:
        raise DataError(f"manual score {value} outside [1, 4]")
    return ParsedScore(
        article_id=item.article_id,
        model_id=item.model_id,
        run_index=item.run_index,
        resolved=value,
        method=Method.MANUAL,
    )


@dataclass(frozen=True)
class RunAverages:
    """Per-article mean scores for one model, with short-count flags."""

    model_id: str
    means: Mapping[str, float]
    run_counts: Mapping[str, int]
    short_counted: frozenset[str]


def average_runs(scores: Iterable[ParsedScore], expected_runs: int | None = None) -> RunAverages:
    """Arithmetic mean of resolved scores per article for one model.

    Articles with fewer than ``expected_runs`` available runs are averaged
    over what exists and flagged.
    """
    by_article: dict[str, list[ParsedScore]] = {}
    model_ids: set[str] = set()
    seen: set[tuple[str, str, int]] = set()
    for score in scores:
        if score.key in seen:
            raise DataError(f"duplicate parsed score for {score.key}")
        seen.add(score.key)
        model_ids.add(score.model_id)
        by_article.setdefault(score.article_id, []).append(score)
    if not by_article:
        raise DataError("average_runs: no scores supplied")
    if len(model_ids) != 1:
        raise DataError(f"average_runs expects one model, got {sorted(model_ids)}")
    means = {
        aid: math.fsum(s.resolved for s in group) / len(group)
        for aid, group in by_article.items()
    }
    run_counts = {aid: len(group) for aid, group in by_article.items()}
    short = frozenset(
        aid for aid, n in run_counts.items() if expected_runs is not None and n < expected_runs
    )
    if short:
        log.warning(
            "average_runs(%s): %d article(s) averaged over fewer than %s runs",
            next(iter(model_ids)),
            len(short),
            expected_runs,
        )
    return RunAverages(
        model_id=next(iter(model_ids)),
        means=means,
        run_counts=run_counts,
        short_counted=short,
    )


def combine_models(mean_a: Mapping[str, float], mean_b: Mapping[str, float]) -> dict[str, float]:
    """Per-article mean of two models' mean scores, over their intersection."""
    common = set(mean_a) & set(mean_b)
    if not common:
        raise DataError("combine_models: the two score maps share no articles")
    dropped = (set(mean_a) | set(mean_b)) - common
    if dropped:
        log.warning("combine_models: %d article(s) present in only one map, dropped", len(dropped))
    return {aid: (mean_a[aid] + mean_b[aid]) / 2.0 for aid in common}
