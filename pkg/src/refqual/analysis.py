"""Rank-correlation analysis of quality indicators against gold scores.

Spearman correlation with average ranks for ties, seeded percentile
bootstrap intervals over article resamples, per-UoA tables with a pooled
row, scaling by the theoretical maximum, article-weighted cross-UoA
aggregation, per-year trends, and mean-score summaries.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .corpus import Corpus
from .errors import DataError, DegenerateDataError

log = logging.getLogger(__name__)

ALL_UOAS = "ALL"


def average_ranks(values: np.ndarray | Sequence[float]) -> np.ndarray:
    """Fractional ranks starting at 1, ties sharing the mean of their positions.

    Accepts a 1-D vector or a 2-D array whose rows are ranked independently.
    """
    arr = np.asarray(values, dtype=float)
    one_d = arr.ndim == 1
    rows = arr[np.newaxis, :] if one_d else arr
    if rows.ndim != 2:
        raise DataError("average_ranks expects a 1-D or 2-D array")
    n = rows.shape[1]
    order = np.argsort(rows, axis=1, kind="stable")
    sorted_rows = np.take_along_axis(rows, order, axis=1)
    first = np.ones(rows.shape, dtype=bool)
    first[:, 1:] = sorted_rows[:, 1:] != sorted_rows[:, :-1]
    last = np.ones(rows.shape, dtype=bool)
    last[:, :-1] = first[:, 1:]
    pos = np.arange(n)
    start = np.maximum.accumulate(np.where(first, pos, 0), axis=1)
    end = np.minimum.accumulate(np.where(last, pos, n - 1)[:, ::-1], axis=1)[:, ::-1]
    ranks_sorted = (start + end) / 2.0 + 1.0
    ranks = np.empty_like(rows)
    np.put_along_axis(ranks, order, ranks_sorted, axis=1)
    return ranks[0] if one_d else ranks


def _pearson_rows(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Row-wise Pearson correlation; degenerate rows come back as NaN."""
    xc = x - x.mean(axis=1, keepdims=True)
    yc = y - y.mean(axis=1, keepdims=True)
    num = np.einsum("ij,ij->i", xc, yc)
    den = np.sqrt(np.einsum("ij,ij->i", xc, xc) * np.einsum("ij,ij->i", yc, yc))
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, num / den, np.nan)


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman rank correlation with average ranks for ties."""
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if xa.ndim != 1 or ya.ndim != 1 or xa.shape != ya.shape:
        raise DataError("spearman expects two equal-length vectors")
    if xa.size < 2:
        raise DataError(f"spearman needs n >= 2, got n = {xa.size}")
    if np.all(xa == xa[0]) or np.all(ya == ya[0]):
        raise DegenerateDataError("spearman undefined on a constant vector")
    rho = _pearson_rows(average_ranks(xa)[np.newaxis, :], average_ranks(ya)[np.newaxis, :])[0]
    return float(rho)


class BootstrapInterval(NamedTuple):
    low: float
    high: float
    degenerate_redraws: int


def bootstrap_ci(
    x: Sequence[float],
    y: Sequence[float],
    level: float = 0.95,
    resamples: int = 1000,
    seed: int = 0,
    max_redraws: int = 100,
) -> BootstrapInterval:
    """Percentile bootstrap interval for the Spearman correlation.

    Article pairs are resampled jointly with replacement; each resample's
    index vector comes from its own child of the master seed, so the
    result is deterministic and independent of evaluation order. A
    resample with a constant side is redrawn from the same child stream,
    at most ``max_redraws`` times before the data is declared too close to
    constant.
    """
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if xa.shape != ya.shape or xa.ndim != 1:
        raise DataError("bootstrap_ci expects two equal-length vectors")
    n = xa.size
    if n < 2:
        raise DataError(f"bootstrap_ci needs n >= 2, got n = {n}")
    if not 0.0 < level < 1.0:
        raise DataError(f"confidence level must be in (0, 1), got {level}")
    if resamples < 1:
        raise DataError(f"resamples must be >= 1, got {resamples}")
    if n < 10:
        log.warning("bootstrap_ci: n = %d is small; intervals will be unstable", n)

    children = np.random.SeedSequence(seed).spawn(resamples)
    idx = np.empty((resamples, n), dtype=np.intp)
    for i, child in enumerate(children):
        idx[i] = np.random.default_rng(child).integers(0, n, size=n)

    def rhos_for(index_matrix: np.ndarray) -> np.ndarray:
        rx = average_ranks(xa[index_matrix])
        ry = average_ranks(ya[index_matrix])
        return _pearson_rows(rx, ry)

    rhos = rhos_for(idx)
    redraws = 0
    bad = np.flatnonzero(np.isnan(rhos))
    for i in bad:
        rng = np.random.default_rng(children[i])
        rng.integers(0, n, size=n)  # skip the draw already used
        for _ in range(max_redraws):
            redraws += 1
            row = rng.integers(0, n, size=n)
            rho = rhos_for(row[np.newaxis, :])[0]
            if not math.isnan(rho):
                rhos[i] = rho
                break
        else:
            raise DegenerateDataError(
                "bootstrap_ci: redraw budget exhausted; data is nearly constant"
            )
    alpha = (1.0 - level) / 2.0
    low, high = np.quantile(rhos, [alpha, 1.0 - alpha])
    return BootstrapInterval(float(low), float(high), redraws)


@dataclass(frozen=True)
class CorrelationResult:
    """Spearman rho with bootstrap CI for one (indicator, UoA) pair."""

    indicator_id: str
    uoa: int | str
    n: int
    rho: float
    ci_low: float
    ci_high: float
    scaled_rho: float | None = None


@dataclass(frozen=True)
class TheoreticalMax:
    """Ceiling correlation for one UoA, supplied as input data."""

    uoa: int
    rho_max: float

    def __post_init__(self) -> None:
        if not 0.0 < self.rho_max <= 1.0:
            raise DataError(f"uoa {self.uoa}: rho_max must be in (0, 1], got {self.rho_max}")


def per_uoa_correlations(
    indicator: Mapping[str, float],
    gold: Mapping[str, float],
    corpus: Corpus,
    indicator_id: str = "indicator",
    level: float = 0.95,
    resamples: int = 1000,
    seed: int = 0,
) -> list[CorrelationResult]:
    """One correlation row per UoA over the indicator/gold intersection.

    UoAs with fewer than two paired articles, or with a constant side, are
    skipped with a warning. A pooled ``ALL`` row is appended whenever at
    least two UoAs contributed.
    """
    common = set(indicator) & set(gold)
    by_uoa: dict[int, list[str]] = {}
    for article in corpus.articles:
        if article.article_id in common:
            by_uoa.setdefault(article.uoa, []).append(article.article_id)
    results: list[CorrelationResult] = []
    contributed = 0
    pooled: list[str] = []
    for uoa in sorted(by_uoa):
        ids = sorted(by_uoa[uoa])
        pooled.extend(ids)
        if len(ids) < 2:
            log.warning("%s / uoa %s: fewer than 2 paired articles, skipped", indicator_id, uoa)
            continue
        x = [indicator[a] for a in ids]
        y = [gold[a] for a in ids]
        try:
            rho = spearman(x, y)
        except DegenerateDataError as exc:
            log.warning("%s / uoa %s: %s, skipped", indicator_id, uoa, exc)
            continue
        ci = bootstrap_ci(x, y, level=level, resamples=resamples, seed=seed)
        results.append(CorrelationResult(indicator_id, uoa, len(ids), rho, ci.low, ci.high))
        contributed += 1
    if contributed >= 2:
        x = [indicator[a] for a in pooled]
        y = [gold[a] for a in pooled]
        rho = spearman(x, y)
        ci = bootstrap_ci(x, y, level=level, resamples=resamples, seed=seed)
        results.append(CorrelationResult(indicator_id, ALL_UOAS, len(pooled), rho, ci.low, ci.high))
    return results


def scale_to_max(result: CorrelationResult, maximum: TheoreticalMax | None) -> CorrelationResult:
    """Divide rho by the UoA's ceiling correlation, deliberately unclamped.

    Ratios above 1 are meaningful (they flag departmental bias), so they
    are reported as-is. A missing ceiling leaves the row unscaled.
    """
    if maximum is None:
        log.warning("no theoretical maximum for uoa %s; row left unscaled", result.uoa)
        return result
    return replace(result, scaled_rho=result.rho / maximum.rho_max)


def scale_results(
    results: Iterable[CorrelationResult],
    maxima: Mapping[int, TheoreticalMax],
) -> list[CorrelationResult]:
    """Scale every per-UoA row; the pooled ALL row has no single ceiling."""
    scaled = []
    for result in results:
        if result.uoa == ALL_UOAS:
            scaled.append(result)
        else:
            scaled.append(scale_to_max(result, maxima.get(int(result.uoa))))
    return scaled


def weighted_mean_correlation(rhos: Sequence[float], weights: Sequence[float]) -> float:
    """Weighted mean of correlations, weights being per-UoA article counts."""
    if len(rhos) != len(weights):
        raise DataError("weighted_mean_correlation: mismatched lengths")
    if not rhos:
        raise DataError("weighted_mean_correlation: no correlations supplied")
    if any(w < 0 for w in weights):
        raise DataError("weighted_mean_correlation: negative weight")
    total = math.fsum(weights)
    if total <= 0:
        raise DegenerateDataError("weighted_mean_correlation: all weights are zero")
    if len(rhos) == 1:
        return float(rhos[0])
    return math.fsum(w * r for w, r in zip(weights, rhos)) / total


def grouped_weighted_rho(
    indicator: Mapping[str, float],
    gold: Mapping[str, float],
    groups: Mapping[int, Sequence[str]],
) -> tuple[float, int] | None:
    """Article-count-weighted mean of per-group Spearman correlations.

    Groups that are too small or degenerate are skipped; returns None when
    nothing survives. Shared by the year-trend and cost-curve paths.
    """
    rhos: list[float] = []
    weights: list[float] = []
    used = 0
    for uoa in sorted(groups):
        ids = [a for a in groups[uoa] if a in indicator and a in gold]
        if len(ids) < 2:
            continue
        try:
            rho = spearman([indicator[a] for a in ids], [gold[a] for a in ids])
        except DegenerateDataError:
            continue
        rhos.append(rho)
        weights.append(float(len(ids)))
        used += len(ids)
    if not rhos:
        return None
    return weighted_mean_correlation(rhos, weights), used


@dataclass(frozen=True)
class YearTrendRow:
    year: int
    indicator_id: str
    weighted_rho: float
    n: int


def per_year_trend(
    indicators: Mapping[str, Mapping[str, float]],
    gold: Mapping[str, float],
    corpus: Corpus,
) -> list[YearTrendRow]:
    """Weighted cross-UoA correlation per publication year and indicator.

    Each year's slice is correlated per UoA and aggregated with article
    counts as weights; year/UoA slices with fewer than two articles are
    skipped with a warning.
    """
    years = sorted({a.pub_year for a in corpus.articles})
    rows: list[YearTrendRow] = []
    for year in years:
        groups: dict[int, list[str]] = {}
        for article in corpus.articles:
            if article.pub_year == year:
                groups.setdefault(article.uoa, []).append(article.article_id)
        for indicator_id in sorted(indicators):
            outcome = grouped_weighted_rho(indicators[indicator_id], gold, groups)
            if outcome is None:
                log.warning("year %s / %s: no usable UoA slice, skipped", year, indicator_id)
                continue
            rho, n = outcome
            rows.append(YearTrendRow(year=year, indicator_id=indicator_id, weighted_rho=rho, n=n))
    return rows


@dataclass(frozen=True)
class MeanScoreRow:
    source: str
    mean: float
    n: int


def mean_score_summary(sources: Mapping[str, Mapping[str, float]]) -> list[MeanScoreRow]:
    """Arithmetic mean score per source over that source's assessed articles."""
    rows: list[MeanScoreRow] = []
    for source in sources:
        scores = sources[source]
        if not scores:
            log.warning("mean_score_summary: source %r is empty, omitted", source)
            continue
        rows.append(MeanScoreRow(source=source, mean=math.fsum(scores.values()) / len(scores), n=len(scores)))
    return rows


def ci_overlap(a: CorrelationResult, b: CorrelationResult) -> bool:
    """Whether two confidence intervals overlap (the simplistic comparison)."""
    return a.ci_low <= b.ci_high and b.ci_low <= a.ci_high
