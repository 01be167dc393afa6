"""Cost-efficiency analysis of mixed-model run averaging.

For every mix of i runs from model A and j runs from model B, the mean
attainable article-weighted correlation with the gold scores is computed
over all run subsets of that size, and plotted against the mix's unit
cost. Because averaging is order-invariant, enumerating subsets realises
every permutation of runs without redundancy.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np

from .corpus import Corpus
from .errors import DataError, DegenerateDataError
from .analysis import spearman, weighted_mean_correlation

log = logging.getLogger(__name__)

DEFAULT_COSTS = (10.0, 1.0)
MAX_NOMINAL_RUNS = 12

RunScores = Mapping[str, Mapping[int, float]]  # article_id -> run_index -> resolved score


@dataclass(frozen=True)
class ComboPoint:
    """One (i, j) mix: its unit cost and mean attainable correlation."""

    runs_a: int
    runs_b: int
    unit_cost: float
    mean_rho: float
    subset_count: int
    used_fallback: bool = False


def _run_lists(scores: RunScores, articles: Sequence[str], nominal: int) -> list[list[float | None]]:
    rows: list[list[float | None]] = []
    for aid in articles:
        row: list[float | None] = [None] * nominal
        for run_index, value in scores.get(aid, {}).items():
            if not 1 <= run_index <= nominal:
                raise DataError(f"{aid}: run_index {run_index} outside 1..{nominal}")
            row[run_index - 1] = value
        rows.append(row)
    return rows


def _all_subset_means(
    rows: Sequence[Sequence[float | None]], nominal: int
) -> dict[tuple[int, ...], tuple[np.ndarray, bool]]:
    """Per-article mean for every nonempty run subset of one model.

    Means use math.fsum so a full subset reproduces the aggregation
    module's run average bit-for-bit. A subset touching a missing run
    falls back to the article's available-run mean rather than dropping
    the article from every subset containing that run.
    """
    available = []
    for row in rows:
        values = [v for v in row if v is not None]
        available.append(math.fsum(values) / len(values))
    out: dict[tuple[int, ...], tuple[np.ndarray, bool]] = {}
    for size in range(1, nominal + 1):
        for subset in combinations(range(nominal), size):
            means = np.empty(len(rows))
            fallback = False
            for r, row in enumerate(rows):
                picked = [row[c] for c in subset]
                if any(v is None for v in picked):
                    means[r] = available[r]
                    fallback = True
                else:
                    means[r] = math.fsum(picked) / size
            out[subset] = (means, fallback)
    return out


def cost_curve(
    scores_a: RunScores,
    scores_b: RunScores,
    gold: Mapping[str, float],
    corpus: Corpus,
    costs: tuple[float, float] = DEFAULT_COSTS,
    nominal_runs: int = 5,
    max_nominal: int = MAX_NOMINAL_RUNS,
) -> list[ComboPoint]:
    """Mean weighted correlation and cost for every run mix of two models.

    For each (i, j) with i + j >= 1 the mean is over all C(N,i) * C(N,j)
    subsets of run indices; each subset's statistic is the per-UoA
    Spearman against gold aggregated with article-count weights.
    """
    cost_a, cost_b = costs
    if cost_a <= 0 or cost_b <= 0:
        raise DataError("costs must be positive")
    if nominal_runs < 1:
        raise DataError(f"nominal_runs must be >= 1, got {nominal_runs}")
    if nominal_runs > max_nominal:
        raise DataError(
            f"nominal_runs = {nominal_runs} exceeds the combinatorial budget guard ({max_nominal})"
        )
    article_map = corpus.article_map()
    articles = sorted(
        aid
        for aid in set(scores_a) & set(scores_b) & set(gold)
        if aid in article_map and scores_a.get(aid) and scores_b.get(aid)
    )
    if not articles:
        raise DataError("cost_curve: no articles with runs for both models and a gold score")
    positions = {aid: row for row, aid in enumerate(articles)}
    groups: dict[int, list[str]] = {}
    for aid in articles:
        groups.setdefault(article_map[aid].uoa, []).append(aid)
    group_slices = [
        (np.array([positions[aid] for aid in ids]), [gold[aid] for aid in ids])
        for uoa, ids in sorted(groups.items())
        if len(ids) >= 2
    ]

    means_a = _all_subset_means(_run_lists(scores_a, articles, nominal_runs), nominal_runs)
    means_b = _all_subset_means(_run_lists(scores_b, articles, nominal_runs), nominal_runs)

    def weighted_rho(values: np.ndarray) -> float:
        rhos: list[float] = []
        weights: list[float] = []
        for idx, gold_values in group_slices:
            try:
                rhos.append(spearman(values[idx], gold_values))
            except DegenerateDataError:
                continue
            weights.append(float(idx.size))
        if not rhos:
            raise DataError("cost_curve: no usable UoA slice")
        return weighted_mean_correlation(rhos, weights)

    points: list[ComboPoint] = []
    run_indices = range(nominal_runs)
    for i in range(nominal_runs + 1):
        subsets_a = list(combinations(run_indices, i))
        for j in range(nominal_runs + 1):
            if i + j == 0:
                continue
            subsets_b = list(combinations(run_indices, j))
            rhos: list[float] = []
            fallback = False
            for sa in subsets_a:
                if i > 0:
                    mean_a, fb_a = means_a[sa]
                    fallback = fallback or fb_a
                for sb in subsets_b:
                    if j > 0:
                        mean_b, fb_b = means_b[sb]
                        fallback = fallback or fb_b
                    if i == 0:
                        combined = mean_b
                    elif j == 0:
                        combined = mean_a
                    else:
                        combined = (mean_a + mean_b) / 2.0
                    rhos.append(weighted_rho(combined))
            expected = math.comb(nominal_runs, i) * math.comb(nominal_runs, j)
            assert len(rhos) == expected
            points.append(
                ComboPoint(
                    runs_a=i,
                    runs_b=j,
                    unit_cost=i * cost_a + j * cost_b,
                    mean_rho=float(np.mean(rhos)),
                    subset_count=expected,
                    used_fallback=fallback,
                )
            )
    return points


def pareto_front(points: Sequence[ComboPoint]) -> list[ComboPoint]:
    """Points not dominated in (lower cost, higher mean correlation)."""
    if not points:
        raise DataError("pareto_front: no points supplied")

    def dominated(p: ComboPoint) -> bool:
        for q in points:
            if q is p:
                continue
            if (
                q.unit_cost <= p.unit_cost
                and q.mean_rho >= p.mean_rho
                and (q.unit_cost < p.unit_cost or q.mean_rho > p.mean_rho)
            ):
                return True
        return False

    front = [p for p in points if not dominated(p)]
    front.sort(key=lambda p: (p.unit_cost, p.mean_rho))
    return front
