"""Spearman, bootstrap, per-UoA tables, scaling, trends, and summary tests."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from refqual.analysis import (
    ALL_UOAS,
    CorrelationResult,
    TheoreticalMax,
    average_ranks,
    bootstrap_ci,
    ci_overlap,
    mean_score_summary,
    per_uoa_correlations,
    per_year_trend,
    scale_results,
    scale_to_max,
    spearman,
    weighted_mean_correlation,
)
from refqual.corpus import Corpus
from refqual.errors import DataError, DegenerateDataError

from conftest import make_article, make_profile
from oracles import closed_form_spearman, naive_average_ranks

finite_floats = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


class TestAverageRanks:
    def test_no_ties(self):
        assert list(average_ranks([30.0, 10.0, 20.0])) == [3.0, 1.0, 2.0]

    def test_tie_group_shares_mean_position(self):
        assert list(average_ranks([5.0, 5.0, 7.0])) == [1.5, 1.5, 3.0]
        assert list(average_ranks([2.0, 2.0, 2.0])) == [2.0, 2.0, 2.0]

    def test_two_dimensional_rows_independent(self):
        ranks = average_ranks(np.array([[1.0, 1.0, 3.0], [9.0, 2.0, 2.0]]))
        assert ranks.tolist() == [[1.5, 1.5, 3.0], [3.0, 1.5, 1.5]]

    @given(st.lists(finite_floats, min_size=1, max_size=40))
    @settings(max_examples=200)
    def test_matches_naive_oracle_exactly(self, values):
        assert list(average_ranks(values)) == naive_average_ranks(values)


class TestSpearman:
    def test_identical_order(self):
        assert spearman([1, 2, 3], [1, 2, 3]) == 1.0

    def test_reversal(self):
        assert spearman([1, 2, 3], [3, 2, 1]) == -1.0

    def test_one_swap(self):
        assert spearman([1, 2, 3], [1, 3, 2]) == pytest.approx(0.5, abs=1e-12)

    def test_constant_vector_degenerate(self):
        with pytest.raises(DegenerateDataError):
            spearman([1, 1, 1], [1, 2, 3])
        with pytest.raises(DegenerateDataError):
            spearman([1, 2, 3], [7, 7, 7])

    def test_too_short(self):
        with pytest.raises(DataError):
            spearman([1.0], [2.0])

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            spearman([1, 2], [1, 2, 3])

    @given(data=st.data())
    @settings(max_examples=150)
    def test_symmetry_and_monotone_invariance(self, data):
        n = data.draw(st.integers(3, 15))
        x = data.draw(st.lists(st.integers(-50, 50), min_size=n, max_size=n).filter(lambda v: len(set(v)) > 1))
        y = data.draw(st.lists(st.integers(-50, 50), min_size=n, max_size=n).filter(lambda v: len(set(v)) > 1))
        rho = spearman(x, y)
        assert spearman(y, x) == pytest.approx(rho, abs=1e-12)
        # strictly increasing transforms preserve ranks
        x2 = [math.exp(v / 25.0) for v in x]
        y2 = [2.0 * v + 7.0 for v in y]
        assert spearman(x2, y2) == pytest.approx(rho, abs=1e-12)

    @given(data=st.data())
    @settings(max_examples=200)
    def test_closed_form_on_tie_free_vectors(self, data):
        n = data.draw(st.integers(2, 20))
        x = data.draw(
            st.lists(st.integers(-1000, 1000), min_size=n, max_size=n, unique=True)
        )
        y = data.draw(
            st.lists(st.integers(-1000, 1000), min_size=n, max_size=n, unique=True)
        )
        assert spearman(x, y) == pytest.approx(closed_form_spearman(x, y), abs=1e-12)


class TestBootstrapCI:
    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=60)
        y = x + rng.normal(size=60)
        a = bootstrap_ci(x, y, seed=42)
        b = bootstrap_ci(x, y, seed=42)
        assert a == b
        c = bootstrap_ci(x, y, seed=43)
        assert (a.low, a.high) != (c.low, c.high)

    def test_perfect_agreement_pins_interval_at_one(self):
        x = np.arange(25.0)
        interval = bootstrap_ci(x, x, seed=1)
        assert interval.low == 1.0 and interval.high == 1.0

    def test_interval_brackets_rho(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=120)
        y = 0.6 * x + rng.normal(size=120)
        rho = spearman(x, y)
        interval = bootstrap_ci(x, y, seed=5)
        assert interval.low <= rho <= interval.high

    def test_bad_level_rejected(self):
        with pytest.raises(DataError):
            bootstrap_ci([1, 2, 3], [1, 2, 3], level=1.5)

    def test_near_constant_data_exhausts_redraws(self):
        x = [1.0] * 11 + [2.0]
        y = list(range(12))
        with pytest.raises(DegenerateDataError, match="redraw budget"):
            bootstrap_ci(x, y, resamples=50, seed=0, max_redraws=2)

    def test_small_n_warns(self, caplog):
        bootstrap_ci([1, 2, 3, 4], [1, 2, 3, 4], resamples=50, seed=0)
        assert any("small" in r.message for r in caplog.records)


def two_uoa_corpus() -> Corpus:
    articles = tuple(
        [make_article(f"A{i}", uoa=3, institution_id=f"I{i:02d}") for i in range(6)]
        + [make_article(f"B{i}", uoa=9, institution_id=f"I{i:02d}") for i in range(6)]
    )
    profiles = {
        (f"I{i:02d}", uoa): make_profile(f"I{i:02d}", uoa) for i in range(6) for uoa in (3, 9)
    }
    return Corpus(articles=articles, profiles=profiles)


class TestPerUoaCorrelations:
    def test_identical_maps_give_rho_one(self):
        corpus = two_uoa_corpus()
        gold = {a.article_id: float(i % 6 + i // 6) for i, a in enumerate(corpus.articles)}
        results = per_uoa_correlations(gold, gold, corpus, resamples=50, seed=0)
        per_uoa = {r.uoa: r for r in results}
        assert per_uoa[3].rho == 1.0
        assert per_uoa[9].rho == 1.0

    def test_all_row_present_with_two_uoas(self):
        corpus = two_uoa_corpus()
        rng = np.random.default_rng(0)
        gold = {a.article_id: float(v) for a, v in zip(corpus.articles, rng.normal(size=12))}
        ind = {aid: v + rng.normal() for aid, v in gold.items()}
        results = per_uoa_correlations(ind, gold, corpus, resamples=50, seed=0)
        uoas = [r.uoa for r in results]
        assert uoas == [3, 9, ALL_UOAS]
        all_row = results[-1]
        assert all_row.n == 12

    def test_constant_gold_uoa_skipped_with_warning(self, caplog):
        articles = (make_article("A1"), make_article("A2"))
        corpus = Corpus(articles=articles, profiles={("I01", 3): make_profile()})
        gold = {"A1": 2.5, "A2": 2.5}
        ind = {"A1": 1.0, "A2": 2.0}
        results = per_uoa_correlations(ind, gold, corpus, resamples=50, seed=0)
        assert not results
        assert any("constant" in r.message for r in caplog.records)

    def test_intersection_only(self):
        corpus = two_uoa_corpus()
        gold = {a.article_id: float(i) for i, a in enumerate(corpus.articles)}
        ind = {aid: v for aid, v in list(gold.items())[:8]}
        results = per_uoa_correlations(ind, gold, corpus, resamples=50, seed=0)
        assert {r.uoa for r in results} == {3, 9, ALL_UOAS}
        assert {r.uoa: r.n for r in results}[3] == 6


class TestScaleToMax:
    def _result(self, rho, uoa=3):
        return CorrelationResult("ind", uoa, 100, rho, rho - 0.1, rho + 0.1)

    def test_direct_ratio(self):
        scaled = scale_to_max(self._result(0.3), TheoreticalMax(3, 0.6))
        assert scaled.scaled_rho == pytest.approx(0.5, abs=1e-12)

    def test_unclamped_above_one(self):
        scaled = scale_to_max(self._result(0.65), TheoreticalMax(3, 0.6))
        assert scaled.scaled_rho == pytest.approx(0.65 / 0.6, abs=1e-12)
        assert scaled.scaled_rho > 1.0

    def test_sign_preserved(self):
        scaled = scale_to_max(self._result(-0.1), TheoreticalMax(3, 0.5))
        assert scaled.scaled_rho == pytest.approx(-0.2, abs=1e-12)

    def test_missing_max_leaves_unscaled(self, caplog):
        result = scale_to_max(self._result(0.3), None)
        assert result.scaled_rho is None
        assert any("unscaled" in r.message for r in caplog.records)

    def test_scale_results_skips_pooled_row(self):
        rows = [self._result(0.3, uoa=3), self._result(0.4, uoa=ALL_UOAS)]
        scaled = scale_results(rows, {3: TheoreticalMax(3, 0.6)})
        assert scaled[0].scaled_rho is not None
        assert scaled[1].scaled_rho is None

    def test_order_preserved_within_shared_max(self):
        rhos = [-0.2, 0.1, 0.5, 0.9]
        maximum = TheoreticalMax(3, 0.7)
        scaled = [scale_to_max(self._result(r), maximum).scaled_rho for r in rhos]
        assert scaled == sorted(scaled)

    def test_invalid_max_rejected(self):
        with pytest.raises(DataError):
            TheoreticalMax(3, 0.0)


class TestWeightedMeanCorrelation:
    def test_equal_weights(self):
        assert weighted_mean_correlation([0.2, 0.4], [1, 1]) == pytest.approx(0.3, abs=1e-12)

    def test_hand_weighted(self):
        assert weighted_mean_correlation([0.2, 0.4], [3, 1]) == pytest.approx(0.25, abs=1e-12)

    def test_single_value_identity(self):
        assert weighted_mean_correlation([0.37], [12]) == 0.37

    def test_zero_weights_error(self):
        with pytest.raises(DegenerateDataError):
            weighted_mean_correlation([0.2, 0.4], [0, 0])

    @given(st.lists(st.tuples(st.floats(-1, 1), st.floats(0.01, 10)), min_size=1, max_size=20))
    def test_equal_weights_match_unweighted_mean(self, pairs):
        rhos = [r for r, _ in pairs]
        weighted = weighted_mean_correlation(rhos, [1.0] * len(rhos))
        assert weighted == pytest.approx(math.fsum(rhos) / len(rhos), abs=1e-12)


class TestPerYearTrend:
    def _corpus(self, years):
        articles = tuple(
            make_article(f"A{i}", institution_id=f"I{i:02d}", pub_year=year)
            for i, year in enumerate(years)
        )
        profiles = {(f"I{i:02d}", 3): make_profile(f"I{i:02d}") for i in range(len(years))}
        return Corpus(articles=articles, profiles=profiles)

    def test_single_year_single_rows(self):
        corpus = self._corpus([2015] * 8)
        gold = {a.article_id: float(i) for i, a in enumerate(corpus.articles)}
        rows = per_year_trend({"ind": gold}, gold, corpus)
        assert len(rows) == 1
        assert rows[0].year == 2015 and rows[0].weighted_rho == 1.0

    def test_indicator_equal_gold_is_one_everywhere(self):
        corpus = self._corpus([2014, 2014, 2015, 2015, 2016, 2016, 2014, 2015])
        gold = {a.article_id: float(i) for i, a in enumerate(corpus.articles)}
        rows = per_year_trend({"ind": gold}, gold, corpus)
        assert {r.year for r in rows} == {2014, 2015, 2016}
        assert all(r.weighted_rho == 1.0 for r in rows)

    def test_growing_noise_recovers_decreasing_trend(self):
        rng = np.random.default_rng(7)
        years = [2014, 2016, 2018]
        articles = []
        gold = {}
        ind = {}
        for year in years:
            for i in range(220):
                aid = f"Y{year}-{i:03d}"
                articles.append(make_article(aid, institution_id=f"I{i % 10:02d}", pub_year=year))
                quality = float(rng.normal())
                gold[aid] = quality
                ind[aid] = quality + rng.normal() * (0.3 + (year - 2014) * 0.8)
        corpus = Corpus(
            articles=tuple(articles),
            profiles={(f"I{i:02d}", 3): make_profile(f"I{i:02d}") for i in range(10)},
        )
        rows = per_year_trend({"ind": ind}, gold, corpus)
        trend = [r.weighted_rho for r in sorted(rows, key=lambda r: r.year)]
        assert trend[0] > trend[1] > trend[2]

    def test_small_slices_skipped(self, caplog):
        corpus = self._corpus([2014, 2015, 2015])
        gold = {a.article_id: float(i) for i, a in enumerate(corpus.articles)}
        rows = per_year_trend({"ind": gold}, gold, corpus)
        assert {r.year for r in rows} == {2015}
        assert any("skipped" in r.message for r in caplog.records)


class TestMeanScoreSummary:
    def test_constant_scores(self):
        rows = mean_score_summary({"gold": {"A": 3.0, "B": 3.0}})
        assert rows[0].mean == 3.0 and rows[0].n == 2

    def test_biased_scorer_exceeds_gold(self):
        gold = {f"A{i}": 2.0 + (i % 3) * 0.5 for i in range(30)}
        biased = {aid: min(4.0, v + 0.6) for aid, v in gold.items()}
        rows = {r.source: r.mean for r in mean_score_summary({"gold": gold, "scorer": biased})}
        assert rows["scorer"] > rows["gold"]

    def test_empty_source_omitted_with_warning(self, caplog):
        rows = mean_score_summary({"gold": {"A": 3.0}, "empty": {}})
        assert [r.source for r in rows] == ["gold"]
        assert any("omitted" in r.message for r in caplog.records)


class TestCiOverlap:
    def test_overlap_and_disjoint(self):
        a = CorrelationResult("a", 3, 10, 0.3, 0.1, 0.5)
        b = CorrelationResult("b", 3, 10, 0.4, 0.45, 0.7)
        c = CorrelationResult("c", 3, 10, 0.6, 0.55, 0.8)
        assert ci_overlap(a, b)
        assert not ci_overlap(a, c)
        assert ci_overlap(b, c)
