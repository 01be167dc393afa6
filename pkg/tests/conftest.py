"""Shared fixtures: small hand-built corpora and the bundled synthetic corpus."""

from __future__ import annotations

import csv
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from refqual.corpus import Article, Corpus, DepartmentProfile, load_corpus
from refqual.synthdata import make_synthetic_corpus


def make_profile(institution_id="I01", uoa=3, star_pct=None) -> DepartmentProfile:
    return DepartmentProfile(
        institution_id=institution_id,
        uoa=uoa,
        star_pct=star_pct or {1: 10.0, 2: 20.0, 3: 40.0, 4: 30.0},
    )


def make_article(article_id="A1", uoa=3, institution_id="I01", **kwargs) -> Article:
    defaults = dict(
        title=f"Title for {article_id}",
        abstract=f"An abstract long enough to pass any filter, describing study {article_id}.",
        pub_year=2017,
        doi=None,
    )
    defaults.update(kwargs)
    return Article(article_id=article_id, uoa=uoa, institution_id=institution_id, **defaults)


def write_articles_csv(path: Path, rows: list[dict]) -> Path:
    columns = ["article_id", "title", "abstract", "uoa", "institution_id", "pub_year", "doi"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        writer.writerows(rows)
    return path


def write_profiles_csv(path: Path, rows: list[dict], level0: bool = False) -> Path:
    columns = ["institution_id", "uoa", "pct_star1", "pct_star2", "pct_star3", "pct_star4"]
    if level0:
        columns.append("pct_star0")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        writer.writerows(rows)
    return path


def article_row(article_id="A1", uoa=3, institution_id="I01", **kwargs) -> dict:
    row = dict(
        article_id=article_id,
        title=f"Title {article_id}",
        abstract=f"A sufficiently long abstract describing the study behind {article_id}.",
        uoa=uoa,
        institution_id=institution_id,
        pub_year=2017,
        doi="",
    )
    row.update(kwargs)
    return row


def profile_row(institution_id="I01", uoa=3, p1=10.0, p2=20.0, p3=40.0, p4=30.0, **kwargs) -> dict:
    row = dict(
        institution_id=institution_id,
        uoa=uoa,
        pct_star1=p1,
        pct_star2=p2,
        pct_star3=p3,
        pct_star4=p4,
    )
    row.update(kwargs)
    return row


@pytest.fixture
def tiny_corpus(tmp_path) -> Corpus:
    articles = write_articles_csv(
        tmp_path / "articles.csv",
        [article_row("A1"), article_row("A2"), article_row("A3", institution_id="I02")],
    )
    profiles = write_profiles_csv(
        tmp_path / "profiles.csv",
        [profile_row("I01"), profile_row("I02", p1=0.0, p2=20.0, p3=50.0, p4=30.0)],
    )
    return load_corpus(articles, profiles)


@pytest.fixture(scope="session")
def synth():
    """The bundled synthetic corpus at full size (seeded, deterministic)."""
    return make_synthetic_corpus(seed=2024, n_articles=2000)


@pytest.fixture(scope="session")
def synth_small():
    return make_synthetic_corpus(seed=5, n_articles=400)
