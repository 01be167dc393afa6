"""Seeded generator for the bundled demonstration corpus.

Produces four UoAs (one per prompt group) with departmental star
profiles derived from the articles' latent qualities, two citation
snapshots whose counts track quality and age, and a theoretical-maximum
input file. Everything is a deterministic function of the seed, so the
committed data under data/synthetic/ can be regenerated at will.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import Article, Corpus, DepartmentProfile, STAR_LEVELS
from .indicators import CitationRecord

DEFAULT_UOAS = (3, 9, 17, 30)
SNAPSHOT_EARLY = "2021"
SNAPSHOT_LATE = "2024"

_TOPIC_WORDS = {
    3: ("clinical cohorts", "biomarker panels", "vaccine response", "metabolic pathways", "patient outcomes", "gene expression"),
    9: ("lattice models", "photonic circuits", "turbulent flows", "sensor arrays", "materials fatigue", "plasma confinement"),
    17: ("labour markets", "housing policy", "survey panels", "migration networks", "electoral behaviour", "care provision"),
    30: ("manuscript traditions", "performance practice", "archival sources", "translation history", "visual culture", "oral narratives"),
}
_TITLE_LEADS = ("Rethinking", "Quantifying", "Mapping", "Revisiting", "Modelling", "Tracing", "Assessing", "Interrogating")
_TITLE_TAILS = (
    "a longitudinal analysis",
    "evidence from a national sample",
    "a comparative perspective",
    "methods and implications",
    "new measurements and open questions",
    "a critical synthesis",
)
_SENTENCES = (
    "We motivate the problem with reference to recent developments in the field.",
    "The study design combines established techniques with a novel measurement strategy.",
    "Data were collected over several waves and checked for internal consistency.",
    "Results indicate a robust pattern that persists across specifications.",
    "We discuss threats to validity and the steps taken to mitigate them.",
    "The contribution is situated against competing accounts in the literature.",
    "Implications for practice and for future enquiry are drawn out in the closing section.",
    "Limitations of the sampling frame are acknowledged and quantified where possible.",
    "A replication package accompanies the analysis.",
    "The findings refine rather than overturn the prevailing interpretation.",
)
_SHORT_ABSTRACTS = ("", "Editorial.", "No abstract.", "Comment.", "Reply to reviewers.", "Brief note.")

_FIELD_RATES = {3: 8.0, 9: 5.0, 17: 3.0, 30: 1.2}


@dataclass(frozen=True)
class SyntheticCorpus:
    corpus: Corpus
    latent: Mapping[str, float]
    citations: Mapping[str, tuple[CitationRecord, ...]]
    theoretical_max: Mapping[int, float]


def _profile_from_latents(institution_id: str, uoa: int, latents: Sequence[float]) -> DepartmentProfile:
    counts = {s: 0 for s in STAR_LEVELS}
    for latent in latents:
        star = int(min(4, max(1, round(latent))))
        counts[star] += 1
    n = len(latents)
    # Work in tenths of a percent so the published-style rounding still
    # sums to exactly 100.0.
    tenths = {s: round(1000 * counts[s] / n) for s in STAR_LEVELS}
    residual = 1000 - sum(tenths.values())
    largest = max(tenths, key=lambda s: (tenths[s], s))
    tenths[largest] += residual
    star_pct = {s: tenths[s] / 10.0 for s in STAR_LEVELS}
    return DepartmentProfile(institution_id=institution_id, uoa=uoa, star_pct=star_pct)


def make_synthetic_corpus(
    seed: int = 2024,
    n_articles: int = 2000,
    uoas: Sequence[int] = DEFAULT_UOAS,
    departments_per_uoa: int = 10,
    short_abstract_rate: float = 0.07,
    missing_late_rate: float = 0.025,
) -> SyntheticCorpus:
    """Build the full synthetic dataset for a given seed."""
    rng = np.random.default_rng(seed)
    per_uoa = n_articles // len(uoas)
    articles: list[Article] = []
    latent: dict[str, float] = {}
    profiles: dict[tuple[str, int], DepartmentProfile] = {}
    early: list[CitationRecord] = []
    late: list[CitationRecord] = []

    for uoa in uoas:
        fields = [f"F{uoa}{c}" for c in "abc"]
        dept_bases = rng.uniform(1.9, 3.6, size=departments_per_uoa)
        per_dept = per_uoa // departments_per_uoa
        for d in range(departments_per_uoa):
            institution_id = f"I{d + 1:02d}"
            dept_latents: list[float] = []
            for k in range(per_dept):
                idx = d * per_dept + k
                article_id = f"A{uoa:02d}-{idx:04d}"
                quality = float(np.clip(rng.normal(dept_bases[d], 0.45), 1.0, 4.0))
                dept_latents.append(quality)
                latent[article_id] = quality
                pub_year = int(rng.integers(2014, 2021))
                topic = _TOPIC_WORDS[uoa][int(rng.integers(len(_TOPIC_WORDS[uoa])))]
                title = (
                    f"{_TITLE_LEADS[int(rng.integers(len(_TITLE_LEADS)))]} {topic}: "
                    f"{_TITLE_TAILS[int(rng.integers(len(_TITLE_TAILS)))]}"
                )
                if rng.random() < short_abstract_rate:
                    abstract = _SHORT_ABSTRACTS[int(rng.integers(len(_SHORT_ABSTRACTS)))]
                else:
                    count = int(rng.integers(3, 8))
                    picks = rng.choice(len(_SENTENCES), size=count, replace=False)
                    abstract = " ".join(
                        [f"This article examines {topic} in a {pub_year} setting."]
                        + [_SENTENCES[p] for p in picks]
                    )
                doi = f"10.5555/{uoa}.{idx:04d}" if rng.random() < 0.9 else None
                articles.append(
                    Article(
                        article_id=article_id,
                        title=title,
                        abstract=abstract,
                        uoa=uoa,
                        institution_id=institution_id,
                        pub_year=pub_year,
                        doi=doi,
                    )
                )

                primary = fields[int(rng.integers(len(fields)))]
                cells = {(primary, pub_year)}
                if rng.random() < 0.25:
                    other = fields[int(rng.integers(len(fields)))]
                    extra_year = pub_year + 1 if rng.random() < 0.2 else pub_year
                    if (other, extra_year) not in cells:
                        cells.add((other, min(extra_year, 2020)))
                rate = _FIELD_RATES[uoa] * float(np.exp(0.9 * (quality - 2.2)))
                early_rate = rate * max(0.15, (2021.2 - pub_year) / 7.0)
                count_early = int(rng.poisson(early_rate))
                growth = rate * 3.0 / 7.0
                count_late = count_early + int(rng.poisson(growth))
                frozen_cells = frozenset(cells)
                early.append(CitationRecord(article_id, SNAPSHOT_EARLY, count_early, frozen_cells))
                if rng.random() >= missing_late_rate:
                    late.append(CitationRecord(article_id, SNAPSHOT_LATE, count_late, frozen_cells))
            profiles[(institution_id, uoa)] = _profile_from_latents(institution_id, uoa, dept_latents)

    maxima = {uoa: float(np.round(rng.uniform(0.5, 0.8), 3)) for uoa in uoas}
    corpus = Corpus(
        articles=tuple(articles),
        profiles=profiles,
        provenance={"generator": "refqual.synthdata", "seed": str(seed)},
    )
    return SyntheticCorpus(
        corpus=corpus,
        latent=latent,
        citations={SNAPSHOT_EARLY: tuple(early), SNAPSHOT_LATE: tuple(late)},
        theoretical_max=maxima,
    )


_CAMPAIGN_TOML = """\
# Demonstration campaign over the bundled synthetic corpus.
[corpus]
articles = "articles.csv"
profiles = "profiles.csv"

[filter]
fraction = 0.10
metric = "chars"

[campaign]
repetitions = 5
output_dir = "out"
cache_dir = "cache"

[[models]]
model_id = "scorer-large"
unit_cost = 10.0

[[models]]
model_id = "scorer-small"
unit_cost = 1.0

[backend]
kind = "mock"
parallelism = 4
retry_budget = 3
backoff_base = 0.5

[bootstrap]
level = 0.95
resamples = 1000
seed = 13

[citations]
"2021" = "citations_2021.csv"
"2024" = "citations_2024.csv"

[analysis]
theoretical_max = "theoretical_max.csv"

[mock]
seed = 7
latent_quality = "latent_quality.csv"

[mock.behaviors.scorer-large]
noise = 0.55
bias = 0.35

[mock.behaviors.scorer-small]
noise = 0.70
bias = 0.10
"""


def write_synthetic_corpus(directory: str | Path, data: SyntheticCorpus) -> None:
    """Write the dataset plus a ready-to-run campaign config to a directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    from .corpus import save_corpus

    save_corpus(data.corpus, directory / "articles.csv", directory / "profiles.csv")

    with open(directory / "latent_quality.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["article_id", "latent_quality"])
        for aid in sorted(data.latent):
            writer.writerow([aid, repr(data.latent[aid])])

    for snapshot_id, records in sorted(data.citations.items()):
        with open(directory / f"citations_{snapshot_id}.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["article_id", "raw_count", "cells"])
            for record in records:
                cells = ";".join(f"{f}:{y}" for f, y in sorted(record.cells))
                writer.writerow([record.article_id, record.raw_count, cells])

    with open(directory / "theoretical_max.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["uoa", "rho_max"])
        for uoa in sorted(data.theoretical_max):
            writer.writerow([uoa, repr(data.theoretical_max[uoa])])

    (directory / "campaign.toml").write_text(_CAMPAIGN_TOML, encoding="utf-8")
