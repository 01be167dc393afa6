"""Article and department data model, corpus ingestion, and gold scores.

The unit of analysis is a refereed journal article submitted to one of 34
units of assessment (UoAs). Departmental star-level profiles supply the
per-article gold standard: the star-weighted mean quality of the
submitting department's articles.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping

from .errors import DataError, DegenerateDataError

log = logging.getLogger(__name__)

UOA_MIN = 1
UOA_MAX = 34
STAR_LEVELS = (1, 2, 3, 4)

# Published profiles are rounded, so their percentage sums drift from 100.
PROFILE_SUM_TOLERANCE = 0.5

ARTICLE_COLUMNS = ("article_id", "title", "abstract", "uoa", "institution_id", "pub_year", "doi")
PROFILE_COLUMNS = ("institution_id", "uoa", "pct_star1", "pct_star2", "pct_star3", "pct_star4")
OPTIONAL_PROFILE_COLUMN = "pct_star0"


@dataclass(frozen=True)
class Article:
    """One refereed journal article: the unit that gets scored."""

    article_id: str
    title: str
    abstract: str
    uoa: int
    institution_id: str
    pub_year: int
    doi: str | None = None


@dataclass(frozen=True)
class DepartmentProfile:
    """Star-level percentage profile for one (institution, UoA) submission.

    ``star_pct`` maps star level to percentage and may carry an optional
    level-0 bucket for out-of-scope work; scores themselves never use it.
    """

    institution_id: str
    uoa: int
    star_pct: Mapping[int, float]

    @cached_property
    def mean_score(self) -> float:
        """Star-weighted mean quality with the level-0 bucket excluded."""
        return departmental_mean(self)


@dataclass(frozen=True)
class RowReject:
    """One input row that failed validation, kept for the rejects report."""

    source: str  # "articles" or "profiles"
    row: int  # 1-based data row number, header excluded
    key: str
    reason: str


@dataclass(frozen=True)
class Corpus:
    """Immutable article collection plus the department profiles behind it."""

    articles: tuple[Article, ...]
    profiles: Mapping[tuple[str, int], DepartmentProfile]
    provenance: Mapping[str, str] = field(default_factory=dict, compare=False)
    rejects: tuple[RowReject, ...] = field(default=(), compare=False)

    def article_map(self) -> dict[str, Article]:
        return {a.article_id: a for a in self.articles}

    def by_uoa(self) -> dict[int, list[Article]]:
        groups: dict[int, list[Article]] = {}
        for article in self.articles:
            groups.setdefault(article.uoa, []).append(article)
        return groups


@dataclass(frozen=True)
class FilterReport:
    """What the short-abstract filter removed and where it drew the line."""

    fraction: float
    metric: str
    thresholds: Mapping[int, int]  # uoa -> length at the removal boundary
    removed: Mapping[int, tuple[str, ...]]  # uoa -> removed ids, ascending

    def removed_ids(self) -> frozenset[str]:
        return frozenset(aid for ids in self.removed.values() for aid in ids)


def _delimiter_for(path: Path) -> str:
    return "\t" if path.suffix.lower() in (".tsv", ".tab") else ","


def _read_rows(path: Path, required: Iterable[str]) -> list[dict[str, str]]:
    if not path.exists():
        raise DataError(f"input file not found: {path}")
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh, delimiter=_delimiter_for(path))
            header = reader.fieldnames or []
            missing = [c for c in required if c not in header]
            if missing:
                raise DataError(f"{path}: missing required columns {missing} (found {header})")
            rows = []
            for row in reader:
                if None in row:
                    raise DataError(f"{path}: line {reader.line_num}: more fields than header columns")
                rows.append(row)
            return rows
    except csv.Error as exc:
        raise DataError(f"{path}: line {reader.line_num}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise DataError(f"{path}: not valid UTF-8 at byte {exc.start}") from exc


def _parse_int(value: str) -> int | None:
    try:
        return int(value.strip())
    except (ValueError, AttributeError):
        return None


def load_corpus(articles_path: str | Path, profiles_path: str | Path) -> Corpus:
    """Load and validate a corpus from delimited article and profile files.

    Structural problems (unreadable file, missing columns, duplicate keys)
    are fatal. Rows failing field-level validation are collected into
    ``Corpus.rejects`` instead of being silently dropped.
    """
    articles_path = Path(articles_path)
    profiles_path = Path(profiles_path)
    rejects: list[RowReject] = []

    articles: list[Article] = []
    seen_ids: set[str] = set()
    for i, row in enumerate(_read_rows(articles_path, ARTICLE_COLUMNS), start=1):
        article_id = (row.get("article_id") or "").strip()
        if not article_id:
            rejects.append(RowReject("articles", i, "", "empty article_id"))
            continue
        if article_id in seen_ids:
            raise DataError(f"{articles_path}: row {i}: duplicate article_id {article_id!r}")
        title = (row.get("title") or "").strip()
        if not title:
            rejects.append(RowReject("articles", i, article_id, "empty title"))
            continue
        uoa = _parse_int(row.get("uoa") or "")
        if uoa is None or not UOA_MIN <= uoa <= UOA_MAX:
            rejects.append(RowReject("articles", i, article_id, "uoa out of range"))
            continue
        institution_id = (row.get("institution_id") or "").strip()
        if not institution_id:
            rejects.append(RowReject("articles", i, article_id, "empty institution_id"))
            continue
        pub_year = _parse_int(row.get("pub_year") or "")
        if pub_year is None:
            rejects.append(RowReject("articles", i, article_id, "pub_year not an integer"))
            continue
        doi = (row.get("doi") or "").strip() or None
        seen_ids.add(article_id)
        articles.append(
            Article(
                article_id=article_id,
                title=title,
                abstract=row.get("abstract") or "",
                uoa=uoa,
                institution_id=institution_id,
                pub_year=pub_year,
                doi=doi,
            )
        )

    profiles: dict[tuple[str, int], DepartmentProfile] = {}
    for i, row in enumerate(_read_rows(profiles_path, PROFILE_COLUMNS), start=1):
        institution_id = (row.get("institution_id") or "").strip()
        uoa = _parse_int(row.get("uoa") or "")
        key_repr = f"{institution_id}/uoa={row.get('uoa')}"
        if not institution_id:
            rejects.append(RowReject("profiles", i, key_repr, "empty institution_id"))
            continue
        if uoa is None or not UOA_MIN <= uoa <= UOA_MAX:
            rejects.append(RowReject("profiles", i, key_repr, "uoa out of range"))
            continue
        star_pct: dict[int, float] = {}
        bad = None
        for level in STAR_LEVELS:
            raw = (row.get(f"pct_star{level}") or "").strip()
            try:
                pct = float(raw)
            except ValueError:
                bad = f"pct_star{level} not a number"
                break
            if pct < 0 or not math.isfinite(pct):
                bad = f"pct_star{level} negative or non-finite"
                break
            star_pct[level] = pct
        if bad is None and (row.get(OPTIONAL_PROFILE_COLUMN) or "").strip():
            try:
                pct0 = float(row[OPTIONAL_PROFILE_COLUMN])
            except ValueError:
                bad = "pct_star0 not a number"
            else:
                if pct0 < 0 or not math.isfinite(pct0):
                    bad = "pct_star0 negative or non-finite"
                else:
                    star_pct[0] = pct0
        if bad is not None:
            rejects.append(RowReject("profiles", i, key_repr, bad))
            continue
        total = math.fsum(star_pct.values())
        if abs(total - 100.0) > PROFILE_SUM_TOLERANCE:
            rejects.append(RowReject("profiles", i, key_repr, f"percentages sum to {total:g}, not 100"))
            continue
        key = (institution_id, uoa)
        if key in profiles:
            raise DataError(f"{profiles_path}: row {i}: duplicate profile for {key}")
        profiles[key] = DepartmentProfile(institution_id=institution_id, uoa=uoa, star_pct=star_pct)

    if rejects:
        log.warning("load_corpus: %d rows rejected (see Corpus.rejects)", len(rejects))
    provenance = {
        "articles_path": str(articles_path),
        "profiles_path": str(profiles_path),
        "loaded_at": datetime.now(timezone.utc).isoformat(),
    }
    return Corpus(
        articles=tuple(articles),
        profiles=profiles,
        provenance=provenance,
        rejects=tuple(rejects),
    )


def save_corpus(corpus: Corpus, articles_path: str | Path, profiles_path: str | Path) -> None:
    """Write a corpus back to the same delimited layout ``load_corpus`` reads."""
    articles_path = Path(articles_path)
    profiles_path = Path(profiles_path)
    with open(articles_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=_delimiter_for(articles_path))
        writer.writerow(ARTICLE_COLUMNS)
        for a in corpus.articles:
            writer.writerow([a.article_id, a.title, a.abstract, a.uoa, a.institution_id, a.pub_year, a.doi or ""])
    has_level0 = any(0 in p.star_pct for p in corpus.profiles.values())
    columns = list(PROFILE_COLUMNS) + ([OPTIONAL_PROFILE_COLUMN] if has_level0 else [])
    with open(profiles_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=_delimiter_for(profiles_path))
        writer.writerow(columns)
        for key in sorted(corpus.profiles):
            p = corpus.profiles[key]
            row = [p.institution_id, p.uoa] + [repr(p.star_pct[s]) for s in STAR_LEVELS]
            if has_level0:
                row.append(repr(p.star_pct[0]) if 0 in p.star_pct else "")
            writer.writerow(row)


def departmental_mean(
    profile: DepartmentProfile,
    include_level0: bool = False,
    level0_value: float = 0.0,
) -> float:
    """Star-weighted mean quality of a department profile.

    The mean is sum(level * pct) / sum(pct) over the included levels, so
    excluding the level-0 bucket renormalises the remaining percentages
    automatically. With ``include_level0`` the bucket contributes at
    ``level0_value``.
    """
    total = 0.0
    weight = 0.0
    for level, pct in sorted(profile.star_pct.items()):
        if level == 0:
            if not include_level0:
                continue
            value = level0_value
        else:
            value = float(level)
        total += value * pct
        weight += pct
    if weight <= 0:
        raise DegenerateDataError(
            f"profile {(profile.institution_id, profile.uoa)}: all included percentages are zero"
        )
    return total / weight


def abstract_length(abstract: str, metric: str = "chars") -> int:
    """Length of an abstract after whitespace normalisation."""
    words = abstract.split()
    if metric == "chars":
        return len(" ".join(words))
    if metric == "words":
        return len(words)
    raise DataError(f"unknown length metric {metric!r} (expected 'chars' or 'words')")


def filter_short_abstracts(
    corpus: Corpus,
    fraction: float = 0.10,
    metric: str = "chars",
) -> tuple[Corpus, FilterReport]:
    """Remove the shortest ``fraction`` of abstracts within each UoA.

    Per UoA the threshold is the length of the k-th shortest abstract with
    k = floor(fraction * n). Everything strictly below the threshold goes,
    then articles at exactly the threshold (ascending article_id) until k
    are removed, making the cut deterministic under ties.
    """
    if not 0 <= fraction < 1:
        raise DataError(f"filter fraction must be in [0, 1), got {fraction}")
    thresholds: dict[int, int] = {}
    removed: dict[int, tuple[str, ...]] = {}
    drop: set[str] = set()
    for uoa, articles in sorted(corpus.by_uoa().items()):
        k = math.floor(fraction * len(articles))
        if k == 0:
            continue
        ordered = sorted(articles, key=lambda a: (abstract_length(a.abstract, metric), a.article_id))
        cut = ordered[:k]
        thresholds[uoa] = abstract_length(cut[-1].abstract, metric)
        ids = tuple(sorted(a.article_id for a in cut))
        removed[uoa] = ids
        drop.update(ids)
    kept = tuple(a for a in corpus.articles if a.article_id not in drop)
    report = FilterReport(fraction=fraction, metric=metric, thresholds=thresholds, removed=removed)
    filtered = replace(corpus, articles=kept)
    return filtered, report


def attach_gold_scores(
    corpus: Corpus,
    include_level0: bool = False,
    level0_value: float = 0.0,
) -> dict[str, float]:
    """Map every article to its department's mean quality score.

    The department average stands in for the unavailable per-article
    scores, so two articles from the same submission share a gold score.
    """
    missing = sorted(
        {
            (a.institution_id, a.uoa)
            for a in corpus.articles
            if (a.institution_id, a.uoa) not in corpus.profiles
        }
    )
    if missing:
        raise DataError(f"no department profile for {len(missing)} key(s): {missing[:10]}")
    means = {
        key: departmental_mean(profile, include_level0=include_level0, level0_value=level0_value)
        for key, profile in corpus.profiles.items()
    }
    return {a.article_id: means[(a.institution_id, a.uoa)] for a in corpus.articles}
