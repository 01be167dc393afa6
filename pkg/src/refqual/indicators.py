"""Field/year-normalised log-transformed citation indicator (NLCS).

Every raw count c becomes ln(1+c). Reference means of those values are
computed per (field, year) cell over the supplied record universe, and an
article's indicator is its own ln(1+c) divided by the mean of its cells'
reference means (cell means averaged before the division). A value of 1
marks an article cited exactly at the average for its field and year.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Mapping

from .corpus import Article
from .errors import DataError

log = logging.getLogger(__name__)

Cell = tuple[str, int]


@dataclass(frozen=True)
class CitationRecord:
    """Raw citation count for one article in one snapshot."""

    article_id: str
    snapshot_id: str
    raw_count: int
    cells: frozenset[Cell]

    def __post_init__(self) -> None:
        if self.raw_count < 0:
            raise DataError(f"{self.article_id}: negative citation count")
        if not self.cells:
            raise DataError(f"{self.article_id}: citation record without field/year cells")


@dataclass(frozen=True)
class FieldYearReference:
    """Mean ln(1+c) and contributing-article count per (field, year) cell."""

    snapshot_id: str
    means: Mapping[Cell, float]
    counts: Mapping[Cell, int]


@dataclass(frozen=True)
class NlcsValue:
    article_id: str
    snapshot_id: str
    value: float


def log_citations(raw_count: int) -> float:
    return math.log1p(raw_count)


def build_reference(records: Iterable[CitationRecord]) -> FieldYearReference:
    """Per-cell means of ln(1+c) over one snapshot's records.

    An article sitting in k cells contributes its value to all k cell
    means.
    """
    records = list(records)
    if not records:
        raise DataError("build_reference: no citation records supplied")
    snapshot_ids = {r.snapshot_id for r in records}
    if len(snapshot_ids) != 1:
        raise DataError(f"build_reference: mixed snapshots {sorted(snapshot_ids)}")
    sums: dict[Cell, list[float]] = {}
    for record in records:
        value = log_citations(record.raw_count)
        for cell in sorted(record.cells):
            sums.setdefault(cell, []).append(value)
    means = {cell: math.fsum(values) / len(values) for cell, values in sums.items()}
    counts = {cell: len(values) for cell, values in sums.items()}
    return FieldYearReference(snapshot_id=next(iter(snapshot_ids)), means=means, counts=counts)


def nlcs(record: CitationRecord, reference: FieldYearReference) -> NlcsValue:
    """The normalised indicator for one record against a reference.

    With a multi-cell record the cell means are averaged before the
    division. A zero-cited article in an all-zero cell is exactly
    averagely cited, so e = 0 with l = 0 yields 1.0 by analytic limit.
    """
    if record.snapshot_id != reference.snapshot_id:
        raise DataError(
            f"snapshot mismatch: record {record.snapshot_id!r} vs reference {reference.snapshot_id!r}"
        )
    cells = sorted(record.cells)
    missing = [c for c in cells if c not in reference.means]
    if missing:
        raise DataError(f"{record.article_id}: cells {missing} absent from reference set")
    l = log_citations(record.raw_count)
    e = math.fsum(reference.means[c] for c in cells) / len(cells)
    if e == 0.0:
        if l == 0.0:
            return NlcsValue(record.article_id, record.snapshot_id, 1.0)
        raise DataError(
            f"{record.article_id}: cited article in an all-zero reference cell "
            "(reference inconsistent with record)"
        )
    return NlcsValue(record.article_id, record.snapshot_id, l / e)


@dataclass(frozen=True)
class BatchNlcsResult:
    values: Mapping[tuple[str, str], NlcsValue]
    missing: Mapping[str, tuple[str, ...]]  # snapshot -> articles with no record
    zero_cell_articles: Mapping[str, tuple[str, ...]]  # snapshot -> analytic-limit cases


def batch_nlcs(
    articles: Iterable[Article],
    records_by_snapshot: Mapping[str, Iterable[CitationRecord]],
) -> BatchNlcsResult:
    """Indicator values for every (article, snapshot) with a citation record.

    References are built per snapshot from that snapshot's full record
    set. Articles absent from a snapshot are reported rather than failed,
    because a later snapshot legitimately loses unmatched articles.
    """
    article_ids = [a.article_id for a in articles]
    values: dict[tuple[str, str], NlcsValue] = {}
    missing: dict[str, tuple[str, ...]] = {}
    zero_cell: dict[str, tuple[str, ...]] = {}
    for snapshot_id in sorted(records_by_snapshot):
        records = list(records_by_snapshot[snapshot_id])
        if not records:
            log.warning("batch_nlcs: snapshot %r has no records", snapshot_id)
            missing[snapshot_id] = tuple(article_ids)
            zero_cell[snapshot_id] = ()
            continue
        by_article: dict[str, CitationRecord] = {}
        for record in records:
            if record.snapshot_id != snapshot_id:
                raise DataError(
                    f"record for {record.article_id} labelled {record.snapshot_id!r} "
                    f"found under snapshot {snapshot_id!r}"
                )
            if record.article_id in by_article:
                raise DataError(f"duplicate citation record for {record.article_id} in {snapshot_id!r}")
            by_article[record.article_id] = record
        reference = build_reference(records)
        limits: list[str] = []
        for aid in article_ids:
            record = by_article.get(aid)
            if record is None:
                continue
            value = nlcs(record, reference)
            if value.value == 1.0 and log_citations(record.raw_count) == 0.0:
                limits.append(aid)
            values[(aid, snapshot_id)] = value
        missing[snapshot_id] = tuple(aid for aid in article_ids if aid not in by_article)
        zero_cell[snapshot_id] = tuple(limits)
        if missing[snapshot_id]:
            log.info(
                "batch_nlcs: %d article(s) missing from snapshot %r",
                len(missing[snapshot_id]),
                snapshot_id,
            )
    return BatchNlcsResult(values=values, missing=missing, zero_cell_articles=zero_cell)
