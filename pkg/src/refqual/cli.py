"""Command-line pipeline: staged subcommands communicating through files.

Each stage reads the previous stage's artifacts from the campaign output
directory and writes its own, with a provenance sidecar, so partial
re-runs and audits stay cheap. Given an unchanged config, seed, and
warmed cache, every output table is byte-identical across runs.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from . import analysis, costmodel
from .config import CampaignConfig, load_config
from .corpus import (
    Corpus,
    attach_gold_scores,
    filter_short_abstracts,
    load_corpus,
    save_corpus,
)
from .errors import (
    EXIT_OK,
    EXIT_USAGE,
    BackendError,
    DataError,
    RefqualError,
)
from .gateway import (
    LiveBackend,
    MockBackend,
    RawReport,
    RunLedger,
    ScoreCache,
    schedule_runs,
    submit,
)
from .indicators import CitationRecord, batch_nlcs
from .prompts import build_prompt, group_for_uoa, prompt_checksums, system_prompt
from .provenance import write_sidecar
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

log = logging.getLogger(__name__)

ARTICLES_FILTERED = "articles_filtered.csv"
PROFILES_USED = "profiles_used.csv"
GOLD_SCORES = "gold_scores.csv"
LOAD_REJECTS = "load_rejects.csv"
FILTER_REPORT = "filter_report.json"
RAW_REPORTS = "raw_reports.jsonl"
RUN_LEDGER = "run_ledger.jsonl"
PARSED_SCORES = "parsed_scores.csv"
UNRESOLVED_QUEUE = "unresolved_queue.jsonl"
MANUAL_RESOLUTIONS = "manual_resolutions.jsonl"
PARSE_EXCLUSIONS = "parse_exclusions.csv"
MODEL_MEANS = "model_means.csv"
COMBINED_MEANS = "combined_means.csv"
NLCS_VALUES = "nlcs_values.csv"
NLCS_MISSING = "nlcs_missing.csv"
CORRELATIONS = "correlations.csv"
CI_OVERLAP = "ci_overlap.csv"
YEAR_TREND = "year_trend.csv"
MEAN_SCORES = "mean_scores.csv"
COST_CURVE = "cost_curve.csv"
REPORT_MANIFEST = "report_manifest.json"

COMBINED_ID = "combined"

# Tables the determinism contract covers (ledgers and queues are journals).
OUTPUT_TABLES = (
    ARTICLES_FILTERED,
    PROFILES_USED,
    GOLD_SCORES,
    RAW_REPORTS,
    PARSED_SCORES,
    MODEL_MEANS,
    COMBINED_MEANS,
    NLCS_VALUES,
    NLCS_MISSING,
    CORRELATIONS,
    CI_OVERLAP,
    YEAR_TREND,
    MEAN_SCORES,
    COST_CURVE,
)


def _fmt(value: object) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_table(path: Path, header: Sequence[str], rows: Iterable[Sequence[object]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _read_table(path: Path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _require(path: Path, producer: str) -> Path:
    if not path.exists():
        raise DataError(f"missing artifact {path.name}; run `refqual {producer}` first")
    return path


def _sidecar(
    cfg: CampaignConfig,
    artifact: Path,
    inputs: Mapping[str, Path],
    seed: int | None = None,
    notes: str | None = None,
) -> None:
    write_sidecar(
        artifact,
        config_digest=cfg.config_digest,
        prompt_checksums=prompt_checksums(),
        seed=seed,
        inputs={name: p for name, p in inputs.items()},
        notes=notes,
    )


def _load_filtered_corpus(cfg: CampaignConfig) -> Corpus:
    articles = _require(cfg.output_dir / ARTICLES_FILTERED, "ingest")
    profiles = _require(cfg.output_dir / PROFILES_USED, "ingest")
    return load_corpus(articles, profiles)


def _read_gold(cfg: CampaignConfig) -> dict[str, float]:
    path = _require(cfg.output_dir / GOLD_SCORES, "ingest")
    return {row["article_id"]: float(row["gold_score"]) for row in _read_table(path)}


def _read_latent(path: Path) -> dict[str, float]:
    if not path.exists():
        raise DataError(f"latent quality file not found: {path}")
    return {row["article_id"]: float(row["latent_quality"]) for row in _read_table(path)}


def _read_citations(path: Path, snapshot_id: str) -> list[CitationRecord]:
    if not path.exists():
        raise DataError(f"citations file not found: {path}")
    records = []
    for i, row in enumerate(_read_table(path), start=1):
        cells = set()
        for token in (row.get("cells") or "").split(";"):
            token = token.strip()
            if not token:
                continue
            field_id, _, year = token.rpartition(":")
            if not field_id:
                raise DataError(f"{path}: row {i}: malformed cell {token!r} (expected field:year)")
            try:
                cells.add((field_id, int(year)))
            except ValueError:
                raise DataError(f"{path}: row {i}: non-integer year in cell {token!r}") from None
        try:
            raw_count = int(row["raw_count"])
        except (KeyError, ValueError):
            raise DataError(f"{path}: row {i}: missing or non-integer raw_count") from None
        records.append(
            CitationRecord(
                article_id=row["article_id"],
                snapshot_id=snapshot_id,
                raw_count=raw_count,
                cells=frozenset(cells),
            )
        )
    return records


def _read_theoretical_max(path: Path) -> dict[int, analysis.TheoreticalMax]:
    if not path.exists():
        raise DataError(f"theoretical-max file not found: {path}")
    maxima = {}
    for row in _read_table(path):
        uoa = int(row["uoa"])
        maxima[uoa] = analysis.TheoreticalMax(uoa=uoa, rho_max=float(row["rho_max"]))
    return maxima


def _read_parsed_scores(cfg: CampaignConfig) -> list[ParsedScore]:
    path = _require(cfg.output_dir / PARSED_SCORES, "parse")
    scores = []
    for row in _read_table(path):
        dims = None
        if row["orig"] and row["sig"] and row["rig"]:
            dims = (float(row["orig"]), float(row["sig"]), float(row["rig"]))
        scores.append(
            ParsedScore(
                article_id=row["article_id"],
                model_id=row["model_id"],
                run_index=int(row["run_index"]),
                resolved=float(row["resolved"]),
                method=Method(row["method"]),
                overall=float(row["overall"]) if row["overall"] else None,
                dims=dims,
            )
        )
    return scores


def _read_model_means(cfg: CampaignConfig) -> dict[str, dict[str, float]]:
    path = _require(cfg.output_dir / MODEL_MEANS, "aggregate")
    means: dict[str, dict[str, float]] = {}
    for row in _read_table(path):
        means.setdefault(row["model_id"], {})[row["article_id"]] = float(row["mean_score"])
    return means


def _indicator_maps(cfg: CampaignConfig) -> dict[str, dict[str, float]]:
    """Every indicator the campaign produced: model means, combined, NLCS."""
    indicators: dict[str, dict[str, float]] = dict(sorted(_read_model_means(cfg).items()))
    combined_path = cfg.output_dir / COMBINED_MEANS
    if combined_path.exists():
        indicators[COMBINED_ID] = {
            row["article_id"]: float(row["mean_score"]) for row in _read_table(combined_path)
        }
    nlcs_path = cfg.output_dir / NLCS_VALUES
    if nlcs_path.exists():
        for row in _read_table(nlcs_path):
            indicators.setdefault(f"nlcs-{row['snapshot_id']}", {})[row["article_id"]] = float(row["nlcs"])
    return indicators


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------

def cmd_ingest(cfg: CampaignConfig, args: argparse.Namespace) -> int:
    corpus = load_corpus(cfg.articles_path, cfg.profiles_path)
    filtered, report = filter_short_abstracts(corpus, cfg.filter_fraction, cfg.filter_metric)
    gold = attach_gold_scores(filtered)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)

    save_corpus(filtered, out / ARTICLES_FILTERED, out / PROFILES_USED)
    _write_table(
        out / GOLD_SCORES,
        ("article_id", "gold_score"),
        ((aid, gold[aid]) for aid in sorted(gold)),
    )
    _write_table(
        out / LOAD_REJECTS,
        ("source", "row", "key", "reason"),
        ((r.source, r.row, r.key, r.reason) for r in corpus.rejects),
    )
    filter_doc = {
        "fraction": report.fraction,
        "metric": report.metric,
        "thresholds": {str(u): report.thresholds[u] for u in sorted(report.thresholds)},
        "removed": {str(u): list(report.removed[u]) for u in sorted(report.removed)},
    }
    (out / FILTER_REPORT).write_text(json.dumps(filter_doc, indent=2, sort_keys=True) + "\n", "utf-8")

    inputs = {"articles": cfg.articles_path, "profiles": cfg.profiles_path}
    for name in (ARTICLES_FILTERED, PROFILES_USED, GOLD_SCORES):
        _sidecar(cfg, out / name, inputs)
    removed = len(report.removed_ids())
    print(
        f"ingest: {len(corpus.articles)} articles loaded, {len(corpus.rejects)} rows rejected, "
        f"{removed} removed by the short-abstract filter, {len(filtered.articles)} kept"
    )
    return EXIT_OK


def cmd_prompt_preview(cfg: CampaignConfig | None, args: argparse.Namespace) -> int:
    group = group_for_uoa(args.uoa)
    print(f"# system prompt ({group.name}, UoAs {group.lo}-{group.hi})")
    print(system_prompt(group))
    if args.article:
        if cfg is None:
            raise DataError("--article needs --config to locate the ingested corpus")
        corpus = _load_filtered_corpus(cfg)
        article = corpus.article_map().get(args.article)
        if article is None:
            raise DataError(f"article {args.article!r} not in the filtered corpus")
        pair = build_prompt(article)
        print("# user prompt")
        print(pair.user_text)
    return EXIT_OK


def _build_backend(cfg: CampaignConfig, kind: str, seed: int):
    if kind == "mock":
        if cfg.mock.latent_quality_path is None:
            raise DataError("mock backend needs [mock] latent_quality in the config")
        latent = _read_latent(cfg.mock.latent_quality_path)
        return MockBackend(latent, seed=seed, behaviors=cfg.mock.behaviors)
    if kind == "live":
        if not cfg.backend.endpoint:
            raise DataError("live backend needs [backend] endpoint in the config")
        return LiveBackend(cfg.backend.endpoint, api_key_env=cfg.backend.api_key_env)
    raise DataError(f"unknown backend kind {kind!r}")


def cmd_score(cfg: CampaignConfig, args: argparse.Namespace) -> int:
    corpus = _load_filtered_corpus(cfg)
    kind = args.backend or cfg.backend.kind
    seed = args.seed if args.seed is not None else cfg.mock.seed
    backend = _build_backend(cfg, kind, seed)
    cache = ScoreCache(cfg.cache_dir)
    out = cfg.output_dir
    ledger = RunLedger(out / RUN_LEDGER)
    models = {m.model_id: m for m in cfg.models}

    reports: list[RawReport] = []
    failures = 0
    for model in cfg.models:
        requests = schedule_runs(list(corpus.articles), model, cfg.repetitions)
        result = submit(
            requests,
            backend,
            cache,
            models=models,
            ledger=ledger,
            parallelism=cfg.backend.parallelism,
            retry_budget=cfg.backend.retry_budget,
            backoff_base=cfg.backend.backoff_base,
        )
        reports.extend(result.reports.values())
        failures += len(result.failures)

    reports.sort(key=lambda r: (r.model_id, r.run_index, r.article_id))
    with open(out / RAW_REPORTS, "w", encoding="utf-8") as fh:
        for report in reports:
            fh.write(
                json.dumps(
                    {
                        "article_id": report.article_id,
                        "model_id": report.model_id,
                        "run_index": report.run_index,
                        "report_text": report.report_text,
                        "received_at": report.received_at,
                    },
                    ensure_ascii=False,
                    sort_keys=True,
                )
                + "\n"
            )
    _sidecar(cfg, out / RAW_REPORTS, {"articles": out / ARTICLES_FILTERED}, seed=seed)
    print(
        f"score: {len(reports)} reports ({failures} failures), "
        f"backend={kind}, recorded cost={ledger.total_cost():g}"
    )
    return EXIT_OK


def _read_raw_reports(cfg: CampaignConfig) -> list[RawReport]:
    path = _require(cfg.output_dir / RAW_REPORTS, "score")
    reports = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            doc = json.loads(line)
            reports.append(
                RawReport(
                    article_id=doc["article_id"],
                    model_id=doc["model_id"],
                    run_index=doc["run_index"],
                    report_text=doc["report_text"],
                    received_at=doc["received_at"],
                )
            )
    return reports


def _read_resolutions(path: Path) -> dict[tuple[str, str, int], str]:
    resolutions: dict[tuple[str, str, int], str] = {}
    if path.exists():
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                doc = json.loads(line)
                resolutions[(doc["article_id"], doc["model_id"], doc["run_index"])] = doc["entry"]
    return resolutions


def _run_parse(cfg: CampaignConfig) -> tuple[list[ParsedScore], list[Unresolved], list[ManualDiscard]]:
    reports = _read_raw_reports(cfg)
    resolutions = _read_resolutions(cfg.output_dir / MANUAL_RESOLUTIONS)
    parsed: list[ParsedScore] = []
    unresolved: list[Unresolved] = []
    excluded: list[ManualDiscard] = []
    for report in reports:
        outcome = parse_report(report)
        if isinstance(outcome, Unresolved):
            entry = resolutions.get(outcome.key)
            if entry is None:
                unresolved.append(outcome)
                continue
            manual = resolve_manually(outcome, entry)
            if isinstance(manual, ManualDiscard):
                excluded.append(manual)
            else:
                parsed.append(manual)
        else:
            parsed.append(outcome)
    parsed.sort(key=lambda s: (s.article_id, s.model_id, s.run_index))
    return parsed, unresolved, excluded


def _write_parse_artifacts(
    cfg: CampaignConfig,
    parsed: list[ParsedScore],
    unresolved: list[Unresolved],
    excluded: list[ManualDiscard],
) -> None:
    out = cfg.output_dir
    rows = []
    for s in parsed:
        dims = s.dims or (None, None, None)
        rows.append(
            (s.article_id, s.model_id, s.run_index, s.overall, dims[0], dims[1], dims[2], s.resolved, s.method.value)
        )
    _write_table(
        out / PARSED_SCORES,
        ("article_id", "model_id", "run_index", "overall", "orig", "sig", "rig", "resolved", "method"),
        rows,
    )
    with open(out / UNRESOLVED_QUEUE, "w", encoding="utf-8") as fh:
        for item in sorted(unresolved, key=lambda u: u.key):
            fh.write(
                json.dumps(
                    {
                        "article_id": item.article_id,
                        "model_id": item.model_id,
                        "run_index": item.run_index,
                        "report_text": item.report_text,
                    },
                    ensure_ascii=False,
                    sort_keys=True,
                )
                + "\n"
            )
    _write_table(
        out / PARSE_EXCLUSIONS,
        ("article_id", "model_id", "run_index", "reason"),
        ((e.article_id, e.model_id, e.run_index, e.reason) for e in sorted(excluded, key=lambda e: (e.article_id, e.model_id, e.run_index))),
    )
    _sidecar(cfg, out / PARSED_SCORES, {"raw_reports": out / RAW_REPORTS})


def cmd_parse(cfg: CampaignConfig, args: argparse.Namespace) -> int:
    parsed, unresolved, excluded = _run_parse(cfg)
    _write_parse_artifacts(cfg, parsed, unresolved, excluded)
    print(
        f"parse: {len(parsed)} scores extracted, {len(unresolved)} unresolved, "
        f"{len(excluded)} excluded as scoreless"
    )
    if unresolved:
        print(f"parse: run `refqual resolve` to adjudicate the {len(unresolved)} queued report(s)")
    return EXIT_OK


def resolve_queue(
    cfg: CampaignConfig,
    input_fn: Callable[[str], str] | None = None,
    print_fn: Callable[[str], None] = print,
) -> int:
    """Interactive adjudication loop over the unresolved queue.

    Answers append to the resolutions journal, so a re-run never re-asks;
    entering a score outside [1, 4] re-prompts.
    """
    if input_fn is None:
        input_fn = input
    queue_path = _require(cfg.output_dir / UNRESOLVED_QUEUE, "parse")
    items = []
    with open(queue_path, encoding="utf-8") as fh:
        for line in fh:
            doc = json.loads(line)
            items.append(
                Unresolved(doc["article_id"], doc["model_id"], doc["run_index"], doc["report_text"])
            )
    already = _read_resolutions(cfg.output_dir / MANUAL_RESOLUTIONS)
    pending = [item for item in items if item.key not in already]
    if not pending:
        print_fn("resolve: queue is empty")
        return 0
    answered = 0
    with open(cfg.output_dir / MANUAL_RESOLUTIONS, "a", encoding="utf-8") as journal:
        for item in pending:
            print_fn(f"--- {item.article_id} / {item.model_id} / run {item.run_index} ---")
            print_fn(item.report_text)
            while True:
                entry = input_fn("score [1-4, fractions ok] or 'no score': ").strip()
                try:
                    resolve_manually(item, entry)
                except DataError as exc:
                    print_fn(f"  {exc}; try again")
                    continue
                break
            journal.write(
                json.dumps(
                    {
                        "article_id": item.article_id,
                        "model_id": item.model_id,
                        "run_index": item.run_index,
                        "entry": entry,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
            answered += 1
    return answered


def cmd_resolve(cfg: CampaignConfig, args: argparse.Namespace) -> int:
    answered = resolve_queue(cfg)
    if answered:
        parsed, unresolved, excluded = _run_parse(cfg)
        _write_parse_artifacts(cfg, parsed, unresolved, excluded)
        print(f"resolve: {answered} report(s) adjudicated, parsed-score store refreshed")
    return EXIT_OK


def cmd_aggregate(cfg: CampaignConfig, args: argparse.Namespace) -> int:
    parsed = _read_parsed_scores(cfg)
    by_model: dict[str, list[ParsedScore]] = {}
    for score in parsed:
        by_model.setdefault(score.model_id, []).append(score)
    out = cfg.output_dir
    rows = []
    means_by_model: dict[str, dict[str, float]] = {}
    for model_id in sorted(by_model):
        averages = average_runs(by_model[model_id], expected_runs=cfg.repetitions)
        means_by_model[model_id] = dict(averages.means)
        for aid in sorted(averages.means):
            rows.append(
                (
                    aid,
                    model_id,
                    averages.means[aid],
                    averages.run_counts[aid],
                    int(aid in averages.short_counted),
                )
            )
    _write_table(
        out / MODEL_MEANS,
        ("article_id", "model_id", "mean_score", "run_count", "short_count"),
        rows,
    )
    _sidecar(cfg, out / MODEL_MEANS, {"parsed_scores": out / PARSED_SCORES})

    if len(means_by_model) == 2:
        first, second = sorted(means_by_model)
        combined = combine_models(means_by_model[first], means_by_model[second])
        _write_table(
            out / COMBINED_MEANS,
            ("article_id", "mean_score"),
            ((aid, combined[aid]) for aid in sorted(combined)),
        )
        _sidecar(cfg, out / COMBINED_MEANS, {"model_means": out / MODEL_MEANS})
    else:
        log.warning("aggregate: %d model(s) present; combined means need exactly 2", len(means_by_model))
    print(f"aggregate: means for {len(means_by_model)} model(s) over {len(rows)} article rows")
    return EXIT_OK


def cmd_nlcs(cfg: CampaignConfig, args: argparse.Namespace) -> int:
    if not cfg.snapshots:
        raise DataError("no [citations] snapshots configured")
    corpus = _load_filtered_corpus(cfg)
    records = {
        snapshot_id: _read_citations(path, snapshot_id)
        for snapshot_id, path in sorted(cfg.snapshots.items())
    }
    result = batch_nlcs(corpus.articles, records)
    out = cfg.output_dir
    _write_table(
        out / NLCS_VALUES,
        ("article_id", "snapshot_id", "nlcs"),
        (
            (aid, snap, result.values[(aid, snap)].value)
            for aid, snap in sorted(result.values)
        ),
    )
    _write_table(
        out / NLCS_MISSING,
        ("snapshot_id", "article_id"),
        (
            (snap, aid)
            for snap in sorted(result.missing)
            for aid in result.missing[snap]
        ),
    )
    _sidecar(cfg, out / NLCS_VALUES, {name: path for name, path in cfg.snapshots.items()})
    total_missing = sum(len(v) for v in result.missing.values())
    print(f"nlcs: {len(result.values)} values across {len(records)} snapshot(s), {total_missing} article-snapshot gaps")
    return EXIT_OK


def _uoa_sort_key(uoa: int | str) -> tuple[int, int]:
    return (1, 0) if uoa == analysis.ALL_UOAS else (0, int(uoa))


def cmd_correlate(cfg: CampaignConfig, args: argparse.Namespace) -> int:
    gold = _read_gold(cfg)
    corpus = _load_filtered_corpus(cfg)
    indicators = _indicator_maps(cfg)
    if not indicators:
        raise DataError("no indicators found; run `refqual aggregate` (and optionally `refqual nlcs`) first")
    maxima = (
        _read_theoretical_max(cfg.theoretical_max_path)
        if cfg.theoretical_max_path is not None
        else {}
    )
    results: list[analysis.CorrelationResult] = []
    for indicator_id in sorted(indicators):
        rows = analysis.per_uoa_correlations(
            indicators[indicator_id],
            gold,
            corpus,
            indicator_id=indicator_id,
            level=cfg.bootstrap.level,
            resamples=cfg.bootstrap.resamples,
            seed=cfg.bootstrap.seed,
        )
        results.extend(analysis.scale_results(rows, maxima))
    results.sort(key=lambda r: (r.indicator_id, _uoa_sort_key(r.uoa)))
    out = cfg.output_dir
    _write_table(
        out / CORRELATIONS,
        ("indicator_id", "uoa", "n", "rho", "ci_low", "ci_high", "scaled_rho"),
        ((r.indicator_id, r.uoa, r.n, r.rho, r.ci_low, r.ci_high, r.scaled_rho) for r in results),
    )

    by_uoa: dict[int | str, list[analysis.CorrelationResult]] = {}
    for result in results:
        by_uoa.setdefault(result.uoa, []).append(result)
    overlap_rows = []
    for uoa in sorted(by_uoa, key=_uoa_sort_key):
        group = sorted(by_uoa[uoa], key=lambda r: r.indicator_id)
        for i, a in enumerate(group):
            for b in group[i + 1 :]:
                overlap_rows.append((uoa, a.indicator_id, b.indicator_id, int(analysis.ci_overlap(a, b))))
    _write_table(out / CI_OVERLAP, ("uoa", "indicator_a", "indicator_b", "ci_overlap"), overlap_rows)
    _sidecar(cfg, out / CORRELATIONS, {"gold": out / GOLD_SCORES}, seed=cfg.bootstrap.seed)
    print(f"correlate: {len(results)} rows over {len(indicators)} indicator(s)")
    return EXIT_OK


def cmd_year_trend(cfg: CampaignConfig, args: argparse.Namespace) -> int:
    gold = _read_gold(cfg)
    corpus = _load_filtered_corpus(cfg)
    indicators = _indicator_maps(cfg)
    rows = analysis.per_year_trend(indicators, gold, corpus)
    out = cfg.output_dir
    _write_table(
        out / YEAR_TREND,
        ("year", "indicator_id", "weighted_rho", "n"),
        ((r.year, r.indicator_id, r.weighted_rho, r.n) for r in rows),
    )
    _sidecar(cfg, out / YEAR_TREND, {"gold": out / GOLD_SCORES})
    print(f"year-trend: {len(rows)} rows")
    return EXIT_OK


def cmd_mean_summary(cfg: CampaignConfig, args: argparse.Namespace) -> int:
    gold = _read_gold(cfg)
    sources: dict[str, Mapping[str, float]] = {"gold": gold}
    sources.update(_read_model_means(cfg))
    combined_path = cfg.output_dir / COMBINED_MEANS
    if combined_path.exists():
        sources[COMBINED_ID] = {
            row["article_id"]: float(row["mean_score"]) for row in _read_table(combined_path)
        }
    rows = analysis.mean_score_summary(sources)
    out = cfg.output_dir
    _write_table(out / MEAN_SCORES, ("source", "mean", "n"), ((r.source, r.mean, r.n) for r in rows))
    _sidecar(cfg, out / MEAN_SCORES, {"gold": out / GOLD_SCORES})
    print(f"mean-summary: {len(rows)} sources")
    return EXIT_OK


def cmd_cost_curve(cfg: CampaignConfig, args: argparse.Namespace) -> int:
    if len(cfg.models) != 2:
        raise DataError(f"cost-curve needs exactly 2 configured models, found {len(cfg.models)}")
    model_a, model_b = cfg.models
    parsed = _read_parsed_scores(cfg)
    runs: dict[str, dict[str, dict[int, float]]] = {model_a.model_id: {}, model_b.model_id: {}}
    for score in parsed:
        if score.model_id in runs:
            runs[score.model_id].setdefault(score.article_id, {})[score.run_index] = score.resolved
    gold = _read_gold(cfg)
    corpus = _load_filtered_corpus(cfg)
    points = costmodel.cost_curve(
        runs[model_a.model_id],
        runs[model_b.model_id],
        gold,
        corpus,
        costs=(model_a.unit_cost, model_b.unit_cost),
        nominal_runs=cfg.repetitions,
    )
    front = {(p.runs_a, p.runs_b) for p in costmodel.pareto_front(points)}
    points.sort(key=lambda p: (p.runs_a, p.runs_b))
    out = cfg.output_dir
    _write_table(
        out / COST_CURVE,
        ("runs_a", "runs_b", "unit_cost", "subset_count", "mean_rho", "pareto_flag", "fallback_flag"),
        (
            (
                p.runs_a,
                p.runs_b,
                p.unit_cost,
                p.subset_count,
                p.mean_rho,
                int((p.runs_a, p.runs_b) in front),
                int(p.used_fallback),
            )
            for p in points
        ),
    )
    _sidecar(cfg, out / COST_CURVE, {"parsed_scores": out / PARSED_SCORES})
    print(f"cost-curve: {len(points)} mixes ({model_a.model_id} @ {model_a.unit_cost:g}, {model_b.model_id} @ {model_b.unit_cost:g}), {len(front)} on the front")
    return EXIT_OK


def cmd_report(cfg: CampaignConfig, args: argparse.Namespace) -> int:
    cmd_aggregate(cfg, args)
    if cfg.snapshots:
        cmd_nlcs(cfg, args)
    cmd_correlate(cfg, args)
    cmd_year_trend(cfg, args)
    cmd_mean_summary(cfg, args)
    if len(cfg.models) == 2:
        cmd_cost_curve(cfg, args)
    out = cfg.output_dir
    from .provenance import sha256_file

    manifest = {
        "config_sha256": cfg.config_digest,
        "prompt_checksums": prompt_checksums(),
        "bootstrap_seed": cfg.bootstrap.seed,
        "mock_seed": cfg.mock.seed,
        "tables": {
            name: sha256_file(out / name) for name in OUTPUT_TABLES if (out / name).exists()
        },
    }
    (out / REPORT_MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", "utf-8")
    print(f"report: bundle written to {out}")
    return EXIT_OK


def cmd_make_synth(cfg: CampaignConfig | None, args: argparse.Namespace) -> int:
    from .synthdata import make_synthetic_corpus, write_synthetic_corpus

    data = make_synthetic_corpus(seed=args.seed if args.seed is not None else 2024, n_articles=args.articles)
    write_synthetic_corpus(args.dest, data)
    print(f"make-synth: {len(data.corpus.articles)} articles written to {args.dest}")
    return EXIT_OK


# --------------------------------------------------------------------------
# Parser and entry point
# --------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # exit code 1 on usage errors
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


NEEDS_CONFIG = frozenset(
    {
        "ingest",
        "score",
        "parse",
        "resolve",
        "aggregate",
        "nlcs",
        "correlate",
        "year-trend",
        "mean-summary",
        "cost-curve",
        "report",
    }
)

COMMANDS = {
    "ingest": cmd_ingest,
    "prompt-preview": cmd_prompt_preview,
    "score": cmd_score,
    "parse": cmd_parse,
    "resolve": cmd_resolve,
    "aggregate": cmd_aggregate,
    "nlcs": cmd_nlcs,
    "correlate": cmd_correlate,
    "year-trend": cmd_year_trend,
    "mean-summary": cmd_mean_summary,
    "cost-curve": cmd_cost_curve,
    "report": cmd_report,
    "make-synth": cmd_make_synth,
}


def build_parser() -> _Parser:
    parser = _Parser(prog="refqual", description=__doc__)
    parser.add_argument("--config", help="campaign TOML file")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("ingest", help="load corpus, filter short abstracts, attach gold scores")
    preview = sub.add_parser("prompt-preview", help="print a system prompt (and a user prompt) for audit")
    preview.add_argument("--uoa", type=int, required=True)
    preview.add_argument("--article", help="article_id in the filtered corpus")
    score = sub.add_parser("score", help="schedule repetitions and submit them to the backend")
    score.add_argument("--backend", choices=("mock", "live"), help="override the configured backend")
    score.add_argument("--seed", type=int, help="override the mock backend seed")
    sub.add_parser("parse", help="extract star scores from the raw reports")
    sub.add_parser("resolve", help="adjudicate the unresolved queue interactively")
    sub.add_parser("aggregate", help="average runs per model and combine the two models")
    sub.add_parser("nlcs", help="compute citation indicators per snapshot")
    sub.add_parser("correlate", help="per-UoA correlations with bootstrap CIs and scaling")
    sub.add_parser("year-trend", help="weighted correlations by publication year")
    sub.add_parser("mean-summary", help="mean score per source")
    sub.add_parser("cost-curve", help="cost-efficiency of run mixes across the two models")
    sub.add_parser("report", help="run all analysis stages and bundle a provenance manifest")
    synth = sub.add_parser("make-synth", help="write the bundled synthetic corpus to a directory")
    synth.add_argument("--dest", required=True)
    synth.add_argument("--seed", type=int, default=None)
    synth.add_argument("--articles", type=int, default=2000)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if not args.config and args.command in NEEDS_CONFIG:
        parser.error(f"{args.command} requires --config")
    try:
        cfg = load_config(args.config) if args.config else None
        return COMMANDS[args.command](cfg, args)
    except BackendError as exc:
        log.error("backend failure: %s", exc)
        return exc.exit_code
    except RefqualError as exc:
        log.error("%s", exc)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
