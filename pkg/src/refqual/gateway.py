"""Submission of scoring prompts to a backend.

Covers the repetition schedule (round-robin passes so repeats of the same
article are maximally separated), an append-only response cache keyed by
prompt checksum, bounded-parallelism submission with exponential backoff,
a campaign ledger, and a deterministic mock backend for offline runs.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Protocol, Sequence

import numpy as np

from .corpus import Article
from .errors import BackendError, DataError, FatalBackendError, TransientBackendError
from .prompts import PromptPair, build_prompt

log = logging.getLogger(__name__)

# Mock reports carry a fixed timestamp so offline campaigns are bit-reproducible.
MOCK_TIMESTAMP = "1970-01-01T00:00:00+00:00"


@dataclass(frozen=True)
class ModelSpec:
    """A scoring model plus its relative price per request."""

    model_id: str
    unit_cost: float
    params: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.unit_cost <= 0:
            raise DataError(f"model {self.model_id}: unit_cost must be positive")


@dataclass(frozen=True)
class ScoreRequest:
    article_id: str
    model_id: str
    run_index: int
    prompt: PromptPair

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.article_id, self.model_id, self.run_index)


@dataclass(frozen=True)
class RawReport:
    """One narrative evaluation as returned by a backend."""

    article_id: str
    model_id: str
    run_index: int
    report_text: str
    received_at: str
    backend_meta: Mapping[str, str] = field(default_factory=dict)

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.article_id, self.model_id, self.run_index)


class ScoringBackend(Protocol):
    def send(self, request: ScoreRequest, params: Mapping[str, object]) -> str:
        """Return the narrative report text for one request."""
        ...


def schedule_runs(
    articles: Sequence[Article],
    model: ModelSpec,
    repetitions: int = 5,
) -> list[ScoreRequest]:
    """Emit requests in whole-corpus round-robin passes.

    Pass 1 is run_index 1 for every article in corpus order, then pass 2,
    and so on, which keeps the repetitions of any one article as far apart
    as the schedule allows.
    """
    if repetitions < 1:
        raise DataError(f"repetitions must be >= 1, got {repetitions}")
    prompts = {a.article_id: build_prompt(a) for a in articles}
    return [
        ScoreRequest(a.article_id, model.model_id, run, prompts[a.article_id])
        for run in range(1, repetitions + 1)
        for a in articles
    ]


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "-", text) or "model"


class ScoreCache:
    """Append-only file store of raw reports, keyed by request checksum.

    One JSON file per request, named by the sha256 over model id, prompt
    text, and run index. Entries are written once via atomic rename and
    never overwritten, so a warmed cache replays a campaign exactly.
    """

    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._write_lock = threading.Lock()

    @staticmethod
    def key_digest(request: ScoreRequest) -> str:
        payload = "\x00".join(
            [
                request.model_id,
                request.prompt.system_text,
                request.prompt.user_text,
                str(request.run_index),
            ]
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def path_for(self, request: ScoreRequest) -> Path:
        digest = self.key_digest(request)
        return self.root / f"{_slug(request.model_id)}__r{request.run_index:02d}__{digest}.json"

    def get(self, request: ScoreRequest) -> RawReport | None:
        path = self.path_for(request)
        if not path.exists():
            return None
        entry = json.loads(path.read_text(encoding="utf-8"))
        return RawReport(
            article_id=entry["article_id"],
            model_id=entry["model_id"],
            run_index=entry["run_index"],
            report_text=entry["report_text"],
            received_at=entry["received_at"],
            backend_meta=entry.get("backend_meta", {}),
        )

    def put(self, request: ScoreRequest, report: RawReport) -> None:
        path = self.path_for(request)
        entry = {
            "article_id": report.article_id,
            "model_id": report.model_id,
            "run_index": report.run_index,
            "prompt_digest": self.key_digest(request),
            "report_text": report.report_text,
            "received_at": report.received_at,
            "backend_meta": dict(report.backend_meta),
        }
        with self._write_lock:
            if path.exists():
                return
            tmp = path.with_suffix(".tmp")
            tmp.write_text(json.dumps(entry, ensure_ascii=False, sort_keys=True), encoding="utf-8")
            tmp.replace(path)

    def __contains__(self, request: ScoreRequest) -> bool:
        return self.path_for(request).exists()


class RunLedger:
    """Append-only journal of every attempt, outcome, and cost in a campaign."""

    def __init__(self, path: str | Path | None = None) -> None:
        self.path = Path(path) if path is not None else None
        self.entries: list[dict[str, object]] = []
        self._lock = threading.Lock()
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)

    def record(
        self,
        request: ScoreRequest,
        event: str,
        *,
        attempt: int = 0,
        cached: bool = False,
        cost: float = 0.0,
        detail: str = "",
    ) -> None:
        entry = {
            "article_id": request.article_id,
            "model_id": request.model_id,
            "run_index": request.run_index,
            "event": event,
            "attempt": attempt,
            "cached": cached,
            "cost": cost,
            "detail": detail,
            "at": time.time(),
        }
        with self._lock:
            self.entries.append(entry)
            if self.path is not None:
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(entry, sort_keys=True) + "\n")

    def total_cost(self) -> float:
        return sum(
            e["cost"] for e in self.entries if e["event"] == "success" and not e["cached"]
        )


@dataclass
class SubmitResult:
    reports: dict[tuple[str, str, int], RawReport]
    failures: dict[tuple[str, str, int], str]

    def ordered_reports(self, requests: Sequence[ScoreRequest]) -> list[RawReport]:
        return [self.reports[r.key] for r in requests if r.key in self.reports]


def submit(
    requests: Sequence[ScoreRequest],
    backend: ScoringBackend | None,
    cache: ScoreCache,
    *,
    models: Mapping[str, ModelSpec] | None = None,
    ledger: RunLedger | None = None,
    parallelism: int = 4,
    retry_budget: int = 3,
    backoff_base: float = 0.5,
    sleep: Callable[[float], None] = time.sleep,
    now: Callable[[], str] | None = None,
) -> SubmitResult:
    """Serve requests from the cache, sending only misses to the backend.

    Misses run with at most ``parallelism`` in flight; transient failures
    back off exponentially until ``retry_budget`` attempts are spent, then
    become per-request failure entries and the campaign continues. Fatal
    backend errors abort. Every attempt lands in the ledger, and every
    success is persisted to the cache before it is returned.
    """
    keys = [r.key for r in requests]
    if len(set(keys)) != len(keys):
        raise DataError("duplicate (article_id, model_id, run_index) in request batch")
    ledger = ledger if ledger is not None else RunLedger()
    models = models or {}
    timestamp = now if now is not None else lambda: time.strftime("%Y-%m-%dT%H:%M:%S+00:00", time.gmtime())

    reports: dict[tuple[str, str, int], RawReport] = {}
    failures: dict[tuple[str, str, int], str] = {}
    misses: list[ScoreRequest] = []
    for request in requests:
        cached = cache.get(request)
        if cached is not None:
            reports[request.key] = cached
            ledger.record(request, "success", cached=True)
        else:
            misses.append(request)
    if misses and backend is None:
        raise FatalBackendError(f"{len(misses)} requests missing from cache and no backend configured")

    def unit_cost(request: ScoreRequest) -> float:
        spec = models.get(request.model_id)
        return spec.unit_cost if spec is not None else 0.0

    def params_for(request: ScoreRequest) -> Mapping[str, object]:
        spec = models.get(request.model_id)
        return spec.params if spec is not None else {}

    def worker(request: ScoreRequest) -> tuple[ScoreRequest, RawReport | None, BaseException | None, str]:
        for attempt in range(1, retry_budget + 1):
            try:
                text = backend.send(request, params_for(request))
            except TransientBackendError as exc:
                ledger.record(request, "retry", attempt=attempt, detail=str(exc))
                if attempt == retry_budget:
                    ledger.record(request, "failure", attempt=attempt, detail=f"retry budget exhausted: {exc}")
                    return request, None, None, f"retry budget exhausted: {exc}"
                sleep(backoff_base * (2 ** (attempt - 1)))
            except FatalBackendError as exc:
                ledger.record(request, "fatal", attempt=attempt, detail=str(exc))
                return request, None, exc, str(exc)
            except BackendError as exc:
                ledger.record(request, "failure", attempt=attempt, detail=str(exc))
                return request, None, None, str(exc)
            else:
                if not text:
                    ledger.record(request, "failure", attempt=attempt, detail="empty report")
                    return request, None, None, "empty report"
                report = RawReport(
                    article_id=request.article_id,
                    model_id=request.model_id,
                    run_index=request.run_index,
                    report_text=text,
                    received_at=timestamp(),
                )
                cache.put(request, report)
                ledger.record(request, "success", attempt=attempt, cost=unit_cost(request))
                return request, report, None, ""
        raise AssertionError("unreachable")

    fatal: BaseException | None = None
    if misses:
        with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
            futures = [pool.submit(worker, r) for r in misses]
            for future in as_completed(futures):
                request, report, exc, reason = future.result()
                if exc is not None:
                    fatal = fatal or exc
                elif report is not None:
                    reports[request.key] = report
                else:
                    failures[request.key] = reason
    if fatal is not None:
        raise fatal
    if failures:
        log.warning("submit: %d request(s) failed permanently", len(failures))
    return SubmitResult(reports=reports, failures=failures)


class LiveBackend:
    """Adapter for an HTTPS chat-completion-style scoring endpoint.

    Credentials come from the environment variable named by
    ``api_key_env``; the endpoint URL and generation parameters come from
    the campaign configuration.
    """

    def __init__(
        self,
        endpoint: str,
        api_key_env: str = "LLM_API_KEY",
        timeout: float = 120.0,
        session=None,
    ) -> None:
        import os

        import requests

        self.endpoint = endpoint.rstrip("/")
        api_key = os.environ.get(api_key_env, "")
        if not api_key:
            raise FatalBackendError(f"environment variable {api_key_env} is not set")
        self._headers = {"Authorization": f"Bearer {api_key}", "Content-Type": "application/json"}
        self.timeout = timeout
        self._session = session if session is not None else requests.Session()

    def send(self, request: ScoreRequest, params: Mapping[str, object]) -> str:
        import requests

        payload = {
            "model": request.model_id,
            "messages": [
                {"role": "system", "content": request.prompt.system_text},
                {"role": "user", "content": request.prompt.user_text},
            ],
        }
        payload.update(params)
        try:
            response = self._session.post(
                f"{self.endpoint}/chat/completions",
                json=payload,
                headers=self._headers,
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise TransientBackendError(f"request failed: {exc}") from exc
        if response.status_code in (401, 403):
            raise FatalBackendError(f"authentication rejected (HTTP {response.status_code})")
        if response.status_code == 429 or response.status_code >= 500:
            raise TransientBackendError(f"HTTP {response.status_code}")
        if response.status_code != 200:
            raise BackendError(f"HTTP {response.status_code}: {response.text[:200]}")
        try:
            return response.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, ValueError) as exc:
            raise BackendError(f"malformed response body: {exc}") from exc


# --------------------------------------------------------------------------
# Deterministic mock backend
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MockModelBehavior:
    """Knobs shaping one mock model's scores.

    noise is the per-run score spread, bias a systematic shift, and
    distortion a per-article misjudgement fixed across runs (a model that
    consistently over- or under-rates certain articles).
    """

    noise: float = 0.6
    bias: float = 0.0
    distortion: float = 0.0
    no_score_rate: float = 0.0
    fractional_rate: float = 0.15


_OPENERS = (
    "This article tackles a well-defined problem and communicates its aims clearly.",
    "The study addresses a question of recognised disciplinary interest.",
    "This submission engages seriously with its topic and situates itself in prior work.",
)
_ORIG_PHRASES = (
    "The conceptual framing is {adj}.",
    "Its methodological choices are {adj}.",
    "The contribution to the field reads as {adj}.",
)
_CLOSERS = (
    "The argument is coherent and the evidence base is handled competently.",
    "The analysis is appropriate to the data, though some claims could be tempered.",
    "The presentation is clear and the limitations are acknowledged.",
)
_ADJECTIVES = ("incremental", "solid", "notable", "ambitious", "distinctive")

_NO_SCORE_TEXT = (
    "This report offers a qualitative appraisal only. The work shows competent scholarship "
    "and a coherent argument, and its contribution sits within established lines of enquiry. "
    "A starred judgement is not stated here because the reviewer declined to commit to one."
)


def _stable_seed(*parts: object) -> int:
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def _format_star(value: float) -> str:
    if float(value).is_integer():
        return f"{int(value)}*"
    return f"{value:g}*"


def _clamp_star(value: float) -> float:
    return min(4.0, max(1.0, value))


def mock_generate(
    request: ScoreRequest,
    seed: int,
    latent_quality: Mapping[str, float],
    behavior: MockModelBehavior = MockModelBehavior(),
) -> RawReport:
    """Deterministic synthetic narrative report for one request.

    The embedded star scores are drawn from a distribution centred on the
    article's latent quality; everything is a pure function of the request
    key and the seed.
    """
    latent = latent_quality.get(request.article_id)
    if latent is None:
        raise DataError(f"no latent quality for article {request.article_id}")
    if not 1.0 <= latent <= 4.0:
        raise DataError(f"latent quality for {request.article_id} outside [1, 4]: {latent}")

    rng = np.random.default_rng(_stable_seed(seed, request.model_id, request.article_id, request.run_index))
    distortion = 0.0
    if behavior.distortion > 0:
        d_rng = np.random.default_rng(_stable_seed(seed, request.model_id, "distortion", request.article_id))
        distortion = behavior.distortion * d_rng.standard_normal()
    center = latent + behavior.bias + distortion

    opener = _OPENERS[int(rng.integers(len(_OPENERS)))]
    middle = _ORIG_PHRASES[int(rng.integers(len(_ORIG_PHRASES)))].format(
        adj=_ADJECTIVES[int(rng.integers(len(_ADJECTIVES)))]
    )
    closer = _CLOSERS[int(rng.integers(len(_CLOSERS)))]

    shape = rng.random()
    if shape < behavior.no_score_rate:
        text = _NO_SCORE_TEXT
    elif rng.random() < 0.5:
        raw = center + behavior.noise * rng.standard_normal()
        if rng.random() < behavior.fractional_rate:
            value = _clamp_star(round(raw * 2) / 2)
        else:
            value = _clamp_star(float(round(raw)))
        text = f"{opener} {middle} {closer} Overall score: {_format_star(value)}."
    else:
        dims = []
        for _ in range(3):
            raw = center + behavior.noise * rng.standard_normal()
            dims.append(_clamp_star(float(round(raw))))
        text = (
            f"{opener} {middle} "
            f"Originality: {_format_star(dims[0])}. "
            f"Significance: {_format_star(dims[1])}. "
            f"Rigour: {_format_star(dims[2])}. "
            f"{closer}"
        )
    return RawReport(
        article_id=request.article_id,
        model_id=request.model_id,
        run_index=request.run_index,
        report_text=text,
        received_at=MOCK_TIMESTAMP,
    )


class MockBackend:
    """Offline scoring backend producing deterministic narrative reports."""

    def __init__(
        self,
        latent_quality: Mapping[str, float],
        seed: int,
        behaviors: Mapping[str, MockModelBehavior] | None = None,
        default_behavior: MockModelBehavior = MockModelBehavior(),
    ) -> None:
        bad = {k: v for k, v in latent_quality.items() if not 1.0 <= v <= 4.0}
        if bad:
            raise DataError(f"latent qualities outside [1, 4] for {len(bad)} article(s)")
        self.latent_quality = dict(latent_quality)
        self.seed = seed
        self.behaviors = dict(behaviors or {})
        self.default_behavior = default_behavior

    def behavior_for(self, model_id: str) -> MockModelBehavior:
        return self.behaviors.get(model_id, self.default_behavior)

    def send(self, request: ScoreRequest, params: Mapping[str, object]) -> str:
        report = mock_generate(request, self.seed, self.latent_quality, self.behavior_for(request.model_id))
        return report.report_text
