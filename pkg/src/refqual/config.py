"""Campaign configuration: one TOML file, with CLI flags layered on top.

Defaults follow the reference protocol where it states them: five
repetitions, a 10% short-abstract cut, 95% bootstrap intervals from 1000
resamples, and backend-default generation parameters.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import DataError
from .gateway import MockModelBehavior, ModelSpec


@dataclass(frozen=True)
class BackendSettings:
    kind: str = "mock"
    endpoint: str | None = None
    api_key_env: str = "LLM_API_KEY"
    parallelism: int = 4
    retry_budget: int = 3
    backoff_base: float = 0.5


@dataclass(frozen=True)
class BootstrapSettings:
    level: float = 0.95
    resamples: int = 1000
    seed: int = 13


@dataclass(frozen=True)
class MockSettings:
    seed: int = 7
    latent_quality_path: Path | None = None
    behaviors: Mapping[str, MockModelBehavior] = field(default_factory=dict)


@dataclass(frozen=True)
class CampaignConfig:
    articles_path: Path
    profiles_path: Path
    models: tuple[ModelSpec, ...]
    output_dir: Path
    cache_dir: Path
    filter_fraction: float = 0.10
    filter_metric: str = "chars"
    repetitions: int = 5
    backend: BackendSettings = BackendSettings()
    bootstrap: BootstrapSettings = BootstrapSettings()
    snapshots: Mapping[str, Path] = field(default_factory=dict)
    theoretical_max_path: Path | None = None
    mock: MockSettings = MockSettings()
    config_path: Path | None = None
    config_digest: str = ""


def _resolve(base: Path, value: str) -> Path:
    path = Path(value)
    return path if path.is_absolute() else base / path


def load_config(path: str | Path) -> CampaignConfig:
    """Parse a campaign TOML file; relative paths resolve against it."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"config file not found: {path}")
    raw = path.read_bytes()
    try:
        doc = tomllib.loads(raw.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise DataError(f"{path}: invalid TOML: {exc}") from exc
    base = path.parent

    corpus = doc.get("corpus", {})
    for key in ("articles", "profiles"):
        if key not in corpus:
            raise DataError(f"{path}: [corpus] must set {key!r}")

    models_doc = doc.get("models", [])
    if not models_doc:
        raise DataError(f"{path}: at least one [[models]] entry is required")
    models = tuple(
        ModelSpec(
            model_id=str(m["model_id"]),
            unit_cost=float(m.get("unit_cost", 1.0)),
            params=dict(m.get("params", {})),
        )
        for m in models_doc
    )
    seen = [m.model_id for m in models]
    if len(set(seen)) != len(seen):
        raise DataError(f"{path}: duplicate model_id in [[models]]")

    campaign = doc.get("campaign", {})
    filt = doc.get("filter", {})
    backend_doc = doc.get("backend", {})
    backend = BackendSettings(
        kind=str(backend_doc.get("kind", "mock")),
        endpoint=backend_doc.get("endpoint"),
        api_key_env=str(backend_doc.get("api_key_env", "LLM_API_KEY")),
        parallelism=int(backend_doc.get("parallelism", 4)),
        retry_budget=int(backend_doc.get("retry_budget", 3)),
        backoff_base=float(backend_doc.get("backoff_base", 0.5)),
    )
    if backend.kind not in ("mock", "live"):
        raise DataError(f"{path}: backend.kind must be 'mock' or 'live', got {backend.kind!r}")

    boot_doc = doc.get("bootstrap", {})
    bootstrap = BootstrapSettings(
        level=float(boot_doc.get("level", 0.95)),
        resamples=int(boot_doc.get("resamples", 1000)),
        seed=int(boot_doc.get("seed", 13)),
    )

    mock_doc = doc.get("mock", {})
    behaviors = {
        model_id: MockModelBehavior(
            noise=float(b.get("noise", 0.6)),
            bias=float(b.get("bias", 0.0)),
            distortion=float(b.get("distortion", 0.0)),
            no_score_rate=float(b.get("no_score_rate", 0.0)),
            fractional_rate=float(b.get("fractional_rate", 0.15)),
        )
        for model_id, b in mock_doc.get("behaviors", {}).items()
    }
    mock = MockSettings(
        seed=int(mock_doc.get("seed", 7)),
        latent_quality_path=(
            _resolve(base, mock_doc["latent_quality"]) if "latent_quality" in mock_doc else None
        ),
        behaviors=behaviors,
    )

    snapshots = {
        str(name): _resolve(base, location)
        for name, location in doc.get("citations", {}).items()
    }
    analysis_doc = doc.get("analysis", {})

    return CampaignConfig(
        articles_path=_resolve(base, corpus["articles"]),
        profiles_path=_resolve(base, corpus["profiles"]),
        models=models,
        output_dir=_resolve(base, str(campaign.get("output_dir", "out"))),
        cache_dir=_resolve(base, str(campaign.get("cache_dir", "cache"))),
        filter_fraction=float(filt.get("fraction", 0.10)),
        filter_metric=str(filt.get("metric", "chars")),
        repetitions=int(campaign.get("repetitions", 5)),
        backend=backend,
        bootstrap=bootstrap,
        snapshots=snapshots,
        theoretical_max_path=(
            _resolve(base, analysis_doc["theoretical_max"]) if "theoretical_max" in analysis_doc else None
        ),
        mock=mock,
        config_path=path,
        config_digest=hashlib.sha256(raw).hexdigest(),
    )
