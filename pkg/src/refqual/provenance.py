"""Checksums and sidecar manifests giving every pipeline artifact an audit trail."""

from __future__ import annotations

import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def sidecar_path(artifact: str | Path) -> Path:
    artifact = Path(artifact)
    return artifact.with_name(artifact.name + ".manifest.json")


def write_sidecar(
    artifact: str | Path,
    *,
    config_digest: str,
    prompt_checksums: Mapping[str, str],
    seed: int | None,
    inputs: Mapping[str, str | Path],
    notes: str | None = None,
) -> Path:
    """Record where an artifact came from: config, prompts, seed, inputs.

    The sidecar carries the only timestamp; the artifact itself stays
    byte-reproducible.
    """
    artifact = Path(artifact)
    manifest = {
        "artifact": artifact.name,
        "artifact_sha256": sha256_file(artifact),
        "config_sha256": config_digest,
        "prompt_checksums": dict(prompt_checksums),
        "seed": seed,
        "inputs": {
            name: sha256_file(path) for name, path in inputs.items() if Path(path).exists()
        },
        "written_at": datetime.now(timezone.utc).isoformat(),
    }
    if notes:
        manifest["notes"] = notes
    path = sidecar_path(artifact)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
