"""Evaluator prompts: verbatim system payloads plus the per-article user prompt.

The four system prompts are shipped as read-only resource files with a
checksum manifest; any drift from the recorded checksums is an error,
because the exact prompt text is the identity of a scoring campaign.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources

from .corpus import Article
from .errors import DataError

USER_PROMPT_HEADER = "Score this article:"
ABSTRACT_SEPARATOR = "Abstract"

_RESOURCE_PACKAGE = "refqual.resources.prompts"
_NEWLINE_RUN = re.compile(r"[\r\n]+")


class UoaGroup(Enum):
    """The four evaluator-instruction groups partitioning UoAs 1..34."""

    LIFE_SCIENCES = ("life_sciences", 1, 6)
    PHYSICAL_SCIENCES = ("physical_sciences", 7, 12)
    SOCIAL_SCIENCES = ("social_sciences", 13, 24)
    ARTS_HUMANITIES = ("arts_humanities", 25, 34)

    def __init__(self, slug: str, lo: int, hi: int) -> None:
        self.slug = slug
        self.lo = lo
        self.hi = hi

    @property
    def uoa_range(self) -> range:
        return range(self.lo, self.hi + 1)

    @property
    def resource_name(self) -> str:
        return f"{self.slug}.txt"


@dataclass(frozen=True)
class PromptPair:
    """System and user text for one scoring request."""

    system_text: str
    user_text: str


def group_for_uoa(uoa: int) -> UoaGroup:
    """The evaluator-instruction group whose UoA range contains ``uoa``."""
    for group in UoaGroup:
        if group.lo <= uoa <= group.hi:
            return group
    raise DataError(f"uoa {uoa} outside the valid range 1..34")


@lru_cache(maxsize=1)
def _manifest() -> dict[str, str]:
    raw = resources.files(_RESOURCE_PACKAGE).joinpath("manifest.json").read_text(encoding="utf-8")
    manifest = json.loads(raw)
    if manifest.get("algorithm") != "sha256":
        raise DataError("prompt manifest: unsupported checksum algorithm")
    return dict(manifest["files"])


@lru_cache(maxsize=None)
def system_prompt(group: UoaGroup) -> str:
    """The verbatim system prompt for a group, checksum-verified on first load."""
    data = resources.files(_RESOURCE_PACKAGE).joinpath(group.resource_name).read_bytes()
    expected = _manifest().get(group.resource_name)
    if expected is None:
        raise DataError(f"prompt manifest has no entry for {group.resource_name}")
    actual = hashlib.sha256(data).hexdigest()
    if actual != expected:
        raise DataError(
            f"prompt resource {group.resource_name} drifted from its manifest checksum "
            f"(expected {expected[:12]}…, got {actual[:12]}…)"
        )
    return data.decode("utf-8")


def prompt_checksums() -> dict[str, str]:
    """Checksum of every prompt resource, for provenance manifests."""
    return dict(_manifest())


def single_line(text: str) -> str:
    """Collapse newline runs to single spaces; other whitespace is preserved."""
    return _NEWLINE_RUN.sub(" ", text).strip()


def build_prompt(article: Article) -> PromptPair:
    """Assemble the prompt pair for one article.

    The user prompt is the fixed header, the title, the literal separator
    line ``Abstract``, and the abstract, each on its own line, with
    title- and abstract-internal newlines collapsed to single spaces.
    """
    title = single_line(article.title)
    abstract = single_line(article.abstract)
    if not title:
        raise DataError(f"article {article.article_id}: empty title, cannot build prompt")
    if not abstract:
        raise DataError(
            f"article {article.article_id}: empty abstract, cannot build prompt "
            "(short-abstract filtering should have removed it)"
        )
    user_text = f"{USER_PROMPT_HEADER}\n{title}\n{ABSTRACT_SEPARATOR}\n{abstract}"
    return PromptPair(system_text=system_prompt(group_for_uoa(article.uoa)), user_text=user_text)
