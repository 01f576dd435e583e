"""Round-trip translation corpus synthesis.

Clean sentences go en -> bridge -> en through a pluggable
:class:`TranslationProvider`; the round-tripped text becomes the source
side, then gets spelling noise and mined edit-rule corruption.
"""
from __future__ import annotations

import logging
import os
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Protocol, Sequence, Tuple

from ._rng import make_rng
from .noising import ROUND_TRIP_SPELL_NOISE, EditRule, SpellNoiseConfig, apply_edit_rules, corrupt_spelling
from .records import ROUND_TRIP, ExamplePair

logger = logging.getLogger(__name__)

BRIDGE_LANGUAGES = ("fr", "de", "ja", "ru")
PIVOT = "en"


class ProviderError(RuntimeError):
    """A translation request failed; the record is skipped."""


class TranslationProvider(Protocol):
    def translate(self, text: str, source_lang: str, target_lang: str) -> str: ...


class MockProvider:
    """Deterministic phrase-table translator for tests.

    ``table`` maps ``(source_lang, target_lang)`` to a phrase map.  Phrases
    are matched on whole words, longest first; unknown words pass through.
    """

    def __init__(self, table: Optional[Mapping[Tuple[str, str], Mapping[str, str]]] = None):
        self._tables: Dict[Tuple[str, str], Dict[Tuple[str, ...], str]] = {}
        for direction, phrases in (table or {}).items():
            self._tables[tuple(direction)] = {tuple(k.split()): v for k, v in phrases.items()}

    def translate(self, text: str, source_lang: str, target_lang: str) -> str:
        phrases = self._tables.get((source_lang, target_lang))
        if not phrases:
            return text
        words = text.split()
        longest = max(len(k) for k in phrases)
        out: List[str] = []
        i = 0
        while i < len(words):
            for n in range(min(longest, len(words) - i), 0, -1):
                hit = phrases.get(tuple(words[i:i + n]))
                if hit is not None:
                    if hit:
                        out.append(hit)
                    i += n
                    break
            else:
                out.append(words[i])
                i += 1
        return " ".join(out)


def mock_provider(table: Optional[Mapping[Tuple[str, str], Mapping[str, str]]] = None) -> MockProvider:
    return MockProvider(table)


class HttpProvider:
    """Client for a JSON translation endpoint.

    Request ``POST {"text", "source", "target"}``, response ``{"text"}``.
    The bearer token defaults to the ``WIKIGEC_MT_TOKEN`` environment variable.
    """

    def __init__(self, endpoint: str, token: Optional[str] = None, timeout: float = 30.0, session=None):
        import requests

        self.endpoint = endpoint
        self.token = token if token is not None else os.environ.get("WIKIGEC_MT_TOKEN")
        self.timeout = timeout
        self._session = session or requests.Session()

    def translate(self, text: str, source_lang: str, target_lang: str) -> str:
        import requests

        headers = {"Authorization": f"Bearer {self.token}"} if self.token else {}
        try:
            resp = self._session.post(
                self.endpoint,
                json={"text": text, "source": source_lang, "target": target_lang},
                headers=headers,
                timeout=self.timeout,
            )
            resp.raise_for_status()
            payload = resp.json()
        except (requests.RequestException, ValueError) as exc:
            raise ProviderError(f"translation request failed: {exc}") from exc
        if not isinstance(payload, dict) or not isinstance(payload.get("text"), str):
            raise ProviderError(f"malformed translation response: {payload!r}")
        return payload["text"]


def round_trip(text: str, bridge_lang: str, provider: TranslationProvider) -> str:
    if not text:
        return text
    there = provider.translate(text, PIVOT, bridge_lang)
    return provider.translate(there, bridge_lang, PIVOT)


@dataclass
class RttConfig:
    bridge_lang: str = "ja"
    identity_fraction: float = 0.025
    spell_noise: SpellNoiseConfig = ROUND_TRIP_SPELL_NOISE
    edit_rules: Sequence[EditRule] = field(default_factory=list)

    def __post_init__(self):
        if not 0.0 <= self.identity_fraction <= 1.0:
            raise ValueError("identity_fraction must lie in [0, 1]")


@dataclass
class RttStats:
    sentences: int = 0
    identities: int = 0
    skipped: int = 0

    def as_dict(self) -> dict:
        emitted = self.sentences - self.skipped
        return {
            "sentences_in": self.sentences,
            "pairs_out": emitted,
            "identity_pairs": self.identities,
            "identity_fraction": self.identities / emitted if emitted else 0.0,
            "skipped": self.skipped,
        }


def _one(index: int, text: str, config: RttConfig, provider: TranslationProvider, seed: int) -> Optional[ExamplePair]:
    rng = make_rng(seed, index)
    if rng.random() < config.identity_fraction:
        return ExamplePair(text, text, provenance=ROUND_TRIP)
    try:
        noisy = round_trip(text, config.bridge_lang, provider)
    except Exception as exc:  # any provider failure skips the record
        logger.warning("sentence %d skipped: %s", index, exc)
        return None
    noisy = corrupt_spelling(noisy, config.spell_noise, (seed, index, 1))
    noisy = apply_edit_rules(noisy, config.edit_rules, (seed, index, 2))
    return ExamplePair(noisy, text, provenance=ROUND_TRIP)


def build_rtt_corpus(
    clean_sentences: Iterable[str],
    config: RttConfig,
    provider: TranslationProvider,
    seed: int = 0,
    stats: Optional[RttStats] = None,
    max_workers: int = 1,
    window: int = 64,
) -> Iterator[ExamplePair]:
    """Yield ``(noisy, clean)`` pairs in input order.

    With probability ``identity_fraction`` a sentence is emitted as an
    identity pair without touching the provider.  Provider calls run on up
    to ``max_workers`` threads with at most ``window`` sentences in
    flight; output order never depends on completion order.
    """
    stats = stats if stats is not None else RttStats()

    def record(pair: Optional[ExamplePair]) -> Optional[ExamplePair]:
        stats.sentences += 1
        if pair is None:
            stats.skipped += 1
        elif pair.is_identity:
            stats.identities += 1
        return pair

    if max_workers <= 1:
        for i, text in enumerate(clean_sentences):
            pair = record(_one(i, text, config, provider, seed))
            if pair is not None:
                yield pair
        return

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        pending: deque = deque()
        for i, text in enumerate(clean_sentences):
            pending.append(pool.submit(_one, i, text, config, provider, seed))
            if len(pending) >= window:
                pair = record(pending.popleft().result())
                if pair is not None:
                    yield pair
        for fut in pending:
            pair = record(fut.result())
            if pair is not None:
                yield pair
