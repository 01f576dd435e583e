"""Ways of corrupting the source side of a pair, plus identity downsampling."""
from __future__ import annotations

import json
import re
import string
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import IO, Dict, Iterable, Iterator, List, NamedTuple, Sequence, Tuple

import numpy as np

from ._rng import make_rng
from .align import UNMATCHED, align
from .extract import levenshtein
from .records import ExamplePair

DELETION = "deletion"
INSERTION = "insertion"
REPLACEMENT = "replacement"
TRANSPOSITION = "transposition"
OPS = (DELETION, INSERTION, REPLACEMENT, TRANSPOSITION)

DEFAULT_ALPHABET = string.ascii_lowercase + " "
DEFAULT_KEEP_PROB = 0.01


def _seed_keys(seed) -> tuple:
    return seed if isinstance(seed, tuple) else (seed,)


@dataclass(frozen=True)
class SpellNoiseConfig:
    rate: float = 0.003
    op_weights: Dict[str, float] = field(default_factory=lambda: {op: 0.25 for op in OPS})
    alphabet: str = DEFAULT_ALPHABET

    def __post_init__(self):
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError("rate must lie in [0, 1]")
        unknown = set(self.op_weights) - set(OPS)
        if unknown:
            raise ValueError(f"unknown noise ops: {sorted(unknown)}")
        if any(w < 0 for w in self.op_weights.values()):
            raise ValueError("op weights must be non-negative")
        if abs(sum(self.op_weights.values()) - 1.0) > 1e-9:
            raise ValueError("op weights must sum to 1")
        if not self.alphabet:
            raise ValueError("alphabet must be non-empty")

    def weights(self) -> List[float]:
        return [self.op_weights.get(op, 0.0) for op in OPS]


REVISION_SPELL_NOISE = SpellNoiseConfig(rate=0.003)
ROUND_TRIP_SPELL_NOISE = SpellNoiseConfig(
    rate=0.005, op_weights={INSERTION: 1 / 3, DELETION: 1 / 3, TRANSPOSITION: 1 / 3}
)


class SpellingError(NamedTuple):
    position: int
    op: str
    char: str


def draw_spelling_errors(text: str, config: SpellNoiseConfig, seed) -> List[SpellingError]:
    """Sample the error sites for ``text``: one Bernoulli(rate) trigger per character."""
    rng = make_rng(*_seed_keys(seed))
    if not text or config.rate == 0.0:
        return []
    sites = np.flatnonzero(rng.random(len(text)) < config.rate)
    ops = rng.choice(len(OPS), size=len(sites), p=config.weights())
    chars = rng.integers(len(config.alphabet), size=len(sites))
    return [SpellingError(int(p), OPS[o], config.alphabet[c]) for p, o, c in zip(sites, ops, chars)]


def apply_spelling_errors(text: str, errors: Sequence[SpellingError]) -> str:
    """Apply sampled errors left to right.  A transposition consumes the next character, so a trigger there is ignored."""
    by_pos = {e.position: e for e in errors}
    out = []
    i = 0
    n = len(text)
    while i < n:
        e = by_pos.get(i)
        ch = text[i]
        if e is None:
            out.append(ch)
        elif e.op == DELETION:
            pass
        elif e.op == INSERTION:
            out.append(e.char)
            out.append(ch)
        elif e.op == REPLACEMENT:
            out.append(e.char)
        elif i + 1 < n:
            out.append(text[i + 1])
            out.append(ch)
            i += 1
        else:
            out.append(ch)
        i += 1
    return "".join(out)


def corrupt_spelling(text: str, config: SpellNoiseConfig = REVISION_SPELL_NOISE, seed=0) -> str:
    return apply_spelling_errors(text, draw_spelling_errors(text, config, seed))


def downsample_identities(
    pairs: Iterable[ExamplePair], keep_prob: float = DEFAULT_KEEP_PROB, seed=0
) -> Iterator[ExamplePair]:
    """Pass identity pairs with probability ``keep_prob``; everything else passes untouched."""
    if not 0.0 <= keep_prob <= 1.0:
        raise ValueError("keep_prob must lie in [0, 1]")
    rng = make_rng(*_seed_keys(seed))
    for pair in pairs:
        if pair.source != pair.target:
            yield pair
        elif rng.random() < keep_prob:
            yield pair


@dataclass(frozen=True)
class EditRule:
    original: str
    revised: str
    count_joint: int
    count_revised: int

    @property
    def probability(self) -> float:
        return self.count_joint / self.count_revised

    def to_dict(self) -> dict:
        return {
            "original": self.original,
            "revised": self.revised,
            "count_joint": self.count_joint,
            "count_revised": self.count_revised,
            "probability": self.probability,
        }


def _eligible(original: str, revised: str, max_words: int, max_char_distance_fraction: float) -> bool:
    ow, rw = original.split(), revised.split()
    if not (1 <= len(ow) <= max_words and 1 <= len(rw) <= max_words):
        return False
    for phrase in (original, revised):
        if any(ch.isdigit() or ch.isupper() for ch in phrase):
            return False
    limit = max_char_distance_fraction * max(len(original), len(revised))
    return levenshtein(original, revised) <= limit


def candidate_edits(
    source: str, target: str, max_words: int = 3, max_char_distance_fraction: float = 0.5
) -> List[Tuple[str, str]]:
    """Eligible ``(original, revised)`` phrase pairs from the unmatched spans of one pair."""
    src, tgt = source.split(), target.split()
    out = []
    for span in align(src, tgt):
        if span.kind != UNMATCHED:
            continue
        original = " ".join(src[slice(*span.old_range)])
        revised = " ".join(tgt[slice(*span.new_range)])
        if _eligible(original, revised, max_words, max_char_distance_fraction):
            out.append((original, revised))
    return out


def extract_edit_rules(
    pairs: Iterable[Tuple[str, str]], max_words: int = 3, max_char_distance_fraction: float = 0.5
) -> List[EditRule]:
    """Mine rules ``original -> revised`` with P(original | revised) = C(original, revised) / C(revised).

    Both counts run over the eligible edits only, so the probabilities of
    all rules sharing a revised phrase sum to one.  Rules are sorted by
    revised phrase, then by descending probability, then original.
    """
    joint: Counter = Counter()
    for source, target in pairs:
        joint.update(candidate_edits(source, target, max_words, max_char_distance_fraction))
    revised_counts: Counter = Counter()
    for (_, revised), c in joint.items():
        revised_counts[revised] += c
    rules = [EditRule(o, r, c, revised_counts[r]) for (o, r), c in joint.items() if o != r]
    rules.sort(key=lambda r: (r.revised, -r.count_joint, r.original))
    return rules


_TOKEN_OR_SPACE = re.compile(r"\S+|\s+")


def apply_edit_rules(text: str, rules: Sequence[EditRule], seed=0) -> str:
    """Corrupt ``text`` by replacing revised phrases with their originals.

    Scans word tokens left to right.  At each position the longest
    revised phrase that matches is tried first, then shorter ones; a
    match is replaced by one of its originals with the rule probability.
    Replaced text is not scanned again.  Whitespace outside replaced
    spans is preserved.
    """
    if not rules:
        return text
    index: Dict[Tuple[str, ...], List[EditRule]] = defaultdict(list)
    for rule in rules:
        index[tuple(rule.revised.split())].append(rule)
    lengths = sorted({len(k) for k in index}, reverse=True)
    rng = make_rng(*_seed_keys(seed))

    parts = _TOKEN_OR_SPACE.findall(text)
    word_at = [i for i, p in enumerate(parts) if not p.isspace()]
    words = [parts[i] for i in word_at]
    out: List[str] = []
    last = 0  # index into parts already emitted
    w = 0
    while w < len(words):
        replaced = False
        for length in lengths:
            key = tuple(words[w:w + length])
            if len(key) < length or key not in index:
                continue
            u = rng.random()
            acc = 0.0
            for rule in index[key]:
                acc += rule.probability
                if u < acc:
                    start, end = word_at[w], word_at[w + length - 1]
                    out.extend(parts[last:start])
                    out.append(rule.original)
                    last = end + 1
                    w += length
                    replaced = True
                    break
            if replaced:
                break
        if not replaced:
            w += 1
    out.extend(parts[last:])
    return "".join(out)


def write_rules(rules: Iterable[EditRule], fh: IO[str]) -> None:
    for rule in rules:
        fh.write(json.dumps(rule.to_dict(), ensure_ascii=False) + "\n")


def read_rules(fh: IO[str]) -> List[EditRule]:
    rules = []
    for line in fh:
        if line.strip():
            d = json.loads(line)
            rules.append(EditRule(d["original"], d["revised"], int(d["count_joint"]), int(d["count_revised"])))
    return rules
