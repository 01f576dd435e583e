"""Byte-pair-encoding subword model.

Merges are learned inside whitespace-delimited words.  Encoded output
marks non-initial pieces of a word with ``##``; whitespace other than a
single space between two words is emitted as its own piece, which makes
``decode(encode(x)) == x`` hold for any string.
"""
from __future__ import annotations

import heapq
import json
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence, Tuple

CONTINUATION = "##"
DEFAULT_VOCAB_SIZE = 32000
_HEADER = "#wikigec-bpe v1"
_WS_SPLIT = re.compile(r"(\s+)")

Pair = Tuple[str, str]


@dataclass
class SubwordModel:
    merges: List[Pair]
    alphabet: frozenset
    vocab: frozenset = field(init=False)
    _ranks: Dict[Pair, int] = field(init=False, repr=False)
    _cache: Dict[str, Tuple[str, ...]] = field(init=False, repr=False)

    def __post_init__(self):
        self.merges = [tuple(m) for m in self.merges]
        self.alphabet = frozenset(self.alphabet)
        self.vocab = self.alphabet | {a + b for a, b in self.merges}
        self._ranks = {}
        for i, m in enumerate(self.merges):
            self._ranks.setdefault(m, i)
        self._cache = {}

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    def segment(self, word: str) -> Tuple[str, ...]:
        """Split one whitespace-free word into vocabulary units."""
        cached = self._cache.get(word)
        if cached is not None:
            return cached
        symbols = list(word)
        ranks = self._ranks
        while len(symbols) > 1:
            best = None
            best_rank = None
            for pair in zip(symbols, symbols[1:]):
                r = ranks.get(pair)
                if r is not None and (best_rank is None or r < best_rank):
                    best, best_rank = pair, r
            if best is None:
                break
            merged = []
            i = 0
            while i < len(symbols):
                if i + 1 < len(symbols) and (symbols[i], symbols[i + 1]) == best:
                    merged.append(symbols[i] + symbols[i + 1])
                    i += 2
                else:
                    merged.append(symbols[i])
                    i += 1
            symbols = merged
        out = tuple(symbols)
        if len(self._cache) < 1 << 20:
            self._cache[word] = out
        return out

    def encode(self, text: str) -> List[str]:
        pieces: List[str] = []
        parts = _WS_SPLIT.split(text)
        for idx, part in enumerate(parts):
            if not part:
                continue
            if idx % 2 == 1:
                between_words = 0 < idx < len(parts) - 1 and parts[idx - 1] and parts[idx + 1]
                if part != " " or not between_words:
                    pieces.append(part)
                continue
            units = self.segment(part)
            if units[0].startswith(CONTINUATION):
                pieces.append("")
            pieces.append(units[0])
            pieces.extend(CONTINUATION + u for u in units[1:])
        return pieces

    def decode(self, pieces: Sequence[str]) -> str:
        out: List[str] = []
        prev = None
        literal = False
        for p in pieces:
            if p == "":
                literal = True
                continue
            if p.isspace():
                out.append(p)
                prev = "ws"
                continue
            if not literal and prev == "word" and p.startswith(CONTINUATION):
                out.append(p[len(CONTINUATION):])
                continue
            if prev == "word":
                out.append(" ")
            out.append(p)
            prev = "word"
            literal = False
        return "".join(out)

    def count(self, text: str) -> int:
        """Number of wordpieces in ``text``, ignoring whitespace pieces."""
        return sum(len(self.segment(w)) for w in text.split())

    def wordpieces(self, text: str) -> List[str]:
        """Word-piece units only, as used for length and edit-distance filters."""
        return [p for p in self.encode(text) if p and not p.isspace()]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{_HEADER} {json.dumps(sorted(self.alphabet), ensure_ascii=False)}\n")
            for a, b in self.merges:
                fh.write(f"{a} {b}\n")

    @classmethod
    def load(cls, path) -> "SubwordModel":
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().split("\n")
        header = lines[0]
        if not header.startswith(_HEADER):
            raise ValueError(f"not a subword model file: {path}")
        alphabet = json.loads(header[len(_HEADER):].strip() or "[]")
        merges = [tuple(line.split(" ")) for line in lines[1:] if line]
        return cls(merges, frozenset(alphabet))


def train(corpus: Iterable[str], vocab_size: int = DEFAULT_VOCAB_SIZE) -> SubwordModel:
    """Learn merges greedily by pair frequency until the vocabulary reaches ``vocab_size``.

    Ties between equally frequent pairs go to the lexicographically
    smallest pair, so training is deterministic.
    """
    word_freq: Counter = Counter()
    for line in corpus:
        word_freq.update(line.split())
    if not word_freq:
        raise ValueError("empty training corpus")
    alphabet = frozenset(ch for w in word_freq for ch in w)
    if vocab_size < len(alphabet):
        raise ValueError(f"vocab_size {vocab_size} is smaller than the {len(alphabet)}-character base inventory")

    words = [list(w) for w in word_freq]
    freqs = [word_freq[w] for w in word_freq]
    pair_counts: Dict[Pair, int] = defaultdict(int)
    where: Dict[Pair, set] = defaultdict(set)
    for wi, syms in enumerate(words):
        for pair in zip(syms, syms[1:]):
            pair_counts[pair] += freqs[wi]
            where[pair].add(wi)
    heap = [(-c, p) for p, c in pair_counts.items()]
    heapq.heapify(heap)

    vocab = set(alphabet)
    merges: List[Pair] = []
    while len(vocab) < vocab_size and heap:
        neg, pair = heapq.heappop(heap)
        if pair_counts.get(pair, 0) != -neg or neg == 0:
            continue
        merges.append(pair)
        joined = pair[0] + pair[1]
        vocab.add(joined)
        touched = set()
        for wi in sorted(where.pop(pair, ())):
            syms = words[wi]
            f = freqs[wi]
            for p in zip(syms, syms[1:]):
                pair_counts[p] -= f
                touched.add(p)
                where[p].discard(wi)
            merged = []
            i = 0
            while i < len(syms):
                if i + 1 < len(syms) and syms[i] == pair[0] and syms[i + 1] == pair[1]:
                    merged.append(joined)
                    i += 2
                else:
                    merged.append(syms[i])
                    i += 1
            words[wi] = merged
            for p in zip(merged, merged[1:]):
                pair_counts[p] += f
                touched.add(p)
                where[p].add(wi)
        for p in touched:
            c = pair_counts[p]
            if c > 0:
                heapq.heappush(heap, (-c, p))
            else:
                pair_counts.pop(p, None)
                where.pop(p, None)
    return SubwordModel(merges, alphabet)
