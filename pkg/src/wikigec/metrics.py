"""Edit-matching F-beta scoring plus the GLEU n-gram metric."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import IO, Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple


class Edit(NamedTuple):
    span_start: int
    span_end: int
    replacement: Tuple[str, ...]

    @classmethod
    def of(cls, start: int, end: int, replacement: Iterable[str]) -> "Edit":
        return cls(start, end, tuple(replacement))


@dataclass(frozen=True)
class MetricReport:
    precision: float
    recall: float
    f_beta: float
    beta: float = 0.5
    gleu: Optional[float] = None
    matched: int = 0
    proposed: int = 0
    gold: int = 0

    def as_dict(self, scale: float = 100.0) -> dict:
        d = {
            "precision": self.precision * scale,
            "recall": self.recall * scale,
            "f_beta": self.f_beta * scale,
            "beta": self.beta,
            "matched": self.matched,
            "proposed": self.proposed,
            "gold": self.gold,
        }
        if self.gleu is not None:
            d["gleu"] = self.gleu * scale
        return d


def extract_edits(source: Sequence[str], hypothesis: Sequence[str]) -> List[Edit]:
    """Edits from a minimal-cost Levenshtein alignment; adjacent non-match operations merge into one edit."""
    n, m = len(source), len(hypothesis)
    dist = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        dist[i][0] = i
    for j in range(m + 1):
        dist[0][j] = j
    for i in range(1, n + 1):
        row, prev = dist[i], dist[i - 1]
        s = source[i - 1]
        for j in range(1, m + 1):
            row[j] = min(prev[j] + 1, row[j - 1] + 1, prev[j - 1] + (s != hypothesis[j - 1]))

    # Walk back.  On equal cost a deletion or insertion is taken before a
    # match, which pushes gaps as late as possible: "to to" -> "to" deletes
    # the second "to", the way annotators mark repeated words.
    ops = []
    i, j = n, m
    while i > 0 or j > 0:
        d = dist[i][j]
        if i > 0 and d == dist[i - 1][j] + 1:
            ops.append(("d", i - 1, j))
            i -= 1
        elif j > 0 and d == dist[i][j - 1] + 1 and not (i > 0 and d == dist[i - 1][j - 1] + 1):
            ops.append(("i", i, j - 1))
            j -= 1
        elif i > 0 and j > 0 and source[i - 1] == hypothesis[j - 1] and d == dist[i - 1][j - 1]:
            ops.append(("=", i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and d == dist[i - 1][j - 1] + 1:
            ops.append(("s", i - 1, j - 1))
            i, j = i - 1, j - 1
        else:
            ops.append(("i", i, j - 1))
            j -= 1
    ops.reverse()

    edits: List[Edit] = []
    start = end = None
    repl: List[str] = []
    for op, si, hj in ops:
        if op == "=":
            if start is not None:
                edits.append(Edit(start, end, tuple(repl)))
                start, repl = None, []
            continue
        if start is None:
            start = end = si
        if op in ("s", "d"):
            end = si + 1
        if op in ("s", "i"):
            repl.append(hypothesis[hj])
    if start is not None:
        edits.append(Edit(start, end, tuple(repl)))
    return edits


def apply_edits(source: Sequence[str], edits: Iterable[Edit]) -> List[str]:
    out: List[str] = []
    last = 0
    for e in sorted(edits, key=lambda e: (e.span_start, e.span_end)):
        if e.span_start < last:
            raise ValueError(f"overlapping edit {e}")
        out.extend(source[last:e.span_start])
        out.extend(e.replacement)
        last = e.span_end
    out.extend(source[last:])
    return out


def _f(p: float, r: float, beta: float) -> float:
    b2 = beta * beta
    denom = b2 * p + r
    return (1 + b2) * p * r / denom if denom > 0 else 0.0


def f_beta(p: float, r: float, beta: float = 0.5) -> float:
    """F-beta from precision and recall given as percentages."""
    return _f(p, r, beta)


def score_edits(
    system_edits: Sequence[Sequence[Edit]],
    gold_edits: Sequence[Sequence[Sequence[Edit]]],
    beta: float = 0.5,
) -> MetricReport:
    """Corpus-level edit precision/recall/F-beta.

    ``gold_edits[i]`` holds one edit list per annotator of sentence ``i``;
    the annotator with the most matches is used (ties: fewer gold edits,
    then lower index).  A corpus with no system and no gold edits scores
    P = R = F = 1.
    """
    if len(system_edits) != len(gold_edits):
        raise ValueError("system and gold sentence counts differ")
    matched = proposed = gold_total = 0
    for sys, annotators in zip(system_edits, gold_edits):
        sys_set = set(sys)
        proposed += len(sys_set)
        if not annotators:
            annotators = [[]]
        best = None
        for idx, gold in enumerate(annotators):
            gold_set = set(gold)
            key = (-len(sys_set & gold_set), len(gold_set), idx)
            if best is None or key < best:
                best = key
        matched += -best[0]
        gold_total += best[1]
    if proposed:
        precision = matched / proposed
    else:
        precision = 1.0 if gold_total == 0 else 0.0
    if gold_total:
        recall = matched / gold_total
    else:
        recall = 1.0 if proposed == 0 else 0.0
    return MetricReport(precision, recall, _f(precision, recall, beta), beta, None, matched, proposed, gold_total)


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def gleu_stats(source: Sequence[str], hypothesis: Sequence[str], references: Sequence[Sequence[str]], max_n: int = 4) -> List[float]:
    """Sufficient statistics ``[c, r, (num_n, den_n, refcount_n) for n in 1..max_n]``, averaged over references.

    For each order, hypothesis n-grams found in the reference are rewarded
    and those found in the source but not in the reference are penalized
    (clipped counts).
    """
    if not references:
        raise ValueError("at least one reference is required")
    k = len(references)
    c = len(hypothesis)
    stats = [float(c), sum(len(r) for r in references) / k]
    for n in range(1, max_n + 1):
        hyp = _ngrams(hypothesis, n)
        src = _ngrams(source, n)
        num = 0.0
        refcount = 0.0
        for ref_tokens in references:
            ref = _ngrams(ref_tokens, n)
            src_only = Counter({g: v for g, v in src.items() if g not in ref})
            num += max(sum((hyp & ref).values()) - sum((hyp & src_only).values()), 0)
            refcount += max(len(ref_tokens) - n + 1, 0)
        stats.extend([num / k, float(max(c - n + 1, 0)), refcount / k])
    return stats


def gleu_from_stats(stats: Sequence[float], max_n: int = 4) -> float:
    c, r = stats[0], stats[1]
    if c == 0:
        return 0.0
    logs = []
    for n in range(max_n):
        num, den, refcount = stats[2 + 3 * n: 5 + 3 * n]
        if den == 0 and refcount == 0:
            # neither side is long enough to have n-grams of this order
            continue
        if num == 0 or den == 0:
            return 0.0
        logs.append(math.log(num / den))
    if not logs:
        return 0.0
    return math.exp(min(0.0, 1.0 - r / c) + sum(logs) / len(logs))


def gleu(source: Sequence[str], hypothesis: Sequence[str], references: Sequence[Sequence[str]], max_n: int = 4) -> float:
    """Sentence-level GLEU in [0, 1]."""
    return gleu_from_stats(gleu_stats(source, hypothesis, references, max_n), max_n)


def corpus_gleu(
    sources: Sequence[Sequence[str]],
    hypotheses: Sequence[Sequence[str]],
    references: Sequence[Sequence[Sequence[str]]],
    max_n: int = 4,
) -> float:
    """Corpus-level GLEU from summed per-sentence statistics."""
    if not (len(sources) == len(hypotheses) == len(references)):
        raise ValueError("sources, hypotheses and references differ in length")
    total = [0.0] * (2 + 3 * max_n)
    for s, h, refs in zip(sources, hypotheses, references):
        for i, v in enumerate(gleu_stats(s, h, refs, max_n)):
            total[i] += v
    return gleu_from_stats(total, max_n)


@dataclass
class M2Sentence:
    source: List[str]
    annotators: Dict[int, List[Edit]]

    def gold_lists(self) -> List[List[Edit]]:
        return [self.annotators[a] for a in sorted(self.annotators)]


def read_m2(fh: IO[str]) -> List[M2Sentence]:
    """Parse an M2 file: ``S`` lines followed by ``A start end|||type|||correction|||...|||annotator`` lines."""
    sentences: List[M2Sentence] = []
    current: Optional[M2Sentence] = None
    for raw in fh:
        line = raw.rstrip("\n")
        if line.startswith("S "):
            current = M2Sentence(line[2:].split(), {})
            sentences.append(current)
        elif line.startswith("A ") and current is not None:
            fields = line[2:].split("|||")
            start, end = (int(x) for x in fields[0].split())
            annotator = int(fields[-1]) if len(fields) >= 6 else 0
            edits = current.annotators.setdefault(annotator, [])
            if start < 0 or fields[1] == "noop":
                continue
            correction = fields[2].strip()
            tokens = () if correction in ("", "-NONE-") else tuple(correction.split())
            edits.append(Edit(start, end, tokens))
    for s in sentences:
        if not s.annotators:
            s.annotators[0] = []
    return sentences


def evaluate_m2(hypotheses: Sequence[Sequence[str]], gold: Sequence[M2Sentence], beta: float = 0.5) -> MetricReport:
    if len(hypotheses) != len(gold):
        raise ValueError(f"{len(hypotheses)} hypotheses for {len(gold)} gold sentences")
    system = [extract_edits(g.source, h) for g, h in zip(gold, hypotheses)]
    return score_edits(system, [g.gold_lists() for g in gold], beta)
