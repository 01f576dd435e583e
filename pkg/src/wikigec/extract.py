"""Cutting aligned revision text into example pairs, and length/edit filters."""
from __future__ import annotations

from typing import List, Optional, Sequence

from ._rng import make_rng
from .align import MATCHED, AlignmentSpan, align
from .records import REVISION, ExamplePair
from .wikitext import extract_text, tokenize

DEFAULT_P_CUT = 0.02
DEFAULT_MAX_WORDPIECES = 256

__all__ = [
    "extract_text",
    "align",
    "cut_points",
    "cut_examples",
    "levenshtein",
    "filter_example",
    "DEFAULT_P_CUT",
    "DEFAULT_MAX_WORDPIECES",
]


def cut_points(spans: Sequence[AlignmentSpan]) -> List[tuple]:
    """Candidate cut positions ``(old_index, new_index)``: every token boundary of every matched span, edges included."""
    points = []
    for span in spans:
        if span.kind != MATCHED:
            continue
        o, n = span.old_range[0], span.new_range[0]
        points.extend((o + i, n + i) for i in range(span.old_len + 1))
    return points


def cut_examples(
    spans: Sequence[AlignmentSpan],
    old_tokens: Sequence[str],
    new_tokens: Sequence[str],
    p_cut: float = DEFAULT_P_CUT,
    seed=0,
    page_id: Optional[int] = None,
    older_rev: Optional[int] = None,
    newer_rev: Optional[int] = None,
) -> List[ExamplePair]:
    """Place random cuts inside matched spans and emit the text between consecutive cuts.

    Each candidate boundary is kept independently with probability
    ``p_cut``.  The source side comes from ``old_tokens`` and the target
    side from ``new_tokens``; any unmatched material between two cuts is
    carried along.  ``seed`` may be an int or a tuple of ints.
    """
    if not 0.0 <= p_cut <= 1.0:
        raise ValueError("p_cut must lie in [0, 1]")
    points = cut_points(spans)
    if not points or p_cut == 0.0:
        return []
    keys = seed if isinstance(seed, tuple) else (seed,)
    draws = make_rng(*keys).random(len(points))
    cuts = [pt for pt, u in zip(points, draws) if u < p_cut]
    out = []
    for (o0, n0), (o1, n1) in zip(cuts, cuts[1:]):
        if o0 == o1 and n0 == n1:
            continue
        out.append(
            ExamplePair(
                source=" ".join(old_tokens[o0:o1]),
                target=" ".join(new_tokens[n0:n1]),
                page_id=page_id,
                older_rev=older_rev,
                newer_rev=newer_rev,
                provenance=REVISION,
            )
        )
    return out


def levenshtein(a: Sequence, b: Sequence, limit: Optional[int] = None) -> int:
    """Edit distance between two sequences; with ``limit`` set, returns ``limit + 1`` once it is exceeded."""
    if len(a) < len(b):
        a, b = b, a
    if limit is not None and len(a) - len(b) > limit:
        return limit + 1
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        cur = [i] + [0] * len(b)
        for j, y in enumerate(b, 1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y))
        if limit is not None and min(cur) > limit:
            return limit + 1
        prev = cur
    return prev[-1]


def filter_example(
    pair: ExamplePair,
    max_wordpieces: int = DEFAULT_MAX_WORDPIECES,
    max_edit_distance: Optional[int] = None,
    tokenizer=None,
) -> bool:
    """Return True to keep ``pair``.

    Drops pairs where either side exceeds ``max_wordpieces`` pieces, or,
    when ``max_edit_distance`` is set, where the wordpiece Levenshtein
    distance between source and target exceeds it.  Without a tokenizer,
    whitespace tokens stand in for wordpieces.
    """
    if tokenizer is None:
        src, tgt = pair.source.split(), pair.target.split()
    else:
        src, tgt = tokenizer.wordpieces(pair.source), tokenizer.wordpieces(pair.target)
    if len(src) > max_wordpieces or len(tgt) > max_wordpieces:
        return False
    if max_edit_distance is not None and levenshtein(src, tgt, limit=max_edit_distance) > max_edit_distance:
        return False
    return True


def extract_examples(older_text: str, newer_text: str, p_cut: float, seed, **ids) -> List[ExamplePair]:
    """Plain-text extraction, alignment and cutting for one revision pair."""
    old_tokens = tokenize(extract_text(older_text))
    new_tokens = tokenize(extract_text(newer_text))
    spans = align(old_tokens, new_tokens)
    return cut_examples(spans, old_tokens, new_tokens, p_cut, seed, **ids)
