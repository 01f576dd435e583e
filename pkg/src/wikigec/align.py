"""Token-level LCS alignment (linear-space Myers diff)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

MATCHED = "matched"
UNMATCHED = "unmatched"


@dataclass(frozen=True)
class AlignmentSpan:
    kind: str
    old_range: Tuple[int, int]
    new_range: Tuple[int, int]

    @property
    def old_len(self) -> int:
        return self.old_range[1] - self.old_range[0]

    @property
    def new_len(self) -> int:
        return self.new_range[1] - self.new_range[0]


def _middle_snake(a, alo, ahi, b, blo, bhi):
    n = ahi - alo
    m = bhi - blo
    delta = n - m
    odd = delta & 1
    vmax = (n + m + 1) // 2 + 1
    off = vmax + 1
    vf = [0] * (2 * off + 2)
    vb = [0] * (2 * off + 2)
    for d in range(vmax + 1):
        for k in range(-d, d + 1, 2):
            if k == -d or (k != d and vf[off + k - 1] < vf[off + k + 1]):
                x = vf[off + k + 1]
            else:
                x = vf[off + k - 1] + 1
            y = x - k
            xs, ys = x, y
            while x < n and y < m and a[alo + x] == b[blo + y]:
                x += 1
                y += 1
            vf[off + k] = x
            if odd and -(d - 1) <= delta - k <= d - 1 and x + vb[off + delta - k] >= n:
                return alo + xs, blo + ys, alo + x, blo + y
        for k in range(-d, d + 1, 2):
            if k == -d or (k != d and vb[off + k - 1] < vb[off + k + 1]):
                x = vb[off + k + 1]
            else:
                x = vb[off + k - 1] + 1
            y = x - k
            xs, ys = x, y
            while x < n and y < m and a[ahi - 1 - x] == b[bhi - 1 - y]:
                x += 1
                y += 1
            vb[off + k] = x
            if not odd and -d <= delta - k <= d and x + vf[off + delta - k] >= n:
                return ahi - x, bhi - y, ahi - xs, bhi - ys
    raise AssertionError("middle snake not found")  # unreachable for finite inputs


def _matches(a: Sequence, b: Sequence) -> List[Tuple[int, int]]:
    """Matched index pairs of one longest common subsequence, ascending."""
    out: List[Tuple[int, int]] = []
    stack = [(0, len(a), 0, len(b))]
    # explicit stack: each frame is either a range to diff or a snake to emit
    while stack:
        frame = stack.pop()
        if frame[0] == "snake":
            _, x, y, u = frame
            out.extend((x + i, y + i) for i in range(u - x))
            continue
        alo, ahi, blo, bhi = frame
        pre = alo
        while pre < ahi and pre - alo + blo < bhi and a[pre] == b[pre - alo + blo]:
            pre += 1
        head = pre - alo
        ahi_s, bhi_s = ahi, bhi
        while ahi_s > pre and bhi_s > blo + head and a[ahi_s - 1] == b[bhi_s - 1]:
            ahi_s -= 1
            bhi_s -= 1
        tail = ahi - ahi_s
        # pushed in reverse so pops come out left to right
        if tail:
            stack.append(("snake", ahi_s, bhi_s, ahi))
        lo_a, lo_b = alo + head, blo + head
        if lo_a < ahi_s and lo_b < bhi_s:
            x, y, u, v = _middle_snake(a, lo_a, ahi_s, b, lo_b, bhi_s)
            stack.append((u, ahi_s, v, bhi_s))
            if u > x:
                stack.append(("snake", x, y, u))
            stack.append((lo_a, x, lo_b, y))
        if head:
            stack.append(("snake", alo, blo, alo + head))
    return out


def align(old_tokens: Sequence[str], new_tokens: Sequence[str]) -> List[AlignmentSpan]:
    """Tile both token sequences into matched and unmatched spans.

    Matched spans form a longest common subsequence; runs of matches that
    are contiguous on both sides are merged into one span.
    """
    old_tokens = list(old_tokens)
    new_tokens = list(new_tokens)
    # canonical argument order keeps the result symmetric under swapping
    if old_tokens > new_tokens:
        pairs = [(i, j) for j, i in _matches(new_tokens, old_tokens)]
    else:
        pairs = _matches(old_tokens, new_tokens)

    spans: List[AlignmentSpan] = []
    i = j = 0
    p = 0
    while p < len(pairs):
        mi, mj = pairs[p]
        if mi > i or mj > j:
            spans.append(AlignmentSpan(UNMATCHED, (i, mi), (j, mj)))
        q = p
        while q + 1 < len(pairs) and pairs[q + 1] == (pairs[q][0] + 1, pairs[q][1] + 1):
            q += 1
        run = q - p + 1
        spans.append(AlignmentSpan(MATCHED, (mi, mi + run), (mj, mj + run)))
        i, j = mi + run, mj + run
        p = q + 1
    if i < len(old_tokens) or j < len(new_tokens):
        spans.append(AlignmentSpan(UNMATCHED, (i, len(old_tokens)), (j, len(new_tokens))))
    return spans


def lcs_length(spans: Sequence[AlignmentSpan]) -> int:
    return sum(s.old_len for s in spans if s.kind == MATCHED)
