"""Streaming reader for MediaWiki pages-meta-history XML dumps.

Pages are assembled one at a time from an expat event stream, so memory
is bounded by the largest page kept, not by the dump.  Oversized pages
are skipped as soon as their cumulative revision text passes the cutoff.
"""
from __future__ import annotations

import logging
from math import log as _log
from dataclasses import dataclass, field
from typing import BinaryIO, Iterator, List, Optional
from xml.parsers import expat

from ._rng import make_rng

logger = logging.getLogger(__name__)

DEFAULT_MAX_PAGE_BYTES = 64 * 2**20
DEFAULT_DOWNSAMPLE_BASE = 1.5
_CHUNK = 1 << 16


class DumpParseError(ValueError):
    """Malformed XML in the dump; ``byte_offset`` points at the failure."""

    def __init__(self, message: str, byte_offset: int):
        super().__init__(f"{message} (at byte offset {byte_offset})")
        self.byte_offset = byte_offset


@dataclass(frozen=True)
class Snapshot:
    revision_id: int
    timestamp: str
    text: str


@dataclass
class Page:
    page_id: int
    title: str
    revisions: List[Snapshot] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.revisions)


@dataclass(frozen=True)
class RevisionPair:
    page_id: int
    older: Snapshot
    newer: Snapshot


@dataclass
class DumpStats:
    pages_read: int = 0
    pages_skipped_oversize: int = 0
    revisions_skipped: int = 0

    def as_dict(self) -> dict:
        return {
            "pages_read": self.pages_read,
            "pages_skipped_oversize": self.pages_skipped_oversize,
            "revisions_skipped": self.revisions_skipped,
        }


class _PageBuilder:
    """expat callbacks that collect finished pages into ``ready``."""

    def __init__(self, max_page_bytes: int, stats: DumpStats):
        self.max_page_bytes = max_page_bytes
        self.stats = stats
        self.ready: List[Page] = []
        self._stack: List[str] = []
        self._buf: Optional[List[str]] = None
        self._reset_page()

    def _reset_page(self) -> None:
        self._page_id: Optional[int] = None
        self._title = ""
        self._revisions: List[Snapshot] = []
        self._page_bytes = 0
        self._oversize = False
        self._reset_revision()

    def _reset_revision(self) -> None:
        self._rev_id: Optional[int] = None
        self._timestamp = ""
        self._text: Optional[str] = None
        self._text_deleted = False

    def start(self, name: str, attrs: dict) -> None:
        parent = self._stack[-1] if self._stack else None
        self._stack.append(name)
        if name == "page":
            self._reset_page()
        elif name == "revision":
            self._reset_revision()
        elif name == "text" and parent == "revision":
            self._text_deleted = "deleted" in attrs
            self._buf = []
        elif name in ("id", "title", "timestamp") and parent in ("page", "revision"):
            self._buf = []

    def data(self, chunk: str) -> None:
        if self._buf is None:
            return
        if self._stack[-1] == "text":
            self._page_bytes += len(chunk.encode("utf-8"))
            if self._page_bytes > self.max_page_bytes:
                # stop retaining anything for this page
                self._oversize = True
                self._revisions = []
                self._buf = []
                return
            if self._oversize:
                return
        self._buf.append(chunk)

    def end(self, name: str) -> None:
        self._stack.pop()
        parent = self._stack[-1] if self._stack else None
        value = "".join(self._buf) if self._buf is not None else ""
        if name in ("id", "title", "timestamp", "text"):
            self._buf = None
        if parent == "page":
            if name == "id":
                self._page_id = int(value.strip())
            elif name == "title":
                self._title = value
        elif parent == "revision":
            if name == "id":
                self._rev_id = int(value.strip())
            elif name == "timestamp":
                self._timestamp = value.strip()
            elif name == "text":
                self._text = None if self._text_deleted else value
        if name == "revision" and parent == "page":
            self._finish_revision()
        elif name == "page":
            self._finish_page()

    def _finish_revision(self) -> None:
        if self._text is None or self._rev_id is None:
            self.stats.revisions_skipped += 1
            return
        if self._oversize:
            return
        self._revisions.append(Snapshot(self._rev_id, self._timestamp, self._text))

    def _finish_page(self) -> None:
        if self._oversize:
            self.stats.pages_skipped_oversize += 1
            logger.info("skipping oversize page %s (%r)", self._page_id, self._title)
        elif self._page_id is not None:
            self.stats.pages_read += 1
            self.ready.append(Page(self._page_id, self._title, self._revisions))
        self._reset_page()


def stream_pages(
    dump_source: BinaryIO,
    max_page_bytes: int = DEFAULT_MAX_PAGE_BYTES,
    stats: Optional[DumpStats] = None,
) -> Iterator[Page]:
    """Yield every page of ``dump_source`` whose revision texts total at most ``max_page_bytes``.

    ``dump_source`` is an uncompressed binary stream.  Counters are
    accumulated into ``stats`` when one is passed.
    """
    if max_page_bytes <= 0:
        raise ValueError("max_page_bytes must be positive")
    stats = stats if stats is not None else DumpStats()
    builder = _PageBuilder(max_page_bytes, stats)
    parser = expat.ParserCreate()
    parser.buffer_text = True
    parser.StartElementHandler = builder.start
    parser.EndElementHandler = builder.end
    parser.CharacterDataHandler = builder.data

    def feed(chunk: bytes, final: bool) -> None:
        try:
            parser.Parse(chunk, final)
        except expat.ExpatError as exc:
            raise DumpParseError(expat.errors.messages[exc.code], parser.ErrorByteIndex) from None

    while True:
        chunk = dump_source.read(_CHUNK)
        if not chunk:
            break
        feed(chunk, False)
        if builder.ready:
            yield from builder.ready
            builder.ready = []
    feed(b"", True)
    yield from builder.ready
    builder.ready = []


def sampled_pair_count(n: int, base: float = DEFAULT_DOWNSAMPLE_BASE) -> int:
    """Number of consecutive-revision pairs kept for a page with ``n`` revisions: floor(log_base n)."""
    if base <= 1:
        raise ValueError("base must be > 1")
    if n < 2:
        return 0
    q = _log(n) / _log(base)
    k = int(q)
    # near an exact power the float quotient can land on the wrong side
    if q - k < 1e-9 or k + 1 - q < 1e-9:
        if base ** (k + 1) <= n:
            k += 1
        elif base**k > n:
            k -= 1
    return k if k < n else n - 1


def sample_revision_pairs(page: Page, base: float = DEFAULT_DOWNSAMPLE_BASE, seed: int = 0) -> List[RevisionPair]:
    """Pick ``sampled_pair_count(n, base)`` consecutive pairs uniformly without replacement.

    Pairs come back in chronological order.  The draw depends only on
    ``(seed, page.page_id)``.
    """
    n = page.n
    k = sampled_pair_count(n, base)
    if k == 0:
        return []
    rng = make_rng(seed, page.page_id)
    chosen = sorted(rng.choice(n - 1, size=k, replace=False).tolist())
    revs = page.revisions
    return [RevisionPair(page.page_id, revs[i], revs[i + 1]) for i in chosen]
