import io
import math

import pytest
from hypothesis import given, strategies as st

from oracles import floor_log, xml_page_revision_counts
from wikigec.dump import (
    DumpParseError,
    DumpStats,
    Page,
    Snapshot,
    sample_revision_pairs,
    sampled_pair_count,
    stream_pages,
)


def _dump(*pages: str) -> bytes:
    return ("<mediawiki>" + "".join(pages) + "</mediawiki>").encode("utf-8")


def _page(pid, texts, title="T"):
    revs = "".join(
        f"<revision><id>{pid * 100 + i}</id><timestamp>2020-01-0{1 + i % 9}T00:00:00Z</timestamp><text>{t}</text></revision>"
        for i, t in enumerate(texts)
    )
    return f"<page><title>{title}</title><id>{pid}</id>{revs}</page>"


def test_small_page_is_read():
    body = "x" * 500
    pages = list(stream_pages(io.BytesIO(_dump(_page(1, [body, body])))))
    assert len(pages) == 1
    assert pages[0].n == 2
    assert pages[0].revisions[1].text == body
    assert pages[0].revisions[0].timestamp == "2020-01-01T00:00:00Z"


def test_fixture_dump_counts_match_independent_walk(fixtures):
    path = fixtures / "mini_dump.xml"
    expected = xml_page_revision_counts(path)
    assert expected == [(11, 4), (22, 2), (33, 7)]
    stats = DumpStats()
    with open(path, "rb") as fh:
        pages = list(stream_pages(fh, stats=stats))
    assert [(p.page_id, p.n) for p in pages] == expected
    assert [p.title for p in pages] == ["Harbour seal", "Quiet village", "Copper kettle"]
    assert stats.as_dict() == {"pages_read": 3, "pages_skipped_oversize": 0, "revisions_skipped": 0}


def test_oversize_page_is_skipped_at_64mib(tmp_path):
    # 65 revisions of 1 MiB each: cumulative 65 MiB > 64 MiB cutoff
    path = tmp_path / "big.xml"
    mib = "a" * (1 << 20)
    with open(path, "w") as fh:
        fh.write("<mediawiki><page><title>Big</title><id>5</id>")
        for i in range(65):
            fh.write(f"<revision><id>{i}</id><timestamp>t</timestamp><text>{mib}</text></revision>")
        fh.write("</page>")
        fh.write(_page(6, ["small", "small too"]))
        fh.write("</mediawiki>")
    stats = DumpStats()
    with open(path, "rb") as fh:
        pages = list(stream_pages(fh, stats=stats))
    assert [p.page_id for p in pages] == [6]
    assert stats.pages_skipped_oversize == 1
    assert stats.pages_read == 1


def test_cutoff_is_inclusive_and_counts_utf8_bytes():
    text = "é" * 50  # 100 bytes
    exact = list(stream_pages(io.BytesIO(_dump(_page(1, [text]))), max_page_bytes=100))
    assert len(exact) == 1
    stats = DumpStats()
    over = list(stream_pages(io.BytesIO(_dump(_page(1, [text]))), max_page_bytes=99, stats=stats))
    assert over == [] and stats.pages_skipped_oversize == 1


def test_missing_text_revision_is_skipped():
    xml = (
        "<mediawiki><page><title>A</title><id>1</id>"
        "<revision><id>1</id><timestamp>t</timestamp><text>one</text></revision>"
        "<revision><id>2</id><timestamp>t</timestamp></revision>"
        '<revision><id>3</id><timestamp>t</timestamp><text deleted="deleted" /></revision>'
        "<revision><id>4</id><timestamp>t</timestamp><text>four</text></revision>"
        "</page></mediawiki>"
    ).encode()
    stats = DumpStats()
    pages = list(stream_pages(io.BytesIO(xml), stats=stats))
    assert [r.revision_id for r in pages[0].revisions] == [1, 4]
    assert stats.revisions_skipped == 2


def test_malformed_xml_reports_byte_offset():
    xml = b"<mediawiki><page><title>A</title><id>1</id></pagee></mediawiki>"
    with pytest.raises(DumpParseError) as err:
        list(stream_pages(io.BytesIO(xml)))
    bad = xml.index(b"</pagee>")
    assert bad <= err.value.byte_offset < bad + len(b"</pagee>")
    assert str(err.value.byte_offset) in str(err.value)


def test_empty_text_element_is_an_empty_snapshot():
    xml = _dump(_page(1, ["", "b"]))
    pages = list(stream_pages(io.BytesIO(xml)))
    assert [r.text for r in pages[0].revisions] == ["", "b"]


def test_pages_stream_before_end_of_input():
    # a page must be available as soon as it closes, not at end of stream
    head = _dump(_page(1, ["a", "b"]))[: -len("</mediawiki>")]

    class Endless(io.RawIOBase):
        def __init__(self):
            self.sent = False

        def readable(self):
            return True

        def readinto(self, buf):
            if self.sent:
                raise AssertionError("reader asked for more input before yielding the page")
            self.sent = True
            buf[: len(head)] = head
            return len(head)

    first = next(stream_pages(Endless()))
    assert first.page_id == 1


@pytest.mark.parametrize("n,base,expected", [(1, 1.5, 0), (100, 1.5, 11), (100, 1.35, 15), (2, 1.5, 1), (7, 1.5, 4), (0, 1.5, 0)])
def test_sampled_pair_count_examples(n, base, expected):
    assert sampled_pair_count(n, base) == expected


def test_sampled_pair_count_exact_powers():
    for k in range(1, 30):
        assert sampled_pair_count(10**k if k < 8 else 2**k, 10 if k < 8 else 2) == k
        assert sampled_pair_count(3**k - 1, 3) == k - 1


def test_sampled_pair_count_rejects_bad_base():
    with pytest.raises(ValueError):
        sampled_pair_count(10, 1.0)


@given(st.integers(0, 10**7), st.floats(1.05, 4.0))
def test_sampled_pair_count_law(n, base):
    k = sampled_pair_count(n, base)
    assert 0 <= k <= max(n - 1, 0)
    q = math.log(n, base) if n >= 2 else 0.0
    if abs(q - round(q)) > 1e-9:  # away from exact powers the naive oracle is reliable
        assert k == min(floor_log(n, base), max(n - 1, 0))


@given(st.integers(2, 10**6), st.floats(1.05, 3.0), st.floats(0.0, 1.0))
def test_sampled_pair_count_monotone(n, base, bump):
    assert sampled_pair_count(n, base) <= sampled_pair_count(n + 1, base)
    assert sampled_pair_count(n, base + bump) <= sampled_pair_count(n, base)


def _mkpage(pid, n):
    return Page(pid, "t", [Snapshot(pid * 1000 + i, f"2020-{i:04d}", f"text {i}") for i in range(n)])


def test_sample_pairs_n2_gives_the_single_pair():
    page = _mkpage(3, 2)
    pairs = sample_revision_pairs(page, 1.5, seed=0)
    assert len(pairs) == 1
    assert (pairs[0].older.revision_id, pairs[0].newer.revision_id) == (3000, 3001)


def test_sample_pairs_n7_subset_of_consecutive_pairs():
    page = _mkpage(9, 7)
    pairs = sample_revision_pairs(page, 1.5, seed=42)
    assert len(pairs) == 4
    consecutive = {(page.revisions[i].revision_id, page.revisions[i + 1].revision_id) for i in range(6)}
    got = [(p.older.revision_id, p.newer.revision_id) for p in pairs]
    assert set(got) <= consecutive and len(set(got)) == 4
    assert got == sorted(got)
    assert sample_revision_pairs(page, 1.5, seed=42) == pairs


def test_sample_pairs_small_pages():
    assert sample_revision_pairs(_mkpage(1, 0), 1.5, 0) == []
    assert sample_revision_pairs(_mkpage(1, 1), 1.5, 0) == []


def test_sample_pairs_are_uniform_over_consecutive_pairs():
    # n=7, base=1.5: 4 of 6 pairs; each pair's inclusion rate is 4/6
    hits = [0] * 6
    trials = 3000
    for seed in range(trials):
        for p in sample_revision_pairs(_mkpage(9, 7), 1.5, seed):
            hits[p.older.revision_id - 9000] += 1
    sigma = (trials * (4 / 6) * (2 / 6)) ** 0.5
    for h in hits:
        assert abs(h - trials * 4 / 6) < 4 * sigma


@given(st.integers(0, 200), st.integers(0, 2**63), st.sampled_from([1.35, 1.5, 2.0]))
def test_sample_pairs_count_and_consecutive(n, seed, base):
    page = _mkpage(5, n)
    pairs = sample_revision_pairs(page, base, seed)
    assert len(pairs) == sampled_pair_count(n, base)
    ids = [r.revision_id for r in page.revisions]
    for p in pairs:
        assert ids.index(p.newer.revision_id) == ids.index(p.older.revision_id) + 1
        assert p.page_id == 5
