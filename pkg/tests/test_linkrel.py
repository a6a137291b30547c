from __future__ import annotations

from datetime import datetime, timedelta
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from memento_wiki import timefmt
from memento_wiki.linkrel import (LINK_FORMAT, LinkEntry, LinkSyntaxError,
                                  find_rel, parse_link, render_entry,
                                  render_link_body, render_link_header,
                                  render_timemap, timemap_entries)
from memento_wiki.timemap import MementoRef, TimeMapLink, TimeMapPage

from conftest import utc

GOLDEN = Path(__file__).parent / "golden"
HOST = "http://ws-dl-05.cs.odu.edu/demo/index.php"


def golden(name: str) -> str:
    return (GOLDEN / name).read_text(encoding="utf-8")


def test_original_link_header_exact():
    entries = [
        LinkEntry.make(f"{HOST}/Daenerys_Targaryen", "original latest-version"),
        LinkEntry.make(f"{HOST}/Special:TimeGate/Daenerys_Targaryen", "timegate"),
        LinkEntry.make(f"{HOST}/Special:TimeMap/Daenerys_Targaryen", "timemap",
                       type=LINK_FORMAT),
    ]
    assert render_link_header(entries) == golden("original_link.txt")


def test_negotiated_200_header_exact():
    host = "http://ws-dl-05.cs.odu.edu/demo-200-style/index.php"
    entries = [
        LinkEntry.make(f"{host}/Special:TimeMap/Daenerys_Targaryen", "timemap",
                       type=LINK_FORMAT),
        LinkEntry.make(f"{host}/Daenerys_Targaryen", "original latest-version timegate"),
    ]
    assert render_link_header(entries) == golden("negotiated_200_link.txt")
    assert parse_link(golden("negotiated_200_link.txt")) == entries


def test_simple_renders():
    assert render_entry(LinkEntry.make("u", "r")) == '<u>; rel="r"'
    entry = LinkEntry.make("u", "memento", datetime=utc(2013, 2, 23, 1, 55, 23))
    assert render_entry(entry) == '<u>; rel="memento"; datetime="Sat, 23 Feb 2013 01:55:23 GMT"'


def test_attribute_order_is_canonical():
    entry = LinkEntry("u", ("timemap",), (("until", "Sat, 23 Feb 2013 01:55:23 GMT"),
                                          ("type", LINK_FORMAT),
                                          ("from", "Sat, 23 Feb 2013 01:55:23 GMT")))
    assert [k for k, _ in entry.attributes] == ["type", "from", "until"]


@pytest.mark.parametrize("bad", [
    dict(rels=()), dict(rels=("a b",)), dict(rels=("x", "x")),
    dict(attributes=(("datetime", "yesterday"),)),
    dict(attributes=(("anchor", "x"),)),
])
def test_invalid_entries(bad):
    kwargs = dict(target="u", rels=("memento",), attributes=())
    kwargs.update(bad)
    with pytest.raises(ValueError):
        LinkEntry(**kwargs)


def test_sample_timemap_classification():
    entries = parse_link(golden("timemap_page_raw.txt"))
    assert len(entries) == 13
    assert len(find_rel(entries, "self")) == 1
    assert len(find_rel(entries, "timemap")) == 2
    assert [e.target for e in find_rel(entries, "timegate")] == \
        [f"{HOST}/Special:TimeGate/Daenerys_Targaryen"]
    original = find_rel(entries, "original")
    assert len(original) == 1 and original[0].rels == ("original", "latest-version")
    mementos = find_rel(entries, "memento")
    assert [e.target.rsplit("=", 1)[1] for e in mementos] == [
        "90020", "91783", "93106", "93753", "94427", "94605", "95821", "95824"]
    assert mementos[0].instant("datetime") == utc(2013, 2, 23, 1, 55, 23)
    stamps = [e.instant("datetime") for e in mementos]
    assert stamps == sorted(stamps)
    for e in find_rel(entries, "self") + find_rel(entries, "timemap"):
        assert e.get("type") == LINK_FORMAT and e.get("from") and e.get("until")


def test_timemap_page_canonical_rendering():
    entries = parse_link(golden("timemap_page_raw.txt"))
    assert render_link_body(entries).decode() == golden("timemap_page_canonical.txt")


def _sample_page(extra: int) -> TimeMapPage:
    entries = parse_link(golden("timemap_page_raw.txt"))
    self_entry = find_rel(entries, "self")[0]
    prev, nxt = find_rel(entries, "timemap")
    refs = [MementoRef(int(e.target.rsplit("=", 1)[1]), e.instant("datetime"), e.target)
            for e in find_rel(entries, "memento")]
    # the sample is cut short; pad up to the page's stated upper bound
    until = self_entry.instant("until")
    for i in range(extra, 0, -1):
        ts = until - timedelta(days=i - 1)
        refs.append(MementoRef(100000 + i, ts,
                               f"{HOST}?title=Daenerys_Targaryen&oldid={100000 + i}"))
    link = lambda e, pivot: TimeMapLink(e.target, pivot, e.instant("from"), e.instant("until"))
    return TimeMapPage(
        "Daenerys_Targaryen", tuple(refs), self_entry.target,
        find_rel(entries, "timegate")[0].target, find_rel(entries, "original")[0].target,
        prev=link(prev, self_entry.instant("from")),
        next=link(nxt, self_entry.instant("until")))


def test_render_timemap_prefix_matches_sample():
    body = render_timemap(_sample_page(extra=3)).decode()
    expected = golden("timemap_page_canonical.txt").rstrip("\n") + ",\n"
    assert body.startswith(expected)
    assert body.endswith('"\n') and not body.endswith(",\n")


def test_neighbor_pivots_follow_page_bounds():
    page = _sample_page(extra=1)
    assert timefmt.format_digits14(page.prev.pivot) == "20130223015523"
    assert timefmt.format_digits14(page.next.pivot) == "20130711203608"
    assert page.prev.pivot == page.from_ and page.next.pivot == page.until


def test_single_memento_page():
    page = TimeMapPage("A", (MementoRef(1, utc(2010, 1, 1), "m"),), "s", "g", "o")
    rels = [e.rels for e in timemap_entries(page)]
    assert rels == [("self",), ("timegate",), ("original", "latest-version"), ("memento",)]


def test_empty_page_forbidden():
    with pytest.raises(ValueError):
        TimeMapPage("A", (), "s", "g", "o")


def test_endpoint_marking():
    refs = (MementoRef(1, utc(2010, 1, 1), "m1", is_first=True),
            MementoRef(2, utc(2011, 1, 1), "m2", is_last=True))
    page = TimeMapPage("A", refs, "s", "g", "o", mark_endpoints=True)
    mementos = find_rel(timemap_entries(page), "memento")
    assert [m.rels for m in mementos] == [("memento", "first"), ("memento", "last")]


@pytest.mark.parametrize("text", ['<u>; rel=', '<u>', '<u; rel="x"', 'u>; rel="x"',
                                  '<u>; rel="x', '<u>; type="a"', '<u>; rel="x" junk'])
def test_syntax_errors(text):
    with pytest.raises(LinkSyntaxError) as err:
        parse_link(text)
    assert err.value.position >= 0


def test_parser_tolerates_whitespace_and_unknown_attributes():
    text = ' <a> ;rel = "memento" ;  datetime="Sat, 23 Feb 2013 01:55:23 GMT" ,\n\n' \
           '<b>; rel=timegate; title="x"'
    entries = parse_link(text)
    assert [e.target for e in entries] == ["a", "b"]
    assert entries[1].rels == ("timegate",) and entries[1].attributes == ()


def test_parse_bytes_body():
    body = render_link_body([LinkEntry.make("a", "timegate")])
    assert parse_link(body) == [LinkEntry.make("a", "timegate")]


# round trip

instants = st.datetimes(min_value=datetime(1970, 1, 2), max_value=datetime(2100, 1, 1)) \
    .map(timefmt.to_utc)
targets = st.text(st.characters(blacklist_characters="<>\x00",
                                blacklist_categories=("Cs", "Cc")),
                  min_size=1, max_size=30)
rel_tokens = st.sampled_from(["original", "latest-version", "timegate", "timemap",
                              "memento", "first", "last", "self"])


@st.composite
def entries(draw):
    rels = draw(st.lists(rel_tokens, min_size=1, max_size=3, unique=True))
    attrs = {}
    if draw(st.booleans()):
        attrs["type"] = LINK_FORMAT
    for name in ("datetime", "from", "until"):
        if draw(st.booleans()):
            attrs[name] = timefmt.format_http_date(draw(instants))
    return LinkEntry(draw(targets), tuple(rels), tuple(attrs.items()))


@settings(max_examples=300, deadline=None)
@given(st.lists(entries(), min_size=1, max_size=8))
def test_round_trip_header_and_body(items):
    assert parse_link(render_link_header(items)) == items
    assert parse_link(render_link_body(items)) == items
    assert render_link_body(parse_link(render_link_body(items))) == render_link_body(items)


@st.composite
def pages(draw):
    n = draw(st.integers(1, 30))
    start = draw(instants)
    gaps = draw(st.lists(st.integers(0, 10**6), min_size=n, max_size=n))
    refs, ts = [], start
    for i, gap in enumerate(gaps):
        ts = ts + timedelta(seconds=gap)
        refs.append(MementoRef(i + 1, ts, f"http://h/wiki/P?rev={i + 1}"))
    def neighbor(pivot):
        if not draw(st.booleans()):
            return None
        return TimeMapLink(f"http://h/timemap/x/{pivot.year}", pivot, pivot, pivot)
    return TimeMapPage("P", tuple(refs), "http://h/timemap/P", "http://h/timegate/P",
                       "http://h/wiki/P", neighbor(refs[0].timestamp),
                       neighbor(refs[-1].timestamp), draw(st.booleans()))


@settings(max_examples=200, deadline=None)
@given(pages())
def test_timemap_round_trip(page):
    body = render_timemap(page)
    parsed = parse_link(body)
    assert parsed == timemap_entries(page)
    for e in find_rel(parsed, "memento"):
        assert [k for k, _ in e.attributes].count("datetime") == 1
    for e in find_rel(parsed, "self") + find_rel(parsed, "timemap"):
        assert e.get("from") and e.get("until")
