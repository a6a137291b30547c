from __future__ import annotations

import random
from datetime import timedelta

import pytest
from hypothesis import given, settings, strategies as st

from memento_wiki import timefmt
from memento_wiki.store import (DumpRecord, DuplicateRevision, InvalidTimestamp,
                                MalformedRecord, NotFound, Revision,
                                RevisionOrderError, Store, escape_field,
                                format_record, load_dump, parse_record,
                                read_records, unescape_field, write_dump)

from conftest import DAENERYS, linear_history, records_for, utc


def ten_store():
    # revision k (k = 1..10) at day k, rev ids 101..110
    return Store.from_records(records_for(
        "P", [(100 + k, utc(2010, 1, k)) for k in range(1, 11)]))


def ids(revs):
    return [r.rev_id - 100 for r in revs]


def test_daenerys_load(tmp_path):
    path = tmp_path / "d.dump"
    write_dump(path, records_for("Daenerys_Targaryen", reversed(DAENERYS)))
    store = load_dump(path)
    assert store.titles() == ["Daenerys_Targaryen"]
    history = store.get_history("Daenerys_Targaryen")
    assert [r.rev_id for r in history] == [1499, 27870, 90020]
    rev = store.get_revision("Daenerys_Targaryen", 1499)
    assert timefmt.format_http_date(rev.timestamp) == "Sun, 22 Apr 2007 15:01:20 GMT"


def test_empty_file_gives_empty_store(tmp_path):
    path = tmp_path / "empty.dump"
    path.write_text("")
    assert len(load_dump(path)) == 0


def test_duplicate_revision(tmp_path):
    path = tmp_path / "dup.dump"
    recs = records_for("A", [(5, utc(2010, 1, 1))])
    write_dump(path, recs + recs)
    with pytest.raises(DuplicateRevision) as err:
        load_dump(path)
    assert (err.value.title, err.value.rev_id) == ("A", 5)


def test_same_rev_id_on_different_pages_is_fine():
    store = Store.from_records(records_for("A", [(5, utc(2010, 1, 1))])
                               + records_for("B", [(5, utc(2011, 1, 1))]))
    assert store.get_revision("B", 5).timestamp == utc(2011, 1, 1)


def test_rev_order_must_follow_time():
    with pytest.raises(RevisionOrderError):
        Store.from_records(records_for("A", [(1, utc(2012, 1, 1)),
                                             (2, utc(2011, 1, 1))]))


@pytest.mark.parametrize("line, exc", [
    ("A\t1\t20100101000000\ttext/x-wiki", MalformedRecord),
    ("\t1\t20100101000000\ttext/x-wiki\tx", MalformedRecord),
    ("A\t0\t20100101000000\ttext/x-wiki\tx", MalformedRecord),
    ("A\t-3\t20100101000000\ttext/x-wiki\tx", MalformedRecord),
    ("A\t1\t20100101000000\t\tx", MalformedRecord),
    ("A\t1\t20100101000000\ttext/x-wiki\tbad\\q", MalformedRecord),
    ("A\t1\t2010010100000\ttext/x-wiki\tx", InvalidTimestamp),
    ("A\t1\t20140230000000\ttext/x-wiki\tx", InvalidTimestamp),
])
def test_parse_errors(line, exc):
    with pytest.raises(exc) as err:
        parse_record(line, 7)
    assert err.value.line_no == 7


def test_line_numbers_reported(tmp_path):
    path = tmp_path / "bad.dump"
    good = format_record(records_for("A", [(1, utc(2010, 1, 1))])[0])
    path.write_text(good + "\n" + "junk\n")
    with pytest.raises(MalformedRecord) as err:
        load_dump(path)
    assert err.value.line_no == 2


def test_crlf_lines_accepted(tmp_path):
    path = tmp_path / "crlf.dump"
    good = format_record(records_for("A", [(1, utc(2010, 1, 1))])[0])
    path.write_bytes((good + "\r\n").encode())
    assert [r.revision.rev_id for r in read_records(path)] == [1]


def test_case_sensitive_titles(daenerys_store):
    with pytest.raises(NotFound):
        daenerys_store.get_history("daenerys")


def test_lookup_errors(daenerys_store):
    with pytest.raises(NotFound):
        daenerys_store.get_revision("Daenerys", 2)
    with pytest.raises(NotFound):
        daenerys_store.get_revision("Nobody", 1499)


def test_range_examples():
    store = ten_store()
    t7 = utc(2010, 1, 7)
    assert ids(store.range_before("P", t7, 3)) == [4, 5, 6]
    assert ids(store.range_after("P", t7, 3)) == [8, 9, 10]
    assert ids(store.latest_window("P", 3)) == [8, 9, 10]
    assert ids(store.latest_window("P", 50)) == list(range(1, 11))
    assert ids(store.range_before("P", t7, 100)) == [1, 2, 3, 4, 5, 6]
    assert store.range_before("P", utc(2009, 1, 1), 3) == ()
    assert store.range_after("P", utc(2011, 1, 1), 3) == ()
    with pytest.raises(ValueError):
        store.range_before("P", t7, 0)
    with pytest.raises(NotFound):
        store.latest_window("Q", 3)


def test_content_escaping_round_trip(tmp_path):
    text = "line one\nline\ttwo\\three\r\n"
    assert unescape_field(escape_field(text)) == text
    rec = DumpRecord("A", Revision(1, utc(2010, 1, 1), text.encode(), "text/x-wiki"))
    assert parse_record(format_record(rec)) == rec


def test_dump_line_layout():
    rec = DumpRecord("Daenerys_Targaryen", Revision(
        1499, utc(2007, 4, 22, 15, 1, 20), b"a\tb\nc", "text/x-wiki"))
    assert format_record(rec) == ("Daenerys_Targaryen\t1499\t20070422150120\t"
                                  "text/x-wiki\ta\\tb\\nc")


# properties

@st.composite
def histories(draw, max_size=50):
    n = draw(st.integers(1, max_size))
    gaps = draw(st.lists(st.integers(0, 3), min_size=n, max_size=n))
    revs, t, rev_id = [], utc(2005, 1, 1), 1
    for gap in gaps:
        t += timedelta(seconds=gap)
        rev_id += draw(st.integers(1, 3))
        revs.append((rev_id, t))
    return revs


@settings(max_examples=150, deadline=None)
@given(histories(), st.data())
def test_paging_backward_by_key_covers_everything(revs, data):
    store = Store.from_records(records_for("P", revs))
    history = store.get_history("P")
    limit = data.draw(st.integers(1, len(revs) + 1))
    pages, window = [], store.latest_window("P", limit)
    while window:
        pages.append(window)
        window = store.range_before("P", window[0].key, limit)
    flat = [r for page in reversed(pages) for r in page]
    assert flat == list(history.revisions)


@settings(max_examples=150, deadline=None)
@given(histories(), st.data())
def test_range_partition(revs, data):
    store = Store.from_records(records_for("P", revs))
    full = list(store.get_history("P"))
    pivot = data.draw(st.sampled_from([ts for _, ts in revs]
                                      + [utc(2004, 1, 1), utc(2030, 1, 1)]))
    before = store.range_before("P", pivot, len(full) + 1)
    after = store.range_after("P", pivot, len(full) + 1)
    exact = [r for r in full if r.timestamp == pivot]
    assert list(before) + exact + list(after) == full
    assert all(r.timestamp < pivot for r in before)
    assert all(r.timestamp > pivot for r in after)


@settings(max_examples=100, deadline=None)
@given(histories(), st.randoms(use_true_random=False))
def test_load_is_order_insensitive(revs, rnd):
    recs = records_for("P", revs) + linear_history("Q", 4)
    shuffled = list(recs)
    rnd.shuffle(shuffled)
    a, b = Store.from_records(recs), Store.from_records(shuffled)
    for title in ("P", "Q"):
        assert a.get_history(title) == b.get_history(title)


def test_paging_backward_by_instant_oracle():
    # distinct timestamps: pivoting on the oldest instant is exact
    rnd = random.Random(3)
    for n in range(1, 51):
        days = sorted(rnd.sample(range(1, 2000), n))
        revs = [(i + 1, utc(2000, 1, 1) + timedelta(days=d)) for i, d in enumerate(days)]
        store = Store.from_records(records_for("P", revs))
        for limit in range(1, n + 2):
            seen, window = [], store.latest_window("P", limit)
            while window:
                seen = list(window) + seen
                window = store.range_before("P", window[0].timestamp, limit)
            assert [r.rev_id for r in seen] == [i for i, _ in revs]
