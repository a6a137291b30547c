from __future__ import annotations

import math
from datetime import timedelta

import pytest

from memento_wiki.harvester import (ApiError, HarvestJob, Harvester, HttpError,
                                    harvest, parse_api_timestamp, verify_dump)
from memento_wiki.mockwiki import MockRevision, MockWiki, MockWikiServer
from memento_wiki.store import load_dump, read_records

from conftest import utc


def mock_revisions(n, start_id=1000, text="v"):
    return [MockRevision(start_id + i, utc(2008, 1, 1) + timedelta(minutes=7 * i),
                         f"{text} {i}\nline\ttab") for i in range(n)]


@pytest.fixture
def wiki_server():
    servers = []

    def start(pages, **kwargs):
        wiki = MockWiki(pages, **kwargs)
        server = MockWikiServer(wiki)
        servers.append(server)
        return wiki, server

    yield start
    for server in servers:
        server.close()


def test_1200_revisions_in_three_requests(wiki_server, tmp_path):
    wiki, server = wiki_server({"Big Page": mock_revisions(1200)})
    out = tmp_path / "big.dump"
    summary = harvest(HarvestJob(server.api_url, ["Big Page"]), out)
    assert summary.requests == 3 == math.ceil(1200 / 500) == wiki.requests
    assert summary.revisions == 1200 and summary.pages == 1
    records = read_records(out)
    assert len(records) == 1200
    assert len({r.revision.rev_id for r in records}) == 1200
    store = load_dump(out)
    assert store.titles() == ["Big_Page"]
    assert len(store.get_history("Big_Page")) == 1200
    assert store.get_history("Big_Page").first.content == b"v 0\nline\ttab"


def test_default_limit_is_500():
    assert HarvestJob("http://x", []).batch_limit == 500
    with pytest.raises(ValueError):
        HarvestJob("http://x", [], batch_limit=501)
    with pytest.raises(ValueError):
        HarvestJob("http://x", [], batch_limit=0)
    with pytest.raises(ValueError):
        HarvestJob("http://x", [], polite_delay_ms=-1)


@pytest.mark.parametrize("n, limit", [(1, 500), (500, 500), (501, 500), (37, 10), (10, 1)])
def test_request_accounting(wiki_server, n, limit):
    wiki, server = wiki_server({"P": mock_revisions(n)})
    records, summary = Harvester(HarvestJob(server.api_url, ["P"], batch_limit=limit)).run()
    assert summary.requests == math.ceil(n / limit)
    assert [r.revision.rev_id for r in records] == [1000 + i for i in range(n)]


def test_missing_title_recorded_and_job_continues(wiki_server, tmp_path):
    wiki, server = wiki_server({"A": mock_revisions(3), "B": mock_revisions(2, 5000)})
    summary = harvest(HarvestJob(server.api_url, ["A", "Ghost", "B"]), tmp_path / "o.dump")
    assert summary.missing == ["Ghost"]
    assert summary.per_page == {"A": 3, "B": 2}
    assert summary.requests == 3


def test_empty_page_is_missing(wiki_server):
    wiki, server = wiki_server({"Empty": []})
    records, summary = Harvester(HarvestJob(server.api_url, ["Empty"])).run()
    assert records == [] and summary.missing == ["Empty"]


def test_title_normalised_to_underscores(wiki_server):
    wiki, server = wiki_server({"Daenerys Targaryen": mock_revisions(2)})
    records, _ = Harvester(HarvestJob(server.api_url, ["Daenerys_Targaryen"])).run()
    assert {r.title for r in records} == {"Daenerys_Targaryen"}


def test_legacy_response_shape(wiki_server):
    wiki, server = wiki_server({"P": mock_revisions(7)}, legacy_format=True)
    records, summary = Harvester(HarvestJob(server.api_url, ["P"], batch_limit=3)).run()
    assert summary.requests == 3 and len(records) == 7
    assert records[0].revision.content.startswith(b"v 0")


def test_concurrent_workers_keep_title_order(wiki_server):
    pages = {f"T{i}": mock_revisions(5, 100 * i + 1) for i in range(6)}
    wiki, server = wiki_server(pages)
    records, summary = Harvester(HarvestJob(server.api_url, list(pages), workers=3,
                                            batch_limit=2)).run()
    assert list(summary.per_page) == list(pages)
    assert summary.requests == 6 * 3 == wiki.requests


def test_server_limit_below_requested(wiki_server):
    wiki, server = wiki_server({"P": mock_revisions(25)}, max_limit=10)
    _, summary = Harvester(HarvestJob(server.api_url, ["P"])).run()
    assert summary.requests == 3 and summary.revisions == 25


def test_bad_revision_id_is_api_error(wiki_server):
    wiki, server = wiki_server({"P": [MockRevision(0, utc(2010, 1, 1))]})
    with pytest.raises(ApiError):
        Harvester(HarvestJob(server.api_url, ["P"])).run()


def test_http_error(wiki_server):
    wiki, server = wiki_server({})
    with pytest.raises(HttpError) as err:
        Harvester(HarvestJob(server.api_url.replace("api.php", "nope"), ["P"])).run()
    assert err.value.status == 404


def test_api_error():
    class Resp:
        status_code = 200
        url = "http://x"

        def json(self):
            return {"error": {"code": "badparams", "info": "nope"}}

    class Session:
        def get(self, *a, **k):
            return Resp()

    with pytest.raises(ApiError) as err:
        Harvester(HarvestJob("http://x", ["P"]), Session()).run()
    assert err.value.code == "badparams"


def test_api_timestamp():
    assert parse_api_timestamp("2007-04-22T15:01:20Z") == utc(2007, 4, 22, 15, 1, 20)
    with pytest.raises(ApiError):
        parse_api_timestamp("yesterday")


# verify

def test_verify_clean(wiki_server, tmp_path):
    wiki, server = wiki_server({"A": mock_revisions(4)})
    out = tmp_path / "a.dump"
    harvest(HarvestJob(server.api_url, ["A"]), out)
    report = verify_dump(out)
    assert report.ok and report.records == 4 and report.pages == 1


def _lines(*rows):
    return "".join("\t".join(map(str, r)) + "\n" for r in rows)


def test_verify_duplicate(tmp_path):
    path = tmp_path / "dup.dump"
    path.write_text(_lines(("A", 1, "20100101000000", "text/x-wiki", "x"),
                           ("A", 1, "20100102000000", "text/x-wiki", "y")))
    report = verify_dump(path)
    assert [v.kind for v in report.violations] == ["duplicate"]
    assert report.violations[0].line_no == 2


def test_verify_ordering(tmp_path):
    path = tmp_path / "order.dump"
    path.write_text(_lines(("A", 1, "20100105000000", "text/x-wiki", "x"),
                           ("A", 2, "20100101000000", "text/x-wiki", "y"),
                           ("B", 9, "20100101000000", "text/x-wiki", "z")))
    report = verify_dump(path)
    assert [(v.kind, v.title) for v in report.violations] == [("ordering", "A")]


def test_verify_reports_every_bad_line(tmp_path):
    path = tmp_path / "bad.dump"
    path.write_text(_lines(("A", 1, "20100105000000", "text/x-wiki", "x"),
                           ("A", "one", "20100105000000", "text/x-wiki", "x"),
                           ("A", 3, "20140230000000", "text/x-wiki", "x")))
    report = verify_dump(path)
    assert [(v.kind, v.line_no) for v in report.violations] == [
        ("malformed", 2), ("timestamp", 3)]
    assert report.records == 1 and not report.ok
