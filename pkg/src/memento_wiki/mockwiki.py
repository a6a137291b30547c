"""A small in-process stand-in for the MediaWiki Action API.

It answers the revision listing query used by the harvester, including
title normalisation, ``missing`` pages and ``rvcontinue`` continuation, and
counts the requests it serves.  Used by the test-suite and handy for trying
the ``harvest`` command offline.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from datetime import datetime
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlsplit

from . import timefmt


@dataclass(frozen=True)
class MockRevision:
    rev_id: int
    timestamp: datetime
    content: str = ""


class MockWiki:
    def __init__(self, pages: dict[str, list[MockRevision]],
                 max_limit: int = 500, legacy_format: bool = False):
        # keys are canonical titles with spaces
        self.pages = {t.replace("_", " "): sorted(revs, key=lambda r: r.rev_id)
                      for t, revs in pages.items()}
        self.max_limit = max_limit
        self.legacy_format = legacy_format
        self.requests = 0
        self._lock = threading.Lock()

    def query(self, params: dict[str, str]) -> dict:
        with self._lock:
            self.requests += 1
        if params.get("action") != "query" or params.get("prop") != "revisions":
            return {"error": {"code": "badparams", "info": "unsupported query"}}
        requested = params.get("titles", "")
        title = requested.replace("_", " ")
        body: dict = {"batchcomplete": True, "query": {}}
        if title != requested:
            body["query"]["normalized"] = [{"from": requested, "to": title}]
        revs = self.pages.get(title)
        if not revs:
            page = {"ns": 0, "title": title, "missing": True}
            body["query"]["pages"] = self._pages([page])
            return body

        try:
            limit = min(int(params.get("rvlimit", "10")), self.max_limit)
        except ValueError:
            return {"error": {"code": "badinteger", "info": "bad rvlimit"}}
        start = 0
        if "rvcontinue" in params:
            _, _, rev_text = params["rvcontinue"].partition("|")
            resume = int(rev_text)
            start = next(i for i, r in enumerate(revs) if r.rev_id >= resume)
        batch = revs[start:start + limit]
        page = {"pageid": abs(hash(title)) % 10**6, "ns": 0, "title": title,
                "revisions": [self._revision(r) for r in batch]}
        body["query"]["pages"] = self._pages([page])
        if start + limit < len(revs):
            nxt = revs[start + limit]
            body["continue"] = {
                "rvcontinue": f"{timefmt.format_digits14(nxt.timestamp)}|{nxt.rev_id}",
                "continue": "||"}
            body.pop("batchcomplete")
        return body

    def _pages(self, pages: list[dict]):
        if self.legacy_format:
            return {str(p.get("pageid", -1)): p for p in pages}
        return pages

    def _revision(self, rev: MockRevision) -> dict:
        ts = rev.timestamp.strftime("%Y-%m-%dT%H:%M:%SZ")
        if self.legacy_format:
            return {"revid": rev.rev_id, "timestamp": ts, "*": rev.content}
        return {"revid": rev.rev_id, "timestamp": ts,
                "slots": {"main": {"contentmodel": "wikitext",
                                   "contentformat": "text/x-wiki",
                                   "content": rev.content}}}


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def do_GET(self):
        parts = urlsplit(self.path)
        if not parts.path.endswith("api.php"):
            payload, status = b"not found", 404
        else:
            params = {k: v[-1] for k, v in
                      parse_qs(parts.query, keep_blank_values=True).items()}
            payload = json.dumps(self.server.wiki.query(params)).encode("utf-8")
            status = 200
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, format, *args):
        pass


class MockWikiServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, wiki: MockWiki, host: str = "127.0.0.1", port: int = 0):
        self.wiki = wiki
        super().__init__((host, port), _Handler)
        threading.Thread(target=self.serve_forever, kwargs={"poll_interval": 0.05},
                         daemon=True).start()

    @property
    def api_url(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}/w/api.php"

    def close(self) -> None:
        self.shutdown()
        self.server_close()
