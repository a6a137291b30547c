from __future__ import annotations

import threading
from datetime import datetime, timedelta, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from memento_wiki.config import ServerConfig
from memento_wiki.server import MementoApp, make_server
from memento_wiki.store import DumpRecord, Revision, Store

UTC = timezone.utc


def utc(*parts: int) -> datetime:
    return datetime(*parts, tzinfo=UTC)


DAENERYS = [
    (1499, utc(2007, 4, 22, 15, 1, 20)),
    (27870, utc(2011, 6, 29, 12, 0, 0)),
    (90020, utc(2013, 2, 23, 1, 55, 23)),
]


def records_for(title: str, revs) -> list[DumpRecord]:
    return [DumpRecord(title, Revision(rev_id, ts, f"{title} r{rev_id}".encode(),
                                       "text/x-wiki"))
            for rev_id, ts in revs]


def linear_history(title: str, n: int, start=utc(2010, 1, 1),
                   step=timedelta(days=1)) -> list[DumpRecord]:
    return records_for(title, [(100 + i, start + i * step) for i in range(n)])


@pytest.fixture
def daenerys_store() -> Store:
    return Store.from_records(
        records_for("Daenerys", DAENERYS)
        + records_for("Daenerys_Targaryen", DAENERYS)
        + linear_history("Ten", 10)
        + records_for("Talk:Daenerys", DAENERYS[:1]))


BASE = "http://wiki.test/demo"


@pytest.fixture
def app_factory(daenerys_store):
    def build(**changes) -> MementoApp:
        changes.setdefault("base_url", BASE)
        return MementoApp(daenerys_store, ServerConfig(**changes))
    return build


@pytest.fixture
def live_server(daenerys_store):
    servers = []

    def start(store: Store | None = None, **changes):
        server = make_server(store or daenerys_store, ServerConfig(**changes))
        server.start_background()
        servers.append(server)
        return server

    yield start
    for server in servers:
        server.shutdown()
        server.server_close()


class _Scripted(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def do_GET(self):
        status, headers, body = self.server.routes.get(
            self.path, (404, {}, b"not here"))
        base = f"http://{self.server.server_address[0]}:{self.server.server_address[1]}"
        self.send_response(status)
        for name, value in headers.items():
            self.send_header(name, value.replace("{base}", base))
        body = body.replace(b"{base}", base.encode())
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture
def scripted_server():
    """Serve fixed responses: ``{path: (status, headers, body)}``; ``{base}`` expands."""
    servers = []

    def start(routes):
        server = ThreadingHTTPServer(("127.0.0.1", 0), _Scripted)
        server.daemon_threads = True
        server.routes = routes
        threading.Thread(target=server.serve_forever, kwargs={"poll_interval": 0.05},
                         daemon=True).start()
        servers.append(server)
        host, port = server.server_address[:2]
        return f"http://{host}:{port}"

    yield start
    for server in servers:
        server.shutdown()
        server.server_close()
