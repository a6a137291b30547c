"""The Memento HTTP service.

:class:`MementoApp` is a plain request -> response function over an
immutable :class:`~memento_wiki.store.Store`; :func:`make_server` wraps it
in a threading ``http.server`` for real sockets.
"""

from __future__ import annotations

import enum
import logging
import re
import threading
from dataclasses import dataclass, field
from datetime import datetime
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Mapping, Optional
from urllib.parse import parse_qs, unquote, urlsplit

from . import linkrel, negotiator, timefmt
from .config import ErrorPageType, NegotiationPattern, ServerConfig
from .linkrel import LINK_FORMAT, LinkEntry
from .negotiator import NegotiationResult
from .store import NotFound, PageHistory, Revision, Store
from .timemap import TimeMapKind, build_page
from .uris import UriScheme

logger = logging.getLogger(__name__)

ACCEPT_DATETIME = "Accept-Datetime"
MEMENTO_DATETIME = "Memento-Datetime"
ERROR_HEADER = "X-Memento-Error"
TEXT_PLAIN = "text/plain; charset=utf-8"

_PIVOT_PATH_RE = re.compile(r"^(?P<pivot>[^/]*)/(?P<dir>-1|1)/(?P<title>.+)$")

TIMEGATE_USAGE = """\
TimeGate

Request {base}/timegate/<title> with an Accept-Datetime header such as
  Accept-Datetime: Thu, 30 Jun 2011 00:00:00 GMT
to be redirected to the revision of <title> that was current at that time.
Without Accept-Datetime the newest revision is selected.
"""

TIMEMAP_USAGE = """\
TimeMap

{base}/timemap/<title>                      newest mementos of <title>
{base}/timemap/YYYYMMDDHHMMSS/-1/<title>    mementos before the datetime
{base}/timemap/YYYYMMDDHHMMSS/1/<title>     mementos after the datetime
"""


class ResourceKind(enum.Enum):
    ORIGINAL_DIRECT = "OriginalDirect"
    MEMENTO_DIRECT = "MementoDirect"
    TIMEGATE_302 = "TimeGate302"
    NEGOTIATED_200 = "Negotiated200"
    TIMEGATE_PATTERN11 = "TimeGatePattern11"
    TIMEMAP_FULL = "TimeMapFull"
    TIMEMAP_PIVOT_ASCENDING = "TimeMapPivotAscending"
    TIMEMAP_PIVOT_DESCENDING = "TimeMapPivotDescending"


class ErrorCondition(enum.Enum):
    BAD_REQUEST = 400
    FORBIDDEN = 403
    NOT_FOUND = 404
    INTERNAL = 500

    @property
    def reason(self) -> str:
        return HTTPStatus(self.value).phrase


class RequestError(Exception):
    def __init__(self, condition: ErrorCondition, message: str,
                 vary_datetime: bool = False):
        self.condition = condition
        self.message = message
        self.vary_datetime = vary_datetime
        super().__init__(message)


@dataclass
class Response:
    status: int
    headers: list[tuple[str, str]] = field(default_factory=list)
    body: bytes = b""

    def header(self, name: str) -> Optional[str]:
        name = name.lower()
        for key, value in self.headers:
            if key.lower() == name:
                return value
        return None

    def header_names(self) -> set[str]:
        return {k.lower() for k, _ in self.headers}

    def links(self) -> list[LinkEntry]:
        value = self.header("Link")
        return linkrel.parse_link(value) if value else []


@dataclass(frozen=True)
class Route:
    kind: ResourceKind
    title: str
    rev_id: Optional[int] = None
    pivot: Optional[str] = None


def render_error(condition: ErrorCondition, mode: ErrorPageType,
                 message: str = "") -> Response:
    code = condition.value
    if mode is ErrorPageType.TRADITIONAL:
        body = f"{code} {condition.reason}\n"
        if message:
            body += message + "\n"
        return Response(code, [("Content-Type", TEXT_PLAIN)],
                        body.encode("utf-8"))
    body = (f"Error: {condition.reason}\n"
            f"{message or 'The request could not be completed.'}\n"
            f"{ERROR_HEADER}: {code}\n")
    return Response(200, [("Content-Type", TEXT_PLAIN), (ERROR_HEADER, str(code))],
                    body.encode("utf-8"))


class MementoApp:
    def __init__(self, store: Store, config: ServerConfig | None = None):
        self.store = store
        self.config = config or ServerConfig()
        base_url = self.config.base_url or "http://localhost"
        self.uris = UriScheme(base_url)
        self._base_path = self.uris.base_path

    @property
    def original_is_timegate(self) -> bool:
        return (self.config.negotiation_pattern is NegotiationPattern.P200
                or self.config.experimental_pattern11)

    # dispatch

    def route(self, method: str, target: str,
              headers: Mapping[str, str] | None = None) -> Route:
        headers = _lower_keys(headers)
        parts = urlsplit(target)
        path = parts.path
        if self._base_path and path.startswith(self._base_path):
            path = path[len(self._base_path):]
        has_dt = ACCEPT_DATETIME.lower() in headers

        if path.startswith("/wiki/"):
            title = unquote(path[len("/wiki/"):])
            if not title:
                raise RequestError(ErrorCondition.NOT_FOUND, "no page title")
            query = parse_qs(parts.query)
            if "rev" in query:
                rev_text = query["rev"][-1]
                if not rev_text.isdigit() or int(rev_text) == 0:
                    raise RequestError(ErrorCondition.BAD_REQUEST,
                                       f"bad revision id {rev_text!r}")
                return Route(ResourceKind.MEMENTO_DIRECT, title, int(rev_text))
            if has_dt and self.config.experimental_pattern11:
                return Route(ResourceKind.TIMEGATE_PATTERN11, title)
            if has_dt and self.config.negotiation_pattern is NegotiationPattern.P200:
                return Route(ResourceKind.NEGOTIATED_200, title)
            return Route(ResourceKind.ORIGINAL_DIRECT, title)

        if path == "/timegate" or path.startswith("/timegate/"):
            return Route(ResourceKind.TIMEGATE_302,
                         unquote(path[len("/timegate/"):]))

        if path == "/timemap" or path.startswith("/timemap/"):
            rest = path[len("/timemap/"):]
            m = _PIVOT_PATH_RE.match(rest)
            if m:
                kind = (ResourceKind.TIMEMAP_PIVOT_ASCENDING if m["dir"] == "1"
                        else ResourceKind.TIMEMAP_PIVOT_DESCENDING)
                return Route(kind, unquote(m["title"]), pivot=unquote(m["pivot"]))
            return Route(ResourceKind.TIMEMAP_FULL, unquote(rest))

        raise RequestError(ErrorCondition.NOT_FOUND, f"no resource at {path}")

    def handle(self, method: str, target: str,
               headers: Mapping[str, str] | None = None) -> Response:
        headers = _lower_keys(headers)
        try:
            route = self.route(method, target, headers)
            accept_dt = headers.get(ACCEPT_DATETIME.lower())
            kind = route.kind
            if kind is ResourceKind.ORIGINAL_DIRECT:
                return self.serve_original(route.title)
            if kind is ResourceKind.MEMENTO_DIRECT:
                return self.serve_memento(route.title, route.rev_id)
            if kind is ResourceKind.TIMEGATE_302:
                return self.serve_timegate_302(route.title, accept_dt)
            if kind is ResourceKind.NEGOTIATED_200:
                return self.serve_negotiated_200(route.title, accept_dt)
            if kind is ResourceKind.TIMEGATE_PATTERN11:
                return self.serve_timegate_pattern11(route.title, accept_dt)
            return self.serve_timemap(kind, route.title, route.pivot)
        except RequestError as exc:
            response = render_error(exc.condition, self.config.error_page_type,
                                    exc.message)
            if exc.vary_datetime:
                response.headers.append(("Vary", ACCEPT_DATETIME))
            return response
        except Exception:
            logger.exception("error handling %s %s", method, target)
            return render_error(ErrorCondition.INTERNAL,
                                self.config.error_page_type)

    # helpers

    def _history(self, title: str) -> PageHistory:
        if self.config.is_excluded(title):
            raise RequestError(ErrorCondition.FORBIDDEN,
                               f"Memento is not available in the namespace of {title!r}")
        try:
            return self.store.get_history(title)
        except NotFound:
            raise RequestError(ErrorCondition.NOT_FOUND,
                               f"no page named {title!r}") from None

    def _target(self, accept_dt: Optional[str]) -> negotiator.TargetDatetime:
        if accept_dt is None:
            return negotiator.now_target()
        try:
            return negotiator.parse_http_datetime(accept_dt.strip())
        except timefmt.DatetimeError as exc:
            raise RequestError(ErrorCondition.BAD_REQUEST,
                               f"bad Accept-Datetime: {exc}",
                               vary_datetime=True) from None

    def _original_entry(self, title: str) -> LinkEntry:
        rels = "original latest-version"
        if self.original_is_timegate:
            rels += " timegate"
        return LinkEntry.make(self.uris.original(title), rels)

    def _timegate_entry(self, title: str) -> list[LinkEntry]:
        if self.original_is_timegate:
            return []
        return [LinkEntry.make(self.uris.timegate(title), "timegate")]

    def _timemap_entry(self, title: str) -> LinkEntry:
        return LinkEntry.make(self.uris.timemap(title), "timemap",
                              type=LINK_FORMAT)

    def _recommended(self, history: PageHistory) -> list[LinkEntry]:
        if not self.config.recommended_relations:
            return []
        title = history.title
        first, last = history.first, history.last
        if first.rev_id == last.rev_id:
            return [LinkEntry.make(self.uris.memento(title, first.rev_id),
                                   "memento first last",
                                   datetime=first.timestamp)]
        return [
            LinkEntry.make(self.uris.memento(title, first.rev_id),
                           "memento first", datetime=first.timestamp),
            LinkEntry.make(self.uris.memento(title, last.rev_id),
                           "memento last", datetime=last.timestamp),
        ]

    def _resource_links(self, history: PageHistory) -> str:
        """original, [timegate], timemap: the order used on URI-R and URI-M."""
        title = history.title
        entries = [self._original_entry(title), *self._timegate_entry(title),
                   self._timemap_entry(title), *self._recommended(history)]
        return linkrel.render_link_header(entries)

    def _negotiation_links(self, history: PageHistory) -> str:
        """timemap then original: the order used on negotiation responses."""
        title = history.title
        entries = [self._timemap_entry(title), self._original_entry(title),
                   *self._recommended(history)]
        return linkrel.render_link_header(entries)

    def _redirect(self, history: PageHistory,
                  result: NegotiationResult) -> Response:
        location = self.uris.memento(history.title, result.selected.rev_id)
        return Response(302, [
            ("Vary", ACCEPT_DATETIME),
            ("Location", location),
            ("Link", self._negotiation_links(history)),
            ("Cache-Control", "no-store"),
            ("Content-Type", TEXT_PLAIN),
        ])

    # resources

    def serve_original(self, title: str) -> Response:
        history = self._history(title)
        latest = history.last
        headers = [("Link", self._resource_links(history))]
        if self.original_is_timegate:
            headers.append(("Vary", ACCEPT_DATETIME))
        headers.append(("Content-Type", latest.content_type))
        return Response(200, headers, latest.content)

    def serve_memento(self, title: str, rev_id: int) -> Response:
        history = self._history(title)
        try:
            revision = self.store.get_revision(title, rev_id)
        except NotFound:
            raise RequestError(ErrorCondition.NOT_FOUND,
                               f"{title!r} has no revision {rev_id}") from None
        return Response(200, [
            (MEMENTO_DATETIME, timefmt.format_http_date(revision.timestamp)),
            ("Link", self._resource_links(history)),
            ("Content-Type", revision.content_type),
        ], revision.content)

    def serve_timegate_302(self, title: str,
                           accept_dt: Optional[str]) -> Response:
        if not title:
            body = TIMEGATE_USAGE.format(base=self.uris.base_url)
            return Response(200, [("Content-Type", TEXT_PLAIN)],
                            body.encode("utf-8"))
        history = self._history(title)
        result = negotiator.negotiate(history, self._target(accept_dt))
        return self._redirect(history, result)

    def serve_timegate_pattern11(self, title: str,
                                 accept_dt: Optional[str]) -> Response:
        if accept_dt is None:
            return self.serve_original(title)
        history = self._history(title)
        result = negotiator.negotiate(history, self._target(accept_dt))
        return self._redirect(history, result)

    def serve_negotiated_200(self, title: str,
                             accept_dt: Optional[str]) -> Response:
        history = self._history(title)
        selected: Revision = negotiator.negotiate(
            history, self._target(accept_dt)).selected
        return Response(200, [
            (MEMENTO_DATETIME, timefmt.format_http_date(selected.timestamp)),
            ("Content-Location", self.uris.memento(title, selected.rev_id)),
            ("Link", self._negotiation_links(history)),
            ("Vary", ACCEPT_DATETIME),
            ("Content-Type", selected.content_type),
        ], selected.content)

    def serve_timemap(self, kind: ResourceKind, title: str,
                      pivot: Optional[str] = None) -> Response:
        if not title:
            body = TIMEMAP_USAGE.format(base=self.uris.base_url)
            return Response(200, [("Content-Type", TEXT_PLAIN)],
                            body.encode("utf-8"))
        history = self._history(title)
        pivot_dt: Optional[datetime] = None
        if kind is ResourceKind.TIMEMAP_FULL:
            tm_kind = TimeMapKind.FULL
        else:
            try:
                pivot_dt = negotiator.parse_pivot(pivot or "").instant
            except timefmt.DatetimeError as exc:
                raise RequestError(ErrorCondition.BAD_REQUEST,
                                   f"bad TimeMap pivot: {exc}") from None
            tm_kind = (TimeMapKind.ASCENDING
                       if kind is ResourceKind.TIMEMAP_PIVOT_ASCENDING
                       else TimeMapKind.DESCENDING)
        page = build_page(history, self.uris, tm_kind, pivot_dt,
                          self.config.timemap_page_size,
                          mark_endpoints=self.config.recommended_relations)
        if page is None:
            raise RequestError(ErrorCondition.NOT_FOUND,
                               f"no mementos of {title!r} in that range")
        return Response(200, [("Content-Type", LINK_FORMAT)],
                        linkrel.render_timemap(page))


def _lower_keys(headers: Mapping[str, str] | None) -> dict[str, str]:
    return {k.lower(): v for k, v in (headers or {}).items()}


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "memento-wiki"

    def _dispatch(self, send_body: bool) -> None:
        response = self.server.app.handle(self.command, self.path,
                                          dict(self.headers.items()))
        self.send_response(response.status)
        for name, value in response.headers:
            self.send_header(name, value)
        self.send_header("Content-Length", str(len(response.body)))
        self.end_headers()
        if send_body:
            self.wfile.write(response.body)

    def do_GET(self):
        self._dispatch(send_body=True)

    def do_HEAD(self):
        self._dispatch(send_body=False)

    def log_message(self, format, *args):
        logger.debug("%s - %s", self.address_string(), format % args)


class MementoHTTPServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address, app: MementoApp):
        self.app = app
        super().__init__(address, _Handler)

    @property
    def base_url(self) -> str:
        return self.app.uris.base_url

    def start_background(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever,
                                  kwargs={"poll_interval": 0.05}, daemon=True)
        thread.start()
        return thread


def make_server(store: Store, config: ServerConfig | None = None,
                host: str = "127.0.0.1", port: int = 0) -> MementoHTTPServer:
    """Bind a server; with no ``base_url`` configured it uses the bound address."""
    config = config or ServerConfig()
    server = MementoHTTPServer((host, port), MementoApp(store, config))
    if config.base_url is None:
        bound_host, bound_port = server.server_address[:2]
        server.app = MementoApp(
            store, config.replace(base_url=f"http://{bound_host}:{bound_port}"))
    return server
