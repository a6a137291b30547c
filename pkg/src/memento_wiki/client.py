"""Memento client operations: negotiate, walk TimeMaps, audit a server."""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from datetime import datetime
from typing import Optional
from urllib.parse import urljoin

import requests

from . import timefmt
from .linkrel import LINK_FORMAT, LinkEntry, LinkSyntaxError, find_rel, parse_link

logger = logging.getLogger(__name__)

ERROR_HEADER = "X-Memento-Error"
MAX_WALK_PAGES = 10_000
MALFORMED_DATETIMES = ("yesterday at noon", "Mon, 30 Feb 2014 00:00:00 GMT")


class ClientError(Exception):
    pass


class NoTimeGateAdvertised(ClientError):
    pass


class NegotiationFailed(ClientError):
    def __init__(self, status: int, detail: str = ""):
        self.status = status
        super().__init__(f"negotiation failed (HTTP {status}) {detail}".strip())


class CycleDetected(ClientError):
    pass


class WalkLimitExceeded(ClientError):
    pass


@dataclass(frozen=True)
class NegotiationOutcome:
    memento_uri: str
    memento_datetime: datetime
    pattern: str
    chain: tuple[tuple[str, str, int], ...] = ()


def _session(session: requests.Session | None) -> requests.Session:
    return session if session is not None else requests.Session()


def _get(session: requests.Session, url: str,
         accept_datetime: Optional[str] = None) -> requests.Response:
    headers = {"Accept-Datetime": accept_datetime} if accept_datetime else {}
    return session.get(url, headers=headers, allow_redirects=False, timeout=30)


def _links(resp: requests.Response, base: str) -> list[LinkEntry]:
    value = resp.headers.get("Link")
    if not value:
        return []
    return [LinkEntry(urljoin(base, e.target), e.rels, e.attributes)
            for e in parse_link(value)]


def _varies_on_datetime(resp: requests.Response) -> bool:
    vary = resp.headers.get("Vary", "")
    return "accept-datetime" in [v.strip().lower() for v in vary.split(",")]


def _soft_error(resp: requests.Response) -> Optional[str]:
    return resp.headers.get(ERROR_HEADER)


def _memento_datetime(resp: requests.Response) -> Optional[datetime]:
    value = resp.headers.get("Memento-Datetime")
    if value is None:
        return None
    try:
        return timefmt.parse_http_date(value)
    except timefmt.DatetimeError:
        return None


def negotiate(url: str, when: datetime,
              session: requests.Session | None = None) -> NegotiationOutcome:
    """Find the memento of ``url`` for ``when``, whichever pattern is served."""
    session = _session(session)
    accept = timefmt.format_http_date(when)
    chain: list[tuple[str, str, int]] = []

    first = _get(session, url, accept)
    chain.append(("original", url, first.status_code))
    if _soft_error(first):
        raise NegotiationFailed(first.status_code,
                                f"server error {_soft_error(first)}")

    location = first.headers.get("Location")
    if first.status_code in (301, 302, 303, 307, 308) and location \
            and _varies_on_datetime(first):
        pattern, memento_uri = "p1.1", urljoin(url, location)
    elif first.status_code == 200 and first.headers.get("Content-Location") \
            and _memento_datetime(first) is not None:
        memento_uri = urljoin(url, first.headers["Content-Location"])
        chain.append(("memento", memento_uri, first.status_code))
        return NegotiationOutcome(memento_uri, _memento_datetime(first),
                                  "p1.2", tuple(chain))
    elif first.status_code == 200:
        timegates = find_rel(_links(first, url), "timegate")
        if not timegates:
            raise NoTimeGateAdvertised(f"{url} advertises no TimeGate")
        timegate = timegates[0].target
        if timegate == url:
            raise NegotiationFailed(200, "original is its own TimeGate but "
                                    "ignored Accept-Datetime")
        resp = _get(session, timegate, accept)
        chain.append(("timegate", timegate, resp.status_code))
        if _soft_error(resp) or not resp.headers.get("Location") \
                or not resp.is_redirect:
            raise NegotiationFailed(resp.status_code, f"from TimeGate {timegate}")
        pattern = "p2.1"
        memento_uri = urljoin(timegate, resp.headers["Location"])
    else:
        raise NegotiationFailed(first.status_code, f"from {url}")

    memento = _get(session, memento_uri)
    chain.append(("memento", memento_uri, memento.status_code))
    md = _memento_datetime(memento)
    if memento.status_code != 200 or _soft_error(memento) or md is None:
        raise NegotiationFailed(memento.status_code,
                                f"memento {memento_uri} lacks Memento-Datetime")
    return NegotiationOutcome(memento_uri, md, pattern, tuple(chain))


@dataclass
class WalkResult:
    mementos: list[tuple[datetime, str]]
    pages: list[str]


def _fetch_timemap(session: requests.Session, uri: str) -> list[LinkEntry]:
    resp = _get(session, uri)
    if resp.status_code != 200 or _soft_error(resp):
        raise ClientError(f"TimeMap {uri} answered {resp.status_code} "
                          f"{_soft_error(resp) or ''}".strip())
    return [LinkEntry(urljoin(uri, e.target), e.rels, e.attributes)
            for e in parse_link(resp.content)]


def _bounds(entries: list[LinkEntry]) -> tuple[Optional[datetime], Optional[datetime]]:
    selves = find_rel(entries, "self")
    if selves and selves[0].get("from") and selves[0].get("until"):
        return selves[0].instant("from"), selves[0].instant("until")
    stamps = [e.instant("datetime") for e in find_rel(entries, "memento")
              if e.get("datetime")]
    if not stamps:
        return None, None
    return min(stamps), max(stamps)


def walk_timemap(url: str, session: requests.Session | None = None,
                 max_pages: int = MAX_WALK_PAGES) -> WalkResult:
    """Collect every memento reachable through paged TimeMap links.

    Neighbour links carrying ``from``/``until`` are followed as two chains,
    one towards older and one towards newer pages; a chain that returns to a
    page it already visited is a cycle.  Neighbours without bounds are
    visited once each.
    """
    session = _session(session)
    mementos: dict[str, datetime] = {}
    fetched: list[str] = []
    pages: dict[str, list[LinkEntry]] = {}

    def load(uri: str) -> list[LinkEntry]:
        if uri not in pages:
            if len(fetched) >= max_pages:
                raise WalkLimitExceeded(f"more than {max_pages} TimeMap pages")
            entries = _fetch_timemap(session, uri)
            pages[uri] = entries
            fetched.append(uri)
            for e in find_rel(entries, "memento"):
                if e.get("datetime"):
                    mementos.setdefault(e.target, e.instant("datetime"))
        return pages[uri]

    def neighbours(uri: str) -> tuple[list[str], list[str], list[str]]:
        entries = load(uri)
        lo, hi = _bounds(entries)
        older, newer, unknown = [], [], []
        for e in find_rel(entries, "timemap"):
            if e.has_rel("self") or e.target == uri:
                continue
            n_from, n_until = e.instant("from"), e.instant("until")
            if None in (lo, hi, n_from, n_until):
                unknown.append(e.target)
            elif n_until < lo:
                older.append(e.target)
            elif n_from > hi:
                newer.append(e.target)
            else:
                unknown.append(e.target)
        return older, newer, unknown

    loose: deque[str] = deque()
    _, _, unknown = neighbours(url)
    loose.extend(unknown)
    for side in (0, 1):
        chain = {url}
        frontier = neighbours(url)[side]
        while frontier:
            nxt = frontier[0]
            if nxt in chain:
                raise CycleDetected(f"TimeMap chain returns to {nxt}")
            chain.add(nxt)
            parts = neighbours(nxt)
            loose.extend(parts[2])
            frontier = parts[side]
    while loose:
        uri = loose.popleft()
        if uri in pages:
            continue
        older, newer, unknown = neighbours(uri)
        loose.extend(older + newer + unknown)

    ordered = sorted((dt, uri) for uri, dt in mementos.items())
    return WalkResult(ordered, fetched)


@dataclass(frozen=True)
class Check:
    rule: str
    passed: bool
    detail: str = ""
    informational: bool = False


@dataclass
class ConformanceReport:
    pattern_detected: str = "none"
    checks: list[Check] = field(default_factory=list)
    memento_chain: list[tuple[str, str, int]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def lines(self) -> list[str]:
        out = [f"pattern\t{self.pattern_detected}"]
        for c in self.checks:
            mark = "info" if c.informational else ("pass" if c.passed else "FAIL")
            out.append(f"{mark}\t{c.rule}\t{c.detail}")
        for step, uri, status in self.memento_chain:
            out.append(f"step\t{step}\t{status}\t{uri}")
        return out


def audit(url: str, when: datetime,
          session: requests.Session | None = None) -> ConformanceReport:
    """Exercise the Memento exchange at ``url`` and grade each step."""
    session = _session(session)
    report = ConformanceReport()
    checks = report.checks
    chain = report.memento_chain
    accept = timefmt.format_http_date(when)

    def check(rule: str, ok: bool, detail: str = "") -> bool:
        checks.append(Check(rule, bool(ok), detail))
        return bool(ok)

    try:
        original = _get(session, url)
    except requests.RequestException as exc:
        check("original-reachable", False, str(exc))
        return report
    chain.append(("original", url, original.status_code))
    check("original-status", original.status_code == 200
          and not _soft_error(original),
          f"HTTP {original.status_code} {_soft_error(original) or ''}".strip())
    try:
        links = _links(original, url)
        check("original-link-parses", True)
    except LinkSyntaxError as exc:
        links = []
        check("original-link-parses", False, str(exc))

    originals = find_rel(links, "original")
    timegates = find_rel(links, "timegate")
    timemaps = find_rel(links, "timemap")
    check("original-advertises-timegate", timegates,
          timegates[0].target if timegates else "no rel=timegate")
    tm_ok = bool(timemaps) and timemaps[0].get("type") == LINK_FORMAT
    check("original-advertises-timemap", tm_ok,
          timemaps[0].target if timemaps else "no rel=timemap")
    check("original-without-memento-datetime",
          "Memento-Datetime" not in original.headers)
    firsts, lasts = find_rel(links, "first"), find_rel(links, "last")
    checks.append(Check("recommended-first-last", True,
                        "present" if firsts and lasts else "absent (optional)",
                        informational=True))

    memento_uri = None
    if timegates:
        timegate = timegates[0].target
        resp = _get(session, timegate, accept)
        chain.append(("timegate", timegate, resp.status_code))
        location = resp.headers.get("Location")
        content_location = resp.headers.get("Content-Location")
        if _soft_error(resp):
            pass
        elif resp.is_redirect and location:
            report.pattern_detected = "p1.1" if timegate == url else "p2.1"
            memento_uri = urljoin(timegate, location)
        elif resp.status_code == 200 and content_location \
                and _memento_datetime(resp) and timegate == url:
            report.pattern_detected = "p1.2"
            memento_uri = urljoin(timegate, content_location)
        check("timegate-negotiates", memento_uri is not None,
              f"HTTP {resp.status_code} {_soft_error(resp) or ''}".strip())
        check("timegate-varies-on-accept-datetime", _varies_on_datetime(resp),
              resp.headers.get("Vary", "no Vary header"))

        for bad in MALFORMED_DATETIMES:
            bad_resp = _get(session, timegate, bad)
            soft = _soft_error(bad_resp)
            ok = bad_resp.status_code == 400 or soft == "400"
            check("timegate-rejects-bad-datetime", ok,
                  f"{bad!r} -> HTTP {bad_resp.status_code}"
                  + (f" (friendly error {soft})" if soft else ""))

    if memento_uri:
        memento = _get(session, memento_uri)
        chain.append(("memento", memento_uri, memento.status_code))
        md = _memento_datetime(memento)
        check("memento-has-memento-datetime", memento.status_code == 200
              and md is not None, memento.headers.get("Memento-Datetime", "missing"))
        try:
            m_links = _links(memento, memento_uri)
        except LinkSyntaxError:
            m_links = []
        check("memento-links-original", find_rel(m_links, "original"))
        if md is not None:
            checks.append(Check(
                "selection-at-or-before", True,
                "at or before request" if md <= when else
                "after request (first memento or closest-match server)",
                informational=True))

    if timemaps:
        tm_uri = timemaps[0].target
        resp = _get(session, tm_uri)
        chain.append(("timemap", tm_uri, resp.status_code))
        ctype = resp.headers.get("Content-Type", "")
        check("timemap-content-type", ctype.split(";")[0].strip() == LINK_FORMAT,
              ctype)
        try:
            entries = parse_link(resp.content)
            check("timemap-parses", True, f"{len(entries)} entries")
        except LinkSyntaxError as exc:
            entries = []
            check("timemap-parses", False, str(exc))
        selves = find_rel(entries, "self")
        stamps = [e.instant("datetime") for e in find_rel(entries, "memento")
                  if e.get("datetime")]
        if selves and stamps and selves[0].get("from") and selves[0].get("until"):
            lo, hi = selves[0].instant("from"), selves[0].instant("until")
            check("timemap-self-bounds", lo == min(stamps) and hi == max(stamps),
                  f"from {selves[0].get('from')} until {selves[0].get('until')}")
        else:
            check("timemap-self-bounds", False, "missing self from/until or mementos")

    if report.pattern_detected == "none" and all(
            c.passed for c in checks if c.rule in (
                "original-advertises-timegate", "timegate-negotiates")):
        check("pattern-detected", False, "no negotiation pattern recognised")
    return report
