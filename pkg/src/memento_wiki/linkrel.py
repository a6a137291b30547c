"""Codec for ``Link`` header values and ``application/link-format`` TimeMaps.

Canonical rendering::

    <target>; rel="r1 r2"; type="..."; datetime="..."; from="..."; until="..."

Header entries are joined with ``,``; TimeMap bodies put one entry per line
joined with ``,\\n``.  The parser accepts either separator and arbitrary
whitespace around ``,``, ``;`` and ``=``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import datetime
from typing import TYPE_CHECKING, Iterable, Optional

from . import timefmt

if TYPE_CHECKING:  # pragma: no cover
    from .timemap import TimeMapPage

LINK_FORMAT = "application/link-format"
ATTRIBUTE_ORDER = ("type", "datetime", "from", "until")
DATE_ATTRIBUTES = frozenset({"datetime", "from", "until"})

_TOKEN_RE = re.compile(r"[A-Za-z0-9!#$%&'*+\-.^_`|~]+")


class LinkSyntaxError(ValueError):
    def __init__(self, position: int, message: str):
        self.position = position
        super().__init__(f"at position {position}: {message}")


@dataclass(frozen=True)
class LinkEntry:
    target: str
    rels: tuple[str, ...]
    attributes: tuple[tuple[str, str], ...] = field(default=())

    def __post_init__(self):
        rels = tuple(self.rels)
        if not rels or any(not r or " " in r for r in rels):
            raise ValueError(f"bad rel set {self.rels!r}")
        if len(set(rels)) != len(rels):
            raise ValueError(f"duplicate rel in {rels!r}")
        attrs = dict(self.attributes)
        if len(attrs) != len(tuple(self.attributes)):
            raise ValueError("repeated attribute")
        unknown = set(attrs) - set(ATTRIBUTE_ORDER)
        if unknown:
            raise ValueError(f"unsupported attributes {sorted(unknown)}")
        for name in DATE_ATTRIBUTES & attrs.keys():
            timefmt.parse_http_date(attrs[name])
        object.__setattr__(self, "rels", rels)
        object.__setattr__(self, "attributes", tuple(
            (name, attrs[name]) for name in ATTRIBUTE_ORDER if name in attrs))

    @classmethod
    def make(cls, target: str, rels: str | Iterable[str], **attrs) -> "LinkEntry":
        """Convenience constructor; datetime values may be given as datetimes.

        ``from`` is a keyword, so pass it as ``from_``.
        """
        if isinstance(rels, str):
            rels = rels.split()
        clean = {}
        for name, value in attrs.items():
            if value is None:
                continue
            name = name.rstrip("_")
            if isinstance(value, datetime):
                value = timefmt.format_http_date(value)
            clean[name] = value
        return cls(target, tuple(rels), tuple(clean.items()))

    def get(self, name: str) -> Optional[str]:
        for key, value in self.attributes:
            if key == name:
                return value
        return None

    def instant(self, name: str) -> Optional[datetime]:
        value = self.get(name)
        return None if value is None else timefmt.parse_http_date(value)

    def has_rel(self, rel: str) -> bool:
        return rel in self.rels


def _quote(value: str) -> str:
    return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'


def render_entry(entry: LinkEntry) -> str:
    parts = [f"<{entry.target}>", "rel=" + _quote(" ".join(entry.rels))]
    parts += [f"{name}={_quote(value)}" for name, value in entry.attributes]
    return "; ".join(parts)


def render_link_header(entries: Iterable[LinkEntry]) -> str:
    return ",".join(render_entry(e) for e in entries)


def render_link_body(entries: Iterable[LinkEntry]) -> bytes:
    text = ",\n".join(render_entry(e) for e in entries)
    return (text + "\n").encode("utf-8")


def timemap_entries(page: "TimeMapPage") -> list[LinkEntry]:
    """Entries of a TimeMap page in canonical order."""
    if not page.mementos:
        raise ValueError("a TimeMap page needs at least one memento")
    entries = [LinkEntry.make(page.self_uri, "self", type=LINK_FORMAT,
                              from_=page.from_, until=page.until)]
    for neighbor in (page.prev, page.next):
        if neighbor is not None:
            entries.append(LinkEntry.make(
                neighbor.uri, "timemap", type=LINK_FORMAT,
                from_=neighbor.from_, until=neighbor.until))
    entries.append(LinkEntry.make(page.timegate_uri, "timegate"))
    entries.append(LinkEntry.make(page.original_uri,
                                  "original latest-version"))
    for m in page.mementos:
        rels = ["memento"]
        if page.mark_endpoints:
            if m.is_first:
                rels.append("first")
            if m.is_last:
                rels.append("last")
        entries.append(LinkEntry.make(m.uri, rels, datetime=m.timestamp))
    return entries


def render_timemap(page: "TimeMapPage") -> bytes:
    return render_link_body(timemap_entries(page))


class _Scanner:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, message: str) -> LinkSyntaxError:
        return LinkSyntaxError(self.pos, message)

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos] in " \t\r\n":
            self.pos += 1

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch: str) -> None:
        if self.peek() != ch:
            raise self.error(f"expected {ch!r}")
        self.pos += 1

    def token(self) -> str:
        m = _TOKEN_RE.match(self.text, self.pos)
        if m is None:
            raise self.error("expected token")
        self.pos = m.end()
        return m.group()

    def quoted(self) -> str:
        self.expect('"')
        out = []
        while True:
            ch = self.peek()
            if ch == "":
                raise self.error("unterminated quoted string")
            self.pos += 1
            if ch == '"':
                return "".join(out)
            if ch == "\\":
                ch = self.peek()
                if ch == "":
                    raise self.error("dangling escape")
                self.pos += 1
            out.append(ch)

    def target(self) -> str:
        self.expect("<")
        end = self.text.find(">", self.pos)
        if end < 0:
            raise self.error("unterminated URI reference")
        value = self.text[self.pos:end]
        self.pos = end + 1
        return value


def parse_link(text: str | bytes) -> list[LinkEntry]:
    """Parse a ``Link`` header value or a link-format body.

    Attributes outside the supported set are skipped; a missing ``rel`` or a
    malformed date attribute is a syntax error.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    sc = _Scanner(text)
    entries: list[LinkEntry] = []
    while True:
        sc.skip_ws()
        while sc.peek() == ",":
            sc.pos += 1
            sc.skip_ws()
        if sc.peek() == "":
            return entries
        start = sc.pos
        target = sc.target()
        params: dict[str, str] = {}
        sc.skip_ws()
        while sc.peek() == ";":
            sc.pos += 1
            sc.skip_ws()
            name = sc.token().lower()
            sc.skip_ws()
            sc.expect("=")
            sc.skip_ws()
            value = sc.quoted() if sc.peek() == '"' else sc.token()
            params.setdefault(name, value)
            sc.skip_ws()
        if sc.peek() not in (",", ""):
            raise sc.error("expected ',' or ';'")
        rel = params.pop("rel", "")
        if not rel.split():
            raise LinkSyntaxError(start, "entry without rel")
        attrs = [(k, v) for k, v in params.items() if k in ATTRIBUTE_ORDER]
        try:
            entries.append(LinkEntry(target, tuple(rel.split()), tuple(attrs)))
        except ValueError as exc:
            raise LinkSyntaxError(start, str(exc)) from None


def find_rel(entries: Iterable[LinkEntry], rel: str) -> list[LinkEntry]:
    return [e for e in entries if e.has_rel(rel)]
