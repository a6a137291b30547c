"""Immutable versioned-resource store and the revision dump file format.

A dump is UTF-8 text with one record per line and five tab-separated
fields::

    title <TAB> rev_id <TAB> YYYYMMDDHHMMSS <TAB> content_type <TAB> content

Inside ``content`` a backslash, tab, newline and carriage return are written
as ``\\\\``, ``\\t``, ``\\n`` and ``\\r``.  Records for one title may appear
anywhere in the file; loading sorts them.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from datetime import datetime
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence, Tuple, Union

from . import timefmt

# A pivot is either an instant or an exact (timestamp, rev_id) ordering key.
Pivot = Union[datetime, Tuple[datetime, int]]

_ESCAPES = {"\\": "\\\\", "\t": "\\t", "\n": "\\n", "\r": "\\r"}
_UNESCAPES = {"\\": "\\", "t": "\t", "n": "\n", "r": "\r"}


class StoreError(Exception):
    pass


class NotFound(StoreError, LookupError):
    def __init__(self, title: str, rev_id: int | None = None):
        self.title = title
        self.rev_id = rev_id
        what = title if rev_id is None else f"{title} rev {rev_id}"
        super().__init__(f"not found: {what}")


class DumpError(StoreError, ValueError):
    pass


class MalformedRecord(DumpError):
    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {reason}")


class InvalidTimestamp(DumpError):
    def __init__(self, line_no: int, text: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: invalid timestamp {text!r}")


class DuplicateRevision(DumpError):
    def __init__(self, title: str, rev_id: int):
        self.title = title
        self.rev_id = rev_id
        super().__init__(f"duplicate revision {rev_id} for {title!r}")


class RevisionOrderError(DumpError):
    """rev_id order disagrees with timestamp order within one page."""

    def __init__(self, title: str, older: int, newer: int):
        self.title = title
        self.rev_ids = (older, newer)
        super().__init__(
            f"{title!r}: rev {newer} is timestamped before rev {older}")


@dataclass(frozen=True)
class Revision:
    rev_id: int
    timestamp: datetime
    content: bytes = b""
    content_type: str = "text/plain; charset=utf-8"

    def __post_init__(self):
        if self.rev_id <= 0:
            raise ValueError(f"rev_id must be positive, got {self.rev_id}")
        object.__setattr__(self, "timestamp", timefmt.to_utc(self.timestamp))

    @property
    def key(self) -> tuple[datetime, int]:
        return (self.timestamp, self.rev_id)


@dataclass(frozen=True)
class DumpRecord:
    title: str
    revision: Revision


@dataclass(frozen=True)
class PageHistory:
    """All revisions of one page, oldest first."""

    title: str
    revisions: tuple[Revision, ...]

    def __post_init__(self):
        if not self.title:
            raise ValueError("title must be non-empty")
        if not self.revisions:
            raise ValueError(f"{self.title!r} has no revisions")
        for older, newer in zip(self.revisions, self.revisions[1:]):
            if not (older.timestamp <= newer.timestamp
                    and older.rev_id < newer.rev_id):
                raise RevisionOrderError(self.title, older.rev_id,
                                         newer.rev_id)

    @property
    def first(self) -> Revision:
        return self.revisions[0]

    @property
    def last(self) -> Revision:
        return self.revisions[-1]

    @cached_property
    def keys(self) -> list[tuple[datetime, int]]:
        return [r.key for r in self.revisions]

    @cached_property
    def by_id(self) -> dict[int, Revision]:
        return {r.rev_id: r for r in self.revisions}

    def __len__(self) -> int:
        return len(self.revisions)

    def __iter__(self) -> Iterator[Revision]:
        return iter(self.revisions)

    def index_before(self, pivot: Pivot) -> int:
        """Number of revisions ordered strictly before ``pivot``."""
        if isinstance(pivot, tuple):
            return bisect.bisect_left(self.keys, pivot)
        return bisect.bisect_left(self.keys, (timefmt.to_utc(pivot), 0))

    def index_after(self, pivot: Pivot) -> int:
        """Index of the first revision ordered strictly after ``pivot``."""
        if isinstance(pivot, tuple):
            return bisect.bisect_right(self.keys, pivot)
        return bisect.bisect_right(self.keys, (timefmt.to_utc(pivot), math.inf))


class Store:
    """Read-only collection of page histories keyed by exact title."""

    def __init__(self, histories: Mapping[str, PageHistory] | None = None):
        self._pages = dict(histories or {})

    @classmethod
    def from_records(cls, records: Iterable[DumpRecord]) -> "Store":
        grouped: dict[str, dict[int, Revision]] = {}
        for rec in records:
            revs = grouped.setdefault(rec.title, {})
            if rec.revision.rev_id in revs:
                raise DuplicateRevision(rec.title, rec.revision.rev_id)
            revs[rec.revision.rev_id] = rec.revision
        pages = {}
        for title, revs in grouped.items():
            ordered = tuple(sorted(revs.values(), key=lambda r: r.key))
            pages[title] = PageHistory(title, ordered)
        return cls(pages)

    def __len__(self) -> int:
        return len(self._pages)

    def __contains__(self, title: object) -> bool:
        return title in self._pages

    def titles(self) -> list[str]:
        return sorted(self._pages)

    def get_history(self, title: str) -> PageHistory:
        try:
            return self._pages[title]
        except KeyError:
            raise NotFound(title) from None

    def get_revision(self, title: str, rev_id: int) -> Revision:
        history = self.get_history(title)
        try:
            return history.by_id[rev_id]
        except KeyError:
            raise NotFound(title, rev_id) from None

    def range_before(self, title: str, pivot: Pivot,
                     limit: int) -> Sequence[Revision]:
        """The ``limit`` newest revisions strictly before ``pivot``, ascending."""
        _check_limit(limit)
        history = self.get_history(title)
        end = history.index_before(pivot)
        return history.revisions[max(0, end - limit):end]

    def range_after(self, title: str, pivot: Pivot,
                    limit: int) -> Sequence[Revision]:
        """The ``limit`` oldest revisions strictly after ``pivot``, ascending."""
        _check_limit(limit)
        history = self.get_history(title)
        start = history.index_after(pivot)
        return history.revisions[start:start + limit]

    def latest_window(self, title: str, limit: int) -> Sequence[Revision]:
        _check_limit(limit)
        return self.get_history(title).revisions[-limit:]


def _check_limit(limit: int) -> None:
    if limit < 1:
        raise ValueError(f"limit must be >= 1, got {limit}")


def escape_field(text: str) -> str:
    return "".join(_ESCAPES.get(ch, ch) for ch in text)


def unescape_field(text: str, line_no: int = 0) -> str:
    out = []
    chars = iter(text)
    for ch in chars:
        if ch != "\\":
            out.append(ch)
            continue
        nxt = next(chars, None)
        if nxt not in _UNESCAPES:
            raise MalformedRecord(line_no, f"bad escape \\{nxt or ''}")
        out.append(_UNESCAPES[nxt])
    return "".join(out)


def format_record(record: DumpRecord) -> str:
    rev = record.revision
    if any(ch in record.title for ch in "\t\r\n") or not record.title:
        raise ValueError(f"title not representable in a dump: {record.title!r}")
    if any(ch in rev.content_type for ch in "\t\r\n"):
        raise ValueError(f"bad content type: {rev.content_type!r}")
    content = rev.content.decode("utf-8")
    return "\t".join([record.title, str(rev.rev_id),
                      timefmt.format_digits14(rev.timestamp),
                      rev.content_type, escape_field(content)])


def parse_record(line: str, line_no: int = 0) -> DumpRecord:
    fields = line.split("\t")
    if len(fields) != 5:
        raise MalformedRecord(line_no, f"expected 5 fields, got {len(fields)}")
    title, rev_text, ts_text, content_type, content = fields
    if not title:
        raise MalformedRecord(line_no, "empty title")
    if not rev_text.isascii() or not rev_text.isdigit() or int(rev_text) <= 0:
        raise MalformedRecord(line_no, f"bad rev_id {rev_text!r}")
    try:
        timestamp = timefmt.parse_digits14(ts_text)
    except timefmt.DatetimeError:
        raise InvalidTimestamp(line_no, ts_text) from None
    if not content_type:
        raise MalformedRecord(line_no, "empty content type")
    body = unescape_field(content, line_no).encode("utf-8")
    return DumpRecord(title, Revision(int(rev_text), timestamp, body,
                                      content_type))


def iter_dump(path: str | Path) -> Iterator[tuple[int, str]]:
    with open(path, encoding="utf-8", newline="") as fh:
        text = fh.read()
    for line_no, line in enumerate(text.split("\n"), start=1):
        if line == "" and line_no == text.count("\n") + 1:
            break  # trailing newline
        yield line_no, line.removesuffix("\r")


def read_records(path: str | Path) -> list[DumpRecord]:
    return [parse_record(line, n) for n, line in iter_dump(path)]


def load_dump(path: str | Path) -> Store:
    return Store.from_records(read_records(path))


def write_dump(path: str | Path, records: Iterable[DumpRecord]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for rec in records:
            fh.write(format_record(rec) + "\n")
            count += 1
    return count
