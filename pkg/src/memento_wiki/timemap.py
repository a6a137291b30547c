"""Paged TimeMaps.

A page never splits a group of revisions that share one timestamp across a
page boundary, because pivots in URIs carry only second resolution and a
split group could not be reached from the neighbouring page.  The boundary
is pulled back past the group; if the group alone fills the page it is
kept whole, which is the one case where a page exceeds the size limit.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from datetime import datetime
from typing import Optional

from .store import PageHistory
from .uris import ASCENDING, DESCENDING, UriScheme


class TimeMapKind(enum.Enum):
    FULL = "full"
    ASCENDING = "ascending"
    DESCENDING = "descending"


@dataclass(frozen=True)
class MementoRef:
    rev_id: int
    timestamp: datetime
    uri: str
    is_first: bool = False
    is_last: bool = False


@dataclass(frozen=True)
class TimeMapLink:
    uri: str
    pivot: datetime
    from_: datetime
    until: datetime


@dataclass(frozen=True)
class TimeMapPage:
    title: str
    mementos: tuple[MementoRef, ...]
    self_uri: str
    timegate_uri: str
    original_uri: str
    prev: Optional[TimeMapLink] = None
    next: Optional[TimeMapLink] = None
    mark_endpoints: bool = False

    def __post_init__(self):
        if not self.mementos:
            raise ValueError("TimeMap page must hold at least one memento")

    @property
    def from_(self) -> datetime:
        return self.mementos[0].timestamp

    @property
    def until(self) -> datetime:
        return self.mementos[-1].timestamp


def page_window(history: PageHistory, kind: TimeMapKind,
                pivot: Optional[datetime], size: int) -> tuple[int, int]:
    """Half-open index range ``[start, end)`` of the page's revisions."""
    if size < 1:
        raise ValueError("page size must be >= 1")
    n = len(history)
    if kind is TimeMapKind.FULL:
        start, end = max(0, n - size), n
    elif kind is TimeMapKind.DESCENDING:
        end = history.index_before(pivot)
        start = max(0, end - size)
    else:
        start = history.index_after(pivot)
        end = min(n, start + size)
    if start >= end:
        return start, start

    ts = [r.timestamp for r in history.revisions]
    if kind is TimeMapKind.ASCENDING:
        if end < n and ts[end] == ts[end - 1]:
            group = ts[end - 1]
            trimmed = end
            while trimmed > start and ts[trimmed - 1] == group:
                trimmed -= 1
            if trimmed > start:
                end = trimmed
            else:
                while end < n and ts[end] == group:
                    end += 1
    elif start > 0 and ts[start - 1] == ts[start]:
        group = ts[start]
        trimmed = start
        while trimmed < end and ts[trimmed] == group:
            trimmed += 1
        if trimmed < end:
            start = trimmed
        else:
            while start > 0 and ts[start - 1] == group:
                start -= 1
    return start, end


def build_page(history: PageHistory, uris: UriScheme, kind: TimeMapKind,
               pivot: Optional[datetime], size: int,
               mark_endpoints: bool = False) -> Optional[TimeMapPage]:
    """Build one TimeMap page, or ``None`` when the range holds no mementos."""
    start, end = page_window(history, kind, pivot, size)
    if start == end:
        return None
    title = history.title
    n = len(history)
    mementos = tuple(
        MementoRef(r.rev_id, r.timestamp, uris.memento(title, r.rev_id),
                   is_first=(i == 0), is_last=(i == n - 1))
        for i, r in enumerate(history.revisions[start:end], start=start))

    prev = nxt = None
    if start > 0:
        pivot_back = mementos[0].timestamp
        s, e = page_window(history, TimeMapKind.DESCENDING, pivot_back, size)
        prev = TimeMapLink(uris.timemap_pivot(title, pivot_back, DESCENDING),
                           pivot_back, history.revisions[s].timestamp,
                           history.revisions[e - 1].timestamp)
    if end < n:
        pivot_fwd = mementos[-1].timestamp
        s, e = page_window(history, TimeMapKind.ASCENDING, pivot_fwd, size)
        nxt = TimeMapLink(uris.timemap_pivot(title, pivot_fwd, ASCENDING),
                          pivot_fwd, history.revisions[s].timestamp,
                          history.revisions[e - 1].timestamp)

    if kind is TimeMapKind.FULL:
        self_uri = uris.timemap(title)
    else:
        direction = ASCENDING if kind is TimeMapKind.ASCENDING else DESCENDING
        self_uri = uris.timemap_pivot(title, pivot, direction)
    return TimeMapPage(title, mementos, self_uri, uris.timegate(title),
                       uris.original(title), prev, nxt, mark_endpoints)
