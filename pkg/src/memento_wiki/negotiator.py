"""Datetime negotiation: one selection rule shared by every pattern.

Selection rule: the newest revision at or before the target instant wins.
A target older than the whole history is clamped to the first revision.
Ties on timestamp are broken by the larger rev_id.  Picking the closest
revision in either direction would also be defensible; at-or-before is
used because it never shows a reader content from after the requested
moment and it keeps selection monotone in the target.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from datetime import datetime
from typing import Optional

from . import timefmt
from .store import PageHistory, Revision
from .timefmt import BadFormat, DatetimeError, ImpossibleDate  # noqa: F401


class Source(enum.Enum):
    HEADER = "header"
    PIVOT_URI = "pivot-uri"
    DEFAULT_NOW = "default-now"


@dataclass(frozen=True)
class TargetDatetime:
    instant: datetime
    source: Source = Source.HEADER

    def __post_init__(self):
        object.__setattr__(self, "instant", timefmt.to_utc(self.instant))
        if self.instant < timefmt.EPOCH:
            raise ImpossibleDate(f"{self.instant} is before 1970")


@dataclass(frozen=True)
class NegotiationResult:
    selected: Revision
    first: Revision
    last: Revision
    is_exact: bool
    prev: Optional[Revision] = None
    next: Optional[Revision] = None


def parse_http_datetime(text: str) -> TargetDatetime:
    return TargetDatetime(timefmt.parse_http_date(text), Source.HEADER)


def parse_pivot(text: str) -> TargetDatetime:
    return TargetDatetime(timefmt.parse_digits14(text), Source.PIVOT_URI)


def now_target() -> TargetDatetime:
    return TargetDatetime(timefmt.utcnow(), Source.DEFAULT_NOW)


def format_http_datetime(instant: datetime | TargetDatetime) -> str:
    if isinstance(instant, TargetDatetime):
        instant = instant.instant
    return timefmt.format_http_date(instant)


def negotiate(history: PageHistory,
              target: TargetDatetime | datetime) -> NegotiationResult:
    if isinstance(target, TargetDatetime):
        target = target.instant
    revisions = history.revisions
    idx = history.index_after(target) - 1
    if idx < 0:
        idx = 0
    selected = revisions[idx]
    return NegotiationResult(
        selected=selected,
        first=revisions[0],
        last=revisions[-1],
        is_exact=selected.timestamp == timefmt.to_utc(target),
        prev=revisions[idx - 1] if idx > 0 else None,
        next=revisions[idx + 1] if idx + 1 < len(revisions) else None,
    )
