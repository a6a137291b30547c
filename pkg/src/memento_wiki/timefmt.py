"""Datetime parsing and formatting shared by the store, server and tools.

Two wire forms exist: the RFC 1123 HTTP-date used in headers and link
attributes, and the 14-digit ``YYYYMMDDHHMMSS`` form used in dump files and
TimeMap pivot URIs.  Both are UTC with one-second resolution.
"""

from __future__ import annotations

import re
from datetime import datetime, timezone

WEEKDAYS = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")
MONTHS = ("Jan", "Feb", "Mar", "Apr", "May", "Jun",
          "Jul", "Aug", "Sep", "Oct", "Nov", "Dec")

HTTP_DATE_RE = re.compile(
    r"^(?P<wkday>Mon|Tue|Wed|Thu|Fri|Sat|Sun), "
    r"(?P<day>\d{2}) (?P<month>Jan|Feb|Mar|Apr|May|Jun|Jul|Aug|Sep|Oct|Nov|Dec) "
    r"(?P<year>\d{4}) (?P<hour>\d{2}):(?P<minute>\d{2}):(?P<second>\d{2}) GMT$"
)
DIGITS14_RE = re.compile(r"^[0-9]{14}$")

EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


class DatetimeError(ValueError):
    """Base class for datetime parsing failures."""


class BadFormat(DatetimeError):
    """The text does not have the expected lexical shape."""


class ImpossibleDate(DatetimeError):
    """The text is well formed but names no real instant (e.g. 30 Feb)."""


def _build(year: int, month: int, day: int, hour: int, minute: int,
           second: int, text: str) -> datetime:
    try:
        value = datetime(year, month, day, hour, minute, second,
                         tzinfo=timezone.utc)
    except ValueError as exc:
        raise ImpossibleDate(f"{text!r}: {exc}") from None
    if value < EPOCH:
        raise ImpossibleDate(f"{text!r}: year before 1970")
    return value


def parse_http_date(text: str) -> datetime:
    """Parse ``Sun, 22 Apr 2007 15:01:20 GMT`` into an aware UTC datetime.

    The weekday must be a valid token but is not checked against the date.
    """
    m = HTTP_DATE_RE.match(text)
    if m is None:
        raise BadFormat(f"not an RFC 1123 HTTP-date: {text!r}")
    return _build(int(m["year"]), MONTHS.index(m["month"]) + 1, int(m["day"]),
                  int(m["hour"]), int(m["minute"]), int(m["second"]), text)


def format_http_date(value: datetime) -> str:
    value = to_utc(value)
    return "%s, %02d %s %04d %02d:%02d:%02d GMT" % (
        WEEKDAYS[value.weekday()], value.day, MONTHS[value.month - 1],
        value.year, value.hour, value.minute, value.second)


def parse_digits14(text: str) -> datetime:
    if not DIGITS14_RE.match(text):
        raise BadFormat(f"expected 14 digits YYYYMMDDHHMMSS, got {text!r}")
    return _build(int(text[0:4]), int(text[4:6]), int(text[6:8]),
                  int(text[8:10]), int(text[10:12]), int(text[12:14]), text)


def format_digits14(value: datetime) -> str:
    return to_utc(value).strftime("%Y%m%d%H%M%S")


def to_utc(value: datetime) -> datetime:
    """Normalise to an aware UTC datetime truncated to whole seconds."""
    if value.tzinfo is None:
        value = value.replace(tzinfo=timezone.utc)
    return value.astimezone(timezone.utc).replace(microsecond=0)


def utcnow() -> datetime:
    return to_utc(datetime.now(timezone.utc))
