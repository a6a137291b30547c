"""Load generation and Siege log analysis.

Log lines use Siege's transaction format::

    HTTP/1.1 302   0.60 secs:       0 bytes ==> GET  /timegate/Daenerys

Real Siege output wraps each line in ANSI colour codes; the parser strips
them whether they appear as raw escape bytes or in caret notation
(``^[[0;36m``).

The analyzers reproduce three post-processing procedures: per-page TimeGate
timing by deployment (302 lines), per-page 200 timing across three
deployments, and the same comparison on response size.  Which deployment a
line belongs to is decided by substring tables matched against the URI,
first match wins.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import re
import statistics
import sys
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from typing import IO, Iterable, Mapping, Optional, Sequence
from urllib.parse import parse_qs, unquote, urljoin, urlsplit

import requests

logger = logging.getLogger(__name__)

LINE_RE = re.compile(
    r"HTTP/1\.[01]\s+(?P<status>\d{1,3})\s+(?P<secs>[0-9.]+)\s+secs:\s+"
    r"(?P<bytes>\d+)\s+bytes\s+==>\s+(?P<method>[A-Z]+)\s+(?P<uri>\S+)")
ANSI_RE = re.compile(r"(?:\x1b|\^\[)\[[0-9;]*m")

COLORS = {2: "\x1b[0;34m", 3: "\x1b[0;36m"}
COLOR_RESET = "\x1b[0m"

# deployment prefixes of the original measurement setup
TIMEGATE_VARIANTS = (("demo-special", "pattern21"), ("demo", "pattern11"))
PAGE_VARIANTS = (("demo-not-installed", "not-installed"),
                 ("demo-302-recommended-relations", "all-headers"),
                 ("demo", "default"))
# this package's own URI layout (pattern 1.1 served from /wiki/)
LOCAL_TIMEGATE_VARIANTS = (("/timegate/", "pattern21"), ("/wiki/", "pattern11"))

HISTOGRAM_BUCKETS = 12


@dataclass(frozen=True)
class LogRecord:
    status: int
    secs: Decimal
    bytes: int
    method: str
    uri: str
    page: Optional[str] = None
    variant: Optional[str] = None


def strip_ansi(text: str) -> str:
    return ANSI_RE.sub("", text)


def format_line(status: int, secs: float, nbytes: int, method: str, uri: str,
                color: bool = False) -> str:
    line = (f"HTTP/1.1 {status:3d} {secs:6.2f} secs: {nbytes:7d} bytes ==> "
            f"{method:<4} {uri}")
    if color and status // 100 in COLORS:
        line = COLORS[status // 100] + line + COLOR_RESET
    return line


def extract_page(uri: str) -> Optional[str]:
    """Page key of a logged URI.

    ``title=`` in the query wins; otherwise the remainder after a TimeMap
    path marker, otherwise the last path segment.  A revision parameter
    (``oldid``/``rev``) is kept in the key so different revisions of one page
    stay distinct.
    """
    parts = urlsplit(uri)
    query = parse_qs(parts.query)
    path = unquote(parts.path)
    if "title" in query:
        page = query["title"][-1]
    elif "Special:TimeMap/" in path:
        page = path.split("Special:TimeMap/", 1)[1]
    elif "/timemap/" in path:
        page = path.split("/timemap/", 1)[1]
    else:
        page = path.rsplit("/", 1)[-1]
    if not page:
        return None
    for param in ("oldid", "rev"):
        if param in query:
            page += f"&{param}={query[param][-1]}"
            break
    return page


def classify(uri: str, variants: Sequence[tuple[str, str]]) -> Optional[str]:
    for marker, name in variants:
        if marker in uri:
            return name
    return None


def parse_line(line: str, variants: Sequence[tuple[str, str]] = ()
               ) -> Optional[LogRecord]:
    m = LINE_RE.search(strip_ansi(line))
    if m is None:
        return None
    try:
        secs = Decimal(m["secs"])
    except InvalidOperation:
        return None
    uri = m["uri"]
    return LogRecord(int(m["status"]), secs, int(m["bytes"]), m["method"],
                     uri, extract_page(uri), classify(uri, variants))


def read_log(lines: Iterable[str],
             variants: Sequence[tuple[str, str]] = ()) -> list[LogRecord]:
    records = (parse_line(line, variants) for line in lines)
    return [r for r in records if r is not None]


@dataclass
class AnalysisResult:
    header: list[str]
    rows: list[list[str]] = field(default_factory=list)
    diagnostics: list[str] = field(default_factory=list)
    counts: dict[str, int] = field(default_factory=dict)

    def to_csv(self) -> str:
        out = [",".join(self.header)]
        for name, *values in self.rows:
            out.append(",".join(['"' + name.replace('"', '""') + '"', *values]))
        return "\n".join(out) + "\n"


def _analyze(lines: Iterable[str], status: int, metric: str,
             variants: Sequence[tuple[str, str]],
             columns: Sequence[tuple[str, str, str]]) -> AnalysisResult:
    counts = dict(lines=0, records=0, other_status=0, unparsable=0,
                  no_page=0, unclassified=0)
    stats: dict[str, dict[str, str]] = {}
    diagnostics = []
    for line in lines:
        counts["lines"] += 1
        rec = parse_line(line.rstrip("\r\n"), variants)
        if rec is None:
            counts["unparsable"] += 1
            continue
        if rec.status != status:
            counts["other_status"] += 1
            continue
        if rec.page is None:
            counts["no_page"] += 1
            diagnostics.append("FAILED TO FIND PAGE NAME")
            continue
        variant = rec.variant
        if variant is None:
            counts["unclassified"] += 1
            continue
        counts["records"] += 1
        value = rec.secs if metric == "secs" else Decimal(rec.bytes)
        stats.setdefault(rec.page, {})[variant] = str(value)

    result = AnalysisResult(["PAGE", *(col for col, _, _ in columns)],
                            diagnostics=diagnostics, counts=counts)
    for name, found in stats.items():
        missing = [label for _, variant, label in columns if variant not in found]
        if missing:
            result.diagnostics.append(
                f"Page '{name}' is missing statistics for [{','.join(missing)}]")
            continue
        result.rows.append([name, *(found[v] for _, v, _ in columns)])
    return result


def analyze_timegate(lines: Iterable[str],
                     variants: Sequence[tuple[str, str]] = TIMEGATE_VARIANTS
                     ) -> AnalysisResult:
    """Per-page negotiation time: ``PAGE,SPECIAL,DEFAULT`` from 302 lines."""
    return _analyze(lines, 302, "secs", variants,
                    [("SPECIAL", "pattern21", "special"),
                     ("DEFAULT", "pattern11", "default")])


def analyze_pages(lines: Iterable[str], metric: str = "secs",
                  variants: Sequence[tuple[str, str]] = PAGE_VARIANTS
                  ) -> AnalysisResult:
    """Per-page 200 responses across three deployments, by time or size."""
    if metric not in ("secs", "bytes"):
        raise ValueError(f"metric must be 'secs' or 'bytes', got {metric!r}")
    return _analyze(lines, 200, metric, variants,
                    [("NOT_INSTALLED", "not-installed", "not-installed"),
                     ("DEFAULT", "default", "default"),
                     ("ALL_HEADERS", "all-headers", "all-headers")])


@dataclass(frozen=True)
class StatsSummary:
    min: float
    max: float
    mean: float
    median: float
    count: int

    def rows(self) -> list[tuple[str, str]]:
        return [("Min", f"{self.min:g}"), ("Max", f"{self.max:g}"),
                ("Mean", f"{self.mean:g}"), ("Median", f"{self.median:g}"),
                ("Count", str(self.count))]


def summarize(values: Iterable[float]) -> StatsSummary:
    data = [float(v) for v in values]
    if not data:
        raise ValueError("cannot summarize an empty sample")
    return StatsSummary(min(data), max(data), statistics.fmean(data),
                        statistics.median(data), len(data))


@dataclass(frozen=True)
class Bucket:
    low: float
    high: float
    count: int


def histogram(values: Iterable[float],
              buckets: int = HISTOGRAM_BUCKETS) -> list[Bucket]:
    """Equal-width buckets over ``[min, max]``; the last bucket is closed."""
    data = [float(v) for v in values]
    if buckets < 1:
        raise ValueError("need at least one bucket")
    if not data:
        return []
    lo, hi = min(data), max(data)
    counts = [0] * buckets
    if hi == lo:
        counts[0] = len(data)
        width = 0.0
    else:
        width = (hi - lo) / buckets
        for v in data:
            idx = math.floor((v - lo) * buckets / (hi - lo))
            counts[min(idx, buckets - 1)] += 1
    return [Bucket(lo + i * width, hi if i == buckets - 1 else lo + (i + 1) * width,
                   c) for i, c in enumerate(counts)]


@dataclass
class DiffReport:
    column_a: str
    column_b: str
    diffs: list[tuple[str, Decimal]]
    buckets: list[Bucket]

    def diffs_csv(self) -> str:
        out = io.StringIO()
        out.write(f"PAGE,{self.column_a}-{self.column_b}\n")
        for page, diff in self.diffs:
            out.write('"' + page.replace('"', '""') + f'",{diff}\n')
        return out.getvalue()

    def buckets_csv(self) -> str:
        out = io.StringIO()
        out.write("LOW,HIGH,COUNT\n")
        for b in self.buckets:
            out.write(f"{b.low:.6g},{b.high:.6g},{b.count}\n")
        return out.getvalue()


def read_csv_columns(text: str) -> list[dict[str, str]]:
    return list(csv.DictReader(io.StringIO(text)))


def diff_report(csv_text: str, col_a: str, col_b: str,
                buckets: int = HISTOGRAM_BUCKETS) -> DiffReport:
    """Per-page ``col_a - col_b`` plus a histogram of the differences."""
    rows = read_csv_columns(csv_text)
    if rows and (col_a not in rows[0] or col_b not in rows[0]):
        raise KeyError(f"columns {col_a!r}/{col_b!r} not in {list(rows[0])}")
    diffs = [(row["PAGE"], Decimal(row[col_a]) - Decimal(row[col_b]))
             for row in rows]
    return DiffReport(col_a, col_b, diffs,
                      histogram([d for _, d in diffs], buckets))


def column_values(csv_text: str, column: str) -> list[Decimal]:
    rows = read_csv_columns(csv_text)
    if rows and column not in rows[0]:
        raise KeyError(f"column {column!r} not in {list(rows[0])}")
    return [Decimal(row[column]) for row in rows]


# load generation

def _log_uri(url: str) -> str:
    parts = urlsplit(url)
    return (parts.path or "/") + (f"?{parts.query}" if parts.query else "")


def fetch_chain(session: requests.Session, url: str, method: str = "GET",
                headers: Mapping[str, str] | None = None,
                follow_redirects: bool = True, max_hops: int = 10,
                timeout: float = 30.0, color: bool = False) -> list[str]:
    """Request ``url``, following redirects by hand; one log line per hop."""
    lines = []
    for _ in range(max_hops):
        started = time.perf_counter()
        try:
            resp = session.request(method, url, headers=dict(headers or {}),
                                   allow_redirects=False, timeout=timeout)
            body = resp.content
        except requests.RequestException as exc:
            logger.warning("request to %s failed: %s", url, exc)
            lines.append(format_line(0, time.perf_counter() - started, 0,
                                     method, _log_uri(url), color))
            break
        elapsed = time.perf_counter() - started
        lines.append(format_line(resp.status_code, elapsed, len(body), method,
                                 _log_uri(url), color))
        location = resp.headers.get("Location")
        if not (follow_redirects and resp.is_redirect and location):
            break
        url = urljoin(url, location)
    return lines


def run_load(urls: Sequence[str], concurrency: int = 1,
             out: IO[str] | None = None, method: str = "GET",
             headers: Mapping[str, str] | None = None,
             follow_redirects: bool = True, timeout: float = 30.0,
             color: bool = False) -> list[str]:
    """Fetch every URL once with a bounded worker pool.

    Lines of one redirect chain are written together; chains appear in
    completion order.
    """
    if concurrency < 1:
        raise ValueError("concurrency must be >= 1")
    local = threading.local()
    lock = threading.Lock()
    all_lines: list[str] = []

    def work(url: str) -> None:
        session = getattr(local, "session", None)
        if session is None:
            session = local.session = requests.Session()
        chain = fetch_chain(session, url, method, headers, follow_redirects,
                            timeout=timeout, color=color)
        with lock:
            all_lines.extend(chain)
            if out is not None:
                out.write("".join(line + "\n" for line in chain))
                out.flush()

    with ThreadPoolExecutor(max_workers=concurrency) as pool:
        list(pool.map(work, urls))
    return all_lines


def read_url_list(path: str) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [line.strip() for line in fh
                if line.strip() and not line.lstrip().startswith("#")]


def write_diagnostics(result: AnalysisResult, stream: IO[str] = sys.stderr) -> None:
    for message in result.diagnostics:
        stream.write(message + "\n")
