"""Pull full revision histories from a MediaWiki Action API into a dump.

Only one API call is used, a revision listing with continuation::

    action=query&prop=revisions&titles=T&rvprop=ids|timestamp|content
    &rvslots=main&rvdir=newer&rvlimit=500&format=json&formatversion=2

Both ``formatversion=2`` (pages as a list, content under ``slots.main``)
and the legacy shape (pages keyed by id, content under ``*``) are read.
"""

from __future__ import annotations

import logging
import time
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Optional

import requests

from . import timefmt
from .store import (DumpError, DumpRecord, InvalidTimestamp, MalformedRecord,
                    Revision, iter_dump, parse_record, write_dump)

logger = logging.getLogger(__name__)

API_MAX_LIMIT = 500
WIKITEXT = "text/x-wiki"


class HarvestError(Exception):
    pass


class HttpError(HarvestError):
    def __init__(self, status: int, url: str):
        self.status = status
        super().__init__(f"HTTP {status} from {url}")


class ApiError(HarvestError):
    def __init__(self, code: str, info: str):
        self.code = code
        super().__init__(f"{code}: {info}")


class TitleMissing(HarvestError):
    def __init__(self, title: str):
        self.title = title
        super().__init__(f"page {title!r} does not exist or has no revisions")


@dataclass
class HarvestJob:
    api_endpoint: str
    titles: list[str]
    batch_limit: int = API_MAX_LIMIT
    polite_delay_ms: float = 0.0
    workers: int = 1
    timeout: float = 60.0

    def __post_init__(self):
        if not 1 <= self.batch_limit <= API_MAX_LIMIT:
            raise ValueError(f"batch_limit must be in 1..{API_MAX_LIMIT}")
        if self.polite_delay_ms < 0:
            raise ValueError("polite_delay_ms must be >= 0")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass
class TitleResult:
    requested: str
    title: Optional[str] = None
    records: list[DumpRecord] = field(default_factory=list)
    requests: int = 0
    missing: bool = False


@dataclass
class HarvestSummary:
    pages: int = 0
    revisions: int = 0
    requests: int = 0
    missing: list[str] = field(default_factory=list)
    per_page: dict[str, int] = field(default_factory=dict)


def dump_title(api_title: str) -> str:
    return api_title.replace(" ", "_")


def parse_api_timestamp(text: str) -> datetime:
    try:
        value = datetime.strptime(text, "%Y-%m-%dT%H:%M:%SZ")
    except ValueError:
        raise ApiError("badtimestamp", f"unparsable timestamp {text!r}") from None
    return value.replace(tzinfo=timezone.utc)


def _revision_content(rev: dict[str, Any]) -> str:
    slots = rev.get("slots")
    if slots and "main" in slots:
        main = slots["main"]
        return main.get("content", main.get("*", ""))
    return rev.get("content", rev.get("*", ""))


def _single_page(data: dict[str, Any]) -> dict[str, Any]:
    pages = data.get("query", {}).get("pages")
    if isinstance(pages, dict):
        pages = list(pages.values())
    if not pages:
        raise ApiError("nopages", "response carries no page")
    return pages[0]


class Harvester:
    def __init__(self, job: HarvestJob, session: requests.Session | None = None):
        self.job = job
        self._session = session

    def _get(self, session: requests.Session, params: dict[str, str]) -> dict:
        resp = session.get(self.job.api_endpoint, params=params,
                           timeout=self.job.timeout)
        if resp.status_code != 200:
            raise HttpError(resp.status_code, resp.url)
        try:
            data = resp.json()
        except ValueError:
            raise ApiError("badjson", "response is not JSON") from None
        if "error" in data:
            err = data["error"]
            raise ApiError(err.get("code", "unknown"),
                           err.get("info", err.get("*", "")))
        return data

    def harvest_title(self, title: str,
                      session: requests.Session | None = None) -> TitleResult:
        """Fetch every revision of one title, oldest first."""
        session = session or self._session or requests.Session()
        result = TitleResult(title)
        params = {
            "action": "query", "prop": "revisions", "titles": title,
            "rvprop": "ids|timestamp|content", "rvslots": "main",
            "rvdir": "newer", "rvlimit": str(self.job.batch_limit),
            "format": "json", "formatversion": "2", "continue": "",
        }
        seen: set[int] = set()
        while True:
            if result.requests and self.job.polite_delay_ms:
                time.sleep(self.job.polite_delay_ms / 1000.0)
            data = self._get(session, params)
            result.requests += 1
            page = _single_page(data)
            if "missing" in page or "invalid" in page:
                result.missing = True
                return result
            result.title = dump_title(page.get("title", title))
            for rev in page.get("revisions", []):
                rev_id = int(rev["revid"])
                if rev_id in seen:
                    raise ApiError("repeat", f"revision {rev_id} returned twice")
                seen.add(rev_id)
                try:
                    revision = Revision(
                        rev_id, parse_api_timestamp(rev["timestamp"]),
                        _revision_content(rev).encode("utf-8"), WIKITEXT)
                except ValueError as exc:
                    raise ApiError("badrevision", str(exc)) from None
                result.records.append(DumpRecord(result.title, revision))
            cont = data.get("continue")
            if not cont:
                break
            params = {**params, **{k: str(v) for k, v in cont.items()}}
        if not result.records:
            result.missing = True
        return result

    def run(self) -> tuple[list[DumpRecord], HarvestSummary]:
        def one(title: str) -> TitleResult:
            session = requests.Session() if self._session is None else self._session
            return self.harvest_title(title, session)

        if self.job.workers == 1:
            results = [one(t) for t in self.job.titles]
        else:
            with ThreadPoolExecutor(max_workers=self.job.workers) as pool:
                results = list(pool.map(one, self.job.titles))

        summary = HarvestSummary()
        records: list[DumpRecord] = []
        for res in results:
            summary.requests += res.requests
            if res.missing:
                logger.warning("%s", TitleMissing(res.requested))
                summary.missing.append(res.requested)
                continue
            summary.pages += 1
            summary.revisions += len(res.records)
            summary.per_page[res.title] = len(res.records)
            records.extend(res.records)
        return records, summary


def harvest(job: HarvestJob, out_path: str | Path,
            session: requests.Session | None = None) -> HarvestSummary:
    records, summary = Harvester(job, session).run()
    write_dump(out_path, records)
    return summary


@dataclass(frozen=True)
class Violation:
    kind: str  # malformed | timestamp | duplicate | ordering
    detail: str
    line_no: Optional[int] = None
    title: Optional[str] = None


@dataclass
class DumpReport:
    records: int = 0
    pages: int = 0
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_dump(path: str | Path) -> DumpReport:
    """Check a dump without stopping at the first problem."""
    report = DumpReport()
    by_title: dict[str, dict[int, tuple[datetime, int]]] = defaultdict(dict)
    for line_no, line in iter_dump(path):
        try:
            rec = parse_record(line, line_no)
        except InvalidTimestamp as exc:
            report.violations.append(Violation("timestamp", str(exc), line_no))
            continue
        except (MalformedRecord, DumpError) as exc:
            report.violations.append(Violation("malformed", str(exc), line_no))
            continue
        report.records += 1
        revs = by_title[rec.title]
        rev_id = rec.revision.rev_id
        if rev_id in revs:
            first_line = revs[rev_id][1]
            report.violations.append(Violation(
                "duplicate", f"rev {rev_id} already on line {first_line}",
                line_no, rec.title))
            continue
        revs[rev_id] = (rec.revision.timestamp, line_no)

    report.pages = len(by_title)
    for title, revs in by_title.items():
        ordered = sorted(revs.items())
        for (older_id, (older_ts, _)), (newer_id, (newer_ts, line_no)) in zip(
                ordered, ordered[1:]):
            if newer_ts < older_ts:
                report.violations.append(Violation(
                    "ordering",
                    f"rev {newer_id} ({timefmt.format_digits14(newer_ts)}) is "
                    f"older than rev {older_id} ({timefmt.format_digits14(older_ts)})",
                    line_no, title))
    return report
