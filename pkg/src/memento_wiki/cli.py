"""``memento-wiki`` command line.

Exit status: 0 on success, 1 when the remote side or the data fails a check,
2 for usage errors (bad arguments, bad configuration).
"""

from __future__ import annotations

import argparse
import logging
import sys
from datetime import datetime, timezone
from typing import Optional, Sequence

from . import __version__, bench, client, perf_model, timefmt
from .config import ConfigError, load_config
from .harvester import HarvestError, HarvestJob, harvest, verify_dump
from .store import DumpError, load_dump

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2

logger = logging.getLogger("memento_wiki")


class UsageError(Exception):
    pass


def parse_user_datetime(text: str) -> datetime:
    """Accept an HTTP date, 14 digits, or an ISO 8601 instant (UTC if naive)."""
    text = text.strip()
    for parse in (timefmt.parse_http_date, timefmt.parse_digits14):
        try:
            return parse(text)
        except timefmt.DatetimeError:
            pass
    try:
        value = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError:
        raise UsageError(f"cannot read datetime {text!r}") from None
    if value.tzinfo is None:
        value = value.replace(tzinfo=timezone.utc)
    return timefmt.to_utc(value)


def _out(line: str = "") -> None:
    sys.stdout.write(line + "\n")


# serve

def cmd_serve(args) -> int:
    from .server import make_server

    overrides = {}
    if args.pattern:
        overrides["negotiation_pattern"] = args.pattern
    if args.errors:
        overrides["error_page_type"] = args.errors
    if args.page_size is not None:
        overrides["timemap_page_size"] = str(args.page_size)
    if args.recommended_relations:
        overrides["recommended_relations"] = "true"
    if args.base_url:
        overrides["base_url"] = args.base_url
    try:
        config = load_config(args.config, overrides)
    except (ConfigError, OSError) as exc:
        raise UsageError(f"configuration: {exc}") from None
    store = load_dump(args.dump)
    server = make_server(store, config, args.host, args.port)
    logger.warning("serving %d pages at %s (pattern %s, page size %d, %s errors)",
                   len(store.titles()), server.base_url,
                   config.negotiation_pattern.value, config.timemap_page_size,
                   config.error_page_type.value)
    _out(server.base_url)
    sys.stdout.flush()
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


# harvest / verify

def cmd_harvest(args) -> int:
    with open(args.titles_file, encoding="utf-8") as fh:
        titles = [t.strip() for t in fh if t.strip() and not t.startswith("#")]
    try:
        job = HarvestJob(args.api, titles, batch_limit=args.limit,
                         polite_delay_ms=args.delay_ms, workers=args.workers)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    summary = harvest(job, args.out)
    for title, count in summary.per_page.items():
        _out(f"{title}\t{count}")
    for title in summary.missing:
        _out(f"{title}\tmissing")
    logger.warning("%d pages, %d revisions, %d API requests",
                   summary.pages, summary.revisions, summary.requests)
    return EXIT_FAILURE if summary.missing else EXIT_OK


def cmd_verify_dump(args) -> int:
    report = verify_dump(args.dump)
    for v in report.violations:
        where = f"line {v.line_no}" if v.line_no else "-"
        _out(f"{v.kind}\t{where}\t{v.title or ''}\t{v.detail}")
    _out(f"records\t{report.records}")
    _out(f"pages\t{report.pages}")
    _out(f"status\t{'ok' if report.ok else 'invalid'}")
    return EXIT_OK if report.ok else EXIT_FAILURE


# client side

def cmd_negotiate(args) -> int:
    when = parse_user_datetime(args.datetime)
    outcome = client.negotiate(args.url, when)
    if args.verbose:
        for step, uri, status in outcome.chain:
            _out(f"# {step}\t{status}\t{uri}")
    _out(f"{outcome.memento_uri}\t{timefmt.format_http_date(outcome.memento_datetime)}"
         f"\t{outcome.pattern}")
    return EXIT_OK


def cmd_walk(args) -> int:
    result = client.walk_timemap(args.url, max_pages=args.max_pages)
    for dt, uri in result.mementos:
        _out(f"{timefmt.format_digits14(dt)}\t{uri}")
    logger.info("%d mementos over %d TimeMap pages",
                len(result.mementos), len(result.pages))
    return EXIT_OK


def cmd_audit(args) -> int:
    when = parse_user_datetime(args.datetime)
    report = client.audit(args.url, when)
    for line in report.lines():
        _out(line)
    return EXIT_OK if report.passed else EXIT_FAILURE


# model

def cmd_model(args) -> int:
    params = perf_model.PerfParams(
        a=args.a, b=args.b, B=args.B, M=args.M, N=args.N, R=args.R,
        d=args.distance_km * 1000.0)
    report = perf_model.evaluate(params)
    sys.stdout.write(perf_model.format_report(report, as_csv=args.csv))
    return EXIT_OK


# bench

def _variants(pairs: Optional[list[str]], default):
    if not pairs:
        return default
    table = []
    for pair in pairs:
        prefix, sep, name = pair.partition("=")
        if not sep or not prefix or not name:
            raise UsageError(f"--variant expects PREFIX=NAME, got {pair!r}")
        table.append((prefix, name))
    return tuple(table)


def _read_lines(path: str) -> list[str]:
    if path == "-":
        return sys.stdin.read().splitlines()
    with open(path, encoding="utf-8", errors="replace") as fh:
        return fh.read().splitlines()


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _emit_analysis(result: bench.AnalysisResult, verbose: bool) -> int:
    sys.stdout.write(result.to_csv())
    bench.write_diagnostics(result, sys.stderr)
    if verbose:
        counts = " ".join(f"{k}={v}" for k, v in result.counts.items())
        sys.stderr.write(f"counts: {counts}\n")
    return EXIT_OK


def cmd_bench_run(args) -> int:
    urls = bench.read_url_list(args.urls)
    headers = {}
    if args.accept_datetime:
        headers["Accept-Datetime"] = timefmt.format_http_date(
            parse_user_datetime(args.accept_datetime))
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        bench.run_load(urls, args.concurrency, out, args.method, headers,
                       follow_redirects=not args.no_follow, color=args.color)
    finally:
        if args.out:
            out.close()
    return EXIT_OK


def cmd_bench_timegate(args) -> int:
    result = bench.analyze_timegate(
        _read_lines(args.log), _variants(args.variant, bench.TIMEGATE_VARIANTS))
    return _emit_analysis(result, args.verbose)


def cmd_bench_pages(args) -> int:
    result = bench.analyze_pages(
        _read_lines(args.log), args.metric,
        _variants(args.variant, bench.PAGE_VARIANTS))
    return _emit_analysis(result, args.verbose)


def cmd_bench_stats(args) -> int:
    text = _read_text(args.csv)
    header = text.splitlines()[0].split(",") if text.strip() else []
    columns = args.column or [c for c in header if c != "PAGE"]
    _out("COLUMN,MIN,MAX,MEAN,MEDIAN,COUNT")
    for column in columns:
        try:
            values = bench.column_values(text, column)
        except KeyError as exc:
            raise UsageError(str(exc.args[0])) from None
        if not values:
            continue
        s = bench.summarize(float(v) for v in values)
        _out(f"{column},{s.min:g},{s.max:g},{s.mean:.6g},{s.median:g},{s.count}")
    return EXIT_OK


def cmd_bench_diff(args) -> int:
    try:
        report = bench.diff_report(_read_text(args.csv), args.col_a, args.col_b,
                                   args.buckets)
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from None
    sys.stdout.write(report.buckets_csv() if args.buckets_only
                     else report.diffs_csv())
    if args.buckets_out:
        with open(args.buckets_out, "w", encoding="utf-8") as fh:
            fh.write(report.buckets_csv())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="memento-wiki",
        description="Memento TimeGate/TimeMap server and tools for wiki histories.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("serve", help="serve a revision dump over HTTP")
    p.add_argument("dump")
    p.add_argument("--config", help="key = value file (default: $MEMENTO_WIKI_CONFIG)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--pattern", choices=["302", "200"])
    p.add_argument("--errors", choices=["friendly", "traditional"])
    p.add_argument("--page-size", type=int)
    p.add_argument("--recommended-relations", action="store_true")
    p.add_argument("--base-url")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("harvest", help="pull revision histories from a MediaWiki API")
    p.add_argument("--api", required=True, help="api.php endpoint")
    p.add_argument("--titles-file", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--limit", type=int, default=500)
    p.add_argument("--delay-ms", type=float, default=0.0)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_harvest)

    p = sub.add_parser("verify-dump", help="check a revision dump")
    p.add_argument("dump")
    p.set_defaults(func=cmd_verify_dump)

    p = sub.add_parser("negotiate", help="datetime negotiation against a URL")
    p.add_argument("url")
    p.add_argument("datetime", help="HTTP date, YYYYMMDDHHMMSS or ISO 8601")
    p.set_defaults(func=cmd_negotiate)

    p = sub.add_parser("walk", help="list every memento reachable from a TimeMap")
    p.add_argument("url")
    p.add_argument("--max-pages", type=int, default=client.MAX_WALK_PAGES)
    p.set_defaults(func=cmd_walk)

    p = sub.add_parser("audit", help="check a server's Memento behaviour")
    p.add_argument("url")
    p.add_argument("datetime")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("model", help="evaluate the TimeGate pattern cost model")
    p.add_argument("--a", type=float, default=0.1, help="original generation, s")
    p.add_argument("--b", type=float, default=0.6, help="separate TimeGate, s")
    p.add_argument("--B", type=float, default=1.24, help="original as TimeGate, s")
    p.add_argument("--M", type=float, default=0.0, help="memento generation, s")
    p.add_argument("--N", type=float, default=11840, help="bits per exchange")
    p.add_argument("--R", type=float, default=28800, help="bandwidth, bit/s")
    p.add_argument("--distance-km", type=float, default=0.0)
    p.add_argument("--csv", action="store_true")
    p.set_defaults(func=cmd_model)

    p = sub.add_parser("bench", help="load generation and log analysis")
    bsub = p.add_subparsers(dest="bench_command", required=True, metavar="ACTION")

    q = bsub.add_parser("run", help="fetch URLs and write a Siege-style log")
    q.add_argument("urls", help="file with one URL per line")
    q.add_argument("--concurrency", "-c", type=int, default=1)
    q.add_argument("--out", "-o")
    q.add_argument("--method", default="GET", choices=["GET", "HEAD"])
    q.add_argument("--accept-datetime")
    q.add_argument("--no-follow", action="store_true")
    q.add_argument("--color", action="store_true")
    q.set_defaults(func=cmd_bench_run)

    for name, func, doc in (
            ("timegate", cmd_bench_timegate, "PAGE,SPECIAL,DEFAULT from 302 lines"),
            ("pages", cmd_bench_pages, "PAGE,NOT_INSTALLED,DEFAULT,ALL_HEADERS")):
        q = bsub.add_parser(name, help=doc)
        q.add_argument("log", help="log file or -")
        q.add_argument("--variant", action="append", metavar="PREFIX=NAME")
        if name == "pages":
            q.add_argument("--metric", choices=["secs", "bytes"], default="secs")
        q.set_defaults(func=func)

    q = bsub.add_parser("stats", help="min/max/mean/median per CSV column")
    q.add_argument("csv", help="CSV file or -")
    q.add_argument("--column", action="append")
    q.set_defaults(func=cmd_bench_stats)

    q = bsub.add_parser("diff", help="per-page column difference and histogram")
    q.add_argument("csv")
    q.add_argument("col_a")
    q.add_argument("col_b")
    q.add_argument("--buckets", type=int, default=bench.HISTOGRAM_BUCKETS)
    q.add_argument("--buckets-only", action="store_true")
    q.add_argument("--buckets-out")
    q.set_defaults(func=cmd_bench_diff)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"memento-wiki: {exc}\n")
        return EXIT_USAGE
    except (client.ClientError, HarvestError, DumpError,
            perf_model.DomainError) as exc:
        sys.stderr.write(f"memento-wiki: {type(exc).__name__}: {exc}\n")
        return EXIT_FAILURE
    except OSError as exc:
        sys.stderr.write(f"memento-wiki: {exc}\n")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
