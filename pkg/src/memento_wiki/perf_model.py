"""Closed-form cost model comparing TimeGate negotiation patterns.

Pattern 2.1 costs three request/response pairs (original, TimeGate,
memento); Pattern 1.1 folds the first two into one.  With generation times
``a`` (original), ``b`` (separate TimeGate), ``B`` (original acting as
TimeGate) and ``M`` (memento)::

    d_21 = a + rtt_a + b + rtt_b + M + rtt_M
    d_11 = B + rtt_B + M + rtt_M

The memento step is common to both.  Taking ``rtt_B ~= rtt_b`` (the two
TimeGate responses differ by a few bytes), Pattern 1.1 is faster exactly
when ``B < a + b + rtt_a``.

Round-trip time is modelled as transmission plus propagation delay only;
queuing and processing delay are taken as zero.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, fields, replace
from typing import Callable

SPEED_OF_LIGHT = 299_792_458.0  # m/s


class DomainError(ValueError):
    pass


class NoCrossover(ValueError):
    """Pattern 1.1 never catches up at any finite bandwidth."""


@dataclass(frozen=True)
class PerfParams:
    a: float = 0.0
    b: float = 0.0
    B: float = 0.0
    M: float = 0.0
    rtt_a: float = 0.0
    rtt_b: float = 0.0
    rtt_B: float = 0.0
    rtt_M: float = 0.0
    N: float = 0.0          # bits on the wire for one request + response
    R: float = 28_800.0     # bandwidth, bits/s
    d: float = 0.0          # path length, m
    s_p: float = SPEED_OF_LIGHT

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise DomainError(f"{f.name} must be non-negative")

    def replace(self, **changes) -> "PerfParams":
        return replace(self, **changes)


def duration_pattern21(p: PerfParams) -> float:
    return p.a + p.rtt_a + p.b + p.rtt_b + p.M + p.rtt_M


def duration_pattern11(p: PerfParams) -> float:
    return p.B + p.rtt_B + p.M + p.rtt_M


def pattern11_wins(p: PerfParams) -> bool:
    """Strict ``B < a + b + rtt_a``."""
    return p.B < p.a + p.b + p.rtt_a


def rtt(d_t: float, d_p: float) -> float:
    return d_t + d_p


def transmission_delay(N: float, R: float) -> float:
    if R <= 0:
        raise DomainError("bandwidth R must be positive")
    if N < 0:
        raise DomainError("bit count N must be non-negative")
    return N / R


def propagation_delay(d: float, s_p: float) -> float:
    if s_p <= 0:
        raise DomainError("propagation speed must be positive")
    if d < 0:
        raise DomainError("distance must be non-negative")
    return d / s_p


def propagation_distance(d_p: float, s_p: float) -> float:
    """Path length that produces a propagation delay of ``d_p`` seconds."""
    if s_p <= 0:
        raise DomainError("propagation speed must be positive")
    if d_p < 0:
        raise DomainError("delay must be non-negative")
    return d_p * s_p


def crossover_bandwidth(N: float, a: float, b: float, B: float) -> float:
    """Bandwidth below which Pattern 1.1 is faster (propagation ignored).

    From ``B < N/R + a + b``: ``R = N / (B - a - b)``.
    """
    slack = B - a - b
    if slack <= 0:
        raise NoCrossover(f"B={B} <= a+b={a + b}: Pattern 1.1 always wins "
                          "once transmission delay is positive")
    return N / slack


def required_extra_delay(B: float, a: float, b: float, d_t: float) -> float:
    """Extra propagation delay needed before Pattern 1.1 breaks even."""
    return B - (a + b + d_t)


def equal_processing_limit(a: float) -> Callable[[float], bool]:
    """Win predicate in transmission delay when ``B == b``.

    The TimeGate costs cancel and the condition becomes ``0 < d_t + a``.
    """
    if a < 0:
        raise DomainError("a must be non-negative")
    return lambda d_t: 0 < d_t + a


@dataclass(frozen=True)
class ModelReport:
    params: PerfParams
    d_t: float
    d_p: float
    rtt_a: float
    duration_21: float
    duration_11: float
    pattern11_wins: bool
    crossover_bps: float | None
    extra_delay_needed: float


def evaluate(params: PerfParams) -> ModelReport:
    """Derive RTTs from N, R, d, s_p and evaluate both patterns.

    All four round trips share the same network path in this report.
    """
    d_t = transmission_delay(params.N, params.R)
    d_p = propagation_delay(params.d, params.s_p)
    round_trip = rtt(d_t, d_p)
    p = params.replace(rtt_a=round_trip, rtt_b=round_trip,
                       rtt_B=round_trip, rtt_M=round_trip)
    try:
        crossover = crossover_bandwidth(p.N, p.a, p.b, p.B)
    except NoCrossover:
        crossover = None
    return ModelReport(
        params=p, d_t=d_t, d_p=d_p, rtt_a=round_trip,
        duration_21=duration_pattern21(p), duration_11=duration_pattern11(p),
        pattern11_wins=pattern11_wins(p), crossover_bps=crossover,
        extra_delay_needed=required_extra_delay(p.B, p.a, p.b, d_t),
    )


def report_rows(report: ModelReport) -> list[tuple[str, str]]:
    p = report.params
    rows = [(f.name, f"{getattr(p, f.name):g}") for f in fields(p)
            if not f.name.startswith("rtt_")]
    rows += [
        ("transmission_delay_s", f"{report.d_t:.4f}"),
        ("propagation_delay_s", f"{report.d_p:.4f}"),
        ("rtt_s", f"{report.rtt_a:.4f}"),
        ("duration_pattern21_s", f"{report.duration_21:.4f}"),
        ("duration_pattern11_s", f"{report.duration_11:.4f}"),
        ("pattern11_wins", str(report.pattern11_wins).lower()),
        ("crossover_bandwidth_bps", "none" if report.crossover_bps is None
         else f"{report.crossover_bps:.1f}"),
        ("extra_propagation_needed_s", f"{report.extra_delay_needed:.4f}"),
    ]
    return rows


def format_report(report: ModelReport, as_csv: bool = False) -> str:
    rows = report_rows(report)
    if as_csv:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["quantity", "value"])
        writer.writerows(rows)
        return out.getvalue()
    width = max(len(k) for k, _ in rows)
    return "".join(f"{k:<{width}}  {v}\n" for k, v in rows)
