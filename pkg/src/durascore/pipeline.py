"""Tick-data ingestion, cleaning, and duration construction.

Cleaning applies seven rules in a fixed order: session window, zero
prices, single-exchange retention, correction indicator, abnormal sale
condition, rolling-median outlier filter, and suffix removal.  The outlier
rule drops a price deviating from the centered rolling median of its 50
neighbors (self excluded) by more than ten mean absolute deviations of
those neighbors about that median.  Durations are successive timestamp
differences within one session; sessions never contribute cross-boundary
durations.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import DegenerateData, EmptyAfterCleaning, MalformedInput

__all__ = [
    "TickRecord",
    "CleaningReport",
    "DurationSeries",
    "SESSION_OPEN",
    "SESSION_CLOSE",
    "ZERO_TREATMENTS",
    "DEFAULT_EPS",
    "parse_ticks",
    "read_ticks_csv",
    "clean",
    "durations",
    "session_durations",
    "apply_zero_treatment",
]

SESSION_OPEN = 9.5 * 3600.0
SESSION_CLOSE = 16.0 * 3600.0

ZERO_TREATMENTS = ("none", "floor_seconds", "discard", "truncate")
DEFAULT_EPS = 0.001

_COLUMNS = ("timestamp", "price", "exchange", "correction", "sale_condition", "suffix")
_NORMAL_CONDITIONS = frozenset({"", "E", "F", "I"})

_WINDOW_HALF = 25
_MIN_NEIGHBORS = 10
_MAD_MULTIPLE = 10.0

_STEP_NAMES = (
    "session_window",
    "zero_price",
    "exchange",
    "correction",
    "sale_condition",
    "price_outlier",
    "suffix",
)


@dataclass(frozen=True)
class TickRecord:
    """One trade report: time of day in seconds, price, originating
    exchange, correction indicator, sale condition code, and suffix."""

    timestamp: float
    price: float
    exchange: str
    correction: int
    sale_condition: str
    suffix: str


@dataclass
class CleaningReport:
    """Per-step retained/dropped counts; counts telescope step to step."""

    steps: list = field(default_factory=list)
    total_input: int = 0
    total_retained: int = 0

    @property
    def retention_ratio(self) -> float:
        return self.total_retained / self.total_input if self.total_input else 0.0

    def add_step(self, name: str, n_in: int, n_out: int):
        self.steps.append(
            {"step": len(self.steps) + 1, "name": name, "input": n_in, "retained": n_out, "dropped": n_in - n_out}
        )

    def to_dict(self) -> dict:
        return {
            "steps": list(self.steps),
            "total_input": self.total_input,
            "total_retained": self.total_retained,
            "retention_ratio": self.retention_ratio,
        }


@dataclass
class DurationSeries:
    """Durations in seconds plus the zero-treatment regime applied to them."""

    values: np.ndarray
    zero_treatment: str = "none"
    eps: float = DEFAULT_EPS

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.zero_treatment not in ZERO_TREATMENTS:
            raise ValueError(
                f"unknown zero treatment '{self.zero_treatment}'; expected one of {ZERO_TREATMENTS}"
            )


def _parse_timestamp(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        pass
    try:
        t = dt.time.fromisoformat(text)
    except ValueError:
        try:
            t = dt.datetime.fromisoformat(text).time()
        except ValueError:
            raise ValueError(f"unparseable timestamp {text!r}") from None
    return t.hour * 3600.0 + t.minute * 60.0 + t.second + t.microsecond / 1e6


def parse_ticks(rows, header, source="<input>") -> list[TickRecord]:
    """Build tick records from CSV rows under a validated header.

    Parsing is strict: malformed rows raise :class:`MalformedInput` with
    their line number so cleaning statistics stay trustworthy.
    """
    missing = [c for c in _COLUMNS if c not in header]
    if missing:
        raise MalformedInput(f"{source}: missing column '{missing[0]}' in header {header}")
    unknown = [c for c in header if c not in _COLUMNS]
    if unknown:
        raise MalformedInput(f"{source}: unknown column '{unknown[0]}' in header")
    idx = {c: header.index(c) for c in _COLUMNS}
    ticks = []
    for lineno, row in rows:
        if len(row) != len(header):
            raise MalformedInput(
                f"{source}:{lineno}: expected {len(header)} fields, got {len(row)}", line=lineno
            )
        try:
            ts = _parse_timestamp(row[idx["timestamp"]])
            price = float(row[idx["price"]])
            correction = int(row[idx["correction"]])
        except ValueError as exc:
            raise MalformedInput(f"{source}:{lineno}: {exc}", line=lineno) from None
        if not math.isfinite(ts):
            raise MalformedInput(f"{source}:{lineno}: non-finite timestamp", line=lineno)
        if not (math.isfinite(price) and price >= 0):
            raise MalformedInput(f"{source}:{lineno}: price must be non-negative", line=lineno)
        ticks.append(
            TickRecord(
                timestamp=ts,
                price=price,
                exchange=row[idx["exchange"]].strip(),
                correction=correction,
                sale_condition=row[idx["sale_condition"]].strip(),
                suffix=row[idx["suffix"]].strip(),
            )
        )
    return ticks


def read_ticks_csv(path) -> list[TickRecord]:
    """Read one symbol-day tick file (strict six-column CSV)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [c.strip() for c in next(reader)]
        except StopIteration:
            raise DegenerateData(f"{path}: empty file") from None
        rows = [(lineno, row) for lineno, row in enumerate(reader, start=2) if row]
    return parse_ticks(rows, header, source=str(path))


def _outlier_mask(prices: np.ndarray) -> np.ndarray:
    """True where the price passes the rolling-median MAD rule.

    The window is 25 neighbors on each side excluding the tick itself,
    shrunk symmetrically near the edges but never below 10 neighbors in
    total (borrowing from the longer side when needed); ticks without 10
    available neighbors are kept.
    """
    n = len(prices)
    keep = np.ones(n, dtype=bool)
    for i in range(n):
        before = min(_WINDOW_HALF, i)
        after = min(_WINDOW_HALF, n - 1 - i)
        k = min(before, after)
        nb, na = k, k
        if nb + na < _MIN_NEIGHBORS:
            need = _MIN_NEIGHBORS - (nb + na)
            if before > k:
                nb = min(before, nb + need)
            elif after > k:
                na = min(after, na + need)
        if nb + na < _MIN_NEIGHBORS:
            continue
        neighbors = np.concatenate([prices[i - nb : i], prices[i + 1 : i + 1 + na]])
        med = np.median(neighbors)
        mad = np.mean(np.abs(neighbors - med))
        if abs(prices[i] - med) > _MAD_MULTIPLE * mad:
            keep[i] = False
    return keep


def clean(
    ticks,
    session=(SESSION_OPEN, SESSION_CLOSE),
    exchange_filter: str = "N",
) -> tuple[list[TickRecord], CleaningReport]:
    """Apply the seven cleaning rules in order.

    Input order is preserved (a stable time sort runs first if needed).
    Raises :class:`EmptyAfterCleaning` when nothing survives.
    """
    ticks = list(ticks)
    report = CleaningReport(total_input=len(ticks))
    if any(ticks[i].timestamp > ticks[i + 1].timestamp for i in range(len(ticks) - 1)):
        ticks = sorted(ticks, key=lambda t: t.timestamp)

    open_t, close_t = session
    stages = [
        lambda ts: [t for t in ts if open_t <= t.timestamp <= close_t],
        lambda ts: [t for t in ts if t.price != 0.0],
        lambda ts: [t for t in ts if t.exchange == exchange_filter],
        lambda ts: [t for t in ts if t.correction == 0],
        lambda ts: [t for t in ts if t.sale_condition in _NORMAL_CONDITIONS],
        _outlier_stage,
        lambda ts: [t for t in ts if t.suffix == ""],
    ]
    for name, stage in zip(_STEP_NAMES, stages):
        n_in = len(ticks)
        ticks = stage(ticks)
        report.add_step(name, n_in, len(ticks))
    report.total_retained = len(ticks)
    if not ticks:
        raise EmptyAfterCleaning("no ticks survived the cleaning rules")
    return ticks, report


def _outlier_stage(ticks):
    if not ticks:
        return ticks
    prices = np.array([t.price for t in ticks])
    keep = _outlier_mask(prices)
    return [t for t, k in zip(ticks, keep) if k]


def durations(ticks) -> DurationSeries:
    """Successive timestamp differences within one session.

    A timestamp decrease marks a session boundary; no duration is emitted
    across it.
    """
    ts = np.array([t.timestamp for t in ticks], dtype=np.float64)
    if len(ts) < 2:
        raise ValueError("need at least 2 ticks to form durations")
    diffs = np.diff(ts)
    return DurationSeries(values=diffs[diffs >= 0], zero_treatment="none")


def session_durations(sessions) -> DurationSeries:
    """Concatenate per-session durations; sessions are independent."""
    parts = [durations(s).values for s in sessions if len(s) >= 2]
    if not parts:
        raise ValueError("no session contains at least 2 ticks")
    return DurationSeries(values=np.concatenate(parts), zero_treatment="none")


def apply_zero_treatment(series: DurationSeries, treatment: str, eps: float | None = None) -> DurationSeries:
    """Produce the modeling-ready series for one zero regime.

    ``floor_seconds`` floors every value to whole seconds (discrete
    models); ``discard`` removes values below ``eps``; ``truncate``
    replaces them with ``eps`` (continuous models).
    """
    if series.zero_treatment != "none":
        raise ValueError(f"series already carries treatment '{series.zero_treatment}'")
    eps = DEFAULT_EPS if eps is None else float(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    v = series.values
    if treatment == "floor_seconds":
        out = np.floor(v)
    elif treatment == "discard":
        out = v[v >= eps]
    elif treatment == "truncate":
        out = np.where(v < eps, eps, v)
    elif treatment == "none":
        out = v.copy()
    else:
        raise ValueError(f"unknown zero treatment '{treatment}'; expected one of {ZERO_TREATMENTS}")
    return DurationSeries(values=out, zero_treatment=treatment, eps=eps)
