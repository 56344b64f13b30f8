"""Time grid and input series handling.

All series share one uniform grid: a fixed origin timestamp, a fixed step
length in minutes, and a fixed episode length in steps. CSV loaders validate
alignment strictly (one row per grid step, strictly increasing, no gaps or
duplicates) so downstream code can index by step number alone.

File schemas:
    prices.csv   timestamp,unit,price     unit in {USD_per_kWh, USD_per_MWh}
    weather.csv  timestamp,temp_c
    events.csv   appliance_id,activation_step

Timestamps are ISO-8601. Prices are stored internally in USD per kWh.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import AlignmentError, ConflictError, ParseError, SchemaError

PRICE_UNITS = {"USD_per_kWh": 1.0, "USD_per_MWh": 1e-3}


@dataclass(frozen=True)
class TimeGrid:
    """Uniform simulation grid."""

    origin: datetime
    step_minutes: int = 15
    steps_per_episode: int = 192

    def __post_init__(self):
        if self.step_minutes <= 0:
            raise ValueError("step_minutes must be positive")
        if self.steps_per_episode <= 0:
            raise ValueError("steps_per_episode must be positive")
        if 60 % self.step_minutes != 0:
            raise ValueError("step_minutes must divide 60")

    @property
    def dt_hours(self) -> float:
        return self.step_minutes / 60.0

    @property
    def steps_per_day(self) -> int:
        return 24 * 60 // self.step_minutes

    def timestamp(self, step: int) -> datetime:
        return self.origin + timedelta(minutes=self.step_minutes * step)


def _readonly(values: Iterable[float]) -> np.ndarray:
    arr = np.asarray(list(values) if not isinstance(values, np.ndarray) else values,
                     dtype=np.float64)
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class PriceSeries:
    """Energy prices in USD/kWh on the grid."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _readonly(self.values))
        if not np.all(np.isfinite(self.values)):
            raise ValueError("prices must be finite")

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, i):
        return self.values[i]


@dataclass(frozen=True)
class WeatherSeries:
    """Outdoor temperature in degrees C on the grid."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _readonly(self.values))
        if not np.all(np.isfinite(self.values)):
            raise ValueError("temperatures must be finite")

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, i):
        return self.values[i]


@dataclass(frozen=True)
class ApplianceEvent:
    appliance_id: str
    activation_step: int


@dataclass(frozen=True)
class ApplianceEventLog:
    """Activation requests, sorted by step."""

    events: tuple[ApplianceEvent, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(
            self, "events",
            tuple(sorted(self.events, key=lambda e: (e.activation_step, e.appliance_id))),
        )

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def for_appliance(self, appliance_id: str) -> list[int]:
        return [e.activation_step for e in self.events if e.appliance_id == appliance_id]


def _read_rows(path: str | Path, expected_header: Sequence[str]) -> list[list[str]]:
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not rows:
        raise ParseError(f"{path}: file is empty")
    header = [h.strip() for h in rows[0]]
    if header != list(expected_header):
        raise SchemaError(
            f"{path}: expected header {','.join(expected_header)}, got {','.join(header)}"
        )
    body = [r for r in rows[1:] if any(cell.strip() for cell in r)]
    if not body:
        raise ParseError(f"{path}: no data rows")
    return body


def _parse_timestamp(path, row_no: int, text: str) -> datetime:
    try:
        return datetime.fromisoformat(text.strip())
    except ValueError as exc:
        raise ParseError(f"{path}: row {row_no}: bad timestamp {text!r}") from exc


def _check_alignment(path, grid: TimeGrid, stamps: list[datetime]) -> None:
    step = timedelta(minutes=grid.step_minutes)
    for i, ts in enumerate(stamps):
        expected = grid.origin + i * step
        if ts != expected:
            raise AlignmentError(
                f"{path}: row {i + 2}: timestamp {ts.isoformat()} does not match "
                f"grid slot {expected.isoformat()} (missing, duplicate, or misaligned rows)"
            )


def load_price_csv(path: str | Path, grid: TimeGrid) -> PriceSeries:
    """Load prices, converting USD_per_MWh rows to USD/kWh."""
    body = _read_rows(path, ("timestamp", "unit", "price"))
    stamps, values = [], []
    for i, row in enumerate(body):
        if len(row) != 3:
            raise SchemaError(f"{path}: row {i + 2}: expected 3 columns, got {len(row)}")
        stamps.append(_parse_timestamp(path, i + 2, row[0]))
        unit = row[1].strip()
        if unit not in PRICE_UNITS:
            raise SchemaError(
                f"{path}: row {i + 2}: unknown unit {unit!r} "
                f"(expected one of {sorted(PRICE_UNITS)})"
            )
        try:
            price = float(row[2])
        except ValueError as exc:
            raise ParseError(f"{path}: row {i + 2}: bad price {row[2]!r}") from exc
        values.append(price * PRICE_UNITS[unit])
    _check_alignment(path, grid, stamps)
    series = PriceSeries(np.array(values))
    if len(series) < grid.steps_per_episode:
        raise SchemaError(
            f"{path}: {len(series)} rows is shorter than one episode "
            f"({grid.steps_per_episode} steps)"
        )
    return series


def load_weather_csv(path: str | Path, grid: TimeGrid) -> WeatherSeries:
    """Load outdoor temperatures in degrees C."""
    body = _read_rows(path, ("timestamp", "temp_c"))
    stamps, values = [], []
    for i, row in enumerate(body):
        if len(row) != 2:
            raise SchemaError(f"{path}: row {i + 2}: expected 2 columns, got {len(row)}")
        stamps.append(_parse_timestamp(path, i + 2, row[0]))
        try:
            values.append(float(row[1]))
        except ValueError as exc:
            raise ParseError(f"{path}: row {i + 2}: bad temperature {row[1]!r}") from exc
    _check_alignment(path, grid, stamps)
    return WeatherSeries(np.array(values))


def load_events_csv(
    path: str | Path,
    grid: TimeGrid,
    *,
    known_ids: Iterable[str] | None = None,
    min_separation_steps: Mapping[str, int] | None = None,
) -> ApplianceEventLog:
    """Load activation events.

    known_ids, when given, rejects rows naming appliances outside the roster.
    min_separation_steps, when given, rejects same-appliance events closer
    than the appliance's scheduling window (overlapping open events).
    """
    body = _read_rows(path, ("appliance_id", "activation_step"))
    known = set(known_ids) if known_ids is not None else None
    events = []
    for i, row in enumerate(body):
        if len(row) != 2:
            raise SchemaError(f"{path}: row {i + 2}: expected 2 columns, got {len(row)}")
        appliance_id = row[0].strip()
        if not appliance_id:
            raise SchemaError(f"{path}: row {i + 2}: empty appliance_id")
        if known is not None and appliance_id not in known:
            raise SchemaError(
                f"{path}: row {i + 2}: unknown appliance id {appliance_id!r} "
                f"(roster: {sorted(known)})"
            )
        try:
            step = int(row[1])
        except ValueError as exc:
            raise ParseError(f"{path}: row {i + 2}: bad activation_step {row[1]!r}") from exc
        if step < 0:
            raise SchemaError(f"{path}: row {i + 2}: activation_step must be >= 0")
        events.append(ApplianceEvent(appliance_id, step))
    log = ApplianceEventLog(tuple(events))
    if min_separation_steps:
        check_event_separation(log, min_separation_steps, source=str(path))
    return log


def check_event_separation(
    log: ApplianceEventLog,
    min_separation_steps: Mapping[str, int],
    *,
    source: str = "events",
) -> None:
    """Reject same-appliance events whose scheduling windows would overlap."""
    for appliance_id, sep in min_separation_steps.items():
        steps = log.for_appliance(appliance_id)
        for prev, nxt in zip(steps, steps[1:]):
            if nxt - prev < sep:
                raise ConflictError(
                    f"{source}: events for {appliance_id!r} at steps {prev} and {nxt} "
                    f"overlap (need at least {sep} steps between activations)"
                )


def write_price_csv(path: str | Path, grid: TimeGrid, values: Sequence[float]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "unit", "price"])
        for i, v in enumerate(values):
            w.writerow([grid.timestamp(i).isoformat(), "USD_per_kWh", repr(float(v))])


def write_weather_csv(path: str | Path, grid: TimeGrid, values: Sequence[float]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "temp_c"])
        for i, v in enumerate(values):
            w.writerow([grid.timestamp(i).isoformat(), repr(float(v))])


def write_events_csv(path: str | Path, events: Iterable[ApplianceEvent]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["appliance_id", "activation_step"])
        for e in sorted(events, key=lambda e: (e.activation_step, e.appliance_id)):
            w.writerow([e.appliance_id, e.activation_step])


def forward_average_price(prices: PriceSeries | np.ndarray, start: int, window_steps: int) -> float:
    """Mean price over [start, start + window_steps).

    The window must lie fully inside the series; callers that want clamping
    at the series end clamp before calling.
    """
    values = prices.values if isinstance(prices, PriceSeries) else np.asarray(prices)
    if window_steps < 1:
        raise IndexError(f"window_steps must be >= 1, got {window_steps}")
    if start < 0 or start + window_steps > len(values):
        raise IndexError(
            f"window [{start}, {start + window_steps}) out of bounds for "
            f"series of length {len(values)}"
        )
    return float(np.mean(values[start:start + window_steps]))
