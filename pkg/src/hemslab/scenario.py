"""Scenario files: one INI describing data files, house parameters, modes,
and training settings.

Relative paths inside the file resolve against the file's own directory, so
a scenario directory can be moved or checked in wholesale. Every field is
validated individually and reported as "[section] key: problem" so a typo
points at the exact line to fix.

Sections (defaults in parentheses):

    [scenario]      name, seed (0)
    [files]         prices, weather, events
    [grid]          origin, step_minutes (15), steps_per_episode (192)
    [data]          holdout_days (0)
    [penalties]     zeta_sa, zeta_comfort, zeta_ev
    [normalization] temp_min_c, temp_max_c, price_max (series max)
    [hvac]          r_c_per_kw, c_kwh_per_c, cop, q_max_kw, t_set_c
    [ev]            id, charge_power_kw, battery_kwh, soc_min, soc_max,
                    efficiency
    [appliance:ID]  rated_power_kw, duration_steps | duration_hours
    [windows]       sa_mode{1,2}_hours, ev_mode{1,2}_hours,
                    deadband_mode{0,1,2}_c, price_window_mode{1,2}_hours
    [modes]         policy = sample | fixed, then one entry per appliance
    [training]      episodes, learning_rate, ..., hidden1, hidden2
    [output]        dir
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

from .agent import TrainingConfig
from .appliances import (
    DEFAULT_MODE_WINDOWS,
    EvParams,
    HvacParams,
    ModeWindows,
    PreferenceMode,
    ShiftableApplianceParams,
)
from .environment import (
    HVAC_ID,
    HomeEnvironment,
    NormalizationBounds,
    PenaltyFactors,
)
from .errors import ConfigError
from .timeseries import (
    ApplianceEventLog,
    PriceSeries,
    TimeGrid,
    WeatherSeries,
    load_events_csv,
    load_price_csv,
    load_weather_csv,
)

APPLIANCE_SECTION_PREFIX = "appliance:"


class _SectionReader:
    """Typed accessors with '[section] key: ...' error messages."""

    def __init__(self, parser: configparser.ConfigParser, section: str, path: Path):
        self._parser = parser
        self._section = section
        self._path = path

    def _raw(self, key: str, default):
        if not self._parser.has_option(self._section, key):
            if default is _REQUIRED:
                raise ConfigError(f"{self._path}: [{self._section}] {key}: missing required key")
            return None
        return self._parser.get(self._section, key)

    def str(self, key: str, default=None) -> str | None:
        raw = self._raw(key, default)
        return default if raw is None else raw.strip()

    def float(self, key: str, default=None) -> float | None:
        raw = self._raw(key, default)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(
                f"{self._path}: [{self._section}] {key}: expected a number, got {raw!r}"
            ) from None

    def int(self, key: str, default=None) -> int | None:
        raw = self._raw(key, default)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(
                f"{self._path}: [{self._section}] {key}: expected an integer, got {raw!r}"
            ) from None


_REQUIRED = object()


@dataclass
class Scenario:
    """Everything needed to build environments and training runs."""

    path: Path
    name: str
    seed: int
    grid: TimeGrid
    prices: PriceSeries
    weather: WeatherSeries
    events: ApplianceEventLog
    shiftables: tuple[ShiftableApplianceParams, ...]
    hvac: HvacParams
    ev: EvParams
    penalties: PenaltyFactors
    norm: NormalizationBounds
    windows: ModeWindows
    holdout_days: int
    mode_policy: str | dict[str, PreferenceMode]
    training: TrainingConfig
    output_dir: Path | None

    @property
    def appliance_ids(self) -> tuple[str, ...]:
        return tuple(p.appliance_id for p in self.shiftables) + (HVAC_ID, self.ev.appliance_id)

    def build_environment(self, seed: int | None = None) -> HomeEnvironment:
        return HomeEnvironment(
            grid=self.grid,
            prices=self.prices,
            weather=self.weather,
            events=self.events,
            shiftables=self.shiftables,
            hvac=self.hvac,
            ev=self.ev,
            penalties=self.penalties,
            norm=self.norm,
            windows=self.windows,
            seed=self.seed if seed is None else seed,
        )

    def episode_starts(self) -> list[int]:
        """All day-aligned starts that leave room for a full episode."""
        day = self.grid.steps_per_day
        last = len(self.prices) - self.grid.steps_per_episode
        return [s for s in range(0, last + 1, day)]

    def split_starts(self) -> tuple[list[int], list[int]]:
        """(training starts, holdout starts); the last holdout_days
        day-aligned starts are reserved for evaluation."""
        starts = self.episode_starts()
        if self.holdout_days == 0:
            return starts, []
        if self.holdout_days >= len(starts):
            raise ConfigError(
                f"{self.path}: [data] holdout_days: {self.holdout_days} leaves no "
                f"training days (only {len(starts)} usable starts)"
            )
        return starts[:-self.holdout_days], starts[-self.holdout_days:]


def _parse_origin(reader: _SectionReader, path: Path) -> datetime:
    raw = reader.str("origin", _REQUIRED)
    try:
        return datetime.fromisoformat(raw)
    except ValueError:
        raise ConfigError(
            f"{path}: [grid] origin: expected an ISO-8601 timestamp, got {raw!r}"
        ) from None


def _parse_windows(parser: configparser.ConfigParser, path: Path) -> ModeWindows:
    if not parser.has_section("windows"):
        return DEFAULT_MODE_WINDOWS
    r = _SectionReader(parser, "windows", path)
    d = DEFAULT_MODE_WINDOWS
    try:
        return ModeWindows(
            sa_window_hours={
                PreferenceMode.MODE1: r.float("sa_mode1_hours", d.sa_window_hours[PreferenceMode.MODE1]),
                PreferenceMode.MODE2: r.float("sa_mode2_hours", d.sa_window_hours[PreferenceMode.MODE2]),
            },
            ev_window_hours={
                PreferenceMode.MODE1: r.float("ev_mode1_hours", d.ev_window_hours[PreferenceMode.MODE1]),
                PreferenceMode.MODE2: r.float("ev_mode2_hours", d.ev_window_hours[PreferenceMode.MODE2]),
            },
            hvac_deadband_c={
                PreferenceMode.MODE0: r.float("deadband_mode0_c", d.hvac_deadband_c[PreferenceMode.MODE0]),
                PreferenceMode.MODE1: r.float("deadband_mode1_c", d.hvac_deadband_c[PreferenceMode.MODE1]),
                PreferenceMode.MODE2: r.float("deadband_mode2_c", d.hvac_deadband_c[PreferenceMode.MODE2]),
            },
            hvac_price_window_hours={
                PreferenceMode.MODE1: r.float("price_window_mode1_hours",
                                              d.hvac_price_window_hours[PreferenceMode.MODE1]),
                PreferenceMode.MODE2: r.float("price_window_mode2_hours",
                                              d.hvac_price_window_hours[PreferenceMode.MODE2]),
            },
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: [windows]: {exc}") from None


def _parse_modes(parser: configparser.ConfigParser, path: Path,
                 appliance_ids: tuple[str, ...]) -> str | dict[str, PreferenceMode]:
    if not parser.has_section("modes"):
        return "sample"
    r = _SectionReader(parser, "modes", path)
    policy = r.str("policy", "sample")
    if policy == "sample":
        return "sample"
    if policy != "fixed":
        raise ConfigError(
            f"{path}: [modes] policy: expected 'sample' or 'fixed', got {policy!r}"
        )
    modes: dict[str, PreferenceMode] = {}
    for appliance_id in appliance_ids:
        value = r.int(appliance_id, _REQUIRED)
        if value not in (0, 1, 2):
            raise ConfigError(
                f"{path}: [modes] {appliance_id}: mode must be 0, 1, or 2, got {value}"
            )
        modes[appliance_id] = PreferenceMode(value)
    return modes


def load_scenario(path: str | Path) -> Scenario:
    """Parse and validate a scenario file, loading all referenced data."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"scenario file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str     # appliance ids are case-sensitive
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    for section in ("scenario", "files", "grid", "hvac", "ev"):
        if not parser.has_section(section):
            raise ConfigError(f"{path}: missing required section [{section}]")
    base = path.parent

    s = _SectionReader(parser, "scenario", path)
    name = s.str("name", path.stem)
    seed = s.int("seed", 0)

    g = _SectionReader(parser, "grid", path)
    try:
        grid = TimeGrid(
            origin=_parse_origin(g, path),
            step_minutes=g.int("step_minutes", 15),
            steps_per_episode=g.int("steps_per_episode", 192),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: [grid]: {exc}") from None

    f = _SectionReader(parser, "files", path)
    prices = load_price_csv(base / f.str("prices", _REQUIRED), grid)
    weather = load_weather_csv(base / f.str("weather", _REQUIRED), grid)

    h = _SectionReader(parser, "hvac", path)
    try:
        hvac = HvacParams(
            q_max_kw=h.float("q_max_kw", 14.0),
            r_c_per_kw=h.float("r_c_per_kw", 2.0),
            c_kwh_per_c=h.float("c_kwh_per_c", 2.0),
            cop=h.float("cop", 3.5),
            t_set_c=h.float("t_set_c", 23.0),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: [hvac]: {exc}") from None

    e = _SectionReader(parser, "ev", path)
    try:
        ev = EvParams(
            appliance_id=e.str("id", "EV"),
            charge_power_kw=e.float("charge_power_kw", 3.4),
            battery_kwh=e.float("battery_kwh", 17.0),
            soc_min=e.float("soc_min", 0.2),
            soc_max=e.float("soc_max", 0.9),
            efficiency=e.float("efficiency", 1.0),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: [ev]: {exc}") from None

    shiftables: list[ShiftableApplianceParams] = []
    for section in parser.sections():
        if not section.startswith(APPLIANCE_SECTION_PREFIX):
            continue
        appliance_id = section[len(APPLIANCE_SECTION_PREFIX):].strip()
        a = _SectionReader(parser, section, path)
        steps = a.int("duration_steps", None)
        hours = a.float("duration_hours", None)
        if (steps is None) == (hours is None):
            raise ConfigError(
                f"{path}: [{section}]: give exactly one of duration_steps / duration_hours"
            )
        if steps is None:
            steps = int(round(hours / grid.dt_hours))
        try:
            shiftables.append(ShiftableApplianceParams(
                appliance_id=appliance_id,
                rated_power_kw=a.float("rated_power_kw", _REQUIRED),
                duration_steps=steps,
            ))
        except ValueError as exc:
            raise ConfigError(f"{path}: [{section}]: {exc}") from None
    if not shiftables:
        raise ConfigError(f"{path}: no [appliance:ID] sections found")
    shiftables.sort(key=lambda p: p.appliance_id)

    p = _SectionReader(parser, "penalties", path)
    try:
        penalties = PenaltyFactors(
            zeta_sa=p.float("zeta_sa", -0.1),
            zeta_comfort=p.float("zeta_comfort", -5.0),
            zeta_ev=p.float("zeta_ev", -0.1),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: [penalties]: {exc}") from None

    n = _SectionReader(parser, "normalization", path)
    try:
        norm = NormalizationBounds(
            temp_min_c=n.float("temp_min_c", 0.0),
            temp_max_c=n.float("temp_max_c", 45.0),
            price_max=n.float("price_max", None),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: [normalization]: {exc}") from None

    windows = _parse_windows(parser, path)

    appliance_ids = tuple(x.appliance_id for x in shiftables) + (HVAC_ID, ev.appliance_id)
    events = load_events_csv(
        base / f.str("events", _REQUIRED), grid,
        known_ids=set(appliance_ids) - {HVAC_ID},
    )

    d = _SectionReader(parser, "data", path)
    holdout_days = d.int("holdout_days", 0)
    if holdout_days < 0:
        raise ConfigError(f"{path}: [data] holdout_days: must be >= 0, got {holdout_days}")

    t = _SectionReader(parser, "training", path)
    try:
        training = TrainingConfig(
            episodes=t.int("episodes", 1500),
            learning_rate=t.float("learning_rate", 1e-3),
            discount=t.float("discount", 0.99),
            epsilon_max=t.float("epsilon_max", 1.0),
            epsilon_decay=t.float("epsilon_decay", 0.005),
            epsilon_min=t.float("epsilon_min", 0.01),
            batch_size=t.int("batch_size", 64),
            replay_capacity=t.int("replay_capacity", 100_000),
            target_sync_period=t.int("target_sync_period", 200),
            hidden1=t.int("hidden1", 128),
            hidden2=t.int("hidden2", 128),
            seed=seed,
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: [training]: {exc}") from None

    out_raw = _SectionReader(parser, "output", path).str("dir", None)
    output_dir = (base / out_raw) if out_raw is not None else None

    mode_policy = _parse_modes(parser, path, appliance_ids)

    if len(prices) != len(weather):
        raise ConfigError(
            f"{path}: price series ({len(prices)} rows) and weather series "
            f"({len(weather)} rows) must cover the same steps"
        )
    if len(prices) < grid.steps_per_episode:
        raise ConfigError(
            f"{path}: series too short for one episode "
            f"({len(prices)} < {grid.steps_per_episode} steps)"
        )

    return Scenario(
        path=path, name=name, seed=seed, grid=grid,
        prices=prices, weather=weather, events=events,
        shiftables=tuple(shiftables), hvac=hvac, ev=ev,
        penalties=penalties, norm=norm, windows=windows,
        holdout_days=holdout_days, mode_policy=mode_policy,
        training=training, output_dir=output_dir,
    )
