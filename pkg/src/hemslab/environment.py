"""Household simulation environment.

One episode covers a fixed number of grid steps (two days at the default
15-minute grid). The controller picks one joint on/off action per step; a
per-appliance backup layer guarantees hard constraints (cycle completion,
full EV charge, nothing runs outside its window), so every action sequence
is safe and the agent only shapes cost and comfort.

Observation vector (all components min-max normalized to [0, 1]):

    [u, w, x, z] per shiftable appliance
    [t_in, t_out, t_min, t_max, z] for HVAC
    [u, soc, x, z] for the EV
    [current price]

Joint actions are indexed 0 .. 2^n - 1; bit i of the index is the on/off
request for component i, ordered shiftables first, then HVAC, then EV.

Rewards per step and component:

    shiftable / EV: (z - price) * rated_power * k + zeta * |action - k|
    HVAC in band:   (z - price) * electrical_power
    HVAC below:     (t_min - t_in) * zeta_comfort
    HVAC above:     (t_in - t_max) * zeta_comfort

Rewards are not scaled by the step length; energy cost is. episode_cost sums
price * power * dt_hours per appliance through one shared dot product so the
simulator and the scheduling oracle price identical schedules identically.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .appliances import (
    DEFAULT_MODE_WINDOWS,
    EvParams,
    EvState,
    HvacParams,
    HvacState,
    ModeWindows,
    PreferenceMode,
    ShiftableApplianceParams,
    ShiftableApplianceState,
    ev_arrive,
    ev_backup_control,
    ev_charge,
    ev_required_steps,
    ev_step,
    hvac_default_action,
    hvac_step,
    mode_band,
    sa_activate,
    sa_backup_control,
    sa_step,
)
from .errors import ConfigError, ConflictError, StateError
from .timeseries import (
    ApplianceEventLog,
    PriceSeries,
    TimeGrid,
    WeatherSeries,
    forward_average_price,
)

HVAC_ID = "HVAC"


@dataclass(frozen=True)
class PenaltyFactors:
    zeta_sa: float = -0.1
    zeta_comfort: float = -5.0
    zeta_ev: float = -0.1

    def __post_init__(self):
        if self.zeta_sa > 0 or self.zeta_comfort > 0 or self.zeta_ev > 0:
            raise ValueError("penalty factors must be <= 0")


@dataclass(frozen=True)
class NormalizationBounds:
    temp_min_c: float = 0.0
    temp_max_c: float = 45.0
    price_max: float | None = None   # None: use the price series maximum

    def __post_init__(self):
        if self.temp_max_c <= self.temp_min_c:
            raise ValueError("temp_max_c must exceed temp_min_c")
        if self.price_max is not None and self.price_max <= 0:
            raise ValueError("price_max must be positive")


@dataclass(frozen=True)
class RewardBreakdown:
    shiftable: dict[str, float]
    hvac: float
    ev: float

    @property
    def total(self) -> float:
        return sum(self.shiftable.values()) + self.hvac + self.ev


@dataclass
class TraceRow:
    step: int
    timestamp: str
    price: float
    appliance_id: str
    action: int
    k: int
    power_kw: float
    reward: float
    t_in: float | None = None
    soc: float | None = None


@dataclass
class EpisodeTrace:
    """Per-step, per-appliance record of one episode."""

    appliance_ids: tuple[str, ...]
    start: int
    modes: dict[str, PreferenceMode]
    rows: list[TraceRow] = field(default_factory=list)
    prices: list[float] = field(default_factory=list)

    def power_vector(self, appliance_id: str) -> np.ndarray:
        return np.array([r.power_kw for r in self.rows if r.appliance_id == appliance_id])

    def actions(self, appliance_id: str) -> np.ndarray:
        return np.array([r.k for r in self.rows if r.appliance_id == appliance_id], dtype=int)

    def rows_for(self, appliance_id: str) -> list[TraceRow]:
        return [r for r in self.rows if r.appliance_id == appliance_id]

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "timestamp", "price", "appliance_id", "action",
                        "k", "power_kw", "reward", "T_in", "soc"])
            for r in self.rows:
                w.writerow([
                    r.step, r.timestamp, repr(r.price), r.appliance_id, r.action,
                    r.k, repr(r.power_kw), repr(r.reward),
                    "" if r.t_in is None else repr(r.t_in),
                    "" if r.soc is None else repr(r.soc),
                ])


def schedule_cost(prices: np.ndarray, power_kw: np.ndarray, dt_hours: float) -> float:
    """Canonical cost functional: dt * <prices, power>.

    Every cost in the package (episode accounting, oracle, brute force) goes
    through this one expression so equal schedules cost bit-identical amounts.
    """
    prices = np.ascontiguousarray(prices, dtype=np.float64)
    power_kw = np.ascontiguousarray(power_kw, dtype=np.float64)
    if prices.shape != power_kw.shape:
        raise ValueError("prices and power must have equal length")
    return float(np.dot(prices, power_kw)) * dt_hours


def episode_cost(trace: EpisodeTrace, dt_hours: float) -> dict[str, float]:
    """Energy cost per appliance plus 'TOTAL', in USD."""
    prices = np.asarray(trace.prices)
    costs: dict[str, float] = {}
    for appliance_id in trace.appliance_ids:
        costs[appliance_id] = schedule_cost(prices, trace.power_vector(appliance_id), dt_hours)
    costs["TOTAL"] = sum(costs.values())
    return costs


@dataclass(frozen=True)
class SaEvent:
    """Resolved shiftable request: window [t_a, t_b], operation allowed
    through t_b, forced start no later than t_b - duration."""
    t_a: int
    t_b: int
    z: float


@dataclass(frozen=True)
class EvEvent:
    """Resolved EV connection: charging slots [t_arr, t_dep - 1]."""
    t_arr: int
    t_dep: int
    z: float


@dataclass(frozen=True)
class EpisodePlan:
    """Mode-resolved windows, bands, and events for one episode.

    Built identically for the simulator and the scheduling oracle so both
    optimize over exactly the same feasible set.
    """

    start: int
    end: int
    modes: dict[str, PreferenceMode]
    sa_events: dict[str, tuple[SaEvent, ...]]
    sa_window_steps: dict[str, int]
    hvac_band: tuple[float, float]
    hvac_price_steps: int
    ev_events: tuple[EvEvent, ...]
    ev_window_steps: int


def _window_mean(prices: PriceSeries, start: int, window_steps: int) -> float:
    clamped = min(window_steps, len(prices) - start)
    return forward_average_price(prices, start, clamped)


def compile_episode(
    grid: TimeGrid,
    prices: PriceSeries,
    events: ApplianceEventLog,
    sa_params: Sequence[ShiftableApplianceParams],
    hvac: HvacParams,
    ev: EvParams,
    windows: ModeWindows,
    modes: Mapping[str, PreferenceMode],
    start: int,
) -> EpisodePlan:
    """Resolve events and windows for the episode starting at `start`.

    Events that cannot complete before the episode ends are dropped, using a
    mode-independent rule (completion must fit even with zero flexibility) so
    every mode sees the same event set. Operating windows clamp to the
    episode end; forecast windows for z clamp to the series end.
    """
    dt = grid.dt_hours
    end = start + grid.steps_per_episode
    sa_events: dict[str, tuple[SaEvent, ...]] = {}
    sa_window_steps: dict[str, int] = {}
    for params in sa_params:
        mode = PreferenceMode(modes[params.appliance_id])
        window = windows.sa_window_steps(mode, params.duration_steps, dt)
        resolved = []
        for t_a in events.for_appliance(params.appliance_id):
            if t_a < start or t_a + params.duration_steps > end:
                continue
            t_b = min(t_a + window, end)
            resolved.append(SaEvent(t_a, t_b, _window_mean(prices, t_a, window)))
        sa_events[params.appliance_id] = tuple(resolved)
        sa_window_steps[params.appliance_id] = window

    hvac_mode = PreferenceMode(modes[HVAC_ID])
    band = mode_band(hvac_mode, hvac.t_set_c, windows)
    hvac_price_steps = windows.hvac_price_steps(hvac_mode, dt)

    ev_mode = PreferenceMode(modes[ev.appliance_id])
    d_init = ev_required_steps(ev.soc_min, ev, dt)
    ev_window = windows.ev_window_steps(ev_mode, d_init, dt)
    ev_resolved = []
    for t_arr in events.for_appliance(ev.appliance_id):
        if t_arr < start or t_arr + d_init > end:
            continue
        t_dep = min(t_arr + ev_window, end)
        ev_resolved.append(EvEvent(t_arr, t_dep, _window_mean(prices, t_arr, ev_window)))
    return EpisodePlan(
        start=start,
        end=end,
        modes={a: PreferenceMode(m) for a, m in modes.items()},
        sa_events=sa_events,
        sa_window_steps=sa_window_steps,
        hvac_band=band,
        hvac_price_steps=hvac_price_steps,
        ev_events=tuple(ev_resolved),
        ev_window_steps=ev_window,
    )


class _ShiftableUnit:
    def __init__(self, params: ShiftableApplianceParams, mode: PreferenceMode,
                 window_steps: int):
        self.params = params
        self.mode = mode
        self.window_steps = window_steps
        self.events: list[SaEvent] = []
        self.state = ShiftableApplianceState()

    def arm(self, t: int) -> None:
        while self.events and self.events[0].t_a == t:
            ev = self.events.pop(0)
            if self.state.u == 1:
                raise ConflictError(
                    f"{self.params.appliance_id}: activation at step {t} while an "
                    f"earlier request is still open"
                )
            self.state = sa_activate(self.params, ev.t_a, ev.t_b, ev.z)


class _EvUnit:
    def __init__(self, params: EvParams, mode: PreferenceMode, window_steps: int):
        self.params = params
        self.mode = mode
        self.window_steps = window_steps
        self.events: list[EvEvent] = []
        self.state = EvState()

    def arm(self, t: int, dt_hours: float) -> None:
        while self.events and self.events[0].t_arr == t:
            ev = self.events.pop(0)
            if self.state.u == 1:
                raise ConflictError(
                    f"{self.params.appliance_id}: arrival at step {t} while still connected"
                )
            self.state = ev_arrive(self.params, ev.t_arr, ev.t_dep, ev.z, dt_hours)


class HomeEnvironment:
    """Multi-appliance household with per-appliance preference modes."""

    def __init__(
        self,
        grid: TimeGrid,
        prices: PriceSeries,
        weather: WeatherSeries,
        events: ApplianceEventLog,
        shiftables: Sequence[ShiftableApplianceParams],
        hvac: HvacParams,
        ev: EvParams,
        penalties: PenaltyFactors = PenaltyFactors(),
        norm: NormalizationBounds = NormalizationBounds(),
        windows: ModeWindows = DEFAULT_MODE_WINDOWS,
        seed: int = 0,
    ):
        if len(prices) != len(weather):
            raise ConfigError(
                f"price series ({len(prices)} rows) and weather series "
                f"({len(weather)} rows) must cover the same steps"
            )
        if not shiftables:
            raise ConfigError("roster needs at least one shiftable appliance")
        ids = [p.appliance_id for p in shiftables] + [HVAC_ID, ev.appliance_id]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"duplicate appliance ids in roster: {ids}")
        schedulable = set(ids) - {HVAC_ID}
        for e in events:
            if e.appliance_id not in schedulable:
                raise ConfigError(f"event references unknown appliance {e.appliance_id!r}")
            if e.activation_step >= len(prices):
                raise ConfigError(
                    f"event for {e.appliance_id!r} at step {e.activation_step} lies "
                    f"beyond the series ({len(prices)} steps)"
                )
        self.grid = grid
        self.prices = prices
        self.weather = weather
        self.events = events
        self.sa_params = tuple(shiftables)
        self.hvac_params = hvac
        self.ev_params = ev
        self.penalties = penalties
        self.windows = windows
        price_max = norm.price_max if norm.price_max is not None else float(np.max(prices.values))
        if price_max <= 0:
            raise ConfigError("price normalization bound must be positive")
        self.norm = NormalizationBounds(norm.temp_min_c, norm.temp_max_c, price_max)
        self._rng = np.random.default_rng(seed)
        self._terminal = True
        self._trace: EpisodeTrace | None = None
        self.modes: dict[str, PreferenceMode] = {}

    @property
    def appliance_ids(self) -> tuple[str, ...]:
        return tuple(p.appliance_id for p in self.sa_params) + (HVAC_ID, self.ev_params.appliance_id)

    @property
    def n_components(self) -> int:
        return len(self.sa_params) + 2

    @property
    def n_actions(self) -> int:
        return 1 << self.n_components

    @property
    def observation_size(self) -> int:
        return 4 * len(self.sa_params) + 5 + 4 + 1

    def decode_action(self, index: int) -> list[int]:
        """Joint action index -> per-component bits, shiftables first,
        then HVAC, then EV."""
        if not (0 <= index < self.n_actions):
            raise ValueError(f"action index {index} out of range [0, {self.n_actions})")
        return [(index >> i) & 1 for i in range(self.n_components)]

    # -- episode control ---------------------------------------------------

    def reset(
        self,
        start: int,
        modes: str | Mapping[str, PreferenceMode] = "sample",
    ) -> np.ndarray:
        steps = self.grid.steps_per_episode
        if start < 0 or start + steps > len(self.prices):
            raise ConfigError(
                f"episode [{start}, {start + steps}) out of bounds for series "
                f"of length {len(self.prices)}"
            )
        self.modes = self._resolve_modes(modes)
        self._t = start
        self._end = start + steps
        self._steps_done = 0
        self._terminal = False
        self._setup_units()
        self._arm_all()
        self._trace = EpisodeTrace(self.appliance_ids, start, dict(self.modes))
        return self.observe()

    def _resolve_modes(self, modes) -> dict[str, PreferenceMode]:
        ids = self.appliance_ids
        if isinstance(modes, str):
            if modes != "sample":
                raise ConfigError(f"modes must be 'sample' or a mapping, got {modes!r}")
            draw = self._rng.integers(0, 3, size=len(ids))
            return {a: PreferenceMode(int(m)) for a, m in zip(ids, draw)}
        resolved = {}
        for a in ids:
            if a not in modes:
                raise ConfigError(f"mode assignment missing appliance {a!r}")
            resolved[a] = PreferenceMode(modes[a])
        return resolved

    def episode_plan(self, modes: Mapping[str, PreferenceMode], start: int) -> EpisodePlan:
        """Resolved windows and events for one episode, shared with the oracle."""
        return compile_episode(self.grid, self.prices, self.events, self.sa_params,
                               self.hvac_params, self.ev_params, self.windows,
                               modes, start)

    def _setup_units(self) -> None:
        plan = self.episode_plan(self.modes, self._t)
        self._sa = []
        for params in self.sa_params:
            unit = _ShiftableUnit(params, plan.modes[params.appliance_id],
                                  plan.sa_window_steps[params.appliance_id])
            unit.events = list(plan.sa_events[params.appliance_id])
            self._sa.append(unit)

        self._hvac_mode = plan.modes[HVAC_ID]
        self._hvac_band = plan.hvac_band
        self._hvac_price_steps = plan.hvac_price_steps
        self._hvac_state = HvacState(
            t_in_c=self.hvac_params.t_set_c,
            t_out_c=float(self.weather[self._t]),
            t_min_c=plan.hvac_band[0],
            t_max_c=plan.hvac_band[1],
            z=self._hvac_z(self._t),
        )

        ev_unit = _EvUnit(self.ev_params, plan.modes[self.ev_params.appliance_id],
                          plan.ev_window_steps)
        ev_unit.events = list(plan.ev_events)
        self._ev = ev_unit

    def _arm_all(self) -> None:
        for unit in self._sa:
            unit.arm(self._t)
        self._ev.arm(self._t, self.grid.dt_hours)

    # -- price forecasts ---------------------------------------------------

    def _window_mean_price(self, start: int, window_steps: int) -> float:
        return _window_mean(self.prices, start, window_steps)

    def _hvac_z(self, t: int) -> float:
        if self._hvac_price_steps == 0:
            return float(self.prices[min(t, len(self.prices) - 1)])
        return self._window_mean_price(t, self._hvac_price_steps)

    # -- observation -------------------------------------------------------

    def _norm_price(self, p: float) -> float:
        return float(np.clip(p / self.norm.price_max, 0.0, 1.0))

    def _norm_temp(self, t_c: float) -> float:
        lo, hi = self.norm.temp_min_c, self.norm.temp_max_c
        return float(np.clip((t_c - lo) / (hi - lo), 0.0, 1.0))

    def observe(self) -> np.ndarray:
        t = min(self._t, len(self.prices) - 1)
        parts: list[float] = []
        for unit in self._sa:
            s = unit.state
            span = max(unit.window_steps - unit.params.duration_steps, 1)
            parts += [float(s.u), s.w, min(s.x / span, 1.0), self._norm_price(s.z)]
        h = self._hvac_state
        parts += [
            self._norm_temp(h.t_in_c),
            self._norm_temp(float(self.weather[t])),
            self._norm_temp(h.t_min_c),
            self._norm_temp(h.t_max_c),
            self._norm_price(self._hvac_z(t)),
        ]
        ev = self._ev.state
        span = max(self._ev.window_steps, 1)
        parts += [float(ev.u), ev.soc, min(ev.x / span, 1.0), self._norm_price(ev.z)]
        parts.append(self._norm_price(float(self.prices[t])))
        return np.asarray(parts, dtype=np.float64)

    # -- stepping ----------------------------------------------------------

    def step(self, action: int) -> tuple[np.ndarray, RewardBreakdown, bool, dict]:
        if self._terminal:
            raise StateError("step() called on a finished episode; call reset() first")
        bits = self.decode_action(action)
        t = self._t
        dt = self.grid.dt_hours
        price = float(self.prices[t])
        t_out = float(self.weather[t])
        stamp = self.grid.timestamp(t).isoformat()
        trace = self._trace
        trace.prices.append(price)
        sa_rewards: dict[str, float] = {}

        for i, unit in enumerate(self._sa):
            a = bits[i]
            k = sa_backup_control(unit.state, a, t)
            z = unit.state.z
            power = unit.params.rated_power_kw * k
            reward = (z - price) * unit.params.rated_power_kw * k \
                + abs(a - k) * self.penalties.zeta_sa
            unit.state = sa_step(unit.state, unit.params, k, t)
            sa_rewards[unit.params.appliance_id] = reward
            trace.rows.append(TraceRow(t - trace.start, stamp, price,
                                       unit.params.appliance_id, a, k, power, reward))

        a_hvac = bits[len(self._sa)]
        if self._hvac_mode == PreferenceMode.MODE0:
            applied = hvac_default_action(self._hvac_state.t_in_c, t_out,
                                          self.hvac_params, self._hvac_band, dt)
        else:
            applied = a_hvac
        z_hvac = self._hvac_z(t)
        self._hvac_state, _, hvac_power = hvac_step(
            self._hvac_state, applied, t_out, self.hvac_params, dt)
        t_in = self._hvac_state.t_in_c
        t_min, t_max = self._hvac_band
        if t_in < t_min:
            hvac_reward = (t_min - t_in) * self.penalties.zeta_comfort
        elif t_in > t_max:
            hvac_reward = (t_in - t_max) * self.penalties.zeta_comfort
        else:
            hvac_reward = (z_hvac - price) * hvac_power
        trace.rows.append(TraceRow(t - trace.start, stamp, price, HVAC_ID,
                                   a_hvac, applied, hvac_power, hvac_reward, t_in=t_in))

        a_ev = bits[len(self._sa) + 1]
        ev_state = self._ev.state
        k_ev = ev_backup_control(ev_state, a_ev, t)
        ev_power = self.ev_params.charge_power_kw * k_ev
        ev_reward = (ev_state.z - price) * self.ev_params.charge_power_kw * k_ev \
            + abs(a_ev - k_ev) * self.penalties.zeta_ev
        if ev_state.u:
            soc_after = ev_charge(ev_state.soc, self.ev_params, dt) if k_ev else ev_state.soc
        else:
            soc_after = None
        self._ev.state = ev_step(ev_state, self.ev_params, k_ev, dt)
        trace.rows.append(TraceRow(t - trace.start, stamp, price,
                                   self.ev_params.appliance_id, a_ev, k_ev,
                                   ev_power, ev_reward, soc=soc_after))

        self._t += 1
        self._steps_done += 1
        self._terminal = self._steps_done >= self.grid.steps_per_episode
        if not self._terminal:
            self._arm_all()
        breakdown = RewardBreakdown(sa_rewards, hvac_reward, ev_reward)
        info = {"step": t - trace.start, "price": price, "t_in": t_in, "modes": self.modes}
        return self.observe(), breakdown, self._terminal, info

    @property
    def trace(self) -> EpisodeTrace:
        if self._trace is None:
            raise StateError("no episode has been started")
        return self._trace
