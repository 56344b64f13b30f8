"""Appliance models: shiftable loads, HVAC thermal dynamics, EV charging.

Conventions used throughout:

  * Time is a step index on the shared grid; dt_hours is the step length.
  * Shiftable appliances run one contiguous cycle of duration_steps within
    a scheduling window [t_a, t_b]. The countdown x = (t_b - t_a) - d - (t - t_a)
    hits zero at the latest feasible start, where the backup controller takes
    over. Mode 0 uses a degenerate window of exactly d steps, so x starts at
    zero and the cycle is forced immediately.
  * The EV charges interruptibly between arrival and departure; departure is
    exclusive (charging may occur at steps t_arr .. t_dep - 1) and the backup
    forces charging once the remaining slots equal the required slots.
  * HVAC follows a first-order RC equivalent-thermal-parameter model. When
    switched on, the unit injects the (clamped) heat rate that would land the
    indoor temperature exactly on the setpoint one step later. Electrical
    power is |Q| * a / CoP, so cooling draws positive power.

Comfort bands, scheduling windows, and price-forecast windows widen with the
preference mode: Mode 0 is the no-flexibility baseline, Mode 1 moderate,
Mode 2 the widest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import IntEnum
from typing import Mapping


class PreferenceMode(IntEnum):
    MODE0 = 0
    MODE1 = 1
    MODE2 = 2


@dataclass(frozen=True)
class ModeWindows:
    """Per-mode flexibility settings.

    sa_window_hours / ev_window_hours have no Mode 0 entry: in Mode 0 the
    window degenerates to the bare cycle length, which is what forces the
    immediate start.
    """

    sa_window_hours: Mapping[PreferenceMode, float]
    ev_window_hours: Mapping[PreferenceMode, float]
    hvac_deadband_c: Mapping[PreferenceMode, float]
    hvac_price_window_hours: Mapping[PreferenceMode, float]

    def __post_init__(self):
        if not (self.sa_window_hours[PreferenceMode.MODE1]
                <= self.sa_window_hours[PreferenceMode.MODE2]):
            raise ValueError("SA windows must widen with mode")
        if not (self.ev_window_hours[PreferenceMode.MODE1]
                <= self.ev_window_hours[PreferenceMode.MODE2]):
            raise ValueError("EV windows must widen with mode")
        d = self.hvac_deadband_c
        if not (d[PreferenceMode.MODE0] <= d[PreferenceMode.MODE1] <= d[PreferenceMode.MODE2]):
            raise ValueError("deadbands must widen with mode")

    def sa_window_steps(self, mode: PreferenceMode, duration_steps: int, dt_hours: float) -> int:
        if mode == PreferenceMode.MODE0:
            return duration_steps
        return max(duration_steps, int(round(self.sa_window_hours[mode] / dt_hours)))

    def ev_window_steps(self, mode: PreferenceMode, required_steps: int, dt_hours: float) -> int:
        if mode == PreferenceMode.MODE0:
            return required_steps
        return max(required_steps, int(round(self.ev_window_hours[mode] / dt_hours)))

    def hvac_price_steps(self, mode: PreferenceMode, dt_hours: float) -> int:
        if mode == PreferenceMode.MODE0:
            return 0
        return int(round(self.hvac_price_window_hours[mode] / dt_hours))


DEFAULT_MODE_WINDOWS = ModeWindows(
    sa_window_hours={PreferenceMode.MODE1: 12.0, PreferenceMode.MODE2: 24.0},
    ev_window_hours={PreferenceMode.MODE1: 6.0, PreferenceMode.MODE2: 12.0},
    hvac_deadband_c={
        PreferenceMode.MODE0: 0.5,
        PreferenceMode.MODE1: 1.0,
        PreferenceMode.MODE2: 2.0,
    },
    hvac_price_window_hours={PreferenceMode.MODE1: 2.0, PreferenceMode.MODE2: 4.0},
)


def mode_band(mode: PreferenceMode, t_set_c: float,
              windows: ModeWindows = DEFAULT_MODE_WINDOWS) -> tuple[float, float]:
    """Comfort band (t_min, t_max) around the setpoint for a mode."""
    half = windows.hvac_deadband_c[mode]
    return (t_set_c - half, t_set_c + half)


# ---------------------------------------------------------------------------
# Shiftable appliances


@dataclass(frozen=True)
class ShiftableApplianceParams:
    appliance_id: str
    rated_power_kw: float
    duration_steps: int
    mode: PreferenceMode = PreferenceMode.MODE2

    def __post_init__(self):
        if self.rated_power_kw <= 0:
            raise ValueError(f"{self.appliance_id}: rated_power_kw must be positive")
        if self.duration_steps < 1:
            raise ValueError(f"{self.appliance_id}: duration_steps must be >= 1")


@dataclass(frozen=True)
class ShiftableApplianceState:
    """Live request state. All-zero fields mean no open request."""

    u: int = 0          # request flag
    w: float = 0.0      # completed fraction of the cycle
    x: int = 0          # steps left until the latest feasible start
    z: float = 0.0      # mean price over the scheduling window, USD/kWh
    k_prev: int = 0     # applied on/off decision from the previous step
    t_a: int = -1       # window opening step
    t_b: int = -1       # window closing step (operation allowed through t_b)
    started: bool = False
    t_start: int = -1


def sa_activate(params: ShiftableApplianceParams, t_a: int, t_b: int,
                z: float) -> ShiftableApplianceState:
    """Open a request with window [t_a, t_b]; x counts down to the forced start."""
    if t_b - t_a < params.duration_steps:
        raise ValueError(
            f"{params.appliance_id}: window [{t_a}, {t_b}] cannot fit "
            f"{params.duration_steps} operating steps"
        )
    x0 = (t_b - t_a) - params.duration_steps
    return ShiftableApplianceState(u=1, w=0.0, x=x0, z=z, t_a=t_a, t_b=t_b)


def sa_backup_control(state: ShiftableApplianceState, action: int, t: int) -> int:
    """Guarantee the cycle: continue mid-cycle, force at the deadline,
    zero outside the window, otherwise pass the agent's action through."""
    if state.k_prev == 1 and 0.0 < state.w < 1.0:
        return 1
    if state.u == 1 and state.x == 0:
        return 1
    if state.u == 0 or t < state.t_a or t > state.t_b:
        return 0
    return int(action)


def sa_step(state: ShiftableApplianceState, params: ShiftableApplianceParams,
            k: int, t: int) -> ShiftableApplianceState:
    """Advance one step with applied decision k; zero out on completion or
    window close."""
    if state.u == 0:
        return state
    d = params.duration_steps
    started = state.started or k == 1
    t_start = state.t_start if state.started else (t if k == 1 else -1)
    # count steps as an integer so completion lands on w == 1.0 exactly even
    # when 1/d is not representable (d = 6: six additions of 1/6 fall short)
    w = min((int(round(state.w * d)) + k) / d, 1.0)
    x = max(state.x - 1, 0)
    if w >= 1.0 or t >= state.t_b:
        return ShiftableApplianceState()
    return replace(state, w=w, x=x, k_prev=k, started=started, t_start=t_start)


# ---------------------------------------------------------------------------
# HVAC


@dataclass(frozen=True)
class HvacParams:
    q_max_kw: float = 14.0          # thermal output limit, both signs
    r_c_per_kw: float = 2.0         # envelope thermal resistance
    c_kwh_per_c: float = 2.0        # thermal capacitance
    cop: float = 3.5
    t_set_c: float = 23.0

    def __post_init__(self):
        if self.r_c_per_kw * self.c_kwh_per_c <= 0:
            raise ValueError("R and C must be positive")
        if self.q_max_kw <= 0:
            raise ValueError("q_max_kw must be positive")
        if self.cop <= 0:
            raise ValueError("cop must be positive")


@dataclass(frozen=True)
class HvacState:
    t_in_c: float
    t_out_c: float
    t_min_c: float
    t_max_c: float
    z: float = 0.0


def _decay(params: HvacParams, dt_hours: float) -> float:
    """exp(-dt / RC); the one-step free-response contraction factor."""
    if dt_hours <= 0:
        raise ValueError("dt_hours must be positive")
    a = dt_hours / (params.r_c_per_kw * params.c_kwh_per_c)
    e = math.exp(-a)
    if e >= 1.0:
        raise ValueError("dt / RC underflowed; R, C, or dt out of range")
    return e


def hvac_decay_factor(params: HvacParams, dt_hours: float) -> float:
    """exp(-dt/RC), exposed for code that vectorizes the RC update and must
    stay bit-identical to the scalar step functions."""
    return _decay(params, dt_hours)


def hvac_indoor_next(t_in_prev: float, t_out: float, q_kw: float,
                     params: HvacParams, dt_hours: float) -> float:
    """One RC step: T = T_out + Q R - (T_out + Q R - T_prev) exp(-dt/RC)."""
    e = _decay(params, dt_hours)
    drive = t_out + q_kw * params.r_c_per_kw
    return drive - (drive - t_in_prev) * e


def hvac_required_heat_rate(t_in_prev: float, t_out: float, params: HvacParams,
                            dt_hours: float, *, clamped: bool = True) -> float:
    """Heat rate (kW, thermal; negative = cooling) that lands the indoor
    temperature on the setpoint one step later, clamped to +-q_max by default."""
    e = _decay(params, dt_hours)
    q = (params.t_set_c - t_out + (t_out - t_in_prev) * e) / (params.r_c_per_kw * (1.0 - e))
    if clamped:
        q = max(-params.q_max_kw, min(params.q_max_kw, q))
    return q


def hvac_power_kw(q_kw: float, on: int, cop: float) -> float:
    """Electrical draw; magnitude of the thermal rate over the CoP."""
    return abs(q_kw) * on / cop


def hvac_default_action(t_in_prev: float, t_out: float, params: HvacParams,
                        band: tuple[float, float], dt_hours: float) -> int:
    """No-flexibility thermostat: coast while the free response stays inside
    the band, otherwise run."""
    t_free = hvac_indoor_next(t_in_prev, t_out, 0.0, params, dt_hours)
    return 0 if band[0] <= t_free <= band[1] else 1


def hvac_step(state: HvacState, on: int, t_out: float, params: HvacParams,
              dt_hours: float) -> tuple[HvacState, float, float]:
    """Apply the on/off decision for one step.

    Returns (new state, clamped heat rate, electrical power). The heat rate
    is computed from the previous indoor temperature whether or not the unit
    runs; power and the temperature update use it only when on."""
    q = hvac_required_heat_rate(state.t_in_c, t_out, params, dt_hours)
    t_in = hvac_indoor_next(state.t_in_c, t_out, q * on, params, dt_hours)
    power = hvac_power_kw(q, on, params.cop)
    return replace(state, t_in_c=t_in, t_out_c=t_out), q, power


# ---------------------------------------------------------------------------
# Electric vehicle


@dataclass(frozen=True)
class EvParams:
    charge_power_kw: float = 3.4
    battery_kwh: float = 17.0
    soc_min: float = 0.20
    soc_max: float = 0.90
    efficiency: float = 1.0
    mode: PreferenceMode = PreferenceMode.MODE2
    appliance_id: str = "EV"

    def __post_init__(self):
        if not (0.0 <= self.soc_min < self.soc_max <= 1.0):
            raise ValueError("need 0 <= soc_min < soc_max <= 1")
        if self.charge_power_kw <= 0 or self.battery_kwh <= 0:
            raise ValueError("charge power and battery capacity must be positive")
        if not (0.0 < self.efficiency <= 1.0):
            raise ValueError("efficiency must be in (0, 1]")


@dataclass(frozen=True)
class EvState:
    """Connection state. All-zero fields mean the vehicle is away."""

    u: int = 0
    soc: float = 0.0
    x: int = 0          # steps until departure (exclusive departure step)
    z: float = 0.0
    t_arr: int = -1
    t_dep: int = -1
    d_ev: int = 0       # charging steps still required


_SOC_EPS = 1e-9


def ev_required_steps(soc: float, params: EvParams, dt_hours: float) -> int:
    """Charging steps needed to reach soc_max (epsilon-tolerant ceiling)."""
    deficit_kwh = (params.soc_max - soc) * params.battery_kwh
    per_step_kwh = params.charge_power_kw * params.efficiency * dt_hours
    steps = deficit_kwh / per_step_kwh
    return max(0, math.ceil(steps - _SOC_EPS))


def ev_arrive(params: EvParams, t_arr: int, t_dep: int, z: float,
              dt_hours: float, soc: float | None = None) -> EvState:
    """Connect the vehicle; it must be chargeable to soc_max by departure."""
    soc = params.soc_min if soc is None else soc
    d_ev = ev_required_steps(soc, params, dt_hours)
    if t_dep - t_arr < d_ev:
        raise ValueError(
            f"{params.appliance_id}: [{t_arr}, {t_dep}) leaves fewer than "
            f"{d_ev} charging slots"
        )
    return EvState(u=1, soc=soc, x=t_dep - t_arr, z=z, t_arr=t_arr, t_dep=t_dep, d_ev=d_ev)


def ev_backup_control(state: EvState, action: int, t: int) -> int:
    """Guarantee full charge by departure: block when away or already full
    (d_ev == 0), force once the remaining slots equal the required slots,
    else pass the agent's action through."""
    if state.u == 0 or t < state.t_arr or t >= state.t_dep:
        return 0
    if state.d_ev == 0:
        return 0
    if state.x == state.d_ev:
        return 1
    return int(action)


def ev_charge(soc: float, params: EvParams, dt_hours: float) -> float:
    """State of charge after one charging step, capped at soc_max.

    Snaps to soc_max when within 1e-9: repeated fractional increments land a
    hair under the cap in floating point, and departure-time equality checks
    should see a genuinely full battery."""
    soc = min(
        soc + params.charge_power_kw * params.efficiency * dt_hours / params.battery_kwh,
        params.soc_max,
    )
    if params.soc_max - soc < _SOC_EPS:
        soc = params.soc_max
    return soc


def ev_step(state: EvState, params: EvParams, k: int,
            dt_hours: float) -> EvState:
    """Advance one step with applied decision k; disconnect at departure."""
    if state.u == 0:
        return state
    soc = ev_charge(state.soc, params, dt_hours) if k == 1 else state.soc
    x = state.x - 1
    if x <= 0:
        return EvState()
    d_ev = ev_required_steps(soc, params, dt_hours)
    return replace(state, soc=soc, x=x, d_ev=d_ev)
