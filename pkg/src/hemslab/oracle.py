"""Exact schedulers: the cost floor the learned controller is judged against.

The joint scheduling problem separates by appliance because the cost is a sum
of independent terms: a shiftable cycle is a contiguous block (pick the
cheapest start), EV charging is a choose-k subset (pick the cheapest slots),
and HVAC is a shortest path over reachable indoor temperatures. Each routine
optimizes over exactly the feasible set the simulator's backup controller
admits, and every reported cost goes through `schedule_cost`, so an agent
that lands on the oracle's schedule is billed the identical float.

The HVAC search tracks exact temperatures rather than a binned grid: an
unclamped on-step lands on the setpoint, so the reachable state set stays
tiny and the answer is exact. States within 1e-9 C collapse to one key to
absorb float noise; a 0.05 C grid is applied only if the state count ever
explodes, and the result is then flagged as approximate.

Brute-force enumerators (capped at 16 slots) provide an independent check of
each optimizer. They evaluate every on/off sequence with the same arithmetic
as the step functions, so agreement is exact, not approximate.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .appliances import (
    EvParams,
    HvacParams,
    PreferenceMode,
    ShiftableApplianceParams,
    ev_required_steps,
    hvac_decay_factor,
    hvac_default_action,
    hvac_indoor_next,
    hvac_power_kw,
    hvac_required_heat_rate,
)
from .environment import (
    HVAC_ID,
    EpisodePlan,
    HomeEnvironment,
    schedule_cost,
)
from .errors import InfeasibleError

BRUTE_FORCE_MAX_SLOTS = 16


@dataclass(frozen=True)
class HvacDpConfig:
    """Knobs for the HVAC shortest-path search.

    merge_eps_c: temperatures within this distance share one state; absorbs
        the few-ulp scatter of paths that nominally land on the setpoint.
    bin_width_c: coarsening grid applied only when a step would exceed
        max_states; the plan is then flagged exact=False.
    """

    merge_eps_c: float = 1e-9
    bin_width_c: float = 0.05
    max_states: int = 100_000

    def __post_init__(self):
        if self.merge_eps_c <= 0 or self.bin_width_c <= 0:
            raise ValueError("merge_eps_c and bin_width_c must be positive")
        if self.max_states < 1:
            raise ValueError("max_states must be at least 1")


@dataclass(frozen=True)
class ShiftablePlan:
    start: int            # absolute slot index of the first on-step
    cost: float


@dataclass(frozen=True)
class EvPlan:
    slots: tuple[int, ...]   # absolute slot indices, ascending
    cost: float


@dataclass(frozen=True)
class HvacPlan:
    sequence: np.ndarray       # on/off per step
    cost: float
    temperatures: np.ndarray   # indoor temperature after each step
    power_kw: np.ndarray
    exact: bool = True
    states_peak: int = 0


def optimal_shiftable_start(
    prices: np.ndarray,
    first_slot: int,
    last_slot: int,
    duration_steps: int,
    rated_power_kw: float,
    dt_hours: float,
) -> ShiftablePlan:
    """Cheapest contiguous run of duration_steps within [first_slot, last_slot].

    Ties go to the earliest start. Candidate costs use the same dot-product
    functional as the reported cost, so the minimizer the simulator replays
    is billed the identical float.
    """
    prices = np.asarray(prices, dtype=np.float64)
    latest = last_slot - duration_steps + 1
    if first_slot < 0 or last_slot >= len(prices) or latest < first_slot:
        raise InfeasibleError(
            f"no room for {duration_steps} steps in slots [{first_slot}, {last_slot}]"
        )
    block = np.full(duration_steps, rated_power_kw)
    best_start, best_cost = first_slot, float("inf")
    for s in range(first_slot, latest + 1):
        c = schedule_cost(prices[s:s + duration_steps], block, dt_hours)
        if c < best_cost:
            best_start, best_cost = s, c
    return ShiftablePlan(best_start, best_cost)


def optimal_ev_slots(
    prices: np.ndarray,
    first_slot: int,
    last_slot: int,
    required_steps: int,
    charge_power_kw: float,
    dt_hours: float,
) -> EvPlan:
    """Cheapest required_steps charging slots within [first_slot, last_slot].

    Charging is interruptible, so the optimum is simply the cheapest subset;
    price ties resolve to the earlier slot.
    """
    prices = np.asarray(prices, dtype=np.float64)
    if first_slot < 0 or last_slot >= len(prices):
        raise InfeasibleError(f"slots [{first_slot}, {last_slot}] outside the series")
    width = last_slot - first_slot + 1
    if required_steps > width:
        raise InfeasibleError(
            f"{required_steps} charging steps cannot fit in {width} slots"
        )
    window = prices[first_slot:last_slot + 1]
    rel = np.arange(width)
    order = np.lexsort((rel, window))      # by price, then by slot
    chosen = np.sort(order[:required_steps]) + first_slot
    cost = schedule_cost(prices[chosen], np.full(required_steps, charge_power_kw), dt_hours)
    return EvPlan(tuple(int(s) for s in chosen), cost)


def _resimulate_hvac(
    sequence: Sequence[int],
    outdoor: np.ndarray,
    params: HvacParams,
    dt_hours: float,
    t_init: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Replay an on/off sequence with the scalar step functions.

    This is the arithmetic the simulator itself runs, so the returned powers
    and temperatures match a simulated episode bit for bit."""
    temps = np.empty(len(sequence))
    power = np.empty(len(sequence))
    t_in = t_init
    for t, a in enumerate(sequence):
        q = hvac_required_heat_rate(t_in, float(outdoor[t]), params, dt_hours)
        t_in = hvac_indoor_next(t_in, float(outdoor[t]), q * a, params, dt_hours)
        temps[t] = t_in
        power[t] = hvac_power_kw(q, a, params.cop)
    return temps, power


def hvac_default_schedule(
    prices: np.ndarray,
    outdoor: np.ndarray,
    params: HvacParams,
    band: tuple[float, float],
    dt_hours: float,
    t_init: float | None = None,
) -> HvacPlan:
    """No-flexibility thermostat schedule: coast while the free response stays
    in the band, else run. This is what the simulator applies in Mode 0."""
    prices = np.asarray(prices, dtype=np.float64)
    t_in = params.t_set_c if t_init is None else t_init
    sequence = np.zeros(len(prices), dtype=np.int8)
    temps = np.empty(len(prices))
    power = np.empty(len(prices))
    for t in range(len(prices)):
        out = float(outdoor[t])
        a = hvac_default_action(t_in, out, params, band, dt_hours)
        q = hvac_required_heat_rate(t_in, out, params, dt_hours)
        t_in = hvac_indoor_next(t_in, out, q * a, params, dt_hours)
        sequence[t] = a
        temps[t] = t_in
        power[t] = hvac_power_kw(q, a, params.cop)
    return HvacPlan(sequence, schedule_cost(prices, power, dt_hours), temps, power)


def hvac_optimal(
    prices: np.ndarray,
    outdoor: np.ndarray,
    params: HvacParams,
    band: tuple[float, float],
    dt_hours: float,
    t_init: float | None = None,
    dp: HvacDpConfig = HvacDpConfig(),
) -> HvacPlan:
    """Minimum-cost on/off sequence keeping the indoor temperature in band.

    Forward dynamic program over reachable temperatures. The off action is
    expanded first and ties keep the incumbent, so among equal-cost plans the
    unit prefers to coast. Raises InfeasibleError when no sequence can hold
    the band, reporting the first step at which every path dies.
    """
    prices = np.asarray(prices, dtype=np.float64)
    outdoor = np.asarray(outdoor, dtype=np.float64)
    if len(prices) != len(outdoor):
        raise ValueError("prices and outdoor series must have equal length")
    if len(prices) == 0:
        raise ValueError("horizon must contain at least one step")
    lo, hi = band
    t0 = params.t_set_c if t_init is None else t_init
    if not lo <= t0 <= hi:
        raise InfeasibleError(
            f"initial indoor temperature {t0} C outside the band [{lo}, {hi}] C"
        )

    eps = dp.merge_eps_c
    exact = True
    states_peak = 1
    # key -> (cost so far, exact representative temperature)
    states: dict[int, tuple[float, float]] = {int(round(t0 / eps)): (0.0, t0)}
    # per step: key -> (action taken, parent key)
    parents: list[dict[int, tuple[int, int]]] = []

    for t in range(len(prices)):
        out = float(outdoor[t])
        price = float(prices[t])
        nxt: dict[int, tuple[float, float]] = {}
        back: dict[int, tuple[int, int]] = {}
        for key, (cost, t_in) in states.items():
            q = hvac_required_heat_rate(t_in, out, params, dt_hours)
            for a in (0, 1):
                t_next = hvac_indoor_next(t_in, out, q * a, params, dt_hours)
                if t_next < lo - eps or t_next > hi + eps:
                    continue
                c = cost + price * hvac_power_kw(q, a, params.cop) * dt_hours
                k = int(round(t_next / eps))
                if k not in nxt or c < nxt[k][0]:
                    nxt[k] = (c, t_next)
                    back[k] = (a, key)
        if not nxt:
            raise InfeasibleError(
                f"HVAC cannot hold [{lo}, {hi}] C at step {t} "
                f"(outdoor {out} C, full rate {params.q_max_kw} kW)"
            )
        if len(nxt) > dp.max_states:
            exact = False
            coarse: dict[int, tuple[float, float]] = {}
            cback: dict[int, tuple[int, int]] = {}
            for key, (cost, t_in) in nxt.items():
                k = int(round(t_in / dp.bin_width_c))
                if k not in coarse or cost < coarse[k][0]:
                    coarse[k] = (cost, t_in)
                    cback[k] = back[key]
            nxt, back = coarse, cback
        states_peak = max(states_peak, len(nxt))
        states = nxt
        parents.append(back)

    best_key, best_cost = None, float("inf")
    for key, (cost, _) in states.items():
        if cost < best_cost:
            best_key, best_cost = key, cost
    sequence = np.zeros(len(prices), dtype=np.int8)
    key = best_key
    for t in range(len(prices) - 1, -1, -1):
        a, key = parents[t][key]
        sequence[t] = a
    temps, power = _resimulate_hvac(sequence, outdoor, params, dt_hours, t0)
    return HvacPlan(sequence, schedule_cost(prices, power, dt_hours), temps, power,
                    exact=exact, states_peak=states_peak)


# ---------------------------------------------------------------------------
# Whole-episode schedules


@dataclass(frozen=True)
class ApplianceSchedule:
    appliance_id: str
    mode: PreferenceMode
    bits: np.ndarray         # on/off per episode step
    power_kw: np.ndarray
    cost: float


@dataclass
class OracleSchedule:
    start: int
    modes: dict[str, PreferenceMode]
    appliances: dict[str, ApplianceSchedule] = field(default_factory=dict)
    hvac_exact: bool = True

    @property
    def total_cost(self) -> float:
        return sum(s.cost for s in self.appliances.values())

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["appliance_id", "mode", "cost", "schedule_bits"])
            for s in self.appliances.values():
                bits = "".join(str(int(b)) for b in s.bits)
                w.writerow([s.appliance_id, int(s.mode), repr(s.cost), bits])
            w.writerow(["TOTAL", "", repr(self.total_cost), ""])


def oracle_schedule(
    env: HomeEnvironment,
    modes: Mapping[str, PreferenceMode],
    start: int,
    dp: HvacDpConfig = HvacDpConfig(),
) -> OracleSchedule:
    """Cost-minimal schedule for one episode under explicit mode assignments.

    Uses the same episode plan the simulator builds (same windows, same
    event gating, same end clamping), so the feasible sets coincide. Mode 0
    needs no special casing for shiftables and the EV: their windows
    degenerate to exactly the cycle length and the optimizers are forced.
    Mode 0 HVAC is the default thermostat schedule.
    """
    plan: EpisodePlan = env.episode_plan(modes, start)
    steps = env.grid.steps_per_episode
    dt = env.grid.dt_hours
    prices = env.prices.values
    slice_prices = prices[start:plan.end]
    result = OracleSchedule(start=start, modes=dict(plan.modes))

    for params in env.sa_params:
        bits = np.zeros(steps, dtype=np.int8)
        for event in plan.sa_events[params.appliance_id]:
            p = optimal_shiftable_start(prices, event.t_a, event.t_b - 1,
                                        params.duration_steps,
                                        params.rated_power_kw, dt)
            bits[p.start - start:p.start - start + params.duration_steps] = 1
        power = bits * params.rated_power_kw
        result.appliances[params.appliance_id] = ApplianceSchedule(
            params.appliance_id, plan.modes[params.appliance_id], bits, power,
            schedule_cost(slice_prices, power, dt))

    outdoor = env.weather.values[start:plan.end]
    if plan.modes[HVAC_ID] == PreferenceMode.MODE0:
        hplan = hvac_default_schedule(slice_prices, outdoor, env.hvac_params,
                                      plan.hvac_band, dt)
    else:
        hplan = hvac_optimal(slice_prices, outdoor, env.hvac_params,
                             plan.hvac_band, dt, dp=dp)
        result.hvac_exact = hplan.exact
    result.appliances[HVAC_ID] = ApplianceSchedule(
        HVAC_ID, plan.modes[HVAC_ID], np.asarray(hplan.sequence, dtype=np.int8),
        hplan.power_kw, hplan.cost)

    ev = env.ev_params
    bits = np.zeros(steps, dtype=np.int8)
    required = ev_required_steps(ev.soc_min, ev, dt)
    for event in plan.ev_events:
        p = optimal_ev_slots(prices, event.t_arr, event.t_dep - 1, required,
                             ev.charge_power_kw, dt)
        for s in p.slots:
            bits[s - start] = 1
    power = bits * ev.charge_power_kw
    result.appliances[ev.appliance_id] = ApplianceSchedule(
        ev.appliance_id, plan.modes[ev.appliance_id], bits, power,
        schedule_cost(slice_prices, power, dt))
    return result


# ---------------------------------------------------------------------------
# Brute-force references


def _enumerate_sequences(n_slots: int) -> np.ndarray:
    if n_slots > BRUTE_FORCE_MAX_SLOTS:
        raise ValueError(
            f"brute force is capped at {BRUTE_FORCE_MAX_SLOTS} slots, got {n_slots}"
        )
    codes = np.arange(1 << n_slots, dtype=np.int64)
    return ((codes[:, None] >> np.arange(n_slots)) & 1).astype(np.float64)


def brute_force_shiftable(
    prices: np.ndarray,
    first_slot: int,
    last_slot: int,
    duration_steps: int,
    rated_power_kw: float,
    dt_hours: float,
) -> ShiftablePlan:
    """Exhaustive check of optimal_shiftable_start: every on/off sequence in
    the window, filtered to single contiguous runs of the right length."""
    prices = np.asarray(prices, dtype=np.float64)
    seqs = _enumerate_sequences(last_slot - first_slot + 1)
    rises = (np.diff(seqs, axis=1) == 1).sum(axis=1) + seqs[:, 0]
    feasible = (seqs.sum(axis=1) == duration_steps) & (rises == 1)
    if not feasible.any():
        raise InfeasibleError(
            f"no contiguous {duration_steps}-step run fits slots "
            f"[{first_slot}, {last_slot}]"
        )
    costs = np.where(feasible, seqs @ prices[first_slot:last_slot + 1], np.inf)
    start = first_slot + int(np.argmax(seqs[int(np.argmin(costs))]))
    block = np.full(duration_steps, rated_power_kw)
    return ShiftablePlan(start, schedule_cost(prices[start:start + duration_steps],
                                              block, dt_hours))


def brute_force_ev(
    prices: np.ndarray,
    first_slot: int,
    last_slot: int,
    required_steps: int,
    charge_power_kw: float,
    dt_hours: float,
) -> EvPlan:
    """Exhaustive check of optimal_ev_slots: every subset of the window with
    the required cardinality."""
    prices = np.asarray(prices, dtype=np.float64)
    seqs = _enumerate_sequences(last_slot - first_slot + 1)
    feasible = seqs.sum(axis=1) == required_steps
    if not feasible.any():
        raise InfeasibleError(
            f"{required_steps} charging steps cannot fit slots "
            f"[{first_slot}, {last_slot}]"
        )
    costs = np.where(feasible, seqs @ prices[first_slot:last_slot + 1], np.inf)
    chosen = np.flatnonzero(seqs[int(np.argmin(costs))]) + first_slot
    cost = schedule_cost(prices[chosen], np.full(required_steps, charge_power_kw),
                         dt_hours)
    return EvPlan(tuple(int(s) for s in chosen), cost)


def brute_force_hvac(
    prices: np.ndarray,
    outdoor: np.ndarray,
    params: HvacParams,
    band: tuple[float, float],
    dt_hours: float,
    t_init: float | None = None,
) -> HvacPlan:
    """Exhaustive check of hvac_optimal: simulate all 2^h on/off sequences.

    The vectorized update hoists the one transcendental (the decay factor)
    out of appliance code and then uses only IEEE +,*,/ elementwise, so it is
    bit-identical to the scalar step functions."""
    prices = np.asarray(prices, dtype=np.float64)
    outdoor = np.asarray(outdoor, dtype=np.float64)
    lo, hi = band
    t0 = params.t_set_c if t_init is None else t_init
    if not lo <= t0 <= hi:
        raise InfeasibleError(
            f"initial indoor temperature {t0} C outside the band [{lo}, {hi}] C"
        )
    seqs = _enumerate_sequences(len(prices))
    e = hvac_decay_factor(params, dt_hours)
    denom = params.r_c_per_kw * (1.0 - e)
    temps = np.full(len(seqs), t0)
    costs = np.zeros(len(seqs))
    alive = np.ones(len(seqs), dtype=bool)
    for t in range(len(prices)):
        out = float(outdoor[t])
        q = (params.t_set_c - out + (out - temps) * e) / denom
        np.clip(q, -params.q_max_kw, params.q_max_kw, out=q)
        a = seqs[:, t]
        drive = out + q * a * params.r_c_per_kw
        temps = drive - (drive - temps) * e
        costs += float(prices[t]) * (np.abs(q) * a / params.cop) * dt_hours
        alive &= (temps >= lo) & (temps <= hi)
    if not alive.any():
        raise InfeasibleError(f"HVAC cannot hold [{lo}, {hi}] C over the horizon")
    best = int(np.argmin(np.where(alive, costs, np.inf)))
    sequence = seqs[best].astype(np.int8)
    temps, power = _resimulate_hvac(sequence, outdoor, params, dt_hours, t0)
    return HvacPlan(sequence, schedule_cost(prices, power, dt_hours), temps, power)


def brute_force_reference(
    env: HomeEnvironment,
    modes: Mapping[str, PreferenceMode],
    start: int,
) -> OracleSchedule:
    """Whole-episode brute force for tiny grids (<= 16 steps per episode).

    Same shape as oracle_schedule with each optimizer swapped for its
    enumerator; Mode 0 HVAC stays on the default thermostat, because that is
    the defined no-flexibility behavior rather than an optimum."""
    if env.grid.steps_per_episode > BRUTE_FORCE_MAX_SLOTS:
        raise ValueError(
            f"brute force reference needs steps_per_episode <= "
            f"{BRUTE_FORCE_MAX_SLOTS}, got {env.grid.steps_per_episode}"
        )
    plan = env.episode_plan(modes, start)
    steps = env.grid.steps_per_episode
    dt = env.grid.dt_hours
    prices = env.prices.values
    slice_prices = prices[start:plan.end]
    result = OracleSchedule(start=start, modes=dict(plan.modes))

    for params in env.sa_params:
        bits = np.zeros(steps, dtype=np.int8)
        for event in plan.sa_events[params.appliance_id]:
            p = brute_force_shiftable(prices, event.t_a, event.t_b - 1,
                                      params.duration_steps,
                                      params.rated_power_kw, dt)
            bits[p.start - start:p.start - start + params.duration_steps] = 1
        power = bits * params.rated_power_kw
        result.appliances[params.appliance_id] = ApplianceSchedule(
            params.appliance_id, plan.modes[params.appliance_id], bits, power,
            schedule_cost(slice_prices, power, dt))

    outdoor = env.weather.values[start:plan.end]
    if plan.modes[HVAC_ID] == PreferenceMode.MODE0:
        hplan = hvac_default_schedule(slice_prices, outdoor, env.hvac_params,
                                      plan.hvac_band, dt)
    else:
        hplan = brute_force_hvac(slice_prices, outdoor, env.hvac_params,
                                 plan.hvac_band, dt)
    result.appliances[HVAC_ID] = ApplianceSchedule(
        HVAC_ID, plan.modes[HVAC_ID], np.asarray(hplan.sequence, dtype=np.int8),
        hplan.power_kw, hplan.cost)

    ev = env.ev_params
    bits = np.zeros(steps, dtype=np.int8)
    required = ev_required_steps(ev.soc_min, ev, dt)
    for event in plan.ev_events:
        p = brute_force_ev(prices, event.t_arr, event.t_dep - 1, required,
                           ev.charge_power_kw, dt)
        for s in p.slots:
            bits[s - start] = 1
    power = bits * ev.charge_power_kw
    result.appliances[ev.appliance_id] = ApplianceSchedule(
        ev.appliance_id, plan.modes[ev.appliance_id], bits, power,
        schedule_cost(slice_prices, power, dt))
    return result
