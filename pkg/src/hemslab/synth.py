"""Synthetic scenario generator.

Produces a self-contained scenario directory: price and weather series on
the 15-minute grid, daily appliance events, and a scenario.ini wired to the
generated files.

Shapes are chosen so the scheduling problem has real structure:

  * Prices follow a time-of-use tariff with a critical evening peak: flat
    cheap nights, sharp morning and pre-peak ramps, gently declining day
    segments, a per-day level scale, and small step noise, floored at
    0.02 USD/kWh. Flat nights make placement inside the valley almost
    free; the gentle daytime decline means unnecessary consumption always
    costs more than deferring it; the sharp ramps concentrate the value
    of acting early into short spans. Together these let a policy with
    only local price context approach the clairvoyant oracle, while
    shifting load into the night still pays off heavily. Step noise is
    kept small for the same reason - future noise is unlearnable, and the
    oracle would otherwise collect it as an irreducible edge.
  * Outdoor temperature is a flat-topped midday heat plateau near 34 C
    over a warm 23.6 C floor, capped at 36 C, which keeps the HVAC
    unclamped for the shipped R and C (3.0 C/kW, 1.2 kWh/C): one on-step
    from a band edge always reaches the setpoint, so exact search over
    indoor temperatures stays exact. The hot hours fall in the declining
    price shoulder, ahead of the evening price peak, so the bulk of the
    cooling bill is unavoidable load that any in-band policy pays about
    equally.
  * Each appliance fires once per day at a fixed per-scenario hour, so
    same-appliance scheduling windows (up to 24 h) never overlap.
"""

from __future__ import annotations

from datetime import datetime
from pathlib import Path

import numpy as np

from .timeseries import (
    ApplianceEvent,
    TimeGrid,
    write_events_csv,
    write_price_csv,
    write_weather_csv,
)

PRICE_FLOOR = 0.02
# TOU tariff shape: hour-of-day breakpoints and USD/kWh levels, interpolated
# linearly. Night valley, 05-07 morning ramp, long gently declining
# shoulder, 19:00 pre-peak ramp, late critical peak, steep falloff ending
# 22:45. The steep falloff keeps mid-evening prices above the flexible
# units' window means, so deferring into the valley is rewarded at every
# step. The peak sits late so the hours a forward-looking policy treats as
# pre-peak (its price window reaches 4 h ahead) fall on falling outdoor
# temperature, and the whole hot midday lies in one unbroken decline where
# every unnecessary thermal pull costs more than deferring it.
PRICE_TOU_HOURS = (0.0, 5.0, 7.0, 19.0, 19.5, 22.0, 22.75, 24.0)
PRICE_TOU_USD = (0.052, 0.052, 0.105, 0.085, 0.135, 0.133, 0.053, 0.052)
WEATHER_CAP_C = 36.0

# appliance_id -> (rated power kW, cycle steps, daily hour range)
# post-dinner arrivals: the cheap overnight valley is a short, learnable
# wait away, and running at arrival (the Mode 0 default) still meets the
# falling evening ramp rather than the peak
SHIFTABLE_ROSTER = {
    "DISHWASHER": (0.8, 4, (21, 23)),
    "WASHER": (0.5, 6, (21, 23)),
}
EV_HOUR_RANGE = (16, 18)


def _hours_of_day(grid: TimeGrid, n_steps: int) -> np.ndarray:
    return (np.arange(n_steps) % grid.steps_per_day) * grid.dt_hours


def synth_prices(grid: TimeGrid, days: int, rng: np.random.Generator) -> np.ndarray:
    """TOU tariff with critical evening peak, per-day scale, mild noise."""
    n = days * grid.steps_per_day
    h = _hours_of_day(grid, n)
    base = np.interp(h, PRICE_TOU_HOURS, PRICE_TOU_USD)
    scale = np.clip(rng.normal(1.0, 0.04, size=days), 0.85, 1.2)
    prices = base * np.repeat(scale, grid.steps_per_day) + rng.normal(0.0, 0.0015, size=n)
    return np.maximum(prices, PRICE_FLOOR)


# Weather shape: hour-of-day breakpoints and C levels, interpolated linearly.
# A flat-topped midday heat plateau over a warm night floor. The floor sits
# just above the cooling setpoint, so cooling is always mildly needed (the
# unit never flips into heating and holding the setpoint costs pennies at
# night); the heat arrives and leaves fast, so the mild-heat edge hours,
# where policies disagree most about whether to run, are short; and the air
# has cooled off well before the evening price peak, so riding through the
# peak is cheap for any in-band policy.
WEATHER_HOURS = (0.0, 10.25, 11.5, 15.5, 16.75, 24.0)
WEATHER_C = (23.6, 23.7, 35.3, 35.3, 23.8, 23.6)


def synth_weather(grid: TimeGrid, days: int, rng: np.random.Generator) -> np.ndarray:
    """Flat-topped midday heat plateau near 34 C over a 23.6 C floor."""
    n = days * grid.steps_per_day
    h = _hours_of_day(grid, n)
    base = np.interp(h, WEATHER_HOURS, WEATHER_C)
    offset = np.repeat(rng.normal(0.0, 0.5, size=days), grid.steps_per_day)
    temps = base + offset + rng.normal(0.0, 0.15, size=n)
    return np.minimum(temps, WEATHER_CAP_C)


def synth_events(grid: TimeGrid, days: int, rng: np.random.Generator) -> list[ApplianceEvent]:
    """One event per appliance per day at a fixed per-scenario hour.

    The hour is drawn once and reused every day: daily repeats are then a
    whole day apart, which no scheduling window (at most 24 h) can overlap.
    """
    steps_per_hour = 60 // grid.step_minutes
    events: list[ApplianceEvent] = []
    hours = {a: int(rng.integers(lo, hi + 1))
             for a, (_, _, (lo, hi)) in SHIFTABLE_ROSTER.items()}
    hours["EV"] = int(rng.integers(EV_HOUR_RANGE[0], EV_HOUR_RANGE[1] + 1))
    for day in range(days):
        for appliance_id, hour in hours.items():
            events.append(ApplianceEvent(appliance_id,
                                         day * grid.steps_per_day + hour * steps_per_hour))
    return events


_SCENARIO_TEMPLATE = """\
[scenario]
name = {name}
seed = {seed}

[files]
prices = prices.csv
weather = weather.csv
events = events.csv

[grid]
origin = {origin}
step_minutes = {step_minutes}
steps_per_episode = {steps_per_episode}

[data]
holdout_days = {holdout_days}

[hvac]
r_c_per_kw = 3.0
c_kwh_per_c = 1.2
cop = 3.5
q_max_kw = 14.0
t_set_c = 23.0

[ev]
id = EV
charge_power_kw = 3.4
battery_kwh = 46.0
soc_min = 0.2
soc_max = 0.9
efficiency = 1.0

{appliance_sections}
[training]
episodes = {episodes}

[output]
dir = {output_dir}
"""


def generate_scenario(
    out_dir: str | Path,
    *,
    days: int = 20,
    holdout_days: int = 12,
    seed: int = 7,
    name: str | None = None,
    episodes: int = 1500,
    origin: datetime = datetime(2021, 6, 1),
) -> Path:
    """Write prices.csv, weather.csv, events.csv, and scenario.ini.

    Returns the path of the written scenario.ini."""
    if days < 2:
        raise ValueError("need at least 2 days for one full episode")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    grid = TimeGrid(origin=origin, step_minutes=15, steps_per_episode=192)
    streams = np.random.SeedSequence(seed).spawn(3)
    prices = synth_prices(grid, days, np.random.default_rng(streams[0]))
    weather = synth_weather(grid, days, np.random.default_rng(streams[1]))
    events = synth_events(grid, days, np.random.default_rng(streams[2]))
    write_price_csv(out_dir / "prices.csv", grid, prices)
    write_weather_csv(out_dir / "weather.csv", grid, weather)
    write_events_csv(out_dir / "events.csv", events)

    sections = []
    for appliance_id, (power, duration, _) in sorted(SHIFTABLE_ROSTER.items()):
        sections.append(f"[appliance:{appliance_id}]\n"
                        f"rated_power_kw = {power}\n"
                        f"duration_steps = {duration}\n")
    name = name if name is not None else f"synth-{seed}"
    ini = out_dir / "scenario.ini"
    ini.write_text(_SCENARIO_TEMPLATE.format(
        name=name,
        seed=seed,
        origin=origin.isoformat(),
        step_minutes=grid.step_minutes,
        steps_per_episode=grid.steps_per_episode,
        holdout_days=holdout_days,
        appliance_sections="\n".join(sections),
        episodes=episodes,
        output_dir=f"runs/{name}",
    ))
    return ini
