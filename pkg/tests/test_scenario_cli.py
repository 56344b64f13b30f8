"""Scenario files, the synthetic generator, and the command line.

CLI tests call main(argv) in-process and assert on exit codes and the files
each command leaves behind. One session-scoped workspace carries a generated
3-day scenario and a 2-episode checkpoint through the command tests.
"""

import csv
from datetime import datetime

import numpy as np
import pytest

from hemslab.appliances import PreferenceMode
from hemslab.cli import main as cli_main
from hemslab.errors import ConfigError, SchemaError
from hemslab.neural import AdamState, init_network, save_checkpoint
from hemslab.scenario import load_scenario
from hemslab.synth import generate_scenario
from hemslab.timeseries import (
    ApplianceEvent,
    TimeGrid,
    write_events_csv,
    write_price_csv,
    write_weather_csv,
)

M0, M1, M2 = PreferenceMode.MODE0, PreferenceMode.MODE1, PreferenceMode.MODE2

BASE_SECTIONS = {
    "scenario": "name = t\nseed = 1",
    "files": "prices = {d}/prices.csv\nweather = {d}/weather.csv\nevents = {d}/events.csv",
    "grid": "origin = 2021-06-01T00:00:00",
    "hvac": "",
    "ev": "battery_kwh = 3.4",
    "appliance:DW": "rated_power_kw = 2.0\nduration_steps = 3",
}


@pytest.fixture()
def data_dir(tmp_path):
    grid = TimeGrid(origin=datetime(2021, 6, 1), step_minutes=15,
                    steps_per_episode=192)
    d = tmp_path / "data"
    d.mkdir()
    write_price_csv(d / "prices.csv", grid, np.full(192, 0.1))
    write_weather_csv(d / "weather.csv", grid, np.full(192, 24.0))
    write_events_csv(d / "events.csv", [ApplianceEvent("DW", 4)])
    return d


def make_ini(tmp_path, data_dir, **sections):
    parts = dict(BASE_SECTIONS)
    parts.update(sections)
    chunks = []
    for name, body in parts.items():
        if body is None:
            continue
        chunks.append(f"[{name}]\n" + body.format(d=data_dir) + "\n")
    path = tmp_path / "s.ini"
    path.write_text("\n".join(chunks))
    return path


class TestScenarioLoading:
    def test_generated_scenario_fields(self, scenario):
        assert scenario.name == "synth-11"
        assert scenario.seed == 11
        assert scenario.holdout_days == 2
        assert scenario.grid.steps_per_episode == 192
        assert len(scenario.prices) == 8 * 96
        assert len(scenario.weather) == 8 * 96
        assert [p.appliance_id for p in scenario.shiftables] == ["DISHWASHER", "WASHER"]
        assert scenario.shiftables[0].duration_steps == 4
        assert scenario.ev.battery_kwh == 46.0
        assert scenario.hvac.r_c_per_kw == 3.0
        assert scenario.hvac.c_kwh_per_c == 1.2
        assert scenario.training.episodes == 1500
        assert scenario.mode_policy == "sample"
        assert scenario.output_dir is not None
        assert scenario.appliance_ids == ("DISHWASHER", "WASHER", "HVAC", "EV")

    def test_split_starts(self, scenario):
        starts = scenario.episode_starts()
        assert starts == list(range(0, 577, 96))
        train, holdout = scenario.split_starts()
        assert train == starts[:-2]
        assert holdout == [480, 576]

    def test_minimal_ini_defaults(self, tmp_path, data_dir):
        scn = load_scenario(make_ini(tmp_path, data_dir))
        assert scn.name == "t"
        assert scn.holdout_days == 0
        assert scn.penalties.zeta_sa == -0.1
        assert scn.penalties.zeta_comfort == -5.0
        assert scn.norm.temp_max_c == 45.0
        assert scn.hvac.q_max_kw == 14.0
        assert scn.training.episodes == 1500
        assert scn.training.seed == 1        # [scenario] seed feeds training
        assert scn.episode_starts() == [0]
        env = scn.build_environment()
        assert env.observation_size == 14    # one shiftable
        train, holdout = scn.split_starts()
        assert (train, holdout) == ([0], [])

    def test_duration_hours_conversion(self, tmp_path, data_dir):
        ini = make_ini(tmp_path, data_dir,
                       **{"appliance:DW": "rated_power_kw = 2.0\nduration_hours = 1.5"})
        assert load_scenario(ini).shiftables[0].duration_steps == 6

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_scenario(tmp_path / "nope.ini")

    def test_missing_required_section(self, tmp_path, data_dir):
        with pytest.raises(ConfigError, match="missing required section"):
            load_scenario(make_ini(tmp_path, data_dir, ev=None))

    def test_bad_origin(self, tmp_path, data_dir):
        ini = make_ini(tmp_path, data_dir, grid="origin = yesterday")
        with pytest.raises(ConfigError, match="ISO-8601"):
            load_scenario(ini)

    def test_bad_number_names_section_and_key(self, tmp_path, data_dir):
        ini = make_ini(tmp_path, data_dir, hvac="cop = fast")
        with pytest.raises(ConfigError, match=r"\[hvac\] cop: expected a number"):
            load_scenario(ini)

    def test_bad_integer(self, tmp_path, data_dir):
        ini = make_ini(tmp_path, data_dir, scenario="name = t\nseed = pi")
        with pytest.raises(ConfigError, match="expected an integer"):
            load_scenario(ini)

    def test_duration_given_twice_or_not_at_all(self, tmp_path, data_dir):
        both = "rated_power_kw = 2.0\nduration_steps = 3\nduration_hours = 1.0"
        with pytest.raises(ConfigError, match="exactly one"):
            load_scenario(make_ini(tmp_path, data_dir, **{"appliance:DW": both}))
        with pytest.raises(ConfigError, match="exactly one"):
            load_scenario(make_ini(tmp_path, data_dir,
                                   **{"appliance:DW": "rated_power_kw = 2.0"}))

    def test_no_appliance_sections(self, tmp_path, data_dir):
        with pytest.raises(ConfigError, match="no \\[appliance:ID\\] sections"):
            load_scenario(make_ini(tmp_path, data_dir, **{"appliance:DW": None}))

    def test_negative_holdout(self, tmp_path, data_dir):
        ini = make_ini(tmp_path, data_dir, data="holdout_days = -1")
        with pytest.raises(ConfigError, match="holdout_days"):
            load_scenario(ini)

    def test_holdout_eats_all_days(self, tmp_path, data_dir):
        ini = make_ini(tmp_path, data_dir, data="holdout_days = 1")
        scn = load_scenario(ini)      # one day of data, all of it held out
        with pytest.raises(ConfigError, match="no training days"):
            scn.split_starts()

    def test_fixed_mode_policy(self, tmp_path, data_dir):
        ini = make_ini(tmp_path, data_dir,
                       modes="policy = fixed\nDW = 1\nHVAC = 0\nEV = 2")
        scn = load_scenario(ini)
        assert scn.mode_policy == {"DW": M1, "HVAC": M0, "EV": M2}

    def test_fixed_mode_policy_missing_appliance(self, tmp_path, data_dir):
        ini = make_ini(tmp_path, data_dir, modes="policy = fixed\nDW = 1")
        with pytest.raises(ConfigError, match="missing required key"):
            load_scenario(ini)

    def test_mode_out_of_range(self, tmp_path, data_dir):
        ini = make_ini(tmp_path, data_dir,
                       modes="policy = fixed\nDW = 5\nHVAC = 0\nEV = 2")
        with pytest.raises(ConfigError, match="mode must be 0, 1, or 2"):
            load_scenario(ini)

    def test_unknown_mode_policy(self, tmp_path, data_dir):
        ini = make_ini(tmp_path, data_dir, modes="policy = random")
        with pytest.raises(ConfigError, match="sample.*fixed"):
            load_scenario(ini)

    def test_windows_section_overrides(self, tmp_path, data_dir):
        ini = make_ini(tmp_path, data_dir,
                       windows="sa_mode1_hours = 6\nsa_mode2_hours = 18")
        scn = load_scenario(ini)
        assert scn.windows.sa_window_hours[M1] == 6.0
        assert scn.windows.sa_window_hours[M2] == 18.0
        # untouched knobs keep their defaults
        assert scn.windows.hvac_deadband_c[M2] == 2.0

    def test_windows_nesting_validated(self, tmp_path, data_dir):
        ini = make_ini(tmp_path, data_dir,
                       windows="sa_mode1_hours = 24\nsa_mode2_hours = 12")
        with pytest.raises(ConfigError, match="widen"):
            load_scenario(ini)

    def test_event_for_appliance_not_in_roster(self, tmp_path, data_dir):
        ini = make_ini(tmp_path, data_dir,
                       **{"appliance:DW": None,
                          "appliance:OTHER": "rated_power_kw = 1.0\nduration_steps = 2"})
        with pytest.raises(SchemaError, match="unknown appliance id"):
            load_scenario(ini)


class TestSynth:
    def test_deterministic_bytes(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        generate_scenario(a, days=3, holdout_days=1, seed=5)
        generate_scenario(b, days=3, holdout_days=1, seed=5)
        for f in ("scenario.ini", "prices.csv", "weather.csv", "events.csv"):
            assert (a / f).read_bytes() == (b / f).read_bytes(), f

    def test_seed_changes_data(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        generate_scenario(a, days=3, holdout_days=1, seed=5)
        generate_scenario(b, days=3, holdout_days=1, seed=6)
        assert (a / "prices.csv").read_bytes() != (b / "prices.csv").read_bytes()

    def test_generated_data_properties(self, tmp_path):
        ini = generate_scenario(tmp_path / "s", days=4, holdout_days=1, seed=9,
                                episodes=7)
        scn = load_scenario(ini)
        assert scn.name == "synth-9"
        assert len(scn.prices) == 4 * 96
        assert scn.training.episodes == 7
        assert np.all(scn.prices.values >= 0.02)
        assert np.all(scn.weather.values <= 36.0)
        # one event per schedulable appliance per day
        assert len(scn.events) == 3 * 4
        per_day = {a: scn.events.for_appliance(a) for a in ("DISHWASHER", "WASHER", "EV")}
        for a, steps in per_day.items():
            assert len(steps) == 4
            hours = {(s % 96) / 4 for s in steps}
            assert len(hours) == 1          # same slot every day
            lo, hi = (16, 18) if a == "EV" else (21, 23)
            assert all(lo <= h < hi + 1 for h in hours)

    def test_name_override(self, tmp_path):
        ini = generate_scenario(tmp_path / "s", days=3, holdout_days=0,
                                seed=2, name="bench")
        scn = load_scenario(ini)
        assert scn.name == "bench"

    def test_scenario_trains_and_schedules(self, tmp_path):
        # the generated bundle must be directly usable end to end
        scn = load_scenario(generate_scenario(tmp_path / "s", days=3,
                                              holdout_days=1, seed=5))
        env = scn.build_environment()
        env.reset(0, {a: M2 for a in env.appliance_ids})
        done = False
        while not done:
            _, _, done, _ = env.step(0)
        from hemslab.oracle import oracle_schedule
        sched = oracle_schedule(env, {a: M2 for a in env.appliance_ids}, 0)
        assert sched.total_cost > 0
        assert sched.hvac_exact


@pytest.fixture(scope="session")
def cli_ws(tmp_path_factory):
    """Scenario plus trained checkpoint shared by the command tests."""
    ws = tmp_path_factory.mktemp("cliws")
    scn = ws / "scn"
    rc = cli_main(["synth", "--out", str(scn), "--days", "3",
                   "--holdout-days", "1", "--seed", "3"])
    assert rc == 0
    out = ws / "run_a"
    rc = cli_main(["train", "--config", str(scn / "scenario.ini"),
                   "--episodes", "2", "--modes", "m2", "--out", str(out)])
    assert rc == 0
    return {"ws": ws, "ini": scn / "scenario.ini",
            "checkpoint": out / "checkpoint.bin", "out": out}


class TestCliSynth:
    def test_prints_ini_path_and_writes_files(self, tmp_path, capsys):
        rc = cli_main(["synth", "--out", str(tmp_path / "scn"),
                       "--days", "3", "--holdout-days", "1", "--seed", "3"])
        assert rc == 0
        printed = capsys.readouterr().out.strip()
        assert printed.endswith("scenario.ini")
        for f in ("scenario.ini", "prices.csv", "weather.csv", "events.csv"):
            assert (tmp_path / "scn" / f).exists()


class TestCliTrain:
    def test_outputs(self, cli_ws):
        out = cli_ws["out"]
        assert (out / "checkpoint.bin").exists()
        curve = (out / "curve.csv").read_text().splitlines()
        assert curve[0] == "episode,epsilon,cum_reward,loss_mean"
        assert len(curve) == 3               # header + 2 episodes
        manifest = dict(line.split("=", 1)
                        for line in (out / "manifest.txt").read_text().splitlines())
        assert manifest["episodes"] == "2"
        assert manifest["modes"] == "m2"
        assert manifest["roster"] == "DISHWASHER,WASHER,HVAC,EV"
        assert manifest["backend"] in ("cython", "python")
        assert manifest["n_actions"] == "16"

    def test_rerun_is_byte_identical(self, cli_ws, tmp_path):
        out_b = tmp_path / "run_b"
        rc = cli_main(["train", "--config", str(cli_ws["ini"]),
                       "--episodes", "2", "--modes", "m2", "--out", str(out_b)])
        assert rc == 0
        for f in ("curve.csv", "checkpoint.bin", "manifest.txt"):
            assert (out_b / f).read_bytes() == (cli_ws["out"] / f).read_bytes(), f

    def test_missing_config_exits_2(self, tmp_path):
        assert cli_main(["train", "--config", str(tmp_path / "missing.ini")]) == 2


class TestCliEvaluate:
    def test_writes_costs_trace_oracle(self, cli_ws, tmp_path):
        out = tmp_path / "eval"
        rc = cli_main(["evaluate", "--config", str(cli_ws["ini"]),
                       "--checkpoint", str(cli_ws["checkpoint"]),
                       "--modes", "m2", "--out", str(out)])
        assert rc == 0
        for f in ("trace.csv", "oracle.csv", "costs.csv"):
            assert (out / f).exists()
        with open(out / "costs.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["appliance_id", "mode", "agent_cost", "oracle_cost"]
        assert [r[0] for r in rows[1:]] == ["DISHWASHER", "WASHER", "HVAC", "EV", "TOTAL"]
        total = rows[-1]
        assert float(total[2]) >= float(total[3]) > 0   # agent >= oracle

    def test_mode0_agent_equals_oracle(self, cli_ws, tmp_path):
        # no flexibility: every appliance is forced, so the two columns match
        # float for float
        out = tmp_path / "eval0"
        rc = cli_main(["evaluate", "--config", str(cli_ws["ini"]),
                       "--checkpoint", str(cli_ws["checkpoint"]),
                       "--modes", "m0", "--out", str(out)])
        assert rc == 0
        with open(out / "costs.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        for r in rows[1:]:
            assert r[2] == r[3], r

    def test_incompatible_checkpoint_exits_3(self, cli_ws, tmp_path):
        net = init_network(5, 4, 8, 8, seed=0)
        bad = tmp_path / "bad.bin"
        save_checkpoint(bad, net, AdamState.for_network(net, lr=1e-3))
        rc = cli_main(["evaluate", "--config", str(cli_ws["ini"]),
                       "--checkpoint", str(bad), "--modes", "m2",
                       "--out", str(tmp_path / "e")])
        assert rc == 3

    def test_missing_checkpoint_exits_2(self, cli_ws, tmp_path):
        rc = cli_main(["evaluate", "--config", str(cli_ws["ini"]),
                       "--checkpoint", str(tmp_path / "nope.bin"),
                       "--modes", "m2", "--out", str(tmp_path / "e")])
        assert rc == 2

    def test_infeasible_band_exits_4(self, cli_ws, tmp_path):
        # same data, HVAC gutted to 0.05 kW: Mode 2 cannot hold the band
        weak = cli_ws["ini"].parent / "scenario-weak.ini"
        weak.write_text(cli_ws["ini"].read_text()
                        .replace("q_max_kw = 14.0", "q_max_kw = 0.05"))
        rc = cli_main(["evaluate", "--config", str(weak),
                       "--checkpoint", str(cli_ws["checkpoint"]),
                       "--modes", "m2", "--out", str(tmp_path / "e")])
        assert rc == 4

    def test_hemslab_out_env_var(self, cli_ws, tmp_path, monkeypatch):
        target = tmp_path / "envout"
        monkeypatch.setenv("HEMSLAB_OUT", str(target))
        rc = cli_main(["evaluate", "--config", str(cli_ws["ini"]),
                       "--checkpoint", str(cli_ws["checkpoint"]),
                       "--modes", "m2"])
        assert rc == 0
        assert (target / "costs.csv").exists()

    def test_out_flag_beats_env_var(self, cli_ws, tmp_path, monkeypatch):
        monkeypatch.setenv("HEMSLAB_OUT", str(tmp_path / "ignored"))
        out = tmp_path / "flag"
        rc = cli_main(["evaluate", "--config", str(cli_ws["ini"]),
                       "--checkpoint", str(cli_ws["checkpoint"]),
                       "--modes", "m2", "--out", str(out)])
        assert rc == 0
        assert (out / "costs.csv").exists()
        assert not (tmp_path / "ignored").exists()


class TestCliCompare:
    def test_compare_csv(self, cli_ws, tmp_path):
        out = tmp_path / "cmp"
        rc = cli_main(["compare", "--config", str(cli_ws["ini"]),
                       "--checkpoint", str(cli_ws["checkpoint"]),
                       "--modes", "m2", "--out", str(out)])
        assert rc == 0
        with open(out / "compare.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["episode", "start", "modes", "agent_cost",
                           "oracle_cost", "gap", "agent_seconds", "oracle_seconds"]
        assert len(rows) == 2                # one held-out day
        assert rows[1][1] == "96"
        assert rows[1][2] == "DISHWASHER=2;EV=2;HVAC=2;WASHER=2"
        assert np.isfinite(float(rows[1][5]))

    def test_no_holdout_exits_2(self, cli_ws, tmp_path):
        rc = cli_main(["synth", "--out", str(tmp_path / "nh"), "--days", "2",
                       "--holdout-days", "0", "--seed", "3"])
        assert rc == 0
        rc = cli_main(["compare", "--config", str(tmp_path / "nh" / "scenario.ini"),
                       "--checkpoint", str(cli_ws["checkpoint"]),
                       "--out", str(tmp_path / "c")])
        assert rc == 2
