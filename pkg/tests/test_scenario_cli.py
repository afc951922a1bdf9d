import json
from pathlib import Path

import pytest

from replisim.cli import main
from replisim.config import ConfigError, SimConfig
from replisim.scenario import (
    apply_overrides,
    bundled_scenarios,
    config_from_toml,
    config_hash,
    load_scenario,
)

TINY_SCENARIO = """\
# tiny test scenario
[network]
nodes = 50
area = [90.0, 90.0]
radio_range = 20.0
duration = 400.0
warmup = 100.0
seed = 7

[replication]
storage_time = 50.0
initial_replicas = 5

[demand.phase.1]
start = 0.0
rate = 0.02

[output]
chi2_nodal = true
"""


@pytest.fixture
def tiny_path(tmp_path):
    path = tmp_path / "tiny.toml"
    path.write_text(TINY_SCENARIO)
    return path


class TestScenarioParsing:
    def test_defaults_fill_missing_sections(self):
        cfg = config_from_toml(TINY_SCENARIO)
        assert cfg.network.nodes == 50
        assert cfg.access.mode == "perfect"  # untouched default
        assert cfg.replication.storage_time == 50.0
        assert cfg.phases[0].rate == 0.02

    def test_unknown_key_named(self):
        with pytest.raises(ConfigError, match="access.warp"):
            config_from_toml("[access]\nwarp = 3\n")

    def test_unknown_section_named(self):
        with pytest.raises(ConfigError, match="quantum"):
            config_from_toml("[quantum]\nx = 1\n")

    def test_unknown_phase_key_named(self):
        with pytest.raises(ConfigError, match="demand.phase.1.foo"):
            config_from_toml("[demand.phase.1]\nfoo = 1\n")

    def test_invalid_toml_rejected(self):
        with pytest.raises(ConfigError, match="TOML"):
            config_from_toml("not = [valid\n")

    def test_validation_names_offending_key(self):
        with pytest.raises(ConfigError, match="access.max_hops"):
            config_from_toml("[access]\nmax_hops = 0\n")
        with pytest.raises(ConfigError, match="access.sectors"):
            config_from_toml("[access]\nsectors = 0\n")
        with pytest.raises(ConfigError, match="rate"):
            config_from_toml("[demand.phase.1]\nrate = -0.5\n")
        with pytest.raises(ConfigError, match="area"):
            config_from_toml("[network]\narea = [0.0, 10.0]\n")

    def test_phases_must_be_ordered(self):
        text = "[demand.phase.1]\nstart = 100.0\n[demand.phase.2]\nstart = 50.0\n"
        with pytest.raises(ConfigError, match="increase"):
            config_from_toml(text)

    def test_region_must_fit_area(self):
        text = "[demand.phase.1]\nregion = [0.0, 0.0, 500.0, 50.0]\n"
        with pytest.raises(ConfigError, match="region"):
            config_from_toml(text)

    def test_load_from_file(self, tiny_path):
        cfg = load_scenario(tiny_path)
        assert cfg.network.seed == 7


class TestOverrides:
    def test_numeric_bool_string(self):
        cfg = config_from_toml(TINY_SCENARIO)
        apply_overrides(
            cfg,
            [
                "replication.ref_workload=12",
                "replication.adapt=false",
                "access.mode=flood",
                "network.duration=500.0",
            ],
        )
        assert cfg.replication.ref_workload == 12.0
        assert cfg.replication.adapt is False
        assert cfg.access.mode == "flood"
        assert cfg.network.duration == 500.0

    def test_phase_override(self):
        cfg = config_from_toml(TINY_SCENARIO)
        apply_overrides(cfg, ["demand.phase.1.rate=0.05"])
        assert cfg.phases[0].rate == 0.05

    def test_unknown_override_rejected(self):
        cfg = config_from_toml(TINY_SCENARIO)
        with pytest.raises(ConfigError, match="bogus"):
            apply_overrides(cfg, ["network.bogus=1"])
        with pytest.raises(ConfigError, match="form"):
            apply_overrides(cfg, ["network.nodes"])

    def test_override_revalidates(self):
        cfg = config_from_toml(TINY_SCENARIO)
        with pytest.raises(ConfigError, match="max_hops"):
            apply_overrides(cfg, ["access.max_hops=0"])

    def test_hash_tracks_content(self):
        a = config_from_toml(TINY_SCENARIO)
        b = config_from_toml(TINY_SCENARIO)
        assert config_hash(a) == config_hash(b)
        apply_overrides(b, ["network.seed=8"])
        assert config_hash(a) != config_hash(b)


class TestBundledScenarios:
    def test_twelve_scenarios_present(self):
        names = set(bundled_scenarios())
        assert names == {
            "fig1_static_chi",
            "fig2_mobile_chi",
            "fig3_hopcdf",
            "fig5_access",
            "fig5b_scan_timeout",
            "fig6_scan_angle",
            "fig7_bootstrap",
            "fig8_repdrop",
            "fig9_workload",
            "tab2_convergence",
            "fig10_time_demand",
            "fig11_space_demand",
        }

    def test_all_bundled_scenarios_parse(self):
        from replisim.scenario import bundled_scenario_text

        for name in bundled_scenarios():
            cfg = config_from_toml(bundled_scenario_text(name))
            assert isinstance(cfg, SimConfig)


class TestCmdRun:
    def test_writes_artifacts(self, tiny_path, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(
            [
                "run",
                "--scenario", str(tiny_path),
                "--out", str(out),
                "--override", "replication.ref_workload=10",
            ]
        )
        assert code == 0
        for name in (
            "snapshots.csv",
            "access.csv",
            "workload.csv",
            "decisions.csv",
            "convergence.json",
            "manifest.json",
        ):
            assert (out / name).exists(), name
        assert (out / "runs" / "7" / "queries.csv").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["overrides"] == ["replication.ref_workload=10"]
        assert manifest["seeds"] == [7]
        assert manifest["scenario"] == "tiny"

    def test_missing_scenario_is_config_error(self, tmp_path):
        assert main(["run", "--scenario", "no_such.toml", "--out", str(tmp_path / "o")]) == 2

    def test_bad_override_is_config_error(self, tiny_path, tmp_path):
        code = main(
            ["run", "--scenario", str(tiny_path), "--out", str(tmp_path / "o"),
             "--override", "access.bogus=1"]
        )
        assert code == 2

    def test_env_seed_override(self, tiny_path, tmp_path, monkeypatch):
        monkeypatch.setenv("REPLISIM_SEED", "99")
        out = tmp_path / "out"
        assert main(["run", "--scenario", str(tiny_path), "--out", str(out)]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["seeds"] == [99]

    def test_rerun_is_byte_identical(self, tiny_path, tmp_path):
        out1 = tmp_path / "a"
        out2 = tmp_path / "b"
        for out in (out1, out2):
            assert main(
                ["run", "--scenario", str(tiny_path), "--out", str(out), "--seeds", "2"]
            ) == 0
        for rel in (
            "snapshots.csv", "access.csv", "workload.csv", "decisions.csv",
            "convergence.json", "runs/7/queries.csv", "runs/8/snapshots.csv",
        ):
            assert (out1 / rel).read_bytes() == (out2 / rel).read_bytes(), rel

    def test_multi_seed_and_jobs(self, tiny_path, tmp_path):
        out = tmp_path / "out"
        code = main(
            ["run", "--scenario", str(tiny_path), "--out", str(out),
             "--seeds", "2", "--seed-base", "3", "--jobs", "2"]
        )
        assert code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["seeds"] == [3, 4]


CHAIN_GRAPH = """\
3 20.0
0 0.0 0.0
1 15.0 0.0
2 30.0 0.0
0 1
1 2
"""


class TestCmdSolve:
    def test_kmedian_chain(self, tmp_path, capsys):
        path = tmp_path / "chain.graph"
        path.write_text(CHAIN_GRAPH)
        assert main(["solve", str(path), "--problem", "kmedian", "--k", "1"]) == 0
        data = json.loads(capsys.readouterr().out)
        assert data["facilities"] == [1]
        assert data["cost"] == 2.0
        assert data["assignment"] == {"0": 1, "1": 1, "2": 1}

    def test_k_equals_n_is_free(self, tmp_path, capsys):
        path = tmp_path / "chain.graph"
        path.write_text(CHAIN_GRAPH)
        assert main(["solve", str(path), "--problem", "kmedian", "--k", "3"]) == 0
        assert json.loads(capsys.readouterr().out)["cost"] == 0.0

    def test_ufl_zero_costs_opens_all(self, tmp_path, capsys):
        path = tmp_path / "chain.graph"
        path.write_text(CHAIN_GRAPH + "cost 0 0.0\ncost 1 0.0\ncost 2 0.0\n")
        assert main(["solve", str(path), "--problem", "ufl"]) == 0
        data = json.loads(capsys.readouterr().out)
        assert data["facilities"] == [0, 1, 2]
        assert data["cost"] == 0.0

    def test_exact_matches_brute_force(self, tmp_path, capsys):
        path = tmp_path / "chain.graph"
        path.write_text(CHAIN_GRAPH)
        assert main(["solve", str(path), "--k", "1", "--exact"]) == 0
        assert json.loads(capsys.readouterr().out)["facilities"] == [1]

    def test_parse_error_exit_2(self, tmp_path):
        path = tmp_path / "bad.graph"
        path.write_text("garbage\n")
        assert main(["solve", str(path), "--k", "1"]) == 2

    def test_missing_file_exit_2(self, tmp_path):
        assert main(["solve", str(tmp_path / "none.graph"), "--k", "1"]) == 2

    def test_missing_k_exit_2(self, tmp_path):
        path = tmp_path / "chain.graph"
        path.write_text(CHAIN_GRAPH)
        assert main(["solve", str(path), "--problem", "kmedian"]) == 2

    def test_brute_force_cap_exit_3(self, tmp_path):
        n = 16
        lines = [f"{n} 200.0"] + [f"{i} {i}.0 0.0" for i in range(n)] + [
            f"{i} {i + 1}" for i in range(n - 1)
        ]
        path = tmp_path / "big.graph"
        path.write_text("\n".join(lines) + "\n")
        assert main(["solve", str(path), "--k", "2", "--exact"]) == 3


class TestCmdStats:
    def test_verify_and_figdata(self, tiny_path, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["run", "--scenario", str(tiny_path), "--out", str(out)]) == 0
        assert main(["stats", str(out)]) == 0
        fig = out / "figdata"
        assert (fig / "replicas.dat").exists()
        assert (fig / "chi2.dat").exists()
        assert (fig / "access.dat").exists()
        assert (fig / "repdrop.dat").exists()

    def test_missing_artifacts_exit_2(self, tmp_path):
        assert main(["stats", str(tmp_path)]) == 2

    def test_tampered_metrics_detected(self, tiny_path, tmp_path):
        out = tmp_path / "out"
        assert main(["run", "--scenario", str(tiny_path), "--out", str(out)]) == 0
        access = out / "access.csv"
        text = access.read_text().splitlines()
        header = text[0].split(",")
        row = text[1].split(",")
        idx = header.index("solving_ratio")
        if row[idx]:
            row[idx] = "0.123456"
            access.write_text("\n".join([text[0], ",".join(row)] + text[2:]) + "\n")
            assert main(["stats", str(out)]) == 1

    def test_no_demand_reports_absent_ratio(self, tmp_path):
        scenario = tmp_path / "quiet.toml"
        scenario.write_text(
            TINY_SCENARIO.replace("rate = 0.02", "rate = 0.0")
        )
        out = tmp_path / "out"
        assert main(["run", "--scenario", str(scenario), "--out", str(out)]) == 0
        rows = (out / "access.csv").read_text().splitlines()
        header = rows[0].split(",")
        first = rows[1].split(",")
        assert first[header.index("solving_ratio")] == ""
        assert main(["stats", str(out)]) == 0


class TestScenarioList:
    def test_lists_bundled(self, capsys):
        assert main(["scenario-list"]) == 0
        out = capsys.readouterr().out
        assert "fig7_bootstrap" in out
        assert "tab2_convergence" in out


class TestBundledByName:
    def test_run_accepts_bundled_name(self, tmp_path):
        out = tmp_path / "out"
        code = main(
            ["run", "--scenario", "fig7_bootstrap", "--out", str(out),
             "--override", "network.nodes=40",
             "--override", "network.area=[80.0, 80.0]",
             "--override", "network.duration=300.0",
             "--override", "network.warmup=100.0",
             "--override", "replication.storage_time=50.0"]
        )
        assert code == 0
        assert (out / "manifest.json").exists()
