import json
import math

import pytest

import cli
import settings as app_settings
from road_graph import generate_grid, save_network


@pytest.fixture(autouse=True)
def isolated(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv(app_settings.SEED_ENV_VAR, raising=False)
    monkeypatch.delenv(app_settings.SETTINGS_ENV_VAR, raising=False)
    return tmp_path


@pytest.fixture
def line_file(tmp_path):
    assert cli.main(["gen", "line", "--n", "5", "--out", "line.json"]) == 0
    return str(tmp_path / "line.json")


@pytest.fixture
def grid_file(tmp_path):
    path = tmp_path / "grid.json"
    save_network(generate_grid(3, 3), path)
    return str(path)


def test_gen_line_to_stdout(capsys):
    assert cli.main(["gen", "line", "--n", "5"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert [node["id"] for node in data["intersections"]] == [1, 2, 3, 4, 5]
    assert data["kind"] == "line"


def test_gen_writes_manifest(tmp_path):
    assert cli.main(["gen", "grid", "--rows", "2", "--cols", "3", "--out", "g.json"]) == 0
    manifest = json.loads((tmp_path / "g.json.manifest.json").read_text())
    assert manifest["command"] == "gen"
    assert manifest["outputs"] == ["g.json"]
    assert manifest["version"] == app_settings.TOOL_VERSION
    assert manifest["params"]["rows"] == 2


def test_gen_poisson_is_reproducible(tmp_path):
    args = ["gen", "poisson", "--area", "3000x3000", "--intensity", "1e-5", "--range", "700", "--seed", "7"]
    assert cli.main(args + ["--out", "a.json"]) == 0
    assert cli.main(args + ["--out", "a2.json"]) == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "a2.json").read_bytes()


def test_seed_falls_back_to_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(app_settings.SEED_ENV_VAR, "7")
    args = ["gen", "poisson", "--area", "3000x3000", "--intensity", "1e-5", "--range", "700"]
    assert cli.main(args + ["--out", "env.json"]) == 0
    monkeypatch.delenv(app_settings.SEED_ENV_VAR)
    assert cli.main(args + ["--seed", "7", "--out", "flag.json"]) == 0
    assert (tmp_path / "env.json").read_bytes() == (tmp_path / "flag.json").read_bytes()


def test_missing_seed_is_a_usage_error():
    with pytest.raises(SystemExit) as excinfo:
        cli.main(["gen", "poisson", "--area", "3000x3000", "--intensity", "1e-5"])
    assert excinfo.value.code == 2


@pytest.mark.parametrize("argv", [["gen", "hexagon"], ["gen", "line", "--bogus"], ["place"], ["cost", "--n", "x"]])
def test_usage_errors_exit_2(argv):
    with pytest.raises(SystemExit) as excinfo:
        cli.main(argv)
    assert excinfo.value.code == 2


@pytest.mark.parametrize("command", ["gen", "place", "weber", "cost", "sim", "replay"])
def test_help_exits_zero(command):
    with pytest.raises(SystemExit) as excinfo:
        cli.main([command, "--help"])
    assert excinfo.value.code == 0


def test_place_line_closed_form(line_file, capsys):
    assert cli.main(["place", "--network", line_file, "--mz", "1", "--oracle"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["sites"] == [3]
    assert data["value"] == pytest.approx(1.2)
    assert data["avg_hops_exact"] == "6/5"
    assert data["oracle_avg_hops"] == "6/5"


def test_place_more_zones_than_intersections(line_file, capsys):
    assert cli.main(["place", "--network", line_file, "--mz", "9"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["sites"] == [1, 2, 3, 4, 5]
    assert data["value"] == 0


def test_place_ga_on_grid(grid_file, tmp_path):
    argv = ["place", "--network", grid_file, "--mz", "2", "--seed", "3", "--maxgen", "20", "--oracle",
            "--trace", "trace.csv", "--out", "p.json"]
    assert cli.main(argv) == 0
    data = json.loads((tmp_path / "p.json").read_text())
    assert len(data["sites"]) == 2
    assert data["value"] == pytest.approx(data["oracle_value"])
    trace = (tmp_path / "trace.csv").read_text().splitlines()
    assert trace[0] == "generation,best,mean"
    assert len(trace) == 21
    manifest = json.loads((tmp_path / "p.json.manifest.json").read_text())
    assert manifest["outputs"] == ["p.json", "trace.csv"]
    assert manifest["seed"] == 3


def test_place_is_byte_deterministic(grid_file, tmp_path):
    argv = ["place", "--network", grid_file, "--mz", "2", "--seed", "11", "--maxgen", "10", "--method", "ga"]
    assert cli.main(argv + ["--out", "one.json"]) == 0
    assert cli.main(argv + ["--out", "two.json"]) == 0
    assert (tmp_path / "one.json").read_bytes() == (tmp_path / "two.json").read_bytes()


def test_place_linear_needs_a_line(grid_file, capsys):
    assert cli.main(["place", "--network", grid_file, "--mz", "2", "--method", "linear"]) == 3
    assert capsys.readouterr().err.startswith("error:")


def test_place_normal_on_line(line_file, capsys):
    assert cli.main(["place", "--network", line_file, "--mz", "2", "--method", "normal", "--seed", "1"]) == 0
    assert json.loads(capsys.readouterr().out)["sites"] == [2, 4]


def test_place_missing_network_file(capsys):
    assert cli.main(["place", "--network", "nope.json", "--mz", "1"]) == 3
    err = capsys.readouterr().err
    assert err.startswith("error:") and len(err.strip().splitlines()) == 1


def test_weber_triangle(tmp_path):
    (tmp_path / "tri.csv").write_text("x,y\n0,0\n1,0\n0.5,0.8660254037844386\n")
    assert cli.main(["weber", "--points", "tri.csv", "--out", "w.json"]) == 0
    assert cli.main(["weber", "--points", "tri.csv", "--mode", "smoothed", "--epsilon", "1e-6", "--out", "s.json"]) == 0
    exact = json.loads((tmp_path / "w.json").read_text())["solution"]
    smooth = json.loads((tmp_path / "s.json").read_text())["solution"]
    assert exact["location"] == pytest.approx([0.5, math.sqrt(3) / 6], abs=1e-6)
    assert math.dist(exact["location"], smooth["location"]) <= 1e-3


def test_weber_empty_points(tmp_path, capsys):
    (tmp_path / "empty.csv").write_text("")
    assert cli.main(["weber", "--points", "empty.csv"]) == 3
    assert "no points" in capsys.readouterr().err


def test_weber_non_convergence_exit_code(tmp_path):
    (tmp_path / "pts.csv").write_text("0,0\n10,0\n3,7\n9,9\n")
    code = cli.main(["weber", "--points", "pts.csv", "--max-iters", "1", "--step-tol", "1e-15", "--out", "w.json"])
    assert code == 4
    assert json.loads((tmp_path / "w.json").read_text())["solution"]["converged"] is False


def test_cost_optimal_allocation(tmp_path):
    argv = ["cost", "--n", "3", "--sites", "1", "--method", "optimal", "--alpha", "2", "--oracle", "--out", "c.csv"]
    assert cli.main(argv) == 0
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "link_index,length,weight,method,cost"
    lengths = [float(line.split(",")[1]) for line in lines[1:]]
    assert lengths == pytest.approx([1 / 3, 2 / 3])


def test_cost_defaults_to_optimal_sites(capsys):
    assert cli.main(["cost", "--n", "5", "--method", "uniform"]) == 0
    rows = capsys.readouterr().out.splitlines()[1:]
    assert [row.split(",")[2] for row in rows] == ["1", "2", "2", "1"]


def test_cost_oracle_only_for_optimal(capsys):
    assert cli.main(["cost", "--n", "5", "--method", "paper", "--oracle"]) == 3


def test_cost_unsupported_exponent(capsys):
    assert cli.main(["cost", "--n", "5", "--method", "optimal", "--alpha", "1"]) == 3
    assert "alpha" in capsys.readouterr().err


def test_sim_outputs_and_determinism(grid_file, tmp_path):
    argv = ["sim", "--network", grid_file, "--mz", "1,2", "--seed", "5", "--vehicles", "30", "--maxgen", "5",
            "--pop", "8", "--max-j", "2"]
    assert cli.main(argv + ["--out", "a.csv", "--json", "a.json", "--svg-dir", "charts"]) == 0
    assert cli.main(argv + ["--out", "b.csv", "--json", "b.json"]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    rows = (tmp_path / "a.csv").read_text().splitlines()
    assert rows[0] == "mz,j,ts,entropy_mean,anonymity_mean"
    assert len(rows) == 1 + 2 * 2
    summary = json.loads((tmp_path / "a.json").read_text())
    assert set(summary) == {"1", "2"}
    for name in ("ts_vs_j.svg", "entropy_vs_mz.svg"):
        assert (tmp_path / "charts" / name).read_text().startswith("<svg")
    manifest = json.loads((tmp_path / "a.csv.manifest.json").read_text())
    assert len(manifest["outputs"]) == 4


def test_sim_rejects_zero_zones(grid_file):
    assert cli.main(["sim", "--network", grid_file, "--mz", "0", "--seed", "1"]) == 3


def test_load_settings_merges_user_file(tmp_path):
    path = tmp_path / "mixzone_settings.json"
    path.write_text(json.dumps({"ga_population_size": 40, "sim_mean_speed": 10, "ga_maxgen": "many", "colour": 1}))
    loaded = cli.load_settings()
    assert loaded["ga_population_size"] == 40
    assert loaded["sim_mean_speed"] == 10.0
    assert loaded["ga_maxgen"] == app_settings.DEFAULT_GA_MAXGEN
    assert "colour" not in loaded


def test_load_settings_from_environment_path(tmp_path, monkeypatch):
    path = tmp_path / "custom.json"
    path.write_text(json.dumps({"sim_vehicles": 12}))
    monkeypatch.setenv(app_settings.SETTINGS_ENV_VAR, str(path))
    assert cli.load_settings()["sim_vehicles"] == 12


def test_broken_settings_fall_back_to_defaults(tmp_path):
    (tmp_path / "mixzone_settings.json").write_text("{oops")
    assert cli.load_settings() == cli.default_settings()


def test_settings_change_cli_defaults(tmp_path, capsys):
    (tmp_path / "mixzone_settings.json").write_text(json.dumps({"link_length": 2.5}))
    assert cli.main(["gen", "line", "--n", "3"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert [link["length"] for link in data["links"]] == [2.5, 2.5]


def test_replay_reproduces_outputs(grid_file, tmp_path):
    argv = ["place", "--network", grid_file, "--mz", "2", "--seed", "9", "--maxgen", "10", "--trace", "t.csv",
            "--out", "p.json"]
    assert cli.main(argv) == 0
    placement = (tmp_path / "p.json").read_bytes()
    trace = (tmp_path / "t.csv").read_bytes()
    manifest = json.loads((tmp_path / "p.json.manifest.json").read_text())
    assert manifest["argv"] == argv
    (tmp_path / "p.json").unlink()
    (tmp_path / "t.csv").unlink()
    assert cli.main(["replay", "p.json.manifest.json"]) == 0
    assert (tmp_path / "p.json").read_bytes() == placement
    assert (tmp_path / "t.csv").read_bytes() == trace


def test_replay_pins_an_environment_seed(tmp_path, monkeypatch):
    monkeypatch.setenv(app_settings.SEED_ENV_VAR, "7")
    argv = ["gen", "poisson", "--area", "3000x3000", "--intensity", "1e-5", "--range", "700", "--out", "n.json"]
    assert cli.main(argv) == 0
    network = (tmp_path / "n.json").read_bytes()
    monkeypatch.setenv(app_settings.SEED_ENV_VAR, "8")
    assert cli.main(["replay", "n.json.manifest.json"]) == 0
    assert (tmp_path / "n.json").read_bytes() == network


def test_replay_refuses_changed_settings(grid_file, tmp_path, capsys):
    assert cli.main(["place", "--network", grid_file, "--mz", "2", "--seed", "1", "--out", "p.json"]) == 0
    (tmp_path / "mixzone_settings.json").write_text(json.dumps({"ga_maxgen": 3}))
    assert cli.main(["replay", "p.json.manifest.json"]) == 3
    assert "maxgen" in capsys.readouterr().err


def test_replay_rejects_a_broken_manifest(tmp_path, capsys):
    (tmp_path / "bad.manifest.json").write_text(json.dumps({"command": "gen"}))
    assert cli.main(["replay", "bad.manifest.json"]) == 3
    assert capsys.readouterr().err.startswith("error:")


def test_sim_monte_carlo_tracking(grid_file, tmp_path):
    argv = ["sim", "--network", grid_file, "--mz", "2", "--seed", "5", "--vehicles", "30", "--maxgen", "5",
            "--pop", "8", "--max-j", "2", "--tracking", "monte_carlo", "--mc-trials", "500", "--json", "mc.json"]
    assert cli.main(argv) == 0
    report = json.loads((tmp_path / "mc.json").read_text())["2"]
    assert report["tracking"] == "monte_carlo"
    assert report["ts_curve"]["2"] <= report["ts_curve"]["1"]
    assert report["within_capacity"] is True
    assert report["admitted_phi"] == report["demand_phi"]
