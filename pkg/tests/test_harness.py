import json
from pathlib import Path

import numpy as np
import pytest

from bsq2d import harness
from bsq2d.cli import main
from bsq2d.config import ConfigError, ExperimentConfig, load_config, parse_config
from bsq2d.diagonal import PhysicalState
from bsq2d.initial import gaussian_field, make_state
from bsq2d.io import (
    FORMAT_VERSION,
    HEADER,
    MAGIC,
    SnapshotError,
    read_csv,
    read_snapshot,
    snapshot_size,
    write_csv,
    write_snapshot,
)
from bsq2d.spectral import Grid2D, remove_nyquist

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

SMALL = {
    "model": {"epsilon": 0.1},
    "grid": {"nx": 32, "ny": 32, "Lx": "8pi", "Ly": "8pi"},
    "solver": {"dt": 0.05, "t_end": 0.5, "diagnostics_stride": 2, "snapshot_stride": 5},
    "initial": {
        "family": "gaussian",
        "amplitude": 0.5,
        "width": 2.0,
        "velocity": "potential",
        "potential": {"amplitude": 0.5, "width": 2.0},
    },
    "experiment": {"kind": "simulate"},
}


def small(**sections) -> dict:
    data = json.loads(json.dumps(SMALL))
    for key, value in sections.items():
        if isinstance(value, dict) and isinstance(data.get(key), dict):
            data[key].update(value)
        else:
            data[key] = value
    return data


def write_toml(path: Path, text: str) -> Path:
    path.write_text(text)
    return path


# --- configuration -----------------------------------------------------------------


@pytest.mark.parametrize("name", ["simulate", "lifespan", "estimates", "convergence"])
def test_shipped_configs_parse(name):
    cfg = load_config(CONFIGS / f"{name}.toml")
    assert cfg.experiment.kind == name


def test_defaults_and_pi_lengths():
    cfg = parse_config('[grid]\nLx = "16pi"\nLy = "0.5 pi"\n')
    assert cfg.grid.Lx == pytest.approx(16 * np.pi) and cfg.grid.Ly == pytest.approx(0.5 * np.pi)
    assert cfg.experiment.kind == "simulate"
    assert cfg.model.is_scaled_kdv


@pytest.mark.parametrize(
    "text",
    [
        "[grid]\nnx = 64\nunknown = 1\n",
        '[grid]\nLx = "sixteen"\n',
        "[experiment]\nepsilons = [0.1, 0.2, 0.05]\n",
        '[experiment]\nkind = "lifespan"\nepsilons = [0.1, 0.2, 0.05]\n',
        '[experiment]\nkind = "lifespan"\nepsilons = [0.2, 0.1]\n',
        '[experiment]\nkind = "convergence"\ndts = [0.1, 0.04, 0.02]\n',
        '[experiment]\nkind = "convergence"\nnxs = [32, 48]\n',
        '[experiment]\nkind = "estimates"\nnames = ["nothing"]\n',
        '[experiment]\nkind = "other"\n',
        '[initial]\nvelocity = "potential"\n',
        "[grid\n",
    ],
)
def test_invalid_configs_rejected(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_resolved_json_is_canonical_and_round_trips():
    cfg = parse_config(small())
    again = ExperimentConfig.model_validate_json(cfg.resolved_json())
    assert again == cfg and again.resolved_json() == cfg.resolved_json()


def test_seed_environment_override(tmp_path, monkeypatch):
    path = write_toml(tmp_path / "c.toml", "seed = 3\n")
    assert load_config(path).seed == 3
    monkeypatch.setenv("BSQ2D_SEED", "11")
    assert load_config(path).seed == 11
    monkeypatch.setenv("BSQ2D_SEED", "eleven")
    with pytest.raises(ConfigError):
        load_config(path)


def test_missing_config_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/config.toml")


def test_out_and_jobs_resolution(monkeypatch):
    monkeypatch.delenv("BSQ2D_OUT", raising=False)
    monkeypatch.delenv("BSQ2D_JOBS", raising=False)
    assert harness.resolve_out(None) == Path("bsq2d-out")
    assert harness.resolve_jobs(None) == 1
    monkeypatch.setenv("BSQ2D_OUT", "/tmp/elsewhere")
    monkeypatch.setenv("BSQ2D_JOBS", "3")
    assert harness.resolve_out(None) == Path("/tmp/elsewhere")
    assert harness.resolve_out("here") == Path("here")
    assert harness.resolve_jobs(None) == 3 and harness.resolve_jobs(2) == 2


# --- snapshots and CSV -------------------------------------------------------------


def sample_state() -> PhysicalState:
    g = Grid2D(16, 8, 5.0, 3.0)
    return make_state(gaussian_field(g, 0.7, 1.0), "potential", gaussian_field(g, 0.3, 1.2))


def test_snapshot_round_trip_is_byte_exact(tmp_path):
    u = sample_state()
    a = write_snapshot(tmp_path / "a.bsq2", u, 0.125, 2.5)
    snap = read_snapshot(a)
    assert snap.epsilon == 0.125 and snap.time == 2.5
    assert (snap.grid.nx, snap.grid.ny, snap.grid.Lx, snap.grid.Ly) == (16, 8, 5.0, 3.0)
    for x, y in zip(snap.arrays, u.to_physical()):
        assert x.tobytes() == np.ascontiguousarray(y.real).tobytes()
    b = snap.save(tmp_path / "b.bsq2")
    assert a.read_bytes() == b.read_bytes()
    assert a.stat().st_size == snapshot_size(16, 8) == 48 + 24 * 16 * 8


def test_snapshot_state_reconstructs_fields(tmp_path):
    u = sample_state()
    snap = read_snapshot(write_snapshot(tmp_path / "a.bsq2", u, 0.1, 0.0))
    # real grid values cannot carry the imaginary part of Nyquist modes
    for x, y in zip(snap.state.fields, u.fields):
        assert np.max(np.abs(remove_nyquist(x).coeffs - remove_nyquist(y).coeffs)) < 1e-15


def test_snapshot_header_layout(tmp_path):
    path = write_snapshot(tmp_path / "s.bsq2", sample_state(), 0.1, 0.0)
    magic, version, nx, ny, *_ = HEADER.unpack_from(path.read_bytes())
    assert (magic, version, nx, ny) == (MAGIC, FORMAT_VERSION, 16, 8)


@pytest.mark.parametrize("damage", ["magic", "version", "truncate", "extend", "tiny"])
def test_malformed_snapshots_rejected(tmp_path, damage):
    path = write_snapshot(tmp_path / "s.bsq2", sample_state(), 0.1, 0.0)
    data = bytearray(path.read_bytes())
    if damage == "magic":
        data[:4] = b"XXXX"
    elif damage == "version":
        data[4:8] = (FORMAT_VERSION + 1).to_bytes(4, "little")
    elif damage == "truncate":
        data = data[:-8]
    elif damage == "extend":
        data += b"\0" * 8
    else:
        data = data[:10]
    path.write_bytes(bytes(data))
    with pytest.raises(SnapshotError):
        read_snapshot(path)


def test_csv_round_trip_keeps_metadata_and_full_precision(tmp_path):
    path = write_csv(tmp_path / "t.csv", ["a", "b", "flag"], [(0.1, 1 / 3, True), {"a": 2, "b": None, "flag": False}],
                     {"config": "{}", "version": "x"})
    meta, rows = read_csv(path)
    assert meta == {"config": "{}", "version": "x"}
    assert float(rows[0]["b"]) == 1 / 3
    assert rows[0]["flag"] == "true" and rows[1]["b"] == ""


# --- runs ------------------------------------------------------------------------


def file_bytes(directory: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}


def test_simulate_is_deterministic(tmp_path):
    cfg = parse_config(small(initial={"family": "random_bandlimited", "band": 1.0, "velocity": "unidirectional",
                                      "potential": None}))
    r1 = harness.run_simulate(cfg, tmp_path / "one")
    r2 = harness.run_simulate(cfg, tmp_path / "two")
    assert r1.status == r2.status == harness.EXIT_OK
    one, two = file_bytes(tmp_path / "one"), file_bytes(tmp_path / "two")
    assert one == two
    assert sorted(one) == ["diagnostics.csv", "manifest.json", "snapshot_00000.bsq2", "snapshot_00001.bsq2",
                           "snapshot_00002.bsq2"]
    r3 = harness.run_simulate(cfg.with_seed(5), tmp_path / "three")
    assert r3.status == harness.EXIT_OK
    assert file_bytes(tmp_path / "three")["diagnostics.csv"] != one["diagnostics.csv"]


def test_simulate_outputs_embed_config_and_version(tmp_path):
    cfg = parse_config(small())
    harness.run_simulate(cfg, tmp_path)
    meta, rows = read_csv(tmp_path / "diagnostics.csv")
    assert meta["config"] == cfg.resolved_json()
    assert meta["version"] == harness.code_version()
    assert meta["generator"] == "numpy.random.Philox"
    assert list(rows[0]) == list(harness.DIAGNOSTIC_COLUMNS)
    assert [float(r["t"]) for r in rows] == pytest.approx([0.0, 0.1, 0.2, 0.3, 0.4, 0.5])
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["config"] == json.loads(cfg.resolved_json())
    assert manifest["version"] == harness.code_version()
    assert manifest["snapshots"] == ["snapshot_00000.bsq2", "snapshot_00001.bsq2", "snapshot_00002.bsq2"]


def test_zero_data_gives_zero_diagnostics(tmp_path):
    cfg = parse_config(small(initial={"family": "zero", "velocity": "zero", "potential": None}))
    res = harness.run_simulate(cfg, tmp_path)
    assert res.status == harness.EXIT_OK
    _, rows = read_csv(tmp_path / "diagnostics.csv")
    for row in rows:
        assert all(float(row[c]) == 0.0 for c in harness.DIAGNOSTIC_COLUMNS[1:])


def test_non_kdv_simulation_reports_energy(tmp_path):
    cfg = parse_config(small(model={"a": -0.1, "b": 0.5333333333333333, "c": -0.1, "d": 0.0, "epsilon": 0.1}))
    res = harness.run_simulate(cfg, tmp_path)
    assert res.status == harness.EXIT_OK
    _, rows = read_csv(tmp_path / "diagnostics.csv")
    assert "Y" in rows[0] and float(rows[0]["Y"]) > 0


def test_blow_up_exit_status(tmp_path):
    cfg = parse_config(small(
        model={"epsilon": 1.0}, grid={"Lx": "4pi", "Ly": "4pi"},
        solver={"dt": 0.01, "t_end": 20.0, "diagnostics_stride": 10, "snapshot_stride": 0},
        initial={"amplitude": -60.0, "width": 0.8, "velocity": "zero", "potential": None},
    ))
    res = harness.run_simulate(cfg, tmp_path)
    assert res.status == harness.EXIT_BLOWUP
    assert (tmp_path / "diagnostics.csv").exists()


def lifespan_config(nonlinear: bool) -> ExperimentConfig:
    return parse_config(small(
        grid={"nx": 32, "ny": 8, "Lx": "8pi", "Ly": "0.5pi"},
        solver={"dt": 0.05, "diagnostics_stride": 10, "snapshot_stride": 0, "nonlinear": nonlinear},
        initial={"width_y": float("inf"), "velocity": "unidirectional", "potential": None},
        experiment={"kind": "lifespan", "epsilons": [0.2, 0.1, 0.05], "t_max_coefficient": 1.0},
    ))


def test_linear_lifespan_runs_are_censored_and_inconclusive(tmp_path):
    rep = harness.run_lifespan_scan(lifespan_config(False), tmp_path)
    assert rep.passed is None
    assert all(rep.fitted["censored"]) and not rep.trusted.any()
    assert np.allclose(rep.measured, [5.0, 10.0, 20.0])
    meta, rows = read_csv(tmp_path / "lifespan.csv")
    assert [r["censored"] for r in rows] == ["true"] * 3
    assert "config" in meta and "version" in meta


def test_lifespan_scan_parallel_matches_serial():
    cfg = lifespan_config(True)
    a = harness.run_lifespan_scan(cfg, jobs=1)
    b = harness.run_lifespan_scan(cfg, jobs=2)
    assert np.array_equal(a.measured, b.measured)
    assert a.fitted["small_ratios"] == b.fitted["small_ratios"]


def convergence_config(nonlinear: bool = True, nxs=(32, 64, 128)) -> ExperimentConfig:
    return parse_config(small(
        solver={"t_end": 1.0, "nonlinear": nonlinear},
        experiment={"kind": "convergence", "dts": [0.2, 0.1, 0.05], "nxs": list(nxs)},
    ))


def test_convergence_rates(tmp_path):
    temporal, spatial = harness.run_convergence(convergence_config(), tmp_path)
    assert all(3.8 <= o <= 4.2 for o in temporal.fitted["orders"])
    assert temporal.passed
    errs = spatial.fitted["errors"]
    assert errs[0] / errs[1] >= 1e3
    assert spatial.passed
    assert (tmp_path / "convergence_time.csv").exists() and (tmp_path / "convergence_space.csv").exists()


def test_single_spatial_comparison_is_inconclusive():
    _, spatial = harness.run_convergence(convergence_config(nxs=(32, 64)))
    assert spatial.passed is None


def test_linear_convergence_is_exact_in_time():
    temporal, _ = harness.run_convergence(convergence_config(False))
    assert np.all(temporal.measured < 1e-12)
    assert temporal.passed


def test_state_distance_pads_coarse_spectrum():
    coarse, fine = Grid2D(32, 32, 12.0, 12.0), Grid2D(64, 64, 12.0, 12.0)
    a = make_state(gaussian_field(coarse, 1.0, 1.5))
    b = make_state(gaussian_field(fine, 1.0, 1.5))
    assert harness._state_distance(a, b) == pytest.approx(harness._state_distance(b, a))
    assert harness._state_distance(a, b) < 1e-6


def test_energy_drift_study_orders():
    g = Grid2D(32, 32, 8 * np.pi, 8 * np.pi)
    u0 = make_state(gaussian_field(g, 1.0, 2.0), "potential", gaussian_field(g, 1.0, 2.0))
    rep = harness.energy_drift_study(u0, 0.1, 1.0, [0.2, 0.1, 0.05])
    assert rep.passed and rep.fitted["min_order"] >= 3.8


def test_empty_estimate_list(tmp_path):
    cfg = parse_config({"experiment": {"kind": "estimates", "names": []}})
    assert harness.run_estimates(cfg, tmp_path) == []
    meta, rows = read_csv(tmp_path / "summary.csv")
    assert rows == [] and "config" in meta
    assert main(["estimates", "--config", str(write_toml(tmp_path / "e.toml", '[experiment]\nkind = "estimates"\nnames = []\n')),
                 "--out", str(tmp_path / "cli")]) == harness.EXIT_OK


def test_exponent_estimate_summary(tmp_path):
    cfg = parse_config({"experiment": {"kind": "estimates", "names": ["exponents"]}})
    (rep,) = harness.run_estimates(cfg, tmp_path)
    assert rep.passed
    _, rows = read_csv(tmp_path / "summary.csv")
    assert rows[0]["name"] == "exponents" and rows[0]["passed"] == "true"
    _, table = read_csv(tmp_path / "estimate_exponents.csv")
    assert float(table[0]["measured"]) == pytest.approx((7 + np.sqrt(13)) / 3, abs=1e-12)


def test_check_suite_passes(tmp_path):
    res = harness.run_check(None, tmp_path)
    assert res.status == harness.EXIT_OK
    _, rows = read_csv(tmp_path / "check.csv")
    assert len(rows) == 6 and all(r["passed"] == "true" for r in rows)


# --- command line -------------------------------------------------------------------


def test_cli_simulate_and_check(tmp_path, capsys):
    cfg = write_toml(tmp_path / "s.toml", """
[model]
epsilon = 0.1
[grid]
nx = 16
ny = 16
Lx = "4pi"
Ly = "4pi"
[solver]
dt = 0.1
t_end = 0.2
[initial]
amplitude = 0.2
""")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "run")]) == harness.EXIT_OK
    assert (tmp_path / "run" / "diagnostics.csv").exists()
    assert main(["check", "--out", str(tmp_path / "chk")]) == harness.EXIT_OK
    assert "PASS energy_drift" in capsys.readouterr().out


def test_cli_config_errors(tmp_path):
    bad = write_toml(tmp_path / "bad.toml", "[grid]\nnx = 7\nextra = 1\n")
    assert main(["simulate", "--config", str(bad)]) == harness.EXIT_CONFIG
    assert main(["simulate", "--config", str(tmp_path / "missing.toml")]) == harness.EXIT_CONFIG
    sim = write_toml(tmp_path / "sim.toml", "seed = 1\n")
    assert main(["lifespan", "--config", str(sim)]) == harness.EXIT_CONFIG
    assert main(["simulate", "--config", str(sim), "--seed", "-1"]) == harness.EXIT_CONFIG
    with pytest.raises(SystemExit):
        main(["unknown"])


def test_cli_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("not a directory")
    cfg = write_toml(tmp_path / "s.toml", '[grid]\nnx = 16\nny = 16\n[solver]\ndt = 0.1\nt_end = 0.1\n')
    assert main(["simulate", "--config", str(cfg), "--out", str(blocker / "sub")]) == harness.EXIT_IO


def test_cli_failed_study_exit_status(tmp_path, capsys):
    cfg = write_toml(tmp_path / "c.toml", """
[model]
epsilon = 0.1
[grid]
nx = 16
ny = 16
Lx = "8pi"
Ly = "8pi"
[solver]
t_end = 1.0
[initial]
amplitude = 0.5
velocity = "potential"
[initial.potential]
amplitude = 0.5
width = 2.0
[experiment]
kind = "convergence"
dts = [0.2, 0.1, 0.05]
nxs = [8, 16, 32]
""")
    assert main(["convergence", "--config", str(cfg), "--out", str(tmp_path / "o")]) == harness.EXIT_INVARIANT
    out = capsys.readouterr().out
    assert "PASS convergence_time" in out and "FAIL convergence_space" in out
