import json
import math

import numpy as np
import pytest

from zeitlin.cli import (
    ConfigError,
    config_from_dict,
    load_config,
    main,
    run_bench,
    run_blobs,
    run_basis_check,
    run_convergence,
    run_simulate,
)
from zeitlin.states import SpectralFactorization, load_checkpoint


def base_config(tmp_path, **overrides):
    cfg = {
        "schema": 1,
        "scenario": {"kind": "random-spectrum", "seed": 3, "spectrum_range": [0.3, 2.0]},
        "N": 8,
        "r": 8,
        "dt": 0.02,
        "T": 0.1,
        "integrator": "iso2",
        "fixed_point": {"tol": 1e-13, "max_iters": 200},
        "diag_every": 1,
        "output_dir": str(tmp_path / "out"),
    }
    cfg.update(overrides)
    return cfg


def write_config(tmp_path, name="cfg.json", **overrides):
    path = tmp_path / name
    path.write_text(json.dumps(base_config(tmp_path, **overrides)))
    return path


def read_csv(path):
    lines = path.read_text().strip().split("\n")
    return lines[0].split(","), [line.split(",") for line in lines[1:]]


def test_config_validation_errors(tmp_path):
    with pytest.raises(ConfigError):
        config_from_dict({"schema": 99})
    with pytest.raises(ConfigError):
        config_from_dict(base_config(tmp_path, integrator="rk5"))
    with pytest.raises(ConfigError):
        config_from_dict(base_config(tmp_path, dt=-1.0))
    with pytest.raises(ConfigError):
        config_from_dict(base_config(tmp_path, r=99))
    with pytest.raises(ConfigError):
        config_from_dict(base_config(tmp_path, n_trunc=8))
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_single_step_run_yields_two_rows(tmp_path):
    cfg = config_from_dict(base_config(tmp_path, dt=0.1, T=0.1, N=4, r=4))
    res = run_simulate(cfg)
    header, rows = read_csv(res.csv_path)
    assert header[:3] == ["time", "H", "H_norm"]
    assert len(rows) == 2
    assert float(rows[0][0]) == 0.0
    assert float(rows[1][0]) == pytest.approx(0.1)


def test_simulate_determinism_excluding_wall(tmp_path):
    cfg1 = config_from_dict(base_config(tmp_path, output_dir=str(tmp_path / "a")))
    cfg2 = config_from_dict(base_config(tmp_path, output_dir=str(tmp_path / "b")))
    res1 = run_simulate(cfg1)
    res2 = run_simulate(cfg2)
    head1, rows1 = read_csv(res1.csv_path)
    head2, rows2 = read_csv(res2.csv_path)
    assert head1 == head2
    wall = head1.index("wall_ms")
    for a, b in zip(rows1, rows2):
        assert a[:wall] == b[:wall]  # byte-identical numeric columns
    # checkpoints bit-identical as well
    w1, _ = load_checkpoint(res1.checkpoint_path)
    w2, _ = load_checkpoint(res2.checkpoint_path)
    assert w1.tobytes() == w2.tobytes()


@pytest.mark.filterwarnings("ignore::zeitlin.states.DegenerateSpectrumWarning")
def test_simulate_all_integrators_and_checkpoints(tmp_path):
    for name in ("iso2", "rkmk1", "rkmk2", "midpoint", "strang"):
        cfg = config_from_dict(
            base_config(tmp_path, integrator=name, r=4, output_dir=str(tmp_path / name))
        )
        res = run_simulate(cfg)
        state, header = load_checkpoint(res.checkpoint_path)
        if name == "iso2":
            assert header["kind"] == "dense"
        else:
            assert header["kind"] == "factored"
            assert isinstance(state, SpectralFactorization)
        manifest = json.loads((res.output_dir / "manifest.json").read_text())
        assert manifest["command"] == "simulate"
        assert "content_hash" in manifest


def test_simulate_reference_error_column(tmp_path):
    cfg = config_from_dict(base_config(tmp_path, output_dir=str(tmp_path / "ref_run")))
    res = run_simulate(cfg)
    cfg2 = config_from_dict(
        base_config(
            tmp_path,
            output_dir=str(tmp_path / "cmp_run"),
            reference=str(res.checkpoint_path),
        )
    )
    res2 = run_simulate(cfg2)
    _, rows = read_csv(res2.csv_path)
    assert rows[-1][-2] != ""  # frob_err present on the final row
    assert float(rows[-1][-2]) == pytest.approx(0.0, abs=1e-12)


def test_simulate_snapshots(tmp_path):
    cfg = config_from_dict(base_config(tmp_path, N=6, r=6))
    res = run_simulate(cfg, snapshot_times=[0.0, 0.06])
    snaps = sorted(res.output_dir.glob("field_*.bin"))
    assert len(snaps) == 2
    with open(snaps[1], "rb") as fh:
        header = json.loads(fh.readline())
        payload = np.frombuffer(fh.read(), dtype="<f8")
    assert header["n_theta"] * header["n_phi"] == payload.size
    assert header["time"] == pytest.approx(0.06)
    assert np.isfinite(payload).all()


def test_convergence_stationary_reports_nan_slope(tmp_path):
    cfg = config_from_dict(
        base_config(
            tmp_path,
            scenario={"kind": "random-spectrum", "seed": 1, "basis": "identity",
                      "spectrum_range": [0.3, 2.0]},
            T=0.08,
        )
    )
    res = run_convergence(cfg, dts=[0.02, 0.01, 0.005], integrators=["iso2"])
    assert math.isnan(res.orders["iso2"])
    for row in res.rows:
        assert row["error"] < 1e-11


def test_convergence_orders_small_case(tmp_path):
    cfg = config_from_dict(base_config(tmp_path, T=0.2))
    res = run_convergence(cfg, dts=[0.02, 0.01, 0.005], integrators=["iso2", "rkmk1"])
    assert 1.7 < res.orders["iso2"] < 2.3
    assert 0.7 < res.orders["rkmk1"] < 1.3
    assert res.reference_path.exists()
    # reference is cached and reused
    res2 = run_convergence(cfg, dts=[0.02, 0.01, 0.005], integrators=["iso2"])
    assert res2.reference_path == res.reference_path


def test_convergence_input_validation(tmp_path):
    cfg = config_from_dict(base_config(tmp_path))
    with pytest.raises(ConfigError):
        run_convergence(cfg, dts=[0.02, 0.01])
    with pytest.raises(ConfigError):
        run_convergence(cfg, dts=[0.02, 0.013, 0.005])
    with pytest.raises(ConfigError):
        run_convergence(cfg, dts=[0.02, 0.01, 0.005], integrators=["nope"])


def test_bench_plumbing():
    rep = run_bench("stream", [16, 32, 64], reps=1)
    assert rep.kind == "stream"
    assert len(rep.runtimes) == 3
    assert np.isfinite(rep.slope)
    assert 0.0 <= rep.r_squared <= 1.0
    with pytest.raises(ConfigError):
        run_bench("nope", [16, 32])
    with pytest.raises(ConfigError):
        run_bench("stream", [16])


def test_blobs_table(tmp_path):
    cfg = config_from_dict(
        base_config(
            tmp_path,
            scenario={"kind": "vortex-blobs", "seed": 7},
            N=16,
            r=4,
            dt=0.02,
            T=0.1,
            diag_every=1,
        )
    )
    res = run_blobs(cfg)
    assert set(res.table.keys()) == {"zeitlin_iso2", "rec_fixed_core", "rec_timedep_core"}
    header, rows = read_csv(res.table_path)
    assert header == ["metric", "zeitlin_iso2", "rec_fixed_core", "rec_timedep_core"]
    metrics = [r[0] for r in rows]
    assert metrics == [
        "frobenius_error_vs_reference",
        "hamiltonian_drift_normalized",
        "casimir_drift_max",
        "runtime_s",
    ]
    assert res.table["rec_fixed_core"]["casimir_drift_max"] == 0.0
    with pytest.raises(ConfigError):
        run_blobs(config_from_dict(base_config(tmp_path)))


def test_rank_two_blob_schemes_within_combined_error(tmp_path):
    # rank-exact initial data: the dense and factored schemes solve the same
    # flow, so their distance is bounded by the sum of their own dt^2 errors
    from zeitlin.cli import compute_reference
    from zeitlin.diagnostics import frobenius_error
    from pathlib import Path

    common = dict(
        scenario={"kind": "vortex-blobs", "seed": 5, "blob_count": 2},
        N=16, r=2, dt=0.02, T=0.2,
    )
    res_dense = run_simulate(config_from_dict(
        base_config(tmp_path, integrator="iso2", output_dir=str(tmp_path / "d"), **common)))
    res_low = run_simulate(config_from_dict(
        base_config(tmp_path, integrator="rkmk2", output_dir=str(tmp_path / "l"), **common)))
    cfg = config_from_dict(base_config(tmp_path, **common))
    ref, _ = compute_reference(cfg.scenario, 16, 0.2, 0.0002, Path(tmp_path / "ref"))
    err_dense = frobenius_error(res_dense.final_state, ref)
    err_low = frobenius_error(res_low.final_state, ref)
    gap = frobenius_error(res_low.final_state, res_dense.final_state)
    assert gap <= (err_dense + err_low) * (1 + 1e-9)
    assert err_dense < 1e-3 and err_low < 1e-3  # both in the dt^2 regime


def test_convergence_accepts_reference_checkpoint(tmp_path):
    cfg = config_from_dict(base_config(tmp_path, T=0.2))
    first = run_convergence(cfg, dts=[0.02, 0.01, 0.005], integrators=["iso2"])
    import dataclasses

    cfg2 = dataclasses.replace(
        cfg, reference=str(first.reference_path), output_dir=str(tmp_path / "again")
    )
    second = run_convergence(cfg2, dts=[0.02, 0.01, 0.005], integrators=["iso2"])
    assert second.reference_path == first.reference_path
    assert 1.7 < second.orders["iso2"] < 2.3


def test_basis_check(capsys):
    assert run_basis_check([4, 6])
    out = capsys.readouterr().out
    assert "N=4" in out and "ok" in out


def test_main_exit_codes(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"schema": 99}))
    assert main(["simulate", "--config", str(bad)]) == 2
    missing = tmp_path / "missing.json"
    assert main(["simulate", "--config", str(missing)]) == 4
    good = write_config(tmp_path, N=4, r=4, dt=0.05, T=0.1)
    assert main(["simulate", "--config", str(good)]) == 0
    assert main(["basis-check", "--sizes", "4"]) == 0


def test_main_bench_subcommand(tmp_path, capsys):
    assert main(["bench", "--kind", "stream", "--sizes", "16,32,64", "--reps", "1",
                 "--output", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    data = json.loads(out)
    assert data["kind"] == "stream"
    assert (tmp_path / "bench_stream.json").exists()
