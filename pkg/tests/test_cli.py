import csv
import json
import math

import numpy as np
import pytest

from patchvm import Geometry, generate_single_patch, load_patch_map, sweep
from patchvm.analysis import log_grid, read_curve_csv
from patchvm.cli import RunConfig, main


def write_config(tmp_path, name="config.json", **overrides):
    cfg = RunConfig(d_min=1e-7, d_max=1e-3, out=str(tmp_path / "out"))
    for k, v in overrides.items():
        setattr(cfg, k, v)
    path = tmp_path / name
    cfg.save(path)
    return path


def read_rows(path):
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def summary(path):
    return {r["quantity"]: r["value"] for r in read_rows(path)}


# -- config -----------------------------------------------------------------------------------


def test_config_round_trip(tmp_path):
    cfg = RunConfig(R=0.2, Rm=0.01, r0=3.3e-4, v0=0.07, jitter=0.1, n_phi=128, seed=2**63 + 5, n_real=7)
    path = tmp_path / "c.json"
    cfg.save(path)
    back = RunConfig.load(path)
    assert back == cfg
    assert back.config_hash() == cfg.config_hash()


def test_config_hash_ignores_out():
    a = RunConfig(out="x")
    b = RunConfig(out="y")
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != RunConfig(seed=1).config_hash()


def test_config_errors_name_the_field(tmp_path, capsys):
    path = write_config(tmp_path, r0=0.02)
    assert main(["gen", "--config", str(path)]) == 1
    assert "'r0'" in capsys.readouterr().err
    (tmp_path / "bad.json").write_text(json.dumps({"geometry": {"R": 0.15, "Rn": 0.01}}))
    assert main(["gen", "--config", str(tmp_path / "bad.json")]) == 1
    assert "Rn" in capsys.readouterr().err


def test_usage_error_exit_code(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["sweep", "--seed", "abc"])
    assert exc.value.code == 1


# -- gen --------------------------------------------------------------------------------------


def test_gen_same_seed_byte_identical(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert main(["gen", "--config", str(cfg), "--seed", "5", "--out", str(tmp_path / "a")]) == 0
    assert main(["gen", "--config", str(cfg), "--seed", "5", "--out", str(tmp_path / "b")]) == 0
    assert main(["gen", "--config", str(cfg), "--seed", "6", "--out", str(tmp_path / "c")]) == 0
    a = (tmp_path / "a" / "patchmap.json").read_bytes()
    assert a == (tmp_path / "b" / "patchmap.json").read_bytes()
    assert a != (tmp_path / "c" / "patchmap.json").read_bytes()
    assert "patches" in capsys.readouterr().out


def test_gen_r0_too_large(tmp_path):
    cfg = write_config(tmp_path, r0=0.015)
    assert main(["gen", "--config", str(cfg)]) == 1


def test_gen_file_reproduces_sweep(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "out"
    assert main(["gen", "--config", str(cfg), "--seed", "3"]) == 0
    assert main(["sweep", "--config", str(cfg), "--seed", "3", "--map", str(out / "patchmap.json"),
                 "--out", str(tmp_path / "from_file")]) == 0
    assert main(["sweep", "--config", str(cfg), "--seed", "3", "--out", str(tmp_path / "direct")]) == 0
    a = read_curve_csv(tmp_path / "from_file" / "curve.csv")
    b = read_curve_csv(tmp_path / "direct" / "curve.csv")
    for col in ("vm_energy_V", "vm_force_V", "vm_analytic_V"):
        np.testing.assert_array_equal(a[col], b[col])
    m = load_patch_map(out / "patchmap.json")
    assert m.seed == 3


# -- sweep ------------------------------------------------------------------------------------


def test_sweep_uniform_map_constant_columns(tmp_path):
    doc = {"format": "patchvm.patchmap", "version": 1, "geometry": {"R": 0.15, "Rm": 0.015},
           "background": 0.05, "r0_nominal": 5e-4, "v0_nominal": 0.0, "seed": None,
           "disks": {"columns": ["cx", "cy", "radius", "potential"], "rows": []}}
    path = tmp_path / "uniform.json"
    path.write_text(json.dumps(doc))
    cfg = write_config(tmp_path)
    assert main(["sweep", "--config", str(cfg), "--map", str(path)]) == 0
    cols = read_curve_csv(tmp_path / "out" / "curve.csv")
    for col in ("vm_energy_V", "vm_force_V", "vm_analytic_V"):
        np.testing.assert_allclose(cols[col], 0.05, rtol=1e-14)


def test_sweep_single_disk_closed_form(tmp_path):
    cfg = write_config(tmp_path, layout="single", r0=1e-3)
    assert main(["sweep", "--config", str(cfg)]) == 0
    cols = read_curve_csv(tmp_path / "out" / "curve.csv")
    d = cols["d_m"]
    oracle = 0.1 * np.log1p(1e-3**2 / (0.3 * d)) / np.log1p(7.5e-4 / d)
    np.testing.assert_allclose(cols["vm_energy_V"], oracle, rtol=1e-6)


def test_sweep_manifest_and_hash(tmp_path):
    cfg = write_config(tmp_path)
    assert main(["sweep", "--config", str(cfg)]) == 0
    out = tmp_path / "out"
    man = json.loads((out / "manifest_sweep.json").read_text())
    first = (out / "curve.csv").read_text().splitlines()[0]
    assert first == f"# config_hash={man['config_hash']}"
    assert man["version"] and man["seed"] == 0
    assert len(man["validity"]) == len(log_grid(1e-7, 1e-3))
    assert {"pfa_ok", "patch_image_ok", "regime"} <= set(man["validity"][0])


def test_sweep_missing_map(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert main(["sweep", "--config", str(cfg), "--map", str(tmp_path / "nope.json")]) == 1
    assert "not found" in capsys.readouterr().err


# -- ensemble ---------------------------------------------------------------------------------


def test_ensemble_single_realization_empty_std(tmp_path):
    cfg = write_config(tmp_path)
    assert main(["ensemble", "--config", str(cfg), "--n-real", "1"]) == 0
    rows = read_rows(tmp_path / "out" / "ensemble.csv")
    assert all(r["vm_energy_std_V"] == "" and r["vm_force_std_V"] == "" for r in rows)
    assert all(r["vm_energy_mean_V"] != "" for r in rows)
    s = summary(tmp_path / "out" / "ensemble_summary.csv")
    assert s["b_stderr_V_per_efold"] == ""


def test_ensemble_zero_v0(tmp_path):
    cfg = write_config(tmp_path, v0=0.0)
    assert main(["ensemble", "--config", str(cfg), "--n-real", "5"]) == 0
    rows = read_rows(tmp_path / "out" / "ensemble.csv")
    for r in rows:
        for k in ("vm_energy_mean_V", "vm_energy_std_V", "vm_force_mean_V", "diff_mean_V"):
            assert float(r[k]) == 0.0
    fits = read_rows(tmp_path / "out" / "ensemble_fits.csv")
    assert len(fits) == 5 and all(float(f["b_V_per_efold"]) == 0.0 for f in fits)


def test_ensemble_standard_error_scaling(tmp_path):
    # standard error of mean b goes like 1/sqrt(n): quadrupling n halves it
    cfg = write_config(tmp_path, d_min=1e-6, d_max=1e-3)
    se = {}
    for n in (40, 160):
        out = tmp_path / f"n{n}"
        assert main(["ensemble", "--config", str(cfg), "--n-real", str(n), "--out", str(out), "--threads", "4"]) == 0
        se[n] = float(summary(out / "ensemble_summary.csv")["b_stderr_V_per_efold"])
    assert se[160] / se[40] == pytest.approx(0.5, rel=0.3)


# -- fit --------------------------------------------------------------------------------------


def test_fit_exact_synthetic(tmp_path, capsys):
    d = log_grid(1e-7, 1e-4).tolist()
    path = tmp_path / "data.csv"
    path.write_text("d_m,vm_V\n" + "".join(f"{x!r},{0.05 + 0.003 * math.log(x)!r}\n" for x in d))
    assert main(["fit", str(path), "--out", str(tmp_path / "o")]) == 0
    rep = dict(line.split(": ", 1) for line in capsys.readouterr().out.splitlines())
    assert float(rep["a_V"]) == pytest.approx(0.05, abs=1e-12)
    assert float(rep["b_V_per_efold"]) == pytest.approx(0.003, abs=1e-13)
    assert float(rep["b_V_per_decade"]) == pytest.approx(float(rep["b_V_per_efold"]) * math.log(10), rel=1e-15)
    assert float(rep["residual_rms_V"]) < 1e-14
    assert "contact potentials" in rep["caveat"]
    assert (tmp_path / "o" / "fit_report.txt").is_file()


def test_fit_sparse_window(tmp_path, capsys):
    path = tmp_path / "data.csv"
    path.write_text("d_m,vm_V\n" + "".join(f"{x!r},0.1\n" for x in log_grid(1e-7, 1e-4).tolist()))
    assert main(["fit", str(path), "--d-lo", "1e-6", "--d-hi", "2e-6"]) == 2
    assert "need >= 6" in capsys.readouterr().err


def test_fit_curve_csv_variant(tmp_path, capsys):
    cfg = write_config(tmp_path, layout="single", r0=1e-3, d_min=1e-8, d_max=1e-2, points_per_decade=24)
    assert main(["sweep", "--config", str(cfg)]) == 0
    capsys.readouterr()
    curve = tmp_path / "out" / "curve.csv"
    assert main(["fit", str(curve), "--config", str(cfg), "--variant", "force"]) == 0
    rep = dict(line.split(": ", 1) for line in capsys.readouterr().out.splitlines())
    m = generate_single_patch(Geometry(0.15, 0.015), 1e-3, 0.1)
    c = sweep(m, log_grid(1e-8, 1e-2, 24))
    sel = (c.d >= 10 * 1e-6 / 0.3) & (c.d <= 7.5e-5)
    b = np.polyfit(np.log(c.d[sel]), c.vm_force[sel], 1)[0]
    assert float(rep["b_V_per_efold"]) == pytest.approx(b, rel=1e-9)


def test_fit_bad_row(tmp_path, capsys):
    path = tmp_path / "data.csv"
    path.write_text("d_m,vm_V\n1e-6,0.1\n2e-6,x\n")
    assert main(["fit", str(path)]) == 1
    assert "line 3" in capsys.readouterr().err


# -- validate ---------------------------------------------------------------------------------


def test_validate_examples(tmp_path, capsys):
    cfg = write_config(tmp_path, r0=1e-3, d_min=1e-9, d_max=1e-2)
    assert main(["validate", "--config", str(cfg), "--out", str(tmp_path / "v")]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "d_m,pfa_ok,patch_image_ok,regime"
    table = {float(x.split(",")[0]): x.split(",")[1:] for x in lines[1:]}
    by_d = {d: row for d, row in table.items()}
    assert by_d[1e-9][2] == "close"
    assert by_d[1e-2] == ["false", "false", "far"]
    mid = min(by_d, key=lambda d: abs(math.log(d / 1e-4)))
    assert by_d[mid][2] == "intermediate"
    assert (tmp_path / "v" / "validity.csv").read_text().startswith("# config_hash=")
