"""Command-line interface: config handling, artifacts, exit codes."""

import hashlib
import json
import math
import shutil
import subprocess

import numpy as np
import pytest

from glefield.cli import load_config, main


def read(path):
    return path.read_bytes()


def load_json(path):
    return json.loads(path.read_text())


def rehash(config_texts):
    # independent reconstruction of the canonical serialization
    lines = []
    for section in sorted(config_texts):
        lines.append(f"[{section}]")
        for key in sorted(config_texts[section]):
            lines.append(f"{key} = {config_texts[section][key]}")
    text = "\n".join(lines) + "\n"
    return hashlib.sha256(text.encode()).hexdigest()


def test_missing_config_file(tmp_path, capsys):
    out = tmp_path / "k.csv"
    code = main(["kernel", "--config", str(tmp_path / "nope.ini"), "--out", str(out)])
    assert code == 2
    assert f"config file not found: {tmp_path / 'nope.ini'}" in capsys.readouterr().err


def test_unknown_key_is_line_anchored(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[kernel]\nkernel = expsum\nbogus_key = 1\n")
    code = main(["kernel", "--config", str(cfg), "--out", str(tmp_path / "k.csv")])
    assert code == 2
    assert f"{cfg}:3: unknown key 'bogus_key' in [kernel]" in capsys.readouterr().err


def test_unknown_section_is_line_anchored(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[kernel]\nkernel = expsum\n\n[wavelets]\nfoo = 1\n")
    code = main(["kernel", "--config", str(cfg), "--out", str(tmp_path / "k.csv")])
    assert code == 2
    assert f"{cfg}:4: unknown section [wavelets]" in capsys.readouterr().err


def test_untyped_value_is_line_anchored(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[sampler]\nn = many\n")
    code = main(["kernel", "--config", str(cfg), "--out", str(tmp_path / "k.csv")])
    assert code == 2
    assert f"{cfg}:2: 'many' is not an integer" in capsys.readouterr().err


def test_explicit_rule_requires_values(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[weights]\nrule = explicit\n")
    code = main(["kernel", "--config", str(cfg), "--out", str(tmp_path / "k.csv")])
    assert code == 2
    assert "rule = explicit needs weights.values" in capsys.readouterr().err


def test_kernel_csv_and_sidecar(tmp_path):
    out = tmp_path / "kernel.csv"
    assert main(["kernel", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "t,value"
    assert len(lines) == 257
    t0, v0 = lines[1].split(",")
    assert float(t0) == 0.0
    assert float(v0) == 1.0
    sidecar = load_json(tmp_path / "kernel.csv.provenance.json")
    assert sidecar["artifact"] == "kernel.csv"
    assert sidecar["command"] == "kernel"
    assert sidecar["version"]
    assert "rel_tol" in sidecar["tolerances"]
    assert sidecar["config_hash"] == rehash(sidecar["config"])
    assert sidecar["config_hash"] == load_config(None).hash()


def test_spectrum_spot_values(tmp_path):
    out = tmp_path / "spectrum.csv"
    assert main(["spectrum", "--k", "2", "--out", str(out)]) == 0
    rows = np.loadtxt(out, delimiter=",", skiprows=1)
    omega, rho0, k_cos, k_sin = rows[0]
    assert omega == 0.0
    assert rho0 == pytest.approx(1.0 / (16.0 * math.pi), rel=1e-12)
    assert k_cos == 1.0
    assert k_sin == 0.0


def test_sample_mode_is_deterministic(tmp_path):
    args = ["sample-mode", "--dt", "0.125", "--n", "64", "--ensemble", "4",
            "--seed", "9"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert read(a) == read(b)
    sidecar = load_json(tmp_path / "a.csv.provenance.json")
    assert sidecar["method"] == "ce"
    assert sidecar["seed"] == 9
    assert sidecar["clipped_mass"] == 0.0
    assert sidecar["embedding_length"] >= 128


def test_sample_field_thread_count_is_immaterial(tmp_path):
    base = ["sample-field", "--N", "8", "--nx", "5", "--dt", "0.25", "--n", "32",
            "--ensemble", "2", "--seed", "3", "--tail-budget", "1.0"]
    a, b = tmp_path / "f1.csv", tmp_path / "f2.csv"
    assert main(base + ["--threads", "1", "--out", str(a)]) == 0
    assert main(base + ["--threads", "3", "--out", str(b)]) == 0
    assert read(a) == read(b)
    sidecar = load_json(tmp_path / "f1.csv.provenance.json")
    assert sidecar["N"] == 8
    assert sidecar["dynamics"] == "gle"
    assert sidecar["wellposedness"]["convergent"] is True
    assert sidecar["regularity_assumption"]["convergent"] is True
    assert 0.0 < sidecar["tail_bound"] < 1.0


def test_verify_report_structure(tmp_path):
    out = tmp_path / "verify.json"
    assert main(["verify", "--k-list", "1,2", "--out", str(out)]) == 0
    report = load_json(out)
    assert report["passed"] is True
    assert report["rel_tol_bar"] == 1e-6
    one, two = report["results"]
    assert one["k"] == 1 and one["omega_k"] is None
    assert one["rel_err"] <= 1e-6
    assert two["alpha_k"] == pytest.approx(4.0)
    assert two["omega_k"] == pytest.approx(math.sqrt(3.0), abs=1e-9)
    assert two["omega_k_sq_over_alpha_k"] == pytest.approx(0.75, abs=1e-9)
    assert two["inequality_min_slack"] >= 0.0


def test_verify_fails_unreachable_bar(tmp_path, capsys):
    cfg = tmp_path / "tight.ini"
    cfg.write_text("[tolerances]\nverify_rel_tol = 1e-15\n")
    out = tmp_path / "verify.json"
    code = main(["verify", "--config", str(cfg), "--k-list", "2", "--out", str(out)])
    assert code == 3
    assert load_json(out)["passed"] is False


def test_hoelder_rejects_short_lag_span(tmp_path, capsys):
    paths = tmp_path / "paths.csv"
    assert main(["sample-mode", "--dt", "0.125", "--n", "64", "--ensemble", "2",
                 "--out", str(paths)]) == 0
    code = main(["hoelder", "--in", str(paths), "--lags", "1,2",
                 "--out", str(tmp_path / "r.json")])
    assert code == 2


def test_hoelder_mode_roundtrip_with_oracle(tmp_path):
    paths = tmp_path / "paths.csv"
    assert main(["sample-mode", "--dt", str(2.0**-8), "--n", "4096",
                 "--ensemble", "32", "--seed", "4", "--out", str(paths)]) == 0
    out = tmp_path / "report.json"
    cfg = tmp_path / "cfg.ini"
    cfg.write_text("[kernel]\nkernel = expsum\n")
    assert main(["hoelder", "--in", str(paths), "--axis", "time",
                 "--lags", "8,16,32,64,128", "--config", str(cfg), "--k", "1",
                 "--out", str(out)]) == 0
    report = load_json(out)
    assert report["axis"] == "time"
    assert report["n_members"] == 32
    assert report["lags"] == [h * 2.0**-8 for h in (8, 16, 32, 64, 128)]
    dev = np.abs(np.array(report["values"]) - np.array(report["oracle_values"]))
    assert np.all(dev <= 4.0 * np.array(report["stderr"]))
    assert not report["flagged"]
    assert report["ci"][0] <= report["gamma_hat"] <= report["ci"][1]


def test_hoelder_space_axis_with_field_oracle(tmp_path):
    field = tmp_path / "field.csv"
    assert main(["sample-field", "--N", "8", "--nx", "17", "--dt", "4.0",
                 "--n", "8", "--ensemble", "16", "--seed", "6",
                 "--tail-budget", "1.0", "--out", str(field)]) == 0
    out = tmp_path / "space.json"
    assert main(["hoelder", "--in", str(field), "--axis", "space",
                 "--lags", "1,2,4,8,16", "--config", str(tmp_path / "c.ini"),
                 "--N", "8", "--out", str(out)]) == 2  # config must exist
    cfg = tmp_path / "c.ini"
    cfg.write_text("[weights]\nrule = flat\nlam = 1.0\n")
    assert main(["hoelder", "--in", str(field), "--axis", "space",
                 "--lags", "1,2,4,8,16", "--config", str(cfg),
                 "--N", "8", "--out", str(out)]) == 0
    report = load_json(out)
    assert report["axis"] == "space"
    assert report["lags"][0] == pytest.approx(math.pi / 18.0)
    dev = np.abs(np.array(report["values"]) - np.array(report["oracle_values"]))
    assert np.all(dev <= 4.0 * np.array(report["stderr"]))


def test_hoelder_dyadic_default_lags(tmp_path):
    paths = tmp_path / "paths.csv"
    assert main(["sample-mode", "--dt", "0.125", "--n", "128", "--ensemble", "4",
                 "--out", str(paths)]) == 0
    out = tmp_path / "r.json"
    assert main(["hoelder", "--in", str(paths), "--out", str(out)]) == 0
    report = load_json(out)
    assert report["lags"] == [s * 0.125 for s in (1, 2, 4, 8, 16, 32)]
    assert report["oracle_values"] is None


def test_thread_configuration_errors(tmp_path, capsys, monkeypatch):
    base = ["sample-field", "--N", "1", "--nx", "2", "--n", "8", "--ensemble", "2",
            "--tail-budget", "1.0", "--out", str(tmp_path / "f.csv")]
    assert main(base + ["--threads", "0"]) == 2
    monkeypatch.setenv("GLEFIELD_THREADS", "abc")
    assert main(base) == 2
    assert "GLEFIELD_THREADS" in capsys.readouterr().err


def test_unknown_subcommand_exits_2():
    with pytest.raises(SystemExit) as info:
        main(["transmogrify"])
    assert info.value.code == 2


@pytest.mark.skipif(shutil.which("glefield") is None, reason="script not on PATH")
def test_console_script_runs():
    proc = subprocess.run(
        ["glefield", "--version"], capture_output=True, text=True, check=False
    )
    assert proc.returncode == 0
    assert proc.stdout.startswith("glefield")
