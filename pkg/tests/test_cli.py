import json

import pandas as pd
import pytest

from normalizer.cli import main


def manifest(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def summary(out, command):
    with open(out / command / "summary.json") as f:
        return json.load(f)


def test_kolmogorov_on_the_integrable_model(tmp_path):
    out = tmp_path / "out"
    path = manifest(tmp_path, 'model = "integrable"\norder = 3\n')
    assert main(["kolmogorov", "--manifest", path, "--out", str(out), "-q"]) == 0
    frame = pd.read_csv(out / "kolmogorov" / "norms.csv", comment='#')
    assert list(frame["chi1_norm"]) == [0.0, 0.0, 0.0]
    assert "DECAY_UNDEFINED" in summary(out, "kolmogorov")["flags"]
    assert (out / "kolmogorov" / "normal_form.psx").exists()


def test_formats_restrict_the_outputs(tmp_path):
    out = tmp_path / "out"
    path = manifest(tmp_path, 'model = "integrable"\norder = 2\n')
    assert main(["kolmogorov", "--manifest", path, "--out", str(out), "--format", "csv", "-q"]) == 0
    assert (out / "kolmogorov" / "norms.csv").exists()
    assert not (out / "kolmogorov" / "normal_form.psx").exists()


def test_missing_manifest_is_a_usage_error(tmp_path):
    out = tmp_path / "out"
    assert main(["stability", "--manifest", str(tmp_path / "absent.toml"), "--out", str(out), "-q"]) == 2
    with open(out / "error.json") as f:
        report = json.load(f)
    assert report["error"] == "FileNotFoundError"
    assert report["exit_code"] == 2


def test_empty_signal_list_is_rejected(tmp_path):
    out = tmp_path / "out"
    path = manifest(tmp_path, 'model = "two_tone"\nsignals = []\n')
    assert main(["frequencies", "--manifest", path, "--out", str(out), "-q"]) == 2
    with open(out / "error.json") as f:
        assert json.load(f)["error"] == "ManifestError"


def test_manifest_for_another_command(tmp_path):
    path = manifest(tmp_path, 'command = "kolmogorov"\nmodel = "integrable"\n')
    assert main(["pipeline", "--manifest", path, "--out", str(tmp_path / "out"), "-q"]) == 2


def test_wrong_model_kind(tmp_path):
    path = manifest(tmp_path, 'model = "two_tone"\n')
    assert main(["kolmogorov", "--manifest", path, "--out", str(tmp_path / "out"), "-q"]) == 2


def test_stability_at_a_single_radius(tmp_path):
    out = tmp_path / "out"
    path = manifest(tmp_path, 'rho0 = [1e-3]\n\n[D]\n"1" = 1.0\n"2" = 4.0\n')
    assert main(["stability", "--manifest", path, "--out", str(out), "--format", "csv", "-q"]) == 0
    frame = pd.read_csv(out / "stability" / "curve.csv", comment='#')
    assert len(frame) == 1
    assert summary(out, "stability")["rows"] == 1


def test_stability_from_a_table_file(tmp_path):
    out = tmp_path / "out"
    (tmp_path / "D.csv").write_text("order,Dr\n1,1.0\n2,4.0\n3,36.0\n")
    path = manifest(tmp_path, 'D_csv = "D.csv"\nT_target = 1e6\n\n[rho0_grid]\nstart = 1e-4\nstop = 1e-1\nnum = 7\n')
    assert main(["stability", "--manifest", path, "--out", str(out), "-q"]) == 0
    assert (out / "stability" / "curve.svg").exists()
    assert summary(out, "stability")["rows"] == 7


def test_two_tone_frequencies(tmp_path):
    out = tmp_path / "out"
    path = manifest(tmp_path, 'model = "two_tone"\n\n[[signals]]\nn_freqs = 2\n')
    assert main(["frequencies", "--manifest", path, "--out", str(out), "-q"]) == 0
    found = sorted(summary(out, "frequencies")["signals"]["signal"])
    assert found == pytest.approx([0.3, 0.31], abs=1e-6)
    frame = pd.read_csv(out / "frequencies" / "frequencies.csv", comment='#')
    assert len(frame) == 2


def test_three_body_frequencies_need_an_integration(tmp_path):
    path = manifest(tmp_path, 'model = "sjs"\n\n[[signals]]\nbody = "jupiter"\n')
    assert main(["frequencies", "--manifest", path, "--out", str(tmp_path / "out"), "-q"]) == 2


def test_integrate_reports_the_drift(tmp_path):
    out = tmp_path / "out"
    path = manifest(tmp_path, 'model = "sjs"\nt_span = 10.0\ndt = 0.01\nstride = 100\n')
    assert main(["integrate", "--manifest", path, "--out", str(out), "-q"]) == 0
    report = summary(out, "integrate")
    assert report["samples"] == 11
    assert report["drift"]["energy"] < 1e-9
    elements = pd.read_csv(out / "integrate" / "elements.csv", comment='#')
    assert set(elements["body"]) == {"jupiter", "saturn"}


def test_check_subset(tmp_path):
    out = tmp_path / "out"
    path = manifest(tmp_path, 'suites = ["estimator", "interior_order", "naff"]\nsamples = 5\n')
    assert main(["check", "--manifest", path, "--out", str(out), "-q"]) == 0
    report = summary(out, "check")
    assert set(report) == {"estimator", "interior_order", "naff"}
    assert all(entry["passed"] for entry in report.values())


def test_unknown_suite(tmp_path):
    path = manifest(tmp_path, 'suites = ["everything"]\n')
    assert main(["check", "--manifest", path, "--out", str(tmp_path / "out"), "-q"]) == 2
