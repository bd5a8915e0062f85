import json
from pathlib import Path

import pytest

from main import build_parser, run

CONFIG_DIR = Path(__file__).parent / "config"
SQUARES = [{"label": "z^2", "numerator": [0, 0, 1]}, {"label": "z^2", "numerator": [0, 0, 1]}]


def small_reference(output_dir, **extra):
    document = {
        "maps": SQUARES,
        "mode": "exact",
        "n_max": 10,
        "N_max": 30,
        "lambda": 4.0,
        "analysis": {"dirichlet_N": 20},
        "output": {"directory": str(output_dir)},
    }
    document.update(extra)
    return document


def test_parser_knows_every_subcommand():
    parser = build_parser()
    for name in ("count", "orbits", "verify", "series", "repelling", "selftest"):
        assert parser.parse_args([name]).command == name
    assert parser.parse_args(["orbits", "--n", "3"]).n == 3


def test_selftest_passes():
    assert run(["selftest", "--n-max", "3"]) == 0


def test_count_writes_outputs(tmp_path, write_config):
    out = tmp_path / "out"
    assert run(["count", "--config", str(write_config(small_reference(out)))]) == 0
    lines = (out / "counts.csv").read_text().splitlines()
    assert lines[0].startswith("# tool: skew-orbit-counter")
    assert lines[3] == "n,E,D,C,mode"
    assert lines[4] == "1,6,6,6,exact"
    manifest = json.loads((out / "manifest.json").read_text())
    assert set(manifest["files"]) == {"counts.csv", "counts.json", "counts_C.dat"}


def test_orbits_subcommand(tmp_path, write_config):
    out = tmp_path / "out"
    path = write_config(small_reference(out))
    assert run(["orbits", "--config", str(path), "--n", "2"]) == 0
    document = json.loads((out / "orbits_n2.json").read_text())
    assert document["count"] == 7


def test_verify_passes_on_reference(tmp_path, write_config):
    out = tmp_path / "out"
    assert run(["verify", "--config", str(write_config(small_reference(out)))]) == 0
    document = json.loads((out / "verification.json").read_text())
    assert document["pass"] is True
    claims = [r["claim"] for r in document["reports"]]
    assert claims[:4] == ["thm1", "thm2", "thm3", "thm4"]
    assert "rho" in claims and "cor1.1" in claims


def test_verify_fails_with_tight_band(tmp_path, write_config):
    out = tmp_path / "out"
    path = write_config(small_reference(out, band_ceiling=1.0))
    assert run(["verify", "--config", str(path)]) == 1
    assert json.loads((out / "verification.json").read_text())["pass"] is False


def test_series_subcommand(tmp_path, write_config):
    out = tmp_path / "out"
    assert run(["series", "--config", str(write_config(small_reference(out)))]) == 0
    kinds = [r["kind"] for r in json.loads((out / "series.json").read_text())["series"]]
    assert kinds[:2] == ["prime_orbit", "mertens"]
    assert kinds.count("meissel") == 4
    assert "rho_series" in kinds


def test_repelling_needs_one_map(tmp_path, write_config, capsys):
    path = write_config(small_reference(tmp_path / "out"))
    assert run(["repelling", "--config", str(path)]) == 2
    record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert record["error"] == "configuration_error"


def test_empty_map_list_is_a_configuration_error(tmp_path, write_config, capsys):
    path = write_config({"maps": [], "output": {"directory": str(tmp_path / "out")}})
    assert run(["count", "--config", str(path)]) == 2
    record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert record == {"error": "configuration_error", "exit_code": 2,
                      "message": "configuration needs at least one map"}


def test_missing_config_file(tmp_path, capsys):
    assert run(["count", "--config", str(tmp_path / "absent.json")]) == 2
    assert "configuration_error" in capsys.readouterr().err


@pytest.mark.parametrize("command", ["count", "orbits"])
def test_outputs_do_not_depend_on_workers(tmp_path, command):
    config = str(CONFIG_DIR / "mixed_degrees.json")
    digests = []
    for workers in ("1", "3"):
        out = tmp_path / f"w{workers}"
        code = run([command, "--config", config, "--set", "n_max=2",
                    "--workers", workers, "--output-dir", str(out)])
        assert code == 0
        digests.append(json.loads((out / "manifest.json").read_text())["files"])
    assert digests[0] == digests[1]
    assert digests[0]


def test_verify_outputs_do_not_depend_on_workers(tmp_path):
    config = str(CONFIG_DIR / "single_map.json")
    codes, digests = [], []
    for workers in ("1", "4"):
        out = tmp_path / f"w{workers}"
        codes.append(run(["verify", "--config", config, "--set", "N_max=60",
                          "--workers", workers, "--output-dir", str(out)]))
        digests.append(json.loads((out / "manifest.json").read_text())["files"])
        assert (out / "verification.json").exists()
    assert codes[0] == codes[1]
    assert codes[0] in (0, 1)
    assert digests[0] == digests[1]
    assert set(digests[0]) >= {"counts.csv", "verification.json"}


def test_verify_reaches_a_thousand_terms(tmp_path):
    out = tmp_path / "out"
    code = run(["verify", "--config", str(CONFIG_DIR / "single_map.json"), "--set", "N_max=1000",
                "--output-dir", str(out)])
    assert code in (0, 1)
    document = json.loads((out / "verification.json").read_text())
    thm1 = next(r for r in document["reports"] if r["claim"] == "thm1")
    assert thm1["parameters"]["N_max"] == 1000
