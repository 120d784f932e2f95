from pathlib import Path

import pytest

from nuhlab.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, main
from nuhlab.io import read_csv, verify_manifest

SMALL = Path(__file__).parent / "data" / "small.cfg"


def _cfg(tmp_path, extra=""):
    p = tmp_path / "run.cfg"
    p.write_text(SMALL.read_text() + extra)
    return p


def test_unknown_command_is_usage_error(capsys):
    with pytest.raises(SystemExit) as e:
        main(["frobnicate"])
    assert e.value.code == EXIT_USAGE


def test_bad_config_is_usage_error(tmp_path, capsys):
    p = tmp_path / "bad.cfg"
    p.write_text("eps = 0.9\n")
    assert main(["build", "--config", str(p), "--out", str(tmp_path / "o")]) == EXIT_USAGE
    assert "eps" in capsys.readouterr().err


def test_missing_config_is_usage_error(tmp_path):
    assert main(["build", "--config", str(tmp_path / "nope.cfg")]) == EXIT_USAGE


def test_bad_threads_is_usage_error(tmp_path):
    assert main(["build", "--threads", "0", "--out", str(tmp_path)]) == EXIT_USAGE


def test_build_writes_manifested_outputs(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["build", "--config", str(_cfg(tmp_path)), "--out", str(out)]) == EXIT_OK
    assert "all" in capsys.readouterr().out
    rows = read_csv(out / "build" / "validation.csv")
    assert all(r["passed"] == "1" for r in rows)
    assert verify_manifest(out) == []
    head = (out / "manifest.txt").read_text()
    assert "config_sha256" in head and "ak_period = 120" in head


def test_overlapping_stage_gadgets_fail_support_contract(tmp_path, capsys):
    cfg = _cfg(tmp_path, "ak_height = 0.5,0.5,0.5\nak_phase = 0,0,0\nak_subdivision = 1,1,1\n")
    code = main(["build", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert code == EXIT_FAIL
    cap = capsys.readouterr()
    assert "support contract violated" in cap.out + cap.err


def test_zero_amplitude_reports_trivial_gadget(tmp_path, capsys):
    cfg = _cfg(tmp_path, "sw_amplitude = 0.0\nsw_twist = 0.0\n")
    assert main(["build", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_OK
    assert "trivial gadgets sw" in capsys.readouterr().out


def test_seed_override_changes_config_digest(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["build", "--config", str(_cfg(tmp_path)), "--out", str(a)])
    main(["build", "--config", str(_cfg(tmp_path)), "--out", str(b), "--seed", "7"])
    assert (a / "config.txt").read_text() != (b / "config.txt").read_text()
    assert "seed = 7" in (b / "config.txt").read_text()
