import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nuhlab.config import KEY_DOCS, ConfigError, RunConfig, task_rng
from nuhlab.io import (
    read_csv,
    read_pgm,
    to_gray,
    tree_digest,
    verify_manifest,
    write_csv,
    write_manifest,
    write_pgm,
)


def test_every_field_documented():
    from dataclasses import fields
    assert {f.name for f in fields(RunConfig)} == set(KEY_DOCS)


@given(
    st.floats(0.01, 0.49),
    st.integers(0, 2**32),
    st.sampled_from(["t4", "t6"]),
    st.floats(0.0, 2.0),
)
def test_config_text_round_trip(eps, seed, variant, amp):
    cfg = RunConfig(eps=eps, seed=seed, variant=variant, sw_amplitude=amp)
    back = RunConfig.from_text(cfg.to_text())
    assert back == cfg
    assert back.digest == cfg.digest


@pytest.mark.parametrize(
    "text",
    ["eps = 0.7", "A = 1,1,1,1", "variant = t5", "bogus = 1", "eps 0.2", "ak_q = 2,7", "n_integral = 10",
     "seed = abc", "ak_height = 0.5,1.0,0.5"],
)
def test_bad_config_rejected(text):
    with pytest.raises(ConfigError):
        RunConfig.from_text(text)


def test_comments_and_blank_lines():
    cfg = RunConfig.from_text("# note\n\nseed = 4\n")
    assert cfg.seed == 4


def test_task_streams_independent_and_reproducible():
    a = task_rng(0, "volume").random(5)
    assert np.array_equal(a, task_rng(0, "volume").random(5))
    assert not np.array_equal(a, task_rng(0, "support").random(5))
    assert not np.array_equal(a, task_rng(1, "volume").random(5))


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=10))
def test_csv_floats_round_trip_exactly(vals):
    import tempfile
    from pathlib import Path
    with tempfile.TemporaryDirectory() as tmp:
        p = write_csv(Path(tmp) / "a.csv", ["k", "v", "flag"], [(i, v, v > 0) for i, v in enumerate(vals)])
        rows = read_csv(p)
    assert [float(r["v"]) for r in rows] == vals
    assert [r["flag"] for r in rows] == ["1" if v > 0 else "0" for v in vals]


def test_pgm_round_trip(tmp_path):
    g = np.arange(12, dtype=np.uint8).reshape(3, 4)
    assert np.array_equal(read_pgm(write_pgm(tmp_path / "a.pgm", g)), g)


def test_to_gray_reserves_zero_for_missing():
    v = np.array([[0.0, 1.0], [np.nan, 0.5]])
    g = to_gray(v)
    assert g[1, 0] == 0 and g[0, 0] == 1 and g[0, 1] == 255


def test_manifest_detects_changes(tmp_path):
    (tmp_path / "a.txt").write_text("x")
    (tmp_path / "sub").mkdir()
    (tmp_path / "sub" / "b.txt").write_text("y")
    write_manifest(tmp_path, {"version": "1"})
    assert verify_manifest(tmp_path) == []
    (tmp_path / "a.txt").write_text("z")
    (tmp_path / "c.txt").write_text("new")
    (tmp_path / "sub" / "b.txt").unlink()
    probs = sorted(verify_manifest(tmp_path))
    assert probs == ["altered a.txt", "missing sub/b.txt", "orphan c.txt"]


def test_tree_digest_sensitive_to_content(tmp_path):
    (tmp_path / "a").write_text("1")
    d1 = tree_digest(tmp_path)
    (tmp_path / "a").write_text("2")
    assert d1 != tree_digest(tmp_path)
