import csv
import json

import numpy as np
import pytest

from grf.cli import main
from grf.errors import FormatError
from grf.formats import (MAGIC, TAG_NOISE, decode_grid, encode_grid, payload_checksum,
                         read_grid, write_grid)

GEN = ["gen", "--cov", "exp", "--alpha", "1,1", "--T", "0.2,0.25", "--N", "6,5"]


def _rc(argv):
    # argparse exits directly; errors found later are returned by main
    try:
        return main(argv)
    except SystemExit as exc:
        return exc.code


@pytest.fixture
def cwd(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def test_gen_deterministic_and_manifest(cwd, capsys):
    assert main(GEN + ["--seed", "3", "--out", "a.grf", "--noise-out", "a.noise.grf"]) == 0
    assert main(GEN + ["--seed", "3", "--out", "b.grf"]) == 0
    assert (cwd / "a.grf").read_bytes() == (cwd / "b.grf").read_bytes()
    man = json.loads((cwd / "a.grf.json").read_text())
    assert man["format"] == "grf-manifest" and man["command"] == "gen"
    assert man["seed"] == 3 and man["N"] == [6, 5]
    data, T, tag = read_grid(cwd / "a.grf")
    assert data.shape == (6, 5) and T == (0.2, 0.25)
    assert man["checksum"]["field"] == payload_checksum(data)
    noise, _, ntag = read_grid(cwd / "a.noise.grf")
    assert ntag == TAG_NOISE and noise.shape == tuple(man["M"])
    assert "sha256" in capsys.readouterr().out


def test_seed_from_environment(cwd, monkeypatch):
    monkeypatch.setenv("GRF_SEED", "3")
    assert main(GEN + ["--out", "env.grf"]) == 0
    assert main(GEN + ["--seed", "3", "--out", "arg.grf"]) == 0
    assert (cwd / "env.grf").read_bytes() == (cwd / "arg.grf").read_bytes()


def test_replay_byte_identical(cwd):
    assert main(GEN + ["--seed", "7", "--out", "a.grf"]) == 0
    assert main(["replay", "--manifest", "a.grf.json", "--out-dir", "rep"]) == 0
    assert (cwd / "rep" / "a.grf").read_bytes() == (cwd / "a.grf").read_bytes()


def test_config_file_supplies_defaults(cwd):
    (cwd / "run.cfg").write_text("# model\ncov = exp\nalpha = 1,1\nT = 0.2,0.25\nN = 6,5\n")
    assert main(["gen", "--config", "run.cfg", "--seed", "2", "--out", "c.grf"]) == 0
    assert main(GEN + ["--seed", "2", "--out", "d.grf"]) == 0
    assert (cwd / "c.grf").read_bytes() == (cwd / "d.grf").read_bytes()


@pytest.mark.parametrize("argv", [
    ["gen", "--cov", "exp", "--alpha", "1,1", "--T", "0.2", "--N", "6,5", "--out", "x.grf"],
    ["gen", "--cov", "exp", "--alpha", "1", "--T", "0.2", "--N", "6", "--seed", "-1",
     "--out", "x.grf"],
    ["validate", "--cov", "exp", "--alpha", "1", "--T", "0.2", "--N", "50", "--dirs", "y"],
    ["validate", "--cov", "exp", "--alpha", "1", "--T", "0.2", "--N", "50", "--dirs", "w"],
])
def test_usage_errors_exit_2(cwd, argv):
    assert _rc(argv) == 2


def test_refine_chain_and_missing_noise(cwd, capsys):
    assert main(GEN + ["--seed", "3", "--out", "a.grf", "--noise-out", "a.noise.grf"]) == 0
    assert main(["refine", "--state", "a.grf.json", "--levels", "2", "--seed", "5"]) == 0
    coarse, _, _ = read_grid(cwd / "a.grf")
    l1, T1, _ = read_grid(cwd / "a_fine_L1.grf")
    l2, T2, _ = read_grid(cwd / "a_fine_L2.grf")
    assert l1.shape == (11, 9) and l2.shape == (21, 17)
    assert T2 == (0.05, 0.0625)
    np.testing.assert_allclose(l1[::2, ::2], coarse, atol=1e-9)
    np.testing.assert_allclose(l2[::2, ::2], l1, atol=1e-9)
    m2 = json.loads((cwd / "a_fine_L2.json").read_text())
    assert m2["parent"].endswith("a_fine_L1.json")
    # replaying the refine reproduces the fine field
    assert main(["replay", "--manifest", "a_fine_L2.json", "--out-dir", "rep"]) == 0
    assert (cwd / "rep" / "a_fine_L2.grf").read_bytes() == (cwd / "a_fine_L2.grf").read_bytes()
    (cwd / "a.noise.grf").unlink()
    capsys.readouterr()
    assert main(["refine", "--state", "a.grf.json"]) == 1
    assert "replay" in capsys.readouterr().err


def test_refine_zero_levels_is_noop(cwd):
    assert main(GEN + ["--seed", "3", "--out", "a.grf", "--noise-out", "a.noise.grf"]) == 0
    before = sorted(p.name for p in cwd.iterdir())
    assert main(["refine", "--state", "a.grf.json", "--levels", "0"]) == 0
    assert sorted(p.name for p in cwd.iterdir()) == before


def test_validate_outputs(cwd):
    argv = ["validate", "--cov", "exp", "--alpha", "1,1", "--T", "0.2,0.25", "--N", "40,30",
            "--trials", "2", "--seed", "1", "--out", "v", "--plot", "v.gp"]
    assert main(argv) == 0
    for d in ("x", "y", "diag"):
        with open(cwd / f"v_{d}.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["lag", "distance", "sample_cov", "target_cov"]
        assert float(rows[1][3]) == 1.0
    assert not (cwd / "v_z.csv").exists()
    summary = json.loads((cwd / "v_summary.json").read_text())
    assert set(summary["max_abs_deviation"]) >= {"x", "y", "diag"}
    assert "v_x.csv" in (cwd / "v.gp").read_text()


def test_spectrum_outputs(cwd):
    assert main(["spectrum", "--cov", "gauss", "--alpha", "1", "--T", "0.2",
                 "--out", "f.json", "--text", "f.txt"]) == 0
    doc = json.loads((cwd / "f.json").read_text())
    assert doc["format"] == "grf-filter"
    assert doc["filter"]["m"] == 13 and len(doc["filter"]["a"]) == 14
    assert max(map(abs, doc["moment_residuals"])) < 1e-8
    a_line, b_line = (cwd / "f.txt").read_text().splitlines()[:2]
    assert a_line.startswith("a:") and b_line.startswith("b:")
    assert [float(v) for v in a_line.split()[1:]] == doc["filter"]["a"]


def test_spectrum_infeasible_exit_1(cwd, capsys):
    # a sequence that is not positive definite has no filter
    rc = main(["spectrum", "--cov", "custom", "--seq", "1,0.99,0", "--T", "1", "--m", "2",
               "--out", "bad.json"])
    assert rc == 1
    assert not (cwd / "bad.json").exists()


def test_bench_csv(cwd):
    assert main(["bench", "--sizes", "8,4x4x6", "--methods", "realization,cmd", "--repeats", "1",
                 "--cmd-cap", "100", "--out", "b.csv"]) == 0
    rows = [r for r in csv.reader(open(cwd / "b.csv")) if r]
    assert rows[0] == ["method", "N", "samples", "median_seconds", "ratio_to_previous",
                       "flops", "note"]
    body = {(r[0], r[1]): r for r in rows[1:] if r[0] != "table"}
    assert float(body[("realization", "8x8x8")][3]) > 0
    assert body[("cmd", "8x8x8")][6].startswith("skipped")
    assert body[("cmd", "4x4x6")][6] == "" and float(body[("cmd", "4x4x6")][3]) > 0
    table = [r for r in rows if r[0] == "table" and r[1] != "N_or_C"]
    assert [r[6] for r in table] == ["cmd", "stepwise", "circulant", "realization"]


def test_grid_encoding_round_trip(tmp_path):
    data = np.arange(24.0).reshape(2, 3, 4) - 5.5
    blob = encode_grid(data, (0.1, 0.2, 0.3), TAG_NOISE)
    assert blob[:4] == MAGIC
    assert len(blob) == 12 + 3 * 16 + 1 + 8 * 24
    out, T, tag = decode_grid(blob)
    np.testing.assert_array_equal(out, data)
    assert T == (0.1, 0.2, 0.3) and tag == TAG_NOISE
    path = tmp_path / "g.grf"
    assert write_grid(path, data, T) == payload_checksum(data)
    assert read_grid(path)[0].tolist() == data.tolist()


@pytest.mark.parametrize("mutate", [
    lambda b: b"GRF2" + b[4:],
    lambda b: b[:4] + (2).to_bytes(4, "little") + b[8:],
    lambda b: b[:-8],
    lambda b: b + b"\0",
    lambda b: b[:20],
])
def test_grid_decoding_errors(mutate):
    blob = encode_grid(np.ones((2, 2)), (1.0, 1.0))
    with pytest.raises(FormatError):
        decode_grid(mutate(blob))


def test_encode_rejects_rank_mismatch():
    with pytest.raises(FormatError):
        encode_grid(np.ones((2, 2)), (1.0,))
