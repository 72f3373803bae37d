import numpy as np
import pytest

from mkpolar.cli import main
from mkpolar.construction import load_code

FAST = ["mc_iterations=2000"]


def run(capsys, *argv):
    rc = main(list(argv))
    out, err = capsys.readouterr()
    return rc, out, err


def test_construct_single_t2(capsys):
    rc, out, _ = run(capsys, "construct", "kernels=2", "K=1", *FAST)
    assert rc == 0
    spec, profile, meta = load_code(out)
    assert spec.N == 2 and spec.K == 1
    # the less reliable position of a single T2 kernel is u_0
    assert spec.frozen == (0,)
    assert profile.pe[0] > profile.pe[1]


def test_construct_is_deterministic(capsys, tmp_path):
    argv = ["construct", "kernels=2,2,3", "K=6", *FAST, "--seed", "4"]
    _, first, _ = run(capsys, *argv)
    _, second, _ = run(capsys, *argv)
    assert first == second
    assert first.count("# score") == 3
    assert main([*argv, "-o", str(tmp_path / "c.txt"), "-j", "2"]) == 0
    assert (tmp_path / "c.txt").read_text() == first


@pytest.mark.parametrize(
    "argv",
    [
        ["construct", "kernels=2,3", "K=7"],
        ["construct", "colour=blue"],
        ["frobnicate"],
        ["simulate", "--workers", "x"],
        ["encode", "code_file=/nonexistent"],
        ["encode"],
        ["compare", "kernels=2,2,2,3,3", "target_n=50", "K=25"],
        ["construct", "code=punctured", "kernels=2,2,2", "K=4"],
    ],
)
def test_config_errors_exit_2(capsys, argv):
    rc, _, _ = run(capsys, *argv)
    assert rc == 2


def test_encode_decode_round_trip(capsys, tmp_path):
    code = tmp_path / "code.txt"
    assert main(["construct", "kernels=2,3", "K=3", *FAST, "-o", str(code)]) == 0
    info = np.random.default_rng(0).integers(0, 2, (5, 3))
    (tmp_path / "info.txt").write_text("".join("".join(map(str, r)) + "\n" for r in info))
    rc, out, _ = run(capsys, "encode", f"code_file={code}", "-i", str(tmp_path / "info.txt"))
    assert rc == 0
    words = np.array([[int(c) for c in line] for line in out.split()])
    llr = 8.0 * (1 - 2.0 * words)
    (tmp_path / "llr.txt").write_text("".join(" ".join(f"{v:g}" for v in r) + "\n" for r in llr))
    rc, out, _ = run(capsys, "decode", f"code_file={code}", "decoder=scl", "L=4", "-i", str(tmp_path / "llr.txt"))
    assert rc == 0
    assert np.array_equal(np.array([[int(c) for c in line] for line in out.split()]), info)
    (tmp_path / "short.txt").write_text("1 2 3\n")
    assert run(capsys, "decode", f"code_file={code}", "-i", str(tmp_path / "short.txt"))[0] == 2


def test_rate_matched_encode(capsys, tmp_path):
    code = tmp_path / "short.txt"
    assert main(["construct", "code=shortened", "target_n=6", "kernels=2,2,2", "K=3", *FAST, "-o", str(code)]) == 0
    assert "# pattern 6 7" in code.read_text()
    (tmp_path / "i.txt").write_text("101\n")
    rc, out, _ = run(capsys, "encode", f"code_file={code}", "-i", str(tmp_path / "i.txt"))
    assert rc == 0 and len(out.strip()) == 6
    rc, out, _ = run(capsys, "info", f"code_file={code}")
    assert "llr_ops=24" in out and "mother_N=8" in out


def test_info_reports_counts_and_graph(capsys):
    rc, out, _ = run(capsys, "info", "kernels=2,2,2,3,3", "order=T3xT2xT2xT2xT3")
    assert rc == 0
    assert "llr_ops=360" in out
    assert "graph N=72 s=5 order=T3xT2xT2xT2xT3" in out
    assert out.count("\nstage ") == 5
    rc, out, _ = run(capsys, "info", "code=punctured", "target_n=72", "K=36")
    assert "llr_ops=896" in out and "mother_N=128" in out


def test_simulate_writes_csv(capsys, tmp_path):
    out = tmp_path / "bler.csv"
    rc, _, _ = run(capsys, "simulate", "kernels=2,3", "K=3", *FAST, "snr_start=1", "snr_stop=2",
                   "max_blocks=500", "min_block_errors=5", "-o", str(out))
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "snr_db,blocks,block_errors,bit_errors,bler,ber,llr_ops,seconds"
    assert len(lines) == 5 and lines[-1].startswith("# stop ")
    rc, _, err = run(capsys, "simulate", "kernels=2,3", "K=3", *FAST, "-o", str(tmp_path / "no" / "x.csv"))
    assert rc == 2 and "cannot write" in err


def test_config_file(capsys, tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("kernels = 3\nK = 1\nmc_iterations = 2000\n")
    rc, out, _ = run(capsys, "construct", "-c", str(cfg))
    assert rc == 0 and "# order=T3" in out
