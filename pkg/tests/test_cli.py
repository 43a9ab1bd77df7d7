import json
import os
import random
import subprocess
import sys

import numpy as np
import pytest

from sparq.cli import EXIT_CODES_HELP, build_parser, main
from sparq.ingest import Trajectory, serialize_trajectory
from sparq.metrics import lag_profile
from sparq.plot import read_pgm
from sparq.recurrence import RecurrenceMatrix, self_recurrence
from sparq.testkit import naive_rqa

from conftest import FIXTURES, POOL_SECRET, snapshot


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def write_traj(path, agent, t0, t1, x, y, step=60):
    ts = np.arange(t0, t1 + 1, step)
    traj = Trajectory(agent, ts, np.full(ts.size, float(x)), np.full(ts.size, float(y)))
    path.write_bytes(serialize_trajectory(traj))
    return path


@pytest.fixture
def cli_store(tmp_path, pool_secret, capsys):
    root = tmp_path / "store"
    code, _, _ = run(capsys, "init", "--store", root, "--config", FIXTURES / "lag8.conf")
    assert code == 0
    return root


def test_help_lists_exit_codes(capsys):
    with pytest.raises(SystemExit) as e:
        main(["--help"])
    assert e.value.code == 0
    out = capsys.readouterr().out
    for code in ("0", "2", "3", "4", "10", "20", "30"):
        assert f"\n  {code:>2}  " in out
    assert EXIT_CODES_HELP.strip() in out


def test_subcommand_help_lists_exit_codes(capsys):
    for cmd in ("rqa", "ingest", "trace"):
        with pytest.raises(SystemExit):
            main([cmd, "--help"])
        assert "exit codes:" in capsys.readouterr().out


def test_console_script_runs(tmp_path):
    env = {**os.environ, "PYTHONPATH": ""}
    p = subprocess.run([sys.executable, "-m", "sparq.cli", "rqa", "bundled:frere_jacques"],
                       capture_output=True, text=True, env=env)
    assert p.returncode == 0
    assert json.loads(p.stdout)["maxline"] == 6


def test_rqa_bundled_melody_plot(tmp_path, capsys):
    out = tmp_path / "fj.pgm"
    code, stdout, _ = run(capsys, "rqa", "bundled:frere_jacques", "-o", out)
    assert code == 0
    img = read_pgm(out.read_bytes())
    assert img.shape == (32, 32)
    # opening phrase repeats one bar later: lag-4 diagonal
    assert all(img[i, i + 4] == 0 for i in range(4))
    assert json.loads(stdout)["n"] == 32


def test_rqa_single_symbol_all_black(tmp_path, capsys):
    f = tmp_path / "same.txt"
    f.write_text("7 " * 12)
    out = tmp_path / "p.pgm"
    assert run(capsys, "rqa", f, "-o", out)[0] == 0
    assert (read_pgm(out.read_bytes()) == 0).all()


def test_rqa_random_symbols_match_naive(tmp_path, capsys):
    rng = random.Random(5)
    for trial in range(5):
        s = [rng.randrange(4) for _ in range(rng.randint(2, 40))]
        f = tmp_path / f"s{trial}.txt"
        f.write_text("\n".join(map(str, s)))
        code, stdout, _ = run(capsys, "rqa", f, "--l-min", 3)
        assert code == 0
        got = json.loads(stdout)
        rows = self_recurrence(s).to_bool().astype(int).tolist()
        want = vars(naive_rqa(rows, 3, True))
        assert {k: got[k] for k in want} == want


def test_rqa_bad_input(tmp_path, capsys):
    f = tmp_path / "bad.txt"
    f.write_text("1 2 x\n")
    assert run(capsys, "rqa", f)[0] == 2
    assert run(capsys, "rqa", tmp_path / "missing.txt")[0] == 4
    assert run(capsys, "rqa", "bundled:nope")[0] != 0


def test_ingest_exit_codes(tmp_path, cli_store, capsys, monkeypatch):
    good = write_traj(tmp_path / "c.csv", "c", 0, 3000, 1, 1)
    assert run(capsys, "ingest", good, "--store", cli_store, "--case-id", "c1")[0] == 0
    before = snapshot(cli_store)
    monkeypatch.setenv("SPARQ_POOL_SECRET", "nope")
    code, _, err = run(capsys, "ingest", good, "--store", cli_store, "--case-id", "c2")
    assert code == 30 and "error" in err
    monkeypatch.delenv("SPARQ_POOL_SECRET")
    assert run(capsys, "ingest", good, "--store", cli_store, "--case-id", "c3")[0] == 30
    assert snapshot(cli_store) == before
    monkeypatch.setenv("SPARQ_POOL_SECRET", POOL_SECRET)
    bad = tmp_path / "bad.csv"
    bad.write_text("t,x,y\n0,1.0,2.0\n60,oops,2.0\n")
    assert run(capsys, "ingest", bad, "--store", cli_store)[0] == 2
    assert run(capsys, "ingest", good, "--store", tmp_path / "nostore")[0] == 4
    assert run(capsys, "ingest", good, "--store", cli_store, "--window-s", 450)[0] == 3
    assert snapshot(cli_store) == before


def test_init_rejects_nyquist_violation(tmp_path, pool_secret, capsys):
    assert run(capsys, "init", "--store", tmp_path / "s", "--window-s", 600)[0] == 3


def test_trace_lag8_pair(tmp_path, cli_store, capsys):
    assert run(capsys, "ingest", FIXTURES / "lag8_contagious.csv", "--store", cli_store)[0] == 0
    plots = tmp_path / "plots"
    feats = tmp_path / "f.csv"
    code, stdout, _ = run(capsys, "trace", FIXTURES / "lag8_healthy.csv", "--store", cli_store,
                          "--plot-dir", plots, "--features", feats)
    res = json.loads(stdout)
    assert code == {"none": 0, "vigilance": 10, "isolate": 20}[res["assessment"]["tier"]]
    img = read_pgm((plots / "combined_0.pgm").read_bytes())
    m = RecurrenceMatrix.from_bool(img == 0, 1)
    lp = lag_profile(m)
    assert max(lp, key=lp.get) == 8
    assert (plots / "accumulator.pgm").exists()
    assert feats.read_text().startswith("agent,")


def test_trace_no_overlap_is_tier_none(tmp_path, cli_store, capsys):
    run(capsys, "ingest", write_traj(tmp_path / "c.csv", "c", 0, 3000, 1, 1), "--store", cli_store)
    h = write_traj(tmp_path / "h.csv", "h", 50000, 53000, 1, 1)
    code, stdout, _ = run(capsys, "trace", h, "--store", cli_store)
    assert code == 0
    assert json.loads(stdout)["assessment"]["tier"] == "none"


def test_trace_colocated_fifteen_minutes_isolates(tmp_path, cli_store, capsys):
    run(capsys, "ingest", write_traj(tmp_path / "c.csv", "c", 0, 900, 5, 5), "--store", cli_store)
    h = write_traj(tmp_path / "h.csv", "h", 0, 900, 5, 5)
    assert run(capsys, "trace", h, "--store", cli_store)[0] == 20


def test_trace_bad_policy(tmp_path, cli_store, capsys):
    pol = tmp_path / "p.conf"
    pol.write_text("isolate_threshold_s = -3\n")
    h = write_traj(tmp_path / "h.csv", "h", 0, 900, 5, 5)
    assert run(capsys, "trace", h, "--store", cli_store, "--policy", pol)[0] == 3


def test_opt_in_plot_and_delete(tmp_path, cli_store, capsys):
    run(capsys, "ingest", write_traj(tmp_path / "c.csv", "c", 0, 1800, 5, 5), "--store", cli_store)
    h = write_traj(tmp_path / "h.csv", "h", 0, 1800, 5, 5)
    assert run(capsys, "trace", h, "--store", cli_store, "--opt-in", "--query-id", "q")[0] == 20
    out = tmp_path / "acc.pgm"
    assert run(capsys, "plot", "--artifact", "q", "--store", cli_store, "-o", out, "--palette", "heat")[0] == 0
    img = read_pgm(out.read_bytes())
    assert img[0, 0] == 0 and img[1, 0] == 255
    mat = cli_store / "optin" / "q" / "c0.sprq"
    out2 = tmp_path / "m.pgm"
    assert run(capsys, "plot", "--matrix", mat, "-o", out2, "--scale", 2)[0] == 0
    assert read_pgm(out2.read_bytes()).shape == (2 * img.shape[0],) * 2
    assert run(capsys, "delete", "q", "--store", cli_store)[0] == 0
    assert run(capsys, "delete", "q", "--store", cli_store)[0] == 4
    assert run(capsys, "plot", "--artifact", "q", "--store", cli_store, "-o", out)[0] == 4


def test_plot_rejects_corrupt_matrix(tmp_path, capsys):
    f = tmp_path / "x.sprq"
    f.write_bytes(b"SPRQ\x01\x09junk")
    assert run(capsys, "plot", "--matrix", f, "-o", tmp_path / "o.pgm")[0] == 2


def test_every_subcommand_has_a_parser():
    sub = build_parser()._subparsers._group_actions[0].choices
    assert set(sub) == {"init", "rqa", "ingest", "trace", "delete", "plot"}
