import csv

import pytest

from mergeplan import cli
from mergeplan.cli import RunConfig, format_config, load_config, main, parse_config_text


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


# -- configuration -------------------------------------------------------------

def test_defaults_round_trip(capsys):
    code, out, _ = run(["defaults"], capsys)
    assert code == 0
    values = parse_config_text(out)
    assert RunConfig(**values) == RunConfig()
    assert format_config(RunConfig()) == out


def test_unknown_key_names_line():
    with pytest.raises(cli.ConfigError, match="line 2"):
        parse_config_text("w_t = 2\nbogus = 1\n")


def test_config_file_and_flag_precedence(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# comment\nw_t = 5   # trailing\nruns = 7\n")
    cfg = load_config(p, {"runs": "9"})
    assert cfg.w_t == 5.0 and cfg.runs == 9


def test_small_weight_rejected(tmp_path, capsys):
    p = tmp_path / "bad.cfg"
    p.write_text("w_t = 0.5\n")
    code, _, err = run(["plan", "--config", str(p), "--out", str(tmp_path / "o")], capsys)
    assert code != 0 and "w_t" in err
    code, _, err = run(["plan", "--w-t", "0.5", "--out", str(tmp_path / "o")], capsys)
    assert code != 0


def test_malformed_flags(tmp_path, capsys):
    assert run(["plan", "--ego", "1,2", "--out", str(tmp_path)], capsys)[0] == 2
    assert run(["plan", "--no-such-key", "3", "--out", str(tmp_path)], capsys)[0] == 2
    assert run(["sweep", "--runs", "0", "--out", str(tmp_path)], capsys)[0] == 2


def test_default_grid_has_forty_cells():
    cfg = RunConfig()
    assert cfg.gaps() == [30.0 + 5 * k for k in range(8)]
    assert len(cfg.gaps()) * len(cfg.w_t_list) == 40


# -- plan --------------------------------------------------------------------------

def test_plan_empty_traffic(tmp_path, capsys):
    code, out, _ = run(["plan", "--out", str(tmp_path)], capsys)
    assert code == 0 and out.startswith("MergeBeforeFirst")
    assert (tmp_path / "trajectory.csv").exists()
    rows = list(csv.reader(open(tmp_path / "decisions.csv")))
    assert rows[0] == ["cycle", "t_now", "class", "t_f", "cost", "p_a", "p_b", "lock"]


def test_plan_is_deterministic(tmp_path, capsys):
    args = ["plan", "--seed", "3", "--object", "70,8.3", "--object", "20,8.3,0.5,0.3"]
    run(args + ["--out", str(tmp_path / "a")], capsys)
    run(args + ["--out", str(tmp_path / "b")], capsys)
    for f in ("trajectory.csv", "decisions.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


# -- sweep -------------------------------------------------------------------------

def test_sweep_small_deterministic(tmp_path, capsys):
    args = ["sweep", "--runs", "1", "--gap-min", "40", "--gap-max", "45", "--w_t_list", "1,25",
            "--timing", "false", "--threads", "1"]
    assert run(args + ["--out", str(tmp_path / "a")], capsys)[0] == 0
    assert run(args + ["--out", str(tmp_path / "b")], capsys)[0] == 0
    a = (tmp_path / "a" / "stats.csv").read_bytes()
    assert a == (tmp_path / "b" / "stats.csv").read_bytes()
    rows = list(csv.DictReader(open(tmp_path / "a" / "stats.csv")))
    assert len(rows) == 4
    for r in rows:
        total = sum(float(r[k]) for k in ("p_gap", "p_before", "p_gentle", "p_failsafe"))
        assert abs(total - 1.0) < 1e-12


# -- replay ------------------------------------------------------------------------

def test_replay_zero_noise_ratio_is_one(tmp_path, capsys):
    p = tmp_path / "zero.csv"
    p.write_text("t,ds,dv\n" + "".join(f"{0.08 * k:.2f},0,0\n" for k in range(119)))
    code, out, _ = run(["replay", "--noise", str(p), "--replay_w_t", "1",
                        "--out", str(tmp_path / "o")], capsys)
    assert code == 0
    row = list(csv.DictReader(open(tmp_path / "o" / "replay_summary.csv")))[0]
    assert abs(float(row["ratio"]) - 1.0) < 1e-6


def test_replay_bad_noise_names_line(tmp_path, capsys):
    p = tmp_path / "bad.csv"
    p.write_text("t,ds,dv\n0,0,0\n0.08,0\n")
    code, _, err = run(["replay", "--noise", str(p), "--out", str(tmp_path / "o")], capsys)
    assert code == 2 and "line 3" in err


def test_replay_random_noise_median_below_one(tmp_path, capsys):
    code, out, _ = run(["replay", "--replay_seeds", "50", "--out", str(tmp_path)], capsys)
    assert code == 0
    ratios = sorted(float(r["ratio"]) for r in csv.DictReader(open(tmp_path / "replay_summary.csv")))
    assert len(ratios) == 50 and 0.5 * (ratios[24] + ratios[25]) < 1.0
    # both executed trajectories written
    assert (tmp_path / "replay_w1.csv").exists() and (tmp_path / "replay_wt.csv").exists()


# -- bench -------------------------------------------------------------------------

def test_bench_reports_per_class(tmp_path, capsys):
    code, out, _ = run(["bench", "--bench_cycles", "150", "--out", str(tmp_path)], capsys)
    assert code == 0
    rows = list(csv.DictReader(open(tmp_path / "bench.csv")))
    assert rows and all(float(r["mean_ms"]) < 100.0 for r in rows)
    assert sum(int(r["cycles"]) for r in rows) >= 150
