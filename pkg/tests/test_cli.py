import json
import subprocess
import sys
from fractions import Fraction

import pytest

from branchlab import __version__
from branchlab.cli import main


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def envelope(argv, capsys):
    code, out, _ = run(argv, capsys)
    return code, json.loads(out)


def test_info_reports_constants(capsys):
    code, env = envelope(["info", "--group", "grigorchuk"], capsys)
    assert code == 0 and env["schema"] == 1 and env["status"] == "ok"
    assert env["version"] == __version__ and env["seed"] == 0 and len(env["config_hash"]) == 16
    res = env["result"]
    assert res["p"] == 2 and res["generators"] == ["a", "b", "c", "d"]
    assert (res["metadata"]["k"], res["metadata"]["l"], res["metadata"]["d"]) == (4, 6, 3)


def test_info_gupta_sidki_spellings(capsys):
    a = envelope(["info", "--group", "gupta_sidki", "--p", "3"], capsys)[1]["result"]
    b = envelope(["info", "--group", "gupta-sidki:3"], capsys)[1]["result"]
    assert a["definition"] == b["definition"] and a["p"] == 3


def test_config_hash_tracks_config_and_seed(capsys):
    h0 = envelope(["info"], capsys)[1]["config_hash"]
    h1 = envelope(["info", "--seed", "5"], capsys)[1]
    assert h1["seed"] == 5 and h1["config_hash"] != h0
    assert envelope(["info"], capsys)[1]["config_hash"] == h0


def test_verify_partition(capsys):
    code, env = envelope(["verify", "partition", "--p", "2", "--max-m", "8"], capsys)
    assert code == 0 and env["result"]["pass"]


def test_alpha_lower_bound(capsys):
    code, env = envelope(["alpha", "--group", "grigorchuk", "--level", "5", "--max-m", "4"], capsys)
    assert code == 0
    res = env["result"]
    assert Fraction(res["lower"]) >= Fraction(3, 2) and Fraction(res["upper"]) == 12


def test_dp_table_csv_and_out_file(tmp_path, capsys):
    target = tmp_path / "t.csv"
    code, out, _ = run(["dp-table", "--level", "3", "--max-m", "3", "--format", "csv", "--out", str(target)], capsys)
    assert code == 0 and out == ""
    lines = target.read_text().splitlines()
    assert lines[0].startswith("# schema=1 ") and "seed=0" in lines[0]
    assert lines[1].split(",")[0] == "m" and len(lines) == 2 + 4


def test_enumerate_json_matches_known_counts(capsys):
    code, env = envelope(["enumerate", "--level", "2", "--max-m", "3", "--mode", "exact"], capsys)
    assert code == 0
    rows = env["result"]["tables"]["per_m"]
    assert [int(r["exact_count"]) for r in rows] == [1, 3, 5, 1]
    assert [int(r["s_count"]) for r in rows] == [1, 4, 9, 10]


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\ngroup = gupta_sidki\np = 3\nseed = 9\nlevel = 2\n")
    env = envelope(["info", "--config", str(cfg)], capsys)[1]
    assert env["seed"] == 9 and env["result"]["p"] == 3
    env = envelope(["info", "--config", str(cfg), "--seed", "1", "--p", "5"], capsys)[1]
    assert env["seed"] == 1 and env["result"]["p"] == 5


def test_dsl_definition_file(tmp_path, capsys):
    text = envelope(["info"], capsys)[1]["result"]["definition"]
    f = tmp_path / "mine.grp"
    f.write_text(text)
    code, env = envelope(["quotient", "--def", str(f), "--level", "3"], capsys)
    assert code == 0 and int(env["result"]["order"]) == 128


@pytest.mark.parametrize("argv", [
    ["frobnicate"],
    ["info", "--budget-mem", "0"],
    ["info", "--jobs", "0"],
    ["info", "--group", "nonesuch"],
    ["info", "--config", "/nonexistent/file"],
])
def test_usage_errors_exit_1(argv, capsys):
    assert run(argv, capsys)[0] == 1


def test_budget_exhaustion_exits_2_with_token(tmp_path, capsys):
    code, env = envelope(["enumerate", "--level", "5", "--max-m", "6", "--budget-mem", "64K",
                          "--budget-disk", "64K", "--workdir", str(tmp_path)], capsys)
    assert code == 2 and env["status"] == "budget" and env["resume_token"]


def test_verification_failure_exits_3(capsys):
    code, env = envelope(["verify", "sandwich", "--level", "3", "--max-m", "1"], capsys)
    assert code == 3 and env["status"] == "violation" and env["result"]["upper_violations"]


def test_stage_search_not_found_is_reported(capsys):
    code, env = envelope(["stage-search", "--level", "3", "--max-m", "3", "--f", "1:1000000,2:1000000,3:1000000"], capsys)
    assert code == 0 and env["result"]["found"] is False and env["result"]["exploratory"]


def test_console_entry_point_runs_as_module():
    out = subprocess.run([sys.executable, "-m", "branchlab.cli", "info"], capture_output=True, text=True, check=True)
    assert json.loads(out.stdout)["result"]["p"] == 2
