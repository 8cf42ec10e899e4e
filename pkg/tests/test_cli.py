import os
import subprocess
import sys

import pytest

from curio import program as P
from curio.cli import EXIT_NOTHING, EXIT_USAGE, main

CONFIG = """\
op_budget = 3
registry = nn_s_to_f, nn_s_to_f_detach, l2_distance, minimize, l2_norm
stages = bandit:2:24:3, pointmaze:1:500:2
benchmark_size = 2
env_a = bandit
env_b = pointmaze
export_env = bandit
efficiency_seeds = 3
top_fraction = 0.2
trials = 2
lifetime = 500
combiner = combiner_extrinsic_only
"""


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    cfg = d / "exp.cfg"
    cfg.write_text(CONFIG)
    out = d / "out"
    assert main(["--config", str(cfg), "--out", str(out), "enumerate"]) == 0
    assert main(["--config", str(cfg), "--out", str(out), "search"]) == 0
    return cfg, out


def test_enumerate_writes_programs_and_verdicts(workdir):
    _, out = workdir
    progs = [f for f in os.listdir(out / "programs") if f.endswith(".prog")]
    assert progs
    with open(out / "verdicts.tsv") as fh:
        lines = [l for l in fh if not l.startswith("#")]
    assert len([l for l in lines if l.rstrip().endswith("\tkept")]) == len(progs)
    for f in progs:
        g = P.deserialize((out / "programs" / f).read_text())
        assert P.canonical_key(g).hex + ".prog" == f


def test_search_writes_ranking(workdir):
    _, out = workdir
    rows = (out / "ranking.tsv").read_text().splitlines()
    assert rows[0].startswith("rank\tkey")
    assert len(rows) - 1 == 3  # stage one promotes three


def test_search_resume_is_identical(workdir):
    cfg, out = workdir
    before = (out / "ranking.tsv").read_text()
    results = (out / "results.tsv").read_text()
    assert main(["--config", str(cfg), "--out", str(out), "search"]) == 0
    assert (out / "ranking.tsv").read_text() == before
    assert (out / "results.tsv").read_text() == results  # nothing re-evaluated


@pytest.mark.parametrize("kind,columns", [
    ("scatter", "key\tbandit\tpointmaze"),
    ("distribution", "key\tmean\tmean_minus_std\tmean_plus_std"),
    ("search_efficiency", "fraction_evaluated\tguided_found\trandom_found"),
])
def test_exports_write_tsv_and_png(workdir, kind, columns):
    cfg, out = workdir
    assert main(["--config", str(cfg), "--out", str(out), "export", kind]) == 0
    assert (out / f"export_{kind}.tsv").read_text().splitlines()[0] == columns
    png = (out / f"export_{kind}.png").read_bytes()
    assert png[:8] == b"\x89PNG\r\n\x1a\n"


def test_export_names_missing_env(workdir, tmp_path, capsys):
    cfg, out = workdir
    bad = tmp_path / "bad.cfg"
    bad.write_text(CONFIG.replace("env_b = pointmaze", "env_b = pointmass"))
    assert main(["--config", str(bad), "--out", str(out), "export", "scatter"]) == 1
    assert "pointmass" in capsys.readouterr().err


def test_search_without_programs(tmp_path, capsys):
    assert main(["--out", str(tmp_path / "empty"), "search"]) == EXIT_NOTHING
    assert "nothing to search" in capsys.readouterr().out


def test_usage_errors(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("no_such_key = 1\n")
    assert main(["--config", str(bad), "search"]) == EXIT_USAGE
    assert main(["--workers", "0", "search"]) == EXIT_USAGE
    with pytest.raises(SystemExit) as e:
        main(["frobnicate"])
    assert e.value.code == 2


def test_eval_and_baselines(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("trials = 2\nlifetime = 40\ncombiner = combiner_extrinsic_only\ntrace = true\n")
    prog = tmp_path / "rnd.prog"
    prog.write_text(P.reference_text("rnd"))
    out = tmp_path / "o"
    assert main(["--config", str(cfg), "--out", str(out), "eval", str(prog), "bandit"]) == 0
    rows = (out / "eval_rnd_bandit.tsv").read_text().splitlines()
    assert len(rows) == 3
    trace = (out / "eval_rnd_bandit_trace.tsv").read_text().splitlines()
    assert trace[0] == "# trial 0" and len(trace[1].split("\t")) == 5
    assert main(["--config", str(cfg), "--out", str(out), "baselines", "bandit"]) == 0
    assert len((out / "baselines_bandit.tsv").read_text().splitlines()) == 5


def test_console_entry_point_runs():
    proc = subprocess.run([sys.executable, "-m", "curio", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "enumerate" in proc.stdout
