import pytest

from curio.config import ConfigError, ExperimentConfig, parse_config, parse_stages, render_config
from curio.lifetime import LearningCurve
from curio.search import COMPLETED, EARLY_STOPPED, Stage, TrialResult
from curio.store import ResultStore, format_result, parse_result


def _result(seed, score, status=COMPLETED):
    c = LearningCurve()
    c.add(500, score / 2)
    c.add(1000, score)
    return TrialResult("gridroom", seed, status, score, c)


def test_result_line_round_trip():
    r = _result(3, 0.1 + 0.2)
    key, back = parse_result(format_result("abc", r))
    assert key == "abc" and back.score == r.score and back.curve.checkpoints == r.curve.checkpoints


def test_store_persists_and_reloads(tmp_path):
    path = str(tmp_path / "r.tsv")
    s = ResultStore(path)
    s.append_results("k1", [_result(1, 10.0), _result(2, 12.0)])
    s.append_results("k2", [_result(1, 3.0, EARLY_STOPPED), _result(2, 4.0, EARLY_STOPPED)])
    again = ResultStore(path)
    assert again.has("k1", "gridroom", (1, 2))
    assert not again.has("k1", "gridroom", (1, 3))
    assert [r.score for r in again.results("k2", "gridroom", (1, 2))] == [3.0, 4.0]
    assert again.keys() == ["k1", "k2"] and again.envs() == ["gridroom"]


def test_store_skips_corrupted_lines(tmp_path, caplog):
    path = tmp_path / "r.tsv"
    s = ResultStore(str(path))
    s.append_results("k1", [_result(1, 10.0)])
    good = path.read_bytes()
    path.write_bytes(good + b"k2\tgridroom\t1\tcompl")  # torn write
    s.append_results("k3", [_result(1, 5.0)])  # appended by another process
    with open(path, "ab") as fh:
        fh.write(b"\n")
    again = ResultStore(str(path))
    assert again.has("k1", "gridroom", (1,))
    assert len(again.skipped) == 1 and again.skipped[0] == len(good)
    assert "byte offset" in caplog.text


def test_config_defaults_and_overrides():
    cfg = parse_config("""
        # comment line
        op_budget = 3   # trailing comment
        epsilon = 0.25
        early_stopping = false
        stages = gridroom:5:2500:8, pointmaze:3:10000:4
        registry = nn_s_to_f, minimize
    """)
    assert cfg.op_budget == 3 and cfg.epsilon == 0.25 and cfg.early_stopping is False
    assert cfg.stages == (Stage("gridroom", 5, 2500, 8), Stage("pointmaze", 3, 10000, 4))
    assert cfg.registry == ("nn_s_to_f", "minimize")
    assert cfg.knn_k == ExperimentConfig().knn_k


def test_config_round_trip():
    cfg = parse_config("op_budget = 5\nseed = 9\n")
    assert parse_config(render_config(cfg)) == cfg


@pytest.mark.parametrize("text", ["nonsense = 1", "op_budget 3", "op_budget = three",
                                  "early_stopping = maybe", "stages = gridroom:5:2500"])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_parse_stages_needs_one():
    with pytest.raises(ConfigError):
        parse_stages(" , ")
