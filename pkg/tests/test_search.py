import numpy as np
import pytest

from curio import program as P
from curio.lifetime import LearningCurve
from curio.search import (COMPLETED, EARLY_STOPPED, FAILED, BenchmarkSet, CachedCandidate,
                          CandidateRecord, EvalRequest, SearchConfig, Stage, early_stop_check,
                          early_stop_rule, efficiency_curve, evaluate_candidate, featurize,
                          found_fraction, predict_score, replay_early_stopping, replay_guided_order,
                          replay_random_order, run_search, select_next, standardized_scores,
                          top_keys, update_benchmark)
from curio.ppo import AgentConfig
from curio.store import ResultStore

COMBINER = P.build_reference_program("combiner_extrinsic_only")
SMALL_AGENT = AgentConfig(segment=16)


# early-stop inequality: stop iff mean_p <= mean_top - 2*std_top - std_p

@pytest.mark.parametrize("mp,sp,mt,st,expected", [
    (5.0, 1.0, 10.0, 2.0, True),    # 5 <= 10 - 4 - 1
    (5.0, 0.0, 10.0, 2.5, True),    # boundary: 5 <= 5
    (5.0, 0.1, 10.0, 2.5, False),   # 5 > 4.9
    (9.0, 0.0, 10.0, 0.0, True),
    (10.0, 0.0, 10.0, 0.0, True),   # equality counts as stopped
    (10.5, 0.0, 10.0, 0.0, False),
])
def test_early_stop_rule(mp, sp, mt, st, expected):
    assert early_stop_rule(mp, sp, mt, st) is expected


def test_early_stop_check_uses_population_std_and_needs_two_members():
    vals = [1.0, 3.0]  # mean 2, std 1
    assert early_stop_check(vals, (6.0, 1.5, 3))       # 2 <= 6 - 3 - 1
    assert not early_stop_check(vals, (5.9, 1.5, 3))
    assert not early_stop_check(vals, (100.0, 0.0, 1))


def test_predict_score_against_brute_force():
    rng = np.random.default_rng(0)
    evaluated = [(rng.integers(0, 3, size=6), float(rng.normal())) for _ in range(40)]
    q = rng.integers(0, 3, size=6)
    dists = [float(np.linalg.norm(f - q)) for f, _ in evaluated]
    idx = sorted(range(40), key=lambda i: (dists[i], i))[:10]
    assert abs(predict_score(q, evaluated, 10) - np.mean([evaluated[i][1] for i in idx])) < 1e-12
    with pytest.raises(ValueError):
        predict_score(q, [], 10)


def test_select_next_greedy_and_tie_break():
    pending = [CandidateRecord(k, None, np.zeros(1)) for k in ("c", "a", "b")]
    rng = np.random.default_rng(0)
    pick = select_next(pending, lambda c: 1.0, 0.0, rng)
    assert pick.key == "a"
    pick = select_next(pending, lambda c: {"a": 0, "b": 2, "c": 1}[c.key], 0.0, rng)
    assert pick.key == "b"


def test_select_next_explores_at_rate_epsilon():
    pending = [CandidateRecord(str(k), None, np.zeros(1)) for k in range(10)]
    rng = np.random.default_rng(1)
    picks = [select_next(pending, lambda c: -int(c.key), 0.3, rng).key for _ in range(2000)]
    frac_non_greedy = np.mean([p != "0" for p in picks])
    assert abs(frac_non_greedy - 0.3 * 0.9) < 0.04


def test_benchmark_keeps_top_k():
    bench = BenchmarkSet(3)
    for score, key in [(1, "a"), (5, "b"), (3, "c"), (4, "d"), (0.5, "e")]:
        update_benchmark(bench, score, key, {100: score, 200: 2 * score})
    assert sorted(bench.scores()) == [3, 4, 5]
    mean, std, count = bench.at(100)
    assert count == 3 and mean == 4.0 and abs(std - np.std([3, 4, 5])) < 1e-12
    assert bench.at(999) == (0.0, 0.0, 0)


def _req(name, stats, lifetime=32):
    g = P.build_reference_program(name)
    return EvalRequest(P.canonical_key(g).hex, g, COMBINER, Stage("bandit", 2, lifetime), (1, 2),
                       stats, SMALL_AGENT)


def test_evaluate_candidate_completes_without_benchmark():
    res = evaluate_candidate(_req("rnd", None))
    assert [r.status for r in res] == [COMPLETED, COMPLETED]
    assert all(len(r.curve.checkpoints) == 32 for r in res)


def test_evaluate_candidate_stops_against_strong_benchmark():
    stats = {s: (10.0, 0.0, 5) for s in range(1, 33)}
    res = evaluate_candidate(_req("rnd", stats))
    assert [r.status for r in res] == [EARLY_STOPPED, EARLY_STOPPED]
    assert all(r.curve.steps == [1] for r in res)


def _candidates(names):
    out = []
    for n in names:
        g = P.build_reference_program(n)
        out.append(CandidateRecord(P.canonical_key(g).hex, g, featurize(g)))
    return out


NAMES = ["rnd", "fast", "inverse_features", "constant_one", "gaussian_noise", "cycle_consistency"]


def _config(**kw):
    base = dict(stages=(Stage("bandit", 2, 32, 3), Stage("bandit", 1, 48, 2)), benchmark_size=2,
                seed=4, agent=SMALL_AGENT)
    base.update(kw)
    return SearchConfig(**base)


def test_run_search_ladder_and_ranking():
    result = run_search(_candidates(NAMES), COMBINER, _config())
    assert sorted(result.stage_members[0]) == sorted(c.key for c in _candidates(NAMES))
    assert len(result.stage_members[1]) == 3
    assert set(result.ranking) == set(result.stage_members[1])


def test_run_search_is_deterministic():
    a = run_search(_candidates(NAMES), COMBINER, _config())
    b = run_search(_candidates(NAMES), COMBINER, _config())
    assert a.evaluated_order == b.evaluated_order and a.ranking == b.ranking
    for k in a.records:
        ra = [(r.status, r.score, r.curve.encode()) for r in a.records[k].results]
        rb = [(r.status, r.score, r.curve.encode()) for r in b.records[k].results]
        assert ra == rb


def test_run_search_resumes_from_store(tmp_path):
    path = str(tmp_path / "results.tsv")
    full = run_search(_candidates(NAMES), COMBINER, _config(), store=ResultStore(path))
    with open(path, encoding="utf-8") as fh:
        lines = fh.readlines()
    # keep only the header and the first candidate's block, then resume
    with open(path, "w", encoding="utf-8") as fh:
        fh.writelines(lines[:3])
    resumed = run_search(_candidates(NAMES), COMBINER, _config(), store=ResultStore(path))
    assert resumed.ranking == full.ranking
    assert resumed.evaluated_order == full.evaluated_order


def test_run_search_stage_budget():
    result = run_search(_candidates(NAMES), COMBINER, _config(stage1_budget=4))
    assert len(result.stage_members[0]) == 4


def test_failed_candidate_gets_floor_and_search_continues():
    cands = _candidates(["rnd", "fast"])
    cands[0].graph = P.ProgramGraph("intrinsic", (), "missing")  # will not instantiate
    result = run_search(cands, COMBINER, _config(floor_score=-1.0))
    bad = result.records[cands[0].key]
    assert bad.status_on("bandit") == FAILED and bad.score("bandit") == -1.0
    assert result.ranking[-1] == cands[0].key


def test_empty_search_raises():
    with pytest.raises(ValueError):
        run_search([], COMBINER, _config())


def test_standardized_scores():
    recs = _candidates(["rnd", "fast"])
    from curio.search import TrialResult
    recs[0].results = [TrialResult("x", 0, COMPLETED, 1.0, LearningCurve()),
                       TrialResult("y", 0, COMPLETED, 10.0, LearningCurve())]
    recs[1].results = [TrialResult("x", 0, COMPLETED, 3.0, LearningCurve()),
                       TrialResult("y", 0, COMPLETED, 0.0, LearningCurve())]
    z = standardized_scores(recs, ["x", "y"])
    assert abs(z[recs[0].key]) < 1e-12 and abs(z[recs[1].key]) < 1e-12


def _synthetic_cache(n=120, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        feats = rng.integers(0, 3, size=5)
        quality = float(feats[0] * 10 + rng.normal())
        curves = []
        for t in range(2):
            c = LearningCurve()
            for s in range(1, 6):
                c.add(s * 100, quality * s / 5 + rng.normal(scale=0.1))
            curves.append(c)
        out.append(CachedCandidate(f"k{i:04d}", feats, float(np.mean([c.value_at(500) for c in curves])), curves))
    return out


def test_replay_orders_are_permutations():
    cache = _synthetic_cache()
    keys = sorted(c.key for c in cache)
    assert sorted(replay_guided_order(cache, 0)) == keys
    assert sorted(replay_random_order(cache, 0)) == keys


def test_guided_order_beats_random_on_structured_scores():
    cache = _synthetic_cache()
    top = top_keys(cache, 0.05)
    guided = np.mean([found_fraction(replay_guided_order(cache, s), top, 0.5) for s in range(5)])
    rand = np.mean([found_fraction(replay_random_order(cache, s), top, 0.5) for s in range(5)])
    assert guided > rand


def test_efficiency_curve_monotone():
    cache = _synthetic_cache()
    curve = efficiency_curve(replay_random_order(cache, 0), top_keys(cache, 0.05))
    assert curve[-1] == (1.0, 1.0)
    assert all(b[1] >= a[1] for a, b in zip(curve, curve[1:]))


def test_replay_early_stopping_outcomes():
    outcomes = replay_early_stopping(_synthetic_cache(), capacity=8, seed=0)
    assert outcomes
    below = [final < bench_min for _, _, final, bench_min in outcomes]
    assert np.mean(below) >= 0.9
