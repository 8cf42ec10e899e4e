"""Acceptance criteria 1-11; a PASS/FAIL line per criterion is printed at the end
of the pytest run (see conftest.py).  Criteria 7 and 10 take several minutes."""

import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pytest

from curio import program as P
from curio import runtime as R
from curio.autodiff import AdamState, adam_step
from curio.enumeration import EnumerationConfig, enumerate_programs
from curio.export import read_cache
from curio.lifetime import run_lifetime, trial_seed_for
from curio.ppo import AgentConfig
from curio.pruning import behavioral_duplicate_test, triviality_test
from curio.search import (CandidateRecord, SearchConfig, Stage, early_stop_rule, featurize,
                          found_fraction, replay_early_stopping, replay_guided_order,
                          replay_random_order, run_search, top_keys)
from curio.typesys import image_binding, vector_binding

from test_autodiff import OPS, _probe
from test_enumeration import SUBSET, brute_force
from test_pruning import SELF_SUBTRACT, SQUARED_NORM
from test_typesys import golden_rows, registry_rows

DATA = os.path.join(os.path.dirname(__file__), "data")
CACHE = os.path.join(DATA, "gridroom_cache.tsv")


def _cache():
    if not os.path.exists(CACHE):
        pytest.fail(f"score cache missing: run scripts/build_score_cache.py to create {CACHE}")
    return read_cache(CACHE)


# 1 -------------------------------------------------------------------------

def test_c01_registry_fidelity():
    assert registry_rows() == golden_rows()


# 2 -------------------------------------------------------------------------

def test_c02_autodiff():
    worst = {name: max(_probe(fn, shapes, s) for s in range(100)) for name, (fn, shapes) in OPS.items()}
    print("worst relative gradient error", max(worst.values()))
    assert max(worst.values()) <= 1e-4, {k: v for k, v in worst.items() if v > 1e-4}
    rng = np.random.default_rng(0)
    w, g = rng.normal(size=7), rng.normal(size=7)
    m, v = 0.1 * g, 0.001 * g * g
    hand = w - 1e-3 * (m / 0.1) / (np.sqrt(v / 0.001) + 1e-8)
    new, _ = adam_step([w], [g], AdamState(learning_rate=1e-3))
    assert np.max(np.abs(new[0] - hand)) <= 1e-10


# 3 -------------------------------------------------------------------------

def test_c03_reference_programs():
    assert len(P.INTRINSIC_REFERENCES) == 10 and len(P.COMBINER_REFERENCES) == 3
    for name in P.REFERENCE_NAMES:
        g = P.build_reference_program(name)
        for binding in (image_binding(), vector_binding()):
            assert P.validate_program(g, binding).ok, name
        text = P.serialize(g)
        assert P.serialize(P.deserialize(text)).encode() == text.encode()
        assert P.deserialize(text).structurally_equal(g)
    assert P.countable_ops(P.build_reference_program("fast")) == 5


# 4 -------------------------------------------------------------------------

def test_c04_runtime_semantics():
    binding = image_binding()
    rng = np.random.default_rng(0)
    inst = R.instantiate(P.build_reference_program("rnd"), binding, seed=0)
    frozen = inst.weights["w1"].flat().tobytes()
    for _ in range(1000):
        s = rng.random((5, 4, 10, 10))
        R.step_batch(inst, R.TransitionBatch(s, rng.integers(0, 3, 5), rng.random((5, 4, 10, 10)), np.zeros(5)))
    assert inst.weights["w1"].flat().tobytes() == frozen

    inst = R.instantiate(P.build_reference_program("rnd"), binding, seed=1)
    states = rng.random((5, 4, 10, 10))
    visit = R.TransitionBatch(states, np.zeros(5, dtype=int), states, np.zeros(5))
    rewards = [R.step_batch(inst, visit).mean() for _ in range(200)]
    print("rnd mean reward visits 1-100", np.mean(rewards[:100]), "101-200", np.mean(rewards[100:]))
    assert np.mean(rewards[100:]) < np.mean(rewards[:100])

    inst = R.instantiate(P.build_reference_program("fast"), binding, seed=2)
    s = rng.random((5, 4, 10, 10))
    out = R.step_batch(inst, R.TransitionBatch(s, rng.integers(0, 3, 5), s.copy(), np.zeros(5)))
    assert np.all(out == 0.0)


# 5 -------------------------------------------------------------------------

def test_c05_combiner():
    inst = R.instantiate(P.build_reference_program("combiner_discovered"), vector_binding(), seed=0)
    for i in (0.0, 0.2, 1.7, 40.0):
        assert R.combiner_step(inst, i, 3.0, 0.0) == i
    for r in (-2.0, 0.0, 0.7, 5.0):
        assert R.combiner_step(inst, 0.0, r, 1.0) == r
    i, r, t = 0.5, 2.0, 0.5
    a = 1 + i - t
    assert abs(R.combiner_step(inst, i, r, t) - (a * i + t * r) / (abs(a) + abs(t))) <= 1e-12
    assert abs(R.combiner_step(inst, i, r, t) - 1.0) <= 1e-12


# 6 -------------------------------------------------------------------------

def test_c06_pruning():
    assert triviality_test(P.deserialize(SQUARED_NORM)).prunable
    for name in ("rnd", "fast", "inverse_features", "ensemble_disagreement", "cycle_consistency"):
        assert not triviality_test(P.build_reference_program(name)).prunable, name
    cfg = EnumerationConfig()
    assert behavioral_duplicate_test(P.deserialize(SELF_SUBTRACT), P.build_reference_program("constant_zero"), cfg)
    assert not behavioral_duplicate_test(P.build_reference_program("fast"), P.build_reference_program("rnd"), cfg)


# 7 -------------------------------------------------------------------------

def test_c07_enumeration_oracle_subset():
    ours = {P.canonical_key(g).canonical_string
            for g in enumerate_programs(EnumerationConfig(op_budget=4, registry=SUBSET))}
    assert ours == brute_force(SUBSET, 4)


def test_c07_fast_at_budget_five_full_registry():
    key = P.canonical_key(P.build_reference_program("fast")).hex
    found = any(P.canonical_key(g).hex == key for g in enumerate_programs(EnumerationConfig(op_budget=5)))
    assert found


# 8 -------------------------------------------------------------------------

def test_c08_early_stopping():
    assert early_stop_rule(4.0, 1.0, 10.0, 2.5)
    assert not early_stop_rule(4.1, 1.0, 10.0, 2.5)
    cache = _cache()
    assert len(cache) >= 100
    outcomes = replay_early_stopping(cache, capacity=16, seed=0)
    below = [final < bench_min for _, _, final, bench_min in outcomes]
    print(f"stopped {len(outcomes)} of {len(cache)}; below benchmark minimum {np.mean(below) if below else float('nan'):.3f}")
    assert outcomes, "nothing was stopped"
    assert np.mean(below) >= 0.9


# 9 -------------------------------------------------------------------------

def test_c09_search_efficiency():
    cache = _cache()
    assert len(cache) >= 200
    top = top_keys(cache, 0.01)
    guided = np.mean([found_fraction(replay_guided_order(cache, s), top, 0.5) for s in range(20)])
    rand = np.mean([found_fraction(replay_random_order(cache, s), top, 0.5) for s in range(20)])
    print(f"top {len(top)} of {len(cache)}: guided {guided:.3f}, random {rand:.3f} after 50%")
    assert guided >= 0.8
    assert abs(rand - 0.5) <= 0.15


# 10 ------------------------------------------------------------------------

def _gridroom_scores(name):
    comb = P.build_reference_program("combiner_intrinsic_only")
    return np.array([run_lifetime("gridroom", P.build_reference_program(name), comb,
                                  trial_seed=trial_seed_for(0, t)).score for t in range(5)])


def test_c10_end_to_end_gridroom():
    zero = _gridroom_scores("constant_zero")
    ok = True
    for name in ("fast", "rnd"):
        x = _gridroom_scores(name)
        pooled = np.sqrt((x.var(ddof=1) + zero.var(ddof=1)) / 2)
        margin = (x.mean() - zero.mean()) / pooled
        print(f"{name}: {x.mean():.1f} vs constant_zero {zero.mean():.1f}, {margin:+.2f} pooled sd")
        ok = ok and margin > 2.0
    assert ok


# 11 ------------------------------------------------------------------------

def _small_search(pool=None):
    names = ["rnd", "fast", "inverse_features", "ensemble_disagreement", "constant_one", "gaussian_noise"]
    cands = []
    for n in names:
        g = P.build_reference_program(n)
        cands.append(CandidateRecord(P.canonical_key(g).hex, g, featurize(g)))
    cfg = SearchConfig(stages=(Stage("bandit", 2, 48, 3), Stage("pointmaze", 1, 500, 2)),
                       benchmark_size=2, seed=3, agent=AgentConfig(segment=16))
    res = run_search(cands, P.build_reference_program("combiner_discovered"), cfg, pool=pool)
    return res.evaluated_order, res.ranking, {
        k: [(r.env_id, r.trial_seed, r.status, r.score, r.curve.encode()) for r in rec.results]
        for k, rec in res.records.items()}


def test_c11_determinism():
    comb = P.build_reference_program("combiner_discovered")
    a = run_lifetime("gridroom", P.build_reference_program("cycle_consistency"), comb, trial_seed=5,
                     record_rewards=True)
    b = run_lifetime("gridroom", P.build_reference_program("cycle_consistency"), comb, trial_seed=5,
                     record_rewards=True)
    assert a.curve.encode() == b.curve.encode()
    assert np.array(a.reward_log["combined"]).tobytes() == np.array(b.reward_log["combined"]).tobytes()
    first = _small_search()
    assert _small_search() == first
    with ProcessPoolExecutor(2) as pool:
        assert _small_search(pool) == first
