"""Candidate ordering, early stopping and the environment ladder."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import program as P
from . import typesys as ts
from .lifetime import FLOOR_SCORE, LearningCurve, lifetime_steps, trial_seed_for
from .ppo import AgentConfig

log = logging.getLogger(__name__)

PENDING, RUNNING, EARLY_STOPPED, COMPLETED, FAILED = (
    "pending", "running", "early_stopped", "completed", "failed")
STATUSES = (PENDING, RUNNING, EARLY_STOPPED, COMPLETED, FAILED)

FEATURE_NAMES = tuple(s.name for s in ts.list_operations("curiosity"))


def featurize(g: P.ProgramGraph) -> np.ndarray:
    """Occurrence count of every registry op (inputs and weight modules excluded)."""
    counts = P.op_counts(g)
    return np.array([counts.get(name, 0) for name in FEATURE_NAMES], dtype=np.int64)


# ---------------------------------------------------------------------------
# records


@dataclass
class TrialResult:
    env_id: str
    trial_seed: int
    status: str
    score: float
    curve: LearningCurve


@dataclass
class CandidateRecord:
    key: str
    graph: Optional[P.ProgramGraph]
    features: np.ndarray
    results: list = field(default_factory=list)
    status: str = PENDING
    order: int = -1  # evaluation order, used to break predictor ties

    def trials(self, env_id: str) -> list:
        return [r for r in self.results if r.env_id == env_id]

    def score(self, env_id: Optional[str] = None) -> Optional[float]:
        rs = self.results if env_id is None else self.trials(env_id)
        if not rs:
            return None
        return float(np.mean([r.score for r in rs]))

    def status_on(self, env_id: str) -> str:
        rs = self.trials(env_id)
        if not rs:
            return PENDING
        return _merge_status([r.status for r in rs])


def _merge_status(statuses) -> str:
    if FAILED in statuses:
        return FAILED
    if EARLY_STOPPED in statuses:
        return EARLY_STOPPED
    return COMPLETED


# ---------------------------------------------------------------------------
# score prediction and selection


def predict_score(features, evaluated: Sequence, k: int = 10) -> float:
    """Mean score of the k nearest evaluated (features, score) pairs.

    ``evaluated`` is in evaluation order; equal distances favour earlier entries.
    """
    if not evaluated:
        raise ValueError("no evaluated candidates to predict from")
    feats = np.array([np.asarray(f, dtype=np.float64) for f, _ in evaluated])
    scores = np.array([s for _, s in evaluated], dtype=np.float64)
    dist = np.sqrt(((feats - np.asarray(features, dtype=np.float64)) ** 2).sum(axis=1))
    nearest = np.argsort(dist, kind="stable")[:k]
    return float(scores[nearest].mean())


def select_next(pending: Sequence, predict: Optional[Callable], epsilon: float,
                rng: np.random.Generator, key=lambda c: c.key):
    """Greedy on predicted score with probability 1-epsilon, otherwise uniform.

    Ties go to the smallest key.  Without a predictor the choice is uniform.
    """
    if not pending:
        raise ValueError("nothing pending")
    explore = rng.random() < epsilon
    if explore or predict is None:
        return pending[int(rng.integers(len(pending)))]
    best, best_val = None, None
    for c in pending:
        v = predict(c)
        if best is None or v > best_val or (v == best_val and key(c) < key(best)):
            best, best_val = c, v
    return best


# ---------------------------------------------------------------------------
# benchmark and early stopping


def early_stop_rule(mean_program: float, std_program: float, mean_top: float, std_top: float) -> bool:
    return mean_program <= mean_top - 2.0 * std_top - std_program


@dataclass
class BenchmarkSet:
    capacity: int = 16
    members: list = field(default_factory=list)  # (score, key, {step: mean value})

    def __post_init__(self):
        self._stats = {}

    def scores(self) -> list:
        return [m[0] for m in self.members]

    def min_score(self) -> Optional[float]:
        return min(self.scores()) if self.members else None

    def _recompute(self):
        steps = {}
        for _, _, curve in self.members:
            for s, v in curve.items():
                steps.setdefault(s, []).append(v)
        self._stats = {s: (float(np.mean(v)), float(np.std(v)), len(v)) for s, v in steps.items()}

    def at(self, step: int):
        """(mean_top, std_top, member count) at ``step``."""
        return self._stats.get(step, (0.0, 0.0, 0))

    def snapshot(self) -> dict:
        return dict(self._stats)

    def copy(self) -> "BenchmarkSet":
        out = BenchmarkSet(self.capacity, list(self.members))
        out._recompute()
        return out


def update_benchmark(bench: BenchmarkSet, score: float, key: str, curve: dict) -> bool:
    """Insert a completed candidate if it beats the current K-th best."""
    if len(bench.members) < bench.capacity:
        bench.members.append((float(score), key, dict(curve)))
    else:
        worst = min(range(len(bench.members)), key=lambda i: (bench.members[i][0], bench.members[i][1]))
        if score <= bench.members[worst][0]:
            return False
        bench.members[worst] = (float(score), key, dict(curve))
    bench.members.sort(key=lambda m: (-m[0], m[1]))
    bench._recompute()
    return True


def early_stop_check(values: Sequence[float], stats) -> bool:
    """``values``: per-trial metric at one checkpoint; ``stats``: bench (mean, std, count)."""
    mean_top, std_top, count = stats
    if count < 2:
        return False
    return early_stop_rule(float(np.mean(values)), float(np.std(values)), mean_top, std_top)


def mean_curve(curves: Sequence[LearningCurve]) -> dict:
    steps = set.intersection(*(set(c.steps) for c in curves)) if curves else set()
    return {s: float(np.mean([c.value_at(s) for c in curves])) for s in sorted(steps)}


# ---------------------------------------------------------------------------
# candidate evaluation


@dataclass(frozen=True)
class Stage:
    env_id: str
    trials: int
    lifetime: int
    promote: int = 16


@dataclass
class EvalRequest:
    key: str
    intrinsic: P.ProgramGraph
    combiner: P.ProgramGraph
    stage: Stage
    trial_seeds: tuple
    bench_stats: Optional[dict]  # step -> (mean, std, count); None disables early stopping
    agent: AgentConfig
    floor_score: float = FLOOR_SCORE


def evaluate_candidate(req: EvalRequest) -> list:
    """Run all trials in lockstep, checking the early-stop rule at each checkpoint."""
    gens = [lifetime_steps(req.stage.env_id, req.intrinsic, req.combiner, req.agent, seed,
                           lifetime=req.stage.lifetime, floor_score=req.floor_score)
            for seed in req.trial_seeds]
    curves = [LearningCurve() for _ in gens]
    finished = [None] * len(gens)
    while True:
        step_vals = []
        for i, gen in enumerate(gens):
            if finished[i] is not None:
                continue
            try:
                s, v = next(gen)
                curves[i].add(s, v)
                step_vals.append((s, v))
            except StopIteration as stop:
                finished[i] = stop.value
        if any(r is not None and r.failed for r in finished):
            return [TrialResult(req.stage.env_id, seed, FAILED, req.floor_score, curves[i])
                    for i, seed in enumerate(req.trial_seeds)]
        if all(r is not None for r in finished):
            return [TrialResult(req.stage.env_id, seed, COMPLETED, finished[i].score, finished[i].curve)
                    for i, seed in enumerate(req.trial_seeds)]
        if req.bench_stats is not None and step_vals:
            step = step_vals[0][0]
            if all(s == step for s, _ in step_vals) and len(step_vals) == len(gens):
                stats = req.bench_stats.get(step, (0.0, 0.0, 0))
                if early_stop_check([v for _, v in step_vals], stats):
                    for gen in gens:
                        gen.close()
                    return [TrialResult(req.stage.env_id, seed, EARLY_STOPPED, curves[i].checkpoints[-1][1],
                                        curves[i]) for i, seed in enumerate(req.trial_seeds)]


def _evaluate_safely(req: EvalRequest) -> list:
    try:
        return evaluate_candidate(req)
    except Exception as e:  # worker failure: floor score, search goes on
        log.warning("candidate %s failed: %s", req.key, e)
        return [TrialResult(req.stage.env_id, seed, FAILED, req.floor_score, LearningCurve())
                for seed in req.trial_seeds]


# ---------------------------------------------------------------------------
# the search loop


@dataclass
class SearchConfig:
    stages: tuple = (Stage("gridroom", 5, 2500, 16),)
    benchmark_size: int = 16
    epsilon: float = 0.1
    knn_k: int = 10
    seed: int = 0
    early_stopping: bool = True
    stage1_budget: Optional[int] = None
    round_size: int = 1
    floor_score: float = FLOOR_SCORE
    agent: AgentConfig = field(default_factory=AgentConfig)


@dataclass
class SearchResult:
    records: dict
    ranking: list          # keys, best first
    stage_members: list    # keys evaluated per stage
    evaluated_order: list  # stage-1 evaluation order


def _stage_seeds(cfg: SearchConfig, stage_index: int, stage: Stage) -> tuple:
    # the seed depends on the trial and stage, never on the program
    return tuple(trial_seed_for(cfg.seed + 1000 * stage_index, t) for t in range(stage.trials))


def run_search(candidates: Sequence[CandidateRecord], combiner: P.ProgramGraph, cfg: SearchConfig,
               store=None, pool=None) -> SearchResult:
    """Evaluate candidates stage by stage.

    ``store`` (optional) supplies already-finished results and receives new
    ones, which makes the search resumable.  ``pool`` is any object with a
    ``map`` method; results are merged in submission order so the outcome is
    independent of the worker count.
    """
    if not candidates:
        raise ValueError("nothing to search")
    rng = np.random.default_rng(cfg.seed)
    records = {c.key: c for c in candidates}
    stage_members = []
    mapper = pool.map if pool is not None else map

    def run_batch(reqs):
        todo = [r for r in reqs if store is None or not store.has(r.key, r.stage.env_id, r.trial_seeds)]
        fresh = dict(zip([r.key for r in todo], mapper(_evaluate_safely, todo)))
        out = []
        for r in reqs:
            if r.key in fresh:
                results = fresh[r.key]
                if store is not None:
                    store.append_results(r.key, results)
            else:
                results = store.results(r.key, r.stage.env_id, r.trial_seeds)
            out.append((r, results))
        return out

    # stage 1: guided order with early stopping
    stage0 = cfg.stages[0]
    seeds0 = _stage_seeds(cfg, 0, stage0)
    bench = BenchmarkSet(cfg.benchmark_size)
    pending = sorted(candidates, key=lambda c: c.key)
    budget = len(pending) if cfg.stage1_budget is None else min(cfg.stage1_budget, len(pending))
    evaluated = []  # (features, score) in evaluation order
    order = []
    while len(order) < budget:
        predict = None
        if evaluated:
            snapshot = list(evaluated)
            predict = lambda c, snap=snapshot: predict_score(c.features, snap, cfg.knn_k)
        chosen = []
        for _ in range(min(cfg.round_size, budget - len(order))):
            c = select_next(pending, predict, cfg.epsilon, rng)
            pending.remove(c)
            chosen.append(c)
        stats = bench.snapshot() if cfg.early_stopping else None
        reqs = [EvalRequest(c.key, c.graph, combiner, stage0, seeds0, stats, cfg.agent, cfg.floor_score)
                for c in chosen]
        for req, results in run_batch(reqs):
            c = records[req.key]
            c.results.extend(results)
            c.order = len(order)
            order.append(c.key)
            c.status = c.status_on(stage0.env_id)
            score = c.score(stage0.env_id)
            if c.status in (COMPLETED, EARLY_STOPPED):
                evaluated.append((c.features, score))
            if c.status == COMPLETED:
                update_benchmark(bench, score, c.key, mean_curve([r.curve for r in results]))
    stage_members.append(list(order))

    # later stages: only the best of the previous stage
    prev_env = stage0.env_id
    current = [records[k] for k in order]
    for si, stage in enumerate(cfg.stages[1:], start=1):
        ranked = _rank(current, prev_env)
        promoted = ranked[:cfg.stages[si - 1].promote]
        seeds = _stage_seeds(cfg, si, stage)
        reqs = [EvalRequest(c.key, c.graph, combiner, stage, seeds, None, cfg.agent, cfg.floor_score)
                for c in promoted]
        for req, results in run_batch(reqs):
            c = records[req.key]
            c.results.extend(results)
            c.status = c.status_on(stage.env_id)
        stage_members.append([c.key for c in promoted])
        current = promoted
        prev_env = stage.env_id
    ranking = [c.key for c in _rank(current, prev_env)]
    return SearchResult(records, ranking, stage_members, order)


def _rank(cands, env_id):
    """Completed before early-stopped before failed; then by mean score; then key."""
    prio = {COMPLETED: 0, EARLY_STOPPED: 1, FAILED: 2, PENDING: 3, RUNNING: 3}

    def sort_key(c):
        s = c.score(env_id)
        return (prio[c.status_on(env_id)], -(s if s is not None else -np.inf), c.key)

    return sorted(cands, key=sort_key)


def standardized_scores(records: Sequence[CandidateRecord], env_ids: Sequence[str]) -> dict:
    """Mean per-environment z-score for candidates evaluated on every env."""
    rows = [c for c in records if all(c.score(e) is not None for e in env_ids)]
    if not rows:
        return {}
    z = np.zeros(len(rows))
    for e in env_ids:
        s = np.array([c.score(e) for c in rows])
        sd = s.std()
        z += (s - s.mean()) / sd if sd > 0 else 0.0
    return {c.key: float(v / len(env_ids)) for c, v in zip(rows, z)}


# ---------------------------------------------------------------------------
# replay harnesses over cached full evaluations


@dataclass
class CachedCandidate:
    key: str
    features: np.ndarray
    score: float
    curves: list  # per-trial LearningCurve


def replay_guided_order(cache: Sequence[CachedCandidate], seed: int, epsilon: float = 0.1,
                        k: int = 10) -> list:
    rng = np.random.default_rng(seed)
    pending = sorted(cache, key=lambda c: c.key)
    evaluated, order = [], []
    while pending:
        predict = None
        if evaluated:
            snap = list(evaluated)
            predict = lambda c, snap=snap: predict_score(c.features, snap, k)
        c = select_next(pending, predict, epsilon, rng)
        pending.remove(c)
        evaluated.append((c.features, c.score))
        order.append(c.key)
    return order


def replay_random_order(cache: Sequence[CachedCandidate], seed: int) -> list:
    keys = sorted(c.key for c in cache)
    rng = np.random.default_rng(seed)
    return [keys[i] for i in rng.permutation(len(keys))]


def top_keys(cache: Sequence[CachedCandidate], fraction: float = 0.01) -> set:
    n = max(1, int(round(fraction * len(cache))))
    return {c.key for c in sorted(cache, key=lambda c: (-c.score, c.key))[:n]}


def found_fraction(order: Sequence[str], top: set, evaluated_fraction: float) -> float:
    n = int(round(evaluated_fraction * len(order)))
    return len(top & set(order[:n])) / len(top)


def efficiency_curve(order: Sequence[str], top: set) -> list:
    """(fraction evaluated, fraction of top found) after each evaluation."""
    out, hits = [], 0
    for i, key in enumerate(order, start=1):
        hits += key in top
        out.append((i / len(order), hits / len(top)))
    return out


def replay_early_stopping(cache: Sequence[CachedCandidate], capacity: int, seed: int = 0):
    """Process the cache in a seeded order with full curves known in advance.

    Returns (stopped, outcomes) where each outcome is (key, step, final score,
    benchmark minimum at the time of stopping).
    """
    order = replay_random_order(cache, seed)
    by_key = {c.key: c for c in cache}
    bench = BenchmarkSet(capacity)
    outcomes = []
    for key in order:
        c = by_key[key]
        stopped_at = None
        for step in sorted(set.intersection(*(set(cv.steps) for cv in c.curves))):
            vals = [cv.value_at(step) for cv in c.curves]
            if early_stop_check(vals, bench.at(step)):
                stopped_at = step
                break
        if stopped_at is not None:
            outcomes.append((key, stopped_at, c.score, bench.min_score()))
        else:
            update_benchmark(bench, c.score, key, mean_curve(c.curves))
    return outcomes
