"""Plot-ready tables computed from the results store."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from . import program as P
from .lifetime import LearningCurve
from .search import (COMPLETED, CachedCandidate, efficiency_curve, featurize, replay_guided_order,
                     replay_random_order, top_keys)
from .store import ResultStore


class ExportError(ValueError):
    pass


def _require_env(store: ResultStore, env_id: str):
    if env_id not in store.envs():
        raise ExportError(f"no results for environment {env_id!r} in the store")


def _completed_scores(store: ResultStore, env_id: str) -> dict:
    out = {}
    for key, trials in store.by_key(env_id).items():
        if trials and all(t.status == COMPLETED for t in trials):
            out[key] = [t.score for t in trials]
    return out


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    x, y = np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
    if x.size < 2 or x.std() == 0 or y.std() == 0:
        return float("nan")
    return float(np.corrcoef(x, y)[0, 1])


def scatter_table(store: ResultStore, env_a: str, env_b: str):
    """Rows (key, score on env_a, score on env_b) and their Pearson correlation."""
    _require_env(store, env_a)
    _require_env(store, env_b)
    a, b = _completed_scores(store, env_a), _completed_scores(store, env_b)
    rows = [(k, float(np.mean(a[k])), float(np.mean(b[k]))) for k in sorted(set(a) & set(b))]
    r = pearson([x for _, x, _ in rows], [y for _, _, y in rows])
    return rows, r


def distribution_table(store: ResultStore, env_id: str):
    """Rows (key, mean, mean - std, mean + std) sorted by mean."""
    _require_env(store, env_id)
    rows = []
    for key, scores in _completed_scores(store, env_id).items():
        m, s = float(np.mean(scores)), float(np.std(scores))
        rows.append((key, m, m - s, m + s))
    rows.sort(key=lambda r: (r[1], r[0]))
    return rows


def cache_from_store(store: ResultStore, env_id: str, programs: dict) -> list:
    """Completed candidates with features, mean score and per-trial curves."""
    _require_env(store, env_id)
    out = []
    for key, trials in sorted(store.by_key(env_id).items()):
        if key not in programs or not all(t.status == COMPLETED for t in trials):
            continue
        out.append(CachedCandidate(key, featurize(programs[key]),
                                   float(np.mean([t.score for t in trials])),
                                   [t.curve for t in trials]))
    return out


def efficiency_table(cache: Sequence[CachedCandidate], seeds: int = 20, top_fraction: float = 0.01,
                     epsilon: float = 0.1, k: int = 10):
    """Rows (fraction evaluated, mean fraction of top found: guided, random)."""
    if not cache:
        raise ExportError("no completed candidates to replay")
    top = top_keys(cache, top_fraction)
    guided = np.zeros(len(cache))
    rand = np.zeros(len(cache))
    for s in range(seeds):
        guided += [f for _, f in efficiency_curve(replay_guided_order(cache, s, epsilon, k), top)]
        rand += [f for _, f in efficiency_curve(replay_random_order(cache, s), top)]
    n = len(cache)
    return [((i + 1) / n, float(guided[i] / seeds), float(rand[i] / seeds)) for i in range(n)]


def write_table(path: str, header: Sequence[str], rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(_fmt(v) for v in row) + "\n")


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


# ---------------------------------------------------------------------------
# score cache files (one candidate per line, used by the replay harnesses)


def write_cache(path: str, cache: Sequence[CachedCandidate], programs: Optional[dict] = None):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# key\tscore\tfeatures\tcurves (one per trial, separated by |)\n")
        for c in cache:
            feats = ",".join(str(int(x)) for x in c.features)
            curves = "|".join(cv.encode() for cv in c.curves)
            fh.write(f"{c.key}\t{c.score!r}\t{feats}\t{curves}\n")


def read_cache(path: str) -> list:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            key, score, feats, curves = line.rstrip("\n").split("\t")
            out.append(CachedCandidate(key, np.array([int(x) for x in feats.split(",")], dtype=np.int64),
                                       float(score), [LearningCurve.decode(c) for c in curves.split("|")]))
    return out


def load_programs(paths) -> dict:
    """canonical key hex -> graph for a list of program files."""
    out = {}
    for path in paths:
        with open(path, encoding="utf-8") as fh:
            g = P.deserialize(fh.read())
        out[P.canonical_key(g).hex] = g
    return out
