"""Append-only line stores for search results and pruning verdicts."""

from __future__ import annotations

import logging
import os
from typing import Optional

from .lifetime import LearningCurve
from .search import STATUSES, TrialResult

log = logging.getLogger(__name__)

HEADER = "# key\tenv\ttrial_seed\tstatus\tscore\tcurve"


def format_result(key: str, r: TrialResult) -> str:
    return f"{key}\t{r.env_id}\t{r.trial_seed}\t{r.status}\t{r.score!r}\t{r.curve.encode()}"


def parse_result(line: str):
    parts = line.rstrip("\n").split("\t")
    if len(parts) != 6:
        raise ValueError(f"expected 6 fields, got {len(parts)}")
    key, env, seed, status, score, curve = parts
    if status not in STATUSES:
        raise ValueError(f"unknown status {status!r}")
    return key, TrialResult(env, int(seed), status, float(score), LearningCurve.decode(curve))


class ResultStore:
    """Results keyed by (candidate, env, trial seed); a candidate's trials are
    written as one block so an interrupted write never leaves half a candidate."""

    def __init__(self, path: Optional[str] = None):
        self.path = path
        self.entries = {}  # (key, env, seed) -> TrialResult
        self.order = []
        self.skipped = []
        if path and os.path.exists(path):
            self._load()

    def _load(self):
        offset = 0
        with open(self.path, "rb") as fh:
            for raw in fh:
                line = raw.decode("utf-8", errors="replace")
                if line.strip() and not line.startswith("#"):
                    try:
                        key, r = parse_result(line)
                    except ValueError as e:
                        log.warning("skipping corrupted store line at byte offset %d: %s", offset, e)
                        self.skipped.append(offset)
                    else:
                        self._put(key, r)
                offset += len(raw)

    def _put(self, key, r: TrialResult):
        k = (key, r.env_id, r.trial_seed)
        if k not in self.entries:
            self.order.append(k)
        self.entries[k] = r

    def has(self, key: str, env_id: str, seeds) -> bool:
        return all((key, env_id, s) in self.entries for s in seeds)

    def results(self, key: str, env_id: str, seeds) -> list:
        return [self.entries[(key, env_id, s)] for s in seeds]

    def append_results(self, key: str, results):
        for r in results:
            self._put(key, r)
        if self.path is None:
            return
        new = not os.path.exists(self.path) or os.path.getsize(self.path) == 0
        block = "".join(format_result(key, r) + "\n" for r in results)
        with open(self.path, "a", encoding="utf-8") as fh:
            if new:
                fh.write(HEADER + "\n")
            fh.write(block)
            fh.flush()

    def keys(self):
        seen = []
        for key, _, _ in self.order:
            if key not in seen:
                seen.append(key)
        return seen

    def envs(self):
        return sorted({env for _, env, _ in self.order})

    def by_key(self, env_id: str) -> dict:
        out = {}
        for (key, env, _seed) in self.order:
            if env == env_id:
                out.setdefault(key, []).append(self.entries[(key, env, _seed)])
        return out
