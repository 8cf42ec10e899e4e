"""Cheap filters applied to enumerated programs before any RL evaluation."""

from __future__ import annotations

import bisect
import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from . import program as P
from . import runtime as R
from . import typesys as ts
from .enumeration import EnumerationConfig

log = logging.getLogger(__name__)

KEPT = "kept"
TRIVIAL = "trivial_loss"
INPUT_INDEPENDENT = "input_independent"
DUPLICATE_PREFIX = "duplicate_of:"


@dataclass
class FakeEnvSpec:
    """Standard-normal states and rewards, uniform actions."""

    binding: ts.EnvTypeBinding = field(default_factory=lambda: ts.vector_binding(dim=4, actions=3))
    rollouts: int = 2

    def batch(self, rng: np.random.Generator, size: Optional[int] = None) -> R.TransitionBatch:
        b = self.rollouts if size is None else size
        shape = (b,) + tuple(self.binding.state_form.shape)
        states = rng.standard_normal(shape)
        nxt = rng.standard_normal(shape)
        af = self.binding.action_form
        if af.kind == "discrete":
            actions = rng.integers(0, af.n, size=b)
        else:
            actions = rng.uniform(-1.0, 1.0, size=(b, af.n))
        return R.TransitionBatch(states, actions, nxt, rng.standard_normal(b))

    def stream(self, seed: int, steps: int):
        rng = np.random.default_rng(seed)
        return [self.batch(rng) for _ in range(steps)]


# ---------------------------------------------------------------------------
# behavioural duplicates


def behavior_trace(g: P.ProgramGraph, seed: int, steps: int = 40,
                   spec: Optional[FakeEnvSpec] = None) -> Optional[np.ndarray]:
    """Output trace (steps x rollouts) on the seeded fake stream, or None on failure."""
    spec = spec or FakeEnvSpec()
    inst = R.instantiate(g, spec.binding, seed)
    out = []
    try:
        for batch in spec.stream(seed, steps):
            out.append(R.step_batch(inst, batch))
    except R.EvaluationFailure:
        return None
    return np.array(out)


def _fingerprint(g, cfg: EnumerationConfig, spec):
    traces = [behavior_trace(g, s, cfg.fake_steps, spec) for s in cfg.fake_seeds]
    if any(t is None for t in traces):
        return None
    return np.stack(traces)


def _same(t1, t2, tol) -> bool:
    return t1 is not None and t2 is not None and bool(np.all(np.abs(t1 - t2) <= tol))


def behavioral_duplicate_test(g1: P.ProgramGraph, g2: P.ProgramGraph,
                              cfg: Optional[EnumerationConfig] = None,
                              spec: Optional[FakeEnvSpec] = None) -> bool:
    cfg = cfg or EnumerationConfig()
    return _same(_fingerprint(g1, cfg, spec), _fingerprint(g2, cfg, spec), cfg.tolerance)


# ---------------------------------------------------------------------------
# constant-ablation triviality


@dataclass
class TrivialityReport:
    prunable: bool
    per_loss: dict          # loss node id -> trivial?
    curves: dict            # loss node id -> loss value per step


def _loss_type(g: P.ProgramGraph, info: P.TypeInfo, loss_id: str) -> ts.SemanticType:
    node = g.node(loss_id)
    if P.registry_op(g, node) == "minimize":
        return info.types[node.parents[0]]
    return ts.RP  # prediction losses are distances


def _trivial_curve(values: np.ndarray, positive: bool, threshold: float, window: int) -> bool:
    if not np.all(np.isfinite(values)):
        return False
    if np.min(np.abs(values)) < threshold:
        return True
    if positive:
        return False
    tail = values[-window:]
    x = np.arange(tail.size, dtype=np.float64)
    slope, intercept = np.polyfit(x, tail, 1)
    fit = slope * x + intercept
    resid = np.sum((tail - fit) ** 2)
    total = np.sum((tail - tail.mean()) ** 2)
    r2 = 1.0 - resid / total if total > 0 else 0.0
    return bool(slope < 0 and r2 >= 0.99 and tail[-1] < 0)


def triviality_test(g: P.ProgramGraph, seed: int = 0, steps: int = 200, lr: float = 1e-2,
                    transitions: int = 64, threshold: float = 1e-3, window: int = 50,
                    spec: Optional[FakeEnvSpec] = None) -> TrivialityReport:
    """Can input-independent functions alone drive every loss to its trivial optimum?"""
    spec = spec or FakeEnvSpec()
    losses = [n.id for n in g.nodes if P.is_loss_node(g, n)]
    if not losses:
        return TrivialityReport(False, {}, {})
    inst = R.instantiate(g, spec.binding, seed, R.RuntimeConfig(learning_rate=lr), ablate=True)
    batch = spec.batch(np.random.default_rng(seed), transitions)
    curves = {}
    try:
        for _ in range(steps):
            R.step_batch(inst, batch, loss_log=curves)
    except R.EvaluationFailure:
        return TrivialityReport(False, {lid: False for lid in losses}, curves)
    info = P.infer_types(g)
    per_loss = {}
    for lid in losses:
        vals = np.array(curves.get(lid, []))
        positive = _loss_type(g, info, lid).kind == "R+"
        per_loss[lid] = vals.size > 0 and _trivial_curve(vals, positive, threshold, window)
    return TrivialityReport(all(per_loss.values()), per_loss, curves)


def prune_input_independent(g: P.ProgramGraph) -> bool:
    """True iff neither the output nor any loss reads an environment input."""
    roots = [g.output] + [n.id for n in g.nodes if P.is_loss_node(g, n)]
    return not any(P.depends_on_input(g, r) for r in roots)


# ---------------------------------------------------------------------------
# pipeline


@dataclass
class Verdict:
    graph: P.ProgramGraph
    key: P.ProgramKey
    verdict: str

    def record(self) -> str:
        return f"{self.key.hex}\t{self.verdict}"


def prune_programs(programs: Iterable[P.ProgramGraph], cfg: Optional[EnumerationConfig] = None,
                   spec: Optional[FakeEnvSpec] = None, triviality: bool = True) -> list:
    """Assign one verdict per program.  Behavioural duplicates keep the smallest key."""
    cfg = cfg or EnumerationConfig()
    spec = spec or FakeEnvSpec()
    entries = sorted(((P.canonical_key(g), g) for g in programs), key=lambda kg: kg[0].hex)
    verdicts = {}
    survivors = []
    for key, g in entries:
        if prune_input_independent(g):
            verdicts[key.hex] = Verdict(g, key, INPUT_INDEPENDENT)
        elif triviality and triviality_test(g, spec=spec).prunable:
            verdicts[key.hex] = Verdict(g, key, TRIVIAL)
        else:
            survivors.append((key, g))
    # Representatives are scanned in key order; traces are bucketed on their first
    # value so only near neighbours are compared exactly.
    firsts, reps = [], []  # sorted first values, parallel (key, trace)
    for key, g in survivors:
        trace = _fingerprint(g, cfg, spec)
        match = None
        if trace is not None:
            first = float(trace.flat[0])
            lo = bisect.bisect_left(firsts, first - cfg.tolerance)
            hi = bisect.bisect_right(firsts, first + cfg.tolerance)
            for rkey, rtrace in reps[lo:hi]:
                if _same(trace, rtrace, cfg.tolerance) and (match is None or rkey.hex < match.hex):
                    match = rkey
            if match is None:
                pos = bisect.bisect_left(firsts, first)
                firsts.insert(pos, first)
                reps.insert(pos, (key, trace))
        verdict = KEPT if match is None else DUPLICATE_PREFIX + match.hex
        verdicts[key.hex] = Verdict(g, key, verdict)
    return [verdicts[k.hex] for k, _ in entries]


def parse_verdict_line(line: str):
    key, verdict = line.rstrip("\n").split("\t")
    if not (verdict in (KEPT, TRIVIAL, INPUT_INDEPENDENT) or verdict.startswith(DUPLICATE_PREFIX)):
        raise ValueError(f"unknown verdict {verdict!r}")
    return key, verdict
