"""Exhaustive generation of intrinsic curiosity programs within an op budget.

Programs are grown goal-first: start from a scalar output hole and fill every
open argument slot either with an existing value (sharing) or with a fresh
operation whose result type fits, until no holes remain.  Completed graphs
may then be extended with extra loss roots.  Each result is validated,
checked against the normal-form rules and deduplicated by canonical key.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Iterator, Optional

from . import program as P
from . import typesys as ts

INPUT_IDS = {"state": "s0", "state_next": "s1", "action": "a0"}
_INPUTS = [("state", ts.S), ("state_next", ts.S), ("action", ts.A)]


@dataclass
class EnumerationConfig:
    op_budget: int = 7
    registry: Optional[tuple] = None  # op names; None = every searchable curiosity op
    max_programs: Optional[int] = None
    fake_steps: int = 40
    fake_seeds: tuple = (0, 1)
    tolerance: float = 1e-6

    def __post_init__(self):
        if self.op_budget < 0:
            raise ValueError("op_budget must be non-negative")
        if self.fake_steps < 10:
            raise ValueError("fake stream needs at least 10 steps")
        if len(self.fake_seeds) != 2:
            raise ValueError("fake stream uses exactly two seeds")
        if self.registry is not None:
            self.registry = tuple(self.registry)
            for name in self.registry:
                ts.get_operation("curiosity", name)

    def operations(self) -> list:
        ops = [s for s in ts.list_operations("curiosity") if s.searchable]
        if self.registry is not None:
            allowed = set(self.registry)
            ops = [s for s in ops if s.name in allowed]
        return ops


# ---------------------------------------------------------------------------
# fill options (types are handled as strings inside the search loop)

_TYPE_NAMES = ["R", "R+", "S", "A", "F", "List[R]", "List[R+]", "List[F]", "List[A]"]
_ACCEPTS = {req: frozenset(act for act in _TYPE_NAMES
                           if ts.accepts(ts.parse_type(req), ts.parse_type(act)))
            for req in _TYPE_NAMES}
_SCALARS = frozenset({"R", "R+"})
# an R+ node fills R holes too, so both count as one group in the lower bound
_GROUP = {t: t.replace("R+", "R") for t in _TYPE_NAMES}


@dataclass(frozen=True)
class _Option:
    op: str              # node op: registry name, "nn_apply" or "nn_apply_detach"
    role: Optional[str]  # weights role for network applies
    inputs: tuple        # concrete argument type names
    output: Optional[str]
    commutative: bool = False
    self_cancelling: bool = False


def _instances(sig: ts.OperationSignature):
    """Concrete (inputs, output) pairs, one per admissible X binding."""
    if not (any(t.has_typevar() for t in sig.inputs) or (sig.output and sig.output.has_typevar())):
        yield sig.inputs, sig.output
        return
    for x in (ts.F, ts.A):
        yield tuple(t.substitute(x) for t in sig.inputs), sig.output.substitute(x) if sig.output else None


def _fill_options(ops) -> list:
    out = []
    for sig in ops:
        if sig.name == "minimize":
            continue
        for inputs, output in _instances(sig):
            names = tuple(str(t) for t in inputs)
            oname = None if output is None else str(output)
            if sig.name == "nn_s_to_f_detach":
                out.append(_Option("nn_apply_detach", "nn_s_to_f", names, oname))
            elif sig.is_network:
                out.append(_Option("nn_apply", sig.name, names, oname))
            else:
                out.append(_Option(sig.name, None, names, oname, sig.name in P._COMMUTATIVE,
                                   sig.name in P._SELF_CANCELLING))
    return out


# ---------------------------------------------------------------------------
# search state


class _State:
    """Mutable partial program; every change is undone on backtrack."""

    def __init__(self):
        # node: [op, param, parents(list), type name, option]; 0..2 are the inputs
        self.nodes = [["input", src, [], str(t), None] for src, t in _INPUTS]
        self.cost = 0
        self.holes = []    # stack of (node index, slot, required type)
        self.fresh = set()  # (node, slot) pairs filled by a newly created node
        self.avail = {}
        for nd in self.nodes:
            self.avail[nd[3]] = self.avail.get(nd[3], 0) + 1
        self.output = None

    def add_avail(self, t, delta):
        if t is not None:
            self.avail[t] = self.avail.get(t, 0) + delta

    def depends_on(self, m: int, n: int) -> bool:
        """True if node m (transitively) reads node n."""
        stack, seen = [m], set()
        nodes = self.nodes
        while stack:
            cur = stack.pop()
            if cur == n:
                return True
            if cur in seen:
                continue
            seen.add(cur)
            stack.extend(p for p in nodes[cur][2] if p is not None)
        return False

    def lower_bound(self) -> int:
        """Fresh nodes still needed: one per type group no existing node can fill
        (one fresh node may fill every hole of its group through sharing)."""
        avail = self.avail
        groups = {_GROUP[t] for _, _, t in self.holes
                  if not any(avail.get(a) for a in _ACCEPTS[t])}
        return len(groups)


def _to_graph(state: _State) -> P.ProgramGraph:
    used = set()
    for nd in state.nodes:
        used.update(nd[2])
    ids = {}
    for i, nd in enumerate(state.nodes):
        if nd[0] == "input":
            if i in used:
                ids[i] = INPUT_IDS[nd[1]]
        else:
            ids[i] = f"{'w' if nd[0] == 'weights' else 'n'}{i}"
    indeg = {i: len(state.nodes[i][2]) for i in ids}
    kids = {i: [] for i in ids}
    for i in ids:
        for p in state.nodes[i][2]:
            kids[p].append(i)
    ready = sorted(i for i in ids if indeg[i] == 0)
    nodes = []
    while ready:
        i = heapq.heappop(ready)
        nd = state.nodes[i]
        nodes.append(P.ProgramNode(ids[i], nd[0], tuple(ids[p] for p in nd[2]), nd[1]))
        for k in kids[i]:
            indeg[k] -= 1
            if indeg[k] == 0:
                heapq.heappush(ready, k)
    return P.ProgramGraph(P.INTRINSIC, nodes, ids[state.output], "enumerated")


def canonical_form(g: P.ProgramGraph) -> P.ProgramGraph:
    """Relabel ``g`` deterministically so canonical-equal graphs print alike."""
    _, pos = P.canonical_order(g)
    keep = [n for n in g.nodes if n.id in pos]
    index = {n.id: n for n in keep}
    indeg = {n.id: len(n.parents) for n in keep}
    kids = {n.id: [] for n in keep}
    for n in keep:
        for p in n.parents:
            kids[p].append(n.id)
    heap = [(pos[i], i) for i, d in indeg.items() if d == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        _, i = heapq.heappop(heap)
        order.append(i)
        for k in kids[i]:
            indeg[k] -= 1
            if indeg[k] == 0:
                heapq.heappush(heap, (pos[k], k))
    names = {}
    counters = {"w": 0, "n": 0}
    for i in order:
        n = index[i]
        if n.op == "input":
            names[i] = INPUT_IDS.get(n.param, n.param)
        else:
            prefix = "w" if n.op == "weights" else "n"
            counters[prefix] += 1
            names[i] = f"{prefix}{counters[prefix]}"
    nodes = [P.ProgramNode(names[i], index[i].op, tuple(names[p] for p in index[i].parents),
                           index[i].param) for i in order]
    return P.ProgramGraph(g.kind, nodes, names[g.output], g.name)


# ---------------------------------------------------------------------------
# generator


class _Enumerator:
    def __init__(self, cfg: EnumerationConfig):
        self.cfg = cfg
        ops = cfg.operations()
        self.options = _fill_options(ops)
        self.by_type = {t: [o for o in self.options if o.output in _ACCEPTS[t]]
                        for t in _TYPE_NAMES}
        self.loss_roots = []
        if any(s.name == "minimize" for s in ops):
            self.loss_roots.append(_Option("minimize", None, ("R",), None))
        self.loss_roots += [o for o in self.options if o.role and o.role.startswith("predict_")]
        self.verdicts = {}  # canonical string -> (normal form ok, countable ops, (nodes, output))
        self.completions = 0

    def run(self) -> dict:
        if self.cfg.op_budget < 1:
            return {}
        state = _State()
        for opt in self.options:
            if opt.output in _SCALARS:
                self._place(state, opt, self._start)
        return {k: (c, g) for k, (ok, c, g) in self.verdicts.items() if ok}

    def _start(self, state, idx):
        state.output = idx
        self._fill(state)
        state.output = None

    def _place(self, state, opt, cont):
        """Create a node for ``opt`` (trying each weight-sharing choice) and continue."""
        if state.cost + 1 > self.cfg.op_budget:
            return
        choices = [None]
        if opt.role is not None:
            choices = [i for i, nd in enumerate(state.nodes)
                       if nd[0] == "weights" and nd[1] == opt.role] + ["new"]
        for w in choices:
            created_weights = w == "new"
            if created_weights:
                state.nodes.append(["weights", opt.role, [], None, None])
                w = len(state.nodes) - 1
            prefix = [] if w is None else [w]
            idx = len(state.nodes)
            state.nodes.append([opt.op, None, prefix + [None] * len(opt.inputs), opt.output, opt])
            state.add_avail(opt.output, 1)
            state.cost += 1
            pushed = [(idx, len(prefix) + k, t) for k, t in reversed(list(enumerate(opt.inputs)))]
            state.holes.extend(pushed)
            cont(state, idx)
            del state.holes[len(state.holes) - len(pushed):]
            state.cost -= 1
            state.add_avail(opt.output, -1)
            state.nodes.pop()
            if created_weights:
                state.nodes.pop()

    def _fill(self, state):
        if state.cost + state.lower_bound() > self.cfg.op_budget:
            return
        if not state.holes:
            self._complete(state)
            return
        node_idx, slot, t = state.holes.pop()
        node = state.nodes[node_idx]
        opt = node[4]
        first = slot - (1 if node[0] in ("nn_apply", "nn_apply_detach") else 0)
        pair = opt is not None and first == 1 and (opt.commutative or opt.self_cancelling)
        prev = node[2][slot - 1] if pair else None
        prev_fresh = pair and (node_idx, slot - 1) in state.fresh
        accept = _ACCEPTS[t]
        for m, nd in enumerate(state.nodes):
            if nd[3] not in accept or m == node_idx:
                continue
            if pair:
                if opt.self_cancelling and m == prev:
                    continue
                if opt.commutative and not prev_fresh and m < prev:
                    continue
            if state.depends_on(m, node_idx):
                continue
            node[2][slot] = m
            self._fill(state)
            node[2][slot] = None
        if not (pair and opt.commutative and not prev_fresh):
            for new in self.by_type[t]:
                self._place(state, new, lambda st, idx: self._fill_fresh(st, node, node_idx, slot, idx))
        state.holes.append((node_idx, slot, t))

    def _fill_fresh(self, state, node, node_idx, slot, idx):
        node[2][slot] = idx
        state.fresh.add((node_idx, slot))
        self._fill(state)
        state.fresh.discard((node_idx, slot))
        node[2][slot] = None

    def _complete(self, state):
        self.completions += 1
        g = _to_graph(state)
        key = P.canonical_key(g).canonical_string
        verdict = self.verdicts.get(key)
        if verdict is None:
            report = P.validate_program(g, op_budget=self.cfg.op_budget)
            compact = tuple((n.id, n.op, n.parents, n.param) for n in g.nodes) if report.canonical else None
            verdict = (report.canonical, report.countable_ops, (compact, g.output))
            self.verdicts[key] = verdict
        if not verdict[0]:
            return
        for opt in self.loss_roots:
            self._place(state, opt, lambda st, idx: self._fill(st))


def enumerate_programs(cfg: EnumerationConfig) -> Iterator[P.ProgramGraph]:
    """Every normal-form intrinsic program within budget, once per canonical key,
    ordered by (countable ops, canonical string)."""
    found = _Enumerator(cfg).run()
    ordered = sorted(found.items(), key=lambda kv: (kv[1][0], kv[0]))
    for k, (s, (_, (nodes, output))) in enumerate(ordered):
        if cfg.max_programs is not None and k >= cfg.max_programs:
            return
        g = P.ProgramGraph(P.INTRINSIC, [P.ProgramNode(*n) for n in nodes], output)
        out = canonical_form(g)
        yield P.ProgramGraph(out.kind, out.nodes, out.output, f"p{k:06d}")
