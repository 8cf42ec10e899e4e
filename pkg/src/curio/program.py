"""Curiosity and combiner programs as typed DAGs.

A program is a list of nodes in declaration (topological) order.  Node kinds:

* ``input <source>`` - one of the transition / combiner inputs;
* ``weights <network op>`` - a parameter module, shareable between applies;
* ``nn_apply <w> <args>`` / ``nn_apply_detach <w> <s>`` - run a network;
* ``<op> <args>`` - any other registry operation.
"""

from __future__ import annotations

import hashlib
import itertools
import math
import re
from dataclasses import dataclass, field
from typing import Optional

from . import typesys as ts
from .typesys import EnvTypeBinding, SemanticType

INTRINSIC = "intrinsic"
COMBINER = "combiner"

INTRINSIC_INPUTS = {"state": ts.S, "state_next": ts.S, "action": ts.A}
COMBINER_INPUTS = {"intrinsic": ts.R, "extrinsic": ts.R, "time_fraction": ts.R}
OP_BUDGET = {INTRINSIC: 7, COMBINER: 5}

STRUCTURAL_OPS = ("input", "weights", "nn_apply", "nn_apply_detach")
_ID_RE = re.compile(r"^[a-z0-9_]+$")


class ProgramError(ValueError):
    pass


class ProgramParseError(ProgramError):
    def __init__(self, message, line, column):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


def vocabulary_for(kind: str) -> str:
    if kind == INTRINSIC:
        return "curiosity"
    if kind == COMBINER:
        return "combiner"
    raise ProgramError(f"unknown program kind {kind!r}")


def inputs_for(kind: str) -> dict:
    return INTRINSIC_INPUTS if kind == INTRINSIC else COMBINER_INPUTS


@dataclass(frozen=True)
class ProgramNode:
    id: str
    op: str
    parents: tuple = ()
    param: Optional[str] = None

    @property
    def countable(self) -> bool:
        return self.op not in ("input", "weights")


@dataclass(frozen=True)
class ProgramGraph:
    kind: str
    nodes: tuple
    output: str
    name: str = "anonymous"
    _index: dict = field(default=None, compare=False, repr=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "_index", {n.id: i for i, n in enumerate(self.nodes)})

    def node(self, node_id: str) -> ProgramNode:
        try:
            return self.nodes[self._index[node_id]]
        except KeyError:
            raise ProgramError(f"no node {node_id!r}") from None

    def __contains__(self, node_id):
        return node_id in self._index

    @property
    def vocabulary(self) -> str:
        return vocabulary_for(self.kind)

    def children(self) -> dict:
        out = {n.id: [] for n in self.nodes}
        for n in self.nodes:
            for pos, p in enumerate(n.parents):
                if p in out:
                    out[p].append((n.id, pos))
        return out

    def structurally_equal(self, other: "ProgramGraph") -> bool:
        return (self.kind, self.name, self.nodes, self.output) == (
            other.kind, other.name, other.nodes, other.output)


# ---------------------------------------------------------------------------
# resolution helpers


def registry_op(g: ProgramGraph, node: ProgramNode) -> Optional[str]:
    """Registry name a node counts as (None for inputs and weight modules)."""
    if node.op in ("input", "weights"):
        return None
    if node.op == "nn_apply":
        return g.node(node.parents[0]).param
    if node.op == "nn_apply_detach":
        return "nn_s_to_f_detach"
    return node.op


def signature(g: ProgramGraph, node: ProgramNode) -> Optional[ts.OperationSignature]:
    name = registry_op(g, node)
    return None if name is None else ts.get_operation(g.vocabulary, name)


def data_parents(node: ProgramNode) -> tuple:
    """Parents carrying values (weights excluded)."""
    if node.op in ("nn_apply", "nn_apply_detach"):
        return node.parents[1:]
    return node.parents


def is_loss_node(g: ProgramGraph, node: ProgramNode) -> bool:
    name = registry_op(g, node)
    return name is not None and (name == "minimize" or name.startswith("predict_"))


def countable_ops(g: ProgramGraph) -> int:
    return sum(1 for n in g.nodes if n.countable)


def op_counts(g: ProgramGraph) -> dict:
    counts = {}
    for n in g.nodes:
        name = registry_op(g, n)
        if name is not None:
            counts[name] = counts.get(name, 0) + 1
    return counts


# ---------------------------------------------------------------------------
# typing


@dataclass
class TypeInfo:
    types: dict
    x_bindings: dict
    errors: list


def infer_types(g: ProgramGraph) -> TypeInfo:
    types, xb, errors = {}, {}, []
    voc = g.vocabulary
    sources = inputs_for(g.kind)
    for n in g.nodes:
        if n.op == "input":
            if n.param not in sources:
                errors.append(f"{n.id}: unknown {g.kind} input {n.param!r}")
                continue
            types[n.id] = sources[n.param]
            continue
        if n.op == "weights":
            try:
                sig = ts.get_operation(voc, n.param or "")
            except ts.TypeSystemError as e:
                errors.append(f"{n.id}: {e}")
                continue
            if not sig.is_network or sig.name == "nn_s_to_f_detach":
                errors.append(f"{n.id}: {n.param!r} is not a weight role")
            continue
        if any(p not in types and not _is_weights(g, p) for p in n.parents):
            missing = [p for p in n.parents if p not in types and not _is_weights(g, p)]
            errors.append(f"{n.id}: untyped parents {missing}")
            continue
        if n.op in ("nn_apply", "nn_apply_detach"):
            if not n.parents or not _is_weights(g, n.parents[0]):
                errors.append(f"{n.id}: first argument of {n.op} must be a weight module")
                continue
            if n.op == "nn_apply_detach" and g.node(n.parents[0]).param != "nn_s_to_f":
                errors.append(f"{n.id}: nn_apply_detach needs nn_s_to_f weights")
                continue
        elif any(_is_weights(g, p) for p in n.parents):
            errors.append(f"{n.id}: weight modules can only feed nn_apply")
            continue
        try:
            sig = signature(g, n)
        except ts.TypeSystemError as e:
            errors.append(f"{n.id}: {e}")
            continue
        if sig.is_network and n.op not in ("nn_apply", "nn_apply_detach"):
            errors.append(f"{n.id}: network op {sig.name} must be invoked through nn_apply")
            continue
        args = [types[p] for p in data_parents(n)]
        binding, diag = ts.unify(args, sig)
        if diag is not None:
            errors.append(f"{n.id}: {diag.message}")
            continue
        if binding is not None:
            xb[n.id] = binding
        if sig.output is not None:
            types[n.id] = sig.output.substitute(binding) if binding is not None else sig.output
    return TypeInfo(types, xb, errors)


def _is_weights(g, node_id):
    return node_id in g and g.node(node_id).op == "weights"


# ---------------------------------------------------------------------------
# gradient flow


def trained_by(g: ProgramGraph, loss_id: str) -> set:
    """Nodes (weight modules included) that receive gradient from one loss."""
    loss = g.node(loss_id)
    sig = signature(g, loss)
    frontier = []
    if sig.name == "minimize":
        frontier.extend(loss.parents)
    elif sig.name.startswith("predict_"):
        frontier.append(loss.parents[0])
        frontier.extend(p for p, d in zip(loss.parents[1:], sig.differentiable) if d)
    reached = set()
    while frontier:
        nid = frontier.pop()
        if nid in reached:
            continue
        reached.add(nid)
        node = g.node(nid)
        if node.op in ("input", "weights", "nn_apply_detach"):
            continue
        nsig = signature(g, node)
        if node.op == "nn_apply":
            frontier.append(node.parents[0])
        frontier.extend(p for p, d in zip(data_parents(node), nsig.differentiable) if d)
    return reached


def gradient_nodes(g: ProgramGraph) -> set:
    """Nodes whose value reaches some loss through differentiable edges."""
    out = set()
    for n in g.nodes:
        if is_loss_node(g, n):
            out |= trained_by(g, n.id)
    return out


def weight_modules(g: ProgramGraph) -> dict:
    """Weight module id -> trainable flag (derived from gradient flow)."""
    reach = gradient_nodes(g)
    return {n.id: n.id in reach for n in g.nodes if n.op == "weights"}


def _ancestors(g: ProgramGraph, node_id: str) -> set:
    seen, stack = set(), [node_id]
    while stack:
        cur = stack.pop()
        for p in g.node(cur).parents:
            if p not in seen:
                seen.add(p)
                stack.append(p)
    return seen


def depends_on_input(g: ProgramGraph, node_id: str) -> bool:
    nodes = _ancestors(g, node_id) | {node_id}
    return any(g.node(n).op == "input" for n in nodes)


# ---------------------------------------------------------------------------
# validation


@dataclass
class ValidationReport:
    rules: dict
    countable_ops: int
    input_independent: bool = False
    normal_form: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(passed for passed, _ in self.rules.values())

    @property
    def canonical(self) -> bool:
        return self.ok and not self.normal_form

    def failures(self) -> list:
        return [f"{name}: {msg}" for name, (passed, msg) in self.rules.items() if not passed]

    def __str__(self):
        lines = [f"{name}: {'pass' if p else 'FAIL'}{(' - ' + m) if m else ''}"
                 for name, (p, m) in self.rules.items()]
        if self.input_independent:
            lines.append("flag: input-independent output")
        lines += [f"normal-form: {v}" for v in self.normal_form]
        return "\n".join(lines)


def validate_program(g: ProgramGraph, binding: Optional[EnvTypeBinding] = None,
                     op_budget: Optional[int] = None) -> ValidationReport:
    rules = {}
    ids = [n.id for n in g.nodes]
    acyclic_msg = ""
    seen = set()
    for n in g.nodes:
        if n.id in seen:
            acyclic_msg = f"duplicate node id {n.id!r}"
            break
        bad = [p for p in n.parents if p not in seen]
        if bad:
            acyclic_msg = f"{n.id} references undeclared or later nodes {bad}"
            break
        seen.add(n.id)
    rules["acyclic"] = (not acyclic_msg, acyclic_msg)
    if acyclic_msg:
        rules["typing"] = (False, "skipped: graph is not a DAG")
        return ValidationReport(rules, countable_ops(g))

    info = infer_types(g)
    if g.output not in ids:
        info.errors.append(f"output node {g.output!r} does not exist")
    rules["typing"] = (not info.errors, "; ".join(info.errors))

    budget = OP_BUDGET.get(g.kind, 7) if op_budget is None else op_budget
    count = countable_ops(g)
    rules["op_budget"] = (count <= budget, f"{count} countable ops > budget {budget}"
                          if count > budget else "")

    out_t = info.types.get(g.output)
    scalar = out_t is not None and out_t.is_scalar
    rules["output_scalar"] = (scalar, "" if scalar else f"output type is {out_t}")

    orphan = [n.id for n in g.nodes if registry_op(g, n) == "minimize" and not n.parents]
    rules["losses_consume"] = (not orphan, f"minimize without input: {orphan}" if orphan else "")

    if binding is not None and not info.errors:
        problems = []
        for n in g.nodes:
            sig = signature(g, n)
            if sig is None:
                continue
            try:
                ts.resolve_signature(sig, binding, info.x_bindings.get(n.id))
            except ts.TypeSystemError as e:
                problems.append(f"{n.id}: {e}")
        rules["binding"] = (not problems, "; ".join(problems))

    report = ValidationReport(rules, count)
    if report.ok:
        report.input_independent = not depends_on_input(g, g.output)
        report.normal_form = normal_form_violations(g, info)
    return report


_SELF_CANCELLING = {"subtract", "l2_distance", "minus"}


def normal_form_violations(g: ProgramGraph, info: Optional[TypeInfo] = None) -> list:
    """Structural redundancies that make a program a behavioural duplicate of
    a smaller one.  The enumerator only emits programs without any."""
    out = []
    children = g.children()
    useful = {g.output}
    losses = [n.id for n in g.nodes if is_loss_node(g, n)]
    for lid in losses:
        useful.add(lid)
    for lid in list(useful):
        useful |= _ancestors(g, lid)
    for n in g.nodes:
        if n.countable and n.id not in useful:
            out.append(f"dead node {n.id}")
        if n.op == "weights" and not children[n.id]:
            out.append(f"unused weights {n.id}")
    carriers = _grad_carriers(g)
    for n in g.nodes:
        if n.op == "detach" and n.parents[0] not in carriers:
            out.append(f"detach {n.id} on a value that carries no gradient")
        name = registry_op(g, n)
        if name in _SELF_CANCELLING and len(set(n.parents)) == 1 and len(n.parents) == 2:
            out.append(f"{n.id} applies {name} to the same value twice")
        if name == "minimize":
            if not any(g.node(w).op == "weights" for w in trained_by(g, n.id)):
                out.append(f"loss {n.id} trains no parameters")
    keys = {}
    for n in g.nodes:
        if not n.countable or registry_op(g, n) == "normal_distribution":
            continue
        sig = signature(g, n)
        parents = tuple(sorted(n.parents)) if sig is not None and sig.commutative else n.parents
        key = (n.op, n.param, parents)
        if key in keys:
            out.append(f"{n.id} repeats {keys[key]}")
        else:
            keys[key] = n.id
    return out


def _grad_carriers(g: ProgramGraph) -> set:
    """Nodes whose value depends differentiably on some weight module."""
    carriers = set()
    for n in g.nodes:
        if n.op == "weights":
            carriers.add(n.id)
            continue
        sig = signature(g, n)
        if sig is None:
            continue
        if n.op == "nn_apply_detach":
            continue
        if n.op == "nn_apply":
            carriers.add(n.id)
            continue
        dp = data_parents(n)
        if any(sig.differentiable[i] and p in carriers for i, p in enumerate(dp)):
            carriers.add(n.id)
    return carriers


# ---------------------------------------------------------------------------
# text format


def serialize(g: ProgramGraph) -> str:
    width = max(4, max(len(n.id) for n in g.nodes) + 1)
    lines = [f"program {g.kind} {g.name}"]
    for n in g.nodes:
        rhs = [n.op]
        if n.param is not None:
            rhs.append(n.param)
        rhs.extend(n.parents)
        lines.append(f"node {n.id.ljust(width)} = {' '.join(rhs)}")
    lines.append(f"output {g.output}")
    return "\n".join(lines) + "\n"


def deserialize(text: str) -> ProgramGraph:
    kind = name = output = None
    nodes = []
    declared = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        toks = [(m.group(), m.start() + 1) for m in re.finditer(r"\S+", line)]
        head, col = toks[0]
        if head == "program":
            if kind is not None:
                raise ProgramParseError("duplicate program header", lineno, col)
            if len(toks) != 3:
                raise ProgramParseError("expected 'program <kind> <name>'", lineno, col)
            kind, name = toks[1][0], toks[2][0]
            if kind not in (INTRINSIC, COMBINER):
                raise ProgramParseError(f"unknown program kind {kind!r}", lineno, toks[1][1])
            continue
        if kind is None:
            raise ProgramParseError("missing 'program' header", lineno, col)
        if head == "output":
            if len(toks) != 2:
                raise ProgramParseError("expected 'output <id>'", lineno, col)
            output = toks[1][0]
            if output not in declared:
                raise ProgramParseError(f"output refers to unknown node {output!r}", lineno, toks[1][1])
            continue
        if head != "node":
            raise ProgramParseError(f"unexpected keyword {head!r}", lineno, col)
        if len(toks) < 4 or toks[2][0] != "=":
            raise ProgramParseError("expected 'node <id> = <op> <arg>*'", lineno, col)
        node_id, id_col = toks[1]
        if not _ID_RE.match(node_id):
            raise ProgramParseError(f"invalid node id {node_id!r}", lineno, id_col)
        if node_id in declared:
            raise ProgramParseError(f"node {node_id!r} declared twice", lineno, id_col)
        op, op_col = toks[3]
        args = toks[4:]
        param = None
        if op in ("input", "weights"):
            if len(args) != 1:
                raise ProgramParseError(f"'{op}' takes exactly one name", lineno, op_col)
            param = args[0][0]
            _check_param(kind, op, param, lineno, args[0][1])
            args = []
        elif op not in ("nn_apply", "nn_apply_detach"):
            _check_op(kind, op, lineno, op_col)
        for a, acol in args:
            if a not in declared:
                raise ProgramParseError(f"reference to undeclared node {a!r}", lineno, acol)
        declared[node_id] = lineno
        nodes.append(ProgramNode(node_id, op, tuple(a for a, _ in args), param))
    if kind is None:
        raise ProgramParseError("empty program", 1, 1)
    if output is None:
        raise ProgramParseError("missing 'output' line", len(text.splitlines()) or 1, 1)
    return ProgramGraph(kind, tuple(nodes), output, name)


def _check_param(kind, op, param, line, col):
    if op == "input":
        if param not in inputs_for(kind):
            raise ProgramParseError(f"unknown {kind} input {param!r}", line, col)
    else:
        try:
            sig = ts.get_operation(vocabulary_for(kind), param)
        except ts.TypeSystemError:
            raise ProgramParseError(f"unknown weight role {param!r}", line, col) from None
        if not sig.is_network:
            raise ProgramParseError(f"{param!r} is not a network operation", line, col)


def _check_op(kind, op, line, col):
    try:
        ts.get_operation(vocabulary_for(kind), op)
    except ts.TypeSystemError:
        raise ProgramParseError(f"unknown operation {op!r}", line, col) from None


# ---------------------------------------------------------------------------
# canonical keys


@dataclass(frozen=True)
class ProgramKey:
    canonical_string: str
    hash64: int

    @property
    def hex(self) -> str:
        return f"{self.hash64:016x}"

    def __str__(self):
        return self.hex


_COMMUTATIVE = {"add", "l2_distance", "dot_product", "add_x", "max", "min", "multiply"}


def _label(n: ProgramNode) -> str:
    if n.op in ("input", "weights"):
        return f"{n.op}:{n.param}"
    return n.op


def _relevant_nodes(g: ProgramGraph) -> list:
    children = g.children()
    return [n for n in g.nodes
            if n.countable or children[n.id] or n.id == g.output]


def canonical_order(g: ProgramGraph):
    """(canonical string, node id -> canonical index)."""
    nodes = _relevant_nodes(g)
    ids = [n.id for n in nodes]
    parents = {n.id: n.parents for n in nodes}
    comm = {n.id: n.op in _COMMUTATIVE for n in nodes}
    kids = {i: [] for i in ids}
    for n in nodes:
        for pos, p in enumerate(n.parents):
            kids[p].append((n.id, "*" if comm[n.id] else pos))

    colour = {}
    base = sorted({_label(n) + ("!" if n.id == g.output else "") for n in nodes})
    rank = {s: i for i, s in enumerate(base)}
    for n in nodes:
        colour[n.id] = rank[_label(n) + ("!" if n.id == g.output else "")]
    classes = len(set(colour.values()))
    for _ in range(len(nodes)):
        sigs = {}
        for i in ids:
            ps = [colour[p] for p in parents[i]]
            if comm[i]:
                ps.sort()
            ks = sorted((colour[c], str(pos)) for c, pos in kids[i])
            sigs[i] = repr((colour[i], ps, ks))
        uniq = sorted(set(sigs.values()))
        r = {s: k for k, s in enumerate(uniq)}
        colour = {i: r[sigs[i]] for i in ids}
        if len(uniq) == classes:
            break
        classes = len(uniq)

    groups = {}
    for i in ids:
        groups.setdefault(colour[i], []).append(i)
    ordered = [groups[c] for c in sorted(groups)]
    label = {n.id: _label(n) for n in nodes}

    def render(order):
        pos = {nid: k for k, nid in enumerate(order)}
        parts = []
        for nid in order:
            ps = [pos[p] for p in parents[nid]]
            if comm[nid]:
                ps.sort()
            parts.append(f"{label[nid]}({','.join(map(str, ps))})")
        return ";".join(parts) + f"->{pos[g.output]}", pos

    total = math.prod(math.factorial(len(grp)) for grp in ordered)
    if total > 40320:
        return render([i for grp in ordered for i in sorted(grp)])
    best = None
    for perm in itertools.product(*(itertools.permutations(grp) for grp in ordered)):
        order = [i for grp in perm for i in grp]
        s, pos = render(order)
        if best is None or s < best[0]:
            best = (s, pos)
    return best


def canonical_key(g: ProgramGraph) -> ProgramKey:
    s, _ = canonical_order(g)
    s = f"{g.kind}|{s}"
    h = int.from_bytes(hashlib.blake2b(s.encode(), digest_size=8).digest(), "little")
    return ProgramKey(s, h)


# ---------------------------------------------------------------------------
# reference programs

_REFERENCE_TEXT = {
    "fast": """\
program intrinsic fast
node s0   = input state
node s1   = input state_next
node a0   = input action
node w    = weights nn_s_to_a
node p1   = nn_apply w s1
node p0   = nn_apply w s0
node l    = action_loss p1 a0
node m    = minimize l
node out  = l2_distance p1 p0
output out
""",
    "rnd": """\
program intrinsic rnd
node s1   = input state_next
node w1   = weights nn_s_to_f
node w2   = weights nn_s_to_f
node t    = nn_apply_detach w1 s1
node p    = nn_apply w2 s1
node out  = l2_distance p t
node m    = minimize out
output out
""",
    # i = |b(fr(s0)) - b(fr(s1))|; theta2 learns both terms, theta3 only the
    # first (its query in the second box is detached), theta1 stays random.
    "cycle_consistency": """\
program intrinsic cycle_consistency
node s0   = input state
node s1   = input state_next
node w1   = weights nn_s_to_f
node w3   = weights nn_s_to_f
node w2   = weights predict_f_to_f
node r0   = nn_apply w1 s0
node f0   = nn_apply w3 s0
node f1   = nn_apply w3 s1
node d1   = detach f1
node b0   = nn_apply w2 f0 r0
node b1   = nn_apply w2 d1 f0
node out  = l2_distance b0 b1
output out
""",
    "inverse_features": """\
program intrinsic inverse_features
node s0   = input state
node s1   = input state_next
node a0   = input action
node w    = weights nn_s_to_f
node wi   = weights nn_ff_to_a
node wf   = weights predict_fa_to_f
node p0   = nn_apply w s0
node p1   = nn_apply w s1
node ia   = nn_apply wi p0 p1
node li   = action_loss ia a0
node m    = minimize li
node fp   = nn_apply wf p0 a0 p1
node out  = l2_distance fp p1
output out
""",
    "ensemble_disagreement": """\
program intrinsic ensemble_disagreement
node s0   = input state
node s1   = input state_next
node a0   = input action
node w    = weights nn_s_to_f
node we   = weights nn_ensemble_fa_to_f
node f0   = nn_apply_detach w s0
node f1   = nn_apply_detach w s1
node ens  = nn_apply we f0 a0
node out  = variance ens
node l    = average_distance ens f1
node m    = minimize l
output out
""",
    "rnd_ensemble_variant": """\
program intrinsic rnd_ensemble_variant
node s1   = input state_next
node w1   = weights nn_s_to_f
node we   = weights nn_ensemble_s_to_f
node t    = nn_apply_detach w1 s1
node ens  = nn_apply we s1
node out  = average_distance ens t
node m    = minimize out
output out
""",
    "constant_zero": """\
program intrinsic constant_zero
node c    = constant_0
output c
""",
    "constant_one": """\
program intrinsic constant_one
node c    = constant_1
output c
""",
    "constant_minus_one": """\
program intrinsic constant_minus_one
node c    = constant_minus_1
output c
""",
    "gaussian_noise": """\
program intrinsic gaussian_noise
node n    = normal_distribution
output n
""",
    # ((1 + i - t/T) * i + (t/T) * r) / (|1 + i - t/T| + |t/T|)
    "combiner_discovered": """\
program combiner combiner_discovered
node i    = input intrinsic
node r    = input extrinsic
node t    = input time_fraction
node one  = constant_1
node d    = subtract i t
node a    = add one d
node out  = weighted_normalized_sum a i t r
output out
""",
    "combiner_intrinsic_only": """\
program combiner combiner_intrinsic_only
node i    = input intrinsic
output i
""",
    "combiner_extrinsic_only": """\
program combiner combiner_extrinsic_only
node r    = input extrinsic
output r
""",
}

REFERENCE_NAMES = tuple(_REFERENCE_TEXT)
INTRINSIC_REFERENCES = tuple(n for n in REFERENCE_NAMES if not n.startswith("combiner"))
COMBINER_REFERENCES = tuple(n for n in REFERENCE_NAMES if n.startswith("combiner"))


def build_reference_program(name: str) -> ProgramGraph:
    try:
        text = _REFERENCE_TEXT[name]
    except KeyError:
        raise ProgramError(
            f"unknown reference program {name!r}; choose from {', '.join(REFERENCE_NAMES)}") from None
    return deserialize(text)


def reference_text(name: str) -> str:
    build_reference_program(name)
    return _REFERENCE_TEXT[name]
