"""Executing curiosity and combiner programs one time-step at a time.

Each call runs the forward pass over the DAG for a batch of rollouts, sums the
loss nodes (mean over rollouts), takes one Adam step per trainable weight
module and only then updates buffers, nearest-neighbour stores and running
statistics.  Gradients never cross time-steps: everything read from state is
a constant.
"""

from __future__ import annotations

import hashlib
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import program as P
from . import typesys as ts
from .autodiff import Adam, ConstantNet, Network
from .autodiff import tensor as T
from .autodiff.tensor import Tensor

DEFAULT_LR = 1e-3
BUFFER_CAPACITY = 1000
KNN_K = 10
NORM_EPS = 1e-8
WNS_EPS = 1e-8


class EvaluationFailure(RuntimeError):
    """A program produced a non-finite value; the candidate scores as failed."""

    def __init__(self, node_id, message="non-finite value"):
        super().__init__(f"node {node_id}: {message}")
        self.node_id = node_id


@dataclass
class RuntimeConfig:
    learning_rate: float = DEFAULT_LR
    buffer_capacity: int = BUFFER_CAPACITY
    knn_k: int = KNN_K
    knn_capacity: int = BUFFER_CAPACITY


@dataclass
class TransitionBatch:
    states: np.ndarray
    actions: np.ndarray
    next_states: np.ndarray
    rewards: np.ndarray

    @property
    def rollout_count(self) -> int:
        return int(self.states.shape[0])


# ---------------------------------------------------------------------------
# state holders


class RunningStat:
    """Welford running variance; normalises by the standard deviation only."""

    def __init__(self):
        self.count = 0
        self.mean = 0.0
        self.m2 = 0.0

    def update(self, x: float):
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (x - self.mean)

    @property
    def variance(self) -> Optional[float]:
        return self.m2 / self.count if self.count >= 1 else None

    def scale(self) -> Optional[float]:
        """Divisor for normalisation, or None while the variance is undefined."""
        if self.count < 2:
            return None
        return float(np.sqrt(self.m2 / self.count)) + NORM_EPS


def running_norm_step(stat: RunningStat, x: float) -> float:
    stat.update(float(x))
    scale = stat.scale()
    return float(x) if scale is None else float(x) / scale


class FifoBuffer:
    def __init__(self, capacity: int, elem_shape: tuple):
        self.capacity = capacity
        self.elem_shape = tuple(elem_shape)
        self.items = deque(maxlen=capacity)

    def __len__(self):
        return len(self.items)

    def push(self, value: np.ndarray):
        self.items.append(np.array(value, dtype=np.float64, copy=True))

    def contents(self) -> np.ndarray:
        if not self.items:
            return np.zeros((0,) + self.elem_shape)
        return np.stack(list(self.items))


class KnnStore(FifoBuffer):
    def __init__(self, capacity: int = BUFFER_CAPACITY, k: int = KNN_K, dim: int = ts.FEATURE_DIM):
        super().__init__(capacity, (dim,))
        self.k = k

    def answer(self, query: np.ndarray, k: Optional[int] = None) -> np.ndarray:
        k = self.k if k is None else k
        if not self.items:
            return np.zeros(self.elem_shape)
        stored = self.contents()
        dist = np.sqrt(((stored - query) ** 2).sum(axis=1))
        nearest = np.argsort(dist, kind="stable")[:k]
        return stored[nearest].mean(axis=0)


def knn_regress_step(store: KnnStore, query, target, k: Optional[int] = None) -> np.ndarray:
    out = store.answer(np.asarray(query, dtype=np.float64), k)
    store.push(target)
    return out


def weighted_normalized_sum(a, b, c, d):
    """(a*b + c*d) / (|a| + |c|), with 1e-8 added when the denominator is tiny."""
    den = np.abs(a) + np.abs(c)
    den = np.where(den < WNS_EPS, den + WNS_EPS, den)
    # weights first so a zero weight leaves the other term exact
    out = (a / den) * b + (c / den) * d
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# instances


def derive_seed(seed: int, label) -> int:
    digest = hashlib.blake2b(f"{seed}:{label}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little") & 0x7FFFFFFF


@dataclass
class ProgramInstance:
    graph: P.ProgramGraph
    binding: ts.EnvTypeBinding
    seed: int
    config: RuntimeConfig
    types: dict
    x_bindings: dict
    trainable: dict
    weights: dict = field(default_factory=dict)
    optimizers: dict = field(default_factory=dict)
    buffers: dict = field(default_factory=dict)
    running_stats: dict = field(default_factory=dict)
    knn_stores: dict = field(default_factory=dict)
    rngs: dict = field(default_factory=dict)
    steps: int = 0

    @property
    def kind(self) -> str:
        return self.graph.kind


def instantiate(g: P.ProgramGraph, binding: ts.EnvTypeBinding, seed: int,
                config: Optional[RuntimeConfig] = None, ablate: bool = False) -> ProgramInstance:
    """Bind ``g`` to an environment and initialise all of its state.

    With ``ablate`` every trainable network is replaced by a trainable constant
    output (used by the triviality test).
    """
    report = P.validate_program(g, binding, op_budget=10 ** 6)
    if not report.ok:
        raise P.ProgramError(f"program {g.name} does not validate: {report.failures()}")
    config = config or RuntimeConfig()
    info = P.infer_types(g)
    _, labels = P.canonical_order(g)
    inst = ProgramInstance(g, binding, seed, config, info.types, info.x_bindings,
                           P.weight_modules(g))
    for n in g.nodes:
        label = labels.get(n.id, n.id)
        if n.op == "weights":
            sig = ts.get_operation(g.vocabulary, n.param)
            arch = ts.resolve_signature(sig, binding).arch
            wseed = derive_seed(seed, label)
            if ablate and inst.trainable[n.id]:
                net = ConstantNet(arch.out_dim, arch.members if arch.kind == "ensemble" else 0, wseed)
            else:
                net = Network(arch, wseed)
            net_trainable = inst.trainable[n.id]
            for p in net.params:
                p.requires_grad = net_trainable
            inst.weights[n.id] = net
            if net_trainable:
                inst.optimizers[n.id] = Adam(net.params, lr=config.learning_rate)
            continue
        name = P.registry_op(g, n)
        if name == "variable_as_buffer":
            elem = ts.shape_of(inst.types[n.parents[0]], binding)
            inst.buffers[n.id] = FifoBuffer(config.buffer_capacity, elem)
        elif name == "running_norm":
            inst.running_stats[n.id] = RunningStat()
        elif name == "nearest_neighbor_regressor":
            inst.knn_stores[n.id] = KnnStore(config.knn_capacity, config.knn_k, binding.feature_dim)
        elif name == "normal_distribution":
            inst.rngs[n.id] = np.random.default_rng(derive_seed(seed, f"rng{label}"))
    return inst


def _encode_actions(actions, binding: ts.EnvTypeBinding) -> np.ndarray:
    actions = np.asarray(actions)
    if binding.action_form.kind == "discrete":
        idx = actions.astype(np.int64).reshape(-1)
        out = np.zeros((idx.size, binding.action_form.n))
        out[np.arange(idx.size), idx] = 1.0
        return out
    return actions.astype(np.float64).reshape(actions.shape[0], -1)


def step_batch(inst: ProgramInstance, batch: TransitionBatch,
               loss_log: Optional[dict] = None) -> np.ndarray:
    """Intrinsic reward per rollout for one time-step (pre-update outputs)."""
    if inst.kind != P.INTRINSIC:
        raise P.ProgramError("step_batch needs an intrinsic program")
    shape = tuple(inst.binding.state_form.shape)
    if tuple(batch.states.shape[1:]) != shape or tuple(batch.next_states.shape[1:]) != shape:
        raise ValueError(f"batch states {batch.states.shape[1:]} do not match binding {shape}")
    inputs = {
        "state": np.asarray(batch.states, dtype=np.float64),
        "state_next": np.asarray(batch.next_states, dtype=np.float64),
        "action": _encode_actions(batch.actions, inst.binding),
    }
    return run_step(inst, inputs, batch.rollout_count, loss_log=loss_log)


def combiner_step_batch(inst: ProgramInstance, intrinsic, extrinsic, t_over_T) -> np.ndarray:
    if inst.kind != P.COMBINER:
        raise P.ProgramError("combiner_step needs a combiner program")
    i = np.atleast_1d(np.asarray(intrinsic, dtype=np.float64))
    r = np.atleast_1d(np.asarray(extrinsic, dtype=np.float64))
    tt = np.broadcast_to(np.asarray(t_over_T, dtype=np.float64), i.shape).copy()
    return run_step(inst, {"intrinsic": i, "extrinsic": r, "time_fraction": tt}, i.shape[0])


def combiner_step(inst: ProgramInstance, i_t: float, r_t: float, t_over_T: float) -> float:
    return float(combiner_step_batch(inst, [i_t], [r_t], t_over_T)[0])


def run_step(inst: ProgramInstance, inputs: dict, batch: int, train: bool = True,
             loss_log: Optional[dict] = None) -> np.ndarray:
    values, losses = forward(inst, inputs, batch)
    if loss_log is not None:
        for nid, l in losses:
            loss_log.setdefault(nid, []).append(float(l.data))
    out = values[inst.graph.output].data
    if out.shape != (batch,):
        out = np.broadcast_to(out, (batch,))
    out = np.array(out, dtype=np.float64)
    if train:
        _update_parameters(inst, losses)
    _update_state(inst, values, batch)
    inst.steps += 1
    return out


def forward(inst: ProgramInstance, inputs: dict, batch: int):
    """Node values plus (loss node id, batch-mean loss) pairs."""
    g = inst.graph
    values = {}
    losses = []
    for n in g.nodes:
        if n.op == "weights":
            continue
        if n.op == "input":
            values[n.id] = Tensor(inputs[n.param])
            continue
        name = P.registry_op(g, n)
        args = [values[p] for p in P.data_parents(n)]
        if n.op in ("nn_apply", "nn_apply_detach"):
            net = inst.weights[n.parents[0]]
            if name.startswith("predict_"):
                query, target = args[:-1], T.detach(args[-1])
                out = net(_net_input(query))
                pred_loss = T.l2_distance(out, target)
                _check(n.id, pred_loss)
                losses.append((n.id, T.mean(pred_loss)))
            else:
                out = net(_net_input(args))
                if n.op == "nn_apply_detach":
                    out = T.detach(out)
        elif name == "minimize":
            losses.append((n.id, T.mean(args[0])))
            out = args[0]
        else:
            out = _functional(inst, n, name, args, batch)
        _check(n.id, out)
        values[n.id] = out
    return values, losses


def _net_input(args):
    if len(args) == 1:
        return args[0]
    return T.concat(args, axis=-1)


def _check(node_id, t: Tensor):
    if not np.all(np.isfinite(t.data)):
        raise EvaluationFailure(node_id)


def _update_parameters(inst: ProgramInstance, losses):
    if not losses or not inst.optimizers:
        return
    total = losses[0][1]
    for _, l in losses[1:]:
        total = T.add(total, l)
    if not np.isfinite(total.data).all():
        raise EvaluationFailure("loss")
    if not total.requires_grad:
        return
    for opt in inst.optimizers.values():
        opt.zero_grad()
    total.backward()
    for wid, opt in inst.optimizers.items():
        opt.step()
        for p in opt.params:
            if not np.all(np.isfinite(p.data)):
                raise EvaluationFailure(wid, "non-finite parameters")
        opt.zero_grad()


def _update_state(inst: ProgramInstance, values: dict, batch: int):
    g = inst.graph
    for nid, buf in inst.buffers.items():
        src = values[g.node(nid).parents[0]].data
        for b in range(batch):
            buf.push(src[b])
    for nid, store in inst.knn_stores.items():
        target = values[g.node(nid).parents[1]].data
        for b in range(batch):
            store.push(target[b])
    for nid, stat in inst.running_stats.items():
        src = values[g.node(nid).parents[0]].data
        for b in range(batch):
            stat.update(float(src[b]))


def _full(batch, value):
    return Tensor(np.full(batch, value, dtype=np.float64))


def _functional(inst: ProgramInstance, n: P.ProgramNode, name: str, args, batch: int) -> Tensor:
    if name in ts.CONSTANT_VALUES:
        return _full(batch, ts.CONSTANT_VALUES[name])
    if name == "normal_distribution":
        return Tensor(inst.rngs[n.id].standard_normal(batch))
    if name == "running_norm":
        scale = inst.running_stats[n.id].scale()
        return args[0] if scale is None else T.mul(args[0], 1.0 / scale)
    if name == "variable_as_buffer":
        contents = inst.buffers[n.id].contents()
        return Tensor(np.broadcast_to(contents, (batch,) + contents.shape).copy())
    if name == "nearest_neighbor_regressor":
        store = inst.knn_stores[n.id]
        q = args[0].data
        return Tensor(np.stack([store.answer(q[b]) for b in range(batch)]))
    if name == "action_loss":
        return action_space_loss(args[0], args[1], inst.binding)
    return apply_stateless(name, *args)


def action_space_loss(pred, target, binding: ts.EnvTypeBinding) -> Tensor:
    """Softmax + NLL for discrete actions, zero-padded MSE for continuous ones."""
    pred, target = T.as_tensor(pred), T.as_tensor(target)
    if binding.action_form.kind == "discrete":
        idx = np.argmax(target.data, axis=-1)
        width = max(pred.shape[-1], binding.action_form.n)
        return T.softmax_nll(T.pad_last(pred, width), idx)
    width = max(pred.shape[-1], target.shape[-1])
    return T.mse(T.pad_last(pred, width), T.pad_last(target, width))


def apply_stateless(name: str, *args) -> Tensor:
    """Batched semantics of the stateless functional operations."""
    a = [T.as_tensor(x) for x in args]
    if name in ("add", "add_x"):
        return T.add(a[0], a[1])
    if name == "subtract":
        return T.sub(a[0], a[1])
    if name == "subtract_one_tenth":
        return T.sub(a[0], 0.1)
    if name == "sqrt_abs":
        return T.sqrt_abs(a[0])
    if name == "l2_norm":
        return T.l2_norm(a[0])
    if name == "l2_distance":
        return T.l2_distance(a[0], a[1])
    if name == "dot_product":
        return T.dot(a[0], a[1])
    if name == "detach":
        return T.detach(a[0])
    if name == "mean":
        return T.mean(a[0], axis=1)
    if name == "mean_x":
        return T.mean(a[0], axis=1)
    if name == "variance":
        return T.list_variance(a[0])
    if name == "mapped_l2_norm":
        return T.l2_norm(a[0])
    if name == "average_distance":
        if a[0].shape[1] == 0:
            return Tensor(np.zeros(a[0].shape[0]))
        return T.mean(T.l2_distance(a[0], T.reshape(a[1], (a[1].shape[0], 1) + a[1].shape[1:])), axis=1)
    if name == "minus":
        return T.sub(a[0], T.reshape(a[1], (a[1].shape[0], 1) + a[1].shape[1:]))
    if name == "max":
        return T.maximum(a[0], a[1])
    if name == "min":
        return T.minimum(a[0], a[1])
    if name == "multiply":
        return T.mul(a[0], a[1])
    if name == "weighted_normalized_sum":
        return Tensor(weighted_normalized_sum(*(x.data for x in a)))
    raise ValueError(f"no stateless semantics for {name!r}")


def apply_lifted(name: str, index: int, *args) -> Tensor:
    """Map a stateless op over the list supplied at ``index`` (axis 1)."""
    args = [T.as_tensor(x) for x in args]
    lst = args[index]
    outs = []
    for k in range(lst.shape[1]):
        call = list(args)
        call[index] = T.index(lst, (slice(None), k))
        outs.append(apply_stateless(name, *call))
    if not outs:
        return Tensor(np.zeros((lst.shape[0], 0)))
    return T.stack(outs, axis=1)


# ---------------------------------------------------------------------------
# trace export


def trace_records(time_step: int, intrinsic, extrinsic, combined):
    """Line records (time_step, rollout_index, intrinsic, extrinsic, combined)."""
    for k, (i, r, c) in enumerate(zip(intrinsic, extrinsic, combined)):
        yield f"{time_step}\t{k}\t{float(i)!r}\t{float(r)!r}\t{float(c)!r}"
