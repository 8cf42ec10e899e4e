"""MLP / CNN / ensemble networks and flat binary weight snapshots."""

from __future__ import annotations

import struct

import numpy as np

from ..typesys import Architecture, EnvTypeBinding, TypeSystemError
from . import tensor as T
from .tensor import Tensor


class Network:
    """A feed-forward net built from an :class:`Architecture`.

    Parameters are stored in declaration order: for each layer, weight then bias.
    """

    def __init__(self, arch: Architecture, seed: int, params=None):
        self.arch = arch
        self.seed = int(seed)
        if arch.kind == "ensemble":
            member = arch.member()
            self.members = [Network(member, self.seed + i) for i in range(arch.members)]
            if params is not None:
                it = iter(params)
                for m in self.members:
                    m.params = [next(it) for _ in m.params]
            self.params = [p for m in self.members for p in m.params]
            return
        self.members = None
        self.layers = _layer_specs(arch)
        if params is None:
            rng = np.random.default_rng(self.seed)
            params = []
            for spec in self.layers:
                fan_in = int(np.prod(spec["w"][1:]))
                bound = 1.0 / np.sqrt(fan_in)
                params.append(Tensor(rng.uniform(-bound, bound, size=spec["w"]), requires_grad=True))
                params.append(Tensor(rng.uniform(-bound, bound, size=spec["b"]), requires_grad=True))
        self.params = list(params)

    def __call__(self, x):
        return self.forward(x)

    def forward(self, x, upto=None):
        if self.members is not None:
            return T.stack([m.forward(x) for m in self.members], axis=1)
        h = T.as_tensor(x)
        n = len(self.layers) if upto is None else upto
        for i, spec in enumerate(self.layers[:n]):
            w, b = self.params[2 * i], self.params[2 * i + 1]
            if spec["kind"] == "conv":
                h = T.conv2d(h, w, b, stride=2, pad=1)
            else:
                if h.ndim > 2:
                    h = T.reshape(h, (h.shape[0], -1))
                h = T.add(T.matmul(h, w), b)
            if i < len(self.layers) - 1:
                h = T.relu(h)
        if h.ndim > 2:
            h = T.reshape(h, (h.shape[0], -1))
        return h

    def param_count(self) -> int:
        return int(sum(p.data.size for p in self.params))

    def flat(self) -> np.ndarray:
        return np.concatenate([p.data.reshape(-1) for p in self.params])

    def set_requires_grad(self, flag: bool):
        for p in self.params:
            p.requires_grad = flag


def _conv_out(n):
    return (n + 2 - 3) // 2 + 1


def _layer_specs(arch: Architecture):
    specs = []
    if arch.kind == "cnn":
        c, h, w = arch.in_shape
        for out_c in arch.conv_channels:
            specs.append({"kind": "conv", "w": (out_c, c, 3, 3), "b": (out_c,)})
            c, h, w = out_c, _conv_out(h), _conv_out(w)
        specs.append({"kind": "linear", "w": (c * h * w, arch.out_dim), "b": (arch.out_dim,)})
    elif arch.kind == "mlp":
        dims = (arch.in_shape[0],) + tuple(arch.hidden) + (arch.out_dim,)
        for a, b in zip(dims[:-1], dims[1:]):
            specs.append({"kind": "linear", "w": (a, b), "b": (b,)})
    else:
        raise TypeSystemError(f"unknown architecture kind {arch.kind!r}")
    return specs


def layer_dims(arch: Architecture):
    """Layer widths for an MLP, e.g. (8, 64, 64, 32)."""
    specs = _layer_specs(arch)
    return tuple([specs[0]["w"][0]] + [s["w"][1] for s in specs])


def init_network(arch: Architecture, binding: EnvTypeBinding, seed: int) -> Network:
    binding.validate()
    if arch.kind in ("cnn",) or (arch.kind == "ensemble" and len(arch.in_shape) == 3):
        if binding.state_form.kind != "image":
            raise TypeSystemError("CNN architecture needs an image state binding")
    return Network(arch, seed)


class ConstantNet:
    """Input-independent stand-in with a single trainable output vector."""

    def __init__(self, out_dim: int, members: int = 0, seed: int = 0):
        rng = np.random.default_rng(seed)
        shape = (members, out_dim) if members else (out_dim,)
        self.members = members
        self.params = [Tensor(rng.normal(0.0, 0.1, size=shape), requires_grad=True)]

    def forward(self, x):
        batch = T.as_tensor(x).shape[0]
        c = self.params[0]
        return T.add(Tensor(np.zeros((batch,) + c.shape)), c)

    __call__ = forward


# ---------------------------------------------------------------------------
# snapshots: uint32 arch length, arch utf-8, int64 seed, uint64 count, float64 LE values


def save_weights(net: Network) -> bytes:
    arch = _arch_string(net.arch).encode("utf-8")
    values = net.flat().astype("<f8")
    return (struct.pack("<I", len(arch)) + arch + struct.pack("<qQ", net.seed, values.size)
            + values.tobytes())


def load_weights(blob: bytes):
    """Return (arch string, seed, flat float64 array)."""
    (n,) = struct.unpack_from("<I", blob, 0)
    arch = blob[4:4 + n].decode("utf-8")
    seed, count = struct.unpack_from("<qQ", blob, 4 + n)
    start = 4 + n + 16
    values = np.frombuffer(blob, dtype="<f8", count=count, offset=start).astype(np.float64)
    return arch, seed, values


def restore(net: Network, values: np.ndarray):
    """Copy a flat parameter vector back into ``net``."""
    if values.size != net.param_count():
        raise ValueError(f"snapshot holds {values.size} values, net needs {net.param_count()}")
    pos = 0
    for p in net.params:
        p.data = values[pos:pos + p.data.size].reshape(p.shape).copy()
        pos += p.data.size


def _arch_string(arch: Architecture) -> str:
    return (f"{arch.kind};in={','.join(map(str, arch.in_shape))};out={arch.out_dim};"
            f"hidden={','.join(map(str, arch.hidden))};conv={','.join(map(str, arch.conv_channels))};"
            f"members={arch.members}")
