"""Shared Q-network: fully connected ReLU stack with a linear 5-way head.

Weights are stored as ``(fan_in, fan_out)`` matrices so a batch of states
``S`` (``B x fan_in``) maps forward as ``S @ W + b``.
"""
from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .gridmap import ACTION_ORDER_TAG, N_ACTIONS
from .statereward import STATE_DIM

FULL_DIMS = (13, 2048, 1024, 256, 64, 5)
DESK_DIMS = (13, 128, 64, 5)


class CheckpointError(ValueError):
    pass


@dataclass(eq=False)
class QParams:
    weights: list
    biases: list

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    def copy(self) -> "QParams":
        return QParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def n_params(self) -> int:
        return sum(a.size for a in self.arrays())


def _check_dims(dims):
    dims = tuple(int(d) for d in dims)
    if len(dims) < 2 or dims[0] != STATE_DIM or dims[-1] != N_ACTIONS or min(dims) < 1:
        raise ValueError(f"net dims must run {STATE_DIM} -> ... -> {N_ACTIONS}, got {dims}")
    return dims


def init_params(dims: Sequence[int] = FULL_DIMS, seed: int | np.random.Generator = 0) -> QParams:
    """He-uniform weights, zero biases."""
    dims = _check_dims(dims)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        lim = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-lim, lim, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return QParams(weights, biases)


def zeros_like(params: QParams) -> QParams:
    return QParams([np.zeros_like(w) for w in params.weights],
                   [np.zeros_like(b) for b in params.biases])


def _activations(params: QParams, x: np.ndarray) -> list[np.ndarray]:
    acts = [x]
    last = len(params.weights) - 1
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = acts[-1] @ w + b
        acts.append(z if l == last else np.maximum(z, 0.0))
    return acts


def forward(params: QParams, s) -> np.ndarray:
    """Q-values in canonical action order for one state or a batch of states."""
    x = np.asarray(s, dtype=float)
    if x.shape[-1] != params.dims[0]:
        raise ValueError(f"state has {x.shape[-1]} entries, network expects {params.dims[0]}")
    if not np.all(np.isfinite(x)):
        raise ValueError("state contains non-finite entries")
    single = x.ndim == 1
    out = _activations(params, np.atleast_2d(x))[-1]
    return out[0] if single else out


def masked_argmax(q: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Row-wise argmax over feasible actions; ties go to the lowest index."""
    q = np.atleast_2d(q)
    mask = np.atleast_2d(mask).astype(bool)
    if not mask.any(axis=1).all():
        raise ValueError("a state has no feasible action")
    return np.argmax(np.where(mask, q, -np.inf), axis=1)


class Batch(NamedTuple):
    s: np.ndarray          # (B, 13)
    u: np.ndarray          # (B,) int
    r: np.ndarray          # (B,)
    s_next: np.ndarray     # (B, 13)
    mask_next: np.ndarray  # (B, 5) bool


def as_batch(transitions) -> Batch:
    if isinstance(transitions, Batch):
        return transitions
    transitions = list(transitions)
    if not transitions:
        raise ValueError("empty batch")
    return Batch(
        np.array([t.s for t in transitions], dtype=float),
        np.array([int(t.u) for t in transitions], dtype=np.int64),
        np.array([t.r for t in transitions], dtype=float),
        np.array([t.s_next for t in transitions], dtype=float),
        np.array([t.feasible_next for t in transitions], dtype=bool),
    )


def td_targets(params: QParams, target: QParams, batch: Batch, gamma: float) -> np.ndarray:
    """Double-DQN targets: the live net picks the next action, the target net scores it."""
    pick = masked_argmax(forward(params, batch.s_next), batch.mask_next)
    q_eval = forward(target, batch.s_next)
    return batch.r + gamma * q_eval[np.arange(len(pick)), pick]


def loss_and_grad(params: QParams, target: QParams, batch, gamma: float) -> tuple[float, QParams]:
    batch = as_batch(batch)
    n = len(batch.u)
    if n == 0:
        raise ValueError("empty batch")
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must be in [0, 1), got {gamma}")
    y = td_targets(params, target, batch, gamma)  # constant w.r.t. params

    acts = _activations(params, batch.s)
    rows = np.arange(n)
    q_sel = acts[-1][rows, batch.u]
    err = y - q_sel
    loss = float(np.mean(err * err))

    g = np.zeros_like(acts[-1])
    g[rows, batch.u] = -2.0 * err / n
    gw = [None] * len(params.weights)
    gb = [None] * len(params.weights)
    for l in range(len(params.weights) - 1, -1, -1):
        gw[l] = acts[l].T @ g
        gb[l] = g.sum(axis=0)
        if l > 0:
            g = (g @ params.weights[l].T) * (acts[l] > 0)
    return loss, QParams(gw, gb)


@dataclass(eq=False)
class OptimizerState:
    """Adam moments; ``m``/``v`` mirror ``QParams.arrays()`` ordering."""

    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params: QParams, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        return cls(lr, beta1, beta2, eps, 0,
                   [np.zeros_like(a) for a in params.arrays()],
                   [np.zeros_like(a) for a in params.arrays()])

    def copy(self) -> "OptimizerState":
        return OptimizerState(self.lr, self.beta1, self.beta2, self.eps, self.step,
                              [a.copy() for a in self.m], [a.copy() for a in self.v])


def optimizer_step(params: QParams, grads: QParams, opt: OptimizerState):
    """One Adam update. Mutates ``params`` and ``opt`` in place and returns both."""
    p_arrays, g_arrays = params.arrays(), grads.arrays()
    if len(p_arrays) != len(g_arrays) or any(p.shape != g.shape for p, g in zip(p_arrays, g_arrays)):
        raise ValueError(f"gradient shapes {[g.shape for g in g_arrays]} "
                         f"do not match parameters {[p.shape for p in p_arrays]}")
    if not opt.m:
        opt.m = [np.zeros_like(a) for a in p_arrays]
        opt.v = [np.zeros_like(a) for a in p_arrays]
    opt.step += 1
    bc1 = 1.0 - opt.beta1 ** opt.step
    bc2 = 1.0 - opt.beta2 ** opt.step
    for p, g, m, v in zip(p_arrays, g_arrays, opt.m, opt.v):
        m *= opt.beta1
        m += (1.0 - opt.beta1) * g
        v *= opt.beta2
        v += (1.0 - opt.beta2) * (g * g)
        p -= (opt.lr / bc1) * m / (np.sqrt(v / bc2) + opt.eps)
    return params, opt


def hard_update(target: QParams | None, params: QParams) -> QParams:
    if target is not None and target.dims != params.dims:
        raise ValueError(f"target dims {target.dims} differ from live dims {params.dims}")
    return params.copy()


# checkpoint container --------------------------------------------------------

MAGIC = b"DPQNCKPT"
VERSION = 1
_PREFIX = struct.Struct("<8sII")  # magic, version, header length


def save_checkpoint(params: QParams, opt: OptimizerState | None = None,
                    metadata: dict | None = None) -> bytes:
    """Serialize to the versioned binary container.

    Layout: magic, u32 version, u32 header length, UTF-8 ``key=value`` header
    lines, then little-endian float64 tensors (W1, b1, W2, b2, ... then the
    Adam first and second moments in the same order when present).
    """
    payload = [a.astype("<f8").tobytes() for a in params.arrays()]
    header = {
        "dims": ",".join(str(d) for d in params.dims),
        "action_order": ACTION_ORDER_TAG,
        "has_optimizer": "1" if opt is not None else "0",
    }
    if opt is not None:
        m = opt.m or [np.zeros_like(a) for a in params.arrays()]
        v = opt.v or [np.zeros_like(a) for a in params.arrays()]
        payload += [a.astype("<f8").tobytes() for a in m]
        payload += [a.astype("<f8").tobytes() for a in v]
        header.update({"opt.lr": repr(opt.lr), "opt.beta1": repr(opt.beta1),
                       "opt.beta2": repr(opt.beta2), "opt.eps": repr(opt.eps),
                       "opt.step": str(opt.step)})
    for key, value in (metadata or {}).items():
        key, value = str(key), str(value)
        if "=" in key or "\n" in key or "\n" in value:
            raise CheckpointError(f"metadata entry {key!r} cannot be stored")
        header[f"meta.{key}"] = value
    body = b"".join(payload)
    header["payload_crc32"] = str(zlib.crc32(body))
    head = "".join(f"{k}={v}\n" for k, v in header.items()).encode("utf-8")
    return _PREFIX.pack(MAGIC, VERSION, len(head)) + head + body


def load_checkpoint(data: bytes, expect_dims: Sequence[int] | None = None):
    """Inverse of :func:`save_checkpoint`; returns ``(params, opt_or_None, metadata)``."""
    if len(data) < _PREFIX.size:
        raise CheckpointError(f"checkpoint truncated: {len(data)} bytes, header needs {_PREFIX.size}")
    magic, version, head_len = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise CheckpointError(f"not a Q-network checkpoint (magic {magic!r})")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}, expected {VERSION}")
    start = _PREFIX.size
    if len(data) < start + head_len:
        raise CheckpointError("checkpoint truncated inside header")
    try:
        lines = data[start:start + head_len].decode("utf-8").splitlines()
        header = dict(line.split("=", 1) for line in lines if line)
        dims = tuple(int(d) for d in header["dims"].split(","))
    except (UnicodeDecodeError, ValueError, KeyError) as exc:
        raise CheckpointError(f"corrupt checkpoint header: {exc}") from None
    if header.get("action_order") != ACTION_ORDER_TAG:
        raise CheckpointError(f"action order {header.get('action_order')!r} != {ACTION_ORDER_TAG!r}")
    if expect_dims is not None and tuple(expect_dims) != dims:
        raise CheckpointError(f"checkpoint net dims {dims} do not match expected {tuple(expect_dims)}")

    shapes = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        shapes += [(fan_in, fan_out), (fan_out,)]
    has_opt = header.get("has_optimizer") == "1"
    blocks = shapes * (3 if has_opt else 1)
    need = 8 * sum(int(np.prod(s)) for s in blocks)
    body = data[start + head_len:]
    if len(body) != need:
        raise CheckpointError(f"checkpoint payload is {len(body)} bytes, dims {dims} need {need}")
    if str(zlib.crc32(body)) != header.get("payload_crc32"):
        raise CheckpointError("checkpoint payload checksum mismatch")

    arrays, off = [], 0
    for s in blocks:
        n = int(np.prod(s))
        arrays.append(np.frombuffer(body, dtype="<f8", count=n, offset=off).astype(float).reshape(s))
        off += 8 * n
    k = len(shapes)
    params = QParams(arrays[0:k:2], arrays[1:k:2])
    opt = None
    if has_opt:
        opt = OptimizerState(float(header["opt.lr"]), float(header["opt.beta1"]),
                             float(header["opt.beta2"]), float(header["opt.eps"]),
                             int(header["opt.step"]), arrays[k:2 * k], arrays[2 * k:3 * k])
    meta = {key[5:]: v for key, v in header.items() if key.startswith("meta.")}
    return params, opt, meta
