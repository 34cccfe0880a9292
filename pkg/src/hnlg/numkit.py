"""Minimal deterministic numeric kernel: float64 tensors, reverse-mode autodiff,
an Adam optimizer, and binary checkpoint I/O.

Everything the generation model needs and nothing more: dense arrays, a handful
of differentiable ops (matmul, pointwise nonlinearities, concat, softmax, GRU
cell, embedding lookup, attention reductions, masked cross entropy), gradient
accumulation via ``backward``, and ``adam_step``.
"""

from __future__ import annotations

import struct
from collections.abc import Iterable, Sequence

import numpy as np


class DimensionError(ValueError):
    """Raised when operand shapes are incompatible for an operation."""


class ContractError(RuntimeError):
    """Raised when an operation is called outside its documented contract."""


# ---------------------------------------------------------------------------
# Tensor and graph machinery
# ---------------------------------------------------------------------------


class Tensor:
    """Dense float64 array with an optional gradient buffer.

    Tensors produced by the ops below remember their parents and a backward
    closure; ``backward`` on a scalar loss accumulates gradients into every
    reachable tensor's ``grad``. Gradients accumulate across calls; callers
    reset them (see ``ParamSet.zero_grads``).
    """

    __slots__ = ("data", "grad", "_parents", "_backward")

    def __init__(self, data, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = _parents
        self._backward = _backward

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape})"


def _accum(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce gradient ``g`` back to ``shape`` after numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def backward(loss: Tensor) -> None:
    """Reverse-mode sweep from a scalar loss.

    Populates ``grad`` on every tensor reachable through the graph. Gradients
    accumulate on repeated calls; the caller is responsible for resetting.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.data.shape}")

    # Iterative post-order topological sort (graphs can be thousands deep).
    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))

    _accum(loss, np.ones_like(loss.data))
    for node in reversed(topo):
        if node._backward is not None:
            node._backward(node.grad)


# ---------------------------------------------------------------------------
# Differentiable operations
# ---------------------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: incompatible shapes {a.shape} x {b.shape}")
    out = Tensor(a.data @ b.data, (a, b))

    def bw(g):
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    out._backward = bw
    return out


def matmul_transposed(a: Tensor, b: Tensor) -> Tensor:
    """a @ b.T for 2-D tensors (saves materializing the transpose)."""
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[1]:
        raise DimensionError(f"matmul_transposed: incompatible shapes {a.shape} x {b.shape}^T")
    out = Tensor(a.data @ b.data.T, (a, b))

    def bw(g):
        _accum(a, g @ b.data)
        _accum(b, g.T @ a.data)

    out._backward = bw
    return out


def add(a: Tensor, b: Tensor) -> Tensor:
    try:
        data = a.data + b.data
    except ValueError as exc:
        raise DimensionError(f"add: incompatible shapes {a.shape} + {b.shape}") from exc
    out = Tensor(data, (a, b))

    def bw(g):
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, _unbroadcast(g, b.shape))

    out._backward = bw
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    try:
        data = a.data * b.data
    except ValueError as exc:
        raise DimensionError(f"mul: incompatible shapes {a.shape} * {b.shape}") from exc
    out = Tensor(data, (a, b))

    def bw(g):
        _accum(a, _unbroadcast(g * b.data, a.shape))
        _accum(b, _unbroadcast(g * a.data, b.shape))

    out._backward = bw
    return out


def scale(a: Tensor, c: float) -> Tensor:
    out = Tensor(a.data * c, (a,))
    out._backward = lambda g: _accum(a, g * c)
    return out


def sigmoid(a: Tensor) -> Tensor:
    s = _sigmoid_np(a.data)
    out = Tensor(s, (a,))
    out._backward = lambda g: _accum(a, g * s * (1.0 - s))
    return out


def tanh(a: Tensor) -> Tensor:
    t = np.tanh(a.data)
    out = Tensor(t, (a,))
    out._backward = lambda g: _accum(a, g * (1.0 - t * t))
    return out


def tsum(a: Tensor) -> Tensor:
    """Sum of all entries, as a scalar tensor."""
    out = Tensor(a.data.sum(), (a,))
    out._backward = lambda g: _accum(a, np.full_like(a.data, float(g)))
    return out


def concat_lastdim(parts: Sequence[Tensor]) -> Tensor:
    if not parts:
        raise DimensionError("concat_lastdim: no inputs")
    lead = parts[0].shape[:-1]
    for p in parts:
        if p.shape[:-1] != lead:
            raise DimensionError(
                f"concat_lastdim: leading dims differ ({parts[0].shape} vs {p.shape})"
            )
    widths = [p.shape[-1] for p in parts]
    out = Tensor(np.concatenate([p.data for p in parts], axis=-1), tuple(parts))

    def bw(g):
        offset = 0
        for p, w in zip(parts, widths):
            _accum(p, g[..., offset : offset + w])
            offset += w

    out._backward = bw
    return out


def concat_rows(parts: Sequence[Tensor]) -> Tensor:
    """Stack 2-D tensors with equal widths along axis 0."""
    width = parts[0].shape[-1]
    for p in parts:
        if p.data.ndim != 2 or p.shape[-1] != width:
            raise DimensionError("concat_rows: inputs must be 2-D with equal widths")
    heights = [p.shape[0] for p in parts]
    out = Tensor(np.concatenate([p.data for p in parts], axis=0), tuple(parts))

    def bw(g):
        offset = 0
        for p, h in zip(parts, heights):
            _accum(p, g[offset : offset + h])
            offset += h

    out._backward = bw
    return out


def softmax_lastdim(a: Tensor) -> Tensor:
    s = _softmax_np(a.data)
    out = Tensor(s, (a,))

    def bw(g):
        inner = (g * s).sum(axis=-1, keepdims=True)
        _accum(a, s * (g - inner))

    out._backward = bw
    return out


def rows(table: Tensor, ids: np.ndarray) -> Tensor:
    """Gather rows of a 2-D table (embedding lookup)."""
    if table.data.ndim != 2:
        raise DimensionError(f"rows: table must be 2-D, got {table.shape}")
    ids = np.asarray(ids, dtype=np.intp)
    out = Tensor(table.data[ids], (table,))

    def bw(g):
        if table.grad is None:
            table.grad = np.zeros_like(table.data)
        np.add.at(table.grad, ids, g)

    out._backward = bw
    return out


def dot_scores(query: Tensor, states: Sequence[Tensor]) -> Tensor:
    """Per-state inner products: out[b, j] = query[b] . states[j][b]."""
    if not states:
        raise DimensionError("dot_scores: no states")
    for s in states:
        if s.shape != query.shape:
            raise DimensionError(f"dot_scores: state {s.shape} vs query {query.shape}")
    stacked = np.stack([s.data for s in states], axis=0)  # (T, B, H)
    out = Tensor(np.einsum("bh,tbh->bt", query.data, stacked), (query, *states))

    def bw(g):
        _accum(query, np.einsum("bt,tbh->bh", g, stacked))
        for j, s in enumerate(states):
            _accum(s, g[:, j : j + 1] * query.data)

    out._backward = bw
    return out


def weighted_sum(weights: Tensor, states: Sequence[Tensor]) -> Tensor:
    """Convex mix of states: out[b] = sum_j weights[b, j] * states[j][b]."""
    if weights.shape[-1] != len(states):
        raise DimensionError(
            f"weighted_sum: {weights.shape[-1]} weights for {len(states)} states"
        )
    stacked = np.stack([s.data for s in states], axis=0)  # (T, B, H)
    out = Tensor(np.einsum("bt,tbh->bh", weights.data, stacked), (weights, *states))

    def bw(g):
        _accum(weights, np.einsum("bh,tbh->bt", g, stacked))
        for j, s in enumerate(states):
            _accum(s, weights.data[:, j : j + 1] * g)

    out._backward = bw
    return out


def cross_entropy_sum(logits: Tensor, target_ids: np.ndarray, mask: np.ndarray) -> Tensor:
    """Masked sum of token-level cross entropies (natural log) over a batch.

    ``logits`` is (B, V); ``target_ids`` (B,) int; ``mask`` (B,) of 0/1 floats.
    Returns a scalar tensor equal to sum_b mask[b] * (-log softmax(logits)[b, t_b]).
    """
    target_ids = np.asarray(target_ids, dtype=np.intp)
    mask = np.asarray(mask, dtype=np.float64)
    z = logits.data
    m = z.max(axis=-1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(z - m).sum(axis=-1))
    picked = z[np.arange(z.shape[0]), target_ids]
    out = Tensor(((lse - picked) * mask).sum(), (logits,))

    def bw(g):
        probs = _softmax_np(z)
        grad = probs * mask[:, None]
        grad[np.arange(z.shape[0]), target_ids] -= mask
        _accum(logits, grad * float(g))

    out._backward = bw
    return out


# Raw-array forward helpers, shared by the autodiff ops above and the
# no-graph generation fast path in the model code.


def _sigmoid_np(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _softmax_np(x: np.ndarray) -> np.ndarray:
    e = np.exp(x - x.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def gru_forward_np(
    x: np.ndarray, h: np.ndarray, wz, bz, wr, br, wh, bh
) -> tuple[np.ndarray, ...]:
    """One GRU step on raw arrays; returns (h_new, z, r, h_tilde, xh, xrh)."""
    xh = np.concatenate([x, h], axis=-1)
    z = _sigmoid_np(xh @ wz + bz)
    r = _sigmoid_np(xh @ wr + br)
    xrh = np.concatenate([x, r * h], axis=-1)
    h_tilde = np.tanh(xrh @ wh + bh)
    h_new = (1.0 - z) * h + z * h_tilde
    return h_new, z, r, h_tilde, xh, xrh


class GruParams:
    """The six weight/bias tensors of one GRU cell.

    Weights are (in_dim + hidden, hidden); biases (hidden,). Convention:
    z = sigmoid([x;h] Wz + bz), r = sigmoid([x;h] Wr + br),
    h~ = tanh([x; r*h] Wh + bh), h' = (1-z)*h + z*h~.
    """

    __slots__ = ("wz", "bz", "wr", "br", "wh", "bh")

    def __init__(self, wz: Tensor, bz: Tensor, wr: Tensor, br: Tensor, wh: Tensor, bh: Tensor):
        self.wz, self.bz, self.wr, self.br, self.wh, self.bh = wz, bz, wr, br, wh, bh

    def tensors(self) -> tuple[Tensor, ...]:
        return (self.wz, self.bz, self.wr, self.br, self.wh, self.bh)


def gru_cell(x: Tensor, h: Tensor, p: GruParams) -> Tensor:
    """Differentiable GRU step: h' = (1-z)*h + z*h~ (fused node)."""
    d_in = x.shape[-1] + h.shape[-1]
    if p.wz.shape != (d_in, h.shape[-1]):
        raise DimensionError(
            f"gru_cell: weight shape {p.wz.shape} does not match inputs "
            f"x{x.shape} h{h.shape}"
        )
    h_new, z, r, h_tilde, xh, xrh = gru_forward_np(
        x.data, h.data, p.wz.data, p.bz.data, p.wr.data, p.br.data, p.wh.data, p.bh.data
    )
    dx = x.shape[-1]
    out = Tensor(h_new, (x, h, *p.tensors()))

    def bw(g):
        dz = g * (h_tilde - h.data)
        dh_tilde = g * z
        dh_direct = g * (1.0 - z)
        da_h = dh_tilde * (1.0 - h_tilde * h_tilde)
        da_z = dz * z * (1.0 - z)

        _accum(p.wh, xrh.T @ da_h)
        _accum(p.bh, da_h.sum(axis=0))
        dxrh = da_h @ p.wh.data.T
        dx_part = dxrh[:, :dx].copy()
        drh = dxrh[:, dx:]
        dr = drh * h.data
        dh_from_rh = drh * r
        da_r = dr * r * (1.0 - r)

        _accum(p.wz, xh.T @ da_z)
        _accum(p.bz, da_z.sum(axis=0))
        _accum(p.wr, xh.T @ da_r)
        _accum(p.br, da_r.sum(axis=0))
        dxh = da_z @ p.wz.data.T + da_r @ p.wr.data.T
        dx_part += dxh[:, :dx]
        dh_total = dh_direct + dh_from_rh + dxh[:, dx:]
        _accum(x, dx_part)
        _accum(h, dh_total)

    out._backward = bw
    return out


_ELEMENTWISE = {
    "sigmoid": sigmoid,
    "tanh": tanh,
    "add": add,
    "mul": mul,
    "concat_lastdim": lambda *parts: concat_lastdim(parts),
    "softmax_lastdim": softmax_lastdim,
}


def elementwise(op_kind: str, *inputs: Tensor) -> Tensor:
    """Dispatch wrapper over the pointwise/rowwise ops by name."""
    try:
        fn = _ELEMENTWISE[op_kind]
    except KeyError:
        raise ContractError(f"elementwise: unknown op_kind {op_kind!r}") from None
    return fn(*inputs)


# ---------------------------------------------------------------------------
# Parameters and optimizer
# ---------------------------------------------------------------------------


class ParamSet:
    """Named map of trainable tensors with seeded Glorot initialization."""

    def __init__(self, rng_seed: int):
        self.rng_seed = int(rng_seed)
        self._rng = np.random.default_rng(self.rng_seed)
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, tensor: Tensor) -> Tensor:
        if name in self._params:
            raise ContractError(f"duplicate parameter name {name!r}")
        self._params[name] = tensor
        return tensor

    def glorot(self, name: str, fan_in: int, fan_out: int) -> Tensor:
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        data = self._rng.uniform(-bound, bound, size=(fan_in, fan_out))
        return self.add(name, Tensor(data))

    def zeros(self, name: str, *shape: int) -> Tensor:
        return self.add(name, Tensor(np.zeros(shape)))

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self):
        return iter(self._params)

    def items(self) -> Iterable[tuple[str, Tensor]]:
        return self._params.items()

    def names(self) -> list[str]:
        return list(self._params)

    def zero_grads(self) -> None:
        for t in self._params.values():
            t.grad = np.zeros_like(t.data)

    def gru(self, prefix: str, in_dim: int, hidden: int) -> GruParams:
        """Create and register the six tensors of a GRU cell under a prefix."""
        d = in_dim + hidden
        return GruParams(
            self.glorot(f"{prefix}.wz", d, hidden),
            self.zeros(f"{prefix}.bz", hidden),
            self.glorot(f"{prefix}.wr", d, hidden),
            self.zeros(f"{prefix}.br", hidden),
            self.glorot(f"{prefix}.wh", d, hidden),
            self.zeros(f"{prefix}.bh", hidden),
        )

    def gru_view(self, prefix: str) -> GruParams:
        return GruParams(*(self[f"{prefix}.{k}"] for k in ("wz", "bz", "wr", "br", "wh", "bh")))


class AdamState:
    """Adam moments plus hyperparameters (lr 1e-3, beta 0.9/0.999, eps 1e-8)."""

    def __init__(self, learning_rate: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, epsilon: float = 1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.step_count = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}


def adam_step(params: ParamSet, state: AdamState) -> None:
    """Bias-corrected Adam update over all parameters; clears grads after."""
    for name, p in params.items():
        if p.grad is None:
            raise ContractError(f"adam_step: parameter {name!r} has no gradient")
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**t
    bc2 = 1.0 - b2**t
    for name, p in params.items():
        g = p.grad
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p.data -= state.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)
        p.grad = None


# ---------------------------------------------------------------------------
# Checkpoint container
# ---------------------------------------------------------------------------

CHECKPOINT_MAGIC = b"HNLG"
CHECKPOINT_VERSION = 1


def save_checkpoint(path, params: ParamSet) -> None:
    """Write parameters to the flat binary container (bit-exact round trip).

    Layout, all little-endian: magic ``HNLG``, version u32, then per parameter
    in insertion order: name length u32, UTF-8 name, rank u64, each dim u64,
    row-major f64 payload.
    """
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", CHECKPOINT_VERSION))
        for name, t in params.items():
            raw = name.encode("utf-8")
            f.write(struct.pack("<I", len(raw)))
            f.write(raw)
            arr = np.ascontiguousarray(t.data, dtype="<f8")
            f.write(struct.pack("<Q", arr.ndim))
            for d in arr.shape:
                f.write(struct.pack("<Q", d))
            f.write(arr.tobytes())


def load_checkpoint(path) -> dict[str, np.ndarray]:
    """Read a checkpoint container back into an ordered name -> array map."""
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != CHECKPOINT_MAGIC:
        raise ContractError(f"{path}: not a checkpoint file (bad magic)")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != CHECKPOINT_VERSION:
        raise ContractError(f"{path}: unsupported checkpoint version {version}")
    out: dict[str, np.ndarray] = {}
    pos = 8

    def take(n: int) -> int:
        nonlocal pos
        if pos + n > len(blob):
            raise ContractError(f"{path}: truncated or trailing bytes at offset {pos}")
        pos += n
        return pos - n

    while pos < len(blob):
        (name_len,) = struct.unpack_from("<I", blob, take(4))
        name = blob[take(name_len) : pos].decode("utf-8")
        (rank,) = struct.unpack_from("<Q", blob, take(8))
        dims = struct.unpack_from(f"<{rank}Q", blob, take(8 * rank)) if rank else ()
        count = int(np.prod(dims)) if dims else 1
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=take(8 * count))
        if name in out:
            raise ContractError(f"{path}: duplicate parameter {name!r}")
        out[name] = arr.reshape(dims).astype(np.float64)
    return out
