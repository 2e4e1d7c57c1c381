"""Dense-network substrate: MLPs with hand-rolled reverse-mode gradients, Adam,
and a portable binary checkpoint format.

Parameters are float32; loss reductions elsewhere accumulate in float64. The
backward pass returns both parameter and input gradients so callers can chain
through a network (the actor update differentiates the critic w.r.t. its
action input).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

CHECKPOINT_MAGIC = b"SNAVCKPT"
CHECKPOINT_VERSION = 1


class CheckpointError(RuntimeError):
    """Raised for unreadable, truncated or incompatible checkpoint files."""


class Mlp:
    """Fully connected net with rectifier hidden layers and a linear head.

    `sizes` is the full chain [in, hidden..., out]. Initialization is uniform
    fan-in scaling; `final_scale` shrinks the output layer (used to start
    policies near zero).

    All parameters live in one flat buffer with per-layer views, so optimizer
    and target-smoothing updates are single vector operations; params() and
    the gradients returned by backward() are that buffer and a matching flat
    gradient.
    """

    def __init__(self, sizes: list[int], rng: np.random.Generator,
                 final_scale: float = 1.0, dtype=np.float32):
        self.sizes = list(sizes)
        self.dtype = dtype
        self._build_views(np.empty(self._total_params(sizes), dtype=dtype))
        for i, (fan_in, w, b) in enumerate(zip(sizes[:-1], self.weights, self.biases)):
            bound = 1.0 / np.sqrt(fan_in)
            scale = final_scale if i == len(sizes) - 2 else 1.0
            w[...] = scale * rng.uniform(-bound, bound, size=w.shape)
            b[...] = scale * rng.uniform(-bound, bound, size=b.shape)
        self._acts: list[np.ndarray] | None = None

    @staticmethod
    def _total_params(sizes) -> int:
        return sum(i * o + o for i, o in zip(sizes[:-1], sizes[1:]))

    def _build_views(self, flat: np.ndarray) -> None:
        self.flat = flat
        self.weights, self.biases = [], []
        off = 0
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            self.weights.append(flat[off:off + fan_in * fan_out].reshape(fan_in, fan_out))
            off += fan_in * fan_out
            self.biases.append(flat[off:off + fan_out])
            off += fan_out

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Forward pass; caches activations for a subsequent backward call."""
        single = x.ndim == 1
        a = np.atleast_2d(np.asarray(x, dtype=self.dtype))
        if a.shape[1] != self.sizes[0]:
            raise ValueError(f"expected input dim {self.sizes[0]}, got {a.shape[1]}")
        acts = [a]
        for i in range(self.n_layers):
            a = a @ self.weights[i] + self.biases[i]
            if i < self.n_layers - 1:
                a = np.maximum(a, 0.0)
            acts.append(a)
        self._acts = acts
        return acts[-1][0] if single else acts[-1]

    def backward(self, dout: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
        """Backpropagate a loss gradient through the cached forward pass.

        Returns (param_grads, input_grad); param_grads is a one-element list
        holding the flat gradient aligned with params().
        """
        if self._acts is None:
            raise RuntimeError("backward called before forward")
        acts = self._acts
        d = np.atleast_2d(np.asarray(dout, dtype=self.dtype))
        gflat = np.empty_like(self.flat)
        shadow = Mlp.__new__(Mlp)
        shadow.sizes = self.sizes
        shadow._build_views(gflat)
        for i in range(self.n_layers - 1, -1, -1):
            np.matmul(acts[i].T, d, out=shadow.weights[i])
            np.sum(d, axis=0, out=shadow.biases[i])
            d = d @ self.weights[i].T
            if i > 0:
                d *= acts[i] > 0
        return [gflat], d[0] if np.asarray(dout).ndim == 1 else d

    def backward_input(self, dout: np.ndarray) -> np.ndarray:
        """Input gradient only (skips the parameter-gradient matmuls)."""
        if self._acts is None:
            raise RuntimeError("backward called before forward")
        d = np.atleast_2d(np.asarray(dout, dtype=self.dtype))
        for i in range(self.n_layers - 1, -1, -1):
            d = d @ self.weights[i].T
            if i > 0:
                d *= self._acts[i] > 0
        return d[0] if np.asarray(dout).ndim == 1 else d

    def params(self) -> list[np.ndarray]:
        return [self.flat]

    def copy(self) -> "Mlp":
        dup = Mlp.__new__(Mlp)
        dup.sizes = list(self.sizes)
        dup.dtype = self.dtype
        dup._build_views(self.flat.copy())
        dup._acts = None
        return dup

    def astype(self, dtype) -> "Mlp":
        dup = Mlp.__new__(Mlp)
        dup.sizes = list(self.sizes)
        dup.dtype = dtype
        dup._build_views(self.flat.astype(dtype))
        dup._acts = None
        return dup


def polyak_update(target: Mlp, online: Mlp, tau: float) -> None:
    """target <- tau * online + (1 - tau) * target, parameter-wise."""
    for t, p in zip(target.params(), online.params()):
        t[...] = tau * p + (1.0 - tau) * t


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def adam_init(params: list[np.ndarray], lr: float) -> AdamState:
    return AdamState(lr=lr,
                     m=[np.zeros_like(p) for p in params],
                     v=[np.zeros_like(p) for p in params])


def adam_step(state: AdamState, params: list[np.ndarray],
              grads: list[np.ndarray]) -> None:
    """Standard bias-corrected Adam update, in place."""
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(tensors: dict[str, np.ndarray], path) -> None:
    """Write named float32 tensors; round-trips are bit-exact across platforms.

    Layout: magic, version u32, tensor count u32, then per tensor
    name length u32 + UTF-8 name, rank u32, dims u32 each, little-endian
    float32 data in row-major order.
    """
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(tensors)))
        for name, arr in tensors.items():
            data = np.ascontiguousarray(arr, dtype="<f4")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", data.ndim))
            fh.write(struct.pack(f"<{data.ndim}I", *data.shape))
            fh.write(data.tobytes(order="C"))


def load_checkpoint(path) -> dict[str, np.ndarray]:
    """Read a checkpoint written by save_checkpoint.

    Raises CheckpointError on a bad magic, unknown version or truncation.
    """
    with open(path, "rb") as fh:
        blob = fh.read()

    def take(n: int, what: str) -> bytes:
        nonlocal offset
        if offset + n > len(blob):
            raise CheckpointError(f"truncated checkpoint while reading {what}")
        out = blob[offset:offset + n]
        offset += n
        return out

    offset = 0
    if take(len(CHECKPOINT_MAGIC), "magic") != CHECKPOINT_MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    version, count = struct.unpack("<II", take(8, "header"))
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<I", take(4, "name length"))
        try:
            name = take(name_len, "name").decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CheckpointError("corrupt tensor name") from exc
        (rank,) = struct.unpack("<I", take(4, "rank"))
        dims = struct.unpack(f"<{rank}I", take(4 * rank, "dims"))
        n_items = int(np.prod(dims, dtype=np.int64)) if rank else 1
        raw = take(4 * n_items, f"data of {name}")
        tensors[name] = np.frombuffer(raw, dtype="<f4").reshape(dims).copy()
    if offset != len(blob):
        raise CheckpointError("trailing bytes after last tensor")
    return tensors
