"""Small dense Q-network on flat parameter vectors, with explicit backprop.

Parameters live in one contiguous float64 vector (weights then bias per
layer, in order), which is what the Reptile and FedAvg arithmetic
averages.  Layers are ReLU except the linear output.  Training is plain
SGD on the squared TD error of the chosen actions; no optimizer state
exists, so parameter vectors can be swapped, averaged and checkpointed
freely.

Checkpoint format (all little-endian)::

    magic    4 bytes  b"RSQ1"
    version  uint32   1
    seed     uint64   seed recorded at save time
    in_dim   uint32
    n_hidden uint32
    hidden   uint32 * n_hidden
    out_dim  uint32
    count    uint64   number of parameters
    params   float32 * count
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

_MAGIC = b"RSQ1"
_VERSION = 1


class TrainingError(RuntimeError):
    """Raised when a gradient step produces a non-finite loss."""


@dataclass(frozen=True)
class NetSpec:
    input_dim: int
    hidden: tuple[int, ...] = (128, 128)
    output_dim: int = 11

    def __post_init__(self):
        dims = (self.input_dim, *self.hidden, self.output_dim)
        if any(d <= 0 for d in dims):
            raise ValueError(f"layer sizes must be positive, got {dims}")

    @property
    def layer_dims(self) -> tuple[tuple[int, int], ...]:
        dims = (self.input_dim, *self.hidden, self.output_dim)
        return tuple(zip(dims[:-1], dims[1:]))

    @property
    def n_params(self) -> int:
        return sum(i * o + o for i, o in self.layer_dims)


def init_params(spec: NetSpec, seed: int) -> np.ndarray:
    """Scaled-uniform init: every entry uniform in +-1/sqrt(fan_in)."""
    rng = np.random.default_rng(seed)
    parts = []
    for fan_in, fan_out in spec.layer_dims:
        bound = 1.0 / np.sqrt(fan_in)
        parts.append(rng.uniform(-bound, bound, fan_in * fan_out))
        parts.append(rng.uniform(-bound, bound, fan_out))
    return np.concatenate(parts)


def unflatten(spec: NetSpec, params: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Views (no copies) of the flat vector as per-layer (W, b) pairs."""
    if params.shape != (spec.n_params,):
        raise ValueError(f"expected {spec.n_params} parameters, got {params.shape}")
    layers = []
    off = 0
    for fan_in, fan_out in spec.layer_dims:
        w = params[off:off + fan_in * fan_out].reshape(fan_in, fan_out)
        off += fan_in * fan_out
        b = params[off:off + fan_out]
        off += fan_out
        layers.append((w, b))
    return layers


def flatten(layers) -> np.ndarray:
    return np.concatenate([a.ravel() for w, b in layers for a in (w, b)])


def forward(spec: NetSpec, params: np.ndarray, x) -> np.ndarray:
    """Q-values for one state (1-D input) or a batch (2-D input)."""
    h = np.asarray(x, dtype=float)
    layers = unflatten(spec, params)
    last = len(layers) - 1
    for k, (w, b) in enumerate(layers):
        h = h @ w + b
        if k < last:
            np.maximum(h, 0.0, out=h)
    return h


def _forward_cached(layers, x):
    acts = [x]          # inputs to each layer
    pre = []            # pre-activations
    h = x
    last = len(layers) - 1
    for k, (w, b) in enumerate(layers):
        z = h @ w + b
        pre.append(z)
        h = np.maximum(z, 0.0) if k < last else z
        if k < last:
            acts.append(h)
    return h, acts, pre


def gradients(spec: NetSpec, params: np.ndarray, states: np.ndarray,
              actions: np.ndarray, targets: np.ndarray) -> tuple[np.ndarray, float]:
    """Gradient of the mean squared TD error over a batch, and the loss.

    Only the output entries of the chosen actions carry error signal.
    """
    layers = unflatten(spec, params)
    states = np.atleast_2d(np.asarray(states, dtype=float))
    batch = states.shape[0]
    q, acts, pre = _forward_cached(layers, states)
    idx = np.arange(batch)
    err = q[idx, actions] - np.asarray(targets, dtype=float)
    loss = float(np.mean(err ** 2))

    delta = np.zeros_like(q)
    delta[idx, actions] = 2.0 * err / batch

    grads: list[tuple[np.ndarray, np.ndarray]] = []
    for k in range(len(layers) - 1, -1, -1):
        w, _ = layers[k]
        gw = acts[k].T @ delta
        gb = delta.sum(axis=0)
        grads.append((gw, gb))
        if k > 0:
            delta = (delta @ w.T) * (pre[k - 1] > 0.0)
    grads.reverse()
    return flatten(grads), loss


class TdKernel:
    """Fused Bellman-target + gradient-step kernel for a fixed batch size.

    Numerically equivalent to ``bellman_targets`` followed by ``td_step``
    (the test suite checks this) but reuses preallocated buffers, which
    matters because one of these runs every simulation step.
    """

    def __init__(self, spec: NetSpec, batch: int):
        self.spec = spec
        self.batch = batch
        dims = (spec.input_dim, *spec.hidden, spec.output_dim)
        self._pre = [np.empty((batch, d)) for d in dims[1:]]
        self._act = [np.empty((batch, d)) for d in dims[1:-1]]
        self._next_q = np.empty((batch, spec.output_dim))
        self._next_h = [np.empty((batch, d)) for d in dims[1:-1]]
        self._delta = [np.empty((batch, d)) for d in dims[1:]]
        self._grad = np.empty(spec.n_params)
        self._idx = np.arange(batch)

    def _forward_eval(self, layers, x, out):
        h = x
        last = len(layers) - 1
        for k, (w, b) in enumerate(layers):
            dst = out if k == last else self._next_h[k]
            np.matmul(h, w, out=dst)
            dst += b
            if k < last:
                np.maximum(dst, 0.0, out=dst)
            h = dst
        return out

    def step(self, params, states, actions, rewards, next_states, next_masks,
             terminals, gamma: float, lr: float,
             grad_clip: float = 0.0) -> tuple[np.ndarray, float]:
        spec = self.spec
        layers = unflatten(spec, params)
        last = len(layers) - 1

        # TD targets from the current network
        qn = self._forward_eval(layers, next_states, self._next_q)
        qn[~next_masks] = -np.inf
        targets = rewards + gamma * qn.max(axis=1) * ~terminals

        # forward with cache
        h = states
        for k, (w, b) in enumerate(layers):
            z = self._pre[k]
            np.matmul(h, w, out=z)
            z += b
            if k < last:
                a = self._act[k]
                np.maximum(z, 0.0, out=a)
                h = a
        q = self._pre[last]

        err = q[self._idx, actions] - targets
        loss = float(np.mean(err ** 2))
        if not np.isfinite(loss):
            raise TrainingError(f"non-finite TD loss {loss}")

        # backward, writing straight into the flat gradient buffer
        gviews = unflatten(spec, self._grad)
        dout = self._delta[last]
        dout[:] = 0.0
        dout[self._idx, actions] = 2.0 * err / self.batch
        delta = dout
        for k in range(last, -1, -1):
            gw, gb = gviews[k]
            prev = states if k == 0 else self._act[k - 1]
            np.matmul(prev.T, delta, out=gw)
            np.sum(delta, axis=0, out=gb)
            if k > 0:
                w, _ = layers[k]
                nxt = self._delta[k - 1]
                np.matmul(delta, w.T, out=nxt)
                nxt *= self._pre[k - 1] > 0.0
                delta = nxt
        return params - lr * clip_gradient(self._grad, grad_clip), loss


def clip_gradient(grad: np.ndarray, max_norm: float) -> np.ndarray:
    """Scale ``grad`` down to ``max_norm`` (no-op when 0 or already small)."""
    if max_norm <= 0.0:
        return grad
    norm = float(np.linalg.norm(grad))
    if norm > max_norm:
        grad = grad * (max_norm / norm)
    return grad


def td_step(spec: NetSpec, params: np.ndarray, states, actions, targets,
            lr: float, grad_clip: float = 0.0) -> tuple[np.ndarray, float]:
    """One SGD step on the batch; returns (updated params, loss)."""
    if not np.all(np.isfinite(targets)):
        raise TrainingError("non-finite TD targets")
    grad, loss = gradients(spec, params, states, np.asarray(actions), targets)
    if not np.isfinite(loss):
        raise TrainingError(f"non-finite TD loss {loss}")
    return params - lr * clip_gradient(grad, grad_clip), loss


# -- checkpoints ---------------------------------------------------------------

def save_checkpoint(path: str | Path, spec: NetSpec, params: np.ndarray,
                    seed: int = 0) -> None:
    if params.shape != (spec.n_params,):
        raise ValueError("parameter vector does not match the network spec")
    header = struct.pack(
        "<4sIQII", _MAGIC, _VERSION, seed, spec.input_dim, len(spec.hidden)
    )
    header += struct.pack(f"<{len(spec.hidden)}I", *spec.hidden)
    header += struct.pack("<IQ", spec.output_dim, spec.n_params)
    Path(path).write_bytes(header + params.astype("<f4").tobytes())


def load_checkpoint(path: str | Path) -> tuple[NetSpec, np.ndarray, int]:
    blob = Path(path).read_bytes()
    magic, version, seed, in_dim, n_hidden = struct.unpack_from("<4sIQII", blob, 0)
    if magic != _MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    off = struct.calcsize("<4sIQII")
    hidden = struct.unpack_from(f"<{n_hidden}I", blob, off)
    off += 4 * n_hidden
    out_dim, count = struct.unpack_from("<IQ", blob, off)
    off += struct.calcsize("<IQ")
    spec = NetSpec(input_dim=in_dim, hidden=tuple(hidden), output_dim=out_dim)
    if count != spec.n_params:
        raise ValueError(f"{path}: parameter count {count} does not match spec")
    params = np.frombuffer(blob, dtype="<f4", count=count, offset=off).astype(float)
    return spec, params, seed
