"""Small dense-network engine: PReLU layers, masked MSE, RMSprop, binary I/O."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

NET_MAGIC = b"HSAE"
NET_VERSION = 1


@dataclass
class AutoencoderSpec:
    input_width: int
    n_encoder_layers: int = 4
    batch_size: int = 128
    epochs: int = 50
    learning_rate: float = 1e-4
    rmsprop_smoothing: float = 0.99
    rmsprop_eps: float = 1e-8
    max_corruption: float = 0.5
    initial_slope: float = 0.25
    dtype: str = "float32"

    @classmethod
    def for_kpis(cls, l_kpis: int, hours: int = 168, **kwargs) -> "AutoencoderSpec":
        return cls(input_width=hours * l_kpis, **kwargs)

    @property
    def widths(self) -> list[int]:
        enc = [self.input_width]
        for _ in range(self.n_encoder_layers):
            enc.append(enc[-1] // 2)
        if min(enc) < 1:
            raise ValueError(f"layer widths collapse below 1: {enc}")
        return enc + enc[-2::-1]


@dataclass
class DenseNetwork:
    """Stack of dense layers; every layer but the last uses a PReLU with one
    learnable negative slope per layer. The output layer is linear."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    slopes: np.ndarray

    @classmethod
    def initialize(cls, widths, rng: np.random.Generator, initial_slope=0.25, dtype="float64"):
        weights, biases = [], []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            limit = np.sqrt(6.0 / fan_in)
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(dtype))
            biases.append(np.zeros(fan_out, dtype=dtype))
        slopes = np.full(len(weights) - 1, initial_slope, dtype=dtype)
        return cls(weights, biases, slopes)

    @property
    def widths(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def parameters(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases, self.slopes]

    def forward(self, x: np.ndarray, return_cache: bool = False):
        x = np.asarray(x, dtype=self.weights[0].dtype)
        single = x.ndim == 1
        h = x[None, :] if single else x
        cache = {"inputs": [], "pre": []}
        last = self.n_layers - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            cache["inputs"].append(h)
            with np.errstate(invalid="ignore", over="ignore"):
                z = h @ w + b
            if k < last:
                cache["pre"].append(z)
                h = np.where(z > 0, z, self.slopes[k] * z)
            else:
                h = z
        if not np.all(np.isfinite(h)):
            bad = [k for k, z in enumerate(cache["pre"]) if not np.all(np.isfinite(z))]
            raise FloatingPointError(f"non-finite activations (first bad layer: {bad[:1] or [last]})")
        out = h[0] if single else h
        return (out, cache) if return_cache else out

    def backward(self, cache, grad_out: np.ndarray):
        """Gradients of the loss w.r.t. weights, biases and slopes, in
        :meth:`parameters` order."""
        g = np.asarray(grad_out, dtype=self.weights[0].dtype)
        if g.ndim == 1:
            g = g[None, :]
        n = self.n_layers
        gw, gb = [None] * n, [None] * n
        gs = np.zeros_like(self.slopes)
        for k in range(n - 1, -1, -1):
            if k < n - 1:
                z = cache["pre"][k]
                neg = z <= 0
                gs[k] = np.sum(g * z * neg)
                g = np.where(neg, self.slopes[k] * g, g)
            h = cache["inputs"][k]
            gw[k] = h.T @ g
            gb[k] = g.sum(axis=0)
            if k > 0:
                g = g @ self.weights[k].T
        return [*gw, *gb, gs]

    def copy(self) -> "DenseNetwork":
        return DenseNetwork(
            [w.copy() for w in self.weights], [b.copy() for b in self.biases], self.slopes.copy()
        )


def masked_mse(output: np.ndarray, target: np.ndarray, mask: np.ndarray):
    """Mean squared error over entries where ``mask`` is true, and its gradient."""
    mask = np.asarray(mask, dtype=output.dtype)
    count = mask.sum()
    if count == 0:
        return 0.0, np.zeros_like(output)
    diff = (output - target) * mask
    loss = float(np.sum(diff * diff) / count)
    return loss, (2.0 / count) * diff


@dataclass
class RMSprop:
    learning_rate: float = 1e-4
    rho: float = 0.99
    eps: float = 1e-8
    state: list = field(default_factory=list)

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]):
        if not self.state:
            self.state = [np.zeros_like(p) for p in params]
        for p, g, s in zip(params, grads, self.state):
            s *= self.rho
            s += (1.0 - self.rho) * g * g
            p -= self.learning_rate * g / (np.sqrt(s) + self.eps)


def save_network(net: DenseNetwork, path, extra: dict[str, np.ndarray] | None = None):
    """Write a network as little-endian binary.

    Layout: magic ``HSAE``, uint16 version, uint16 layer count L, L+1 uint32
    widths, then per layer the float64 weight matrix (row-major, in x out) and
    bias, then L-1 float64 PReLU slopes, then uint16 count of named extra
    float64 arrays, each as uint16 name length, UTF-8 name, uint32 size, data.
    """
    extra = extra or {}
    widths = net.widths
    with open(Path(path), "wb") as f:
        f.write(NET_MAGIC)
        f.write(struct.pack("<HH", NET_VERSION, net.n_layers))
        f.write(struct.pack(f"<{len(widths)}I", *widths))
        for w, b in zip(net.weights, net.biases):
            f.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            f.write(np.ascontiguousarray(b, dtype="<f8").tobytes())
        f.write(np.ascontiguousarray(net.slopes, dtype="<f8").tobytes())
        f.write(struct.pack("<H", len(extra)))
        for name in sorted(extra):
            arr = np.ascontiguousarray(np.ravel(extra[name]), dtype="<f8")
            raw = name.encode()
            f.write(struct.pack("<H", len(raw)) + raw + struct.pack("<I", arr.size))
            f.write(arr.tobytes())


def load_network(path, dtype="float64") -> tuple[DenseNetwork, dict[str, np.ndarray]]:
    buf = Path(path).read_bytes()
    if buf[:4] != NET_MAGIC:
        raise ValueError(f"{path}: not a network file")
    version, n_layers = struct.unpack_from("<HH", buf, 4)
    if version != NET_VERSION:
        raise ValueError(f"{path}: unsupported network file version {version}")
    off = 8
    widths = struct.unpack_from(f"<{n_layers + 1}I", buf, off)
    off += 4 * (n_layers + 1)

    def take(count):
        nonlocal off
        arr = np.frombuffer(buf, dtype="<f8", count=count, offset=off)
        off += 8 * count
        return arr.astype(dtype)

    weights, biases = [], []
    for a, b in zip(widths[:-1], widths[1:]):
        weights.append(take(a * b).reshape(a, b))
        biases.append(take(b))
    slopes = take(n_layers - 1)
    (n_extra,) = struct.unpack_from("<H", buf, off)
    off += 2
    extra = {}
    for _ in range(n_extra):
        (name_len,) = struct.unpack_from("<H", buf, off)
        off += 2
        name = buf[off : off + name_len].decode()
        off += name_len
        (size,) = struct.unpack_from("<I", buf, off)
        off += 4
        extra[name] = take(size).astype(np.float64)
    return DenseNetwork(weights, biases, slopes), extra
