"""Dense ReLU network (n -> 100 -> 100 -> n+1 by default) with hand-written
backprop and an Adam optimizer, all in numpy."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CHECKPOINT_VERSION = 1


@dataclass
class QNetworkParams:
    weights: list[np.ndarray]   # weights[k] has shape (fan_in, fan_out)
    biases: list[np.ndarray]

    @property
    def sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    def arrays(self) -> list[np.ndarray]:
        return [a for pair in zip(self.weights, self.biases) for a in pair]

    def all_finite(self) -> bool:
        return all(np.isfinite(a).all() for a in self.arrays())


GradientSet = QNetworkParams


def init_params(n_in: int, rng: np.random.Generator, hidden=(100, 100), n_out: int | None = None) -> QNetworkParams:
    """He-normal weights (variance 2 / fan_in), zero biases. ``n_out`` defaults to n_in + 1."""
    if n_in < 1:
        raise ValueError("need at least one input")
    sizes = [n_in, *hidden, n_in + 1 if n_out is None else n_out]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return QNetworkParams(weights, biases)


def forward_cached(p: QNetworkParams, x: np.ndarray):
    """Forward pass keeping the per-layer inputs needed by :func:`backward_cached`."""
    h = np.atleast_2d(np.asarray(x, dtype=float))
    if not np.isfinite(h).all():
        raise ValueError("non-finite network input")
    acts = [h]
    last = len(p.weights) - 1
    for k, (w, b) in enumerate(zip(p.weights, p.biases)):
        h = h @ w + b
        if k < last:
            h = np.maximum(h, 0.0)
        acts.append(h)
    return h, acts


def forward(p: QNetworkParams, x: np.ndarray) -> np.ndarray:
    """Q-values; ``x`` of shape (n,) gives (n_out,), (B, n) gives (B, n_out)."""
    out, _ = forward_cached(p, x)
    return out[0] if np.ndim(x) == 1 else out


def backward_cached(p: QNetworkParams, acts: list[np.ndarray], upstream: np.ndarray) -> GradientSet:
    g = np.atleast_2d(np.asarray(upstream, dtype=float))
    gw = [None] * len(p.weights)
    gb = [None] * len(p.weights)
    for k in range(len(p.weights) - 1, -1, -1):
        a_in = acts[k]
        gw[k] = a_in.T @ g
        gb[k] = g.sum(axis=0)
        if k > 0:
            g = (g @ p.weights[k].T) * (a_in > 0)
    return QNetworkParams(gw, gb)


def backward(p: QNetworkParams, x: np.ndarray, upstream: np.ndarray) -> GradientSet:
    """Gradient of ``sum(upstream * forward(p, x))`` with respect to every parameter."""
    _, acts = forward_cached(p, x)
    return backward_cached(p, acts, upstream)


def copy_params(src: QNetworkParams) -> QNetworkParams:
    return QNetworkParams([w.copy() for w in src.weights], [b.copy() for b in src.biases])


def copy_into(dst: QNetworkParams, src: QNetworkParams) -> None:
    for d, s in zip(dst.arrays(), src.arrays()):
        d[...] = s


class Adam:
    """Bias-corrected Adam; updates parameters in place."""

    def __init__(self, params: QNetworkParams, lr: float = 1e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(a) for a in params.arrays()]
        self.v = [np.zeros_like(a) for a in params.arrays()]
        self.t = 0

    def step(self, params: QNetworkParams, grads: GradientSet, lr: float | None = None) -> QNetworkParams:
        garrs = grads.arrays()
        if not all(np.isfinite(g).all() for g in garrs):
            raise FloatingPointError("non-finite gradient")
        lr = self.lr if lr is None else lr
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for a, g, m, v in zip(params.arrays(), garrs, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            a -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        return params


def save_params(path, p: QNetworkParams) -> None:
    arrays = {f"w{k}": w for k, w in enumerate(p.weights)}
    arrays.update({f"b{k}": b for k, b in enumerate(p.biases)})
    with open(path, "wb") as fh:
        np.savez(fh, version=np.array(CHECKPOINT_VERSION), layers=np.array(len(p.weights)), **arrays)


def load_params(path) -> QNetworkParams:
    with np.load(path) as data:
        version = int(data["version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        k = int(data["layers"])
        return QNetworkParams([data[f"w{i}"].copy() for i in range(k)],
                              [data[f"b{i}"].copy() for i in range(k)])
