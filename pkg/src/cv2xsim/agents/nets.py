"""Small fully-connected networks with hand-rolled backprop, Adam, and Polyak
target blending. Hidden layers are ReLU; the output is linear, or squashed
into a bounded range through a scaled sigmoid when `out_range` is given."""

from __future__ import annotations

import numpy as np


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class Mlp:
    def __init__(self, layer_sizes: list[int], rng: np.random.Generator,
                 out_range: tuple[float, float] | None = None):
        self.layer_sizes = list(layer_sizes)
        self.out_range = out_range
        self.weights = []
        self.biases = []
        for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            bound = 1.0 / np.sqrt(n_in)
            self.weights.append(rng.uniform(-bound, bound, size=(n_in, n_out)))
            self.biases.append(rng.uniform(-bound, bound, size=n_out))

    # ------------------------------------------------------------------ passes
    def forward(self, x: np.ndarray, return_cache: bool = False):
        """x: (batch, n_in) -> (batch, n_out); cache feeds backward()."""
        h = x
        pre = []
        post = [x]
        last = len(self.weights) - 1
        for layer, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            pre.append(z)
            if layer < last:
                h = np.maximum(z, 0.0)
            elif self.out_range is not None:
                lo, hi = self.out_range
                h = lo + (hi - lo) * _sigmoid(z)
            else:
                h = z
            post.append(h)
        if return_cache:
            return h, (pre, post)
        return h

    def backward(self, cache, grad_out: np.ndarray, param_grads: bool = True):
        """Gradients of a scalar loss given dL/d(output).

        Returns (grads, grad_input) with grads ordered like params();
        grads is None when param_grads=False (input gradients only).
        """
        pre, post = cache
        last = len(self.weights) - 1
        if self.out_range is not None:
            lo, hi = self.out_range
            s = (post[-1] - lo) / (hi - lo)
            delta = grad_out * (hi - lo) * s * (1.0 - s)
        else:
            delta = grad_out
        w_grads = [None] * len(self.weights)
        b_grads = [None] * len(self.biases)
        for layer in range(last, -1, -1):
            if param_grads:
                w_grads[layer] = post[layer].T @ delta
                b_grads[layer] = delta.sum(axis=0)
            if layer > 0:
                delta = (delta @ self.weights[layer].T) * (pre[layer - 1] > 0.0)
        grad_input = delta @ self.weights[0].T
        if not param_grads:
            return None, grad_input
        grads = []
        for wg, bg in zip(w_grads, b_grads):
            grads.extend((wg, bg))
        return grads, grad_input

    # ------------------------------------------------------------------ params
    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def clone(self) -> "Mlp":
        twin = Mlp.__new__(Mlp)
        twin.layer_sizes = list(self.layer_sizes)
        twin.out_range = self.out_range
        twin.weights = [w.copy() for w in self.weights]
        twin.biases = [b.copy() for b in self.biases]
        return twin

    def polyak_from(self, online: "Mlp", tau: float) -> None:
        """theta_target <- tau*theta_online + (1-tau)*theta_target."""
        for mine, theirs in zip(self.params(), online.params()):
            mine *= 1.0 - tau
            mine += tau * theirs


class Adam:
    def __init__(self, params: list[np.ndarray], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


def numeric_gradient(f, array: np.ndarray, indices, h: float = 1e-5) -> list[float]:
    """Central differences of scalar f() w.r.t. selected entries of `array`."""
    grads = []
    for idx in indices:
        old = array[idx]
        array[idx] = old + h
        up = f()
        array[idx] = old - h
        down = f()
        array[idx] = old
        grads.append((up - down) / (2.0 * h))
    return grads
