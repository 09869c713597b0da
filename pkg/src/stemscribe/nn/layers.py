"""Layers with explicit forward/backward passes.

Conventions:
  * forward() caches whatever backward() needs; call them in pairs.
  * backward() ACCUMULATES parameter gradients (call zero_grads between
    batches) and returns the gradient w.r.t. the layer input.
  * Sequence layers take (T, features); image layers take (C, H, W).
"""

from __future__ import annotations

import numpy as np


def uniform_init(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    k = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-k, k, size=shape)


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class Layer:
    """Base: parameter-free layers only override forward/backward."""

    def params(self) -> dict[str, np.ndarray]:
        return {}

    def grads(self) -> dict[str, np.ndarray]:
        return {}

    def zero_grads(self) -> None:
        for g in self.grads().values():
            g[...] = 0.0


class Dense(Layer):
    """Affine map on the last axis: (N, in) -> (N, out).

    Applying it to a (T, in) sequence gives the time-distributed form,
    same weights at every step.
    """

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator):
        self.w = uniform_init(rng, (in_features, out_features), in_features)
        self.b = uniform_init(rng, (out_features,), in_features)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self._x = None

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        if x.shape[-1] != self.w.shape[0]:
            raise ValueError(f"expected {self.w.shape[0]} input features, got {x.shape}")
        self._x = x
        return x @ self.w + self.b

    def backward(self, grad: np.ndarray) -> np.ndarray:
        self.dw += self._x.T @ grad
        self.db += grad.sum(axis=0)
        return grad @ self.w.T

    def params(self):
        return {"w": self.w, "b": self.b}

    def grads(self):
        return {"w": self.dw, "b": self.db}


class Sigmoid(Layer):
    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        self._y = sigmoid(x)
        return self._y

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return grad * self._y * (1.0 - self._y)


class BatchNorm(Layer):
    """Per-feature normalization over the leading axis of (N, F) input.

    eps is small enough that normalized batch variance lands within 1e-5
    of unity for any non-degenerate feature column.
    """

    def __init__(self, num_features: int, eps: float = 1e-10, momentum: float = 0.1):
        self.gamma = np.ones(num_features)
        self.beta = np.zeros(num_features)
        self.running_mean = np.zeros(num_features)
        self.running_var = np.ones(num_features)
        self.eps = eps
        self.momentum = momentum
        self.dgamma = np.zeros_like(self.gamma)
        self.dbeta = np.zeros_like(self.beta)
        self._cache = None

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.gamma.size:
            raise ValueError(f"expected (N, {self.gamma.size}) input, got {x.shape}")
        if training:
            mean = x.mean(axis=0)
            var = x.var(axis=0)
            self.running_mean += self.momentum * (mean - self.running_mean)
            self.running_var += self.momentum * (var - self.running_var)
        else:
            mean, var = self.running_mean, self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean) * inv_std
        self._cache = (xhat, inv_std, training)
        return self.gamma * xhat + self.beta

    def backward(self, grad: np.ndarray) -> np.ndarray:
        xhat, inv_std, training = self._cache
        self.dgamma += (grad * xhat).sum(axis=0)
        self.dbeta += grad.sum(axis=0)
        dxhat = grad * self.gamma
        if not training:
            return dxhat * inv_std
        n = xhat.shape[0]
        # Batch statistics depend on every row, hence the mean corrections.
        return (inv_std / n) * (
            n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0)
        )

    def params(self):
        return {"gamma": self.gamma, "beta": self.beta}

    def grads(self):
        return {"gamma": self.dgamma, "beta": self.dbeta}

    def state(self):
        """Parameters plus running statistics, for checkpointing."""
        return {
            "gamma": self.gamma,
            "beta": self.beta,
            "running_mean": self.running_mean,
            "running_var": self.running_var,
        }


class Conv2d(Layer):
    """Same-padded stride-1 correlation: (C_in, H, W) -> (C_out, H, W)."""

    def __init__(self, in_channels: int, out_channels: int, kernel: tuple[int, int],
                 rng: np.random.Generator):
        kh, kw = kernel
        fan_in = in_channels * kh * kw
        self.w = uniform_init(rng, (out_channels, in_channels, kh, kw), fan_in)
        self.b = uniform_init(rng, (out_channels,), fan_in)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self._cache = None

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        c_out, c_in, kh, kw = self.w.shape
        if x.ndim != 3 or x.shape[0] != c_in:
            raise ValueError(f"expected ({c_in}, H, W) input, got {x.shape}")
        _, h, w = x.shape
        ph, pw = kh // 2, kw // 2
        xp = np.pad(x, ((0, 0), (ph, ph), (pw, pw)))
        cols = np.empty((c_in, kh, kw, h, w))
        for i in range(kh):
            for j in range(kw):
                cols[:, i, j] = xp[:, i : i + h, j : j + w]
        flat = cols.reshape(c_in * kh * kw, h * w)
        out = self.w.reshape(c_out, -1) @ flat + self.b[:, None]
        self._cache = (flat, x.shape)
        return out.reshape(c_out, h, w)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        flat, x_shape = self._cache
        c_out, c_in, kh, kw = self.w.shape
        _, h, w = x_shape
        gmat = grad.reshape(c_out, h * w)
        self.dw += (gmat @ flat.T).reshape(self.w.shape)
        self.db += gmat.sum(axis=1)
        dcols = (self.w.reshape(c_out, -1).T @ gmat).reshape(c_in, kh, kw, h, w)
        ph, pw = kh // 2, kw // 2
        dxp = np.zeros((c_in, h + 2 * ph, w + 2 * pw))
        for i in range(kh):
            for j in range(kw):
                dxp[:, i : i + h, j : j + w] += dcols[:, i, j]
        return dxp[:, ph : ph + h, pw : pw + w]

    def params(self):
        return {"w": self.w, "b": self.b}

    def grads(self):
        return {"w": self.dw, "b": self.db}


class MaxPool2d(Layer):
    """Non-overlapping max pooling; pool sizes must divide the input."""

    def __init__(self, pool: tuple[int, int]):
        self.pool = pool

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        ph, pw = self.pool
        c, h, w = x.shape
        if h % ph or w % pw:
            raise ValueError(f"pool {self.pool} does not divide input {x.shape}")
        ho, wo = h // ph, w // pw
        windows = x.reshape(c, ho, ph, wo, pw).transpose(0, 1, 3, 2, 4).reshape(c, ho, wo, ph * pw)
        self._idx = windows.argmax(axis=-1)
        self._in_shape = x.shape
        return np.take_along_axis(windows, self._idx[..., None], axis=-1)[..., 0]

    def backward(self, grad: np.ndarray) -> np.ndarray:
        ph, pw = self.pool
        c, h, w = self._in_shape
        ho, wo = h // ph, w // pw
        scattered = np.zeros((c, ho, wo, ph * pw))
        np.put_along_axis(scattered, self._idx[..., None], grad[..., None], axis=-1)
        return scattered.reshape(c, ho, wo, ph, pw).transpose(0, 1, 3, 2, 4).reshape(c, h, w)


class Lstm(Layer):
    """Single-direction LSTM over a (T, input) sequence, zero initial state.

    Gate layout along the 4H axis is [input, forget, cell, output].
    """

    def __init__(self, input_size: int, hidden_size: int, rng: np.random.Generator):
        h = hidden_size
        self.hidden_size = h
        self.w_x = uniform_init(rng, (input_size, 4 * h), input_size)
        self.w_h = uniform_init(rng, (h, 4 * h), h)
        self.b = uniform_init(rng, (4 * h,), input_size)
        self.dw_x = np.zeros_like(self.w_x)
        self.dw_h = np.zeros_like(self.w_h)
        self.db = np.zeros_like(self.b)
        self._cache = None

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.w_x.shape[0]:
            raise ValueError(f"expected (T, {self.w_x.shape[0]}) input, got {x.shape}")
        t_len, h = x.shape[0], self.hidden_size
        pre = x @ self.w_x + self.b  # recurrent term added per step
        gi = np.empty((t_len, h))
        gf = np.empty((t_len, h))
        gg = np.empty((t_len, h))
        go = np.empty((t_len, h))
        c = np.empty((t_len, h))
        tanh_c = np.empty((t_len, h))
        hs = np.empty((t_len, h))
        h_prev = np.zeros(h)
        c_prev = np.zeros(h)
        for t in range(t_len):
            a = pre[t] + h_prev @ self.w_h
            gi[t] = sigmoid(a[:h])
            gf[t] = sigmoid(a[h : 2 * h])
            gg[t] = np.tanh(a[2 * h : 3 * h])
            go[t] = sigmoid(a[3 * h :])
            c[t] = gf[t] * c_prev + gi[t] * gg[t]
            tanh_c[t] = np.tanh(c[t])
            hs[t] = go[t] * tanh_c[t]
            h_prev, c_prev = hs[t], c[t]
        self._cache = (x, gi, gf, gg, go, c, tanh_c, hs)
        return hs

    def backward(self, grad: np.ndarray) -> np.ndarray:
        x, gi, gf, gg, go, c, tanh_c, hs = self._cache
        t_len, h = x.shape[0], self.hidden_size
        dx = np.empty_like(x)
        dh_next = np.zeros(h)
        dc_next = np.zeros(h)
        for t in range(t_len - 1, -1, -1):
            dh = grad[t] + dh_next
            do = dh * tanh_c[t]
            dc = dh * go[t] * (1.0 - tanh_c[t] ** 2) + dc_next
            c_prev = c[t - 1] if t > 0 else np.zeros(h)
            di, df, dg = dc * gg[t], dc * c_prev, dc * gi[t]
            dc_next = dc * gf[t]
            da = np.concatenate([
                di * gi[t] * (1.0 - gi[t]),
                df * gf[t] * (1.0 - gf[t]),
                dg * (1.0 - gg[t] ** 2),
                do * go[t] * (1.0 - go[t]),
            ])
            h_prev = hs[t - 1] if t > 0 else np.zeros(h)
            self.dw_x += np.outer(x[t], da)
            self.dw_h += np.outer(h_prev, da)
            self.db += da
            dx[t] = da @ self.w_x.T
            dh_next = da @ self.w_h.T
        return dx

    def params(self):
        return {"w_x": self.w_x, "w_h": self.w_h, "b": self.b}

    def grads(self):
        return {"w_x": self.dw_x, "w_h": self.dw_h, "b": self.db}


class BiLstm(Layer):
    """Forward and time-reversed LSTM passes, hidden states concatenated,
    so the output feature size is twice the hidden size."""

    def __init__(self, input_size: int, hidden_size: int, rng: np.random.Generator):
        self.fwd = Lstm(input_size, hidden_size, rng)
        self.bwd = Lstm(input_size, hidden_size, rng)

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        h_f = self.fwd.forward(x, training)
        h_b = self.bwd.forward(x[::-1], training)[::-1]
        return np.concatenate([h_f, h_b], axis=1)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        h = self.fwd.hidden_size
        dx_f = self.fwd.backward(grad[:, :h])
        dx_b = self.bwd.backward(grad[::-1, h:])[::-1]
        return dx_f + dx_b

    def params(self):
        out = {f"fwd.{k}": v for k, v in self.fwd.params().items()}
        out.update({f"bwd.{k}": v for k, v in self.bwd.params().items()})
        return out

    def grads(self):
        out = {f"fwd.{k}": v for k, v in self.fwd.grads().items()}
        out.update({f"bwd.{k}": v for k, v in self.bwd.grads().items()})
        return out
