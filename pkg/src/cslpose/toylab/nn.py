"""Minimal numpy neural network layers with manual backpropagation.

All layers work on 1-D feature maps shaped (batch, width, channels); forward
passes cache what the matching backward pass needs.  Convolutions are computed
as a sum of shifted matmuls, which keeps the tiny arrays of this study free of
im2col copies.  Weights initialize from a scaled-uniform fan-in distribution;
float64 everywhere so gradient checks against central finite differences are
sharp.
"""

from __future__ import annotations

import numpy as np


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int):
        super().__init__(f"loss became non-finite at epoch {epoch}")
        self.epoch = epoch


class Param:
    def __init__(self, value: np.ndarray):
        self.value = value
        self.grad = np.zeros_like(value)


def _uniform_init(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    s = np.sqrt(1.0 / fan_in)
    return rng.uniform(-s, s, size=shape)


class Conv1d:
    """Same-padded 1-D convolution (kernel 5): out[w] = sum_t x[w+t-p] @ W[t]."""

    def __init__(self, cin: int, cout: int, rng: np.random.Generator, k: int = 5):
        self.k = k
        self.pad = k // 2
        self.cin, self.cout = cin, cout
        # weight[t] maps input channels to output channels for kernel tap t
        self.weight = Param(_uniform_init(rng, (k, cin, cout), cin * k))
        self.bias = Param(np.zeros(cout))
        self._xp = None

    def params(self):
        return [self.weight, self.bias]

    def forward(self, x: np.ndarray, train: bool = True) -> np.ndarray:
        B, W, C = x.shape
        xp = np.zeros((B, W + 2 * self.pad, C))
        xp[:, self.pad:self.pad + W] = x
        out = np.empty((B, W, self.cout))
        out[:] = self.bias.value
        wv = self.weight.value
        for t in range(self.k):
            out += xp[:, t:t + W] @ wv[t]
        self._xp = xp
        return out

    def backward(self, grad: np.ndarray) -> np.ndarray:
        xp = self._xp
        B, W, _ = grad.shape
        g2 = grad.reshape(B * W, self.cout)
        wv = self.weight.value
        dxp = np.zeros_like(xp)
        dw = self.weight.grad
        for t in range(self.k):
            dw[t] = xp[:, t:t + W].reshape(B * W, self.cin).T @ g2
            dxp[:, t:t + W] += grad @ wv[t].T
        self.bias.grad[...] = g2.sum(axis=0)
        return dxp[:, self.pad:self.pad + W]


class BatchNorm1d:
    """Per-channel normalization over (batch, width); running stats for eval."""

    def __init__(self, channels: int, momentum: float = 0.1, eps: float = 1e-5):
        self.gamma = Param(np.ones(channels))
        self.beta = Param(np.zeros(channels))
        self.eps = eps
        self.momentum = momentum
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)
        self._cache = None

    def params(self):
        return [self.gamma, self.beta]

    def forward(self, x: np.ndarray, train: bool = True) -> np.ndarray:
        if train:
            mu = x.mean(axis=(0, 1))
            xc = x - mu
            var = np.mean(xc * xc, axis=(0, 1))
            self.running_mean = (1 - self.momentum) * self.running_mean + self.momentum * mu
            self.running_var = (1 - self.momentum) * self.running_var + self.momentum * var
        else:
            mu, var = self.running_mean, self.running_var
            xc = x - mu
        std = np.sqrt(var + self.eps)
        xhat = xc / std
        self._cache = (xhat, std, train)
        return self.gamma.value * xhat + self.beta.value

    def backward(self, grad: np.ndarray) -> np.ndarray:
        xhat, std, train = self._cache
        self.gamma.grad[...] = (grad * xhat).sum(axis=(0, 1))
        self.beta.grad[...] = grad.sum(axis=(0, 1))
        dxhat = grad * self.gamma.value
        if not train:
            return dxhat / std
        m1 = dxhat.mean(axis=(0, 1))
        m2 = (dxhat * xhat).mean(axis=(0, 1))
        return (dxhat - m1 - xhat * m2) / std


class ReLU:
    def __init__(self):
        self._mask = None

    def params(self):
        return []

    def forward(self, x: np.ndarray, train: bool = True) -> np.ndarray:
        self._mask = x > 0
        return x * self._mask

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return grad * self._mask


class MaxPool1d:
    """Non-overlapping width-2 max pooling."""

    def __init__(self):
        self._cache = None

    def params(self):
        return []

    def forward(self, x: np.ndarray, train: bool = True) -> np.ndarray:
        B, W, C = x.shape
        xr = x.reshape(B, W // 2, 2, C)
        first = xr[:, :, 0] >= xr[:, :, 1]
        self._cache = (first, x.shape)
        return np.where(first, xr[:, :, 0], xr[:, :, 1])

    def backward(self, grad: np.ndarray) -> np.ndarray:
        first, shape = self._cache
        B, W, C = shape
        dxr = np.zeros((B, W // 2, 2, C))
        dxr[:, :, 0] = np.where(first, grad, 0.0)
        dxr[:, :, 1] = np.where(first, 0.0, grad)
        return dxr.reshape(B, W, C)


class Upsample:
    """Nearest-neighbor x2 upsampling."""

    def params(self):
        return []

    def forward(self, x: np.ndarray, train: bool = True) -> np.ndarray:
        return np.repeat(x, 2, axis=1)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        B, W2, C = grad.shape
        return grad.reshape(B, W2 // 2, 2, C).sum(axis=2)


class Flatten:
    def __init__(self):
        self._shape = None

    def params(self):
        return []

    def forward(self, x: np.ndarray, train: bool = True) -> np.ndarray:
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return grad.reshape(self._shape)


class Linear:
    def __init__(self, nin: int, nout: int, rng: np.random.Generator):
        self.weight = Param(_uniform_init(rng, (nin, nout), nin))
        self.bias = Param(np.zeros(nout))
        self._x = None

    def params(self):
        return [self.weight, self.bias]

    def forward(self, x: np.ndarray, train: bool = True) -> np.ndarray:
        self._x = x
        return x @ self.weight.value + self.bias.value

    def backward(self, grad: np.ndarray) -> np.ndarray:
        self.weight.grad[...] = self._x.T @ grad
        self.bias.grad[...] = grad.sum(axis=0)
        return grad @ self.weight.value.T


class Sequential:
    def __init__(self, layers):
        self.layers = list(layers)

    def params(self):
        return [p for layer in self.layers for p in layer.params()]

    def forward(self, x: np.ndarray, train: bool = True) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x, train)
        return x

    def backward(self, grad: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad


ENCODER_CHANNELS = (4, 6, 8, 8)
DECODER_CHANNELS = (8, 8, 8, 6, 4)
HEAD_HIDDEN = 4


def _encoder(rng: np.random.Generator, cin: int = 1):
    blocks, pools = [], []
    c = cin
    for cout in ENCODER_CHANNELS:
        blocks.append(Sequential([Conv1d(c, cout, rng), BatchNorm1d(cout), ReLU()]))
        pools.append(MaxPool1d())
        c = cout
    return blocks, pools


class EncoderHeadNet:
    """Four conv/bn/relu/pool blocks followed by a small fully connected head."""

    def __init__(self, out_dim: int, width: int, rng: np.random.Generator):
        self.blocks, self.pools = _encoder(rng)
        feat = ENCODER_CHANNELS[-1] * (width // 2 ** len(ENCODER_CHANNELS))
        self.head = Sequential([Flatten(), Linear(feat, HEAD_HIDDEN, rng), ReLU(),
                                Linear(HEAD_HIDDEN, out_dim, rng)])

    def params(self):
        ps = [p for b in self.blocks for p in b.params()]
        return ps + self.head.params()

    def forward(self, x: np.ndarray, train: bool = True) -> np.ndarray:
        for blk, pool in zip(self.blocks, self.pools):
            x = pool.forward(blk.forward(x, train), train)
        return self.head.forward(x, train)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        grad = self.head.backward(grad)
        for blk, pool in zip(reversed(self.blocks), reversed(self.pools)):
            grad = blk.backward(pool.backward(grad))
        return grad


class EncoderDecoderNet:
    """U-style net: encoder skips concatenate into the decoder at equal widths."""

    def __init__(self, out_channels: int, width: int, rng: np.random.Generator):
        self.blocks, self.pools = _encoder(rng)
        n_enc = len(ENCODER_CHANNELS)
        dec_in = []
        c = ENCODER_CHANNELS[-1]
        for i, cout in enumerate(DECODER_CHANNELS):
            # decoder block i >= 1 concatenates the encoder activation of equal width
            cin = c if i == 0 else c + ENCODER_CHANNELS[n_enc - i]
            dec_in.append(cin)
            c = cout
        self.dec_blocks = [Sequential([Conv1d(cin, cout, rng), BatchNorm1d(cout), ReLU()])
                           for cin, cout in zip(dec_in, DECODER_CHANNELS)]
        self.ups = [Upsample() for _ in DECODER_CHANNELS[:-1]]
        self.final = Conv1d(DECODER_CHANNELS[-1], out_channels, rng)
        self._skip_channels = None

    def params(self):
        ps = [p for b in self.blocks for p in b.params()]
        ps += [p for b in self.dec_blocks for p in b.params()]
        return ps + self.final.params()

    def forward(self, x: np.ndarray, train: bool = True) -> np.ndarray:
        skips = []
        for blk, pool in zip(self.blocks, self.pools):
            x = blk.forward(x, train)
            skips.append(x)
            x = pool.forward(x, train)
        self._skip_channels = [s.shape[-1] for s in skips]
        for i, blk in enumerate(self.dec_blocks):
            if i > 0:
                x = np.concatenate([skips[len(skips) - i], x], axis=-1)
            x = blk.forward(x, train)
            if i < len(self.ups):
                x = self.ups[i].forward(x, train)
        return self.final.forward(x, train)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        grad = self.final.backward(grad)
        skip_grads = [None] * len(self.blocks)
        for i in reversed(range(len(self.dec_blocks))):
            if i < len(self.ups):
                grad = self.ups[i].backward(grad)
            grad = self.dec_blocks[i].backward(grad)
            if i > 0:
                skip_idx = len(self.blocks) - i
                nskip = self._skip_channels[skip_idx]
                skip_grads[skip_idx] = grad[..., :nskip]
                grad = grad[..., nskip:]
        for i in reversed(range(len(self.blocks))):
            grad = self.pools[i].backward(grad)
            if skip_grads[i] is not None:
                grad = grad + skip_grads[i]
            grad = self.blocks[i].backward(grad)
        return grad


class Adam:
    """Adam over a flattened parameter vector.

    Parameter values and gradients are re-bound as views into two contiguous
    buffers, so one step is a handful of whole-vector operations.  Layer
    backward passes write gradients in place, which keeps the views intact.
    """

    def __init__(self, params, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        total = sum(p.value.size for p in self.params)
        self.flat_value = np.empty(total)
        self.flat_grad = np.zeros(total)
        offset = 0
        for p in self.params:
            n = p.value.size
            shape = p.value.shape
            self.flat_value[offset:offset + n] = p.value.reshape(-1)
            p.value = self.flat_value[offset:offset + n].reshape(shape)
            p.grad = self.flat_grad[offset:offset + n].reshape(shape)
            offset += n
        self.m = np.zeros(total)
        self.v = np.zeros(total)

    def step(self):
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        g = self.flat_grad
        self.m *= self.beta1
        self.m += (1 - self.beta1) * g
        self.v *= self.beta2
        self.v += (1 - self.beta2) * g * g
        self.flat_value -= self.lr * (self.m / b1c) / (np.sqrt(self.v / b2c) + self.eps)
