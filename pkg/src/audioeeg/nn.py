"""Minimal deterministic neural-network engine.

Just enough to express the two sample-level convolutional branches and the
dense retrieval branches: 1-D convolution, max-pooling, batch normalization,
ReLU and fully-connected layers, each with exact reverse-mode gradients.
Sequence data flows as (batch, length, channels) float arrays; dense layers
take (batch, features).

Convolutions are computed as one GEMM per kernel offset, which keeps memory
near the activation size and leaves the heavy lifting to BLAS.  All
randomness comes from a seeded generator, so identical seed + data give
bit-identical parameters after any number of steps.
"""

import json

import numpy as np

from .validation import ValidationError, require

LAYER_KINDS = ("conv1d", "maxpool1d", "batchnorm", "relu", "dense")


def parse_layer_token(token):
    """Parse 'conv-x-y-z' / 'mp-x' shorthand into a spec dict.

    conv-x-y-z is a convolution with filter width x, stride y and z output
    channels; mp-x is a maxpool with window and stride x.
    """
    parts = token.strip().split("-")
    if parts[0] == "conv" and len(parts) == 4:
        width, stride, out_channels = (int(p) for p in parts[1:])
        return {"kind": "conv1d", "width": width, "stride": stride,
                "out_channels": out_channels}
    if parts[0] == "mp" and len(parts) == 2:
        return {"kind": "maxpool1d", "width": int(parts[1])}
    raise ValidationError(f"unrecognized layer token {token!r}")


def he_uniform(rng, shape, fan_in, dtype):
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Layer:
    """Common minimal interface; layers cache what backward needs."""

    def params(self):
        return []

    def grads(self):
        return []

    def state_arrays(self):
        """Everything that must persist: params plus running statistics."""
        return self.params()

    def forward(self, x, train):
        raise NotImplementedError

    def backward(self, grad_out):
        raise NotImplementedError

    def manifest(self):
        raise NotImplementedError


class Conv1d(Layer):
    def __init__(self, width, in_channels, out_channels, stride=1,
                 padding="same", rng=None, dtype=np.float64):
        require(width >= 1 and stride >= 1, "conv width and stride must be >= 1")
        require(padding in ("same", "valid"), f"bad padding {padding!r}")
        self.width = width
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.stride = stride
        self.padding = padding
        rng = rng or np.random.default_rng(0)
        self.w = he_uniform(rng, (width, in_channels, out_channels),
                            fan_in=width * in_channels, dtype=dtype)
        self.b = np.zeros(out_channels, dtype=dtype)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self._x = None

    def params(self):
        return [self.w, self.b]

    def grads(self):
        return [self.dw, self.db]

    def _pad_amounts(self, length):
        if self.padding == "valid":
            require(length >= self.width,
                    f"input length {length} shorter than filter width {self.width}")
            return 0, 0, (length - self.width) // self.stride + 1
        out_len = -(-length // self.stride)  # ceil
        total = max((out_len - 1) * self.stride + self.width - length, 0)
        return total // 2, total - total // 2, out_len

    def _padded(self, x):
        left, right, _ = self._pad_amounts(x.shape[1])
        if left == 0 and right == 0:
            return x
        return np.pad(x, ((0, 0), (left, right), (0, 0)))

    def forward(self, x, train):
        require(x.ndim == 3 and x.shape[2] == self.in_channels,
                f"conv1d expects (batch, length, {self.in_channels}), got {x.shape}")
        self._x = x
        _, _, out_len = self._pad_amounts(x.shape[1])
        xp = self._padded(x)
        out = np.empty((x.shape[0], out_len, self.out_channels), dtype=x.dtype)
        out[:] = self.b
        # One GEMM per kernel offset; reuse a single temporary so the big
        # activations are not reallocated width times.
        tmp = np.empty_like(out)
        stop = self.stride * (out_len - 1) + 1
        for k in range(self.width):
            np.matmul(xp[:, k:k + stop:self.stride, :], self.w[k], out=tmp)
            out += tmp
        return out

    def backward(self, grad_out):
        x = self._x
        require(x is not None, "backward called before forward", exc=RuntimeError)
        batch, out_len = grad_out.shape[0], grad_out.shape[1]
        xp = self._padded(x)
        gxp = np.zeros_like(xp)
        stop = self.stride * (out_len - 1) + 1
        self.db[:] = grad_out.sum(axis=(0, 1))
        gtmp = np.empty((batch, out_len, self.in_channels), dtype=grad_out.dtype)
        wtmp = np.empty((self.in_channels, self.out_channels), dtype=grad_out.dtype)
        for k in range(self.width):
            seg = xp[:, k:k + stop:self.stride, :]
            # Weight gradient accumulated per batch item: GEMMs on views
            # instead of one reshape copy of the whole activation.
            self.dw[k] = 0.0
            for b in range(batch):
                np.matmul(seg[b].T, grad_out[b], out=wtmp)
                self.dw[k] += wtmp
            np.matmul(grad_out, self.w[k].T, out=gtmp)
            gxp[:, k:k + stop:self.stride, :] += gtmp
        left, _, _ = self._pad_amounts(x.shape[1])
        return gxp[:, left:left + x.shape[1], :]

    def manifest(self):
        return {"kind": "conv1d", "width": self.width,
                "in_channels": self.in_channels, "out_channels": self.out_channels,
                "stride": self.stride, "padding": self.padding}


class MaxPool1d(Layer):
    def __init__(self, width):
        require(width >= 1, "pool width must be >= 1")
        self.width = width
        self._x = None
        self._out = None

    def forward(self, x, train):
        batch, length, channels = x.shape
        require(length % self.width == 0,
                f"length {length} not divisible by pool width {self.width}")
        self._x = x
        windows = x.reshape(batch, length // self.width, self.width, channels)
        self._out = windows.max(axis=2)
        return self._out

    def backward(self, grad_out):
        require(self._out is not None, "backward called before forward",
                exc=RuntimeError)
        shape = self._x.shape
        windows = self._x.reshape(shape[0], shape[1] // self.width, self.width,
                                  shape[2])
        # Route gradient to the first maximum of each window only; argmax is
        # deferred to backward so inference forwards stay cheap.
        idx = windows.argmax(axis=2)
        gw = np.zeros(windows.shape, dtype=grad_out.dtype)
        np.put_along_axis(gw, idx[:, :, None, :], grad_out[:, :, None, :], axis=2)
        return gw.reshape(shape)

    def manifest(self):
        return {"kind": "maxpool1d", "width": self.width}


class BatchNorm(Layer):
    """Per-channel normalization over batch and length."""

    def __init__(self, channels, momentum=0.9, epsilon=1e-5, dtype=np.float64):
        self.channels = channels
        self.momentum = momentum
        self.epsilon = epsilon
        self.gain = np.ones(channels, dtype=dtype)
        self.shift = np.zeros(channels, dtype=dtype)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self.updates = 0
        self.dgain = np.zeros_like(self.gain)
        self.dshift = np.zeros_like(self.shift)
        self._x = None
        self._mean = None
        self._inv_std = None

    def params(self):
        return [self.gain, self.shift]

    def grads(self):
        return [self.dgain, self.dshift]

    def state_arrays(self):
        return [self.gain, self.shift, self.running_mean, self.running_var]

    def forward(self, x, train):
        require(x.ndim == 3 and x.shape[2] == self.channels,
                f"batchnorm expects (batch, length, {self.channels}), got {x.shape}")
        if train:
            m = x.shape[0] * x.shape[1]
            require(m >= 2, "batchnorm training needs batch*length >= 2")
            flat = x.reshape(-1, self.channels)
            mean = flat.mean(axis=0)
            # One-pass variance; activations are near zero mean so the
            # cancellation risk of the shortcut formula is immaterial here.
            var = np.einsum("mc,mc->c", flat, flat) / m - mean * mean
            np.maximum(var, 0.0, out=var)
            self.running_mean[:] = (self.momentum * self.running_mean
                                    + (1 - self.momentum) * mean)
            self.running_var[:] = (self.momentum * self.running_var
                                   + (1 - self.momentum) * var)
            self.updates += 1
            self._x = x
            self._mean = mean
            self._inv_std = 1.0 / np.sqrt(var + self.epsilon)
            out = x - mean
            out *= self._inv_std * self.gain
            out += self.shift
            return out
        require(self.updates > 0,
                "batchnorm inference requested before any training update")
        inv = 1.0 / np.sqrt(self.running_var + self.epsilon)
        out = x - self.running_mean
        out *= inv * self.gain
        out += self.shift
        return out

    def backward(self, grad_out):
        require(self._x is not None, "backward called before forward",
                exc=RuntimeError)
        x, mean, inv_std = self._x, self._mean, self._inv_std
        m = x.shape[0] * x.shape[1]
        xhat = x - mean
        xhat *= inv_std
        self.dgain[:] = np.einsum("blc,blc->c", grad_out, xhat)
        self.dshift[:] = grad_out.sum(axis=(0, 1))
        # dL/dx for train-mode statistics, built in place on the xhat buffer.
        gx = xhat
        gx *= -self.dgain / m
        gx += grad_out
        gx -= self.dshift / m
        gx *= self.gain * inv_std
        return gx

    def manifest(self):
        return {"kind": "batchnorm", "channels": self.channels,
                "momentum": self.momentum, "epsilon": self.epsilon,
                "updates": self.updates}


class ReLU(Layer):
    def __init__(self):
        self._out = None

    def forward(self, x, train):
        self._out = np.maximum(x, 0)
        return self._out

    def backward(self, grad_out):
        require(self._out is not None, "backward called before forward",
                exc=RuntimeError)
        return grad_out * (self._out > 0)

    def manifest(self):
        return {"kind": "relu"}


class Dense(Layer):
    def __init__(self, in_features, out_features, rng=None, dtype=np.float64):
        self.in_features = in_features
        self.out_features = out_features
        rng = rng or np.random.default_rng(0)
        self.w = he_uniform(rng, (in_features, out_features), fan_in=in_features,
                            dtype=dtype)
        self.b = np.zeros(out_features, dtype=dtype)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self._x = None

    def params(self):
        return [self.w, self.b]

    def grads(self):
        return [self.dw, self.db]

    def forward(self, x, train):
        require(x.ndim == 2 and x.shape[1] == self.in_features,
                f"dense expects (batch, {self.in_features}), got {x.shape}")
        self._x = x
        return x @ self.w + self.b

    def backward(self, grad_out):
        require(self._x is not None, "backward called before forward",
                exc=RuntimeError)
        self.dw[:] = self._x.T @ grad_out
        self.db[:] = grad_out.sum(axis=0)
        return grad_out @ self.w.T

    def manifest(self):
        return {"kind": "dense", "in_features": self.in_features,
                "out_features": self.out_features}


class Network:
    """A plain layer sequence with reverse-mode backward.

    ``seed`` is the initialization seed recorded for reproducibility; the
    constructor does not draw from it directly (layer builders do).
    """

    def __init__(self, layers, seed=0, dtype=np.float64):
        self.layers = list(layers)
        self.seed = seed
        self.dtype = np.dtype(dtype)

    def forward(self, x, train=True):
        out = np.asarray(x, dtype=self.dtype)
        for layer in self.layers:
            out = layer.forward(out, train)
        return out

    def backward(self, grad_out):
        grad = np.asarray(grad_out, dtype=self.dtype)
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def params(self):
        return [p for layer in self.layers for p in layer.params()]

    def grads(self):
        return [g for layer in self.layers for g in layer.grads()]

    def state_arrays(self):
        return [a for layer in self.layers for a in layer.state_arrays()]

    def manifest(self):
        return {"seed": self.seed,
                "layers": [layer.manifest() for layer in self.layers],
                "shapes": [list(a.shape) for a in self.state_arrays()]}

    def save_params(self, bin_path, manifest_path):
        """Little-endian float32 blob plus a JSON manifest of the layout."""
        blob = b"".join(a.astype("<f4").tobytes() for a in self.state_arrays())
        with open(bin_path, "wb") as fh:
            fh.write(blob)
        with open(manifest_path, "w", encoding="utf-8") as fh:
            json.dump(self.manifest(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def load_params(self, bin_path, manifest_path):
        with open(manifest_path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
        arrays = self.state_arrays()
        shapes = [list(a.shape) for a in arrays]
        require(manifest["shapes"] == shapes,
                "parameter file does not match this network's layout")
        raw = np.fromfile(bin_path, dtype="<f4")
        total = sum(int(np.prod(s)) for s in shapes)
        require(raw.size == total,
                f"parameter blob has {raw.size} floats, expected {total}")
        offset = 0
        for arr in arrays:
            size = arr.size
            arr[:] = raw[offset:offset + size].reshape(arr.shape).astype(arr.dtype)
            offset += size
        self.seed = manifest.get("seed", self.seed)
        for layer, spec in zip(self.layers, manifest["layers"]):
            if isinstance(layer, BatchNorm):
                layer.updates = spec.get("updates", layer.updates)
        return self


def build_branch(tokens, in_channels, seed=0, dtype=np.float64,
                 batchnorm_first=True):
    """Assemble a convolutional branch from conv-x-y-z / mp-x tokens.

    A batchnorm precedes every convolution and a ReLU follows every
    convolution except the last, which produces the embedding and stays
    linear.  Strided convolutions use valid padding, stride-1 convolutions
    same padding, so lengths divide exactly through the pool chain.
    """
    if isinstance(tokens, str):
        tokens = tokens.split()
    specs = [parse_layer_token(t) for t in tokens]
    conv_indices = [i for i, s in enumerate(specs) if s["kind"] == "conv1d"]
    require(conv_indices, "a branch needs at least one convolution")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    layers = []
    channels = in_channels
    for i, spec in enumerate(specs):
        if spec["kind"] == "conv1d":
            if batchnorm_first:
                layers.append(BatchNorm(channels, dtype=dtype))
            padding = "valid" if spec["stride"] > 1 else "same"
            layers.append(Conv1d(spec["width"], channels, spec["out_channels"],
                                 stride=spec["stride"], padding=padding,
                                 rng=rng, dtype=dtype))
            channels = spec["out_channels"]
            if i != conv_indices[-1]:
                layers.append(ReLU())
        else:
            layers.append(MaxPool1d(spec["width"]))
    return Network(layers, seed=seed, dtype=dtype)


def build_dense_stack(in_features, layer_dims, seed=0, dtype=np.float64):
    """Fully-connected branch: ReLU between layers, linear output."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    layers = []
    prev = in_features
    for i, dim in enumerate(layer_dims):
        layers.append(Dense(prev, dim, rng=rng, dtype=dtype))
        if i != len(layer_dims) - 1:
            layers.append(ReLU())
        prev = dim
    return Network(layers, seed=seed, dtype=dtype)
