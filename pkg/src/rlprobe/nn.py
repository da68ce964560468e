"""Minimal neural-network core on numpy arrays.

Dense and valid-convolution layers with ReLU tags, exact reverse-mode
gradients, Adam, and the loss functions the agents need.  Training runs in
float32; every differentiable piece can be instantiated in float64 so finite
differences verify the backward pass to tight tolerances.
"""

from __future__ import annotations

import json
import math
import struct
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .rng import RandomStream


class NonFiniteGradientError(RuntimeError):
    """Raised when an optimizer step receives NaN or infinite gradients."""


# ---------------------------------------------------------------------------
# layers


class Dense:
    def __init__(self, w: np.ndarray, b: np.ndarray, activation: str = "linear"):
        if activation not in ("linear", "relu"):
            raise ValueError(f"unknown activation {activation!r}")
        self.w = w
        self.b = b
        self.activation = activation

    def forward(self, x):
        pre = x @ self.w + self.b
        out = np.maximum(pre, 0.0) if self.activation == "relu" else pre
        return out, (x, pre)

    def backward(self, cache, gout):
        x, pre = cache
        gpre = gout * (pre > 0) if self.activation == "relu" else gout
        gw = x.T @ gpre
        gb = gpre.sum(axis=0)
        gx = gpre @ self.w.T
        return gx, [gw, gb]

    def params(self):
        return [self.w, self.b]

    def describe(self):
        return {
            "kind": "dense",
            "in": int(self.w.shape[0]),
            "out": int(self.w.shape[1]),
            "activation": self.activation,
        }


class Conv2d:
    """Valid (no padding) strided convolution over (B, C, H, W) inputs."""

    def __init__(self, k: np.ndarray, b: np.ndarray, stride: int, activation: str = "relu"):
        if activation not in ("linear", "relu"):
            raise ValueError(f"unknown activation {activation!r}")
        self.k = k  # (out_c, in_c, kh, kw)
        self.b = b
        self.stride = int(stride)
        self.activation = activation
        self._geom = {}

    def _geometry(self, h: int, w: int):
        key = (h, w)
        geom = self._geom.get(key)
        if geom is None:
            _, in_c, kh, kw = self.k.shape
            oh = (h - kh) // self.stride + 1
            ow = (w - kw) // self.stride + 1
            if oh <= 0 or ow <= 0:
                raise ValueError(f"kernel {kh}x{kw} does not fit input {h}x{w}")
            # flat gather indices into (C*H*W) for each output position patch
            rows = (np.arange(oh) * self.stride)[:, None] + np.arange(kh)[None, :]
            cols = (np.arange(ow) * self.stride)[:, None] + np.arange(kw)[None, :]
            c_idx = np.repeat(np.arange(in_c), kh * kw)
            patch = (
                rows[:, None, :, None] * w + cols[None, :, None, :]
            ).reshape(oh * ow, kh * kw)
            flat = (c_idx[None, :] * (h * w)) + np.tile(patch, (1, in_c))
            geom = (oh, ow, flat)
            self._geom[key] = geom
        return geom

    def forward(self, x):
        bsz, in_c, h, w = x.shape
        out_c = self.k.shape[0]
        oh, ow, flat = self._geometry(h, w)
        cols = x.reshape(bsz, -1)[:, flat]  # (B, OH*OW, C*KH*KW)
        kmat = self.k.reshape(out_c, -1)
        pre = cols @ kmat.T + self.b
        pre = pre.transpose(0, 2, 1).reshape(bsz, out_c, oh, ow)
        out = np.maximum(pre, 0.0) if self.activation == "relu" else pre
        return out, (x.shape, cols, pre)

    def backward(self, cache, gout):
        x_shape, cols, pre = cache
        bsz, in_c, h, w = x_shape
        out_c = self.k.shape[0]
        oh, ow, flat = self._geometry(h, w)
        gpre = gout * (pre > 0) if self.activation == "relu" else gout
        gpre2 = gpre.reshape(bsz, out_c, oh * ow).transpose(0, 2, 1)  # (B, P, OC)
        kmat = self.k.reshape(out_c, -1)
        gk = np.einsum("bpo,bpk->ok", gpre2, cols).reshape(self.k.shape)
        gb = gpre2.sum(axis=(0, 1))
        gcols = gpre2 @ kmat  # (B, P, C*KH*KW)
        gx = np.zeros((bsz, in_c * h * w), dtype=gout.dtype)
        np.add.at(gx, (np.arange(bsz)[:, None, None], flat[None, :, :]), gcols)
        return gx.reshape(x_shape), [gk, gb]

    def params(self):
        return [self.k, self.b]

    def describe(self):
        return {
            "kind": "conv",
            "out_c": int(self.k.shape[0]),
            "in_c": int(self.k.shape[1]),
            "kh": int(self.k.shape[2]),
            "kw": int(self.k.shape[3]),
            "stride": self.stride,
            "activation": self.activation,
        }


class Flatten:
    def forward(self, x):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, cache, gout):
        return gout.reshape(cache), []

    def params(self):
        return []

    def describe(self):
        return {"kind": "flatten"}


class Network:
    """Plain layer sequence with cached forward and exact reverse-mode backward."""

    def __init__(self, layers: list):
        self.layers = layers

    def forward(self, x: np.ndarray):
        caches = []
        for layer in self.layers:
            x, cache = layer.forward(x)
            caches.append(cache)
        return x, caches

    def backward(self, caches, gout):
        if caches is None or len(caches) != len(self.layers):
            raise ValueError("backward() needs the cache from a matching forward()")
        grads: List[list] = []
        for layer, cache in zip(reversed(self.layers), reversed(caches)):
            gout, layer_grads = layer.backward(cache, gout)
            grads.append(layer_grads)
        flat = []
        for layer_grads in reversed(grads):
            flat.extend(layer_grads)
        return flat, gout

    def params(self):
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def describe(self):
        return [layer.describe() for layer in self.layers]


class HeadedNetwork:
    """Shared trunk feeding named linear heads.

    Heads absent from the gradient dict passed to :meth:`backward` are skipped
    entirely: their parameters get exact-zero gradients and contribute nothing
    to the trunk gradient, so auxiliary heads with zero loss weight leave the
    main training trace untouched.
    """

    def __init__(self, trunk: Network, heads: Dict[str, Network]):
        self.trunk = trunk
        self.heads = dict(heads)

    def forward(self, x):
        feat, trunk_cache = self.trunk.forward(x)
        outs = {}
        head_caches = {}
        for name, head in self.heads.items():
            outs[name], head_caches[name] = head.forward(feat)
        return outs, (trunk_cache, head_caches)

    def backward(self, cache, gouts: Dict[str, np.ndarray]):
        trunk_cache, head_caches = cache
        gfeat = None
        head_grads = {}
        for name, head in self.heads.items():
            if name in gouts:
                grads, gx = head.backward(head_caches[name], gouts[name])
                head_grads[name] = grads
                gfeat = gx if gfeat is None else gfeat + gx
            else:
                head_grads[name] = [np.zeros_like(p) for p in head.params()]
        if gfeat is None:
            trunk_grads = [np.zeros_like(p) for p in self.trunk.params()]
        else:
            trunk_grads, _ = self.trunk.backward(trunk_cache, gfeat)
        flat = list(trunk_grads)
        for name in self.heads:
            flat.extend(head_grads[name])
        return flat

    def params(self):
        out = list(self.trunk.params())
        for head in self.heads.values():
            out.extend(head.params())
        return out

    def describe(self):
        return {
            "trunk": self.trunk.describe(),
            "heads": {name: head.describe() for name, head in self.heads.items()},
        }


# ---------------------------------------------------------------------------
# initialization and builders


def init_dense(in_dim: int, out_dim: int, stream: RandomStream, activation: str,
               dtype=np.float32) -> Dense:
    # He-style scaling for ReLU fan-in, unit-variance-preserving for linear.
    var = (2.0 if activation == "relu" else 1.0) / in_dim
    w = stream.gaussian_vec(0.0, var, in_dim * out_dim).reshape(in_dim, out_dim).astype(dtype)
    b = np.zeros(out_dim, dtype=dtype)
    return Dense(w, b, activation)


def init_conv(in_c: int, out_c: int, kernel: int, stride: int, stream: RandomStream,
              activation: str = "relu", dtype=np.float32) -> Conv2d:
    fan_in = in_c * kernel * kernel
    var = (2.0 if activation == "relu" else 1.0) / fan_in
    k = stream.gaussian_vec(0.0, var, out_c * fan_in).reshape(out_c, in_c, kernel, kernel)
    return Conv2d(k.astype(dtype), np.zeros(out_c, dtype=dtype), stride, activation)


def mlp(in_dim: int, hidden_dim: int, out_dim: int, stream: RandomStream, *,
        hidden_layers: int = 2, dtype=np.float32) -> Network:
    """The default 3-affine-layer MLP (two ReLU hidden layers)."""
    layers = []
    prev = in_dim
    for _ in range(hidden_layers):
        layers.append(init_dense(prev, hidden_dim, stream, "relu", dtype))
        prev = hidden_dim
    layers.append(init_dense(prev, out_dim, stream, "linear", dtype))
    return Network(layers)


CONV_HEAD = ((16, 8, 4), (32, 4, 2), (32, 3, 1))  # (channels, kernel, stride) triples


def conv_net(in_shape: Tuple[int, int, int], dense_dim: int, out_dim: int,
             stream: RandomStream, *, conv_spec=CONV_HEAD, dtype=np.float32) -> Network:
    """Conv trunk (8x8/4, 4x4/2, 3x3/1 by default) into a dense layer."""
    c, h, w = in_shape
    layers: list = []
    for out_c, kernel, stride in conv_spec:
        layers.append(init_conv(c, out_c, kernel, stride, stream, "relu", dtype))
        c = out_c
        h = (h - kernel) // stride + 1
        w = (w - kernel) // stride + 1
        if h <= 0 or w <= 0:
            raise ValueError("conv stack does not fit the input resolution")
    layers.append(Flatten())
    layers.append(init_dense(c * h * w, dense_dim, stream, "relu", dtype))
    layers.append(init_dense(dense_dim, out_dim, stream, "linear", dtype))
    return Network(layers)


def rebuild(description) -> Network:
    """Reconstruct a zero-parameter network from ``describe()`` output."""
    layers: list = []
    for entry in description:
        kind = entry["kind"]
        if kind == "dense":
            w = np.zeros((entry["in"], entry["out"]), dtype=np.float32)
            layers.append(Dense(w, np.zeros(entry["out"], dtype=np.float32), entry["activation"]))
        elif kind == "conv":
            k = np.zeros((entry["out_c"], entry["in_c"], entry["kh"], entry["kw"]), dtype=np.float32)
            layers.append(Conv2d(k, np.zeros(entry["out_c"], dtype=np.float32),
                                 entry["stride"], entry["activation"]))
        elif kind == "flatten":
            layers.append(Flatten())
        else:
            raise ValueError(f"unknown layer kind {kind!r}")
    return Network(layers)


# ---------------------------------------------------------------------------
# optimizer


class Adam:
    """Bias-corrected Adam updating parameter arrays in place."""

    def __init__(self, params: Sequence[np.ndarray], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in self.params]
        self.v = [np.zeros_like(p) for p in self.params]

    def step(self, grads: Sequence[np.ndarray]) -> None:
        if len(grads) != len(self.params):
            raise ValueError(f"expected {len(self.params)} gradients, got {len(grads)}")
        for g in grads:
            if not np.all(np.isfinite(g)):
                raise NonFiniteGradientError(
                    "non-finite gradient encountered (|g|_max="
                    f"{np.max(np.abs(g[np.isfinite(g)])) if np.any(np.isfinite(g)) else 'n/a'})"
                )
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g)
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


# ---------------------------------------------------------------------------
# losses


def huber_loss(pred: np.ndarray, target: np.ndarray, delta: float = 1.0):
    """Mean-reduced Huber loss and its gradient w.r.t. pred."""
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ValueError("huber_loss requires equal shapes")
    err = pred - target
    abs_err = np.abs(err)
    quad = abs_err <= delta
    losses = np.where(quad, 0.5 * err**2, delta * (abs_err - 0.5 * delta))
    grad = np.clip(err, -delta, delta) / err.size
    return float(losses.mean()), grad


def mse_loss(pred: np.ndarray, target: np.ndarray):
    err = pred - target
    return float(np.mean(err**2)), 2.0 * err / err.size


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy over integer labels and gradient w.r.t. logits."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - logz
    n = logits.shape[0]
    loss = -float(logp[np.arange(n), labels].mean())
    grad = np.exp(logp)
    grad[np.arange(n), labels] -= 1.0
    return loss, grad / n


def ppo_loss(logp_new: np.ndarray, logp_old: np.ndarray, advantages: np.ndarray,
             values: np.ndarray, returns: np.ndarray, clip_eps: float = 0.2):
    """Clipped-surrogate objective plus 0.5x value MSE.

    Returns the scalar loss and gradients w.r.t. ``logp_new`` and ``values``.
    The policy term's gradient vanishes wherever the clipped branch is active.
    """
    n = logp_new.size
    ratio = np.exp(logp_new - logp_old)
    unclipped = ratio * advantages
    clipped = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * advantages
    policy = float(np.minimum(unclipped, clipped).mean())
    verr = values - returns
    value = float(np.mean(verr**2))
    loss = -policy + 0.5 * value
    active = unclipped <= clipped
    dlogp = -(active * ratio * advantages) / n
    dvalues = verr / n
    return loss, dlogp, dvalues


# ---------------------------------------------------------------------------
# distributions


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def categorical_sample(logits: np.ndarray, stream: RandomStream) -> int:
    """Inverse-CDF sample; consumes exactly one uniform draw."""
    probs = softmax(np.asarray(logits, dtype=np.float64).ravel())
    u = stream.unit()
    return int(min(np.searchsorted(np.cumsum(probs), u), probs.size - 1))


def categorical_logprob(logits: np.ndarray, actions) -> np.ndarray:
    logp = log_softmax(logits)
    if logp.ndim == 1:
        return logp[int(actions)]
    return logp[np.arange(logp.shape[0]), actions]


def categorical_logprob_grad(logits: np.ndarray, actions: np.ndarray,
                             dlogp: np.ndarray) -> np.ndarray:
    """Chain dL/dlogp(a) back to the logits of a batched categorical."""
    probs = softmax(logits)
    grad = -probs * dlogp[:, None]
    grad[np.arange(logits.shape[0]), actions] += dlogp
    return grad


def categorical_entropy(logits: np.ndarray) -> np.ndarray:
    logp = log_softmax(logits)
    return -(np.exp(logp) * logp).sum(axis=-1)


def categorical_entropy_grad(logits: np.ndarray, dent: np.ndarray) -> np.ndarray:
    logp = log_softmax(logits)
    probs = np.exp(logp)
    ent = -(probs * logp).sum(axis=-1, keepdims=True)
    return -probs * (logp + ent) * dent[:, None]


LOG_2PI = math.log(2.0 * math.pi)


def gaussian_logprob(mean: np.ndarray, log_std: np.ndarray, action: np.ndarray) -> np.ndarray:
    """Diagonal-Gaussian log density; state-independent learned log_std."""
    mean = np.atleast_2d(mean)
    action = np.atleast_2d(action)
    var = np.exp(2.0 * log_std)
    quad = ((action - mean) ** 2 / var).sum(axis=1)
    out = -0.5 * quad - log_std.sum() - 0.5 * mean.shape[1] * LOG_2PI
    return out if out.size > 1 else out.reshape(())


def gaussian_logprob_grads(mean, log_std, action, dlogp):
    """Gradients of sum(dlogp * logp) w.r.t. mean and log_std."""
    var = np.exp(2.0 * log_std)
    diff = action - mean
    dmean = dlogp[:, None] * diff / var
    dlog_std = (dlogp[:, None] * (diff**2 / var - 1.0)).sum(axis=0)
    return dmean, dlog_std


def gaussian_sample(mean: np.ndarray, log_std: np.ndarray, stream: RandomStream) -> np.ndarray:
    z = stream.gaussian_vec(0.0, 1.0, log_std.size)
    return mean + np.exp(log_std) * z


def gaussian_entropy(log_std: np.ndarray) -> float:
    return float(np.sum(log_std + 0.5 * (LOG_2PI + 1.0)))


# ---------------------------------------------------------------------------
# checkpoint format

MAGIC = b"RLPB"
VERSION = 1
_DTYPES = {0: "<f4", 1: "<f8"}
_DTYPE_CODES = {np.dtype("float32"): 0, np.dtype("float64"): 1}


def save_params(path, meta: dict, arrays: Sequence[np.ndarray]) -> None:
    """Little-endian binary checkpoint: magic, version, JSON table, raw blobs."""
    meta_bytes = json.dumps(meta, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(meta_bytes)))
        fh.write(meta_bytes)
        fh.write(struct.pack("<I", len(arrays)))
        for arr in arrays:
            code = _DTYPE_CODES[np.dtype(arr.dtype)]
            fh.write(struct.pack("<BB", code, arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(np.ascontiguousarray(arr).astype(_DTYPES[code]).tobytes())


class CheckpointError(ValueError):
    pass


def load_params(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise CheckpointError(f"bad checkpoint magic {blob[:4]!r}")
    version, meta_len = struct.unpack_from("<II", blob, 4)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    off = 12
    meta = json.loads(blob[off:off + meta_len].decode("utf-8"))
    off += meta_len
    (count,) = struct.unpack_from("<I", blob, off)
    off += 4
    arrays = []
    for _ in range(count):
        code, ndim = struct.unpack_from("<BB", blob, off)
        off += 2
        shape = struct.unpack_from(f"<{ndim}I", blob, off)
        off += 4 * ndim
        dtype = np.dtype(_DTYPES[code])
        n = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(blob, dtype=dtype, count=n, offset=off).reshape(shape)
        arrays.append(arr.copy())
        off += n * dtype.itemsize
    if off != len(blob):
        raise CheckpointError("trailing bytes in checkpoint")
    return meta, arrays


# ---------------------------------------------------------------------------
# finite-difference audit


def _rel_err(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    if scale < 1e-10:
        return 0.0
    return abs(a - b) / scale


def finite_diff_param_grad(loss_fn, param: np.ndarray, index, h: float = 1e-5) -> float:
    """Central-difference derivative of ``loss_fn()`` w.r.t. one param entry."""
    orig = param[index]
    param[index] = orig + h
    up = loss_fn()
    param[index] = orig - h
    down = loss_fn()
    param[index] = orig
    return (up - down) / (2.0 * h)


def _relu_margin(net, caches) -> float:
    """Smallest |pre-activation| over the ReLU layers of a plain Network."""
    margin = math.inf
    for layer, cache in zip(net.layers, caches):
        if getattr(layer, "activation", "linear") == "relu":
            pre = cache[-1]
            margin = min(margin, float(np.min(np.abs(pre))))
    return margin


def check_network_gradients(net, x: np.ndarray, stream: RandomStream,
                            entries_per_param: int = 3, h: float = 1e-5,
                            kink_margin: float = 1e-3) -> float:
    """Compare backward() against finite differences on sampled entries.

    Uses a fixed linear functional of the network output as the scalar loss so
    the output gradient is constant.  Instances whose ReLU pre-activations sit
    within ``kink_margin`` of zero are redrawn: finite differences are only
    valid away from the kink.  Returns the max relative error seen.
    """
    params = net.params()
    out, cache = net.forward(x)
    for _ in range(20):
        if _relu_margin(net, cache) > kink_margin:
            break
        x = x + stream.gaussian_vec(0.0, 0.01, x.size).reshape(x.shape)
        out, cache = net.forward(x)
    else:
        return 0.0  # hopelessly kink-adjacent draw; skip this instance
    weights = stream.gaussian_vec(0.0, 1.0, out.size).reshape(out.shape)

    def loss_fn():
        y, _ = net.forward(x)
        return float((y * weights).sum())

    grads, _ = net.backward(cache, weights)
    worst = 0.0
    for p, g in zip(params, grads):
        for _ in range(entries_per_param):
            index = tuple(stream.integer(dim) for dim in p.shape)
            fd = finite_diff_param_grad(loss_fn, p, index, h)
            ad = float(g[index])
            if abs(fd - ad) > 1e-7:
                worst = max(worst, _rel_err(fd, ad))
    return worst


def gradient_check_suite(seed: int = 0, instances: int = 100) -> float:
    """Run the float64 finite-difference battery; returns the worst rel. error.

    Covers dense MLPs, the conv stack, Huber, softmax cross-entropy, the
    PPO surrogate, and the Gaussian log-density parameter gradients.
    """
    worst = 0.0
    stream = RandomStream(seed, 97)

    for _ in range(instances):
        net = mlp(5, 8, 3, stream, dtype=np.float64)
        x = stream.gaussian_vec(0.0, 1.0, 2 * 5).reshape(2, 5)
        worst = max(worst, check_network_gradients(net, x, stream))

    for _ in range(max(1, instances // 10)):
        net = conv_net((2, 12, 12), 16, 4, stream,
                       conv_spec=((3, 4, 2), (4, 3, 1)), dtype=np.float64)
        x = stream.gaussian_vec(0.0, 1.0, 2 * 2 * 12 * 12).reshape(2, 2, 12, 12)
        worst = max(worst, check_network_gradients(net, x, stream))

    h = 1e-6
    for _ in range(instances):
        pred = stream.gaussian_vec(0.0, 4.0, 6)
        target = stream.gaussian_vec(0.0, 4.0, 6)
        _, grad = huber_loss(pred, target)
        i = stream.integer(6)
        fd = finite_diff_param_grad(lambda: huber_loss(pred, target)[0], pred, i, h)
        worst = max(worst, _rel_err(fd, float(grad[i])))

        logits = stream.gaussian_vec(0.0, 1.0, 12).reshape(3, 4)
        labels = np.array([stream.integer(4) for _ in range(3)])
        _, grad = softmax_cross_entropy(logits, labels)
        idx = (stream.integer(3), stream.integer(4))
        fd = finite_diff_param_grad(lambda: softmax_cross_entropy(logits, labels)[0], logits, idx, h)
        worst = max(worst, _rel_err(fd, float(grad[idx])))

        logp_new = stream.gaussian_vec(-1.0, 0.1, 8)
        logp_old = logp_new + stream.gaussian_vec(0.0, 0.01, 8)
        adv = stream.gaussian_vec(0.0, 1.0, 8)
        values = stream.gaussian_vec(0.0, 1.0, 8)
        returns = stream.gaussian_vec(0.0, 1.0, 8)

        def ppo_total():
            return ppo_loss(logp_new, logp_old, adv, values, returns)[0]

        _, dlogp, dvalues = ppo_loss(logp_new, logp_old, adv, values, returns)
        i = stream.integer(8)
        ratio = math.exp(logp_new[i] - logp_old[i])
        # skip entries at the clip boundary where the loss is non-differentiable
        if abs(ratio - 0.8) > 1e-3 and abs(ratio - 1.2) > 1e-3:
            fd = finite_diff_param_grad(ppo_total, logp_new, i, h)
            if abs(fd - dlogp[i]) > 1e-9:
                worst = max(worst, _rel_err(fd, float(dlogp[i])))
        fd = finite_diff_param_grad(ppo_total, values, i, h)
        worst = max(worst, _rel_err(fd, float(dvalues[i])))

        mean = stream.gaussian_vec(0.0, 1.0, 4).reshape(2, 2)
        log_std = stream.gaussian_vec(-0.5, 0.1, 2)
        action = stream.gaussian_vec(0.0, 1.0, 4).reshape(2, 2)
        dlogp = stream.gaussian_vec(0.0, 1.0, 2)

        def gauss_total():
            return float((gaussian_logprob(mean, log_std, action) * dlogp).sum())

        dmean, dlog_std = gaussian_logprob_grads(mean, log_std, action, dlogp)
        idx = (stream.integer(2), stream.integer(2))
        fd = finite_diff_param_grad(gauss_total, mean, idx, h)
        worst = max(worst, _rel_err(fd, float(dmean[idx])))
        j = stream.integer(2)
        fd = finite_diff_param_grad(gauss_total, log_std, j, h)
        worst = max(worst, _rel_err(fd, float(dlog_std[j])))

    return worst
