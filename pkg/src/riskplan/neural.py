"""Learned sampler: a small conv encoder for the zone map plus a dropout MLP.

Everything is plain numpy in float64. The encoder maps a rasterised risk map
to a latent vector; the inference network maps (latent, x_t, x_goal, delta)
to a proposed next state in normalised [0, 1]^2 coordinates. Gradients are
hand-derived and checked against finite differences in the test suite.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path as FsPath
from typing import Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .risk_map import Environment, MapImage, RiskConstraintSet, build_constraints, rasterize

FORMAT_VERSION = 1
MAGIC = b"NRRT"
BN_EPS = 1e-5
BN_MOMENTUM = 0.9  # weight kept on the running average


@dataclass(frozen=True)
class Architecture:
    image_size: int = 64
    conv: tuple[int, int] = (32, 128)
    fc_hidden: int = 128
    latent: int = 64
    hidden: tuple[int, ...] = (256, 256, 128, 128, 64)
    dropout: float = 0.5

    def __post_init__(self):
        if self.image_size < 4 or self.image_size % 4:
            raise ValueError("image_size must be a positive multiple of 4")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout probability must lie in [0, 1)")

    @property
    def n_features(self) -> int:
        side = self.image_size // 4
        return self.conv[1] * side * side

    @property
    def input_width(self) -> int:
        return self.latent + 5  # z, x_t, x_goal, delta

    @property
    def mlp_widths(self) -> list[int]:
        return [self.input_width, *self.hidden, 2]

    def param_specs(self) -> list[tuple[str, int, tuple[int, ...]]]:
        """(name, kind tag, shape) in file declaration order."""
        c1, c2 = self.conv
        specs = []
        for i, (cin, cout) in enumerate([(3, c1), (c1, c2)], start=1):
            specs += [
                (f"conv{i}.w", KIND_CONV_W, (cout, cin, 3, 3)),
                (f"conv{i}.b", KIND_CONV_B, (cout,)),
                (f"bn{i}.gamma", KIND_BN_GAMMA, (cout,)),
                (f"bn{i}.beta", KIND_BN_BETA, (cout,)),
                (f"bn{i}.mean", KIND_BN_MEAN, (cout,)),
                (f"bn{i}.var", KIND_BN_VAR, (cout,)),
            ]
        dense = [("fc1", self.n_features, self.fc_hidden), ("fc2", self.fc_hidden, self.latent)]
        widths = self.mlp_widths
        dense += [(f"mlp{k}", widths[k], widths[k + 1]) for k in range(len(widths) - 1)]
        for name, din, dout in dense:
            specs += [(f"{name}.w", KIND_DENSE_W, (din, dout)), (f"{name}.b", KIND_DENSE_B, (dout,))]
        return specs


KIND_CONV_W, KIND_CONV_B, KIND_BN_GAMMA, KIND_BN_BETA, KIND_BN_MEAN, KIND_BN_VAR, KIND_DENSE_W, KIND_DENSE_B = range(1, 9)
_STATS = (KIND_BN_MEAN, KIND_BN_VAR)


@dataclass
class ModelBundle:
    arch: Architecture
    params: dict[str, np.ndarray]
    bounds: tuple[float, float, float, float]
    format_version: int = FORMAT_VERSION

    @property
    def image_size(self) -> int:
        return self.arch.image_size

    def trainable(self) -> list[str]:
        return [n for n, kind, _ in self.arch.param_specs() if kind not in _STATS]

    def copy(self) -> "ModelBundle":
        return ModelBundle(self.arch, {k: v.copy() for k, v in self.params.items()}, self.bounds, self.format_version)


def init_model(arch: Architecture, bounds, rng: np.random.Generator) -> ModelBundle:
    """He-normal weights, zero biases, unit batch-norm scale."""
    params = {}
    for name, kind, shape in arch.param_specs():
        if kind == KIND_CONV_W:
            fan_in = shape[1] * 9
            params[name] = rng.normal(0.0, np.sqrt(2.0 / fan_in), shape)
        elif kind == KIND_DENSE_W:
            params[name] = rng.normal(0.0, np.sqrt(2.0 / shape[0]), shape)
        elif kind in (KIND_BN_GAMMA, KIND_BN_VAR):
            params[name] = np.ones(shape)
        else:
            params[name] = np.zeros(shape)
    return ModelBundle(arch, params, tuple(float(b) for b in bounds))


# -- normalisation ------------------------------------------------------------


def normalize(pt, bounds) -> np.ndarray:
    xmin, xmax, ymin, ymax = bounds
    pt = np.asarray(pt, float)
    return (pt - np.array([xmin, ymin])) / np.array([xmax - xmin, ymax - ymin])


def denormalize(q, bounds) -> np.ndarray:
    xmin, xmax, ymin, ymax = bounds
    q = np.asarray(q, float)
    return q * np.array([xmax - xmin, ymax - ymin]) + np.array([xmin, ymin])


def image_tensor(img: MapImage) -> np.ndarray:
    return img.pixels.transpose(2, 0, 1).astype(np.float64) / 255.0


# -- layers ---------------------------------------------------------------------


def _conv_forward(x, w, b):
    B, C, H, W = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    cols = sliding_window_view(xp, (3, 3), axis=(2, 3))  # B, C, H, W, 3, 3
    cols = cols.transpose(0, 2, 3, 1, 4, 5).reshape(B * H * W, C * 9)
    out = cols @ w.reshape(w.shape[0], -1).T + b
    return out.reshape(B, H, W, -1).transpose(0, 3, 1, 2), cols


def _conv_backward(dout, cols, x_shape, w):
    B, C, H, W = x_shape
    O = w.shape[0]
    d2 = dout.transpose(0, 2, 3, 1).reshape(-1, O)
    dw = (d2.T @ cols).reshape(w.shape)
    db = d2.sum(axis=0)
    dcols = (d2 @ w.reshape(O, -1)).reshape(B, H, W, C, 3, 3)
    dxp = np.zeros((B, C, H + 2, W + 2))
    for i in range(3):
        for j in range(3):
            dxp[:, :, i : i + H, j : j + W] += dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    return dxp[:, :, 1:-1, 1:-1], dw, db


def _bn_forward(x, gamma, beta, mean, var, weights, train: bool):
    """Per-channel batch norm; ``weights`` are image multiplicities in the sample batch."""
    if train:
        wb = weights[:, None, None, None]
        total = weights.sum() * x.shape[2] * x.shape[3]
        mu = (wb * x).sum(axis=(0, 2, 3)) / total
        diff = x - mu[None, :, None, None]
        sig2 = (wb * diff**2).sum(axis=(0, 2, 3)) / total
    else:
        mu, sig2 = mean, var
        diff = x - mu[None, :, None, None]
    inv = 1.0 / np.sqrt(sig2 + BN_EPS)
    xhat = diff * inv[None, :, None, None]
    y = gamma[None, :, None, None] * xhat + beta[None, :, None, None]
    return y, xhat, inv, mu, sig2


def _bn_backward(dy, xhat, inv, gamma, weights, train: bool):
    dgamma = (dy * xhat).sum(axis=(0, 2, 3))
    dbeta = dy.sum(axis=(0, 2, 3))
    dxhat = dy * gamma[None, :, None, None]
    if not train:
        return dxhat * inv[None, :, None, None], dgamma, dbeta
    wb = weights[:, None, None, None]
    total = weights.sum() * xhat.shape[2] * xhat.shape[3]
    s1 = dxhat.sum(axis=(0, 2, 3))[None, :, None, None]
    s2 = (dxhat * xhat).sum(axis=(0, 2, 3))[None, :, None, None]
    dx = (dxhat - wb * (s1 + xhat * s2) / total) * inv[None, :, None, None]
    return dx, dgamma, dbeta


def _pool_forward(x):
    B, C, H, W = x.shape
    win = x.reshape(B, C, H // 2, 2, W // 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(B, C, H // 2, W // 2, 4)
    idx = win.argmax(axis=-1)
    return np.take_along_axis(win, idx[..., None], axis=-1)[..., 0], idx


def _pool_backward(dout, idx, x_shape):
    B, C, H, W = x_shape
    win = np.zeros((B, C, H // 2, W // 2, 4))
    np.put_along_axis(win, idx[..., None], dout[..., None], axis=-1)
    return win.reshape(B, C, H // 2, W // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(x_shape)


# -- networks -----------------------------------------------------------------


def _encode_batch(model: ModelBundle, imgs: np.ndarray, weights, train_bn: bool, cache: Optional[dict]):
    p = model.params
    h = imgs
    stats = {}
    for i in (1, 2):
        z, cols = _conv_forward(h, p[f"conv{i}.w"], p[f"conv{i}.b"])
        y, xhat, inv, mu, sig2 = _bn_forward(
            z, p[f"bn{i}.gamma"], p[f"bn{i}.beta"], p[f"bn{i}.mean"], p[f"bn{i}.var"], weights, train_bn
        )
        r = np.maximum(y, 0.0)
        pooled, idx = _pool_forward(r)
        if cache is not None:
            cache[f"enc{i}"] = (h.shape, cols, xhat, inv, y, r.shape, idx)
        stats[i] = (mu, sig2)
        h = pooled
    flat = h.reshape(h.shape[0], -1)
    a1 = flat @ p["fc1.w"] + p["fc1.b"]
    h1 = np.maximum(a1, 0.0)
    z = h1 @ p["fc2.w"] + p["fc2.b"]
    if cache is not None:
        cache["fc"] = (h.shape, flat, a1, h1)
        cache["bn_stats"] = stats
    return z


def encode(model: ModelBundle, img: MapImage) -> np.ndarray:
    """Latent vector of one map, batch norm in inference mode."""
    S = model.image_size
    if img.width != S or img.height != S:
        raise ValueError(f"map is {img.width}x{img.height}, model expects {S}x{S}")
    return _encode_batch(model, image_tensor(img)[None], np.ones(1), False, None)[0]


def _dropout_masks(arch: Architecture, n: int, rng: Optional[np.random.Generator]):
    if rng is None or arch.dropout == 0.0:
        return [None] * len(arch.hidden)
    keep = 1.0 - arch.dropout
    return [(rng.random((n, w)) < keep) / keep for w in arch.hidden]


def _mlp_forward(model: ModelBundle, inp: np.ndarray, masks, cache: Optional[dict]):
    p = model.params
    n_layers = len(model.arch.mlp_widths) - 1
    h = inp
    acts = []
    for k in range(n_layers):
        a = h @ p[f"mlp{k}.w"] + p[f"mlp{k}.b"]
        if k == n_layers - 1:
            acts.append((h, None, None))
            h = a
            break
        r = np.maximum(a, 0.0)
        m = masks[k]
        out = r * m if m is not None else r
        acts.append((h, a, m))
        h = out
    if cache is not None:
        cache["mlp"] = acts
    return h


def _mlp_input(z, x_t, x_goal, delta):
    z = np.atleast_2d(z)
    n = z.shape[0]
    return np.concatenate(
        [z, np.reshape(x_t, (n, 2)), np.reshape(x_goal, (n, 2)), np.reshape(delta, (n, 1))], axis=1
    )


def infer_next(
    model: ModelBundle,
    z,
    x_t,
    x_goal,
    delta: float,
    dropout_on: bool,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Next normalised state, clamped to [0, 1]^2."""
    if dropout_on and rng is None:
        raise ValueError("dropout needs a generator")
    inp = _mlp_input(z, x_t, x_goal, delta)
    masks = _dropout_masks(model.arch, 1, rng if dropout_on else None)
    out = _mlp_forward(model, inp, masks, None)[0]
    return np.clip(out, 0.0, 1.0)


class NeuralSampler:
    """Proposal distribution for one map: encodes once, then runs the MLP per draw."""

    def __init__(self, model: ModelBundle, z: np.ndarray, delta: float, dropout_on: bool = True):
        self.model = model
        self.z = np.asarray(z, float)
        self.delta = float(delta)
        self.dropout_on = dropout_on

    @classmethod
    def for_environment(cls, model: ModelBundle, env: Environment, delta: float,
                        cs: Optional[RiskConstraintSet] = None, dropout_on: bool = True) -> "NeuralSampler":
        cs = cs if cs is not None else build_constraints(env, delta)
        img = rasterize(cs, env, model.image_size, model.image_size)
        return cls(model, encode(model, img), delta, dropout_on)

    def propose(self, x_t, x_goal, rng: np.random.Generator) -> np.ndarray:
        b = self.model.bounds
        q = infer_next(self.model, self.z, normalize(x_t, b), normalize(x_goal, b), self.delta,
                       self.dropout_on, rng)
        return denormalize(q, b)


# -- training data ----------------------------------------------------------------


@dataclass
class TrainingSet:
    """Samples sharing one workspace normalisation; maps are stored once and indexed."""

    images: list[MapImage]
    img_index: np.ndarray  # (n,) index into images
    x_t: np.ndarray  # (n, 2) normalised
    x_goal: np.ndarray
    delta: np.ndarray  # (n,)
    x_next: np.ndarray
    bounds: tuple[float, float, float, float]
    cost_to_go: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.img_index)

    def subset(self, idx) -> "TrainingSet":
        idx = np.asarray(idx, int)
        ctg = None if self.cost_to_go is None else self.cost_to_go[idx]
        return TrainingSet(self.images, self.img_index[idx], self.x_t[idx], self.x_goal[idx],
                           self.delta[idx], self.x_next[idx], self.bounds, ctg)


@dataclass
class Batch:
    images: np.ndarray  # (U, 3, S, S) unique maps in this batch
    img_index: np.ndarray  # (n,) into images
    x_t: np.ndarray
    x_goal: np.ndarray
    delta: np.ndarray
    x_next: np.ndarray

    @property
    def multiplicity(self) -> np.ndarray:
        return np.bincount(self.img_index, minlength=len(self.images)).astype(float)

    def __len__(self):
        return len(self.img_index)


def make_batch(data: TrainingSet, idx=None, tensors: Optional[list] = None) -> Batch:
    sub = data if idx is None else data.subset(idx)
    uniq, inv = np.unique(sub.img_index, return_inverse=True)
    if tensors is None:
        imgs = np.stack([image_tensor(data.images[u]) for u in uniq])
    else:
        imgs = np.stack([tensors[u] for u in uniq])
    return Batch(imgs, inv.reshape(-1), sub.x_t, sub.x_goal, sub.delta, sub.x_next)


# -- loss and gradients ------------------------------------------------------------


def _forward(model, batch: Batch, rng, train_bn: bool, cache):
    zu = _encode_batch(model, batch.images, batch.multiplicity, train_bn, cache)
    z = zu[batch.img_index]
    inp = _mlp_input(z, batch.x_t, batch.x_goal, batch.delta)
    masks = _dropout_masks(model.arch, len(batch), rng)
    return _mlp_forward(model, inp, masks, cache)


def batch_loss(model: ModelBundle, batch: Batch, rng: Optional[np.random.Generator] = None,
               train_bn: bool = False) -> float:
    """Mean over samples of the squared next-state error; dropout is on iff ``rng`` is given."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    pred = _forward(model, batch, rng, train_bn, None)
    return float(((pred - batch.x_next) ** 2).sum(axis=1).mean())


def backward(model: ModelBundle, batch: Batch, rng: Optional[np.random.Generator] = None,
             train_bn: bool = False) -> tuple[float, dict[str, np.ndarray], dict]:
    """Loss, gradients for every trainable parameter, and batch-norm batch statistics.

    Forward and backward share one draw of dropout masks from ``rng``.
    """
    if len(batch) == 0:
        raise ValueError("empty batch")
    p = model.params
    cache: dict = {}
    pred = _forward(model, batch, rng, train_bn, cache)
    n = len(batch)
    resid = pred - batch.x_next
    loss = float((resid**2).sum(axis=1).mean())
    grads: dict[str, np.ndarray] = {}

    d = 2.0 * resid / n
    acts = cache["mlp"]
    for k in range(len(acts) - 1, -1, -1):
        h_in, a, m = acts[k]
        if a is not None:
            if m is not None:
                d = d * m
            d = d * (a > 0.0)
        grads[f"mlp{k}.w"] = h_in.T @ d
        grads[f"mlp{k}.b"] = d.sum(axis=0)
        d = d @ p[f"mlp{k}.w"].T
    dz = np.zeros((len(batch.images), model.arch.latent))
    np.add.at(dz, batch.img_index, d[:, : model.arch.latent])

    pool_shape, flat, a1, h1 = cache["fc"]
    grads["fc2.w"] = h1.T @ dz
    grads["fc2.b"] = dz.sum(axis=0)
    da1 = (dz @ p["fc2.w"].T) * (a1 > 0.0)
    grads["fc1.w"] = flat.T @ da1
    grads["fc1.b"] = da1.sum(axis=0)
    dh = (da1 @ p["fc1.w"].T).reshape(pool_shape)

    weights = batch.multiplicity
    for i in (2, 1):
        x_shape, cols, xhat, inv, y, r_shape, idx = cache[f"enc{i}"]
        dr = _pool_backward(dh, idx, r_shape)
        dy = dr * (y > 0.0)
        dzc, grads[f"bn{i}.gamma"], grads[f"bn{i}.beta"] = _bn_backward(
            dy, xhat, inv, p[f"bn{i}.gamma"], weights, train_bn
        )
        dh, grads[f"conv{i}.w"], grads[f"conv{i}.b"] = _conv_backward(dzc, cols, x_shape, p[f"conv{i}.w"])
    return loss, grads, cache["bn_stats"]


# -- optimiser ---------------------------------------------------------------------


@dataclass
class AdamState:
    lr: float = 4e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(state: AdamState, params: dict, grads: dict) -> tuple[dict, AdamState]:
    """One bias-corrected Adam update, applied in place to ``params``."""
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    for name, g in grads.items():
        if g.shape != params[name].shape:
            raise ValueError(f"gradient shape {g.shape} does not match {name} {params[name].shape}")
        m = state.m.setdefault(name, np.zeros_like(g))
        v = state.v.setdefault(name, np.zeros_like(g))
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        params[name] -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


# -- training loop ------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 64
    lr: float = 4e-4
    seed: int = 0
    arch: Architecture = Architecture()


@dataclass
class TrainHistory:
    train_mse: list[float] = field(default_factory=list)
    val_mse: list[float] = field(default_factory=list)  # entry 0 is before any update


def split_sizes(n: int, val_split: float) -> tuple[int, int]:
    n_val = int(round(n * val_split))
    return n - n_val, n_val


def _eval_mse(model, data: TrainingSet, idx, tensors, batch_size) -> float:
    if len(idx) == 0:
        return float("nan")
    total = 0.0
    for s in range(0, len(idx), batch_size):
        b = make_batch(data, idx[s : s + batch_size], tensors)
        total += batch_loss(model, b) * len(b)
    return total / len(idx)


def train(data: TrainingSet, val_split: float = 0.1, epochs: int = 20,
          cfg: TrainConfig = TrainConfig(), log=None) -> tuple[ModelBundle, TrainHistory]:
    """Mini-batch Adam on next-state MSE. Validation uses frozen batch norm and no dropout."""
    n = len(data)
    if n == 0:
        raise ValueError("empty dataset")
    n_train, n_val = split_sizes(n, val_split)
    if n_train == 0:
        raise ValueError("validation split leaves no training samples")
    rng = np.random.default_rng(cfg.seed)
    model = init_model(cfg.arch, data.bounds, rng)
    if any(im.width != cfg.arch.image_size or im.height != cfg.arch.image_size for im in data.images):
        raise ValueError("map size does not match the model image size")
    tensors = [image_tensor(im) for im in data.images]
    perm = rng.permutation(n)
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    hist = TrainHistory()
    hist.val_mse.append(_eval_mse(model, data, val_idx, tensors, cfg.batch_size))
    opt = AdamState(lr=cfg.lr)
    for epoch in range(epochs):
        order = rng.permutation(train_idx)
        total = 0.0
        for s in range(0, len(order), cfg.batch_size):
            b = make_batch(data, order[s : s + cfg.batch_size], tensors)
            loss, grads, stats = backward(model, b, rng, train_bn=True)
            adam_step(opt, model.params, grads)
            for i, (mu, sig2) in stats.items():
                for key, val in ((f"bn{i}.mean", mu), (f"bn{i}.var", sig2)):
                    model.params[key] = BN_MOMENTUM * model.params[key] + (1.0 - BN_MOMENTUM) * val
            total += loss * len(b)
        hist.train_mse.append(total / len(order))
        hist.val_mse.append(_eval_mse(model, data, val_idx, tensors, cfg.batch_size))
        if log is not None:
            log(f"epoch {epoch + 1}/{epochs} train {hist.train_mse[-1]:.5f} val {hist.val_mse[-1]:.5f}")
    return quantize(model), hist


def quantize(model: ModelBundle) -> ModelBundle:
    """Round every parameter to float32 so the weights file round trip is lossless."""
    out = model.copy()
    for k, v in out.params.items():
        out.params[k] = v.astype(np.float32).astype(np.float64)
    return out


# -- persistence ----------------------------------------------------------------------


class ModelFormatError(ValueError):
    pass


def model_to_bytes(model: ModelBundle) -> bytes:
    arch = model.arch
    specs = arch.param_specs()
    parts = [MAGIC, struct.pack("<II", model.format_version, arch.image_size)]
    parts.append(struct.pack("<4d", *model.bounds))
    parts.append(struct.pack("<d", arch.dropout))
    parts.append(struct.pack("<I", len(specs)))
    for _, kind, shape in specs:
        parts.append(struct.pack(f"<BB{len(shape)}I", kind, len(shape), *shape))
    for name, _, shape in specs:
        arr = model.params[name]
        if arr.shape != shape:
            raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
        parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return b"".join(parts)


def save_model(model: ModelBundle, path) -> None:
    FsPath(path).write_bytes(model_to_bytes(model))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ModelFormatError("truncated model file")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def _arch_from_table(image_size: int, dropout: float, table) -> Architecture:
    conv_w = [dims for kind, dims in table if kind == KIND_CONV_W]
    dense_w = [dims for kind, dims in table if kind == KIND_DENSE_W]
    if len(conv_w) != 2 or len(dense_w) < 4:
        raise ModelFormatError("layer table does not describe an encoder and inference network")
    arch = Architecture(
        image_size=image_size,
        conv=(conv_w[0][0], conv_w[1][0]),
        fc_hidden=dense_w[0][1],
        latent=dense_w[1][1],
        hidden=tuple(d[1] for d in dense_w[2:-1]),
        dropout=dropout,
    )
    expected = [(kind, shape) for _, kind, shape in arch.param_specs()]
    if expected != [(kind, tuple(dims)) for kind, dims in table]:
        raise ModelFormatError("layer dimensions are inconsistent")
    return arch


def model_from_bytes(data: bytes) -> ModelBundle:
    rd = _Reader(data)
    if rd.take(4) != MAGIC:
        raise ModelFormatError("bad magic")
    version, image_size = rd.unpack("<II")
    if version > FORMAT_VERSION or version == 0:
        raise ModelFormatError("unsupported version")
    bounds = rd.unpack("<4d")
    (dropout,) = rd.unpack("<d")
    (count,) = rd.unpack("<I")
    table = []
    for _ in range(count):
        kind, ndim = rd.unpack("<BB")
        table.append((kind, rd.unpack(f"<{ndim}I")))
    try:
        arch = _arch_from_table(image_size, dropout, table)
    except ValueError as exc:
        raise ModelFormatError(str(exc)) from exc
    params = {}
    for name, _, shape in arch.param_specs():
        size = int(np.prod(shape))
        buf = rd.take(4 * size)
        params[name] = np.frombuffer(buf, dtype="<f4").astype(np.float64).reshape(shape)
    if rd.pos != len(data):
        raise ModelFormatError("trailing bytes after parameter payload")
    return ModelBundle(arch, params, tuple(bounds), version)


def load_model(path) -> ModelBundle:
    return model_from_bytes(FsPath(path).read_bytes())
