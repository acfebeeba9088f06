"""Causal-convolution embedded, decoder-only Transformer over quantized next values.

Everything is plain numpy in float64 with a hand-written backward pass. The
input of length ``L = T - 1`` holds positions ``1..T-1`` of a wafer and row
``t`` of the output logits scores the class of the following value, so the
predictions are shifted right by one step.

Parameters live in an ordered ``dict`` of arrays (see :func:`param_shapes`).
Activations are batched as ``(B, L, channels)``; a 1-D input is treated as a
batch of one.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import CheckpointError, ConfigError, ShapeMismatch

LN_EPS = 1e-5


@dataclass(frozen=True)
class ModelConfig:
    seq_len: int = 53
    d_model: int = 16
    n_heads: int = 8
    n_layers: int = 6
    resolution: int = 100
    ffn_dim: Optional[int] = None  # None -> 4 * d_model
    tcn_kernel: int = 3
    tcn_dilations: tuple = (1, 2)
    use_pe: bool = True
    use_tcn: bool = True
    use_transformer: bool = True
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "tcn_dilations", tuple(int(d) for d in self.tcn_dilations))
        if self.ffn_dim is None:
            object.__setattr__(self, "ffn_dim", 4 * self.d_model)
        self.validate()

    def validate(self):
        if self.seq_len < 2:
            raise ConfigError("model.seq_len", "must be >= 2")
        if self.d_model < 1 or self.n_heads < 1 or self.d_model % self.n_heads:
            raise ConfigError("model.d_model", f"{self.d_model} must be divisible by n_heads={self.n_heads}")
        if self.n_layers < 0:
            raise ConfigError("model.n_layers", "must be >= 0")
        if self.resolution < 2:
            raise ConfigError("model.resolution", "must be >= 2")
        if self.ffn_dim < 1:
            raise ConfigError("model.ffn_dim", "must be >= 1")
        if self.tcn_kernel < 1 or not self.tcn_dilations or min(self.tcn_dilations) < 1:
            raise ConfigError("model.tcn_dilations", "kernel and dilations must be positive")
        if not (self.use_tcn or self.use_transformer):
            raise ConfigError("model.use_tcn", "at least one of use_tcn / use_transformer must be set")
        if self.seed < 0:
            raise ConfigError("model.seed", "must be unsigned")

    @property
    def in_channels(self) -> int:
        return 2 if self.use_pe else 1

    @property
    def d_head(self) -> int:
        return self.d_model // self.n_heads

    @property
    def receptive_field(self) -> int:
        return 1 + (self.tcn_kernel - 1) * sum(self.tcn_dilations)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["tcn_dilations"] = list(self.tcn_dilations)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


def param_shapes(config: ModelConfig) -> dict:
    """Name -> shape for every learnable tensor, in declaration order."""
    d, c = config.d_model, config.in_channels
    shapes = {}
    if config.use_tcn:
        cin = c
        for i, _ in enumerate(config.tcn_dilations):
            shapes[f"tcn.{i}.weight"] = (config.tcn_kernel, cin, d)
            shapes[f"tcn.{i}.bias"] = (d,)
            cin = d
    else:
        shapes["lift.weight"] = (c, d)
        shapes["lift.bias"] = (d,)
    if config.use_transformer:
        for i in range(config.n_layers):
            p = f"layers.{i}."
            for name in ("wq", "wk", "wv", "wo"):
                shapes[p + name] = (d, d)
            shapes[p + "ffn.w1"] = (d, config.ffn_dim)
            shapes[p + "ffn.b1"] = (config.ffn_dim,)
            shapes[p + "ffn.w2"] = (config.ffn_dim, d)
            shapes[p + "ffn.b2"] = (d,)
            for ln in ("ln1", "ln2"):
                shapes[p + ln + ".gain"] = (d,)
                shapes[p + ln + ".bias"] = (d,)
    shapes["head.weight"] = (d, config.resolution)
    shapes["head.bias"] = (config.resolution,)
    return shapes


def init_params(config: ModelConfig) -> dict:
    """Glorot-uniform weights, zero biases, unit layer-norm gains; seeded by ``config.seed``."""
    rng = np.random.default_rng(config.seed)
    params = {}
    for name, shape in param_shapes(config).items():
        if name.endswith(".gain"):
            params[name] = np.ones(shape)
        elif len(shape) == 1:
            params[name] = np.zeros(shape)
        else:
            if len(shape) == 3:  # conv: (kernel, in, out)
                fan_in, fan_out = shape[0] * shape[1], shape[0] * shape[2]
            else:
                fan_in, fan_out = shape
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            params[name] = rng.uniform(-limit, limit, size=shape)
    return params


def n_parameters(params: dict) -> int:
    return int(sum(p.size for p in params.values()))


# ---------------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------------

def build_causal_mask(L: int) -> np.ndarray:
    """``M[i, j] = -inf`` when ``i < j`` (a future position), else ``0``."""
    if L < 1:
        raise ValueError("mask size must be >= 1")
    return np.where(np.triu(np.ones((L, L), dtype=bool), k=1), -np.inf, 0.0)


def embed_position(values) -> np.ndarray:
    """Stack values with a min-max scaled position index.

    Returns ``(..., L, 2)``: channel 0 is the input, channel 1 runs from 0.0 at
    the first position to 1.0 at the last.
    """
    x = np.asarray(values, dtype=np.float64)
    L = x.shape[-1]
    pos = np.arange(L) / (L - 1) if L > 1 else np.zeros(1)
    return np.stack([x, np.broadcast_to(pos, x.shape)], axis=-1)


def softmax_probs(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def causal_conv(x, w, b, dilation):
    """Left-padded dilated conv. ``x`` (B, L, Cin), ``w`` (K, Cin, Cout).

    ``y[t] = b + sum_j x[t - (K-1-j) * dilation] @ w[j]`` with out-of-range taps
    treated as zero, so ``y[t]`` never sees inputs after ``t``.
    """
    B, L, _ = x.shape
    K = w.shape[0]
    y = np.empty((B, L, w.shape[2]))
    y[...] = b
    for j in range(K):
        s = (K - 1 - j) * dilation
        if s >= L:
            continue
        y[:, s:, :] += x[:, :L - s, :] @ w[j]
    return y


def _causal_conv_backward(dy, x, w, dilation):
    B, L, cin = x.shape
    K, _, cout = w.shape
    dx = np.zeros_like(x)
    dw = np.zeros_like(w)
    for j in range(K):
        s = (K - 1 - j) * dilation
        if s >= L:
            continue
        dx[:, :L - s, :] += dy[:, s:, :] @ w[j].T
        dw[j] = x[:, :L - s, :].reshape(-1, cin).T @ dy[:, s:, :].reshape(-1, cout)
    return dx, dw, dy.sum(axis=(0, 1))


def tcn_embed(x, params: dict, config: ModelConfig, cache: Optional[list] = None):
    """Causal dilated convolution stack ``(B, L, Cin) -> (B, L, d)`` with ReLU between layers."""
    h = x
    last = len(config.tcn_dilations) - 1
    for i, dil in enumerate(config.tcn_dilations):
        pre = causal_conv(h, params[f"tcn.{i}.weight"], params[f"tcn.{i}.bias"], dil)
        if cache is not None:
            cache.append((h, pre))
        h = pre if i == last else np.maximum(pre, 0.0)
    return h


def masked_attention_head(q, k, v, mask):
    """Scaled dot-product attention with an additive mask.

    Works on any leading batch/head axes: ``q, k, v`` are ``(..., L, d_k)``.
    Returns ``(output, weights)`` with weights ``(..., L, L)``.
    """
    dk = q.shape[-1]
    scores = q @ np.swapaxes(k, -1, -2) / np.sqrt(dk) + mask
    weights = softmax_probs(scores)
    return weights @ v, weights


def _layer_norm(z, gain, bias):
    mu = z.mean(axis=-1, keepdims=True)
    zc = z - mu
    inv = 1.0 / np.sqrt((zc * zc).mean(axis=-1, keepdims=True) + LN_EPS)
    zhat = zc * inv
    return zhat * gain + bias, (zhat, inv)


def _layer_norm_backward(dy, gain, cache):
    zhat, inv = cache
    dgain = (dy * zhat).sum(axis=(0, 1))
    dbias = dy.sum(axis=(0, 1))
    g = dy * gain
    dz = inv * (g - g.mean(axis=-1, keepdims=True) - zhat * (g * zhat).mean(axis=-1, keepdims=True))
    return dz, dgain, dbias


def _split_heads(x, h):
    B, L, d = x.shape
    return x.reshape(B, L, h, d // h).transpose(0, 2, 1, 3)


def _merge_heads(x):
    B, h, L, dk = x.shape
    return x.transpose(0, 2, 1, 3).reshape(B, L, h * dk)


def decoder_layer(x, params: dict, i: int, mask, n_heads: int, cache: Optional[dict] = None):
    """Post-norm decoder block: ``LN(x + MMHA(x))`` then ``LN(y + FFN(y))``.

    Returns ``(output, attention_weights)``; weights are ``(B, h, L, L)``.
    """
    p = f"layers.{i}."
    q = _split_heads(x @ params[p + "wq"], n_heads)
    k = _split_heads(x @ params[p + "wk"], n_heads)
    v = _split_heads(x @ params[p + "wv"], n_heads)
    o, att = masked_attention_head(q, k, v, mask)
    concat = _merge_heads(o)
    y1, ln1 = _layer_norm(x + concat @ params[p + "wo"], params[p + "ln1.gain"], params[p + "ln1.bias"])
    pre = y1 @ params[p + "ffn.w1"] + params[p + "ffn.b1"]
    hid = np.maximum(pre, 0.0)
    f = hid @ params[p + "ffn.w2"] + params[p + "ffn.b2"]
    y2, ln2 = _layer_norm(y1 + f, params[p + "ln2.gain"], params[p + "ln2.bias"])
    if cache is not None:
        cache.update(x=x, q=q, k=k, v=v, att=att, concat=concat, y1=y1, ln1=ln1,
                     pre=pre, hid=hid, ln2=ln2)
    return y2, att


def _decoder_layer_backward(dy2, params, i, c, n_heads, grads):
    p = f"layers.{i}."
    dz2, grads[p + "ln2.gain"], grads[p + "ln2.bias"] = _layer_norm_backward(dy2, params[p + "ln2.gain"], c["ln2"])
    # FFN branch
    d = dz2.shape[-1]
    grads[p + "ffn.w2"] = c["hid"].reshape(-1, c["hid"].shape[-1]).T @ dz2.reshape(-1, d)
    grads[p + "ffn.b2"] = dz2.sum(axis=(0, 1))
    dpre = (dz2 @ params[p + "ffn.w2"].T) * (c["pre"] > 0)
    grads[p + "ffn.w1"] = c["y1"].reshape(-1, d).T @ dpre.reshape(-1, dpre.shape[-1])
    grads[p + "ffn.b1"] = dpre.sum(axis=(0, 1))
    dy1 = dz2 + dpre @ params[p + "ffn.w1"].T
    # attention branch
    dz1, grads[p + "ln1.gain"], grads[p + "ln1.bias"] = _layer_norm_backward(dy1, params[p + "ln1.gain"], c["ln1"])
    x = c["x"]
    grads[p + "wo"] = c["concat"].reshape(-1, d).T @ dz1.reshape(-1, d)
    do = _split_heads(dz1 @ params[p + "wo"].T, n_heads)
    att, q, k, v = c["att"], c["q"], c["k"], c["v"]
    dv = np.swapaxes(att, -1, -2) @ do
    datt = do @ np.swapaxes(v, -1, -2)
    ds = att * (datt - (datt * att).sum(axis=-1, keepdims=True))
    ds /= np.sqrt(q.shape[-1])
    dq = ds @ k
    dk = np.swapaxes(ds, -1, -2) @ q
    dq, dk, dv = _merge_heads(dq), _merge_heads(dk), _merge_heads(dv)
    xf = x.reshape(-1, d)
    grads[p + "wq"] = xf.T @ dq.reshape(-1, d)
    grads[p + "wk"] = xf.T @ dk.reshape(-1, d)
    grads[p + "wv"] = xf.T @ dv.reshape(-1, d)
    return dz1 + dq @ params[p + "wq"].T + dk @ params[p + "wk"].T + dv @ params[p + "wv"].T


# ---------------------------------------------------------------------------
# full network
# ---------------------------------------------------------------------------

@dataclass
class ForwardOutput:
    logits: np.ndarray      # (L, r) or (B, L, r)
    attentions: np.ndarray  # (n_layers, h, L, L) or (B, n_layers, h, L, L)
    cache: Optional[dict] = field(default=None, repr=False)

    def probabilities(self) -> np.ndarray:
        return softmax_probs(self.logits)


def _as_batch(values, config):
    x = np.asarray(values, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != config.seq_len - 1:
        raise ShapeMismatch(f"expected input length {config.seq_len - 1} (T-1), got shape {np.shape(values)}")
    return x, single


def forward(values, params: dict, config: ModelConfig, keep_cache: bool = False) -> ForwardOutput:
    """Next-value logits for positions ``1..T-1`` of each wafer.

    ``values`` is ``(T-1,)`` or ``(B, T-1)`` in [0, 1]. Ablations: ``use_pe``
    off drops the position channel, ``use_tcn`` off swaps the convolution for
    a linear lift, ``use_transformer`` off feeds the embedding straight to the
    output head.
    """
    x, single = _as_batch(values, config)
    B, L = x.shape
    emb = embed_position(x) if config.use_pe else x[..., None]
    cache = {"emb": emb} if keep_cache else None

    if config.use_tcn:
        tcn_cache = [] if keep_cache else None
        h = tcn_embed(emb, params, config, tcn_cache)
        if keep_cache:
            cache["tcn"] = tcn_cache
    else:
        h = emb @ params["lift.weight"] + params["lift.bias"]

    n_att = config.n_layers if config.use_transformer else 0
    attentions = np.zeros((B, n_att, config.n_heads, L, L))
    if config.use_transformer:
        mask = build_causal_mask(L)
        layer_caches = []
        for i in range(config.n_layers):
            lc = {} if keep_cache else None
            h, attentions[:, i] = decoder_layer(h, params, i, mask, config.n_heads, lc)
            layer_caches.append(lc)
        if keep_cache:
            cache["layers"] = layer_caches
    if keep_cache:
        cache["top"] = h

    logits = h @ params["head.weight"] + params["head.bias"]
    if single:
        return ForwardOutput(logits[0], attentions[0], cache)
    return ForwardOutput(logits, attentions, cache)


def backward(dlogits, params: dict, config: ModelConfig, cache: dict) -> dict:
    """Gradients of a scalar loss w.r.t. every parameter, given ``dloss/dlogits``."""
    if cache is None:
        raise ValueError("forward(..., keep_cache=True) is required before backward")
    dlogits = np.asarray(dlogits, dtype=np.float64)
    if dlogits.ndim == 2:
        dlogits = dlogits[None]
    grads = {}
    top = cache["top"]
    d, r = config.d_model, config.resolution
    grads["head.weight"] = top.reshape(-1, d).T @ dlogits.reshape(-1, r)
    grads["head.bias"] = dlogits.sum(axis=(0, 1))
    dh = dlogits @ params["head.weight"].T

    if config.use_transformer:
        for i in reversed(range(config.n_layers)):
            dh = _decoder_layer_backward(dh, params, i, cache["layers"][i], config.n_heads, grads)

    emb = cache["emb"]
    if config.use_tcn:
        last = len(config.tcn_dilations) - 1
        for i in reversed(range(len(config.tcn_dilations))):
            h_in, pre = cache["tcn"][i]
            if i != last:
                dh = dh * (pre > 0)
            dh, grads[f"tcn.{i}.weight"], grads[f"tcn.{i}.bias"] = _causal_conv_backward(
                dh, h_in, params[f"tcn.{i}.weight"], config.tcn_dilations[i])
    else:
        c = emb.shape[-1]
        grads["lift.weight"] = emb.reshape(-1, c).T @ dh.reshape(-1, d)
        grads["lift.bias"] = dh.sum(axis=(0, 1))
    return {name: grads[name] for name in param_shapes(config)}


# ---------------------------------------------------------------------------
# checkpoint file
# ---------------------------------------------------------------------------

MAGIC = b"WAFERGPT"
FORMAT_VERSION = 1


def save_checkpoint(path, params: dict, config: ModelConfig, metadata: Optional[dict] = None) -> None:
    """Write a versioned binary checkpoint.

    Layout: magic (8 bytes), format version (u32 LE), header length (u32 LE),
    UTF-8 JSON header ``{"config", "metadata", "tensors": [[name, shape], ...]}``,
    then every tensor in declaration order as little-endian float64.
    """
    shapes = param_shapes(config)
    for name, shape in shapes.items():
        if name not in params or params[name].shape != tuple(shape):
            raise CheckpointError(f"parameter {name!r} missing or mis-shaped")
    header = {
        "config": config.to_dict(),
        "metadata": metadata or {},
        "tensors": [[name, list(shape)] for name, shape in shapes.items()],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(blob)))
        fh.write(blob)
        for name in shapes:
            fh.write(np.ascontiguousarray(params[name], dtype="<f8").tobytes())


def load_checkpoint(path, expected: Optional[ModelConfig] = None):
    """Read a checkpoint. Returns ``(params, config, metadata)``.

    Raises ``CheckpointError`` on a bad magic/version, truncated data, tensor
    index that disagrees with the stored config, or a config different from
    ``expected``.
    """
    raw = Path(path).read_bytes()
    if raw[:len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    off = len(MAGIC)
    if len(raw) < off + 8:
        raise CheckpointError(f"{path}: truncated header")
    version, hlen = struct.unpack_from("<II", raw, off)
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {version}")
    off += 8
    try:
        header = json.loads(raw[off:off + hlen].decode("utf-8"))
        config = ModelConfig.from_dict(header["config"])
    except (ValueError, KeyError, TypeError) as exc:
        raise CheckpointError(f"{path}: bad header ({exc})") from None
    if expected is not None and expected != config:
        raise CheckpointError(f"{path}: config mismatch")
    off += hlen
    shapes = param_shapes(config)
    index = [(n, tuple(s)) for n, s in header["tensors"]]
    if index != list(shapes.items()):
        raise CheckpointError(f"{path}: tensor index does not match config")
    params = {}
    for name, shape in index:
        count = int(np.prod(shape))
        if len(raw) < off + 8 * count:
            raise CheckpointError(f"{path}: truncated tensor {name}")
        params[name] = np.frombuffer(raw, dtype="<f8", count=count, offset=off).reshape(shape).astype(np.float64)
        off += 8 * count
    if off != len(raw):
        raise CheckpointError(f"{path}: trailing bytes")
    return params, config, header.get("metadata", {})
