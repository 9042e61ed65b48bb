"""From-scratch U-Net for pixel-wise drop regression, with analytic gradients.

Architecture (base width 16): two 3x3 conv + ReLU blocks per stage, 2x2 max
pooling on the way down, nearest-neighbor upsampling plus channel
concatenation with the matching encoder output on the way up, and a linear
1x1 head. Input is (3, H, W) with H and W divisible by 4; output is (1, H, W).

Everything is float64 numpy. The public API uses channel-first (C, H, W)
layout; internally activations live in channel-last layout so every
convolution reduces to one large BLAS matmul over assembled 3x3 neighborhood
columns, which is what makes CPU training and millisecond inference feasible.
The backward pass is the exact adjoint of the forward computation: ReLU masks
from cached activation signs, max pooling routes gradients to the cached
argmax, upsampling sums each 2x2 replication block, concatenation splits by
channel.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from . import npyio

__all__ = [
    "ConvSpec",
    "ConvLayer",
    "UNetParams",
    "CheckpointError",
    "layer_specs",
    "he_init",
    "conv2d",
    "forward",
    "forward_batch",
    "backward",
    "backward_batch",
    "predict_batch",
    "save_checkpoint",
    "load_checkpoint",
]

CHECKPOINT_FORMAT_VERSION = 1
MANIFEST_FILE = "manifest.json"


class CheckpointError(RuntimeError):
    """Checkpoint directory is missing, inconsistent, or from an unknown format."""


@dataclass(frozen=True)
class ConvSpec:
    name: str
    in_channels: int
    out_channels: int
    kernel: int = 3


def layer_specs(in_channels: int = 3, base: int = 16) -> tuple[ConvSpec, ...]:
    """Conv layer table for a given input width and base channel count.

    Decoder inputs include the concatenated skip channels, hence 4*base+2*base
    and 2*base+base.
    """
    b = base
    return (
        ConvSpec("enc1_1", in_channels, b),
        ConvSpec("enc1_2", b, b),
        ConvSpec("enc2_1", b, 2 * b),
        ConvSpec("enc2_2", 2 * b, 2 * b),
        ConvSpec("mid_1", 2 * b, 4 * b),
        ConvSpec("mid_2", 4 * b, 4 * b),
        ConvSpec("dec2_1", 4 * b + 2 * b, 2 * b),
        ConvSpec("dec2_2", 2 * b, 2 * b),
        ConvSpec("dec1_1", 2 * b + b, b),
        ConvSpec("dec1_2", b, b),
        ConvSpec("head", b, 1, kernel=1),
    )


@dataclass
class ConvLayer:
    weight: np.ndarray  # (out, in, k, k)
    bias: np.ndarray  # (out,)


def he_init(rng: np.random.Generator, spec: ConvSpec) -> ConvLayer:
    """Weights ~ N(0, 2/fan_in) with fan_in = in_channels * k^2; biases zero."""
    fan_in = spec.in_channels * spec.kernel * spec.kernel
    std = np.sqrt(2.0 / fan_in)
    weight = rng.normal(
        0.0, std, size=(spec.out_channels, spec.in_channels, spec.kernel, spec.kernel)
    )
    bias = np.zeros(spec.out_channels)
    return ConvLayer(weight=weight, bias=bias)


@dataclass
class UNetParams:
    in_channels: int
    base: int
    layers: dict[str, ConvLayer]

    @classmethod
    def init(
        cls, rng: np.random.Generator, in_channels: int = 3, base: int = 16
    ) -> "UNetParams":
        layers = {s.name: he_init(rng, s) for s in layer_specs(in_channels, base)}
        return cls(in_channels=in_channels, base=base, layers=layers)

    def specs(self) -> tuple[ConvSpec, ...]:
        return layer_specs(self.in_channels, self.base)

    def validate(self) -> None:
        for spec in self.specs():
            if spec.name not in self.layers:
                raise ValueError(f"missing layer {spec.name!r}")
            layer = self.layers[spec.name]
            expect_w = (spec.out_channels, spec.in_channels, spec.kernel, spec.kernel)
            if layer.weight.shape != expect_w:
                raise ValueError(
                    f"{spec.name}: weight shape {layer.weight.shape}, expected {expect_w}"
                )
            if layer.bias.shape != (spec.out_channels,):
                raise ValueError(
                    f"{spec.name}: bias shape {layer.bias.shape}, "
                    f"expected {(spec.out_channels,)}"
                )
            if not (
                np.isfinite(layer.weight).all() and np.isfinite(layer.bias).all()
            ):
                raise ValueError(f"{spec.name}: non-finite parameter values")

    def arrays(self) -> dict[str, np.ndarray]:
        """Flat view of all parameter arrays, in a fixed order. Shares memory."""
        out = {}
        for spec in self.specs():
            layer = self.layers[spec.name]
            out[f"{spec.name}.weight"] = layer.weight
            out[f"{spec.name}.bias"] = layer.bias
        return out

    def copy(self) -> "UNetParams":
        layers = {
            name: ConvLayer(l.weight.copy(), l.bias.copy())
            for name, l in self.layers.items()
        }
        return UNetParams(in_channels=self.in_channels, base=self.base, layers=layers)


# ---------------------------------------------------------------------------
# primitive ops. Internal activation layout is channel-last (N, H, W, C), in
# the dtype of the incoming batch (float64 by default, float32 inside the
# training loop for speed).
#
# A 3x3 conv is one large matmul: the zero-padded input, flattened to
# (N*(H+2)*(W+2), C), is multiplied against all nine kernel taps laid out as
# column blocks of a (C, 9*O) matrix; the per-tap products are then summed
# through nine shifted slices. The backward pass reuses the same machinery:
# the input gradient is the identical conv with a channel-transposed,
# spatially flipped kernel on the zero-padded output gradient, and each
# weight-tap gradient is one matmul of the flattened padded input against
# the flattened padded gradient at the tap's row offset (the zero border
# rows/columns annihilate every misaligned boundary term). Nothing here
# moves data with small strides, which is what makes CPU training and
# millisecond inference feasible; the padded border costs ~8% wasted flops.


def _row_kernels(weight: np.ndarray, dtype) -> np.ndarray:
    """(O, C, 3, 3) kernel as three (C, 3*O) matrices, one per kernel row,
    columns ordered (dx, out)."""
    taps = weight.transpose(2, 3, 1, 0).astype(dtype)  # (ky, kx, C, O)
    o = weight.shape[0]
    return [
        np.ascontiguousarray(taps[dy].transpose(1, 0, 2)).reshape(-1, 3 * o)
        for dy in range(3)
    ]


def _padded(x: np.ndarray) -> np.ndarray:
    n, h, w, c = x.shape
    xp = np.zeros((n, h + 2, w + 2, c), dtype=x.dtype)
    xp[:, 1 : h + 1, 1 : w + 1, :] = x
    return xp


def _conv3_core(xp: np.ndarray, weight: np.ndarray) -> np.ndarray:
    """Same-size 3x3 correlation given an already zero-padded (N,H+2,W+2,C) input.

    One matmul per kernel row: the padded rows dy..dy+H form a (N*H*(W+2), C)
    matrix multiplied against that row's (C, 3*O) tap block; the three
    column-shifted products are then accumulated onto the output.
    """
    n, h2, w2, c = xp.shape
    h, w = h2 - 2, w2 - 2
    o = weight.shape[0]
    kernels = _row_kernels(weight, xp.dtype)
    out = np.empty((n * h, w, o), dtype=xp.dtype)
    for dy in range(3):
        rows = xp[:, dy : dy + h, :, :]
        if n > 1:
            rows = np.ascontiguousarray(rows)
        prod = (rows.reshape(-1, c) @ kernels[dy]).reshape(n * h, w2, 3, o)
        for dx in range(3):
            if dy == 0 and dx == 0:
                out[...] = prod[:, dx : dx + w, dx, :]
            else:
                out += prod[:, dx : dx + w, dx, :]
    return out.reshape(n, h, w, o)


def _conv_fwd(x: np.ndarray, layer: ConvLayer, cache: dict | None, name: str):
    """Shape-preserving conv on (N, H, W, C); caches the padded input for backward."""
    w, b = layer.weight, layer.bias
    k = w.shape[-1]
    if x.shape[-1] != w.shape[1]:
        raise ValueError(f"input has {x.shape[-1]} channels, layer expects {w.shape[1]}")
    n, h, ww, c = x.shape
    if k == 1:
        flat = x.reshape(n * h * ww, c)
        if cache is not None:
            cache[name + ".in"] = flat
        out = flat @ w[:, :, 0, 0].T.astype(x.dtype)
        out += b.astype(x.dtype)
        return out.reshape(n, h, ww, -1)
    xp = _padded(x)
    out = _conv3_core(xp, w)
    out += b.astype(x.dtype)
    if cache is not None:
        cache[name + ".xp"] = xp
    return out


def _conv_bwd(layer: ConvLayer, cache: dict, name: str, grad_out: np.ndarray):
    """Gradients of _conv_fwd: (d_weight, d_bias, d_input), all exact adjoints."""
    w = layer.weight
    o, i, k, _ = w.shape
    n, h, ww = grad_out.shape[:3]
    dt = grad_out.dtype
    db = grad_out.sum(axis=(0, 1, 2))
    if k == 1:
        flat = cache[name + ".in"]
        gflat = grad_out.reshape(n * h * ww, o)
        dw = (gflat.T @ flat)[:, :, None, None]
        dx = (gflat @ w[:, :, 0, 0].astype(dt)).reshape(n, h, ww, i)
        return dw, db, dx
    xp = cache[name + ".xp"]
    gp = _padded(grad_out)
    w2 = ww + 2
    xp2 = xp.reshape(-1, i)
    gp2 = gp.reshape(-1, o)
    m = xp2.shape[0]
    # dL/dw[o,c,dy,dx] pairs padded-input row m with padded-gradient row
    # m - off; misaligned boundary pairs hit a zero pad row/column on one side
    dw = np.empty((o, i, 3, 3), dtype=dt)
    for dy in range(3):
        for dx_ in range(3):
            off = (dy - 1) * w2 + (dx_ - 1)
            lo, hi = max(0, off), max(0, -off)
            dw[:, :, dy, dx_] = gp2[lo - off : m - hi - off].T @ xp2[lo : m - hi]
    w_rot = w.transpose(1, 0, 2, 3)[:, :, ::-1, ::-1]
    dx = _conv3_core(gp, w_rot)
    return dw, db, dx


def _maxpool_fwd(x: np.ndarray):
    n, h, w, c = x.shape
    blocks = np.stack(
        [x[:, 0::2, 0::2, :], x[:, 0::2, 1::2, :], x[:, 1::2, 0::2, :], x[:, 1::2, 1::2, :]],
        axis=-1,
    )
    idx = blocks.argmax(axis=-1)  # first maximum wins ties, deterministically
    out = np.take_along_axis(blocks, idx[..., None], axis=-1)[..., 0]
    return out, idx


def _maxpool_bwd(grad_out: np.ndarray, idx: np.ndarray) -> np.ndarray:
    n, hh, wW, c = grad_out.shape
    blocks = np.zeros((n, hh, wW, c, 4), dtype=grad_out.dtype)
    np.put_along_axis(blocks, idx[..., None], grad_out[..., None], axis=-1)
    g = np.zeros((n, hh * 2, wW * 2, c))
    g[:, 0::2, 0::2, :] = blocks[..., 0]
    g[:, 0::2, 1::2, :] = blocks[..., 1]
    g[:, 1::2, 0::2, :] = blocks[..., 2]
    g[:, 1::2, 1::2, :] = blocks[..., 3]
    return g


def _upsample_fwd(x: np.ndarray) -> np.ndarray:
    return np.repeat(np.repeat(x, 2, axis=1), 2, axis=2)


def _upsample_bwd(grad_out: np.ndarray) -> np.ndarray:
    n, h, w, c = grad_out.shape
    return grad_out.reshape(n, h // 2, 2, w // 2, 2, c).sum(axis=(2, 4))


# ---------------------------------------------------------------------------
# network forward / backward

# ActivationCache: plain dict of per-layer column matrices, ReLU masks, and
# pool argmax indices, keyed by layer name. Produced by forward_batch,
# consumed by backward_batch.
ActivationCache = dict


def _conv_relu(params, name, x, cache, keep):
    z = _conv_fwd(x, params.layers[name], cache if keep else None, name)
    if keep:
        cache[name + ".mask"] = z > 0
    np.maximum(z, 0.0, out=z)
    return z


def _run_forward(params: UNetParams, x: np.ndarray, keep_cache: bool):
    cache: ActivationCache = {}
    e1 = _conv_relu(params, "enc1_1", x, cache, keep_cache)
    e1 = _conv_relu(params, "enc1_2", e1, cache, keep_cache)
    p1, idx1 = _maxpool_fwd(e1)
    e2 = _conv_relu(params, "enc2_1", p1, cache, keep_cache)
    e2 = _conv_relu(params, "enc2_2", e2, cache, keep_cache)
    p2, idx2 = _maxpool_fwd(e2)
    m = _conv_relu(params, "mid_1", p2, cache, keep_cache)
    m = _conv_relu(params, "mid_2", m, cache, keep_cache)
    c2 = np.concatenate([_upsample_fwd(m), e2], axis=-1)
    d2 = _conv_relu(params, "dec2_1", c2, cache, keep_cache)
    d2 = _conv_relu(params, "dec2_2", d2, cache, keep_cache)
    c1 = np.concatenate([_upsample_fwd(d2), e1], axis=-1)
    d1 = _conv_relu(params, "dec1_1", c1, cache, keep_cache)
    d1 = _conv_relu(params, "dec1_2", d1, cache, keep_cache)
    y = _conv_fwd(d1, params.layers["head"], cache if keep_cache else None, "head")
    if keep_cache:
        cache["pool1.idx"] = idx1
        cache["pool2.idx"] = idx2
    return y, cache


def _check_input(params: UNetParams, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    if x.dtype not in (np.float32, np.float64):
        x = x.astype(np.float64)
    if x.ndim != 4 or x.shape[1] != params.in_channels:
        raise ValueError(
            f"expected (N, {params.in_channels}, H, W) input, got shape {x.shape}"
        )
    h, w = x.shape[2], x.shape[3]
    if h % 4 or w % 4 or h < 4 or w < 4:
        raise ValueError(f"H and W must be multiples of 4, got {h}x{w}")
    return x


def forward_batch(params: UNetParams, x: np.ndarray, keep_cache: bool = True):
    """Run the network on a (N, C, H, W) batch; returns (y, cache)."""
    x = _check_input(params, x)
    x_cl = np.ascontiguousarray(x.transpose(0, 2, 3, 1))
    y_cl, cache = _run_forward(params, x_cl, keep_cache)
    cache["batch_shape"] = x.shape
    y = np.ascontiguousarray(y_cl.transpose(0, 3, 1, 2))
    return y, cache


def forward(params: UNetParams, x: np.ndarray):
    """Single-sample forward: (C, H, W) -> ((1, H, W), cache)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ValueError(f"expected (C, H, W) input, got shape {x.shape}")
    y, cache = forward_batch(params, x[None])
    return y[0], cache


def _conv_relu_bwd(params, name, grad, cache, grads):
    # every gradient reaching here is freshly allocated, so masking in place
    # cannot corrupt another consumer
    np.multiply(grad, cache[name + ".mask"], out=grad)
    dw, db, dx = _conv_bwd(params.layers[name], cache, name, grad)
    grads[name + ".weight"] = dw
    grads[name + ".bias"] = db
    return dx


def backward_batch(params: UNetParams, cache: ActivationCache, grad_y: np.ndarray):
    """Exact gradients of forward_batch; returns ({name: grad}, grad_x)."""
    if "batch_shape" not in cache or "head.in" not in cache:
        raise ValueError("cache does not come from a matching forward_batch call")
    grad_y = np.asarray(grad_y)
    if grad_y.dtype not in (np.float32, np.float64):
        grad_y = grad_y.astype(np.float64)
    expected = (cache["batch_shape"][0], 1) + tuple(cache["batch_shape"][2:])
    if grad_y.shape != expected:
        raise ValueError(f"grad_y shape {grad_y.shape}, expected {expected}")
    b2 = 2 * params.base
    b4 = 4 * params.base

    grads: dict[str, np.ndarray] = {}
    g = np.ascontiguousarray(grad_y.transpose(0, 2, 3, 1))
    dw, db, g = _conv_bwd(params.layers["head"], cache, "head", g)
    grads["head.weight"] = dw
    grads["head.bias"] = db
    g = _conv_relu_bwd(params, "dec1_2", g, cache, grads)
    g = _conv_relu_bwd(params, "dec1_1", g, cache, grads)
    g_e1_skip = g[..., b2:]
    g = _upsample_bwd(g[..., :b2])
    g = _conv_relu_bwd(params, "dec2_2", g, cache, grads)
    g = _conv_relu_bwd(params, "dec2_1", g, cache, grads)
    g_e2_skip = g[..., b4:]
    g = _upsample_bwd(g[..., :b4])
    g = _conv_relu_bwd(params, "mid_2", g, cache, grads)
    g = _conv_relu_bwd(params, "mid_1", g, cache, grads)
    g = _maxpool_bwd(g, cache["pool2.idx"]) + g_e2_skip
    g = _conv_relu_bwd(params, "enc2_2", g, cache, grads)
    g = _conv_relu_bwd(params, "enc2_1", g, cache, grads)
    g = _maxpool_bwd(g, cache["pool1.idx"]) + g_e1_skip
    g = _conv_relu_bwd(params, "enc1_2", g, cache, grads)
    g = _conv_relu_bwd(params, "enc1_1", g, cache, grads)
    return grads, np.ascontiguousarray(g.transpose(0, 3, 1, 2))


def backward(params: UNetParams, cache: ActivationCache, grad_y: np.ndarray):
    """Single-sample backward matching forward(); grad_y is (1, H, W)."""
    grad_y = np.asarray(grad_y, dtype=np.float64)
    grads, gx = backward_batch(params, cache, grad_y[None])
    return grads, gx[0]


def conv2d(x: np.ndarray, layer: ConvLayer) -> np.ndarray:
    """Shape-preserving cross-correlation of a (C, H, W) tensor with one layer."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ValueError(f"expected (C, H, W) input, got shape {x.shape}")
    x_cl = np.ascontiguousarray(x.transpose(1, 2, 0))[None]
    out = _conv_fwd(x_cl, layer, None, "")
    return np.ascontiguousarray(out[0].transpose(2, 0, 1))


def predict_batch(
    params: UNetParams, x: np.ndarray, batch_size: int = 16
) -> np.ndarray:
    """Inference over (N, C, H, W) in chunks; returns (N, 1, H, W)."""
    x = np.asarray(x, dtype=np.float64)
    outs = []
    for start in range(0, x.shape[0], batch_size):
        y, _ = forward_batch(params, x[start : start + batch_size], keep_cache=False)
        outs.append(y)
    return np.concatenate(outs, axis=0)


# ---------------------------------------------------------------------------
# checkpoint serialization


def save_checkpoint(params: UNetParams, path, metadata: dict | None = None) -> None:
    """Write parameters as one f8 .npy file per array plus a JSON manifest."""
    params.validate()
    os.makedirs(path, exist_ok=True)
    arrays = params.arrays()
    manifest = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "kind": "unet-checkpoint",
        "in_channels": params.in_channels,
        "base_channels": params.base,
        "layers": [
            {
                "name": s.name,
                "in_channels": s.in_channels,
                "out_channels": s.out_channels,
                "kernel": s.kernel,
            }
            for s in params.specs()
        ],
        "arrays": {
            key: {"file": key + ".npy", "shape": list(arr.shape)}
            for key, arr in arrays.items()
        },
        "metadata": metadata or {},
    }
    for key, arr in arrays.items():
        npyio.save_npy(os.path.join(path, key + ".npy"), arr, dtype="f8")
    with open(os.path.join(path, MANIFEST_FILE), "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def load_checkpoint(path) -> UNetParams:
    """Load and validate a checkpoint directory; raises CheckpointError on any
    missing file, shape mismatch, or unknown format version."""
    manifest_path = os.path.join(path, MANIFEST_FILE)
    try:
        with open(manifest_path) as fh:
            manifest = json.load(fh)
    except OSError as exc:
        raise CheckpointError(f"cannot read manifest: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"manifest is not valid JSON: {exc}") from exc

    version = manifest.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(f"unknown checkpoint format version: {version!r}")
    try:
        in_channels = int(manifest["in_channels"])
        base = int(manifest["base_channels"])
        listed = manifest["arrays"]
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"manifest is missing required fields: {exc}") from exc

    layers: dict[str, ConvLayer] = {}
    for spec in layer_specs(in_channels, base):
        layer_arrays = {}
        for part, expect_shape in (
            ("weight", (spec.out_channels, spec.in_channels, spec.kernel, spec.kernel)),
            ("bias", (spec.out_channels,)),
        ):
            key = f"{spec.name}.{part}"
            if key not in listed:
                raise CheckpointError(f"manifest lists no array {key!r}")
            entry = listed[key]
            if tuple(entry.get("shape", ())) != expect_shape:
                raise CheckpointError(
                    f"{key}: manifest shape {entry.get('shape')} does not match "
                    f"architecture {list(expect_shape)}"
                )
            file_path = os.path.join(path, entry["file"])
            try:
                arr = npyio.load_npy(file_path)
            except (OSError, npyio.NpyFormatError) as exc:
                raise CheckpointError(f"cannot load {key}: {exc}") from exc
            if arr.shape != expect_shape:
                raise CheckpointError(
                    f"{key}: array shape {arr.shape} does not match {expect_shape}"
                )
            layer_arrays[part] = arr
        layers[spec.name] = ConvLayer(**layer_arrays)

    params = UNetParams(in_channels=in_channels, base=base, layers=layers)
    try:
        params.validate()
    except ValueError as exc:
        raise CheckpointError(str(exc)) from exc
    return params
