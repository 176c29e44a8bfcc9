"""Translate a torchvision VisionTransformer into a patch-feature graph.

The emitted graph takes one [1, 3, S, S] float32 image scaled to [0, 1],
applies the channel normalization baked in as initializers, and returns
the encoder's patch tokens (class token stripped) as [1, C, H', W']
where H' = W' = S / patch. Attention is decomposed into MatMul, Softmax
and shape ops; GELU uses the exact erf form, matching torch eval mode.
"""

from __future__ import annotations

import math
from typing import Sequence, Tuple

import numpy as np
import torch

from .onnx_writer import GraphDef

INPUT_NAME = "image"
OUTPUT_NAME = "features"


def _np(t: torch.Tensor) -> np.ndarray:
    return t.detach().cpu().numpy().astype(np.float32)


def _i64(values) -> np.ndarray:
    return np.asarray(list(values), dtype=np.int64)


def build_graph(
    model: torch.nn.Module,
    mean: Sequence[float],
    std: Sequence[float],
) -> Tuple[bytes, dict]:
    """Serialize `model`'s patch-feature forward pass.

    Returns (model_bytes, meta) with meta holding channels / grid /
    patch so the caller can fill in the manifest without re-parsing.
    """
    size = int(model.image_size)
    patch = int(model.patch_size)
    hidden = int(model.hidden_dim)
    grid = size // patch
    tokens = grid * grid + 1
    heads = int(model.encoder.layers[0].self_attention.num_heads)
    if hidden % heads:
        raise ValueError(f"hidden dim {hidden} not divisible by {heads} heads")
    head_dim = hidden // heads

    gd = GraphDef("vit_patch_features")

    norm_mean = gd.initializer(
        "norm_mean", np.asarray(mean, np.float32).reshape(1, 3, 1, 1)
    )
    norm_std = gd.initializer(
        "norm_std", np.asarray(std, np.float32).reshape(1, 3, 1, 1)
    )
    x = gd.add("Sub", [INPUT_NAME, norm_mean], ["x_centered"])
    x = gd.add("Div", [x, norm_std], ["x_norm"])

    conv_w = gd.initializer("conv_w", _np(model.conv_proj.weight))
    conv_b = gd.initializer("conv_b", _np(model.conv_proj.bias))
    x = gd.add("Conv", [x, conv_w, conv_b], ["patch_embed"], strides=[patch, patch])

    flat_shape = gd.initializer("tok_flat_shape", _i64([1, hidden, grid * grid]))
    x = gd.add("Reshape", [x, flat_shape], ["tok_flat"])
    x = gd.add("Transpose", [x], ["tok_nlc"], perm=[0, 2, 1])

    cls = gd.initializer("class_token", _np(model.class_token))
    x = gd.add("Concat", [cls, x], ["tok_cat"], axis=1)
    pos = gd.initializer("pos_embedding", _np(model.encoder.pos_embedding))
    x = gd.add("Add", [x, pos], ["tok_pos"])

    # Shared shape/constant tensors for all encoder blocks.
    qkv_bounds = [
        gd.initializer(f"qkv_cut{j}", _i64([j * hidden])) for j in range(4)
    ]
    axis2 = gd.initializer("axis2", _i64([2]))
    heads_shape = gd.initializer("heads_shape", _i64([1, tokens, heads, head_dim]))
    merge_shape = gd.initializer("merge_shape", _i64([1, tokens, hidden]))
    attn_scale = gd.initializer(
        "attn_scale", np.float32(1.0 / math.sqrt(head_dim))
    )
    half = gd.initializer("half", np.float32(0.5))
    one = gd.initializer("one", np.float32(1.0))
    sqrt2 = gd.initializer("sqrt2", np.float32(math.sqrt(2.0)))

    for i, blk in enumerate(model.encoder.layers):
        p = f"b{i}_"
        attn = blk.self_attention
        ln1_w = gd.initializer(p + "ln1_w", _np(blk.ln_1.weight))
        ln1_b = gd.initializer(p + "ln1_b", _np(blk.ln_1.bias))
        h = gd.add(
            "LayerNormalization", [x, ln1_w, ln1_b], [p + "ln1"],
            axis=-1, epsilon=float(blk.ln_1.eps),
        )

        # in_proj_weight is (3D, D); transpose once so MatMul maps (1,T,D)->(1,T,3D)
        qkv_w = gd.initializer(p + "qkv_w", _np(attn.in_proj_weight).T.copy())
        qkv_b = gd.initializer(p + "qkv_b", _np(attn.in_proj_bias))
        qkv = gd.add("MatMul", [h, qkv_w], [p + "qkv_mm"])
        qkv = gd.add("Add", [qkv, qkv_b], [p + "qkv"])

        split = []
        for name, j in (("q", 0), ("k", 1), ("v", 2)):
            part = gd.add(
                "Slice",
                [qkv, qkv_bounds[j], qkv_bounds[j + 1], axis2],
                [p + name],
            )
            part = gd.add("Reshape", [part, heads_shape], [p + name + "_h"])
            part = gd.add("Transpose", [part], [p + name + "_t"], perm=[0, 2, 1, 3])
            split.append(part)
        q, k, v = split

        q = gd.add("Mul", [q, attn_scale], [p + "q_scaled"])
        kt = gd.add("Transpose", [k], [p + "k_T"], perm=[0, 1, 3, 2])
        scores = gd.add("MatMul", [q, kt], [p + "scores"])
        probs = gd.add("Softmax", [scores], [p + "probs"], axis=-1)
        ctx = gd.add("MatMul", [probs, v], [p + "ctx"])
        ctx = gd.add("Transpose", [ctx], [p + "ctx_t"], perm=[0, 2, 1, 3])
        ctx = gd.add("Reshape", [ctx, merge_shape], [p + "ctx_m"])

        out_w = gd.initializer(p + "out_w", _np(attn.out_proj.weight).T.copy())
        out_b = gd.initializer(p + "out_b", _np(attn.out_proj.bias))
        proj = gd.add("MatMul", [ctx, out_w], [p + "proj_mm"])
        proj = gd.add("Add", [proj, out_b], [p + "proj"])
        x = gd.add("Add", [x, proj], [p + "res1"])

        ln2_w = gd.initializer(p + "ln2_w", _np(blk.ln_2.weight))
        ln2_b = gd.initializer(p + "ln2_b", _np(blk.ln_2.bias))
        y = gd.add(
            "LayerNormalization", [x, ln2_w, ln2_b], [p + "ln2"],
            axis=-1, epsilon=float(blk.ln_2.eps),
        )

        linears = [m for m in blk.mlp if isinstance(m, torch.nn.Linear)]
        if len(linears) != 2:
            raise ValueError(f"block {i}: expected 2 linear layers in mlp")
        fc1, fc2 = linears
        w1 = gd.initializer(p + "mlp_w1", _np(fc1.weight).T.copy())
        b1 = gd.initializer(p + "mlp_b1", _np(fc1.bias))
        w2 = gd.initializer(p + "mlp_w2", _np(fc2.weight).T.copy())
        b2 = gd.initializer(p + "mlp_b2", _np(fc2.bias))

        t = gd.add("MatMul", [y, w1], [p + "fc1_mm"])
        t = gd.add("Add", [t, b1], [p + "fc1"])
        # exact GELU: t * 0.5 * (1 + erf(t / sqrt(2)))
        e = gd.add("Div", [t, sqrt2], [p + "gelu_div"])
        e = gd.add("Erf", [e], [p + "gelu_erf"])
        e = gd.add("Add", [e, one], [p + "gelu_1p"])
        t2 = gd.add("Mul", [t, e], [p + "gelu_mul"])
        t2 = gd.add("Mul", [t2, half], [p + "gelu"])
        t3 = gd.add("MatMul", [t2, w2], [p + "fc2_mm"])
        t3 = gd.add("Add", [t3, b2], [p + "fc2"])
        x = gd.add("Add", [x, t3], [p + "res2"])

    ln_w = gd.initializer("ln_final_w", _np(model.encoder.ln.weight))
    ln_b = gd.initializer("ln_final_b", _np(model.encoder.ln.bias))
    x = gd.add(
        "LayerNormalization", [x, ln_w, ln_b], ["encoded"],
        axis=-1, epsilon=float(model.encoder.ln.eps),
    )

    # Drop the class token, then lay tokens back out on the patch grid.
    strip_start = gd.initializer("strip_start", _i64([1]))
    strip_end = gd.initializer("strip_end", _i64([tokens]))
    axis1 = gd.initializer("axis1", _i64([1]))
    x = gd.add("Slice", [x, strip_start, strip_end, axis1], ["patch_tokens"])
    x = gd.add("Transpose", [x], ["patch_ncl"], perm=[0, 2, 1])
    out_shape = gd.initializer("out_shape", _i64([1, hidden, grid, grid]))
    gd.add("Reshape", [x, out_shape], [OUTPUT_NAME])

    blob = gd.serialize(INPUT_NAME, [1, 3, size, size], OUTPUT_NAME, [1, hidden, grid, grid])
    meta = {"channels": hidden, "grid": grid, "patch": patch, "tokens": tokens}
    return blob, meta
