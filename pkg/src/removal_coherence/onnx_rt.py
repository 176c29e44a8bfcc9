"""Self-contained runtime for exported feature-extractor graphs.

Parses the protobuf wire encoding of the standard neural-network
interchange format directly (no protobuf dependency) and executes the
graph with numpy. The operator set covers convolutional patch
embeddings plus transformer encoder blocks: Conv, MatMul/Gemm,
LayerNormalization, Softmax, Erf-based GELU, and the usual shape
plumbing. Everything is deterministic single-threaded numpy.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import special

from .errors import FormatError

_DTYPES = {1: np.float32, 6: np.int32, 7: np.int64, 9: np.bool_, 11: np.float64}


class _Reader:
    __slots__ = ("buf", "pos", "end")

    def __init__(self, buf: bytes, start: int = 0, end: Optional[int] = None):
        self.buf = buf
        self.pos = start
        self.end = len(buf) if end is None else end

    def at_end(self) -> bool:
        return self.pos >= self.end

    def varint(self) -> int:
        result = 0
        shift = 0
        while True:
            if self.pos >= self.end:
                raise FormatError("truncated varint")
            b = self.buf[self.pos]
            self.pos += 1
            result |= (b & 0x7F) << shift
            if not b & 0x80:
                return result
            shift += 7
            if shift > 63:
                raise FormatError("varint exceeds 64 bits")

    def signed(self) -> int:
        v = self.varint()
        return v - (1 << 64) if v >= (1 << 63) else v

    def chunk(self) -> bytes:
        n = self.varint()
        if self.pos + n > self.end:
            raise FormatError("truncated length-delimited field")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def fixed32(self) -> float:
        if self.pos + 4 > self.end:
            raise FormatError("truncated fixed32 field")
        (v,) = struct.unpack_from("<f", self.buf, self.pos)
        self.pos += 4
        return v

    def skip(self, wire: int) -> None:
        if wire == 0:
            self.varint()
        elif wire == 1:
            if self.pos + 8 > self.end:
                raise FormatError("truncated fixed64 field")
            self.pos += 8
        elif wire == 2:
            self.chunk()
        elif wire == 5:
            if self.pos + 4 > self.end:
                raise FormatError("truncated fixed32 field")
            self.pos += 4
        else:
            raise FormatError(f"unsupported wire type {wire}")

    def fields(self):
        while not self.at_end():
            key = self.varint()
            yield key >> 3, key & 7


def _packed_varints(payload: bytes, signed: bool) -> List[int]:
    r = _Reader(payload)
    out = []
    while not r.at_end():
        out.append(r.signed() if signed else r.varint())
    return out


def _packed_floats(payload: bytes) -> List[float]:
    if len(payload) % 4:
        raise FormatError("packed float payload not a multiple of 4 bytes")
    return [v[0] for v in struct.iter_unpack("<f", payload)]


@dataclass
class _Tensor:
    name: str = ""
    dims: List[int] = field(default_factory=list)
    data_type: int = 0
    raw: bytes = b""
    floats: List[float] = field(default_factory=list)
    ints: List[int] = field(default_factory=list)

    def to_array(self) -> np.ndarray:
        if self.data_type not in _DTYPES:
            raise FormatError(
                f"tensor {self.name!r}: unsupported element type {self.data_type}"
            )
        dtype = _DTYPES[self.data_type]
        count = int(np.prod(self.dims)) if self.dims else 1
        if self.raw:
            arr = np.frombuffer(self.raw, dtype=dtype)
        elif self.floats:
            arr = np.asarray(self.floats, dtype=dtype)
        elif self.ints:
            arr = np.asarray(self.ints, dtype=dtype)
        else:
            arr = np.zeros(count, dtype=dtype)
        if arr.size != count:
            raise FormatError(
                f"tensor {self.name!r}: payload holds {arr.size} values, "
                f"dims {self.dims} require {count}"
            )
        return arr.reshape(self.dims).copy()


def _parse_tensor(buf: bytes) -> _Tensor:
    t = _Tensor()
    r = _Reader(buf)
    for num, wire in r.fields():
        if num == 1:
            if wire == 2:
                t.dims.extend(_packed_varints(r.chunk(), signed=True))
            else:
                t.dims.append(r.signed())
        elif num == 2 and wire == 0:
            t.data_type = r.varint()
        elif num == 4:
            if wire == 2:
                t.floats.extend(_packed_floats(r.chunk()))
            else:
                t.floats.append(r.fixed32())
        elif num == 7:
            if wire == 2:
                t.ints.extend(_packed_varints(r.chunk(), signed=True))
            else:
                t.ints.append(r.signed())
        elif num == 8 and wire == 2:
            t.name = r.chunk().decode("utf-8", "replace")
        elif num == 9 and wire == 2:
            t.raw = r.chunk()
        else:
            r.skip(wire)
    return t


def _parse_attribute(buf: bytes) -> Tuple[str, object]:
    r = _Reader(buf)
    name = ""
    atype = 0
    f_val = None
    i_val = None
    s_val = None
    t_val = None
    floats: List[float] = []
    ints: List[int] = []
    for num, wire in r.fields():
        if num == 1 and wire == 2:
            name = r.chunk().decode("utf-8", "replace")
        elif num == 2 and wire == 5:
            f_val = r.fixed32()
        elif num == 3 and wire == 0:
            i_val = r.signed()
        elif num == 4 and wire == 2:
            s_val = r.chunk().decode("utf-8", "replace")
        elif num == 5 and wire == 2:
            t_val = _parse_tensor(r.chunk()).to_array()
        elif num == 6:
            if wire == 2:
                floats.extend(_packed_floats(r.chunk()))
            else:
                floats.append(r.fixed32())
        elif num == 7:
            if wire == 2:
                ints.extend(_packed_varints(r.chunk(), signed=True))
            else:
                ints.append(r.signed())
        elif num == 20 and wire == 0:
            atype = r.varint()
        else:
            r.skip(wire)
    by_type = {1: f_val, 2: i_val, 3: s_val, 4: t_val, 6: floats, 7: ints}
    if atype in by_type and by_type[atype] is not None:
        return name, by_type[atype]
    for candidate in (t_val, ints or None, floats or None, s_val, i_val, f_val):
        if candidate is not None:
            return name, candidate
    raise FormatError(f"attribute {name!r} carries no value")


@dataclass
class _Node:
    op_type: str = ""
    name: str = ""
    inputs: List[str] = field(default_factory=list)
    outputs: List[str] = field(default_factory=list)
    attrs: Dict[str, object] = field(default_factory=dict)

    def attr(self, name: str, default=None):
        return self.attrs.get(name, default)


def _parse_node(buf: bytes) -> _Node:
    n = _Node()
    r = _Reader(buf)
    for num, wire in r.fields():
        if num == 1 and wire == 2:
            n.inputs.append(r.chunk().decode("utf-8", "replace"))
        elif num == 2 and wire == 2:
            n.outputs.append(r.chunk().decode("utf-8", "replace"))
        elif num == 3 and wire == 2:
            n.name = r.chunk().decode("utf-8", "replace")
        elif num == 4 and wire == 2:
            n.op_type = r.chunk().decode("utf-8", "replace")
        elif num == 5 and wire == 2:
            key, value = _parse_attribute(r.chunk())
            n.attrs[key] = value
        else:
            r.skip(wire)
    return n


@dataclass
class _ValueInfo:
    name: str = ""
    elem_type: int = 0
    shape: List[Optional[int]] = field(default_factory=list)


def _parse_value_info(buf: bytes) -> _ValueInfo:
    vi = _ValueInfo()
    r = _Reader(buf)
    for num, wire in r.fields():
        if num == 1 and wire == 2:
            vi.name = r.chunk().decode("utf-8", "replace")
        elif num == 2 and wire == 2:
            tr = _Reader(r.chunk())
            for tnum, twire in tr.fields():
                if tnum == 1 and twire == 2:  # tensor_type
                    tt = _Reader(tr.chunk())
                    for anum, awire in tt.fields():
                        if anum == 1 and awire == 0:
                            vi.elem_type = tt.varint()
                        elif anum == 2 and awire == 2:  # shape
                            sr = _Reader(tt.chunk())
                            for snum, swire in sr.fields():
                                if snum == 1 and swire == 2:  # dim
                                    dr = _Reader(sr.chunk())
                                    value: Optional[int] = None
                                    for dnum, dwire in dr.fields():
                                        if dnum == 1 and dwire == 0:
                                            value = dr.signed()
                                        else:
                                            dr.skip(dwire)
                                    vi.shape.append(value)
                                else:
                                    sr.skip(swire)
                        else:
                            tt.skip(awire)
                else:
                    tr.skip(twire)
        else:
            r.skip(wire)
    return vi


@dataclass
class _Graph:
    nodes: List[_Node] = field(default_factory=list)
    initializers: List[_Tensor] = field(default_factory=list)
    inputs: List[_ValueInfo] = field(default_factory=list)
    outputs: List[_ValueInfo] = field(default_factory=list)


def _parse_graph(buf: bytes) -> _Graph:
    g = _Graph()
    r = _Reader(buf)
    for num, wire in r.fields():
        if num == 1 and wire == 2:
            g.nodes.append(_parse_node(r.chunk()))
        elif num == 5 and wire == 2:
            g.initializers.append(_parse_tensor(r.chunk()))
        elif num == 11 and wire == 2:
            g.inputs.append(_parse_value_info(r.chunk()))
        elif num == 12 and wire == 2:
            g.outputs.append(_parse_value_info(r.chunk()))
        else:
            r.skip(wire)
    return g


def _parse_model(buf: bytes) -> _Graph:
    r = _Reader(buf)
    graph = None
    for num, wire in r.fields():
        if num == 7 and wire == 2:
            graph = _parse_graph(r.chunk())
        else:
            r.skip(wire)
    if graph is None:
        raise FormatError("no graph found in model file")
    if not graph.nodes:
        raise FormatError("model graph has no nodes")
    if not graph.outputs:
        raise FormatError("model graph declares no outputs")
    return graph


# --------------------------------------------------------------- operators


def _ints(node: _Node, name: str, default: Sequence[int]) -> List[int]:
    v = node.attr(name, list(default))
    return [int(i) for i in v]


def _op_conv(vals, node):
    x, w = vals[0], vals[1]
    bias = vals[2] if len(vals) > 2 else None
    if int(node.attr("group", 1)) != 1:
        raise FormatError("grouped convolution is not supported")
    if any(d != 1 for d in _ints(node, "dilations", (1, 1))):
        raise FormatError("dilated convolution is not supported")
    sh, sw = _ints(node, "strides", (1, 1))
    pads = _ints(node, "pads", (0, 0, 0, 0))
    if x.ndim != 4 or w.ndim != 4:
        raise FormatError("Conv expects 4-D input and weights")
    if any(pads):
        x = np.pad(x, ((0, 0), (0, 0), (pads[0], pads[2]), (pads[1], pads[3])))
    n, c, h, wd = x.shape
    m, c2, kh, kw = w.shape
    if c != c2:
        raise FormatError(f"Conv channel mismatch: input {c}, weights {c2}")
    view = sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw]
    oh, ow = view.shape[2], view.shape[3]
    cols = view.transpose(0, 2, 3, 1, 4, 5).reshape(n, oh * ow, c * kh * kw)
    out = cols @ w.reshape(m, -1).T
    out = out.transpose(0, 2, 1).reshape(n, m, oh, ow)
    if bias is not None:
        out = out + bias.reshape(1, m, 1, 1)
    return out


def _op_gemm(vals, node):
    a, b = vals[0], vals[1]
    if int(node.attr("transA", 0)):
        a = a.T
    if int(node.attr("transB", 0)):
        b = b.T
    out = float(node.attr("alpha", 1.0)) * (a @ b)
    if len(vals) > 2:
        out = out + float(node.attr("beta", 1.0)) * vals[2]
    return out


def _op_reshape(vals, node):
    x, shape = vals[0], [int(v) for v in vals[1]]
    target = []
    for i, d in enumerate(shape):
        if d == 0:
            if i >= x.ndim:
                raise FormatError("Reshape dim 0 refers past input rank")
            target.append(x.shape[i])
        else:
            target.append(d)
    return x.reshape(target)


def _op_slice(vals, node):
    x = vals[0]
    starts = [int(v) for v in vals[1]]
    ends = [int(v) for v in vals[2]]
    axes = [int(v) for v in vals[3]] if len(vals) > 3 else list(range(len(starts)))
    steps = [int(v) for v in vals[4]] if len(vals) > 4 else [1] * len(starts)
    sl = [slice(None)] * x.ndim
    for st, en, ax, sp in zip(starts, ends, axes, steps):
        if sp == 0:
            raise FormatError("Slice step of 0")
        ax = ax % x.ndim
        if sp < 0 and en < -x.shape[ax]:
            sl[ax] = slice(st, None, sp)
        else:
            sl[ax] = slice(st, en, sp)
    return x[tuple(sl)]


def _op_unsqueeze(vals, node):
    x = vals[0]
    axes = [int(v) for v in (vals[1] if len(vals) > 1 else node.attr("axes", []))]
    rank = x.ndim + len(axes)
    for ax in sorted(a % rank for a in axes):
        x = np.expand_dims(x, ax)
    return x


def _op_squeeze(vals, node):
    x = vals[0]
    axes = [int(v) for v in (vals[1] if len(vals) > 1 else node.attr("axes", []))]
    if not axes:
        return np.squeeze(x)
    return np.squeeze(x, axis=tuple(a % x.ndim for a in axes))


def _op_reduce_mean(vals, node):
    x = vals[0]
    if len(vals) > 1:
        axes = [int(v) for v in vals[1]]
    else:
        axes = _ints(node, "axes", [])
    keep = bool(int(node.attr("keepdims", 1)))
    axis = tuple(a % x.ndim for a in axes) if axes else None
    return x.mean(axis=axis, keepdims=keep, dtype=x.dtype)


def _op_softmax(vals, node):
    x = vals[0]
    ax = int(node.attr("axis", -1))
    e = np.exp(x - x.max(axis=ax, keepdims=True))
    return e / e.sum(axis=ax, keepdims=True)


def _op_layer_norm(vals, node):
    x, scale = vals[0], vals[1]
    bias = vals[2] if len(vals) > 2 else None
    ax = int(node.attr("axis", -1)) % x.ndim
    eps = float(node.attr("epsilon", 1e-5))
    dims = tuple(range(ax, x.ndim))
    mean = x.mean(axis=dims, keepdims=True)
    var = x.var(axis=dims, keepdims=True)
    out = (x - mean) / np.sqrt(var + eps) * scale
    if bias is not None:
        out = out + bias
    return out


def _op_cast(vals, node):
    to = int(node.attr("to", 0))
    if to not in _DTYPES:
        raise FormatError(f"Cast to unsupported type {to}")
    return vals[0].astype(_DTYPES[to])


def _op_constant(vals, node):
    value = node.attr("value")
    if not isinstance(value, np.ndarray):
        raise FormatError("Constant node without a tensor value")
    return value


_OPS = {
    "Add": lambda v, n: v[0] + v[1],
    "Sub": lambda v, n: v[0] - v[1],
    "Mul": lambda v, n: v[0] * v[1],
    "Div": lambda v, n: v[0] / v[1],
    "Pow": lambda v, n: np.power(v[0], v[1]),
    "Sqrt": lambda v, n: np.sqrt(v[0]),
    "Erf": lambda v, n: special.erf(v[0]),
    "Relu": lambda v, n: np.maximum(v[0], 0),
    "Tanh": lambda v, n: np.tanh(v[0]),
    "Sigmoid": lambda v, n: 1.0 / (1.0 + np.exp(-v[0])),
    "Identity": lambda v, n: v[0],
    "MatMul": lambda v, n: v[0] @ v[1],
    "Gemm": _op_gemm,
    "Conv": _op_conv,
    "Reshape": _op_reshape,
    "Transpose": lambda v, n: np.transpose(
        v[0], n.attr("perm") or tuple(reversed(range(v[0].ndim)))
    ),
    "Concat": lambda v, n: np.concatenate(v, axis=int(n.attr("axis", 0))),
    "Slice": _op_slice,
    "Gather": lambda v, n: np.take(
        v[0], v[1].astype(np.int64), axis=int(n.attr("axis", 0))
    ),
    "Unsqueeze": _op_unsqueeze,
    "Squeeze": _op_squeeze,
    "Shape": lambda v, n: np.asarray(v[0].shape, dtype=np.int64),
    "ReduceMean": _op_reduce_mean,
    "Softmax": _op_softmax,
    "LayerNormalization": _op_layer_norm,
    "Cast": _op_cast,
    "Constant": _op_constant,
}


class OnnxSession:
    """Parsed graph ready to execute. One static input, one output."""

    def __init__(self, graph: _Graph):
        self._nodes = graph.nodes
        self._weights: Dict[str, np.ndarray] = {}
        for t in graph.initializers:
            self._weights[t.name] = t.to_array()
        runtime = [vi for vi in graph.inputs if vi.name not in self._weights]
        if len(runtime) != 1:
            raise FormatError(
                f"expected exactly one runtime input, found {len(runtime)}"
            )
        vi = runtime[0]
        if not vi.shape or any(d is None or d <= 0 for d in vi.shape):
            raise FormatError(
                f"input {vi.name!r} must declare a static shape, got {vi.shape}"
            )
        if len(graph.outputs) != 1:
            raise FormatError(
                f"expected exactly one graph output, found {len(graph.outputs)}"
            )
        for node in self._nodes:
            if node.op_type not in _OPS:
                raise FormatError(f"unsupported operator {node.op_type!r}")
            if len([o for o in node.outputs if o]) != 1:
                raise FormatError(
                    f"node {node.name!r} must have exactly one output"
                )
        self.input_name = vi.name
        self.input_shape = [int(d) for d in vi.shape]
        self.output_name = graph.outputs[0].name

    def run(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if list(x.shape) != self.input_shape:
            raise FormatError(
                f"input shape {list(x.shape)} does not match "
                f"model input {self.input_shape}"
            )
        env: Dict[str, np.ndarray] = dict(self._weights)
        env[self.input_name] = x.astype(np.float32, copy=False)
        for node in self._nodes:
            vals = []
            for name in node.inputs:
                if name == "":
                    continue  # optional input explicitly omitted
                if name not in env:
                    raise FormatError(
                        f"node {node.name!r} reads unknown tensor {name!r}"
                    )
                vals.append(env[name])
            env[node.outputs[0]] = _OPS[node.op_type](vals, node)
        if self.output_name not in env:
            raise FormatError(f"graph never produced output {self.output_name!r}")
        return env[self.output_name]


def load_model(path) -> OnnxSession:
    """Parse a model file and return an executable session."""
    p = Path(path)
    if not p.is_file():
        raise FormatError(f"model file not found: {p}")
    data = p.read_bytes()
    if not data:
        raise FormatError(f"model file is empty: {p}")
    return OnnxSession(_parse_model(data))
