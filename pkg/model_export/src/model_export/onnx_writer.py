"""Minimal ONNX serializer.

Emits the subset of the format needed for a feedforward vision graph:
float32/int64 tensors (raw_data encoding), plain nodes with scalar,
list, and tensor attributes, and a single-graph model wrapper. No
protobuf dependency; messages are assembled byte by byte.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

# TensorProto.DataType codes for the dtypes we emit.
_DTYPE_CODES = {
    np.dtype(np.float32): 1,
    np.dtype(np.int64): 7,
}


def _varint(value: int) -> bytes:
    if value < 0:
        # Negative ints are encoded as 10-byte two's complement varints.
        value &= (1 << 64) - 1
    out = bytearray()
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def _tag(field_number: int, wire_type: int) -> bytes:
    return _varint((field_number << 3) | wire_type)


def _ld(field_number: int, payload: bytes) -> bytes:
    return _tag(field_number, 2) + _varint(len(payload)) + payload


def _string(field_number: int, text: str) -> bytes:
    return _ld(field_number, text.encode("utf-8"))


def _uint(field_number: int, value: int) -> bytes:
    return _tag(field_number, 0) + _varint(value)


def _float(field_number: int, value: float) -> bytes:
    return _tag(field_number, 5) + struct.pack("<f", value)


def _packed_ints(field_number: int, values) -> bytes:
    payload = b"".join(_varint(int(v)) for v in values)
    return _ld(field_number, payload)


def tensor(name: str, array: np.ndarray) -> bytes:
    """Serialize a TensorProto with raw_data payload."""
    arr = np.ascontiguousarray(array)
    if arr.dtype not in _DTYPE_CODES:
        raise ValueError(f"unsupported tensor dtype {arr.dtype}")
    out = b"".join(_tag(1, 0) + _varint(d) for d in arr.shape)
    out += _uint(2, _DTYPE_CODES[arr.dtype])
    out += _string(8, name)
    out += _ld(9, arr.tobytes())
    return out


def _attribute(name: str, value) -> bytes:
    out = _string(1, name)
    if isinstance(value, np.ndarray):
        out += _ld(5, tensor("", value)) + _uint(20, 4)
    elif isinstance(value, float):
        out += _float(2, value) + _uint(20, 1)
    elif isinstance(value, int):
        out += _uint(3, value) + _uint(20, 2)
    elif isinstance(value, str):
        out += _string(4, value) + _uint(20, 3)
    elif isinstance(value, (list, tuple)) and all(isinstance(v, int) for v in value):
        out += _packed_ints(7, value) + _uint(20, 7)
    else:
        raise ValueError(f"unsupported attribute value for {name!r}: {value!r}")
    return out


def node(op_type: str, inputs, outputs, name: str = "", **attrs) -> bytes:
    out = b"".join(_string(1, i) for i in inputs)
    out += b"".join(_string(2, o) for o in outputs)
    if name:
        out += _string(3, name)
    out += _string(4, op_type)
    for key, value in attrs.items():
        out += _ld(5, _attribute(key, value))
    return out


def tensor_value_info(name: str, dims, elem_type: int = 1) -> bytes:
    shape = b"".join(_ld(1, _uint(1, d)) for d in dims)
    ttype = _uint(1, elem_type) + _ld(2, shape)
    return _string(1, name) + _ld(2, _ld(1, ttype))


@dataclass
class GraphDef:
    """Accumulates nodes and initializers, then serializes a ModelProto."""

    name: str
    nodes: list = field(default_factory=list)
    initializers: list = field(default_factory=list)
    _names: set = field(default_factory=set)

    def initializer(self, name: str, array: np.ndarray) -> str:
        if name in self._names:
            raise ValueError(f"duplicate initializer {name!r}")
        self._names.add(name)
        self.initializers.append(tensor(name, array))
        return name

    def add(self, op_type: str, inputs, outputs, **attrs) -> str:
        """Append a node; returns its first output name for chaining."""
        self.nodes.append(node(op_type, inputs, outputs, **attrs))
        return outputs[0]

    def serialize(self, input_name: str, input_dims, output_name: str, output_dims) -> bytes:
        graph = b"".join(_ld(1, n) for n in self.nodes)
        graph += _string(2, self.name)
        graph += b"".join(_ld(5, t) for t in self.initializers)
        graph += _ld(11, tensor_value_info(input_name, input_dims))
        graph += _ld(12, tensor_value_info(output_name, output_dims))

        model = _uint(1, 8)  # ir_version
        model += _string(2, "model_export")
        model += _string(3, "model_export")
        model += _ld(7, graph)
        # opset_import: default domain, version 17
        model += _ld(8, _string(1, "") + _uint(2, 17))
        return model
