"""Binary container formats for networks ("BNIR") and datasets ("BNDS").

Layout of both containers:

    magic (4 bytes) | u32 LE format version | u32 LE header length |
    UTF-8 JSON header | raw little-endian blobs in header order

Weight and input blobs are 32-bit IEEE-754 little-endian, referenced from
the header by (shape, offset, size); labels are int32.  In-memory arrays
are float64, so a value survives the file boundary bit-exactly iff it is
representable in 32 bits.  Writes are atomic (temp file + rename): a
failed save never leaves a partial file behind.
"""

from __future__ import annotations

import json
import os
import struct

import numpy as np

from . import ir
from .activations import make_activation
from .engine.data import Dataset

MODEL_MAGIC = b"BNIR"
DATASET_MAGIC = b"BNDS"
FORMAT_VERSION = 1


class ModelFormatError(Exception):
    """Base class for all container format errors."""


class BadMagicError(ModelFormatError):
    pass


class UnsupportedVersionError(ModelFormatError):
    pass


class TruncatedFileError(ModelFormatError):
    pass


class HeaderError(ModelFormatError):
    pass


class InvalidModelError(ModelFormatError):
    """The container decodes but the network fails validation."""


class _BlobWriter:
    def __init__(self):
        self.parts: list[bytes] = []
        self.offset = 0

    def add(self, arr: np.ndarray) -> dict:
        data = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        ref = {"shape": list(arr.shape), "offset": self.offset, "size": int(arr.size)}
        self.parts.append(data)
        self.offset += len(data)
        return ref


class _BlobReader:
    def __init__(self, blob: bytes):
        self.blob = blob

    def get(self, ref, dtype="<f4") -> np.ndarray:
        try:
            shape = tuple(int(d) for d in ref["shape"])
            offset = int(ref["offset"])
            size = int(ref["size"])
        except (KeyError, TypeError, ValueError) as e:
            raise HeaderError(f"malformed tensor reference: {e}") from None
        nbytes = size * np.dtype(dtype).itemsize
        if offset < 0 or offset + nbytes > len(self.blob):
            raise TruncatedFileError(
                f"blob of {len(self.blob)} bytes is missing a tensor at "
                f"offset {offset} ({nbytes} bytes)"
            )
        arr = np.frombuffer(self.blob, dtype=dtype, count=size, offset=offset)
        if int(np.prod(shape)) != size:
            raise HeaderError("tensor shape disagrees with its size")
        out = arr.reshape(shape)
        return out.astype(np.float64) if dtype == "<f4" else out.astype(np.int64)


def _node_to_header(node, blobs: _BlobWriter) -> dict:
    if isinstance(node, ir.Conv2d):
        return {
            "kind": "conv2d",
            "stride": node.stride,
            "padding": node.padding,
            "groups": node.groups,
            "weights": blobs.add(node.weights),
            "bias": None if node.bias is None else blobs.add(node.bias),
        }
    if isinstance(node, ir.BatchNorm):
        return {
            "kind": "batch_norm",
            "eps": node.eps,
            "gamma": blobs.add(node.gamma),
            "beta": blobs.add(node.beta),
            "running_mean": blobs.add(node.running_mean),
            "running_var": blobs.add(node.running_var),
        }
    if isinstance(node, ir.Activation):
        return {"kind": "activation", "fn": node.fn.kind, "alpha": node.fn.alpha}
    if isinstance(node, ir.Pool):
        return {
            "kind": "pool",
            "pool": node.kind,
            "kernel": node.kernel,
            "stride": node.stride,
        }
    if isinstance(node, ir.GlobalAvgPool):
        return {"kind": "global_avg_pool"}
    if isinstance(node, ir.Flatten):
        return {"kind": "flatten"}
    if isinstance(node, ir.Linear):
        return {
            "kind": "linear",
            "weights": blobs.add(node.weights),
            "bias": blobs.add(node.bias),
        }
    if isinstance(node, ir.ResidualBlockBegin):
        return {"kind": "residual_begin"}
    if isinstance(node, ir.ResidualBlockEnd):
        return {"kind": "residual_end"}
    raise TypeError(f"unserializable node {type(node).__name__}")


def _node_from_header(h: dict, blobs: _BlobReader):
    kind = h.get("kind")
    if kind == "conv2d":
        bias = h.get("bias")
        return ir.Conv2d(
            weights=blobs.get(h["weights"]),
            bias=None if bias is None else blobs.get(bias),
            stride=int(h["stride"]),
            padding=int(h["padding"]),
            groups=int(h["groups"]),
        )
    if kind == "batch_norm":
        return ir.BatchNorm(
            gamma=blobs.get(h["gamma"]),
            beta=blobs.get(h["beta"]),
            running_mean=blobs.get(h["running_mean"]),
            running_var=blobs.get(h["running_var"]),
            eps=float(h["eps"]),
        )
    if kind == "activation":
        return ir.Activation(make_activation(h["fn"], float(h.get("alpha", 0.01))))
    if kind == "pool":
        return ir.Pool(kind=h["pool"], kernel=int(h["kernel"]), stride=int(h["stride"]))
    if kind == "global_avg_pool":
        return ir.GlobalAvgPool()
    if kind == "flatten":
        return ir.Flatten()
    if kind == "linear":
        return ir.Linear(weights=blobs.get(h["weights"]), bias=blobs.get(h["bias"]))
    if kind == "residual_begin":
        return ir.ResidualBlockBegin()
    if kind == "residual_end":
        return ir.ResidualBlockEnd()
    raise HeaderError(f"unknown node kind {kind!r}")


def _write_container(path: str, magic: bytes, header: dict, blob: bytes) -> None:
    header_bytes = json.dumps(header, separators=(",", ":")).encode("utf-8")
    tmp = path + ".tmp"
    with open(tmp, "wb") as f:
        f.write(magic)
        f.write(struct.pack("<II", FORMAT_VERSION, len(header_bytes)))
        f.write(header_bytes)
        f.write(blob)
    os.replace(tmp, path)


def _read_container(path: str, magic: bytes) -> tuple[dict, bytes]:
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 12 or raw[:4] != magic:
        raise BadMagicError(f"not a {magic.decode()} file: bad magic")
    version, header_len = struct.unpack("<II", raw[4:12])
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"unsupported format version {version}")
    if len(raw) < 12 + header_len:
        raise TruncatedFileError("file ends inside the header")
    try:
        header = json.loads(raw[12 : 12 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise HeaderError(f"malformed header: {e}") from None
    return header, raw[12 + header_len :]


def save(net: ir.NetworkIR, path: str) -> None:
    """Write a validated network; round-trips bit-exactly for f32 weights."""
    ir.check(net)
    blobs = _BlobWriter()
    header = {
        "name": net.name,
        "model_version": net.version,
        "input_shape": list(net.input_shape),
        "nodes": [_node_to_header(n, blobs) for n in net.nodes],
    }
    blob = b"".join(blobs.parts)
    header["blob_size"] = len(blob)
    _write_container(path, MODEL_MAGIC, header, blob)


def load(path: str) -> ir.NetworkIR:
    header, blob = _read_container(path, MODEL_MAGIC)
    expected = header.get("blob_size")
    if expected is not None and len(blob) < int(expected):
        raise TruncatedFileError(
            f"blob section has {len(blob)} of {expected} expected bytes"
        )
    reader = _BlobReader(blob)
    try:
        nodes = [_node_from_header(h, reader) for h in header["nodes"]]
        net = ir.NetworkIR(
            nodes=nodes,
            input_shape=tuple(header["input_shape"]),
            name=header.get("name", ""),
            version=int(header.get("model_version", 1)),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise HeaderError(f"malformed header: {e}") from None
    violations = ir.validate(net)
    if violations:
        raise InvalidModelError("; ".join(violations))
    return net


def save_dataset(ds: Dataset, path: str) -> None:
    inputs = np.ascontiguousarray(ds.inputs, dtype="<f4")
    labels = np.ascontiguousarray(ds.labels, dtype="<i4")
    header = {
        "count": int(ds.inputs.shape[0]),
        "input_shape": list(ds.inputs.shape[1:]),
        "num_classes": int(ds.num_classes),
        "inputs": {"shape": list(ds.inputs.shape), "offset": 0, "size": int(inputs.size)},
        "labels": {
            "shape": list(ds.labels.shape),
            "offset": int(inputs.nbytes),
            "size": int(labels.size),
        },
    }
    blob = inputs.tobytes() + labels.tobytes()
    header["blob_size"] = len(blob)
    _write_container(path, DATASET_MAGIC, header, blob)


def load_dataset(path: str) -> Dataset:
    header, blob = _read_container(path, DATASET_MAGIC)
    expected = header.get("blob_size")
    if expected is not None and len(blob) < int(expected):
        raise TruncatedFileError(
            f"blob section has {len(blob)} of {expected} expected bytes"
        )
    reader = _BlobReader(blob)
    try:
        inputs = reader.get(header["inputs"])
        labels = reader.get(header["labels"], dtype="<i4")
        num_classes = int(header["num_classes"])
    except (KeyError, TypeError) as e:
        raise HeaderError(f"malformed header: {e}") from None
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise HeaderError("labels out of range")
    return Dataset(inputs=inputs, labels=labels, num_classes=num_classes)
