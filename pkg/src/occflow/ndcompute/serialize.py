"""Binary container for trained parameters ("OCCF" files).

Layout, all integers little-endian u32::

    b"OCCF" | version | layer count
    | len | bundle header JSON (kind, attrs, network boundaries, extra arrays)
    | for each layer: len | LayerSpec JSON | f64 parameter blocks
    | f64 blocks for the extra arrays

Networks are stored back to back; the bundle header records where each
one starts, so multi-network models (encoder + decoder, G + D) share one
file.
"""

from __future__ import annotations

import hashlib
import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError
from .network import Network

MAGIC = b"OCCF"
VERSION = 1


def _dump_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


def _write_block(buf, payload: bytes) -> None:
    buf.write(struct.pack("<I", len(payload)))
    buf.write(payload)


def _read_block(buf) -> bytes:
    (n,) = struct.unpack("<I", _read_exact(buf, 4))
    return _read_exact(buf, n)


def _read_exact(buf, n):
    data = buf.read(n)
    if len(data) != n:
        raise ConfigurationError("truncated OCCF container")
    return data


def _read_array(buf, shape):
    count = int(np.prod(shape)) if shape else 1
    raw = _read_exact(buf, 8 * count)
    return np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)


@dataclass
class ModelBundle:
    kind: str
    networks: dict = field(default_factory=dict)  # name -> Network
    arrays: dict = field(default_factory=dict)  # name -> ndarray
    attrs: dict = field(default_factory=dict)  # JSON-serializable metadata

    def to_bytes(self) -> bytes:
        buf = io.BytesIO()
        layer_count = sum(len(net.layers) for net in self.networks.values())
        buf.write(MAGIC)
        buf.write(struct.pack("<II", VERSION, layer_count))
        header = {
            "kind": self.kind,
            "attrs": self.attrs,
            "networks": [
                {"name": name, "input_shape": list(net.input_shape),
                 "layers": len(net.layers), "trainable": net.trainable}
                for name, net in self.networks.items()
            ],
            "arrays": [{"name": k, "shape": list(np.shape(v))} for k, v in self.arrays.items()],
        }
        _write_block(buf, _dump_json(header))
        for net in self.networks.values():
            for layer in net.layers:
                entry = layer.spec.to_dict()
                entry["param_shapes"] = {k: list(p.shape) for k, p in layer.params.items()}
                _write_block(buf, _dump_json(entry))
                for p in layer.params.values():
                    buf.write(np.ascontiguousarray(p.data, dtype="<f8").tobytes())
        for v in self.arrays.values():
            buf.write(np.ascontiguousarray(v, dtype="<f8").tobytes())
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "ModelBundle":
        buf = io.BytesIO(data)
        if _read_exact(buf, 4) != MAGIC:
            raise ConfigurationError("not an OCCF container (bad magic)")
        version, layer_count = struct.unpack("<II", _read_exact(buf, 8))
        if version != VERSION:
            raise ConfigurationError(f"unsupported OCCF version {version}")
        header = json.loads(_read_block(buf))
        if sum(n["layers"] for n in header["networks"]) != layer_count:
            raise ConfigurationError("OCCF layer count disagrees with bundle header")
        networks = {}
        for info in header["networks"]:
            specs, blocks = [], []
            for _ in range(info["layers"]):
                entry = json.loads(_read_block(buf))
                shapes = entry.pop("param_shapes")
                specs.append(entry)
                blocks.extend(_read_array(buf, tuple(s)) for s in shapes.values())
            net = Network(specs, info["input_shape"], name=info["name"])
            net.load_arrays(blocks)
            net.trainable = info["trainable"]
            networks[info["name"]] = net
        arrays = {a["name"]: _read_array(buf, tuple(a["shape"])) for a in header["arrays"]}
        if buf.read(1):
            raise ConfigurationError("trailing bytes after OCCF payload")
        return cls(header["kind"], networks, arrays, header["attrs"])

    def save(self, path) -> str:
        """Write the bundle; returns its sha256 hex digest."""
        data = self.to_bytes()
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
        return hashlib.sha256(data).hexdigest()

    @classmethod
    def load(cls, path) -> "ModelBundle":
        return cls.from_bytes(Path(path).read_bytes())
