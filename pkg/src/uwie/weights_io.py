"""Weight container: a JSON manifest plus one flat float32 payload.

A weight directory holds ``manifest.json`` and ``weights.bin``. The
manifest records the channel width and, per tensor, its name, shape, and
byte offset into the payload; names are ``<layer>.weight`` and
``<layer>.bias`` in the fixed architecture-graph order. The payload is the
row-major little-endian float32 concatenation of every tensor, with no
header or padding.

Loading audits everything against the architecture graph: unknown,
missing, misshaped, or out-of-bounds tensors are rejected with the
offending name.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import WeightAuditError
from .network import NetworkWeights, layer_shapes
from .tensor import ConvKernel

MANIFEST_NAME = "manifest.json"
PAYLOAD_NAME = "weights.bin"
FORMAT_VERSION = 1

_DTYPE = np.dtype("<f4")


def tensor_entries(channel_width: int) -> list[tuple[str, tuple[int, ...]]]:
    """Expected (name, shape) pairs in payload order."""
    entries: list[tuple[str, tuple[int, ...]]] = []
    for name, (out_ch, in_ch, k) in layer_shapes(channel_width).items():
        entries.append((f"{name}.weight", (out_ch, in_ch, k, k)))
        entries.append((f"{name}.bias", (out_ch,)))
    return entries


def save_weights(weights: NetworkWeights, directory) -> None:
    """Write manifest.json and weights.bin for a weight set."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest_tensors = []
    chunks = []
    offset = 0
    for name, shape in tensor_entries(weights.channel_width):
        layer, field = name.rsplit(".", 1)
        arr = getattr(weights.layers[layer], "weights" if field == "weight" else "bias")
        raw = np.ascontiguousarray(arr, dtype=_DTYPE).tobytes()
        manifest_tensors.append({"name": name, "shape": list(shape), "offset": offset})
        chunks.append(raw)
        offset += len(raw)
    manifest = {
        "format_version": FORMAT_VERSION,
        "channel_width": weights.channel_width,
        "payload": PAYLOAD_NAME,
        "payload_size": offset,
        "tensors": manifest_tensors,
    }
    (directory / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2) + "\n")
    (directory / PAYLOAD_NAME).write_bytes(b"".join(chunks))


def _read_manifest(directory: Path) -> dict:
    path = directory / MANIFEST_NAME
    if not path.is_file():
        raise WeightAuditError(f"no {MANIFEST_NAME} in {directory}")
    try:
        manifest = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise WeightAuditError(f"unparseable manifest: {exc}") from exc
    for key in ("channel_width", "tensors"):
        if key not in manifest:
            raise WeightAuditError(f"manifest misses required key {key!r}")
    return manifest


def _audit_tensors(manifest: dict, payload_len: int) -> list[dict]:
    """Validate manifest tensors against the graph; returns them in manifest order."""
    try:
        channel_width = int(manifest["channel_width"])
    except (TypeError, ValueError) as exc:
        raise WeightAuditError(f"invalid channel_width: {manifest['channel_width']!r}") from exc
    expected = dict(tensor_entries(channel_width))
    seen: dict[str, dict] = {}
    for entry in manifest["tensors"]:
        name = entry.get("name")
        if name not in expected:
            raise WeightAuditError(f"unknown tensor {name!r} in manifest")
        if name in seen:
            raise WeightAuditError(f"duplicate tensor {name!r} in manifest")
        shape = tuple(int(v) for v in entry["shape"])
        if shape != expected[name]:
            raise WeightAuditError(
                f"tensor {name}: expected shape {expected[name]}, manifest says {shape}"
            )
        offset = int(entry["offset"])
        size = int(np.prod(shape)) * _DTYPE.itemsize
        if offset < 0 or offset + size > payload_len:
            raise WeightAuditError(
                f"tensor {name}: bytes [{offset}, {offset + size}) fall outside "
                f"the {payload_len}-byte payload"
            )
        seen[name] = {"name": name, "shape": shape, "offset": offset, "size": size}
    missing = sorted(set(expected) - set(seen))
    if missing:
        raise WeightAuditError(f"manifest misses tensors: {', '.join(missing)}")
    total = sum(e["size"] for e in seen.values())
    if total != payload_len:
        raise WeightAuditError(
            f"payload holds {payload_len} bytes but the tensors account for {total}"
        )
    return list(seen.values())


def load_weights(directory) -> NetworkWeights:
    """Read and audit a weight directory into a NetworkWeights set."""
    directory = Path(directory)
    manifest = _read_manifest(directory)
    payload_path = directory / manifest.get("payload", PAYLOAD_NAME)
    if not payload_path.is_file():
        raise WeightAuditError(f"no payload file {payload_path.name} in {directory}")
    payload = payload_path.read_bytes()
    entries = _audit_tensors(manifest, len(payload))
    channel_width = int(manifest["channel_width"])

    arrays: dict[str, np.ndarray] = {}
    for entry in entries:
        raw = payload[entry["offset"] : entry["offset"] + entry["size"]]
        arrays[entry["name"]] = (
            np.frombuffer(raw, dtype=_DTYPE).astype(np.float64).reshape(entry["shape"])
        )
    layers = {}
    for layer in layer_shapes(channel_width):
        layers[layer] = ConvKernel(
            weights=arrays[f"{layer}.weight"], bias=arrays[f"{layer}.bias"]
        )
    return NetworkWeights(channel_width=channel_width, layers=layers)


@dataclass(frozen=True)
class WeightInspection:
    channel_width: int
    tensors: list[tuple[str, tuple[int, ...], int]]  # (name, shape, offset)
    payload_sha256: str


def inspect_weights(directory) -> WeightInspection:
    """Audit a weight directory and summarize its contents.

    Raises WeightAuditError naming the first offending tensor when the
    payload length or any shape disagrees with the architecture graph.
    """
    directory = Path(directory)
    manifest = _read_manifest(directory)
    payload_path = directory / manifest.get("payload", PAYLOAD_NAME)
    if not payload_path.is_file():
        raise WeightAuditError(f"no payload file {payload_path.name} in {directory}")
    payload = payload_path.read_bytes()
    entries = _audit_tensors(manifest, len(payload))
    return WeightInspection(
        channel_width=int(manifest["channel_width"]),
        tensors=[(e["name"], e["shape"], e["offset"]) for e in entries],
        payload_sha256=hashlib.sha256(payload).hexdigest(),
    )
