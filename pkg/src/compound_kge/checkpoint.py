"""Self-describing binary checkpoint container.

Layout::

    bytes 0..7    magic  b"CMPE0001"
    bytes 8..11   little-endian uint32 header length L
    bytes 12..11+L  UTF-8 JSON header
    remainder     raw little-endian float32 arrays, concatenated in the
                  order declared by the header's "arrays" manifest

The header alone is enough to reconstruct the model shape: spec,
trainable mask, entity/relation names, training step, RNG state, and a
content hash of the dataset dictionaries the model was trained against.
Model arrays are computed in float64 but stored as float32; loading
returns float64 arrays holding the float32 values, so a second
save/load round trip is the exact identity.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import CheckpointError
from .model import KGEModel, ParamTables
from .scoring import CompoundSpec, Norm, TrainableMask, Variant
from .transforms import chain_from_string, chain_to_string

__all__ = [
    "MAGIC",
    "FORMAT_VERSION",
    "Checkpoint",
    "save_checkpoint",
    "load_checkpoint",
    "read_header",
    "dataset_fingerprint",
]

MAGIC = b"CMPE0001"
FORMAT_VERSION = 1

_MASK_FIELDS = (
    "head_translation",
    "head_rotation",
    "head_scale",
    "tail_translation",
    "tail_rotation",
    "tail_scale",
)


@dataclass
class Checkpoint:
    """A model plus the bookkeeping needed to use it standalone."""

    model: KGEModel
    entity_names: list[str]
    relation_names: list[str]
    dataset_hash: str | None = None
    rng_state: dict | None = None
    format_version: int = FORMAT_VERSION


def dataset_fingerprint(entity_names, relation_names) -> str:
    """Content hash of the id dictionaries (order-sensitive)."""
    h = hashlib.sha256()
    h.update(b"entities\n")
    for name in entity_names:
        h.update(name.encode("utf-8") + b"\n")
    h.update(b"relations\n")
    for name in relation_names:
        h.update(name.encode("utf-8") + b"\n")
    return h.hexdigest()


def _array_manifest(model: KGEModel) -> list[tuple[str, tuple[int, ...]]]:
    entries = [
        ("entities", model.entities.shape),
        ("head.translations", model.head.translations.shape),
        ("head.angles", model.head.angles.shape),
        ("head.scales", model.head.scales.shape),
        ("tail.translations", model.tail.translations.shape),
        ("tail.scales", model.tail.scales.shape),
    ]
    if not model.shared_rotation:
        entries.insert(5, ("tail.angles", model.tail.angles.shape))
    return entries


def _get_array(model: KGEModel, name: str) -> np.ndarray:
    if name == "entities":
        return model.entities
    side, attr = name.split(".")
    return getattr(getattr(model, side), attr)


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    model = ckpt.model
    spec = model.spec
    manifest = _array_manifest(model)
    header = {
        "format_version": ckpt.format_version,
        "spec": {
            "variant": spec.variant.value,
            "head_chain": chain_to_string(spec.head_chain),
            "tail_chain": chain_to_string(spec.tail_chain),
            "dim": spec.dim,
            "norm": spec.norm.value,
        },
        "shared_rotation": model.shared_rotation,
        "preset": model.preset_name,
        "trainable": {f: getattr(model.trainable, f) for f in _MASK_FIELDS},
        "n_entities": model.n_entities,
        "n_relations": model.n_relations,
        "step": model.step,
        "dataset_hash": ckpt.dataset_hash,
        "entity_names": ckpt.entity_names,
        "relation_names": ckpt.relation_names,
        "rng_state": ckpt.rng_state,
        "arrays": [{"name": n, "shape": list(s)} for n, s in manifest],
    }
    blob = json.dumps(header, ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for name, _ in manifest:
            fh.write(
                np.ascontiguousarray(_get_array(model, name), dtype="<f4").tobytes()
            )


def read_header(path) -> dict:
    """Parse just the JSON header (magic + length prefix + JSON)."""
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MAGIC:
            raise CheckpointError(f"bad magic {magic!r}, expected {MAGIC!r}")
        raw_len = fh.read(4)
        if len(raw_len) != 4:
            raise CheckpointError("truncated header length prefix")
        (length,) = struct.unpack("<I", raw_len)
        blob = fh.read(length)
        if len(blob) != length:
            raise CheckpointError("truncated JSON header")
        try:
            return json.loads(blob.decode("utf-8"))
        except ValueError as exc:
            raise CheckpointError(f"malformed header JSON: {exc}") from None


def load_checkpoint(path) -> Checkpoint:
    header = read_header(path)
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported format version {version!r} (supported: {FORMAT_VERSION})"
        )
    spec_h = header["spec"]
    spec = CompoundSpec(
        variant=Variant(spec_h["variant"]),
        head_chain=chain_from_string(spec_h["head_chain"]),
        tail_chain=chain_from_string(spec_h["tail_chain"]),
        dim=int(spec_h["dim"]),
        norm=Norm(spec_h["norm"]),
    )
    trainable = TrainableMask(**{f: bool(header["trainable"][f]) for f in _MASK_FIELDS})

    arrays = {}
    with open(path, "rb") as fh:
        fh.seek(0, 2)
        file_size = fh.tell()
        fh.seek(8)
        (length,) = struct.unpack("<I", fh.read(4))
        fh.seek(8 + 4 + length)
        for entry in header["arrays"]:
            name, shape = entry["name"], tuple(entry["shape"])
            count = int(np.prod(shape, dtype=np.int64)) if shape else 1
            raw = fh.read(4 * count)
            if len(raw) != 4 * count:
                raise CheckpointError(
                    f"truncated checkpoint: array {name!r} needs {4 * count} bytes, "
                    f"got {len(raw)}"
                )
            arrays[name] = (
                np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(shape)
            )
        if fh.tell() != file_size:
            raise CheckpointError(
                f"{file_size - fh.tell()} unexpected trailing bytes"
            )

    expected = {"entities", "head.translations", "head.angles", "head.scales",
                "tail.translations", "tail.scales"}
    if not header["shared_rotation"]:
        expected.add("tail.angles")
    missing = expected - set(arrays)
    if missing:
        raise CheckpointError(f"checkpoint is missing arrays: {sorted(missing)}")

    head = ParamTables(
        arrays["head.translations"], arrays["head.angles"], arrays["head.scales"]
    )
    tail = ParamTables(
        arrays["tail.translations"],
        arrays["tail.angles"] if not header["shared_rotation"] else arrays["head.angles"],
        arrays["tail.scales"],
    )
    model = KGEModel(
        spec=spec,
        entities=arrays["entities"],
        head=head,
        tail=tail,
        trainable=trainable,
        shared_rotation=bool(header["shared_rotation"]),
        preset_name=header.get("preset"),
        step=int(header.get("step", 0)),
    )
    if model.n_entities != header["n_entities"] or model.n_relations != header["n_relations"]:
        raise CheckpointError("array shapes disagree with header counts")
    return Checkpoint(
        model=model,
        entity_names=list(header["entity_names"]),
        relation_names=list(header["relation_names"]),
        dataset_hash=header.get("dataset_hash"),
        rng_state=header.get("rng_state"),
        format_version=version,
    )
