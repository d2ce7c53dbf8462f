"""LRS1 model file format.

Layout: magic bytes "LRS1", a 64-bit little-endian byte count, that many
bytes of UTF-8 JSON metadata (model kind, dimensions, config, tensor order,
optional item catalog), then each parameter tensor as row-major IEEE-754
little-endian float32 in the order declared by the metadata.  Optimizer
state is never written.
"""

from __future__ import annotations

import json
import struct
from typing import Union

import numpy as np

from .mf import MfModel
from .multvae import PARAM_NAMES, MultVaeModel

MAGIC = b"LRS1"

Model = Union[MfModel, MultVaeModel]


class ModelFormatError(Exception):
    """The file is not a readable LRS1 model."""


def _tensor_entries(model: Model) -> list[tuple[str, np.ndarray]]:
    if isinstance(model, MfModel):
        return [("user_factors", model.user_factors), ("item_factors", model.item_factors)]
    return [(name, getattr(model, name)) for name in PARAM_NAMES]


def save_model(model: Model, path) -> None:
    tensors = _tensor_entries(model)
    if isinstance(model, MfModel):
        kind = "mf"
        dims = {"n_users": model.n_users, "n_items": model.n_items, "d": model.d}
        config = {"regularization": model.regularization, "confidence_alpha": model.confidence_alpha}
    else:
        kind = "multvae"
        dims = {"n_items": model.n_items, "h": model.h, "k": model.k}
        config = {"beta": model.beta}
    meta = {
        "kind": kind,
        "dims": dims,
        "config": config,
        "tensors": [{"name": name, "shape": list(arr.shape)} for name, arr in tensors],
    }
    if model.item_catalog is not None:
        meta["items"] = [list(pair) for pair in model.item_catalog]
    blob = json.dumps(meta).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for _, arr in tensors:
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_model(path) -> Model:
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise ModelFormatError(f"{path}: bad magic, not an LRS1 file")
        (meta_len,) = struct.unpack("<Q", fh.read(8))
        try:
            meta = json.loads(fh.read(meta_len).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ModelFormatError(f"{path}: unreadable metadata: {exc}") from exc
        arrays = {}
        for entry in meta["tensors"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(4 * count)
            if len(buf) != 4 * count:
                raise ModelFormatError(f"{path}: truncated tensor {entry['name']}")
            arrays[entry["name"]] = (
                np.frombuffer(buf, dtype="<f4").astype(np.float64).reshape(shape)
            )
        trailing = fh.read(1)
        if trailing:
            raise ModelFormatError(f"{path}: trailing bytes after declared tensors")
    items = meta.get("items")
    catalog = tuple((a, t) for a, t in items) if items is not None else None
    kind = meta.get("kind")
    if kind == "mf":
        return MfModel(
            user_factors=arrays["user_factors"],
            item_factors=arrays["item_factors"],
            d=meta["dims"]["d"],
            regularization=meta["config"]["regularization"],
            confidence_alpha=meta["config"]["confidence_alpha"],
            item_catalog=catalog,
        )
    if kind == "multvae":
        return MultVaeModel(
            **{name: arrays[name] for name in PARAM_NAMES},
            beta=meta["config"]["beta"],
            item_catalog=catalog,
        )
    raise ModelFormatError(f"{path}: unknown model kind {kind!r}")
