"""Model bundle: one file holding a stack and (optionally) its readout.

The container is a numpy ``.npz`` archive (pickle disabled). Arrays are
stored row-major with their dimensions declared by the archive itself, so
a load/save round trip is bit-exact. Entries:

- ``format_version``: currently ``"1"``
- ``config_json``: the full :class:`~deepesn.reservoir.DeepEsnConfig`
- ``input_weights``, ``recurrent_0..L-1``, ``inter_layer_0..L-2``
- when a readout is present: ``readout_weights``, ``readout_classes``,
  and ``readout_label_kind`` (``class-enum`` for the pipeline's own
  labels, ``int`` or ``str`` for estimator-supplied ones)
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .data import ClassLabel, label_from_text, label_to_text
from .readout import Readout
from .reservoir import DeepEsnConfig, ReservoirStack

__all__ = ["BUNDLE_FORMAT_VERSION", "save_bundle", "load_bundle"]

BUNDLE_FORMAT_VERSION = "1"


def _config_to_json(config: DeepEsnConfig) -> str:
    payload = {
        "num_layers": config.num_layers,
        "units_per_layer": config.units_per_layer,
        "leak_rates": list(config.leak_rates),
        "input_scaling": config.input_scaling,
        "inter_layer_scaling": config.inter_layer_scaling,
        "spectral_radius": config.spectral_radius,
        "input_dim": config.input_dim,
        "master_seed": config.master_seed,
    }
    return json.dumps(payload, sort_keys=True)


def _config_from_json(text: str) -> DeepEsnConfig:
    payload = json.loads(text)
    payload["leak_rates"] = tuple(payload["leak_rates"])
    return DeepEsnConfig(**payload)


def save_bundle(path, stack: ReservoirStack, readout: Readout | None = None) -> None:
    """Write a stack (and optional readout) to ``path``."""
    entries = {
        "format_version": np.array(BUNDLE_FORMAT_VERSION),
        "config_json": np.array(_config_to_json(stack.config)),
        "input_weights": stack.input_weights,
    }
    for i, w in enumerate(stack.recurrent):
        entries[f"recurrent_{i}"] = w
    for i, w in enumerate(stack.inter_layer):
        entries[f"inter_layer_{i}"] = w
    if readout is not None:
        entries["readout_weights"] = readout.weights
        labels = readout.class_labels
        if all(isinstance(c, ClassLabel) for c in labels):
            kind = "class-enum"
            stored = np.array([label_to_text(c) for c in labels])
        elif all(isinstance(c, (int, np.integer)) for c in labels):
            kind = "int"
            stored = np.array([int(c) for c in labels], dtype=np.int64)
        elif all(isinstance(c, str) for c in labels):
            kind = "str"
            stored = np.array(labels)
        else:
            raise ValueError(
                f"bundle readouts support ClassLabel, int, or str class labels, got {labels!r}"
            )
        entries["readout_classes"] = stored
        entries["readout_label_kind"] = np.array(kind)
    with open(path, "wb") as handle:
        np.savez(handle, **entries)


def load_bundle(path) -> tuple[ReservoirStack, Readout | None]:
    """Read a bundle back; inverse of :func:`save_bundle`."""
    path = Path(path)
    with np.load(path, allow_pickle=False) as archive:
        version = str(archive["format_version"])
        if version != BUNDLE_FORMAT_VERSION:
            raise ValueError(f"{path.name}: unsupported bundle format version {version!r}")
        config = _config_from_json(str(archive["config_json"]))
        recurrent = tuple(archive[f"recurrent_{i}"] for i in range(config.num_layers))
        inter = tuple(archive[f"inter_layer_{i}"] for i in range(config.num_layers - 1))
        stack = ReservoirStack(
            config=config,
            input_weights=archive["input_weights"],
            recurrent=recurrent,
            inter_layer=inter,
        )
        readout = None
        if "readout_weights" in archive:
            kind = str(archive["readout_label_kind"])
            raw = archive["readout_classes"]
            if kind == "class-enum":
                classes = tuple(label_from_text(str(c)) for c in raw)
            elif kind == "int":
                classes = tuple(int(c) for c in raw)
            elif kind == "str":
                classes = tuple(str(c) for c in raw)
            else:
                raise ValueError(f"{path.name}: unknown readout label kind {kind!r}")
            readout = Readout(weights=archive["readout_weights"], class_labels=classes)
    return stack, readout
