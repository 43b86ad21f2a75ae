"""Model bundle persistence."""

import numpy as np
import pytest

from deepesn.bundle import BUNDLE_FORMAT_VERSION, load_bundle, save_bundle
from deepesn.data import ClassLabel
from deepesn.readout import Readout
from deepesn.reservoir import build_stack


def assert_stacks_equal(a, b):
    assert a.config == b.config
    np.testing.assert_array_equal(a.input_weights, b.input_weights)
    assert len(a.recurrent) == len(b.recurrent)
    for wa, wb in zip(a.recurrent, b.recurrent):
        np.testing.assert_array_equal(wa, wb)
    for wa, wb in zip(a.inter_layer, b.inter_layer):
        np.testing.assert_array_equal(wa, wb)


def make_readout(labels):
    rng = np.random.default_rng(99)
    return Readout(
        weights=rng.normal(size=(len(labels), 37)),
        class_labels=tuple(labels),
    )


def test_stack_only_roundtrip(small_stack, tmp_path):
    path = tmp_path / "stack.npz"
    save_bundle(path, small_stack)
    stack, readout = load_bundle(path)
    assert readout is None
    assert_stacks_equal(stack, small_stack)


def test_roundtrip_with_class_enum_readout(small_stack, tmp_path):
    path = tmp_path / "model.npz"
    readout = make_readout([ClassLabel.CONTROL, ClassLabel.PD])
    save_bundle(path, small_stack, readout)
    stack, back = load_bundle(path)
    assert_stacks_equal(stack, small_stack)
    assert back.class_labels == (ClassLabel.CONTROL, ClassLabel.PD)
    assert all(isinstance(c, ClassLabel) for c in back.class_labels)
    np.testing.assert_array_equal(back.weights, readout.weights)


@pytest.mark.parametrize(
    "labels",
    [(0, 1), (3, 1, 2), ("healthy", "patient"), ("a", "b;c", "d e")],
    ids=["int-pair", "int-triple", "str-pair", "str-awkward"],
)
def test_roundtrip_with_plain_labels(small_stack, tmp_path, labels):
    path = tmp_path / "model.npz"
    readout = make_readout(labels)
    save_bundle(path, small_stack, readout)
    _, back = load_bundle(path)
    assert back.class_labels == labels
    assert all(type(c) is type(l) for c, l in zip(back.class_labels, labels))
    np.testing.assert_array_equal(back.weights, readout.weights)


def test_unsupported_label_types_rejected(small_stack, tmp_path):
    readout = make_readout([0.5, 1.5])
    with pytest.raises(ValueError, match="class labels"):
        save_bundle(tmp_path / "bad.npz", small_stack, readout)


def test_version_mismatch_rejected(small_stack, tmp_path):
    path = tmp_path / "model.npz"
    save_bundle(path, small_stack)
    with np.load(path, allow_pickle=False) as archive:
        entries = {k: archive[k] for k in archive.files}
    assert str(entries["format_version"]) == BUNDLE_FORMAT_VERSION
    entries["format_version"] = np.array("999")
    with open(path, "wb") as handle:
        np.savez(handle, **entries)
    with pytest.raises(ValueError, match="format version"):
        load_bundle(path)


def test_unknown_label_kind_rejected(small_stack, tmp_path):
    path = tmp_path / "model.npz"
    save_bundle(path, small_stack, make_readout([0, 1]))
    with np.load(path, allow_pickle=False) as archive:
        entries = {k: archive[k] for k in archive.files}
    entries["readout_label_kind"] = np.array("exotic")
    with open(path, "wb") as handle:
        np.savez(handle, **entries)
    with pytest.raises(ValueError, match="label kind"):
        load_bundle(path)


def test_weights_bit_exact_for_awkward_floats(small_stack, tmp_path):
    weights = np.array([[5e-324, -0.0, 1.7976931348623157e308, 0.1 + 0.2]])
    readout = Readout(weights=weights, class_labels=("only",))
    # single class is fine for storage even though training would refuse it
    path = tmp_path / "model.npz"
    save_bundle(path, small_stack, readout)
    _, back = load_bundle(path)
    assert back.weights.tobytes() == weights.tobytes()


def test_rebuild_matches_fresh_construction(small_config, tmp_path):
    stack = build_stack(small_config)
    path = tmp_path / "stack.npz"
    save_bundle(path, stack)
    loaded, _ = load_bundle(path)
    assert_stacks_equal(loaded, build_stack(loaded.config))
