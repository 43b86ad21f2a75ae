"""Parsing, dataset construction, synthetic generation, disk round trips."""

import math

import numpy as np
import pytest

from deepesn.data import (
    ClassLabel,
    Dataset,
    Sequence,
    build_dataset,
    label_from_text,
    label_to_text,
    parse_tablet_file,
    pressure_label_correlation,
    read_dataset,
    sequence_from_records,
    synth_dataset,
    write_dataset,
)
from deepesn.exceptions import DatasetError, ParseError, UndefinedMetricError


def raw_line(x=1, y=2, z=0, pressure=3, grip=4, timestamp=100, test_id=0):
    return ";".join(str(v) for v in (x, y, z, pressure, grip, timestamp, test_id))


# ---------------------------------------------------------------- labels

def test_label_round_trip():
    assert label_to_text(ClassLabel.CONTROL) == "Control"
    assert label_to_text(ClassLabel.PD) == "PD"
    for label in ClassLabel:
        assert label_from_text(label_to_text(label)) is label
    with pytest.raises(ValueError):
        label_from_text("parkinsons")


# --------------------------------------------------------------- parsing

def test_parse_filters_by_test_id(tmp_path):
    p = tmp_path / "s1.txt"
    p.write_text("\n".join([raw_line(test_id=0), raw_line(test_id=1), "", raw_line(test_id=0)]) + "\n")
    assert len(parse_tablet_file(p, 0)) == 2
    assert len(parse_tablet_file(p, 1)) == 1
    assert len(parse_tablet_file(p, None)) == 3
    assert parse_tablet_file(p, 5) == []


def test_parse_reports_line_numbers(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text(raw_line() + "\n1;2;3\n")
    with pytest.raises(ParseError) as info:
        parse_tablet_file(p, 0)
    assert info.value.line_number == 2
    p.write_text(raw_line() + "\n" + raw_line().replace("1", "x", 1) + "\n")
    with pytest.raises(ParseError) as info:
        parse_tablet_file(p, 0)
    assert info.value.line_number == 2


def test_sequence_from_records_and_standardization(tmp_path):
    p = tmp_path / "s.txt"
    rows = [raw_line(x=i * 10, y=5, pressure=i, grip=900 - i) for i in range(20)]
    p.write_text("\n".join(rows) + "\n")
    records = parse_tablet_file(p, 0)
    seq = sequence_from_records("s", ClassLabel.PD, records)
    assert seq.channels.shape == (4, 20)
    assert seq.channels[0, 3] == 30.0

    std = sequence_from_records("s", ClassLabel.PD, records, standardize=True)
    for c in (0, 2, 3):
        assert std.channels[c].mean() == pytest.approx(0.0, abs=1e-12)
        assert std.channels[c].std() == pytest.approx(1.0, rel=1e-12)
    # constant channel (y) becomes centered zeros, not NaN
    assert np.array_equal(std.channels[1], np.zeros(20))

    with pytest.raises(DatasetError):
        sequence_from_records("s", ClassLabel.PD, [])


def test_sequence_validation():
    with pytest.raises(Exception):
        Sequence(subject_id="a", label=ClassLabel.PD, channels=np.ones((3, 10)))
    with pytest.raises(Exception):
        Sequence(subject_id="a", label=ClassLabel.PD, channels=np.full((4, 10), np.nan))


# ---------------------------------------------------------- build_dataset

def write_raw_tree(root, n_control=2, n_pd=3, steps=15):
    for sub, n, tid in (("control", n_control, 0), ("parkinson", n_pd, 0)):
        d = root / sub
        d.mkdir(parents=True)
        for i in range(n):
            rows = [raw_line(x=t + i, timestamp=t, test_id=tid) for t in range(steps)]
            (d / f"{sub[:1]}{i}.txt").write_text("\n".join(rows) + "\n")


def test_build_dataset_layout(tmp_path):
    write_raw_tree(tmp_path)
    ds = build_dataset(tmp_path)
    assert len(ds) == 5
    counts = ds.class_counts()
    assert counts[ClassLabel.CONTROL] == 2 and counts[ClassLabel.PD] == 3
    assert ds.subject_ids() == ("c0", "c1", "p0", "p1", "p2")
    assert "standardize=False" in ds.provenance


def test_build_dataset_skips_subjects_without_matching_records(tmp_path):
    write_raw_tree(tmp_path)
    other = tmp_path / "control" / "c9.txt"
    other.write_text(raw_line(test_id=2) + "\n")
    ds = build_dataset(tmp_path, test_id=0)
    assert "c9" not in ds.subject_ids()


def test_build_dataset_errors(tmp_path):
    with pytest.raises(DatasetError):
        build_dataset(tmp_path / "missing")
    (tmp_path / "control").mkdir()
    with pytest.raises(DatasetError):
        build_dataset(tmp_path)  # no parkinson dir
    write_raw_tree(tmp_path / "tree", n_control=0)
    with pytest.raises(DatasetError):
        build_dataset(tmp_path / "tree")


def test_dataset_duplicate_ids_rejected():
    seq = Sequence(subject_id="dup", label=ClassLabel.PD, channels=np.ones((4, 5)))
    with pytest.raises(DatasetError):
        Dataset(sequences=(seq, seq), provenance="x", test_id=0)


# ------------------------------------------------------------- synthetic

def test_synth_deterministic_and_labeled():
    a = synth_dataset(seed=4, n_per_class=3, length=25, difficulty=0.2)
    b = synth_dataset(seed=4, n_per_class=3, length=25, difficulty=0.2)
    assert len(a) == 6
    for sa, sb in zip(a, b):
        assert sa.subject_id == sb.subject_id
        assert np.array_equal(sa.channels, sb.channels)
    counts = a.class_counts()
    assert counts[ClassLabel.CONTROL] == counts[ClassLabel.PD] == 3
    c = synth_dataset(seed=5, n_per_class=3, length=25, difficulty=0.2)
    assert not np.array_equal(a.sequences[0].channels, c.sequences[0].channels)


def test_synth_difficulty_scales_noise_linearly():
    clean = synth_dataset(seed=9, n_per_class=2, length=40, difficulty=0.0)
    d1 = synth_dataset(seed=9, n_per_class=2, length=40, difficulty=1.0)
    d2 = synth_dataset(seed=9, n_per_class=2, length=40, difficulty=2.0)
    for s0, s1, s2 in zip(clean, d1, d2):
        noise1 = s1.channels - s0.channels
        noise2 = s2.channels - s0.channels
        assert np.allclose(noise2, 2.0 * noise1, atol=1e-12)
        assert np.std(noise1) > 0.5  # standard normal draws


def test_synth_clean_signal_is_oscillation_with_shared_offset():
    ds = synth_dataset(seed=2, n_per_class=2, length=200, difficulty=0.0)
    for seq in ds:
        assert np.all(seq.channels <= 1.0 + 1e-12)
        assert np.all(seq.channels >= -0.4 - 1e-12)
        # mean sits near the shared offset regardless of class
        assert seq.channels.mean() == pytest.approx(0.3, abs=0.05)


def test_synth_subjects_differ_within_class():
    ds = synth_dataset(seed=2, n_per_class=2, length=30, difficulty=0.0)
    seqs = list(ds)
    assert not np.array_equal(seqs[0].channels, seqs[1].channels)


def test_synth_validation():
    with pytest.raises(ValueError):
        synth_dataset(seed=1, n_per_class=0, length=10, difficulty=0.0)
    with pytest.raises(ValueError):
        synth_dataset(seed=1, n_per_class=1, length=1, difficulty=0.0)
    with pytest.raises(ValueError):
        synth_dataset(seed=1, n_per_class=1, length=10, difficulty=-0.1)


# ------------------------------------------------------------ correlation

def make_pressure_dataset(control_levels, pd_levels):
    sequences = []
    for label, prefix, levels in (
        (ClassLabel.CONTROL, "c", control_levels),
        (ClassLabel.PD, "p", pd_levels),
    ):
        for i, level in enumerate(levels):
            channels = np.zeros((4, 10))
            channels[0] = np.linspace(-1, 1, 10)  # some variation elsewhere
            channels[2] = level
            sequences.append(Sequence(subject_id=f"{prefix}{i}", label=label, channels=channels))
    return Dataset(sequences=tuple(sequences), provenance="t", test_id=0)


def test_pressure_correlation_sign():
    # PD pressure lower than control -> negative correlation with PD=1
    ds = make_pressure_dataset((0.9, 1.0, 1.1), (0.4, 0.5, 0.6))
    r = pressure_label_correlation(ds)
    assert -1.0 <= r < -0.9
    flipped = make_pressure_dataset((0.4, 0.5, 0.6), (0.9, 1.0, 1.1))
    assert pressure_label_correlation(flipped) > 0.9


def test_pressure_correlation_undefined_cases():
    ds = make_pressure_dataset((0.5, 0.5), (0.5, 0.5))
    with pytest.raises(UndefinedMetricError):
        pressure_label_correlation(ds)
    single = Dataset(
        sequences=(Sequence(subject_id="a", label=ClassLabel.PD, channels=np.ones((4, 5))),),
        provenance="t",
        test_id=0,
    )
    with pytest.raises(UndefinedMetricError):
        pressure_label_correlation(single)


# ------------------------------------------------------------- disk round trip

def awkward_dataset():
    channels = np.array(
        [
            [1e-308, -1e308, 0.1 + 0.2, -0.0, math.pi],
            [1.0, 2.0, 3.0, 4.0, 5.0],
            [5e-324, 1.7976931348623157e308, -5e-324, 0.0, 1.0],
            [-1.5, 2.5, -3.5, 4.5, -5.5],
        ]
    )
    seqs = (
        Sequence(subject_id="weird", label=ClassLabel.CONTROL, channels=channels),
        Sequence(subject_id="plain", label=ClassLabel.PD, channels=np.full((4, 5), 0.25)),
    )
    return Dataset(sequences=seqs, provenance="edge|case", test_id=3)


def test_write_read_round_trip_bit_exact(tmp_path):
    ds = awkward_dataset()
    write_dataset(tmp_path / "out", ds)
    back = read_dataset(tmp_path / "out")
    assert back.provenance == ds.provenance
    assert back.test_id == ds.test_id
    assert back.subject_ids() == ds.subject_ids()
    for a, b in zip(ds, back):
        assert a.label == b.label
        # bit-for-bit, including signed zero
        assert a.channels.tobytes() == b.channels.tobytes()


def test_write_refuses_overwrite_without_force(tmp_path):
    ds = awkward_dataset()
    write_dataset(tmp_path / "out", ds)
    with pytest.raises(DatasetError):
        write_dataset(tmp_path / "out", ds)
    write_dataset(tmp_path / "out", ds, force=True)


def test_read_detects_tampering(tmp_path):
    ds = awkward_dataset()
    out = tmp_path / "out"
    write_dataset(out, ds)

    seq_file = out / "weird.seq"
    original = seq_file.read_text()

    seq_file.write_text(original.replace("weird;Control;3", "weird;Control;9"))
    with pytest.raises(ParseError):
        read_dataset(out)

    seq_file.write_text(original.replace("weird;Control;3", "weird;PD;3"))
    with pytest.raises(DatasetError):
        read_dataset(out)

    seq_file.write_text(original + "0.1;0.2;0.3;0.4\n")
    with pytest.raises(DatasetError):  # length disagrees with manifest
        read_dataset(out)

    seq_file.write_text(original)
    (out / "manifest.csv").write_text(
        (out / "manifest.csv").read_text().replace("# test_id: 3\n", "")
    )
    with pytest.raises(DatasetError):
        read_dataset(out)


def test_read_missing_manifest(tmp_path):
    with pytest.raises(DatasetError):
        read_dataset(tmp_path)


def test_write_rejects_unusable_subject_ids(tmp_path):
    seq = Sequence(subject_id="a;b", label=ClassLabel.PD, channels=np.ones((4, 5)))
    two = Sequence(subject_id="ok", label=ClassLabel.CONTROL, channels=np.ones((4, 5)))
    ds = Dataset(sequences=(seq, two), provenance="t", test_id=0)
    with pytest.raises(DatasetError):
        write_dataset(tmp_path / "out", ds)
