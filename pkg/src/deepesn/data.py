"""Tablet recordings: parsing, datasets, synthesis, and the on-disk format.

Source files
------------
One record per line, seven semicolon-separated integer fields in the order

    X;Y;Z;Pressure;GripAngle;Timestamp;Test_ID

Records are filtered by test id at parse time. Model sequences use exactly
four channels in the pinned order (x, y, pressure, grip_angle); z and the
timestamp are ingested but never enter the model. Values stay raw unless
per-sequence standardization is explicitly requested, and the choice is
recorded in the dataset provenance either way.

Canonical sequence format
-------------------------
``write_dataset`` stores one UTF-8 text file per subject, ``\\n`` line
endings, named ``<subject_id>.seq``:

    line 1:        <subject_id>;<label>;<test_id>     label is Control or PD
    lines 2..n+1:  <x>;<y>;<pressure>;<grip_angle>    repr() of each float64

``repr`` emits the shortest string that round-trips the float64 bit
pattern, so read-back datasets are bit-identical to what was written.
A ``manifest.csv`` lists provenance and one ``subject_id;label;length``
row per subject; read order follows the manifest, preserving dataset order.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import DatasetError, ParseError, UndefinedMetricError
from .numerics import derive_seed

__all__ = [
    "ClassLabel",
    "TabletRecord",
    "Sequence",
    "Dataset",
    "STATIC_SPIRAL_TEST",
    "DYNAMIC_SPIRAL_TEST",
    "STABILITY_TEST",
    "CHANNEL_NAMES",
    "label_to_text",
    "label_from_text",
    "parse_tablet_file",
    "sequence_from_records",
    "build_dataset",
    "synth_dataset",
    "pressure_label_correlation",
    "write_dataset",
    "read_dataset",
]


class ClassLabel(enum.IntEnum):
    """Diagnostic class; the integer is the readout class index."""

    CONTROL = 0
    PD = 1


_LABEL_TEXT = {ClassLabel.CONTROL: "Control", ClassLabel.PD: "PD"}
_TEXT_LABEL = {text: label for label, text in _LABEL_TEXT.items()}

# test ids as coded in the source recordings
STATIC_SPIRAL_TEST = 0
DYNAMIC_SPIRAL_TEST = 1
STABILITY_TEST = 2

CHANNEL_NAMES = ("x", "y", "pressure", "grip_angle")
N_CHANNELS = len(CHANNEL_NAMES)
_PRESSURE_CHANNEL = CHANNEL_NAMES.index("pressure")

_FIELD_COUNT = 7
MANIFEST_NAME = "manifest.csv"
SEQUENCE_SUFFIX = ".seq"


def label_to_text(label: ClassLabel) -> str:
    return _LABEL_TEXT[ClassLabel(label)]


def label_from_text(text: str) -> ClassLabel:
    try:
        return _TEXT_LABEL[text]
    except KeyError:
        raise ValueError(f"unknown class label {text!r}, expected one of {sorted(_TEXT_LABEL)}")


@dataclass(frozen=True)
class TabletRecord:
    """One raw pen sample, all fields as recorded."""

    x: int
    y: int
    z: int
    pressure: int
    grip_angle: int
    timestamp: int
    test_id: int


@dataclass(frozen=True)
class Sequence:
    """One subject's recording as model channels.

    ``channels`` is float64 with shape (4, n_steps), rows in the order
    (x, y, pressure, grip_angle).
    """

    subject_id: str
    label: ClassLabel
    channels: np.ndarray = field(repr=False)

    def __post_init__(self):
        ch = np.asarray(self.channels, dtype=np.float64)
        if ch.ndim != 2 or ch.shape[0] != N_CHANNELS:
            raise DatasetError(
                f"{self.subject_id}: channels must have shape ({N_CHANNELS}, n), got {ch.shape}"
            )
        if ch.shape[1] < 1:
            raise DatasetError(f"{self.subject_id}: sequence must have at least one step")
        if not np.all(np.isfinite(ch)):
            raise DatasetError(f"{self.subject_id}: channels contain non-finite values")
        ch.setflags(write=False)
        object.__setattr__(self, "channels", ch)
        object.__setattr__(self, "label", ClassLabel(self.label))

    @property
    def n_steps(self) -> int:
        return self.channels.shape[1]


@dataclass(frozen=True)
class Dataset:
    """An ordered collection of subject sequences with provenance.

    ``test_id`` is the filter the sequences came from (-1 for synthetic
    data). Subject ids must be unique and both classes may be counted via
    :meth:`class_counts`.
    """

    sequences: tuple[Sequence, ...]
    provenance: str
    test_id: int

    def __post_init__(self):
        object.__setattr__(self, "sequences", tuple(self.sequences))
        seen = set()
        for seq in self.sequences:
            if seq.subject_id in seen:
                raise DatasetError(f"duplicate subject id {seq.subject_id!r}")
            seen.add(seq.subject_id)

    def __len__(self) -> int:
        return len(self.sequences)

    def __iter__(self):
        return iter(self.sequences)

    def class_counts(self) -> dict[ClassLabel, int]:
        counts = {ClassLabel.CONTROL: 0, ClassLabel.PD: 0}
        for seq in self.sequences:
            counts[seq.label] += 1
        return counts

    def subject_ids(self) -> tuple[str, ...]:
        return tuple(seq.subject_id for seq in self.sequences)

    def by_subject(self) -> dict[str, Sequence]:
        return {seq.subject_id: seq for seq in self.sequences}


def parse_tablet_file(path, expected_test_id: int | None) -> list[TabletRecord]:
    """Parse one source file, keeping records that match ``expected_test_id``.

    ``None`` keeps every record. Malformed lines raise :class:`ParseError`
    naming the 1-based line number; an empty file yields an empty list.
    """
    records = []
    path = Path(path)
    with open(path, encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            text = line.strip()
            if not text:
                continue
            parts = [p.strip() for p in text.split(";")]
            if len(parts) != _FIELD_COUNT:
                raise ParseError(
                    f"{path.name}:{line_number}: expected {_FIELD_COUNT} fields, got {len(parts)}",
                    line_number=line_number,
                    text=text,
                )
            try:
                values = [int(p) for p in parts]
            except ValueError:
                raise ParseError(
                    f"{path.name}:{line_number}: non-integer field in {text!r}",
                    line_number=line_number,
                    text=text,
                )
            record = TabletRecord(*values)
            if expected_test_id is None or record.test_id == expected_test_id:
                records.append(record)
    return records


def _standardize(channels: np.ndarray) -> np.ndarray:
    out = np.empty_like(channels)
    for i in range(channels.shape[0]):
        row = channels[i]
        mean = row.mean()
        std = row.std()
        # a constant channel has no scale; emit centered zeros
        out[i] = (row - mean) / std if std > 0.0 else row - mean
    return out


def sequence_from_records(
    subject_id: str, label: ClassLabel, records, standardize: bool = False
) -> Sequence:
    """Build a model sequence from parsed records (channel order pinned)."""
    if not records:
        raise DatasetError(f"{subject_id}: no records to build a sequence from")
    channels = np.array(
        [
            [r.x for r in records],
            [r.y for r in records],
            [r.pressure for r in records],
            [r.grip_angle for r in records],
        ],
        dtype=np.float64,
    )
    if standardize:
        channels = _standardize(channels)
    return Sequence(subject_id=subject_id, label=label, channels=channels)


DEFAULT_LAYOUT = (("control", ClassLabel.CONTROL), ("parkinson", ClassLabel.PD))


def build_dataset(
    root,
    test_id: int = STATIC_SPIRAL_TEST,
    standardize: bool = False,
    layout=DEFAULT_LAYOUT,
) -> Dataset:
    """Ingest a source directory tree into a :class:`Dataset`.

    ``layout`` maps subdirectory names under ``root`` to class labels.
    Every regular file in a class directory is one subject; the subject id
    is the file stem. Files with no record matching ``test_id`` are
    skipped. Either class ending up empty is an error.
    """
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset root {root} is not a directory")
    sequences = []
    for subdir, label in layout:
        class_dir = root / subdir
        if not class_dir.is_dir():
            raise DatasetError(f"missing class directory {class_dir}")
        for path in sorted(class_dir.iterdir()):
            if not path.is_file():
                continue
            records = parse_tablet_file(path, test_id)
            if not records:
                continue
            sequences.append(
                sequence_from_records(path.stem, label, records, standardize=standardize)
            )
    provenance = f"source={root}|test_id={test_id}|standardize={standardize}"
    dataset = Dataset(sequences=tuple(sequences), provenance=provenance, test_id=test_id)
    counts = dataset.class_counts()
    for label in (ClassLabel.CONTROL, ClassLabel.PD):
        if counts[label] == 0:
            raise DatasetError(f"no {label_to_text(label)} subjects found under {root}")
    return dataset


# synthetic data: class identity lives purely in per-channel oscillation
# frequency around a shared offset, so channel means carry no class signal
_SYNTH_OFFSET = 0.3
_SYNTH_AMPLITUDE = 0.7
_SYNTH_PERIODS = {
    ClassLabel.CONTROL: (40.0, 36.0, 44.0, 48.0),
    ClassLabel.PD: (12.0, 10.0, 14.0, 16.0),
}
_SYNTH_TAG = 0x517E


def synth_dataset(seed: int, n_per_class: int, length: int, difficulty: float) -> Dataset:
    """Generate a labeled synthetic dataset with tunable difficulty.

    Each channel of each subject is ``offset + A sin(2 pi t / period + phase)``
    plus Gaussian noise scaled by ``difficulty``; the period depends only on
    the class. ``difficulty = 0`` gives noise-free, frequency-separable
    classes; large values drown the oscillation.
    """
    if n_per_class < 1:
        raise ValueError(f"n_per_class must be >= 1, got {n_per_class}")
    if length < 2:
        raise ValueError(f"length must be >= 2, got {length}")
    if not difficulty >= 0.0:
        raise ValueError(f"difficulty must be >= 0, got {difficulty}")
    t = np.arange(length, dtype=np.float64)
    sequences = []
    for label, prefix in ((ClassLabel.CONTROL, "ctrl"), (ClassLabel.PD, "pd")):
        periods = _SYNTH_PERIODS[label]
        for i in range(n_per_class):
            rng = np.random.Generator(
                np.random.PCG64(derive_seed(seed, _SYNTH_TAG, int(label), i))
            )
            channels = np.empty((N_CHANNELS, length))
            for c in range(N_CHANNELS):
                phase = rng.uniform(0.0, 2.0 * math.pi)
                wave = _SYNTH_OFFSET + _SYNTH_AMPLITUDE * np.sin(
                    2.0 * math.pi * t / periods[c] + phase
                )
                noise = rng.standard_normal(length)
                channels[c] = wave + difficulty * noise
            sequences.append(
                Sequence(subject_id=f"{prefix}_{i:03d}", label=label, channels=channels)
            )
    provenance = (
        f"synth|seed={seed}|n_per_class={n_per_class}|length={length}|difficulty={difficulty}"
    )
    return Dataset(sequences=tuple(sequences), provenance=provenance, test_id=-1)


def pressure_label_correlation(dataset: Dataset) -> float:
    """Point-biserial correlation between mean pressure and label (PD = 1).

    Raises :class:`UndefinedMetricError` when either variable has zero
    variance (single class, or identical mean pressures).
    """
    if len(dataset) < 2:
        raise UndefinedMetricError("correlation needs at least two subjects")
    pressures = np.array([seq.channels[_PRESSURE_CHANNEL].mean() for seq in dataset])
    labels = np.array([float(seq.label) for seq in dataset])
    p_std = pressures.std()
    l_std = labels.std()
    if p_std == 0.0 or l_std == 0.0:
        raise UndefinedMetricError("correlation undefined: zero variance in pressure or labels")
    cov = float(np.mean((pressures - pressures.mean()) * (labels - labels.mean())))
    return cov / float(p_std * l_std)


def _check_subject_id(subject_id: str) -> str:
    if not subject_id or ";" in subject_id or "\n" in subject_id or "/" in subject_id:
        raise DatasetError(f"subject id unusable as a file name: {subject_id!r}")
    return subject_id


def write_dataset(directory, dataset: Dataset, force: bool = False) -> None:
    """Write ``dataset`` in the canonical on-disk format.

    Refuses to overwrite an existing manifest unless ``force`` is set.
    """
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    if manifest_path.exists() and not force:
        raise DatasetError(f"{manifest_path} exists; pass force=True to overwrite")
    directory.mkdir(parents=True, exist_ok=True)
    counts = dataset.class_counts()
    lines = [
        f"# provenance: {dataset.provenance}",
        f"# test_id: {dataset.test_id}",
        f"# control_count: {counts[ClassLabel.CONTROL]}",
        f"# pd_count: {counts[ClassLabel.PD]}",
        "subject_id;label;length",
    ]
    for seq in dataset:
        sid = _check_subject_id(seq.subject_id)
        lines.append(f"{sid};{label_to_text(seq.label)};{seq.n_steps}")
        rows = [f"{sid};{label_to_text(seq.label)};{dataset.test_id}"]
        # repr of the builtin float, not the numpy scalar (whose repr
        # carries a type wrapper and would not parse back)
        x, y, p, g = (ch.tolist() for ch in seq.channels)
        for tstep in range(seq.n_steps):
            rows.append(f"{x[tstep]!r};{y[tstep]!r};{p[tstep]!r};{g[tstep]!r}")
        (directory / f"{sid}{SEQUENCE_SUFFIX}").write_text("\n".join(rows) + "\n", encoding="utf-8")
    manifest_path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _read_sequence_file(path: Path, expected_test_id: int) -> Sequence:
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ParseError(f"{path.name}: empty sequence file", line_number=1, text="")
    header = lines[0].split(";")
    if len(header) != 3:
        raise ParseError(f"{path.name}:1: bad header {lines[0]!r}", line_number=1, text=lines[0])
    subject_id, label_text, test_id_text = header
    if int(test_id_text) != expected_test_id:
        raise ParseError(
            f"{path.name}:1: test_id {test_id_text} does not match manifest {expected_test_id}",
            line_number=1,
            text=lines[0],
        )
    values = []
    for line_number, text in enumerate(lines[1:], start=2):
        if not text:
            continue
        parts = text.split(";")
        if len(parts) != N_CHANNELS:
            raise ParseError(
                f"{path.name}:{line_number}: expected {N_CHANNELS} fields, got {len(parts)}",
                line_number=line_number,
                text=text,
            )
        try:
            values.append([float(p) for p in parts])
        except ValueError:
            raise ParseError(
                f"{path.name}:{line_number}: non-numeric field in {text!r}",
                line_number=line_number,
                text=text,
            )
    channels = np.array(values, dtype=np.float64).T
    return Sequence(subject_id=subject_id, label=label_from_text(label_text), channels=channels)


def read_dataset(directory) -> Dataset:
    """Read a canonical dataset directory back, bit-identically."""
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    if not manifest_path.is_file():
        raise DatasetError(f"no manifest at {manifest_path}")
    provenance = ""
    test_id = None
    rows = []
    for line in manifest_path.read_text(encoding="utf-8").splitlines():
        if line.startswith("# provenance: "):
            provenance = line[len("# provenance: ") :]
        elif line.startswith("# test_id: "):
            test_id = int(line[len("# test_id: ") :])
        elif line.startswith("#") or not line or line == "subject_id;label;length":
            continue
        else:
            rows.append(line.split(";"))
    if test_id is None:
        raise DatasetError(f"{manifest_path}: missing test_id header")
    sequences = []
    for row in rows:
        if len(row) != 3:
            raise DatasetError(f"{manifest_path}: bad manifest row {';'.join(row)!r}")
        subject_id, label_text, length_text = row
        seq = _read_sequence_file(directory / f"{subject_id}{SEQUENCE_SUFFIX}", test_id)
        if seq.subject_id != subject_id or seq.n_steps != int(length_text):
            raise DatasetError(
                f"{subject_id}: sequence file disagrees with manifest "
                f"(id {seq.subject_id!r}, {seq.n_steps} steps vs {length_text})"
            )
        if label_from_text(label_text) != seq.label:
            raise DatasetError(f"{subject_id}: label mismatch between manifest and file")
        sequences.append(seq)
    return Dataset(sequences=tuple(sequences), provenance=provenance, test_id=test_id)
