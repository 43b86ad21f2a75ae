"""End-to-end command-line pipeline tests (CliRunner, tiny workloads)."""

import csv

import pytest
from click.testing import CliRunner

from deepesn.cli import main
from deepesn.data import read_dataset

TINY_EVALUATE = [
    "evaluate",
    "--synth-n", "4",
    "--synth-length", "40",
    "--seed", "5",
    "--layers", "2",
    "--leak-rate", "0.5",
    "--units", "6",
    "--input-scaling", "1.0",
    "--inter-layer-scaling", "1.0",
    "--spectral-radius", "0.9",
    "--ridge-lambda", "1e-4",
    "--guesses", "2",
    "--outer-folds", "2",
    "--inner-folds", "2",
]


@pytest.fixture
def runner():
    return CliRunner()


def invoke_ok(runner, args, **kw):
    result = runner.invoke(main, args, catch_exceptions=False, **kw)
    assert result.exit_code == 0, result.output
    return result


def write_raw_tree(root):
    """Two-class source tree in the seven-field tablet format."""
    for sub, prefix, n in (("control", "c", 3), ("parkinson", "p", 3)):
        (root / sub).mkdir(parents=True)
        for i in range(n):
            lines = []
            for t in range(12):
                x, y = 100 + 7 * t + i, 2000 - 3 * t
                p, g = 400 + (11 * t) % 13, 500 + t
                lines.append(f"{x};{y};5;{p};{g};{1000 + 10 * t};0")
                # interleave a record from another test, to be filtered out
                lines.append(f"{x + 1};{y + 1};5;{p + 1};{g + 1};{1005 + 10 * t};1")
            (root / sub / f"{prefix}{i}.txt").write_text("\n".join(lines) + "\n")


def write_prediction_file(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["subject_id", "truth", "prediction", "score_control", "score_pd", "fold"])
        writer.writerows(rows)


# ------------------------------------------------------------------ basics

def test_version_and_help(runner):
    assert "0.1.0" in invoke_ok(runner, ["--version"]).output
    out = invoke_ok(runner, ["--help"]).output
    for command in ("ingest", "synth", "evaluate", "ensemble", "compare", "describe-model"):
        assert command in out


# ------------------------------------------------------------------- synth

def test_synth_writes_canonical_dataset(runner, tmp_path):
    out = tmp_path / "data"
    result = invoke_ok(runner, ["synth", "--out", str(out), "--seed", "3",
                                "--n-per-class", "2", "--length", "15"])
    assert "wrote 4 synthetic subjects" in result.output
    ds = read_dataset(out)
    assert len(ds) == 4
    assert ds.test_id == -1
    assert (out / "manifest.csv").exists()

    denied = runner.invoke(main, ["synth", "--out", str(out), "--seed", "3",
                                  "--n-per-class", "2", "--length", "15"])
    assert denied.exit_code != 0
    assert "--force" in denied.output
    invoke_ok(runner, ["synth", "--out", str(out), "--seed", "3",
                       "--n-per-class", "2", "--length", "15", "--force"])


def test_out_root_env_fallback(runner, tmp_path):
    result = invoke_ok(
        runner,
        ["synth", "--seed", "4", "--n-per-class", "2", "--length", "10"],
        env={"DEEPESN_OUT_ROOT": str(tmp_path)},
    )
    assert str(tmp_path / "synth") in result.output
    assert (tmp_path / "synth" / "manifest.csv").exists()

    denied = runner.invoke(
        main,
        ["synth", "--seed", "4", "--n-per-class", "2", "--length", "10"],
        env={"DEEPESN_OUT_ROOT": None},
    )
    assert denied.exit_code != 0
    assert "DEEPESN_OUT_ROOT" in denied.output


# ------------------------------------------------------------------ ingest

def test_ingest_round_trip(runner, tmp_path):
    raw = tmp_path / "raw"
    write_raw_tree(raw)
    out = tmp_path / "canonical"
    result = invoke_ok(runner, ["ingest", "--root", str(raw), "--out", str(out)])
    assert "ingested 6 subjects (3 PD, 3 Control)" in result.output
    ds = read_dataset(out)
    assert len(ds) == 6
    assert ds.test_id == 0
    # the interleaved test-id-1 records were filtered out
    assert all(seq.channels.shape == (4, 12) for seq in ds.sequences)
    assert "standardize=False" in ds.provenance


def test_ingest_missing_class_dir_fails(runner, tmp_path):
    raw = tmp_path / "raw"
    (raw / "control").mkdir(parents=True)
    (raw / "control" / "c0.txt").write_text("1;2;3;4;5;6;0\n")
    result = runner.invoke(main, ["ingest", "--root", str(raw), "--out", str(tmp_path / "x")])
    assert result.exit_code != 0
    assert "parkinson" in result.output


# ---------------------------------------------------------------- evaluate

def test_evaluate_end_to_end(runner, tmp_path):
    out = tmp_path / "run1"
    result = invoke_ok(runner, TINY_EVALUATE + ["--out", str(out)])
    assert "fold 0 selected: GridPoint" in result.output
    assert "DeepESN ensemble:" in result.output
    for name in ("scores.csv", "summary.csv", "predictions.csv", "manifest.txt"):
        assert (out / name).exists(), name

    with open(out / "scores.csv", newline="") as handle:
        rows = list(csv.DictReader(handle))
    assert len(rows) == 2 * 1 * 2  # folds x configs x guesses
    assert rows[0]["units"] == "6"

    with open(out / "predictions.csv", newline="") as handle:
        preds = list(csv.DictReader(handle))
    assert len(preds) == 8
    assert {p["truth"] for p in preds} == {"Control", "PD"}

    with open(out / "summary.csv", newline="") as handle:
        summary = list(csv.DictReader(handle))
    assert [r["row"] for r in summary] == [
        "guess_mean", "ensemble", "ensemble_fold_0", "ensemble_fold_1",
    ]
    assert all(r["model"] == "DeepESN" for r in summary)

    denied = runner.invoke(main, TINY_EVALUATE + ["--out", str(out)])
    assert denied.exit_code != 0
    assert "--force" in denied.output


def test_evaluate_reruns_and_manifest_replay_are_byte_identical(runner, tmp_path):
    out1, out2, out3 = (tmp_path / n for n in ("a", "b", "c"))
    invoke_ok(runner, TINY_EVALUATE + ["--out", str(out1)])
    invoke_ok(runner, TINY_EVALUATE + ["--out", str(out2)])
    # replay the resolved manifest as the sole configuration source
    invoke_ok(runner, ["evaluate", "--config", str(out1 / "manifest.txt"),
                       "--out", str(out3)])
    for name in ("scores.csv", "summary.csv", "predictions.csv", "manifest.txt"):
        reference = (out1 / name).read_bytes()
        assert (out2 / name).read_bytes() == reference, name
        assert (out3 / name).read_bytes() == reference, name


def test_evaluate_flags_beat_config(runner, tmp_path):
    config = tmp_path / "run.cfg"
    config.write_text("# comment line\nseed = 5\nsynth_n = 4\nguesses = 3\n")
    out = tmp_path / "out"
    invoke_ok(runner, TINY_EVALUATE + ["--config", str(config), "--out", str(out)])
    manifest = (out / "manifest.txt").read_text()
    assert "guesses = 2" in manifest  # the flag from TINY_EVALUATE won
    assert "synth_n = 4" in manifest  # config filled the gap... flag agrees here
    assert "washout = 0" in manifest  # default


def test_evaluate_error_paths(runner, tmp_path):
    no_seed = [a for a in TINY_EVALUATE if a != "--seed" and a != "5"]
    result = runner.invoke(main, no_seed + ["--out", str(tmp_path / "x")])
    assert result.exit_code != 0 and "--seed is required" in result.output

    both = TINY_EVALUATE + ["--data", str(tmp_path), "--out", str(tmp_path / "y")]
    result = runner.invoke(main, both)
    assert result.exit_code != 0 and "exactly one data source" in result.output

    config = tmp_path / "bad.cfg"
    config.write_text("mystery_knob = 7\n")
    result = runner.invoke(main, TINY_EVALUATE + ["--config", str(config),
                                                  "--out", str(tmp_path / "z")])
    assert result.exit_code != 0 and "unknown config keys: mystery_knob" in result.output

    config.write_text("no equals sign here\n")
    result = runner.invoke(main, TINY_EVALUATE + ["--config", str(config),
                                                  "--out", str(tmp_path / "w")])
    assert result.exit_code != 0 and "key = value" in result.output


def test_evaluate_save_models_and_describe(runner, tmp_path):
    out = tmp_path / "run"
    invoke_ok(runner, TINY_EVALUATE + ["--out", str(out), "--save-models"])
    bundles = sorted(p.name for p in (out / "models").iterdir())
    assert bundles == [
        "fold0_guess0.npz", "fold0_guess1.npz",
        "fold1_guess0.npz", "fold1_guess1.npz",
    ]
    result = invoke_ok(runner, ["describe-model", str(out / "models" / "fold0_guess0.npz")])
    assert "num_layers = 2" in result.output
    assert "units_per_layer = 6" in result.output
    assert "layer 2: effective spectral radius" in result.output
    assert "readout: classes Control,PD" in result.output


# ---------------------------------------------------------------- ensemble

def test_ensemble_fixed_configuration(runner, tmp_path):
    out = tmp_path / "ens"
    result = invoke_ok(runner, [
        "ensemble", "--synth-n", "4", "--synth-length", "40", "--seed", "5",
        "--layers", "1", "--leak-rate", "0.5", "--units", "20",
        "--input-scaling", "1.0", "--inter-layer-scaling", "1.0",
        "--spectral-radius", "0.9", "--ridge-lambda", "1e-4",
        "--guesses", "2", "--outer-folds", "2", "--inner-folds", "2",
        "--out", str(out),
    ])
    assert "shallowESN ensemble:" in result.output
    for name in ("summary.csv", "predictions.csv", "manifest.txt"):
        assert (out / name).exists(), name
    assert not (out / "scores.csv").exists()

    missing = runner.invoke(main, [
        "ensemble", "--synth-n", "4", "--seed", "5", "--out", str(tmp_path / "m"),
    ])
    assert missing.exit_code != 0
    assert "--units is required" in missing.output


# ----------------------------------------------------------------- compare

def test_compare_reports_exact_mcnemar(runner, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    rows_a, rows_b = [], []
    for i in range(8):  # first model wrong, second right
        sid = f"s{i}"
        rows_a.append([sid, "PD", "Control", "0.9", "0.1", 0])
        rows_b.append([sid, "PD", "PD", "0.1", "0.9", 0])
    for i in range(2):  # both right
        sid = f"t{i}"
        rows_a.append([sid, "Control", "Control", "0.8", "0.2", 1])
        rows_b.append([sid, "Control", "Control", "0.7", "0.3", 1])
    write_prediction_file(a, rows_a)
    write_prediction_file(b, rows_b)
    out_file = tmp_path / "mcnemar.txt"
    result = invoke_ok(runner, ["compare", str(a), str(b), "--out", str(out_file)])
    assert "b (first right, second wrong) = 0" in result.output
    assert "c (second right, first wrong) = 8" in result.output
    assert "method = exact-binomial" in result.output
    assert "p_value = 0.0078125" in result.output
    text = out_file.read_text()
    assert "p_value = 0.0078125" in text


def test_compare_rejects_mismatched_inputs(runner, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_prediction_file(a, [["s0", "PD", "PD", "0", "1", 0],
                              ["s1", "PD", "PD", "0", "1", 0]])
    write_prediction_file(b, [["s0", "PD", "PD", "0", "1", 0],
                              ["s2", "PD", "PD", "0", "1", 0]])
    result = runner.invoke(main, ["compare", str(a), str(b)])
    assert result.exit_code != 0
    assert "first offender: s1" in result.output

    write_prediction_file(b, [["s0", "Control", "PD", "0", "1", 0],
                              ["s1", "PD", "PD", "0", "1", 0]])
    result = runner.invoke(main, ["compare", str(a), str(b)])
    assert result.exit_code != 0
    assert "truth labels disagree for subject s0" in result.output
