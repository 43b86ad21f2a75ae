"""Report files written by an evaluation run.

All writers are deterministic: no timestamps, no environment-dependent
content, floats rendered by ``repr`` (shortest round-trip form). Re-running
the same configuration therefore reproduces every file byte for byte.

Files
-----
``scores.csv``
    One row per fold x configuration x guess with all four accuracy
    readings.
``summary.csv``
    Mirrors the usual results-table layout: per-model mean (std) accuracy
    for train/validation/test plus test sensitivity/specificity, with the
    ensemble row and per-fold ensemble rows.
``predictions.csv``
    Ensembled per-subject test predictions, consumable by the compare
    command (McNemar).
``manifest.txt``
    The resolved run configuration in ``key = value`` form (readable back
    through ``--config``) plus provenance comments.
"""

from __future__ import annotations

import csv
from pathlib import Path

from .data import label_to_text
from .evaluation import EvaluationReport, GridSearchResult, format_percent

__all__ = [
    "write_score_table",
    "write_summary",
    "write_predictions",
    "write_run_manifest",
    "read_predictions",
]

_SCORE_HEADER = [
    "fold",
    "config_index",
    "units",
    "input_scaling",
    "inter_layer_scaling",
    "spectral_radius",
    "ridge_lambda",
    "guess",
    "tr_inner",
    "vl_inner",
    "tr_retrained",
    "ts_accuracy",
]


def _open_csv(path):
    return open(path, "w", newline="", encoding="utf-8")


def write_score_table(path, result: GridSearchResult) -> None:
    """Write the full grid-search score table."""
    with _open_csv(path) as handle:
        writer = csv.writer(handle)
        writer.writerow(_SCORE_HEADER)
        for row in result.rows:
            writer.writerow(
                [
                    row.fold,
                    row.config_index,
                    row.point.units,
                    repr(row.point.input_scaling),
                    repr(row.point.inter_layer_scaling),
                    repr(row.point.spectral_radius),
                    repr(row.point.ridge_lambda),
                    row.guess,
                    repr(row.tr_inner),
                    repr(row.vl_inner),
                    repr(row.tr_retrained),
                    repr(row.ts_accuracy),
                ]
            )


_SUMMARY_HEADER = [
    "model",
    "row",
    "tr_inner",
    "tr_inner_std",
    "vl_inner",
    "vl_inner_std",
    "tr_retrained",
    "tr_retrained_std",
    "ts_accuracy",
    "ts_std",
    "ts_sensitivity",
    "ts_specificity",
]


def write_summary(path, report: EvaluationReport, model_label: str) -> None:
    """Write the aggregate summary table.

    The ``guess_mean`` row carries means and population stds over guesses
    (TR/VL from inner folds, TS pooled over subjects). The ``ensemble``
    rows average score vectors over guesses before the argmax; only they
    carry sensitivity/specificity, which are exact subject-level counts.
    """
    s = report.summary
    with _open_csv(path) as handle:
        writer = csv.writer(handle)
        writer.writerow(_SUMMARY_HEADER)
        writer.writerow(
            [
                model_label,
                "guess_mean",
                format_percent(s.tr_inner_mean),
                format_percent(s.tr_inner_std),
                format_percent(s.vl_inner_mean),
                format_percent(s.vl_inner_std),
                format_percent(s.tr_retrained_mean),
                format_percent(s.tr_retrained_std),
                format_percent(s.ts_mean),
                format_percent(s.ts_std),
                "",
                "",
            ]
        )
        pooled = report.ensemble_test
        writer.writerow(
            [
                model_label,
                "ensemble",
                format_percent(report.ensemble_train_accuracy),
                "",
                format_percent(report.ensemble_validation_accuracy),
                "",
                "",
                "",
                format_percent(pooled.accuracy),
                "",
                format_percent(pooled.sensitivity),
                format_percent(pooled.specificity),
            ]
        )
        for fe in report.folds:
            writer.writerow(
                [
                    model_label,
                    f"ensemble_fold_{fe.fold}",
                    format_percent(fe.ensemble_train_accuracy),
                    "",
                    format_percent(fe.ensemble_validation_accuracy),
                    "",
                    "",
                    "",
                    format_percent(fe.ensemble_test.accuracy),
                    "",
                    format_percent(fe.ensemble_test.sensitivity),
                    format_percent(fe.ensemble_test.specificity),
                ]
            )


_PREDICTION_HEADER = ["subject_id", "truth", "prediction", "score_control", "score_pd", "fold"]


def write_predictions(path, report: EvaluationReport) -> None:
    """Write ensembled per-subject test predictions."""
    fold_of = {}
    for fe in report.folds:
        for p in fe.test_predictions:
            fold_of[p.subject_id] = fe.fold
    with _open_csv(path) as handle:
        writer = csv.writer(handle)
        writer.writerow(_PREDICTION_HEADER)
        for p in report.predictions:
            writer.writerow(
                [
                    p.subject_id,
                    label_to_text(p.truth),
                    label_to_text(p.prediction),
                    repr(p.scores[0]),
                    repr(p.scores[1]),
                    fold_of[p.subject_id],
                ]
            )


def read_predictions(path) -> list[dict]:
    """Read a predictions file back as a list of row dicts."""
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        rows = list(reader)
    for required in _PREDICTION_HEADER[:3]:
        if rows and required not in rows[0]:
            raise ValueError(f"{path}: missing column {required!r}")
    return rows


def write_run_manifest(path, settings: dict, *, provenance: str, version: str) -> None:
    """Write the resolved run configuration in config-file syntax.

    ``settings`` keys are CLI option names; values are rendered with
    ``str``. Comment lines carry provenance and the software version. The
    output path is deliberately not recorded so a re-run into a different
    directory stays byte-identical.
    """
    lines = [
        f"# deepesn version: {version}",
        f"# dataset provenance: {provenance}",
    ]
    for key in sorted(settings):
        value = settings[key]
        if value is None:
            continue
        lines.append(f"{key} = {value}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
