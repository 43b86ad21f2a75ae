"""Command-line pipeline: ingest, synth, evaluate, ensemble, compare,
describe-model.

Every run is seeded explicitly (never from the clock) and writes a
manifest that, fed back through ``--config``, reproduces the run byte for
byte. Options beat config-file values, which beat defaults. The default
output root may be set once via the ``DEEPESN_OUT_ROOT`` environment
variable. Existing artifacts are never overwritten without ``--force``.
"""

from __future__ import annotations

import functools
import os
from pathlib import Path

import click

from . import __version__
from .bundle import load_bundle
from .data import (
    MANIFEST_NAME,
    STATIC_SPIRAL_TEST,
    ClassLabel,
    build_dataset,
    label_from_text,
    label_to_text,
    read_dataset,
    synth_dataset,
    write_dataset,
)
from .evaluation import (
    CLASS_ORDER,
    GridPoint,
    HyperGrid,
    PurityAudit,
    ensemble_evaluate,
    format_percent,
    grid_search,
    make_fold_plan,
    mcnemar,
)
from .exceptions import DeepEsnError
from .numerics import spectral_norm, spectral_radius
from .readout import train_readout
from .reporting import (
    read_predictions,
    write_predictions,
    write_run_manifest,
    write_score_table,
    write_summary,
)
from .reservoir import DeepEsnConfig, build_stack, run_sequence
from .bundle import save_bundle

ENV_OUT_ROOT = "DEEPESN_OUT_ROOT"

_REPORT_FILES = ("scores.csv", "summary.csv", "predictions.csv", "manifest.txt")


def _fail(message: str) -> "click.ClickException":
    return click.ClickException(message)


def _pipeline_errors(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except DeepEsnError as exc:
            raise _fail(str(exc))
        except OSError as exc:
            raise _fail(str(exc))

    return wrapper


def _resolve_out(out: str | None, name: str) -> Path:
    if out is not None:
        return Path(out)
    root = os.environ.get(ENV_OUT_ROOT)
    if root:
        return Path(root) / name
    raise _fail(f"no --out given and {ENV_OUT_ROOT} is not set")


def _guard_outputs(out_dir: Path, names, force: bool) -> None:
    existing = [n for n in names if (out_dir / n).exists()]
    if existing and not force:
        raise _fail(
            f"{out_dir} already holds {', '.join(existing)}; pass --force to overwrite"
        )


def _read_config_file(path: str) -> dict:
    settings = {}
    for number, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        if "=" not in text:
            raise _fail(f"{path}:{number}: expected 'key = value', got {text!r}")
        key, value = text.split("=", 1)
        settings[key.strip()] = value.strip()
    return settings


def _int_list(text) -> tuple[int, ...]:
    if isinstance(text, tuple):
        return text
    values = tuple(int(p) for p in str(text).split(",") if p.strip())
    if not values:
        raise _fail(f"empty integer list {text!r}")
    return tuple(sorted(set(values)))


def _float_list(text) -> tuple[float, ...]:
    if isinstance(text, tuple):
        return text
    values = tuple(float(p) for p in str(text).split(",") if p.strip())
    if not values:
        raise _fail(f"empty float list {text!r}")
    return tuple(sorted(set(values)))


_EVALUATE_DEFAULTS = {
    "seed": None,
    "data": None,
    "synth_n": None,
    "synth_length": 200,
    "synth_difficulty": 0.0,
    "layers": 10,
    "leak_rate": 0.1,
    "units": None,
    "input_scaling": None,
    "inter_layer_scaling": None,
    "spectral_radius": None,
    "ridge_lambda": None,
    "guesses": 10,
    "outer_folds": 3,
    "inner_folds": 5,
    "washout": 0,
    "workers": 1,
}

_CONVERTERS = {
    "seed": int,
    "data": str,
    "synth_n": int,
    "synth_length": int,
    "synth_difficulty": float,
    "layers": int,
    "leak_rate": float,
    "units": _int_list,
    "input_scaling": _float_list,
    "inter_layer_scaling": _float_list,
    "spectral_radius": _float_list,
    "ridge_lambda": _float_list,
    "guesses": int,
    "outer_folds": int,
    "inner_folds": int,
    "washout": int,
    "workers": int,
}


def _resolve_settings(flags: dict, config_path: str | None, defaults: dict) -> dict:
    config = _read_config_file(config_path) if config_path else {}
    unknown = set(config) - set(defaults)
    if unknown:
        raise _fail(f"unknown config keys: {', '.join(sorted(unknown))}")
    resolved = {}
    for key, default in defaults.items():
        if flags.get(key) is not None:
            resolved[key] = flags[key]
        elif key in config:
            resolved[key] = _CONVERTERS[key](config[key])
        else:
            resolved[key] = default
    return resolved


def _load_run_dataset(settings: dict):
    has_data = settings["data"] is not None
    has_synth = settings["synth_n"] is not None
    if has_data == has_synth:
        raise _fail("exactly one data source required: --data or --synth-n")
    if has_data:
        return read_dataset(settings["data"])
    return synth_dataset(
        seed=settings["seed"],
        n_per_class=settings["synth_n"],
        length=settings["synth_length"],
        difficulty=settings["synth_difficulty"],
    )


def _build_grid(settings: dict) -> HyperGrid:
    layers = settings["layers"]
    if layers < 1:
        raise _fail(f"layers must be >= 1, got {layers}")
    base = HyperGrid.default_deep() if layers > 1 else HyperGrid.default_shallow()
    return HyperGrid(
        units=settings["units"] or base.units,
        input_scalings=settings["input_scaling"] or base.input_scalings,
        inter_layer_scalings=settings["inter_layer_scaling"] or base.inter_layer_scalings,
        spectral_radii=settings["spectral_radius"] or base.spectral_radii,
        ridge_lambdas=settings["ridge_lambda"] or base.ridge_lambdas,
        num_layers=layers,
        leak_rate=settings["leak_rate"],
        guesses=settings["guesses"],
    )


def _manifest_settings(settings: dict) -> dict:
    out = dict(settings)
    for key in ("units", "input_scaling", "inter_layer_scaling", "spectral_radius", "ridge_lambda"):
        if out.get(key) is not None:
            out[key] = ",".join(repr(v) if isinstance(v, float) else str(v) for v in out[key])
    return out


def _model_label(layers: int) -> str:
    return "DeepESN" if layers > 1 else "shallowESN"


def _echo_summary(report, label: str) -> None:
    s = report.summary
    pct = format_percent
    click.echo(
        f"{label}: TR {pct(s.tr_inner_mean)} (std {pct(s.tr_inner_std)}), "
        f"VL {pct(s.vl_inner_mean)} (std {pct(s.vl_inner_std)}), "
        f"TS {pct(s.ts_mean)} (std {pct(s.ts_std)})"
    )
    pooled = report.ensemble_test
    click.echo(
        f"{label} ensemble: TR {pct(report.ensemble_train_accuracy)}, "
        f"VL {pct(report.ensemble_validation_accuracy)}, TS {pct(pooled.accuracy)}, "
        f"SEN {pct(pooled.sensitivity)}, SPEC {pct(pooled.specificity)}"
    )


def _save_models(out_dir: Path, dataset, plan, points, *, num_layers, leak_rate, guesses, master_seed, washout):
    from .numerics import derive_seed
    from .evaluation import _GUESS_TAG

    models_dir = out_dir / "models"
    models_dir.mkdir(parents=True, exist_ok=True)
    by_subject = dataset.by_subject()
    input_dim = dataset.sequences[0].channels.shape[0]
    for fold, point in enumerate(points):
        train_ids = plan.outer_train(fold)
        labels = [by_subject[sid].label for sid in train_ids]
        for g in range(guesses):
            config = DeepEsnConfig(
                num_layers=num_layers,
                units_per_layer=point.units,
                leak_rates=(leak_rate,) * num_layers,
                input_scaling=point.input_scaling,
                inter_layer_scaling=point.inter_layer_scaling,
                spectral_radius=point.spectral_radius,
                input_dim=input_dim,
                master_seed=derive_seed(master_seed, _GUESS_TAG, fold, g),
            )
            stack = build_stack(config)
            features = [
                run_sequence(stack, by_subject[sid].channels, washout=washout).mean_state
                for sid in train_ids
            ]
            readout = train_readout(features, labels, point.ridge_lambda, class_order=CLASS_ORDER)
            save_bundle(models_dir / f"fold{fold}_guess{g}.npz", stack, readout)


@click.group()
@click.version_option(version=__version__, prog_name="deepesn")
def main():
    """Deep echo state networks for pen-tablet spiral classification."""


@main.command()
@click.option("--root", required=True, type=click.Path(exists=True, file_okay=False), help="Source directory with one subdirectory per class.")
@click.option("--out", default=None, type=click.Path(), help="Canonical dataset directory to create.")
@click.option("--test-id", default=STATIC_SPIRAL_TEST, show_default=True, type=int, help="Keep only records with this test id.")
@click.option("--standardize", is_flag=True, help="Standardize each channel per sequence (off: raw values).")
@click.option("--control-dir", default="control", show_default=True, help="Subdirectory holding control subjects.")
@click.option("--pd-dir", default="parkinson", show_default=True, help="Subdirectory holding PD subjects.")
@click.option("--force", is_flag=True, help="Overwrite an existing dataset directory.")
@_pipeline_errors
def ingest(root, out, test_id, standardize, control_dir, pd_dir, force):
    """Convert raw tablet recordings into the canonical sequence format."""
    out_dir = _resolve_out(out, "ingest")
    _guard_outputs(out_dir, (MANIFEST_NAME,), force)
    layout = ((control_dir, ClassLabel.CONTROL), (pd_dir, ClassLabel.PD))
    dataset = build_dataset(root, test_id=test_id, standardize=standardize, layout=layout)
    write_dataset(out_dir, dataset, force=force)
    counts = dataset.class_counts()
    click.echo(
        f"ingested {len(dataset)} subjects "
        f"({counts[ClassLabel.PD]} PD, {counts[ClassLabel.CONTROL]} Control) -> {out_dir}"
    )


@main.command()
@click.option("--out", default=None, type=click.Path(), help="Canonical dataset directory to create.")
@click.option("--seed", required=True, type=int, help="Generator seed.")
@click.option("--n-per-class", default=30, show_default=True, type=int)
@click.option("--length", default=200, show_default=True, type=int)
@click.option("--difficulty", default=0.0, show_default=True, type=float)
@click.option("--force", is_flag=True, help="Overwrite an existing dataset directory.")
@_pipeline_errors
def synth(out, seed, n_per_class, length, difficulty, force):
    """Generate a synthetic labeled dataset in the canonical format."""
    out_dir = _resolve_out(out, "synth")
    _guard_outputs(out_dir, (MANIFEST_NAME,), force)
    dataset = synth_dataset(seed=seed, n_per_class=n_per_class, length=length, difficulty=difficulty)
    write_dataset(out_dir, dataset, force=force)
    click.echo(f"wrote {len(dataset)} synthetic subjects -> {out_dir}")


def _grid_options(func):
    options = [
        click.option("--config", "config_path", default=None, type=click.Path(exists=True, dir_okay=False), help="Key = value config file; flags win."),
        click.option("--data", default=None, type=click.Path(file_okay=False), help="Canonical dataset directory."),
        click.option("--synth-n", default=None, type=int, help="Synthetic subjects per class (replaces --data)."),
        click.option("--synth-length", default=None, type=int, help="Synthetic sequence length."),
        click.option("--synth-difficulty", default=None, type=float, help="Synthetic noise level."),
        click.option("--seed", default=None, type=int, help="Master seed (required; fold plan and reservoir guesses derive from it)."),
        click.option("--layers", default=None, type=int, help="Reservoir layers; 1 selects the shallow baseline grid."),
        click.option("--leak-rate", default=None, type=float),
        click.option("--guesses", default=None, type=int),
        click.option("--outer-folds", default=None, type=int),
        click.option("--inner-folds", default=None, type=int),
        click.option("--washout", default=None, type=int),
        click.option("--out", default=None, type=click.Path(), help="Report directory."),
        click.option("--force", is_flag=True, help="Overwrite existing report files."),
    ]
    for option in reversed(options):
        func = option(func)
    return func


@main.command()
@_grid_options
@click.option("--units", default=None, help="Grid override, e.g. 10,20,30.")
@click.option("--input-scaling", default=None, help="Grid override, e.g. 0.1,0.5.")
@click.option("--inter-layer-scaling", default=None, help="Grid override.")
@click.option("--spectral-radius", default=None, help="Grid override, e.g. 0.9,1.0.")
@click.option("--ridge-lambda", default=None, help="Grid override, e.g. 0,1e-6,1e-3.")
@click.option("--workers", default=None, type=int, help="Parallel worker processes for the grid search.")
@click.option("--save-models", is_flag=True, help="Also write per-fold, per-guess model bundles.")
@_pipeline_errors
def evaluate(config_path, save_models, force, out, **flags):
    """Nested cross-validation grid search, then ensembled evaluation.

    Selects one configuration per outer fold on inner validation accuracy,
    retrains it on the fold's training set, and reports per-guess and
    ensembled accuracies. Writes scores.csv, summary.csv, predictions.csv,
    and manifest.txt.
    """
    for key in ("units", "input_scaling", "inter_layer_scaling", "spectral_radius", "ridge_lambda"):
        if flags.get(key) is not None:
            flags[key] = _CONVERTERS[key](flags[key])
    settings = _resolve_settings(flags, config_path, _EVALUATE_DEFAULTS)
    if settings["seed"] is None:
        raise _fail("--seed is required (runs are never seeded from the clock)")
    out_dir = _resolve_out(out, "evaluate")
    _guard_outputs(out_dir, _REPORT_FILES, force)
    dataset = _load_run_dataset(settings)
    grid = _build_grid(settings)
    plan = make_fold_plan(
        dataset, settings["seed"], outer_folds=settings["outer_folds"], inner_folds=settings["inner_folds"]
    )
    result = grid_search(
        dataset,
        plan,
        grid,
        master_seed=settings["seed"],
        washout=settings["washout"],
        workers=settings["workers"],
    )
    result.audit.verify(plan, dataset.subject_ids())
    report = ensemble_evaluate(
        dataset,
        plan,
        result.selected_points,
        num_layers=grid.num_layers,
        leak_rate=grid.leak_rate,
        guesses=grid.guesses,
        master_seed=settings["seed"],
        washout=settings["washout"],
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    write_score_table(out_dir / "scores.csv", result)
    label = _model_label(grid.num_layers)
    write_summary(out_dir / "summary.csv", report, label)
    write_predictions(out_dir / "predictions.csv", report)
    write_run_manifest(
        out_dir / "manifest.txt",
        _manifest_settings(settings),
        provenance=dataset.provenance,
        version=__version__,
    )
    if save_models:
        _save_models(
            out_dir,
            dataset,
            plan,
            result.selected_points,
            num_layers=grid.num_layers,
            leak_rate=grid.leak_rate,
            guesses=grid.guesses,
            master_seed=settings["seed"],
            washout=settings["washout"],
        )
    for fold, point in enumerate(result.selected_points):
        click.echo(f"fold {fold} selected: {point}")
    _echo_summary(report, label)
    click.echo(f"reports -> {out_dir}")


_ENSEMBLE_DEFAULTS = dict(_EVALUATE_DEFAULTS)
del _ENSEMBLE_DEFAULTS["workers"]


@main.command()
@_grid_options
@click.option("--units", default=None, type=int, help="Units per layer of the fixed configuration.")
@click.option("--input-scaling", default=None, type=float)
@click.option("--inter-layer-scaling", default=None, type=float)
@click.option("--spectral-radius", default=None, type=float)
@click.option("--ridge-lambda", default=None, type=float)
@_pipeline_errors
def ensemble(config_path, force, out, **flags):
    """Evaluate one fixed configuration with multi-guess ensembling.

    Averages the raw readout score vectors of all reservoir guesses before
    the argmax. Writes summary.csv, predictions.csv, and manifest.txt.
    """
    for key in ("units", "input_scaling", "inter_layer_scaling", "spectral_radius", "ridge_lambda"):
        if flags.get(key) is not None:
            flags[key] = (flags[key],)
    settings = _resolve_settings(flags, config_path, _ENSEMBLE_DEFAULTS)
    if settings["seed"] is None:
        raise _fail("--seed is required (runs are never seeded from the clock)")
    for key in ("units", "input_scaling", "inter_layer_scaling", "spectral_radius", "ridge_lambda"):
        if settings[key] is None:
            raise _fail(f"--{key.replace('_', '-')} is required for a fixed-configuration run")
        if len(settings[key]) != 1:
            raise _fail(f"--{key.replace('_', '-')} takes a single value here, got {settings[key]}")
    point = GridPoint(
        units=settings["units"][0],
        input_scaling=settings["input_scaling"][0],
        inter_layer_scaling=settings["inter_layer_scaling"][0],
        spectral_radius=settings["spectral_radius"][0],
        ridge_lambda=settings["ridge_lambda"][0],
    )
    out_dir = _resolve_out(out, "ensemble")
    _guard_outputs(out_dir, _REPORT_FILES[1:], force)
    dataset = _load_run_dataset(settings)
    plan = make_fold_plan(
        dataset, settings["seed"], outer_folds=settings["outer_folds"], inner_folds=settings["inner_folds"]
    )
    audit = PurityAudit.empty(plan.n_outer)
    report = ensemble_evaluate(
        dataset,
        plan,
        point,
        num_layers=settings["layers"],
        leak_rate=settings["leak_rate"],
        guesses=settings["guesses"],
        master_seed=settings["seed"],
        washout=settings["washout"],
        audit=audit,
    )
    audit.verify(plan, dataset.subject_ids())
    out_dir.mkdir(parents=True, exist_ok=True)
    label = _model_label(settings["layers"])
    write_summary(out_dir / "summary.csv", report, label)
    write_predictions(out_dir / "predictions.csv", report)
    write_run_manifest(
        out_dir / "manifest.txt",
        _manifest_settings(settings),
        provenance=dataset.provenance,
        version=__version__,
    )
    _echo_summary(report, label)
    click.echo(f"reports -> {out_dir}")


@main.command()
@click.argument("first", type=click.Path(exists=True, dir_okay=False))
@click.argument("second", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", default=None, type=click.Path(), help="Also write the result as a key = value file.")
@_pipeline_errors
def compare(first, second, out):
    """McNemar test between two predictions.csv files."""
    rows_a = read_predictions(first)
    rows_b = read_predictions(second)
    map_a = {r["subject_id"]: r for r in rows_a}
    map_b = {r["subject_id"]: r for r in rows_b}
    if len(map_a) != len(rows_a) or len(map_b) != len(rows_b):
        raise _fail("duplicate subject ids in a predictions file")
    only_a = sorted(set(map_a) - set(map_b))
    only_b = sorted(set(map_b) - set(map_a))
    if only_a or only_b:
        offender = (only_a or only_b)[0]
        raise _fail(f"subject sets differ between the two files; first offender: {offender}")
    subjects = sorted(map_a)
    truth = []
    preds_a = []
    preds_b = []
    for sid in subjects:
        ta = map_a[sid]["truth"]
        tb = map_b[sid]["truth"]
        if ta != tb:
            raise _fail(f"truth labels disagree for subject {sid}: {ta} vs {tb}")
        truth.append(label_from_text(ta))
        preds_a.append(label_from_text(map_a[sid]["prediction"]))
        preds_b.append(label_from_text(map_b[sid]["prediction"]))
    result = mcnemar(preds_a, preds_b, truth)
    click.echo(f"b (first right, second wrong) = {result.b}")
    click.echo(f"c (second right, first wrong) = {result.c}")
    click.echo(f"method = {result.method}")
    click.echo(f"statistic = {result.statistic!r}")
    click.echo(f"p_value = {result.p_value!r}")
    if out is not None:
        Path(out).write_text(
            "\n".join(
                [
                    f"b = {result.b}",
                    f"c = {result.c}",
                    f"method = {result.method}",
                    f"statistic = {result.statistic!r}",
                    f"p_value = {result.p_value!r}",
                ]
            )
            + "\n",
            encoding="utf-8",
        )
        click.echo(f"result -> {out}")


@main.command(name="describe-model")
@click.argument("bundle", type=click.Path(exists=True, dir_okay=False))
@_pipeline_errors
def describe_model(bundle):
    """Print the configuration and weight summary of a model bundle."""
    stack, readout = load_bundle(bundle)
    cfg = stack.config
    click.echo(f"bundle: {bundle}")
    click.echo(f"num_layers = {cfg.num_layers}")
    click.echo(f"units_per_layer = {cfg.units_per_layer}")
    click.echo(f"leak_rates = {','.join(repr(a) for a in cfg.leak_rates)}")
    click.echo(f"input_scaling = {cfg.input_scaling!r}")
    click.echo(f"inter_layer_scaling = {cfg.inter_layer_scaling!r}")
    click.echo(f"spectral_radius = {cfg.spectral_radius!r}")
    click.echo(f"input_dim = {cfg.input_dim}")
    click.echo(f"master_seed = {cfg.master_seed}")
    click.echo(
        f"input_weights: shape {stack.input_weights.shape}, "
        f"spectral norm {spectral_norm(stack.input_weights)!r}"
    )
    for layer in range(1, cfg.num_layers + 1):
        rho = spectral_radius(stack.effective_transition(layer))
        click.echo(f"layer {layer}: effective spectral radius {rho!r}")
    if readout is None:
        click.echo("readout: none")
    else:
        classes = ",".join(label_to_text(c) for c in readout.class_labels)
        click.echo(f"readout: classes {classes}, weights shape {readout.weights.shape}")


if __name__ == "__main__":
    main()
