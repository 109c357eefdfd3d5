"""Command-line entry point: stage-wise commands plus a one-shot pipeline.

Every command reads its settings from built-in defaults, then an optional
flat JSON ``--config`` file, then explicit flags (last wins). The merged
settings, minus filesystem paths, are echoed into each output document.
Failures print a single JSON object on stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .data import (
    SCHEMA_VERSION,
    BundleError,
    SchemaVersionError,
    TaskSpec,
    atomic_write_text,
    check_schema,
    dump_json,
    load_epoch_bundle,
    save_epoch_bundle,
    select_task,
)
from .evaluation import VARIANT_ALIASES, EvalConfig, SaliencyMap, channel_significance, prepare_task, run_task
from .features import FeatureConfig, extract_features, load_features, save_features
from .mlp import TABLE2, MlpConfig, SearchSpace, random_search, save_model, train
from .preprocess import standardize_apply, standardize_fit
from .selection import MiConfig, SelectionReport, SffsConfig, hybrid_select
from .spectral import WelchConfig
from .synthetic import SyntheticSpec, generate
from .wavelet import MorletParams

log = logging.getLogger("mibci")

PATH_KEYS = ("bundle", "out", "features", "selection", "results", "config")

SYNTH_DEFAULTS = {
    "n_subjects": 4, "epochs_per_class": 60, "n_channels": 8, "fs": 250.0,
    "planted_channels": [2, 5], "planted_band": [8.0, 13.0], "effect_size": 2.0,
    "noise_level": 1.0, "gain_jitter": 0.3,
}
FEATURE_DEFAULTS = {"welch_segment_len": 64, "welch_overlap_step": 32, "omega0": 6.0}
SELECT_DEFAULTS = {"threshold": 0.03, "n_bins": 16, "k_max": 60, "patience": 10, "criterion_folds": 5}
MLP_DEFAULTS = {"mlp_mode": "table2", "table2": None, "search_trials": 100, "mlp_epochs": None}

COMMAND_DEFAULTS = {
    "gen-synthetic": {"seed": None, "force": False, **SYNTH_DEFAULTS},
    "extract": {"task": "I", **FEATURE_DEFAULTS},
    "select": {"seed": None, "variant": "hybrid", **SELECT_DEFAULTS},
    "train": {"seed": None, **MLP_DEFAULTS},
    "evaluate": {"seed": None, "task": "I", "variant": "all,mi,hybrid", "protocol": "loso",
                 **FEATURE_DEFAULTS, **SELECT_DEFAULTS, **MLP_DEFAULTS},
    "saliency": {"task": None, "variant": None},
    "pipeline": {"seed": None, "task": "I", "variant": "all,mi,hybrid", "protocol": "loso",
                 **FEATURE_DEFAULTS, **SELECT_DEFAULTS, **MLP_DEFAULTS},
}
STOCHASTIC = {"gen-synthetic", "select", "train", "evaluate", "pipeline"}


class CliError(Exception):
    """A user-facing failure with a short machine-readable kind."""

    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse usage errors become JSON too
        _emit_error("usage", message, self.prog)
        sys.exit(2)


def _emit_error(kind: str, message: str, command: str | None) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message, "command": command}, sort_keys=True) + "\n")


# -- settings -------------------------------------------------------------------------


def _csv_list(text, cast=str):
    if isinstance(text, (list, tuple)):
        return [cast(v) for v in text]
    return [cast(v) for v in str(text).split(",") if v != ""]


def _settings(command: str, args: argparse.Namespace) -> dict:
    cfg = dict(COMMAND_DEFAULTS[command])
    if args.config is not None:
        try:
            file_cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise CliError("missing_input", f"config file not found: {args.config}") from exc
        except json.JSONDecodeError as exc:
            raise CliError("bad_config", f"config file is not valid JSON: {exc}") from exc
        if not isinstance(file_cfg, dict) or any(isinstance(v, dict) for v in file_cfg.values()):
            raise CliError("bad_config", "config must be a flat JSON object")
        unknown = sorted(set(file_cfg) - set(cfg) - set(PATH_KEYS))
        if unknown:
            raise CliError("bad_config", f"unknown config keys for {command}: {unknown}")
        cfg.update(file_cfg)
    for key, value in vars(args).items():
        if key in ("command", "config") or value is None:
            continue
        if key == "force" and value is False:
            continue
        cfg[key] = value
    if command in STOCHASTIC and cfg.get("seed") is None:
        raise CliError("missing_seed", f"{command} needs --seed (or a 'seed' entry in --config)")
    if cfg.get("seed") is not None:
        cfg["seed"] = int(cfg["seed"])
    return cfg


def _echo(cfg: dict) -> dict:
    return {k: v for k, v in sorted(cfg.items()) if k not in PATH_KEYS}


def _require(cfg: dict, key: str) -> Path:
    if cfg.get(key) is None:
        raise CliError("usage", f"--{key} is required")
    return Path(cfg[key])


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _feature_config(cfg: dict) -> FeatureConfig:
    return FeatureConfig(
        welch=WelchConfig(int(cfg["welch_segment_len"]), int(cfg["welch_overlap_step"])),
        morlet=MorletParams(float(cfg["omega0"])),
    )


def _variants(cfg: dict) -> list[str]:
    out = []
    for v in _csv_list(cfg["variant"]):
        if v not in VARIANT_ALIASES:
            raise CliError("usage", f"unknown variant {v!r}; choose from all, mi, hybrid")
        out.append(VARIANT_ALIASES[v])
    return out


def _tasks(cfg: dict) -> list[TaskSpec]:
    try:
        return [TaskSpec.from_id(t) for t in _csv_list(cfg["task"])]
    except ValueError as exc:
        raise CliError("usage", f"unknown task in {cfg['task']!r}; choose from I..VI") from exc


def _mlp_base(cfg: dict, task_id: str) -> MlpConfig:
    row = cfg.get("table2") or task_id
    if row not in TABLE2:
        raise CliError("usage", f"--table2 must be one of {sorted(TABLE2)}")
    base = TABLE2[row]
    if cfg.get("mlp_epochs") is not None:
        base = replace(base, epochs=int(cfg["mlp_epochs"]))
    return base


def _search_space(cfg: dict) -> SearchSpace:
    space = SearchSpace(n_trials=int(cfg["search_trials"]))
    if cfg.get("mlp_epochs") is not None:
        space = replace(space, epochs=int(cfg["mlp_epochs"]))
    return space


def _load_bundle(cfg: dict):
    path = _require(cfg, "bundle")
    if not path.is_dir():
        raise CliError("missing_input", f"bundle directory not found: {path}")
    return load_epoch_bundle(path), _sha256(path / "data.bin")


def _finite_or_none(x):
    return None if x is None or (isinstance(x, float) and math.isnan(x)) else x


# -- commands ---------------------------------------------------------------------------


def cmd_gen_synthetic(cfg: dict) -> dict:
    out = _require(cfg, "out")
    spec_kwargs = {k: cfg[k] for k in SYNTH_DEFAULTS}
    spec_kwargs["planted_channels"] = tuple(_csv_list(cfg["planted_channels"], int))
    spec_kwargs["planted_band"] = tuple(_csv_list(cfg["planted_band"], float))
    try:
        spec = SyntheticSpec(**spec_kwargs, seed=cfg["seed"], allow_degenerate=bool(cfg["force"]))
    except ValueError as exc:
        hint = "; pass --force for the null control" if float(cfg["effect_size"]) == 1.0 else ""
        raise CliError("invalid_argument", f"{exc}{hint}") from exc
    epochs = generate(spec)
    save_epoch_bundle(epochs, out)
    atomic_write_text(out / "generator.json", dump_json(
        {"schema_version": SCHEMA_VERSION, "spec": spec.to_dict(), "config": _echo(cfg)}))
    return {"bundle": str(out), "n_epochs": epochs.n_epochs, "n_channels": epochs.n_channels}


def cmd_extract(cfg: dict) -> dict:
    out = _require(cfg, "out")
    epochs, digest = _load_bundle(cfg)
    task = _tasks(cfg)
    if len(task) != 1:
        raise CliError("usage", "extract takes exactly one task")
    ep = select_task(epochs, task[0])
    fm, models = extract_features(ep, _feature_config(cfg))
    save_features(fm, out, models, {"task": task[0].task_id.value, "channel_names": list(ep.channel_names),
                                    "bundle_sha256": digest, "config": _echo(cfg)})
    return {"features": str(out), "shape": list(fm.values.shape)}


def _read_features(cfg: dict):
    path = _require(cfg, "features")
    if not (path / "features.json").is_file():
        raise CliError("missing_input", f"no feature table in {path}; run extract first")
    return load_features(path)


def cmd_select(cfg: dict) -> dict:
    out = _require(cfg, "out")
    fm, doc = _read_features(cfg)
    variants = _variants(cfg)
    if len(variants) != 1 or variants[0] == "all_features":
        raise CliError("usage", "select runs one of --variant mi or --variant hybrid")
    fm = standardize_apply(standardize_fit(fm), fm)
    report = hybrid_select(
        fm,
        MiConfig(int(cfg["n_bins"]), float(cfg["threshold"])),
        SffsConfig(int(cfg["k_max"]), int(cfg["patience"]), seed=cfg["seed"]),
        int(cfg["criterion_folds"]),
        run_sffs=variants[0] == "hybrid",
    )
    body = report.to_dict()
    body.update({"task": doc.get("task"), "variant": variants[0], "config": _echo(cfg),
                 "selected_descriptors": [fm.descriptors[i].to_dict() for i in report.final_subset]})
    atomic_write_text(out, dump_json(body))
    return {"selection": str(out), "n_selected": len(report.final_subset)}


def _read_selection(path: Path) -> tuple[SelectionReport, dict]:
    if not path.is_file():
        raise CliError("missing_input", f"selection file not found: {path}")
    doc = json.loads(path.read_text(encoding="utf-8"))
    return SelectionReport.from_dict(doc), doc


def cmd_train(cfg: dict) -> dict:
    out = _require(cfg, "out")
    fm, doc = _read_features(cfg)
    cols = list(range(fm.n_features))
    if cfg.get("selection") is not None:
        report, _ = _read_selection(Path(cfg["selection"]))
        cols = list(report.final_subset)
    scaler = standardize_fit(fm)
    X = standardize_apply(scaler, fm).values[:, cols]
    if cfg["mlp_mode"] == "search":
        mlp_cfg, board = random_search(X, fm.labels, _search_space(cfg), cfg["seed"])
    elif cfg["mlp_mode"] in ("table2", "fixed"):
        mlp_cfg = replace(_mlp_base(cfg, doc.get("task") or "I"), seed=cfg["seed"])
        board = []
    else:
        raise CliError("usage", f"unknown mlp_mode {cfg['mlp_mode']!r}")
    model, losses = train(X, fm.labels, mlp_cfg)
    save_model(model, out)
    atomic_write_text(out / "preprocessing.json", dump_json({
        "schema_version": SCHEMA_VERSION,
        "columns": cols,
        "standardizer": {"means": scaler.means.tolist(), "stds": scaler.stds.tolist()},
        "loss_curve": losses,
        "leaderboard": [t.to_dict() for t in board],
        "config": _echo(cfg),
    }))
    return {"model": str(out), "n_inputs": len(cols), "final_loss": losses[-1]}


def _evaluate(cfg: dict, epochs, digest: str) -> dict:
    variants = _variants(cfg)
    tasks = _tasks(cfg)
    blocks = {}
    for task in tasks:
        mode = cfg["mlp_mode"]
        eval_cfg = EvalConfig(
            features=_feature_config(cfg),
            mi=MiConfig(int(cfg["n_bins"]), float(cfg["threshold"])),
            sffs=SffsConfig(int(cfg["k_max"]), int(cfg["patience"])),
            criterion_folds=int(cfg["criterion_folds"]),
            mlp_mode="search" if mode == "search" else "fixed",
            mlp=_mlp_base(cfg, task.task_id.value),
            search=_search_space(cfg),
            protocol=cfg["protocol"],
            seed=cfg["seed"],
        )
        extractor = prepare_task(epochs, task, eval_cfg)
        per_variant = {}
        for variant in variants:
            run = run_task(epochs, task, variant, eval_cfg, extractor=extractor)
            block = run.result.to_dict()
            block["mean"] = _finite_or_none(block["mean"])
            block["std"] = _finite_or_none(block["std"])
            block["n_features"] = run.n_features
            block["saliency_k"] = [int(k) for k in run.saliency.counts]
            block["leakage_checks"] = run.guard_checks
            block["mlp"] = None if mode == "search" else eval_cfg.mlp.to_dict()
            per_variant[variant] = block
            log.info("task %s %s: mean %.2f", task.task_id.value, variant, run.result.mean)
        blocks[task.task_id.value] = per_variant
    return {
        "schema_version": SCHEMA_VERSION,
        "bundle_sha256": digest,
        "channel_names": list(epochs.channel_names),
        "config": _echo(cfg),
        "tasks": blocks,
    }


def cmd_evaluate(cfg: dict) -> dict:
    out = _require(cfg, "out")
    epochs, digest = _load_bundle(cfg)
    results = _evaluate(cfg, epochs, digest)
    atomic_write_text(out, dump_json(results))
    return {"results": str(out), "summary": _summary(results)}


def _summary(results: dict) -> dict:
    return {t: {v: b["mean"] for v, b in block.items()} for t, block in results["tasks"].items()}


def _write_saliency(results: dict, out_dir: Path, task=None, variant=None) -> list[str]:
    written = []
    for task_id, block in results["tasks"].items():
        if task is not None and task_id != task:
            continue
        for name, entry in block.items():
            if variant is not None and name != VARIANT_ALIASES.get(variant, variant):
                continue
            smap = SaliencyMap(np.asarray(entry["saliency_k"], dtype=np.int64), tuple(results["channel_names"]))
            path = out_dir / f"saliency_{task_id}_{name}.csv"
            atomic_write_text(path, smap.to_csv())
            written.append(str(path))
    if not written:
        raise CliError("missing_input", "no matching task/variant block in the results file")
    return written


def cmd_saliency(cfg: dict) -> dict:
    out = _require(cfg, "out")
    if cfg.get("results") is not None:
        path = Path(cfg["results"])
        if not path.is_file():
            raise CliError("missing_input", f"results file not found: {path}")
        results = json.loads(path.read_text(encoding="utf-8"))
        check_schema(results, "results file")
        return {"saliency": _write_saliency(results, out, cfg.get("task"), cfg.get("variant"))}
    if cfg.get("selection") is None or cfg.get("features") is None:
        raise CliError("usage", "saliency needs --results, or --selection together with --features")
    fm, doc = _read_features(cfg)
    report, _ = _read_selection(Path(cfg["selection"]))
    names = doc.get("channel_names") or ()
    n_ch = len(names) if names else None
    smap = channel_significance(report.final_subset, fm.descriptors, n_ch, names)
    atomic_write_text(out, smap.to_csv())
    return {"saliency": [str(out)]}


def cmd_pipeline(cfg: dict) -> dict:
    out = _require(cfg, "out")
    epochs, digest = _load_bundle(cfg)
    tasks = _tasks(cfg)
    first = tasks[0].task_id.value
    stage = dict(cfg, task=first)
    cmd_extract(dict(stage, out=out / "features"))
    sel_variant = "hybrid" if "hybrid" in _variants(cfg) else "mi"
    cmd_select(dict(stage, features=out / "features", out=out / "selection.json", variant=sel_variant))
    cmd_train(dict(stage, features=out / "features", selection=out / "selection.json", out=out / "model"))
    results = _evaluate(cfg, epochs, digest)
    atomic_write_text(out / "results.json", dump_json(results))
    written = _write_saliency(results, out)
    return {"out": str(out), "summary": _summary(results), "saliency": written}


COMMANDS = {
    "gen-synthetic": cmd_gen_synthetic,
    "extract": cmd_extract,
    "select": cmd_select,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "saliency": cmd_saliency,
    "pipeline": cmd_pipeline,
}


# -- argument parsing ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mibci", description="Motor-imagery EEG feature selection and classification.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, seed=True):
        sp.add_argument("--config", help="flat JSON file of settings; flags override it")
        sp.add_argument("--out", help="output path")
        if seed:
            sp.add_argument("--seed", type=int, help="master seed (required)")

    g = sub.add_parser("gen-synthetic", help="write a seeded synthetic epoch bundle")
    common(g)
    g.add_argument("--n-subjects", dest="n_subjects", type=int)
    g.add_argument("--epochs-per-class", dest="epochs_per_class", type=int)
    g.add_argument("--n-channels", dest="n_channels", type=int)
    g.add_argument("--fs", type=float)
    g.add_argument("--planted-channels", dest="planted_channels", help="comma-separated channel indices")
    g.add_argument("--planted-band", dest="planted_band", help="lo,hi in Hz")
    g.add_argument("--effect-size", dest="effect_size", type=float)
    g.add_argument("--noise-level", dest="noise_level", type=float)
    g.add_argument("--gain-jitter", dest="gain_jitter", type=float)
    g.add_argument("--force", action="store_true", help="allow the degenerate effect size 1")

    def features(sp):
        sp.add_argument("--welch-segment-len", dest="welch_segment_len", type=int)
        sp.add_argument("--welch-overlap-step", dest="welch_overlap_step", type=int)
        sp.add_argument("--omega0", type=float)

    def selection(sp):
        sp.add_argument("--threshold", type=float, help="MI threshold in nats")
        sp.add_argument("--n-bins", dest="n_bins", type=int)
        sp.add_argument("--k-max", dest="k_max", type=int)
        sp.add_argument("--patience", type=int)
        sp.add_argument("--criterion-folds", dest="criterion_folds", type=int)

    def mlp(sp):
        sp.add_argument("--table2", choices=sorted(TABLE2), help="use this task's fixed architecture")
        sp.add_argument("--mlp-mode", dest="mlp_mode", choices=("table2", "search"))
        sp.add_argument("--search-trials", dest="search_trials", type=int)
        sp.add_argument("--mlp-epochs", dest="mlp_epochs", type=int)

    e = sub.add_parser("extract", help="feature table for one task")
    common(e, seed=False)
    e.add_argument("--bundle")
    e.add_argument("--task")
    features(e)

    s = sub.add_parser("select", help="MI filter and floating search on a feature table")
    common(s)
    s.add_argument("--features")
    s.add_argument("--variant", help="mi or hybrid")
    selection(s)

    t = sub.add_parser("train", help="train the MLP on a feature table")
    common(t)
    t.add_argument("--features")
    t.add_argument("--selection")
    mlp(t)

    for name, helptext in (("evaluate", "leave-one-subject-out evaluation"),
                           ("pipeline", "extract, select, train, evaluate and saliency in one go")):
        ev = sub.add_parser(name, help=helptext)
        common(ev)
        ev.add_argument("--bundle")
        ev.add_argument("--task", help="comma-separated task ids, e.g. I,II")
        ev.add_argument("--variant", help="comma-separated subset of all,mi,hybrid")
        ev.add_argument("--protocol", choices=("loso", "holdout"))
        features(ev)
        selection(ev)
        mlp(ev)

    sa = sub.add_parser("saliency", help="channel significance CSV")
    common(sa, seed=False)
    sa.add_argument("--results")
    sa.add_argument("--selection")
    sa.add_argument("--features")
    sa.add_argument("--task")
    sa.add_argument("--variant")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _settings(args.command, args)
        summary = COMMANDS[args.command](cfg)
    except CliError as exc:
        _emit_error(exc.kind, str(exc), args.command)
        return 1
    except SchemaVersionError as exc:
        _emit_error("schema_mismatch", str(exc), args.command)
        return 1
    except (BundleError, FileNotFoundError) as exc:
        _emit_error("missing_input", str(exc), args.command)
        return 1
    except Exception as exc:  # every failure leaves one machine-readable line
        _emit_error(type(exc).__name__, str(exc), args.command)
        return 1
    sys.stdout.write(json.dumps({"ok": True, "command": args.command, **summary}, sort_keys=True) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
