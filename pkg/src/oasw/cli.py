"""Command-line entry point.

    oasw train     CONFIG                 offline stage: (tune +) fit, write model.json
    oasw run-oasw  CONFIG --model FILE    online stage with OASW adaptation
    oasw baseline  CONFIG --model FILE --detector {ddm,eddm,adwin,none}
    oasw tune      CONFIG --target {oasw,classifier} [--model FILE]
    oasw synth     CONFIG                 write the [synth] stream as CSV

Exit codes: 0 success, 2 configuration error, 3 data error, 4 runtime error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, load_config
from .detectors import DETECTORS, detect_and_retrain, no_adaptation
from .engine import run_stream
from .evaluation import emit_report
from .gbdt import GbdtModel, ModelError, fit_arrays
from .pso import (
    CLASSIFIER_SPACE,
    OASW_SPACE,
    classifier_params_from,
    search_classifier,
    tune_oasw,
    write_trace,
)
from .stream import StreamError, decimate, generate_synthetic, holdout_split, load_csv, load_csv_concat

log = logging.getLogger("oasw")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_RUNTIME = 0, 2, 3, 4


class DataError(Exception):
    pass


def load_dataset(cfg: RunConfig):
    ds = cfg.dataset
    if ds is None:
        raise ConfigError("[dataset] section is required for this command")
    kwargs = dict(positive_labels=ds.positive_labels, negative_labels=ds.negative_labels,
                  categorical=ds.categorical, column_names=ds.columns, drop_columns=ds.drop)
    if ds.second_path is not None:
        src = load_csv_concat(ds.path, ds.second_path, ds.label_column,
                              first_tail_fraction=ds.first_tail_fraction, **kwargs)
    else:
        src = load_csv(ds.path, ds.label_column, **kwargs)
    if ds.decimate > 1:
        src = decimate(src, ds.decimate, seed=ds.decimate_seed)
    return holdout_split(src, ds.split_fraction)


def _snapshot(cfg: RunConfig, extra: dict | None = None) -> str:
    overrides = {}
    if cfg.dataset is not None:
        overrides["dataset"] = {"path": str(cfg.dataset.path.resolve())}
        if cfg.dataset.second_path is not None:
            overrides["dataset"]["second_path"] = str(cfg.dataset.second_path.resolve())
    overrides["output"] = {"directory": str(cfg.output_dir.resolve())}
    for sec, values in (extra or {}).items():
        overrides.setdefault(sec, {}).update(values)
    return cfg.resolved_text(overrides)


def _load_model(path, width: int) -> GbdtModel:
    try:
        model = GbdtModel.load(path)
    except (OSError, ValueError, KeyError) as exc:
        raise DataError(f"cannot load model {path}: {exc}") from None
    if model.schema_width != width:
        raise DataError(f"model schema width {model.schema_width} does not match dataset width {width}")
    return model


# --------------------------------------------------------------------------- #
# commands
# --------------------------------------------------------------------------- #


def cmd_train(cfg: RunConfig, args) -> int:
    split = load_dataset(cfg)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    params = cfg.classifier
    extra = {}
    if cfg.classifier_tune:
        res = search_classifier(split.offline, CLASSIFIER_SPACE, cfg.pso, cfg.folds, base=params)
        write_trace(res, out / "classifier_tuning.csv")
        params = classifier_params_from(res.best_config, params)
        extra["classifier"] = {"mode": "fixed", **{k: v for k, v in res.best_config.items()}}
        log.info("tuned classifier: %s (fold accuracy %.4f)", res.best_config, res.best_score)
    model = fit_arrays(split.offline.X, split.offline.y, params)
    model_path = Path(args.model) if args.model else out / "model.json"
    model.save(model_path)
    (out / "train.resolved.ini").write_text(_snapshot(cfg, extra), encoding="utf-8")
    print(f"model written to {model_path} ({len(model.trees)} trees, {model.n_nodes} nodes)")
    return EXIT_OK


def cmd_run_oasw(cfg: RunConfig, args) -> int:
    split = load_dataset(cfg)
    model = _load_model(args.model, split.online.width)
    params = cfg.oasw
    extra = {}
    if cfg.oasw_tune:
        res = tune_oasw(split.online, model, OASW_SPACE, cfg.pso, tune_fraction=cfg.tune_fraction)
        params = res.hp_opt
        cfg.output_dir.mkdir(parents=True, exist_ok=True)
        write_trace(res.search, cfg.output_dir / "oasw_tuning.csv")
        extra["oasw"] = {"mode": "fixed", **params.to_dict()}
    result = run_stream(model, split.online, params, run_meta={"seed": cfg.seed, "model": str(args.model)})
    emit_report(result.trace, cfg.output_dir, cfg.formats, prefix="oasw_")
    (cfg.output_dir / "run-oasw.resolved.ini").write_text(_snapshot(cfg, extra), encoding="utf-8")
    m = result.trace.metrics
    print(f"OASW accuracy {100 * m.accuracy:.2f}%  f1 {100 * m.f1:.2f}%  "
          f"drifts {result.trace.event_kinds().count('DriftDetected')}  retrains {result.engine.n_retrains}")
    return EXIT_OK


def cmd_baseline(cfg: RunConfig, args) -> int:
    name = args.detector.lower()
    if name not in DETECTORS and name != "none":
        print(f"error: unknown detector {args.detector!r}; valid names: {', '.join(sorted(DETECTORS))}, none",
              file=sys.stderr)
        return EXIT_CONFIG
    split = load_dataset(cfg)
    model = _load_model(args.model, split.online.width)
    meta = {"seed": cfg.seed, "model": str(args.model)}
    if name == "none":
        report = no_adaptation(split.online, model, run_meta=meta)
    else:
        window = cfg.retrain_window or cfg.oasw.t_prime_max
        report = detect_and_retrain(split.online, model, name, window, run_meta=meta)
    emit_report(report, cfg.output_dir, cfg.formats, prefix=f"{name}_")
    (cfg.output_dir / f"baseline-{name}.resolved.ini").write_text(_snapshot(cfg), encoding="utf-8")
    drifts = sum(1 for k in report.event_kinds() if k == "Drift")
    print(f"{name} accuracy {100 * report.metrics.accuracy:.2f}%  drift signals {drifts}")
    return EXIT_OK


def cmd_tune(cfg: RunConfig, args) -> int:
    split = load_dataset(cfg)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    if args.target == "classifier":
        res = search_classifier(split.offline, CLASSIFIER_SPACE, cfg.pso, cfg.folds, base=cfg.classifier)
        write_trace(res, out / "classifier_tuning.csv")
        section = "classifier"
        values = dict(res.best_config)
        score = res.best_score
    else:
        if not args.model:
            raise ConfigError("tune --target oasw needs --model")
        model = _load_model(args.model, split.online.width)
        res = tune_oasw(split.online, model, OASW_SPACE, cfg.pso, tune_fraction=cfg.tune_fraction)
        write_trace(res.search, out / "oasw_tuning.csv")
        section = "oasw"
        values = res.hp_opt.to_dict()
        score = res.max_acc
    lines = [f"[{section}]", "mode = fixed", *(f"{k} = {v}" for k, v in values.items()), ""]
    (out / f"{section}.best.ini").write_text("\n".join(lines), encoding="utf-8")
    print(f"best {section} configuration (score {score:.6f}):")
    print("\n".join(lines))
    return EXIT_OK


def synth_csv_text(spec, length: int) -> str:
    src = generate_synthetic(spec, length)
    header = ["# synthetic drift stream", f"# length={length}"]
    for k, v in vars(spec).items():
        header.append(f"# {k}={v}")
    cols = src.feature_names + ["label"]
    rows = [",".join(cols)]
    for x, y in zip(src.X, src.y):
        rows.append(",".join(repr(float(v)) for v in x) + f",{int(y)}")
    return "\n".join(header + rows) + "\n"


def cmd_synth(cfg: RunConfig, args) -> int:
    if cfg.synth is None:
        raise ConfigError("[synth] section is required for synth")
    spec, length, path = cfg.synth
    if args.output:
        path = Path(args.output)
    if path is None:
        raise ConfigError("[synth] path: required (or pass --output)")
    text = synth_csv_text(spec, length)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    print(f"wrote {length} samples to {path}")
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "run-oasw": cmd_run_oasw,
    "baseline": cmd_baseline,
    "tune": cmd_tune,
    "synth": cmd_synth,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oasw", description="OASW drift-adaptive GBDT pipeline")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", help="INI run configuration")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override a config value (repeatable)")
        p.add_argument("--jobs", type=int, help="parallel PSO candidate evaluations")
        return p

    p = add("train", "fit the offline model (optionally PSO-tuned)")
    p.add_argument("--model", help="model output path (default: <output>/model.json)")
    p = add("run-oasw", "run OASW over the online split")
    p.add_argument("--model", required=True)
    p = add("baseline", "run a reference detector with retraining")
    p.add_argument("--model", required=True)
    p.add_argument("--detector", required=True, help="ddm, eddm, adwin or none")
    p = add("tune", "PSO-tune OASW or classifier hyperparameters")
    p.add_argument("--target", choices=("oasw", "classifier"), default="oasw")
    p.add_argument("--model")
    p = add("synth", "generate a synthetic drift stream CSV")
    p.add_argument("--output")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = list(args.overrides)
        if args.jobs:
            overrides.append(f"pso.jobs={args.jobs}")
        cfg = load_config(args.config, overrides=overrides, check_paths=args.command != "synth")
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StreamError, DataError, ModelError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - surfaced as an exit status
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
