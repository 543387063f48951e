"""Run configuration: an INI file with one section per pipeline stage.

Example::

    [run]
    seed = 7

    [dataset]
    path = data/stream.csv
    label_column = label
    positive_labels = attack        ; comma separated
    # negative_labels = normal      ; alternative: everything else is positive
    categorical = proto, service
    # columns = a, b, label         ; names for a headerless file
    # drop = flow_id, timestamp     ; columns ignored entirely
    # second_path = data/test.csv   ; appended after the tail of ``path``
    # first_tail_fraction = 0.1
    decimate = 1
    split_fraction = 0.1

    [classifier]
    mode = fixed                    ; or: tune
    n_estimators = 100
    max_depth = 8
    learning_rate = 0.1
    num_leaves = 31
    min_data_in_leaf = 20
    goss = false

    [oasw]
    mode = fixed                    ; or: tune
    alpha = 0.98
    beta = 0.95
    t = 300
    t_prime_max = 1000
    # tune_fraction = 0.3

    [pso]
    swarm_size = 10
    max_evaluations = 50
    folds = 3
    jobs = 1

    [baseline]
    retrain_window = 1000

    [output]
    directory = runs/example
    formats = json, csv

    [synth]
    kind = sudden
    change_points = 5000
    length = 20000
    noise_rate = 0.05
    path = data/synthetic.csv

Command-line ``--set section.key=value`` overrides are applied before
validation.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .engine import OaswParams
from .gbdt import ClassifierParams
from .pso import PsoConfig
from .stream import SyntheticDriftSpec


class ConfigError(ValueError):
    pass


def _list(value: str | None) -> list[str]:
    if not value:
        return []
    return [v.strip() for v in value.split(",") if v.strip()]


def _get(section, key, conv, default=None, *, required=False):
    if key not in section:
        if required:
            raise ConfigError(f"[{section.name}] {key}: required")
        return default
    raw = section[key]
    try:
        if conv is bool:
            return section.getboolean(key)
        return conv(raw)
    except ValueError:
        raise ConfigError(f"[{section.name}] {key}: cannot parse {raw!r}") from None


@dataclass
class DatasetConfig:
    path: Path
    label_column: str
    positive_labels: list[str] = field(default_factory=list)
    negative_labels: list[str] = field(default_factory=list)
    categorical: list[str] = field(default_factory=list)
    columns: list[str] | None = None
    drop: list[str] = field(default_factory=list)
    second_path: Path | None = None
    first_tail_fraction: float = 1.0
    decimate: int = 1
    decimate_seed: int = 0
    split_fraction: float = 0.1


@dataclass
class RunConfig:
    seed: int
    dataset: DatasetConfig | None
    classifier: ClassifierParams
    classifier_tune: bool
    oasw: OaswParams | None
    oasw_tune: bool
    tune_fraction: float | None
    pso: PsoConfig
    folds: int
    retrain_window: int | None
    output_dir: Path
    formats: list[str]
    synth: tuple[SyntheticDriftSpec, int, Path | None] | None
    source_text: str = ""

    def resolved_text(self, overrides: dict | None = None) -> str:
        """INI snapshot of this config, with optional per-section replacements."""
        cp = configparser.ConfigParser(inline_comment_prefixes=(";",))
        cp.read_string(self.source_text)
        for sec, values in (overrides or {}).items():
            if not cp.has_section(sec):
                cp.add_section(sec)
            for k, v in values.items():
                cp[sec][k] = str(v)
        lines = []
        for sec in cp.sections():
            lines.append(f"[{sec}]")
            lines.extend(f"{k} = {v}" for k, v in cp[sec].items())
            lines.append("")
        return "\n".join(lines)


def apply_overrides(cp: configparser.ConfigParser, overrides) -> None:
    for item in overrides or ():
        key, sep, value = item.partition("=")
        sec, dot, opt = key.strip().partition(".")
        if not sep or not dot:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        if not cp.has_section(sec):
            cp.add_section(sec)
        cp[sec][opt] = value.strip()


def _dataset(sec, base: Path, check_paths: bool) -> DatasetConfig:
    path = base / _get(sec, "path", str, required=True)
    if check_paths and not path.exists():
        raise ConfigError(f"[dataset] path: {path} does not exist")
    second = _get(sec, "second_path", str)
    second_path = base / second if second else None
    if check_paths and second_path is not None and not second_path.exists():
        raise ConfigError(f"[dataset] second_path: {second_path} does not exist")
    ds = DatasetConfig(
        path=path,
        label_column=_get(sec, "label_column", str, required=True),
        positive_labels=_list(sec.get("positive_labels")),
        negative_labels=_list(sec.get("negative_labels")),
        categorical=_list(sec.get("categorical")),
        columns=_list(sec.get("columns")) or None,
        drop=_list(sec.get("drop")),
        second_path=second_path,
        first_tail_fraction=_get(sec, "first_tail_fraction", float, 1.0),
        decimate=_get(sec, "decimate", int, 1),
        decimate_seed=_get(sec, "decimate_seed", int, 0),
        split_fraction=_get(sec, "split_fraction", float, 0.1),
    )
    if bool(ds.positive_labels) == bool(ds.negative_labels):
        raise ConfigError("[dataset] exactly one of positive_labels / negative_labels is required")
    if ds.decimate < 1:
        raise ConfigError("[dataset] decimate: must be >= 1")
    if not 0.0 < ds.split_fraction < 1.0:
        raise ConfigError("[dataset] split_fraction: must be in (0, 1)")
    return ds


def _mode(sec, name) -> bool:
    mode = sec.get("mode", "fixed").strip().lower()
    if mode not in ("fixed", "tune"):
        raise ConfigError(f"[{name}] mode: must be 'fixed' or 'tune', got {mode!r}")
    return mode == "tune"


def _classifier(sec, seed) -> ClassifierParams:
    d = ClassifierParams()
    try:
        return ClassifierParams(
            n_estimators=_get(sec, "n_estimators", int, d.n_estimators),
            max_depth=_get(sec, "max_depth", int, d.max_depth),
            learning_rate=_get(sec, "learning_rate", float, d.learning_rate),
            num_leaves=_get(sec, "num_leaves", int, d.num_leaves),
            min_data_in_leaf=_get(sec, "min_data_in_leaf", int, d.min_data_in_leaf),
            goss_enabled=_get(sec, "goss", bool, False),
            goss_top_fraction=_get(sec, "goss_top_fraction", float, d.goss_top_fraction),
            goss_rand_fraction=_get(sec, "goss_rand_fraction", float, d.goss_rand_fraction),
            seed=_get(sec, "seed", int, seed),
        )
    except ValueError as exc:
        raise ConfigError(f"[classifier] {exc}") from None


def _oasw(sec) -> OaswParams:
    d = OaswParams()
    try:
        return OaswParams(
            alpha=_get(sec, "alpha", float, d.alpha),
            beta=_get(sec, "beta", float, d.beta),
            t=_get(sec, "t", int, d.t),
            t_prime_max=_get(sec, "t_prime_max", int, d.t_prime_max),
        )
    except ValueError as exc:
        raise ConfigError(f"[oasw] {exc}") from None


def _synth(sec, base: Path, seed: int):
    kind = sec.get("kind", "sudden").strip()
    cps = [int(c) for c in _list(sec.get("change_points"))]
    spec = SyntheticDriftSpec(
        drift_kind=kind,
        change_points=cps,
        transition_width=_get(sec, "transition_width", int),
        period=_get(sec, "period", int),
        noise_rate=_get(sec, "noise_rate", float, 0.0),
        dims=_get(sec, "dims", int, 2),
        separation=_get(sec, "separation", float, 1.5),
        positive_rate=_get(sec, "positive_rate", float, 0.5),
        seed=_get(sec, "seed", int, seed),
    )
    length = _get(sec, "length", int, required=True)
    path = sec.get("path")
    return spec, length, (base / path if path else None)


def parse_config(text: str, *, base_dir=".", overrides=None, check_paths: bool = True) -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";",))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    apply_overrides(cp, overrides)
    base = Path(base_dir)
    seed = _get(cp["run"], "seed", int, 0) if cp.has_section("run") else 0
    empty = cp["DEFAULT"]

    dataset = _dataset(cp["dataset"], base, check_paths) if cp.has_section("dataset") else None
    csec = cp["classifier"] if cp.has_section("classifier") else empty
    osec = cp["oasw"] if cp.has_section("oasw") else empty
    psec = cp["pso"] if cp.has_section("pso") else empty
    try:
        pso = PsoConfig(
            swarm_size=_get(psec, "swarm_size", int, 10),
            w=_get(psec, "w", float, 0.7298),
            c1=_get(psec, "c1", float, 1.4962),
            c2=_get(psec, "c2", float, 1.4962),
            velocity_clamp_fraction=_get(psec, "velocity_clamp_fraction", float, 0.2),
            max_evaluations=_get(psec, "max_evaluations", int, 50),
            seed=_get(psec, "seed", int, seed),
            jobs=_get(psec, "jobs", int, 1),
        )
    except ValueError as exc:
        raise ConfigError(f"[pso] {exc}") from None
    oasw_tune = _mode(osec, "oasw")
    bsec = cp["baseline"] if cp.has_section("baseline") else empty
    out = cp["output"] if cp.has_section("output") else empty
    formats = _list(out.get("formats", "json, csv"))
    bad = set(formats) - {"json", "csv"}
    if bad:
        raise ConfigError(f"[output] formats: unknown {sorted(bad)}")
    synth = _synth(cp["synth"], base, seed) if cp.has_section("synth") else None
    # keep the text with overrides folded in, so snapshots reproduce the run
    buf = []
    for sec in cp.sections():
        buf.append(f"[{sec}]")
        buf.extend(f"{k} = {v}" for k, v in cp[sec].items())
        buf.append("")
    return RunConfig(
        seed=seed,
        dataset=dataset,
        classifier=_classifier(csec, seed),
        classifier_tune=_mode(csec, "classifier"),
        oasw=_oasw(osec),
        oasw_tune=oasw_tune,
        tune_fraction=_get(osec, "tune_fraction", float),
        pso=pso,
        folds=_get(psec, "folds", int, 3),
        retrain_window=_get(bsec, "retrain_window", int),
        output_dir=base / out.get("directory", "runs"),
        formats=formats,
        synth=synth,
        source_text="\n".join(buf),
    )


def load_config(path, *, overrides=None, check_paths: bool = True) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    return parse_config(path.read_text(encoding="utf-8"), base_dir=path.parent, overrides=overrides,
                        check_paths=check_paths)
