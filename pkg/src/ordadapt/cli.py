"""Command-line front end.

Subcommands:

* ``generate``  write the two-domain synthetic dataset as CSV
* ``train``     fit one model on a generated dataset
* ``evaluate``  score a checkpoint, exporting metrics JSON and a trace CSV
* ``ablate``    run the encoding/pooling grid (and optionally the DA
                scenario set) under a shared seed
* ``encode``    print the soft ordinal code of one label

Experiments are described by a flat INI file with [data], [network], [train]
and [experiment] sections; every key has a default, so an empty or absent
config is valid. Exit codes: 0 success, 2 config error, 3 missing input,
4 shape/compatibility error. All outputs are deterministic given (config,
seed); wall-clock timestamps appear only in manifest files.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import json
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bags import POOLINGS
from .labels import ENCODINGS, gaussian_encode
from .metrics import MetricsReport
from .network import CheckpointError, Network, NetworkConfig
from .synthetic import DomainSpec, generate_source, generate_target, load_csv, \
    make_shift, save_csv
from .training import (DA_MODES, TrainConfig, evaluate_bags, evaluate_frames,
                       fit, loso_evaluate, predict_levels)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MISSING = 3
EXIT_SHAPE = 4

ABLATION_CELLS = (("onehot", "max"), ("onehot", "adaptive"),
                ("gaussian", "max"), ("gaussian", "adaptive"))
SCENARIO_MODES = ("source-only", "target-only", "joint-no-DA",
                  "transfer", "adversarial")


class ConfigError(ValueError):
    """Invalid or unparseable experiment configuration."""


class MissingInputError(FileNotFoundError):
    """A required input file does not exist."""


class ShapeMismatchError(ValueError):
    """Checkpoint and dataset disagree on tensor shapes."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Union of the generator, network, and trainer knobs, INI round-trippable."""

    # [data]
    source_subjects: int = 20
    target_subjects: int = 10
    sequences_per_subject: int = 2
    frames: int = 300
    feature_dim: int = 12
    levels: int = 6
    event_rate: float = 0.5
    noise: float = 0.25
    shift_strength: float = 1.0
    # [network]
    feature_units: int = 16
    feature_hidden: int = 32
    domain_hidden: int = 8
    # [train]
    lr: float = 0.001
    momentum: float = 0.9
    weight_decay: float = 1e-5
    epochs: int = 60
    source_batch: int = 4
    target_batch: int = 2
    anneal_factor: float = 0.5
    anneal_every: int = 5
    anneal_after: int = 20
    gamma: float = 10.0
    patience: int = 10
    window: int = 64
    stride: int = 8
    sigma: float = 0.3
    steps_per_epoch: int = 0
    # [experiment]
    encoding: str = "gaussian"
    pooling: str = "adaptive"
    mode: str = "adversarial"
    seed: int = 0

    _SECTIONS = {
        "data": ("source_subjects", "target_subjects", "sequences_per_subject",
                 "frames", "feature_dim", "levels", "event_rate", "noise",
                 "shift_strength"),
        "network": ("feature_units", "feature_hidden", "domain_hidden"),
        "train": ("lr", "momentum", "weight_decay", "epochs", "source_batch",
                  "target_batch", "anneal_factor", "anneal_every",
                  "anneal_after", "gamma", "patience", "window", "stride",
                  "sigma", "steps_per_epoch"),
        "experiment": ("encoding", "pooling", "mode", "seed"),
    }

    def __post_init__(self):
        if self.encoding not in ENCODINGS:
            raise ConfigError(f"[experiment] encoding: {self.encoding!r} is not "
                              f"one of {ENCODINGS}")
        if self.pooling not in POOLINGS:
            raise ConfigError(f"[experiment] pooling: {self.pooling!r} is not "
                              f"one of {POOLINGS}")
        if self.mode not in DA_MODES:
            raise ConfigError(f"[experiment] mode: {self.mode!r} is not "
                              f"one of {DA_MODES}")

    @classmethod
    def from_ini(cls, path) -> "ExperimentConfig":
        parser = configparser.ConfigParser()
        try:
            text = Path(path).read_text()
        except FileNotFoundError as exc:
            raise MissingInputError(f"config file not found: {path}") from exc
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
        field_types = {f.name: f.type for f in dataclasses.fields(cls)}
        kwargs = {}
        for section in parser.sections():
            if section not in cls._SECTIONS:
                raise ConfigError(f"unknown config section [{section}]")
            for key, raw in parser.items(section):
                if key not in cls._SECTIONS[section]:
                    raise ConfigError(f"unknown config key [{section}] {key}")
                caster = {"int": int, "float": float, "str": str}[field_types[key]]
                try:
                    kwargs[key] = caster(raw)
                except ValueError as exc:
                    raise ConfigError(
                        f"bad value for [{section}] {key}: {raw!r}") from exc
        try:
            return cls(**kwargs)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def to_ini(self, path) -> None:
        parser = configparser.ConfigParser()
        for section, keys in self._SECTIONS.items():
            parser[section] = {k: str(getattr(self, k)) for k in keys}
        with open(path, "w") as handle:
            parser.write(handle)

    # -- projections onto the library configs ------------------------------

    def domain_specs(self):
        scale, offset = make_shift(self.feature_dim, self.shift_strength, self.seed)
        common = dict(sequences_per_subject=self.sequences_per_subject,
                      frames=self.frames, feature_dim=self.feature_dim,
                      levels=self.levels, event_rate=self.event_rate,
                      noise=self.noise, seed=self.seed)
        try:
            source = DomainSpec(subjects=self.source_subjects, **common)
            target = DomainSpec(subjects=self.target_subjects,
                                shift_scale=scale, shift_offset=offset, **common)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return source, target

    def train_config(self, **overrides) -> TrainConfig:
        names = [f.name for f in dataclasses.fields(TrainConfig)]
        values = {n: getattr(self, n) for n in names}
        values.update(overrides)
        try:
            return TrainConfig(**values)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def network_config(self, input_dim: int) -> NetworkConfig:
        return NetworkConfig(input_dim=input_dim, feature_dim=self.feature_units,
                             feature_hidden=self.feature_hidden,
                             domain_hidden=self.domain_hidden,
                             levels=self.levels, seed=self.seed)


# -- small shared helpers ----------------------------------------------------

def _load_config(args) -> ExperimentConfig:
    if args.config is None:
        config = ExperimentConfig()
    else:
        config = ExperimentConfig.from_ini(args.config)
    if getattr(args, "seed", None) is not None:
        config = dataclasses.replace(config, seed=args.seed)
    return config


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _say(args, message: str) -> None:
    if not args.quiet:
        print(message)


def _jsonable(value):
    """Make a payload strict-JSON safe: NaN/Inf become null, arrays lists."""
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else None
    return value


def _write_json(path, payload) -> None:
    Path(path).write_text(json.dumps(_jsonable(payload), sort_keys=True, indent=1))


def _manifest(path, config: ExperimentConfig, extra: dict) -> None:
    payload = {"config": dataclasses.asdict(config),
               "written_at": time.strftime("%Y-%m-%dT%H:%M:%S")}
    payload.update(extra)
    _write_json(path, payload)


def _metrics_payload(report: MetricsReport) -> dict:
    return {"level": report.level, "pcc": report.pcc, "icc": report.icc,
            "mae": report.mae,
            "per_sequence": [{"pcc": p.pcc, "icc": p.icc, "mae": p.mae,
                              "flagged": p.flagged} for p in report.per_sequence]}


def _load_dataset(out: Path):
    paths = (out / "source.csv", out / "target.csv")
    for p in paths:
        if not p.exists():
            raise MissingInputError(f"dataset file not found: {p} "
                                    f"(run the generate command first)")
    return load_csv(paths[0]), load_csv(paths[1])


def _split_validation(target_sequences):
    """Hold out the highest-numbered target subject for model selection."""
    subjects = sorted({s.subject_id for s in target_sequences})
    held = subjects[-1]
    validation = [s for s in target_sequences if s.subject_id == held]
    training = [s for s in target_sequences if s.subject_id != held] or validation
    return training, validation, held


# -- subcommands -------------------------------------------------------------

def cmd_generate(args) -> int:
    config = _load_config(args)
    out = _out_dir(args)
    source_spec, target_spec = config.domain_specs()
    source = generate_source(source_spec)
    target = generate_target(target_spec)
    save_csv(source, out / "source.csv")
    save_csv(target, out / "target.csv")
    _manifest(out / "generate_manifest.json", config, {
        "source_rows": sum(len(s) for s in source),
        "target_rows": sum(len(s) for s in target),
    })
    _say(args, f"wrote {out / 'source.csv'} ({sum(len(s) for s in source)} rows)")
    _say(args, f"wrote {out / 'target.csv'} ({sum(len(s) for s in target)} rows)")
    return EXIT_OK


def cmd_train(args) -> int:
    config = _load_config(args)
    out = _out_dir(args)
    source, target = _load_dataset(out)
    train_target, validation, held = _split_validation(target)
    train_config = config.train_config()
    input_dim = source[0].frames.shape[1] if source else target[0].frames.shape[1]
    network = Network(config.network_config(input_dim))
    state = fit(train_config, source, train_target, validation, network=network)
    state.network.save(out / "checkpoint.json")
    _write_json(out / "history.json", state.history)
    _manifest(out / "train_manifest.json", config, {
        "validation_subject": held,
        "best_epoch": state.best_epoch,
        "best_val_pcc": state.best_score,
        "epochs_run": len(state.history),
    })
    for record in (state.history if not args.quiet else []):
        print(f"epoch {record['epoch']:3d} [{record['mode']}] "
              f"source {record['source']:.4f} target {record['target']:.4f} "
              f"domain {record['domain']:.4f} val_pcc {record['val_pcc']:.4f}")
    _say(args, f"best epoch {state.best_epoch} val_pcc {state.best_score:.4f}")
    _say(args, f"wrote {out / 'checkpoint.json'} and {out / 'history.json'}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    config = _load_config(args)
    out = _out_dir(args)
    checkpoint = Path(args.checkpoint) if args.checkpoint else out / "checkpoint.json"
    if not checkpoint.exists():
        raise MissingInputError(f"checkpoint not found: {checkpoint}")
    network = Network.load(checkpoint)
    _, target = _load_dataset(out)
    dim = target[0].frames.shape[1]
    if network.config.input_dim != dim:
        raise ShapeMismatchError(
            f"checkpoint expects {network.config.input_dim}-dim frames but the "
            f"dataset has {dim}-dim frames")
    if network.config.levels != config.levels:
        raise ShapeMismatchError(
            f"checkpoint has {network.config.levels} levels but the config "
            f"asks for {config.levels}")
    if args.level == "frame":
        report = evaluate_frames(network, target)
    else:
        report = evaluate_bags(network, target, config.window, config.stride,
                               config.pooling, config.levels)
    _write_json(out / "metrics.json", _metrics_payload(report))
    with open(out / "traces.csv", "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["subject", "sequence", "frame", "truth", "predicted"])
        for seq in target:
            predicted = predict_levels(network, seq.frames)
            for t in range(len(seq)):
                writer.writerow([seq.subject_id, seq.sequence_id, t,
                                 int(seq.frame_labels[t]), int(predicted[t])])
    _say(args, f"{args.level} level: pcc {report.pcc:.4f} icc {report.icc:.4f} "
               f"mae {report.mae:.4f}")
    _say(args, f"wrote {out / 'metrics.json'} and {out / 'traces.csv'}")
    return EXIT_OK


def cmd_ablate(args) -> int:
    config = _load_config(args)
    out = _out_dir(args)
    source, target = _load_dataset(out)
    rows = []
    cells = [{"cell": f"{enc}-{pool}", "encoding": enc, "pooling": pool,
              "mode": config.mode} for enc, pool in ABLATION_CELLS]
    if args.scenarios:
        cells += [{"cell": f"mode-{mode}", "encoding": config.encoding,
                   "pooling": config.pooling, "mode": mode}
                  for mode in SCENARIO_MODES]
    for cell in cells:
        tc = config.train_config(encoding=cell["encoding"],
                                 pooling=cell["pooling"], mode=cell["mode"])
        folds, aggregate = loso_evaluate(tc, source, target)
        rows.append({**cell, "pcc": aggregate.pcc, "icc": aggregate.icc,
                     "mae": aggregate.mae, "folds": len(folds)})
        _say(args, f"{cell['cell']}: pcc {aggregate.pcc:.4f} "
                   f"icc {aggregate.icc:.4f} mae {aggregate.mae:.4f}")
    with open(out / "ablation.csv", "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=["cell", "encoding", "pooling",
                                                    "mode", "pcc", "icc", "mae",
                                                    "folds"])
        writer.writeheader()
        writer.writerows(rows)
    _manifest(out / "ablate_manifest.json", config, {
        "shared_seed": config.seed,
        "cells": [c["cell"] for c in cells],
    })
    _say(args, f"wrote {out / 'ablation.csv'}")
    return EXIT_OK


def cmd_encode(args) -> int:
    try:
        code = gaussian_encode(args.label, args.sigma, levels=args.levels,
                               normalize=args.normalize)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    print(f"label {code.center} sigma {code.sigma} levels {code.levels}"
          f"{' normalized' if code.normalized else ''}")
    for k, v in enumerate(code.values):
        print(f"  level {k}: {v:.12f}")
    return EXIT_OK


# -- argument parsing --------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ordadapt",
        description="Weakly-supervised ordinal domain adaptation experiments "
                    "on synthetic two-domain sequence data.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="INI experiment config")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--out", default="runs",
                       help="output directory (default: runs)")
        p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("generate", help="write the synthetic dataset CSVs")
    common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="fit a model on a generated dataset")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a checkpoint on the target set")
    common(p)
    p.add_argument("--checkpoint", default=None,
                   help="checkpoint path (default: OUT/checkpoint.json)")
    p.add_argument("--level", choices=("frame", "sequence"), default="frame")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="run the encoding/pooling grid")
    common(p)
    p.add_argument("--scenarios", action="store_true",
                   help="also run the adaptation-mode scenario rows")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("encode", help="print the soft code of one label")
    p.add_argument("--label", type=int, required=True)
    p.add_argument("--sigma", type=float, default=0.3)
    p.add_argument("--levels", type=int, default=6)
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_encode)
    return parser


def entry(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingInputError as exc:
        print(f"missing input: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (ShapeMismatchError, CheckpointError) as exc:
        print(f"shape/compatibility error: {exc}", file=sys.stderr)
        return EXIT_SHAPE


if __name__ == "__main__":
    sys.exit(entry())
