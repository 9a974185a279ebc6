"""Command-line driver: ``dsrl {gen,train,eval,selftest}``.

Configuration is a JSON object with up to four sections, all optional::

    {
      "synth": {SynthSpec fields},
      "model": {ModelConfig fields},
      "split": {"train": 0.7, "val": 0.15},
      "paths": {"manifest": ..., "checkpoint": ...}
    }

Unknown sections or keys are rejected. Flags override file values. Paths in
``paths`` default to files inside ``--out``.

Exit codes: 0 success, 1 validation error, 2 runtime error, 3 self-test failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .data_eval import SynthSpec, load_split, synth_generate, write_feature_file, write_manifest
from .errors import ConfigError, DSRLError, IngestionError
from .pipeline import ABLATIONS, ModelConfig, evaluate, load_checkpoint, save_checkpoint, score_videos, train

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME, EXIT_SELFTEST = 0, 1, 2, 3

SECTIONS = ("synth", "model", "split", "paths")
PATH_KEYS = ("manifest", "checkpoint", "log", "metrics")
DEFAULT_SPLIT = {"train": 0.7, "val": 0.15}



@dataclasses.dataclass
class RunConfig:
    """Fully resolved settings for one command."""

    synth: SynthSpec
    model: ModelConfig
    split: dict
    out: Path
    paths: dict

    def path(self, key, default_name):
        p = self.paths.get(key)
        return Path(p) if p else self.out / default_name


def _load_json(path):
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    return data


def _build(cls, values, section):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown {section} keys: {sorted(unknown)}")
    if "phase_len" in values:
        values = {**values, "phase_len": tuple(values["phase_len"])}
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {section} config: {exc}") from exc


def resolve_config(args):
    """Merge the config file with command-line overrides (flags win)."""
    data = _load_json(args.config) if args.config else {}
    synth = dict(data.get("synth", {}))
    model = dict(data.get("model", {}))
    split = {**DEFAULT_SPLIT, **data.get("split", {})}
    paths = dict(data.get("paths", {}))
    if set(split) - {"train", "val"}:
        raise ConfigError("split accepts only 'train' and 'val' fractions (test takes the rest)")
    if set(paths) - set(PATH_KEYS):
        raise ConfigError(f"unknown paths keys: {sorted(set(paths) - set(PATH_KEYS))}")
    if not (0 < split["train"] and 0 <= split["val"] and split["train"] + split["val"] < 1):
        raise ConfigError(f"bad split fractions {split}")

    if args.seed is not None:
        synth["seed"] = args.seed
        model["seed"] = args.seed
    overrides = {
        "synth": {"num_videos": "videos", "ambiguity": "ambiguity", "noise": "noise", "t_min": "t_min", "t_max": "t_max"},
        "model": {"epochs": "epochs", "batch": "batch", "ablate": "ablate", "lr": "lr"},
    }
    for section, target in (("synth", synth), ("model", model)):
        for key, flag in overrides[section].items():
            value = getattr(args, flag, None)
            if value is not None:
                target[key] = value
    for key in ("manifest", "checkpoint"):
        value = getattr(args, key, None)
        if value is not None:
            paths[key] = value

    spec = _build(SynthSpec, synth, "synth")
    # model input dims follow the generated features unless set explicitly
    model.setdefault("d_v", spec.d_v)
    model.setdefault("d_a", spec.d_a)
    model.setdefault("multimodal", spec.multimodal)
    return RunConfig(spec, _build(ModelConfig, model, "model"), split, Path(args.out), paths)


# ------------------------------------------------------------------ commands


def split_counts(n, split):
    n_train = int(round(split["train"] * n))
    n_val = int(round(split["val"] * n))
    n_val = min(n_val, n - n_train)
    return n_train, n_val, n - n_train - n_val


def cmd_gen(rc):
    spec = rc.synth
    videos = synth_generate(spec)
    n_train, n_val, n_test = split_counts(len(videos), rc.split)
    order = np.random.default_rng([spec.seed, 2]).permutation(len(videos))
    split_of = {}
    for rank, i in enumerate(order):
        split_of[i] = "train" if rank < n_train else "val" if rank < n_train + n_val else "test"
    data_dir = rc.out / "features"
    manifest = rc.path("manifest", "manifest.json")
    try:
        data_dir.mkdir(parents=True, exist_ok=True)
        manifest.parent.mkdir(parents=True, exist_ok=True)
        entries = []
        for i, f in enumerate(videos):
            path = data_dir / f"{f.id}.dsrf"
            write_feature_file(f, path)
            # stored relative to the manifest so a run directory can be moved
            rel = os.path.relpath(path.resolve(), manifest.parent.resolve())
            entries.append({"id": f.id, "path": rel, "split": split_of[i]})
        write_manifest(entries, manifest)
    except OSError as exc:
        raise IngestionError(f"cannot write dataset: {exc}", str(rc.out)) from exc
    n_pos = sum(f.video_label for f in videos)
    print(f"generated {len(videos)} videos ({n_pos} violent) -> {manifest}")
    print(f"splits: train={n_train} val={n_val} test={n_test}")
    return EXIT_OK


def _require(path, what):
    if not Path(path).exists():
        raise IngestionError(f"{what} not found", str(path))
    return path


def cmd_train(rc):
    manifest = _require(rc.path("manifest", "manifest.json"), "manifest")
    train_set = load_split(manifest, "train")
    val_set = load_split(manifest, "val")
    if not train_set:
        raise ConfigError("manifest has no training videos")
    model, entries = train(train_set, rc.model, val=val_set or None)
    rc.out.mkdir(parents=True, exist_ok=True)
    ckpt = save_checkpoint(model, rc.path("checkpoint", "checkpoint.dsrk"))
    log_path = rc.path("log", "train_log.json")
    payload = {"config": rc.model.to_dict(), "epochs": entries}
    log_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    last = entries[-1]
    print(f"trained {len(entries)} epoch(s), final loss {last['loss']:.4f}, val AP {last['val_ap']}")
    print(f"checkpoint -> {ckpt}\nlog -> {log_path}")
    return EXIT_OK


def cmd_eval(rc, split="test"):
    manifest = _require(rc.path("manifest", "manifest.json"), "manifest")
    ckpt = _require(rc.path("checkpoint", "checkpoint.dsrk"), "checkpoint")
    model = load_checkpoint(ckpt)
    videos = load_split(manifest, split)
    if not videos:
        raise ConfigError(f"manifest has no {split!r} videos")
    for f in videos:
        if f.visual.shape[1] != model.cfg.d_v or (model.cfg.multimodal and f.audio.shape[1] != model.cfg.d_a):
            raise IngestionError(f"feature dims do not match the checkpoint (d_v={model.cfg.d_v}, d_a={model.cfg.d_a})", f.id)
    scored = score_videos(videos, model)
    report = evaluate(videos, model, scored=scored)
    curves = rc.out / "curves"
    curves.mkdir(parents=True, exist_ok=True)
    for f, det in scored:
        with open(curves / f"{f.id}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["snippet", "score", "label"])
            for t, (s, y) in enumerate(zip(det.snippet_scores, f.frame_labels)):
                w.writerow([t, repr(float(s)), int(y)])
    metrics_path = rc.path("metrics", "metrics.json")
    metrics_path.write_text(json.dumps({**report, "split": split}, indent=2, sort_keys=True) + "\n")
    auc = "n/a" if report["auc"] is None else f"{report['auc']:.4f}"
    print(f"{split}: AP {report['ap']:.4f}  AUC {auc}  ({report['n_videos']} videos, {report['n_snippets']} snippets)")
    print(f"metrics -> {metrics_path}\ncurves  -> {curves}/")
    return EXIT_OK


def cmd_selftest(quick=False, faults=()):
    from .selftest import format_report, run_selftest

    results = run_selftest(faults=faults, quick=quick)
    print(format_report(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_SELFTEST


# ---------------------------------------------------------------------- parser


def _global_flags():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", metavar="PATH", help="JSON config file")
    p.add_argument("--seed", type=int, help="seed for data generation and model init")
    p.add_argument("--out", metavar="DIR", default="runs", help="output directory (default: runs)")
    return p


def build_parser():
    common = _global_flags()
    parser = argparse.ArgumentParser(prog="dsrl", description="Dual-space violence detection at desk scale.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="generate a synthetic dataset and manifest")
    g.add_argument("--videos", type=int)
    g.add_argument("--ambiguity", type=float)
    g.add_argument("--noise", type=float)
    g.add_argument("--t-min", dest="t_min", type=int)
    g.add_argument("--t-max", dest="t_max", type=int)
    g.add_argument("--manifest", metavar="PATH")

    t = sub.add_parser("train", parents=[common], help="train on the manifest's train split")
    t.add_argument("--epochs", type=int)
    t.add_argument("--batch", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--ablate", choices=ABLATIONS)
    t.add_argument("--manifest", metavar="PATH")
    t.add_argument("--checkpoint", metavar="PATH")

    e = sub.add_parser("eval", parents=[common], help="score a split and write metrics and per-video CSVs")
    e.add_argument("--manifest", metavar="PATH")
    e.add_argument("--checkpoint", metavar="PATH")
    e.add_argument("--split", choices=("train", "val", "test"), default="test")

    s = sub.add_parser("selftest", parents=[common], help="run the built-in invariant and oracle suites")
    s.add_argument("--quick", action="store_true", help="fewer random draws")
    s.add_argument("--inject-fault", action="append", default=[], metavar="NAME",
                   help="deliberately perturb a component (exp_map) to show the suites catch it")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage; usage errors are validation errors here
        return EXIT_OK if exc.code == 0 else EXIT_VALIDATION
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "selftest":
            from .selftest import FAULTS

            bad = set(args.inject_fault) - set(FAULTS)
            if bad:
                raise ConfigError(f"unknown fault(s) {sorted(bad)}; known: {list(FAULTS)}")
            return cmd_selftest(args.quick, args.inject_fault)
        rc = resolve_config(args)
        if args.command == "gen":
            return cmd_gen(rc)
        if args.command == "train":
            return cmd_train(rc)
        return cmd_eval(rc, args.split)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (DSRLError, OSError, ArithmeticError, RuntimeError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
