"""Command-line entry point: ``zbtrace <subcommand> ...``.

Every subcommand writes its outputs plus ``<output>.manifest.json`` (inputs
with hashes, resolved configuration, seed, library versions). Failures print a
JSON object to stderr; exit status is 2 for usage errors and 3 for data errors.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import platform
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .classify import GbdtModel, Task, TrainConfig, cross_topology_eval, cross_validate, dataset_arrays, evaluate, train
from .classify import xgb
from .dissect import decode_capture
from .errors import ZbTraceError
from .features import (FEATURE_CONVENTIONS, build_features, exclude_sparse, read_features_csv, window_counts,
                       write_features_csv)
from .labeling import build_records, filter_first_hop, load_device_map, read_records_csv, write_records_csv
from .pcap import read_pcap
from .storage import lossless_baseline, rate_accuracy_sweep, write_sweep_csv
from .synth import generate, load_scenario

log = logging.getLogger("zbtrace")

OUT_DIR_ENV = "ZBTRACE_OUT_DIR"
EXIT_USAGE = 2
EXIT_DATA = 3
USAGE_ERRORS = {"usage-error", "invalid-window", "invalid-config", "missing-file"}


class UsageError(ZbTraceError):
    code = "usage-error"


class ConfigError(ZbTraceError):
    code = "invalid-config"


class MissingFile(ZbTraceError):
    code = "missing-file"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# -- helpers -----------------------------------------------------------------

def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fp:
        for chunk in iter(lambda: fp.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)


def _versions() -> dict:
    v = {"zbtrace": __version__, "python": platform.python_version(), "numpy": np.__version__}
    if xgb.available():
        import xgboost
        v["xgboost"] = xgboost.__version__
    return v


def _input(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise MissingFile(f"input file not found: {path}")
    return p


class Run:
    """Collects inputs/outputs of one subcommand and writes the manifest."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.out_dir = Path(args.out_dir or os.environ.get(OUT_DIR_ENV) or ".")
        self.inputs: list[Path] = []
        self.outputs: list[Path] = []
        self.config: dict = {}

    def input(self, path: str) -> Path:
        p = _input(path)
        self.inputs.append(p)
        return p

    def output(self, name: str) -> Path:
        p = Path(name)
        if not p.is_absolute():
            p = self.out_dir / p
        p.parent.mkdir(parents=True, exist_ok=True)
        self.outputs.append(p)
        return p

    def manifest(self) -> dict:
        config = {"command": self.args.command, "seed": self.args.seed, **self.config}
        return {
            "command": self.args.command,
            "argv": [a for a in self.args.argv],
            "inputs": [{"path": str(p), "sha256": _sha256(p), "bytes": p.stat().st_size} for p in self.inputs],
            "outputs": [{"path": str(p), "sha256": _sha256(p)} for p in self.outputs],
            "seed": self.args.seed,
            "config": config,
            "config_hash": hashlib.sha256(_canonical(config).encode()).hexdigest(),
            "versions": _versions(),
        }

    def finish(self) -> dict:
        m = self.manifest()
        if self.outputs:
            path = self.outputs[0].with_name(self.outputs[0].name + ".manifest.json")
            with open(path, "w") as fp:
                json.dump(m, fp, indent=2, sort_keys=True)
                fp.write("\n")
        return m


def _write_json(path: Path, obj) -> None:
    with open(path, "w") as fp:
        json.dump(obj, fp, indent=2, sort_keys=True, default=str)
        fp.write("\n")


def _load_config(args) -> dict:
    if not args.config:
        return {}
    text = args.config
    if not text.lstrip().startswith("{"):
        text = _input(text).read_text()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"--config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("--config must be a JSON object")
    return cfg


_TRAIN_KEYS = {"n_estimators", "max_depth", "learning_rate", "subsample", "backend"}


def _train_config(args, task: str) -> TrainConfig:
    cfg = _load_config(args)
    unknown = set(cfg) - _TRAIN_KEYS - {"k", "min_windows"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    overrides = {k: cfg[k] for k in _TRAIN_KEYS if k in cfg}
    if getattr(args, "backend", None):
        overrides["backend"] = args.backend
    try:
        return TrainConfig.for_task(task, seed=args.seed, **overrides)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def _folds(args) -> int:
    k = _load_config(args).get("k", args.folds)
    if int(k) < 2:
        raise ConfigError("k must be at least 2")
    return int(k)


def _load_features(run: Run, path: str, min_windows: int):
    with open(run.input(path), newline="") as fp:
        vectors = read_features_csv(fp)
    kept, dropped = exclude_sparse(vectors, min_windows)
    if dropped:
        log.warning("%s: excluded devices with < %d windows: %s", path, min_windows, ", ".join(dropped))
    return kept, dropped


def _parse_list(text: str, cast=float) -> list:
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part and cast is int:
            lo, hi = part.split("-")
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(cast(part))
    if not out:
        raise UsageError(f"empty list: {text!r}")
    return out


# -- subcommands -------------------------------------------------------------

def cmd_ingest(args, run: Run) -> None:
    pcap = run.input(args.pcap)
    dmap = load_device_map(run.input(args.devices))
    frames, meta = read_pcap(pcap)
    decoded, stats = decode_capture(frames, meta.fcs_present)
    records, summary = build_records(decoded, dmap, args.topology, args.include_bad_fcs, args.include_mac_commands)
    run.config.update(topology=args.topology, include_bad_fcs=args.include_bad_fcs,
                      include_mac_commands=args.include_mac_commands)
    out = run.output(args.output)
    with open(out, "w", newline="") as fp:
        write_records_csv(records, fp)
    info = {
        "capture": {"link_type": meta.link_type, "t_start": meta.t_start, "t_end": meta.t_end,
                    "duration": meta.duration, "frame_count": meta.frame_count, "byte_count": meta.byte_count},
        "decode": vars(stats),
        "records": {"frames": summary.frames, "nwk_frames": summary.nwk_frames, "emitted": summary.emitted,
                    "relayed": summary.relayed, "mac_commands": summary.mac_commands,
                    "skipped": dict(sorted(summary.skipped.items())),
                    "non_nwk": dict(sorted(summary.non_nwk.items()))},
        "topology": args.topology,
    }
    _write_json(run.output(args.output + ".capture.json"), info)
    log.info("%d frames, %d NWK, %d records (%d relayed)", stats.frames, stats.nwk_frames,
             summary.emitted, summary.relayed)


def _records_and_t0(run: Run, path: str, t0: Optional[float]):
    with open(run.input(path), newline="") as fp:
        records = read_records_csv(fp)
    if t0 is None:
        side = Path(path + ".capture.json")
        if side.is_file():
            run.inputs.append(side)
            info = json.loads(side.read_text())
            t0 = {info["topology"]: info["capture"]["t_start"]}
    return records, t0


def cmd_extract(args, run: Run) -> None:
    if args.window is None:
        raise UsageError("extract needs --window")
    records, t0 = _records_and_t0(run, args.records, args.t0)
    if not args.all_hops:
        records = filter_first_hop(records)
    vectors = build_features(records, args.window, t0)
    run.config.update(window=args.window, t0=t0, all_hops=args.all_hops, conventions=FEATURE_CONVENTIONS)
    with open(run.output(args.output), "w", newline="") as fp:
        write_features_csv(vectors, fp)
    log.info("%d windows from %d records", len(vectors), len(records))


def cmd_train(args, run: Run) -> None:
    vectors, dropped = _load_features(run, args.features, args.min_windows)
    config = _train_config(args, args.task)
    X, y = dataset_arrays(vectors, config.task)
    model = train(X, y, config)
    run.config.update(train=config.to_dict(), min_windows=args.min_windows, excluded=dropped)
    with open(run.output(args.output), "w") as fp:
        model.to_json(fp)


def _write_report(run: Run, name: str, report) -> None:
    with open(run.output(name), "w") as fp:
        report.to_json(fp)
    with open(run.output(name + ".confusion.csv"), "w", newline="") as fp:
        report.confusion_csv(fp)


def cmd_eval(args, run: Run) -> None:
    vectors, dropped = _load_features(run, args.features, args.min_windows)
    config = _train_config(args, args.task)
    X, y = dataset_arrays(vectors, config.task)
    if args.model:
        with open(run.input(args.model)) as fp:
            model = GbdtModel.from_json(fp)
        report = evaluate(model, X, y)
        run.config.update(mode="holdout", task=config.task.value)
    else:
        k = _folds(args)
        report = cross_validate(X, y, config, k)
        run.config.update(mode="cv", k=k, train=config.to_dict())
    report.notes["excluded_devices"] = dropped
    run.config.update(min_windows=args.min_windows)
    _write_report(run, args.output, report)
    log.info("%s", json.dumps(report.summary(), sort_keys=True))


def cmd_crosseval(args, run: Run) -> None:
    tr, d1 = _load_features(run, args.train_features, args.min_windows)
    te, d2 = _load_features(run, args.test_features, args.min_windows)
    config = _train_config(args, args.task)
    Xtr, ytr = dataset_arrays(tr, config.task)
    Xte, yte = dataset_arrays(te, config.task)
    report = cross_topology_eval(Xtr, ytr, Xte, yte, config)
    report.notes["excluded_devices"] = sorted(set(d1) | set(d2))
    run.config.update(train=config.to_dict(), min_windows=args.min_windows)
    _write_report(run, args.output, report)
    log.info("%s", json.dumps(report.summary(), sort_keys=True))


SWEEP_WINDOW_COLUMNS = ["window_s", "task", "n_windows", "n_devices", "excluded", "accuracy", "macro_f1",
                        "macro_f1_std", "weighted_f1", "weighted_f1_std"]


def cmd_sweep_window(args, run: Run) -> None:
    windows = _parse_list(args.windows) if args.windows else ([args.window] if args.window else [1, 2, 3, 4, 5])
    tasks = [Task(t) for t in (_parse_list(args.tasks, str) if args.tasks else [t.value for t in Task])]
    all_records = []
    t0s: dict = {}
    for path in args.records:
        records, t0 = _records_and_t0(run, path, None)
        all_records += filter_first_hop(records)
        if isinstance(t0, dict):
            t0s.update(t0)
    k = _folds(args)
    rows = []
    for T in windows:
        vectors, dropped = exclude_sparse(build_features(all_records, T, t0s or None), args.min_windows)
        for task in tasks:
            config = _train_config(args, task.value)
            X, y = dataset_arrays(vectors, task)
            rep = cross_validate(X, y, config, k)
            rows.append({
                "window_s": T, "task": task.value, "n_windows": len(vectors),
                "n_devices": len(window_counts(vectors)), "excluded": ";".join(dropped),
                "accuracy": rep.accuracy, "macro_f1": rep.macro_f1, "macro_f1_std": rep.fold_stats["macro_f1"][1],
                "weighted_f1": rep.weighted_f1, "weighted_f1_std": rep.fold_stats["weighted_f1"][1],
            })
            log.info("T=%g %s macroF1=%.4f weightedF1=%.4f", T, task.value, rep.macro_f1, rep.weighted_f1)
    run.config.update(windows=windows, tasks=[t.value for t in tasks], k=k, min_windows=args.min_windows,
                      train=_train_config(args, tasks[0].value).to_dict())
    with open(run.output(args.output), "w", newline="") as fp:
        w = csv.DictWriter(fp, fieldnames=SWEEP_WINDOW_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def cmd_baseline(args, run: Run) -> None:
    codecs = _parse_list(args.codecs, str) if args.codecs else ["gzip", "bzip2", "lzma"]
    reports = {}
    for path in args.pcaps:
        reports[path] = lossless_baseline(run.input(path), codecs).to_dict()
    run.config.update(codecs=codecs)
    _write_json(run.output(args.output), reports)
    with open(run.output(args.output + ".csv"), "w", newline="") as fp:
        w = csv.writer(fp, lineterminator="\n")
        w.writerow(["capture", "method", "size_bytes", "size_mb", "bits_per_second"])
        for path, rep in reports.items():
            for name, m in rep["methods"].items():
                w.writerow([path, name, m["size_bytes"], f"{m['size_mb']:.6f}", f"{m['bits_per_second']:.6f}"])


def cmd_qsweep(args, run: Run) -> None:
    vectors, dropped = _load_features(run, args.features, args.min_windows)
    config = _train_config(args, args.task)
    bits = _parse_list(args.bits, int) if args.bits else list(range(1, 17))
    regimes = _parse_list(args.regimes, str)
    k = _folds(args)
    points = rate_accuracy_sweep(vectors, config, bits, regimes, k=k, duration_s=args.duration,
                                 n_devices=args.devices, wrap_codec=args.wrap)
    run.config.update(train=config.to_dict(), bits=bits, regimes=regimes, k=k, duration=args.duration,
                      n_devices=args.devices, wrap=args.wrap, min_windows=args.min_windows, excluded=dropped)
    with open(run.output(args.output), "w", newline="") as fp:
        write_sweep_csv(points, fp)


def cmd_synth(args, run: Run) -> None:
    spec = load_scenario(run.input(args.scenario))
    if args.seed_override:
        spec.seed = args.seed
    pcap, truth = generate(spec, window=args.window)
    run.config.update(scenario=spec.to_dict(), window=args.window)
    stem = args.output
    with open(run.output(stem + ".pcap"), "wb") as fp:
        fp.write(pcap)
    with open(run.output(stem + ".truth.json"), "w") as fp:
        fp.write(truth.to_json())
    with open(run.output(stem + ".devices.csv"), "w", newline="") as fp:
        fp.write(spec.device_map_csv())


COMMANDS = {
    "ingest": cmd_ingest, "extract": cmd_extract, "train": cmd_train, "eval": cmd_eval,
    "crosseval": cmd_crosseval, "sweep-window": cmd_sweep_window, "baseline": cmd_baseline,
    "qsweep": cmd_qsweep, "synth": cmd_synth,
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--out-dir", help=f"output directory (default: ${OUT_DIR_ENV} or .)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--window", type=float, help="window length T in seconds")
    common.add_argument("--bits", help="bit depths, e.g. 1-16 or 2,4,8")
    common.add_argument("--codecs", help="comma-separated compressors (gzip,bzip2,lzma)")
    common.add_argument("--config", help="JSON object or path to a JSON file with training overrides")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="zbtrace", description="Zigbee traffic features, classification and storage.")
    p.add_argument("--version", action="version", version=f"zbtrace {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, help_):
        return sub.add_parser(name, help=help_, parents=[common])

    def model_opts(s, default_out):
        s.add_argument("--task", default="DeviceType", choices=[t.value for t in Task])
        s.add_argument("--backend", choices=["auto", "native", "xgboost"])
        s.add_argument("--min-windows", type=int, default=10)
        s.add_argument("--folds", type=int, default=5)
        s.add_argument("-o", "--output", default=default_out)

    s = add("ingest", "decode a capture into labeled packet records")
    s.add_argument("pcap")
    s.add_argument("--devices", required=True)
    s.add_argument("--topology", default="A")
    s.add_argument("--include-bad-fcs", action="store_true")
    s.add_argument("--include-mac-commands", action="store_true")
    s.add_argument("-o", "--output", default="records.csv")

    s = add("extract", "window first-hop records into feature vectors")
    s.add_argument("records")
    s.add_argument("--t0", type=float, help="window grid origin (default: capture start)")
    s.add_argument("--all-hops", action="store_true", help="keep relayed records")
    s.add_argument("-o", "--output", default="features.csv")

    s = add("train", "train a classifier")
    s.add_argument("features")
    model_opts(s, "model.json")

    s = add("eval", "cross-validate, or evaluate a trained model")
    s.add_argument("features")
    s.add_argument("--model")
    model_opts(s, "report.json")

    s = add("crosseval", "train on one topology, test on another")
    s.add_argument("train_features")
    s.add_argument("test_features")
    model_opts(s, "crosseval.json")

    s = add("sweep-window", "accuracy against window length")
    s.add_argument("records", nargs="+")
    s.add_argument("--windows", help="comma-separated window lengths (default 1,2,3,4,5)")
    s.add_argument("--tasks", help="comma-separated tasks (default both)")
    model_opts(s, "sweep_window.csv")

    s = add("baseline", "lossless compression of raw captures")
    s.add_argument("pcaps", nargs="+")
    s.add_argument("-o", "--output", default="baseline.json")

    s = add("qsweep", "rate/accuracy sweep over quantizer bit depths")
    s.add_argument("features")
    s.add_argument("--regimes", default="i,ii")
    s.add_argument("--duration", type=float, help="capture duration for effective rates")
    s.add_argument("--devices", type=int, help="device count N for nominal rates")
    s.add_argument("--wrap", default="lzma", choices=["none", "gzip", "bzip2", "lzma"])
    model_opts(s, "qsweep.csv")

    s = add("synth", "generate a synthetic capture with ground truth")
    s.add_argument("scenario")
    s.add_argument("--seed-override", action="store_true", help="replace the scenario seed with --seed")
    s.add_argument("-o", "--output", default="synth")
    return p


def _fail(code: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error": code, "message": message}) + "\n")
    return EXIT_USAGE if code in USAGE_ERRORS else EXIT_DATA


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _fail(exc.code, str(exc))
    if not args.command:
        return _fail("usage-error", "missing subcommand")
    args.argv = argv
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    run = Run(args)
    try:
        COMMANDS[args.command](args, run)
        run.finish()
    except ZbTraceError as exc:
        return _fail(exc.code, str(exc))
    except OSError as exc:
        return _fail("io-error", str(exc))
    return 0


if __name__ == "__main__":
    sys.exit(main())
