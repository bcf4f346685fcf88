"""Command-line entry point: ``behavior-manifold <subcommand> ...``.

Every subcommand accepts ``--config FILE`` (YAML). Keys in the section named
after the subcommand (``train:``, ``eval-knn:``, ...) use the flag names with
dashes or underscores and act as defaults; explicit flags win. Each run writes
a ``*.run.json`` manifest beside its main output. Failures print one JSON
object on stderr and exit 1; usage errors exit 2.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import fields
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .atomic import atomic_write_text
from .evaluation import (
    SessionRecord,
    balanced_subset,
    classify_sessions,
    matrix_csv,
    predictions_csv,
    read_labels_csv,
    similarity_confusion,
    trajectory,
)
from .features import (
    FrameSequence,
    InvalidFeatureFile,
    extract_file_features,
    features_to_csv,
    read_feature_dir,
    read_wav,
    write_features,
)
from .features.fileio import FEATURE_SUFFIX, feature_path
from .model import TrainConfig, Variant, load_checkpoint, save_checkpoint, train
from .model.checkpoint import InvalidCheckpoint
from .sampling import SamplerConfig, format_manifest, parse_manifest, sample_split_tuples
from .synth import SynthConfig, generate_benchmark, labels_csv, states_csv, stationarity_rate

log = logging.getLogger("behavior_manifold")

COMMANDS = ("extract", "sample", "train", "embed", "eval-knn", "trajectory", "confusion", "synth")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _digests(paths) -> dict[str, str]:
    out = {}
    for p in paths:
        p = Path(p)
        if p.is_dir():
            for child in sorted(p.iterdir()):
                if child.is_file() and not child.name.startswith("."):
                    out[str(child)] = _sha256(child)
        elif p.is_file():
            out[str(p)] = _sha256(p)
    return out


def write_run_manifest(target, args, inputs, started: float) -> None:
    """Record command, resolved options, input digests and timing next to ``target``."""
    options = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "config_data", "jobs")}
    blob = json.dumps(options, sort_keys=True, default=str)
    manifest = {
        "command": args.command,
        "options": json.loads(blob),
        "config_hash": hashlib.sha256(blob.encode()).hexdigest(),
        "input_digests": _digests(inputs),
        "seed": options.get("seed"),
        "tool_version": __version__,
        "started_at": time.strftime("%Y-%m-%dT%H:%M:%S%z", time.localtime(started)),
        "wall_time_s": round(time.time() - started, 3),
    }
    target = Path(target)
    path = target / "run.json" if target.is_dir() else target.with_name(target.name + ".run.json")
    atomic_write_text(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _id_list(value) -> list[str]:
    """Comma-separated ids, a YAML list, or ``@file`` with one id per line."""
    if value is None:
        return []
    if isinstance(value, (list, tuple)):
        return [str(v) for v in value]
    value = str(value)
    if value.startswith("@"):
        return [line.strip() for line in Path(value[1:]).read_text().splitlines() if line.strip()]
    return [v.strip() for v in value.split(",") if v.strip()]


def _need(args, *names):
    missing = [n for n in names if getattr(args, n, None) in (None, "")]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))


def _load_features(directory) -> list[FrameSequence]:
    if not Path(directory).is_dir():
        raise FileNotFoundError(f"feature directory not found: {directory}")
    seqs = read_feature_dir(directory)
    if not seqs:
        raise FileNotFoundError(f"no *{FEATURE_SUFFIX} files in {directory}")
    return seqs


def _pool_map(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _thread_map(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------- extract

def _extract_one(job):
    wav, out_dir, window, shift, csv_out = job
    source_id = Path(wav).stem
    seq = extract_file_features(read_wav(wav), source_id, window, shift)
    write_features(feature_path(out_dir, source_id), seq)
    if csv_out:
        atomic_write_text(os.path.join(out_dir, source_id + ".csv"), features_to_csv(seq))
    return source_id, len(seq)


def cmd_extract(args):
    _need(args, "input", "out")
    src = Path(args.input)
    if not src.exists():
        raise FileNotFoundError(f"input not found: {src}")
    if src.suffix.lower() == ".wav":
        wavs = [src]
    else:
        wavs = [Path(line.strip()) if os.path.isabs(line.strip()) else src.parent / line.strip()
                for line in src.read_text().splitlines() if line.strip() and not line.startswith("#")]
    for w in wavs:
        if not w.exists():
            raise FileNotFoundError(f"audio file not found: {w}")
    os.makedirs(args.out, exist_ok=True)
    jobs = [(str(w), args.out, float(args.window), float(args.shift), bool(args.csv)) for w in wavs]
    for sid, n in _pool_map(_extract_one, jobs, args.jobs):
        log.info("extracted %s: %d frames", sid, n)
    return args.out, [src, *wavs]


# ---------------------------------------------------------------- sample

def cmd_sample(args):
    _need(args, "features", "out")
    seqs = _load_features(args.features)
    shift = seqs[0].shift_s
    cfg = SamplerConfig(float(args.k), int(args.n_context), int(args.seed), shift)
    tuples = sample_split_tuples(seqs, cfg, _id_list(args.val_files))
    atomic_write_text(args.out, format_manifest(tuples))
    log.info("wrote %d tuples to %s", len(tuples), args.out)
    return args.out, [args.features]


# ---------------------------------------------------------------- train

def cmd_train(args):
    _need(args, "tuples", "features", "out", "val_files")
    tuples = parse_manifest(Path(args.tuples).read_text())
    val_ids = set(_id_list(args.val_files))
    train_t, val_t = [], []
    for t in tuples:
        a_val, b_val = t.a_id in val_ids, t.b_id in val_ids
        if a_val != b_val:
            raise ValueError(f"tuple crosses the train/validation split: {t}")
        (val_t if a_val else train_t).append(t)
    if not val_t:
        raise ValueError("no validation tuples: sample with --val-files to create them")
    seqs = {s.source_id: s.frames for s in _load_features(args.features)}
    cfg = TrainConfig(
        lr=float(args.lr), margin=float(args.margin), l2_weight=float(args.l2),
        batch_size=int(args.batch_size), max_epochs=int(args.epochs),
        patience=int(args.patience), seed=int(args.seed),
    )
    ckpt = train(train_t, val_t, seqs, cfg, Variant.parse(args.variant))
    save_checkpoint(args.out, ckpt)
    log.info("best epoch %d, validation loss %.4f", ckpt.epoch, ckpt.val_history[ckpt.epoch])
    if args.plot:
        from .plotting import plot_loss_history
        plot_loss_history(ckpt.val_history, ckpt.train_history, args.plot, ckpt.epoch)
    return args.out, [args.tuples, args.features]


# ---------------------------------------------------------------- embed

def cmd_embed(args):
    _need(args, "ckpt", "features", "out")
    ckpt = load_checkpoint(args.ckpt)
    os.makedirs(args.out, exist_ok=True)
    for seq in _load_features(args.features):
        emb = FrameSequence(ckpt.embed(seq.frames), seq.source_id, seq.window_s, seq.shift_s)
        write_features(feature_path(args.out, seq.source_id), emb)
    return args.out, [args.ckpt, args.features]


# ---------------------------------------------------------------- evaluation

def _sessions(args) -> list[SessionRecord]:
    _need(args, "labels")
    groups, labels = read_labels_csv(Path(args.labels).read_text())
    seqs = {s.source_id: s for s in _load_features(args.features)}
    missing = sorted(set(groups) - set(seqs))
    if missing:
        raise FileNotFoundError(f"labeled sessions without feature files: {missing[:5]}")
    return [SessionRecord(sid, groups[sid], seqs[sid].frames, labels[sid]) for sid in sorted(groups)]


def _codes(args, sessions) -> list[str]:
    codes = _id_list(args.codes)
    return codes or sorted({c for s in sessions for c in s.labels})


def cmd_eval_knn(args):
    _need(args, "features", "out")
    sessions = _sessions(args)
    codes = _codes(args, sessions)

    def run(code):
        subset = [s for s in sessions if code in s.labels]
        if args.balance:
            subset = balanced_subset(subset, code, int(args.balance), int(args.seed))
        return classify_sessions(subset, code)

    results = _thread_map(run, codes, args.jobs)
    os.makedirs(args.out, exist_ok=True)
    atomic_write_text(os.path.join(args.out, "predictions.csv"), predictions_csv(results))
    accuracy = {
        "per_code": {r.code: {"accuracy": r.accuracy, "n_sessions": len(r.predictions)} for r in results},
        "mean_accuracy": float(np.mean([r.accuracy for r in results])),
    }
    atomic_write_text(os.path.join(args.out, "accuracy.json"), json.dumps(accuracy, indent=2, sort_keys=True) + "\n")
    if args.plot:
        from .plotting import plot_accuracy_bars
        plot_accuracy_bars({r.code: r.accuracy for r in results}, args.plot)
    log.info("mean session accuracy %.3f over %s", accuracy["mean_accuracy"], codes)
    return args.out, [args.features, args.labels]


def cmd_trajectory(args):
    _need(args, "features", "session", "out")
    sessions = _sessions(args)
    by_id = {s.session_id: s for s in sessions}
    seqs = {s.source_id: s for s in _load_features(args.features)}
    if args.session not in seqs:
        raise FileNotFoundError(f"no feature file for session {args.session}")
    query = seqs[args.session]
    group = by_id[args.session].group_id if args.session in by_id else None
    refs = [s for s in sessions if s.group_id != group and s.session_id != args.session]
    codes = _codes(args, refs)
    series = {}
    for code in codes:
        usable = [s for s in refs if code in s.labels]
        vectors = np.vstack([s.frames for s in usable])
        labels = np.concatenate([np.full(len(s.frames), s.labels[code]) for s in usable])
        series[code] = trajectory(query.frames, vectors, labels, int(args.n))
    lines = ["t_start_s,code,score"]
    for code in codes:
        lines += [f"{t:g},{code},{v!r}" for t, v in zip(query.t_start_s, series[code].tolist())]
    atomic_write_text(args.out, "\n".join(lines) + "\n")
    if args.plot:
        from .plotting import plot_trajectory
        plot_trajectory(query.t_start_s, series, args.plot, title=args.session, n_neighbors=int(args.n))
    return args.out, [args.features, args.labels]


def cmd_confusion(args):
    _need(args, "features", "out")
    seqs = _load_features(args.features)
    wanted = _id_list(args.files)
    if wanted:
        by_id = {s.source_id: s for s in seqs}
        unknown = [w for w in wanted if w not in by_id]
        if unknown:
            raise FileNotFoundError(f"unknown file ids: {unknown}")
        seqs = [by_id[w] for w in wanted]
    matrix = similarity_confusion([s.frames for s in seqs])
    ids = [s.source_id for s in seqs]
    atomic_write_text(args.out, matrix_csv(matrix, ids))
    if args.plot:
        from .plotting import plot_confusion
        plot_confusion(matrix, ids, args.plot)
    return args.out, [args.features]


# ---------------------------------------------------------------- synth

def cmd_synth(args):
    _need(args, "out")
    kwargs = {f.name: getattr(args, f.name) for f in fields(SynthConfig)
              if hasattr(args, f.name) and f.name != "seed"}
    cfg = SynthConfig(seed=int(args.seed), **kwargs)
    n_train, n_val = int(args.n_train_files), int(args.n_val_files)
    bench = generate_benchmark(cfg, n_train, n_val)
    out = Path(args.out)
    for sub, corpus in (("train", bench.train), ("train", bench.val), ("eval", bench.eval)):
        for seq in corpus.sequences:
            write_features(feature_path(out / sub, seq.source_id), seq)
    atomic_write_text(out / "eval" / "labels.csv", labels_csv(bench.eval))
    atomic_write_text(out / "eval" / "states.csv", states_csv(bench.eval))
    atomic_write_text(out / "val_files.txt", "".join(s + "\n" for s in bench.val.source_ids))
    report = {
        "eval_stationarity_k6": stationarity_rate(bench.eval, 6),
        "train_stationarity_k6": stationarity_rate(bench.train, 6),
        "config": {f.name: getattr(cfg, f.name) for f in fields(SynthConfig)},
        "n_train_files": n_train,
        "n_val_files": n_val,
    }
    atomic_write_text(out / "synth_report.json", json.dumps(report, indent=2, sort_keys=True) + "\n")
    return args.out, [args.config] if args.config else []


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="YAML config; the section named after the subcommand supplies defaults")
    common.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="worker count (results do not depend on it)")
    common.add_argument("--log-level", default="INFO")

    parser = _Parser(prog="behavior-manifold", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("extract", parents=[common], help="WAV audio to 420-dim analysis-frame files")
    p.add_argument("--in", dest="input", help="a .wav file or a manifest listing one WAV path per line")
    p.add_argument("--out", help="output directory for .bmf feature files")
    p.add_argument("--window", type=float, default=20.0, help="analysis window in seconds")
    p.add_argument("--shift", type=float, default=1.0, help="analysis shift in seconds")
    p.add_argument("--csv", action="store_true", help="also export CSV with a column-name header")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("sample", parents=[common], help="build context/triplet tuple manifests")
    p.add_argument("--features", help="directory of .bmf files")
    p.add_argument("--k", type=float, default=6.0, help="maximum sampling shift in seconds")
    p.add_argument("--n-context", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--val-files", help="ids sampled as a separate validation pool (comma list or @file)")
    p.add_argument("--out", help="tuple manifest path")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("train", parents=[common], help="train one model variant")
    p.add_argument("--tuples")
    p.add_argument("--features")
    p.add_argument("--variant", default="te-dcn", help=", ".join(v.value for v in Variant))
    p.add_argument("--val-files", help="validation source ids (comma list or @file)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--patience", type=int, default=5)
    p.add_argument("--batch-size", type=int, default=256)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--margin", type=float, default=2.0)
    p.add_argument("--l2", type=float, default=0.01)
    p.add_argument("--plot", help="optional loss-curve figure (.png/.svg/.pdf)")
    p.add_argument("--out", help="checkpoint path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("embed", parents=[common], help="encode feature files into 64-dim embeddings")
    p.add_argument("--ckpt")
    p.add_argument("--features")
    p.add_argument("--out")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("eval-knn", parents=[common], help="leave-one-group-out 1-NN session classification")
    p.add_argument("--features")
    p.add_argument("--labels", help="CSV session_id,group_id,code,label")
    p.add_argument("--codes", help="restrict to these codes")
    p.add_argument("--balance", type=int, help="keep at most N sessions per class and code")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--plot", help="optional accuracy bar chart")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_eval_knn)

    p = sub.add_parser("trajectory", parents=[common], help="top-N behavior score trajectories for one session")
    p.add_argument("--features")
    p.add_argument("--labels")
    p.add_argument("--session")
    p.add_argument("--n", type=int, default=60)
    p.add_argument("--codes")
    p.add_argument("--plot", help="optional figure path (.svg/.png)")
    p.add_argument("--out", help="CSV path")
    p.set_defaults(func=cmd_trajectory)

    p = sub.add_parser("confusion", parents=[common], help="cross-file nearest-frame similarity matrix")
    p.add_argument("--features")
    p.add_argument("--files", help="subset and order of file ids")
    p.add_argument("--plot", help="optional heatmap path")
    p.add_argument("--out", help="CSV path")
    p.set_defaults(func=cmd_confusion)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic benchmark corpus")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-train-files", type=int, default=12, help="unlabeled training-domain files")
    p.add_argument("--n-val-files", type=int, default=2, help="unlabeled validation-domain files")
    p.add_argument("--out")
    p.set_defaults(func=cmd_synth)
    return parser


def _config_defaults(parser, argv) -> dict:
    pre = _Parser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return {}
    path = Path(known.config)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    data = yaml.safe_load(path.read_text()) or {}
    if not isinstance(data, dict):
        raise UsageError("config file must be a mapping of sections")
    sub_action = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    synth_fields = {f.name for f in fields(SynthConfig)}
    for name, section in data.items():
        if name not in sub_action.choices:
            raise UsageError(f"unknown config section {name!r}; sections are {list(COMMANDS)}")
        if not isinstance(section, dict):
            raise UsageError(f"config section {name!r} must be a mapping")
        sub_parser = sub_action.choices[name]
        dests = {a.dest for a in sub_parser._actions}
        defaults = {k.replace("-", "_"): v for k, v in section.items()}
        if "in" in defaults:
            defaults["input"] = defaults.pop("in")
        allowed = dests | (synth_fields if name == "synth" else set())
        unknown = sorted(set(defaults) - allowed)
        if unknown:
            raise UsageError(f"unknown keys in config section {name!r}: {unknown}")
        sub_parser.set_defaults(**defaults)
    return data


def _fail(kind: str, message: str) -> int:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return 1


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        config_data = _config_defaults(parser, argv)
    except UsageError as exc:
        print(json.dumps({"error": "usage", "message": str(exc)}), file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        return _fail("missing_input", str(exc))
    except yaml.YAMLError as exc:
        return _fail("invalid_config", str(exc))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.config_data = config_data
    logging.basicConfig(level=str(args.log_level).upper(), stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    started = time.time()
    try:
        target, inputs = args.func(args)
        write_run_manifest(target, args, inputs, started)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(json.dumps({"error": "usage", "message": str(exc)}), file=sys.stderr)
        return 2
    except InvalidFeatureFile as exc:
        return _fail("invalid_feature_file", str(exc))
    except InvalidCheckpoint as exc:
        return _fail("invalid_checkpoint", str(exc))
    except FileNotFoundError as exc:
        return _fail("missing_input", str(exc))
    except (ValueError, KeyError, IndexError, FloatingPointError, OSError) as exc:
        return _fail(type(exc).__name__, str(exc))
    return 0


if __name__ == "__main__":
    sys.exit(main())
