"""Command-line entry point for the full pipeline.

Subcommands: ``gen`` (synthetic data), ``split`` (class-disjoint task
partition), ``train`` (incremental protocol), ``joint-train`` (pooled
upper-bound run), ``eval``, ``predict``, and ``inspect-memory``.

Conventions: every feature file ``X.feat`` has its taxonomy sidecar
``X.tax`` next to it; ``--out`` names the artifact directory (default
``.``); ``--config FILE`` supplies ``key=value`` defaults for any long
flag of the subcommand, with explicit flags taking precedence. Errors are
a single ``error CODE: message`` line on stderr (exit 1 for pipeline
failures, 2 for usage).
"""

from __future__ import annotations

import argparse
import dataclasses
import shlex
import sys
from pathlib import Path

import numpy as np

from .errors import FormatError, HierlearnError, ValidationError
from .features import Dataset, TaskStream, load_binary, partition_tasks, save_binary
from .hierarchy import HierarchicalModel
from .memory import SNAPSHOT_HEADER
from .metrics import evaluate, format_report, format_table
from .synth import PRESETS, SynthSpec, generate, split_by_track
from .taxonomy import Taxonomy
from .trainer import TrainConfig, run_joint_oracle, run_stream, save_report

_SHAPE_FLAGS = (
    "dim",
    "species_per_group",
    "tracks",
    "frames",
    "group_sep",
    "species_sep",
    "noise",
)

# long option strings per subcommand, for config-file validation
_COMMAND_FLAGS: dict[str, dict[str, str]] = {}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # single-line, machine-parsable
        raise _UsageError(message)


def _add(sp: argparse.ArgumentParser, command: str, *names, **kwargs):
    action = sp.add_argument(*names, **kwargs)
    for name in names:
        if name.startswith("--"):
            _COMMAND_FLAGS.setdefault(command, {})[name[2:]] = name
    return action


def _common(sp, command: str, seed_help="seed for every random choice"):
    _add(sp, command, "--seed", type=int, default=0, help=seed_help)
    _add(sp, command, "--config", type=str, default=None, help="key=value defaults file")
    _add(sp, command, "--out", type=str, default=".", help="artifact directory")


def build_parser() -> _Parser:
    parser = _Parser(
        prog="hierlearn",
        description="hierarchical class-incremental SVM pipeline",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    fmt = dict(formatter_class=argparse.ArgumentDefaultsHelpFormatter)

    sp = sub.add_parser("gen", help="generate synthetic tracked feature data", **fmt)
    _common(sp, "gen")
    _add(sp, "gen", "--preset", choices=sorted(PRESETS), default=None,
         help="named data shape (conflicts with the explicit shape flags)")
    _add(sp, "gen", "--dim", type=int, default=None, help="feature dimension")
    _add(sp, "gen", "--species-per-group", type=str, default=None,
         help="comma-separated species counts, e.g. 4,2,2")
    _add(sp, "gen", "--tracks", type=int, default=None, help="tracks per species")
    _add(sp, "gen", "--frames", type=int, default=None, help="frames per track")
    _add(sp, "gen", "--group-sep", type=float, default=None, help="min distance between group centers")
    _add(sp, "gen", "--species-sep", type=float, default=None, help="min distance between species centers")
    _add(sp, "gen", "--noise", type=float, default=None, help="frame noise sigma")
    _add(sp, "gen", "--test-fraction", type=float, default=0.25,
         help="fraction of tracks held out per species")
    sp.set_defaults(func=_cmd_gen)

    sp = sub.add_parser("split", help="partition training data into class-disjoint tasks", **fmt)
    _common(sp, "split")
    _add(sp, "split", "--input", type=str, default=None,
         help="feature file to partition (default: OUT/train.feat)")
    _add(sp, "split", "--num-tasks", type=int, required=True, help="number of tasks")
    sp.set_defaults(func=_cmd_split)

    for name, func in (("train", _cmd_train), ("joint-train", _cmd_train)):
        sp = sub.add_parser(
            name,
            help=(
                "run the class-incremental protocol over the task files"
                if name == "train"
                else "train once on all tasks pooled (upper-bound comparator)"
            ),
            **fmt,
        )
        _common(sp, name)
        _add(sp, name, "--tasks", type=str, nargs="+", default=None,
             help="ordered task feature files (default: OUT/task*.feat)")
        _add(sp, name, "--test", type=str, default=None,
             help="held-out feature file for per-task evaluation"
                  " (default: OUT/test.feat if present)")
        _add(sp, name, "--hard-budget", type=int, default=200,
             help="total hard-case memory slots across all SVMs")
        _add(sp, name, "--exemplar-budget", type=int, default=1800,
             help="total exemplar memory slots across all classes")
        _add(sp, name, "--svm-c", type=float, default=1.0, help="SVM penalty C")
        _add(sp, name, "--svm-tol", type=float, default=1e-6, help="duality-gap tolerance")
        _add(sp, name, "--max-iter", type=int, default=10000, help="max solver epochs")
        sp.set_defaults(func=func, joint=(name == "joint-train"))

    sp = sub.add_parser("eval", help="score a model on a labeled feature file", **fmt)
    _common(sp, "eval", seed_help="accepted for interface symmetry; eval is deterministic")
    _add(sp, "eval", "--model", type=str, required=True, help="model file")
    _add(sp, "eval", "--test", type=str, required=True, help="labeled feature file")
    _add(sp, "eval", "--verbose", action="store_true", help="also print the confusion breakdown")
    sp.set_defaults(func=_cmd_eval)

    sp = sub.add_parser("predict", help="predict one line per track of a feature file", **fmt)
    _common(sp, "predict", seed_help="accepted for interface symmetry; prediction is deterministic")
    _add(sp, "predict", "--model", type=str, required=True, help="model file")
    _add(sp, "predict", "--input", type=str, required=True, help="feature file (labels ignored)")
    sp.set_defaults(func=_cmd_predict)

    sp = sub.add_parser("inspect-memory", help="dump a memory snapshot file", **fmt)
    _common(sp, "inspect-memory", seed_help="accepted for interface symmetry")
    _add(sp, "inspect-memory", "--input", type=str, default=None,
         help="memory snapshot (default: OUT/memory.txt)")
    sp.set_defaults(func=_cmd_inspect)

    return parser


# -- plumbing ---------------------------------------------------------------


def _read_config(path: str, command: str) -> list[str]:
    """Turn key=value lines into synthetic argv tokens for the subcommand."""
    known = _COMMAND_FLAGS.get(command, {})
    tokens: list[str] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise FormatError(f"{path}:{lineno}: expected key=value")
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if key not in known:
                raise FormatError(
                    f"{path}:{lineno}: {key!r} is not a flag of '{command}'"
                )
            tokens.append(known[key])
            tokens.extend(shlex.split(val))
    return tokens


def _sidecar(path: str | Path) -> Path:
    return Path(path).with_suffix(".tax")


def _load_dataset(path: str | Path) -> Dataset:
    taxonomy = Taxonomy.load(_sidecar(path))
    return load_binary(path, taxonomy)


def _save_dataset(ds: Dataset, path: str | Path):
    save_binary(ds, path)
    ds.taxonomy.save(_sidecar(path))


def _say(msg: str):
    print(msg, file=sys.stderr)


# -- subcommands --------------------------------------------------------------


def _cmd_gen(args) -> int:
    custom = [f for f in _SHAPE_FLAGS if getattr(args, f) is not None]
    if args.preset and custom:
        raise ValidationError(
            f"--preset conflicts with explicit shape flags ({', '.join(custom)})"
        )
    if args.preset:
        spec = dataclasses.replace(PRESETS[args.preset], seed=args.seed)
    else:
        missing = [f for f in _SHAPE_FLAGS if getattr(args, f) is None]
        if missing:
            raise ValidationError(
                "gen needs --preset or every shape flag; missing: "
                + ", ".join(f.replace("_", "-") for f in missing)
            )
        try:
            species_per_group = tuple(int(v) for v in args.species_per_group.split(","))
        except ValueError:
            raise ValidationError(
                f"--species-per-group must be comma-separated integers,"
                f" got {args.species_per_group!r}"
            ) from None
        spec = SynthSpec(
            dim=args.dim,
            species_per_group=species_per_group,
            tracks_per_species=args.tracks,
            frames_per_track=args.frames,
            group_sep=args.group_sep,
            species_sep=args.species_sep,
            noise=args.noise,
            seed=args.seed,
        )
    ds, _ = generate(spec)
    train, test = split_by_track(ds, args.test_fraction, seed=spec.seed + 1)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _save_dataset(train, out / "train.feat")
    _save_dataset(test, out / "test.feat")
    _say(f"wrote {out / 'train.feat'} ({len(train)} frames)"
         f" and {out / 'test.feat'} ({len(test)} frames)")
    return 0


def _cmd_split(args) -> int:
    out = Path(args.out)
    src = Path(args.input) if args.input else out / "train.feat"
    ds = _load_dataset(src)
    stream = partition_tasks(ds, args.num_tasks, seed=args.seed)
    out.mkdir(parents=True, exist_ok=True)
    written = 0
    for t, task in enumerate(stream):
        if len(task) == 0:
            _say(f"task {t + 1} is empty; not writing a file")
            continue
        path = out / f"task{t + 1:02d}.feat"
        _save_dataset(task, path)
        _say(f"wrote {path} ({len(task)} frames, {len(task.species_set())} species)")
        written += 1
    if written == 0:
        raise ValidationError("every task came out empty")
    return 0


def _task_stream(args) -> tuple[TaskStream, Dataset | None]:
    out = Path(args.out)
    paths = [Path(p) for p in args.tasks] if args.tasks else sorted(out.glob("task*.feat"))
    if not paths:
        raise ValidationError(f"no task files given and none found under {out}")
    tasks = [_load_dataset(p) for p in paths]
    stream = TaskStream(tasks=tuple(tasks), taxonomy=tasks[0].taxonomy)
    test = None
    test_path = Path(args.test) if args.test else out / "test.feat"
    if args.test or test_path.exists():
        test = _load_dataset(test_path)
        if test.taxonomy != stream.taxonomy:
            raise ValidationError(f"{test_path} uses a different taxonomy than the tasks")
    return stream, test


def _cmd_train(args) -> int:
    stream, test = _task_stream(args)
    cfg = TrainConfig(
        hard_budget=args.hard_budget,
        exemplar_budget=args.exemplar_budget,
        svm_c=args.svm_c,
        svm_tol=args.svm_tol,
        max_iter=args.max_iter,
        seed=args.seed,
    )
    runner = run_joint_oracle if args.joint else run_stream
    model, store, report = runner(stream, cfg, test)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    suffix = "_joint" if args.joint else ""
    model.save(out / f"model{suffix}.txt")
    store.save(out / f"memory{suffix}.txt")
    save_report(report, cfg, out / f"report{suffix}.txt")
    for name in ("model", "memory", "report"):
        _say(f"wrote {out / (name + suffix + '.txt')}")
    last = report.summaries[-1].report
    if last is not None:
        print(format_table([(f"after task {len(report.summaries)}", last)]))
    return 0


def _cmd_eval(args) -> int:
    model = HierarchicalModel.load(args.model)
    test = _load_dataset(args.test)
    rep = evaluate(model, test)
    table = format_table([("eval", rep)])
    print(table)
    if args.verbose:
        print(format_report(rep, model.taxonomy))
    out = Path(args.out)
    if args.out != ".":
        out.mkdir(parents=True, exist_ok=True)
        (out / "eval.txt").write_text(table + "\n", encoding="utf-8")
        _say(f"wrote {out / 'eval.txt'}")
    return 0


def _cmd_predict(args) -> int:
    model = HierarchicalModel.load(args.model)
    ds = _load_dataset(args.input)
    t = model.taxonomy
    for fish in np.unique(ds.fish_id):
        rows = np.nonzero(ds.fish_id == fish)[0]
        p = model.predict_video(ds.features[rows])
        print(
            f"fish {int(fish)} frames {rows.size}"
            f" group {p.group_id} {t.group_names[p.group_id]} {p.group_confidence:.6f}"
            f" species {p.species_id} {t.species_names[p.species_id]} {p.species_confidence:.6f}"
        )
    return 0


def _cmd_inspect(args) -> int:
    path = Path(args.input) if args.input else Path(args.out) / "memory.txt"
    text = Path(path).read_text(encoding="utf-8")
    if not text.startswith(SNAPSHOT_HEADER):
        raise FormatError(f"{path} is not a memory snapshot")
    sys.stdout.write(text)
    return 0


def main(argv=None) -> int:
    raw = list(sys.argv[1:] if argv is None else argv)
    try:
        parser = build_parser()
        args = parser.parse_args(raw)
        if args.config:
            # config supplies defaults: inject its tokens right after the
            # subcommand so explicit flags (later tokens) win
            at = raw.index(args.command) + 1
            merged = raw[:at] + _read_config(args.config, args.command) + raw[at:]
            args = parser.parse_args(merged)
        return args.func(args)
    except _UsageError as exc:
        print(f"error E_USAGE: {exc}", file=sys.stderr)
        return 2
    except HierlearnError as exc:
        print(f"error {exc.code}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error E_IO: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
