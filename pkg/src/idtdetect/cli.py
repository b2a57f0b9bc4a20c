"""Command-line entry point.

    idtdetect generate --exp gauss --seed 1 --len 1000 --out gauss_1.csv
    idtdetect run --algo itan --exp gauss --seed 1 --out-dir runs/itan
    idtdetect eval --exp gauss --algos itan,wgmm,wkde,ml --out-dir results/gauss

Exit status: 0 success, 1 data error, 2 usage error.  Options may also come
from ``--config FILE`` holding ``key=value`` lines (keys are the long option
names); command-line flags override the file.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

from . import __version__
from .data import GENERATORS, DataFormatError, Dataset, load_vehicle, read_dataset_csv, write_dataset_csv
from .evaluation import (
    ALGORITHMS,
    COST_GRID,
    RunConfig,
    avg_log_loss_curve,
    evaluate,
    experiment_defaults,
    roc_point,
    run_once,
)
from .pipeline import StreamError, write_outputs_csv

EXIT_DATA = 1
EXIT_USAGE = 2


def read_config_file(path: str) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


def _bool(s: str) -> bool:
    if s.lower() in ("1", "true", "yes", "on"):
        return True
    if s.lower() in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {s!r}")


def _add_source(p: argparse.ArgumentParser) -> None:
    p.add_argument("--exp", choices=sorted(GENERATORS) + ["vehicle"])
    p.add_argument("--data", help="dataset CSV (generate output) or Statlog vehicle file")
    p.add_argument("--len", type=int, default=1000, dest="length")


def _add_detector(p: argparse.ArgumentParser) -> None:
    p.add_argument("--beta", type=float)
    p.add_argument("--xi", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--cov-reg", type=float, help="relative covariance loading of tree nodes")
    p.add_argument("--reset-two-means", type=_bool)
    p.add_argument("--split-leaves-only", type=_bool)
    p.add_argument("--seed-child-centroids", type=_bool)
    p.add_argument("--c1", type=float, help="miss cost")
    p.add_argument("--c-1", type=float, dest="c_1", help="false-alarm cost")
    p.add_argument("--feedback-prob", type=float)
    p.add_argument("--log-space-threshold", type=_bool, nargs="?", const=True)
    p.add_argument("--g-lo", type=float)
    p.add_argument("--g-hi", type=float)
    p.add_argument("--standardize", choices=["none", "running", "global"])
    p.add_argument("--gmm-k", type=int)
    p.add_argument("--gmm-reg", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="idtdetect", description=__doc__.split("\n")[0])
    parser.add_argument("--config", help="key=value defaults file")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic stream to CSV")
    g.add_argument("--exp", choices=sorted(GENERATORS), required=True)
    g.add_argument("--seed", type=int, default=1)
    g.add_argument("--len", type=int, default=1000, dest="length")
    g.add_argument("--out")

    r = sub.add_parser("run", help="run one detector and write its round outputs")
    r.add_argument("--algo", default="itan")
    r.add_argument("--seed", type=int, default=1)
    r.add_argument("--out-dir", default=".")
    _add_source(r)
    _add_detector(r)

    e = sub.add_parser("eval", help="ROC/AUC/log-loss over seeds and the cost grid")
    e.add_argument("--algos", default=",".join(ALGORITHMS))
    e.add_argument("--seeds", default="1-10", help="e.g. 1-10 or 1,2,5")
    e.add_argument("--out-dir", default=".")
    _add_source(e)
    _add_detector(e)
    return parser


def parse_seeds(text: str) -> list[int]:
    seeds: list[int] = []
    for part in text.split(","):
        if "-" in part:
            a, b = part.split("-")
            seeds.extend(range(int(a), int(b) + 1))
        elif part:
            seeds.append(int(part))
    return seeds


def _usage(parser: argparse.ArgumentParser, msg: str) -> int:
    parser.print_usage(sys.stderr)
    print(f"{parser.prog}: error: {msg}", file=sys.stderr)
    return EXIT_USAGE


def _run_config(args, algo: str, seed: int) -> RunConfig:
    base = experiment_defaults(args.exp or "")
    fields = RunConfig.__dataclass_fields__
    for key in fields:
        val = getattr(args, key, None)
        if val is not None:
            base[key] = val
    base["algo"] = algo
    base["seed"] = seed
    return RunConfig(**base)


def load_source(args, seed: int) -> Dataset:
    if args.data:
        if args.exp == "vehicle":
            return load_vehicle(args.data)
        ds = read_dataset_csv(args.data)
        ds.meta.setdefault("seed", seed)
        return ds
    if args.exp in GENERATORS:
        return GENERATORS[args.exp](seed, args.length)
    raise ValueError("need --exp gauss|sine or --data FILE")


def metadata(cfg: RunConfig | None = None, **extra) -> dict:
    meta = {"version": __version__}
    if cfg is not None:
        meta.update(cfg.as_dict())
    meta.update(extra)
    return meta


def cmd_generate(args) -> int:
    ds = GENERATORS[args.exp](args.seed, args.length)
    out = Path(args.out or f"{args.exp}_{args.seed}.csv")
    write_dataset_csv(ds, out, metadata(exp=args.exp, seed=args.seed, length=args.length))
    print(out)
    return 0


def cmd_run(args) -> int:
    cfg = _run_config(args, args.algo, args.seed)
    ds = load_source(args, args.seed)
    start = time.perf_counter()
    outputs, model = run_once(ds, cfg)
    elapsed = time.perf_counter() - start
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    meta = metadata(cfg, exp=args.exp, data=args.data, length=len(ds))
    write_outputs_csv(outputs, out_dir / "rounds.csv", meta)
    fpr, tpr = roc_point([o.decision for o in outputs], ds.labels)
    curve = avg_log_loss_curve(outputs)
    summary = {**meta, "rounds": len(outputs), "log_loss": float(curve[-1]),
               "fpr": fpr, "tpr": tpr, "seconds": elapsed,
               "zero_one_total": float(sum(o.zero_one or 0.0 for o in outputs))}
    if cfg.algo == "itan":
        summary["node_count"] = model.n_nodes
        model.tree.save(out_dir / "tree.json")
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2))
    print(json.dumps({k: summary[k] for k in ("log_loss", "fpr", "tpr")} |
                     ({"node_count": summary["node_count"]} if "node_count" in summary else {})))
    return 0


def cmd_eval(args) -> int:
    algos = [a for a in args.algos.split(",") if a]
    for a in algos:
        if a not in ALGORITHMS:
            raise argparse.ArgumentTypeError(f"unknown algorithm {a!r}")
    real = args.exp == "vehicle" or (args.data and args.exp not in GENERATORS)
    seeds = [0] if real else parse_seeds(args.seeds)
    datasets = [load_source(args, s) for s in seeds]
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = {"version": __version__, "exp": args.exp, "seeds": seeds, "algorithms": {}}
    for algo in algos:
        cfg = _run_config(args, algo, seeds[0])
        start = time.perf_counter()
        res = evaluate(datasets, cfg, COST_GRID)
        res["wall_clock_seconds"] = time.perf_counter() - start
        with open(out_dir / f"roc_{algo}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["cost", "FPR", "TPR"])
            for c, f, t in sorted(res["roc"], key=lambda r: (r[1], r[2])):
                w.writerow([repr(c), repr(f), repr(t)])
        with open(out_dir / f"loss_curve_{algo}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "Loss"])
            for t, v in enumerate(res.pop("loss_curve"), start=1):
                w.writerow([t, repr(v)])
        res.pop("roc")
        summary["algorithms"][algo] = res
        print(f"{algo:5s} log-loss {res['log_loss_mean']:.3f}  "
              f"AUC {res['auc_mean']:.4f} +- {res['auc_std']:.4f}  "
              f"{1000 * res['seconds_mean']:.0f} ms/run")
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2))
    return 0


def config_to_flags(cfg: dict[str, str]) -> list[str]:
    flags = []
    for key, value in cfg.items():
        flags += [f"--{key.replace('_', '-')}", value]
    return flags


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    if "--config" in argv:
        # file values go right after the subcommand so explicit flags win
        i = argv.index("--config")
        if i + 1 >= len(argv):
            return _usage(parser, "--config needs a file")
        cfg_path = argv[i + 1]
        argv = argv[:i] + argv[i + 2:]
        try:
            extra = config_to_flags(read_config_file(cfg_path))
        except (OSError, ValueError) as exc:
            return _usage(parser, str(exc))
        cmd_pos = next((j for j, a in enumerate(argv) if a in ("generate", "run", "eval")), None)
        if cmd_pos is None:
            return _usage(parser, "missing command")
        argv = argv[:cmd_pos + 1] + extra + argv[cmd_pos + 1:]
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        if args.command == "generate":
            return cmd_generate(args)
        if args.command == "run":
            if args.algo not in ALGORITHMS:
                return _usage(parser, f"unknown algorithm {args.algo!r}")
            return cmd_run(args)
        return cmd_eval(args)
    except argparse.ArgumentTypeError as exc:
        return _usage(parser, str(exc))
    except (DataFormatError, StreamError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        return _usage(parser, str(exc))


if __name__ == "__main__":
    sys.exit(main())
