"""Command line entry point: lifting, invariants, simulation, training, evaluation, benchmarks."""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import complex as cx
from .errors import InvalidInputError
from .invariants import all_invariants
from .model import EmpsnConfig, EmpsnModel

SEED_ENV = "EMPSN_SEED"


def _seed(value: int) -> int:
    env = os.environ.get(SEED_ENV)
    if env is None or env == "":
        return value
    try:
        return int(env)
    except ValueError:
        raise InvalidInputError(f"{SEED_ENV}={env!r} is not an integer") from None


def _read_points(path) -> np.ndarray:
    doc = json.loads(Path(path).read_text())
    if isinstance(doc, dict):
        doc = doc.get("positions", doc.get("pos"))
    pts = np.asarray(doc, dtype=np.float64)
    if pts.ndim != 2:
        raise InvalidInputError(f"{path}: expected a list of points")
    return pts


# commands ------------------------------------------------------------------------

def cmd_lift(args) -> int:
    pts = _read_points(args.input)
    if args.delta is None:
        K = cx.fully_connected(pts, args.max_dim)
    else:
        K = cx.vietoris_rips(pts, args.delta, args.max_dim)
    if args.augment_fc_edges:
        K = cx.augment_fully_connected_edges(K)
    Path(args.output).write_text(K.to_json())
    print("dim,count")
    for d, n in enumerate(K.counts()):
        print(f"{d},{n}")
    return 0


def cmd_invariants(args) -> int:
    K = cx.SimplicialComplex.from_json(Path(args.input).read_text())
    adj = cx.build_adjacency(K, ("boundary", "coboundary", "upper"))
    table = all_invariants(K, adj)
    width = max((v.shape[1] for v in table.values.values() if v.size), default=0)
    with open(args.output, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "sender_dim", "sender", "receiver_dim", "receiver"]
                   + [f"v{i}" for i in range(width)])
        rows = 0
        for key in sorted(table.values):
            kind, sd, rd = key
            rel = adj[key]
            for p, vec in enumerate(table.values[key]):
                vals = [format(float(x), ".17g") for x in vec] + [""] * (width - len(vec))
                w.writerow([kind, sd, int(rel.senders[p]), rd, int(rel.receivers[p])] + vals)
                rows += 1
    print("key,value")
    print(f"pairs,{rows}")
    print(f"degenerate_angles,{table.diagnostics.degenerate_angles}")
    print(f"degenerate_volumes,{table.diagnostics.degenerate_volumes}")
    return 0


def cmd_simulate(args) -> int:
    from .harness import NBodyConfig, save_pointcloud, simulate_nbody
    cfg = NBodyConfig(num_bodies=args.bodies, num_steps=args.steps, dt=args.dt, softening=args.softening,
                      seed=_seed(args.seed), counts={"train": args.train, "val": args.val, "test": args.test},
                      scale=args.scale)
    samples = simulate_nbody(cfg)
    save_pointcloud(args.out, samples)
    print("split,count")
    for split, n in cfg.split_sizes().items():
        print(f"{split},{n}")
    return 0


def _load_train_config(args):
    from .harness import TrainConfig
    doc = json.loads(Path(args.config).read_text()) if args.config else {}
    if "model" in doc or "train" in doc:
        model_doc, train_doc = dict(doc.get("model", {})), dict(doc.get("train", {}))
    else:
        model_doc, train_doc = dict(doc), {}
    model_doc["task"] = args.task
    profile = TrainConfig.nbody if args.task == "nbody" else TrainConfig.graph
    train_cfg = profile(**train_doc)
    if args.epochs is not None:
        train_cfg.epochs = args.epochs
    return model_doc, train_cfg


def cmd_train(args) -> int:
    from .harness import evaluate, load_pointcloud, split_samples, train
    from .report import plot_metrics
    model_doc, train_cfg = _load_train_config(args)
    splits = split_samples(load_pointcloud(args.data))
    tr, va = splits.get("train", []), splits.get("val", [])
    if not tr:
        raise InvalidInputError(f"{args.data}: no training samples")
    first = tr[0]
    model_doc.setdefault("node_feature_dim", first.node_features.shape[1])
    if args.task == "graph":
        model_doc.setdefault("out_dim", first.target.size)
    if args.task == "nbody" and first.velocities is not None:
        model_doc.setdefault("use_velocity", True)
    seed = _seed(model_doc.get("seed", train_cfg.seed))
    model_doc["seed"] = seed
    train_cfg.seed = seed
    config = EmpsnConfig.from_dict(model_doc)
    model = EmpsnModel(config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps({"model": json.loads(config.to_json()),
                                                 "train": train_cfg.__dict__}, indent=2, sort_keys=True))
    start = time.process_time()
    result = train(model, tr, va, train_cfg, out_dir=out, log_every=args.log_every)
    cpu = time.process_time() - start
    plot_metrics(out / "metrics.csv", out / "metrics.png")
    metric = "mse" if args.task == "nbody" else "mae"
    print("key,value")
    print(f"parameters,{model.num_parameters()}")
    print(f"best_epoch,{result.best_epoch}")
    print(f"best_val_loss,{result.best_val!r}")
    if splits.get("test"):
        print(f"test_{metric},{evaluate(model, splits['test'], metric, result.normalization)!r}")
    print(f"cpu_seconds,{cpu:.1f}")
    return 0


def cmd_eval(args) -> int:
    from .harness import evaluate, load_model, load_pointcloud, split_samples
    model, norm, _ = load_model(args.model)
    samples = load_pointcloud(args.data)
    if args.split != "all":
        samples = split_samples(samples).get(args.split, [])
    print("metric,value")
    print(f"{args.metric},{evaluate(model, samples, args.metric, norm)!r}")
    return 0


def cmd_check_equivariance(args) -> int:
    from .harness import check_equivariance, load_model, load_pointcloud
    model, _, _ = load_model(args.model)
    samples = load_pointcloud(args.data)[: args.max_samples]
    report = check_equivariance(model, samples, args.trials, seed=_seed(args.seed))
    for line in report.lines():
        print(line)
    return 0 if report.passed else 1


def cmd_params_count(args) -> int:
    doc = json.loads(Path(args.config).read_text())
    if "model" in doc:
        doc = doc["model"]
    model = EmpsnModel(EmpsnConfig.from_dict(doc))
    print(model.num_parameters())
    return 0


def cmd_bench(args) -> int:
    from .report import plot_bench
    if args.points not in bench_mod.GENERATORS:
        raise InvalidInputError(f"unknown point generator {args.points!r}")
    deltas = [float(d) for d in args.deltas.split(",") if d.strip()]
    clouds = bench_mod.GENERATORS[args.points](args.num_clouds, _seed(args.seed))
    report = bench_mod.run_bench(clouds, deltas, args.repeats, args.max_dim)
    report.write_csv(args.out)
    plot_bench(args.out, Path(args.out).with_suffix(".png"))
    w = csv.writer(sys.stdout)
    w.writerow(report.header())
    for rec in report.records():
        w.writerow([format(v, ".6g") if isinstance(v, float) else v for v in rec])
    return 0


def cmd_plot(args) -> int:
    from .report import plot_bench, plot_metrics
    fn = plot_bench if args.kind == "bench" else plot_metrics
    print(fn(args.csv, args.out))
    return 0


# parser ----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="empsn", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("lift", help="lift a point cloud to a Vietoris-Rips complex")
    s.add_argument("--input", required=True, help="JSON list of points or {'positions': ...}")
    s.add_argument("--delta", type=float, help="radius; omit for the fully connected complex")
    s.add_argument("--max-dim", type=int, default=2)
    s.add_argument("--output", required=True)
    s.add_argument("--augment-fc-edges", action="store_true",
                   help="replace the 1-skeleton by the complete graph")
    s.set_defaults(fn=cmd_lift)

    s = sub.add_parser("invariants", help="invariant features of every adjacency pair as CSV")
    s.add_argument("--input", required=True)
    s.add_argument("--output", required=True)
    s.set_defaults(fn=cmd_invariants)

    s = sub.add_parser("simulate", help="generate charged N-body trajectories")
    s.add_argument("--bodies", type=int, default=5)
    s.add_argument("--steps", type=int, default=1000)
    s.add_argument("--dt", type=float, default=1e-3)
    s.add_argument("--softening", type=float, default=0.1)
    s.add_argument("--train", type=int, default=3000)
    s.add_argument("--val", type=int, default=2000)
    s.add_argument("--test", type=int, default=2000)
    s.add_argument("--scale", type=float, default=1.0, help="multiplies all split sizes")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_simulate)

    s = sub.add_parser("train", help="train a model, write metrics.csv, metrics.png and best.ckpt")
    s.add_argument("--task", choices=("nbody", "graph"), required=True)
    s.add_argument("--config", help="JSON with optional 'model' and 'train' sections")
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--epochs", type=int)
    s.add_argument("--log-every", type=int, default=0)
    s.set_defaults(fn=cmd_train)

    s = sub.add_parser("eval", help="evaluate a checkpoint")
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--metric", choices=("mae", "mse"), default="mse")
    s.add_argument("--split", default="test", help="train, val, test or all")
    s.set_defaults(fn=cmd_eval)

    s = sub.add_parser("check-equivariance", help="residuals under random rigid motions")
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--trials", type=int, default=10)
    s.add_argument("--max-samples", type=int, default=20)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(fn=cmd_check_equivariance)

    s = sub.add_parser("params-count", help="number of trainable parameters of a model config")
    s.add_argument("--config", required=True)
    s.set_defaults(fn=cmd_params_count)

    s = sub.add_parser("bench", help="radius graph vs Vietoris-Rips construction time")
    s.add_argument("--deltas", default="4,8,12,16,20")
    s.add_argument("--repeats", type=int, default=100)
    s.add_argument("--points", default="qm9like")
    s.add_argument("--num-clouds", type=int, default=100)
    s.add_argument("--max-dim", type=int, default=2)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_bench)

    s = sub.add_parser("plot", help="re-render a figure from a metrics or bench CSV")
    s.add_argument("--kind", choices=("metrics", "bench"), required=True)
    s.add_argument("--csv", required=True)
    s.add_argument("--out")
    s.set_defaults(fn=cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (InvalidInputError, OSError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
