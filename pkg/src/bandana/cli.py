"""Command-line entry point: datasets, pretraining, probing, ablations,
and diagnostics as reproducible runs.

Every command echoes its configuration (with a hash) into each artifact
it writes, and report paths render matplotlib figures next to the
delimited outputs.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__, diagnostics, masking, plots
from .evaluation import dot_product_probe, linear_probe, node_split
from .generators import gen_karate_club, gen_swiss_roll, gen_two_moon
from .graph import Graph, load_dataset, save_dataset, subgraph_with_edges
from .model import ModelParams, params_from_dict, params_to_dict
from .presets import PRESET_NAMES, preset_config, probe_weight_decay
from .splits import load_split, save_split, split_edges
from .training import (TrainConfig, embed, pretrain, pretrain_discrete_baseline)

DEFAULT_DATA_DIR = os.environ.get("BANDANA_DATA", "data")


# ---------------------------------------------------------------------------
# config plumbing
# ---------------------------------------------------------------------------

def config_hash(payload: dict) -> str:
    canonical = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def write_json(path: Path, payload: dict, config: dict | None = None) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    body = dict(payload)
    if config is not None:
        body["config"] = config
        body["config_hash"] = config_hash(config)
    body["version"] = __version__
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(body, fh, indent=2, default=_jsonify)


def _jsonify(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def resolve_manifest(spec: str) -> Path:
    """Accept a manifest path, a dataset directory, or a bare dataset name."""
    p = Path(spec)
    if p.is_file():
        return p
    if p.is_dir() and (p / "manifest.json").exists():
        return p / "manifest.json"
    named = Path(DEFAULT_DATA_DIR) / spec / "manifest.json"
    if named.exists():
        return named
    raise SystemExit(f"error: cannot find dataset manifest for {spec!r} "
                     f"(searched {p} and {named})")


def load_graph_for(args) -> Graph:
    spec = args.dataset or args.preset
    if spec is None:
        raise SystemExit("error: provide --dataset PATH or --preset NAME")
    return load_dataset(resolve_manifest(spec))


def build_config(args) -> tuple[TrainConfig, dict]:
    """Merge preset, config file, and command-line flags (flags win)."""
    if args.preset:
        config = preset_config(args.preset, seed=args.seed)
    else:
        config = TrainConfig(seed=args.seed)
    overrides: dict = {}
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            overrides.update(json.load(fh))
    flag_map = {
        "mask": "mask_kind", "layerwise": "layerwise_mode", "tau": "temperature",
        "layers": "num_layers", "p": "mask_ratio", "lr": "lr",
        "max_epochs": "max_epochs", "patience": "patience",
        "hidden": "hidden_dim", "out_dim": "out_dim",
    }
    for flag, field_name in flag_map.items():
        val = getattr(args, flag, None)
        if val is not None:
            overrides[field_name] = val
    if overrides.get("mask_kind") == "bernoulli" and "temperature" in overrides:
        raise SystemExit("error: --tau applies to continuous masks, not bernoulli")
    known = set(TrainConfig.__dataclass_fields__)
    unknown = set(overrides) - known
    if unknown:
        raise SystemExit(f"error: unknown config fields {sorted(unknown)}")
    for field_name, val in overrides.items():
        setattr(config, field_name, val)
    config.seed = args.seed
    config.validate()
    run_cfg = asdict(config)
    run_cfg["dataset"] = args.dataset or args.preset
    run_cfg["preset"] = args.preset
    return config, run_cfg


# ---------------------------------------------------------------------------
# dataset commands
# ---------------------------------------------------------------------------

def cmd_dataset(args) -> int:
    if args.dataset_cmd == "gen":
        if args.kind == "swiss-roll":
            g = gen_swiss_roll(args.n, args.k if args.k is not None else 11, args.seed)
        elif args.kind == "two-moon":
            g = gen_two_moon(args.n, args.k if args.k is not None else 5,
                             args.noise, args.seed)
        elif args.kind == "karate":
            g = gen_karate_club()
        else:
            raise SystemExit(f"unknown synthetic dataset {args.kind!r}")
        out = Path(args.out or (Path(DEFAULT_DATA_DIR) / g.name))
        manifest = save_dataset(g, out, identity_features=True)
        print(f"wrote {manifest} ({g.num_nodes} nodes, "
              f"{g.num_directed_entries} directed entries)")
        return 0

    graph = load_dataset(resolve_manifest(args.path))
    if args.dataset_cmd == "validate":
        graph.validate()
        print(f"{graph.name}: OK ({graph.num_nodes} nodes, "
              f"{graph.num_directed_entries} directed entries)")
        return 0

    # stats
    n = graph.num_nodes
    density_permille = 1000.0 * graph.num_directed_entries / (n * (n - 1)) if n > 1 else 0.0
    stats = {
        "name": graph.name,
        "nodes": n,
        "edges_directed": graph.num_directed_entries,
        "edges_undirected": graph.num_undirected_edges,
        "features": graph.num_features,
        "classes": int(np.unique(graph.labels).size) if graph.labels is not None else None,
        "density_permille": round(density_permille, 4),
    }
    print(json.dumps(stats, indent=2))
    return 0


# ---------------------------------------------------------------------------
# pretraining
# ---------------------------------------------------------------------------

def _pretrain_once(graph, config: TrainConfig, split_seed: int, out_dir: Path,
                   run_cfg: dict):
    split = split_edges(graph, 0.85, 0.05, seed=split_seed)
    runner = pretrain_discrete_baseline if config.mask_kind == "bernoulli" else pretrain
    params, history = runner(graph, split, config)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_split(split, out_dir / "split.json")
    write_json(out_dir / "checkpoint.json", {"params": params_to_dict(params)}, run_cfg)
    with open(out_dir / "history.csv", "w", encoding="utf-8") as fh:
        fh.write("epoch,loss,val_metric\n")
        for epoch, loss, val in history.to_rows():
            fh.write(f"{epoch},{loss:.8g},{val:.8g}\n")
    write_json(out_dir / "config.json", {
        "best_epoch": history.best_epoch,
        "stop_reason": history.stop_reason,
        "epochs_run": history.num_epochs,
        "split_seed": split_seed,
    }, run_cfg)
    if history.num_epochs:
        plots.plot_history(history.losses, history.val_metrics, out_dir / "history.png")
    return params, history, split


def cmd_pretrain(args) -> int:
    graph = load_graph_for(args)
    config, run_cfg = build_config(args)
    out_root = Path(args.out or "runs/pretrain")
    for r in range(args.repeats):
        seed = args.seed + r
        cfg = TrainConfig(**{**asdict(config), "seed": seed})
        run_cfg_r = {**run_cfg, "seed": seed, "split_seed": args.split_seed + r}
        out_dir = out_root / f"seed{seed}" if args.repeats > 1 else out_root
        params, history, _ = _pretrain_once(graph, cfg, args.split_seed + r,
                                            out_dir, run_cfg_r)
        best = (history.val_metrics[history.best_epoch]
                if history.best_epoch >= 0 else float("nan"))
        print(f"seed {seed}: {history.num_epochs} epochs "
              f"({history.stop_reason}), best val AUC {best:.4f} "
              f"at epoch {history.best_epoch} -> {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# probing
# ---------------------------------------------------------------------------

def _find_checkpoints(path: Path) -> list[Path]:
    if path.is_file():
        return [path]
    if (path / "checkpoint.json").exists():
        return [path / "checkpoint.json"]
    found = sorted(path.glob("seed*/checkpoint.json"))
    if not found:
        raise SystemExit(f"error: no checkpoint.json under {path}")
    return found


def _load_checkpoint(path: Path) -> tuple[ModelParams, dict]:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    return params_from_dict(payload["params"]), payload.get("config", {})


def _train_graph_for_checkpoint(ckpt: Path, graph: Graph) -> Graph:
    split = load_split(ckpt.parent / "split.json")
    return subgraph_with_edges(graph, split.train_pos), split


def _aggregate(per_seed: list[dict]) -> dict:
    keys = per_seed[0].keys()
    agg = {}
    for key in keys:
        vals = np.asarray([m[key] for m in per_seed], dtype=np.float64)
        agg[key] = {"mean": float(vals.mean()), "std": float(vals.std(ddof=0))}
    return agg


def cmd_probe(args) -> int:
    graph = load_graph_for(args)
    ckpts = _find_checkpoints(Path(args.checkpoint))
    if args.repeats and len(ckpts) > 1:
        ckpts = ckpts[:args.repeats]
    per_seed = []
    cfg_echo = {}
    for i, ckpt in enumerate(ckpts):
        params, cfg_echo = _load_checkpoint(ckpt)
        train_graph, split = _train_graph_for_checkpoint(ckpt, graph)
        z = embed(train_graph, params)
        if args.probe_cmd == "link":
            metrics = dot_product_probe(z, split.test_pos, split.test_neg,
                                        hits_ks=tuple(args.hits_k or ()))
            per_seed.append(metrics.to_dict())
        else:
            if graph.labels is None:
                raise SystemExit("error: node probing needs labels")
            repeats = args.repeats if len(ckpts) == 1 and args.repeats else 1
            for r in range(repeats):
                probe_seed = args.seed + i * 1000 + r
                ns = node_split(graph, label_ratio=args.label_ratio, seed=probe_seed)
                wd = probe_weight_decay(args.preset) if args.preset else args.weight_decay
                metrics = linear_probe(z, graph.labels, ns, weight_decay=wd,
                                       rng=np.random.default_rng(probe_seed))
                per_seed.append(metrics.to_dict())
    result = {"task": args.probe_cmd, "num_runs": len(per_seed),
              "metrics": _aggregate(per_seed), "per_run": per_seed}
    out = Path(args.out or f"runs/probe_{args.probe_cmd}.json")
    write_json(out, result, cfg_echo or None)
    for key, stat in result["metrics"].items():
        print(f"{key}: {stat['mean']:.4f} +/- {stat['std']:.4f}")
    print(f"wrote {out}")
    return 0


# ---------------------------------------------------------------------------
# ablation grid
# ---------------------------------------------------------------------------

ABLATION_GRID = [
    ("bernoulli", "last", "Bernoulli"),
    ("uniform", "last", "Uniform"),
    ("truncgauss", "last", "Truncated Gaussian"),
    ("bandwidth", "last", "Boltzmann-Gibbs"),
    ("bandwidth", "lwm", "Boltzmann-Gibbs, LWM"),
    ("bandwidth", "lwp", "Boltzmann-Gibbs, LWP"),
]


def run_ablation(graph: Graph, base_config: TrainConfig, repeats: int,
                 probe_wd: float, split_seed: int = 0) -> list[dict]:
    rows = []
    for kind, mode, label in ABLATION_GRID:
        accs = []
        for r in range(repeats):
            cfg = TrainConfig(**{**asdict(base_config),
                                 "mask_kind": kind, "layerwise_mode": mode,
                                 "seed": base_config.seed + r})
            split = split_edges(graph, 0.85, 0.05, seed=split_seed + r)
            runner = pretrain_discrete_baseline if kind == "bernoulli" else pretrain
            params, _ = runner(graph, split, cfg)
            train_graph = subgraph_with_edges(graph, split.train_pos)
            z = embed(train_graph, params)
            ns = node_split(graph, seed=split_seed + r)
            metrics = linear_probe(z, graph.labels, ns, weight_decay=probe_wd,
                                   rng=np.random.default_rng(cfg.seed))
            accs.append(metrics.accuracy)
        rows.append({"strategy": label, "mask_kind": kind, "layerwise_mode": mode,
                     "mean": float(np.mean(accs)), "std": float(np.std(accs)),
                     "runs": accs})
    return rows


def cmd_ablate(args) -> int:
    graph = load_graph_for(args)
    if graph.labels is None:
        raise SystemExit("error: ablation compares node classification; needs labels")
    config, run_cfg = build_config(args)
    probe_wd = probe_weight_decay(args.preset) if args.preset else args.weight_decay
    rows = run_ablation(graph, config, args.repeats, probe_wd, args.split_seed)
    out_dir = Path(args.out or "runs/ablation")
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "ablation.csv", "w", encoding="utf-8") as fh:
        fh.write("strategy,mask_kind,layerwise_mode,mean,std\n")
        for r in rows:
            fh.write(f"{r['strategy']},{r['mask_kind']},{r['layerwise_mode']},"
                     f"{r['mean']:.6f},{r['std']:.6f}\n")
    write_json(out_dir / "ablation.json", {"rows": rows}, run_cfg)
    plots.plot_ablation(rows, "node classification accuracy", out_dir / "ablation.png")
    for r in rows:
        print(f"{r['strategy']:28s} {100 * r['mean']:6.2f} +/- {100 * r['std']:.2f}")
    print(f"wrote {out_dir}/ablation.{{csv,json,png}}")
    return 0


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def cmd_diagnose(args) -> int:
    out_dir = Path(args.out or "runs/diagnose")
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.diag_cmd == "energy":
        rng = np.random.default_rng(args.seed)
        report = diagnostics.verify_energy_theorem(args.trials, rng)
        payload = {"trials": report.trials, "violations": report.violations,
                   "equality_violations": report.equality_violations}
        write_json(out_dir / "energy.json", payload)
        print(json.dumps(payload, indent=2))
        return 0 if report.violations == 0 and report.equality_violations == 0 else 1

    graph = load_graph_for(args)

    if args.diag_cmd == "mask-ratio":
        split = split_edges(graph, 0.85, 0.05, seed=args.split_seed)
        train_graph = subgraph_with_edges(graph, split.train_pos)
        calc = masking.calculated_mask_ratio(graph, split.train_pos)
        rng = np.random.default_rng(args.seed)
        measured = [masking.measured_mask_ratio(
            masking.sample_bandwidth_masks(train_graph, args.tau, 1, rng))
            for _ in range(args.resamples)]
        payload = {"dataset": graph.name, "calculated": calc,
                   "measured": float(np.mean(measured)),
                   "measured_std": float(np.std(measured)),
                   "resamples": args.resamples, "temperature": args.tau}
        write_json(out_dir / "mask_ratio.json", payload)
        plots.plot_mask_ratios([{"dataset": graph.name, "calculated": calc,
                                 "measured": float(np.mean(measured))}],
                               out_dir / "mask_ratio.png")
        print(json.dumps(payload, indent=2))
        return 0

    if args.diag_cmd == "entropy":
        split = split_edges(graph, 0.85, 0.05, seed=args.split_seed)
        train_graph = subgraph_with_edges(graph, split.train_pos)
        rng = np.random.default_rng(args.seed)
        masks = masking.sample_bandwidth_masks(train_graph, args.tau, 1, rng)
        from .model import normalize_propagation
        gcn = normalize_propagation(masking.adjacency_with_loops(train_graph))
        hists = {
            f"bandwidth (tau={args.tau})": diagnostics.ego_entropy_histogram(masks.layers[0], args.bins),
            "degree-normalized": diagnostics.ego_entropy_histogram(gcn, args.bins),
        }
        with open(out_dir / "entropy.csv", "w", encoding="utf-8") as fh:
            fh.write("source,entropy\n")
            for name, h in hists.items():
                for e in h.entropies:
                    fh.write(f"{name},{e:.8g}\n")
        payload = {name: {"median": h.median, "nodes": int(h.entropies.size),
                          "log_base": "e", "bins": args.bins}
                   for name, h in hists.items()}
        write_json(out_dir / "entropy.json", payload)
        plots.plot_entropy_histograms(hists, out_dir / "entropy.png")
        print(json.dumps(payload, indent=2))
        return 0

    if args.diag_cmd == "components":
        split = split_edges(graph, 0.85, 0.05, seed=args.split_seed)
        train_graph = subgraph_with_edges(graph, split.train_pos)
        base_num, base_giant = diagnostics.count_components(train_graph)
        rows = [{"label": "unmasked", "components": base_num, "giant": base_giant}]
        rng = np.random.default_rng(args.seed)
        for s in range(args.resamples):
            if args.mask == "bernoulli":
                masks = masking.sample_bernoulli_masks(train_graph, args.p, rng)
            else:
                masks = masking.sample_bandwidth_masks(train_graph, args.tau, 1, rng)
            num, giant = diagnostics.count_components(train_graph, masks.layers[0])
            rows.append({"label": f"{args.mask} #{s}", "components": num, "giant": giant})
        payload = {"dataset": graph.name, "mask": args.mask, "rows": rows}
        write_json(out_dir / "components.json", payload)
        plots.plot_components(rows, out_dir / "components.png")
        print(json.dumps(payload, indent=2))
        return 0

    if args.diag_cmd == "depth":
        config, run_cfg = build_config(args)
        depths = [int(d) for d in args.depths.split(",")]
        probe_wd = probe_weight_decay(args.preset) if args.preset else args.weight_decay
        series = {}
        csv_rows = []
        for kind in ("bandwidth", "bernoulli"):
            means, stds = [], []
            for k in depths:
                accs = []
                for r in range(args.repeats):
                    cfg = TrainConfig(**{**asdict(config), "num_layers": k,
                                         "mask_kind": kind,
                                         "layerwise_mode": "lwp" if kind == "bandwidth" else "last",
                                         "seed": args.seed + r})
                    split = split_edges(graph, 0.85, 0.05, seed=args.split_seed + r)
                    runner = (pretrain_discrete_baseline if kind == "bernoulli"
                              else pretrain)
                    params, _ = runner(graph, split, cfg)
                    z = embed(subgraph_with_edges(graph, split.train_pos), params)
                    ns = node_split(graph, seed=args.split_seed + r)
                    m = linear_probe(z, graph.labels, ns, weight_decay=probe_wd,
                                     rng=np.random.default_rng(cfg.seed))
                    accs.append(m.accuracy)
                    csv_rows.append((kind, k, r, m.accuracy))
                means.append(float(np.mean(accs)))
                stds.append(float(np.std(accs)))
            series[kind] = (means, stds)
        with open(out_dir / "depth.csv", "w", encoding="utf-8") as fh:
            fh.write("mask_kind,depth,repeat,accuracy\n")
            for kind, k, r, acc in csv_rows:
                fh.write(f"{kind},{k},{r},{acc:.6f}\n")
        write_json(out_dir / "depth.json",
                   {"depths": depths,
                    "series": {k: {"mean": v[0], "std": v[1]} for k, v in series.items()}},
                   run_cfg)
        plots.plot_depth_sweep(depths, series, out_dir / "depth.png")
        print(f"wrote {out_dir}/depth.{{csv,json,png}}")
        return 0

    raise SystemExit(f"unknown diagnose subcommand {args.diag_cmd!r}")


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_dataset_args(p):
    p.add_argument("--dataset", help="manifest path, dataset dir, or name under the data dir")
    p.add_argument("--preset", choices=PRESET_NAMES,
                   help="hyperparameter preset (also default dataset name)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--out", help="output directory/file")


def _add_train_args(p):
    p.add_argument("--config", help="JSON config file (flags override it)")
    p.add_argument("--mask", choices=masking.MASK_KINDS, dest="mask")
    p.add_argument("--layerwise", choices=("lwp", "lwm", "last"), dest="layerwise")
    p.add_argument("--tau", type=float)
    p.add_argument("--layers", type=int)
    p.add_argument("--p", type=float, help="mask ratio for discrete/ablation kinds")
    p.add_argument("--lr", type=float)
    p.add_argument("--hidden", type=int)
    p.add_argument("--out-dim", type=int, dest="out_dim")
    p.add_argument("--max-epochs", type=int, dest="max_epochs")
    p.add_argument("--patience", type=int)
    p.add_argument("--weight-decay", type=float, default=0.0,
                   help="probe weight decay when no preset is given")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bandana",
        description="bandwidth-masked graph autoencoder toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_data = sub.add_parser("dataset", help="generate/inspect datasets")
    data_sub = p_data.add_subparsers(dest="dataset_cmd", required=True)
    p_gen = data_sub.add_parser("gen", help="generate a synthetic dataset")
    p_gen.add_argument("kind", choices=("swiss-roll", "two-moon", "karate"))
    p_gen.add_argument("--n", type=int, default=500)
    p_gen.add_argument("--k", type=int, default=None,
                       help="kNN neighbors (default: 11 swiss-roll, 5 two-moon)")
    p_gen.add_argument("--noise", type=float, default=0.05)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out")
    for name in ("stats", "validate"):
        p_s = data_sub.add_parser(name)
        p_s.add_argument("path")
    p_data.set_defaults(func=cmd_dataset)

    p_tr = sub.add_parser("pretrain", help="self-supervised pretraining")
    _add_dataset_args(p_tr)
    _add_train_args(p_tr)
    p_tr.add_argument("--repeats", type=int, default=1)
    p_tr.set_defaults(func=cmd_pretrain)

    p_pr = sub.add_parser("probe", help="evaluate a frozen checkpoint")
    probe_sub = p_pr.add_subparsers(dest="probe_cmd", required=True)
    for name in ("link", "node"):
        p = probe_sub.add_parser(name)
        _add_dataset_args(p)
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--repeats", type=int, default=0,
                       help="limit checkpoints / probe-seed repeats")
        p.add_argument("--weight-decay", type=float, default=0.0)
        if name == "link":
            p.add_argument("--hits-k", type=int, nargs="*", dest="hits_k")
        else:
            p.add_argument("--label-ratio", type=float, default=1.0)
        p.set_defaults(func=cmd_probe)

    p_ab = sub.add_parser("ablate", help="masking-strategy comparison grid")
    _add_dataset_args(p_ab)
    _add_train_args(p_ab)
    p_ab.add_argument("--repeats", type=int, default=3)
    p_ab.set_defaults(func=cmd_ablate)

    p_di = sub.add_parser("diagnose", help="verification reports")
    diag_sub = p_di.add_subparsers(dest="diag_cmd", required=True)
    for name in ("mask-ratio", "energy", "entropy", "components", "depth"):
        p = diag_sub.add_parser(name)
        _add_dataset_args(p)
        if name == "mask-ratio":
            p.add_argument("--tau", type=float, default=0.9)
            p.add_argument("--resamples", type=int, default=100)
        elif name == "energy":
            p.add_argument("--trials", type=int, default=10000)
        elif name == "entropy":
            p.add_argument("--tau", type=float, default=0.4)
            p.add_argument("--bins", type=int, default=30)
        elif name == "components":
            p.add_argument("--mask", choices=("bernoulli", "bandwidth"), default="bernoulli")
            p.add_argument("--p", type=float, default=0.7)
            p.add_argument("--tau", type=float, default=0.9)
            p.add_argument("--resamples", type=int, default=10)
        elif name == "depth":
            _add_train_args(p)
            p.add_argument("--depths", default="1,2,3,4,5,6,7,8")
            p.add_argument("--repeats", type=int, default=3)
        p.set_defaults(func=cmd_diagnose)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
