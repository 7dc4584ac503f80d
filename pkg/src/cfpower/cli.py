"""Command-line entry point: generate -> train -> eval -> bench.

Every command writes its artifacts plus ``manifest.json`` into an output
directory. Relative ``--out`` paths are resolved against ``$CFPOWER_OUT``
when that variable is set.

Config files are JSON with optional sections::

    {"seed": 0,
     "system": {...SystemParams keys...},
     "train":  {"epochs": 300, "batch_size": 256, "lr_drop_epoch": 150,
                "lr_drop_factor": 0.1, "hidden": [128, 64], "momentum": 0.0,
                "loss": {"alpha": 1.0, "mu": 5.0, ...}},
     "eval":   {"test_samples": 500, "solver_samples": 20, "batch": 200, "repeats": 5}}

Command-line flags override the file. One master seed expands into stage
seeds with ``derive_seed(master, stage)``: 0 training set, 1 training run,
2 evaluation set, 3 timing set.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 I/O failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
OUT_ENV = "CFPOWER_OUT"
STAGE = {"dataset": 0, "train": 1, "test": 2, "bench": 3}
LOSS_NAMES = {"maxmin": "maxmin", "maxmin-prior": "maxmin_prior", "sumrate": "sum_rate", "product": "product"}
SOLVER_FOR_LOSS = {"maxmin": "maxmin", "maxmin_prior": "maxmin", "sum_rate": "sum_rate", "product": "product"}
EVAL_DEFAULTS = {"test_samples": 500, "solver_samples": 20, "batch": 200, "repeats": 5}
CONFIG_SECTIONS = {"seed", "system", "train", "eval"}

log = logging.getLogger("cfpower")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    system: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    eval: dict = field(default_factory=dict)
    seed: int = 0

    @classmethod
    def load(cls, path) -> "RunConfig":
        if path is None:
            return cls()
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        unknown = set(raw) - CONFIG_SECTIONS
        if unknown:
            raise ConfigError(f"{path}: unknown config sections {sorted(unknown)}")
        unknown = set(raw.get("eval", {})) - set(EVAL_DEFAULTS)
        if unknown:
            raise ConfigError(f"{path}: unknown eval keys {sorted(unknown)}")
        return cls(raw.get("system", {}), raw.get("train", {}), raw.get("eval", {}), int(raw.get("seed", 0)))

    def params(self):
        from .params import SystemParams
        return SystemParams.from_dict(self.system)

    def eval_setting(self, key: str, flag=None):
        return flag if flag is not None else self.eval.get(key, EVAL_DEFAULTS[key])

    def to_dict(self) -> dict:
        return {"seed": self.seed, "system": self.system, "train": self.train, "eval": self.eval}


def out_dir(arg) -> Path:
    path = Path(arg)
    root = os.environ.get(OUT_ENV)
    if root and not path.is_absolute():
        path = Path(root) / path
    path.mkdir(parents=True, exist_ok=True)
    return path


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out: Path, command: str, argv, config: dict, seeds: dict, inputs=(), outputs=()):
    from .report import version_string
    doc = {
        "command": command,
        "argv": list(argv),
        "version": version_string(),
        "config": config,
        "seeds": seeds,
        "inputs": {str(p): sha256(p) for p in inputs},
        "outputs": {Path(p).name: sha256(p) for p in outputs},
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def resolve_file(arg, default_name: str) -> Path:
    path = Path(arg)
    if path.is_dir():
        path = path / default_name
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    return path


def master_seed(args, cfg: RunConfig) -> int:
    return cfg.seed if args.seed is None else args.seed


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_generate(args, argv) -> int:
    from .pipeline import build_dataset, derive_seed
    cfg = RunConfig.load(args.config)
    params = cfg.params()
    seed = master_seed(args, cfg)
    ds_seed = derive_seed(seed, STAGE["dataset"])
    if args.samples < 1:
        raise ConfigError("--samples must be >= 1")
    ds = build_dataset(params, args.samples, ds_seed)
    out = out_dir(args.out)
    path = out / "dataset.npz"
    ds.save(path)
    write_manifest(out, "generate", argv, {**cfg.to_dict(), "system": params.to_dict(), "samples": args.samples},
                   {"master": seed, "dataset": ds_seed}, outputs=[path])
    print(f"wrote {path} ({len(ds)} samples, K={ds.K}, L={ds.L}, digest {ds.digest()[:16]})")
    return EXIT_OK


def build_train_config(args, cfg: RunConfig, seed: int):
    from .neural import LossSpec
    from .pipeline import DEFAULT_LR, TrainConfig, derive_seed
    kind = LOSS_NAMES[args.loss]
    doc = dict(cfg.train)
    loss_doc = {**doc.pop("loss", {}), "kind": kind}
    doc.setdefault("lr0", DEFAULT_LR[kind])
    if args.lr is not None:
        doc["lr0"] = args.lr
    if args.epochs is not None:
        doc["epochs"] = args.epochs
    if args.batch_size is not None:
        doc["batch_size"] = args.batch_size
    doc["loss"] = LossSpec.from_dict(loss_doc).to_dict()
    doc["seed"] = derive_seed(seed, STAGE["train"])
    try:
        return TrainConfig.from_dict(doc)
    except TypeError as exc:
        raise ConfigError(f"bad train section: {exc}") from exc


def cmd_train(args, argv) -> int:
    from .pipeline import Dataset, TrainingDiverged, train
    cfg = RunConfig.load(args.config)
    seed = master_seed(args, cfg)
    tcfg = build_train_config(args, cfg, seed)
    ds_path = resolve_file(args.dataset, "dataset.npz")
    ds = Dataset.load(ds_path)
    out = out_dir(args.out)
    curve_path, ckpt_path = out / "curve.csv", out / "model.json"
    seeds = {"master": seed, "train": tcfg.seed}
    config = {**cfg.to_dict(), "train": tcfg.to_dict()}

    def progress(epoch, value):
        log.info("epoch %d/%d loss %.6g", epoch, tcfg.epochs, value)

    try:
        model, curve = train(ds, tcfg, progress=progress)
    except TrainingDiverged as exc:
        curve_path.write_text(exc.curve.to_csv())
        write_manifest(out, "train", argv, config, seeds, inputs=[ds_path], outputs=[curve_path])
        print(f"training diverged: {exc}; partial curve in {curve_path}", file=sys.stderr)
        return EXIT_NUMERIC
    meta = {"system": ds.params.to_dict(), "dataset_digest": ds.digest()}
    ckpt_path.write_text(model.to_json(tcfg.loss, tcfg.seed, meta))
    curve_path.write_text(curve.to_csv())
    write_manifest(out, "train", argv, config, seeds, inputs=[ds_path], outputs=[ckpt_path, curve_path])
    print(f"wrote {ckpt_path} and {curve_path} (final loss {curve.loss[-1]:.6g}, "
          f"plateau epoch {curve.plateau_epoch()})")
    return EXIT_OK


def load_checkpoint_and_params(args, cfg: RunConfig):
    from .neural import read_checkpoint
    from .params import SystemParams
    path = resolve_file(args.checkpoint, "model.json")
    try:
        model, loss, _, meta = read_checkpoint(path.read_text())
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"{path}: unreadable checkpoint ({exc})") from exc
    if args.config is not None:
        params = cfg.params()
    elif "system" in meta:
        params = SystemParams.from_dict(meta["system"])
    else:
        params = SystemParams(num_ues=model.dims[0])
    if params.K != model.dims[0]:
        raise ConfigError(f"checkpoint expects K={model.dims[0]} users but the config has K={params.K}")
    return path, model, loss, params


def cmd_eval(args, argv) -> int:
    from .pipeline import build_dataset, derive_seed
    from .report import EqualPower, ModelMethod, SolverMethod, compare_methods, export
    cfg = RunConfig.load(args.config)
    seed = master_seed(args, cfg)
    ckpt, model, loss, params = load_checkpoint_and_params(args, cfg)
    objective = SOLVER_FOR_LOSS[loss.kind] if loss is not None else "maxmin"
    n = cfg.eval_setting("test_samples", args.samples)
    test_seed = derive_seed(seed, STAGE["test"])
    test = build_dataset(params, n, test_seed)
    methods = [ModelMethod(model)]
    for b in args.baselines.split(","):
        b = b.strip()
        if b == "equal":
            methods.append(EqualPower())
        elif b == "solver":
            methods.append(SolverMethod(objective))
        elif b:
            raise ConfigError(f"unknown baseline {b!r} (expected equal, solver)")
    rep = compare_methods(test, methods, metadata={"objective": objective, "checkpoint": str(ckpt)})
    out = out_dir(args.out)
    outputs = [export(rep, "csv", out / "cdf.csv"), out / "cdf_summary.csv",
               export(rep, "json", out / "comparison.json")]
    write_manifest(out, "eval", argv, {**cfg.to_dict(), "system": params.to_dict(), "test_samples": n,
                                       "baselines": args.baselines},
                   {"master": seed, "test": test_seed}, inputs=[ckpt], outputs=outputs)
    for name in rep.methods:
        s = rep.summary[name]
        print(f"{name:>14}  median min-SE {s['median_min_se']:.4f}  median sum-SE {s['median_sum_se']:.4f}  "
              f"p5 {s['p5_se']:.4f}")
    if any(rep.failures.values()):
        print(f"excluded samples: { {k: v for k, v in rep.failures.items() if v} }", file=sys.stderr)
    return EXIT_OK


def cmd_bench(args, argv) -> int:
    from .pipeline import build_dataset, derive_seed
    from .report import EqualPower, ModelMethod, SolverMethod, bench_timing, export
    cfg = RunConfig.load(args.config)
    seed = master_seed(args, cfg)
    ckpt, model, loss, params = load_checkpoint_and_params(args, cfg)
    objective = SOLVER_FOR_LOSS[loss.kind] if loss is not None else "maxmin"
    batch = cfg.eval_setting("batch", args.batch)
    solver_n = cfg.eval_setting("solver_samples", args.solver_samples)
    repeats = cfg.eval_setting("repeats", args.repeats)
    bench_seed = derive_seed(seed, STAGE["bench"])
    test = build_dataset(params, max(batch, solver_n), bench_seed)
    rep = bench_timing(test, [SolverMethod(objective), ModelMethod(model), EqualPower()],
                       solver_samples=solver_n, batch=batch, repeats=repeats)
    out = out_dir(args.out)
    outputs = [export(rep, "csv", out / "timing.csv"), export(rep, "json", out / "timing.json")]
    write_manifest(out, "bench", argv, {**cfg.to_dict(), "system": params.to_dict(), "batch": batch,
                                        "solver_samples": solver_n, "repeats": repeats},
                   {"master": seed, "bench": bench_seed}, inputs=[ckpt], outputs=outputs)
    for name, t in rep.sec_per_sample.items():
        print(f"{name:>14}  {t:.3e} s/sample  ({rep.samples[name]} samples)")
    print(f"speed-up solver/dl: {rep.ratio(f'opt-{objective}', 'dl'):.1f}x  [{rep.hardware}]")
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cfpower", description="Cell-free uplink power control: "
                                "datasets, training, evaluation and timing.")
    p.add_argument("--threads", type=int, default=None, help="cap on BLAS/OpenMP threads")
    p.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_default):
        sp.add_argument("--config", default=None, help="JSON run config")
        sp.add_argument("--out", default=out_default, help=f"output directory (relative to ${OUT_ENV} if set)")
        sp.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")

    g = sub.add_parser("generate", help="build a training dataset")
    common(g, "runs/data")
    g.add_argument("--samples", type=int, default=10000)

    t = sub.add_parser("train", help="train a power-control network")
    common(t, "runs/train")
    t.add_argument("--loss", choices=sorted(LOSS_NAMES), default="maxmin")
    t.add_argument("--dataset", required=True, help="dataset file or the directory holding dataset.npz")
    t.add_argument("--epochs", type=int, default=None)
    t.add_argument("--lr", type=float, default=None, help="initial learning rate (default per loss)")
    t.add_argument("--batch-size", type=int, default=None)

    e = sub.add_parser("eval", help="compare a trained model with baselines")
    common(e, "runs/eval")
    e.add_argument("--checkpoint", required=True, help="model.json or the directory holding it")
    e.add_argument("--baselines", default="equal,solver", help="comma list from: equal, solver")
    e.add_argument("--samples", type=int, default=None, help="fresh test samples")

    b = sub.add_parser("bench", help="time inference against the classical solver")
    common(b, "runs/bench")
    b.add_argument("--checkpoint", required=True)
    b.add_argument("--batch", type=int, default=None)
    b.add_argument("--solver-samples", type=int, default=None)
    b.add_argument("--repeats", type=int, default=None)
    return p


COMMANDS = {"generate": cmd_generate, "train": cmd_train, "eval": cmd_eval, "bench": cmd_bench}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    from .params import ParamsError

    def run():
        return COMMANDS[args.command](args, argv)

    try:
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("--threads must be >= 1")
            from threadpoolctl import threadpool_limits
            with threadpool_limits(limits=args.threads):
                return run()
        return run()
    except (ConfigError, ParamsError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FloatingPointError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
