"""Experiment pipeline command line.

Sub-commands: ``synth`` (generate a synthetic dataset), ``split`` (RAND or
SKEW split of an interaction log), ``train`` (exposure + recommender),
``eval`` (real-plus-N ranking metrics), ``grid`` (sweeps over sample
counts and exposure variants).

Every output directory gets a ``manifest.json`` that fully determines its
contents; ``train --replay`` and ``eval --replay`` rerun a manifest and
reproduce checkpoints and reports byte for byte. Flags override entries
in an optional ``--config`` key=value file. Exit codes: 0 success,
1 usage error, 2 data error, 3 numerical divergence.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from .checkpoint import load_tensors, save_tensors
from .data import (DataError, load_interactions, load_item_features, rand_split,
                   read_split, skew_split, write_split)
from .evaluate import EvalProtocol, evaluate
from .exposure import ExposureConfig, ExposureModel, train_exposure, untrained_exposure
from .mf import BprConfig, MfModel
from .model import (DccfModel, TrainConfig, create_model, make_mf_scorer, make_scorer,
                    train, train_mf_baseline)
from .numerics import DivergenceError, EmbeddingTable, MlpParams
from .synthgen import SynthConfig, generate_world, sample_dataset, write_dataset

MODELS = ("dccf", "dccf_ns", "dccf_nd", "mf")
_VARIANT_OF = {"dccf": "full", "dccf_ns": "ns", "dccf_nd": "nd"}


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _load_config(path) -> dict:
    out = {}
    if path is None:
        return out
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key = value")
            key, value = line.split("=", 1)
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def _cast_like(value: str, default):
    if isinstance(default, bool):
        return value.lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    return value


class Options:
    """flag > config-file entry > built-in default."""

    def __init__(self, args, defaults: dict):
        self.args = args
        self.config = _load_config(getattr(args, "config", None))
        self.defaults = defaults

    def get(self, name: str):
        flag = getattr(self.args, name, None)
        if flag is not None:
            return flag
        default = self.defaults[name]
        if name in self.config:
            return _cast_like(self.config[name], default)
        return default


def _parse_list(text: str, cast):
    return [cast(part) for part in str(text).split(",") if part != ""]


# ---------------------------------------------------------------- synth

SYNTH_DEFAULTS = dict(users=900, items=1000, train_per_user=20, test_per_user=5,
                      feature_dim=16, latent_dim=16, confounder_strength=2.0,
                      sharpness=3.0, global_confounder=False, seed=0)
PRESET_DIRECT_EFFECT = {"sd1": 0.0, "sd2": 0.1}


def _synth_config(opt: Options, args) -> SynthConfig:
    direct = args.direct_effect
    if direct is None:
        direct = PRESET_DIRECT_EFFECT[args.preset]
    return SynthConfig(
        n_users=opt.get("users"), n_items=opt.get("items"),
        train_per_user=opt.get("train_per_user"), test_per_user=opt.get("test_per_user"),
        feature_dim=opt.get("feature_dim"), latent_dim=opt.get("latent_dim"),
        confounder_strength=opt.get("confounder_strength"),
        direct_effect_scale=float(direct),
        selection_sharpness=opt.get("sharpness"),
        global_confounder=bool(opt.get("global_confounder")),
        seed=opt.get("seed"))


def cmd_synth(args) -> int:
    opt = Options(args, SYNTH_DEFAULTS)
    cfg = _synth_config(opt, args)
    world = generate_world(cfg)
    table, features, split = sample_dataset(world, cfg)
    outdir = Path(args.out)
    write_dataset(outdir, table, features, split, cfg)
    print(f"wrote {len(split.train)} train / {len(split.test)} test pairs to {outdir}")
    return 0


# ---------------------------------------------------------------- split

SPLIT_DEFAULTS = dict(threshold=4.0, fractions="0.7,0.1,0.2", cap=0.9, seed=0)


def cmd_split(args) -> int:
    opt = Options(args, SPLIT_DEFAULTS)
    table = load_interactions(args.interactions, opt.get("threshold"))
    if args.strategy == "rand":
        fractions = tuple(_parse_list(opt.get("fractions"), float))
        split = rand_split(table, fractions, seed=opt.get("seed"))
        params = {"fractions": list(fractions)}
    else:
        split = skew_split(table, target_test_fraction=args.target_test_fraction,
                           cap=opt.get("cap"), seed=opt.get("seed"))
        params = {"cap": opt.get("cap"), "target_test_fraction": args.target_test_fraction}
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    write_split(split, table, outdir / "train.tsv", outdir / "validation.tsv",
                outdir / "test.tsv")
    manifest = {
        "kind": "split",
        "strategy": args.strategy,
        "interactions": str(args.interactions),
        "interactions_sha256": _sha256(args.interactions),
        "threshold": opt.get("threshold"),
        "seed": opt.get("seed"),
        "params": params,
        "counts": {"train": len(split.train), "validation": len(split.validation),
                   "test": len(split.test),
                   "dropped": len(split.dropped_validation) + len(split.dropped_test)},
    }
    _write_json(outdir / "manifest.json", manifest)
    print(f"split {args.strategy}: {manifest['counts']}")
    return 0


# ---------------------------------------------------------------- train

TRAIN_DEFAULTS = dict(
    threshold=4.0, model="dccf", exposure="unbias",
    dim=32, mlp_hidden="64", n_samples=20, feature_samples=2, sigma_m=0.1,
    sigma_is_std=False, no_mlp_bias=False, no_final_activation=False,
    lr=0.003, l2=1e-4, batch_size=128, epochs=100,
    exposure_dim=32, exposure_lr=0.01, exposure_l2=1e-4, exposure_epochs=20,
    eta=0.5, weight_cap=10.0, raw_exposure_scores=False, seed=0,
)


def _data_paths(args, opt) -> dict:
    data_dir = getattr(args, "data_dir", None)
    interactions = getattr(args, "interactions", None)
    features = getattr(args, "features", None)
    split_dir = getattr(args, "split_dir", None)
    if data_dir:
        interactions = interactions or str(Path(data_dir) / "interactions.tsv")
        features = features or str(Path(data_dir) / "features.tsv")
        split_dir = split_dir or data_dir
    if not interactions or not split_dir:
        raise UsageError("provide --data-dir or --interactions plus --split-dir")
    return {"interactions": interactions, "features": features,
            "split_dir": split_dir, "threshold": opt.get("threshold")}


def _load_table_and_split(data: dict, need_features: bool):
    table = load_interactions(data["interactions"], data["threshold"])
    split_dir = Path(data["split_dir"])
    split = read_split(table, split_dir / "train.tsv", split_dir / "validation.tsv",
                       split_dir / "test.tsv")
    features = None
    if need_features:
        if not data["features"]:
            raise UsageError("this model needs --features")
        features = load_item_features(data["features"], table)
    return table, split, features


def _split_strategy(data: dict) -> str:
    for probe in (Path(data["split_dir"]) / "manifest.json",):
        if probe.exists():
            try:
                return str(_read_json(probe).get("strategy", "unknown"))
            except (OSError, json.JSONDecodeError):
                return "unknown"
    return "unknown"


def _train_manifest_from_args(args) -> dict:
    opt = Options(args, TRAIN_DEFAULTS)
    model_name = opt.get("model")
    if model_name not in MODELS:
        raise UsageError(f"unknown model {model_name!r}")
    data = _data_paths(args, opt)
    manifest = {
        "kind": "train-run",
        "data": data,
        "seed": opt.get("seed"),
        "model": {
            "name": model_name,
            "dim": opt.get("dim"),
        },
        "training": {
            "learning_rate": opt.get("lr"),
            "l2": opt.get("l2"),
            "batch_size": opt.get("batch_size"),
            "epochs": opt.get("epochs"),
        },
    }
    if model_name != "mf":
        manifest["model"].update({
            "variant": _VARIANT_OF[model_name],
            "mlp_hidden": _parse_list(opt.get("mlp_hidden"), int),
            "n_sampled_items": opt.get("n_samples"),
            "n_feature_samples": opt.get("feature_samples"),
            "sigma_m": opt.get("sigma_m"),
            "sigma_is_std": bool(opt.get("sigma_is_std")),
            "mlp_bias": not opt.get("no_mlp_bias"),
            "mlp_final_activation": not opt.get("no_final_activation"),
        })
        manifest["exposure"] = {
            "variant": opt.get("exposure"),
            "dim": opt.get("exposure_dim"),
            "learning_rate": opt.get("exposure_lr"),
            "l2": opt.get("exposure_l2"),
            "epochs": opt.get("exposure_epochs"),
            "eta": opt.get("eta"),
            "weight_cap": opt.get("weight_cap"),
            "use_sigmoid": not opt.get("raw_exposure_scores"),
        }
    return manifest


def _exposure_config(manifest: dict) -> ExposureConfig:
    exp = manifest["exposure"]
    return ExposureConfig(
        variant=exp["variant"], dim=exp["dim"], learning_rate=exp["learning_rate"],
        l2=exp["l2"], epochs=exp["epochs"], eta=exp["eta"],
        weight_cap=exp["weight_cap"], use_sigmoid=exp["use_sigmoid"],
        seed=manifest["seed"])


def _run_training(manifest: dict, outdir: Path) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    model_name = manifest["model"]["name"]
    data = manifest["data"]
    table, split, features = _load_table_and_split(data, need_features=model_name != "mf")
    train_table = table.restricted_to(split.train)
    seed = manifest["seed"]
    tr = manifest["training"]
    if model_name == "mf":
        cfg = BprConfig(dim=manifest["model"]["dim"], learning_rate=tr["learning_rate"],
                        l2=tr["l2"], epochs=tr["epochs"], batch_size=tr["batch_size"])
        mf_model, losses = train_mf_baseline(train_table, cfg, seed)
        tensors = {f"mf/{k}": v for k, v in mf_model.params().items()}
        records = [{"epoch": i, "mean_loss": loss} for i, loss in enumerate(losses)]
    else:
        exp_cfg = _exposure_config(manifest)
        if exp_cfg.variant in ("bias", "unbias"):
            exposure_model, _ = train_exposure(train_table, exp_cfg)
        else:
            exposure_model = untrained_exposure(exp_cfg.variant, table.n_items, exp_cfg)
        spec = manifest["model"]
        dccf_model = create_model(
            table.n_users, table.n_items, features, exposure_model, seed,
            dim=spec["dim"], mlp_hidden=tuple(spec["mlp_hidden"]),
            n_sampled_items=spec["n_sampled_items"],
            n_feature_samples=spec["n_feature_samples"], sigma_m=spec["sigma_m"],
            sigma_is_std=spec["sigma_is_std"], variant=spec["variant"],
            mlp_bias=spec["mlp_bias"], mlp_final_activation=spec["mlp_final_activation"])
        cfg = TrainConfig(learning_rate=tr["learning_rate"], l2=tr["l2"],
                          batch_size=tr["batch_size"], epochs=tr["epochs"],
                          seed=seed, variant=spec["variant"])
        trace = train(dccf_model, split, cfg)
        tensors = dccf_model.tensors()
        records = [{"epoch": r.epoch, "mean_loss": r.mean_loss,
                    "wall_time_s": r.wall_time_s} for r in trace]
    save_tensors(outdir / "model.ckpt", tensors)
    with open(outdir / "losses.ndjson", "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    manifest = dict(manifest)
    manifest["checkpoint_sha256"] = _sha256(outdir / "model.ckpt")
    _write_json(outdir / "manifest.json", manifest)


def cmd_train(args) -> int:
    if args.replay:
        manifest = _read_json(args.replay)
        if manifest.get("kind") != "train-run":
            raise DataError(f"{args.replay}: not a train manifest")
        manifest.pop("checkpoint_sha256", None)
    else:
        manifest = _train_manifest_from_args(args)
    _run_training(manifest, Path(args.out))
    print(f"trained {manifest['model']['name']} -> {args.out}")
    return 0


# ----------------------------------------------------------------- eval

EVAL_DEFAULTS = dict(k=5, negatives=100, seed=0, threshold=4.0, per_user=False)


def _restore_model(manifest: dict, outdir: Path, table, features):
    tensors = load_tensors(Path(outdir) / "model.ckpt")
    if manifest["model"]["name"] == "mf":
        mf_model = MfModel(tensors["mf/p"], tensors["mf/q"], tensors["mf/b_user"],
                           tensors["mf/b_item"], tensors["mf/b_global"])
        return make_mf_scorer(mf_model)
    exp_cfg = _exposure_config(manifest)
    if exp_cfg.variant in ("bias", "unbias"):
        exposure_model = ExposureModel.from_tensors(exp_cfg.variant, table.n_items,
                                                    exp_cfg, tensors)
    else:
        exposure_model = untrained_exposure(exp_cfg.variant, table.n_items, exp_cfg)
    spec = manifest["model"]
    layer_keys = sorted((t for t in tensors if t.startswith("mlp/w")),
                        key=lambda t: int(t.removeprefix("mlp/w")))
    layers = [tensors[k] for k in layer_keys]
    mlp = MlpParams(weights=layers, use_bias=spec["mlp_bias"],
                    final_activation=spec["mlp_final_activation"])
    dccf_model = DccfModel(
        EmbeddingTable.from_values(tensors["user_emb"]),
        EmbeddingTable.from_values(tensors["item_emb"]),
        mlp, exposure_model, features,
        n_sampled_items=spec["n_sampled_items"],
        n_feature_samples=spec["n_feature_samples"], sigma_m=spec["sigma_m"],
        sigma_is_std=spec["sigma_is_std"], variant=spec["variant"])
    return make_scorer(dccf_model)


def _run_eval(manifest: dict, outdir: Path) -> None:
    run_dir = Path(manifest["run"])
    train_manifest = _read_json(run_dir / "manifest.json")
    recorded = train_manifest.get("checkpoint_sha256")
    actual = _sha256(run_dir / "model.ckpt")
    if recorded != actual:
        raise DataError(
            f"{run_dir}: checkpoint hash {actual[:12]}... does not match "
            f"manifest {str(recorded)[:12]}...")
    data = dict(train_manifest["data"])
    if manifest.get("data_overrides"):
        data.update(manifest["data_overrides"])
    model_name = train_manifest["model"]["name"]
    table, split, features = _load_table_and_split(data, need_features=model_name != "mf")
    scorer = _restore_model(train_manifest, run_dir, table, features)
    protocol = EvalProtocol(k=manifest["k"], n_negatives=manifest["n_negatives"],
                            seed=manifest["seed"])
    report = evaluate(scorer, split, table, protocol)
    outdir.mkdir(parents=True, exist_ok=True)
    record = {
        "model": model_name,
        "variant": train_manifest["model"].get("variant", "mf"),
        "exposure": train_manifest.get("exposure", {}).get("variant"),
        "split_strategy": _split_strategy(data),
        "k": protocol.k,
        "n_negatives": protocol.n_negatives,
        "seed": protocol.seed,
        "ndcg": report.ndcg_mean,
        "recall": report.recall_mean,
        "precision": report.precision_mean,
        "n_users": report.n_users,
        "shortfall_users": report.shortfall_users,
    }
    with open(outdir / "report.ndjson", "w", encoding="utf-8") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")
    if manifest.get("per_user"):
        with open(outdir / "per_user.tsv", "w", encoding="utf-8") as fh:
            fh.write("user\tndcg\trecall\tprecision\n")
            for i, u in enumerate(report.users):
                fh.write(f"{table.user_ids[u]}\t{report.ndcg[i]!r}\t"
                         f"{report.recall[i]!r}\t{report.precision[i]!r}\n")
    manifest = dict(manifest)
    manifest["checkpoint_sha256"] = actual
    _write_json(outdir / "manifest.json", manifest)
    print(json.dumps(record, sort_keys=True))


def cmd_eval(args) -> int:
    if args.replay:
        manifest = _read_json(args.replay)
        if manifest.get("kind") != "eval-run":
            raise DataError(f"{args.replay}: not an eval manifest")
        manifest.pop("checkpoint_sha256", None)
    else:
        if not args.run:
            raise UsageError("eval needs --run (or --replay)")
        opt = Options(args, EVAL_DEFAULTS)
        overrides = {}
        if args.data_dir:
            overrides = {"interactions": str(Path(args.data_dir) / "interactions.tsv"),
                         "features": str(Path(args.data_dir) / "features.tsv"),
                         "split_dir": str(args.data_dir)}
        manifest = {
            "kind": "eval-run",
            "run": str(args.run),
            "k": opt.get("k"),
            "n_negatives": opt.get("negatives"),
            "seed": opt.get("seed"),
            "per_user": bool(opt.get("per_user")),
            "data_overrides": overrides,
        }
    _run_eval(manifest, Path(args.out))
    return 0


# ----------------------------------------------------------------- grid

def _manifest_core(manifest: dict) -> dict:
    core = {k: v for k, v in manifest.items() if k != "checkpoint_sha256"}
    return core


def cmd_grid(args) -> int:
    models = _parse_list(args.models, str)
    exposures = _parse_list(args.exposures, str)
    n_values = _parse_list(args.n_values, int)
    seeds = _parse_list(args.seeds, int)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    records = []
    for seed in seeds:
        for model_name in models:
            cells = [(None, None)] if model_name == "mf" else [
                (exp, n) for exp in exposures for n in n_values]
            for exp, n in cells:
                label = (f"{model_name}-seed{seed}" if model_name == "mf"
                         else f"{model_name}-{exp}-n{n}-seed{seed}")
                cell_dir = outdir / "cells" / label
                train_args = argparse.Namespace(**vars(args))
                train_args.model = model_name
                train_args.exposure = exp
                train_args.n_samples = n
                train_args.seed = seed
                train_args.replay = None
                manifest = _train_manifest_from_args(train_args)
                existing = cell_dir / "manifest.json"
                report_path = cell_dir / "eval" / "report.ndjson"
                if existing.exists() and report_path.exists() \
                        and _manifest_core(_read_json(existing)) == manifest:
                    print(f"skip {label} (already complete)")
                else:
                    _run_training(manifest, cell_dir)
                    opt = Options(args, EVAL_DEFAULTS)
                    eval_manifest = {
                        "kind": "eval-run",
                        "run": str(cell_dir),
                        "k": opt.get("k"),
                        "n_negatives": opt.get("negatives"),
                        "seed": opt.get("seed"),
                        "per_user": False,
                        "data_overrides": {},
                    }
                    _run_eval(eval_manifest, cell_dir / "eval")
                with open(report_path, encoding="utf-8") as fh:
                    record = json.loads(fh.readline())
                record["cell"] = label
                record["train_seed"] = seed
                record["n_sampled_items"] = n
                records.append(record)
    with open(outdir / "grid.ndjson", "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    print(f"grid complete: {len(records)} cells -> {outdir / 'grid.ndjson'}")
    return 0


# ----------------------------------------------------------------- wiring

def build_parser() -> Parser:
    parser = Parser(prog="dccf", description=__doc__,
                    formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--preset", choices=("sd1", "sd2"), default="sd1")
    p.add_argument("--users", type=int)
    p.add_argument("--items", type=int)
    p.add_argument("--train-per-user", type=int)
    p.add_argument("--test-per-user", type=int)
    p.add_argument("--feature-dim", type=int)
    p.add_argument("--latent-dim", type=int)
    p.add_argument("--confounder-strength", type=float)
    p.add_argument("--direct-effect", type=float, default=None)
    p.add_argument("--sharpness", type=float)
    p.add_argument("--global-confounder", action="store_true", default=None)
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("split", help="split an interaction log")
    p.add_argument("--interactions", required=True)
    p.add_argument("--threshold", type=float)
    p.add_argument("--strategy", choices=("rand", "skew"), required=True)
    p.add_argument("--fractions")
    p.add_argument("--target-test-fraction", type=float, default=None)
    p.add_argument("--cap", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    def add_data_args(p):
        p.add_argument("--data-dir")
        p.add_argument("--interactions")
        p.add_argument("--features")
        p.add_argument("--split-dir")
        p.add_argument("--threshold", type=float)

    def add_train_args(p):
        p.add_argument("--dim", type=int)
        p.add_argument("--mlp-hidden")
        p.add_argument("--feature-samples", "--d", dest="feature_samples", type=int)
        p.add_argument("--sigma-m", type=float)
        p.add_argument("--sigma-is-std", action="store_true", default=None)
        p.add_argument("--no-mlp-bias", action="store_true", default=None)
        p.add_argument("--no-final-activation", action="store_true", default=None)
        p.add_argument("--lr", type=float)
        p.add_argument("--l2", type=float)
        p.add_argument("--batch-size", type=int)
        p.add_argument("--epochs", type=int)
        p.add_argument("--exposure-dim", type=int)
        p.add_argument("--exposure-lr", type=float)
        p.add_argument("--exposure-l2", type=float)
        p.add_argument("--exposure-epochs", type=int)
        p.add_argument("--eta", type=float)
        p.add_argument("--weight-cap", type=float)
        p.add_argument("--raw-exposure-scores", action="store_true", default=None)

    p = sub.add_parser("train", help="train a recommender (exposure model first)")
    add_data_args(p)
    p.add_argument("--model", choices=MODELS)
    p.add_argument("--exposure", choices=("random", "uniform", "bias", "unbias"))
    p.add_argument("--n-samples", type=int)
    add_train_args(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    p.add_argument("--replay", help="rerun a train manifest verbatim")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained run on its test split")
    p.add_argument("--run", help="training output directory")
    p.add_argument("--data-dir")
    p.add_argument("--k", type=int)
    p.add_argument("--negatives", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--per-user", action="store_true", default=None)
    p.add_argument("--config")
    p.add_argument("--replay", help="rerun an eval manifest verbatim")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("grid", help="sweep sample counts and exposure variants")
    add_data_args(p)
    p.add_argument("--models", default="dccf")
    p.add_argument("--exposures", default="unbias")
    p.add_argument("--n-values", default="20")
    p.add_argument("--seeds", default="0")
    add_train_args(p)
    p.add_argument("--k", type=int)
    p.add_argument("--negatives", type=int)
    p.add_argument("--eval-seed", dest="seed", type=int)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_grid)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DataError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
