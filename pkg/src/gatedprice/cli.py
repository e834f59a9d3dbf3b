"""Command-line entry point.

Every option can also come from a ``key=value`` config file given with
``--config`` or named by ``GATED_PRICE_CONFIG``; keys are option names
(``noise-fraction`` or ``noise_fraction``).  Flags on the command line win.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import data, evaluate, service, synth, trainer
from .types import GatedPriceError, ObjectiveConfig

CONFIG_ENV = "GATED_PRICE_CONFIG"

# options without a command-line default; hard defaults live here so a
# config file can tell "unset" apart from "set to the default"
DEFAULTS = {
    "mode": "percentile",
    "delta": None,
    "beta": 1.0,
    "gamma": 1.0,
    "epsilon": None,
    "seed": 0,
    "n": 20000,
    "d_v": 32,
    "noise_fraction": 0.3,
    "noise_sigma": 0.1,
    "n_sellers": 200,
    "name": "synth",
    "trim": 0.05,
    "ratios": "0.8,0.1,0.1",
    "preset": "desk",
    "batch_size": None,
    "values": "0.3,0.4,0.5,0.6,0.7",
    "format": "csv",
    "bind": "127.0.0.1:8080",
}


class UsageError(Exception):
    pass


def _objective_flags(p):
    p.add_argument("--mode", choices=["percentile", "threshold"])
    p.add_argument("--delta", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--epsilon", type=float)


def _common(p):
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    p.add_argument("--out")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gatedprice", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    parser.commands = sub.choices

    p = sub.add_parser("synth", help="write a synthetic transactions CSV and truth sidecar")
    _common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--d-v", type=int)
    p.add_argument("--noise-fraction", type=float)
    p.add_argument("--noise-sigma", type=float)
    p.add_argument("--n-sellers", type=int)
    p.add_argument("--name")

    p = sub.add_parser("stats", help="build the historical price statistics index")
    _common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--trim", type=float)

    for name, helptext in (("train", "train gate and regressor"),
                           ("sweep", "train once per constraint value and tabulate")):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        _objective_flags(p)
        p.add_argument("--data", required=True)
        p.add_argument("--trim", type=float)
        p.add_argument("--ratios")
        p.add_argument("--preset", choices=["desk", "full"])
        p.add_argument("--batch-size", type=int)
        p.add_argument("--no-warmup", action="store_true")
        if name == "train":
            p.add_argument("--log")
        else:
            p.add_argument("--values")
            p.add_argument("--format", choices=["csv", "table"])

    p = sub.add_parser("eval", help="gate report for a checkpoint on a transactions CSV")
    _common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--truth")
    p.add_argument("--format", choices=["csv", "table"])

    p = sub.add_parser("predict", help="price suggestion for one request")
    _common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--request", help="JSON request file, or - for stdin")
    p.add_argument("--features", help="comma-separated visual features")
    p.add_argument("--category", type=int)
    p.add_argument("--seller")
    p.add_argument("--format", choices=["json", "text"], default="json")

    p = sub.add_parser("serve", help="HTTP price-suggestion service")
    _common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--bind")
    return parser


def read_config(path) -> dict:
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        k, _, v = line.partition("=")
        out[k.strip().replace("-", "_")] = v.strip()
    return out


def merge_config(args, parser):
    path = args.config or os.environ.get(CONFIG_ENV)
    actions = {a.dest: a for a in parser.commands[args.command]._actions}
    known = set(actions) - {"help", "config"}
    if path:
        for key, raw in read_config(path).items():
            if key not in known:
                raise UsageError(f"unknown config key {key!r} for {args.command}")
            current = getattr(args, key)
            if current is not None and current is not False:
                continue
            if isinstance(current, bool):
                setattr(args, key, raw.lower() in ("1", "true", "yes"))
                continue
            try:
                setattr(args, key, (actions[key].type or str)(raw))
            except ValueError as exc:
                raise UsageError(f"config key {key!r}: {exc}") from exc
    for key, value in DEFAULTS.items():
        if key in known and getattr(args, key) is None:
            setattr(args, key, value)
    return args


def objective_from_args(args) -> ObjectiveConfig:
    if args.mode == "threshold":
        if args.epsilon is None:
            raise UsageError("--epsilon is required in threshold mode")
        delta = 0.1 if args.delta is None else args.delta
        return ObjectiveConfig.threshold(args.epsilon, delta=delta, beta=args.beta, gamma=args.gamma)
    delta = 0.5 if args.delta is None else args.delta
    return ObjectiveConfig.percentile(delta, beta=args.beta)


def train_config_from_args(args) -> trainer.TrainConfig:
    obj = objective_from_args(args)
    if args.preset == "full":
        cfg = trainer.TrainConfig.full(obj, seed=args.seed)
    else:
        cfg = trainer.TrainConfig(objective=obj, seed=args.seed)
    if args.batch_size is not None:
        cfg = trainer.TrainConfig(cfg.objective, args.batch_size, cfg.schedule, cfg.seed, cfg.standardize,
                                  cfg.hidden_dims)
    if args.no_warmup:
        cfg = cfg.without_warmup()
    return cfg


def _parse_floats(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def prepare_splits(args):
    """Trim, split rows, fit statistics on the training rows, assemble all three parts."""
    table = data.trim_outliers(data.read_transactions(args.data), args.trim)
    parts = data.split(list(range(len(table))), _parse_floats(args.ratios), args.seed)
    tr, va, te = (table.take(p) for p in parts)
    idx = data.build_stat_index(tr)
    return idx, data.assemble(tr, idx), data.assemble(va, idx), te, data.assemble(te, idx)


def cmd_synth(args):
    cfg = synth.SynthConfig(n=args.n, d_v=args.d_v, noise_fraction=args.noise_fraction,
                            noise_sigma=args.noise_sigma, n_sellers=args.n_sellers, seed=args.seed)
    corpus = synth.generate(cfg)
    csv_path, truth_path = corpus.write(args.out or ".", args.name)
    print(f"wrote {csv_path} and {truth_path}")


def cmd_stats(args):
    table = data.trim_outliers(data.read_transactions(args.data), args.trim)
    idx = data.build_stat_index(table)
    text = idx.to_text()
    if args.out:
        Path(args.out).write_bytes(text.encode("utf-8"))
        y = table.log_prices()
        print(f"{len(table)} rows; skewness raw {data.skewness(np.exp(y)):.4f}, log {data.skewness(y):.4f}")
    else:
        sys.stdout.write(text)


def cmd_train(args):
    cfg = train_config_from_args(args)
    idx, tr, va, te_table, _ = prepare_splits(args)
    res = trainer.train(tr, cfg, va, idx)
    out = Path(args.out or "model.gprc")
    trainer.save_checkpoint(res.checkpoint, out)
    log_path = Path(args.log or f"{out}.log.csv")
    log_path.write_text(trainer.format_epoch_log(res.log), encoding="utf-8")
    data.write_transactions(te_table, f"{out}.test.csv")
    f = res.final
    print(f"checkpoint {out} ({res.checkpoint.model_version}); epoch log {log_path}; "
          f"val positive fraction {f.val_positive_fraction:.4f}")


def _emit(text, out):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_eval(args):
    ckpt = trainer.load_checkpoint(args.checkpoint)
    if ckpt.stat_index is None:
        raise GatedPriceError("checkpoint carries no statistics index")
    examples = data.assemble(data.read_transactions(args.data), ckpt.stat_index)
    rep = evaluate.gate_report(ckpt, examples)
    obj = ckpt.config.objective
    constraint = obj.delta if obj.mode == "percentile" else obj.epsilon
    row = evaluate.SweepRow(constraint, rep.n_positive, rep.positive_fraction, rep.male, rep.rmsle)
    text = (evaluate.format_rows_table([row], obj.mode) if args.format == "table"
            else evaluate.format_rows_csv([row]))
    if args.truth:
        auc = evaluate.gate_auc(ckpt, examples, synth.read_truth(args.truth))
        text += f"gate_auc={auc!r}\n"
    _emit(text, args.out)


def cmd_sweep(args):
    cfg = train_config_from_args(args)
    idx, tr, va, _, te = prepare_splits(args)
    rows = evaluate.sweep(tr, cfg, _parse_floats(args.values), evaluation=te, validation=va, stat_index=idx)
    label = "percentile" if cfg.objective.mode == "percentile" else "epsilon"
    _emit(evaluate.format_rows_table(rows, label) if args.format == "table" else evaluate.format_rows_csv(rows),
          args.out)


def cmd_predict(args):
    ckpt = trainer.load_checkpoint(args.checkpoint)
    if args.request:
        raw = sys.stdin.read() if args.request == "-" else Path(args.request).read_text(encoding="utf-8")
        try:
            payload = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise service.BadRequest(f"malformed request: {exc}") from exc
    else:
        if args.features is None or args.category is None or args.seller is None:
            raise UsageError("give --request or all of --features, --category and --seller")
        payload = {"visual_features": _parse_floats(args.features), "category_id": args.category,
                   "seller_id": args.seller}
    body = service.response_body(ckpt, payload)
    if args.format == "text":
        resp = json.loads(body)
        if resp["qualified"]:
            line = f"qualified (score {resp['score']:.4f}); suggested price {resp['suggested_price']:.2f}"
        else:
            line = f"not qualified (score {resp['score']:.4f}); no price suggested"
        _emit(line + "\n", args.out)
    else:
        _emit(body + "\n", args.out)


def cmd_serve(args):
    ckpt = trainer.load_checkpoint(args.checkpoint)
    service.serve(ckpt, args.bind)


COMMANDS = {
    "synth": cmd_synth,
    "stats": cmd_stats,
    "train": cmd_train,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "predict": cmd_predict,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(message)s")
    try:
        args = merge_config(args, parser)
        if args.command in ("train", "sweep"):
            objective_from_args(args)
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"gatedprice {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (GatedPriceError, OSError, ValueError) as exc:
        print(f"gatedprice {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
