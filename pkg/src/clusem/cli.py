"""Command line entry point.

Subcommands:

    synth    write a synthetic dataset directory
    train    pretrain + centroid init + full training, writing a run dir
    eval     run inference and print/serialize the accuracy report
    predict  write per-sample predictions as CSV

Option precedence per command: built-in defaults < --config file
(key=value lines) < explicit flags.
"""

import argparse
import json
import os
import sys

from . import data, inference, metrics, model, report, train


def _read_config_file(path):
    out = {}
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"bad config line: {line!r}")
            key, val = line.split("=", 1)
            out[key.strip()] = val.strip()
    return out


def _resolve(args, defaults, casts):
    """defaults < config file < explicit flags (argparse None = unset)."""
    merged = dict(defaults)
    if getattr(args, "config", None):
        for k, v in _read_config_file(args.config).items():
            if k not in defaults:
                raise ValueError(f"unknown config key {k!r}")
            merged[k] = casts[k](v)
    for k in defaults:
        v = getattr(args, k, None)
        if v is not None:
            merged[k] = v
    return merged


def _parse_hidden(s):
    return tuple(int(x) for x in s.split(",") if x)


def _parse_bool(s):
    if str(s).lower() in ("1", "true", "on", "yes"):
        return True
    if str(s).lower() in ("0", "false", "off", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected on/off, got {s!r}")


TRAIN_DEFAULTS = dict(h=8, hidden=(32,), alpha=1.0, beta=1.0,
                      pretrain_lr=1e-3, train_lr=1e-4, weight_decay=1e-5,
                      pretrain_epochs=150, train_epochs=200, batch=64,
                      seed=0, drift=True, dropout=0.01)

TRAIN_CASTS = dict(h=int, hidden=_parse_hidden, alpha=float, beta=float,
                   pretrain_lr=float, train_lr=float, weight_decay=float,
                   pretrain_epochs=int, train_epochs=int, batch=int,
                   seed=int, drift=_parse_bool, dropout=float)


def _add_train_flags(p):
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--h", type=int, help="embedding width")
    p.add_argument("--hidden", type=_parse_hidden,
                   help="comma-separated hidden layer sizes")
    p.add_argument("--alpha", type=float, help="ranking loss weight")
    p.add_argument("--beta", type=float, help="structural alignment weight")
    p.add_argument("--pretrain-lr", dest="pretrain_lr", type=float)
    p.add_argument("--train-lr", dest="train_lr", type=float)
    p.add_argument("--weight-decay", dest="weight_decay", type=float)
    p.add_argument("--pretrain-epochs", dest="pretrain_epochs", type=int)
    p.add_argument("--epochs", dest="train_epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--drift", type=_parse_bool, help="on/off drift correction")
    p.add_argument("--dropout", type=float)


def _train_config(args):
    merged = _resolve(args, TRAIN_DEFAULTS, TRAIN_CASTS)
    return train.TrainConfig(
        h=merged["h"], hidden=merged["hidden"], alpha=merged["alpha"],
        beta=merged["beta"], pretrain_lr=merged["pretrain_lr"],
        train_lr=merged["train_lr"], weight_decay=merged["weight_decay"],
        pretrain_epochs=merged["pretrain_epochs"],
        train_epochs=merged["train_epochs"], batch_size=merged["batch"],
        seed=merged["seed"], drift_correction=merged["drift"],
        dropout=merged["dropout"]), merged


def cmd_synth(args):
    spec = data.SynthSpec(k_s=args.ks, k_t=args.kt, d=args.d,
                          feature_dim=args.feature_dim,
                          samples_per_class=args.n,
                          separation=args.sep, within_std=args.std,
                          seed=args.seed)
    ds = data.generate_synthetic(spec)
    data.save_dataset(ds, args.out)
    print(f"wrote dataset with k_s={ds.k_s} k_t={ds.k_t} d={ds.d} "
          f"to {args.out}")
    return 0


def cmd_train(args):
    tcfg, merged = _train_config(args)
    ds = data.load_dataset(args.data)
    params, state, mcfg, pre_trace, trace = train.train_run(ds, tcfg)
    os.makedirs(args.out, exist_ok=True)
    model.save_checkpoint(os.path.join(args.out, "checkpoint.npz"),
                          params, state, mcfg)
    train.write_trace(pre_trace, os.path.join(args.out, "pretrain_trace.csv"))
    train.write_trace(trace, os.path.join(args.out, "trace.csv"))
    merged["hidden"] = list(merged["hidden"])
    with open(os.path.join(args.out, "config.json"), "w") as f:
        json.dump(merged, f, indent=2)
    report.save_loss_curves(trace, os.path.join(args.out, "loss_curves.png"))
    print(f"run written to {args.out}")
    return 0


def _load_run(args):
    ds = data.load_dataset(args.data)
    params, state, mcfg = model.load_checkpoint(args.checkpoint)
    return ds, params, state, mcfg


def cmd_eval(args):
    ds, params, state, mcfg = _load_run(args)
    if ds.y_t is None or ds.a_full is None:
        print("error: evaluation needs target_labels.csv and "
              "attributes_full.csv", file=sys.stderr)
        return 1
    res = inference.run_inference(params, state, mcfg, ds.x_t,
                                  a_full=ds.a_full, seed=args.seed)
    rep = metrics.evaluate(ds, res)
    print(rep.format_table())
    if args.json:
        with open(args.json, "w") as f:
            f.write(rep.to_json())
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "report.json"), "w") as f:
            f.write(rep.to_json())
        report.save_metric_bars(rep, os.path.join(args.out, "metrics.png"))
        report.save_pmax_hist(res.pmax, res.tau,
                              os.path.join(args.out, "pmax_hist.png"),
                              seen_mask=res.seen_mask)
        inference.write_predictions(
            res, os.path.join(args.out, "predictions.csv"))
    return 0


def cmd_predict(args):
    ds, params, state, mcfg = _load_run(args)
    res = inference.run_inference(params, state, mcfg, ds.x_t,
                                  a_full=ds.a_full, seed=args.seed)
    inference.write_predictions(res, args.out)
    print(f"predictions written to {args.out}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="clusem")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic dataset")
    s.add_argument("--ks", type=int, default=3)
    s.add_argument("--kt", type=int, default=5)
    s.add_argument("--d", type=int, default=6)
    s.add_argument("--feature-dim", dest="feature_dim", type=int, default=16)
    s.add_argument("--n", type=int, default=100, help="samples per class")
    s.add_argument("--sep", type=float, default=10.0)
    s.add_argument("--std", type=float, default=1.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("-o", "--out", required=True)
    s.set_defaults(func=cmd_synth)

    t = sub.add_parser("train", help="train a model on a dataset directory")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    _add_train_flags(t)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    e.add_argument("--data", required=True)
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--json", help="write the report as JSON to this path")
    e.add_argument("--out", help="report directory (JSON, figures, CSV)")
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("predict", help="write per-sample predictions")
    r.add_argument("--data", required=True)
    r.add_argument("--checkpoint", required=True)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("-o", "--out", required=True)
    r.set_defaults(func=cmd_predict)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (data.DataError, inference.InferenceError, metrics.MetricError,
            ValueError, RuntimeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
