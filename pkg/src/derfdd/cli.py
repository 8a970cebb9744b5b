"""Command-line entry point.

Subcommands share ``--config``, ``--seed`` and ``--out``; artifacts are
written to and read from the output directory:

    simulate     trace.csv
    gen-dataset  dataset_train.csv, dataset_test.csv
    train        lstm.ckpt / knn.ckpt / mlp.ckpt and training logs
    eval         confusion.csv, mae_report.csv
    run-ftc      ftc_trace.csv
    plot         SVG waveforms from a trace
"""
import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .config import load_config
from .dataset import (make_windows, read_dataset_csv, read_trace_csv, run_scenario,
                      split_train_val, write_dataset_csv, write_trace_csv, kfold)
from .errors import DerFddError, MissingArtifactError
from .faults import FaultClass, load_schedule, scenario_schedules
from .ftc import (FtcModels, episode_mae, fault_reference, read_ftc_csv, run_closed_loop,
                  write_ftc_csv)
from .ml import checkpoint
from .ml.knn import KnnModel
from .ml.metrics import accuracy, confusion_matrix
from .ml.training import train_lstm, train_mlp
from .plot import plot_correction, plot_trace
from .report import MaeReport, recall_table, write_confusion_csv

log = logging.getLogger("derfdd")

PRODUCERS = {
    "dataset_train.csv": "derfdd gen-dataset", "dataset_test.csv": "derfdd gen-dataset",
    "lstm.ckpt": "derfdd train --which lstm", "knn.ckpt": "derfdd train --which knn",
    "mlp.ckpt": "derfdd train --which mlp", "ftc_trace.csv": "derfdd run-ftc",
    "trace.csv": "derfdd simulate",
}


def _artifact(cfg, name):
    path = cfg.out_dir / name
    if not path.exists():
        producer = PRODUCERS.get(name, "the producing command")
        raise MissingArtifactError(f"missing {path}; run `{producer}` first")
    return path


def _duration(cfg):
    return None if cfg.scenario.duration < 0 else cfg.scenario.duration


def _simulate(cfg, schedule):
    sc = cfg.scenario
    return run_scenario(load_schedule(schedule), cfg.circuit, sc.sample_period, _duration(cfg),
                        gains=cfg.controller, switched=sc.switched, warmup=sc.warmup,
                        seed=cfg.seed, noise_std=sc.noise_std)


def cmd_simulate(cfg, schedule=None):
    trace = _simulate(cfg, schedule or cfg.scenario.train_schedule)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    path = cfg.out_dir / "trace.csv"
    write_trace_csv(trace, path)
    return f"simulate: wrote {len(trace)} rows to {path}"


def cmd_gen_dataset(cfg):
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    out = []
    for part, sched in (("train", cfg.scenario.train_schedule),
                        ("test", cfg.scenario.test_schedule)):
        trace = _simulate(cfg, sched)
        d = make_windows(trace, cfg.dataset.lookback, cfg.dataset.stride)
        path = cfg.out_dir / f"dataset_{part}.csv"
        write_dataset_csv(d, path)
        out.append(f"{part} {len(trace)} rows / {len(d)} windows")
    return "gen-dataset: " + ", ".join(out)


def _split(cfg):
    d = read_dataset_csv(_artifact(cfg, "dataset_train.csv"))
    return d, split_train_val(d, cfg.dataset.train_fraction, cfg.seed, cfg.dataset.chronological)


def _write_log(path, history):
    lines = ["epoch,train_loss,val_loss"] + [f"{e},{a:.17g},{b:.17g}" for e, a, b in history]
    Path(path).write_text("\n".join(lines) + "\n")


def knn_features(d, window, sel=None):
    return d.target_windows(window, sel)


def cmd_train(cfg, which="all"):
    _, (train, val) = _split(cfg)
    parts = ["lstm", "knn", "mlp"] if which == "all" else [which]
    msgs = []
    for w in parts:
        if w == "lstm":
            st = cfg.lstm_model.train_stride
            tr, va = train.subset(np.arange(0, len(train), st)), val.subset(np.arange(0, len(val), st))
            model, hist = train_lstm(tr, va, cfg.train_config("lstm"), cfg.lstm_model.hidden)
            _write_log(cfg.out_dir / "lstm_log.csv", hist)
            checkpoint.save(model, cfg.out_dir / "lstm.ckpt")
            msgs.append(f"lstm val_mse={min(h[2] for h in hist):.3e} epochs={len(hist)}")
        elif w == "knn":
            k = cfg.knn
            model = KnnModel.fit(knn_features(train, k.window), train.labels, k.k, k.window,
                                 k.max_exemplars, cfg.seed)
            checkpoint.save(model, cfg.out_dir / "knn.ckpt")
            msgs.append(f"knn exemplars={len(model.labels)}")
        elif w == "mlp":
            normal = int(FaultClass.NORMAL)
            st = cfg.mlp_model.train_stride
            tr = train.subset(np.flatnonzero(train.labels == normal)[::st])
            va = val.subset(np.flatnonzero(val.labels == normal)[::st])
            sizes = (6,) + tuple(cfg.mlp_model.hidden) + (3,)
            model, hist = train_mlp(tr, va, cfg.train_config("mlp"), sizes)
            _write_log(cfg.out_dir / "mlp_log.csv", hist)
            checkpoint.save(model, cfg.out_dir / "mlp.ckpt")
            msgs.append(f"mlp val_mse={min(h[2] for h in hist):.3e} epochs={len(hist)}")
        else:
            raise DerFddError(f"unknown model {w!r}")
    return "train: " + "; ".join(msgs)


def load_models(cfg):
    return FtcModels(*(checkpoint.load(_artifact(cfg, f"{n}.ckpt"))
                       for n in ("lstm", "knn", "mlp")))


def _closed_loop(cfg, sched, models):
    return run_closed_loop(sched, cfg.circuit, models, cfg.seed, cfg.scenario.sample_period,
                           gains=cfg.controller, drive=cfg.ftc.drive, confirm=cfg.ftc.confirm,
                           warmup=cfg.scenario.warmup, ftc_warmup=cfg.ftc.ftc_warmup,
                           duration=_duration(cfg))


def mae_report(cfg, models):
    rep = MaeReport()
    for name, sched in scenario_schedules().items():
        tr = _closed_loop(cfg, sched, models)
        ref = fault_reference(sched, cfg.circuit, cfg.scenario.sample_period,
                              gains=cfg.controller, duration=_duration(cfg),
                              warmup=cfg.scenario.warmup)
        rep.add(name, episode_mae(tr.v_star, ref.v_star, sched, tr.t),
                episode_mae(tr.v_conv, ref.v_star, sched, tr.t))
    return rep


def cmd_eval(cfg, with_kfold=False, with_mae=True):
    d, (_, val) = _split(cfg)
    knn = checkpoint.load(_artifact(cfg, "knn.ckpt"))
    pred, _ = knn.classify_batch(knn_features(val, knn.window))
    cm = confusion_matrix(pred, val.labels)
    write_confusion_csv(cm, cfg.out_dir / "confusion.csv")
    acc = accuracy(cm)
    worst = min((v, k) for k, v in recall_table(cm).items() if v == v)
    msg = f"eval: accuracy={acc:.4f} min_recall={worst[0]:.3f} ({worst[1]})"
    if with_kfold:
        feats = knn_features(d, knn.window)
        accs = []
        for tr_idx, va_idx in kfold(d, cfg.dataset.kfold, cfg.seed):
            m = KnnModel.fit(feats[tr_idx], d.labels[tr_idx], knn.k, knn.window,
                             cfg.knn.max_exemplars, cfg.seed)
            p, _ = m.classify_batch(feats[va_idx])
            accs.append(accuracy(confusion_matrix(p, d.labels[va_idx])))
        lines = ["fold,accuracy"] + [f"{i},{a:.6f}" for i, a in enumerate(accs)]
        (cfg.out_dir / "kfold.csv").write_text("\n".join(lines) + "\n")
        msg += f" kfold_mean={np.mean(accs):.4f}"
    if with_mae:
        rep = mae_report(cfg, load_models(cfg))
        rep.to_csv(cfg.out_dir / "mae_report.csv")
        avgs = " ".join(f"{sc}={rep.average(sc):.4f}" for sc in rep.scenarios)
        msg += f" mean_mae {avgs}"
    return msg


def cmd_run_ftc(cfg, schedule=None):
    sched = load_schedule(schedule or cfg.scenario.test_schedule)
    tr = _closed_loop(cfg, sched, load_models(cfg))
    path = write_ftc_csv(tr, cfg.out_dir / "ftc_trace.csv")
    ref = fault_reference(sched, cfg.circuit, cfg.scenario.sample_period, gains=cfg.controller,
                          duration=_duration(cfg), warmup=cfg.scenario.warmup)
    maes = [v for _, v in episode_mae(tr.v_star, ref.v_star, sched, tr.t)]
    mean = float(np.nanmean(maes)) if maes else float("nan")
    return f"run-ftc: wrote {len(tr)} rows to {path}; mean episode MAE={mean:.4f}"


def cmd_plot(cfg, trace_path=None, start=0, count=4000):
    path = Path(trace_path) if trace_path else _artifact(cfg, "ftc_trace.csv")
    if not path.exists():
        raise MissingArtifactError(f"missing {path}; run `derfdd run-ftc` or `derfdd simulate`")
    with open(path) as fh:
        first = fh.readline()
    plot_dir = cfg.out_dir / "plots"
    if first.startswith("t,v_g_a,v_g_b,v_g_c,i_inv_a,i_inv_b,i_inv_c,v_star_a,v_star_b,v_star_c,pred"):
        paths = plot_correction(read_ftc_csv(path), plot_dir, start, count, path.stem)
    else:
        paths = plot_trace(read_trace_csv(path)[0], plot_dir, start, count, path.stem)
    return f"plot: wrote {len(paths)} SVG files to {plot_dir}"


def build_parser():
    ap = argparse.ArgumentParser(prog="derfdd", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--seed", type=int, help="override [run] seed")
    common.add_argument("--out", help="override [run] out directory")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("simulate", parents=[common], help="simulate a schedule")
    p.add_argument("--schedule", help="built-in name or schedule file")
    sub.add_parser("gen-dataset", parents=[common], help="simulate and window both schedules")
    p = sub.add_parser("train", parents=[common], help="train models")
    p.add_argument("--which", choices=["lstm", "knn", "mlp", "all"], default="all")
    p = sub.add_parser("eval", parents=[common], help="confusion matrix and MAE report")
    p.add_argument("--kfold", action="store_true", help="also run k-fold cross validation")
    p.add_argument("--no-mae", action="store_true", help="skip the closed-loop MAE report")
    p = sub.add_parser("run-ftc", parents=[common], help="closed loop over a schedule")
    p.add_argument("--schedule", help="built-in name or schedule file")
    p = sub.add_parser("plot", parents=[common], help="SVG waveforms from a trace")
    p.add_argument("--trace", help="trace CSV (default: OUT/ftc_trace.csv)")
    p.add_argument("--start", type=int, default=0)
    p.add_argument("--count", type=int, default=4000)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config).with_overrides(args.seed, args.out)
        if args.command == "simulate":
            msg = cmd_simulate(cfg, args.schedule)
        elif args.command == "gen-dataset":
            msg = cmd_gen_dataset(cfg)
        elif args.command == "train":
            msg = cmd_train(cfg, args.which)
        elif args.command == "eval":
            msg = cmd_eval(cfg, args.kfold, not args.no_mae)
        elif args.command == "run-ftc":
            msg = cmd_run_ftc(cfg, args.schedule)
        else:
            msg = cmd_plot(cfg, args.trace, args.start, args.count)
    except (DerFddError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(msg)
    return 0


if __name__ == "__main__":
    sys.exit(main())
