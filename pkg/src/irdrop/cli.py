"""Command-line entry point: gen / oracle / train / eval / predict / serve.

Every subcommand exits 0 on success and 1 on a runtime error, printing a
single machine-parsable `error: <type>: <message>` line to stderr; argparse
reports usage problems with exit code 2. Wherever randomness exists, a
--seed flag pins it.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__, datagen
from .analysis import DEFAULT_HOTSPOT_THRESHOLD, evaluate
from .datagen import GenConfig, generate_dataset, load_dataset
from .npyio import save_npy
from .physics import PdeProblem, SolverConfig, compare_labels, solve_pde
from .pipeline import run_prediction
from .training import TrainConfig, TrainingError, train
from .unet import load_checkpoint, save_checkpoint

DEFAULT_BIND = "127.0.0.1:8000"
BIND_ENV_VAR = "IRDROP_BIND"


def dataset_tensors(data_dir, with_labels: bool = True):
    """Dataset as model tensors: per-sample normalized (N, 3, H, W) inputs
    plus (N, H, W) labels (None when labels are absent or not requested)."""
    arrays = load_dataset(data_dir, with_labels=with_labels)

    def norm(stack):
        lo = stack.min(axis=(1, 2), keepdims=True)
        hi = stack.max(axis=(1, 2), keepdims=True)
        span = hi - lo
        out = np.zeros_like(stack)
        np.divide(stack - lo, span, out=out, where=span > 0)
        return out

    x = np.stack(
        [
            norm(arrays[datagen.POWER_GRID_FILE]),
            norm(arrays[datagen.CELL_DENSITY_FILE]),
            norm(arrays[datagen.SWITCHING_FILE]),
        ],
        axis=1,
    )
    y = arrays[datagen.LABELS_FILE] if with_labels else None
    return x, y


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen(args) -> int:
    cfg = GenConfig(
        seed=args.seed,
        n_samples=args.n_samples,
        height=args.height,
        width=args.width,
        eps=args.eps,
        label_sigma=args.label_sigma,
        blob_count_range=tuple(args.blob_count_range),
        blob_sigma_range=tuple(args.blob_sigma_range),
        stripe_period_range=tuple(args.stripe_period_range),
        grid_floor=args.grid_floor,
    )
    written = generate_dataset(cfg, args.out)
    for name, path in written.items():
        print(f"wrote {path}")
    print(f"generated {cfg.n_samples} samples in {args.out}")
    return 0


def cmd_oracle(args) -> int:
    arrays = load_dataset(args.data, with_labels=False)
    power = arrays[datagen.POWER_GRID_FILE]
    density = arrays[datagen.CELL_DENSITY_FILE]
    switching = arrays[datagen.SWITCHING_FILE]
    n = power.shape[0] if args.limit is None else min(args.limit, power.shape[0])

    labels_path = os.path.join(args.data, datagen.LABELS_FILE)
    synthetic = None
    if os.path.exists(labels_path):
        synthetic = load_dataset(args.data)[datagen.LABELS_FILE]

    solver_cfg = SolverConfig(tol=args.tol, max_iter=args.max_iter)
    pde_labels = np.empty((n,) + power.shape[1:])
    pearsons, spearmans, degenerate = [], [], 0
    for i in range(n):
        problem = PdeProblem(
            sigma=power[i], current=density[i] * switching[i], vdd=args.vdd
        )
        result = solve_pde(problem, solver_cfg)
        pde_labels[i] = result.ir_drop
        if synthetic is not None:
            rep = compare_labels(synthetic[i], result.ir_drop)
            if rep.degenerate:
                degenerate += 1
            else:
                pearsons.append(rep.pearson)
                spearmans.append(rep.spearman)

    save_npy(args.out, pde_labels, dtype="f4")
    summary = {
        "samples": n,
        "output": args.out,
        "mean_pearson": float(np.mean(pearsons)) if pearsons else None,
        "mean_spearman": float(np.mean(spearmans)) if spearmans else None,
        "degenerate": degenerate,
        "compared": len(pearsons),
    }
    if args.json:
        print(json.dumps(summary))
    else:
        print(f"solved {n} problems -> {args.out}")
        if synthetic is not None and pearsons:
            print(
                f"correlation vs synthetic labels: "
                f"mean_pearson={summary['mean_pearson']:.4f} "
                f"mean_spearman={summary['mean_spearman']:.4f} "
                f"compared={summary['compared']} degenerate={degenerate}"
            )
    return 0


def cmd_train(args) -> int:
    cfg = TrainConfig(
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        max_epochs=args.max_epochs,
        patience=args.patience,
        val_fraction=args.val_fraction,
        seed=args.seed,
    )
    x, y = dataset_tensors(args.data)

    def log(report):
        print(
            f"epoch {report.epoch:3d}  train_mse={report.train_loss:.6e}  "
            f"val_mse={report.val_loss:.6e}  {report.seconds:.1f}s",
            flush=True,
        )

    try:
        result = train(x, y, cfg, log=log)
    except TrainingError as exc:
        if exc.best_params is not None:
            save_checkpoint(exc.best_params, args.out, metadata={"aborted": str(exc)})
            _write_history(args.out, exc.history)
            print(f"aborted; best checkpoint preserved in {args.out}", file=sys.stderr)
        raise

    metadata = {
        "best_epoch": result.best_epoch,
        "best_val_loss": result.best_val_loss,
        "epochs_run": len(result.history),
        "stopped_early": result.stopped_early,
        "seed": cfg.seed,
        "tool_version": __version__,
    }
    save_checkpoint(result.params, args.out, metadata=metadata)
    _write_history(args.out, result.history)
    print(
        f"best val_mse={result.best_val_loss:.6e} at epoch {result.best_epoch}; "
        f"checkpoint in {args.out}"
    )
    return 0


def _write_history(out_dir, history) -> None:
    path = os.path.join(out_dir, "history.csv")
    with open(path, "w") as fh:
        fh.write("epoch,train_loss,val_loss,seconds\n")
        for r in history:
            fh.write(f"{r.epoch},{r.train_loss!r},{r.val_loss!r},{r.seconds!r}\n")


def cmd_eval(args) -> int:
    params = load_checkpoint(args.checkpoint)
    x, y = dataset_tensors(args.data)
    report = evaluate(params, x, y, batch_size=args.batch_size)
    if args.json:
        print(json.dumps(report.to_dict()))
    else:
        print(
            f"mse={report.mse:.6e} psnr_db={report.psnr_db:.2f} "
            f"n_samples={report.n_samples}"
        )
    return 0


def cmd_predict(args) -> int:
    params = load_checkpoint(args.checkpoint)
    arrays = load_dataset(args.inputs, with_labels=False)
    n = arrays[datagen.POWER_GRID_FILE].shape[0]
    if not 0 <= args.index < n:
        raise IndexError(f"sample index {args.index} out of range [0, {n})")
    result = run_prediction(
        params,
        arrays[datagen.POWER_GRID_FILE][args.index],
        arrays[datagen.CELL_DENSITY_FILE][args.index],
        arrays[datagen.SWITCHING_FILE][args.index],
        threshold=args.threshold,
        count_pixels=args.count_pixels,
    )
    if args.out:
        save_npy(args.out, result.ir_drop, dtype="f4")
    if args.json:
        print(json.dumps(result.to_dict()))
    else:
        r = result.report
        print(
            f"max_ir_drop={r.max_ir_drop:.4f} mean_ir_drop={r.mean_ir_drop:.4f} "
            f"hotspot_count={r.hotspot_count} risk_level={r.risk_level.value} "
            f"threshold={r.threshold_used} inference_ms={result.inference_ms:.2f}"
        )
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    params = load_checkpoint(args.checkpoint)
    version = os.path.basename(os.path.normpath(args.checkpoint))
    app = create_app(
        params,
        model_version=version,
        default_threshold=args.threshold,
        static_dir=args.static,
    )
    bind = os.environ.get(BIND_ENV_VAR) or args.bind
    host, _, port = bind.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"bind address must look like host:port, got {bind!r}")
    uvicorn.run(app, host=host, port=int(port), log_level="info")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _range_pair(kind):
    def convert(text):
        return kind(text)

    return convert


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="irdrop",
        description="IR-drop surrogate pipeline: dataset generation, physics "
        "oracle, training, evaluation, prediction, and serving.",
    )
    parser.add_argument("--version", action="version", version=f"irdrop {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic dataset")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--n-samples", type=int, default=1000)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--height", type=int, default=64)
    g.add_argument("--width", type=int, default=64)
    g.add_argument("--eps", type=float, default=1e-6)
    g.add_argument("--label-sigma", type=float, default=2.0)
    g.add_argument("--blob-count-range", nargs=2, type=int, default=[3, 8],
                   metavar=("LO", "HI"))
    g.add_argument("--blob-sigma-range", nargs=2, type=float, default=[3.0, 10.0],
                   metavar=("LO", "HI"))
    g.add_argument("--stripe-period-range", nargs=2, type=int, default=[4, 12],
                   metavar=("LO", "HI"))
    g.add_argument("--grid-floor", type=float, default=0.05)
    g.set_defaults(func=cmd_gen)

    o = sub.add_parser("oracle", help="solve the reference PDE for a dataset")
    o.add_argument("--data", required=True, help="dataset directory")
    o.add_argument("--out", required=True, help="output .npy for PDE drop maps")
    o.add_argument("--vdd", type=float, default=1.0)
    o.add_argument("--tol", type=float, default=1e-8)
    o.add_argument("--max-iter", type=int, default=20000)
    o.add_argument("--limit", type=int, default=None, help="solve first N samples only")
    o.add_argument("--json", action="store_true")
    o.set_defaults(func=cmd_oracle)

    t = sub.add_parser("train", help="train the regressor on a dataset")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True, help="checkpoint output directory")
    t.add_argument("--learning-rate", type=float, default=1e-3)
    t.add_argument("--batch-size", type=int, default=8)
    t.add_argument("--max-epochs", type=int, default=100)
    t.add_argument("--patience", type=int, default=10)
    t.add_argument("--val-fraction", type=float, default=0.1)
    t.add_argument("--seed", type=int, default=0)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--batch-size", type=int, default=32)
    e.add_argument("--json", action="store_true")
    e.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="predict one sample and print a risk report")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--inputs", required=True, help="directory with the input .npy files")
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--threshold", type=float, default=DEFAULT_HOTSPOT_THRESHOLD)
    p.add_argument("--count-pixels", action="store_true",
                   help="count hotspot pixels instead of connected regions")
    p.add_argument("--out", default=None, help="also save the predicted map as .npy")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_predict)

    s = sub.add_parser("serve", help="serve predictions over HTTP")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--bind", default=DEFAULT_BIND,
                   help=f"host:port (env {BIND_ENV_VAR} overrides)")
    s.add_argument("--threshold", type=float, default=DEFAULT_HOTSPOT_THRESHOLD)
    s.add_argument("--static", default=None,
                   help="directory of web UI assets to serve under /ui")
    s.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
