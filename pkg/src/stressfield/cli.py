"""Command-line interface: generate, train, eval, predict, render, inspect.

Exit codes: 0 on success, 1 on internal errors, 2 on usage or input errors.
The environment variable STRESSFIELD_THREADS caps worker thread parallelism.
"""

import argparse
import os
import sys

from .errors import ConfigurationError, ContractError, StressfieldError


def _positive_env_threads() -> int | None:
    raw = os.environ.get("STRESSFIELD_THREADS")
    if raw is None:
        return None
    try:
        value = int(raw)
    except ValueError as exc:
        raise ConfigurationError(f"STRESSFIELD_THREADS must be an integer, got {raw!r}") from exc
    if value < 1:
        raise ConfigurationError(f"STRESSFIELD_THREADS must be >= 1, got {value}")
    return value


def _apply_thread_cap() -> None:
    cap = _positive_env_threads()
    if cap is not None:
        import torch

        torch.set_num_threads(cap)


def _require_file(path: str) -> str:
    if not os.path.isfile(path):
        raise ConfigurationError(f"no such file: {path}")
    return path


def _parse_weights(raw: str):
    from .training import LossWeights

    if raw == "auto":
        return None
    parts = raw.split(",")
    if len(parts) != 3:
        raise ConfigurationError(
            f"--weights must be 'auto' or three comma-separated numbers, got {raw!r}"
        )
    try:
        values = [float(p) for p in parts]
    except ValueError as exc:
        raise ConfigurationError(f"--weights entries must be numeric, got {raw!r}") from exc
    return LossWeights(*values)


def _cmd_generate(args) -> int:
    from .dataset import generate_dataset

    manifest = generate_dataset(
        args.out, scale=args.scale, seed=args.seed, preset=args.preset
    )
    print(f"wrote {manifest['sample_count']} samples to {args.out}")
    return 0


def _cmd_train(args) -> int:
    import torch

    from .dataset import load_dataset
    from .models import ModelConfig, build_model, load_checkpoint
    from .report import loss_curves
    from .training import TrainConfig, train

    bundle = load_dataset(_require_file(args.data))
    weights = _parse_weights(args.weights)
    config = TrainConfig(
        learning_rate=args.lr,
        batch_size=args.batch_size,
        grad_accumulation=args.grad_accumulation,
        epochs=args.epochs,
        seed=args.seed,
        pde_grid_size=args.grid,
        out_dir=args.out,
    )
    if args.resume:
        model, _, _ = load_checkpoint(
            os.path.join(args.out, "last.ckpt")
        )
        result = train(
            model, bundle, None, config, weights=weights,
            resume_from=os.path.join(args.out, "resume.pt"),
        )
    else:
        model = build_model(ModelConfig(variant=args.variant, d=args.d), seed=args.seed)
        result = train(model, bundle, None, config, weights=weights)
    print(f"weights: {result.weights.w_data},{result.weights.w_pde},{result.weights.w_bc}")
    if result.history:
        print(f"best epoch {result.best_epoch} val total {result.best_val:.8e}")
        loss_curves(result.log_path, os.path.join(args.out, "loss_curves.png"))
    print(f"checkpoints in {args.out}")
    return 0


def _cmd_eval(args) -> int:
    from .dataset import load_dataset
    from .models import load_checkpoint
    from .training import evaluate

    bundle = load_dataset(_require_file(args.data))
    if args.oracle:
        predictor = "oracle"
    else:
        model, _, _ = load_checkpoint(_require_file(args.ckpt))
        predictor = model
    report = evaluate(predictor, bundle, args.split)
    baseline = evaluate("zero", bundle, args.split)
    text = report.to_text() + f"zero_baseline_mrpe_svm={baseline.mrpe['svm']!r}\n"
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(text)
    sys.stdout.write(text)
    return 0


def _cmd_predict(args) -> int:
    from .dataset import load_dataset
    from .models import load_checkpoint
    from .report import predicted_stress, write_stress_csv

    bundle = load_dataset(_require_file(args.data))
    if not 0 <= args.sample < len(bundle.samples):
        raise ConfigurationError(
            f"sample {args.sample} out of range [0, {len(bundle.samples)})"
        )
    model, _, _ = load_checkpoint(_require_file(args.ckpt))
    pred = predicted_stress(model, bundle.samples[args.sample], bundle.normalization)
    write_stress_csv(args.out, pred)
    print(f"wrote {args.out}")
    return 0


def _cmd_render(args) -> int:
    from .dataset import load_dataset
    from .models import load_checkpoint
    from .report import render_sample

    bundle = load_dataset(_require_file(args.data))
    model = None
    if args.ckpt is not None:
        model, _, _ = load_checkpoint(_require_file(args.ckpt))
    written = render_sample(
        bundle, args.sample, args.frame, model=model,
        out_dir=args.out_dir, grid_size=args.grid,
    )
    for path in written:
        print(path)
    return 0


def _cmd_inspect(args) -> int:
    from .dataset import read_manifest

    manifest = read_manifest(_require_file(args.data))
    for key, value in manifest.items():
        print(f"{key}={value}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stressfield",
        description="Synthetic dynamic-stress datasets and spatiotemporal surrogate models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="simulate a dataset container")
    p.add_argument("--out", required=True)
    p.add_argument("--scale", choices=("desk", "full"), default="desk")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--preset", choices=("baseline", "geometry", "load", "bc"), default="baseline")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("train", help="train a model on a dataset container")
    p.add_argument("--data", required=True)
    p.add_argument("--variant", default="Spatiotempo-LSTM")
    p.add_argument("--weights", default="auto", help="'auto' or w_data,w_pde,w_bc")
    p.add_argument("--epochs", type=int, default=60)
    p.add_argument("--out", required=True, help="output directory for checkpoints and log")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--d", type=int, default=64, help="hidden width")
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=10)
    p.add_argument(
        "--grad-accumulation", type=int, default=1,
        help="batches accumulated per optimizer step",
    )
    p.add_argument("--grid", type=int, default=64, help="physics-loss grid size")
    p.add_argument("--resume", action="store_true", help="continue from --out/resume.pt")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint over a split")
    p.add_argument("--data", required=True)
    p.add_argument("--ckpt")
    p.add_argument("--split", default="test")
    p.add_argument("--oracle", action="store_true", help="evaluate the perfect oracle instead")
    p.add_argument("--out", default="eval_report.txt")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("predict", help="export one sample's predicted stresses as CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--sample", type=int, required=True)
    p.add_argument("--out", default="prediction.csv")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("render", help="render stress maps and CSV exports for one sample")
    p.add_argument("--data", required=True)
    p.add_argument("--sample", type=int, required=True)
    p.add_argument("--frame", type=int, required=True)
    p.add_argument("--ckpt")
    p.add_argument("--out-dir", default="render_out")
    p.add_argument("--grid", type=int, default=None)
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("inspect", help="print a container's manifest fields as stored")
    p.add_argument("--data", required=True)
    p.set_defaults(func=_cmd_inspect)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_thread_cap()
        if args.command == "eval" and not args.oracle and args.ckpt is None:
            raise ConfigurationError("eval needs --ckpt unless --oracle is given")
        return args.func(args)
    except (ConfigurationError, ContractError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except StressfieldError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
