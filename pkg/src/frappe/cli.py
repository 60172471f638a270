"""Command-line front end: estimate, features, synth, train, bench, cpd.

Exit codes: 1 usage error, 2 I/O or parse error, 3 computation error.
FRAPPE_SEED overrides the default --seed of every subcommand.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__, bench, cpd, gbdt, pipeline, synth
from .features import extract_features, feature_names
from .synth import LabeledTensor, SynthRecipe
from .tensor import CooTensor
from .tensor_io import ParseError, parse_tensor, write_tensor

SCHEMA_VERSIONS = (
    f"model-schema {gbdt.MODEL_VERSION}, report-schema {bench.REPORT_VERSION}, "
    "manifest-schema 1, tensor-format 1"
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(1)


def _default_seed() -> int:
    return int(os.environ.get("FRAPPE_SEED", "0"))


def _int_range(text: str) -> tuple[int, int]:
    lo, _, hi = text.partition("..")
    lo = int(lo)
    hi = int(hi) if hi else lo
    return lo, hi


def _float_range(text: str) -> tuple[float, float]:
    lo, _, hi = text.partition("..")
    lo = float(lo)
    hi = float(hi) if hi else lo
    return lo, hi


def _write_or_print(text: str, path):
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _cmd_estimate(args) -> int:
    tensor = parse_tensor(args.input)
    opts = pipeline.EstimateOptions(max_rank=args.max_rank, n_samples=args.samples, seed=args.seed)
    est = pipeline.estimate_rank(tensor, opts, n_threads=args.threads)
    doc = pipeline.estimate_report(est, include_timings=not args.no_timing)
    text = json.dumps(doc, indent=2) + "\n"
    _write_or_print(text, args.json)
    if args.json:
        print(f"rank {est.rank} (raw {est.raw_prediction:.3f}) -> {args.json}")
    return 0


def _cmd_features(args) -> int:
    tensor = parse_tensor(args.input)
    fv = extract_features(tensor)
    lines = [",".join(fv.names), ",".join(f"{v:.17g}" for v in fv.values)]
    _write_or_print("\n".join(lines) + "\n", args.csv)
    return 0


def _cmd_synth(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset = synth.gen_dataset(
        counts={k: args.count_per_class for k in synth.CLASSES},
        dims=args.dims,
        rank_range=args.ranks,
        noise_range=args.noise,
        seed=args.seed,
        order=args.order,
    )
    manifest = []
    for i, lt in enumerate(dataset):
        name = f"{lt.recipe.klass}_{i:04d}.tns"
        write_tensor(lt.tensor, out_dir / name)
        manifest.append(
            {
                "path": name,
                "true_rank": lt.true_rank,
                "class": lt.recipe.klass,
                "alpha": lt.recipe.noise_alpha,
                "seed": lt.recipe.seed,
            }
        )
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
    print(f"wrote {len(manifest)} tensors + manifest.json to {out_dir}")
    return 0


def _load_labeled(manifest_path) -> list[LabeledTensor]:
    manifest_path = Path(manifest_path)
    entries = bench.load_manifest(manifest_path)
    out = []
    for e in entries:
        tensor = parse_tensor(manifest_path.parent / e["path"])
        recipe = SynthRecipe(
            klass=e["class"],
            shape=tensor.shape,
            rank=int(e["true_rank"]),
            noise_alpha=float(e["alpha"]),
            factor_density=1.0 if e["class"] == "dense" else 0.5,
            seed=int(e["seed"]),
        )
        out.append(LabeledTensor(tensor=tensor, true_rank=int(e["true_rank"]), recipe=recipe))
    return out


def _cmd_train(args) -> int:
    dataset = _load_labeled(args.manifest)
    model = pipeline.train_global(dataset, n_threads=args.threads)
    gbdt.save(model, args.model)
    print(f"trained on {len(dataset)} tensors -> {args.model}")
    return 0


def _cmd_bench(args) -> int:
    report = bench.run_bench(
        args.manifest,
        mode="model" if args.model else "frappe",
        model_path=args.model,
        n_samples=args.samples,
        seed=args.seed,
        n_threads=args.threads,
        max_rank_factor=args.max_rank_factor,
        include_timings=not args.no_timing,
    )
    with open(args.report, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    agg = report["aggregates"]
    rho = agg["spearman"]
    print(
        f"bench: n={len(report['records'])} MAPE={agg['mape']:.2f}% MAE={agg['mae']:.3f} "
        f"MSE={agg['mse']:.3f} spearman={rho if rho is None else f'{rho:.3f}'}"
    )
    return 0


def _cmd_cpd(args) -> int:
    tensor = parse_tensor(args.input)
    ranks = [int(r) for r in args.ranks.split(",") if r.strip()]
    opts = cpd.AlsOptions(max_iters=args.max_iters, n_restarts=args.restarts, seed=args.seed)
    curve = cpd.error_curve(tensor, ranks, opts)
    lines = ["rank,relative_error,iterations,converged"]
    for rank, res in curve:
        lines.append(f"{rank},{res.relative_error:.17g},{res.iterations},{str(res.converged).lower()}")
    _write_or_print("\n".join(lines) + "\n", args.csv)
    return 0


def _build_parser() -> _Parser:
    p = _Parser(prog="frappe", description="Tensor canonical-rank estimation without computing a CPD.")
    p.add_argument("--version", action="version", version=f"frappe {__version__} ({SCHEMA_VERSIONS})")
    sub = p.add_subparsers(dest="cmd", required=True)

    sp = sub.add_parser("estimate", help="self-supervised rank estimate for one tensor")
    sp.add_argument("--input", required=True)
    sp.add_argument("--max-rank", type=int, required=True)
    sp.add_argument("--samples", type=int, default=200)
    sp.add_argument("--seed", type=int, default=_default_seed())
    sp.add_argument("--threads", type=int, default=None)
    sp.add_argument("--json", default=None, help="write the report here instead of stdout")
    sp.add_argument("--no-timing", action="store_true")
    sp.set_defaults(func=_cmd_estimate)

    sp = sub.add_parser("features", help="dump the feature vector as CSV")
    sp.add_argument("--input", required=True)
    sp.add_argument("--csv", default=None)
    sp.set_defaults(func=_cmd_features)

    sp = sub.add_parser("synth", help="generate a labeled synthetic dataset")
    sp.add_argument("--out", required=True)
    sp.add_argument("--count-per-class", type=int, required=True)
    sp.add_argument("--dims", type=_int_range, required=True, metavar="LO..HI")
    sp.add_argument("--ranks", type=_int_range, required=True, metavar="LO..HI")
    sp.add_argument("--noise", type=_float_range, default=(0.02, 0.10), metavar="LO..HI")
    sp.add_argument("--seed", type=int, default=_default_seed())
    sp.add_argument("--order", type=int, choices=(3, 4), default=3)
    sp.set_defaults(func=_cmd_synth)

    sp = sub.add_parser("train", help="train a reusable global model from a manifest")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--model", required=True)
    sp.add_argument("--threads", type=int, default=None)
    sp.set_defaults(func=_cmd_train)

    sp = sub.add_parser("bench", help="benchmark an estimator over a manifest")
    sp.add_argument("--manifest", required=True)
    group = sp.add_mutually_exclusive_group(required=True)
    group.add_argument("--frappe", action="store_true", help="per-input self-supervised mode")
    group.add_argument("--model", default=None, help="use this pre-trained global model")
    sp.add_argument("--report", required=True)
    sp.add_argument("--samples", type=int, default=200)
    sp.add_argument("--seed", type=int, default=_default_seed())
    sp.add_argument("--threads", type=int, default=None)
    sp.add_argument("--max-rank-factor", type=float, default=2.0)
    sp.add_argument("--no-timing", action="store_true")
    sp.set_defaults(func=_cmd_bench)

    sp = sub.add_parser("cpd", help="CP-ALS reconstruction-error curve (validation tool)")
    sp.add_argument("--input", required=True)
    sp.add_argument("--ranks", required=True, help="comma-separated ascending ranks")
    sp.add_argument("--seed", type=int, default=_default_seed())
    sp.add_argument("--max-iters", type=int, default=200)
    sp.add_argument("--restarts", type=int, default=3)
    sp.add_argument("--csv", default=None)
    sp.set_defaults(func=_cmd_cpd)
    return p


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, OSError, json.JSONDecodeError) as exc:
        print(f"frappe: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # computation errors
        print(f"frappe: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
