"""Command line interface.

Verbs: generate, equalize, describe, train, adapt-train, recognize,
benchmark, report. A --seed flag governs every stochastic step; --config
points at a YAML pipeline config (falling back to the CROSSMODAL_CONFIG
environment variable, then to built-in defaults).
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from pathlib import Path

from . import cloudio, pipeline, report
from .cloud import EqualizationParams, equalize

CONFIG_ENV_VAR = "CROSSMODAL_CONFIG"

logger = logging.getLogger("crossmodal")


def _resolve_config(args) -> pipeline.PipelineConfig:
    path = getattr(args, "config", None) or os.environ.get(CONFIG_ENV_VAR)
    config = pipeline.load_config(path) if path else pipeline.PipelineConfig()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
        overrides["descriptor"] = dataclasses.replace(config.descriptor, esf_seed=args.seed)
    if getattr(args, "descriptor", None):
        overrides["descriptor"] = dataclasses.replace(
            overrides.get("descriptor", config.descriptor), kind=args.descriptor
        )
    if getattr(args, "adaptation", None):
        overrides["adaptation"] = args.adaptation
    if getattr(args, "no_preprocess", False):
        overrides["preprocessing"] = False
    return dataclasses.replace(config, **overrides) if overrides else config


def _equalization_from(args) -> EqualizationParams:
    return EqualizationParams(
        upsample_step=args.upsample_step,
        search_radius=args.search_radius,
        poly_degree=args.poly_degree,
        voxel_edge=args.voxel_edge,
    )


def cmd_generate(args) -> int:
    manifest = pipeline.generate_dataset(
        args.out,
        class_ids=None,
        visual_per_class=args.visual,
        tactile_per_class=args.tactile,
        seed=args.seed if args.seed is not None else 123,
        density=args.density,
        visual_noise=args.noise,
        grid_pitch=args.grid_pitch,
    )
    n_v = sum(len(c.visual) for c in manifest.classes)
    n_t = sum(len(c.tactile) for c in manifest.classes)
    print(f"wrote {n_v} visual and {n_t} tactile clouds for "
          f"{len(manifest.classes)} classes under {args.out}")
    return 0


def cmd_equalize(args) -> int:
    cloud = cloudio.read_cloud(args.cloud)
    result = equalize(cloud, _equalization_from(args))
    cloudio.write_cloud(args.out, result)
    print(f"{len(cloud)} -> {len(result)} points ({args.out})")
    return 0


def cmd_describe(args) -> int:
    config = _resolve_config(args)
    cloud = cloudio.read_cloud(args.cloud)
    if config.preprocessing and not args.raw:
        cloud = equalize(cloud, config.equalization)
    values = pipeline.descriptor_vector(cloud, config.descriptor)
    lines = [f"#kind: {config.descriptor.kind}"] + [f"{v:.9g}" for v in values]
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n")
    else:
        print("\n".join(lines))
    return 0


def cmd_train(args) -> int:
    config = _resolve_config(args)
    manifest = cloudio.load_manifest(args.manifest)
    model = pipeline.cmr_train_files(manifest, config)
    cloudio.save_model(args.out, model)
    print(f"trained {model.algorithm} model on "
          f"{sum(len(c.visual) for c in manifest.classes)} visual clouds -> {args.out}")
    return 0


def cmd_adapt_train(args) -> int:
    config = _resolve_config(args)
    if config.adaptation == "none":
        config = dataclasses.replace(config, adaptation="gfk")
    manifest = cloudio.load_manifest(args.manifest)
    model = pipeline.tlcmr_train_files(manifest, config)
    cloudio.save_model(args.out, model)
    print(f"trained {model.algorithm} model with {config.adaptation} adaptation -> {args.out}")
    return 0


def cmd_recognize(args) -> int:
    model = cloudio.load_model(args.model)
    cloud = cloudio.read_cloud(args.cloud)
    label = pipeline.recognize(model, cloud)
    print(label)
    return 0


def cmd_benchmark(args) -> int:
    manifest = cloudio.load_manifest(args.manifest)
    seed = args.seed if args.seed is not None else 0
    grid = None
    if args.quick:
        grid = [
            job
            for job in pipeline.default_benchmark_grid(seed=seed, esf_samples=args.esf_samples)
            if job.config.descriptor.kind == "clue"
        ]
    else:
        grid = pipeline.default_benchmark_grid(seed=seed, esf_samples=args.esf_samples)
    result = pipeline.run_benchmark(
        manifest, args.out, grid=grid, seed=seed, figures=not args.no_figures
    )
    ok = [r for r in result.rows if r.error is None]
    best = max(ok, key=lambda r: r.accuracy) if ok else None
    print(f"{len(ok)}/{len(result.rows)} configurations completed; results in {args.out}")
    if best:
        print(f"best: {best.config_id} at {best.accuracy:.1%}")
    return 0


def cmd_report(args) -> int:
    out_dir = Path(args.results)
    rows = report.load_results_csv(out_dir / "results.csv")
    confusions = {}
    for path in sorted(out_dir.glob("confusion_*.csv")):
        config_id = path.stem[len("confusion_"):]
        confusions[config_id] = report.load_confusion_csv(path)
    report.write_summary(out_dir / "summary.txt", rows)
    written = report.render_figures(out_dir, rows, confusions)
    for path in written:
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crossmodal",
        description="Cross-modal visuo-tactile object recognition pipeline",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="info-level logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic dataset + manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--visual", type=int, default=40, help="visual clouds per class")
    p.add_argument("--tactile", type=int, default=5, help="tactile clouds per class")
    p.add_argument("--density", type=float, default=60000.0, help="visual points per m^2")
    p.add_argument("--noise", type=float, default=0.001, help="visual noise sigma, m")
    p.add_argument("--grid-pitch", type=float, default=0.025, help="press grid pitch, m")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("equalize", help="MLS + voxel filter one cloud file")
    p.add_argument("cloud")
    p.add_argument("--out", required=True)
    p.add_argument("--upsample-step", type=float, default=0.0003)
    p.add_argument("--search-radius", type=float, default=0.06)
    p.add_argument("--poly-degree", type=int, default=2)
    p.add_argument("--voxel-edge", type=float, default=0.005)
    p.set_defaults(func=cmd_equalize)

    p = sub.add_parser("describe", help="compute a descriptor for one cloud")
    p.add_argument("cloud")
    p.add_argument("--descriptor", choices=["esf", "shot", "concat", "clue"])
    p.add_argument("--raw", action="store_true", help="skip equalization")
    p.add_argument("--config")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_describe)

    p = sub.add_parser("train", help="train on the manifest's visual clouds")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--descriptor", choices=["esf", "shot", "concat", "clue"])
    p.add_argument("--no-preprocess", action="store_true")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser(
        "adapt-train", help="train with unsupervised adaptation on tactile clouds"
    )
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--descriptor", choices=["esf", "shot", "concat", "clue"])
    p.add_argument("--adaptation", choices=["pca", "gfk"], default=None)
    p.add_argument("--no-preprocess", action="store_true")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_adapt_train)

    p = sub.add_parser("recognize", help="classify one cloud with a saved model")
    p.add_argument("cloud")
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_recognize)

    p = sub.add_parser("benchmark", help="run the benchmark grid on a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--esf-samples", type=int, default=20000)
    p.add_argument("--quick", action="store_true", help="fused-descriptor configs only")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("report", help="re-render summary + figures from CSVs")
    p.add_argument("results", help="benchmark output directory")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
