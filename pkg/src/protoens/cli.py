"""Command line: episodic evaluation (`eval`) and synthetic data (`synth`).

Exit codes: 0 success, 1 data error (missing or malformed files, dataset
too small), 2 configuration error (bad flags or option values).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .episodes import RunConfig, build_folds, run_repeated
from .errors import InvalidConfigError
from .manifest import (
    REPORT_SCHEMA,
    load_manifest,
    load_report,
    validate_manifest,
    write_report,
)
from .metrics import format_improvement, miou, relative_improvement
from .synthetic import (
    SyntheticSpec,
    clean_corruption,
    disjoint_halves_corruption,
    gen_synthetic_manifest,
    pairwise_blind_corruption,
)

FOLD_CHOICES = ("0", "1", "2", "3", "all")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="protoens",
        description="Prototype-based few-shot segmentation evaluation with backbone ensembling",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("eval", help="run an episodic evaluation over a manifest")
    ev.add_argument("--manifest", required=True, help="path to manifest.json")
    ev.add_argument("--fold", choices=FOLD_CHOICES, default="all",
                    help="fold index or 'all' (default: all)")
    ev.add_argument("--backbones", default=None,
                    help="comma list of backbone ids (default: every backbone in the manifest)")
    ev.add_argument("--strategy", choices=("single", "voting", "fusion"), default="voting")
    ev.add_argument("--vote-mode", choices=("posterior-mean", "logit-sum"),
                    default="posterior-mean")
    ev.add_argument("--weights", default=None,
                    help="comma list of branch weights; normalized to sum 1 (default: uniform)")
    ev.add_argument("--alpha", type=float, default=1.0,
                    help="cosine score multiplier (default: 1.0)")
    ev.add_argument("--episodes", type=int, default=1000)
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--n-way", type=int, default=1)
    ev.add_argument("--k-shot", type=int, default=1)
    ev.add_argument("--repeats", type=int, default=1,
                    help="seeded repeats per fold; the mean row averages all of them")
    ev.add_argument("--out", required=True, help="where to write the JSON report")
    ev.add_argument("--dump-masks", default=None, metavar="DIR",
                    help="also write every predicted mask as a PNG")
    ev.add_argument("--baseline", default=None, metavar="PATH",
                    help="prior report to compute relative improvement against")
    ev.set_defaults(func=_cmd_eval)

    sy = sub.add_parser("synth", help="generate a seeded synthetic manifest")
    sy.add_argument("--out", required=True, help="output dataset directory")
    sy.add_argument("--seed", type=int, default=0)
    sy.add_argument("--classes", type=int, default=8)
    sy.add_argument("--grid", default="32x32", help="HxW of masks and features (default 32x32)")
    sy.add_argument("--channels", type=int, default=16)
    sy.add_argument("--sigma", type=float, default=0.25, help="feature noise std")
    sy.add_argument("--separation", type=float, default=1.0, help="class center scale")
    sy.add_argument("--images-per-class", type=int, default=6)
    sy.add_argument("--corruption-preset",
                    choices=("pairwise-blind", "disjoint-halves", "none"),
                    default="pairwise-blind",
                    help="which backbones are blind to which classes")
    sy.add_argument("--num-backbones", type=int, default=1,
                    help="backbone count for --corruption-preset none")
    sy.add_argument("--config", default=None,
                    help="JSON spec file; overrides the other synth flags")
    sy.set_defaults(func=_cmd_synth)
    return parser


def _parse_weights(raw: str | None) -> tuple[float, ...] | None:
    if raw is None:
        return None
    try:
        values = tuple(float(x) for x in raw.split(","))
    except ValueError:
        raise InvalidConfigError(f"--weights must be a comma list of numbers, got {raw!r}")
    if any(v < 0 for v in values):
        raise InvalidConfigError(f"--weights must be non-negative, got {values}")
    total = sum(values)
    if total <= 0:
        raise InvalidConfigError("--weights must not sum to zero")
    return tuple(v / total for v in values)


def _format_table(doc: dict) -> str:
    lines = []
    lines.append(f"{'fold':<8}{'mIoU':>8}   per-class IoU")
    for fold in doc["folds"]:
        per_class = "  ".join(
            f"{c}:{v:.4f}" for c, v in sorted(fold["per_class_iou"].items(), key=lambda kv: int(kv[0]))
        )
        lines.append(f"Fold {fold['fold']:<3}{fold['miou']:>8.4f}   {per_class}")
    mean_row = f"{'Mean':<8}{doc['mean_miou']:>8.4f}"
    if "baseline" in doc:
        b = doc["baseline"]
        mean_row += (f"   ({format_improvement(b['improvement_pct'])} vs baseline "
                     f"{b['mean_miou']:.4f})")
    lines.append(mean_row)
    return "\n".join(lines)


def _cmd_eval(args) -> int:
    manifest = load_manifest(args.manifest)
    validate_manifest(manifest)

    backbones = None
    if args.backbones is not None:
        backbones = tuple(b.strip() for b in args.backbones.split(",") if b.strip())
        unknown = [b for b in backbones if b not in manifest.backbones]
        if unknown:
            raise InvalidConfigError(
                f"--backbones names unknown backbones {unknown}; manifest has "
                f"{list(manifest.backbones)}")
    n_selected = len(backbones) if backbones is not None else len(manifest.backbones)

    strategy = args.strategy
    if strategy == "voting" and n_selected == 1:
        print("warning: --strategy voting with a single backbone degenerates to single",
              file=sys.stderr)
        strategy = "single"

    cfg = RunConfig(
        n_episodes=args.episodes,
        seed=args.seed,
        n_way=args.n_way,
        k_shot=args.k_shot,
        strategy=strategy,
        vote_mode=args.vote_mode,
        weights=_parse_weights(args.weights),
        alpha=args.alpha,
        backbones=backbones,
        repeats=args.repeats,
    )

    folds = build_folds(manifest.class_count)
    selected = folds if args.fold == "all" else [folds[int(args.fold)]]

    reports = []
    for fold in selected:
        reports.extend(run_repeated(manifest, fold, cfg, dump_dir=args.dump_masks))

    doc = {
        "schema": REPORT_SCHEMA,
        "manifest": str(args.manifest),
        "fold": args.fold,
        "folds": [r.as_dict() for r in reports],
        "mean_miou": miou([r.miou for r in reports]),
    }
    if args.baseline is not None:
        base = load_report(args.baseline)
        doc["baseline"] = {
            "path": str(args.baseline),
            "mean_miou": base["mean_miou"],
            "improvement_pct": relative_improvement(doc["mean_miou"], base["mean_miou"]),
        }
    write_report(doc, args.out)
    print(_format_table(doc))
    return 0


def _parse_grid(raw: str) -> tuple[int, int]:
    try:
        h, w = raw.lower().split("x")
        return int(h), int(w)
    except ValueError:
        raise InvalidConfigError(f"--grid must look like 32x32, got {raw!r}")


def _cmd_synth(args) -> int:
    if args.config is not None:
        spec = SyntheticSpec.from_dict(json.loads(Path(args.config).read_text(encoding="utf-8")))
    else:
        height, width = _parse_grid(args.grid)
        if args.corruption_preset == "pairwise-blind":
            cmap = pairwise_blind_corruption(args.classes)
        elif args.corruption_preset == "disjoint-halves":
            cmap = disjoint_halves_corruption(args.classes)
        else:
            cmap = clean_corruption(args.num_backbones)
        spec = SyntheticSpec(
            class_count=args.classes,
            height=height,
            width=width,
            channels=args.channels,
            separation=args.separation,
            noise_sigma=args.sigma,
            images_per_class=args.images_per_class,
            corruption_map=cmap,
        )
    manifest = gen_synthetic_manifest(spec, args.seed, args.out)
    print(f"wrote {Path(args.out) / 'manifest.json'}: {len(manifest.images)} images "
          f"x {len(manifest.backbones)} backbones, {manifest.class_count} classes")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InvalidConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
