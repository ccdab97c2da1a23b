"""Command-line front end.

Subcommands: synth, explain, extract, score, bench, render.
The oracle can be set per command with --oracle or globally with the
MRX_ORACLE environment variable ("blob:<window>:<tau>",
"tcp:<host>:<port>", or "cmd:<program ...>").

Exit codes: 0 success, 1 config error, 2 oracle error, 3 run finished
with partial failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import bench
from .errors import InvalidParams, MrxError, NoExplanation, OracleUnavailable, ProtocolError
from .explainers import ExplainerConfig, explain_lime, explain_rex, explain_rise, explain_shap
from .extraction import ExtractionParams, extract_minimal_mask
from .imaging import (heat_png, load_image, load_mask, load_saliency,
                      save_mask, save_saliency)
from .metrics import PdcParams, pdc
from .mutants import segment_image
from .oracle import make_oracle

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ORACLE = 2
EXIT_PARTIAL = 3


def _oracle_spec(args) -> str:
    spec = getattr(args, "oracle", None) or os.environ.get("MRX_ORACLE")
    if not spec:
        raise InvalidParams("no oracle configured: pass --oracle or set MRX_ORACLE")
    return spec


def _cmd_synth(args) -> int:
    path = bench.synth_dataset(args.count, (args.height, args.width),
                               (args.blob_min, args.blob_max), args.seed, args.out)
    print(path)
    return EXIT_OK


def _cmd_explain(args) -> int:
    oracle = make_oracle(_oracle_spec(args))
    image = load_image(args.image)
    target = args.target or oracle.classify(image).label
    cfg = ExplainerConfig(target=target, budget=args.budget, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    mask = None
    if args.tool == "rise":
        saliency = explain_rise(image, oracle, cfg)
    elif args.tool == "rex":
        landscape, mask = explain_rex(image, oracle, cfg)
        saliency = landscape.to_saliency()
    elif args.tool == "lime":
        seg = segment_image(image, args.segments, cfg.seed)
        _, saliency, mask = explain_lime(image, oracle, seg, cfg)
    else:
        seg = segment_image(image, args.segments, cfg.seed)
        _, saliency = explain_shap(image, oracle, seg, cfg)
    save_saliency(saliency, out / f"{args.tool}_saliency.mrxs")
    heat_png(saliency, out / f"{args.tool}_heat.png")
    if mask is not None:
        save_mask(mask, out / f"{args.tool}_mask.png")
    print(f"queries={oracle.query_count}")
    return EXIT_OK


def _cmd_extract(args) -> int:
    oracle = make_oracle(_oracle_spec(args))
    image = load_image(args.image)
    saliency = load_saliency(args.saliency)
    target = args.target or oracle.classify(image).label
    mask = extract_minimal_mask(saliency, image, oracle, target,
                                ExtractionParams(step=args.step))
    save_mask(mask, args.out)
    print(args.out)
    return EXIT_OK


def _cmd_score(args) -> int:
    breakdown = pdc(load_mask(args.exp), load_mask(args.hpe),
                    PdcParams(small=args.s, big=args.b), args.connectivity)
    print(json.dumps(breakdown.as_dict(), sort_keys=True))
    return EXIT_OK


def _cmd_bench(args) -> int:
    overrides = {}
    for key in ("tools", "budget", "seed", "oracle", "step", "s", "b",
                "connectivity", "segments", "workers"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = tuple(value.split(",")) if key == "tools" else value
    if "oracle" not in overrides and os.environ.get("MRX_ORACLE"):
        overrides["oracle"] = os.environ["MRX_ORACLE"]
    if args.config:
        config = bench.load_run_config(args.config, overrides)
    else:
        config = bench.config_from_mapping(overrides)
    manifest = bench.ingest(args.manifest, config.positive_label)
    report = bench.run(manifest, config)
    paths = bench.write_report(report, args.out)
    if args.render:
        overlay_dir = Path(args.out) / "overlays"
        overlay_dir.mkdir(parents=True, exist_ok=True)
        for row in report.rows:
            if row.mask is None:
                continue
            source = manifest.rows[row.row_index]
            bench.render_overlay(load_image(source.image_path),
                                 load_mask(source.hpe_path), row.mask,
                                 overlay_dir / f"{row.tool}_{row.row_index:04d}.png")
    print(paths["json"])
    return EXIT_PARTIAL if report.has_failures else EXIT_OK


def _cmd_render(args) -> int:
    path = bench.render_overlay(load_image(args.image), load_mask(args.hpe),
                                load_mask(args.exp), args.out)
    print(path)
    return EXIT_OK


def _cmd_dump(args) -> int:
    """Debug dumps of the perturbation machinery as PNGs."""
    from .imaging import Image as Img, save_image
    from .mutants import RiseMaskParams, rise_masks
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.what == "rise-masks":
        params = RiseMaskParams(grid=args.grid, keep_prob=args.p,
                                count=args.count, seed=args.seed)
        for i, mask in enumerate(rise_masks(params, (args.height, args.width))):
            save_image(Img(mask.values[:, :, None]), out / f"mask_{i:04d}.png")
        print(out)
        return EXIT_OK
    image = load_image(args.image)
    seg = segment_image(image, args.segments, args.seed)
    shade = (seg.labels.astype(float) + 0.5) / seg.k
    save_image(Img(shade[:, :, None]), out / "segments.png")
    print(out / "segments.png")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mrxai", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic blob dataset")
    p.add_argument("--count", type=int, default=50)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--blob-min", type=int, default=8)
    p.add_argument("--blob-max", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("explain", help="run one explainer on one image")
    p.add_argument("--tool", choices=bench.ALL_TOOLS, required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--oracle")
    p.add_argument("--target")
    p.add_argument("--budget", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--segments", type=int, default=40)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_explain)

    p = sub.add_parser("extract", help="extract a minimal passing mask from a heatmap")
    p.add_argument("--saliency", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--oracle")
    p.add_argument("--target")
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("score", help="score an explanation mask against ground truth")
    p.add_argument("--exp", required=True)
    p.add_argument("--hpe", required=True)
    p.add_argument("--s", type=float, default=1.0)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--connectivity", type=int, default=8, choices=(4, 8))
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("bench", help="run tools x images and write reports")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="key = value config file; flags override")
    p.add_argument("--tools")
    p.add_argument("--budget", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--oracle")
    p.add_argument("--step", type=float)
    p.add_argument("--s", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--connectivity", type=int, choices=(4, 8))
    p.add_argument("--segments", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--render", action="store_true",
                   help="also write per-row overlay images")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("render", help="overlay ground truth and explanation on the image")
    p.add_argument("--image", required=True)
    p.add_argument("--hpe", required=True)
    p.add_argument("--exp", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("dump", help="debug-dump masks or segment maps as PNGs")
    p.add_argument("what", choices=("rise-masks", "segments"))
    p.add_argument("--image", help="input image (segments)")
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--count", type=int, default=8)
    p.add_argument("--grid", type=int, default=8)
    p.add_argument("--p", type=float, default=0.1)
    p.add_argument("--segments", type=int, default=40)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_dump)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OracleUnavailable, ProtocolError) as exc:
        print(f"oracle error: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except NoExplanation as exc:
        print(f"no explanation: {exc}", file=sys.stderr)
        return EXIT_PARTIAL
    except MrxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
