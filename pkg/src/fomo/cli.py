"""Command-line interface: animate, flow, equiv, bench, tps.

Exit codes: 0 success (or tolerance pass), 1 tolerance failure, 2 bad
input or math error (singular jacobian, malformed file, missing file).

Flags override the optional config file (JSON, or flat TOML key = value),
which overrides built-in defaults. FOMO_THREADS caps how many animation
frames render in parallel (frames are independent; output bytes do not
depend on the thread count).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dense, flowviz, scenes, tracks
from .equivariance import evaluate_equivariance, ideal_equivariant_frame
from .errors import FomoError, KeypointMismatchError
from .floatmap import write_pfm
from .geometry import frame_from_arrays
from .motion import pairwise_motion, relative_transfer
from .raster import backwarp, load_png, save_png
from .tps import TpsSampleConfig, TpsTransform, tps_sample, tps_warp_image

CONFIG_DEFAULTS = {
    "resolution": 64,
    "sigma": dense.DEFAULT_SIGMA,
    "tau": 0.01,
    "bg_radius": 0.25,
    "order": "first",
    "mode": "absolute",
    "seed": 0,
    "tol": 1e-6,
}


@dataclass(frozen=True)
class RunConfig:
    resolution: int = 64
    sigma: float = dense.DEFAULT_SIGMA
    tau: float = 0.01
    bg_radius: float = 0.25
    order: str = "first"
    mode: str = "absolute"
    seed: int = 0
    tol: float = 1e-6

    def __post_init__(self):
        r = self.resolution
        if r < 16 or r > 512 or (r & (r - 1)) != 0:
            raise ValueError(f"resolution must be a power of two in [16, 512], got {r}")
        if self.order not in ("zeroth", "first"):
            raise ValueError(f"order must be zeroth or first, got {self.order!r}")
        if self.mode not in ("absolute", "relative"):
            raise ValueError(f"mode must be absolute or relative, got {self.mode!r}")
        if self.sigma <= 0 or self.tau <= 0 or self.bg_radius <= 0:
            raise ValueError("sigma, tau and bg_radius must be positive")

    @property
    def mask_policy(self) -> dense.MaskPolicyConfig:
        return dense.MaskPolicyConfig(tau=self.tau, bg_radius=self.bg_radius)


def _parse_flat_toml(text: str) -> dict:
    """Flat `key = value` TOML subset: strings, numbers, booleans.

    Section headers are ignored; good enough for run configs on
    interpreters without tomllib.
    """
    out: dict = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line or line.startswith("["):
            continue
        if "=" not in line:
            raise FomoError(f"bad config line: {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        if val.startswith(('"', "'")) and val.endswith(val[0]) and len(val) >= 2:
            out[key] = val[1:-1]
        elif val in ("true", "false"):
            out[key] = val == "true"
        else:
            try:
                out[key] = int(val)
            except ValueError:
                try:
                    out[key] = float(val)
                except ValueError:
                    raise FomoError(f"bad config value: {raw!r}") from None
    return out


def load_config_file(path) -> dict:
    text = Path(path).read_text()
    if str(path).endswith(".json"):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise FomoError(f"{path}: {e}") from None
    else:
        raw = _parse_flat_toml(text)
    return {str(k).replace("-", "_"): v for k, v in raw.items()}


def resolve_config(args: argparse.Namespace) -> RunConfig:
    merged = dict(CONFIG_DEFAULTS)
    if getattr(args, "config", None):
        file_cfg = load_config_file(args.config)
        unknown = set(file_cfg) - set(CONFIG_DEFAULTS)
        if unknown:
            raise FomoError(f"unknown config keys: {sorted(unknown)}")
        merged.update(file_cfg)
    for key in CONFIG_DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    merged["resolution"] = int(merged["resolution"])
    merged["seed"] = int(merged["seed"])
    try:
        return RunConfig(**merged)
    except ValueError as e:
        raise FomoError(str(e)) from None


def thread_count() -> int:
    raw = os.environ.get("FOMO_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise FomoError(f"FOMO_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON or flat-TOML config file")
    p.add_argument("--resolution", type=int, help="flow grid side (default 64)")
    p.add_argument("--sigma", type=float, help="heatmap spread (default 0.01)")
    p.add_argument("--tau", type=float, help="mask softmax temperature (default 0.01)")
    p.add_argument("--bg-radius", dest="bg_radius", type=float,
                   help="background cutoff distance (default 0.25)")
    p.add_argument("--order", choices=("zeroth", "first"))
    p.add_argument("--mode", choices=("absolute", "relative"))
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=float, help="pass/fail tolerance (default 1e-6)")
    p.add_argument("--out-dir", dest="out_dir", default=".", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fomo",
        description="First-order motion kernels: animate images from "
                    "keypoint descriptor tracks, synthesize dense flow, "
                    "check equivariance, benchmark approximation orders.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("animate", help="warp a source image along a descriptor track")
    p.add_argument("source", help="source image (PNG)")
    p.add_argument("track", help="descriptor track (JSON)")
    p.add_argument("--source-desc", dest="source_desc",
                   help="single-frame descriptor JSON for the source image "
                        "(default: first track frame)")
    p.add_argument("--occlusion", help="occlusion grid (PFM/CSV) at flow resolution")
    p.add_argument("--masks", help="mask stack (PFM/CSV, K+1 channels) at flow "
                                   "resolution; replaces the softmax policy")
    _add_common(p)

    p = sub.add_parser("flow", help="dense flow between two frame descriptors")
    p.add_argument("source_frame", help="source frame descriptor (JSON)")
    p.add_argument("driving_frame", help="driving frame descriptor (JSON)")
    p.add_argument("--no-viz", action="store_true", help="skip the HSV PNG")
    p.add_argument("--emit-heatmaps", action="store_true",
                   help="also write the per-keypoint difference-of-Gaussians "
                        "stack (heatmaps.pfm, K channels, spread --sigma)")
    _add_common(p)

    p = sub.add_parser("equiv", help="equivariance residuals of a descriptor pair")
    p.add_argument("x_frame", help="descriptor of the undeformed image (JSON)")
    p.add_argument("y_frame", help="descriptor of the deformed image (JSON)")
    p.add_argument("transform", help="known deformation (TPS JSON)")
    p.add_argument("--report", help="also write the report JSON here")
    _add_common(p)

    p = sub.add_parser("bench", help="zeroth vs first order flow error on a scene")
    p.add_argument("scene", help="scene spec (JSON)")
    p.add_argument("--radii", default="0.1,0.2,0.4,0.6,0.8",
                   help="comma-separated ring radii")
    _add_common(p)

    p = sub.add_parser("tps", help="sample a deformation, warp an image, emit "
                                   "the matching ideal descriptor pair")
    p.add_argument("image", help="input image (PNG)")
    p.add_argument("--deform-variance", dest="deform_variance", type=float,
                   default=TpsSampleConfig.deform_variance)
    p.add_argument("--affine-variance", dest="affine_variance", type=float,
                   default=TpsSampleConfig.affine_variance)
    p.add_argument("--grid-size", dest="grid_size", type=int,
                   default=TpsSampleConfig.grid_size)
    p.add_argument("--kp-grid", dest="kp_grid", default="5x2",
                   help="keypoint layout NXxNY (default 5x2, i.e. K=10)")
    _add_common(p)

    return parser


def _frame_motion(cfg: RunConfig, source_desc, track, t):
    if cfg.mode == "relative":
        return relative_transfer(source_desc, track.frames[0], track.frames[t])
    return pairwise_motion(source_desc, track.frames[t], cfg.order)


def cmd_animate(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    image = load_png(args.source)
    track = tracks.DescriptorTrack.load(args.track)
    source_desc = tracks.load_frame(args.source_desc) if args.source_desc else track.frames[0]
    if source_desc.k != track.k:
        raise KeypointMismatchError(
            f"source descriptor K={source_desc.k} vs track K={track.k}"
        )
    r = cfg.resolution
    if args.occlusion is None:
        occ_full = dense.OcclusionMap.ones(image.width, image.height)
    else:
        occlusion = dense.occlusion_from_file_or_default(args.occlusion, r, r)
        occ_full = occlusion.resampled(image.width, image.height)
    static_masks = (
        dense.masks_from_file(args.masks, track.k, r, r) if args.masks else None
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def render(t: int) -> None:
        motion = _frame_motion(cfg, source_desc, track, t)
        masks = static_masks or dense.soft_masks(motion, r, r, cfg.mask_policy)
        flow = dense.dense_flow(motion, masks, r, r)
        flow_full = flow.resampled(image.width, image.height)
        out = backwarp(image, flow_full, occ_full)
        save_png(out, out_dir / f"frame_{t:04d}.png")

    workers = thread_count()
    if workers == 1:
        for t in range(len(track)):
            render(t)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(render, range(len(track))))
    print(f"wrote {len(track)} frames to {out_dir}")
    return 0


def cmd_flow(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    source = tracks.load_frame(args.source_frame)
    driving = tracks.load_frame(args.driving_frame)
    motion = pairwise_motion(source, driving, cfg.order)
    r = cfg.resolution
    masks = dense.soft_masks(motion, r, r, cfg.mask_policy)
    flow = dense.dense_flow(motion, masks, r, r)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_pfm(out_dir / "flow.pfm", flow.data)
    if not args.no_viz:
        save_png(flowviz.flow_to_image(flow), out_dir / "flow.png")
    if args.emit_heatmaps:
        stack = dense.heatmaps(motion, r, r, cfg.sigma)
        write_pfm(out_dir / "heatmaps.pfm", np.moveaxis(stack.data, 0, -1))
    print(f"wrote flow to {out_dir}")
    return 0


def cmd_equiv(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    x = tracks.load_frame(args.x_frame)
    y = tracks.load_frame(args.y_frame)
    t = TpsTransform.load(args.transform)
    report = evaluate_equivariance(x, y, t)
    text = report.to_json()
    print(text)
    if args.report:
        Path(args.report).write_text(text + "\n")
    return 0 if report.passes(cfg.tol) else 1


def cmd_bench(args: argparse.Namespace) -> int:
    resolve_config(args)  # validates shared flags even though bench is analytic
    spec = scenes.load_scene(args.scene)
    radii = [float(r) for r in args.radii.split(",") if r]
    zeroth = scenes.flow_error_profile(spec, "zeroth", radii)
    first = scenes.flow_error_profile(spec, "first", radii)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "profile_zeroth.csv").write_text(scenes.profile_to_csv(zeroth))
    (out_dir / "profile_first.csv").write_text(scenes.profile_to_csv(first))
    lines = ["radius,zeroth_mean,zeroth_max,first_mean,first_max,ratio"]
    for z, f in zip(zeroth, first):
        ratio = z.mean_error / f.mean_error if f.mean_error > 0 else math.inf
        lines.append(
            f"{z.radius!r},{z.mean_error!r},{z.max_error!r},"
            f"{f.mean_error!r},{f.max_error!r},{ratio!r}"
        )
    (out_dir / "bench.csv").write_text("\n".join(lines) + "\n")
    print(f"wrote benchmark tables to {out_dir}")
    return 0


def cmd_tps(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    image = load_png(args.image)
    try:
        sample_cfg = TpsSampleConfig(
            deform_variance=args.deform_variance,
            affine_variance=args.affine_variance,
            grid_size=args.grid_size,
            seed=cfg.seed,
        )
    except ValueError as e:
        raise FomoError(str(e)) from None
    t = tps_sample(sample_cfg)
    try:
        nx, ny = (int(v) for v in args.kp_grid.lower().split("x"))
    except ValueError:
        raise FomoError(f"bad --kp-grid {args.kp_grid!r}, expected NXxNY") from None
    layout = scenes.keypoint_grid(nx, ny)
    y = frame_from_arrays(layout, np.broadcast_to(np.eye(2), (len(layout), 2, 2)))
    x = ideal_equivariant_frame(y, t)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_png(tps_warp_image(image, t), out_dir / "warped.png")
    t.save(out_dir / "transform.json")
    tracks.save_frame(x, out_dir / "x.json")
    tracks.save_frame(y, out_dir / "y.json")
    print(f"wrote warped image, transform and descriptor pair to {out_dir}")
    return 0


COMMANDS = {
    "animate": cmd_animate,
    "flow": cmd_flow,
    "equiv": cmd_equiv,
    "bench": cmd_bench,
    "tps": cmd_tps,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (FomoError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
