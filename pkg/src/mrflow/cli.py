"""``mrflow`` command line: generate, infer, evaluate, sweep-noise.

Exit codes: 0 success, 2 usage or parse error, 3 missing entity, 4 prediction
and dataset mismatch, 5 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .errors import FormatError, MissingPartError, MrflowError
from .evaluation import EvalOptions, evaluate_dataset
from .flow import FlowImage
from .geometry import CameraIntrinsics
from .inference import InferenceParams, infer_pair
from .io import MANIFEST, dump_json, load_json, read_pfm, read_pgm, save_scene, scene_name
from .metrics import write_report
from .noise import DepthNoiseParams, FlowNoiseParams, MaskNoiseParams, NoiseConfig
from .ransac import RansacParams
from .scene.generate import SceneConfig, generate_scene
from .scene.objects import Category

CATEGORIES = [c.value for c in Category] + ["mixed"]
SWEEP_PARAMS = ("depth_sigma", "flow_sigma", "mask_rate")


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError(f"{text} is not an unsigned 64-bit integer")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(",", " ").split()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad value list {text!r}") from exc


def _add_inference_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("inference")
    g.add_argument("--eps0", type=float, default=0.01, help="fixed-joint threshold on mean flow norm (m)")
    g.add_argument("--eps1", type=float, default=InferenceParams().eps1,
                   help="parallel-plane threshold on 1 - n.n' (default: 5 degrees)")
    g.add_argument("--ransac-seed", type=_u64, default=0)
    g.add_argument("--ransac-iters", type=_positive_int, default=1000)
    g.add_argument("--ransac-thresh", type=float, default=0.01, help="inlier distance (m)")
    g.add_argument("--ransac-min-inliers", type=_positive_int, default=None,
                   help="default: max(3, 10%% of points)")


def _inference_params(ns) -> InferenceParams:
    try:
        return InferenceParams(ns.eps0, ns.eps1, RansacParams(ns.ransac_iters, ns.ransac_thresh,
                                                              ns.ransac_min_inliers, ns.ransac_seed))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


class UsageError(MrflowError):
    exit_code = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mrflow", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", type=Path, default=None,
                       help="JSON file of option defaults (keys are option names); flags override")
        return p

    g = command("generate", "render a synthetic dataset")
    g.add_argument("--out", type=Path, required=True)
    g.add_argument("--seed", type=_u64, default=0)
    g.add_argument("--num-scenes", type=_positive_int, default=1)
    g.add_argument("--category", choices=CATEGORIES, default="mixed")
    g.add_argument("--distractors", type=int, default=1)
    g.add_argument("--radius-range", type=float, nargs=2, default=None, metavar=("MIN", "MAX"),
                   help="camera distance (m); default fits the object to the view")
    g.add_argument("--flows", choices=("all", "connected", "none"), default="all",
                   help="which oracle flow files to write")
    g.add_argument("--jobs", type=_positive_int, default=1)
    g.set_defaults(func=cmd_generate)

    i = command("infer", "classify one part pair from depth, segmentation and flow")
    i.add_argument("--depth", type=Path, required=True)
    i.add_argument("--seg", type=Path, required=True)
    i.add_argument("--part-a", type=int, required=True)
    i.add_argument("--part-b", type=int, required=True)
    i.add_argument("--flow", type=Path, required=True)
    i.add_argument("--connectedness", type=float, default=1.0, help="predicted probability; >= 0.5 is connected")
    i.add_argument("--meta", type=Path, default=None,
                   help="scene meta.json for intrinsics (default: next to --depth, else built-in)")
    _add_inference_flags(i)
    i.set_defaults(func=cmd_infer)

    e = command("evaluate", "run inference over every pair of a dataset and report metrics")
    e.add_argument("--dataset", type=Path, required=True)
    src = e.add_mutually_exclusive_group(required=True)
    src.add_argument("--predictions", type=Path, default=None)
    src.add_argument("--oracle", action="store_true", default=False)
    e.add_argument("--noise-config", type=Path, default=None)
    e.add_argument("--out", type=Path, required=True)
    e.add_argument("--jobs", type=_positive_int, default=1)
    _add_inference_flags(e)
    e.set_defaults(func=cmd_evaluate)

    s = command("sweep-noise", "oracle evaluation at a series of noise levels")
    s.add_argument("--dataset", type=Path, required=True)
    s.add_argument("--param", choices=SWEEP_PARAMS, required=True)
    s.add_argument("--values", type=_float_list, required=True, help="comma or space separated")
    s.add_argument("--noise-config", type=Path, default=None, help="base noise; the swept value overrides")
    s.add_argument("--out", type=Path, default=None, help="CSV path (default: stdout)")
    s.add_argument("--jobs", type=_positive_int, default=1)
    _add_inference_flags(s)
    s.set_defaults(func=cmd_sweep_noise)
    return parser


def _prescan(argv: list[str], commands) -> tuple[str | None, str | None]:
    command = config = None
    for i, tok in enumerate(argv):
        if command is None and tok in commands:
            command = tok
        elif command is not None and tok == "--config" and i + 1 < len(argv):
            config = argv[i + 1]
        elif command is not None and tok.startswith("--config="):
            config = tok.split("=", 1)[1]
    return command, config


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    """Values from ``--config`` become the subcommand's defaults; flags still win."""
    sub = next(a for a in parser._subparsers._group_actions if isinstance(a, argparse._SubParsersAction))
    command, config = _prescan(argv, sub.choices)
    if config is None:
        return parser.parse_args(argv)
    try:
        cfg = json.loads(Path(config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        parser.error(f"cannot read config {config}: {exc}")
    if not isinstance(cfg, dict):
        parser.error("config file must hold a JSON object")
    cmd_parser = sub.choices[command]
    known = {a.dest for a in cmd_parser._actions}
    defaults = {}
    for key, value in cfg.items():
        dest = key.replace("-", "_")
        if dest not in known or dest in ("config", "help", "func"):
            parser.error(f"unknown config key {key!r} for {command}")
        action = next(a for a in cmd_parser._actions if a.dest == dest)
        if action.type is Path and value is not None:
            value = Path(value)
        defaults[dest] = value
    cmd_parser.set_defaults(**defaults)
    # required options satisfied by the config file
    for a in cmd_parser._actions:
        if a.dest in defaults and a.required:
            a.required = False
    for grp in cmd_parser._mutually_exclusive_groups:
        if any(a.dest in defaults for a in grp._group_actions):
            grp.required = False
    return parser.parse_args(argv)


def _generate_one(args):
    cfg, out, index, flows = args
    gen = generate_scene(cfg, index)
    name = scene_name(index)
    meta = save_scene(Path(out) / name, gen, index, flows)
    return {"name": name, "index": index, "seed": meta["seed"], "category": meta["category"],
            "pairs": meta["pairs"]}


def cmd_generate(ns) -> int:
    try:
        cfg = SceneConfig(seed=ns.seed, category=ns.category, distractors=ns.distractors,
                          radius_range=tuple(ns.radius_range) if ns.radius_range else None)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    try:
        ns.out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create {ns.out}: {exc}") from exc
    tasks = [(cfg, str(ns.out), i, ns.flows) for i in range(ns.num_scenes)]
    if ns.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=ns.jobs) as pool:
            entries = list(pool.map(_generate_one, tasks))
    else:
        entries = [_generate_one(t) for t in tasks]
    manifest = {
        "version": 1,
        "config": {"seed": ns.seed, "num_scenes": ns.num_scenes, "category": ns.category,
                   "distractors": ns.distractors, "radius_range": ns.radius_range, "flows": ns.flows,
                   "intrinsics": cfg.intrinsics.to_dict()},
        "scenes": entries,
        "num_pairs": sum(len(e["pairs"]) for e in entries),
    }
    dump_json(ns.out / MANIFEST, manifest)
    print(f"wrote {ns.num_scenes} scenes, {manifest['num_pairs']} pairs to {ns.out}")
    return 0


def _intrinsics_for(ns, shape) -> CameraIntrinsics:
    meta_path = ns.meta
    if meta_path is None and (ns.depth.parent / "meta.json").exists():
        meta_path = ns.depth.parent / "meta.json"
    if meta_path is not None:
        try:
            k = CameraIntrinsics.from_dict(load_json(meta_path)["intrinsics"])
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{meta_path}: no usable intrinsics") from exc
    else:
        k = CameraIntrinsics.default()
    if k.shape != shape:
        raise FormatError(f"image size {shape} does not match intrinsics {k.shape}")
    return k


def cmd_infer(ns) -> int:
    params = _inference_params(ns)
    depth = read_pfm(ns.depth)
    seg = read_pgm(ns.seg)
    flow = read_pfm(ns.flow)
    if depth.ndim != 2:
        raise FormatError(f"{ns.depth}: depth must be a grayscale PFM")
    if flow.ndim != 3:
        raise FormatError(f"{ns.flow}: flow must be a colour PFM")
    if seg.shape != depth.shape or flow.shape[:2] != depth.shape:
        raise FormatError("depth, seg and flow sizes differ")
    for pid in (ns.part_a, ns.part_b):
        if not np.any(seg == pid):
            raise MissingPartError(f"part {pid} not present in {ns.seg}")
    k = _intrinsics_for(ns, depth.shape)
    est = infer_pair(depth, seg == ns.part_a, seg == ns.part_b, FlowImage.from_array(flow),
                     ns.connectedness, params, k)
    print(json.dumps(est.to_dict(), sort_keys=True))
    return 0


def _noise_config(path: Path | None) -> NoiseConfig:
    if path is None:
        return NoiseConfig()
    try:
        return NoiseConfig.from_dict(load_json(path))
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{path}: bad noise config ({exc})") from exc


def _run_settings(ns, noise: NoiseConfig, params: InferenceParams) -> dict:
    r = params.ransac
    return {"noise": noise.to_dict(),
            "inference": {"eps0": params.eps0, "eps1": params.eps1, "ransac_iterations": r.iterations,
                          "ransac_threshold": r.inlier_threshold, "ransac_min_inliers": r.min_inliers,
                          "ransac_seed": r.seed}}


def cmd_evaluate(ns) -> int:
    params = _inference_params(ns)
    noise = _noise_config(ns.noise_config)
    opts = EvalOptions(None if ns.oracle else str(ns.predictions), noise, params)
    report = evaluate_dataset(ns.dataset, opts, ns.jobs)
    extra = {"mode": "oracle" if ns.oracle else "predictions", **_run_settings(ns, noise, params)}
    write_report(report, ns.out, extra)
    sys.stdout.write(report.accuracy.table())
    return 0


def swept_noise(base: NoiseConfig, param: str, value: float) -> NoiseConfig:
    if value < 0:
        raise UsageError("noise levels must be non-negative")
    if param == "depth_sigma":
        d = base.depth or DepthNoiseParams(gamma_shape=0.0)
        return replace(base, depth=replace(d, gaussian_sigma=value))
    if param == "flow_sigma":
        f = base.flow or FlowNoiseParams()
        return replace(base, flow=replace(f, per_pixel_sigma=value))
    if param == "mask_rate":
        radius = base.mask.closing_radius if base.mask else (1 if value > 0 else 0)
        try:
            return replace(base, mask=MaskNoiseParams(value, radius))
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    raise UsageError(f"unknown sweep parameter {param}")


SWEEP_COLUMNS = ["param", "value", "pairs", "failures", "at", "pc", "ca",
                 "revolute_median_distance_m", "revolute_median_angle_rad", "prismatic_median_angle_rad"]


def _median(errors):
    e = np.asarray(errors, dtype=float)
    return "" if e.size == 0 else repr(float(np.median(e)))


def cmd_sweep_noise(ns) -> int:
    params = _inference_params(ns)
    base = _noise_config(ns.noise_config)
    rows = []
    for v in ns.values:
        report = evaluate_dataset(ns.dataset, EvalOptions(None, swept_noise(base, ns.param, v), params), ns.jobs)
        avg = report.accuracy.average
        dist, ang = report.revolute_errors()
        rows.append([ns.param, repr(v), avg.n, sum(r.pred is None for r in report.results),
                     "" if avg.at is None else repr(avg.at), repr(avg.pc), repr(avg.ca),
                     _median(dist), _median(ang), _median(report.prismatic_errors())])
    out = open(ns.out, "w", newline="") if ns.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        w.writerows(rows)
    finally:
        if ns.out:
            out.close()
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    ns = _apply_config(parser, list(sys.argv[1:] if argv is None else argv))
    try:
        return ns.func(ns)
    except MrflowError as exc:
        print(f"mrflow {ns.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"mrflow {ns.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
