"""Dataset-level evaluation: per-pair flows (oracle or files) through inference into metrics."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, MismatchError, NumericalError, ShapeError
from .flow import FlowImage, PairLabel, gt_flow
from .inference import InferenceParams, infer_pair
from .io import MANIFEST, flow_name, load_json, load_scene, read_pfm
from .metrics import EvaluationReport, PairResult, evaluate_results
from .noise import NoiseConfig, depth_noise, flow_noise, mask_noise
from .scene.generate import derive_seed

CONNECTEDNESS = "connectedness.json"
_DEPTH, _MASK, _FLOW = range(3)


@dataclass(frozen=True)
class EvalOptions:
    predictions: str | None = None  # directory; None means oracle flows
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    params: InferenceParams = field(default_factory=InferenceParams)


def pair_key(a: int, b: int) -> str:
    return f"{a}_{b}"


def dataset_scenes(dataset) -> list[str]:
    root = Path(dataset)
    manifest = load_json(root / MANIFEST)
    try:
        return [s["name"] for s in manifest["scenes"]]
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{root / MANIFEST}: no scene list") from exc


def _predictions_for(pred_dir: Path, name: str, pair_list: list[dict]) -> dict:
    d = pred_dir / name
    if not d.is_dir():
        raise MismatchError(f"no predictions for scene {name}")
    conn = load_json(d / CONNECTEDNESS)
    expected = {pair_key(p["a"], p["b"]) for p in pair_list}
    if not isinstance(conn, dict) or set(conn) != expected:
        got = set(conn) if isinstance(conn, dict) else set()
        raise MismatchError(f"scene {name}: predicted pairs differ from dataset "
                            f"(missing {sorted(expected - got)}, extra {sorted(got - expected)})")
    return conn


def evaluate_scene(dataset, name: str, index: int, opts: EvalOptions) -> list[PairResult]:
    scene, meta = load_scene(Path(dataset) / name)
    noise = opts.noise
    depth = scene.depth
    if noise.depth is not None:
        depth = depth_noise(depth, noise.depth, derive_seed(noise.seed, index, _DEPTH))
    masks = {}

    def mask_of(pid: int) -> np.ndarray:
        if pid not in masks:
            m = scene.mask(pid)
            if noise.mask is not None:
                m = mask_noise(m, noise.mask, derive_seed(noise.seed, index, _MASK, pid))
            masks[pid] = m
        return masks[pid]

    conn = None
    if opts.predictions is not None:
        conn = _predictions_for(Path(opts.predictions), name, meta["pairs"])
    out = []
    for i, p in enumerate(meta["pairs"]):
        a, b = int(p["a"]), int(p["b"])
        label = PairLabel.from_joint(scene.joint_between(a, b))
        if conn is None:
            flow, _ = gt_flow(scene, a, b)
            prob = 1.0 if label.connected else 0.0
        else:
            prob = float(conn[pair_key(a, b)])
            path = Path(opts.predictions) / name / flow_name(a, b)
            if path.exists():
                flow = FlowImage.from_array(read_pfm(path))
                if flow.data.shape[:2] != scene.seg.shape:
                    raise ShapeError(f"{path}: flow size {flow.data.shape[:2]} != image {scene.seg.shape}")
            elif prob >= 0.5:
                raise MismatchError(f"scene {name}: pair {a}_{b} predicted connected but has no flow file")
            else:
                flow = FlowImage(np.zeros(scene.seg.shape + (3,)), np.zeros(scene.seg.shape, bool))
        if noise.flow is not None:
            flow = flow_noise(flow, noise.flow, derive_seed(noise.seed, index, _FLOW, i))
        mask_b = mask_of(b)
        mask_a = mask_of(a) & ~mask_b  # noisy masks may overlap; the candidate keeps shared pixels
        try:
            est = infer_pair(depth, mask_a, mask_b, flow, prob, opts.params, scene.intrinsics)
            out.append(PairResult(label, est, scene.category, name, a, b))
        except NumericalError as exc:
            out.append(PairResult(label, None, scene.category, name, a, b, failure=type(exc).__name__))
    return out


def _scene_job(args):
    return evaluate_scene(*args)


def evaluate_dataset(dataset, opts: EvalOptions, jobs: int = 1) -> EvaluationReport:
    names = dataset_scenes(dataset)
    tasks = [(str(dataset), n, i, opts) for i, n in enumerate(names)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_scene = list(pool.map(_scene_job, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        per_scene = [_scene_job(t) for t in tasks]
    return evaluate_results([r for rs in per_scene for r in rs])
