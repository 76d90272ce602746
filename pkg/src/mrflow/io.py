"""PFM / 16-bit PGM images and the on-disk scene dataset layout.

A dataset directory holds ``manifest.json`` and one directory per scene with
``depth.pfm``, ``seg.pgm``, ``meta.json`` and optionally ``flow_<A>_<B>.pfm``
for each part pair (A anchor, B candidate).
"""

from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np

from .errors import FormatError
from .flow import gt_flow
from .geometry import CameraIntrinsics
from .scene.camera import CameraPose
from .scene.generate import GeneratedScene, pairs
from .scene.objects import Category
from .scene.render import PartInfo, RenderedScene, SceneJoint

MANIFEST = "manifest.json"
META_VERSION = 1
_TOKEN = re.compile(rb"\s*(#[^\n]*\n\s*)*(\S+)")


def _read_header(buf: bytes, count: int) -> tuple[list[bytes], int]:
    """First ``count`` whitespace-separated tokens (skipping # comments) and the payload offset."""
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < count:
        m = _TOKEN.match(buf, pos)
        if m is None:
            raise FormatError("truncated header")
        tokens.append(m.group(2))
        pos = m.end()
    if pos >= len(buf) or buf[pos:pos + 1] not in (b"\n", b" ", b"\r", b"\t"):
        raise FormatError("header not terminated by whitespace")
    return tokens, pos + 1


def write_pfm(path, image: np.ndarray) -> None:
    """(H, W) as grayscale ``Pf`` or (H, W, 3) as colour ``PF``; little-endian float32."""
    a = np.asarray(image)
    if a.ndim == 2:
        magic = b"Pf"
    elif a.ndim == 3 and a.shape[2] == 3:
        magic = b"PF"
    else:
        raise FormatError(f"cannot store array of shape {a.shape} as PFM")
    h, w = a.shape[:2]
    payload = np.ascontiguousarray(a[::-1], dtype="<f4").tobytes()
    Path(path).write_bytes(magic + b"\n%d %d\n-1.0\n" % (w, h) + payload)


def read_pfm(path) -> np.ndarray:
    """Float64 array, top row first."""
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    try:
        (magic, w, h, scale), off = _read_header(buf, 4)
        w, h, scale = int(w), int(h), float(scale)
    except (ValueError, FormatError) as exc:
        raise FormatError(f"{path}: bad PFM header") from exc
    if magic not in (b"Pf", b"PF"):
        raise FormatError(f"{path}: not a PFM file")
    if w <= 0 or h <= 0 or scale == 0 or not np.isfinite(scale):
        raise FormatError(f"{path}: bad PFM header values")
    channels = 1 if magic == b"Pf" else 3
    dtype = "<f4" if scale < 0 else ">f4"
    n = w * h * channels
    if len(buf) - off != 4 * n:
        raise FormatError(f"{path}: expected {4 * n} payload bytes, found {len(buf) - off}")
    data = np.frombuffer(buf, dtype=dtype, count=n, offset=off).astype(np.float64)
    shape = (h, w) if channels == 1 else (h, w, 3)
    return data.reshape(shape)[::-1].copy()


def write_pgm16(path, image: np.ndarray) -> None:
    a = np.asarray(image)
    if a.ndim != 2:
        raise FormatError("PGM images are 2-D")
    if a.size and (a.min() < 0 or a.max() > 65535):
        raise FormatError("PGM values must lie in [0, 65535]")
    h, w = a.shape
    Path(path).write_bytes(b"P5\n%d %d\n65535\n" % (w, h) + a.astype(">u2").tobytes())


def read_pgm(path) -> np.ndarray:
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    try:
        (magic, w, h, maxval), off = _read_header(buf, 4)
        w, h, maxval = int(w), int(h), int(maxval)
    except (ValueError, FormatError) as exc:
        raise FormatError(f"{path}: bad PGM header") from exc
    if magic != b"P5" or w <= 0 or h <= 0 or not 0 < maxval <= 65535:
        raise FormatError(f"{path}: not a binary PGM")
    dtype = ">u2" if maxval > 255 else "u1"
    size = np.dtype(dtype).itemsize * w * h
    if len(buf) - off != size:
        raise FormatError(f"{path}: expected {size} payload bytes, found {len(buf) - off}")
    return np.frombuffer(buf, dtype=dtype, count=w * h, offset=off).reshape(h, w).astype(np.int32)


def dump_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc


def flow_name(a: int, b: int) -> str:
    return f"flow_{a}_{b}.pfm"


def scene_name(index: int) -> str:
    return f"scene_{index:05d}"


def pair_records(scene: RenderedScene) -> list[dict]:
    return [{"a": p.a, "b": p.b, "connected": p.connected, "kind": p.kind} for p in pairs(scene)]


def scene_meta(gen: GeneratedScene, index: int) -> dict:
    s = gen.scene
    counts = s.pixel_counts()
    return {
        "version": META_VERSION,
        "index": index,
        "seed": gen.seed,
        "category": s.category.value,
        "intrinsics": s.intrinsics.to_dict(),
        "camera": s.camera.to_dict(),
        "parts": [{"id": p.id, "name": p.name, "source": p.source, "visible_pixels": counts.get(p.id, 0)}
                  for p in sorted(s.parts.values(), key=lambda p: p.id)],
        "joints": [j.to_dict() for j in s.joints],
        "joint_values": {str(k): v for k, v in sorted(s.joint_values.items())},
        "pairs": pair_records(s),
        "rgb": None,
    }


def save_scene(directory, gen: GeneratedScene, index: int, flows: str = "all") -> dict:
    """Write one scene; ``flows`` is ``all``, ``connected`` or ``none``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    s = gen.scene
    write_pfm(d / "depth.pfm", s.depth)
    write_pgm16(d / "seg.pgm", s.seg)
    meta = scene_meta(gen, index)
    dump_json(d / "meta.json", meta)
    if flows != "none":
        for p in meta["pairs"]:
            if flows == "connected" and not p["connected"]:
                continue
            flow, _ = gt_flow(s, p["a"], p["b"])
            write_pfm(d / flow_name(p["a"], p["b"]), flow.data)
    return meta


def scene_from_meta(meta: dict, depth: np.ndarray, seg: np.ndarray) -> RenderedScene:
    try:
        k = CameraIntrinsics.from_dict(meta["intrinsics"])
        parts = {int(p["id"]): PartInfo(int(p["id"]), p["name"], p["source"]) for p in meta["parts"]}
        joints = [SceneJoint.from_dict(j) for j in meta["joints"]]
        values = {int(a): float(v) for a, v in meta.get("joint_values", {}).items()}
        scene = RenderedScene(depth, seg, k, CameraPose.from_dict(meta["camera"]), Category(meta["category"]),
                              parts, joints, values)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad scene metadata: {exc!r}") from exc
    if depth.shape != k.shape or seg.shape != k.shape:
        raise FormatError(f"image size {depth.shape} / {seg.shape} does not match intrinsics {k.shape}")
    return scene


def load_scene(directory) -> tuple[RenderedScene, dict]:
    d = Path(directory)
    meta = load_json(d / "meta.json")
    depth = read_pfm(d / "depth.pfm")
    seg = read_pgm(d / "seg.pgm")
    if depth.ndim != 2:
        raise FormatError(f"{d / 'depth.pfm'}: depth must be a grayscale PFM")
    return scene_from_meta(meta, depth, seg), meta
