"""Sensor noise models for depth images, part masks and flows."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage

from .flow import FlowImage


@dataclass(frozen=True)
class DepthNoiseParams:
    gaussian_sigma: float = 0.003  # metres, before smoothing
    correlation_scale: int = 8  # box filter width, pixels
    gamma_shape: float = 1000.0  # 0 disables the multiplicative term

    def __post_init__(self):
        if min(self.gaussian_sigma, self.correlation_scale, self.gamma_shape) < 0:
            raise ValueError("depth noise parameters must be non-negative")

    @property
    def is_zero(self) -> bool:
        return self.gaussian_sigma == 0 and self.gamma_shape == 0


@dataclass(frozen=True)
class MaskNoiseParams:
    salt_pepper_rate: float = 0.0
    closing_radius: int = 0

    def __post_init__(self):
        if not 0 <= self.salt_pepper_rate <= 0.5:
            raise ValueError("salt_pepper_rate must lie in [0, 0.5]")
        if self.closing_radius < 0:
            raise ValueError("closing_radius must be >= 0")


@dataclass(frozen=True)
class FlowNoiseParams:
    per_pixel_sigma: float = 0.0
    bias_sigma: float = 0.0

    def __post_init__(self):
        if self.per_pixel_sigma < 0 or self.bias_sigma < 0:
            raise ValueError("flow noise sigmas must be non-negative")


def depth_noise(depth: np.ndarray, params: DepthNoiseParams, seed: int) -> np.ndarray:
    """Multiplicative gamma field plus box-smoothed white Gaussian field.

    The smoothed field has std ``gaussian_sigma / correlation_scale``. Pixels
    without a hit (depth 0) stay 0, and so does anything pushed to <= 0.
    """
    depth = np.asarray(depth, dtype=float)
    rng = np.random.default_rng(seed)
    out = depth.copy()
    if params.gamma_shape > 0:
        k = params.gamma_shape
        out = out * rng.gamma(k, 1.0 / k, size=depth.shape)
    if params.gaussian_sigma > 0:
        white = rng.normal(0.0, params.gaussian_sigma, size=depth.shape)
        if params.correlation_scale > 1:
            white = ndimage.uniform_filter(white, size=int(params.correlation_scale), mode="reflect")
        out = out + white
    valid = (depth > 0) & (out > 0)
    return np.where(valid, out, 0.0)


def disk(radius: int) -> np.ndarray:
    r = int(radius)
    y, x = np.mgrid[-r:r + 1, -r:r + 1]
    return x * x + y * y <= r * r


def binary_closing(mask: np.ndarray, radius: int) -> np.ndarray:
    """Dilation then erosion with a disk; neighbours outside the image are ignored."""
    if radius <= 0:
        return mask.copy()
    se = disk(radius)
    grown = ndimage.binary_dilation(mask, se, border_value=0)
    return ndimage.binary_erosion(grown, se, border_value=1)


def mask_noise(mask: np.ndarray, params: MaskNoiseParams, seed: int) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool)
    rng = np.random.default_rng(seed)
    flips = rng.random(mask.shape) < params.salt_pepper_rate
    return binary_closing(mask ^ flips, params.closing_radius)


def flow_noise(flow, params: FlowNoiseParams, seed: int):
    """Shared bias plus per-pixel Gaussian noise on the support; zero elsewhere."""
    rng = np.random.default_rng(seed)
    data = flow.data.copy()
    sup = flow.support
    bias = rng.normal(0.0, params.bias_sigma, size=3) if params.bias_sigma > 0 else np.zeros(3)
    pix = rng.normal(0.0, params.per_pixel_sigma, size=(int(sup.sum()), 3)) if params.per_pixel_sigma > 0 else 0.0
    data[sup] = data[sup] + bias + pix
    return FlowImage(data, sup.copy())


@dataclass(frozen=True)
class NoiseConfig:
    """Noise applied to every evaluation pair. A ``None`` member is off."""

    depth: DepthNoiseParams | None = None
    mask: MaskNoiseParams | None = None
    flow: FlowNoiseParams | None = None
    seed: int = 0

    @property
    def is_zero(self) -> bool:
        return (
            (self.depth is None or self.depth.is_zero)
            and (self.mask is None or (self.mask.salt_pepper_rate == 0 and self.mask.closing_radius == 0))
            and (self.flow is None or (self.flow.per_pixel_sigma == 0 and self.flow.bias_sigma == 0))
        )

    def to_dict(self) -> dict:
        return {
            "depth": None if self.depth is None else asdict(self.depth),
            "mask": None if self.mask is None else asdict(self.mask),
            "flow": None if self.flow is None else asdict(self.flow),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseConfig":
        unknown = set(d) - {"depth", "mask", "flow", "seed"}
        if unknown:
            raise ValueError(f"unknown noise config keys: {sorted(unknown)}")
        return cls(
            DepthNoiseParams(**d["depth"]) if d.get("depth") is not None else None,
            MaskNoiseParams(**d["mask"]) if d.get("mask") is not None else None,
            FlowNoiseParams(**d["flow"]) if d.get("flow") is not None else None,
            int(d.get("seed", 0)),
        )

