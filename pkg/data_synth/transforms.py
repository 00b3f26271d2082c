"""
Affine transforms of sprites and backgrounds.

Random streams come from numpy's PCG64 bit generator seeded with the
clip seed. sample_transform draws its five components in the fixed
order rotation, scale, shear, dx, dy, each uniform over its range.
"""
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from utils.errors import ContractError


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class AffineTransform:
    rotation: float = 0.0
    scale: float = 1.0
    shear: float = 0.0
    dx: float = 0.0
    dy: float = 0.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ContractError(f"AffineTransform: {self.scale=} must be positive")

    def matrix(self) -> np.ndarray:
        """
        scale · R(rotation) · [[1, shear], [0, 1]]; determinant scale² > 0.
        """
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        return self.scale * np.array([[c, -s], [s, c]]) @ np.array([[1.0, self.shear], [0.0, 1.0]])

    def inverse_matrix(self) -> np.ndarray:
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        return np.array([[1.0, -self.shear], [0.0, 1.0]]) @ np.array([[c, s], [-s, c]]) / self.scale

    def source_coords(
        self, xs: np.ndarray, ys: np.ndarray, center: Tuple[float, float]
    ) -> Tuple[np.ndarray, np.ndarray]:
        """
        Map output pixel coordinates back to coordinates relative to center
        before the transform: inv(A) · ((p - d) - c).
        """
        u = (xs - self.dx) - center[0]
        v = (ys - self.dy) - center[1]
        inv = self.inverse_matrix()
        return inv[0, 0] * u + inv[0, 1] * v, inv[1, 0] * u + inv[1, 1] * v

    def step(self, deltas: np.ndarray) -> "AffineTransform":
        return AffineTransform(
            rotation=self.rotation + deltas[0],
            scale=self.scale + deltas[1],
            shear=self.shear + deltas[2],
            dx=self.dx + deltas[3],
            dy=self.dy + deltas[4],
        )


IDENTITY = AffineTransform()


@dataclass(frozen=True)
class TransformRanges:
    rotation: Tuple[float, float] = (-math.pi / 6, math.pi / 6)
    scale: Tuple[float, float] = (0.5, 2.0)
    shear: Tuple[float, float] = (-0.2, 0.2)
    dx: Tuple[float, float] = (-12.8, 12.8)
    dy: Tuple[float, float] = (-12.8, 12.8)

    def __post_init__(self):
        for name in ("rotation", "scale", "shear", "dx", "dy"):
            low, high = getattr(self, name)
            if not low <= high:
                raise ContractError(f"TransformRanges: {name} range ({low}, {high}) is empty")
        if self.scale[0] <= 0:
            raise ContractError(f"TransformRanges: scale range {self.scale} must be positive")

    @classmethod
    def identity(cls) -> "TransformRanges":
        return cls((0.0, 0.0), (1.0, 1.0), (0.0, 0.0), (0.0, 0.0), (0.0, 0.0))

    @classmethod
    def from_config(cls, config, h: int, w: int) -> "TransformRanges":
        return cls(
            rotation=(-config.rotation_max, config.rotation_max),
            scale=(config.scale_min, config.scale_max),
            shear=(-config.shear_max, config.shear_max),
            dx=(-config.translate_max * w, config.translate_max * w),
            dy=(-config.translate_max * h, config.translate_max * h),
        )

    def clip(self, transform: AffineTransform) -> AffineTransform:
        return AffineTransform(
            rotation=float(np.clip(transform.rotation, *self.rotation)),
            scale=float(np.clip(transform.scale, *self.scale)),
            shear=float(np.clip(transform.shear, *self.shear)),
            dx=float(np.clip(transform.dx, *self.dx)),
            dy=float(np.clip(transform.dy, *self.dy)),
        )


def sample_transform(rng: np.random.Generator, ranges: TransformRanges) -> AffineTransform:
    rotation = rng.uniform(*ranges.rotation)
    scale = rng.uniform(*ranges.scale)
    shear = rng.uniform(*ranges.shear)
    dx = rng.uniform(*ranges.dx)
    dy = rng.uniform(*ranges.dy)
    return AffineTransform(float(rotation), float(scale), float(shear), float(dx), float(dy))
