"""Stacks, per-pixel observations, binary segmentations and slice file I/O."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

PROB_EPS = 1e-6
IMAGE_SUFFIXES = (".png", ".pgm")


class DataError(ValueError):
    """Raised for malformed or inconsistent input data."""


def clamp_probabilities(prob: np.ndarray, eps: float = PROB_EPS) -> np.ndarray:
    return np.clip(np.asarray(prob, dtype=np.float64), eps, 1.0 - eps)


@dataclass(frozen=True)
class ImageStack:
    """Gray levels in [0, 1], shape (depth, height, width)."""

    intensity: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.intensity, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[None]
        if arr.ndim != 3 or arr.shape[0] < 1:
            raise DataError(f"expected a (depth, height, width) stack, got shape {arr.shape}")
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise DataError("intensity values must lie in [0, 1]")
        arr.setflags(write=False)
        object.__setattr__(self, "intensity", arr)

    @property
    def depth(self) -> int:
        return self.intensity.shape[0]

    @property
    def height(self) -> int:
        return self.intensity.shape[1]

    @property
    def width(self) -> int:
        return self.intensity.shape[2]

    def __getitem__(self, z: int) -> np.ndarray:
        return self.intensity[z]


@dataclass(frozen=True)
class ProbabilityStack:
    """Per-pixel foreground probabilities, clamped to [eps, 1 - eps] on construction."""

    prob: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.prob, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[None]
        if arr.ndim != 3 or arr.shape[0] < 1:
            raise DataError(f"expected a (depth, height, width) stack, got shape {arr.shape}")
        if np.isnan(arr).any():
            raise DataError("probabilities contain NaN")
        arr = clamp_probabilities(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "prob", arr)

    @property
    def depth(self) -> int:
        return self.prob.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.prob.shape[1:]

    def __getitem__(self, z: int) -> np.ndarray:
        return self.prob[z]

    @classmethod
    def from_intensity(cls, stack: ImageStack, dark_is_foreground: bool = True) -> "ProbabilityStack":
        """Fallback observation model when no classifier output is available.

        With ``dark_is_foreground`` the probability is ``1 - intensity``,
        otherwise the intensity itself.
        """
        p = 1.0 - stack.intensity if dark_is_foreground else stack.intensity
        return cls(p)


@dataclass(frozen=True)
class Segmentation:
    label: np.ndarray
    lambda_n: float

    def __post_init__(self):
        lab = np.asarray(self.label).astype(bool)
        if lab.ndim != 2:
            raise DataError("segmentation must be two-dimensional")
        lab.setflags(write=False)
        object.__setattr__(self, "label", lab)

    @property
    def height(self) -> int:
        return self.label.shape[0]

    @property
    def width(self) -> int:
        return self.label.shape[1]

    @property
    def foreground(self) -> np.ndarray:
        return self.label


@dataclass(frozen=True)
class SegmentationParams:
    lambda_d: float = 1.0
    lambda_s: float = 1.0
    sigma: float = 0.1
    lambda_n_list: tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "lambda_n_list", tuple(float(v) for v in self.lambda_n_list))
        if self.lambda_d < 0 or self.lambda_s < 0:
            raise ValueError("lambda_d and lambda_s must be nonnegative")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        lam = self.lambda_n_list
        if any(b >= a for a, b in zip(lam, lam[1:])):
            raise ValueError("lambda_n_list must be strictly decreasing")


def _read_gray(path: Path) -> np.ndarray:
    """Read one 8- or 16-bit grayscale image and map it linearly to [0, 1]."""
    try:
        with Image.open(path) as im:
            mode = im.mode
            arr = np.array(im)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read image {path}: {exc}") from exc
    if arr.ndim != 2:
        raise DataError(f"{path}: only single-channel images are supported (mode {mode})")
    if mode == "L":
        return arr.astype(np.float64) / 255.0
    if mode.startswith("I;16") or mode == "I":
        if arr.min() < 0 or arr.max() > 65535:
            raise DataError(f"{path}: values outside the 16-bit range")
        return arr.astype(np.float64) / 65535.0
    raise DataError(f"{path}: unsupported image mode {mode}")


def _read_raw(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            arr = np.array(im)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read image {path}: {exc}") from exc
    if arr.ndim != 2:
        raise DataError(f"{path}: only single-channel images are supported")
    return arr.astype(np.int64)


def list_slices(directory: str | os.PathLike) -> list[Path]:
    d = Path(directory)
    if not d.is_dir():
        raise DataError(f"not a directory: {d}")
    files = sorted(p for p in d.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES and p.is_file())
    if not files:
        raise DataError(f"no slice images in {d}")
    return files


def _stack(arrays: list[np.ndarray], where: str) -> np.ndarray:
    shapes = {a.shape for a in arrays}
    if len(shapes) != 1:
        raise DataError(f"slices in {where} have differing dimensions: {sorted(shapes)}")
    return np.stack(arrays)


def load_stack(image_dir, prob_dir) -> tuple[ImageStack, ProbabilityStack]:
    images = _stack([_read_gray(p) for p in list_slices(image_dir)], str(image_dir))
    probs = _stack([_read_gray(p) for p in list_slices(prob_dir)], str(prob_dir))
    if images.shape != probs.shape:
        raise DataError(f"image stack {images.shape} and probability stack {probs.shape} differ")
    return ImageStack(images), ProbabilityStack(probs)


def load_images(image_dir) -> ImageStack:
    return ImageStack(_stack([_read_gray(p) for p in list_slices(image_dir)], str(image_dir)))


def load_labels(directory) -> np.ndarray:
    """Read a directory of integer label maps into a (depth, height, width) int array."""
    return _stack([_read_raw(p) for p in list_slices(directory)], str(directory))


def slice_name(z: int) -> str:
    return f"slice_{z:04d}.png"


def write_labels(labels, directory) -> None:
    labels = [np.asarray(lab) for lab in labels]
    for lab in labels:
        if lab.size and (lab.min() < 0 or lab.max() >= 65536):
            raise DataError("label ids must lie in [0, 65535]")
    d = Path(directory)
    try:
        d.mkdir(parents=True, exist_ok=True)
        for z, lab in enumerate(labels):
            Image.fromarray(lab.astype(np.uint16)).save(d / slice_name(z))
    except OSError as exc:
        raise DataError(f"cannot write labels to {d}: {exc}") from exc


def write_gray(stack: np.ndarray, directory, bits: int = 16) -> None:
    """Write a [0, 1] stack as 8- or 16-bit grayscale PNGs."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    top = 255 if bits == 8 else 65535
    dtype = np.uint8 if bits == 8 else np.uint16
    for z, sl in enumerate(np.asarray(stack)):
        q = np.rint(np.clip(sl, 0.0, 1.0) * top).astype(dtype)
        Image.fromarray(q).save(d / slice_name(z))
