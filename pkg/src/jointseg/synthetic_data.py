"""Synthetic anisotropic stacks of tubular processes with ground truth.

Each process owns a home position; its cross-section is a disc that wanders
around home, may branch into two smaller discs (same neuron id) and join
again, and may end and be replaced by a new process after an empty slice.
Optional defects imitate classifier failures: a process may fade to a weak
probability in one slice, and a leak may paint a foreground bridge between
two neighbouring processes.
All random draws come from generators keyed by (seed, slice, process), so a
slice's content does not depend on generation order and a deeper stack
generated from the same seed starts with the same slices.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .evaluation import GroundTruth
from .image_model import ImageStack, ProbabilityStack, write_gray, write_labels

BACKGROUND_GRAY = 0.55
INTERIOR_GRAY = 0.35
MEMBRANE_GRAY = 0.85
MEMBRANE_WIDTH = 1.5
PROB_FLOOR = 0.02
BRANCH_SCALE = 0.7
BRANCH_GAP = 1.5

_PLACEMENT, _RESPAWN, _STEP, _EVENT, _NOISE, _FADE, _LEAK = range(7)


@dataclass(frozen=True)
class SyntheticSpec:
    width: int = 64
    height: int = 64
    depth: int = 10
    n_processes: int = 4
    radius_min: float = 3.5
    radius_max: float = 6.0
    drift: float = 1.0
    split_prob: float = 0.15
    merge_prob: float = 0.3
    end_prob: float = 0.0
    noise: float = 0.05
    contrast_min: float = 0.7
    contrast_max: float = 0.95
    blur: float = 1.0
    separation: float = 5.0
    fade_prob: float = 0.0
    fade_contrast: float = 0.6
    leak_prob: float = 0.0
    leak_strength: float = 0.85
    leak_width: float = 1.0
    seed: int = 0

    def __post_init__(self):
        for name in ("split_prob", "merge_prob", "end_prob", "fade_prob", "leak_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.radius_min < 1 or self.radius_max < self.radius_min:
            raise ValueError("need 1 <= radius_min <= radius_max")
        if min(self.width, self.height, self.depth) < 1 or self.n_processes < 0:
            raise ValueError("dimensions must be positive and n_processes nonnegative")
        if not 0.0 < self.contrast_min <= self.contrast_max < 1.0:
            raise ValueError("contrast range must lie in (0, 1)")
        if not (0.0 < self.fade_contrast < 1.0 and 0.0 < self.leak_strength < 1.0):
            raise ValueError("fade_contrast and leak_strength must lie in (0, 1)")
        if self.leak_width <= 0:
            raise ValueError("leak_width must be positive")
        if self.drift < 0 or self.noise < 0 or self.blur < 0 or self.separation < 0:
            raise ValueError("drift, noise, blur and separation must be nonnegative")

    @property
    def wander(self) -> float:
        return 2.0 * self.drift

    @property
    def extent(self) -> float:
        """Largest distance of any process pixel from its home position."""
        rb = BRANCH_SCALE * self.radius_max
        return self.wander + max(self.radius_max, 2 * rb + BRANCH_GAP / 2 + 0.5)


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, *[k + 1 for k in key]]))


@dataclass
class _Section:
    """Cross-section of one process in one slice."""

    gt_id: int
    center: np.ndarray
    radius: float
    contrast: float
    branch_dir: np.ndarray | None

    def discs(self):
        if self.branch_dir is None:
            return [(self.center, self.radius)]
        rb = max(1.0, BRANCH_SCALE * self.radius)
        off = (rb + BRANCH_GAP / 2 + 0.5) * self.branch_dir
        return [(self.center + off, rb), (self.center - off, rb)]


def _homes(spec: SyntheticSpec) -> np.ndarray:
    """Home positions on a jittered grid whose pitch keeps processes apart."""
    rng = _rng(spec.seed, _PLACEMENT)
    e = spec.extent
    sep = 2 * e + spec.separation
    lo = e + 2
    span = np.array([spec.height, spec.width]) - e - 3 - lo
    if spec.n_processes == 0:
        return np.zeros((0, 2))
    if (span < 0).any():
        raise ValueError("overcrowded spec: image too small for the requested radii")
    cells = np.floor(span / sep).astype(int) + 1
    if cells.prod() < spec.n_processes:
        raise ValueError("overcrowded spec: cannot place processes without overlap")
    pitch = np.where(cells > 1, span / np.maximum(cells - 1, 1), 0.0)
    slack = np.where(cells > 1, pitch - sep, span)
    chosen = np.sort(rng.permutation(cells.prod())[:spec.n_processes])
    homes = []
    for k in chosen:
        cell = np.array(divmod(int(k), int(cells[1])))
        jitter = rng.uniform(-0.5, 0.5, 2) * slack
        base = lo + cell * pitch + np.where(cells > 1, 0.0, span / 2)
        homes.append(base + jitter)
    return np.array(homes)


def _draw_process(spec: SyntheticSpec, z: int, p: int, stream: int) -> np.random.Generator:
    return _rng(spec.seed, stream, z, p)


def sections(spec: SyntheticSpec) -> list[list[_Section]]:
    """Per-slice cross-sections of all living processes."""
    homes = _homes(spec)
    out: list[list[_Section]] = [[] for _ in range(spec.depth)]
    for p, home in enumerate(homes):
        lifetime = 0
        alive, gap = False, 1
        offset = np.zeros(2)
        radius = contrast = 0.0
        branch = None
        for z in range(spec.depth):
            ev = _draw_process(spec, z, p, _EVENT)
            u_end, u_branch, u_angle = ev.uniform(size=3)
            if alive and z > 0 and u_end < spec.end_prob:
                alive, gap = False, 0
            elif alive and z > 0:
                st = _draw_process(spec, z, p, _STEP)
                ang, mag = st.uniform(0, 2 * math.pi), spec.drift * math.sqrt(st.uniform())
                offset = offset + mag * np.array([math.sin(ang), math.cos(ang)])
                n = np.hypot(*offset)
                if n > spec.wander:
                    offset *= spec.wander / n
                if branch is not None and u_branch < spec.merge_prob:
                    branch = None
                elif branch is None and u_branch < spec.split_prob:
                    a = 2 * math.pi * u_angle
                    branch = np.array([math.sin(a), math.cos(a)])
            elif not alive:
                if gap >= 1 or z == 0:
                    rs = _draw_process(spec, z, p, _RESPAWN)
                    alive = True
                    lifetime += 1
                    offset = np.zeros(2)
                    branch = None
                    radius = rs.uniform(spec.radius_min, spec.radius_max)
                    contrast = rs.uniform(spec.contrast_min, spec.contrast_max)
                else:
                    gap += 1
            if alive:
                gt_id = 1 + p + spec.n_processes * (lifetime - 1)
                c = contrast
                if _draw_process(spec, z, p, _FADE).uniform() < spec.fade_prob:
                    c = min(c, spec.fade_contrast)
                out[z].append(_Section(gt_id, home + offset, radius, c, branch))
    return out


def _render(spec: SyntheticSpec, z: int, secs: list[_Section]):
    h, w = spec.height, spec.width
    rr, cc = np.mgrid[0:h, 0:w].astype(np.float64)
    labels = np.zeros((h, w), np.int64)
    fg = np.zeros((h, w))
    gray = np.full((h, w), BACKGROUND_GRAY)
    for s in secs:
        for center, r in s.discs():
            dist = np.hypot(rr - center[0], cc - center[1])
            inside = dist <= r
            labels[inside] = s.gt_id
            fg[inside] = s.contrast
            ring = (dist > r) & (dist <= r + MEMBRANE_WIDTH)
            gray[ring] = MEMBRANE_GRAY
            gray[inside] = INTERIOR_GRAY
    _leak(spec, z, secs, fg, labels, rr, cc)
    rng = _rng(spec.seed, _NOISE, z)
    gray = np.clip(gray + rng.normal(0.0, spec.noise, (h, w)), 0.0, 1.0)
    blurred = ndimage.gaussian_filter(fg, spec.blur) if spec.blur > 0 else fg
    prob = PROB_FLOOR + (1 - 2 * PROB_FLOOR) * blurred + rng.normal(0.0, spec.noise / 2, (h, w))
    return labels, gray, np.clip(prob, PROB_FLOOR / 2, 1 - PROB_FLOOR / 2)


def _leak(spec, z, secs, fg, labels, rr, cc):
    """Paint a false foreground bridge between one of the two closest process pairs."""
    rng = _rng(spec.seed, _LEAK, z)
    u, pick = rng.uniform(size=2)
    if u >= spec.leak_prob or len(secs) < 2:
        return
    pairs = sorted((float(np.hypot(*(a.center - b.center))), i, j)
                   for i, a in enumerate(secs) for j, b in enumerate(secs) if i < j)
    _, i, j = pairs[int(pick * min(2, len(pairs)))]
    a, b = secs[i].center, secs[j].center
    d = b - a
    t = np.clip(((rr - a[0]) * d[0] + (cc - a[1]) * d[1]) / float(d @ d), 0.0, 1.0)
    dist = np.hypot(rr - a[0] - t * d[0], cc - a[1] - t * d[1])
    bridge = (dist <= spec.leak_width) & (labels == 0)
    fg[bridge] = spec.leak_strength


def generate(spec: SyntheticSpec) -> tuple[ImageStack, ProbabilityStack, GroundTruth]:
    secs = sections(spec)
    labels, gray, prob = zip(*(_render(spec, z, secs[z]) for z in range(spec.depth)))
    return ImageStack(np.stack(gray)), ProbabilityStack(np.stack(prob)), GroundTruth(np.stack(labels))


def write_synthetic(spec: SyntheticSpec, out_dir) -> tuple[ImageStack, ProbabilityStack, GroundTruth]:
    """Generate and write ``images/``, ``probs/``, ``gt/`` and ``spec.json`` under ``out_dir``."""
    images, probs, gt = generate(spec)
    out = Path(out_dir)
    write_gray(images.intensity, out / "images", bits=16)
    write_gray(probs.prob, out / "probs", bits=16)
    write_labels(gt.labels, out / "gt")
    (out / "spec.json").write_text(json.dumps(asdict(spec), indent=1, sort_keys=True) + "\n")
    return images, probs, gt
