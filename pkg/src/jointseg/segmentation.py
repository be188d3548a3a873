"""Exact per-slice binary segmentation by s/t min cut, swept over the size prior.

The energy minimized for one slice is

    E(y) = -lambda_d * sum_i D(x_i, y_i)
           + lambda_s * sum_{i~j} S_ij [y_i != y_j]
           + lambda_n * sum_i y_i

with ``D(x_i, y) = log p(x_i | y)`` and 8-connected pairs ``i~j``. Foreground
sits on the source side of the cut; among all minimizers the one with the
smallest foreground is returned, which makes the output independent of the
max-flow augmentation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._maxflow import min_cut_source_set
from .image_model import DataError, Segmentation, SegmentationParams

# half of the 8-neighbourhood; every unordered pair is visited once
OFFSETS = ((0, 1), (1, 0), (1, 1), (1, -1))


def unary(p: float, y: int) -> float:
    return math.log(p) if y else math.log1p(-p)


def smoothness_weight(i, j, image: np.ndarray, sigma: float) -> float:
    """Contrast-sensitive weight exp(-g^2 / 2 sigma^2) / ||i - j|| of a neighbour pair."""
    (ri, ci), (rj, cj) = i, j
    dr, dc = abs(ri - rj), abs(ci - cj)
    if max(dr, dc) != 1:
        raise ValueError(f"pixels {i} and {j} are not 8-connected neighbours")
    g = float(image[ri, ci]) - float(image[rj, cj])
    return math.exp(-g * g / (2.0 * sigma * sigma)) / math.hypot(dr, dc)


def neighbour_pairs(image: np.ndarray, sigma: float):
    """All unordered 8-neighbour pairs of a slice as flat indices plus their weights."""
    h, w = image.shape
    flat = np.arange(h * w).reshape(h, w)
    pa, pb, wt = [], [], []
    for dr, dc in OFFSETS:
        r0, r1 = 0, h - dr
        c0, c1 = max(0, -dc), w - max(0, dc)
        a = flat[r0:r1, c0:c1]
        b = flat[r0 + dr:r1 + dr, c0 + dc:c1 + dc]
        g = image[r0:r1, c0:c1] - image[r0 + dr:r1 + dr, c0 + dc:c1 + dc]
        pa.append(a.ravel())
        pb.append(b.ravel())
        wt.append((np.exp(-g * g / (2.0 * sigma * sigma)) / math.hypot(dr, dc)).ravel())
    return np.concatenate(pa), np.concatenate(pb), np.concatenate(wt)


@dataclass(frozen=True)
class EnergyBreakdown:
    data_term: float
    smoothness_term: float
    prior_term: float
    total: float


def energy(seg, probs: np.ndarray, image: np.ndarray, params: SegmentationParams,
           lambda_n: float) -> EnergyBreakdown:
    y = seg.label if isinstance(seg, Segmentation) else np.asarray(seg, dtype=bool)
    probs = np.asarray(probs, dtype=np.float64)
    image = np.asarray(image, dtype=np.float64)
    if y.shape != probs.shape or y.shape != image.shape:
        raise DataError(f"shape mismatch: labels {y.shape}, probs {probs.shape}, image {image.shape}")
    data = float(np.where(y, np.log(probs), np.log1p(-probs)).sum())
    pa, pb, wt = neighbour_pairs(image, params.sigma)
    yf = y.ravel()
    smooth = float(wt[yf[pa] != yf[pb]].sum())
    prior = float(yf.sum())
    total = -params.lambda_d * data + params.lambda_s * smooth + lambda_n * prior
    return EnergyBreakdown(data, smooth, prior, total)


class _SliceGraph:
    """Cached unary costs and pair weights of one slice."""

    def __init__(self, probs: np.ndarray, image: np.ndarray, params: SegmentationParams):
        probs = np.asarray(probs, dtype=np.float64)
        image = np.asarray(image, dtype=np.float64)
        if probs.shape != image.shape:
            raise DataError(f"probability slice {probs.shape} and image slice {image.shape} differ")
        if params.lambda_d < 0 or params.lambda_s < 0:
            raise ValueError("lambda_d and lambda_s must be nonnegative")
        self.shape = probs.shape
        self.cost_fg = -params.lambda_d * np.log(probs).ravel()
        self.cost_bg = -params.lambda_d * np.log1p(-probs).ravel()
        pa, pb, wt = neighbour_pairs(image, params.sigma)
        keep = wt * params.lambda_s > 0
        self.pa, self.pb = pa[keep], pb[keep]
        self.pw = params.lambda_s * wt[keep]

    def cut(self, lambda_n: float, state: np.ndarray | None = None) -> np.ndarray:
        """Minimal-foreground minimizer; ``state`` marks pixels already known (0/1) or free (-1)."""
        npx = self.cost_fg.size
        if state is None:
            state = np.full(npx, -1, np.int8)
        free = state < 0
        cost1 = self.cost_fg + lambda_n
        cost0 = self.cost_bg.copy()
        sa, sb = state[self.pa], state[self.pb]
        # a free pixel next to a fixed one pays the pair weight when it disagrees
        for here, there, st_there in ((self.pa, self.pb, sb), (self.pb, self.pa, sa)):
            m = free[here] & (st_there == 1)
            cost0 += np.bincount(here[m], weights=self.pw[m], minlength=npx)
            m = free[here] & (st_there == 0)
            cost1 += np.bincount(here[m], weights=self.pw[m], minlength=npx)
        node = np.cumsum(free) - 1
        both = free[self.pa] & free[self.pb]
        base = np.minimum(cost0, cost1)
        src = (cost0 - base)[free]
        snk = (cost1 - base)[free]
        inside, _ = min_cut_source_set(int(free.sum()), src, snk,
                                       node[self.pa[both]], node[self.pb[both]], self.pw[both])
        out = state == 1
        out[free] = inside
        return out.reshape(self.shape)


def min_cut_segment(probs: np.ndarray, image: np.ndarray, params: SegmentationParams,
                    lambda_n: float) -> Segmentation:
    return Segmentation(_SliceGraph(probs, image, params).cut(lambda_n), lambda_n)


def parametric_sweep(probs: np.ndarray, image: np.ndarray, params: SegmentationParams,
                     lambdas: Sequence[float] | None = None, warm_start: bool = True) -> list[Segmentation]:
    """One segmentation per lambda_n value, in the given (non-increasing) order.

    With ``warm_start`` the values are solved in bisection order and every
    cut contracts the pixels already decided by a solved neighbouring level:
    foreground at a larger lambda stays foreground, background at a smaller
    lambda stays background. Minimal cuts are nested, so this changes nothing
    but the amount of work.
    """
    lam = [float(v) for v in (params.lambda_n_list if lambdas is None else lambdas)]
    if not lam:
        raise ValueError("empty lambda_n list")
    if any(b > a for a, b in zip(lam, lam[1:])):
        raise ValueError("lambda_n values must be non-increasing")
    graph = _SliceGraph(probs, image, params)
    if not warm_start:
        return [Segmentation(graph.cut(v), v) for v in lam]

    out: list[np.ndarray | None] = [None] * len(lam)
    todo = [(0, len(lam) - 1, np.full(graph.cost_fg.size, -1, np.int8))]
    while todo:
        lo, hi, state = todo.pop()
        mid = (lo + hi) // 2
        fg = graph.cut(lam[mid], state)
        out[mid] = fg
        flat = fg.ravel()
        if lo < mid:
            left = state.copy()
            left[~flat] = 0
            todo.append((lo, mid - 1, left))
        if mid < hi:
            right = state.copy()
            right[flat] = 1
            todo.append((mid + 1, hi, right))
    return [Segmentation(fg, v) for fg, v in zip(out, lam)]


def equidistant_lambdas(lambda_max: float, lambda_min: float, count: int) -> tuple[float, ...]:
    """``count`` equidistant values from ``lambda_max`` down to ``lambda_min``."""
    if count < 1:
        raise ValueError("need at least one lambda sample")
    if count == 1:
        return (float(lambda_max),)
    if not lambda_max > lambda_min:
        raise ValueError("lambda_max must exceed lambda_min")
    return tuple(float(v) for v in np.linspace(lambda_max, lambda_min, count))
