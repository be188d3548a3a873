"""Segmentation hypotheses and their per-slice component trees.

A sweep over decreasing lambda_n yields nested foregrounds. Every connected
component of every level is a hypothesis; a component that persists unchanged
over several levels is kept once, at the largest lambda where it appears.
Parents strictly contain their children, so two hypotheses of one slice
overlap exactly when one is an ancestor of the other.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage

from .image_model import Segmentation

EIGHT = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True, eq=False)
class Hypothesis:
    id: int
    slice: int
    pixels: np.ndarray  # sorted flat indices into the slice
    shape: tuple[int, int]
    level: float

    @property
    def area(self) -> int:
        return int(self.pixels.size)

    @cached_property
    def coords(self) -> np.ndarray:
        """(area, 2) array of (row, col)."""
        r, c = np.divmod(self.pixels, self.shape[1])
        return np.stack([r, c], axis=1)

    @cached_property
    def centroid(self) -> np.ndarray:
        return self.coords.mean(axis=0)

    def mask(self) -> np.ndarray:
        m = np.zeros(self.shape[0] * self.shape[1], dtype=bool)
        m[self.pixels] = True
        return m.reshape(self.shape)

    def overlaps(self, other: "Hypothesis") -> bool:
        if self.slice != other.slice:
            return False
        return np.intersect1d(self.pixels, other.pixels, assume_unique=True).size > 0


def connected_components(seg) -> list[np.ndarray]:
    """Maximal 8-connected foreground components as sorted flat-index arrays, in raster order."""
    fg = seg.label if isinstance(seg, Segmentation) else np.asarray(seg, dtype=bool)
    lab, n = ndimage.label(fg, structure=EIGHT)
    return _groups(lab.ravel(), n)


def _groups(flat_labels: np.ndarray, n: int) -> list[np.ndarray]:
    order = np.argsort(flat_labels, kind="stable")
    bounds = np.searchsorted(flat_labels[order], np.arange(1, n + 2))
    return [order[bounds[k]:bounds[k + 1]] for k in range(n)]


class ForestError(ValueError):
    pass


@dataclass
class ComponentForest:
    """Hypotheses of all slices with parent links (``None`` for roots)."""

    shape: tuple[int, int]
    depth: int
    hyps: dict[int, Hypothesis] = field(default_factory=dict)
    parent: dict[int, int | None] = field(default_factory=dict)

    def __post_init__(self):
        self._rebuild_index()

    def _rebuild_index(self):
        self.children: dict[int, list[int]] = {h: [] for h in self.hyps}
        self.by_slice: list[list[int]] = [[] for _ in range(self.depth)]
        for hid in sorted(self.hyps):
            self.by_slice[self.hyps[hid].slice].append(hid)
            p = self.parent.get(hid)
            if p is not None:
                self.children[p].append(hid)

    def __len__(self) -> int:
        return len(self.hyps)

    def __getitem__(self, hid: int) -> Hypothesis:
        return self.hyps[hid]

    def slice_hypotheses(self, z: int) -> list[Hypothesis]:
        return [self.hyps[h] for h in self.by_slice[z]]

    def roots(self, z: int | None = None) -> list[int]:
        ids = self.hyps if z is None else self.by_slice[z]
        return [h for h in sorted(ids) if self.parent.get(h) is None]

    def ancestors(self, hid: int) -> list[int]:
        out = []
        p = self.parent.get(hid)
        while p is not None:
            out.append(p)
            p = self.parent.get(p)
        return out

    def is_ancestor(self, a: int, b: int) -> bool:
        return a in self.ancestors(b)

    def related(self, a: int, b: int) -> bool:
        """True if a and b lie on a common root-to-leaf path."""
        return a == b or self.is_ancestor(a, b) or self.is_ancestor(b, a)

    def depth_of_trees(self) -> int:
        return max((len(p) for p in complete_paths(self)), default=0)

    def to_json(self) -> str:
        nodes = []
        for hid in sorted(self.hyps):
            h = self.hyps[hid]
            cy, cx = h.centroid
            nodes.append({"id": hid, "slice": h.slice, "level": h.level, "area": h.area,
                          "centroid": [float(cy), float(cx)], "parent": self.parent.get(hid)})
        return json.dumps({"shape": list(self.shape), "depth": self.depth, "nodes": nodes}, indent=1)

    def check(self) -> None:
        """Verify nesting: parents strictly contain children and overlap implies ancestry."""
        for hid, p in self.parent.items():
            if p is None:
                continue
            child, par = self.hyps[hid], self.hyps[p]
            if child.slice != par.slice:
                raise ForestError(f"hypothesis {hid} and parent {p} lie in different slices")
            if child.area >= par.area or not np.isin(child.pixels, par.pixels, assume_unique=True).all():
                raise ForestError(f"parent {p} does not strictly contain {hid}")
        for z in range(self.depth):
            ids = self.by_slice[z]
            for i, a in enumerate(ids):
                for b in ids[i + 1:]:
                    if self.hyps[a].overlaps(self.hyps[b]) != self.related(a, b):
                        raise ForestError(f"overlap of {a} and {b} disagrees with ancestry")


def build_forest(sweep: Sequence[Segmentation], z: int = 0, depth: int | None = None,
                 first_id: int = 0) -> ComponentForest:
    """Component tree of one slice from segmentations ordered by decreasing lambda_n."""
    if not sweep:
        raise ForestError("empty sweep")
    shape = sweep[0].label.shape
    depth = z + 1 if depth is None else depth
    hyps: dict[int, Hypothesis] = {}
    parent: dict[int, int | None] = {}
    prev_lab = None
    prev_nodes: list[int] = []
    prev_groups: list[np.ndarray] = []
    prev_areas = None
    next_id = first_id
    for k, seg in enumerate(sweep):
        fg = seg.label
        if fg.shape != shape:
            raise ForestError("segmentations of one slice differ in shape")
        if prev_lab is not None and (prev_lab.reshape(shape) > 0)[~fg].any():
            raise ForestError(f"sweep is not nested at level {k} (lambda_n={seg.lambda_n})")
        lab, n = ndimage.label(fg, structure=EIGHT)
        flat = lab.ravel()
        groups = _groups(flat, n)
        # children of each current component among the previous level's components
        contained: list[list[int]] = [[] for _ in range(n)]
        if prev_lab is not None:
            for j, comp in enumerate(prev_groups):
                contained[flat[comp[0]] - 1].append(j)
        nodes = []
        for c, pix in enumerate(groups):
            kids = contained[c]
            if len(kids) == 1 and prev_areas[kids[0]] == pix.size:
                nodes.append(prev_nodes[kids[0]])
                continue
            hid = next_id
            next_id += 1
            hyps[hid] = Hypothesis(hid, z, pix, shape, float(seg.lambda_n))
            parent[hid] = None
            for j in kids:
                parent[prev_nodes[j]] = hid
            nodes.append(hid)
        prev_lab, prev_groups, prev_nodes = flat, groups, nodes
        prev_areas = np.array([g.size for g in groups])
    return _renumber(ComponentForest(shape, depth, hyps, parent), first_id)


def _renumber(forest: ComponentForest, first_id: int) -> ComponentForest:
    """Relabel ids in pre-order (roots and siblings ordered by their first pixel)."""
    order: list[int] = []

    def key(h):
        return (int(forest.hyps[h].pixels[0]), -forest.hyps[h].area)

    for z in range(forest.depth):
        stack = sorted(forest.roots(z), key=key, reverse=True)
        while stack:
            h = stack.pop()
            order.append(h)
            stack.extend(sorted(forest.children[h], key=key, reverse=True))
    remap = {old: first_id + k for k, old in enumerate(order)}
    hyps = {}
    for old, new in remap.items():
        h = forest.hyps[old]
        hyps[new] = Hypothesis(new, h.slice, h.pixels, h.shape, h.level)
    parent = {remap[o]: (None if p is None else remap[p]) for o, p in forest.parent.items()}
    return ComponentForest(forest.shape, forest.depth, hyps, parent)


def stack_forests(forests: Iterable[ComponentForest]) -> ComponentForest:
    """Join single-slice forests (slice ``z`` taken from the z-th forest) with fresh global ids."""
    forests = list(forests)
    if not forests:
        raise ForestError("no slices")
    shape = forests[0].shape
    depth = len(forests)
    hyps, parent = {}, {}
    next_id = 0
    for z, f in enumerate(forests):
        remap = {}
        for old in sorted(f.hyps):
            remap[old] = next_id
            next_id += 1
        for old, new in remap.items():
            h = f.hyps[old]
            hyps[new] = Hypothesis(new, z, h.pixels, h.shape, h.level)
            p = f.parent.get(old)
            parent[new] = None if p is None else remap[p]
    return ComponentForest(shape, depth, hyps, parent)


def growth_rates(forest: ComponentForest) -> dict[int, float]:
    """Relative area change around each node: (area(parent) - area(largest child)) / area(self).

    Roots use their own area in place of the parent's, leaves their own area in
    place of the largest child's.
    """
    out = {}
    for hid, h in forest.hyps.items():
        p = forest.parent.get(hid)
        kids = forest.children[hid]
        above = forest.hyps[p].area if p is not None else h.area
        below = max(forest.hyps[k].area for k in kids) if kids else h.area
        out[hid] = (above - below) / h.area
    return out


def filter_stable(forest: ComponentForest, tau: float = 0.5) -> ComponentForest:
    """Drop nodes whose area growth rate exceeds ``tau`` and splice their children upwards.

    Every root-to-leaf path keeps at least one node (its most stable one), so
    no candidate region disappears entirely.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    growth = growth_rates(forest)
    keep = {h for h, g in growth.items() if g <= tau}
    for path in complete_paths(forest):
        if not keep.intersection(path):
            keep.add(min(path, key=lambda h: (growth[h], h)))
    parent = {}
    for hid in keep:
        p = forest.parent.get(hid)
        while p is not None and p not in keep:
            p = forest.parent.get(p)
        parent[hid] = p
    hyps = {h: forest.hyps[h] for h in keep}
    return ComponentForest(forest.shape, forest.depth, hyps, parent)


def complete_paths(forest: ComponentForest) -> list[list[int]]:
    """All root-to-leaf chains, slice by slice, in depth-first order."""
    paths = []
    for z in range(forest.depth):
        for root in forest.roots(z):
            stack = [(root, [root])]
            while stack:
                h, path = stack.pop()
                kids = forest.children[h]
                if not kids:
                    paths.append(path)
                for k in reversed(kids):
                    stack.append((k, path + [k]))
    return paths


def centroid_distance(a: Hypothesis, b: Hypothesis) -> float:
    d = a.centroid - b.centroid
    return math.hypot(float(d[0]), float(d[1]))
