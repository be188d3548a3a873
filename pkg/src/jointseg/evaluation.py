"""Split/merge edit distance between a reconstruction and ground truth.

Within a slice, every ground-truth segment without a matching result segment
is one merge error and every superfluous result segment is one split error.
Between slices, every missed ground-truth link is a split error and every
result link without a ground-truth counterpart is a merge error; each false
link counts, also when several connect the same pair of objects.

Segments are matched by strict pixel majority.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage

from .image_model import DataError

EIGHT = np.ones((3, 3), dtype=bool)

Link = tuple[tuple[int, int], tuple[int, int]]  # ((z, segment), (z + 1, segment))


@dataclass
class SegmentGraph:
    """Segments per slice (flat pixel arrays) and links between adjacent slices."""

    shape: tuple[int, int]
    segments: list[list[np.ndarray]]
    links: set[Link] = field(default_factory=set)

    @property
    def depth(self) -> int:
        return len(self.segments)

    def index_map(self, z: int) -> np.ndarray:
        """Flat map of segment indices, -1 for background."""
        out = np.full(self.shape[0] * self.shape[1], -1, np.int64)
        for k, pix in enumerate(self.segments[z]):
            out[pix] = k
        return out


def label_segments(labels: np.ndarray) -> tuple[list[np.ndarray], list[int]]:
    """Connected components of every nonzero id in one label map, with their ids."""
    segs, ids = [], []
    flat = labels.ravel()
    for gid in np.unique(flat[flat > 0]):
        comp, n = ndimage.label(labels == gid, structure=EIGHT)
        cflat = comp.ravel()
        order = np.argsort(cflat, kind="stable")
        bounds = np.searchsorted(cflat[order], np.arange(1, n + 2))
        for k in range(n):
            segs.append(np.sort(order[bounds[k]:bounds[k + 1]]))
            ids.append(int(gid))
    return segs, ids


def id_links(segments: list[list[np.ndarray]], ids: list[list[int]]) -> set[Link]:
    """Links implied by id equality across adjacent slices.

    An id that forms exactly one segment in both slices is linked outright;
    otherwise same-id segments are linked where their pixels overlap.
    """
    links = set()
    for z in range(len(segments) - 1):
        for a, ia in enumerate(ids[z]):
            for b, ib in enumerate(ids[z + 1]):
                if ia != ib:
                    continue
                sole = ids[z].count(ia) == 1 and ids[z + 1].count(ib) == 1
                if sole or np.intersect1d(segments[z][a], segments[z + 1][b], assume_unique=True).size:
                    links.add(((z, a), (z + 1, b)))
    return links


@dataclass
class GroundTruth:
    """Per-slice integer label maps (0 = background), optionally with explicit links."""

    labels: np.ndarray
    links: set[Link] | None = None

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.ndim == 2:
            self.labels = self.labels[None]
        if self.labels.ndim != 3:
            raise DataError("ground truth must be a (depth, height, width) label stack")

    @property
    def neuron_count(self) -> int:
        return int(np.unique(self.labels[self.labels > 0]).size)

    def graph(self) -> SegmentGraph:
        segs, ids = zip(*(label_segments(lab) for lab in self.labels)) if len(self.labels) else ((), ())
        segs, ids = list(segs), list(ids)
        links = self.links if self.links is not None else id_links(segs, ids)
        return SegmentGraph(self.labels.shape[1:], segs, set(links))


@dataclass
class EditDistanceReport:
    intra_merge: int = 0
    intra_split: int = 0
    inter_split: int = 0
    inter_merge: int = 0
    total: int = 0
    normalized: float = 0.0
    neurons: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1, sort_keys=True)


def _majority(pixels: np.ndarray, gt_index: np.ndarray) -> int | None:
    hits = gt_index[pixels]
    hits = hits[hits >= 0]
    if not hits.size:
        return None
    counts = np.bincount(hits)
    k = int(np.argmax(counts))
    return k if 2 * counts[k] > pixels.size else None


def match_components(result_slice: np.ndarray, gt_slice: np.ndarray) -> dict[int, int | None]:
    """Map each result label to the ground-truth label covering a strict majority of its pixels."""
    result_slice, gt_slice = np.asarray(result_slice), np.asarray(gt_slice)
    if result_slice.shape != gt_slice.shape:
        raise DataError("result and ground truth slices differ in shape")
    out = {}
    gflat = gt_slice.ravel()
    rflat = result_slice.ravel()
    for rid in np.unique(rflat[rflat > 0]):
        pix = np.flatnonzero(rflat == rid)
        vals, counts = np.unique(gflat[pix], return_counts=True)
        k = int(np.argmax(counts))
        out[int(rid)] = int(vals[k]) if vals[k] != 0 and 2 * counts[k] > pix.size else None
    return out


def compare(result: SegmentGraph, gt: SegmentGraph, neurons: int) -> EditDistanceReport:
    if result.shape != gt.shape or result.depth != gt.depth:
        raise DataError(f"result {result.depth}x{result.shape} and ground truth "
                        f"{gt.depth}x{gt.shape} differ in size")
    rep = EditDistanceReport(neurons=neurons)
    match: list[list[int | None]] = []
    for z in range(gt.depth):
        gidx = gt.index_map(z)
        mz = [_majority(pix, gidx) for pix in result.segments[z]]
        match.append(mz)
        hits = np.bincount([m for m in mz if m is not None], minlength=len(gt.segments[z]))
        rep.intra_merge += int((hits == 0).sum())
        rep.intra_split += sum(m is None for m in mz) + int(np.maximum(hits - 1, 0).sum())
    covered = set()
    for (z, a), (z2, b) in sorted(result.links):
        ga, gb = match[z][a], match[z2][b]
        key = ((z, ga), (z2, gb))
        if ga is not None and gb is not None and key in gt.links:
            covered.add(key)
        else:
            rep.inter_merge += 1
    rep.inter_split = len(gt.links - covered)
    rep.total = rep.intra_merge + rep.intra_split + rep.inter_split + rep.inter_merge
    rep.normalized = rep.total / neurons if neurons else float(rep.total)
    return rep


def edit_distance(result, gt: GroundTruth) -> EditDistanceReport:
    """Edit distance of a reconstruction, segment graph or label stack against ground truth."""
    if isinstance(result, np.ndarray):
        result = GroundTruth(result).graph()
    elif hasattr(result, "segment_graph"):
        result = result.segment_graph()
    return compare(result, gt.graph(), gt.neuron_count)
