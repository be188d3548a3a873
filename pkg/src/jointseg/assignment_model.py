"""Inter-slice assignment variables, their costs and the consistency constraints.

Every hypothesis gets an appearance and a disappearance variable (to/from the
end node). Hypotheses in adjacent slices whose centroids are within ``d_max``
get a continuation; pairs of disjoint hypotheses get split (1 -> 2) and merge
(2 -> 1) variables. Constraints: along every root-to-leaf path of a component
tree at most one incoming assignment is active, and every hypothesis has as
many active incoming as outgoing assignments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .component_forest import ComponentForest, Hypothesis, complete_paths
from .ilp_solver import IlpProblem, Row

END = -1

CONTINUATION = "continuation"
SPLIT = "split"
MERGE = "merge"
APPEAR = "appear"
DISAPPEAR = "disappear"
KINDS = (CONTINUATION, SPLIT, MERGE, APPEAR, DISAPPEAR)

# direction index -> (dr, dc); all eight neighbours
_NEIGHBOURS = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


@dataclass(frozen=True)
class CostParams:
    theta_l: float = 1.0
    theta_p: float = 1.0
    theta_s: float = 1.0
    theta_bp: float = 1.0
    theta_bs: float = 1.0
    theta_e: float = 1.0
    d_max: float = 10.0
    free_boundary: bool = False

    def __post_init__(self):
        for name in ("theta_l", "theta_p", "theta_s", "theta_bp", "theta_bs", "theta_e"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if not self.d_max > 0:
            raise ValueError("d_max must be positive")


@dataclass(frozen=True)
class AssignmentVariable:
    index: int
    kind: str
    sources: tuple[int, ...]
    targets: tuple[int, ...]
    cost: float

    @property
    def hypotheses(self) -> tuple[int, ...]:
        return tuple(h for h in self.sources + self.targets if h != END)


@dataclass(frozen=True)
class ConstraintSystem:
    path_rows: list[list[int]]
    flow_rows: list[tuple[int, list[int], list[int]]]  # (hypothesis, incoming, outgoing)
    m: int
    n: int

    def to_problem(self, costs: Sequence[float]) -> IlpProblem:
        rows = [Row(np.array(r, dtype=np.int64), np.ones(len(r)), "le", 1.0) for r in self.path_rows]
        for _, inc, out in self.flow_rows:
            idx = np.array(inc + out, dtype=np.int64)
            coef = np.concatenate([np.ones(len(inc)), -np.ones(len(out))])
            rows.append(Row(idx, coef, "eq", 0.0))
        return IlpProblem(np.asarray(costs, dtype=np.float64), rows)


class SliceObservations:
    """Per-pixel terms of the likelihood ``L`` for one slice."""

    def __init__(self, probs: np.ndarray, image: np.ndarray, sigma: float):
        probs = np.asarray(probs, dtype=np.float64)
        image = np.asarray(image, dtype=np.float64)
        self.shape = probs.shape
        # D(x, 0) - D(x, 1)
        self.data = (np.log1p(-probs) - np.log(probs)).ravel()
        h, w = self.shape
        pad = np.pad(image, 1, mode="edge")
        self.weights = np.zeros((8, h, w))
        for k, (dr, dc) in enumerate(_NEIGHBOURS):
            g = image - pad[1 + dr:1 + dr + h, 1 + dc:1 + dc + w]
            self.weights[k] = np.exp(-g * g / (2.0 * sigma * sigma)) / math.hypot(dr, dc)

    def likelihood(self, pixels: np.ndarray) -> float:
        h, w = self.shape
        mask = np.zeros(h * w, dtype=bool)
        mask[pixels] = True
        mask = mask.reshape(h, w)
        r, c = np.divmod(pixels, w)
        boundary = 0.0
        for k, (dr, dc) in enumerate(_NEIGHBOURS):
            rr, cc = r + dr, c + dc
            ok = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w)
            ok[ok] = ~mask[rr[ok], cc[ok]]
            boundary += float(self.weights[k, r[ok], c[ok]].sum())
        return float(self.data[pixels].sum()) + boundary


def likelihood_term(pixels, probs: np.ndarray, image: np.ndarray, sigma: float) -> float:
    """Sum of D(x,0) - D(x,1) over the pixels plus the smoothness weights across its boundary.

    ``pixels`` is a flat-index array, a boolean mask or a :class:`Hypothesis`.
    """
    return SliceObservations(probs, image, sigma).likelihood(_flat(pixels, np.shape(probs)))


def _flat(pixels, shape) -> np.ndarray:
    if isinstance(pixels, Hypothesis):
        return pixels.pixels
    arr = np.asarray(pixels)
    if arr.dtype == bool:
        return np.flatnonzero(arr.ravel())
    if arr.ndim == 2 and arr.shape[1] == 2:
        return np.ravel_multi_index((arr[:, 0], arr[:, 1]), shape)
    return arr.astype(np.int64)


def _coords(c) -> np.ndarray:
    if isinstance(c, Hypothesis):
        return c.coords
    arr = np.asarray(c)
    if arr.dtype == bool:
        return np.argwhere(arr)
    return arr.reshape(-1, 2).astype(np.int64)


def set_difference_mean_corrected(c1, c2) -> int:
    """|c1 xor (c2 shifted so that its centroid lands on c1's)| with the shift rounded half-up."""
    a, b = _coords(c1), _coords(c2)
    if not len(a) or not len(b):
        raise ValueError("both pixel sets must be nonempty")
    shift = np.floor(a.mean(axis=0) - b.mean(axis=0) + 0.5).astype(np.int64)
    b = b + shift
    lo = np.minimum(a.min(axis=0), b.min(axis=0))
    span = int(max(a[:, 1].max(), b[:, 1].max()) - lo[1] + 1)
    ka = (a[:, 0] - lo[0]) * span + (a[:, 1] - lo[1])
    kb = (b[:, 0] - lo[0]) * span + (b[:, 1] - lo[1])
    return int(np.setxor1d(ka, kb).size)


class CostModel:
    """Assignment costs over one stack, caching the per-hypothesis likelihoods."""

    def __init__(self, forest: ComponentForest, probs, image, sigma: float, params: CostParams):
        self.forest = forest
        self.params = params
        self.obs = [SliceObservations(probs[z], image[z], sigma) for z in range(forest.depth)]
        self._lik: dict[int, float] = {}

    def lik(self, hid: int) -> float:
        if hid not in self._lik:
            h = self.forest[hid]
            self._lik[hid] = self.obs[h.slice].likelihood(h.pixels)
        return self._lik[hid]

    def union_lik(self, a: int, b: int) -> float:
        ha, hb = self.forest[a], self.forest[b]
        return self.obs[ha.slice].likelihood(np.union1d(ha.pixels, hb.pixels))

    def continuation(self, i: int, j: int) -> float:
        p = self.params
        hi, hj = self.forest[i], self.forest[j]
        _check_adjacent(hi, hj)
        d = hi.centroid - hj.centroid
        if math.hypot(*d) > p.d_max:
            raise ValueError(f"hypotheses {i} and {j} are farther apart than d_max")
        return (p.theta_l * (self.lik(i) + self.lik(j))
                + p.theta_p * float(d @ d)
                + p.theta_s * set_difference_mean_corrected(hi, hj) ** 2)

    def _branch(self, single: int, pair: tuple[int, int], pair_lik: float) -> float:
        p = self.params
        hs = self.forest[single]
        ha, hb = (self.forest[h] for h in pair)
        if ha.slice != hb.slice:
            raise ValueError("branch hypotheses must lie in one slice")
        if ha.overlaps(hb):
            raise ValueError(f"branch hypotheses {pair} overlap")
        union = np.concatenate([ha.coords, hb.coords])
        d = hs.centroid - union.mean(axis=0)
        return (p.theta_l * (self.lik(single) + pair_lik)
                + p.theta_bp * float(d @ d)
                + p.theta_bs * set_difference_mean_corrected(hs.coords, union) ** 2)

    def split(self, i: int, j: int, k: int) -> float:
        _check_adjacent(self.forest[i], self.forest[j])
        return self._branch(i, (j, k), self.union_lik(j, k))

    def merge(self, i: int, j: int, k: int) -> float:
        _check_adjacent(self.forest[i], self.forest[k])
        return self._branch(k, (i, j), self.union_lik(i, j))

    def end(self, i: int, kind: str = APPEAR) -> float:
        p = self.params
        h = self.forest[i]
        theta_e = p.theta_e
        if p.free_boundary and ((kind == APPEAR and h.slice == 0)
                                or (kind == DISAPPEAR and h.slice == self.forest.depth - 1)):
            theta_e = 0.0
        return p.theta_l * self.lik(i) + theta_e * h.area ** 2


def _check_adjacent(a: Hypothesis, b: Hypothesis):
    if b.slice != a.slice + 1:
        raise ValueError(f"hypotheses {a.id} (slice {a.slice}) and {b.id} (slice {b.slice}) "
                         "are not in consecutive slices")


def enumerate_assignments(forest: ComponentForest, costs: CostModel) -> list[AssignmentVariable]:
    """All admissible assignment variables, ordered by slice, then by hypothesis ids."""
    d_max = costs.params.d_max
    out: list[AssignmentVariable] = []

    def add(kind, src, tgt, cost):
        out.append(AssignmentVariable(len(out), kind, src, tgt, float(cost)))

    for z in range(forest.depth):
        here = forest.by_slice[z]
        for h in here:
            add(APPEAR, (END,), (h,), costs.end(h, APPEAR))
            add(DISAPPEAR, (h,), (END,), costs.end(h, DISAPPEAR))
        if z + 1 >= forest.depth:
            continue
        nxt = forest.by_slice[z + 1]
        if not here or not nxt:
            continue
        ca = np.array([forest[h].centroid for h in here])
        cb = np.array([forest[h].centroid for h in nxt])
        dist = np.sqrt(((ca[:, None, :] - cb[None, :, :]) ** 2).sum(-1))
        near = dist <= d_max
        for a, i in enumerate(here):
            for b, j in enumerate(nxt):
                if near[a, b]:
                    add(CONTINUATION, (i,), (j,), costs.continuation(i, j))
        for a, i in enumerate(here):
            cand = [b for b in range(len(nxt)) if near[a, b]]
            for x, b1 in enumerate(cand):
                for b2 in cand[x + 1:]:
                    j, k = nxt[b1], nxt[b2]
                    if forest.related(j, k) or np.hypot(*(cb[b1] - cb[b2])) > 2 * d_max:
                        continue
                    add(SPLIT, (i,), (j, k), costs.split(i, j, k))
        for b, k in enumerate(nxt):
            cand = [a for a in range(len(here)) if near[a, b]]
            for x, a1 in enumerate(cand):
                for a2 in cand[x + 1:]:
                    i, j = here[a1], here[a2]
                    if forest.related(i, j) or np.hypot(*(ca[a1] - ca[a2])) > 2 * d_max:
                        continue
                    add(MERGE, (i, j), (k,), costs.merge(i, j, k))
    return out


def build_constraints(forest: ComponentForest, variables: Sequence[AssignmentVariable]) -> ConstraintSystem:
    incoming: dict[int, list[int]] = {h: [] for h in forest.hyps}
    outgoing: dict[int, list[int]] = {h: [] for h in forest.hyps}
    for v in variables:
        for h in v.targets:
            if h == END:
                continue
            if h not in incoming:
                raise KeyError(f"variable {v.index} references unknown hypothesis {h}")
            incoming[h].append(v.index)
        for h in v.sources:
            if h == END:
                continue
            if h not in outgoing:
                raise KeyError(f"variable {v.index} references unknown hypothesis {h}")
            outgoing[h].append(v.index)
    path_rows = [sorted(i for h in path for i in incoming[h]) for path in complete_paths(forest)]
    flow_rows = [(h, incoming[h], outgoing[h]) for h in sorted(forest.hyps)]
    return ConstraintSystem(path_rows, flow_rows, len(variables), len(forest.hyps))
