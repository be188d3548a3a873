"""End-to-end driver: probabilities -> segmentation sweep -> component trees ->
assignment ILP -> decoded reconstruction -> edit distance.

Everything except the synthetic generator is deterministic. Slices are
processed in a thread pool; results are collected in slice order, so the
thread count never changes the output.
"""

from __future__ import annotations

import contextlib
import gc
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .assignment_model import (CONTINUATION, END, AssignmentVariable, ConstraintSystem,
                               CostModel, build_constraints, enumerate_assignments)
from .component_forest import ComponentForest, build_forest, filter_stable, stack_forests
from . import ilp_io
from .config import ConfigError, PipelineConfig
from .evaluation import EditDistanceReport, GroundTruth, SegmentGraph, edit_distance
from .ilp_solver import FEAS_TOL, IlpProblem, IlpSolution, solve_ilp
from .image_model import (DataError, ImageStack, ProbabilityStack, load_images, load_labels,
                          load_stack, write_labels)
from .segmentation import parametric_sweep
from .synthetic_data import generate

log = logging.getLogger(__name__)

MAX_LABEL = 65535


class InvariantViolation(RuntimeError):
    """A decoded result breaks a consistency guarantee; indicates a bug, not bad input."""


@contextlib.contextmanager
def stage(name: str, z: int | None = None):
    """Prefix any error raised inside with the pipeline stage (and slice)."""
    try:
        yield
    except Exception as exc:
        where = name if z is None else f"{name}, slice {z}"
        if exc.args and isinstance(exc.args[0], str) and not exc.args[0].startswith("["):
            exc.args = (f"[{where}] {exc.args[0]}",) + exc.args[1:]
        raise


# ---------------------------------------------------------------------------
# inputs


@dataclass
class Inputs:
    images: ImageStack
    probs: ProbabilityStack
    gt: GroundTruth | None = None


def load_inputs(config: PipelineConfig) -> Inputs:
    """Read the configured stack, or generate it when only a synthetic spec is given."""
    gt = None
    if config.image_dir is not None:
        with stage("ingest"):
            if config.prob_dir is not None:
                images, probs = load_stack(config.image_dir, config.prob_dir)
            else:
                images = load_images(config.image_dir)
                probs = ProbabilityStack.from_intensity(images, config.dark_is_foreground)
    elif config.synthetic is not None:
        images, probs, gt = _synthetic(config.synthetic)
    else:
        raise ConfigError("config needs image_dir or a synthetic spec")
    if config.gt_dir is not None:
        with stage("ingest ground truth"):
            gt = GroundTruth(load_labels(config.gt_dir))
    if gt is not None and gt.labels.shape != images.intensity.shape:
        raise DataError(f"ground truth {gt.labels.shape} and images {images.intensity.shape} differ in size")
    return Inputs(images, probs, gt)


def _synthetic(spec):
    try:
        return generate(spec)
    except DataError:
        raise
    except ValueError as exc:
        # e.g. a layout that cannot fit; the synthetic settings are at fault
        raise ConfigError(f"[synthetic] {exc}") from exc


# ---------------------------------------------------------------------------
# model construction


@dataclass
class Model:
    forest: ComponentForest
    variables: list[AssignmentVariable]
    system: ConstraintSystem
    problem: IlpProblem


def slice_forest(config: PipelineConfig, probs: np.ndarray, image: np.ndarray, z: int) -> ComponentForest:
    """Stability-filtered component tree of slice ``z`` (stored as a one-slice forest)."""
    with stage("segmentation sweep", z):
        sweep = parametric_sweep(probs, image, config.segmentation_params())
    with stage("component tree", z):
        return filter_stable(build_forest(sweep), config.tau)


def build_forests(config: PipelineConfig, inputs: Inputs, threads: int | None = None) -> ComponentForest:
    depth = inputs.images.depth
    threads = config.threads if threads is None else threads

    def one(z):
        return slice_forest(config, inputs.probs[z], inputs.images[z], z)

    if threads > 1 and depth > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_slice = list(pool.map(one, range(depth)))
    else:
        per_slice = [one(z) for z in range(depth)]
    return stack_forests(per_slice)


def build_model(config: PipelineConfig, inputs: Inputs, threads: int | None = None) -> Model:
    forest = build_forests(config, inputs, threads)
    with stage("assignments"):
        costs = CostModel(forest, inputs.probs.prob, inputs.images.intensity, config.sigma,
                          config.cost_params())
        variables = enumerate_assignments(forest, costs)
        system = build_constraints(forest, variables)
        problem = system.to_problem([v.cost for v in variables])
    return Model(forest, variables, system, problem)


# ---------------------------------------------------------------------------
# decoding


@dataclass
class Reconstruction:
    forest: ComponentForest
    selected: list[list[int]]
    accepted: list[AssignmentVariable]
    labels: np.ndarray  # (depth, height, width) uint16, 0 = background
    objective: float
    hyp_label: dict[int, int] = field(default_factory=dict)

    @property
    def depth(self) -> int:
        return len(self.selected)

    def segment_graph(self) -> SegmentGraph:
        pos = {h: (z, k) for z, ids in enumerate(self.selected) for k, h in enumerate(ids)}
        segments = [[self.forest[h].pixels for h in ids] for ids in self.selected]
        links = set()
        for v in self.accepted:
            for s in v.sources:
                for t in v.targets:
                    if s != END and t != END:
                        links.add((pos[s], pos[t]))
        return SegmentGraph(self.forest.shape, segments, links)

    def links_json(self) -> dict:
        def end(h):
            if h == END:
                return "end"
            return {"hypothesis": h, "slice": self.forest[h].slice, "label": self.hyp_label[h]}

        return {"objective": self.objective,
                "assignments": [{"index": v.index, "kind": v.kind,
                                 "sources": [end(h) for h in v.sources],
                                 "targets": [end(h) for h in v.targets],
                                 "cost": v.cost} for v in self.accepted]}


def decode(model: Model, assignment: np.ndarray) -> Reconstruction:
    """Turn a 0/1 assignment vector into label maps, re-checking every consistency invariant."""
    forest, variables = model.forest, model.variables
    a = np.asarray(assignment)
    if a.shape != (len(variables),) or not np.isin(a, (0, 1)).all():
        raise InvariantViolation("assignment is not a 0/1 vector over all variables")
    if not model.problem.feasible(a):
        raise InvariantViolation("assignment violates a constraint row")
    accepted = [v for v in variables if a[v.index]]

    # counted from the variables themselves, not from the constraint rows
    n_in = {h: 0 for h in forest.hyps}
    n_out = {h: 0 for h in forest.hyps}
    for v in accepted:
        for h in v.targets:
            if h != END:
                n_in[h] += 1
        for h in v.sources:
            if h != END:
                n_out[h] += 1
    for h in forest.hyps:
        if (n_in[h], n_out[h]) not in ((0, 0), (1, 1)):
            raise InvariantViolation(f"hypothesis {h} has {n_in[h]} incoming and {n_out[h]} "
                                     "outgoing accepted assignments")
    selected = [[h for h in ids if n_in[h]] for ids in forest.by_slice]

    h, w = forest.shape
    labels = np.zeros((forest.depth, h * w), np.int64)
    incoming = {t: v for v in accepted for t in v.targets if t != END}
    hyp_label: dict[int, int] = {}
    next_label = 1
    for z, ids in enumerate(selected):
        for hid in ids:
            v = incoming[hid]
            if v.kind == CONTINUATION:
                lab = hyp_label[v.sources[0]]
            else:
                lab = next_label
                next_label += 1
            hyp_label[hid] = lab
            pix = forest[hid].pixels
            if labels[z, pix].any():
                raise InvariantViolation(f"selected hypotheses overlap in slice {z}")
            labels[z, pix] = lab
    if next_label - 1 > MAX_LABEL:
        raise DataError(f"{next_label - 1} objects exceed the 16-bit label range")

    objective = math.fsum(v.cost for v in accepted)
    if abs(objective - model.problem.objective(a)) > FEAS_TOL:
        raise InvariantViolation("objective differs from c^T a")
    return Reconstruction(forest, selected, accepted, labels.reshape(forest.depth, h, w).astype(np.uint16),
                          objective, hyp_label)


# ---------------------------------------------------------------------------
# entry points


@dataclass
class RunResult:
    config: PipelineConfig
    model: Model
    solution: IlpSolution
    reconstruction: Reconstruction
    report: EditDistanceReport | None
    timings: dict[str, float] = field(default_factory=dict)

    def metrics(self) -> dict:
        f = self.model.forest
        out = {
            "slices": f.depth,
            "levels": len(self.config.lambdas()),
            "hypotheses": len(f),
            "variables": len(self.model.variables),
            "constraints": len(self.model.problem.rows),
            "selected": sum(len(s) for s in self.reconstruction.selected),
            "objective": self.reconstruction.objective,
            "ilp_nodes": self.solution.node_count,
            "edit_distance": None,
        }
        if self.report is not None:
            out["edit_distance"] = json.loads(self.report.to_json())
        return out


def run(config: PipelineConfig, inputs: Inputs | None = None) -> RunResult:
    """Full pipeline; the edit distance report is present iff ground truth is available."""
    timings = {}
    t0 = time.perf_counter()
    if inputs is None:
        inputs = load_inputs(config)
    timings["load"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    model = build_model(config, inputs)
    timings["model"] = time.perf_counter() - t0
    log.info("%d hypotheses, %d variables, %d rows", len(model.forest), len(model.variables),
             len(model.problem.rows))

    t0 = time.perf_counter()
    with stage("ilp"):
        sol = solve_ilp(model.problem, config.node_budget)
    if sol.status != "optimal":
        raise InvariantViolation("[ilp] assignment problem reported infeasible")
    timings["solve"] = time.perf_counter() - t0

    with stage("decode"):
        rec = decode(model, sol.assignment)
    report = None
    if inputs.gt is not None:
        with stage("evaluation"):
            report = edit_distance(rec, inputs.gt)
    return RunResult(config, model, sol, rec, report, timings)


def write_outputs(result: RunResult, out_dir) -> None:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_labels(result.reconstruction.labels, out / "labels")
        _write_json(out / "links.json", result.reconstruction.links_json())
        _write_json(out / "metrics.json", result.metrics())
        ilp_io.dump(result.model.problem, out / "problem.ilp", result.model.variables)
        (out / "effective_config.json").write_text(result.config.to_json())
    except OSError as exc:
        raise DataError(f"cannot write results to {out}: {exc}") from exc


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def sweep_single_lambda(config: PipelineConfig, lambdas, inputs: Inputs | None = None
                        ) -> list[tuple[float, EditDistanceReport]]:
    """Pipeline runs with a single segmentation level each (trees of depth one)."""
    if inputs is None:
        inputs = load_inputs(config)
    if inputs.gt is None:
        raise ConfigError("sweep needs ground truth (gt_dir or a synthetic spec)")
    out = []
    for lam in lambdas:
        res = run(config.with_(lambda_n_values=(float(lam),)), inputs)
        out.append((float(lam), res.report))
    return out


def bench_scaling(config: PipelineConfig, depths, repeats: int = 1) -> list[dict]:
    """Time the joint ILP solve on synthetic stacks of growing depth from one seed family."""
    if config.synthetic is None:
        raise ConfigError("bench needs a synthetic spec in the config")
    depths = [int(d) for d in depths]
    if not depths or min(depths) < 1:
        raise ConfigError("depths must be positive")
    rows = []
    for d in depths:
        images, probs, gt = _synthetic(replace(config.synthetic, depth=d))
        model = build_model(config, Inputs(images, probs, gt))
        best = math.inf
        for _ in range(max(1, repeats)):
            # as in timeit: no garbage collection inside the timed region
            enabled = gc.isenabled()
            gc.disable()
            try:
                t0 = time.perf_counter()
                sol = solve_ilp(model.problem, config.node_budget)
                best = min(best, time.perf_counter() - t0)
            finally:
                if enabled:
                    gc.enable()
        rows.append({"depth": d, "seconds": best, "variables": len(model.variables),
                     "hypotheses": len(model.forest), "nodes": sol.node_count})
    return rows
