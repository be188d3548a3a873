"""Command line entry point.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 internal
invariant violation (or any other unexpected failure).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import ilp_io
from .config import ConfigError, PipelineConfig
from .evaluation import GroundTruth, edit_distance
from .ilp_solver import solve_ilp
from .image_model import DataError, load_labels
from .pipeline import bench_scaling, load_inputs, run, sweep_single_lambda, write_outputs
from .synthetic_data import SyntheticSpec, write_synthetic

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_INVARIANT = 0, 2, 3, 4

log = logging.getLogger("jointseg")


def _config(args) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    changes = {}
    if getattr(args, "gt", None):
        changes["gt_dir"] = args.gt
    if getattr(args, "out", None):
        changes["out_dir"] = args.out
    if getattr(args, "threads", None) is not None:
        changes["threads"] = args.threads
    return cfg.with_(**changes) if changes else cfg


def _out_dir(cfg: PipelineConfig) -> Path:
    if cfg.out_dir is None:
        raise ConfigError("no output directory: pass --out or set out_dir")
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def cmd_run(args) -> int:
    cfg = _config(args)
    out = _out_dir(cfg)
    res = run(cfg)
    write_outputs(res, out)
    log.info("timings: %s", {k: round(v, 3) for k, v in res.timings.items()})
    if res.report is not None:
        print(res.report.to_json())
    print(f"objective {res.reconstruction.objective!r}; results in {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    inputs = load_inputs(cfg)
    lambdas = args.lambdas if args.lambdas else cfg.lambdas()
    rows = sweep_single_lambda(cfg, lambdas, inputs)
    table = [{"lambda_n": lam, **json.loads(rep.to_json())} for lam, rep in rows]
    for row in table:
        print(f"{row['lambda_n']:10.4f}  total {row['total']:5d}  normalized {row['normalized']:.4f}")
    if cfg.out_dir is not None:
        out = _out_dir(cfg)
        _dump(out / "sweep.json", table)
        (out / "effective_config.json").write_text(cfg.to_json())
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _config(args)
    rows = bench_scaling(cfg, args.depths, repeats=args.repeats)
    for r in rows:
        print(f"depth {r['depth']:4d}  solve {r['seconds']:.4f} s  variables {r['variables']}")
    if cfg.out_dir is not None:
        out = _out_dir(cfg)
        _dump(out / "bench.json", rows)
        (out / "effective_config.json").write_text(cfg.to_json())
    return EXIT_OK


def cmd_solve(args) -> int:
    cfg = _config(args)
    problem = ilp_io.load(args.problem)
    sol = solve_ilp(problem, cfg.node_budget)
    result = ilp_io.solution_json(sol)
    if cfg.out_dir is not None:
        _dump(_out_dir(cfg) / "solution.json", result)
    print(json.dumps(result, sort_keys=True))
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = _config(args)
    spec = cfg.synthetic or SyntheticSpec()
    if args.seed is not None:
        spec = SyntheticSpec(**{**spec.__dict__, "seed": args.seed})
    out = _out_dir(cfg)
    try:
        _, _, gt = write_synthetic(spec, out)
    except ValueError as exc:
        if isinstance(exc, DataError):
            raise
        raise ConfigError(str(exc)) from exc
    print(f"{spec.depth} slices, {gt.neuron_count} neurons written to {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _config(args)
    if cfg.gt_dir is None:
        raise ConfigError("eval needs --gt")
    labels = load_labels(args.labels)
    gt = GroundTruth(load_labels(cfg.gt_dir))
    if labels.shape != gt.labels.shape:
        raise DataError(f"labels {labels.shape} and ground truth {gt.labels.shape} differ in size")
    rep = edit_distance(np.asarray(labels), gt)
    if cfg.out_dir is not None:
        _dump(_out_dir(cfg) / "metrics.json", {"edit_distance": json.loads(rep.to_json())})
    print(rep.to_json())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="jointseg", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, threads=True):
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--gt", help="ground-truth label directory")
        p.add_argument("--out", help="output directory")
        if threads:
            p.add_argument("--threads", type=int, help="worker threads for per-slice stages")
        return p

    common(sub.add_parser("run", help="segment and link a stack")).set_defaults(fn=cmd_run)
    p = common(sub.add_parser("sweep", help="edit distance of single-lambda runs"))
    p.add_argument("--lambdas", type=float, nargs="+", help="lambda_n values (default: the config's series)")
    p.set_defaults(fn=cmd_sweep)
    p = common(sub.add_parser("bench", help="ILP solve time against stack depth"))
    p.add_argument("--depths", type=int, nargs="+", default=[5, 10, 20, 40])
    p.add_argument("--repeats", type=int, default=10)
    p.set_defaults(fn=cmd_bench)
    p = common(sub.add_parser("solve", help="solve a binary ILP text file"), threads=False)
    p.add_argument("problem", help="problem file")
    p.set_defaults(fn=cmd_solve)
    p = common(sub.add_parser("synth", help="write a synthetic stack"), threads=False)
    p.add_argument("--seed", type=int)
    p.set_defaults(fn=cmd_synth)
    p = common(sub.add_parser("eval", help="score label maps against ground truth"), threads=False)
    p.add_argument("labels", help="directory of result label maps")
    p.set_defaults(fn=cmd_eval)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - anything else is a bug
        log.debug("unexpected failure", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
