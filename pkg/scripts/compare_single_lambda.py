"""Joint multi-hypothesis run against every single-level run, per synthetic stack.

For each seed the stack is reconstructed once with the full lambda_n series
(all hypotheses competing in one ILP) and once per value of a shorter fixed
series, each using only that one segmentation. Prints normalized edit
distances and whether the joint run matched or beat the best single level.

    python scripts/compare_single_lambda.py --config configs/synthetic.json --seeds 0 1 2 3 4
"""

import argparse
import json
import time
from dataclasses import replace

from jointseg.config import PipelineConfig
from jointseg.pipeline import load_inputs, run, sweep_single_lambda
from jointseg.segmentation import equidistant_lambdas


def compare(cfg: PipelineConfig, seeds, levels: int) -> list[dict]:
    rows = []
    for seed in seeds:
        c = cfg.with_(synthetic=replace(cfg.synthetic, seed=seed))
        inputs = load_inputs(c)
        joint = run(c, inputs).report
        lams = equidistant_lambdas(c.lambda_n_max, c.lambda_n_min, levels)
        single = [(lam, rep.normalized) for lam, rep in sweep_single_lambda(c, lams, inputs)]
        best = min(v for _, v in single)
        rows.append({"seed": seed, "joint": joint.normalized, "single_best": best,
                     "single": single, "ok": joint.normalized <= best})
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="configs/synthetic.json")
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--levels", type=int, default=12, help="size of the single-level series")
    ap.add_argument("--out", help="write the table as JSON")
    args = ap.parse_args()

    cfg = PipelineConfig.load(args.config)
    if cfg.synthetic is None:
        ap.error("the config needs a synthetic spec")
    t0 = time.perf_counter()
    rows = compare(cfg, args.seeds, args.levels)
    for r in rows:
        series = " ".join(f"{v:.2f}" for _, v in r["single"])
        print(f"seed {r['seed']:3d}  joint {r['joint']:6.2f}  best single {r['single_best']:6.2f}  "
              f"{'ok' if r['ok'] else 'WORSE'}  [{series}]")
    print(f"{sum(r['ok'] for r in rows)}/{len(rows)} stacks ok, {time.perf_counter() - t0:.1f} s")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(rows, fh, indent=1)


if __name__ == "__main__":
    main()
