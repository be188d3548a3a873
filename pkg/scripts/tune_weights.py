"""Grid search of the assignment cost weights on held-out synthetic seeds.

Forests are built once per seed and tau; only the costs and the ILP are
recomputed per grid point. The score is the summed normalized edit distance.
Use seeds disjoint from the ones any comparison is reported on.

    python scripts/tune_weights.py --config configs/synthetic.json --seeds 100 101 102
"""

import argparse
import itertools
from dataclasses import replace

from jointseg.assignment_model import CostModel, build_constraints, enumerate_assignments
from jointseg.config import PipelineConfig
from jointseg.evaluation import edit_distance
from jointseg.ilp_solver import solve_ilp
from jointseg.pipeline import Model, build_forests, decode, load_inputs


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="configs/synthetic.json")
    ap.add_argument("--seeds", type=int, nargs="+", default=list(range(100, 110)))
    ap.add_argument("--tau", type=float, nargs="+", default=[5.0, 1e9])
    ap.add_argument("--theta-e", type=float, nargs="+", default=[0.01, 0.03, 0.1])
    ap.add_argument("--theta-s", type=float, nargs="+", default=[0.01, 0.02, 0.05])
    ap.add_argument("--theta-bs", type=float, nargs="+", default=[0.002, 0.01])
    ap.add_argument("--theta-p", type=float, nargs="+", default=[0.5], help="also used for theta_bp")
    ap.add_argument("--top", type=int, default=10)
    args = ap.parse_args()

    base = PipelineConfig.load(args.config)
    if base.synthetic is None:
        ap.error("the config needs a synthetic spec")
    results = []
    for tau in args.tau:
        cfg = base.with_(tau=tau)
        cases = []
        for seed in args.seeds:
            c = cfg.with_(synthetic=replace(cfg.synthetic, seed=seed))
            inputs = load_inputs(c)
            forest = build_forests(c, inputs)
            cases.append((inputs, forest))
        for te, ts, tbs, tp in itertools.product(args.theta_e, args.theta_s, args.theta_bs, args.theta_p):
            params = replace(cfg.cost_params(), theta_e=te, theta_s=ts, theta_bs=tbs, theta_p=tp, theta_bp=tp)
            score = 0.0
            for inputs, forest in cases:
                costs = CostModel(forest, inputs.probs.prob, inputs.images.intensity, cfg.sigma, params)
                variables = enumerate_assignments(forest, costs)
                system = build_constraints(forest, variables)
                problem = system.to_problem([v.cost for v in variables])
                rec = decode(Model(forest, variables, system, problem), solve_ilp(problem).assignment)
                score += edit_distance(rec, inputs.gt).normalized
            results.append((score, tau, te, ts, tbs, tp))
            print(f"tau {tau:g}  theta_e {te:g}  theta_s {ts:g}  theta_bs {tbs:g}  theta_p {tp:g}  "
                  f"score {score:.2f}", flush=True)
    print("best:")
    for score, tau, te, ts, tbs, tp in sorted(results)[:args.top]:
        print(f"  {score:7.2f}  tau {tau:g}  theta_e {te:g}  theta_s {ts:g}  theta_bs {tbs:g}  theta_p {tp:g}")


if __name__ == "__main__":
    main()
