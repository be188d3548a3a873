"""ILP solve time against stack depth on synthetic stacks with constant per-slice content.

    python scripts/bench_scaling.py --config configs/synthetic.json --depths 5 10 20 40 80
"""

import argparse
import json

from jointseg.config import PipelineConfig
from jointseg.pipeline import bench_scaling


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="configs/synthetic.json")
    ap.add_argument("--depths", type=int, nargs="+", default=[5, 10, 20, 40, 80])
    ap.add_argument("--repeats", type=int, default=10, help="timings per depth; the minimum is kept")
    ap.add_argument("--out", help="write the rows as JSON")
    args = ap.parse_args()

    rows = bench_scaling(PipelineConfig.load(args.config), args.depths, args.repeats)
    prev = None
    for r in rows:
        growth = "" if prev is None else f"  x{r['seconds'] / prev['seconds']:.2f} for x{r['depth'] / prev['depth']:.1f} depth"
        print(f"depth {r['depth']:4d}  {r['seconds'] * 1000:8.1f} ms  {r['variables']:6d} variables  "
              f"{r['nodes']:4d} nodes{growth}")
        prev = r
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(rows, fh, indent=1)


if __name__ == "__main__":
    main()
