"""Ledger scaling of mqc_count alone and of the full pipeline against n and k."""

import argparse
from pathlib import Path

from qcoreset.eval import BenchSpec, mqc_scaling, plot_scaling, scaling_experiment, write_json
from qcoreset.qsim import Noise, SubroutineConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--max-exp", type=int, default=16, help="n grid is 2^10 .. 2^max-exp")
    ap.add_argument("--k-grid", type=int, nargs="+", default=[2, 4, 8, 16])
    ap.add_argument("--k-n", type=int, default=2**14, help="n used for the k axis")
    ap.add_argument("--k", type=int, default=4)
    ap.add_argument("--d", type=int, default=5)
    ap.add_argument("--eps", type=float, default=0.25)
    ap.add_argument("--skew", type=float, default=0.0, help="geometric skew of the counting partitions")
    ap.add_argument("--outdir", default="results")
    a = ap.parse_args()

    out = Path(a.outdir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = SubroutineConfig(noise=Noise.ADVERSARIAL)
    ns = [2**e for e in range(10, a.max_exp + 1)]
    tables = {
        "mqc_n": mqc_scaling(ns, a.k, a.eps, cfg, skew=a.skew),
        "mqc_k": mqc_scaling(a.k_n, a.k_grid, a.eps, cfg, skew=a.skew),
        "pipeline_n": scaling_experiment([BenchSpec("blobs", n, a.d, a.k, eps=a.eps) for n in ns], cfg, "n"),
        "pipeline_k": scaling_experiment([BenchSpec("blobs", a.k_n, a.d, k, eps=a.eps) for k in a.k_grid],
                                         cfg, "k"),
    }
    for name, t in tables.items():
        print(f"{name}: slope {t.slope:.3f}")
        write_json(t.to_dict(), out / f"{name}.json")
        plot_scaling(t, out / f"{name}.svg")


if __name__ == "__main__":
    main()
