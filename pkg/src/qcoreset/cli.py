"""qcoreset command line: gen, coreset, eval, bench.

Exit codes: 0 success, 2 bad arguments, 3 contract violation or more flagged
subroutine failures than ``--failure-budget``.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from . import eval as ev
from . import io
from .core import ClusteringParams, ContractViolation
from .pipeline import PipelineConfig, run_pipeline
from .qsim import Constants, Noise, OracleMode, QueryLedger, SubroutineConfig, SubroutineFailure

EXIT_OK, EXIT_ARGS, EXIT_RUNTIME = 0, 2, 3


@dataclass
class RunConfig:
    subcommand: str
    input: str | None = None
    output: str | None = None
    coreset: str | None = None
    format: str | None = None
    generator: str = "blobs"
    n: int = 10_000
    d: int = 10
    k: int = 5
    z: float = 2.0
    eps: float = 0.2
    seed: int = 0
    oracle_mode: str = OracleMode.SIMULATED_QUANTUM.value
    noise: str = Noise.NONE.value
    delta: float = 1e-3
    jl_dim: int | None = None
    probes: int = 100
    slack: float = 4.0
    t_sample: int | None = None
    failure_budget: int = 0
    inject_failures: bool = False
    axis: str = "n"
    grid: list = field(default_factory=list)
    constants: dict = field(default_factory=lambda: asdict(Constants()))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})

    def params(self) -> ClusteringParams:
        return ClusteringParams(self.k, self.z, self.eps)

    def subroutines(self) -> SubroutineConfig:
        return SubroutineConfig(delta=self.delta, seed=self.seed, noise=Noise(self.noise),
                                mode=OracleMode(self.oracle_mode), inject_failures=self.inject_failures,
                                constants=Constants(**self.constants))


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", type=int, default=10_000)
    common.add_argument("--d", type=int, default=10)
    common.add_argument("--k", type=int, default=5)
    common.add_argument("--z", type=float, default=2.0)
    common.add_argument("--eps", type=float, default=0.2)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--oracle-mode", choices=[m.value for m in OracleMode], default=OracleMode.SIMULATED_QUANTUM.value)
    common.add_argument("--noise", choices=[m.value for m in Noise], default=Noise.NONE.value)
    common.add_argument("--delta", type=float, default=1e-3)
    common.add_argument("--input")
    common.add_argument("--output")
    common.add_argument("--format", choices=["csv", "json", "bin"])
    common.add_argument("--jl-dim", type=int)
    common.add_argument("--probes", type=int, default=100)
    common.add_argument("--slack", type=float, default=4.0)
    common.add_argument("--t-sample", type=int)
    common.add_argument("--failure-budget", type=int, default=0)
    common.add_argument("--inject-failures", action="store_true")
    for c in ("samp", "cnt", "all", "sum", "ae"):
        common.add_argument(f"--c-{c}", type=float, default=1.0)

    p = argparse.ArgumentParser(prog="qcoreset", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="subcommand", required=True)
    g = sub.add_parser("gen", parents=[common], help="write a synthetic dataset")
    kind = g.add_mutually_exclusive_group()
    kind.add_argument("--blobs", dest="generator", action="store_const", const="blobs")
    kind.add_argument("--uniform", dest="generator", action="store_const", const="uniform")
    kind.add_argument("--skewed", dest="generator", action="store_const", const="skewed")
    g.set_defaults(generator="blobs")
    sub.add_parser("coreset", parents=[common], help="build a coreset of --input")
    e = sub.add_parser("eval", parents=[common], help="probe the distortion of --coreset against --input")
    e.add_argument("--coreset", required=True)
    b = sub.add_parser("bench", parents=[common], help="ledger scaling over a grid of n or k")
    b.add_argument("--axis", choices=["n", "k"], default="n")
    b.add_argument("--grid", type=int, nargs="+")
    for sp in (e, b):
        sp.add_argument("--generator", choices=ev.GENERATORS, default="blobs")
    return p


def parse_config(argv) -> RunConfig:
    ns = _parser().parse_args(argv)
    raw = vars(ns)
    raw["constants"] = {f"c_{c}": raw.pop(f"c_{c}") for c in ("samp", "cnt", "all", "sum", "ae")}
    raw["grid"] = raw.get("grid") or []
    return RunConfig.from_dict(raw)


def _data_format(cfg: RunConfig) -> str:
    fmt = cfg.format or "csv"
    if fmt == "json":
        raise ContractViolation("--format json applies to reports; datasets and coresets are csv or bin")
    return fmt


def _require(path: str | None, flag: str) -> str:
    if not path:
        raise ContractViolation(f"{flag} is required")
    return path


def cmd_gen(cfg: RunConfig) -> dict:
    spec = ev.BenchSpec(cfg.generator, cfg.n, cfg.d, cfg.k, cfg.z, cfg.eps, (cfg.seed,))
    D = ev.gen_dataset(spec, cfg.seed)
    io.write_dataset(D, _require(cfg.output, "--output"), _data_format(cfg))
    return {"n": D.n, "d": D.d, "output": cfg.output}


def cmd_coreset(cfg: RunConfig) -> dict:
    D = io.read_dataset(_require(cfg.input, "--input"))
    out = _require(cfg.output, "--output")
    res = run_pipeline(D, cfg.params(), cfg.subroutines(), QueryLedger(),
                       PipelineConfig(jl_dim=cfg.jl_dim, t_sample=cfg.t_sample))
    io.write_coreset(res.coreset, out, _data_format(cfg))
    metrics = {"config": cfg.to_dict(), **res.metrics()}
    ev.write_json(metrics, Path(out).with_suffix(".metrics.json"))
    return metrics


def cmd_eval(cfg: RunConfig) -> dict:
    D = io.read_dataset(_require(cfg.input, "--input"))
    S = io.read_coreset(cfg.coreset)
    rep = ev.probe_distortion(D, S, cfg.params(), cfg.probes, cfg.seed)
    out = rep.to_dict(timings=False)
    out["slack"] = cfg.slack
    out["within_slack"] = bool(out["max_distortion"] <= cfg.slack * cfg.eps)
    out["run"] = cfg.to_dict()
    if cfg.output:
        if (cfg.format or "json") == "csv":
            ev.write_rows_csv(rep.distortions, cfg.output)
        else:
            ev.write_json(out, cfg.output)
    return out


def cmd_bench(cfg: RunConfig) -> dict:
    default = [2**e for e in range(10, 15)] if cfg.axis == "n" else [2, 4, 8, 16]
    grid = cfg.grid or default
    specs = []
    for v in grid:
        n, k = (v, cfg.k) if cfg.axis == "n" else (cfg.n, v)
        specs.append(ev.BenchSpec(cfg.generator, n, cfg.d, k, cfg.z, cfg.eps, (cfg.seed,)))
    table = ev.scaling_experiment(specs, cfg.subroutines(), cfg.axis,
                                  PipelineConfig(jl_dim=cfg.jl_dim, t_sample=cfg.t_sample), cfg.seed)
    for r in table.rows:
        r.pop("seconds")
    out = {**table.to_dict(), "run": cfg.to_dict()}
    if cfg.output:
        if (cfg.format or "json") == "csv":
            ev.write_rows_csv(table.rows, cfg.output)
        else:
            ev.write_json(out, cfg.output)
        ev.plot_scaling(table, Path(cfg.output).with_suffix(".svg"))
    return out


COMMANDS = {"gen": cmd_gen, "coreset": cmd_coreset, "eval": cmd_eval, "bench": cmd_bench}


def main(argv=None) -> int:
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
    except SystemExit as e:
        return EXIT_ARGS if e.code else EXIT_OK
    try:
        cfg.params()
        cfg.subroutines()
        if cfg.jl_dim is not None and cfg.jl_dim < 1 or cfg.probes < 1 or cfg.n < 1:
            raise ContractViolation("--jl-dim, --probes and --n must be positive")
    except (ContractViolation, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ARGS
    try:
        result = COMMANDS[cfg.subcommand](cfg)
    except (ContractViolation, io.FormatError, SubroutineFailure, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    failures = int(result.get("failures", 0))
    failures += sum(int(r.get("failures", 0)) for r in result.get("rows", []))
    summary = {k: v for k, v in result.items() if isinstance(v, (int, float, str, bool))}
    print(json.dumps(summary, sort_keys=True, default=str))
    if failures > cfg.failure_budget:
        print(f"error: {failures} flagged subroutine failures exceed budget {cfg.failure_budget}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
