"""Configuration parsing and the experiment command line.

Commands:
    dpsla run --config cfg.json [--out DIR]
    dpsla reproduce {divergence|main|speedup} [--out DIR] [--seed N]
    dpsla oracle --config cfg.json

Config files are JSON with four sections (problem, algorithm, run, output);
unknown keys anywhere are rejected. All defaults match the benchmark
experiment parameters. The environment variable DPSLA_OUT, when set, overrides
the output root directory.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .engine import Dgd, Dpsla, NaivePolyak, run, run_speedup_sweep, sweep_algorithm
from .metrics import write_csv, write_level_gap_csv, write_sweep_csv
from .numerics import Rng
from .problem import ProblemInstance, gen_paper_instance, gen_triangle_demo
from .stepsize import CSchedule, StepsizeConfig

OUT_ENV = "DPSLA_OUT"


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass
class ProblemConfig:
    type: str = "paper"  # paper | triangle | custom_file
    path: str | None = None
    n_agents: int = 4
    dim: int = 6
    rows_per_agent: int = 2
    seed: int = 0
    graph_kind: str = "random"
    edge_prob: float = 0.5
    x0: str = "center"


@dataclass
class AlgorithmConfig:
    name: str = "dpsla"  # dpsla | dgd | naive_polyak
    gamma: float = 1.0
    gamma_bar: float = 1.5
    alpha0: float = 2.0
    c_kind: str = "sqrt"
    c_scale: float = 0.5
    level_init: float = -500.0
    eta_cap: int | None = None
    constraint_beta: str = "raw"
    eps_grad: float = 1e-12
    dgd_scale: float = 2.0
    naive_target: str = "local_min"


@dataclass
class RunSection:
    iterations: int = 300
    record_every: int = 1


@dataclass
class OutputSection:
    directory: str = "out"


@dataclass
class RunConfig:
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    algorithm: AlgorithmConfig = field(default_factory=AlgorithmConfig)
    run: RunSection = field(default_factory=RunSection)
    output: OutputSection = field(default_factory=OutputSection)

    def to_dict(self) -> dict:
        return asdict(self)

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]


_SECTION_FIELDS = {
    "problem": {"type", "path", "n_agents", "dim", "rows_per_agent", "seed",
                "graph_kind", "edge_prob", "x0"},
    "algorithm": {"name", "gamma", "gamma_bar", "alpha0", "c_kind", "c_scale",
                  "level_init", "eta_cap", "constraint_beta", "eps_grad",
                  "dgd_scale", "naive_target"},
    "run": {"iterations", "record_every"},
    "output": {"directory"},
}


def parse_config(text: str) -> RunConfig:
    """Parse and fully validate a JSON config; unknown keys are rejected."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(doc) - set(_SECTION_FIELDS)
    if unknown:
        raise ConfigError(f"unknown config section(s): {sorted(unknown)}")
    cfg = RunConfig()
    for section, allowed in _SECTION_FIELDS.items():
        sub = doc.get(section, {})
        if not isinstance(sub, dict):
            raise ConfigError(f"{section}: must be an object")
        extra = set(sub) - allowed
        if extra:
            raise ConfigError(f"{section}: unknown key(s) {sorted(extra)}")
        target = getattr(cfg, section)
        for key, value in sub.items():
            setattr(target, key, value)
    _validate(cfg)
    return cfg


def _require(cond: bool, field_name: str, msg: str) -> None:
    if not cond:
        raise ConfigError(f"{field_name}: {msg}")


def _validate(cfg: RunConfig) -> None:
    p, a, r = cfg.problem, cfg.algorithm, cfg.run
    _require(p.type in ("paper", "triangle", "custom_file"), "problem.type",
             "must be paper, triangle, or custom_file")
    if p.type == "custom_file":
        _require(bool(p.path), "problem.path", "required for custom_file problems")
    _require(p.n_agents >= 2, "problem.n_agents", "must be >= 2")
    _require(p.dim >= 1, "problem.dim", "must be >= 1")
    _require(p.rows_per_agent >= 1, "problem.rows_per_agent", "must be >= 1")
    _require(0 <= int(p.seed) < 2 ** 64, "problem.seed", "must be a 64-bit unsigned integer")
    _require(p.graph_kind in ("triangle", "complete", "ring", "path", "random"),
             "problem.graph_kind", "unknown graph kind")
    _require(0.0 < p.edge_prob <= 1.0, "problem.edge_prob", "must be in (0, 1]")
    _require(p.x0 in ("center", "uniform"), "problem.x0", "must be center or uniform")

    _require(a.name in ("dpsla", "dgd", "naive_polyak"), "algorithm.name",
             "must be dpsla, dgd, or naive_polyak")
    _require(0.0 < a.gamma, "algorithm.gamma", "must be positive")
    _require(a.gamma < a.gamma_bar, "algorithm.gamma_bar", "must exceed gamma")
    _require(a.gamma_bar < 2.0, "algorithm.gamma_bar", "must be below 2")
    _require(a.alpha0 > 0, "algorithm.alpha0", "must be positive")
    _require(a.c_kind in ("sqrt", "constant"), "algorithm.c_kind", "must be sqrt or constant")
    _require(a.c_scale > 0, "algorithm.c_scale", "must be positive")
    _require(math.isfinite(a.level_init), "algorithm.level_init", "must be finite")
    _require(a.eta_cap is None or int(a.eta_cap) >= 1, "algorithm.eta_cap",
             "must be >= 1 when set")
    _require(a.constraint_beta in ("raw", "clamped"), "algorithm.constraint_beta",
             "must be raw or clamped")
    _require(a.eps_grad > 0, "algorithm.eps_grad", "must be positive")
    _require(a.dgd_scale > 0, "algorithm.dgd_scale", "must be positive")
    _require(a.naive_target in ("local_min", "oracle_fi_star"), "algorithm.naive_target",
             "must be local_min or oracle_fi_star")

    _require(r.iterations >= 1, "run.iterations", "must be >= 1")
    _require(r.record_every >= 1, "run.record_every", "must be >= 1")
    _require(bool(cfg.output.directory), "output.directory", "must be nonempty")


def build_instance(cfg: RunConfig) -> ProblemInstance:
    p = cfg.problem
    if p.type == "triangle":
        return gen_triangle_demo()
    if p.type == "custom_file":
        return ProblemInstance.from_json(Path(p.path).read_text(encoding="utf-8"))
    rng = Rng(p.seed)
    return gen_paper_instance(n=p.n_agents, dim=p.dim, rows_per_agent=p.rows_per_agent,
                              rng=rng, graph_kind=p.graph_kind, edge_prob=p.edge_prob)


def build_algorithm(cfg: RunConfig):
    a = cfg.algorithm
    if a.name == "dpsla":
        step = StepsizeConfig(
            gamma=a.gamma, gamma_bar=a.gamma_bar, alpha0=a.alpha0,
            c_schedule=CSchedule(kind=a.c_kind, scale=a.c_scale),
            eps_grad=a.eps_grad, constraint_beta=a.constraint_beta,
        )
        return Dpsla(stepsize=step, level_init=a.level_init,
                     eta_cap=None if a.eta_cap is None else int(a.eta_cap))
    if a.name == "dgd":
        return Dgd(scale=a.dgd_scale)
    return NaivePolyak(target=a.naive_target)


def _out_dir(cfg_dir: str, override: str | None) -> Path:
    if override:
        return Path(override)
    root = os.environ.get(OUT_ENV)
    if root:
        return Path(root) / cfg_dir
    return Path(cfg_dir)


def _trace_invariants(trace) -> dict:
    """Post-run invariant summary recorded in the manifest."""
    recs = trace.records
    levels_ok = True
    has_levels = any(l is not None for l in recs[0].level)
    if has_levels:
        for i in range(trace.n_agents):
            seq = [r.level[i] for r in recs]
            levels_ok &= all(a <= b for a, b in zip(seq, seq[1:]))
    alphas_ok = True
    alpha_rows = [r.alpha for r in recs[1:]]
    if alpha_rows and all(a is not None for a in alpha_rows[0]):
        for i in range(trace.n_agents):
            seq = [row[i] for row in alpha_rows]
            alphas_ok &= all(a >= b for a, b in zip(seq, seq[1:]))
    return {
        "level_monotone": bool(levels_ok) if has_levels else None,
        "alpha_monotone": bool(alphas_ok) if alpha_rows else None,
        "diverged": bool(recs[-1].diverged),
    }


def _write_manifest(path: Path, cfg: RunConfig, inst: ProblemInstance,
                    outputs: list[str], extra: dict | None = None) -> None:
    doc = {
        "config": cfg.to_dict(),
        "config_hash": cfg.config_hash(),
        "oracle": inst.optimum.to_dict() if inst.optimum is not None else None,
        "outputs": outputs,
        "metrics_notes": {
            "residual": "sum-form objective gap at the agents' mean state",
            "consensus_error": "mean distance of agent states to their average",
        },
    }
    if extra:
        doc.update(extra)
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def cmd_run(config_path: str, out_override: str | None = None) -> int:
    text = Path(config_path).read_text(encoding="utf-8")
    cfg = parse_config(text)
    inst = build_instance(cfg)
    inst.ensure_optimum()
    alg = build_algorithm(cfg)
    trace = run(inst, alg, cfg.run.iterations, seed=cfg.problem.seed, x0=cfg.problem.x0)
    out = _out_dir(cfg.output.directory, out_override)
    out.mkdir(parents=True, exist_ok=True)
    trace_path = out / "trace.csv"
    write_csv(trace, trace_path, record_every=cfg.run.record_every)
    _write_manifest(out / "manifest.json", cfg, inst, ["trace.csv"],
                    extra={"invariants": _trace_invariants(trace), "seed": cfg.problem.seed})
    return 0


def cmd_oracle(config_path: str) -> int:
    cfg = parse_config(Path(config_path).read_text(encoding="utf-8"))
    inst = build_instance(cfg)
    orc = inst.ensure_optimum()
    print(json.dumps(orc.to_dict(), sort_keys=True))
    return 0


def cmd_reproduce(which: str, out_override: str | None = None, seed: int = 0) -> int:
    """Re-run one of the three benchmark experiments with baked-in parameters."""
    if which == "divergence":
        cfg = parse_config(json.dumps({"problem": {"type": "triangle"},
                                       "run": {"iterations": 500},
                                       "output": {"directory": "out_divergence"}}))
        inst = build_instance(cfg)
        inst.ensure_optimum(1e-11)
        out = _out_dir(cfg.output.directory, out_override)
        out.mkdir(parents=True, exist_ok=True)
        tr_dgd = run(inst, Dgd(scale=2.0), 500, seed=seed)
        tr_naive = run(inst, NaivePolyak(target="local_min"), 500, seed=seed)
        write_csv(tr_dgd, out / "dgd_trace.csv")
        write_csv(tr_naive, out / "naive_trace.csv")
        _write_manifest(out / "manifest.json", cfg, inst,
                        ["dgd_trace.csv", "naive_trace.csv"], extra={"seed": seed})
        return 0
    if which == "main":
        cfg = parse_config(json.dumps({"problem": {"seed": seed},
                                       "output": {"directory": "out_main"}}))
        inst = build_instance(cfg)
        inst.ensure_optimum()
        out = _out_dir(cfg.output.directory, out_override)
        out.mkdir(parents=True, exist_ok=True)
        tr_dpsla = run(inst, build_algorithm(cfg), 300, seed=seed)
        tr_dgd = run(inst, Dgd(scale=2.0), 300, seed=seed)
        write_csv(tr_dpsla, out / "dpsla_trace.csv")
        write_csv(tr_dgd, out / "dgd_trace.csv")
        write_level_gap_csv(inst, tr_dpsla, out / "level_gap.csv")
        _write_manifest(out / "manifest.json", cfg, inst,
                        ["dpsla_trace.csv", "dgd_trace.csv", "level_gap.csv"],
                        extra={"seed": seed, "invariants": _trace_invariants(tr_dpsla)})
        return 0
    if which == "speedup":
        out = _out_dir("out_speedup", out_override)
        out.mkdir(parents=True, exist_ok=True)
        alg = sweep_algorithm()
        result = run_speedup_sweep([4, 8, 16, 32], 600, list(range(10)), alg=alg)
        write_sweep_csv(result.rows, out / "speedup.csv")
        means_lines = ["n,mean_gap"] + [f"{n},{v:.17g}" for n, v in sorted(result.means.items())]
        (out / "speedup_mean.csv").write_text("\n".join(means_lines) + "\n", encoding="utf-8")
        meta = {
            "experiment": "speedup",
            "T": 600,
            "seeds": list(range(10)),
            "agent_counts": [4, 8, 16, 32],
            "algorithm": alg.describe(),
            "gap": "average-form min residual over the second half of the run",
            "outputs": ["speedup.csv", "speedup_mean.csv"],
        }
        (out / "manifest.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n",
                                           encoding="utf-8")
        return 0
    raise ConfigError(f"unknown reproduction target {which!r}")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="dpsla", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment from a JSON config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None)

    p_rep = sub.add_parser("reproduce", help="re-run a benchmark experiment")
    p_rep.add_argument("which", choices=["divergence", "main", "speedup"])
    p_rep.add_argument("--out", default=None)
    p_rep.add_argument("--seed", type=int, default=0)

    p_orc = sub.add_parser("oracle", help="print the reference optimum as JSON")
    p_orc.add_argument("--config", required=True)

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args.config, args.out)
        if args.command == "reproduce":
            return cmd_reproduce(args.which, args.out, args.seed)
        if args.command == "oracle":
            return cmd_oracle(args.config)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
