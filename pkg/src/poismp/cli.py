"""Command-line driver: dataset generation, solver runs, comparisons, CSV emission.

Commands
    gen-hawkes        simulate a synthetic network's events to a file
    estimate-network  fit base rates + infectivity from an event file
    pet-run           build/load a tomography instance and reconstruct
    solve             run one solver on a problem file
    compare           run cmp, rb-cmp and md on one problem, aligned CSVs

Options may come from ``--config FILE`` (flat ``key = value`` lines) with
command-line flags taking precedence. Every effective value is echoed as
``#`` comment lines at the top of the output CSV, whose data columns are
``iter,passes,objective,rel_subopt,mass_residual,elapsed_ms`` at full
round-trip precision. Exit codes: 1 for IO/parse errors, 2 for usage errors
and solver stalls.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, fields

import numpy as np

from . import hawkes, pet
from .baselines import BaselineConfig, solve_apg, solve_md, solve_pg
from .cmp import StepsizePolicy, solve_cmp
from .core import PenaltySpec, SolveReport, read_problem
from .errors import DimensionError, DomainError, StallError
from .prox import ProximalSetup
from .rb import BlockPartition, solve_full_rb, solve_rb_cmp

_COMMANDS = ("gen-hawkes", "estimate-network", "pet-run", "solve", "compare")
_SOLVERS = ("cmp", "rb-cmp", "full-rb", "md", "pg", "apg")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str = ""
    solver: str = "cmp"
    policy: str = "auto"
    alpha: float = 1.0
    alpha1: float = 1.0
    alpha2: float = 1.0
    gamma0: float = 1.0
    safety: float = 1.0
    lambda1: float = 0.0
    l0: float = 1.0
    blocks: int = 1
    iters: int = 1000
    seed: int = 0
    report_every: float = 0.0
    input: str = ""
    counts: str = ""
    output: str = ""
    fstar_file: str = ""
    setup: str = "entropy"
    cap: float = 0.0
    users: int = 5
    horizon: float = 200.0
    kernel_rate: float = 1.0
    base_scale: float = 0.5
    infect_scale: float = 0.5
    side: int = 32
    rows: int = 0
    density: float = 0.005
    noise: str = "noiseless"

    def items(self):
        for f in fields(self):
            yield f.name.replace("_", "-"), getattr(self, f.name)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, raw: str):
    name = key.replace("-", "_")
    if name not in _FIELD_TYPES:
        raise UsageError(f"unknown configuration key: {key!r}")
    kind = _FIELD_TYPES[name]
    try:
        if kind == "int":
            return name, int(raw)
        if kind == "float":
            return name, float(raw)
        return name, raw
    except ValueError as exc:
        raise UsageError(f"bad value for {key!r}: {exc}") from exc


def _read_config_file(path: str) -> dict:
    values = {}
    try:
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise UsageError(f"{path}:{lineno}: expected key = value")
                key, _, raw = line.partition("=")
                name, value = _coerce(key.strip(), raw.strip())
                values[name] = value
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from exc
    return values


def parse_config(argv) -> RunConfig:
    """Positional command + flags; flags override --config file values."""
    parser = argparse.ArgumentParser(prog="poismp", add_help=True)
    parser.add_argument("command", choices=_COMMANDS)
    parser.add_argument("--config", default=None)
    for f in fields(RunConfig):
        if f.name == "command":
            continue
        flag = "--" + f.name.replace("_", "-")
        kind = {"int": int, "float": float}.get(f.type, str)
        parser.add_argument(flag, type=kind, default=None)
    ns = parser.parse_args(list(argv))

    config = RunConfig(command=ns.command)
    if ns.config:
        for name, value in _read_config_file(ns.config).items():
            setattr(config, name, value)
    for f in fields(RunConfig):
        if f.name == "command":
            continue
        flag_val = getattr(ns, f.name)
        if flag_val is not None:
            setattr(config, f.name, flag_val)

    if config.solver not in _SOLVERS:
        raise UsageError(f"unknown solver: {config.solver!r}")
    if config.iters < 0:
        raise UsageError("iters must be nonnegative")
    for key in ("alpha", "alpha1", "alpha2", "gamma0", "l0", "kernel_rate",
                "horizon"):
        if getattr(config, key) <= 0:
            raise UsageError(f"{key.replace('_', '-')} must be positive")
    if config.blocks < 1:
        raise UsageError("blocks must be at least 1")
    return config


# -- output --------------------------------------------------------------------


def _write_history_csv(path: str, report: SolveReport, config: RunConfig) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        for key, value in config.items():
            fh.write(f"# {key} = {value}\n")
        fh.write("iter,passes,objective,rel_subopt,mass_residual,elapsed_ms\n")
        for row in report.history:
            rel = "" if row.relative_subopt is None else repr(row.relative_subopt)
            fh.write(f"{row.iteration},{row.effective_passes!r},"
                     f"{row.objective!r},{rel},{row.mass_residual!r},"
                     f"{row.elapsed_ms!r}\n")
    os.replace(tmp, path)


def _write_vector_csv(path: str, values: np.ndarray) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        for v in values:
            fh.write(f"{v!r}\n")
    os.replace(tmp, path)


def _write_matrix_csv(path: str, M: np.ndarray) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        for row in M:
            fh.write(",".join(repr(v) for v in row) + "\n")
    os.replace(tmp, path)


# -- command implementations -----------------------------------------------------


def _policy(config: RunConfig, default: str = "theory") -> StepsizePolicy | None:
    """None for "auto" lets each pipeline pick its documented default."""
    name = default if config.policy == "auto" else config.policy
    if name == "auto":
        return None
    if name == "constant":
        return StepsizePolicy.constant(config.gamma0)
    if name == "line-search":
        return StepsizePolicy.line_search()
    if name == "theory":
        return StepsizePolicy.theory(config.safety)
    raise UsageError(f"unknown policy: {name!r}")


def _fstar(config: RunConfig) -> float | None:
    if not config.fstar_file:
        return None
    with open(config.fstar_file) as fh:
        return float(fh.read().split()[0])


def _report_every(config: RunConfig):
    return config.report_every if config.report_every > 0 else None


def _dispatch_solver(config: RunConfig, problem, solver: str) -> SolveReport:
    policy = _policy(config)
    every = _report_every(config)
    f_star = _fstar(config)
    if solver == "cmp":
        return solve_cmp(problem, alpha=config.alpha, policy=policy,
                         max_iters=config.iters, report_every=every,
                         f_star=f_star)
    if solver == "rb-cmp":
        part = BlockPartition.uniform(problem.m, config.blocks)
        return solve_rb_cmp(problem, part, policy=policy, alpha=config.alpha,
                            max_iters=config.iters, seed=config.seed,
                            report_every=every, f_star=f_star)
    if solver == "full-rb":
        part = BlockPartition.uniform(problem.m, config.blocks)
        return solve_full_rb(problem, part, policy=policy, alpha=config.alpha,
                             max_iters=config.iters, seed=config.seed,
                             report_every=every, f_star=f_star)
    if solver == "md":
        return solve_md(problem, gamma0=config.gamma0, max_iters=config.iters,
                        report_every=every, f_star=f_star)
    if solver == "pg":
        return solve_pg(problem, BaselineConfig(kind="prox_grad", l0=config.l0),
                        max_iters=config.iters, report_every=every, f_star=f_star)
    if solver == "apg":
        return solve_apg(problem, BaselineConfig(kind="acc_prox_grad", l0=config.l0),
                         max_iters=config.iters, report_every=every, f_star=f_star)
    raise UsageError(f"unknown solver: {solver!r}")


def _load_problem(config: RunConfig):
    if not config.input:
        raise UsageError("missing required --input")
    penalty = PenaltySpec.l1(config.lambda1) if config.lambda1 > 0 else PenaltySpec.none()
    cap = config.cap if config.cap > 0 else None
    if config.setup == "entropy":
        setup = ProximalSetup.entropy_capped(cap=cap)
    elif config.setup == "euclidean":
        setup = ProximalSetup.euclidean()
    else:
        raise UsageError(f"unknown setup: {config.setup!r}")
    return read_problem(config.input, penalty=penalty, primal_setup=setup)


def _cmd_solve(config: RunConfig) -> int:
    if not config.output:
        raise UsageError("missing required --output")
    problem = _load_problem(config)
    report = _dispatch_solver(config, problem, config.solver)
    _write_history_csv(config.output, report, config)
    return 0


def _cmd_compare(config: RunConfig) -> int:
    if not config.output:
        raise UsageError("missing required --output")
    problem = _load_problem(config)
    for solver in ("cmp", "rb-cmp", "md"):
        report = _dispatch_solver(config, problem, solver)
        _write_history_csv(f"{config.output}.{solver}.csv", report, config)
    return 0


def _cmd_gen_hawkes(config: RunConfig) -> int:
    if not config.output:
        raise UsageError("missing required --output")
    base, infectivity = hawkes.random_network(
        config.users, seed=config.seed, base_scale=config.base_scale,
        infect_scale=config.infect_scale)
    events = hawkes.simulate_hawkes(base, infectivity, config.horizon,
                                    kernel_rate=config.kernel_rate,
                                    seed=config.seed)
    os.makedirs(config.output, exist_ok=True)
    hawkes.write_events(os.path.join(config.output, "events.txt"), events)
    _write_vector_csv(os.path.join(config.output, "true_base.csv"), base)
    _write_matrix_csv(os.path.join(config.output, "true_infectivity.csv"), infectivity)
    print(f"wrote {len(events)} events for {config.users} users to {config.output}")
    return 0


def _cmd_estimate_network(config: RunConfig) -> int:
    if not config.input:
        raise UsageError("missing required --input")
    if not config.output:
        raise UsageError("missing required --output")
    if config.solver not in ("cmp", "rb-cmp"):
        raise UsageError("estimate-network supports the cmp and rb-cmp solvers")
    events = hawkes.read_events(config.input)
    policy = _policy(config, default="auto")
    estimate = hawkes.estimate_network(
        events, config.lambda1, solver=config.solver,
        kernel_rate=config.kernel_rate, alpha1=config.alpha1,
        alpha2=config.alpha2, max_iters=config.iters, blocks=config.blocks,
        seed=config.seed, policy=policy, report_every=_report_every(config),
        f_star=_fstar(config))
    os.makedirs(config.output, exist_ok=True)
    _write_vector_csv(os.path.join(config.output, "base.csv"), estimate.base)
    _write_matrix_csv(os.path.join(config.output, "infectivity.csv"),
                      estimate.infectivity)
    _write_history_csv(os.path.join(config.output, "history.csv"),
                       estimate.report, config)
    return 0


def _cmd_pet_run(config: RunConfig) -> int:
    if not config.output:
        raise UsageError("missing required --output")
    if config.input:
        if not config.counts:
            raise UsageError("pet-run with --input also needs --counts")
        A = pet.read_matrix(config.input)
        w = pet.read_counts(config.counts)
        instance = pet.PETInstance(A=A, counts=w)
    else:
        rows = config.rows if config.rows > 0 else 2 * config.side * config.side
        instance = pet.desk_instance(side=config.side,
                                     rows_per_pixel=rows / (config.side * config.side),
                                     density=config.density, seed=config.seed,
                                     mode=config.noise)
    policy = _policy(config, default="auto")
    report = pet.solve_pet(instance, alpha=config.alpha, policy=policy,
                           max_iters=config.iters,
                           report_every=_report_every(config))
    os.makedirs(config.output, exist_ok=True)
    _write_history_csv(os.path.join(config.output, "history.csv"), report, config)
    _write_vector_csv(os.path.join(config.output, "reconstruction.csv"),
                      report.final_x)
    return 0


def run(config: RunConfig) -> int:
    handlers = {
        "solve": _cmd_solve,
        "compare": _cmd_compare,
        "gen-hawkes": _cmd_gen_hawkes,
        "estimate-network": _cmd_estimate_network,
        "pet-run": _cmd_pet_run,
    }
    try:
        return handlers[config.command](config)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (OSError, DimensionError, DomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except StallError as exc:
        print(f"solver stalled: {exc}", file=sys.stderr)
        return 2


def main(argv=None) -> int:
    try:
        config = parse_config(sys.argv[1:] if argv is None else argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
