"""memra command line: check, analyze and simulate netlists.

Exit codes: 0 ok, 1 parse error, 2 validation error, 3 solve or
initialization failure, 4 integration failure. Usage errors exit with 64.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

from . import newton
from .analysis import DEFAULT_RANK_TOL, analyze_circuit, topology_summary
from .errors import InconsistentInitialDataError, InvalidCircuitError, MemraError, NetlistError
from .graph import topology
from .model import assemble
from .netlist import errors_only, parse_netlist, validate
from .sim import consistent_initialization, integrate

EXIT_OK, EXIT_PARSE, EXIT_VALIDATE, EXIT_SOLVE, EXIT_INTEGRATE = 0, 1, 2, 3, 4
EXIT_USAGE = 64
RANK_TOL_ENV = "MEMRA_RANK_TOL"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    subcommand: str
    netlists: list
    out: Optional[str] = None
    tol: float = newton.DEFAULT_TOL
    rank_tol: float = DEFAULT_RANK_TOL
    t0: float = 0.0
    t1: float = 1.0
    h: float = 1e-3
    guess: dict = field(default_factory=dict)
    format: Optional[str] = None
    jobs: int = 1

    def validate(self):
        if not (self.tol > 0 and self.rank_tol > 0):
            raise UsageError("tolerances must be positive")
        if not self.t1 > self.t0:
            raise UsageError("--t1 must exceed --t0")
        if not self.h > 0:
            raise UsageError("--h must be positive")
        if self.jobs < 1:
            raise UsageError("--jobs must be at least 1")
        if self.subcommand == "simulate" and len(self.netlists) != 1:
            raise UsageError("simulate takes exactly one netlist")


def _guess_pair(text):
    name, sep, value = text.partition("=")
    if not sep or not name:
        raise argparse.ArgumentTypeError(f"expected name=value, got {text!r}")
    try:
        return name, float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number in {text!r}") from None


def _default_rank_tol():
    env = os.environ.get(RANK_TOL_ENV)
    if env is None:
        return DEFAULT_RANK_TOL
    try:
        return float(env)
    except ValueError:
        raise UsageError(f"{RANK_TOL_ENV}={env!r} is not a number") from None


def build_parser(rank_tol_default=DEFAULT_RANK_TOL) -> argparse.ArgumentParser:
    p = _Parser(prog="memra", description="Structural analysis and simulation of memristive circuits.")
    p.add_argument("subcommand", choices=("check", "analyze", "simulate"))
    p.add_argument("netlists", nargs="+", metavar="netlist")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--tol", type=float, default=newton.DEFAULT_TOL, help="Newton residual tolerance")
    p.add_argument("--rank-tol", type=float, default=rank_tol_default,
                   help=f"relative corank tolerance (default from ${RANK_TOL_ENV} or 1e-10)")
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--t1", type=float, default=1.0)
    p.add_argument("--h", type=float, default=1e-3, help="implicit Euler step")
    p.add_argument("--guess", nargs="+", type=_guess_pair, default=[], metavar="name=value",
                   help="charge/flux per device: equilibrium guess or initial state")
    p.add_argument("--format", choices=("json", "csv", "human"))
    p.add_argument("--jobs", type=int, default=1, help="parallel workers for multiple netlists")
    return p


def parse_config(argv) -> RunConfig:
    ns = build_parser(_default_rank_tol()).parse_args(argv)
    cfg = RunConfig(ns.subcommand, ns.netlists, ns.out, ns.tol, ns.rank_tol, ns.t0, ns.t1, ns.h,
                    dict(ns.guess), ns.format, ns.jobs)
    cfg.validate()
    return cfg


# -- subcommands --------------------------------------------------------------------
# Each returns (exit_code, output_text, stderr_text) so batch runs can merge them.

def _load(path):
    with open(path, encoding="utf-8") as fh:
        return parse_netlist(fh.read())


def _human_summary(summary, diagnostics):
    lines = [f"n={summary['n']} m={summary['m']} k={summary['k']}"]
    lines.append("counts: " + " ".join(f"{k}={v}" for k, v in summary["counts"].items()))
    for name, present in summary["flags"].items():
        lines.append(f"{name}: {'present' if present else 'absent'}")
    lines.extend(str(d) for d in diagnostics)
    return "\n".join(lines) + "\n"


def cmd_check(path, cfg: RunConfig):
    try:
        circuit = _load(path)
    except (OSError, NetlistError) as err:
        return EXIT_PARSE, "", f"{path}: {err}\n"
    diags = validate(circuit)
    errors = errors_only(diags)
    summary = None if errors else topology_summary(circuit, topology(circuit))
    if cfg.format == "json":
        doc = {"circuit": circuit.name, "valid": not errors,
               "diagnostics": [{"severity": d.severity, "code": d.code, "device": d.device,
                                "message": d.message} for d in diags],
               "topology": summary}
        text = json.dumps(doc, indent=2) + "\n"
    elif errors:
        text = "".join(f"{d}\n" for d in diags)
    else:
        text = f"circuit {circuit.name}\n" + _human_summary(summary, diags)
    return (EXIT_VALIDATE if errors else EXIT_OK), text, ""


def _human_report(d):
    eq = d["equilibrium"]
    lines = [f"circuit {d['circuit']}", f"equilibrium: {eq['status']}"]
    if eq["status"] != "ok":
        lines.append(f"  {eq.get('error', '')}")
    for key in ("state_dimension", "order_of_complexity", "nondegenerate", "regular_equilibrium",
                "null_multiplicity", "corank_K"):
        lines.append(f"{key}: {d[key]}")
    failed = d["regular_equilibrium_ledger"].get("failed") or []
    if failed:
        lines.append("regularity fails: " + ", ".join(failed))
    if d["finite_spectrum"] is not None:
        lines.append("finite spectrum: " + ", ".join(f"{complex(re, im):.12g}" for re, im in d["finite_spectrum"]))
    return "\n".join(lines) + "\n"


def cmd_analyze(path, cfg: RunConfig):
    try:
        circuit = _load(path)
    except (OSError, NetlistError) as err:
        return EXIT_PARSE, "", f"{path}: {err}\n"
    try:
        report = analyze_circuit(circuit, cfg.guess or None, newton_tol=cfg.tol, rank_tol=cfg.rank_tol)
    except InvalidCircuitError as err:
        return EXIT_VALIDATE, "", f"{path}: {err}\n"
    except (MemraError, KeyError) as err:
        return EXIT_SOLVE, "", f"{path}: {err}\n"
    doc = report.to_dict()
    if cfg.format == "human":
        text = _human_report(doc)
    else:
        text = json.dumps(doc, indent=2) + "\n"
    code = EXIT_OK if report.equilibrium.get("status") == "ok" else EXIT_SOLVE
    return code, text, ""


def cmd_simulate(path, cfg: RunConfig):
    try:
        circuit = _load(path)
    except (OSError, NetlistError) as err:
        return EXIT_PARSE, "", f"{path}: {err}\n"
    try:
        model = assemble(circuit)
    except InvalidCircuitError as err:
        return EXIT_VALIDATE, "", f"{path}: {err}\n"
    lay = model.layout
    x_state = [0.0] * lay.n_diff
    try:
        for name, value in cfg.guess.items():
            x_state[model.state_index(name)] = value
    except KeyError as err:
        return EXIT_SOLVE, "", f"{path}: {err}\n"
    try:
        x0 = consistent_initialization(model, x_state[:lay.n_mc], x_state[lay.n_mc:], cfg.t0, cfg.tol)
    except (InconsistentInitialDataError, MemraError) as err:
        return EXIT_SOLVE, "", f"{path}: {err}\n"
    traj = integrate(model, x0, (cfg.t0, cfg.t1), cfg.h, tol=cfg.tol)
    buf = io.StringIO()
    traj.write_csv(buf)
    if traj.ok:
        return EXIT_OK, buf.getvalue(), ""
    return EXIT_INTEGRATE, buf.getvalue(), f"{path}: integration failed at t={traj.times[-1] if len(traj.times) else cfg.t0!r}: {traj.failure}\n"


COMMANDS = {"check": cmd_check, "analyze": cmd_analyze, "simulate": cmd_simulate}


def _run_one(args):
    path, cfg = args
    return COMMANDS[cfg.subcommand](path, cfg)


def _merge(cfg, results):
    """Combine per-netlist outputs; JSON batches become one object keyed by path."""
    code = max(r[0] for r in results)
    err = "".join(r[2] for r in results)
    if len(results) == 1:
        return code, results[0][1], err
    as_json = cfg.format == "json" or (cfg.subcommand == "analyze" and cfg.format is None)
    if as_json:
        merged = {path: (json.loads(r[1]) if r[1] else None) for path, r in zip(cfg.netlists, results)}
        return code, json.dumps(merged, indent=2) + "\n", err
    text = "".join(f"== {path}\n{r[1]}" for path, r in zip(cfg.netlists, results))
    return code, text, err


def run(cfg: RunConfig):
    tasks = [(path, cfg) for path in cfg.netlists]
    if cfg.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_run_one, tasks))
    else:
        results = [_run_one(t) for t in tasks]
    return _merge(cfg, results)


def main(argv=None) -> int:
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
    except UsageError as err:
        print(f"memra: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    code, text, err = run(cfg)
    if err:
        sys.stderr.write(err)
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
