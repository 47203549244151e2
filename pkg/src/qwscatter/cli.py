"""
Command-line front end.

    qwscatter simulate      --graph F --steps N [--monitor A,B] [--start A,B]
    qwscatter scatter       --graph F --samples N [--direction left|right]
    qwscatter hitting-time  --graph F --nmax N
    qwscatter bound-states  --graph F
    qwscatter tri-check     --graph F [--samples N]
    qwscatter self-test     [--seed S]

Every subcommand that needs a graph takes either ``--graph PATH`` or
``--builtin NAME`` (``diamond:<phi>`` or ``line:<t>,<r>[,<length>]``).
Numbers are written with 12 significant digits so that repeated runs give
byte-identical output. Exit status is 0 on success, 1 when a computation
fails, 2 on a usage error.
"""

from __future__ import annotations

import argparse
import ast
import csv
import io
import json
import math
import operator
import sys
from dataclasses import dataclass, field

import numpy as np

from . import oracles, selftest
from .graph_model import (
    TAIL_IN, TAIL_OUT, GraphFormatError, GraphValidationError, TailedGraph,
    load_graph, truncate,
)
from .scattering import (
    ConvergenceError, EigensolverError, IllConditionedError, UndefinedHittingTimeError,
    amplitudes_on, build_problem, hitting_statistics, taylor_coefficients,
)
from .step_operator import WalkState, assemble
from .symmetry import bound_state_reversal, check_invariance, verify_transmission_symmetry
from .walk_engine import (
    NotOnTailError, WindowTooSmallError, distribution, entry_state, evolve, monitored_walk,
)

COMPUTATION_ERRORS = (
    ConvergenceError, EigensolverError, IllConditionedError, NotOnTailError,
    WindowTooSmallError, oracles.PoleError, np.linalg.LinAlgError,
)


class UsageError(Exception):
    pass


def fmt(x: float) -> str:
    return f"{x:.12g}"


def rounded(x: float) -> float:
    return float(fmt(x))


def cplx(z: complex) -> list[float]:
    return [rounded(z.real), rounded(z.imag)]


# ---------------------------------------------------------------------------
# Numeric arguments: plain numbers or small expressions such as pi/4, 1/sqrt(2)

_BINARY = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}
_NAMES = {"pi": math.pi, "e": math.e, "j": 1j, "i": 1j}
_FUNCS = {"sqrt": np.sqrt, "exp": np.exp, "cos": np.cos, "sin": np.sin}


def _eval(node):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float, complex)):
        return node.value
    if isinstance(node, ast.BinOp) and type(node.op) in _BINARY:
        return _BINARY[type(node.op)](_eval(node.left), _eval(node.right))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
        return _UNARY[type(node.op)](_eval(node.operand))
    if isinstance(node, ast.Name) and node.id in _NAMES:
        return _NAMES[node.id]
    if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
            and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords):
        return complex(_FUNCS[node.func.id](_eval(node.args[0])))
    raise ValueError("unsupported expression")


def number(text: str) -> complex:
    try:
        return complex(_eval(ast.parse(text.strip(), mode="eval").body))
    except (SyntaxError, ValueError, TypeError, ZeroDivisionError):
        raise UsageError(f"cannot read number {text!r}") from None


def real(text: str) -> float:
    z = number(text)
    if z.imag != 0:
        raise UsageError(f"expected a real number, got {text!r}")
    return z.real


def builtin_graph(spec: str, phi: float | None = None) -> TailedGraph:
    name, _, rest = spec.partition(":")
    if name == "diamond":
        value = real(rest) if rest else 0.0
        return oracles.build_diamond(value if phi is None else phi)
    if phi is not None:
        raise UsageError("--phi only applies to the diamond graph")
    if name == "line":
        parts = [p for p in rest.split(",") if p]
        if len(parts) not in (2, 3):
            raise UsageError("expected line:<t>,<r>[,<length>]")
        length = 1
        if len(parts) == 3:
            length = int(real(parts[2]))
            if length < 1:
                raise UsageError("line length must be positive")
        try:
            return oracles.build_line(number(parts[0]), number(parts[1]), length)
        except GraphValidationError as exc:
            raise UsageError(str(exc)) from None
    raise UsageError(f"unknown builtin graph {name!r} (known: diamond, line)")


def edge_arg(text: str) -> tuple[str, str]:
    parts = text.split(",")
    if len(parts) != 2 or not all(parts):
        raise UsageError(f"expected an edge as A,B, got {text!r}")
    return parts[0], parts[1]


# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    command: str
    graph: str | None = None
    builtin: str | None = None
    steps: int = 0
    nmax: int = 50
    samples: int = 64
    phi: float | None = None
    direction: str = "left"
    monitor: list = field(default_factory=list)
    start: tuple | None = None
    fmt: str = "csv"
    out: str | None = None
    seed: int = 0

    def __post_init__(self):
        if self.fmt not in ("csv", "json"):
            raise UsageError(f"unknown format {self.fmt!r}")
        for name in ("nmax", "samples"):
            if getattr(self, name) < 1:
                raise UsageError(f"--{name} must be positive")
        if self.steps < 0:
            raise UsageError("--steps must be nonnegative")
        if self.graph is not None and self.builtin is not None:
            raise UsageError("give either --graph or --builtin, not both")

    def load(self) -> TailedGraph:
        if self.builtin is not None:
            return builtin_graph(self.builtin, self.phi)
        if self.graph is None:
            raise UsageError("a graph is required (--graph PATH or --builtin NAME)")
        if self.phi is not None:
            raise UsageError("--phi only applies to the diamond graph")
        try:
            return load_graph(self.graph)
        except OSError as exc:
            raise UsageError(f"cannot read {self.graph}: {exc.strerror}") from None
        except (GraphFormatError, GraphValidationError) as exc:
            raise UsageError(f"{self.graph}: {exc}") from None


# ---------------------------------------------------------------------------
# Output

@dataclass
class Table:
    columns: list[str]
    rows: list[list]


def write_csv(sections: list[Table]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for k, table in enumerate(sections):
        if k:
            buf.write("\n")
        writer.writerow(table.columns)
        for row in table.rows:
            writer.writerow([fmt(x) if isinstance(x, float) else x for x in row])
    return buf.getvalue()


def write_json(payload) -> str:
    return json.dumps(payload, indent=2) + "\n"


def summary(pairs) -> Table:
    return Table(["quantity", "value"], [list(p) for p in pairs])


# ---------------------------------------------------------------------------
# Subcommands; each returns (csv sections, json payload)

def _tail_reach(edge) -> int:
    reach = 0
    for label in edge:
        side, _, d = label.partition(":")
        if side in (TAIL_IN, TAIL_OUT) and d.isdigit():
            reach = max(reach, int(d))
    return reach


def cmd_simulate(cfg: RunConfig):
    graph = cfg.load()
    start = cfg.start
    length = cfg.steps + 2 + (_tail_reach(start) if start else 0)
    basis = truncate(graph, length)
    U = assemble(graph, basis)
    if start is None:
        psi = entry_state(basis)
    else:
        if start not in basis:
            raise UsageError(f"start edge {start} is not an edge of the graph")
        psi = WalkState.on_edge(basis, start)
    if cfg.monitor:
        try:
            records = monitored_walk(U, psi, cfg.monitor, max(cfg.steps, 1), keep_states=False)
        except KeyError as exc:
            raise UsageError(str(exc.args[0])) from None
        records = records[: cfg.steps]
        rows = [[r.n, float(r.p_survive), float(r.q_arrive)] for r in records]
        table = Table(["n", "p_survive", "q_arrive"], rows)
        payload = {"monitored": [list(e) for e in cfg.monitor],
                   "records": [{"n": r.n, "p_survive": rounded(r.p_survive),
                                "q_arrive": rounded(r.q_arrive)} for r in records]}
        return [table], payload
    final = evolve(U, psi, cfg.steps)
    dist = distribution(final)
    rows = [[f"{a},{b}", float(p)] for (a, b), p in dist.items()]
    payload = {"steps": cfg.steps,
               "distribution": [{"edge": [a, b], "probability": rounded(p)}
                                for (a, b), p in dist.items()]}
    return [Table(["edge", "probability"], rows)], payload


def cmd_scatter(cfg: RunConfig):
    problem = build_problem(cfg.load(), cfg.direction)
    thetas = 2 * np.pi * np.arange(cfg.samples) / cfg.samples
    t, r = amplitudes_on(problem, np.exp(1j * thetas))
    norm = np.abs(t) ** 2 + np.abs(r) ** 2
    rows = [[float(th), float(a.real), float(a.imag), float(b.real), float(b.imag), float(n)]
            for th, a, b, n in zip(thetas, t, r, norm)]
    cols = ["theta", "re_t", "im_t", "re_r", "im_r", "norm"]
    payload = {"direction": cfg.direction,
               "samples": [dict(zip(cols, map(rounded, row))) for row in rows]}
    return [Table(cols, rows)], payload


def cmd_hitting_time(cfg: RunConfig):
    series = taylor_coefficients(build_problem(cfg.load()), cfg.nmax)
    q = series.q
    try:
        stats = hitting_statistics(series)
        p_out, h, tail = stats.p_out, stats.h, stats.tail_bound
        p_int = stats.p_out_integral
    except UndefinedHittingTimeError as exc:
        p_out, h, tail = exc.p_out, None, exc.tail_bound
        p_int = float(np.mean(np.abs(series.t_samples) ** 2))
        print("h undefined: the exit is never reached", file=sys.stderr)
    table = Table(["n", "q"], [[n, float(v)] for n, v in enumerate(q)])
    pairs = [("P_out", float(p_out)), ("h", "undefined" if h is None else float(h)),
             ("tail_bound", float(tail)), ("P_out_integral", float(p_int)),
             ("samples", series.n_samples), ("contour_radius", float(series.radius))]
    payload = {"q": [rounded(v) for v in q],
               "P_out": rounded(p_out), "h": None if h is None else rounded(h),
               "tail_bound": rounded(tail), "P_out_integral": rounded(p_int),
               "samples": series.n_samples, "contour_radius": rounded(series.radius)}
    return [table, summary(pairs)], payload


def cmd_bound_states(cfg: RunConfig):
    problem = build_problem(cfg.load())
    kinds = None
    if problem.bound_states and check_invariance(problem.U).invariant:
        kinds = bound_state_reversal(problem)
    edges = problem.basis.edges[: problem.n_interior]
    rows, states = [], []
    for k, b in enumerate(problem.bound_states):
        lam = b.eigenvalue
        entry = {"eigenvalue": cplx(lam), "vector": {}}
        if kinds is not None:
            entry["time_reversal"] = kinds[k]
        for (a, c), v in zip(edges, b.vector):
            rows.append([k, float(lam.real), float(lam.imag), f"{a},{c}",
                         float(v.real), float(v.imag)])
            entry["vector"][f"{a},{c}"] = cplx(v)
        states.append(entry)
    table = Table(["state", "eig_re", "eig_im", "edge", "re", "im"], rows)
    return [table], {"count": len(states), "bound_states": states}


def cmd_tri_check(cfg: RunConfig):
    graph = cfg.load()
    left = build_problem(graph, "left")
    report = check_invariance(left.U)
    witness = None
    if report.witness is not None:
        v, (k_in, k_out) = report.witness
        witness = {"vertex": v, "in": k_in, "out": k_out}
    pairs = [("invariant", str(report.invariant).lower()),
             ("worst_violation", float(report.worst_violation))]
    payload = {"invariant": report.invariant,
               "worst_violation": rounded(report.worst_violation),
               "witness": witness, "table": []}
    rows = []
    if report.invariant:
        sym = verify_transmission_symmetry(graph, n_theta=cfg.samples, left=left)
        for th, a, b in zip(sym.thetas, sym.t_left, sym.t_right):
            rows.append([float(th), float(a.real), float(a.imag), float(b.real), float(b.imag)])
        pairs.append(("max_diff", float(sym.max_diff)))
        payload["max_diff"] = rounded(sym.max_diff)
        payload["table"] = [{"theta": rounded(th), "t_l": cplx(a), "t_r": cplx(b)}
                            for th, a, b in zip(sym.thetas, sym.t_left, sym.t_right)]
    table = Table(["theta", "re_tl", "im_tl", "re_tr", "im_tr"], rows)
    return [summary(pairs), table], payload


def cmd_self_test(cfg: RunConfig):
    checks = selftest.run_all(cfg.seed)
    rows = [[c.name, float(c.error), float(c.tol), "PASS" if c.passed else "FAIL"]
            for c in checks]
    payload = {"seed": cfg.seed, "passed": all(c.passed for c in checks),
               "checks": [{"name": c.name, "error": rounded(c.error), "tol": c.tol,
                           "passed": c.passed} for c in checks]}
    return [Table(["check", "error", "tolerance", "status"], rows)], payload


COMMANDS = {
    "simulate": cmd_simulate,
    "scatter": cmd_scatter,
    "hitting-time": cmd_hitting_time,
    "bound-states": cmd_bound_states,
    "tri-check": cmd_tri_check,
    "self-test": cmd_self_test,
}


# ---------------------------------------------------------------------------

def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--graph", help="graph description file")
    src.add_argument("--builtin", help="diamond:<phi> or line:<t>,<r>[,<length>]")
    common.add_argument("--out", help="write results here instead of standard output")
    common.add_argument("--format", dest="fmt", choices=("csv", "json"), default=None)
    common.add_argument("--seed", type=int, default=0,
                        help="seed for the randomized checks (default 0)")
    common.add_argument("--phi", help="override the phase of the diamond graph")

    parser = argparse.ArgumentParser(
        prog="qwscatter",
        description="Quantum walks on tailed graphs: simulation and scattering data.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("simulate", parents=[common], help="evolve a walker step by step")
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--monitor", action="append", default=[], metavar="A,B",
                   help="measure this edge after every step (repeatable)")
    p.add_argument("--start", metavar="A,B",
                   help="start on this oriented edge (default: incoming tail edge)")

    p = sub.add_parser("scatter", parents=[common], help="t and r around the unit circle")
    p.add_argument("--samples", type=int, default=64)
    p.add_argument("--direction", choices=("left", "right"), default="left")

    p = sub.add_parser("hitting-time", parents=[common],
                       help="first-arrival probabilities, P_out and h")
    p.add_argument("--nmax", type=int, default=50)

    sub.add_parser("bound-states", parents=[common], help="eigenvectors of U inside the graph")

    p = sub.add_parser("tri-check", parents=[common], help="time-reversal invariance report")
    p.add_argument("--samples", type=int, default=64)

    sub.add_parser("self-test", parents=[common], help="oracle-versus-numeric comparisons")
    return parser


def config_from(args: argparse.Namespace) -> RunConfig:
    default_fmt = "json" if args.command in ("bound-states", "tri-check") else "csv"
    return RunConfig(
        command=args.command,
        graph=args.graph,
        builtin=args.builtin,
        steps=getattr(args, "steps", 0),
        nmax=getattr(args, "nmax", 50),
        samples=getattr(args, "samples", 64),
        phi=None if args.phi is None else real(args.phi),
        direction=getattr(args, "direction", "left"),
        monitor=[edge_arg(m) for m in getattr(args, "monitor", [])],
        start=edge_arg(args.start) if getattr(args, "start", None) else None,
        fmt=args.fmt or default_fmt,
        out=args.out,
        seed=args.seed,
    )


def run(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = config_from(args)
        sections, payload = COMMANDS[cfg.command](cfg)
    except UsageError as exc:
        print(f"qwscatter: error: {exc}", file=sys.stderr)
        return 2
    except COMPUTATION_ERRORS as exc:
        print(f"qwscatter: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    text = write_csv(sections) if cfg.fmt == "csv" else write_json(payload)
    if cfg.out:
        try:
            with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"qwscatter: error: cannot write {cfg.out}: {exc.strerror}", file=sys.stderr)
            return 2
    else:
        sys.stdout.write(text)
    if cfg.command == "self-test" and not payload["passed"]:
        return 1
    return 0


def main() -> None:
    sys.exit(run())
