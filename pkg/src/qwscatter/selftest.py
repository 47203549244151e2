"""
Oracle-versus-numeric comparisons behind the ``self-test`` command.

Each check returns a :class:`Check` holding the measured error, the
tolerance it is held to, and whether it passed. Nothing here raises on a
failed comparison; the caller decides what to do with the table.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import oracles
from .graph_model import EdgeSpec, TailedGraph, TwoPort, VertexSpec
from .scattering import (
    UndefinedHittingTimeError, amplitudes_on, build_problem, hitting_statistics,
    s_matrix_from, taylor_coefficients, unitarity_defect,
)
from .step_operator import check_unitarity
from .symmetry import check_invariance, verify_transmission_symmetry
from .walk_engine import entry_state, first_arrival_direct, monitored_walk, prepare

PHIS = (0.0, np.pi / 4, np.pi / 2, 2 * np.pi / 3, np.pi)


@dataclass(frozen=True)
class Check:
    name: str
    error: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.error) and self.error < self.tol)


def _circle(n, offset=0.0):
    thetas = 2 * np.pi * (np.arange(n) + offset) / n
    return thetas, np.exp(1j * thetas)


# the raw closed forms have removable poles at z**4 = 1 when phi = 0
def diamond_transmission() -> Check:
    _, zs = _circle(128, 0.5)
    err = 0.0
    for phi in PHIS:
        t, _ = amplitudes_on(build_problem(oracles.build_diamond(phi)), zs)
        err = max(err, float(np.max(np.abs(t - oracles.closed_form_t(zs, phi)))))
    return Check("diamond t(z) vs closed form", err, 1e-11)


def diamond_reflection() -> Check:
    thetas, zs = _circle(128, 0.5)
    err = 0.0
    for phi in PHIS:
        _, r = amplitudes_on(build_problem(oracles.build_diamond(phi)), zs)
        err = max(err, float(np.max(np.abs(r - oracles.closed_form_b_minus1(thetas, phi)))))
    return Check("diamond r(z) vs closed form", err, 1e-11)


def diamond_arrivals() -> list[Check]:
    problem = build_problem(oracles.build_diamond(0.0))
    series = taylor_coefficients(problem, 200)
    exact = np.array([oracles.diamond_arrival_probability(n) for n in range(201)])
    U = prepare(problem.graph, 200)
    psi = entry_state(U.basis)
    direct = first_arrival_direct(U, psi, U.basis.outgoing_right, 200)
    rec = monitored_walk(U, psi, [U.basis.outgoing_right], 200, keep_states=False)
    monitored = np.array([0.0] + [r.q_arrive for r in rec])
    stats = hitting_statistics(series)
    return [
        Check("diamond q(n) from coefficients", float(np.max(np.abs(series.q - exact))), 1e-10),
        Check("diamond q(n) from monitored walk", float(np.max(np.abs(monitored - exact))), 1e-10),
        Check("coefficients vs monitored walk", float(np.max(np.abs(series.q - monitored))), 1e-12),
        Check("monitored walk vs direct formula", float(np.max(np.abs(monitored - direct))), 1e-12),
        Check("diamond P_out = 4/5", abs(stats.p_out + stats.tail_bound - 0.8), 1e-9),
        Check("diamond h = 61/20", abs(stats.h - 3.05), 1e-9),
    ]


def diamond_blocked() -> list[Check]:
    problem = build_problem(oracles.build_diamond(np.pi))
    _, zs = _circle(256)
    t, _ = amplitudes_on(problem, zs)
    try:
        hitting_statistics(taylor_coefficients(problem, 50))
        undefined = np.inf
    except UndefinedHittingTimeError as exc:
        undefined = exc.p_out
    return [
        Check("phi = pi: |t| vanishes", float(np.max(np.abs(t))), 1e-12),
        Check("phi = pi: h reported undefined", float(undefined), 1e-12),
    ]


def diamond_bound_states() -> list[Check]:
    problem = build_problem(oracles.build_diamond(0.0))
    eig = np.array([b.eigenvalue for b in problem.bound_states])
    expect = np.array([1, 1j, -1, -1j])
    if len(eig) == 4:
        dist = np.abs(eig[:, None] - expect[None, :])
        eig_err = max(dist.min(axis=0).max(), dist.min(axis=1).max())
        _, u = oracles.bound_state_basis_diamond()
        angles = sla.subspace_angles(problem.bound_basis, u.T)
        span_err = float(np.max(angles))
    else:
        eig_err = span_err = np.inf
    others = sum(len(build_problem(oracles.build_diamond(phi)).bound_states)
                 for phi in (np.pi / 4, np.pi / 2, np.pi))
    return [
        Check("phi = 0: bound eigenvalues are i^m", float(eig_err), 1e-8),
        Check("phi = 0: bound span is the arm differences", span_err, 1e-8),
        Check("phi != 0: no bound states", float(others), 0.5),
    ]


def diamond_shielding(n_max: int = 100) -> Check:
    graph = oracles.build_diamond(0.0)
    edges, u = oracles.bound_state_basis_diamond()
    U = prepare(graph, n_max)
    cols = [U.basis.position(e) for e in edges]
    amps = entry_state(U.basis).amplitudes
    worst = 0.0
    for _ in range(n_max + 1):
        worst = max(worst, float(np.max(np.abs(u.conj() @ amps[cols]))))
        amps = U.matrix @ amps
    return Check("bound states never populated", worst, 1e-12)


def two_port_pair() -> Check:
    t1, r1 = np.exp(0.3j) * 0.6, 0.8
    t2, r2 = 1 / np.sqrt(2), 1j / np.sqrt(2)
    graph = TailedGraph(
        (VertexSpec("a", TwoPort(t1, r1)), VertexSpec("b", TwoPort(t2, r2))),
        (EdgeSpec(("a", "b")),), "a", "b")
    _, zs = _circle(64)
    t, r = amplitudes_on(build_problem(graph), zs)
    t_ref, r_ref = oracles.two_port_pair_amplitudes(zs, t1, r1, t2, r2)
    err = float(max(np.max(np.abs(t - t_ref)), np.max(np.abs(r - r_ref))))
    return Check("two two-port vertices vs hand solution", err, 1e-12)


def random_graphs(seed: int, count: int = 5) -> list[Check]:
    """Unitarity, time reversal and coefficient checks on a few random graphs."""
    uni = flux = tri = coef = 0.0
    _, zs = _circle(256)
    for graph in oracles.random_corpus(seed, size=count):
        left, right = build_problem(graph, "left"), build_problem(graph, "right")
        U = prepare(graph, 50)
        uni = max(uni, check_unitarity(U))
        flux = max(flux, unitarity_defect(s_matrix_from(left, right, np.angle(zs))))
        report = check_invariance(U)
        tri = max(tri, report.worst_violation,
                  verify_transmission_symmetry(graph, left=left, right=right).max_diff)
        q = first_arrival_direct(U, entry_state(U.basis), U.basis.outgoing_right, 50)
        coef = max(coef, float(np.max(np.abs(taylor_coefficients(left, 50).q - q))))
    return [
        Check(f"random graphs: step unitarity (seed {seed})", uni, 1e-12),
        Check(f"random graphs: S-matrix unitarity (seed {seed})", flux, 1e-10),
        Check(f"random graphs: time reversal (seed {seed})", tri, 1e-10),
        Check(f"random graphs: |c_n|^2 vs direct (seed {seed})", coef, 1e-10),
    ]


def run_all(seed: int = 0) -> list[Check]:
    checks = [diamond_transmission(), diamond_reflection()]
    checks += diamond_arrivals()
    checks += diamond_blocked()
    checks += diamond_bound_states()
    checks.append(diamond_shielding())
    checks.append(two_port_pair())
    checks += random_graphs(seed)
    return checks
