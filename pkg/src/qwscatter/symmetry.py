"""Time reversal for edge walks.

The antiunitary map ``T|A,B> = |B,A>`` (with complex conjugation) reverses
every oriented edge. A walk is time-reversal invariant when ``T U T = U^-1``,
which reduces to every local unitary being a symmetric matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph_model import TailedGraph
from .scattering import ScatteringProblem, amplitudes_on, build_problem
from .step_operator import StepOperator, WalkState

TRI_TOL = 1e-12


class NotTimeReversalInvariantError(ValueError):
    pass


@dataclass(frozen=True)
class TimeReversalReport:
    invariant: bool
    worst_violation: float
    witness: tuple | None   # (vertex, (in-neighbour k, out-neighbour k'))


def time_reverse(psi: WalkState) -> WalkState:
    perm = psi.basis.reversed_permutation()
    return WalkState(psi.basis, np.conj(psi.amplitudes[perm]), normalized=psi.normalized)


def time_reverse_operator(U: StepOperator) -> np.ndarray:
    """Dense ``T U T`` (a linear operator: the two conjugations cancel)."""
    perm = U.basis.reversed_permutation()
    return np.conj(U.dense()[np.ix_(perm, perm)])


def check_invariance(U: StepOperator) -> TimeReversalReport:
    """Check ``<A,k|U|k',A> == <A,k'|U|k,A>`` for every vertex block."""
    worst, witness = 0.0, None
    for label, block in U.blocks.items():
        m = block.matrix
        diff = np.abs(m - m.T)
        if diff.size and diff.max() > worst:
            i, k = np.unravel_index(np.argmax(diff), diff.shape)
            worst = float(diff[i, k])
            witness = (label, (block.neighbors[k], block.neighbors[i]))
    return TimeReversalReport(worst < TRI_TOL, worst, witness)


@dataclass(frozen=True)
class TransmissionSymmetry:
    thetas: np.ndarray
    t_left: np.ndarray
    t_right: np.ndarray
    max_diff: float
    # residuals of |r_l|^2 + t_r conj(t_l) = 1 and r_l conj(t_r) + t_r conj(r_r) = 0
    norm_residual: float
    cross_residual: float


def verify_transmission_symmetry(graph: TailedGraph, n_theta: int = 64,
                                 left: ScatteringProblem | None = None,
                                 right: ScatteringProblem | None = None) -> TransmissionSymmetry:
    """Compare left- and right-incident transmission on ``n_theta`` angles.

    Raises :class:`NotTimeReversalInvariantError` if the walk is not
    time-reversal invariant, since then the comparison means nothing.
    """
    left = left or build_problem(graph, "left")
    right = right or build_problem(graph, "right")
    report = check_invariance(left.U)
    if not report.invariant:
        raise NotTimeReversalInvariantError(
            f"walk is not time-reversal invariant (violation {report.worst_violation:.3e} "
            f"at {report.witness})")
    thetas = 2 * np.pi * np.arange(n_theta) / n_theta
    zs = np.exp(1j * thetas)
    t_l, r_l = amplitudes_on(left, zs)
    t_r, r_r = amplitudes_on(right, zs)
    return TransmissionSymmetry(
        thetas=thetas,
        t_left=t_l,
        t_right=t_r,
        max_diff=float(np.max(np.abs(t_l - t_r))),
        norm_residual=float(np.max(np.abs(np.abs(r_l) ** 2 + t_r * np.conj(t_l) - 1))),
        cross_residual=float(np.max(np.abs(r_l * np.conj(t_r) + t_r * np.conj(r_r)))),
    )


def bound_state_reversal(problem: ScatteringProblem, tol: float = 1e-8) -> list[str]:
    """For each bound state, ``"self-conjugate"`` if ``T u`` is ``u`` up to a
    phase, else ``"degenerate"`` (``T u`` is another state of the same
    eigenvalue)."""
    basis = problem.basis
    perm = basis.reversed_permutation()[: problem.n_interior]
    out = []
    for b in problem.bound_states:
        tu = np.conj(b.vector[perm])
        overlap = abs(np.vdot(b.vector, tu))
        out.append("self-conjugate" if abs(overlap - 1.0) < tol else "degenerate")
    return out
