"""
Time-domain simulation: free evolution, monitored evolution and first arrival.

These routines work on an explicit finite window and are the brute-force
counterpart of the transform-domain results in :mod:`qwscatter.scattering`.
Arrays of per-step quantities are indexed by the step number ``n``; entry 0
is a placeholder (nothing is measured before the first step).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph_model import TAIL_OUT, EdgeBasis, TailedGraph, truncate
from .step_operator import StepOperator, WalkState, assemble

UNDERFLOW = 1e-300


class WindowTooSmallError(ValueError):
    """The light cone of the walk would reach a reflecting tail end."""


class NotOnTailError(ValueError):
    """The simplified first-arrival formula needs an outgoing-tail edge."""


@dataclass
class MonitorRecord:
    n: int
    p_survive: float
    q_arrive: float
    state: WalkState | None


def prepare(graph: TailedGraph, n_steps: int) -> StepOperator:
    """Operator on a window wide enough that ``n_steps`` steps from the
    incoming tail edge are exact."""
    return assemble(graph, truncate(graph, n_steps + 2))


def entry_state(basis: EdgeBasis) -> WalkState:
    """The state ``|-1,0>``: one step before the entry vertex, moving in."""
    return WalkState.on_edge(basis, basis.incoming_left)


def required_tail_length(psi: WalkState, n: int) -> int:
    """Smallest window for which ``n`` steps from ``psi`` never feel the cut."""
    reach = 0
    for i in np.flatnonzero(psi.amplitudes):
        pos = psi.basis.tail_position(psi.basis.edges[i])
        if pos is not None:
            reach = max(reach, pos[1])
    return n + reach + 1


def _check_window(psi: WalkState, n: int) -> None:
    need = required_tail_length(psi, n)
    if psi.basis.tail_length < need:
        raise WindowTooSmallError(
            f"{n} steps need a tail window of at least {need}, "
            f"have {psi.basis.tail_length}")


def evolve(U: StepOperator, psi0: WalkState, n: int) -> WalkState:
    """Return ``U^n psi0`` with no measurements in between."""
    if n < 0:
        raise ValueError("number of steps must be nonnegative")
    _check_window(psi0, n)
    amps = psi0.amplitudes.copy()
    m = U.matrix
    for _ in range(n):
        amps = m @ amps
    return WalkState(U.basis, amps, normalized=psi0.normalized)


def _edge_mask(basis: EdgeBasis, edges) -> np.ndarray:
    mask = np.zeros(len(basis), dtype=bool)
    for a, b in edges:
        hit = False
        for e in ((a, b), (b, a)):
            if e in basis:
                mask[basis.position(e)] = True
                hit = True
        if not hit:
            raise KeyError(f"edge {a}-{b} is not in the basis")
    return mask


def monitored_walk(U: StepOperator, psi0: WalkState, monitored_edges, n_max: int,
                   keep_states: bool = True) -> list[MonitorRecord]:
    """Evolve while measuring, after every step, whether the walker sits on
    any of ``monitored_edges`` (undirected: both orientations are projected).

    Record ``m`` holds the probability ``p(m)`` of no detection in steps
    ``1..m``, the probability ``q(m)`` of first detection at step ``m``, and
    the post-measurement state conditioned on no detection so far.
    """
    monitored_edges = list(monitored_edges)
    if not monitored_edges:
        raise ValueError("monitored edge set is empty")
    if n_max < 1:
        raise ValueError("n_max must be positive")
    _check_window(psi0, n_max)
    mask = _edge_mask(U.basis, monitored_edges)
    m = U.matrix
    # unnormalized [(I-P)U]^k psi0; its squared norm is p(k)
    phi = psi0.amplitudes.copy()
    records = []
    dead = False
    for step in range(1, n_max + 1):
        if dead:
            records.append(MonitorRecord(step, 0.0, 0.0, None))
            continue
        phi = m @ phi
        q = float(np.sum(np.abs(phi[mask]) ** 2))
        phi[mask] = 0.0
        p = float(np.sum(np.abs(phi) ** 2))
        state = None
        if p < UNDERFLOW:
            dead = True
        elif keep_states:
            state = WalkState(U.basis, phi / np.sqrt(p), normalized=True)
        records.append(MonitorRecord(step, p, q, state))
    return records


def first_arrival_direct(U: StepOperator, psi0: WalkState, exit_edge, n_max: int) -> np.ndarray:
    """``q[n] = |<exit|U^n|psi0>|^2`` for ``n = 1..n_max`` (``q[0]`` is 0).

    Valid only when ``exit_edge`` points outward along the outgoing tail and
    ``psi0`` has no weight on that tail: then the walker, once past the exit
    edge, never returns and measurement back-action drops out.
    """
    basis = U.basis
    pos = basis.tail_position(tuple(exit_edge))
    if pos is None or pos[0] != TAIL_OUT or not pos[2]:
        raise NotOnTailError(f"{exit_edge} is not an outward edge of the outgoing tail")
    for i in np.flatnonzero(psi0.amplitudes):
        p = basis.tail_position(basis.edges[i])
        if p is not None and p[0] == TAIL_OUT:
            raise NotOnTailError("initial state has weight on the outgoing tail")
    _check_window(psi0, n_max)
    k = basis.position(tuple(exit_edge))
    q = np.zeros(n_max + 1)
    amps = psi0.amplitudes.copy()
    m = U.matrix
    for n in range(1, n_max + 1):
        amps = m @ amps
        q[n] = abs(amps[k]) ** 2
    return q


def distribution(psi: WalkState) -> dict[tuple[str, str], float]:
    """Probability per undirected edge, keyed by the orientation met first in
    basis order."""
    out: dict[tuple[str, str], float] = {}
    amps = psi.amplitudes
    for i, (a, b) in enumerate(psi.basis.edges):
        key = (b, a) if (b, a) in out else (a, b)
        out[key] = out.get(key, 0.0) + float(abs(amps[i]) ** 2)
    return out
