"""
Reference graphs and closed-form results to test the numerics against.

The diamond graph: entry vertex ``0`` and exit vertex ``2`` are
equal-transmission vertices of degree three, joined through two free
vertices ``1A`` and ``1B``. Vertex ``1B`` multiplies every passage by
``exp(i*phi)``.
"""

from __future__ import annotations

import numpy as np

from .graph_model import (
    EdgeSpec, Free, Grover, TailedGraph, TwoPort, VertexPhase, VertexSpec,
    interior_edges,
)

DIAMOND_EDGES = (("0", "1A"), ("0", "1B"), ("1A", "2"), ("1B", "2"))


class PoleError(ZeroDivisionError):
    pass


def build_diamond(phi: float = 0.0) -> TailedGraph:
    vertices = (
        VertexSpec("0", Grover(3)),
        VertexSpec("1A", Free()),
        VertexSpec("1B", VertexPhase(phi, Free())),
        VertexSpec("2", Grover(3)),
    )
    edges = tuple(EdgeSpec(e) for e in DIAMOND_EDGES)
    return TailedGraph(vertices, edges, "0", "2")


def _pole_check(den, tol=1e-14):
    if np.any(np.abs(den) < tol):
        raise PoleError("closed form evaluated at a pole")


def closed_form_t(z, phi: float):
    """Transmission amplitude of the diamond graph in closed form."""
    z = np.asarray(z, dtype=complex)
    e = np.exp(-1j * phi)
    z4 = z ** 4
    den = z4 * (1 + e) ** 2 - (3 * e - z4) ** 2
    _pole_check(den)
    return 4 * z ** 3 * (1 + e) * (z4 - e) / den


def closed_form_b_minus1(theta, phi: float):
    """Reflection amplitude of the diamond graph at ``z = exp(i*theta)``."""
    theta = np.asarray(theta, dtype=float)
    u = np.exp(-1j * theta)
    v = np.exp(-1j * (4 * theta + phi))
    e = np.exp(-1j * phi)
    den = u ** 4 * (1 + e) ** 2 - (3 * v - 1) ** 2
    _pole_check(den)
    return (u ** 3 * (1 + e) ** 2 + np.exp(1j * theta) * (3 * v - 1) * (v - 3)) / den


def diamond_arrival_probability(n: int) -> float:
    """First-arrival probability at step ``n`` for ``phi = 0``."""
    if n % 4 != 3:
        return 0.0
    return (8.0 / 9.0 ** ((n + 1) // 4)) ** 2


def bound_state_basis_diamond() -> tuple[list[tuple[str, str]], np.ndarray]:
    """Arm-difference states spanning the ``phi = 0`` bound space.

    Returns the interior edge order and a ``(4, 8)`` array whose rows are
    the four orthonormal vectors in that order.
    """
    edges = interior_edges(build_diamond(0.0))
    idx = {e: i for i, e in enumerate(edges)}
    s = 1 / np.sqrt(2)
    pairs = [
        (("0", "1A"), ("0", "1B")),
        (("1A", "2"), ("1B", "2")),
        (("1B", "0"), ("1A", "0")),
        (("2", "1B"), ("2", "1A")),
    ]
    u = np.zeros((4, len(edges)), dtype=complex)
    for k, (plus, minus) in enumerate(pairs):
        u[k, idx[plus]] = s
        u[k, idx[minus]] = -s
    return edges, u


def diamond_eigen_residuals(theta: float, phi: float, amp: dict) -> np.ndarray:
    """Residuals of the ten per-edge equations of ``U Psi = e^{-i theta} Psi``.

    ``amp`` maps the coefficient names ``b_m1, a0A, a1A, b0A, b1A, a0B, a1B,
    b0B, b1B, a2`` to values (the incoming wave on ``|-1,0>`` has weight 1).
    """
    x = np.exp(-1j * theta)
    p = np.exp(1j * phi)
    a = amp
    return np.array([
        x * a["b_m1"] - (-1 / 3 + 2 / 3 * (a["b0A"] + a["b0B"])),
        x * a["a0A"] - (2 / 3 * (1 + a["b0B"]) - 1 / 3 * a["b0A"]),
        x * a["b0A"] - a["b1A"],
        x * a["a1A"] - a["a0A"],
        x * a["b1A"] - (-1 / 3 * a["a1A"] + 2 / 3 * a["a1B"]),
        x * a["a2"] - 2 / 3 * (a["a1A"] + a["a1B"]),
        x * a["a0B"] - (2 / 3 * (1 + a["b0A"]) - 1 / 3 * a["b0B"]),
        x * a["b0B"] - a["b1B"] * p,
        x * a["a1B"] - a["a0B"] * p,
        x * a["b1B"] - (2 / 3 * a["a1A"] - 1 / 3 * a["a1B"]),
    ])


DIAMOND_COEFFICIENT_EDGES = {
    "b_m1": ("0", "tail_in:1"),
    "a0A": ("0", "1A"), "a1A": ("1A", "2"), "b0A": ("1A", "0"), "b1A": ("2", "1A"),
    "a0B": ("0", "1B"), "a1B": ("1B", "2"), "b0B": ("1B", "0"), "b1B": ("2", "1B"),
    "a2": ("2", "tail_out:1"),
}


def build_line(t: complex, r: complex, length: int) -> TailedGraph:
    """Chain of ``length`` identical two-port vertices between the tails.

    Vertices are ``v0, v1, ...`` (zero padded); the incoming tail attaches at
    the first and the outgoing tail at the last.
    """
    if length < 1:
        raise ValueError("line needs at least one vertex")
    kind = TwoPort(t, r)
    width = len(str(length - 1))
    labels = [f"v{k:0{width}d}" for k in range(length)]
    vertices = tuple(VertexSpec(lab, kind) for lab in labels)
    edges = tuple(EdgeSpec((labels[k], labels[k + 1])) for k in range(length - 1))
    return TailedGraph(vertices, edges, labels[0], labels[-1])


def line_vertex_index(label: str) -> int | None:
    """Index of a line vertex ``vNNN``; ``None`` for tail vertices."""
    if label.startswith("v"):
        return int(label[1:])
    return None


def two_port_pair_amplitudes(z, t1, r1, t2, r2):
    """Closed-form ``(t(z), r(z))`` for two two-port vertices joined by one
    edge: the multiple-reflection series summed by hand."""
    z = np.asarray(z, dtype=complex)
    loop = 1 + z ** 2 * np.conj(r1) * r2
    x = z * t1 / loop
    t = z * t2 * x
    r = z * r1 + z ** 2 * np.conj(t1) * r2 * x
    return t, r


def random_grover_graph(rng: np.random.Generator, max_vertices: int = 12,
                        extra_edge_prob: float = 0.3, phase_prob: float = 0.5,
                        vertex_phase_prob: float = 0.25) -> TailedGraph:
    """Random connected graph of equal-transmission vertices with random
    phase shifters on edge ends and vertices."""
    n = int(rng.integers(2, max_vertices + 1))
    labels = [f"v{k:02d}" for k in range(n)]
    pairs = set()
    for k in range(1, n):
        pairs.add((labels[int(rng.integers(0, k))], labels[k]))
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < extra_edge_prob:
                pairs.add((labels[i], labels[j]))
    entry, exit_ = (labels[i] for i in rng.choice(n, size=2, replace=False))
    edges = []
    for a, b in sorted(pairs):
        phases = {}
        for end in (a, b):
            if rng.random() < phase_prob:
                phases[end] = float(rng.uniform(0, 2 * np.pi))
        edges.append(EdgeSpec((a, b), tuple(phases.items())))
    degree = {lab: 0 for lab in labels}
    for a, b in pairs:
        degree[a] += 1
        degree[b] += 1
    degree[entry] += 1
    degree[exit_] += 1
    vertices = []
    for lab in labels:
        kind = Grover(degree[lab])
        if rng.random() < vertex_phase_prob:
            kind = VertexPhase(float(rng.uniform(0, 2 * np.pi)), kind)
        vertices.append(VertexSpec(lab, kind))
    return TailedGraph(tuple(vertices), tuple(edges), entry, exit_)


def random_corpus(seed: int, size: int = 100, max_vertices: int = 12) -> list[TailedGraph]:
    rng = np.random.default_rng(seed)
    return [random_grover_graph(rng, max_vertices) for _ in range(size)]
