"""
One-step unitary of the edge walk on a finite window, and walk states.

Each vertex ``B`` owns a local unitary mapping the edges that end at ``B`` to
the edges that start at ``B``. The global operator is the direct sum of these
blocks, so ``<B,C|U|A,B>`` is the only kind of entry that can be nonzero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .graph_model import (
    REFLECTOR, TAIL_IN, TAIL_OUT, UNITARITY_TOL, EdgeBasis, Free, TailedGraph,
    tail_label, truncate,
)


class BasisMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class VertexBlock:
    """Where a local unitary sits inside the global operator."""
    vertex: str
    neighbors: tuple[str, ...]
    in_index: np.ndarray   # rows of U are out-edges, columns are in-edges
    out_index: np.ndarray
    matrix: np.ndarray


@dataclass(frozen=True)
class StepOperator:
    basis: EdgeBasis
    matrix: sp.csc_matrix
    blocks: dict = field(repr=False)

    def __matmul__(self, other):
        if isinstance(other, WalkState):
            return apply(self, other)
        return self.matrix @ other

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()


@dataclass
class WalkState:
    """Complex amplitudes over the oriented edges of a basis."""
    basis: EdgeBasis
    amplitudes: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (len(self.basis),):
            raise BasisMismatchError(
                f"amplitude vector has shape {self.amplitudes.shape}, "
                f"basis has {len(self.basis)} edges")

    @classmethod
    def on_edge(cls, basis: EdgeBasis, edge, amplitude: complex = 1.0) -> "WalkState":
        amps = np.zeros(len(basis), dtype=complex)
        amps[basis.position(edge)] = amplitude
        return cls(basis, amps, normalized=abs(abs(amplitude) - 1.0) < 1e-15)

    @classmethod
    def zeros(cls, basis: EdgeBasis) -> "WalkState":
        return cls(basis, np.zeros(len(basis), dtype=complex))

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def amplitude(self, edge) -> complex:
        return complex(self.amplitudes[self.basis.position(edge)])

    def normalize(self) -> "WalkState":
        n = self.norm()
        if n == 0.0:
            raise ZeroDivisionError("cannot normalize the zero state")
        return WalkState(self.basis, self.amplitudes / n, normalized=True)


def _vertex_blocks(graph: TailedGraph, basis: EdgeBasis):
    """Yield ``(vertex, neighbors, local unitary)`` for every window vertex."""
    for v in graph.vertices:
        yield v.label, graph.neighbors(v.label), graph.local_unitary(v.label)
    free = Free().matrix()
    for side, attach in ((TAIL_IN, graph.entry), (TAIL_OUT, graph.exit)):
        for d in range(1, basis.tail_length + 1):
            label = tail_label(side, d)
            nearer = attach if d == 1 else tail_label(side, d - 1)
            if d == basis.tail_length:
                yield label, [nearer], REFLECTOR
            else:
                yield label, [nearer, tail_label(side, d + 1)], free


def assemble(graph: TailedGraph, basis: EdgeBasis) -> StepOperator:
    """Build the sparse one-step operator on ``basis`` from the local unitaries."""
    if basis.entry != graph.entry or basis.exit != graph.exit:
        raise BasisMismatchError("basis was not built from this graph")
    rows, cols, vals = [], [], []
    blocks = {}
    for label, nbrs, m in _vertex_blocks(graph, basis):
        dev = np.max(np.abs(m.conj().T @ m - np.eye(len(nbrs))))
        if dev > UNITARITY_TOL:
            raise ValueError(f"local unitary at {label!r} deviates from unitarity by {dev:.3e}")
        in_idx = np.array([basis.position((n, label)) for n in nbrs], dtype=np.intp)
        out_idx = np.array([basis.position((label, n)) for n in nbrs], dtype=np.intp)
        blocks[label] = VertexBlock(label, tuple(nbrs), in_idx, out_idx, m)
        r, c = np.nonzero(m)
        rows.append(out_idx[r])
        cols.append(in_idx[c])
        vals.append(m[r, c])
    n = len(basis)
    mat = sp.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n), dtype=complex)
    return StepOperator(basis, mat, blocks)


def build(graph: TailedGraph, tail_length: int) -> StepOperator:
    return assemble(graph, truncate(graph, tail_length))


def apply(U: StepOperator, psi: WalkState) -> WalkState:
    if psi.basis is not U.basis and psi.basis != U.basis:
        raise BasisMismatchError("state and operator live on different bases")
    return WalkState(U.basis, U.matrix @ psi.amplitudes, normalized=psi.normalized)


def check_unitarity(U: StepOperator) -> float:
    """Return ``max |U^dagger U - I|`` over all entries."""
    m = U.matrix
    gram = (m.conj().T @ m - sp.identity(m.shape[0], dtype=complex, format="csc"))
    if gram.nnz == 0:
        return 0.0
    return float(np.max(np.abs(gram.data)))


def flux(psi: WalkState, vertices, graph_side: str = "in") -> float:
    """Probability carried by edges ending at (``"in"``) or starting at
    (``"out"``) any vertex of ``vertices``.
    """
    vertices = set(vertices)
    pick = 1 if graph_side == "in" else 0
    mask = np.array([e[pick] in vertices for e in psi.basis.edges])
    return float(np.sum(np.abs(psi.amplitudes[mask]) ** 2))
