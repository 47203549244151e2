"""
Finite graphs with two semi-infinite tails, and the oriented-edge basis.

A :class:`TailedGraph` is a finite interior graph whose vertices each carry a
local scattering rule (:class:`VertexSpec`), plus two implicit tails: an
incoming one attached at ``entry`` and an outgoing one attached at ``exit``.
Tails are chains of free vertices. For numerical work the tails are cut to a
finite window by :func:`truncate`, which returns an :class:`EdgeBasis`.

Tail vertices are labelled ``tail_in:<d>`` and ``tail_out:<d>``, where ``d``
is the distance (in edges) from the attachment vertex. Labels starting with
``tail_`` are reserved.

Graph file format (line oriented, ``#`` starts a comment)::

    vertex <label> grover <degree>
    vertex <label> free
    vertex <label> two_port <re_t> <im_t> <re_r> <im_r>
    vertex <label> custom <row-major complex entries>
    vertex <label> phase <phi> <inner kind...>
    edge <labelA> <labelB> [phase@<label>=<phi> ...]
    tail_in <label>
    tail_out <label>
"""

from __future__ import annotations

import math
import warnings
from collections import deque
from dataclasses import dataclass, field
from typing import Union

import numpy as np

UNITARITY_TOL = 1e-12

TAIL_IN = "tail_in"
TAIL_OUT = "tail_out"

Edge = tuple[str, str]


class GraphFormatError(ValueError):
    """Raised for malformed graph files; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class GraphValidationError(ValueError):
    pass


class GraphWarning(UserWarning):
    pass


# ---------------------------------------------------------------------------
# Vertex kinds
# ---------------------------------------------------------------------------

def grover_coefficients(degree: int) -> tuple[complex, complex]:
    """Reflection and transmission amplitudes of an equal-transmission vertex.

    Parameters
    ----------
    degree : int
        Number of edges meeting at the vertex.

    Returns
    -------
    r, t : complex
        ``r = 2/degree - 1`` (back along the incoming edge) and
        ``t = 2/degree`` (onto each other edge).
    """
    if int(degree) != degree or degree < 1:
        raise ValueError(f"degree must be a positive integer, got {degree!r}")
    t = 2.0 / degree
    return complex(t - 1.0), complex(t)


@dataclass(frozen=True)
class Grover:
    degree: int

    def __post_init__(self):
        grover_coefficients(self.degree)

    @property
    def dimension(self) -> int:
        return self.degree

    def matrix(self) -> np.ndarray:
        r, t = grover_coefficients(self.degree)
        m = np.full((self.degree, self.degree), t, dtype=complex)
        np.fill_diagonal(m, r)
        return m


@dataclass(frozen=True)
class TwoPort:
    """Degree-2 scatterer. Port 0 is the "left" neighbour, port 1 the "right".

    ``|L,v> -> t|v,R> + r|v,L>`` and ``|R,v> -> t*|v,L> - r*|v,R>``.
    """
    t: complex
    r: complex

    def __post_init__(self):
        object.__setattr__(self, "t", complex(self.t))
        object.__setattr__(self, "r", complex(self.r))
        norm = abs(self.t) ** 2 + abs(self.r) ** 2
        if abs(norm - 1.0) > UNITARITY_TOL:
            raise GraphValidationError(
                f"two_port needs |t|^2 + |r|^2 = 1, got {norm!r}")

    @property
    def dimension(self) -> int:
        return 2

    def matrix(self) -> np.ndarray:
        # rows: out-ports (v,L), (v,R); columns: in-ports (L,v), (R,v)
        t, r = self.t, self.r
        return np.array([[r, t.conjugate()],
                         [t, -r.conjugate()]], dtype=complex)


@dataclass(frozen=True)
class Free:
    @property
    def dimension(self) -> int:
        return 2

    def matrix(self) -> np.ndarray:
        return TwoPort(1.0, 0.0).matrix()


@dataclass(frozen=True)
class Custom:
    """Arbitrary local unitary over the vertex's sorted neighbours.

    Entry ``matrix[i][k]`` is the amplitude for in-edge ``(n_k, v)`` to go to
    out-edge ``(v, n_i)``; see :func:`neighbor_sort_key` for the ordering.
    """
    matrix_rows: tuple[tuple[complex, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(complex(x) for x in row) for row in self.matrix_rows)
        object.__setattr__(self, "matrix_rows", rows)
        n = len(rows)
        if n == 0 or any(len(row) != n for row in rows):
            raise GraphValidationError("custom matrix must be square and non-empty")
        m = self.matrix()
        dev = np.max(np.abs(m.conj().T @ m - np.eye(n)))
        if dev > UNITARITY_TOL:
            raise GraphValidationError(
                f"custom matrix is not unitary (max deviation {dev:.3e})")

    @classmethod
    def from_array(cls, a) -> "Custom":
        return cls(tuple(tuple(complex(x) for x in row) for row in np.asarray(a)))

    @property
    def dimension(self) -> int:
        return len(self.matrix_rows)

    def matrix(self) -> np.ndarray:
        return np.array(self.matrix_rows, dtype=complex)


@dataclass(frozen=True)
class VertexPhase:
    """Multiplies the whole local unitary of ``inner`` by ``exp(i*phi)``."""
    phi: float
    inner: "VertexKind"

    def __post_init__(self):
        object.__setattr__(self, "phi", float(self.phi))

    @property
    def dimension(self) -> int:
        return self.inner.dimension

    def matrix(self) -> np.ndarray:
        return np.exp(1j * self.phi) * self.inner.matrix()


VertexKind = Union[Grover, TwoPort, Free, Custom, VertexPhase]

# Local unitary of the last vertex of a truncated tail: bounce straight back.
REFLECTOR = np.ones((1, 1), dtype=complex)


@dataclass(frozen=True)
class VertexSpec:
    label: str
    kind: VertexKind

    @property
    def dimension(self) -> int:
        return self.kind.dimension

    def matrix(self) -> np.ndarray:
        return self.kind.matrix()


@dataclass(frozen=True)
class EdgeSpec:
    """Undirected interior edge, optionally with phase shifters at its ends.

    A shifter at endpoint ``v`` multiplies both the amplitude entering ``v``
    along this edge and the amplitude leaving ``v`` along it by ``exp(i*phi)``.
    """
    endpoints: tuple[str, str]
    endpoint_phase: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        a, b = self.endpoints
        if a == b:
            raise GraphValidationError(f"self-loop at {a!r} is not allowed")
        phases = tuple(sorted((str(k), float(v)) for k, v in dict(self.endpoint_phase).items()))
        for label, _ in phases:
            if label not in self.endpoints:
                raise GraphValidationError(
                    f"phase shifter at {label!r} is not an endpoint of edge {a}-{b}")
        object.__setattr__(self, "endpoints", (str(a), str(b)))
        object.__setattr__(self, "endpoint_phase", phases)

    def phase_at(self, label: str) -> float:
        return dict(self.endpoint_phase).get(label, 0.0)

    def key(self) -> frozenset:
        return frozenset(self.endpoints)


def neighbor_sort_key(label: str):
    """Sort key for the neighbours of a vertex.

    The incoming tail sorts before every interior label and the outgoing tail
    after every interior label; interior labels sort lexicographically.
    """
    if label.startswith(TAIL_IN):
        return (0, "")
    if label.startswith(TAIL_OUT):
        return (2, "")
    return (1, label)


def tail_label(side: str, distance: int) -> str:
    return f"{side}:{distance}"


@dataclass(frozen=True)
class TailedGraph:
    vertices: tuple[VertexSpec, ...]
    edges: tuple[EdgeSpec, ...]
    entry: str
    exit: str

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "edges", tuple(self.edges))
        self.validate()

    # -- lookups -----------------------------------------------------------
    @property
    def labels(self) -> list[str]:
        return [v.label for v in self.vertices]

    def vertex(self, label: str) -> VertexSpec:
        for v in self.vertices:
            if v.label == label:
                return v
        raise KeyError(label)

    def neighbors(self, label: str) -> list[str]:
        """Neighbours of an interior vertex, tails included, in port order."""
        out = []
        for e in self.edges:
            a, b = e.endpoints
            if a == label:
                out.append(b)
            elif b == label:
                out.append(a)
        if label == self.entry:
            out.append(tail_label(TAIL_IN, 1))
        if label == self.exit:
            out.append(tail_label(TAIL_OUT, 1))
        return sorted(out, key=neighbor_sort_key)

    def edge_between(self, a: str, b: str) -> EdgeSpec | None:
        key = frozenset((a, b))
        for e in self.edges:
            if e.key() == key:
                return e
        return None

    def local_unitary(self, label: str) -> np.ndarray:
        """Local unitary at an interior vertex with shifter phases applied.

        Rows are out-edges ``(label, n)`` and columns in-edges ``(n, label)``,
        both in :meth:`neighbors` order.
        """
        m = self.vertex(label).matrix()
        phases = []
        for n in self.neighbors(label):
            e = self.edge_between(label, n)
            phases.append(e.phase_at(label) if e is not None else 0.0)
        d = np.exp(1j * np.asarray(phases))
        return d[:, None] * m * d[None, :]

    # -- validation --------------------------------------------------------
    def validate(self) -> None:
        labels = self.labels
        if len(set(labels)) != len(labels):
            raise GraphValidationError("duplicate vertex labels")
        for lab in labels:
            if not lab or lab.startswith("tail_") or any(c.isspace() for c in lab):
                raise GraphValidationError(f"invalid vertex label {lab!r}")
        known = set(labels)
        seen = set()
        for e in self.edges:
            for end in e.endpoints:
                if end not in known:
                    raise GraphValidationError(f"edge endpoint {end!r} is not a declared vertex")
            if e.key() in seen:
                raise GraphValidationError(f"duplicate edge {e.endpoints}")
            seen.add(e.key())
        for end, name in ((self.entry, "tail_in"), (self.exit, "tail_out")):
            if end not in known:
                raise GraphValidationError(f"{name} vertex {end!r} is not a declared vertex")
        for v in self.vertices:
            degree = len(self.neighbors(v.label))
            if degree != v.dimension:
                raise GraphValidationError(
                    f"vertex {v.label!r} has degree {degree} after tail attachment "
                    f"but its scattering rule has dimension {v.dimension}")
        unreached = known - _reachable(self.entry, self.edges)
        if unreached:
            warnings.warn(f"vertices not reachable from the entry vertex: {sorted(unreached)}",
                          GraphWarning, stacklevel=3)
        if self.exit in unreached:
            warnings.warn("exit vertex is not reachable from the entry vertex",
                          GraphWarning, stacklevel=3)


def _reachable(start: str, edges) -> set[str]:
    adj: dict[str, list[str]] = {}
    for e in edges:
        a, b = e.endpoints
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    seen = {start}
    queue = deque([start])
    while queue:
        v = queue.popleft()
        for n in adj.get(v, ()):
            if n not in seen:
                seen.add(n)
                queue.append(n)
    return seen


# ---------------------------------------------------------------------------
# Edge basis
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EdgeBasis:
    """Ordered oriented edges of a tailed graph cut to a finite window.

    Order: interior oriented edges sorted by ``(from, to)``; then incoming-tail
    edges by decreasing distance (inward orientation first); then
    outgoing-tail edges by increasing distance (outward orientation first).
    """
    edges: tuple[Edge, ...]
    n_interior: int
    tail_length: int
    entry: str
    exit: str
    index: dict = field(compare=False, repr=False, hash=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "index", {e: i for i, e in enumerate(self.edges)})

    def __len__(self) -> int:
        return len(self.edges)

    def __contains__(self, edge) -> bool:
        return tuple(edge) in self.index

    def position(self, edge: Edge) -> int:
        try:
            return self.index[tuple(edge)]
        except KeyError:
            raise KeyError(f"oriented edge {edge} is not in the basis") from None

    @property
    def interior(self) -> slice:
        return slice(0, self.n_interior)

    # the four tail edges adjacent to the graph
    @property
    def incoming_left(self) -> Edge:
        return (tail_label(TAIL_IN, 1), self.entry)

    @property
    def outgoing_left(self) -> Edge:
        return (self.entry, tail_label(TAIL_IN, 1))

    @property
    def outgoing_right(self) -> Edge:
        return (self.exit, tail_label(TAIL_OUT, 1))

    @property
    def incoming_right(self) -> Edge:
        return (tail_label(TAIL_OUT, 1), self.exit)

    def tail_position(self, edge: Edge) -> tuple[str, int, bool] | None:
        """``(side, distance, outward)`` for a tail edge, ``None`` if interior."""
        a, b = edge
        for side in (TAIL_IN, TAIL_OUT):
            da, db = _tail_distance(a, side), _tail_distance(b, side)
            if da is None and db is None:
                continue
            da = 0 if da is None else da
            db = 0 if db is None else db
            return side, max(da, db), db > da
        return None

    def reversed_permutation(self) -> np.ndarray:
        """Index array ``p`` with ``edges[p[i]] == reversed(edges[i])``."""
        return np.array([self.index[(b, a)] for a, b in self.edges], dtype=np.intp)


def _tail_distance(label: str, side: str) -> int | None:
    prefix = side + ":"
    if label.startswith(prefix):
        return int(label[len(prefix):])
    return None


def interior_edges(graph: TailedGraph) -> list[Edge]:
    out = []
    for e in graph.edges:
        a, b = e.endpoints
        out.extend([(a, b), (b, a)])
    return sorted(out)


def truncate(graph: TailedGraph, tail_length: int) -> EdgeBasis:
    """Finite window: interior edges plus ``tail_length`` edges on each tail."""
    if int(tail_length) != tail_length or tail_length < 1:
        raise ValueError(f"tail_length must be a positive integer, got {tail_length!r}")
    edges = interior_edges(graph)
    n_interior = len(edges)

    def inner(side, d, attach):
        return attach if d == 1 else tail_label(side, d - 1)

    for d in range(tail_length, 0, -1):
        outer = tail_label(TAIL_IN, d)
        near = inner(TAIL_IN, d, graph.entry)
        edges.extend([(outer, near), (near, outer)])
    for d in range(1, tail_length + 1):
        outer = tail_label(TAIL_OUT, d)
        near = inner(TAIL_OUT, d, graph.exit)
        edges.extend([(near, outer), (outer, near)])
    return EdgeBasis(tuple(edges), n_interior, int(tail_length), graph.entry, graph.exit)


# ---------------------------------------------------------------------------
# Text format
# ---------------------------------------------------------------------------

def _parse_kind(tokens: list[str], lineno: int) -> VertexKind:
    if not tokens:
        raise GraphFormatError("missing vertex kind", lineno)
    name, args = tokens[0], tokens[1:]
    try:
        if name == "grover":
            if len(args) != 1:
                raise GraphFormatError("grover takes exactly one degree", lineno)
            return Grover(int(args[0]))
        if name == "free":
            if args:
                raise GraphFormatError("free takes no arguments", lineno)
            return Free()
        if name == "two_port":
            if len(args) != 4:
                raise GraphFormatError("two_port takes <re_t> <im_t> <re_r> <im_r>", lineno)
            re_t, im_t, re_r, im_r = map(float, args)
            return TwoPort(complex(re_t, im_t), complex(re_r, im_r))
        if name == "custom":
            n = math.isqrt(len(args))
            if n == 0 or n * n != len(args):
                raise GraphFormatError(
                    f"custom needs a square number of entries, got {len(args)}", lineno)
            vals = [complex(a) for a in args]
            return Custom(tuple(tuple(vals[i * n:(i + 1) * n]) for i in range(n)))
        if name == "phase":
            if not args:
                raise GraphFormatError("phase needs an angle and an inner kind", lineno)
            return VertexPhase(float(args[0]), _parse_kind(args[1:], lineno))
    except GraphValidationError as exc:
        raise GraphFormatError(str(exc), lineno) from None
    except ValueError as exc:
        if isinstance(exc, GraphFormatError):
            raise
        raise GraphFormatError(f"bad number: {exc}", lineno) from None
    raise GraphFormatError(f"unknown vertex kind {name!r}", lineno)


def parse_graph(text: str) -> TailedGraph:
    """Parse the line-oriented graph format into a validated :class:`TailedGraph`."""
    vertices: list[VertexSpec] = []
    edges: list[EdgeSpec] = []
    entry = exit_ = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        head = tokens[0]
        if head == "vertex":
            if len(tokens) < 3:
                raise GraphFormatError("expected: vertex <label> <kind> ...", lineno)
            vertices.append(VertexSpec(tokens[1], _parse_kind(tokens[2:], lineno)))
        elif head == "edge":
            if len(tokens) < 3:
                raise GraphFormatError("expected: edge <labelA> <labelB>", lineno)
            phases = {}
            for opt in tokens[3:]:
                if not opt.startswith("phase@") or "=" not in opt:
                    raise GraphFormatError(f"bad edge option {opt!r}", lineno)
                label, value = opt[len("phase@"):].split("=", 1)
                try:
                    phases[label] = float(value)
                except ValueError:
                    raise GraphFormatError(f"bad phase value {value!r}", lineno) from None
            try:
                edges.append(EdgeSpec((tokens[1], tokens[2]), tuple(phases.items())))
            except GraphValidationError as exc:
                raise GraphFormatError(str(exc), lineno) from None
        elif head in ("tail_in", "tail_out"):
            if len(tokens) != 2:
                raise GraphFormatError(f"expected: {head} <label>", lineno)
            if head == "tail_in":
                if entry is not None:
                    raise GraphFormatError("tail_in declared twice", lineno)
                entry = tokens[1]
            else:
                if exit_ is not None:
                    raise GraphFormatError("tail_out declared twice", lineno)
                exit_ = tokens[1]
        else:
            raise GraphFormatError(f"unknown directive {head!r}", lineno)
    if entry is None or exit_ is None:
        raise GraphFormatError("missing tail_in or tail_out declaration")
    try:
        return TailedGraph(tuple(vertices), tuple(edges), entry, exit_)
    except GraphValidationError as exc:
        raise GraphFormatError(str(exc)) from None


def _format_kind(kind: VertexKind) -> str:
    if isinstance(kind, Grover):
        return f"grover {kind.degree}"
    if isinstance(kind, Free):
        return "free"
    if isinstance(kind, TwoPort):
        t, r = kind.t, kind.r
        return f"two_port {t.real!r} {t.imag!r} {r.real!r} {r.imag!r}"
    if isinstance(kind, Custom):
        return "custom " + " ".join(repr(x) for row in kind.matrix_rows for x in row)
    if isinstance(kind, VertexPhase):
        return f"phase {kind.phi!r} {_format_kind(kind.inner)}"
    raise TypeError(f"unknown vertex kind {kind!r}")


def serialize_graph(graph: TailedGraph) -> str:
    lines = []
    for v in graph.vertices:
        lines.append(f"vertex {v.label} {_format_kind(v.kind)}")
    for e in graph.edges:
        a, b = e.endpoints
        opts = "".join(f" phase@{lab}={phi!r}" for lab, phi in e.endpoint_phase)
        lines.append(f"edge {a} {b}{opts}")
    lines.append(f"tail_in {graph.entry}")
    lines.append(f"tail_out {graph.exit}")
    return "\n".join(lines) + "\n"


def load_graph(path) -> TailedGraph:
    with open(path, encoding="utf-8") as fh:
        return parse_graph(fh.read())
