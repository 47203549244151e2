import warnings

import numpy as np
import pytest

from qwscatter.graph_model import (
    Custom, EdgeSpec, Free, GraphFormatError, GraphValidationError, GraphWarning, Grover,
    TailedGraph, TwoPort, VertexPhase, VertexSpec, grover_coefficients, interior_edges,
    neighbor_sort_key, parse_graph, serialize_graph, truncate, load_graph,
)
from qwscatter.oracles import build_diamond, build_line

DIAMOND_FILE = """\
# two-arm interferometer
vertex 0 grover 3
vertex 1A free
vertex 1B phase 0.5 free
vertex 2 grover 3
edge 0 1A
edge 0 1B
edge 1A 2
edge 1B 2
tail_in 0
tail_out 2
"""


class TestGroverCoefficients:
    def test_degree_three(self):
        r, t = grover_coefficients(3)
        assert r == pytest.approx(-1 / 3, abs=1e-15)
        assert t == pytest.approx(2 / 3, abs=1e-15)

    def test_degree_two_is_free(self):
        assert grover_coefficients(2) == (0, 1)

    def test_degree_four(self):
        r, t = grover_coefficients(4)
        assert (r, t) == (-0.5, 0.5)
        assert abs(3 * abs(t) ** 2 + abs(r) ** 2 - 1) < 1e-15
        assert abs(2 * abs(t) ** 2 + np.conj(r) * t + np.conj(t) * r) < 1e-15

    @pytest.mark.parametrize("bad", [0, -1, 2.5])
    def test_rejects_bad_degree(self, bad):
        with pytest.raises(ValueError):
            grover_coefficients(bad)

    def test_matrix_unitary(self):
        m = Grover(5).matrix()
        assert np.allclose(m.conj().T @ m, np.eye(5), atol=1e-15)


class TestVertexKinds:
    def test_two_port_norm_enforced(self):
        with pytest.raises(GraphValidationError):
            TwoPort(0.8, 0.8)

    def test_two_port_matrix_layout(self):
        t, r = 0.6j, 0.8
        m = TwoPort(t, r).matrix()
        # in-port L goes to out-port R with t, back to L with r
        assert m[1, 0] == t and m[0, 0] == r
        assert m[0, 1] == np.conj(t) and m[1, 1] == -np.conj(r)

    def test_free_is_two_port_one_zero(self):
        assert np.array_equal(Free().matrix(), TwoPort(1, 0).matrix())

    def test_custom_must_be_unitary(self):
        with pytest.raises(GraphValidationError):
            Custom(((1, 1), (0, 1)))

    def test_custom_must_be_square(self):
        with pytest.raises(GraphValidationError):
            Custom(((1, 0),))

    def test_vertex_phase_multiplies_everything(self):
        m = VertexPhase(0.7, Grover(3)).matrix()
        assert np.allclose(m, np.exp(0.7j) * Grover(3).matrix())


class TestTailedGraph:
    def test_diamond_counts(self):
        g = build_diamond(0.3)
        assert len(g.vertices) == 4 and len(g.edges) == 4
        assert len(interior_edges(g)) == 8

    def test_tail_neighbour_order(self):
        assert neighbor_sort_key("tail_in:1") < neighbor_sort_key("A")
        assert neighbor_sort_key("zzz") < neighbor_sort_key("tail_out:1")
        g = build_line(1, 0, 3)
        assert g.neighbors("v0") == ["tail_in:1", "v1"]
        assert g.neighbors("v2") == ["v1", "tail_out:1"]

    def test_degree_mismatch(self):
        with pytest.raises(GraphValidationError, match="degree"):
            TailedGraph((VertexSpec("a", Grover(3)), VertexSpec("b", Grover(2))),
                        (EdgeSpec(("a", "b")),), "a", "b")

    def test_single_pass_through_vertex(self):
        g = TailedGraph((VertexSpec("x", Grover(2)),), (), "x", "x")
        assert g.neighbors("x") == ["tail_in:1", "tail_out:1"]

    def test_duplicate_edge(self):
        with pytest.raises(GraphValidationError, match="duplicate"):
            TailedGraph((VertexSpec("a", Grover(3)), VertexSpec("b", Grover(3))),
                        (EdgeSpec(("a", "b")), EdgeSpec(("b", "a"))), "a", "b")

    def test_reserved_label(self):
        with pytest.raises(GraphValidationError):
            TailedGraph((VertexSpec("tail_x", Grover(2)),), (), "tail_x", "tail_x")

    def test_phase_on_non_endpoint(self):
        with pytest.raises(GraphValidationError):
            EdgeSpec(("a", "b"), (("c", 1.0),))

    def test_unreachable_warns(self):
        vs = (VertexSpec("a", Grover(2)),) + tuple(VertexSpec(x, Grover(2)) for x in "bcd")
        ring = (EdgeSpec(("b", "c")), EdgeSpec(("c", "d")), EdgeSpec(("b", "d")))
        with pytest.warns(GraphWarning):
            TailedGraph(vs, ring, "a", "a")

    def test_connected_graph_is_quiet(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            build_diamond(0.0)

    def test_endpoint_phase_applied_both_ways(self):
        phi = 0.4
        g = TailedGraph(
            (VertexSpec("a", Free()), VertexSpec("b", TwoPort(0.6, 0.8))),
            (EdgeSpec(("a", "b"), (("b", phi),)),), "a", "b")
        m = g.local_unitary("b")
        # port 0 of b is a (phased), port 1 is the outgoing tail
        base = TwoPort(0.6, 0.8).matrix()
        e = np.exp(1j * phi)
        assert m[1, 0] == pytest.approx(base[1, 0] * e)
        assert m[0, 0] == pytest.approx(base[0, 0] * e * e)
        assert m[0, 1] == pytest.approx(base[0, 1] * e)
        assert m[1, 1] == pytest.approx(base[1, 1])


class TestTruncate:
    def test_diamond_size(self):
        assert len(truncate(build_diamond(0.0), 5)) == 28

    def test_tail_length_one(self):
        g = build_diamond(0.0)
        assert len(truncate(g, 1)) == 2 * len(g.edges) + 4

    def test_order(self):
        b = truncate(build_diamond(0.0), 2)
        assert b.edges[:8] == tuple(sorted(b.edges[:8]))
        assert b.edges[8:] == (
            ("tail_in:2", "tail_in:1"), ("tail_in:1", "tail_in:2"),
            ("tail_in:1", "0"), ("0", "tail_in:1"),
            ("2", "tail_out:1"), ("tail_out:1", "2"),
            ("tail_out:1", "tail_out:2"), ("tail_out:2", "tail_out:1"),
        )

    def test_deterministic(self):
        assert truncate(build_diamond(1.0), 4).edges == truncate(build_diamond(1.0), 4).edges

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            truncate(build_diamond(0.0), 0)

    def test_tail_position(self):
        b = truncate(build_diamond(0.0), 3)
        assert b.tail_position(("2", "tail_out:1")) == ("tail_out", 1, True)
        assert b.tail_position(("tail_in:3", "tail_in:2")) == ("tail_in", 3, False)
        assert b.tail_position(("0", "1A")) is None

    def test_reversed_permutation(self):
        b = truncate(build_diamond(0.0), 2)
        p = b.reversed_permutation()
        for i, (x, y) in enumerate(b.edges):
            assert b.edges[p[i]] == (y, x)


class TestFileFormat:
    def test_parse_diamond(self):
        g = parse_graph(DIAMOND_FILE)
        assert g.entry == "0" and g.exit == "2"
        assert len(g.vertices) == 4 and len(g.edges) == 4
        assert g.vertex("1B").kind == VertexPhase(0.5, Free())

    def test_round_trip(self):
        g = parse_graph(DIAMOND_FILE)
        assert parse_graph(serialize_graph(g)) == g

    def test_round_trip_all_kinds(self):
        c = Custom.from_array(np.array([[0, 1j], [1, 0]]))
        g = TailedGraph(
            (VertexSpec("a", TwoPort(np.exp(0.1j) * 0.6, 0.8j)), VertexSpec("b", c),
             VertexSpec("c", VertexPhase(1 / 3, Grover(2)))),
            (EdgeSpec(("a", "b"), (("a", 0.1), ("b", 2 / 7))), EdgeSpec(("b", "c"))),
            "a", "c")
        assert parse_graph(serialize_graph(g)) == g

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "d.qw"
        path.write_text(DIAMOND_FILE)
        assert load_graph(path) == parse_graph(DIAMOND_FILE)

    def test_edge_phase_option(self):
        text = DIAMOND_FILE.replace("edge 0 1A", "edge 0 1A phase@1A=0.25")
        assert parse_graph(text).edge_between("0", "1A").phase_at("1A") == 0.25

    @pytest.mark.parametrize("text, line", [
        ("vertex a grover\n", 1),
        ("vertex a grover 2\nvertex b wobble\n", 2),
        ("vertex a grover 2\nedge a\n", 2),
        ("vertex a grover 2\nfrobnicate\n", 2),
        ("vertex a two_port 1 0 0\n", 1),
        ("vertex a custom 1 0 0\n", 1),
        ("vertex a grover 2\nedge a b phase@a=x\n", 2),
        ("vertex a grover 2\ntail_in a\ntail_in a\n", 3),
    ])
    def test_syntax_errors_carry_line(self, text, line):
        with pytest.raises(GraphFormatError) as info:
            parse_graph(text)
        assert info.value.line == line

    def test_missing_tail(self):
        with pytest.raises(GraphFormatError, match="tail"):
            parse_graph("vertex a grover 1\ntail_in a\n")

    def test_degree_mismatch_in_file(self):
        text = "vertex a grover 3\nvertex b grover 2\nedge a b\ntail_in a\ntail_out b\n"
        with pytest.raises(GraphFormatError, match="degree"):
            parse_graph(text)

    def test_non_unitary_custom(self):
        text = "vertex a custom 1 1 0 1\ntail_in a\ntail_out a\n"
        with pytest.raises(GraphFormatError, match="unitary"):
            parse_graph(text)

    def test_single_grover2_vertex(self):
        g = parse_graph("vertex x grover 2\ntail_in x\ntail_out x\n")
        assert g.neighbors("x") == ["tail_in:1", "tail_out:1"]
