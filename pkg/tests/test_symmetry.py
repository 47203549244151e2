import numpy as np
import pytest

from qwscatter.graph_model import (
    Custom, EdgeSpec, Grover, TailedGraph, TwoPort, VertexPhase, VertexSpec, truncate,
)
from qwscatter.oracles import build_diamond, build_line, random_grover_graph
from qwscatter.scattering import amplitudes_on, build_problem
from qwscatter.step_operator import WalkState, build
from qwscatter.symmetry import (
    NotTimeReversalInvariantError, bound_state_reversal, check_invariance, time_reverse,
    time_reverse_operator, verify_transmission_symmetry,
)

SKEW = TwoPort(np.exp(1j * np.pi / 4) / np.sqrt(2), 1 / np.sqrt(2))


class TestTimeReverse:
    def test_reverses_edge(self):
        b = truncate(build_diamond(0.0), 2)
        out = time_reverse(WalkState.on_edge(b, ("0", "1A")))
        assert out.amplitude(("1A", "0")) == 1

    def test_antilinear(self):
        b = truncate(build_diamond(0.0), 2)
        out = time_reverse(WalkState.on_edge(b, ("0", "1A"), 1j))
        assert out.amplitude(("1A", "0")) == -1j

    def test_involution(self, rng):
        b = truncate(build_diamond(0.0), 3)
        psi = WalkState(b, rng.normal(size=len(b)) + 1j * rng.normal(size=len(b)))
        assert np.array_equal(time_reverse(time_reverse(psi)).amplitudes, psi.amplitudes)


class TestCheckInvariance:
    @pytest.mark.parametrize("phi", [0.0, 1.3])
    def test_diamond(self, phi):
        report = check_invariance(build(build_diamond(phi), 2))
        assert report.invariant and report.worst_violation < 1e-12
        assert report.witness is None or report.worst_violation == 0

    def test_random_grover_with_phases(self):
        g = random_grover_graph(np.random.default_rng(5), 10, phase_prob=1.0)
        assert check_invariance(build(g, 2)).invariant

    def test_complex_two_port_violates(self):
        g = build_line(SKEW.t, SKEW.r, 3)
        report = check_invariance(build(g, 2))
        assert not report.invariant
        assert report.worst_violation == pytest.approx(2 * abs(SKEW.t.imag))
        assert report.witness[0].startswith("v")

    def test_symmetric_custom(self):
        m = np.array([[0.6, 0.8j], [0.8j, 0.6]])
        g = TailedGraph((VertexSpec("x", Custom.from_array(m)),), (), "x", "x")
        assert check_invariance(build(g, 2)).invariant

    def test_matches_operator_identity(self):
        for g, expect in ((build_diamond(0.9), True), (build_line(SKEW.t, SKEW.r, 3), False)):
            U = build(g, 3)
            udag = U.dense().conj().T
            holds = np.max(np.abs(time_reverse_operator(U) - udag)) < 1e-12
            assert holds == expect == check_invariance(U).invariant


class TestTransmissionSymmetry:
    @pytest.mark.parametrize("phi", [0.0, 0.7, np.pi])
    def test_diamond(self, phi):
        res = verify_transmission_symmetry(build_diamond(phi))
        assert res.max_diff < 1e-10
        assert res.norm_residual < 1e-10 and res.cross_residual < 1e-10

    def test_mirror_symmetric_graph(self):
        g = TailedGraph(
            (VertexSpec("a", Grover(3)), VertexSpec("m", VertexPhase(0.4, Grover(2))),
             VertexSpec("n", Grover(2)), VertexSpec("b", Grover(3))),
            (EdgeSpec(("a", "m")), EdgeSpec(("m", "b")), EdgeSpec(("a", "n")),
             EdgeSpec(("n", "b"))), "a", "b")
        res = verify_transmission_symmetry(g)
        left, right = build_problem(g, "left"), build_problem(g, "right")
        zs = np.exp(1j * res.thetas)
        assert np.max(np.abs(amplitudes_on(left, zs)[1] - amplitudes_on(right, zs)[1])) < 1e-12

    def test_precondition(self):
        with pytest.raises(NotTimeReversalInvariantError):
            verify_transmission_symmetry(build_line(SKEW.t, SKEW.r, 2))


def test_bound_state_reversal_on_diamond(diamond0_problem):
    p = diamond0_problem
    kinds = bound_state_reversal(p)
    assert len(kinds) == 4
    perm = p.basis.reversed_permutation()[: p.n_interior]
    B = p.bound_basis
    for b in p.bound_states:
        tu = np.conj(b.vector[perm])
        # T u is again a bound state of the same eigenvalue
        assert np.linalg.norm(p.G @ tu - b.eigenvalue * tu) < 1e-8
        assert np.linalg.norm(tu - B @ (B.conj().T @ tu)) < 1e-8
    assert set(kinds) <= {"self-conjugate", "degenerate"}
