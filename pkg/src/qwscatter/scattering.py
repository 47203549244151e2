"""
Transmission and reflection amplitudes of a tailed graph, and what follows
from them: bound states, Taylor coefficients, first-arrival probabilities,
the conditional hitting time, and the 2x2 S matrix.

Everything is built from the block of the step operator that acts on the
interior edges,

    G = P_G U P_G,

and the injection vector ``w = P_G U |in>``. Writing ``psi_G(z)`` for the
interior part of the generalized eigenvector with ``U psi = psi / z``,

    (I - z G1) psi_G(z) = z w,
    t(z) = z (<out_t|U|in> + <out_t|U|psi_G(z)>),
    r(z) = z (<out_r|U|in> + <out_r|U|psi_G(z)>),

where ``G1`` is ``G`` compressed to the orthogonal complement of the bound
states (unit-modulus eigenvectors of ``G``). On that complement ``G1`` has
spectral radius below one, so ``t`` and ``r`` are analytic on a disc of
radius larger than one, and the Taylor coefficients of ``t`` are the
first-arrival amplitudes of the walk.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .graph_model import TailedGraph, truncate
from .step_operator import StepOperator, assemble

BOUND_TOL = 1e-8
CLUSTER_TOL = 1e-6
COEFF_TOL = 1e-12
MIN_SAMPLES = 256
MAX_DOUBLINGS = 4
P_OUT_FLOOR = 1e-12
FALLBACK_AMPLIFICATION = 1e3
COND_LIMIT = 1e12              # beyond this the solve has < 4 reliable digits
_CHUNK = 128


class IllConditionedError(ArithmeticError):
    """``I - z G1`` is numerically singular at the requested ``z``."""


class EigensolverError(ArithmeticError):
    pass


class ConvergenceError(ArithmeticError):
    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class UndefinedHittingTimeError(ArithmeticError):
    """The exit is (numerically) never reached, so ``h`` has no value."""

    def __init__(self, p_out: float, tail_bound: float):
        super().__init__(
            f"arrival probability {p_out:.3e} is below {P_OUT_FLOOR:g}; "
            "conditional hitting time is undefined")
        self.p_out = p_out
        self.tail_bound = tail_bound


# ---------------------------------------------------------------------------
# Problem assembly
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundState:
    eigenvalue: complex
    vector: np.ndarray


@dataclass(frozen=True)
class ScatteringProblem:
    graph: TailedGraph
    direction: str
    U: StepOperator               # tail window of length 1
    G: np.ndarray
    w: np.ndarray
    direct_reflect: complex       # <out_r|U|in>
    direct_transmit: complex      # <out_t|U|in>
    y_reflect: np.ndarray         # row <out_r|U restricted to interior edges
    y_transmit: np.ndarray
    inject_edge: tuple
    reflect_edge: tuple
    transmit_edge: tuple
    bound_states: tuple
    bound_basis: np.ndarray       # 2N x K, orthonormal columns
    complement: np.ndarray        # 2N x (2N-K), orthonormal basis of H1
    G1: np.ndarray                # P1 G P1 on the full interior space
    G1_reduced: np.ndarray        # complement^dagger G complement
    w_reduced: np.ndarray

    @property
    def basis(self):
        return self.U.basis

    @property
    def n_interior(self) -> int:
        return self.G.shape[0]

    def embed(self, interior_vector) -> np.ndarray:
        """Zero-pad an interior vector to the problem's full window."""
        full = np.zeros(len(self.basis), dtype=complex)
        full[: self.n_interior] = interior_vector
        return full


def _readonly(a):
    a = np.array(a, dtype=complex)
    a.flags.writeable = False
    return a


def find_bound_states(G: np.ndarray, tol: float = BOUND_TOL) -> list[BoundState]:
    """Unit-modulus eigenpairs of the interior block.

    Eigenvalues with ``||lambda| - 1| < tol`` are grouped into clusters; the
    eigenspace of each cluster is taken as the numerical null space of
    ``G - lambda I`` so that degenerate eigenvalues get an orthonormal basis.
    """
    G = np.asarray(G, dtype=complex)
    n = G.shape[0]
    if n == 0:
        return []
    try:
        evals = sla.eigvals(G)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigensolverError(f"eigenvalue computation failed: {exc}") from exc
    if not np.all(np.isfinite(evals)):
        raise EigensolverError("eigensolver returned non-finite eigenvalues")
    unit = sorted((lam for lam in evals if abs(abs(lam) - 1.0) < tol),
                  key=lambda lam: (np.angle(lam) % (2 * np.pi)))
    clusters: list[list[complex]] = []
    for lam in unit:
        if clusters and abs(lam - clusters[-1][-1]) < CLUSTER_TOL:
            clusters[-1].append(lam)
        else:
            clusters.append([lam])
    if len(clusters) > 1 and abs(clusters[0][0] - clusters[-1][-1]) < CLUSTER_TOL:
        clusters[0].extend(clusters.pop())

    states = []
    for cluster in clusters:
        lam = np.mean(cluster)
        lam /= abs(lam)
        _, s, vh = np.linalg.svd(G - lam * np.eye(n))
        null = vh[s < np.sqrt(tol)].conj().T
        if null.shape[1] != len(cluster):
            raise EigensolverError(
                f"eigenvalue {lam:.6g}: algebraic multiplicity {len(cluster)} "
                f"but {null.shape[1]} null vectors")
        for k in range(null.shape[1]):
            v = null[:, k]
            mu = complex(v.conj() @ G @ v)
            states.append(BoundState(mu, _readonly(v)))
    return states


def _injection_edges(basis, direction: str):
    if direction == "left":
        return basis.incoming_left, basis.outgoing_left, basis.outgoing_right
    if direction == "right":
        return basis.incoming_right, basis.outgoing_right, basis.outgoing_left
    raise ValueError(f"direction must be 'left' or 'right', got {direction!r}")


def build_problem(graph: TailedGraph, direction: str = "left") -> ScatteringProblem:
    """Set up the interior linear problem for a wave incident from one tail.

    ``left`` injects along the incoming tail (reflection returns there,
    transmission leaves on the outgoing tail); ``right`` is the mirror case.
    """
    U = assemble(graph, truncate(graph, 1))
    basis = U.basis
    inj, refl, trans = _injection_edges(basis, direction)
    n = basis.n_interior
    dense = U.dense()
    i_in, i_r, i_t = (basis.position(e) for e in (inj, refl, trans))
    G = dense[:n, :n]
    w = dense[:n, i_in]

    bound = find_bound_states(G)
    if bound:
        B = np.column_stack([b.vector for b in bound])
        # orthonormalize across clusters too (they are orthogonal in exact arithmetic)
        B, _ = np.linalg.qr(B)
    else:
        B = np.zeros((n, 0), dtype=complex)
    if n:
        Q = sla.null_space(B.conj().T) if B.shape[1] else np.eye(n, dtype=complex)
    else:
        Q = np.zeros((0, 0), dtype=complex)
    P1 = Q @ Q.conj().T
    return ScatteringProblem(
        graph=graph,
        direction=direction,
        U=U,
        G=_readonly(G),
        w=_readonly(w),
        direct_reflect=complex(dense[i_r, i_in]),
        direct_transmit=complex(dense[i_t, i_in]),
        y_reflect=_readonly(dense[i_r, :n]),
        y_transmit=_readonly(dense[i_t, :n]),
        inject_edge=inj,
        reflect_edge=refl,
        transmit_edge=trans,
        bound_states=tuple(bound),
        bound_basis=_readonly(B),
        complement=_readonly(Q),
        G1=_readonly(P1 @ G @ P1),
        G1_reduced=_readonly(Q.conj().T @ G @ Q),
        w_reduced=_readonly(Q.conj().T @ w),
    )


# ---------------------------------------------------------------------------
# Amplitudes
# ---------------------------------------------------------------------------

def amplitudes_at(problem: ScatteringProblem, z: complex):
    """Return ``(t(z), r(z), psi_G(z))``.

    Raises :class:`IllConditionedError` when ``I - z G1`` cannot be solved
    reliably, which happens for ``z`` at or beyond the radius of analyticity.
    """
    z = complex(z)
    m = problem.G1_reduced.shape[0]
    if m:
        a = np.eye(m) - z * problem.G1_reduced
        cond = np.linalg.cond(a)
        if not cond < COND_LIMIT:
            raise IllConditionedError(
                f"I - zG1 is ill-conditioned at z={z} (condition number {cond:.3e})")
        with warnings.catch_warnings():
            warnings.simplefilter("error", sla.LinAlgWarning)
            try:
                y = sla.solve(a, problem.w_reduced)
            except (sla.LinAlgWarning, np.linalg.LinAlgError) as exc:
                raise IllConditionedError(f"I - zG1 is singular at z={z}: {exc}") from exc
        v = problem.complement @ y
    else:
        v = np.zeros(problem.n_interior, dtype=complex)
    # v solves (I - zG1) v = w; the interior state is z v
    s_t = problem.direct_transmit + problem.y_transmit @ (z * v)
    s_r = problem.direct_reflect + problem.y_reflect @ (z * v)
    return z * s_t, z * s_r, z * v


def condition_number(problem: ScatteringProblem, z: complex) -> float:
    m = problem.G1_reduced.shape[0]
    if m == 0:
        return 1.0
    return float(np.linalg.cond(np.eye(m) - complex(z) * problem.G1_reduced))


def _reduced_solutions(problem: ScatteringProblem, zs: np.ndarray) -> np.ndarray:
    """Rows are ``y(z)`` with ``(I - z G1) Q y = w`` for each ``z``."""
    m = problem.G1_reduced.shape[0]
    out = np.empty((len(zs), m), dtype=complex)
    if m == 0:
        return out
    eye = np.eye(m)
    for lo in range(0, len(zs), _CHUNK):
        zc = zs[lo:lo + _CHUNK]
        a = eye[None, :, :] - zc[:, None, None] * problem.G1_reduced[None, :, :]
        b = np.broadcast_to(problem.w_reduced, (len(zc), m))[..., None]
        out[lo:lo + _CHUNK] = np.linalg.solve(a, b)[..., 0]
    if not np.all(np.isfinite(out)):
        raise IllConditionedError("non-finite solution of I - zG1")
    return out


def _reduced_amplitudes(problem: ScatteringProblem, zs: np.ndarray):
    """``t(z)/z`` and ``r(z)/z`` at many points (the factor ``z`` split off)."""
    zs = np.asarray(zs, dtype=complex)
    y = _reduced_solutions(problem, zs)
    yt = problem.complement.T @ problem.y_transmit if y.shape[1] else np.zeros(0)
    yr = problem.complement.T @ problem.y_reflect if y.shape[1] else np.zeros(0)
    s_t = problem.direct_transmit + zs * (y @ yt)
    s_r = problem.direct_reflect + zs * (y @ yr)
    return s_t, s_r


def amplitudes_on(problem: ScatteringProblem, zs) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized ``t(z)`` and ``r(z)``."""
    zs = np.asarray(zs, dtype=complex)
    s_t, s_r = _reduced_amplitudes(problem, zs)
    return zs * s_t, zs * s_r


def transmission_derivative(problem: ScatteringProblem, zs) -> np.ndarray:
    """``dt/dz`` from differentiating the interior solve analytically."""
    zs = np.asarray(zs, dtype=complex)
    m = problem.G1_reduced.shape[0]
    y = _reduced_solutions(problem, zs)
    # t = z d + z^2 c.y(z);  (I - zG1) y' = G1 y
    dt = problem.direct_transmit * np.ones_like(zs)
    if m:
        c = problem.complement.T @ problem.y_transmit
        eye = np.eye(m)
        dy = np.empty_like(y)
        for i, z in enumerate(zs):
            dy[i] = np.linalg.solve(eye - z * problem.G1_reduced, problem.G1_reduced @ y[i])
        dt = dt + 2 * zs * (y @ c) + zs ** 2 * (dy @ c)
    return dt


def reflected_transmission(problem: ScatteringProblem, z) -> np.ndarray:
    """``t_R(z) = conj(t(conj(z)))``."""
    z = np.asarray(z, dtype=complex)
    t, _ = amplitudes_on(problem, np.atleast_1d(np.conj(z)))
    return np.conj(t).reshape(z.shape)


# ---------------------------------------------------------------------------
# Taylor coefficients and hitting statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AmplitudeSeries:
    n_samples: int
    thetas: np.ndarray
    t_samples: np.ndarray         # t at the n_samples-th roots of unity
    r_samples: np.ndarray
    coefficients: np.ndarray      # c_0 .. c_nmax of t(z)
    band: np.ndarray              # reliable coefficients c_0 .. c_K, K >= n_max
    residual: float               # last change of c_0..c_nmax under doubling
    decay_rate: float | None      # fitted |c_n| ~ C rho^n, None if no fit
    radius: float = 1.0           # contour radius the coefficients came from

    @property
    def n_max(self) -> int:
        return len(self.coefficients) - 1

    @property
    def q(self) -> np.ndarray:
        return np.abs(self.coefficients) ** 2


def _circle_samples(problem: ScatteringProblem, m: int, radius: float = 1.0):
    thetas = 2 * np.pi * np.arange(m) / m
    zs = radius * np.exp(1j * thetas)
    s_t, s_r = _reduced_amplitudes(problem, zs)
    return thetas, zs, s_t, s_r


def _band(s_t: np.ndarray, radius: float, length: int) -> np.ndarray:
    # c_{n+1} is the n-th Taylor coefficient of t(z)/z; c_0 = 0 structurally
    d = np.fft.fft(s_t)[: length - 1] / len(s_t)
    band = np.zeros(length, dtype=complex)
    band[1:] = d if radius == 1.0 else d / radius ** np.arange(length - 1)
    return band


def _fit_decay(band: np.ndarray, start: int) -> float | None:
    mags = np.abs(band[start:])
    if len(mags) < 4:
        return None
    env = np.maximum.accumulate(mags[::-1])[::-1]
    keep = env > 1e-14
    if keep.sum() < 4:
        return None
    n = np.arange(start, len(band))[keep]
    slope = np.polyfit(n, np.log(env[keep]), 1)[0]
    if slope >= 0:
        return None
    return float(np.exp(slope))


def _settle(problem, n_max, m, radius, length, tol, max_doublings):
    """Double the sample count until c_0..c_nmax move by at most ``tol``."""
    _, _, s_t, _ = _circle_samples(problem, m, radius)
    band = _band(s_t, radius, length(m))
    residual = np.inf
    for _ in range(max_doublings):
        m *= 2
        _, _, s_t, _ = _circle_samples(problem, m, radius)
        new = _band(s_t, radius, length(m))
        residual = float(np.max(np.abs(new[: n_max + 1] - band[: n_max + 1])))
        band = new
        if residual <= tol:
            return True, m, band, residual
    return False, m, band, residual


def taylor_coefficients(problem: ScatteringProblem, n_max: int,
                        tol: float = COEFF_TOL,
                        max_doublings: int = MAX_DOUBLINGS,
                        radius_fallback: bool = True) -> AmplitudeSeries:
    """Taylor coefficients ``c_0..c_nmax`` of ``t(z)`` by discrete Fourier
    inversion of samples on the unit circle.

    The sample count starts at ``max(4 n_max, 256)`` and doubles until the
    coefficients stop moving by more than ``tol``. Graphs with nearly trapped
    modes decay too slowly for that; they are retried on a circle of radius
    ``rho = 1000**(-1/n_max)``, where aliasing is damped by ``rho**M`` and
    rounding is amplified by at most 1000.
    """
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    m0 = max(4 * n_max, MIN_SAMPLES)
    ok, m, band, residual = _settle(problem, n_max, m0, 1.0, lambda m: m // 2,
                                    tol, max_doublings)
    radius = 1.0
    if not ok and radius_fallback:
        radius = FALLBACK_AMPLIFICATION ** (-1.0 / n_max)
        # keep only coefficients whose rounding error is amplified <= 1e6
        reach = int(np.log(1e6) / -np.log(radius))
        ok, _, band, residual = _settle(
            problem, n_max, m0, radius, lambda m: min(m // 2, reach), tol, max_doublings)
    if not ok:
        raise ConvergenceError(
            f"Taylor coefficients did not settle to {tol:g} "
            f"(residual {residual:.3e}); the graph may be close to a bound state",
            residual)
    thetas, zs, s_t, s_r = _circle_samples(problem, m)
    return AmplitudeSeries(
        n_samples=m,
        thetas=thetas,
        t_samples=zs * s_t,
        r_samples=zs * s_r,
        coefficients=band[: n_max + 1].copy(),
        band=band,
        residual=residual,
        decay_rate=_fit_decay(band, n_max + 1),
        radius=radius,
    )


@dataclass(frozen=True)
class HittingStatistics:
    p_out: float            # sum of |c_n|^2 for n <= n_max
    h: float                # sum of n |c_n|^2, divided by p_out
    tail_bound: float       # estimate of sum of |c_n|^2 for n > n_max
    p_out_integral: float   # mean of |t|^2 over the circle samples


def _tail_bound(series: AmplitudeSeries) -> float:
    band = series.band
    inside = float(np.sum(np.abs(band[series.n_max + 1:]) ** 2))
    rho = series.decay_rate
    if rho is None or not band.size:
        return inside
    last = float(np.abs(band[-1]) ** 2)
    return inside + last * rho ** 2 / (1.0 - rho ** 2)


def arrival_probability(series: AmplitudeSeries) -> float:
    return float(np.sum(series.q))


def hitting_statistics(series: AmplitudeSeries) -> HittingStatistics:
    """Arrival probability and conditional hitting time from the coefficients.

    Raises :class:`UndefinedHittingTimeError` if the exit is never reached.
    """
    q = series.q
    p_out = float(np.sum(q))
    tail = _tail_bound(series)
    if p_out < P_OUT_FLOOR:
        raise UndefinedHittingTimeError(p_out, tail)
    h = float(np.sum(np.arange(len(q)) * q) / p_out)
    return HittingStatistics(
        p_out=p_out,
        h=h,
        tail_bound=tail,
        p_out_integral=float(np.mean(np.abs(series.t_samples) ** 2)),
    )


def contour_statistics(problem: ScatteringProblem, n_samples: int = 1024) -> tuple[float, float]:
    """``(P_out, h)`` from circle integrals of ``t``, its derivative and the
    reflected amplitude ``t_R``; independent of the Taylor coefficients."""
    thetas = 2 * np.pi * np.arange(n_samples) / n_samples
    zs = np.exp(1j * thetas)
    t, _ = amplitudes_on(problem, zs)
    t_refl = reflected_transmission(problem, 1.0 / zs)
    # dz = i z dtheta, so (1/2 pi i) \oint f dz = mean(f z)
    p_out = float(np.real(np.mean(t_refl * t)))
    if p_out < P_OUT_FLOOR:
        raise UndefinedHittingTimeError(p_out, 0.0)
    dt = transmission_derivative(problem, zs)
    h = float(np.real(np.mean(t_refl * dt * zs)) / p_out)
    return p_out, h


# ---------------------------------------------------------------------------
# S matrix and generalized eigenvectors
# ---------------------------------------------------------------------------

def s_matrix_from(left: ScatteringProblem, right: ScatteringProblem, theta) -> np.ndarray:
    """S(theta) = [[r_l, t_r], [t_l, r_r]] for an array of angles (shape ``(..., 2, 2)``)."""
    theta = np.asarray(theta, dtype=float)
    zs = np.exp(1j * np.atleast_1d(theta))
    t_l, r_l = amplitudes_on(left, zs)
    t_r, r_r = amplitudes_on(right, zs)
    s = np.empty((len(zs), 2, 2), dtype=complex)
    s[:, 0, 0], s[:, 0, 1], s[:, 1, 0], s[:, 1, 1] = r_l, t_r, t_l, r_r
    return s.reshape(theta.shape + (2, 2))


def s_matrix(graph: TailedGraph, theta: float) -> np.ndarray:
    return s_matrix_from(build_problem(graph, "left"), build_problem(graph, "right"), theta)


def unitarity_defect(s: np.ndarray) -> float:
    s = np.asarray(s)
    gram = np.conj(np.swapaxes(s, -1, -2)) @ s
    return float(np.max(np.abs(gram - np.eye(s.shape[-1]))))


def generalized_eigenvector(problem: ScatteringProblem, z: complex, tail_length: int):
    """Scattering solution ``Psi(z)`` on a window of the given tail length.

    Returns ``(U, psi)`` with ``U`` the window operator. ``z U psi = psi``
    holds on every edge except the two inward-pointing outermost tail edges,
    where the reflecting cut replaces the missing incoming wave.
    """
    z = complex(z)
    t, r, psi_g = amplitudes_at(problem, z)
    U = assemble(problem.graph, truncate(problem.graph, tail_length))
    basis = U.basis
    psi = np.zeros(len(basis), dtype=complex)
    psi[: basis.n_interior] = psi_g
    in_side = basis.tail_position(problem.inject_edge)[0]
    for i in range(basis.n_interior, len(basis)):
        side, d, outward = basis.tail_position(basis.edges[i])
        if side == in_side:
            psi[i] = r * z ** (d - 1) if outward else z ** (1 - d)
        elif outward:
            psi[i] = t * z ** (d - 1)
    return U, psi
