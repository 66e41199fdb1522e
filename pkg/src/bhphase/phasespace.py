"""SU(2)/SU(3) coherent-state phase-space calculus and samplers.

Measure convention
------------------
The invariant measure is flat in the canonical coordinates and normalized so
that coherent states resolve the identity:

    M = 2:  d mu = (N+1)/(2 pi) dp dq
    M = 3:  d mu = (N+1)(N+2)/(2 pi)^2 dp1 dp3 dq1 dq3

With this choice the Husimi function integrates to one for every state, and
first moments of the angular momentum operators obey

    <Jk> = (N+2) * Integral s_k(p, q) Q(p, q) d mu      (Husimi / Q route)
    <Jk> =  N    * Integral s_k(p, q) P(p, q) d mu      (Glauber-Sudarshan / P route)

with the classical Bloch vector s = (sqrt(p(1-p)) cos q, sqrt(p(1-p)) sin q,
p - 1/2).

Husimi zeros
------------
A pure two-mode state with amplitudes c_n (basis index n = n2) defines the
degree-N polynomial  B(z) = sum_n c_n sqrt(C(N,n)) z^n  whose roots are the
zeros of the Husimi function under z = tan(theta/2) e^{i q}; a degree deficit
counts as zeros at the point at infinity (p = 1).  Roots come from companion-
matrix eigenvalues after coefficient rescaling.

Samplers
--------
Each trajectory draws from its own counter-based stream derived from
(master seed, trajectory index), so ensembles are bit-identical no matter how
work is distributed.  The SU(2) Husimi law is u = cos^2(gamma/2) ~ Beta(N+1, 1)
with uniform azimuth; SU(3) uses u ~ Beta(N+1, 2) for the overlap with the
center plus a uniform point on the orthogonal CP^1; the Glauber-Husimi radial
marginal is alpha^2 ~ Gamma(N+2, 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .model import DensityMatrix, FockBasis, QuantumState, coherent_state
from .points import PhasePoint

_TWO_PI = 2.0 * np.pi


def measure_constant(particles: int, modes: int) -> float:
    """Normalization constant of the flat invariant measure."""
    n = particles
    if modes == 2:
        return (n + 1) / _TWO_PI
    if modes == 3:
        return (n + 1) * (n + 2) / _TWO_PI**2
    raise ValueError("measure defined for 2 or 3 modes")


def classical_bloch(p, q) -> np.ndarray:
    """s(p, q); broadcasts over array-valued p, q (components on axis 0)."""
    p, q = np.broadcast_arrays(p, q)
    r = np.sqrt(p * (1.0 - p))
    return np.array([r * np.cos(q), r * np.sin(q), p - 0.5])


# ---------------------------------------------------------------------------
# Husimi evaluation
# ---------------------------------------------------------------------------

def husimi_q(target, point: PhasePoint) -> float:
    """Q = <Omega|rho|Omega> (density) or |<Omega|psi>|^2 (pure state)."""
    basis = target.basis
    omega = coherent_state(basis, point).amplitudes
    if isinstance(target, QuantumState):
        return float(abs(np.vdot(omega, target.amplitudes)) ** 2)
    return float(np.real(np.vdot(omega, target.matrix @ omega)))


def _radial_coefficients(particles: int, p_axis: np.ndarray) -> np.ndarray:
    """R[i, n] = sqrt(C(N,n)) (1-p_i)^((N-n)/2) p_i^(n/2), in log space."""
    n = np.arange(particles + 1)
    log_binom = 0.5 * (
        gammaln(particles + 1) - gammaln(n + 1) - gammaln(particles - n + 1)
    )
    p = p_axis[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        log_p = np.where(p > 0, np.log(np.where(p > 0, p, 1.0)), -np.inf)
        log_1p = np.where(p < 1, np.log(np.where(p < 1, 1.0 - p, 1.0)), -np.inf)
        log_r = log_binom + 0.5 * (n * log_p + (particles - n) * log_1p)
    r = np.exp(log_r)
    # 0^0 = 1 at the poles
    if p_axis[0] == 0.0:
        r[p_axis == 0.0] = np.where(n == 0, 1.0, 0.0)
    if p_axis[-1] == 1.0:
        r[p_axis == 1.0] = np.where(n == particles, 1.0, 0.0)
    return r


def _husimi_on_axes(target, p_axis: np.ndarray, q_axis: np.ndarray) -> np.ndarray:
    """Two-mode Husimi values on the outer product of the two axes."""
    basis = target.basis
    if basis.modes != 2:
        raise ValueError("gridded Husimi evaluation is implemented for two modes")
    n = np.arange(basis.particles + 1)
    radial = _radial_coefficients(basis.particles, p_axis)
    phase = np.exp(1j * np.outer(q_axis, n))  # e^{+i n q}: conj of the state phase
    if isinstance(target, QuantumState):
        overlap = (radial * target.amplitudes[None, :]) @ phase.T
        return np.abs(overlap) ** 2
    rho = target.matrix
    out = np.empty((p_axis.size, q_axis.size))
    conj_phase = phase.conj()
    for i in range(p_axis.size):
        u = radial[i][None, :] * conj_phase  # coherent amplitudes at (p_i, q_j)
        b = u.conj() @ rho
        out[i] = np.real(np.einsum("jm,jm->j", b, u))
    return out


@dataclass
class HusimiGrid:
    """Husimi values on a uniform cell-centered (p, q) grid.

    ``values[i, j]`` is Q at (p_axis[i], q_axis[j]); the measure-weighted sum
    ``norm()`` approximates the normalization integral with an error bounded
    by the stated grid-resolution bound (midpoint rule).
    """

    p_axis: np.ndarray
    q_axis: np.ndarray
    values: np.ndarray
    particles: int
    meta: dict = field(default_factory=dict)

    @property
    def measure(self) -> float:
        return measure_constant(self.particles, 2)

    def cell_area(self) -> float:
        return float((self.p_axis[1] - self.p_axis[0]) * (self.q_axis[1] - self.q_axis[0]))

    def norm(self) -> float:
        return float(self.values.sum() * self.cell_area() * self.measure)

    def to_csv(self, path):
        from . import io

        pp, qq = np.meshgrid(self.p_axis, self.q_axis, indexing="ij")
        meta = {
            "particles": self.particles,
            "p_resolution": self.p_axis.size,
            "q_resolution": self.q_axis.size,
            **self.meta,
        }
        io.write_csv(
            path,
            ["p", "q", "Q"],
            [pp.ravel(), qq.ravel(), self.values.ravel()],
            meta=meta,
        )


def husimi_grid(target, resolution: int = 200) -> HusimiGrid:
    """Sample Q on a cell-centered uniform grid (resolution >= 2 per axis)."""
    if resolution < 2:
        raise ValueError("need at least two grid cells per axis")
    p_axis = (np.arange(resolution) + 0.5) / resolution
    q_axis = _TWO_PI * (np.arange(resolution) + 0.5) / resolution
    values = _husimi_on_axes(target, p_axis, q_axis)
    return HusimiGrid(p_axis, q_axis, values, target.basis.particles)


# ---------------------------------------------------------------------------
# Husimi zeros
# ---------------------------------------------------------------------------

@dataclass
class HusimiZeros:
    """Roots of the Bargmann polynomial; degree deficit lives at infinity."""

    finite: np.ndarray
    infinite_multiplicity: int
    particles: int

    @property
    def total(self) -> int:
        return self.finite.size + self.infinite_multiplicity

    def points(self) -> list[PhasePoint]:
        return [zero_to_point(z) for z in self.finite]


def zero_to_point(z: complex) -> PhasePoint:
    """Phase-space location of a Bargmann root: tan(theta/2) e^{iq} = z."""
    mag2 = abs(z) ** 2
    p = mag2 / (1.0 + mag2)
    return PhasePoint.from_pq(p, np.mod(np.angle(z), _TWO_PI))


def bargmann_coefficients(state: QuantumState) -> np.ndarray:
    """a_n = c_n sqrt(C(N, n)) for a pure two-mode state."""
    basis = state.basis
    if basis.modes != 2:
        raise ValueError("the Bargmann polynomial is defined for two modes")
    n = np.arange(basis.particles + 1)
    log_binom = 0.5 * (
        gammaln(basis.particles + 1) - gammaln(n + 1) - gammaln(basis.particles - n + 1)
    )
    return state.amplitudes * np.exp(log_binom)


def husimi_zeros(state: QuantumState) -> HusimiZeros:
    """All N zeros of |<Omega|psi>|^2, including multiplicity at infinity."""
    a = bargmann_coefficients(state)
    scale = np.max(np.abs(a))
    if scale == 0.0:
        raise ValueError("zero state has no Husimi zeros")
    a = a / scale
    particles = state.basis.particles
    nonzero = np.nonzero(a)[0]
    degree = nonzero[-1]
    # geometric rescaling keeps the companion matrix balanced for skewed
    # coefficient magnitudes (large-N coherent tails)
    low = nonzero[0]
    if degree > low:
        s = np.exp(
            (np.log(np.abs(a[low])) - np.log(np.abs(a[degree]))) / (degree - low)
        )
        s = min(max(s, 1e-8), 1e8)
    else:
        s = 1.0
    powers = s ** np.arange(degree + 1)
    b = a[: degree + 1] * powers
    b = b / np.max(np.abs(b))
    roots = np.roots(b[::-1]) * s if degree > 0 else np.array([], dtype=complex)
    return HusimiZeros(roots, particles - degree, particles)


# ---------------------------------------------------------------------------
# Phase-space first moments
# ---------------------------------------------------------------------------

class QuadratureError(RuntimeError):
    """Quadrature failed its self-consistency check; carries the estimate."""

    def __init__(self, message, estimate):
        super().__init__(message)
        self.estimate = estimate


_COMPONENTS = {"x": 0, "y": 1, "z": 2}


def _gauss_legendre_expectation(target, component: int, resolution: int) -> float:
    nodes, weights = np.polynomial.legendre.leggauss(resolution)
    p_axis = 0.5 * (nodes + 1.0)
    w = 0.5 * weights
    q_axis = _TWO_PI * (np.arange(resolution) + 0.5) / resolution
    values = _husimi_on_axes(target, p_axis, q_axis)
    s = classical_bloch(p_axis[:, None], q_axis[None, :])[component]
    n = target.basis.particles
    integral = float(np.einsum("i,ij->", w, s * values)) * (_TWO_PI / resolution)
    return (n + 2) * measure_constant(n, 2) * integral


def phase_expectation_q(target, component: str, resolution: int = 400,
                        conv_tol: float = 1e-6) -> float:
    """<J_k> from the phase-space average (N+2) Int s_k Q d mu.

    ``target`` is a HusimiGrid (midpoint sums on its own axes) or a state /
    density (Gauss-Legendre in p, uniform in q, at the given resolution).  When
    quadrature at half resolution disagrees by more than ``conv_tol`` a
    QuadratureError carrying the estimate is raised; pass ``conv_tol=None`` to
    skip the check.
    """
    k = _COMPONENTS[component]
    if isinstance(target, HusimiGrid):
        s = classical_bloch(target.p_axis[:, None], target.q_axis[None, :])[k]
        n = target.particles
        return float(
            (n + 2)
            * target.measure
            * np.sum(s * target.values)
            * target.cell_area()
        )
    value = _gauss_legendre_expectation(target, k, resolution)
    if conv_tol is not None:
        coarse = _gauss_legendre_expectation(target, k, max(resolution // 2, 2))
        if abs(value - coarse) > conv_tol:
            raise QuadratureError(
                f"quadrature not converged: |{value!r} - {coarse!r}| > {conv_tol}",
                estimate=value,
            )
    return value


# ---------------------------------------------------------------------------
# Ensembles and samplers
# ---------------------------------------------------------------------------

@dataclass
class Ensemble:
    """Sampled phase-space points with their full seed lineage.

    ``psi`` holds one normalized amplitude row per trajectory; ``alpha2`` (for
    the Glauber-Husimi sampler) is the squared global amplitude driving the
    per-trajectory effective nonlinearity U * alpha^2.
    """

    psi: np.ndarray
    particles: int
    master_seed: int
    stream_ids: np.ndarray
    sampler: str
    alpha2: np.ndarray | None = None
    center: PhasePoint | None = None

    def __post_init__(self):
        self.psi = np.asarray(self.psi, dtype=complex)
        if self.psi.ndim != 2 or self.psi.shape[1] not in (2, 3):
            raise ValueError("ensemble amplitudes must have shape (count, modes)")
        norms = np.linalg.norm(self.psi, axis=1)
        if np.max(np.abs(norms - 1.0)) > 1e-9:
            raise ValueError("ensemble contains non-normalized amplitudes")
        self.stream_ids = np.asarray(self.stream_ids, dtype=np.int64)
        if len(set(self.stream_ids.tolist())) != self.count:
            raise ValueError("stream ids must be unique")

    @property
    def count(self) -> int:
        return self.psi.shape[0]

    @property
    def modes(self) -> int:
        return self.psi.shape[1]

    def point(self, i: int) -> PhasePoint:
        return PhasePoint(self.psi[i])


SAMPLE_STREAM = 0
NOISE_STREAM = 1


def trajectory_rng(master_seed: int, index: int, purpose: int = SAMPLE_STREAM):
    """Counter-based generator for one trajectory and purpose.

    Streams depend only on (master_seed, index, purpose), never on how
    trajectories are distributed over workers.
    """
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(index, purpose))
    return np.random.Generator(np.random.Philox(seq))


def _su2_rotation(psi_center: np.ndarray) -> np.ndarray:
    a, b = psi_center
    return np.array([[a, -np.conj(b)], [b, np.conj(a)]])


def sample_su2_husimi(center: PhasePoint, particles: int, count: int,
                      master_seed: int) -> Ensemble:
    """I.i.d. samples of the Husimi density of the coherent state at center."""
    if center.modes != 2:
        raise ValueError("sample_su2_husimi needs a two-mode center")
    if count < 1:
        raise ValueError("sample count must be positive")
    rot = _su2_rotation(center.psi)
    psi = np.empty((count, 2), dtype=complex)
    for i in range(count):
        rng = trajectory_rng(master_seed, i, SAMPLE_STREAM)
        u = rng.beta(particles + 1, 1)
        chi = rng.uniform(0.0, _TWO_PI)
        local = np.array([np.sqrt(u), np.sqrt(1.0 - u) * np.exp(-1j * chi)])
        psi[i] = rot @ local
    return Ensemble(psi, particles, master_seed, np.arange(count), "su2-husimi",
                    center=center)


def _orthonormal_complement(psi: np.ndarray) -> np.ndarray:
    """Two orthonormal vectors spanning the complement of a 3-vector."""
    order = np.argsort(np.abs(psi))  # most orthogonal canonical directions first
    cols = [psi]
    for idx in order[:2]:
        e = np.zeros(3, dtype=complex)
        e[idx] = 1.0
        cols.append(e)
    q, _ = np.linalg.qr(np.column_stack(cols))
    # first column is psi up to phase; the rest span the complement
    return q[:, 1:]


def sample_su3_husimi(center: PhasePoint, particles: int, count: int,
                      master_seed: int) -> Ensemble:
    """Husimi samples around a three-mode coherent state.

    Exact two-stage law: overlap with the center u = |<psi, psi_c>|^2 follows
    Beta(N+1, 2) under the flat invariant measure, the orthogonal complement
    direction is uniform on CP^1, and both relative phases are uniform.
    """
    if center.modes != 3:
        raise ValueError("sample_su3_husimi needs a three-mode center")
    if count < 1:
        raise ValueError("sample count must be positive")
    frame = _orthonormal_complement(center.psi)
    psi = np.empty((count, 3), dtype=complex)
    for i in range(count):
        rng = trajectory_rng(master_seed, i, SAMPLE_STREAM)
        u = rng.beta(particles + 1, 2)
        v = rng.uniform()
        b1 = rng.uniform(0.0, _TWO_PI)
        b2 = rng.uniform(0.0, _TWO_PI)
        rest = 1.0 - u
        psi[i] = (
            np.sqrt(u) * center.psi
            + np.sqrt(rest * v) * np.exp(1j * b1) * frame[:, 0]
            + np.sqrt(rest * (1.0 - v)) * np.exp(1j * b2) * frame[:, 1]
        )
        psi[i] /= np.linalg.norm(psi[i])
    return Ensemble(psi, particles, master_seed, np.arange(count), "su3-husimi",
                    center=center)


def sample_glauber_husimi(center: PhasePoint, particles: int, count: int,
                          master_seed: int) -> Ensemble:
    """SU(2) Husimi angular samples plus Glauber amplitude noise.

    The squared global amplitude alpha^2 follows Gamma(N+2, 1) (the radial
    marginal of the Glauber-Husimi decomposition); trajectories propagated
    from such an ensemble should use the effective coupling U * alpha^2 in
    place of U * N.  Angular draws replicate sample_su2_husimi exactly.
    """
    if center.modes != 2:
        raise ValueError("sample_glauber_husimi needs a two-mode center")
    if count < 1:
        raise ValueError("sample count must be positive")
    rot = _su2_rotation(center.psi)
    psi = np.empty((count, 2), dtype=complex)
    alpha2 = np.empty(count)
    for i in range(count):
        rng = trajectory_rng(master_seed, i, SAMPLE_STREAM)
        u = rng.beta(particles + 1, 1)
        chi = rng.uniform(0.0, _TWO_PI)
        local = np.array([np.sqrt(u), np.sqrt(1.0 - u) * np.exp(-1j * chi)])
        psi[i] = rot @ local
        alpha2[i] = rng.gamma(particles + 2, 1.0)
    return Ensemble(psi, particles, master_seed, np.arange(count),
                    "glauber-husimi", alpha2=alpha2, center=center)
