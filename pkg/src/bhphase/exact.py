"""Exact quantum time evolution, spectra, and Floquet analysis.

This is the many-body oracle of the toolkit: unitary Schroedinger dynamics,
the dephasing master equation

    d rho/dt = -i [H, rho] - gamma1/2 * sum_j (nj^2 rho + rho nj^2 - 2 nj rho nj),

dense diagonalization of time-independent Hamiltonians, and the one-period
propagator of a periodically driven system.  Propagation uses an adaptive
explicit Runge-Kutta integrator on the real/imaginary-split state; tolerance
violations raise, never pass silently.

Since the nj are diagonal in the number basis, the dissipator acts elementwise:
(D rho)_{ab} = -gamma1/2 * sum_j (nj(a) - nj(b))^2 * rho_{ab}, which is also
the closed-form decay law for H = 0.

Observable columns (all per particle): ``n1..nM`` populations, ``lambda1..``
SPDM eigenvalues (descending), and for two modes ``jx, jy, jz`` (= <Jk>/N),
``j_norm`` (= |<J>|/N) and ``alpha`` (= 2<Jx>/N); plus ``norm``/``trace`` and
``energy``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp

from .model import (
    DensityMatrix,
    FockBasis,
    ModelSpec,
    OperatorMatrix,
    QuantumState,
    build_hamiltonian,
)
from .series import ObservableSeries

TRACE_TOL = 1e-8


class PropagationError(RuntimeError):
    """Integration failed or a conservation check exceeded tolerance."""


@dataclass
class PropagationConfig:
    """Time window, output samples, and integrator tolerances."""

    t_end: float
    t_start: float = 0.0
    n_samples: int = 201
    sample_times: np.ndarray | None = None
    rtol: float = 1e-9
    atol: float = 1e-9
    max_step: float = np.inf
    method: str = "RK45"
    check_tol: float = 1e-6  # norm-conservation guard for pure-state runs

    def __post_init__(self):
        if not self.t_end > self.t_start:
            raise ValueError("t_end must exceed t_start")
        if self.rtol <= 0 or self.atol <= 0:
            raise ValueError("tolerances must be positive")
        if self.sample_times is not None:
            t = np.asarray(self.sample_times, dtype=float)
            if t.ndim != 1 or t.size < 1 or np.any(np.diff(t) < 0):
                raise ValueError("sample times must be a sorted 1-d array")
            if t[0] < self.t_start - 1e-12 or t[-1] > self.t_end + 1e-12:
                raise ValueError("sample times must lie within [t_start, t_end]")
            self.sample_times = t
        elif self.n_samples < 2:
            raise ValueError("need at least two output samples")

    def times(self) -> np.ndarray:
        if self.sample_times is not None:
            return self.sample_times
        return np.linspace(self.t_start, self.t_end, self.n_samples)


@dataclass
class SchrodingerResult:
    series: ObservableSeries
    final_state: QuantumState
    states: list[QuantumState] | None = None


@dataclass
class MasterResult:
    series: ObservableSeries
    final_density: DensityMatrix
    densities: list[DensityMatrix] | None = None


@dataclass
class FloquetResult:
    """One-period propagator U(T), its eigenstates, and quasi-energies.

    Columns of ``states`` are unit-norm Floquet states ordered by ascending
    quasi-energy; quasi-energies live on the branch (-omega/2, omega/2].
    """

    propagator: np.ndarray
    states: np.ndarray
    quasienergies: np.ndarray
    omega: float

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.omega

    def state(self, k: int, basis: FockBasis) -> QuantumState:
        return QuantumState(basis, self.states[:, k])


# ---------------------------------------------------------------------------
# Hamiltonian splitting for efficient time-dependent matvecs
# ---------------------------------------------------------------------------

class _HamiltonianAction:
    """H(t) = diag + coefficient(t) * kinetic, with sparse kinetic part."""

    def __init__(self, spec: ModelSpec, basis: FockBasis):
        self.spec = spec
        occ = basis.occupation_array.astype(float)
        diag = 0.5 * spec.u * np.sum(occ * (occ - 1.0), axis=1)
        if spec.modes == 2:
            diag = diag + float(spec.eps) * occ[:, 1]
            hop = basis.hopping_operator(0, 1).matrix
            self.kinetic = (-(hop + hop.getH())).tocsr()
        else:
            diag = diag + occ @ np.asarray(spec.eps)
            d12, d23 = spec.delta
            h12 = basis.hopping_operator(0, 1).matrix
            h23 = basis.hopping_operator(1, 2).matrix
            self.kinetic = (-(d12 * (h12 + h12.getH()) + d23 * (h23 + h23.getH()))).tocsr()
        self.diag = diag

    def coefficient(self, t: float) -> float:
        return self.spec.delta_at(t) if self.spec.modes == 2 else 1.0

    def apply(self, psi: np.ndarray, t: float) -> np.ndarray:
        diag = self.diag if psi.ndim == 1 else self.diag[:, None]
        return diag * psi + self.coefficient(t) * (self.kinetic @ psi)

    def matrix(self, t: float) -> sp.spmatrix:
        return sp.diags(self.diag) + self.coefficient(t) * self.kinetic


def _split(z: np.ndarray) -> np.ndarray:
    return np.concatenate([z.real.ravel(), z.imag.ravel()])


def _unsplit(y: np.ndarray, shape) -> np.ndarray:
    half = y.size // 2
    return (y[:half] + 1j * y[half:]).reshape(shape)


def _integrate(rhs, z0: np.ndarray, cfg: PropagationConfig, t_eval):
    shape = z0.shape

    def f(t, y):
        return _split(rhs(_unsplit(y, shape), t))

    sol = solve_ivp(
        f,
        (cfg.t_start, cfg.t_end),
        _split(z0),
        method=cfg.method,
        t_eval=t_eval,
        rtol=cfg.rtol,
        atol=cfg.atol,
        max_step=cfg.max_step,
    )
    if not sol.success:
        raise PropagationError(f"integrator failed: {sol.message}")
    return [_unsplit(sol.y[:, k], shape) for k in range(sol.y.shape[1])]


# ---------------------------------------------------------------------------
# Observable recording
# ---------------------------------------------------------------------------

class _Recorder:
    def __init__(self, spec: ModelSpec, basis: FockBasis, h: _HamiltonianAction):
        self.spec = spec
        self.basis = basis
        self.h = h
        self.number_diags = [
            basis.occupation_array[:, j].astype(float) for j in range(basis.modes)
        ]
        if basis.modes == 2:
            self.hops = {(0, 1): basis.hopping_operator(0, 1).matrix}
        else:
            self.hops = {
                (i, j): basis.hopping_operator(i, j).matrix
                for i in range(3)
                for j in range(3)
                if i < j
            }

    def _spdm_from(self, expect_n, expect_hop):
        m = self.basis.modes
        n = self.spec.particles
        mat = np.zeros((m, m), dtype=complex)
        for j in range(m):
            mat[j, j] = expect_n[j]
        for (i, j), v in expect_hop.items():
            mat[i, j] = v
            mat[j, i] = np.conj(v)
        return mat / n

    def record(self, target, t, pure: bool):
        n = self.spec.particles
        if pure:
            psi = target
            weight = np.abs(psi) ** 2
            expect_n = [float(d @ weight) for d in self.number_diags]
            expect_hop = {
                k: complex(np.vdot(psi, m @ psi)) for k, m in self.hops.items()
            }
            conserved = float(np.linalg.norm(psi))
            energy = float(np.vdot(psi, self.h.apply(psi, t)).real)
        else:
            rho = target
            diag = np.diag(rho).real
            expect_n = [float(d @ diag) for d in self.number_diags]
            expect_hop = {
                k: complex((m.multiply(rho.T)).sum()) for k, m in self.hops.items()
            }
            conserved = float(np.trace(rho).real)
            energy = float((self.h.matrix(t).multiply(rho.T)).sum().real)
        mat = self._spdm_from(expect_n, expect_hop)
        evals = np.linalg.eigvalsh(mat)[::-1]
        row = {f"n{j + 1}": expect_n[j] / n for j in range(self.basis.modes)}
        row.update({f"lambda{k + 1}": evals[k] for k in range(self.basis.modes)})
        if self.basis.modes == 2:
            a12 = expect_hop[(0, 1)]
            jx, jy = a12.real / n, -a12.imag / n
            jz = 0.5 * (expect_n[1] - expect_n[0]) / n
            row.update(
                jx=jx, jy=jy, jz=jz,
                j_norm=float(np.sqrt(jx**2 + jy**2 + jz**2)),
                alpha=2.0 * jx,
            )
        row["norm" if pure else "trace"] = conserved
        row["energy"] = energy
        return row


def _rows_to_series(times, rows, meta) -> ObservableSeries:
    columns = {k: np.array([r[k] for r in rows]) for k in rows[0]}
    return ObservableSeries(times=np.asarray(times), columns=columns, meta=meta)


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------

def evolve_schrodinger(
    spec: ModelSpec,
    psi0: QuantumState,
    cfg: PropagationConfig,
    store_states: bool = False,
) -> SchrodingerResult:
    """Unitary evolution of a pure state; requires gamma1 = 0."""
    if spec.gamma1 != 0.0:
        raise ValueError("spec has gamma1 != 0; use evolve_master for open dynamics")
    basis = psi0.basis
    if (basis.modes, basis.particles) != (spec.modes, spec.particles):
        raise ValueError("initial state basis does not match the spec")
    psi0.check_physical()
    h = _HamiltonianAction(spec, basis)
    times = cfg.times()
    states = _integrate(lambda z, t: -1j * h.apply(z, t), psi0.amplitudes, cfg, times)
    recorder = _Recorder(spec, basis, h)
    rows = []
    for t, psi in zip(times, states):
        if abs(np.linalg.norm(psi) - 1.0) > cfg.check_tol:
            raise PropagationError(
                f"norm drifted to {np.linalg.norm(psi)!r} at t={t}; tighten tolerances"
            )
        rows.append(recorder.record(psi, t, pure=True))
    series = _rows_to_series(times, rows, {"engine": "schrodinger"})
    result_states = [QuantumState(basis, psi) for psi in states] if store_states else None
    return SchrodingerResult(series, QuantumState(basis, states[-1]), result_states)


def evolve_master(
    spec: ModelSpec,
    rho0: DensityMatrix,
    cfg: PropagationConfig,
    store_densities: bool = False,
) -> MasterResult:
    """Dephasing master equation; reduces to unitary dynamics for gamma1 = 0."""
    basis = rho0.basis
    if (basis.modes, basis.particles) != (spec.modes, spec.particles):
        raise ValueError("initial density basis does not match the spec")
    rho0.check_physical()
    h = _HamiltonianAction(spec, basis)
    occ = basis.occupation_array.astype(float)
    # (nj(a) - nj(b))^2 summed over modes, elementwise dissipator weight
    decay = sum(
        (occ[:, j][:, None] - occ[:, j][None, :]) ** 2 for j in range(basis.modes)
    )
    gamma = spec.gamma1

    def rhs(rho, t):
        coeff = h.coefficient(t)
        hrho = h.diag[:, None] * rho + coeff * (h.kinetic @ rho)
        # kinetic is real symmetric, so rho @ K = (K @ rho.T).T
        rhoh = rho * h.diag[None, :] + coeff * (h.kinetic @ rho.T).T
        drho = -1j * (hrho - rhoh)
        if gamma != 0.0:
            drho = drho - (0.5 * gamma) * decay * rho
        return drho

    times = cfg.times()
    densities = _integrate(rhs, rho0.matrix, cfg, times)
    recorder = _Recorder(spec, basis, h)
    rows = []
    for t, rho in zip(times, densities):
        tr = np.trace(rho).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise PropagationError(f"trace drifted to {tr!r} at t={t}")
        if np.max(np.abs(rho - rho.conj().T)) > TRACE_TOL:
            raise PropagationError(f"hermiticity lost at t={t}")
        rows.append(recorder.record(rho, t, pure=False))
    series = _rows_to_series(times, rows, {"engine": "master", "gamma1": gamma})
    result = [DensityMatrix(basis, r) for r in densities] if store_densities else None
    return MasterResult(series, DensityMatrix(basis, densities[-1]), result)


def eigenstates(spec: ModelSpec, basis: FockBasis | None = None):
    """Dense spectrum of a time-independent spec: (ascending values, states)."""
    if spec.driven:
        raise ValueError("spec is driven; use floquet_states for periodic dynamics")
    basis = basis or FockBasis.for_spec(spec)
    h = build_hamiltonian(spec, basis=basis).dense()
    evals, evecs = np.linalg.eigh(h)
    states = [QuantumState(basis, evecs[:, k]) for k in range(basis.dim)]
    return evals, states


def floquet_states(
    spec: ModelSpec,
    cfg: PropagationConfig | None = None,
    block_size: int = 64,
) -> FloquetResult:
    """Floquet states from the one-period propagator U(T), T = 2*pi/omega.

    The propagator is assembled by integrating identity-matrix column blocks
    over one period (in fixed order); quasi-energies are folded to the branch
    (-omega/2, omega/2], with the tie at -omega/2 mapped to +omega/2.
    A spec with delta1 = 0 but omega > 0 is treated as trivially periodic.
    """
    if not spec.omega > 0.0:
        raise ValueError("floquet analysis needs a periodic spec (omega > 0)")
    basis = FockBasis.for_spec(spec)
    period = spec.drive_period()
    # the 1e-8 unitarity budget needs a high-order method at tight tolerance
    cfg = cfg or PropagationConfig(
        t_end=period, rtol=1e-12, atol=1e-12, method="DOP853"
    )
    if (cfg.t_start, cfg.t_end) != (0.0, period):
        raise ValueError("floquet config must integrate exactly one period")
    h = _HamiltonianAction(spec, basis)
    dim = basis.dim
    propagator = np.empty((dim, dim), dtype=complex)
    for start in range(0, dim, block_size):
        width = min(block_size, dim - start)
        block = np.zeros((dim, width), dtype=complex)
        block[start : start + width] = np.eye(width)
        out = _integrate(
            lambda z, t: -1j * h.apply(z, t), block, cfg, np.array([period])
        )
        propagator[:, start : start + width] = out[0]
    unitarity = np.max(np.abs(propagator.conj().T @ propagator - np.eye(dim)))
    if unitarity > 1e-8:
        raise PropagationError(
            f"propagator deviates from unitarity by {unitarity:.2e}; tighten tolerances"
        )
    evals, evecs = np.linalg.eig(propagator)
    quasi = -np.angle(evals) / period
    # branch (-omega/2, omega/2]: angle pi maps to -omega/2, fold it up
    quasi = np.where(quasi <= -spec.omega / 2, quasi + spec.omega, quasi)
    order = np.argsort(quasi)
    evecs = evecs[:, order] / np.linalg.norm(evecs[:, order], axis=0)
    return FloquetResult(propagator, evecs, quasi[order], spec.omega)
