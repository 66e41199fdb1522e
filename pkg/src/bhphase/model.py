"""Fock-space model layer for two- and three-mode Bose-Hubbard systems.

Conventions
-----------
* The two-mode Hamiltonian is

      H = -Delta(t) (a1+ a2 + a2+ a1) + eps * n2
          + U/2 * (a1+ a1+ a1 a1 + a2+ a2+ a2 a2),

  with eps the on-site energy difference eps2 - eps1 (the common offset only
  shifts the spectrum).  The drive, when present, is
  Delta(t) = delta0 + delta1 * cos(omega t).
* The three-mode Hamiltonian adds the 2-3 hopping and uses on-site energies
  (eps1, eps2, eps3) verbatim.
* Angular momentum operators for M=2:
  Jx = (a1+ a2 + a2+ a1)/2,  Jy = i(a1+ a2 - a2+ a1)/2,  Jz = (n2 - n1)/2.
* Basis enumeration is lexicographically descending in the occupation tuple
  (n1 first), which is stable across runs; for M=2 the index equals n2.
* hbar = 1 everywhere.

Operators are stored sparse (CSR) and converted to dense arrays only for
diagonalization; the dimensions in scope (<= a few thousand) keep dense
eigensolvers practical.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import gammaln

HERMITICITY_TOL = 1e-10
NORM_TOL = 1e-9
EIGVAL_TOL = 1e-8


# ---------------------------------------------------------------------------
# Model specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelSpec:
    """Full parameterization of a two- or three-mode Bose-Hubbard system.

    Fields
    ------
    modes : 2 or 3
    particles : total particle number N >= 1
    delta : tunneling element; a scalar for modes=2 (the static value, or the
        drive offset delta0 when a drive is present) and a pair
        (delta12, delta23) for modes=3.
    eps : on-site energies; scalar eps2 - eps1 for modes=2, a triple
        (eps1, eps2, eps3) for modes=3.
    u : on-site interaction U.
    gamma1 : phase-noise rate of the dephasing master equation (>= 0).
    delta1, omega : drive amplitude and angular frequency for the
        time-dependent tunneling Delta(t) = delta + delta1*cos(omega*t)
        (two-mode only).
    """

    modes: int
    particles: int
    delta: float | tuple[float, float]
    eps: float | tuple[float, float, float] = 0.0
    u: float = 0.0
    gamma1: float = 0.0
    delta1: float = 0.0
    omega: float = 0.0

    def __post_init__(self):
        if self.modes not in (2, 3):
            raise ValueError(f"modes must be 2 or 3, got {self.modes!r}")
        if self.particles < 1:
            raise ValueError("particle number must be at least 1")
        if self.modes == 2:
            if np.ndim(self.delta) != 0:
                raise ValueError("two-mode spec takes a scalar tunneling delta")
            if np.ndim(self.eps) != 0:
                raise ValueError("two-mode spec takes a scalar eps (= eps2 - eps1)")
        else:
            d = np.atleast_1d(np.asarray(self.delta, dtype=float))
            if d.shape != (2,):
                raise ValueError("three-mode spec takes tunnelings (delta12, delta23)")
            object.__setattr__(self, "delta", (float(d[0]), float(d[1])))
            e = np.atleast_1d(np.asarray(self.eps, dtype=float))
            if e.shape == (1,) and float(e[0]) == 0.0:
                e = np.zeros(3)
            if e.shape != (3,):
                raise ValueError("three-mode spec takes on-site energies (eps1, eps2, eps3)")
            object.__setattr__(self, "eps", (float(e[0]), float(e[1]), float(e[2])))
            if self.delta1 != 0.0:
                raise ValueError("the tunneling drive is defined for the two-mode system only")
        if self.delta1 != 0.0 and not self.omega > 0.0:
            raise ValueError("a driven spec needs omega > 0")
        if self.gamma1 < 0.0:
            raise ValueError("gamma1 must be non-negative")
        for name in ("delta", "eps", "u", "gamma1", "delta1", "omega"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"parameter {name} must be finite")

    @property
    def driven(self) -> bool:
        return self.delta1 != 0.0

    def delta_at(self, t: float) -> float:
        """Instantaneous tunneling Delta(t) (two-mode)."""
        if self.modes != 2:
            raise ValueError("delta_at is defined for the two-mode system")
        return float(self.delta) + self.delta1 * np.cos(self.omega * t)

    def drive_period(self) -> float:
        if not self.omega > 0.0:
            raise ValueError("spec has no drive period (omega <= 0)")
        return 2.0 * np.pi / self.omega

    # -- config serialization (documented keys) -----------------------------

    def to_dict(self) -> dict:
        d = {
            "modes": self.modes,
            "particles": self.particles,
            "eps": list(self.eps) if self.modes == 3 else self.eps,
            "u": self.u,
            "gamma1": self.gamma1,
        }
        if self.modes == 2:
            if self.driven:
                d.update(delta0=self.delta, delta1=self.delta1, omega=self.omega)
            else:
                d["delta"] = self.delta
        else:
            d["delta"] = list(self.delta)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        d = dict(d)
        if "delta0" in d:
            if "delta" in d:
                raise ValueError("config must set either 'delta' or 'delta0', not both")
            d["delta"] = d.pop("delta0")
        delta = d["delta"]
        eps = d.get("eps", 0.0)
        if isinstance(delta, list):
            delta = tuple(delta)
        if isinstance(eps, list):
            eps = tuple(eps)
        return cls(
            modes=int(d["modes"]),
            particles=int(d["particles"]),
            delta=delta,
            eps=eps,
            u=float(d.get("u", 0.0)),
            gamma1=float(d.get("gamma1", 0.0)),
            delta1=float(d.get("delta1", 0.0)),
            omega=float(d.get("omega", 0.0)),
        )


# ---------------------------------------------------------------------------
# Fock basis
# ---------------------------------------------------------------------------

class FockBasis:
    """Number-conserving Fock basis for M modes and N particles.

    States are the occupation tuples (n1, ..., nM) with sum nj = N, ordered
    lexicographically descending (n1 varies slowest).  The dimension is
    binomial(N+M-1, M-1).
    """

    def __init__(self, modes: int, particles: int):
        if modes not in (2, 3):
            raise ValueError(f"modes must be 2 or 3, got {modes!r}")
        if particles < 1:
            raise ValueError("particle number must be at least 1")
        self.modes = modes
        self.particles = particles
        self.states = tuple(_enumerate_states(modes, particles))
        self.dim = len(self.states)
        self._index = {s: i for i, s in enumerate(self.states)}
        self._occupations = np.array(self.states, dtype=np.int64)

    @classmethod
    def for_spec(cls, spec: ModelSpec) -> "FockBasis":
        return cls(spec.modes, spec.particles)

    def index(self, occupation: Sequence[int]) -> int:
        return self._index[tuple(int(n) for n in occupation)]

    def occupation(self, i: int) -> tuple[int, ...]:
        return self.states[i]

    @property
    def occupation_array(self) -> np.ndarray:
        """(dim, modes) integer array of occupations, basis order."""
        return self._occupations

    def number_operator(self, mode: int) -> "OperatorMatrix":
        """n_mode = a_mode+ a_mode (mode is 0-based)."""
        diag = self._occupations[:, mode].astype(float)
        return OperatorMatrix(self, sp.diags(diag).tocsr(), hermitian=True)

    def total_number_operator(self) -> "OperatorMatrix":
        diag = self._occupations.sum(axis=1).astype(float)
        return OperatorMatrix(self, sp.diags(diag).tocsr(), hermitian=True)

    def hopping_operator(self, i: int, j: int) -> "OperatorMatrix":
        """a_i+ a_j in this basis (0-based mode indices, i != j)."""
        occ = self._occupations
        rows, cols, vals = [], [], []
        for col, state in enumerate(self.states):
            nj = state[j]
            if nj == 0:
                continue
            target = list(state)
            target[j] -= 1
            target[i] += 1
            row = self._index[tuple(target)]
            rows.append(row)
            cols.append(col)
            vals.append(np.sqrt(nj * (state[i] + 1.0)))
        m = sp.csr_matrix(
            (vals, (rows, cols)), shape=(self.dim, self.dim), dtype=complex
        )
        del occ
        return OperatorMatrix(self, m, hermitian=False)

    def fock_state(self, occupation: Sequence[int]) -> "QuantumState":
        vec = np.zeros(self.dim, dtype=complex)
        vec[self.index(occupation)] = 1.0
        return QuantumState(self, vec)

    def __len__(self):
        return self.dim

    def __repr__(self):
        return f"FockBasis(modes={self.modes}, particles={self.particles}, dim={self.dim})"


def _enumerate_states(modes, particles):
    if modes == 2:
        for n1 in range(particles, -1, -1):
            yield (n1, particles - n1)
    else:
        for n1 in range(particles, -1, -1):
            for n2 in range(particles - n1, -1, -1):
                yield (n1, n2, particles - n1 - n2)


def build_fock_basis(modes: int, particles: int) -> FockBasis:
    """Enumerate the number-state basis; see :class:`FockBasis`."""
    return FockBasis(modes, particles)


# ---------------------------------------------------------------------------
# States and operators
# ---------------------------------------------------------------------------

class QuantumState:
    """A pure state: complex amplitude vector over a FockBasis."""

    __slots__ = ("basis", "amplitudes")

    def __init__(self, basis: FockBasis, amplitudes):
        amplitudes = np.asarray(amplitudes, dtype=complex)
        if amplitudes.shape != (basis.dim,):
            raise ValueError(
                f"amplitude vector has shape {amplitudes.shape}, expected ({basis.dim},)"
            )
        if not np.all(np.isfinite(amplitudes)):
            raise ValueError("state amplitudes must be finite")
        self.basis = basis
        self.amplitudes = amplitudes

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "QuantumState":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize the zero state")
        return QuantumState(self.basis, self.amplitudes / n)

    def check_physical(self, tol: float = NORM_TOL):
        if abs(self.norm() - 1.0) > tol:
            raise ValueError(f"state norm {self.norm()!r} deviates from 1 beyond {tol}")

    def overlap(self, other: "QuantumState") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def expectation(self, op: "OperatorMatrix") -> complex:
        v = op.matrix.dot(self.amplitudes)
        return complex(np.vdot(self.amplitudes, v))

    def to_density(self) -> "DensityMatrix":
        return DensityMatrix(self.basis, np.outer(self.amplitudes, self.amplitudes.conj()))


class DensityMatrix:
    """A (generally mixed) state: Hermitian matrix over a FockBasis."""

    __slots__ = ("basis", "matrix")

    def __init__(self, basis: FockBasis, matrix):
        matrix = np.asarray(matrix, dtype=complex)
        if matrix.shape != (basis.dim, basis.dim):
            raise ValueError("density matrix shape does not match basis dimension")
        self.basis = basis
        self.matrix = matrix

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def expectation(self, op: "OperatorMatrix") -> complex:
        return complex(np.sum(op.matrix.multiply(self.matrix.T)) if sp.issparse(op.matrix)
                       else np.trace(op.matrix @ self.matrix))

    def check_physical(self, tol_herm: float = HERMITICITY_TOL,
                       tol_trace: float = NORM_TOL, tol_eig: float = EIGVAL_TOL):
        if np.max(np.abs(self.matrix - self.matrix.conj().T)) > tol_herm:
            raise ValueError("density matrix is not Hermitian within tolerance")
        if abs(self.trace() - 1.0) > tol_trace:
            raise ValueError(f"density trace {self.trace()!r} deviates from 1")
        evals = np.linalg.eigvalsh(self.matrix)
        if evals.min() < -tol_eig:
            raise ValueError(f"density matrix has eigenvalue {evals.min()!r} < -{tol_eig}")


@dataclass
class OperatorMatrix:
    """A sparse operator on a FockBasis with an optional hermiticity flag."""

    basis: FockBasis
    matrix: sp.spmatrix
    hermitian: bool = False

    def __post_init__(self):
        if self.matrix.shape != (self.basis.dim, self.basis.dim):
            raise ValueError("operator shape does not match basis dimension")
        if self.hermitian:
            dev = abs(self.matrix - self.matrix.getH())
            if dev.count_nonzero() and dev.max() > HERMITICITY_TOL:
                raise ValueError("operator flagged Hermitian deviates from H = H+")

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def dagger(self) -> "OperatorMatrix":
        return OperatorMatrix(self.basis, self.matrix.getH().tocsr(), self.hermitian)

    def __add__(self, other):
        return OperatorMatrix(self.basis, (self.matrix + other.matrix).tocsr(),
                              self.hermitian and other.hermitian)

    def __mul__(self, scalar):
        herm = self.hermitian and np.isreal(scalar)
        return OperatorMatrix(self.basis, (self.matrix * scalar).tocsr(), bool(herm))

    __rmul__ = __mul__

    def __matmul__(self, other):
        return OperatorMatrix(self.basis, (self.matrix @ other.matrix).tocsr(), False)


def expectation(target, op: OperatorMatrix) -> complex:
    """<A> for a QuantumState or DensityMatrix."""
    return target.expectation(op)


# ---------------------------------------------------------------------------
# Hamiltonians and algebra generators
# ---------------------------------------------------------------------------

def build_hamiltonian(spec: ModelSpec, t: float = 0.0,
                      basis: FockBasis | None = None) -> OperatorMatrix:
    """Bose-Hubbard Hamiltonian at time t (t only matters for a driven spec)."""
    basis = basis or FockBasis.for_spec(spec)
    if basis.modes != spec.modes or basis.particles != spec.particles:
        raise ValueError("basis does not match the model spec")
    occ = basis.occupation_array.astype(float)
    diag = 0.5 * spec.u * np.sum(occ * (occ - 1.0), axis=1)
    if spec.modes == 2:
        diag += float(spec.eps) * occ[:, 1]
        hop = basis.hopping_operator(0, 1)
        kinetic = hop.matrix + hop.matrix.getH()
        h = sp.diags(diag) - spec.delta_at(t) * kinetic
    else:
        diag += occ @ np.asarray(spec.eps)
        d12, d23 = spec.delta
        hop12 = basis.hopping_operator(0, 1).matrix
        hop23 = basis.hopping_operator(1, 2).matrix
        h = (
            sp.diags(diag)
            - d12 * (hop12 + hop12.getH())
            - d23 * (hop23 + hop23.getH())
        )
    return OperatorMatrix(basis, h.tocsr(), hermitian=True)


def build_angular_momentum_ops(basis: FockBasis):
    """(Jx, Jy, Jz) for the two-mode system.

    Satisfy the su(2) algebra [Ja, Jb] = i Jc (cyclic) with Casimir
    J^2 = N/2 (N/2 + 1) on the fixed-N sector.
    """
    if basis.modes != 2:
        raise ValueError("angular momentum operators are defined for two modes")
    hop = basis.hopping_operator(0, 1).matrix  # a1+ a2
    jx = 0.5 * (hop + hop.getH())
    jy = 0.5j * (hop - hop.getH())
    occ = basis.occupation_array
    jz = sp.diags((occ[:, 1] - occ[:, 0]) / 2.0).astype(complex)
    return tuple(
        OperatorMatrix(basis, m.tocsr(), hermitian=True) for m in (jx, jy, jz)
    )


@dataclass(frozen=True)
class Su3Generators:
    """The eight su(3) generators of the three-mode system.

    x1 = n1 - n2 and x2 = (n1 + n2 - 2 n3)/3 span the Cartan subalgebra;
    for the mode pairs (k, j) = (1,2), (2,3), (3,1):
    y_k = i (ak+ aj - aj+ ak) and z_k = ak+ aj + aj+ ak.
    """

    x1: OperatorMatrix
    x2: OperatorMatrix
    y1: OperatorMatrix
    y2: OperatorMatrix
    y3: OperatorMatrix
    z1: OperatorMatrix
    z2: OperatorMatrix
    z3: OperatorMatrix

    def all(self):
        return (self.x1, self.x2, self.y1, self.y2, self.y3,
                self.z1, self.z2, self.z3)


def build_su3_generators(basis: FockBasis) -> Su3Generators:
    if basis.modes != 3:
        raise ValueError("su(3) generators are defined for three modes")
    occ = basis.occupation_array
    x1 = sp.diags((occ[:, 0] - occ[:, 1]).astype(float)).astype(complex)
    x2 = sp.diags(((occ[:, 0] + occ[:, 1] - 2 * occ[:, 2]) / 3.0)).astype(complex)
    ys, zs = [], []
    for k, j in ((0, 1), (1, 2), (2, 0)):
        hop = basis.hopping_operator(k, j).matrix  # ak+ aj
        ys.append(1j * (hop - hop.getH()))
        zs.append(hop + hop.getH())
    ops = [x1, x2, *ys, *zs]
    return Su3Generators(
        *[OperatorMatrix(basis, m.tocsr(), hermitian=True) for m in ops]
    )


def su3_casimir(gens: Su3Generators) -> OperatorMatrix:
    """Casimir combination x1^2 + 3 x2^2 + sum_k (y_k^2 + z_k^2).

    Equals 4 N (N/3 + 1) times the identity on the fixed-N sector.
    """
    x1, x2, y1, y2, y3, z1, z2, z3 = (g.matrix for g in gens.all())
    c = x1 @ x1 + 3.0 * (x2 @ x2)
    for m in (y1, y2, y3, z1, z2, z3):
        c = c + m @ m
    return OperatorMatrix(gens.x1.basis, c.tocsr(), hermitian=True)


# ---------------------------------------------------------------------------
# Coherent states and single-particle observables
# ---------------------------------------------------------------------------

def coherent_state(spec_or_basis, point) -> QuantumState:
    """Fully condensed N-particle state (sum_i psi_i a_i+)^N |vac> / sqrt(N!).

    `point` is a PhasePoint or a normalized amplitude vector.  For two modes
    this reproduces the binomial amplitudes sqrt(C(N,n2)) psi1^n1 psi2^n2 with
    psi1 = sqrt(1-p), psi2 = sqrt(p) e^{-iq}.
    """
    basis = (
        spec_or_basis
        if isinstance(spec_or_basis, FockBasis)
        else FockBasis.for_spec(spec_or_basis)
    )
    psi = np.asarray(getattr(point, "psi", point), dtype=complex)
    if psi.shape != (basis.modes,):
        raise ValueError("amplitude count does not match the mode count")
    nrm = np.linalg.norm(psi)
    if abs(nrm - 1.0) > NORM_TOL:
        raise ValueError(f"mode amplitudes not normalized: |psi|^2 = {nrm**2!r}")
    psi = psi / nrm
    occ = basis.occupation_array
    n = basis.particles
    # log-space multinomial weights keep large-N amplitudes finite
    log_mag = 0.5 * (gammaln(n + 1) - gammaln(occ + 1.0).sum(axis=1))
    amps = np.zeros(basis.dim, dtype=complex)
    mag = np.abs(psi)
    nonzero = mag > 0.0
    safe_log = np.where(nonzero, np.log(np.where(nonzero, mag, 1.0)), 0.0)
    phases = np.where(nonzero, np.angle(psi), 0.0)
    valid = np.all(nonzero | (occ == 0), axis=1)
    log_mag = log_mag + occ @ safe_log
    phase = occ @ phases
    amps[valid] = np.exp(log_mag[valid] + 1j * phase[valid])
    state = QuantumState(basis, amps)
    return state.normalized()


def _single_particle_expectations(target) -> np.ndarray:
    """Matrix <a_i+ a_j> for a QuantumState or DensityMatrix."""
    basis = target.basis
    m = basis.modes
    out = np.zeros((m, m), dtype=complex)
    for i in range(m):
        out[i, i] = target.expectation(basis.number_operator(i)).real
        for j in range(i + 1, m):
            val = target.expectation(basis.hopping_operator(i, j))
            out[i, j] = val
            out[j, i] = np.conj(val)
    return out


def spdm(target) -> tuple[np.ndarray, np.ndarray]:
    """Reduced single-particle density matrix <a_i+ a_j>/N and its eigenvalues.

    Returns (matrix, eigenvalues) with eigenvalues sorted descending; for two
    modes they equal 1/2 +- |<J>|/N.  The leading eigenvalue is the condensate
    fraction.
    """
    mat = _single_particle_expectations(target) / target.basis.particles
    evals = np.linalg.eigvalsh(mat)[::-1]
    return mat, evals


def bloch_vector(target) -> np.ndarray:
    """Expectation (⟨Jx⟩, ⟨Jy⟩, ⟨Jz⟩) for a two-mode state or density."""
    if target.basis.modes != 2:
        raise ValueError("the Bloch vector is defined for the two-mode system")
    sp_mat = _single_particle_expectations(target)
    a12 = sp_mat[0, 1]  # <a1+ a2> = <Jx> - i <Jy>
    return np.array(
        [a12.real, -a12.imag, 0.5 * (sp_mat[1, 1].real - sp_mat[0, 0].real)]
    )
