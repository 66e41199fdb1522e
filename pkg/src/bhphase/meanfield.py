"""Gross-Pitaevskii layer: classical Hamiltonians, trajectories, fixed points.

Classical Hamiltonian functions (per particle, hbar = 1):

    M = 2:  H(p, q) = eps * p - 2 Delta(t) sqrt(p(1-p)) cos q + g/4 (1-2p)^2
    M = 3:  H = sum_j eps_j p_j + g/2 sum_j p_j^2
            - 2 Delta12 sqrt(p1 p2) cos q1 - 2 Delta23 sqrt(p2 p3) cos q3,
            with p2 = 1 - p1 - p3.

The canonical equations are  dp/dt = -dH/dq,  dq/dt = +dH/dp  (per conjugate
pair), equivalent to the discrete Gross-Pitaevskii equation

    i dpsi_j/dt = (eps_j + g |psi_j|^2) psi_j - sum_{k ~ j} Delta_{jk} psi_k

under psi1 = sqrt(1-p), psi2 = sqrt(p) e^{-iq} (two modes) and the analogous
trimer chart.  ``eps`` follows the same convention as ModelSpec (eps2 - eps1
for two modes), which makes the classical layer the exact macroscopic limit of
the quantum Hamiltonian built by ``bhphase.model``.

Coordinate-form equations are singular where any mode empties; all integration
therefore runs in the amplitude representation (with norm renormalization),
and coordinates are derived outputs.  The heating SDE

    dp = -dH/dq dt,   dq = +dH/dp dt + sqrt(2 gamma1) dW

is integrated with a fixed-step splitting scheme: an RK4 step of the
deterministic flow followed by an exact Gaussian kick of the relative phase.
For this additive noise the scheme is strong order 1; the high-order drift
substep keeps long runs (t ~ 1/gamma1) accurate where a plain Euler drift
would dominate the error budget.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq, root

from .exact import PropagationConfig, PropagationError
from .model import ModelSpec
from .phasespace import NOISE_STREAM, trajectory_rng
from .points import PhasePoint

logger = logging.getLogger(__name__)

_TWO_PI = 2.0 * np.pi

ORDERINGS = ("q", "p")  # g = U N  versus  g~ = U (N + 2)


@dataclass(frozen=True)
class ClassicalSpec:
    """Macroscopic counterpart of ModelSpec with coupling g instead of (U, N).

    ``ordering`` records which operator ordering the coupling was derived
    from: 'q' for g = U*N (Husimi route) and 'p' for g = U*(N+2)
    (Glauber-Sudarshan route).
    """

    modes: int
    delta: float | tuple[float, float]
    g: float
    eps: float | tuple[float, float, float] = 0.0
    ordering: str = "q"
    gamma1: float = 0.0
    delta1: float = 0.0
    omega: float = 0.0

    def __post_init__(self):
        if self.modes not in (2, 3):
            raise ValueError("modes must be 2 or 3")
        if self.ordering not in ORDERINGS:
            raise ValueError(f"ordering must be one of {ORDERINGS}")
        if self.modes == 3:
            d = np.atleast_1d(np.asarray(self.delta, dtype=float))
            if d.shape != (2,):
                raise ValueError("three-mode spec takes tunnelings (delta12, delta23)")
            object.__setattr__(self, "delta", (float(d[0]), float(d[1])))
            e = np.atleast_1d(np.asarray(self.eps, dtype=float))
            if e.shape == (1,) and float(e[0]) == 0.0:
                e = np.zeros(3)
            if e.shape != (3,):
                raise ValueError("three-mode spec takes (eps1, eps2, eps3)")
            object.__setattr__(self, "eps", (float(e[0]), float(e[1]), float(e[2])))
            if self.delta1 != 0.0:
                raise ValueError("the drive is defined for the two-mode system only")
        if self.delta1 != 0.0 and not self.omega > 0.0:
            raise ValueError("a driven spec needs omega > 0")
        if self.gamma1 < 0.0:
            raise ValueError("gamma1 must be non-negative")

    @classmethod
    def from_model(cls, spec: ModelSpec, ordering: str = "q") -> "ClassicalSpec":
        if ordering not in ORDERINGS:
            raise ValueError(f"ordering must be one of {ORDERINGS}")
        shift = spec.particles if ordering == "q" else spec.particles + 2
        return cls(
            modes=spec.modes,
            delta=spec.delta,
            g=spec.u * shift,
            eps=spec.eps,
            ordering=ordering,
            gamma1=spec.gamma1,
            delta1=spec.delta1,
            omega=spec.omega,
        )

    @property
    def driven(self) -> bool:
        return self.delta1 != 0.0

    def delta_at(self, t):
        if self.modes != 2:
            raise ValueError("delta_at is defined for the two-mode system")
        return self.delta + self.delta1 * np.cos(self.omega * t)

    def drive_period(self) -> float:
        if not self.omega > 0.0:
            raise ValueError("spec has no drive period (omega <= 0)")
        return _TWO_PI / self.omega

    def onsite(self) -> np.ndarray:
        """Per-mode on-site energies (eps1 = 0, eps2 = eps for two modes)."""
        if self.modes == 2:
            return np.array([0.0, float(self.eps)])
        return np.asarray(self.eps, dtype=float)


# ---------------------------------------------------------------------------
# Energy and equations of motion
# ---------------------------------------------------------------------------

def classical_energy(cspec: ClassicalSpec, point, t: float = 0.0) -> float:
    """H at a PhasePoint (or amplitude vector); boundary points are regular."""
    psi = np.asarray(getattr(point, "psi", point), dtype=complex)
    return float(np.real(_energy_from_amplitudes(cspec, psi, t)))


def _energy_from_amplitudes(cspec, psi, t):
    occ = np.abs(psi) ** 2
    if cspec.modes == 2:
        kin = -2.0 * cspec.delta_at(t) * np.real(np.conj(psi[..., 1]) * psi[..., 0])
        return (
            float(cspec.eps) * occ[..., 1]
            + kin
            + 0.25 * cspec.g * (occ[..., 0] - occ[..., 1]) ** 2
        )
    d12, d23 = cspec.delta
    eps = np.asarray(cspec.eps)
    return (
        occ @ eps
        + 0.5 * cspec.g * np.sum(occ**2, axis=-1)
        - 2.0 * d12 * np.real(np.conj(psi[..., 0]) * psi[..., 1])
        - 2.0 * d23 * np.real(np.conj(psi[..., 2]) * psi[..., 1])
    )


def amplitude_rhs(cspec: ClassicalSpec, psi: np.ndarray, t: float = 0.0,
                  g=None) -> np.ndarray:
    """d psi / dt of the discrete GPE; broadcasts over leading axes.

    ``g`` overrides the coupling (scalar or one value per leading row), which
    is how Glauber amplitude noise enters as an effective nonlinearity.
    """
    g = cspec.g if g is None else g
    g = np.asarray(g)[..., None] if np.ndim(g) else g
    occ = np.abs(psi) ** 2
    out = np.empty_like(psi)
    if cspec.modes == 2:
        delta = cspec.delta_at(t)
        diag = g * occ
        diag = diag + np.array([0.0, float(cspec.eps)])
        out[..., 0] = diag[..., 0] * psi[..., 0] - delta * psi[..., 1]
        out[..., 1] = diag[..., 1] * psi[..., 1] - delta * psi[..., 0]
    else:
        d12, d23 = cspec.delta
        diag = g * occ + np.asarray(cspec.eps)
        out[..., 0] = diag[..., 0] * psi[..., 0] - d12 * psi[..., 1]
        out[..., 1] = diag[..., 1] * psi[..., 1] - d12 * psi[..., 0] - d23 * psi[..., 2]
        out[..., 2] = diag[..., 2] * psi[..., 2] - d23 * psi[..., 1]
    return -1j * out


def gpe_rhs(cspec: ClassicalSpec, coords, t: float = 0.0) -> np.ndarray:
    """Canonical velocities (dp/dt = -dH/dq, dq/dt = +dH/dp) in coordinates.

    Singular on the chart boundary (any empty mode); integrate in amplitude
    form there.  Accepts a PhasePoint or a coordinate array; complex inputs
    are allowed for complex-step differentiation.
    """
    coords = np.asarray(
        coords.coordinates() if isinstance(coords, PhasePoint) else coords
    )
    if cspec.modes == 2:
        p, q = coords
        if not 0.0 < np.real(p) < 1.0:
            raise ValueError("coordinate-form RHS is singular at p in {0, 1}")
        root_term = np.sqrt(p * (1.0 - p))
        pdot = -2.0 * cspec.delta_at(t) * root_term * np.sin(q)
        qdot = (
            float(cspec.eps)
            - cspec.delta_at(t) * (1.0 - 2.0 * p) / root_term * np.cos(q)
            - cspec.g * (1.0 - 2.0 * p)
        )
        return np.array([pdot, qdot])
    p1, p3, q1, q3 = coords
    p2 = 1.0 - p1 - p3
    if min(np.real(p1), np.real(p2), np.real(p3)) <= 0.0:
        raise ValueError("coordinate-form RHS is singular on the simplex boundary")
    d12, d23 = cspec.delta
    e1, e2, e3 = cspec.onsite()
    g = cspec.g
    r12 = np.sqrt(p1 * p2)
    r23 = np.sqrt(p2 * p3)
    p1dot = -2.0 * d12 * r12 * np.sin(q1)
    p3dot = -2.0 * d23 * r23 * np.sin(q3)
    q1dot = (
        e1 - e2 + g * (p1 - p2)
        - d12 * (p2 - p1) / r12 * np.cos(q1)
        + d23 * np.sqrt(p3 / p2) * np.cos(q3)
    )
    q3dot = (
        e3 - e2 + g * (p3 - p2)
        - d23 * (p2 - p3) / r23 * np.cos(q3)
        + d12 * np.sqrt(p1 / p2) * np.cos(q1)
    )
    return np.array([p1dot, p3dot, q1dot, q3dot])


def coordinate_velocity_from_amplitudes(cspec, psi, t: float = 0.0) -> np.ndarray:
    """Map the amplitude-form RHS to coordinate velocities at an interior point."""
    dpsi = amplitude_rhs(cspec, psi, t)
    occ_dot = 2.0 * np.real(np.conj(psi) * dpsi)
    phase_dot = np.imag(dpsi / psi)
    if cspec.modes == 2:
        return np.array([occ_dot[1], phase_dot[0] - phase_dot[1]])
    return np.array(
        [occ_dot[0], occ_dot[2], phase_dot[1] - phase_dot[0], phase_dot[1] - phase_dot[2]]
    )


def rhs_jacobian(cspec: ClassicalSpec, coords, t: float = 0.0) -> np.ndarray:
    """Jacobian of the coordinate RHS by complex-step differentiation."""
    coords = np.asarray(
        coords.coordinates() if isinstance(coords, PhasePoint) else coords,
        dtype=complex,
    )
    n = coords.size
    h = 1e-20
    jac = np.empty((n, n))
    for k in range(n):
        shifted = coords.copy()
        shifted[k] += 1j * h
        jac[:, k] = np.imag(gpe_rhs(cspec, shifted, t)) / h
    return jac


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    """Sampled mean-field path: times, amplitudes, energies, diagnostics."""

    times: np.ndarray
    psi: np.ndarray  # (n_samples, modes), normalized rows
    energy: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def modes(self) -> int:
        return self.psi.shape[1]

    def point(self, i: int) -> PhasePoint:
        return PhasePoint(self.psi[i])

    def coordinates(self) -> np.ndarray:
        """(n_samples, 2) of (p, q) or (n_samples, 4) of (p1, p3, q1, q3)."""
        occ = np.abs(self.psi) ** 2
        if self.modes == 2:
            q = np.mod(np.angle(self.psi[:, 0]) - np.angle(self.psi[:, 1]), _TWO_PI)
            return np.column_stack([occ[:, 1], q])
        q1 = np.mod(np.angle(self.psi[:, 1]) - np.angle(self.psi[:, 0]), _TWO_PI)
        q3 = np.mod(np.angle(self.psi[:, 1]) - np.angle(self.psi[:, 2]), _TWO_PI)
        return np.column_stack([occ[:, 0], occ[:, 2], q1, q3])

    def to_csv(self, path):
        from . import io

        coords = self.coordinates()
        names = ["p", "q"] if self.modes == 2 else ["p1", "p3", "q1", "q3"]
        io.write_csv(
            path,
            ["time", *names, "energy"],
            [self.times, *coords.T, self.energy],
            meta={"modes": self.modes},
        )


def integrate_trajectory(cspec: ClassicalSpec, start: PhasePoint,
                         cfg: PropagationConfig) -> Trajectory:
    """Integrate the GPE in amplitude form; samples at cfg.times()."""
    if start.modes != cspec.modes:
        raise ValueError("start point does not match the mode count")
    times = cfg.times()
    shape = start.psi.shape

    def f(t, y):
        psi = y[: shape[0]] + 1j * y[shape[0] :]
        d = amplitude_rhs(cspec, psi, t)
        return np.concatenate([d.real, d.imag])

    sol = solve_ivp(
        f,
        (cfg.t_start, cfg.t_end),
        np.concatenate([start.psi.real, start.psi.imag]),
        method=cfg.method,
        t_eval=times,
        rtol=cfg.rtol,
        atol=cfg.atol,
        max_step=cfg.max_step,
    )
    if not sol.success:
        raise PropagationError(f"trajectory integration failed: {sol.message}")
    psi = (sol.y[: shape[0]] + 1j * sol.y[shape[0] :]).T
    norms = np.linalg.norm(psi, axis=1)
    drift = float(np.max(np.abs(norms - 1.0)))
    if drift > cfg.check_tol:
        raise PropagationError(f"amplitude norm drifted by {drift:.2e}")
    psi = psi / norms[:, None]
    energy = np.array(
        [np.real(_energy_from_amplitudes(cspec, row, t)) for t, row in zip(times, psi)]
    )
    return Trajectory(times, psi, energy, {"nfev": sol.nfev, "norm_drift": drift})


# ---------------------------------------------------------------------------
# Fixed points (two-mode)
# ---------------------------------------------------------------------------

@dataclass
class FixedPoint:
    point: PhasePoint
    stability: str  # 'elliptic' | 'hyperbolic'
    eigenvalues: np.ndarray
    residual: float

    def to_record(self) -> dict:
        return {
            "p": self.point.p,
            "q": self.point.q,
            "stability": self.stability,
            "eigenvalue_real_max": float(np.max(np.abs(self.eigenvalues.real))),
            "eigenvalue_imag_max": float(np.max(np.abs(self.eigenvalues.imag))),
            "residual": self.residual,
        }


def _classify(cspec, p, q) -> FixedPoint:
    coords = np.array([p, q])
    res = float(np.linalg.norm(gpe_rhs(cspec, coords)))
    evals = np.linalg.eigvals(rhs_jacobian(cspec, coords))
    scale = max(1.0, float(np.max(np.abs(evals))))
    stability = "hyperbolic" if np.max(evals.real) > 1e-8 * scale else "elliptic"
    return FixedPoint(PhasePoint.from_pq(p, np.mod(q, _TWO_PI)), stability, evals, res)


def find_fixed_points_2mode(cspec: ClassicalSpec, seed_grid: int = 16) -> list[FixedPoint]:
    """All rest points of the two-mode flow, tagged elliptic or hyperbolic.

    For eps = 0 the roots lie on the lines q in {0, pi} and are found by
    bracketing 1-d root-finding (exact bifurcation counting); for eps != 0 a
    Newton search from a seed grid is used, with duplicates merged at 1e-6.
    """
    if cspec.modes != 2:
        raise ValueError("fixed-point search is a two-mode operation")
    if cspec.driven:
        raise ValueError("fixed points are defined for the autonomous system")
    found: list[FixedPoint] = []
    if float(np.ndim(cspec.eps)) == 0 and float(cspec.eps) == 0.0:
        for q in (0.0, np.pi):
            found.append(_classify(cspec, 0.5, q))
            # off-center roots of delta*cos(q)/sqrt(p(1-p)) + g = 0
            if cspec.g != 0.0:
                target = -cspec.delta * np.cos(q) / cspec.g
                if 0.0 < target < 0.5:  # sqrt(p(1-p)) <= 1/2
                    h = lambda p: np.sqrt(p * (1.0 - p)) - target
                    lo = brentq(h, 1e-12, 0.5, xtol=1e-14)
                    found.append(_classify(cspec, lo, q))
                    found.append(_classify(cspec, 1.0 - lo, q))
        return found
    # generic on-site tilt: 2-d Newton from a seed grid
    def bounded_rhs(x):
        p = x[0]
        if not 1e-9 < p < 1.0 - 1e-9:
            # steer the solver back into the chart instead of raising
            overshoot = max(1e-9 - p, p - (1.0 - 1e-9), 0.0)
            return np.array([1.0 + overshoot, 1.0 + overshoot])
        return gpe_rhs(cspec, x)

    raw = []
    failures = 0
    for p0 in np.linspace(0.05, 0.95, seed_grid):
        for q0 in np.linspace(0.0, _TWO_PI, seed_grid, endpoint=False):
            sol = root(bounded_rhs, np.array([p0, q0]), tol=1e-12)
            if not sol.success:
                failures += 1
                logger.debug("fixed-point seed (%.3f, %.3f) did not converge", p0, q0)
                continue
            p, q = sol.x
            if not 1e-9 < p < 1.0 - 1e-9:
                continue
            if np.linalg.norm(bounded_rhs(sol.x)) > 1e-9:
                continue
            raw.append((p, np.mod(q, _TWO_PI)))
    if failures:
        logger.info("fixed-point search: %d seeds failed to converge", failures)
    merged: list[tuple[float, float]] = []
    for p, q in raw:
        if not any(
            abs(p - p2) < 1e-6 and min(abs(q - q2), _TWO_PI - abs(q - q2)) < 1e-6
            for p2, q2 in merged
        ):
            merged.append((p, q))
    return [_classify(cspec, p, q) for p, q in sorted(merged)]


# ---------------------------------------------------------------------------
# Stochastic (heating) dynamics
# ---------------------------------------------------------------------------

def _rk4_drift(cspec, psi, t, h, g):
    k1 = amplitude_rhs(cspec, psi, t, g)
    k2 = amplitude_rhs(cspec, psi + 0.5 * h * k1, t + 0.5 * h, g)
    k3 = amplitude_rhs(cspec, psi + 0.5 * h * k2, t + 0.5 * h, g)
    k4 = amplitude_rhs(cspec, psi + h * k3, t + h, g)
    return psi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def sde_paths(
    cspec: ClassicalSpec,
    psi0: np.ndarray,
    cfg: PropagationConfig,
    master_seed: int,
    stream_ids: np.ndarray,
    dt: float = 1e-3,
    g=None,
) -> tuple[np.ndarray, np.ndarray]:
    """Fixed-step splitting integration of a batch of (possibly noisy) paths.

    Each trajectory's phase noise comes from its own counter-based stream
    (master_seed, stream_id), so results do not depend on how the batch is
    split across workers.  Within each sampling interval the step count is
    ``round(interval/dt)`` (at least 1) so samples land exactly on the grid.
    Returns (times, psi) with psi of shape (n_times, count, modes).
    """
    if cspec.modes != 2 and cspec.gamma1 != 0.0:
        raise ValueError("the heating SDE is defined for the two-mode system")
    times = cfg.times()
    psi0 = np.atleast_2d(np.asarray(psi0, dtype=complex))
    count = psi0.shape[0]
    noisy = cspec.gamma1 > 0.0
    rngs = (
        [trajectory_rng(master_seed, int(i), NOISE_STREAM) for i in stream_ids]
        if noisy
        else None
    )
    out = np.empty((times.size, count, cspec.modes), dtype=complex)
    psi = psi0.copy()
    t = float(times[0])
    if times[0] != cfg.t_start:
        raise ValueError("SDE sampling must start at t_start")
    out[0] = psi
    sigma = np.sqrt(2.0 * cspec.gamma1)
    for k in range(1, times.size):
        interval = float(times[k] - times[k - 1])
        n_steps = max(1, round(interval / dt))
        h = interval / n_steps
        if noisy:
            kicks = np.stack(
                [rng.standard_normal(n_steps) for rng in rngs], axis=0
            )  # (count, n_steps)
        for s in range(n_steps):
            psi = _rk4_drift(cspec, psi, t, h, g)
            if noisy:
                # dq = sqrt(2 gamma1) dW on the relative phase q = arg psi1 - arg psi2
                psi[:, 1] = psi[:, 1] * np.exp(-1j * sigma * np.sqrt(h) * kicks[:, s])
            psi = psi / np.linalg.norm(psi, axis=1)[:, None]
            t += h
        t = float(times[k])
        out[k] = psi
    return times, out


def integrate_sde(
    cspec: ClassicalSpec,
    start: PhasePoint,
    cfg: PropagationConfig,
    master_seed: int,
    dt: float = 1e-3,
    stream_id: int = 0,
) -> Trajectory:
    """Single stochastic path of the heating dynamics; deterministic per seed.

    With gamma1 = 0 this reduces to fixed-step deterministic integration of
    the GPE (no stream is consumed).
    """
    if start.modes != cspec.modes:
        raise ValueError("start point does not match the mode count")
    times, psi = sde_paths(
        cspec,
        start.psi[None, :],
        cfg,
        master_seed,
        np.array([stream_id]),
        dt=dt,
    )
    path = psi[:, 0, :]
    energy = np.array(
        [np.real(_energy_from_amplitudes(cspec, row, t)) for t, row in zip(times, path)]
    )
    return Trajectory(times, path, energy, {"dt": dt, "scheme": "rk4-splitting"})
