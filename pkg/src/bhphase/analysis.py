"""Chaos diagnostics: Poincare sections, stroboscopic maps, power spectra.

The three-mode Poincare section plots (p3, q3) whenever a trajectory crosses
the q1 = 0 plane with dq1/dt > 0; p1 then follows from energy conservation.
Where the energy equation has two p1 roots the section keeps only crossings on
the smaller-p1 branch (records carry a ``two_roots`` tag so the ambiguous
region is visible); crossings on the larger branch are counted and discarded.
Crossing times are located on the integrator's dense output and refined by
bracketing root-finding to |q1| <= 1e-8 (mod 2 pi).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .exact import PropagationError
from .meanfield import (
    ClassicalSpec,
    amplitude_rhs,
    classical_energy,
    coordinate_velocity_from_amplitudes,
)
from .points import PhasePoint

_TWO_PI = 2.0 * np.pi

Q1_REFINE_TOL = 1e-8


@dataclass
class SectionRecord:
    time: float
    p3: float
    q3: float
    p1: float
    two_roots: bool
    trajectory: int


@dataclass
class SectionData:
    """Poincare-section crossings on one energy shell."""

    energy: float
    records: list[SectionRecord] = field(default_factory=list)
    discarded_larger_branch: int = 0

    def __len__(self):
        return len(self.records)

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            "time": np.array([r.time for r in self.records]),
            "p3": np.array([r.p3 for r in self.records]),
            "q3": np.array([r.q3 for r in self.records]),
            "p1": np.array([r.p1 for r in self.records]),
            "two_roots": np.array([r.two_roots for r in self.records], dtype=bool),
            "trajectory": np.array([r.trajectory for r in self.records]),
        }

    def to_csv(self, path):
        from . import io

        arrays = self.arrays()
        io.write_csv(
            path,
            ["time", "p3", "q3", "p1", "two_roots", "trajectory"],
            [
                arrays["time"],
                arrays["p3"],
                arrays["q3"],
                arrays["p1"],
                arrays["two_roots"].astype(int),
                arrays["trajectory"],
            ],
            meta={
                "energy": repr(self.energy),
                "discarded_larger_branch": self.discarded_larger_branch,
            },
        )


def shell_p1_roots(cspec: ClassicalSpec, p3: float, q3: float, energy: float,
                   grid: int = 800) -> np.ndarray:
    """All p1 in [0, 1-p3] with H(p1, p3, q1=0, q3) = energy."""
    e1, e2, e3 = cspec.onsite()
    d12, d23 = cspec.delta
    g = cspec.g

    def h_of_p1(p1):
        p2 = np.clip(1.0 - p1 - p3, 0.0, None)
        return (
            e1 * p1 + e2 * p2 + e3 * p3
            + 0.5 * g * (p1**2 + p2**2 + p3**2)
            - 2.0 * d12 * np.sqrt(p1 * p2)
            - 2.0 * d23 * np.sqrt(p2 * p3) * np.cos(q3)
            - energy
        )

    upper = 1.0 - p3
    ps = np.linspace(0.0, upper, grid + 1)
    vals = h_of_p1(ps)
    roots = []
    for k in range(grid):
        a, b = vals[k], vals[k + 1]
        if a == 0.0:
            roots.append(ps[k])
        elif a * b < 0.0:
            roots.append(brentq(h_of_p1, ps[k], ps[k + 1], xtol=1e-13))
    if vals[-1] == 0.0:
        roots.append(upper)
    # merge duplicates from grazing sign changes
    merged = []
    for r in sorted(roots):
        if not merged or r - merged[-1] > 1e-9:
            merged.append(r)
    return np.array(merged)


def initial_point_on_shell(cspec: ClassicalSpec, p3: float, q3: float,
                           energy: float, branch: str = "smaller") -> PhasePoint:
    """A section-plane point (q1 = 0) on the requested energy shell."""
    roots = shell_p1_roots(cspec, p3, q3, energy)
    if roots.size == 0:
        raise ValueError(
            f"(p3, q3) = ({p3}, {q3}) is energetically forbidden on shell H = {energy}"
        )
    p1 = roots[0] if branch == "smaller" else roots[-1]
    return PhasePoint.from_trimer(p1, p3, 0.0, q3)


def _integrate_dense(cspec, start, t_max, rtol, atol):
    def f(t, y):
        psi = y[:3] + 1j * y[3:]
        d = amplitude_rhs(cspec, psi, t)
        return np.concatenate([d.real, d.imag])

    sol = solve_ivp(
        f,
        (0.0, t_max),
        np.concatenate([start.psi.real, start.psi.imag]),
        method="RK45",
        dense_output=True,
        rtol=rtol,
        atol=atol,
    )
    if not sol.success:
        raise PropagationError(f"section trajectory failed: {sol.message}")
    return sol


def poincare_section_3mode(
    cspec: ClassicalSpec,
    initial_points,
    t_max: float,
    tol: float = 1e-6,
    energy: float | None = None,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    scan_step: float = 0.01,
) -> SectionData:
    """Collect q1 = 0 (dq1/dt > 0) crossings of three-mode trajectories.

    All initial points must lie on the target energy shell within ``tol``
    (default shell: the energy of the first point).  Returns records that
    satisfy |H - energy| <= tol, refined to |q1| <= 1e-8; an empty result
    (no crossings within t_max) is returned with a warning.
    """
    if cspec.modes != 3:
        raise ValueError("the q1 = 0 section is a three-mode construction")
    points = list(initial_points)
    if not points:
        raise ValueError("need at least one initial point")
    if energy is None:
        energy = classical_energy(cspec, points[0])
    for k, pt in enumerate(points):
        off = abs(classical_energy(cspec, pt) - energy)
        if off > tol:
            raise ValueError(
                f"initial point {k} is off the energy shell by {off:.2e} (> {tol})"
            )
    data = SectionData(energy=energy)
    for traj_id, start in enumerate(points):
        sol = _integrate_dense(cspec, start, t_max, rtol, atol)
        t_scan = _scan_grid(sol.t, scan_step)
        y = sol.sol(t_scan)
        psi = y[:3] + 1j * y[3:]
        cross = psi[1] * np.conj(psi[0])  # |..| e^{i q1}
        f_vals = cross.imag
        re_ok = cross.real > 0.0

        def f_of_t(t):
            yy = sol.sol(t)
            pp = yy[:3] + 1j * yy[3:]
            return float((pp[1] * np.conj(pp[0])).imag)

        candidates = []
        if abs(f_vals[0]) < 1e-12 and re_ok[0]:
            candidates.append(float(t_scan[0]))
        for k in range(f_vals.size - 1):
            if f_vals[k] < 0.0 <= f_vals[k + 1] and re_ok[k] and re_ok[k + 1]:
                t_star = brentq(f_of_t, t_scan[k], t_scan[k + 1], xtol=1e-13)
                candidates.append(float(t_star))
        for t_star in candidates:
            yy = sol.sol(t_star)
            pp = yy[:3] + 1j * yy[3:]
            pp = pp / np.linalg.norm(pp)
            point = PhasePoint(pp)
            q1 = point.q1
            q1_dist = min(q1, _TWO_PI - q1)
            if q1_dist > Q1_REFINE_TOL:
                continue
            vel = coordinate_velocity_from_amplitudes(cspec, pp)
            if vel[2] <= 0.0:  # direction filter: dq1/dt > 0
                continue
            h_err = abs(classical_energy(cspec, pp) - energy)
            if h_err > tol:
                raise PropagationError(
                    f"energy drifted by {h_err:.2e} at a crossing; tighten rtol"
                )
            p1, p3, q3 = point.p1, point.p3, point.q3
            roots = shell_p1_roots(cspec, p3, q3, energy)
            two = roots.size >= 2
            if two and abs(p1 - roots[0]) > abs(p1 - roots[-1]):
                data.discarded_larger_branch += 1
                continue
            data.records.append(
                SectionRecord(t_star, p3, q3, p1, two, traj_id)
            )
    if not data.records:
        warnings.warn("no section crossings found within t_max", stacklevel=2)
    return data


def _scan_grid(step_times: np.ndarray, scan_step: float) -> np.ndarray:
    """Integrator steps subdivided to at most scan_step spacing."""
    pieces = []
    for a, b in zip(step_times[:-1], step_times[1:]):
        n = max(2, int(np.ceil((b - a) / scan_step)) + 1)
        pieces.append(np.linspace(a, b, n)[:-1])
    pieces.append(step_times[-1:])
    return np.concatenate(pieces)


# ---------------------------------------------------------------------------
# Stroboscopic map
# ---------------------------------------------------------------------------

def stroboscopic_map(
    cspec: ClassicalSpec,
    initial_points,
    n_periods: int,
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> list[np.ndarray]:
    """(p, q) sampled at multiples of the drive period, per initial point."""
    if cspec.modes != 2:
        raise ValueError("the stroboscopic map is a two-mode construction")
    if not cspec.omega > 0.0:
        raise ValueError("a stroboscopic map needs a periodic spec (omega > 0)")
    period = cspec.drive_period()
    out = []
    for start in initial_points:
        def f(t, y):
            psi = y[:2] + 1j * y[2:]
            d = amplitude_rhs(cspec, psi, t)
            return np.concatenate([d.real, d.imag])

        sol = solve_ivp(
            f,
            (0.0, n_periods * period),
            np.concatenate([start.psi.real, start.psi.imag]),
            t_eval=np.arange(n_periods + 1) * period,
            rtol=rtol,
            atol=atol,
        )
        if not sol.success:
            raise PropagationError(f"stroboscopic trajectory failed: {sol.message}")
        psi = (sol.y[:2] + 1j * sol.y[2:]).T
        psi = psi / np.linalg.norm(psi, axis=1)[:, None]
        p = np.abs(psi[:, 1]) ** 2
        q = np.mod(np.angle(psi[:, 0]) - np.angle(psi[:, 1]), _TWO_PI)
        out.append(np.column_stack([p, q]))
    return out


# ---------------------------------------------------------------------------
# Power spectrum
# ---------------------------------------------------------------------------

def power_spectrum(times: np.ndarray, values: np.ndarray,
                   window: str | None = None) -> tuple[np.ndarray, np.ndarray]:
    """One-sided power spectrum of a uniformly sampled real series.

    Frequencies are in cycles per time unit; the power normalization satisfies
    Parseval's identity sum_k P_k = mean(values^2) (for the raw periodogram,
    window=None).  An optional Hann window is available behind ``window``.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.ndim != 1 or times.size < 2 or values.shape != times.shape:
        raise ValueError("need matching 1-d series with at least two samples")
    steps = np.diff(times)
    dt = steps.mean()
    if np.max(np.abs(steps - dt)) > 1e-9 * max(dt, 1.0):
        raise ValueError("power_spectrum requires a uniform time grid")
    if window is None:
        data = values
    elif window == "hann":
        data = values * np.hanning(values.size)
    else:
        raise ValueError("window must be None or 'hann'")
    n = data.size
    spectrum = np.fft.rfft(data)
    power = np.abs(spectrum) ** 2 / n**2
    # fold the two-sided spectrum: interior bins appear twice
    power[1:] *= 2.0
    if n % 2 == 0:
        power[-1] /= 2.0
    freqs = np.fft.rfftfreq(n, d=dt)
    return freqs, power
