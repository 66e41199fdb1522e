"""Monte-Carlo Liouville engine: sampled ensembles under the mean-field flow.

Determinism contract
--------------------
Every random number is drawn from a per-trajectory counter-based stream keyed
by (master seed, trajectory index); trajectories are integrated independently;
reductions use pairwise summation in fixed trajectory order.  Consequently the
output of every operation here is bit-identical for a fixed (seed, config)
regardless of the worker count.

Observable estimates
--------------------
Ensemble averages of the classical Bloch vector estimate <J_k>/N with the
operator-ordering prefactor attached to the sampler: (N+2)/N for
Husimi-sampled ensembles, 1 for delta (P-function) ensembles.  Glauber
ensembles reuse the Husimi prefactor for the angular average; their amplitude
noise enters the dynamics through the per-trajectory coupling U * alpha^2.
Standard errors are per-component sample errors of the mean.  Trajectory
failures abort the run by default; excluding failed trajectories from the
averages biases them and must be opted into explicitly.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .exact import PropagationConfig
from .meanfield import ClassicalSpec, integrate_trajectory, sde_paths
from .model import ModelSpec
from .phasespace import (
    Ensemble,
    sample_glauber_husimi,
    sample_su2_husimi,
    sample_su3_husimi,
)
from .points import PhasePoint
from .series import ObservableSeries

SAMPLERS = ("delta", "su2-husimi", "su3-husimi", "glauber-husimi")


class EnsemblePropagationError(RuntimeError):
    """A trajectory failed to integrate; carries the trajectory id."""

    def __init__(self, trajectory_id: int, cause: Exception):
        super().__init__(f"trajectory {trajectory_id} failed: {cause}")
        self.trajectory_id = trajectory_id
        self.cause = cause


@dataclass
class EnsembleConfig:
    """Trajectory count, seed, sampler kind, ordering, and worker policy."""

    count: int
    master_seed: int
    sampler: str = "su2-husimi"
    ordering: str = "q"  # 'q': g = U N; 'p': g = U (N+2)
    workers: int = 1
    sde_dt: float = 1e-3
    on_failure: str = "abort"  # abort | exclude

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("trajectory count must be positive")
        if self.sampler not in SAMPLERS:
            raise ValueError(f"sampler must be one of {SAMPLERS}")
        if self.ordering not in ("q", "p"):
            raise ValueError("ordering must be 'q' or 'p'")
        if self.on_failure not in ("abort", "exclude"):
            raise ValueError("on_failure must be 'abort' or 'exclude'")
        if self.workers < 1:
            raise ValueError("worker count must be positive")


def build_ensemble(spec: ModelSpec, center: PhasePoint, cfg: EnsembleConfig) -> Ensemble:
    """Draw the initial ensemble for a model around a phase-space center."""
    if center.modes != spec.modes:
        raise ValueError("center does not match the model's mode count")
    if cfg.sampler == "delta":
        psi = np.tile(center.psi, (cfg.count, 1))
        return Ensemble(psi, spec.particles, cfg.master_seed,
                        np.arange(cfg.count), "delta", center=center)
    if cfg.sampler == "su2-husimi":
        if spec.modes != 2:
            raise ValueError("su2-husimi sampling needs a two-mode model")
        return sample_su2_husimi(center, spec.particles, cfg.count, cfg.master_seed)
    if cfg.sampler == "su3-husimi":
        if spec.modes != 3:
            raise ValueError("su3-husimi sampling needs a three-mode model")
        return sample_su3_husimi(center, spec.particles, cfg.count, cfg.master_seed)
    if spec.modes != 2:
        raise ValueError("glauber-husimi sampling needs a two-mode model")
    return sample_glauber_husimi(center, spec.particles, cfg.count, cfg.master_seed)


@dataclass
class EnsembleSnapshots:
    """Trajectory amplitudes on the shared sample-time grid.

    ``psi[k, i]`` is trajectory i at times[k]; ``active`` marks trajectories
    that integrated successfully (all true unless failures were excluded).
    """

    times: np.ndarray
    psi: np.ndarray  # (n_times, count, modes)
    particles: int
    master_seed: int
    sampler: str
    stream_ids: np.ndarray
    alpha2: np.ndarray | None = None
    active: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.active is None:
            self.active = np.ones(self.psi.shape[1], dtype=bool)

    @property
    def count(self) -> int:
        return self.psi.shape[1]

    @property
    def modes(self) -> int:
        return self.psi.shape[2]

    def ensemble_at(self, k: int) -> Ensemble:
        return Ensemble(
            self.psi[k][self.active],
            self.particles,
            self.master_seed,
            self.stream_ids[self.active],
            self.sampler,
            alpha2=None if self.alpha2 is None else self.alpha2[self.active],
        )

    def dump(self, path):
        """Debug/plot dump: one block of (id, coordinates) rows per time."""
        names = ["id", "p", "q"] if self.modes == 2 else ["id", "p1", "p3", "q1", "q3"]
        lines = [f"# sampler = {self.sampler}", f"# master_seed = {self.master_seed}"]
        for k, t in enumerate(self.times):
            lines.append(f"# t = {t!r}")
            lines.append(",".join(names))
            coords = _coordinates(self.psi[k])
            for i in np.nonzero(self.active)[0]:
                row = [str(int(self.stream_ids[i]))] + [repr(float(c)) for c in coords[i]]
                lines.append(",".join(row))
        from pathlib import Path

        Path(path).write_text("\n".join(lines) + "\n")


def _coordinates(psi: np.ndarray) -> np.ndarray:
    occ = np.abs(psi) ** 2
    if psi.shape[1] == 2:
        q = np.mod(np.angle(psi[:, 0]) - np.angle(psi[:, 1]), 2 * np.pi)
        return np.column_stack([occ[:, 1], q])
    q1 = np.mod(np.angle(psi[:, 1]) - np.angle(psi[:, 0]), 2 * np.pi)
    q3 = np.mod(np.angle(psi[:, 1]) - np.angle(psi[:, 2]), 2 * np.pi)
    return np.column_stack([occ[:, 0], occ[:, 2], q1, q3])


# ---------------------------------------------------------------------------
# Propagation
# ---------------------------------------------------------------------------

def _propagate_one(args):
    """Worker task: one deterministic trajectory (picklable module function)."""
    cspec, psi_row, prop, g = args
    if g is not None:
        cspec = replace(cspec, g=float(g))
    traj = integrate_trajectory(cspec, PhasePoint(psi_row), prop)
    return traj.psi


def propagate_ensemble(
    spec: ModelSpec,
    ens: Ensemble,
    cfg: EnsembleConfig,
    prop: PropagationConfig,
) -> EnsembleSnapshots:
    """Propagate every ensemble member by the mean-field flow.

    gamma1 = 0 runs the adaptive deterministic integrator per trajectory;
    gamma1 > 0 runs the fixed-step stochastic splitting scheme with
    per-trajectory noise streams.  Output is bit-identical for fixed
    (ensemble, config) for any worker count.
    """
    if ens.modes != spec.modes:
        raise ValueError("ensemble does not match the model's mode count")
    cspec = ClassicalSpec.from_model(spec, cfg.ordering)
    times = prop.times()
    per_traj_g = None
    if ens.sampler == "glauber-husimi":
        if ens.alpha2 is None:
            raise ValueError("glauber ensemble is missing its amplitude array")
        per_traj_g = spec.u * ens.alpha2
    if cspec.gamma1 > 0.0:
        psi_out = _propagate_sde(cspec, ens, cfg, prop, per_traj_g)
        active = np.ones(ens.count, dtype=bool)
    else:
        psi_out, active = _propagate_deterministic(
            cspec, ens, cfg, prop, per_traj_g
        )
    return EnsembleSnapshots(
        times=times,
        psi=psi_out,
        particles=ens.particles,
        master_seed=ens.master_seed,
        sampler=ens.sampler,
        stream_ids=ens.stream_ids,
        alpha2=ens.alpha2,
        active=active,
        meta={"ordering": cfg.ordering, "workers": cfg.workers},
    )


def _propagate_deterministic(cspec, ens, cfg, prop, per_traj_g):
    times = prop.times()
    count = ens.count
    tasks = [
        (cspec, ens.psi[i], prop, None if per_traj_g is None else per_traj_g[i])
        for i in range(count)
    ]
    psi_out = np.empty((times.size, count, ens.modes), dtype=complex)
    active = np.ones(count, dtype=bool)
    failures: list[tuple[int, Exception]] = []

    def handle(i, result):
        psi_out[:, i, :] = result

    if cfg.workers == 1:
        for i, task in enumerate(tasks):
            try:
                handle(i, _propagate_one(task))
            except Exception as exc:  # noqa: BLE001 - policy decides below
                failures.append((i, exc))
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futures = [pool.submit(_propagate_one, task) for task in tasks]
            for i, fut in enumerate(futures):
                try:
                    handle(i, fut.result())
                except Exception as exc:  # noqa: BLE001
                    failures.append((i, exc))
    if failures:
        first_id, first_exc = failures[0]
        if cfg.on_failure == "abort":
            raise EnsemblePropagationError(int(ens.stream_ids[first_id]), first_exc)
        for i, _ in failures:
            active[i] = False
            psi_out[:, i, :] = np.nan
    return psi_out, active


def _propagate_sde(cspec, ens, cfg, prop, per_traj_g):
    times = prop.times()
    count = ens.count
    psi_out = np.empty((times.size, count, ens.modes), dtype=complex)
    chunks = np.array_split(np.arange(count), cfg.workers)
    chunks = [c for c in chunks if c.size]

    def run(chunk):
        g = None if per_traj_g is None else per_traj_g[chunk]
        _, out = sde_paths(
            cspec,
            ens.psi[chunk],
            prop,
            ens.master_seed,
            ens.stream_ids[chunk],
            dt=cfg.sde_dt,
            g=g,
        )
        psi_out[:, chunk, :] = out

    if cfg.workers == 1:
        run(chunks[0])
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            list(pool.map(run, chunks))
    return psi_out


# ---------------------------------------------------------------------------
# Deterministic reductions and observables
# ---------------------------------------------------------------------------

def pairwise_sum(arr: np.ndarray, axis: int = 0) -> np.ndarray:
    """Fixed-order pairwise summation (worker-count independent reductions)."""
    arr = np.asarray(arr)
    n = arr.shape[axis]
    if n <= 2:
        return arr.sum(axis=axis)
    half = n // 2
    lo = pairwise_sum(np.take(arr, range(half), axis=axis), axis=axis)
    hi = pairwise_sum(np.take(arr, range(half, n), axis=axis), axis=axis)
    return lo + hi


def _pairwise_mean(arr, axis=0):
    return pairwise_sum(arr, axis=axis) / arr.shape[axis]


def bloch_prefactor(sampler: str, particles: int) -> float:
    """(N+2)/N for Husimi-type sampling, 1 for delta (P-function) sampling."""
    if sampler == "delta":
        return 1.0
    return (particles + 2) / particles


def _classical_s(psi: np.ndarray) -> np.ndarray:
    """s components per trajectory; psi of shape (..., 2)."""
    w = np.conj(psi[..., 1]) * psi[..., 0]
    occ = np.abs(psi) ** 2
    return np.stack([w.real, w.imag, 0.5 * (occ[..., 1] - occ[..., 0])], axis=-1)


def ensemble_bloch(snapshots: EnsembleSnapshots, prefactor: float | None = None
                   ) -> ObservableSeries:
    """Monte-Carlo estimate of <J>/N with per-component standard errors."""
    if snapshots.modes != 2:
        raise ValueError("the Bloch estimate is a two-mode observable")
    if prefactor is None:
        prefactor = bloch_prefactor(snapshots.sampler, snapshots.particles)
    psi = snapshots.psi[:, snapshots.active, :]
    s = _classical_s(psi)  # (n_times, count, 3)
    count = s.shape[1]
    mean = _pairwise_mean(s, axis=1)
    var = _pairwise_mean(s**2, axis=1) - mean**2
    se = prefactor * np.sqrt(np.clip(var, 0.0, None) / count)
    est = prefactor * mean
    columns = {
        "jx": est[:, 0], "jy": est[:, 1], "jz": est[:, 2],
        "j_norm": np.linalg.norm(est, axis=1),
        "jx_se": se[:, 0], "jy_se": se[:, 1], "jz_se": se[:, 2],
    }
    return ObservableSeries(
        times=snapshots.times,
        columns=columns,
        meta={"engine": "ensemble", "sampler": snapshots.sampler,
              "count": count, "prefactor": prefactor},
    )


def ensemble_spdm(snapshots: EnsembleSnapshots) -> ObservableSeries:
    """SPDM and eigenvalue series reconstructed from the ensemble.

    Two modes: built from the Bloch estimate via lambda = 1/2 +- |<J>|/N.
    Three modes: entries are uncorrected trajectory averages of
    conj(psi_i) psi_j (ordering bias O(1/N), documented in the module notes).
    """
    if snapshots.modes == 2:
        bloch = ensemble_bloch(snapshots)
        j = bloch["j_norm"]
        columns = {
            "rho11": 0.5 - bloch["jz"], "rho22": 0.5 + bloch["jz"],
            "re_rho12": bloch["jx"], "im_rho12": -bloch["jy"],
            "lambda1": 0.5 + j, "lambda2": 0.5 - j,
        }
        return ObservableSeries(snapshots.times, columns, dict(bloch.meta))
    psi = snapshots.psi[:, snapshots.active, :]
    outer = np.einsum("tki,tkj->tkij", psi.conj(), psi)
    mat = _pairwise_mean(outer, axis=1)  # (n_times, 3, 3)
    evals = np.linalg.eigvalsh(mat)[:, ::-1].real
    columns = {}
    for i in range(3):
        columns[f"rho{i + 1}{i + 1}"] = mat[:, i, i].real
    for i in range(3):
        for j in range(i + 1, 3):
            columns[f"re_rho{i + 1}{j + 1}"] = mat[:, i, j].real
            columns[f"im_rho{i + 1}{j + 1}"] = mat[:, i, j].imag
    for k in range(3):
        columns[f"lambda{k + 1}"] = evals[:, k]
    return ObservableSeries(
        snapshots.times,
        columns,
        {"engine": "ensemble", "sampler": snapshots.sampler,
         "count": int(snapshots.active.sum())},
    )


def coherence_series(snapshots: EnsembleSnapshots,
                     prefactor: float | None = None) -> ObservableSeries:
    """alpha(t) = 2 <Jx>/N with standard errors and imbalance variance."""
    if snapshots.modes != 2:
        raise ValueError("the coherence factor is a two-mode observable")
    bloch = ensemble_bloch(snapshots, prefactor=prefactor)
    psi = snapshots.psi[:, snapshots.active, :]
    s = _classical_s(psi)
    sz = s[..., 2]
    var_sz = _pairwise_mean(sz**2, axis=1) - _pairwise_mean(sz, axis=1) ** 2
    columns = {
        "alpha": 2.0 * bloch["jx"],
        "alpha_se": 2.0 * bloch["jx_se"],
        # quasi-classical estimate of Var(Jz)/N^2 (uncorrected)
        "imbalance_var": np.clip(var_sz, 0.0, None),
    }
    return ObservableSeries(snapshots.times, columns, dict(bloch.meta))
