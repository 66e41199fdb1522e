"""Exact engine: Schroedinger/master propagation, spectra, Floquet states."""

import numpy as np
import pytest

from bhphase import (
    FockBasis,
    ModelSpec,
    PhasePoint,
    bloch_vector,
    build_angular_momentum_ops,
    coherent_state,
)
from bhphase.exact import (
    PropagationConfig,
    PropagationError,
    eigenstates,
    evolve_master,
    evolve_schrodinger,
    floquet_states,
)
from bhphase.model import DensityMatrix


def test_propagation_config_validation():
    with pytest.raises(ValueError):
        PropagationConfig(t_end=-1.0)
    with pytest.raises(ValueError):
        PropagationConfig(t_end=1.0, rtol=0.0)
    with pytest.raises(ValueError):
        PropagationConfig(t_end=1.0, sample_times=[0.0, 2.0])
    cfg = PropagationConfig(t_end=2.0, sample_times=[0.0, 0.5, 2.0])
    assert np.allclose(cfg.times(), [0.0, 0.5, 2.0])


# ---------------------------------------------------------------------------
# Schroedinger evolution
# ---------------------------------------------------------------------------

def test_noninteracting_coherent_stays_coherent():
    spec = ModelSpec(modes=2, particles=20, delta=1.0)
    psi0 = coherent_state(FockBasis.for_spec(spec), PhasePoint.from_pq(0.3, 0.7))
    cfg = PropagationConfig(t_end=20.0, n_samples=81)
    res = evolve_schrodinger(spec, psi0, cfg)
    assert np.max(np.abs(res.series["j_norm"] - 0.5)) <= 1e-6


def test_rabi_oscillation_frequency():
    # U = eps = 0, start |N,0>: <n2>(t)/N = sin^2(delta t)
    delta = 1.0
    spec = ModelSpec(modes=2, particles=8, delta=delta)
    basis = FockBasis.for_spec(spec)
    cfg = PropagationConfig(t_end=6.0, n_samples=121)
    res = evolve_schrodinger(spec, basis.fock_state((8, 0)), cfg)
    expected = np.sin(delta * res.series.times) ** 2
    assert np.max(np.abs(res.series["n2"] - expected)) <= 1e-7


def test_breakdown_scenario_bloch_decay():
    # Fig. 6 parameters: Delta=1, UN=10, N=20, coherent at (0.9045, 0)
    n = 20
    spec = ModelSpec(modes=2, particles=n, delta=1.0, u=10.0 / n)
    psi0 = coherent_state(FockBasis.for_spec(spec), PhasePoint.from_pq(0.9045, 0.0))
    cfg = PropagationConfig(t_end=0.48, n_samples=49)
    res = evolve_schrodinger(spec, psi0, cfg)
    # frozen from the in-repo oracle run: |<J>|/N = 0.3878 at t = 0.48
    assert res.series["j_norm"][-1] == pytest.approx(0.3878, abs=2e-3)
    assert np.min(res.series["j_norm"]) < 0.45


def test_energy_and_casimir_conserved():
    spec = ModelSpec(modes=2, particles=12, delta=1.0, eps=0.4, u=0.8)
    basis = FockBasis.for_spec(spec)
    psi0 = coherent_state(basis, PhasePoint.from_pq(0.62, 2.0))
    res = evolve_schrodinger(
        spec,
        psi0,
        PropagationConfig(t_end=5.0, n_samples=11, rtol=1e-11, atol=1e-12),
        store_states=True,
    )
    e = res.series["energy"]
    assert np.max(np.abs(e - e[0])) <= 1e-7
    jx, jy, jz = build_angular_momentum_ops(basis)
    j = 12 / 2
    for st in res.states:
        st = st.normalized()  # remove integrator norm drift before the check
        j2 = sum(st.expectation(op @ op).real for op in (jx, jy, jz))
        assert j2 == pytest.approx(j * (j + 1), abs=1e-8)
    assert np.max(np.abs(res.series["norm"] - 1.0)) <= 1e-8


def test_evolve_schrodinger_rejects_open_spec():
    spec = ModelSpec(modes=2, particles=4, delta=1.0, gamma1=0.1)
    basis = FockBasis.for_spec(spec)
    with pytest.raises(ValueError, match="evolve_master"):
        evolve_schrodinger(spec, basis.fock_state((4, 0)), PropagationConfig(t_end=1.0))


def test_tolerance_failure_is_loud():
    spec = ModelSpec(modes=2, particles=10, delta=1.0, u=1.0)
    basis = FockBasis.for_spec(spec)
    psi0 = coherent_state(basis, PhasePoint.from_pq(0.5, 0.0))
    cfg = PropagationConfig(t_end=50.0, rtol=1e-3, atol=1e-3, check_tol=1e-9)
    with pytest.raises(PropagationError):
        evolve_schrodinger(spec, psi0, cfg)


# ---------------------------------------------------------------------------
# Master equation
# ---------------------------------------------------------------------------

def test_master_matches_schrodinger_at_zero_noise():
    spec = ModelSpec(modes=2, particles=10, delta=1.0, eps=0.2, u=0.5)
    basis = FockBasis.for_spec(spec)
    psi0 = coherent_state(basis, PhasePoint.from_pq(0.4, 0.3))
    cfg = PropagationConfig(t_end=3.0, n_samples=31)
    pure = evolve_schrodinger(spec, psi0, cfg)
    mixed = evolve_master(spec, psi0.to_density(), cfg)
    for col in ("n1", "n2", "jx", "jy", "jz", "lambda1"):
        assert np.max(np.abs(pure.series[col] - mixed.series[col])) <= 1e-7


def test_pure_dephasing_closed_form():
    # H = 0: rho_nm(t) = rho_nm(0) exp(-gamma1/2 * sum_j (nj-mj)^2 * t)
    n, gamma1, t_end = 6, 0.2, 1.0
    spec = ModelSpec(modes=2, particles=n, delta=0.0, gamma1=gamma1)
    basis = FockBasis.for_spec(spec)
    rho0 = coherent_state(basis, PhasePoint.from_pq(0.5, 0.0)).to_density()
    res = evolve_master(
        spec, rho0, PropagationConfig(t_end=t_end, n_samples=6), store_densities=True
    )
    occ = basis.occupation_array
    weight = sum(
        (occ[:, j][:, None] - occ[:, j][None, :]) ** 2 for j in range(2)
    )
    for t, rho in zip(res.series.times, res.densities):
        expected = rho0.matrix * np.exp(-0.5 * gamma1 * weight * t)
        assert np.max(np.abs(rho.matrix - expected)) <= 1e-6


def test_heating_coherence_decays_monotonically():
    # Fig. 14 regime: UN = 0, Delta = 1, gamma1 = 0.01, coherent at (1/2, 0)
    n = 20
    spec = ModelSpec(modes=2, particles=n, delta=1.0, gamma1=0.01)
    basis = FockBasis.for_spec(spec)
    rho0 = coherent_state(basis, PhasePoint.from_pq(0.5, 0.0)).to_density()
    cfg = PropagationConfig(t_end=60.0, n_samples=31, rtol=1e-8, atol=1e-10)
    res = evolve_master(spec, rho0, cfg, store_densities=True)
    alpha = res.series["alpha"]
    assert alpha[0] == pytest.approx(1.0, abs=1e-8)
    assert np.all(np.diff(alpha) < 0.0)
    # positivity is preserved on the sampled grid
    for rho in res.densities[::10]:
        assert np.linalg.eigvalsh(rho.matrix).min() >= -1e-6
    assert np.max(np.abs(res.series["trace"] - 1.0)) <= 1e-8


# ---------------------------------------------------------------------------
# Eigenstates
# ---------------------------------------------------------------------------

def test_single_particle_eigenvalues():
    spec = ModelSpec(modes=2, particles=1, delta=1.0, u=7.3)
    evals, _ = eigenstates(spec)
    assert np.allclose(evals, [-1.0, 1.0], atol=1e-12)


def test_ground_state_number_squeezing():
    # interaction squeezes Var(Jz) below the coherent-state value N/4
    n = 40
    spec = ModelSpec(modes=2, particles=n, delta=1.0, u=10.0)
    evals, states = eigenstates(spec)
    assert np.all(np.diff(evals) >= -1e-12)
    basis = states[0].basis
    _, _, jz = build_angular_momentum_ops(basis)
    ground = states[0]
    var = ground.expectation(jz @ jz).real - ground.expectation(jz).real ** 2
    assert var < n / 4.0


def test_eigenstates_orthonormal():
    spec = ModelSpec(modes=3, particles=4, delta=(1.0, 1.0), eps=(2.0, 0.0, 4.0), u=-0.5)
    _, states = eigenstates(spec)
    mat = np.array([s.amplitudes for s in states])
    gram = mat.conj() @ mat.T
    assert np.max(np.abs(gram - np.eye(len(states)))) <= 1e-9


def test_trimer_spectrum_against_brute_force():
    spec = ModelSpec(modes=3, particles=2, delta=(1.0, 1.0), u=2.0)
    evals, _ = eigenstates(spec)
    from bhphase import build_hamiltonian

    dense = build_hamiltonian(spec).dense()
    assert np.allclose(evals, np.sort(np.linalg.eigvalsh(dense)), atol=1e-10)


def test_eigenstates_reject_driven_spec():
    spec = ModelSpec(modes=2, particles=4, delta=1.0, delta1=0.2, omega=1.0)
    with pytest.raises(ValueError):
        eigenstates(spec)


# ---------------------------------------------------------------------------
# Floquet analysis
# ---------------------------------------------------------------------------

def test_floquet_reduces_to_eigenstates_without_drive():
    spec = ModelSpec(modes=2, particles=6, delta=1.0, u=5.0 / 6, omega=2 * np.pi)
    evals, states = eigenstates(spec)
    res = floquet_states(spec)
    assert np.max(np.abs(np.abs(np.linalg.eigvals(res.propagator)) - 1.0)) <= 1e-8
    # quasi-energies equal Ek mod omega on the branch (-omega/2, omega/2]
    folded = evals - spec.omega * np.round(evals / spec.omega)
    folded = np.where(folded <= -spec.omega / 2, folded + spec.omega, folded)
    assert np.allclose(np.sort(folded), res.quasienergies, atol=1e-8)
    # each Floquet state coincides with an eigenstate up to phase
    for k, st in enumerate(states):
        overlaps = np.abs(st.amplitudes.conj() @ res.states)
        assert overlaps.max() >= 1.0 - 1e-8


def test_floquet_multipliers_unimodular_paper_parameters():
    # UN = 5, Delta0 = 1, Delta1 = 0.5, omega = 2*pi, N = 50
    n = 50
    spec = ModelSpec(modes=2, particles=n, delta=1.0, u=5.0 / n, delta1=0.5, omega=2 * np.pi)
    res = floquet_states(spec)
    mods = np.abs(np.linalg.eigvals(res.propagator))
    assert np.max(np.abs(mods - 1.0)) <= 1e-8
    assert np.all(res.quasienergies > -spec.omega / 2)
    assert np.all(res.quasienergies <= spec.omega / 2)
    gram = res.propagator.conj().T @ res.propagator
    assert np.max(np.abs(gram - np.eye(n + 1))) <= 1e-8


def test_floquet_rejects_nonperiodic_spec():
    spec = ModelSpec(modes=2, particles=4, delta=1.0)
    with pytest.raises(ValueError):
        floquet_states(spec)


# ---------------------------------------------------------------------------
# Series round trip
# ---------------------------------------------------------------------------

def test_series_csv_round_trip(tmp_path):
    spec = ModelSpec(modes=2, particles=6, delta=1.0, u=0.3)
    basis = FockBasis.for_spec(spec)
    res = evolve_schrodinger(
        spec,
        coherent_state(basis, PhasePoint.from_pq(0.25, 0.1)),
        PropagationConfig(t_end=1.0, n_samples=7),
    )
    path = tmp_path / "series.csv"
    res.series.to_csv(path)
    from bhphase.series import ObservableSeries

    back = ObservableSeries.from_csv(path)
    assert np.array_equal(back.times, res.series.times)
    for name in res.series.names:
        assert np.array_equal(back[name], res.series[name])
