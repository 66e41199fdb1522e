"""Husimi calculus, Husimi zeros, invariant measure, and samplers."""

import numpy as np
import pytest
from scipy import stats

from bhphase import (
    FockBasis,
    ModelSpec,
    PhasePoint,
    QuantumState,
    bloch_vector,
    coherent_state,
)
from bhphase.exact import eigenstates
from bhphase.phasespace import (
    Ensemble,
    HusimiGrid,
    QuadratureError,
    bargmann_coefficients,
    classical_bloch,
    husimi_grid,
    husimi_q,
    husimi_zeros,
    measure_constant,
    phase_expectation_q,
    sample_glauber_husimi,
    sample_su2_husimi,
    sample_su3_husimi,
    zero_to_point,
)


def cat_state(basis, p_a, p_b, sign):
    a = coherent_state(basis, PhasePoint.from_pq(p_a, 0.0))
    b = coherent_state(basis, PhasePoint.from_pq(p_b, 0.0))
    return QuantumState(basis, a.amplitudes + sign * b.amplitudes).normalized()


# ---------------------------------------------------------------------------
# PhasePoint
# ---------------------------------------------------------------------------

def test_phase_point_round_trip():
    pt = PhasePoint.from_pq(0.3, 2.5)
    assert pt.p == pytest.approx(0.3, abs=1e-14)
    assert pt.q == pytest.approx(2.5, abs=1e-14)
    pt3 = PhasePoint.from_trimer(0.2, 0.5, 1.0, 4.0)
    assert pt3.p1 == pytest.approx(0.2, abs=1e-14)
    assert pt3.p3 == pytest.approx(0.5, abs=1e-14)
    assert pt3.q1 == pytest.approx(1.0, abs=1e-14)
    assert pt3.q3 == pytest.approx(4.0, abs=1e-14)


def test_phase_point_validation():
    with pytest.raises(ValueError):
        PhasePoint([1.0, 1.0])
    with pytest.raises(ValueError):
        PhasePoint.from_pq(1.5, 0.0)
    with pytest.raises(ValueError):
        PhasePoint.from_trimer(0.7, 0.6, 0.0, 0.0)


# ---------------------------------------------------------------------------
# Husimi pointwise values
# ---------------------------------------------------------------------------

def test_husimi_self_overlap_is_one():
    basis = FockBasis(2, 30)
    pt = PhasePoint.from_pq(0.42, 1.1)
    st = coherent_state(basis, pt)
    assert husimi_q(st, pt) == pytest.approx(1.0, abs=1e-12)


def test_husimi_antipodal_zero():
    basis = FockBasis(2, 30)
    st = coherent_state(basis, PhasePoint.from_pq(0.42, 1.1))
    # antipode: p -> 1-p, q -> q + pi
    val = husimi_q(st, PhasePoint.from_pq(0.58, 1.1 + np.pi))
    assert val <= 1e-25


def test_husimi_fock_phase_independent():
    basis = FockBasis(2, 12)
    st = basis.fock_state((6, 6))
    vals = [husimi_q(st, PhasePoint.from_pq(0.4, q)) for q in (0.0, 1.0, 2.0, 5.0)]
    assert np.max(np.abs(np.diff(vals))) <= 1e-12


def test_husimi_density_matches_pure():
    basis = FockBasis(2, 10)
    st = cat_state(basis, 0.2, 0.8, +1)
    pt = PhasePoint.from_pq(0.47, 0.2)
    assert husimi_q(st.to_density(), pt) == pytest.approx(husimi_q(st, pt), abs=1e-12)


def test_husimi_three_mode_self_overlap():
    basis = FockBasis(3, 15)
    pt = PhasePoint.from_trimer(0.2, 0.3, 1.0, 2.0)
    st = coherent_state(basis, pt)
    assert husimi_q(st, pt) == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------------------
# Husimi grids, normalization, completeness
# ---------------------------------------------------------------------------

def test_ground_state_grid_normalization():
    spec = ModelSpec(modes=2, particles=40, delta=1.0, u=10.0)
    _, states = eigenstates(spec)
    grid = husimi_grid(states[0], resolution=200)
    assert abs(grid.norm() - 1.0) <= 1e-2
    assert np.all(grid.values >= 0.0)
    assert np.all(grid.values <= 1.0 + 1e-12)


def test_mixed_state_grid_normalization():
    basis = FockBasis(2, 20)
    a = coherent_state(basis, PhasePoint.from_pq(0.2, 0.0))
    b = coherent_state(basis, PhasePoint.from_pq(0.8, 0.0))
    from bhphase.model import DensityMatrix

    rho = DensityMatrix(
        basis,
        0.5
        * (
            np.outer(a.amplitudes, a.amplitudes.conj())
            + np.outer(b.amplitudes, b.amplitudes.conj())
        ),
    )
    grid = husimi_grid(rho, resolution=150)
    assert abs(grid.norm() - 1.0) <= 2.0 / 150


def test_eigenstate_completeness_pointwise():
    # sum_n Q_{|n>}(p, q) = 1 everywhere
    spec = ModelSpec(modes=2, particles=40, delta=1.0, u=0.25)
    _, states = eigenstates(spec)
    grids = [husimi_grid(st, resolution=40) for st in states]
    total = sum(g.values for g in grids)
    assert np.max(np.abs(total - 1.0)) <= 1e-9


def test_cat_vs_mixed_differ_only_near_midpoint():
    n = 20
    basis = FockBasis(2, n)
    from bhphase.model import DensityMatrix

    plus = cat_state(basis, 0.2, 0.8, +1)
    a = coherent_state(basis, PhasePoint.from_pq(0.2, 0.0))
    b = coherent_state(basis, PhasePoint.from_pq(0.8, 0.0))
    mixed = DensityMatrix(
        basis,
        0.5
        * (
            np.outer(a.amplitudes, a.amplitudes.conj())
            + np.outer(b.amplitudes, b.amplitudes.conj())
        ),
    )
    res = 80
    gp = husimi_grid(plus, resolution=res)
    gm = husimi_grid(mixed, resolution=res)
    diff = np.abs(gp.values - gm.values)
    pp, qq = np.meshgrid(gp.p_axis, gp.q_axis, indexing="ij")
    # interference fringes live in a patch around (0.5, 0); elsewhere the
    # three distributions are indistinguishable at the few-percent level
    near = (np.abs(pp - 0.5) < 0.25) & (np.minimum(qq, 2 * np.pi - qq) < 1.0)
    assert diff[near].max() >= 0.1
    assert diff[~near].max() <= 0.02


def test_husimi_grid_csv_round_trip(tmp_path):
    basis = FockBasis(2, 5)
    grid = husimi_grid(coherent_state(basis, PhasePoint.from_pq(0.5, 0.0)), 16)
    path = tmp_path / "grid.csv"
    grid.to_csv(path)
    from bhphase import io

    meta, header, cols = io.read_csv(path)
    assert header == ["p", "q", "Q"]
    assert int(meta["particles"]) == 5
    # row-major p-then-q order
    assert np.array_equal(cols["p"].reshape(16, 16)[:, 0], grid.p_axis)
    assert np.array_equal(cols["Q"].reshape(16, 16), grid.values)


def test_husimi_grid_resolution_validation():
    basis = FockBasis(2, 3)
    with pytest.raises(ValueError):
        husimi_grid(basis.fock_state((3, 0)), resolution=1)


# ---------------------------------------------------------------------------
# Husimi zeros
# ---------------------------------------------------------------------------

def test_zeros_coherent_state_antipodal():
    n = 20
    basis = FockBasis(2, n)
    p0, q0 = 0.3, 0.8
    st = coherent_state(basis, PhasePoint.from_pq(p0, q0))
    zeros = husimi_zeros(st)
    assert zeros.total == n
    assert zeros.infinite_multiplicity == 0
    # N-fold degenerate root at the antipode; numerically it splits into a
    # tight cluster whose mean is accurate
    theta = 2.0 * np.arcsin(np.sqrt(p0))
    z_anti = np.tan((np.pi - theta) / 2.0) * np.exp(1j * (q0 + np.pi))
    assert np.abs(zeros.finite.mean() - z_anti) <= 1e-2 * abs(z_anti)
    assert np.max(np.abs(zeros.finite - z_anti)) <= 0.4 * abs(z_anti)


def test_zeros_pole_states():
    basis = FockBasis(2, 9)
    zeros = husimi_zeros(basis.fock_state((9, 0)))  # constant polynomial
    assert zeros.finite.size == 0
    assert zeros.infinite_multiplicity == 9
    zeros = husimi_zeros(basis.fock_state((0, 9)))  # monomial z^9
    assert zeros.infinite_multiplicity == 0
    assert np.max(np.abs(zeros.finite)) <= 1e-12


def test_zeros_cat_state_back_substitution():
    n = 20
    basis = FockBasis(2, n)
    st = cat_state(basis, 0.2, 0.8, +1)
    zeros = husimi_zeros(st)
    assert zeros.finite.size == n
    q_max = max(
        husimi_q(st, PhasePoint.from_pq(0.2, 0.0)),
        husimi_q(st, PhasePoint.from_pq(0.8, 0.0)),
    )
    for pt in zeros.points():
        assert husimi_q(st, pt) <= 1e-16 * q_max


def test_zeros_vieta_relations():
    rng = np.random.default_rng(5)
    basis = FockBasis(2, 25)
    st = QuantumState(
        basis, rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
    ).normalized()
    a = bargmann_coefficients(st)
    zeros = husimi_zeros(st)
    d = zeros.finite.size
    assert d == 25
    total = zeros.finite.sum()
    prod = np.prod(zeros.finite)
    assert abs(total - (-a[d - 1] / a[d])) <= 1e-8 * max(1.0, abs(total))
    assert abs(prod - (-1) ** d * a[0] / a[d]) <= 1e-8 * max(1.0, abs(prod))


def test_zero_to_point_mapping():
    z = 0.7 * np.exp(1j * 2.1)
    pt = zero_to_point(z)
    assert pt.p == pytest.approx(0.49 / 1.49, abs=1e-12)
    assert pt.q == pytest.approx(2.1, abs=1e-12)


# ---------------------------------------------------------------------------
# Phase-space expectation values
# ---------------------------------------------------------------------------

def test_phase_expectation_n1_analytic():
    basis = FockBasis(2, 1)
    val = phase_expectation_q(basis.fock_state((1, 0)), "z", resolution=50)
    assert abs(val - (-0.5)) <= 1e-12


def test_phase_expectation_random_states():
    rng = np.random.default_rng(7)
    basis = FockBasis(2, 20)
    for _ in range(3):
        st = QuantumState(
            basis, rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
        ).normalized()
        exact = bloch_vector(st)
        for comp, k in zip("xyz", range(3)):
            val = phase_expectation_q(st, comp, resolution=200)
            assert abs(val - exact[k]) <= 1e-8


def test_phase_expectation_balanced_fock():
    basis = FockBasis(2, 10)
    val = phase_expectation_q(basis.fock_state((5, 5)), "z", resolution=100)
    assert abs(val) <= 1e-10


def test_phase_expectation_delta_p_route():
    # the P-function of a coherent state is a delta: N * s(p0, q0) is exact
    n, p0, q0 = 24, 0.62, 1.9
    basis = FockBasis(2, n)
    st = coherent_state(basis, PhasePoint.from_pq(p0, q0))
    assert np.allclose(
        bloch_vector(st), n * classical_bloch(p0, q0), atol=1e-10
    )


def test_phase_expectation_grid_route():
    basis = FockBasis(2, 20)
    st = coherent_state(basis, PhasePoint.from_pq(0.33, 1.0))
    grid = husimi_grid(st, resolution=200)
    exact = bloch_vector(st)
    for comp, k in zip("xyz", range(3)):
        assert abs(phase_expectation_q(grid, comp) - exact[k]) <= 1e-4


def test_phase_expectation_convergence_guard():
    basis = FockBasis(2, 20)
    st = coherent_state(basis, PhasePoint.from_pq(0.33, 1.0))
    with pytest.raises(QuadratureError) as err:
        phase_expectation_q(st, "x", resolution=4, conv_tol=1e-12)
    assert hasattr(err.value, "estimate")


def test_measure_constants():
    assert measure_constant(1, 2) == pytest.approx(2 / (2 * np.pi))
    assert measure_constant(10, 3) == pytest.approx(11 * 12 / (2 * np.pi) ** 2)


# ---------------------------------------------------------------------------
# SU(2) Husimi sampler
# ---------------------------------------------------------------------------

def test_su2_sampler_beta_law():
    n, count = 15, 100_000
    center = PhasePoint.from_pq(0.4, 1.2)
    ens = sample_su2_husimi(center, n, count, master_seed=2024)
    u = np.abs(ens.psi.conj() @ center.psi) ** 2
    # Kolmogorov-Smirnov against Beta(N+1, 1) at the 1% level
    assert stats.kstest(u, stats.beta(n + 1, 1).cdf).pvalue > 0.01
    mean, se = u.mean(), u.std() / np.sqrt(count)
    assert abs(mean - (n + 1) / (n + 2)) <= 3 * se


def test_su2_sampler_cloud_shrinks_with_n():
    center = PhasePoint.from_pq(0.5, 0.0)

    def mean_angle(n):
        ens = sample_su2_husimi(center, n, 4000, master_seed=5)
        u = np.abs(ens.psi.conj() @ center.psi) ** 2
        return np.mean(np.arccos(np.sqrt(u)) * 2.0)

    # angular radius ~ 1/sqrt(N): quadrupling N halves the mean angle
    ratio = mean_angle(25) / mean_angle(100)
    assert ratio == pytest.approx(2.0, rel=0.1)


def test_su2_sampler_reproducible():
    center = PhasePoint.from_pq(0.7, 0.3)
    a = sample_su2_husimi(center, 10, 64, master_seed=99)
    b = sample_su2_husimi(center, 10, 64, master_seed=99)
    assert np.array_equal(a.psi, b.psi)
    c = sample_su2_husimi(center, 10, 64, master_seed=100)
    assert not np.array_equal(a.psi, c.psi)


def test_su2_sampler_rejects_empty():
    with pytest.raises(ValueError):
        sample_su2_husimi(PhasePoint.from_pq(0.5, 0.0), 10, 0, master_seed=1)


# ---------------------------------------------------------------------------
# SU(3) Husimi sampler
# ---------------------------------------------------------------------------

def grid_occupation_moments(center_psi, n, res_p=80, res_q=20):
    """Direct overlap-density integration on a (v, p3, q1, q3) grid.

    Uses p1 = (1 - p3) v so the simplex maps onto the unit square; the
    Jacobian is (1 - p3).  Independent of the sampler's two-stage law.
    """
    const = measure_constant(n, 3)
    v = (np.arange(res_p) + 0.5) / res_p
    p3 = (np.arange(res_p) + 0.5) / res_p
    q = 2 * np.pi * (np.arange(res_q) + 0.5) / res_q
    vv, pp3 = np.meshgrid(v, p3, indexing="ij")
    pp1 = (1.0 - pp3) * vv
    pp2 = np.clip(1.0 - pp1 - pp3, 0.0, None)
    jac = 1.0 - pp3
    total, moments = 0.0, np.zeros(3)
    for a in q:
        for b in q:
            ov = (
                np.sqrt(pp1) * np.exp(1j * a) * center_psi[0]
                + np.sqrt(pp2) * center_psi[1]
                + np.sqrt(pp3) * np.exp(1j * b) * center_psi[2]
            )
            dens = np.abs(ov) ** (2 * n) * jac
            total += dens.sum()
            for k, occ in enumerate((pp1, pp2, pp3)):
                moments[k] += (dens * occ).sum()
    dv = (1.0 / res_p) ** 2 * (2 * np.pi / res_q) ** 2
    return const * total * dv, const * moments * dv


def test_su3_sampler_against_grid_integration():
    n = 6
    center = PhasePoint.from_trimer(0.5, 0.2, 1.0, 2.5)
    norm, moments = grid_occupation_moments(center.psi, n)
    # the grid oracle also validates the three-mode measure constant
    assert norm == pytest.approx(1.0, abs=2e-3)
    ens = sample_su3_husimi(center, n, 20_000, master_seed=42)
    occ = np.abs(ens.psi) ** 2
    se = occ.std(axis=0) / np.sqrt(ens.count)
    assert np.all(np.abs(occ.mean(axis=0) - moments / norm) <= 3 * se + 2e-3)


def test_su3_sampler_overlap_law():
    n = 9
    center = PhasePoint.from_trimer(0.1, 0.6, 0.4, 3.0)
    ens = sample_su3_husimi(center, n, 50_000, master_seed=7)
    u = np.abs(ens.psi.conj() @ center.psi) ** 2
    assert stats.kstest(u, stats.beta(n + 1, 2).cdf).pvalue > 0.01


def test_su3_sampler_concentrates_at_large_n():
    center = PhasePoint.from_trimer(0.0, 1.0, 0.0, 0.0)  # simplex corner
    ens = sample_su3_husimi(center, 100_000, 500, master_seed=3)
    u = np.abs(ens.psi.conj() @ center.psi) ** 2
    assert u.min() > 0.999


def test_su3_sampler_reproducible():
    center = PhasePoint.from_trimer(0.3, 0.3, 0.0, 0.0)
    a = sample_su3_husimi(center, 20, 32, master_seed=11)
    b = sample_su3_husimi(center, 20, 32, master_seed=11)
    assert np.array_equal(a.psi, b.psi)


# ---------------------------------------------------------------------------
# Glauber-Husimi sampler
# ---------------------------------------------------------------------------

def test_glauber_amplitude_law():
    n, count = 50, 40_000
    center = PhasePoint.from_pq(0.7, 0.0)
    ens = sample_glauber_husimi(center, n, count, master_seed=123)
    mean = ens.alpha2.mean()
    se = ens.alpha2.std() / np.sqrt(count)
    assert abs(mean - (n + 2)) <= 3 * se
    assert stats.kstest(ens.alpha2, stats.gamma(n + 2).cdf).pvalue > 0.01


def test_glauber_radial_law_matches_numeric_normalization():
    # E[alpha^2] under the 4d volume element alpha^3 e^{-alpha^2} alpha^{2N}
    from scipy.integrate import quad

    n = 12
    weight = lambda a: a ** (2 * n + 3) * np.exp(-(a**2))
    norm, _ = quad(weight, 0, np.inf)
    second, _ = quad(lambda a: a**2 * weight(a), 0, np.inf)
    assert second / norm == pytest.approx(n + 2, rel=1e-10)


def test_glauber_angular_part_matches_su2():
    center = PhasePoint.from_pq(0.7, 0.0)
    su2 = sample_su2_husimi(center, 50, 128, master_seed=77)
    glauber = sample_glauber_husimi(center, 50, 128, master_seed=77)
    assert np.array_equal(su2.psi, glauber.psi)


# ---------------------------------------------------------------------------
# Ensemble container
# ---------------------------------------------------------------------------

def test_ensemble_validation():
    with pytest.raises(ValueError):
        Ensemble(
            psi=np.array([[1.0, 1.0]]),
            particles=5,
            master_seed=0,
            stream_ids=np.array([0]),
            sampler="delta",
        )
    with pytest.raises(ValueError):
        Ensemble(
            psi=np.array([[1.0, 0.0], [1.0, 0.0]], dtype=complex),
            particles=5,
            master_seed=0,
            stream_ids=np.array([0, 0]),
            sampler="delta",
        )


def test_ensemble_point_view():
    ens = sample_su2_husimi(PhasePoint.from_pq(0.5, 0.0), 10, 4, master_seed=0)
    pt = ens.point(2)
    assert isinstance(pt, PhasePoint)
    assert pt.modes == 2
