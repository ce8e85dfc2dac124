import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diracqed import drives as dv
from diracqed import fockspace as fs
from diracqed import hamiltonians as hm
from diracqed.errors import IntegrationError, ShapeError, TruncationError, ValidationError
from diracqed.propagator import (
    ObservableSeries,
    Observables,
    TimeGrid,
    evolve_eigen,
    evolve_lindblad,
    evolve_unitary,
)

TWO_PI = 2 * math.pi


def random_hermitian(rng, n, scale=1.0):
    m = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    h = (m + m.conj().T) / 2
    return scale * h / np.linalg.norm(h, 2)


def random_state(rng, n):
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return v / np.linalg.norm(v)


def free1d(trunc=30, delta_omega=0.0, gamma=0.0, tier="ideal"):
    scen = "electro1d" if gamma else "free1d"
    d = dv.SidebandDrive(alpha=1.0, omega_sb=TWO_PI * 40, gamma=gamma)
    return hm.ModelSpec(scen, tier, [TWO_PI * 0.1], [d], delta_omega, fs.HilbertSpec((trunc,)))


def test_timegrid():
    g = TimeGrid(1.0, 0.3)
    assert g.n_steps == 3
    assert g.step == pytest.approx(1 / 3)
    s = TimeGrid.sampled(2.0, 0.05, 0.001)
    assert s.record_every == 50
    np.testing.assert_allclose(s.record_times(), np.linspace(0, 2, 41), atol=1e-12)
    with pytest.raises(ValidationError):
        TimeGrid(1.0, 0.0)
    with pytest.raises(ValidationError):
        TimeGrid(0.1, 1.0)


def test_zero_hamiltonian_leaves_state():
    rng = np.random.default_rng(0)
    psi0 = random_state(rng, 8)
    series, psi = evolve_unitary(psi0, np.zeros((8, 8)), TimeGrid(1.0, 0.1))
    np.testing.assert_array_equal(psi, psi0)
    assert series.meta["norm_drift"] == 0


def test_rabi_oscillation():
    sp = fs.HilbertSpec((2,))
    om = 3.0
    H = om / 2 * fs.qubit_op(fs.SIGMA_X, sp)
    psi0 = fs.product_state(fs.qubit_state("excited"), fs.fock_state(0, 2))
    series, _ = evolve_unitary(psi0, H, TimeGrid(5.0, 1e-3, record_every=10), Observables(sp, leak_levels=1),
                               leak_bound=None)
    np.testing.assert_allclose(series["sz"], np.cos(om * series.times), atol=1e-8)


def test_rk4_matches_eigen_random_16():
    rng = np.random.default_rng(1)
    H = random_hermitian(rng, 16, scale=2.0)
    psi0 = random_state(rng, 16)
    _, psi = evolve_unitary(psi0, H, TimeGrid(20.0, 0.005))
    _, states = evolve_eigen(psi0, H, [20.0], return_states=True)
    assert abs(np.vdot(states[-1], psi)) ** 2 > 1 - 1e-8


def test_eigen_energy_conservation_and_t0():
    rng = np.random.default_rng(2)
    sp = fs.HilbertSpec((6,))
    H = random_hermitian(rng, sp.total_dim, 3.0)
    psi0 = random_state(rng, sp.total_dim)
    series, states = evolve_eigen(psi0, H, np.linspace(0, 50, 101), Observables(sp), leak_bound=None,
                                  return_states=True)
    energies = [np.vdot(s, H @ s).real for s in states]
    assert np.ptp(energies) < 1e-10
    np.testing.assert_allclose(states[0], psi0, atol=1e-14)
    first = Observables(sp).measure_states(psi0[None])
    for k in series.names:
        assert series[k][0] == pytest.approx(first[k][0], abs=1e-13)


def test_eigen_rejects_non_hermitian():
    with pytest.raises(ValidationError):
        evolve_eigen(np.array([1, 0]), np.array([[0, 1], [0, 0]]), [1.0])
    with pytest.raises(ShapeError):
        evolve_eigen(np.array([1, 0, 0]), np.eye(2), [1.0])


def test_order_four_convergence():
    rng = np.random.default_rng(3)
    H = random_hermitian(rng, 12, scale=4.0)
    psi0 = random_state(rng, 12)
    _, exact = evolve_eigen(psi0, H, [5.0], return_states=True)
    errs = []
    for dt in (0.04, 0.02):
        _, psi = evolve_unitary(psi0, H, TimeGrid(5.0, dt), norm_tol=1.0)
        errs.append(np.linalg.norm(psi - exact[-1]))
    assert 8 <= errs[0] / errs[1] <= 32


def test_observables_match_operator_expectations():
    rng = np.random.default_rng(4)
    sp = fs.HilbertSpec((4, 3))
    psi = random_state(rng, sp.total_dim)
    cols = Observables(sp).measure_states(psi[None])
    for j in (1, 2):
        assert cols[f"X{j}"][0] == pytest.approx(fs.expectation(psi, fs.position_op(j, sp)), abs=1e-13)
        assert cols[f"P{j}"][0] == pytest.approx(fs.expectation(psi, fs.momentum_op(j, sp)), abs=1e-13)
    r = fs.qubit_reduced(psi, sp)
    np.testing.assert_allclose([cols["sx"][0], cols["sy"][0], cols["sz"][0]], r.bloch, atol=1e-13)
    assert cols["purity"][0] == pytest.approx(r.purity, abs=1e-13)
    assert cols["leak"][0] == pytest.approx(fs.fock_leak(psi, sp), abs=1e-13)
    dens = Observables(sp).measure_densities(fs.density_matrix(psi)[None])
    for k in cols:
        assert dens[k][0] == pytest.approx(cols[k][0], abs=1e-12)


def test_leak_monitor_raises():
    m = free1d(trunc=8)
    psi0 = fs.product_state(fs.qubit_state("plus"), fs.fock_state(0, 8))
    with pytest.raises(TruncationError):
        evolve_eigen(psi0, hm.ideal_hamiltonian(m), np.linspace(0, 20, 41), Observables(m.space))


def test_norm_drift_raises():
    rng = np.random.default_rng(5)
    H = random_hermitian(rng, 8, scale=10.0)
    with pytest.raises(IntegrationError):
        evolve_unitary(random_state(rng, 8), H, TimeGrid(10.0, 0.1))


def test_full_tier_step_guard():
    m = free1d(trunc=6, tier="full")
    psi0 = fs.product_state(fs.qubit_state("plus"), fs.fock_state(0, 6))
    with pytest.raises(ValidationError):
        evolve_unitary(psi0, hm.full_hamiltonian_source(m), TimeGrid(0.1, 0.002))


def test_sparse_path_matches_dense():
    d = dv.SidebandDrive(alpha=1.0, omega_sb=TWO_PI * 10, delta_alpha=0.3)
    big = hm.ModelSpec("magnetic2d", "full", [TWO_PI * 0.1] * 2, [d, dv.SidebandDrive(1.0, TWO_PI * 10, math.pi / 2)],
                       0.2, fs.HilbertSpec((12, 12)))
    src = hm.full_hamiltonian_source(big)
    assert src.dim > 256
    psi0 = fs.product_state(fs.qubit_state("plus"), fs.coherent_state(0.3, 12), fs.fock_state(0, 12))
    grid = TimeGrid(0.05, 0.0025)
    _, sparse = evolve_unitary(psi0, src, grid)
    # dense oracle: explicit RK4 with full matrices
    psi = psi0.copy()
    h = grid.step
    for k in range(grid.n_steps):
        t = k * h
        f = lambda tt, v: -1j * (src(tt) @ v)
        k1 = f(t, psi)
        k2 = f(t + h / 2, psi + h / 2 * k1)
        k3 = f(t + h / 2, psi + h / 2 * k2)
        k4 = f(t + h, psi + h * k3)
        psi = psi + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    np.testing.assert_allclose(sparse, psi, atol=1e-12)


def test_deterministic_series():
    m = free1d(trunc=10, tier="full", delta_omega=0.3)
    psi0 = fs.product_state(fs.qubit_state("plus"), fs.fock_state(0, 10))
    grid = TimeGrid.sampled(0.5, 0.05, 0.0005)
    a, _ = evolve_unitary(psi0, hm.full_hamiltonian_source(m), grid, Observables(m.space))
    b, _ = evolve_unitary(psi0, hm.full_hamiltonian_source(m), grid, Observables(m.space))
    for k in a.names:
        assert np.array_equal(a[k], b[k])


def test_csv_roundtrip(tmp_path):
    s = ObservableSeries(np.array([0.0, 0.1]), {"X1": np.array([1 / 3, -2.5e-17]), "sz": np.array([1.0, 0.0])})
    s.to_csv(tmp_path / "a.csv")
    raw = (tmp_path / "a.csv").read_bytes()
    assert raw.startswith(b"t_us,X1,sz\n") and b"\r" not in raw
    back = ObservableSeries.from_csv(tmp_path / "a.csv")
    assert np.array_equal(back["X1"], s["X1"])


def test_massive_sigma_x_heisenberg():
    dOm = TWO_PI * 0.25
    m = free1d(trunc=40, delta_omega=dOm)
    psi0 = fs.product_state(fs.qubit_state("plus"), fs.fock_state(0, 40))
    t = np.linspace(0, 20, 20001)
    s = evolve_eigen(psi0, hm.ideal_hamiltonian(m), t, Observables(m.space))
    deriv = np.gradient(s["sx"], t)
    np.testing.assert_allclose(deriv[1:-1], -dOm * s["sy"][1:-1], atol=1e-5)


def test_free_momentum_conserved_and_electro_force_constant():
    psi0 = fs.product_state(fs.qubit_state("plus"), fs.coherent_state(0.5, 60))
    t = np.linspace(0, 20, 201)
    m = free1d(trunc=60, delta_omega=TWO_PI * 0.05)
    s = evolve_eigen(psi0, hm.ideal_hamiltonian(m), t, Observables(m.space))
    assert np.abs(s["P1"] - s["P1"][0]).max() < 1e-6
    g = TWO_PI * 0.1
    e = free1d(trunc=60, delta_omega=TWO_PI * 0.05, gamma=-g / 2)
    s = evolve_eigen(psi0, hm.ideal_hamiltonian(e), np.linspace(0, 8, 81), Observables(e.space))
    coef = np.polyfit(s.times, s["P1"], 1)
    assert np.abs(np.polyval(coef, s.times) - s["P1"]).max() < 1e-4
    # dP/dt = i[g X, P] = -g
    assert coef[0] == pytest.approx(-g, rel=1e-4)


def test_lindblad_matches_unitary_without_damping():
    rng = np.random.default_rng(6)
    sp = fs.HilbertSpec((4,))
    H = random_hermitian(rng, 8, 2.0)
    psi0 = random_state(rng, 8)
    grid = TimeGrid(3.0, 0.005, record_every=20)
    su, _ = evolve_unitary(psi0, H, grid, Observables(sp), leak_bound=None)
    sl, _ = evolve_lindblad(fs.density_matrix(psi0), H, 0.0, 1, grid, sp)
    for k in su.names:
        np.testing.assert_allclose(sl[k], su[k], atol=1e-7)


def test_lindblad_decay_closed_form():
    sp = fs.HilbertSpec((4,))
    kappa = 0.7
    rho0 = fs.density_matrix(fs.product_state(fs.qubit_state("excited"), fs.fock_state(1, 4)))
    grid = TimeGrid(3.0, 0.002, record_every=25)
    s, _ = evolve_lindblad(rho0, np.zeros((8, 8)), kappa, 1, grid, sp, Observables(sp, leak_levels=3))
    # <n> = leak over the top three of four levels for this state
    np.testing.assert_allclose(s["leak"], np.exp(-kappa * s.times), atol=1e-6)


def test_lindblad_decay_purity_non_increasing():
    # rho = p|1><1| + (1-p)|0><0| has purity 1 - 2p(1-p): it falls while p > 1/2
    # and recovers as the state relaxes to vacuum, so check t < ln 2 / kappa
    sp = fs.HilbertSpec((3,))
    kappa = 0.5
    rho0 = fs.density_matrix(fs.product_state(fs.qubit_state("excited"), fs.fock_state(1, 3)))
    purity = [1.0]
    for t1 in np.linspace(0.2, math.log(2) / kappa, 5):
        _, rho = evolve_lindblad(rho0, np.zeros((6, 6)), kappa, 1, TimeGrid(t1, 0.005), sp)
        purity.append(np.trace(rho @ rho).real)
        p = math.exp(-kappa * t1)
        assert purity[-1] == pytest.approx(1 - 2 * p * (1 - p), abs=1e-8)
    assert np.all(np.diff(purity) < 0)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_unitary_norm_conserved(seed):
    rng = np.random.default_rng(seed)
    H = random_hermitian(rng, 10, 1.0)
    s, psi = evolve_unitary(random_state(rng, 10), H, TimeGrid(5.0, 0.01))
    assert abs(np.linalg.norm(psi) - 1) < 1e-6
    assert s.meta["norm_drift"] < 1e-6
