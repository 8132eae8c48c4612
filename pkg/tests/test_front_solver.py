import numpy as np
import pytest

from frontlab import front_solver as fs
from frontlab import ks_solver as ks
from frontlab import resolvent_lab as rl
from frontlab import symbol_engine as se
from frontlab.spectral_grid import PeriodicGrid, RealField, cosine, forward, inverse
from conftest import fixture_ic, random_band_limited


def test_rhs_equals_ks_at_eps_zero(unit_grid):
    rng = np.random.default_rng(0)
    state = forward(random_band_limited(unit_grid, rng))
    table = se.build(0.0, unit_grid)
    a = fs.front_rhs(fs.FrontState(0.0, state), table).coeffs
    b = ks.ks_rhs(state).coeffs
    assert np.max(np.abs(a - b)) <= 1e-14


def test_rhs_zero_state_and_mismatch(unit_grid):
    table = se.build(0.5, unit_grid)
    zero = forward(RealField(unit_grid, np.zeros(16)))
    assert np.all(fs.front_rhs(fs.FrontState(0.5, zero), table).coeffs == 0)
    with pytest.raises(ValueError):
        fs.front_rhs(fs.FrontState(0.25, zero), table)
    with pytest.raises(ValueError):
        fs.front_rhs(fs.FrontState(0.5, forward(RealField(PeriodicGrid(1.0, 16), np.zeros(16)))), table)


def _dense(grid, multiplier):
    """Nodal matrix of a Fourier multiplier, built column by column."""
    cols = []
    for j in range(grid.n):
        e = np.zeros(grid.n)
        e[j] = 1.0
        cols.append(inverse(type(forward(RealField(grid, e)))(grid, forward(RealField(grid, e)).coeffs * multiplier)).values)
    return np.array(cols).T


@pytest.mark.parametrize("eps", [0.1, 0.5])
def test_dense_operator_oracle(eps):
    grid = PeriodicGrid(2 * np.pi, 16)
    lam = grid.lam
    # trace symbols from the exact-integral path, not the closed forms
    t1 = np.array([rl.symbol_trace(eps * l_, rl.U1_DATA) for l_ in lam])
    t2 = np.array([rl.symbol_trace(eps * l_, rl.U2_DATA) for l_ in lam])
    I = np.eye(grid.n)
    D2 = _dense(grid, -lam)
    D4 = _dense(grid, lam ** 2)
    T1, T2 = _dense(grid, t1), _dense(grid, t2)
    B = I - 13 * eps / 3 * D2 + 3 * eps ** 2 * D4 @ T1
    S = -D2 - 3 * (1 - eps) * D4 + 3 * eps * D4 @ T2
    G = 17 / 6 * D2 - 1.5 * D2 @ T2 - 3 * eps * D4 @ T1
    F = eps * G - 0.5 * I
    P = _dense(grid, (grid.modes <= grid.n // 3).astype(float))
    rng = np.random.default_rng(7)
    psi = random_band_limited(grid, rng, top=4)
    psi_eta = inverse(type(forward(psi))(grid, forward(psi).coeffs * 1j * grid.wavenumbers)).values
    dense = np.linalg.solve(B, S @ psi.values + F @ P @ psi_eta ** 2)
    table = se.build(eps, grid, 14)
    fast = inverse(fs.front_rhs(fs.FrontState(eps, forward(psi)), table)).values
    assert np.max(np.abs(dense - fast)) <= 1e-12 * max(1.0, np.max(np.abs(fast)))


def test_mode_one_rhs_example():
    grid = PeriodicGrid(2 * np.pi, 16)
    table = se.build(0.5, grid)
    rhs = fs.front_rhs(fs.FrontState(0.5, forward(cosine(grid, 1))), table).coeffs
    assert rhs[1].real == pytest.approx(table.r[1] / 2, rel=1e-13)
    # (psi_eta)^2 = sin^2 has mean 1/2
    assert rhs[0].real == pytest.approx(table.q[0] * 0.5, rel=1e-13)


def test_eps_zero_path_is_bitwise_ks(desk_grid):
    cfg = ks.SolverConfig(desk_grid, 1e-3, 0.2, save_every=20)
    a = fs.solve_front(0.0, fixture_ic(desk_grid), cfg)
    b = ks.solve_ks(fixture_ic(desk_grid), cfg)
    assert np.array_equal(a.states, b.states)


def test_eps_zero_equivalence_n64():
    grid = PeriodicGrid(12.0, 64)
    cfg = ks.SolverConfig(grid, 1e-3, 0.5, save_every=10)
    a = fs.solve_front(0.0, fixture_ic(grid), cfg).nodal()
    b = ks.solve_ks(fixture_ic(grid), cfg).nodal()
    assert np.max(np.abs(a - b)) <= 1e-13


def test_bounded_run(desk_grid):
    traj = fs.solve_front(0.02, fixture_ic(desk_grid), ks.SolverConfig(desk_grid, 1e-3, 1.0, save_every=100))
    assert np.max(np.abs(traj.nodal())) <= 10


def test_subcritical_front_decay():
    grid = PeriodicGrid(6.0, 64)
    traj = fs.solve_front(0.1, cosine(grid, 1), ks.SolverConfig(grid, 1e-3, 6.0, save_every=500))
    g = ks._derivative_l2(traj, 1)
    assert np.all(np.diff(g) < 0)
    assert g[-1] < 1e-3 * g[0]


def test_remainder(desk_grid):
    cfg = ks.SolverConfig(desk_grid, 1e-3, 0.1, save_every=10)
    phi = ks.solve_ks(fixture_ic(desk_grid), cfg)
    rho = fs.remainder(phi, phi, 0.1)
    assert np.all(rho.states == 0)
    psi = fs.solve_front(0.05, fixture_ic(desk_grid), cfg)
    rho = fs.remainder(psi, phi, 0.05)
    assert np.all(rho.states[0] == 0)
    assert np.allclose(rho.states[3], (psi.states[3] - phi.states[3]) / 0.05)
    with pytest.raises(ValueError):
        fs.remainder(psi, phi, 0.0)
    other = ks.solve_ks(fixture_ic(desk_grid), ks.SolverConfig(desk_grid, 1e-3, 0.1, save_every=20))
    with pytest.raises(ValueError):
        fs.remainder(psi, other, 0.05)


def test_original_variables(desk_grid):
    cfg = ks.SolverConfig(desk_grid, 1e-3, 0.01, save_every=5)
    ones = ks.solve_ks(ks.constant_field(desk_grid, 1.0), cfg)
    orig = fs.to_original_variables(ones, 0.04)
    assert orig.ell_eps == pytest.approx(60.0)
    assert orig.t_final_eps == pytest.approx(625 * 0.01)
    assert np.allclose(orig.phi, 0.04)
    assert np.allclose(orig.times, ones.times / 0.04 ** 2)
    assert orig.y[-1] - orig.y[0] == pytest.approx((desk_grid.nodes[-1] - desk_grid.nodes[0]) / 0.2)


def test_front_trace_examples(unit_grid):
    state = forward(cosine(unit_grid, 1))
    zero = forward(RealField(unit_grid, np.zeros(16)))
    v = fs.reconstruct_front_trace(fs.FrontState(0.0, state), zero)
    assert np.max(np.abs(v.values - np.cos(unit_grid.nodes))) < 1e-14
    v = fs.reconstruct_front_trace(fs.FrontState(0.5, state), zero)
    expected = -0.5 * -np.cos(unit_grid.nodes) + 0.25 * np.sin(unit_grid.nodes) ** 2
    assert np.max(np.abs(v.values - expected)) < 1e-14


def test_ansatz_on_ks_snapshot(desk_grid):
    traj = ks.solve_ks(fixture_ic(desk_grid), ks.SolverConfig(desk_grid, 1e-3, 0.5, save_every=500))
    bundle = fs.build_ansatz(traj.field(len(traj) - 1))
    report = fs.ansatz_residuals(bundle)
    assert max(report.residuals.values()) <= 1e-12
    assert report.max_defect <= 1e-12


def test_ansatz_cos_defect():
    grid = PeriodicGrid(2 * np.pi, 32)
    bundle = fs.build_ansatz(cosine(grid, 1), psi0_tau=RealField(grid, np.zeros(32)))
    report = fs.ansatz_residuals(bundle)
    e = grid.nodes
    assert np.max(np.abs(report.defect.values - (2 * np.cos(e) - 0.25 * np.cos(2 * e) + 0.25))) <= 1e-10  # k^4-amplified FFT roundoff
    assert report.residuals["first_slope_jump"] == pytest.approx(report.max_defect, rel=1e-14)
    assert report.residuals["zeroth_interior_symbolic"] <= 1e-13


def test_ansatz_values_and_homogeneous_case():
    grid = PeriodicGrid(2 * np.pi, 32)
    bundle = fs.build_ansatz(cosine(grid, 1))
    j0 = np.argmin(np.abs(grid.nodes))
    assert bundle.v0.right_at_zero()[j0] == pytest.approx(1.0, abs=1e-14)
    zero = fs.build_ansatz(RealField(grid, np.zeros(32)), RealField(grid, np.full(32, 0.3)))
    assert zero.v0.is_zero(0.0)
    assert np.allclose(zero.a.values, -0.3)
    assert np.allclose(zero.v1.right_at_zero(), -0.3)
