"""A priori quantities of the remainder, the Riccati comparison and the eps-sweep harness."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import symbol_engine
from .front_solver import remainder, solve_front
from .ks_solver import BlowUpError, solve_ks
from .spectral_grid import forward, mode_weights


@dataclass(frozen=True)
class EnergyReport:
    sup_rho: float
    sup_rho_eta: float
    sup_l2_rho_etaeta: float
    int_l2_rho_tau: float
    int_l2_rho_taueta: float

    def as_dict(self):
        return {
            "sup_rho": self.sup_rho,
            "sup_rho_eta": self.sup_rho_eta,
            "sup_l2_rho_etaeta": self.sup_l2_rho_etaeta,
            "int_l2_rho_tau": self.int_l2_rho_tau,
            "int_l2_rho_taueta": self.int_l2_rho_taueta,
        }


def _sq_l2(states, grid):
    """||f||^2 per snapshot from half-spectrum coefficients."""
    return grid.ell0 * np.sum(mode_weights(grid) * np.abs(states) ** 2, axis=1)


def _node_sup(states, grid):
    phase = np.where(grid.modes % 2 == 0, 1.0, -1.0)
    nodal = np.fft.irfft(states * phase * grid.n, grid.n, axis=1)
    return float(np.max(np.abs(nodal))) if nodal.size else 0.0


def remainder_profiles(rho_traj):
    """Per-snapshot series used by the energy report and the remainder CSV."""
    if len(rho_traj) < 3:
        raise ValueError("energy diagnostics need at least three snapshots")
    grid = rho_traj.grid
    ik = 1j * grid.wavenumbers
    ik[-1] = 0.0
    states = rho_traj.states
    sup_rho = np.array([_node_sup(s[None, :], grid) for s in states])
    # centred differences inside, one-sided at the ends
    rho_tau = np.gradient(states, rho_traj.times, axis=0)
    l2_tau = _sq_l2(rho_tau, grid)
    l2_taueta = _sq_l2(ik * rho_tau, grid)

    def cum(v):
        return np.concatenate([[0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * np.diff(rho_traj.times))])

    return {
        "tau": rho_traj.times,
        "sup_rho": sup_rho,
        "l2_rho_etaeta": np.sqrt(_sq_l2(-(grid.wavenumbers ** 2) * states, grid)),
        "l2_rho_tau_cum": cum(l2_tau),
        "l2_rho_taueta_cum": cum(l2_taueta),
    }


def energy_report(rho_traj):
    grid = rho_traj.grid
    prof = remainder_profiles(rho_traj)
    ik = 1j * grid.wavenumbers
    ik[-1] = 0.0
    return EnergyReport(
        sup_rho=float(np.max(prof["sup_rho"])),
        sup_rho_eta=_node_sup(ik * rho_traj.states, grid),
        sup_l2_rho_etaeta=float(np.max(prof["l2_rho_etaeta"])),
        int_l2_rho_tau=float(prof["l2_rho_tau_cum"][-1]),
        int_l2_rho_taueta=float(prof["l2_rho_taueta_cum"][-1]),
    )


def relative_spread(a, b):
    """Per-entry |a - b| / max(|a|, |b|) for two energy reports."""
    da, db = a.as_dict(), b.as_dict()
    out = {}
    for key in da:
        scale = max(abs(da[key]), abs(db[key]))
        out[key] = 0.0 if scale == 0 else abs(da[key] - db[key]) / scale
    return out


def quadratic_form_B(phi, symbols):
    """ell0 * sum_m b_m |phi_m|^2 over the full spectrum."""
    if phi.grid != symbols.grid:
        raise ValueError("field and symbol table live on different grids")
    c = forward(phi).coeffs
    return float(phi.grid.ell0 * np.sum(mode_weights(phi.grid) * symbols.b * np.abs(c) ** 2))


def quadratic_form_lower_bound(phi, eps):
    """||phi||^2 + 3 eps ||phi_eta||^2."""
    grid = phi.grid
    c = forward(phi).coeffs
    w = mode_weights(grid)
    return float(grid.ell0 * np.sum(w * (1.0 + 3.0 * eps * grid.lam) * np.abs(c) ** 2))


@dataclass(frozen=True)
class RiccatiEnvelope:
    c0: float
    c1: float
    c2: float
    a0: float
    t_final: float
    eps0: float
    k0: float
    cap: float


RICCATI_STEPS = 20000
RICCATI_CAP_FACTOR = 1000.0


def linear_envelope(c0, c1, a0, t):
    """Solution of A' = c0 + c1 A with A(0) = a0."""
    if c1 == 0:
        return a0 + c0 * t
    return (a0 + c0 / c1) * np.exp(c1 * t) - c0 / c1


def _riccati_sup(c0, c1, c2, a0, eps, t_final, cap, steps=RICCATI_STEPS):
    """sup of the RK4 solution of A' = c0 + c1 A + c2 eps A^2, stopping once it passes cap."""
    h = t_final / steps
    f = lambda a: c0 + c1 * a + c2 * eps * a * a
    a = a0
    top = a0
    for _ in range(steps):
        k1 = f(a)
        k2 = f(a + 0.5 * h * k1)
        k3 = f(a + 0.5 * h * k2)
        k4 = f(a + h * k3)
        a = a + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.isfinite(a) or a > cap:
            return np.inf
        top = max(top, a)
    return top


def riccati_envelope(c0, c1, c2, a0, t_final, cap_factor=RICCATI_CAP_FACTOR, tol=1e-10):
    """Largest eps in (0, 1/2] whose comparison solution stays below cap before t_final.

    The cap is ``cap_factor`` times the eps = 0 (Gronwall) value, which stands in
    for blow-up.
    """
    if min(c0, c1, c2, a0) < 0:
        raise ValueError("comparison constants must be non-negative")
    if not (c1 > 0 or c2 > 0):
        raise ValueError("need c1 > 0 or c2 > 0")
    if not t_final > 0:
        raise ValueError("t_final must be positive")
    base = linear_envelope(c0, c1, a0, t_final)
    cap = float(cap_factor * max(base, 1e-300))
    sup = lambda e: _riccati_sup(c0, c1, c2, a0, e, t_final, cap)
    eps_max = symbol_engine.EPS_MAX
    if c2 == 0 or np.isfinite(sup(eps_max)):
        return RiccatiEnvelope(c0, c1, c2, a0, t_final, eps_max, float(sup(eps_max)), cap)
    lo = 1e-12
    if not np.isfinite(sup(lo)):
        raise OverflowError("comparison solution exceeds the cap for every tested eps")
    hi = eps_max
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if np.isfinite(sup(mid)):
            lo = mid
        else:
            hi = mid
    return RiccatiEnvelope(c0, c1, c2, a0, t_final, lo, float(sup(lo)), cap)


@dataclass
class ConvergenceReport:
    eps_list: list
    errors: list
    ratios: list
    orders: list
    order: float
    m_estimate: float
    failed: dict = field(default_factory=dict)
    energy: dict = field(default_factory=dict)
    remainders: dict = field(default_factory=dict)


def _sweep_order(eps_list, errors):
    ratios, orders = [], []
    for i in range(len(eps_list) - 1):
        e_now, e_next = errors[i], errors[i + 1]
        ratio = e_now / e_next if e_next else np.nan
        ratios.append(ratio)
        if e_now > 0 and e_next > 0 and eps_list[i + 1] > 0:
            orders.append(float(np.log(ratio) / np.log(eps_list[i] / eps_list[i + 1])))
        else:
            orders.append(np.nan)
    valid = [o for o in orders if np.isfinite(o)]
    return ratios, orders, float(np.mean(valid)) if valid else np.nan


def convergence_study(ell0, t_final, ic, eps_list, config, fek_variant=symbol_engine.DEFAULT_FEK_VARIANT,
                      workers=1, with_energy=False, keep_remainders=False):
    """Compare front runs for each eps against one K-S run from the same initial data.

    Results are ordered by eps whatever the number of workers.
    """
    eps_list = [float(e) for e in eps_list]
    if any(e > symbol_engine.EPS_MAX or e < 0 for e in eps_list):
        raise ValueError("every eps must lie in [0, 1/2]")
    if any(a <= b for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing")
    if config.grid.ell0 != ell0 or config.t_final != t_final:
        raise ValueError("strip width and horizon must match the solver config")
    phi = solve_ks(ic, config)

    def run(eps):
        try:
            return eps, solve_front(eps, ic, config, fek_variant), None
        except BlowUpError as err:
            return eps, None, err.tau

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, eps_list))
    else:
        results = [run(e) for e in eps_list]

    errors, failed, energy, remainders = [], {}, {}, {}
    grid = config.grid
    for eps, psi, blow_tau in results:
        if psi is None:
            failed[eps] = blow_tau
            errors.append(np.nan)
            continue
        errors.append(_node_sup(psi.states - phi.states, grid))
        if eps > 0 and (with_energy or keep_remainders):
            rho = remainder(psi, phi, eps)
            if with_energy:
                energy[eps] = energy_report(rho)
            if keep_remainders:
                remainders[eps] = rho
    ratios, orders, order = _sweep_order(eps_list, errors)
    scaled = [e / eps for e, eps in zip(errors, eps_list) if eps > 0 and np.isfinite(e)]
    m_estimate = float(max(scaled)) if scaled else 0.0
    return ConvergenceReport(eps_list, errors, ratios, orders, order, m_estimate, failed, energy, remainders)
