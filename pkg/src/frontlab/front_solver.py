"""The eps-family front equation, its remainder, rescaling and the two-term Ansatz.

In Fourier form the front equation is diagonal,
    psi_m' = r_m psi_m + q_m FFT[(psi_eta)^2]_m,
and at eps = 0 it is exactly the K-S equation.
"""

from dataclasses import dataclass

import numpy as np

from . import symbol_engine
from .ks_solver import DiagonalETDRK4, Trajectory, ks_rhs
from .resolvent_lab import Profile, Term
from .spectral_grid import ModeVector, RealField, dealiased_square, differentiate, forward, inverse


@dataclass(frozen=True)
class FrontState:
    eps: float
    state: ModeVector
    tau: float = 0.0

    def __post_init__(self):
        symbol_engine._check_eps(self.eps)


def _stepper(symbols, config):
    return DiagonalETDRK4(config.grid, symbols.r, symbols.q, config.dt, config.dealias)


def front_rhs(fs, symbols):
    if symbols.eps != fs.eps:
        raise ValueError(f"symbol table built for eps={symbols.eps}, state has eps={fs.eps}")
    if symbols.grid != fs.state.grid:
        raise ValueError("symbol table and state live on different grids")
    stepper = DiagonalETDRK4(fs.state.grid, symbols.r, symbols.q, 1.0)
    return ModeVector(fs.state.grid, stepper.rhs(fs.state.coeffs))


def solve_front(eps, psi0, config, fek_variant=symbol_engine.DEFAULT_FEK_VARIANT, cache_rhs=False):
    if psi0.grid != config.grid:
        raise ValueError("initial field and solver grid differ")
    symbols = symbol_engine.build(eps, config.grid, fek_variant)
    return _stepper(symbols, config).integrate(forward(psi0).coeffs, config, cache_rhs)


def remainder(traj_psi, traj_phi, eps):
    """rho = (psi - Phi) / eps on matched snapshots."""
    if not eps > 0:
        raise ValueError("remainder needs eps > 0")
    if traj_psi.grid != traj_phi.grid:
        raise ValueError("trajectories live on different grids")
    if traj_psi.times.shape != traj_phi.times.shape or not np.allclose(traj_psi.times, traj_phi.times, rtol=0, atol=1e-12):
        raise ValueError("trajectories are sampled at different times")
    rho = (traj_psi.states - traj_phi.states) / eps
    rho[0] = 0.0
    return Trajectory(traj_psi.config, traj_psi.times.copy(), rho)


@dataclass(frozen=True)
class OriginalVariables:
    """phi(t, y) = eps psi(eps^2 t, y sqrt(eps)) sampled at the saved instants."""

    eps: float
    ell_eps: float
    t_final_eps: float
    times: np.ndarray
    y: np.ndarray
    phi: np.ndarray

    mapping = "t = tau/eps^2, y = eta/sqrt(eps), phi = eps*psi"


def to_original_variables(traj, eps):
    if not eps > 0:
        raise ValueError("rescaling needs eps > 0")
    grid = traj.grid
    root = np.sqrt(eps)
    return OriginalVariables(
        eps=eps,
        ell_eps=grid.ell0 / root,
        t_final_eps=traj.config.t_final / eps ** 2,
        times=traj.times / eps ** 2,
        y=grid.nodes / root,
        phi=eps * traj.nodal(),
    )


def _nodal(modes):
    return inverse(modes).values


def reconstruct_front_trace(fs, rhs):
    """v(tau, 0, .) = (eps - 1) psi_etaeta + eps (psi_tau + (1/2) psi_eta^2)."""
    eps = fs.eps
    psi_2 = _nodal(differentiate(fs.state, 2))
    psi_1 = _nodal(differentiate(fs.state, 1))
    return RealField(fs.state.grid, (eps - 1.0) * psi_2 + eps * (_nodal(rhs) + 0.5 * psi_1 ** 2))


@dataclass(frozen=True)
class AnsatzBundle:
    """Zeroth and first order fields of the expansion v = v0 + eps v1.

    v0 and v1 are profiles in x whose coefficients are nodal arrays over eta.
    The quadratic term (psi_eta)^2 is the dealiased product used by the solver.
    """

    grid: object
    psi0: RealField
    psi1_etaeta: RealField
    psi0_tau: RealField
    a: RealField
    v0: Profile
    v1: Profile
    psi0_22: np.ndarray
    psi0_4: np.ndarray
    grad_sq: np.ndarray


def _eta_derivative(values, grid, order):
    return _nodal(differentiate(forward(RealField(grid, values)), order))


def build_ansatz(psi0, psi1_etaeta=None, grid=None, psi0_tau=None):
    """Assemble v0, v1 and a; psi0_tau defaults to the K-S right-hand side of psi0."""
    grid = psi0.grid if grid is None else grid
    if psi0.grid != grid:
        raise ValueError("psi0 lives on a different grid")
    if psi1_etaeta is None:
        psi1_etaeta = RealField(grid, np.zeros(grid.n))
    # the solvers pin the Nyquist mode at zero; round-trip noise there would
    # otherwise be amplified by lambda^2 in the defect
    coeffs = forward(psi0).coeffs.copy()
    coeffs[-1] = 0.0
    modes = ModeVector(grid, coeffs)
    if psi0_tau is None:
        psi0_tau = inverse(ks_rhs(modes))
    p2 = _nodal(differentiate(modes, 2))
    p4 = _nodal(differentiate(modes, 4))
    grad_sq = _nodal(dealiased_square(inverse(differentiate(modes, 1))))
    p1 = psi1_etaeta.values
    pt = psi0_tau.values
    a = -p1 + p2 + pt + 0.5 * grad_sq
    v0 = Profile((Term(-p2, 0, 1.0), Term(p2, 1, 1.0)), (Term(-p2, 0, 0.0),))
    slope = 2.0 * p4 - pt - grad_sq + p1
    v1 = Profile(
        (Term(a, 0, 1.0), Term(slope, 1, 1.0), Term(-0.5 * p4, 2, 1.0)),
        (Term(a, 0, 0.0), Term(-p4, 1, 0.0)),
    )
    return AnsatzBundle(grid, psi0, psi1_etaeta, psi0_tau, RealField(grid, a), v0, v1, p2, p4, grad_sq)


SAMPLE_X = (-2.0, -1.0, -0.5, 0.0, 0.5, 1.0)


def _max_abs(profile, xs=SAMPLE_X):
    """Largest |value| over the sample points, using both one-sided limits at 0."""
    worst = 0.0
    for x in xs:
        if x == 0:
            vals = (profile.left_at_zero(), profile.right_at_zero())
        else:
            vals = (profile.evaluate(x),)
        for v in vals:
            worst = max(worst, float(np.max(np.abs(v))))
    return worst


def _symbolic_residual(profile):
    """Largest coefficient left after combining like terms."""
    coefs = [t.coef for t in profile.left + profile.right]
    return max((float(np.max(np.abs(c))) for c in coefs), default=0.0)


@dataclass(frozen=True)
class AnsatzReport:
    residuals: dict
    defect: RealField

    @property
    def max_defect(self):
        return float(np.max(np.abs(self.defect.values)))


def ansatz_residuals(bundle):
    """Residuals of the zeroth and first order equations and the K-S defect of psi0.

    Interior equations are checked both symbolically (collected coefficients)
    and pointwise at fixed x. The first order jump residual equals minus the defect.
    """
    grid = bundle.grid
    p2, p4, gs = bundle.psi0_22, bundle.psi0_4, bundle.grad_sq
    pt, p1 = bundle.psi0_tau.values, bundle.psi1_etaeta.values
    v0, v1 = bundle.v0, bundle.v1

    d0 = v0.derivative()
    lhs0 = d0 - d0.derivative()
    rhs0 = Profile((Term(-p2, 0, 1.0),), ())
    r0 = lhs0 - rhs0

    v0_etaeta = v0.map_coefs(lambda c: _eta_derivative(c, grid, 2))
    d1 = v1.derivative()
    lhs1 = d1 - d1.derivative() - v0_etaeta
    rhs1 = Profile((Term(pt + gs - p1, 0, 1.0),), ())
    r1 = lhs1 - rhs1

    residuals = {
        "zeroth_interior_symbolic": _symbolic_residual(r0),
        "zeroth_interior_sampled": _max_abs(r0),
        "zeroth_slope_jump": float(np.max(np.abs(d0.right_at_zero() - d0.left_at_zero()))),
        "zeroth_trace": float(np.max(np.abs(v0.left_at_zero() + p2))),
        "zeroth_continuity": float(np.max(np.abs(v0.left_at_zero() - v0.right_at_zero()))),
        "first_interior_symbolic": _symbolic_residual(r1),
        "first_interior_sampled": _max_abs(r1),
        "first_trace": float(np.max(np.abs(v1.left_at_zero() - (-p1 + p2 + pt + 0.5 * gs)))),
        "first_continuity": float(np.max(np.abs(v1.left_at_zero() - v1.right_at_zero()))),
    }
    jump = d1.right_at_zero() - d1.left_at_zero() - (pt + gs)
    residuals["first_slope_jump"] = float(np.max(np.abs(jump)))
    defect = p2 + pt + 0.5 * gs + 3.0 * p4
    return AnsatzReport(residuals, RealField(grid, defect))
