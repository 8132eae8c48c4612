"""ETDRK4 pseudo-spectral solver for Phi_t = -3 Phi_4 - Phi_2 - (1/2)(Phi_eta)^2.

The same stepper integrates any diagonal system c_m' = L_m c_m + w_m N_m with
N = (u_eta)^2, which is how the front solver reuses it.
"""

from dataclasses import dataclass

import numpy as np

from .spectral_grid import ModeVector, RealField, dealias_mask, forward, inverse, l2_from_modes
from .symbol_engine import ks_growth

CONTOUR_POINTS = 32
ENERGY_RATE = 13.0 / 6.0


class BlowUpError(RuntimeError):
    """Raised when the state stops being finite; carries the partial trajectory."""

    def __init__(self, tau, trajectory):
        super().__init__(f"non-finite state detected at tau = {tau:.6g}")
        self.tau = tau
        self.trajectory = trajectory


@dataclass(frozen=True)
class SolverConfig:
    grid: object
    dt: float
    t_final: float
    save_every: int = 1
    dealias: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_final > 0:
            raise ValueError(f"t_final must be positive, got {self.t_final}")
        if self.dt > self.t_final:
            raise ValueError("dt must not exceed t_final")
        if int(self.save_every) != self.save_every or self.save_every < 1:
            raise ValueError(f"save_every must be a positive integer, got {self.save_every}")

    @property
    def steps(self):
        return int(round(self.t_final / self.dt))


@dataclass
class Trajectory:
    """Saved spectral states; ``states[i]`` holds modes 0..n/2 at ``times[i]``."""

    config: SolverConfig
    times: np.ndarray
    states: np.ndarray
    rhs_cache: np.ndarray = None

    @property
    def grid(self):
        return self.config.grid

    def __len__(self):
        return self.times.size

    def state(self, i):
        return ModeVector(self.grid, self.states[i])

    def field(self, i):
        return inverse(self.state(i))

    def nodal(self):
        """Nodal values, one row per saved time."""
        return np.array([self.field(i).values for i in range(len(self))])


class DiagonalETDRK4:
    """Fourth-order exponential integrator for c' = L c + w FFT[(u_eta)^2].

    phi-function weights are contour means over ``CONTOUR_POINTS`` points of radius 1.
    """

    def __init__(self, grid, linear, weight, dt, dealias=True):
        self.grid = grid
        self.dt = float(dt)
        linear = np.array(linear, dtype=float)
        weight = np.array(weight, dtype=float)
        linear[-1] = 0.0
        mask = dealias_mask(grid) if dealias else np.ones(grid.n // 2 + 1)
        mask[-1] = 0.0
        self.linear = linear
        self.weight = weight * mask
        self.ik = 1j * grid.wavenumbers
        self.ik[-1] = 0.0
        self._phase = np.where(grid.modes % 2 == 0, 1.0, -1.0)
        self._coefficients()

    def _coefficients(self):
        h = self.dt
        hl = h * self.linear
        self.e = np.exp(hl)
        self.e2 = np.exp(hl / 2.0)
        k = np.arange(1, CONTOUR_POINTS + 1)
        roots = np.exp(1j * np.pi * (k - 0.5) / CONTOUR_POINTS)
        z = hl[:, None] + roots[None, :]
        ez = np.exp(z)
        self.half = h * np.real(np.mean((np.exp(z / 2.0) - 1.0) / z, axis=1))
        self.f1 = h * np.real(np.mean((-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z ** 3, axis=1))
        self.f2 = h * np.real(np.mean((2.0 + z + ez * (z - 2.0)) / z ** 3, axis=1))
        self.f3 = h * np.real(np.mean((-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z ** 3, axis=1))

    def nonlinear(self, c):
        n = self.grid.n
        # nodes start at -ell0/2, hence the alternating phase
        grad = np.fft.irfft(self.ik * c * self._phase * n, n)
        return self.weight * np.fft.rfft(grad * grad) / n * self._phase

    def rhs(self, c):
        return self.linear * c + self.nonlinear(c)

    def step(self, c):
        nv = self.nonlinear(c)
        a = self.e2 * c + self.half * nv
        na = self.nonlinear(a)
        b = self.e2 * c + self.half * na
        nb = self.nonlinear(b)
        cc = self.e2 * a + self.half * (2.0 * nb - nv)
        nc = self.nonlinear(cc)
        return self.e * c + self.f1 * nv + 2.0 * self.f2 * (na + nb) + self.f3 * nc

    def integrate(self, c0, config, cache_rhs=False):
        c = np.array(c0, dtype=complex)
        c[-1] = 0.0
        steps = config.steps
        stride = int(config.save_every)
        saved_idx = list(range(0, steps + 1, stride))
        if saved_idx[-1] != steps:
            saved_idx.append(steps)
        states = np.empty((len(saved_idx), c.size), dtype=complex)
        states[0] = c
        slot = 1
        for k in range(1, steps + 1):
            c = self.step(c)
            if not np.all(np.isfinite(c)):
                partial = self._trajectory(config, saved_idx[:slot], states[:slot], cache_rhs)
                raise BlowUpError(k * config.dt, partial)
            if slot < len(saved_idx) and k == saved_idx[slot]:
                states[slot] = c
                slot += 1
        return self._trajectory(config, saved_idx, states, cache_rhs)

    def _trajectory(self, config, idx, states, cache_rhs):
        times = np.asarray(idx, dtype=float) * config.dt
        cache = np.array([self.rhs(s) for s in states]) if cache_rhs else None
        return Trajectory(config, times, np.array(states), cache)


def _stepper_ks(config):
    lam = config.grid.lam
    return DiagonalETDRK4(config.grid, ks_growth(lam), np.full(lam.size, -0.5), config.dt, config.dealias)


def ks_rhs(state):
    """(lambda - 3 lambda^2) c - (1/2) FFT[(Phi_eta)^2] with the 2/3 rule."""
    grid = state.grid
    stepper = DiagonalETDRK4(grid, ks_growth(grid.lam), np.full(grid.n // 2 + 1, -0.5), 1.0)
    return ModeVector(grid, stepper.rhs(state.coeffs))


def solve_ks(phi0, config, cache_rhs=False):
    if phi0.grid != config.grid:
        raise ValueError("initial field and solver grid differ")
    return _stepper_ks(config).integrate(forward(phi0).coeffs, config, cache_rhs)


def _derivative_l2(traj, order):
    k = traj.grid.wavenumbers
    factor = (1j * k) ** order
    return np.array([l2_from_modes(ModeVector(traj.grid, s * factor)) for s in traj.states])


def energy_bound_ratio(traj):
    """max over snapshots of ||Phi_eta(t)|| / (e^{13 t / 6} ||Phi_eta(0)||)."""
    g = _derivative_l2(traj, 1)
    if g[0] == 0:
        return 0.0 if np.all(g == 0) else np.inf
    return float(np.max(g / (np.exp(ENERGY_RATE * traj.times) * g[0])))


def _time_derivative(values, times):
    return np.gradient(values, times, edge_order=2, axis=0)


def mean_law_residual(traj):
    """max |d/dt mean(Phi) + (1/2) mean((Phi_eta)^2)| with the derivative from snapshots."""
    mean = traj.states[:, 0].real
    grad_sq_mean = _derivative_l2(traj, 1) ** 2 / traj.grid.ell0
    return float(np.max(np.abs(_time_derivative(mean, traj.times) + 0.5 * grad_sq_mean)))


def energy_identity_residual(traj):
    """Residual of (1/2) d/dt||v||^2 + 3||v_2||^2 - ||v_1||^2 + 2||v||^2 = 0, v = e^{-2t} Phi_eta.

    The cubic term drops out because the integral of v^2 v_eta vanishes.
    Returned relative to the size of the dissipative terms.
    """
    decay = np.exp(-2.0 * traj.times)
    v0 = decay * _derivative_l2(traj, 1)
    v1 = decay * _derivative_l2(traj, 2)
    v2 = decay * _derivative_l2(traj, 3)
    res = 0.5 * _time_derivative(v0 ** 2, traj.times) + 3.0 * v2 ** 2 - v1 ** 2 + 2.0 * v0 ** 2
    scale = max(1.0, float(np.max(3.0 * v2 ** 2 + v1 ** 2 + 2.0 * v0 ** 2)))
    return float(np.max(np.abs(res)) / scale)


def mean_drift_margin(traj):
    """min over snapshots of bound - |mean Phi|; non-negative when the drift bound holds."""
    ell0 = traj.grid.ell0
    mean = traj.states[:, 0].real
    g0 = _derivative_l2(traj, 1)[0]
    bound = abs(mean[0]) + 3.0 / (26.0 * ell0) * g0 ** 2 * np.exp(2.0 * ENERGY_RATE * traj.times)
    return float(np.min(bound - np.abs(mean)))


def constant_field(grid, value):
    return RealField(grid, np.full(grid.n, float(value)))
