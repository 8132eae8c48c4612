"""Periodic collocation grid, Fourier transforms, spectral derivatives and norms.

Coefficients are normalised so that f(eta_j) = sum_m c_m exp(i 2 pi m eta_j / ell0),
which makes c_0 the mean. Only the non-negative half m = 0..n/2 is stored;
negative modes follow from Hermitian symmetry.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform periodic grid on [-ell0/2, ell0/2) with ``n`` nodes."""

    ell0: float
    n: int

    def __post_init__(self):
        if not (np.isfinite(self.ell0) and self.ell0 > 0):
            raise ValueError(f"strip width must be positive, got {self.ell0}")
        if int(self.n) != self.n or self.n < 8 or self.n % 2:
            raise ValueError(f"mode count must be an even integer >= 8, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "ell0", float(self.ell0))

    @property
    def spacing(self):
        return self.ell0 / self.n

    @property
    def nodes(self):
        return -0.5 * self.ell0 + self.spacing * np.arange(self.n)

    @property
    def modes(self):
        """Stored mode indices 0..n/2."""
        return np.arange(self.n // 2 + 1)

    @property
    def wavenumbers(self):
        return 2.0 * np.pi * self.modes / self.ell0

    @property
    def lam(self):
        """Eigenvalues lambda(m) = (2 pi m / ell0)^2 of -d^2/d eta^2."""
        return self.wavenumbers ** 2

    @property
    def dealias_cutoff(self):
        return self.n / 3.0


@dataclass(frozen=True)
class RealField:
    """Nodal samples of a real periodic function."""

    grid: PeriodicGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} samples, got shape {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class ModeVector:
    """Half-spectrum coefficients c_0..c_{n/2} of a real field."""

    grid: PeriodicGrid
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=complex)
        if coeffs.shape != (self.grid.n // 2 + 1,):
            raise ValueError(f"expected {self.grid.n // 2 + 1} coefficients, got {coeffs.shape}")
        # c_0 and the Nyquist entry are their own conjugates
        coeffs[0] = coeffs[0].real
        coeffs[-1] = coeffs[-1].real
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    def full(self):
        """Coefficients for m = -n/2+1..n/2 in that order."""
        half = self.coeffs
        negative = np.conj(half[1:-1][::-1])
        return np.concatenate([negative, half])

    def full_modes(self):
        h = self.grid.n // 2
        return np.arange(-h + 1, h + 1)


def _phase(grid):
    # nodes start at -ell0/2, so shifting to the grid origin multiplies mode m by (-1)^m
    return np.where(grid.modes % 2 == 0, 1.0, -1.0)


def forward(field):
    """Nodal samples to coefficients; inverse(forward(f)) reproduces f."""
    grid = field.grid
    coeffs = np.fft.rfft(field.values) / grid.n * _phase(grid)
    return ModeVector(grid, coeffs)


def inverse(modes):
    grid = modes.grid
    values = np.fft.irfft(modes.coeffs * _phase(grid) * grid.n, grid.n)
    return RealField(grid, values)


def differentiate(modes, order):
    """Spectral derivative of order 1..4."""
    if order not in (1, 2, 3, 4):
        raise ValueError(f"derivative order must be 1, 2, 3 or 4, got {order}")
    grid = modes.grid
    symbol = (1j * grid.wavenumbers) ** order
    if order % 2:
        # the Nyquist derivative is not a real field
        symbol[-1] = 0.0
    else:
        symbol = symbol.real
    return ModeVector(grid, modes.coeffs * symbol)


def dealias_mask(grid):
    return (grid.modes <= grid.dealias_cutoff).astype(float)


def dealias(modes):
    """Zero every mode with |m| > n/3."""
    return ModeVector(modes.grid, modes.coeffs * dealias_mask(modes.grid))


def dealiased_square(field):
    """Coefficients of the nodal square with the 2/3 rule applied to the product."""
    return dealias(forward(RealField(field.grid, field.values ** 2)))


def mode_weights(grid):
    """Multiplicity of each stored mode in the full spectrum."""
    w = np.full(grid.n // 2 + 1, 2.0)
    w[0] = 1.0
    w[-1] = 1.0
    return w


def l2_from_modes(modes):
    grid = modes.grid
    return float(np.sqrt(grid.ell0 * np.sum(mode_weights(grid) * np.abs(modes.coeffs) ** 2)))


def norms(field):
    """Return (l2, sup) with l2 from Parseval and sup the nodal max."""
    return l2_from_modes(forward(field)), float(np.max(np.abs(field.values)))


def cosine(grid, mode, amplitude=1.0):
    return RealField(grid, amplitude * np.cos(2.0 * np.pi * mode * grid.nodes / grid.ell0))


def sine(grid, mode, amplitude=1.0):
    return RealField(grid, amplitude * np.sin(2.0 * np.pi * mode * grid.nodes / grid.ell0))
