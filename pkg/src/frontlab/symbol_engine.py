"""Fourier-multiplier symbols of the front equation and their limit checks.

Every symbol is a rational function of X = sqrt(1 + 4 eps lambda). The linear
growth rate r = s/b and the nonlinear weight q = (eps g - 1/2)/b drive the
diagonal evolution psi_m' = r_m psi_m + q_m N_m with N = (psi_eta)^2.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

EPS_MAX = 0.5
ELL_CRIT_KS = 2.0 * np.pi * np.sqrt(3.0)

# constant in the numerator 3X^2 + 15X + c of the g symbol
FEK_CONSTANTS = {4: 4.0, 14: 14.0}
DEFAULT_FEK_VARIANT = 14


def _check_eps(eps):
    if not np.isfinite(eps) or eps < 0:
        raise ValueError(f"eps must be >= 0, got {eps}")
    if eps > EPS_MAX:
        raise ValueError(f"eps must be <= {EPS_MAX}, got {eps}")


def _fek_constant(variant):
    try:
        return FEK_CONSTANTS[int(variant)]
    except (KeyError, ValueError, TypeError):
        raise ValueError(f"unknown g variant {variant!r}; expected 4 or 14") from None


def ks_growth(lam):
    """Linear K-S multiplier lambda - 3 lambda^2."""
    lam = np.asarray(lam, dtype=float)
    return lam - 3.0 * lam * lam


def x_value(eps, lam):
    return np.sqrt(1.0 + 4.0 * eps * np.asarray(lam, dtype=float))


def x_minus_one(eps, lam):
    """X - 1 without cancellation."""
    mu = eps * np.asarray(lam, dtype=float)
    return 4.0 * mu / (np.sqrt(1.0 + 4.0 * mu) + 1.0)


def b_symbol(X):
    return 0.75 * (X + 1.0) * (X * X + 2.0 * X - 1.0) / (X + 2.0)


def s_symbol(lam, X):
    # the 1/eps^2 closed form rewritten with X^2 - 1 = 4 eps lam, so no 1/eps remains
    return 0.75 * lam * X * (X + 1.0) ** 2 / (X + 2.0) - 3.0 * lam * lam


def u2_symbol(X):
    return (2.0 / 3.0) / ((X + 1.0) * (X + 2.0))


def u1_symbol(X):
    return -(4.0 / 9.0) * (4.0 * X + 7.0) / ((X + 1.0) ** 2 * (X + 2.0))


def g_symbol(lam, X, variant=DEFAULT_FEK_VARIANT):
    c = _fek_constant(variant)
    return -lam * (3.0 * X * X + 15.0 * X + c) / (2.0 * (X + 1.0) * (X + 2.0))


def s_printed_closed_form(eps, X):
    """The s symbol in its 1/eps^2 form, valid only for eps > 0."""
    return (3.0 * (X - 1.0) * (X + 1.0) ** 2 * ((eps - 1.0) * (X * X + X) + 2.0)
            / (16.0 * eps * eps * (X + 2.0)))


def z_shift(eps, X, variant=DEFAULT_FEK_VARIANT):
    """z + 1/(2 eps) for eps > 0, written so the leading terms cancel exactly."""
    c = _fek_constant(variant)
    numerator = -3.0 * X * X + (18.0 - c) * X + (c - 3.0)
    return numerator / (8.0 * eps * (X + 2.0) * b_symbol(X))


def evaluate(eps, lam, variant=DEFAULT_FEK_VARIANT):
    """All symbols at scalar eps and an array of lambda values."""
    _check_eps(eps)
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise ValueError("lambda must be non-negative")
    X = x_value(eps, lam)
    b = b_symbol(X)
    g = g_symbol(lam, X, variant)
    if eps == 0:
        s = ks_growth(lam)
        r = s.copy()
        q = np.full_like(lam, -0.5)
    else:
        s = s_symbol(lam, X)
        r = s / b
        q = (eps * g - 0.5) / b
    return {
        "lambda": lam, "X": X, "b": b, "s": s, "g": g, "r": r, "q": q, "z": g / b,
        "u1": u1_symbol(X), "u2": u2_symbol(X),
    }


@dataclass(frozen=True)
class SymbolTable:
    """Per-mode symbol values for modes 0..n/2 of a grid."""

    eps: float
    grid: object
    fek_variant: int
    lam: np.ndarray
    X: np.ndarray
    b: np.ndarray
    s: np.ndarray
    g: np.ndarray
    r: np.ndarray
    q: np.ndarray
    z: np.ndarray
    u1: np.ndarray
    u2: np.ndarray

    FIELDS = ("lam", "X", "b", "s", "g", "r", "q", "z", "u1", "u2")

    def rows(self):
        """Rows (mode, lambda, X, b, s, g, r, q, z, u1, u2)."""
        for m in range(self.lam.size):
            yield (m,) + tuple(float(getattr(self, f)[m]) for f in self.FIELDS)


def build(eps, grid, fek_variant=DEFAULT_FEK_VARIANT):
    values = evaluate(eps, grid.lam, fek_variant)
    arrays = {}
    for key in SymbolTable.FIELDS:
        arr = np.array(values["lambda" if key == "lam" else key], dtype=float)
        arr.setflags(write=False)
        arrays[key] = arr
    return SymbolTable(eps=float(eps), grid=grid, fek_variant=int(fek_variant), **arrays)


def b_recomposed(eps, lam, u1):
    """b rebuilt from 1 + (13/3) eps lam plus the trace correction."""
    return 1.0 + (13.0 / 3.0) * eps * lam + 3.0 * eps * eps * lam * lam * u1


def b_recomposed_as_printed(eps, lam, u1):
    """Same recomposition with the opposite sign on the trace correction."""
    return 1.0 + (13.0 / 3.0) * eps * lam - 3.0 * eps * eps * lam * lam * u1


def s_recomposed(eps, lam, u2):
    return -3.0 * (1.0 - eps) * lam * lam + lam + 3.0 * eps * lam * lam * u2


def g_recomposed(eps, lam, u1, u2):
    """g rebuilt from its definition in terms of the two trace symbols."""
    return -(17.0 / 6.0) * lam + 1.5 * lam * u2 - 3.0 * eps * lam * lam * u1


@dataclass(frozen=True)
class KSLimitReport:
    eps_values: tuple
    r_deviation: tuple
    q_deviation: tuple
    linear_in_eps: bool


def ks_limit_check(grid, eps_values=(1e-4, 1e-6), lam_max=None):
    """Distance of r and q from their K-S limits at small eps.

    r deviations are scaled by max(1, lambda^2). Modes above ``lam_max`` are
    ignored when it is given.
    """
    lam = grid.lam[: grid.n // 2]
    if lam_max is not None:
        lam = lam[lam <= lam_max]
    r_dev, q_dev = [], []
    for eps in eps_values:
        t = evaluate(eps, lam)
        r_dev.append(float(np.max(np.abs(t["r"] - ks_growth(lam)) / np.maximum(1.0, lam ** 2))))
        q_dev.append(float(np.max(np.abs(t["q"] + 0.5))))
    if len(eps_values) < 2:
        return KSLimitReport(tuple(eps_values), tuple(r_dev), tuple(q_dev), None)
    ratio = eps_values[0] / eps_values[-1]
    linear = all(
        dev[-1] == 0 or abs(np.log(dev[0] / dev[-1]) / np.log(ratio) - 1.0) < 0.05
        for dev in (r_dev, q_dev)
    )
    return KSLimitReport(tuple(eps_values), tuple(r_dev), tuple(q_dev), linear)


@dataclass(frozen=True)
class AsymptoticsReport:
    eps: float
    lam: np.ndarray
    b_ratio: np.ndarray
    r_ratio: np.ndarray
    z_ratio: np.ndarray
    s_ratio_recomputed: np.ndarray
    s_ratio_printed: np.ndarray
    s_winner: str


def asymptotics_report(eps, lambda_max, points_per_decade=2, fek_variant=DEFAULT_FEK_VARIANT):
    """Large-lambda ratios that should tend to 1.

    The s symbol is compared against two leading forms, 3(eps-1) lambda^2 and
    48(eps-1) eps^2 lambda^2; ``s_winner`` names the one whose ratio ends
    closer to 1.
    """
    if not 0 < eps <= EPS_MAX:
        raise ValueError(f"eps must lie in (0, {EPS_MAX}], got {eps}")
    decades = int(np.ceil(np.log10(lambda_max)))
    lam = np.logspace(0, np.log10(lambda_max), decades * points_per_decade + 1)
    t = evaluate(eps, lam, fek_variant)
    X = t["X"]
    s_recomputed = t["s"] / (3.0 * (eps - 1.0) * lam ** 2)
    s_printed = t["s"] / (48.0 * (eps - 1.0) * eps ** 2 * lam ** 2)
    winner = "3(eps-1)lam^2" if abs(s_recomputed[-1] - 1) < abs(s_printed[-1] - 1) else "48(eps-1)eps^2lam^2"
    return AsymptoticsReport(
        eps=eps, lam=lam,
        b_ratio=t["b"] / (3.0 * eps * lam),
        r_ratio=t["r"] / ((1.0 - 1.0 / eps) * lam),
        z_ratio=z_shift(eps, X, fek_variant) * (-4.0 * np.sqrt(eps ** 3 * lam)),
        s_ratio_recomputed=s_recomputed,
        s_ratio_printed=s_printed,
        s_winner=winner,
    )


def first_mode_growth(eps, ell0):
    lam1 = (2.0 * np.pi / ell0) ** 2
    return float(evaluate(eps, np.array([lam1]))["r"][0])


def stability_threshold(eps, tol=1e-10):
    """Strip width where the growth rate of the first mode changes sign."""
    _check_eps(eps)
    # r(lambda) vanishes at a unique lambda*, find it then map to ell0
    def rate(lam):
        return float(evaluate(eps, np.array([lam]))["r"][0])
    lam_star = brentq(rate, 1e-3, 1.0, xtol=tol * 1e-2, rtol=4 * np.finfo(float).eps, maxiter=500)
    return float(2.0 * np.pi / np.sqrt(lam_star))


@dataclass(frozen=True)
class DispersionReport:
    gamma: float
    gamma_c_leading: float
    ell_crit: float

    def omega(self, k):
        return dispersion(self.gamma, k)


def dispersion(gamma, k):
    """Leading terms (1 - gamma) k^2 + (gamma - 4) k^4 of the growth rate."""
    k = np.asarray(k, dtype=float)
    return (1.0 - gamma) * k ** 2 + (gamma - 4.0) * k ** 4


def dispersion_report(gamma, ell):
    lam1 = (2.0 * np.pi / ell) ** 2
    return DispersionReport(gamma=gamma, gamma_c_leading=1.0 - 3.0 * lam1, ell_crit=ELL_CRIT_KS)
