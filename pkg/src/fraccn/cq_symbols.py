"""Backward-Euler convolution quadrature weights and the scheme's generating symbols.

The symbols are evaluated on the truncated contour used by the error analysis,
so the scalar bounds that drive the convergence proof can be checked by
sampling.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "CqWeights",
    "SymbolError",
    "SymbolSample",
    "SymbolReport",
    "SectorReport",
    "be_cq_weights",
    "theta_base",
    "beta_tau",
    "beta_tau_pow",
    "mu",
    "mu0",
    "sample_symbols",
    "contour_points",
    "certify_symbol_bounds",
    "certify_sector_mapping",
    "scalar_kernel",
    "scalar_kernel_error",
]

DEFAULT_THETA = np.pi / 2 + 0.05
THETA_BAND = 0.1


class SymbolError(ValueError):
    """Raised when a symbol hits a degenerate base or an invalid contour."""


@dataclass(frozen=True)
class CqWeights:
    """Coefficients b_0..b_{n_max} of (1 - xi)**alpha."""

    alpha: float
    n_max: int
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.weights.setflags(write=False)

    def __len__(self):
        return self.n_max + 1

    def __getitem__(self, j):
        return self.weights[j]

    @property
    def partial_sums(self) -> np.ndarray:
        return np.cumsum(self.weights)


def be_cq_weights(alpha: float, n_max: int) -> CqWeights:
    """BE-CQ weights via b_j = b_{j-1} (j - 1 - alpha) / j.

    Algebraically the same as the Gamma-ratio closed form, but stays finite
    for any n_max.
    """
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    if n_max < 0:
        raise ValueError(f"n_max must be nonnegative, got {n_max}")
    j = np.arange(1, n_max + 1, dtype=float)
    factors = (j - 1.0 - alpha) / j
    weights = np.empty(n_max + 1)
    weights[0] = 1.0
    weights[1:] = np.cumprod(factors) + 0.0  # -0.0 -> 0.0 once alpha = 1 zeroes a factor
    return CqWeights(alpha=float(alpha), n_max=int(n_max), weights=weights)


def theta_base(xi, alpha):
    """1 - alpha/2 + (alpha/2) xi, the theta-method average of the symbol."""
    return 1.0 - 0.5 * alpha + 0.5 * alpha * np.asarray(xi, dtype=complex)


def _base_root(xi, alpha):
    base = theta_base(xi, alpha)
    if np.any(base == 0):
        raise SymbolError("degenerate symbol: 1 - alpha/2 + alpha/2*xi vanishes")
    # principal branch; |arg base| < pi/2 for |xi| <= 1
    return base ** (1.0 / alpha)


def beta_tau(xi, alpha, tau):
    """(1 - xi) / (tau * (1 - alpha/2 + alpha/2 xi)**(1/alpha))."""
    xi = np.asarray(xi, dtype=complex)
    return (1.0 - xi) / (tau * _base_root(xi, alpha))


def beta_tau_pow(xi, alpha, tau):
    """beta_tau(xi)**alpha written as (1 - xi)**alpha / (tau**alpha * base).

    This form avoids taking the 1/alpha power and then the alpha power of the
    result; it agrees with the principal-branch composition whenever both are
    defined.
    """
    xi = np.asarray(xi, dtype=complex)
    base = theta_base(xi, alpha)
    if np.any(base == 0):
        raise SymbolError("degenerate symbol: 1 - alpha/2 + alpha/2*xi vanishes")
    return (1.0 - xi) ** alpha / (tau**alpha * base)


def mu(xi, alpha):
    """Correction symbol of the two-step corrected scheme."""
    xi = np.asarray(xi, dtype=complex)
    return (3.0 * xi - xi**2) / (2.0 * _base_root(xi, alpha))


def mu0(xi, alpha):
    """Correction symbol of the three-step corrected scheme."""
    xi = np.asarray(xi, dtype=complex)
    return (4.0 * xi - 3.0 * xi**2 + xi**3) / (2.0 * _base_root(xi, alpha))


def _symbols_from_z(z, alpha, tau):
    """(1 - xi, base, base**(1/alpha)) at xi = exp(-z tau), cancellation-free."""
    one_minus_xi = -np.expm1(-np.asarray(z, dtype=complex) * tau)
    log_base = np.log1p(-0.5 * alpha * one_minus_xi)
    return one_minus_xi, np.exp(log_base), np.exp(log_base / alpha)


@dataclass(frozen=True)
class SymbolSample:
    z: complex
    tau: float
    beta: complex
    mu: complex
    mu0: complex


def sample_symbols(z, alpha, tau) -> list[SymbolSample]:
    """Evaluate beta_tau, mu and mu0 at xi = exp(-z tau) for each z."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    xi = np.exp(-z * tau)
    b, m, m0 = beta_tau(xi, alpha, tau), mu(xi, alpha), mu0(xi, alpha)
    return [SymbolSample(complex(zz), float(tau), complex(bb), complex(mm), complex(mm0))
            for zz, bb, mm, mm0 in zip(z, b, m, m0)]


def _check_theta(theta):
    if not (np.pi / 2 < theta <= np.pi / 2 + THETA_BAND + 1e-12):
        raise SymbolError(
            f"theta must lie in (pi/2, pi/2 + {THETA_BAND}], got {theta}")


def contour_points(tau, theta=DEFAULT_THETA, delta=0.05, n_samples=1000):
    """Sample the truncated contour: the arc |z| = delta, |arg z| <= theta,
    and the rays r exp(+-i theta) for delta <= r <= pi / (tau sin theta).

    Returns a dict with keys "arc", "ray_plus" and "ray_minus". Ray radii are
    geometrically spaced so every scale between delta and pi/tau is covered.
    """
    _check_theta(theta)
    if delta <= 0:
        raise SymbolError("delta must be positive")
    r_max = np.pi / (tau * np.sin(theta))
    if r_max <= delta:
        raise SymbolError("contour is empty: delta exceeds pi/(tau sin theta)")
    phi = np.linspace(-theta, theta, n_samples)
    arc = delta * np.exp(1j * phi)
    r = np.geomspace(delta, r_max, n_samples)
    return {
        "arc": arc,
        "ray_plus": r * np.exp(1j * theta),
        "ray_minus": r * np.exp(-1j * theta),
    }


@dataclass
class SymbolReport:
    """Empirical extrema of the normalized symbol estimates over a contour.

    ``ratios`` maps an estimate name to its sup (or inf, for lower bounds)
    over all samples.
    """

    alpha: float
    tau: float
    theta: float
    delta: float
    n_samples: int
    ratios: dict[str, float]

    def all_finite(self) -> bool:
        return all(np.isfinite(v) for v in self.ratios.values())

    def lines(self) -> list[str]:
        head = (f"alpha={self.alpha:g} tau={self.tau:g} theta={self.theta:.6g} "
                f"delta={self.delta:g} samples={self.n_samples}")
        return [head] + [f"  {k:<22s} {v:.6e}" for k, v in self.ratios.items()]


def certify_symbol_bounds(alpha, tau, theta=DEFAULT_THETA, delta=0.05, n_samples=1000):
    """Sweep the truncated contour and report the normalized symbol bounds.

    Lower-bound entries (``*_min``) must stay away from zero and upper-bound
    entries (``*_max`` / ``*_sup``) must stay bounded as tau is refined.
    """
    pts = contour_points(tau, theta, delta, n_samples)
    z = np.concatenate(list(pts.values()))
    zt = z * tau
    xi = np.exp(-zt)
    az = np.abs(z)
    azt = np.abs(zt)

    omx, base, g = _symbols_from_z(z, alpha, tau)
    cq = omx**alpha
    beta = omx / (tau * g)
    beta_a = cq / (tau**alpha * base)
    ratios = {
        "g_abs_min": float(np.min(np.abs(g))),
        "g_abs_max": float(np.max(np.abs(g))),
        "g_taylor_sup": float(np.max(np.abs(g - (1.0 - zt / 2.0)) / azt**2)),
        "cq_taylor_sup": float(np.max(np.abs(cq - zt**alpha * base) / azt ** (2.0 + alpha))),
        "mu_sup": float(np.max(np.abs(mu(xi, alpha) - 1.0) / azt**2)),
        "mu0_sup": float(np.max(np.abs(mu0(xi, alpha) - 1.0) / azt**2)),
        "beta_sup": float(np.max(np.abs(beta - z) / (tau**2 * az**3))),
        "beta_pow_sup": float(np.max(np.abs(beta_a - z**alpha) / (tau**2 * az ** (2.0 + alpha)))),
        "beta_abs_min": float(np.min(np.abs(beta) / az)),
        "beta_abs_max": float(np.max(np.abs(beta) / az)),
    }
    return SymbolReport(float(alpha), float(tau), float(theta), float(delta), int(n_samples), ratios)


@dataclass
class SectorReport:
    alpha: float
    tau: float
    theta: float
    delta: float
    phi: float
    max_angle_contour: float
    max_angle_half_plane: float
    max_angle_imag_axis: float

    @property
    def max_angle(self) -> float:
        return max(self.max_angle_contour, self.max_angle_half_plane)

    @property
    def ok(self) -> bool:
        return self.max_angle < self.phi

    def lines(self) -> list[str]:
        return [
            f"alpha={self.alpha:g} tau={self.tau:g} phi={self.phi:.6g}",
            f"  max |arg| contour     {self.max_angle_contour:.6e}",
            f"  max |arg| half-plane  {self.max_angle_half_plane:.6e}",
            f"  max |arg| imag axis   {self.max_angle_imag_axis:.6e}"
            f" (alpha*pi/2 = {self.alpha * np.pi / 2:.6e})",
            f"  inside sector: {self.ok}",
        ]


def certify_sector_mapping(alpha, tau, theta=DEFAULT_THETA, delta=0.05, phi=None, n_samples=1000):
    """Largest |arg beta_tau(exp(-z tau))**alpha| over the contour and the
    closed right half-plane (minus the origin).

    ``phi`` defaults to the midpoint of (alpha pi/2, pi).
    """
    if phi is None:
        phi = 0.5 * (alpha * np.pi / 2 + np.pi)
    if not (alpha * np.pi / 2 < phi < np.pi):
        raise SymbolError(f"phi must lie in (alpha*pi/2, pi), got {phi}")
    pts = contour_points(tau, theta, delta, n_samples)
    zc = np.concatenate(list(pts.values()))
    ang_c = np.abs(np.angle(beta_tau_pow(np.exp(-zc * tau), alpha, tau)))

    # exp(-z tau) is 2 pi / tau periodic in Im z, so radii up to a few periods suffice
    m = max(int(np.sqrt(n_samples)), 8)
    radii = np.geomspace(min(delta, 1.0) * 1e-2, 4 * np.pi / tau, 4 * m)
    psi = np.linspace(-np.pi / 2, np.pi / 2, m)
    zh = (radii[:, None] * np.exp(1j * psi[None, :])).ravel()
    xi_h = np.exp(-zh * tau)
    keep = np.abs(1.0 - xi_h) > 1e-14
    ang_h = np.abs(np.angle(beta_tau_pow(xi_h[keep], alpha, tau)))

    y = np.linspace(0.0, np.pi / tau, n_samples + 1)[1:]
    y = y[np.abs(1.0 - np.exp(-1j * y * tau)) > 1e-14]
    ang_i = np.abs(np.angle(beta_tau_pow(np.exp(-1j * y * tau), alpha, tau)))
    return SectorReport(float(alpha), float(tau), float(theta), float(delta), float(phi),
                        float(ang_c.max()), float(ang_h.max()), float(ang_i.max()))


def scalar_kernel(w_pow, w, lam):
    """K_lam(w) = -1 / (w (w**alpha - lam)), given w**alpha precomputed."""
    denom = w * (w_pow - lam)
    if np.any(denom == 0):
        raise SymbolError("kernel pole hit: w**alpha equals lambda")
    return -1.0 / denom


def scalar_kernel_error(z, lam, alpha, tau, correction=mu):
    """|mu(e^{-z tau}) K_lam(beta_tau(e^{-z tau})) - K_lam(z)|.

    ``lam`` is a nonpositive real standing in for an eigenvalue of the
    discrete Laplacian. Vectorized over ``z``.
    """
    if np.any(np.asarray(lam) > 0):
        raise ValueError("lambda must be nonpositive")
    z = np.asarray(z, dtype=complex)
    xi = np.exp(-z * tau)
    b = beta_tau(xi, alpha, tau)
    discrete = correction(xi, alpha) * scalar_kernel(beta_tau_pow(xi, alpha, tau), b, lam)
    continuous = scalar_kernel(z**alpha, z, lam)
    out = np.abs(discrete - continuous)
    return float(out) if out.ndim == 0 else out
