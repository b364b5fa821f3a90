"""Fractional Crank-Nicolson time stepping with optional initial corrections.

With ``w^n = c^n - c_v`` (c_v the coefficients of the initial vector), mass M
and stiffness A, step n solves

    tau^-a sum_{j=1}^n b_{n-j} M w^j + (1 - a/2) A c^n + (a/2) A c^{n-1}
        = (1 - a/2) G^n + (a/2) G^{n-1},

where the correction variants replace the (a/2)(A c^0 - G^0) contribution at
n = 1 by kappa_1 (A c_v - G^0) and add kappa_n (A c_v - G^0) for the next one
or two steps. The ``kappa`` table lives in :data:`CORRECTION_WEIGHTS`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .cq_symbols import CqWeights, be_cq_weights
from .fem import FemSpace, GridFunction

__all__ = [
    "VARIANTS",
    "CORRECTION_WEIGHTS",
    "SchemeConfig",
    "SourceSampler",
    "Trajectory",
    "SteppingError",
    "correction_weights",
    "history_convolution",
    "advance",
    "advance_scalar",
]

VARIANTS = ("uncorrected", "corrected2", "corrected3")

# kappa_n as functions of alpha, n = 1, 2, ...
CORRECTION_WEIGHTS: dict[str, tuple[Callable[[float], float], ...]] = {
    "uncorrected": (lambda a: a / 2,),
    "corrected2": (lambda a: 0.5 - a / 4, lambda a: a / 4),
    "corrected3": (lambda a: 1 - a / 2, lambda a: 3 * a / 4 - 0.5, lambda a: -a / 4),
}


class SteppingError(RuntimeError):
    pass


def correction_weights(variant: str, alpha: float) -> np.ndarray:
    """kappa_1, kappa_2, ... for the variant (trailing entries are zero)."""
    if variant not in CORRECTION_WEIGHTS:
        raise ValueError(f"unknown variant {variant!r}; choose from {VARIANTS}")
    return np.array([k(alpha) for k in CORRECTION_WEIGHTS[variant]])


@dataclass(frozen=True)
class SchemeConfig:
    alpha: float
    tau: float
    n_steps: int
    variant: str = "corrected2"

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.n_steps < 1:
            raise ValueError("need at least one step")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")

    @classmethod
    def uniform(cls, alpha, final_time, n_steps, variant="corrected2"):
        return cls(alpha, final_time / n_steps, n_steps, variant)

    @property
    def final_time(self) -> float:
        return self.n_steps * self.tau

    @property
    def times(self) -> np.ndarray:
        return self.tau * np.arange(self.n_steps + 1)


@dataclass
class SourceSampler:
    """Produces the load vector G(t) (entries (f(t), phi_i)).

    ``load`` is None for f = 0. Use :meth:`separable` when f(x, t) = g(t) s(x)
    so the spatial load is assembled once.
    """

    load: Optional[Callable[[float], np.ndarray]] = None
    size: int = 0

    @property
    def is_zero(self) -> bool:
        return self.load is None

    def __call__(self, t: float) -> np.ndarray:
        if self.load is None:
            return np.zeros(self.size)
        return np.asarray(self.load(t), dtype=float)

    @classmethod
    def zero(cls, size):
        return cls(None, size)

    @classmethod
    def separable(cls, spatial_load: np.ndarray, temporal: Callable[[float], float]):
        spatial_load = np.asarray(spatial_load, dtype=float)
        return cls(lambda t: temporal(t) * spatial_load, len(spatial_load))

    @classmethod
    def from_field(cls, space: FemSpace, f: Callable, degree: int = 2):
        """f(x, t) in 1D or f(x, y, t) in 2D."""
        from .fem import load_vector

        if space.dimension == 1:
            return cls(lambda t: load_vector(space, lambda x: f(x, t), degree), space.interior_node_count)
        return cls(lambda t: load_vector(space, lambda x, y: f(x, y, t), degree), space.interior_node_count)


@dataclass
class Trajectory:
    """U^0..U^N. ``increments`` holds w^n = U^n - U^0 row-wise."""

    space: Optional[FemSpace]
    initial: np.ndarray
    increments: np.ndarray = field(repr=False)
    config: SchemeConfig

    @property
    def states(self) -> np.ndarray:
        return self.increments + self.initial[None, :]

    def state(self, n: int) -> np.ndarray:
        return self.increments[n] + self.initial

    @property
    def final(self) -> np.ndarray:
        return self.state(self.config.n_steps)

    def grid_function(self, n: int) -> GridFunction:
        if self.space is None:
            raise TypeError("scalar trajectories have no FEM space")
        return GridFunction(self.space, self.state(n))

    def scalar_values(self) -> np.ndarray:
        return self.states[:, 0]


def history_convolution(weights: CqWeights, mass, w_history, n: int, tau: float) -> np.ndarray:
    """tau^-alpha sum_{j=1}^{n-1} b_{n-j} M w^j, the already-known part of step n.

    ``w_history`` is indexable so that ``w_history[j]`` is w^j; row 0 (w^0 = 0)
    is ignored.
    """
    w_history = np.asarray(w_history)
    if n <= 1:
        return np.zeros(w_history.shape[1:])
    b = weights.weights
    # a negative-stride operand drops numpy off the BLAS gemv path
    mixed = np.ascontiguousarray(b[n - 1:0:-1]) @ w_history[1:n]
    return tau ** (-weights.alpha) * (mass @ mixed)


def _march(mass, stiff, solve, c_v, source, config, size):
    a, tau, N = config.alpha, config.tau, config.n_steps
    weights = be_cq_weights(a, N)
    kappa = correction_weights(config.variant, a)

    W = np.zeros((N + 1, size))
    A_cv = stiff @ c_v
    G0 = source(0.0)
    correction = G0 - A_cv
    G_prev = G0
    for n in range(1, N + 1):
        Gn = source(n * tau)
        rhs = (1 - a / 2) * (Gn - A_cv)
        if n >= 2:
            c_prev = W[n - 1] + c_v
            rhs += (a / 2) * (G_prev - stiff @ c_prev)
            rhs -= history_convolution(weights, mass, W, n, tau)
        if n <= len(kappa):
            rhs += kappa[n - 1] * correction
        W[n] = solve(rhs)
        if not np.all(np.isfinite(W[n])):
            raise SteppingError(f"non-finite state at step {n}")
        G_prev = Gn
    return W


def advance(space: FemSpace, v_coeffs: GridFunction, source: SourceSampler,
            config: SchemeConfig) -> Trajectory:
    """Run the fully discrete scheme on ``space`` from U^0 = v_coeffs."""
    if v_coeffs.space is not space:
        raise ValueError("initial vector belongs to a different space")
    a = config.alpha
    system = (config.tau ** (-a)) * space.mass + (1 - a / 2) * space.stiffness
    try:
        lu = splu(sp.csc_matrix(system))
    except RuntimeError as exc:  # singular factor
        raise SteppingError(f"system factorization failed: {exc}") from exc
    c_v = np.asarray(v_coeffs.coeffs, dtype=float)
    W = _march(space.mass, space.stiffness, lu.solve, c_v, source, config, space.interior_node_count)
    return Trajectory(space, c_v.copy(), W, config)


def advance_scalar(lam: float, y0: float, source: Optional[Callable[[float], float]],
                   config: SchemeConfig) -> Trajectory:
    """Same step equations with M = 1, A = lam and G^n = f(t_n).

    Solves D^a y + lam y = f, y(0) = y0.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    a = config.alpha
    s = config.tau ** (-a) + (1 - a / 2) * lam
    one = np.eye(1)
    sampler = (SourceSampler.zero(1) if source is None
               else SourceSampler(lambda t: np.array([source(t)], dtype=float), 1))
    W = _march(one, lam * one, lambda r: r / s, np.array([float(y0)]), sampler, config, 1)
    return Trajectory(None, np.array([float(y0)]), W, config)
