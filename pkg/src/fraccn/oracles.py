"""Reference solutions and the catalog of test problems.

Every catalog source is a finite sum of separable terms g(t) s(x), which lets
the load vectors be assembled once per spatial factor.
"""
from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass, field
from typing import Callable, Optional

import mpmath
import numpy as np
from scipy import integrate

from .fem import (FemSpace, GridFunction, field_l2_norm, interpolate, l2_project,
                  load_vector, ritz_project)
from .stepper import SchemeConfig, SourceSampler, advance, advance_scalar

__all__ = [
    "PROBLEMS",
    "ProblemSpec",
    "ReferenceSolution",
    "MittagLefflerError",
    "catalog",
    "initial_vector",
    "source_sampler",
    "initial_norm",
    "manufactured_ex1a",
    "mittag_leffler",
    "ode_power_solution",
    "fine_step_reference",
    "scalar_fine_step_reference",
    "mittag_leffler_reference",
]

PROBLEMS = ("ex1a", "ex1b", "sq_a", "sq_b", "sq_c", "sq_d")


@dataclass(frozen=True)
class ProblemSpec:
    """One test problem: D^a u - Laplace u = f, u(0) = v, zero boundary data.

    ``source_terms`` is a tuple of (spatial, temporal) pairs with
    f(x, t) = sum temporal(t) * spatial(x). ``projection`` says how the
    initial vector is built: "ritz", "l2", or "none" for v = 0.
    """

    name: str
    dimension: int
    initial: Optional[Callable] = None
    initial_grad: Optional[Callable] = None
    projection: str = "none"
    source_terms: tuple = ()
    regularity: str = "smooth"
    exact: Optional[Callable] = None
    params: dict = field(default_factory=dict)

    @property
    def label(self) -> str:
        extra = ",".join(f"{k}={v:g}" for k, v in sorted(self.params.items()))
        return f"{self.name}({extra})" if extra else self.name

    @property
    def homogeneous(self) -> bool:
        return not self.source_terms

    @property
    def zero_initial(self) -> bool:
        return self.initial is None

    def source_at_zero(self, *x):
        """f(., 0) evaluated at the given points."""
        out = 0.0
        for spatial, temporal in self.source_terms:
            out = out + temporal(0.0) * spatial(*x)
        return out * np.ones(np.shape(x[0]))


def _chi_left(x, y):
    """Indicator of (0, 1/2] x (0, 1)."""
    return (np.asarray(x) <= 0.5).astype(float) + 0.0 * np.asarray(y)


def catalog(name: str, alpha: float | None = None, beta: float | None = None) -> ProblemSpec:
    """ex1a needs alpha (its source depends on it); sq_d needs beta in (0, 1)."""
    if name == "ex1a":
        if alpha is None:
            raise ValueError("ex1a needs alpha: its source term depends on it")
        c = 2.0 / math.gamma(3.0 - alpha)
        return ProblemSpec(
            "ex1a", 1,
            source_terms=(
                (lambda x: x * (1 - x), lambda t, c=c, a=alpha: c * t ** (2.0 - a)),
                (lambda x: np.ones_like(x), lambda t: 2.0 * t**2),
            ),
            regularity="smooth",
            exact=lambda x, t: t**2 * x * (1 - x),
            params={"alpha": alpha},
        )
    if name == "ex1b":
        return ProblemSpec("ex1b", 1, initial=lambda x: x * (1 - x),
                           initial_grad=lambda x: 1 - 2 * x, projection="ritz",
                           regularity="smooth")
    if name == "sq_a":
        return ProblemSpec(
            "sq_a", 2,
            initial=lambda x, y: x * y * (1 - x) * (1 - y),
            initial_grad=lambda x, y: ((1 - 2 * x) * y * (1 - y), (1 - 2 * y) * x * (1 - x)),
            projection="ritz", regularity="smooth")
    if name == "sq_b":
        return ProblemSpec("sq_b", 2, initial=_chi_left, projection="l2", regularity="nonsmooth")
    if name == "sq_c":
        return ProblemSpec("sq_c", 2, source_terms=((_chi_left, lambda t: 1.0 + t**1.5),),
                           regularity="inhomogeneous")
    if name == "sq_d":
        if beta is None or not (0.0 < beta < 1.0):
            raise ValueError(f"sq_d needs beta in (0, 1), got {beta}")
        return ProblemSpec("sq_d", 2, source_terms=((_chi_left, lambda t, b=beta: t**b),),
                           regularity="inhomogeneous", params={"beta": beta})
    raise ValueError(f"unknown problem {name!r}; choose from {PROBLEMS}")


def _check_dimension(space, problem):
    if space.dimension != problem.dimension:
        raise ValueError(f"problem {problem.name} is {problem.dimension}D, space is {space.dimension}D")


def initial_vector(space: FemSpace, problem: ProblemSpec) -> GridFunction:
    _check_dimension(space, problem)
    if problem.projection == "none" or problem.initial is None:
        return space.zeros()
    if problem.projection == "ritz":
        return ritz_project(space, problem.initial_grad)
    if problem.projection == "l2":
        return l2_project(space, problem.initial)
    raise ValueError(f"unknown projection {problem.projection!r}")


def source_sampler(space: FemSpace, problem: ProblemSpec) -> SourceSampler:
    _check_dimension(space, problem)
    n = space.interior_node_count
    if problem.homogeneous:
        return SourceSampler.zero(n)
    loads = [(load_vector(space, spatial), temporal) for spatial, temporal in problem.source_terms]

    def load(t):
        out = np.zeros(n)
        for vec, temporal in loads:
            out += temporal(t) * vec
        return out

    return SourceSampler(load, n)


def initial_norm(space: FemSpace, problem: ProblemSpec) -> float:
    """||v||_{L2} (0 for v = 0)."""
    if problem.initial is None:
        return 0.0
    return field_l2_norm(space, problem.initial)


def manufactured_ex1a(space: FemSpace, t: float) -> GridFunction:
    """Nodal interpolant of t^2 x (1 - x)."""
    if space.dimension != 1:
        raise ValueError("ex1a lives on the unit interval")
    return interpolate(space, lambda x: t**2 * x * (1 - x))


class MittagLefflerError(ArithmeticError):
    pass


SERIES_RADIUS = 5.0
# |z|**(1/alpha) bounds log(sum of |terms|); beyond this the series needs
# hundreds of digits and the integral branch takes over
SERIES_CANCELLATION_LIMIT = 300.0


def _small_rational(alpha, max_den=20):
    frac = Fraction(alpha).limit_denominator(max_den)
    return (frac.numerator, frac.denominator) if float(frac) == alpha else None


def _ml_series(alpha, z):
    x = abs(z)
    growth = x ** (1.0 / alpha) if x > 0 else 0.0
    dps = 25 + int(growth / math.log(10.0))
    rational = _small_rational(alpha)
    with mpmath.workdps(dps):
        a = mpmath.mpf(rational[0]) / rational[1] if rational else mpmath.mpf(alpha)
        zz = mpmath.mpf(z)
        tol = mpmath.mpf(10) ** (-(dps - 5))
        terms = []
        z_q = zz ** rational[1] if rational else None
        total = mpmath.mpf(0)
        power = mpmath.mpf(1)
        k = 0
        while True:
            if rational and k >= rational[1]:
                # 1/Gamma(a(k-q)+1+p) from 1/Gamma(a(k-q)+1)
                p_, q_ = rational
                base = a * (k - q_)
                denom = mpmath.mpf(1)
                for i in range(1, p_ + 1):
                    denom *= base + i
                term = terms[k - q_] * z_q / denom
            else:
                term = power * mpmath.rgamma(a * k + 1)
                power *= zz
            terms.append(term)
            total += term
            # terms start decaying once alpha k exceeds |z|^(1/alpha)
            if k * alpha > growth + 2 and abs(term) < tol * max(abs(total), tol):
                break
            k += 1
            if k > 10**6:
                raise MittagLefflerError("series did not converge")
        return float(total)


def _ml_integral(alpha, z):
    """E_a(-x) for 0 < a < 1 from the real-axis form of the Laplace inversion,

        E_a(-x) = (sin(a pi) / pi) int_0^inf exp(-u) u^(a-1) / (x D(u)) du,
        D(u) = s^(2a) + 2 cos(a pi) s^a + 1,  s = u / x^(1/a),

    with the u^(a-1) endpoint singularity handled by an algebraic weight.
    """
    x = -z
    t = x ** (1.0 / alpha)
    s, c = math.sin(alpha * math.pi), math.cos(alpha * math.pi)

    def smooth(u):
        q = (u / t) ** alpha
        return math.exp(-u) * s / (math.pi * x * (q * q + 2 * c * q + 1.0))

    u_split = min(1.0, 0.5 * t)
    u_max = 60.0  # the integrand carries exp(-u); the tail is below 1e-26
    v0, e0 = integrate.quad(smooth, 0.0, u_split, weight="alg", wvar=(alpha - 1.0, 0.0),
                            epsabs=0.0, epsrel=1e-13, limit=400)
    points = [t] if u_split < t < u_max else None
    v1, e1 = integrate.quad(lambda u: smooth(u) * u ** (alpha - 1.0), u_split, u_max,
                            points=points, epsabs=0.0, epsrel=1e-13, limit=400)
    err = e0 + e1
    if not err <= 1e-10:
        raise MittagLefflerError(f"quadrature error estimate {err:.2e} exceeds 1e-10")
    return v0 + v1


def _ml_scalar(alpha, z):
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    if z > 0:
        raise ValueError("only the nonpositive real axis is supported")
    if z == 0:
        return 1.0
    if alpha == 1.0:
        return math.exp(z)
    if abs(z) <= SERIES_RADIUS and abs(z) ** (1.0 / alpha) <= SERIES_CANCELLATION_LIMIT:
        return _ml_series(alpha, z)
    return _ml_integral(alpha, z)


def mittag_leffler(alpha: float, z):
    """E_alpha(z) = sum z^k / Gamma(alpha k + 1) for real z <= 0."""
    if np.ndim(z) == 0:
        return _ml_scalar(alpha, float(z))
    return np.vectorize(lambda zz: _ml_scalar(alpha, float(zz)))(z)


def ode_power_solution(alpha: float, beta: float, t):
    """Solution of D^alpha u = t^beta, u(0) = 0:
    Gamma(beta + 1) / Gamma(alpha + beta + 1) t^(alpha + beta)."""
    if beta <= -1:
        raise ValueError("beta must exceed -1")
    c = math.exp(math.lgamma(beta + 1) - math.lgamma(alpha + beta + 1))
    return c * np.asarray(t, dtype=float) ** (alpha + beta)


@dataclass
class ReferenceSolution:
    kind: str
    payload: object
    tau_ref: Optional[float] = None
    variant: Optional[str] = None


def fine_step_reference(space: FemSpace, problem: ProblemSpec, t: float, alpha: float,
                        refinement: int = 1000) -> ReferenceSolution:
    """Corrected scheme on the same space with tau_ref = t / refinement."""
    config = SchemeConfig.uniform(alpha, t, refinement, "corrected2")
    traj = advance(space, initial_vector(space, problem), source_sampler(space, problem), config)
    return ReferenceSolution("fine-step", traj.grid_function(refinement), config.tau, "corrected2")


def scalar_fine_step_reference(lam: float, y0: float, source, alpha: float, t: float,
                               refinement: int = 1000) -> ReferenceSolution:
    config = SchemeConfig.uniform(alpha, t, refinement, "corrected2")
    traj = advance_scalar(lam, y0, source, config)
    return ReferenceSolution("fine-step", float(traj.final[0]), config.tau, "corrected2")


def mittag_leffler_reference(lam: float, y0: float, alpha: float, t: float) -> ReferenceSolution:
    """y0 E_alpha(-lam t^alpha), the solution of D^a y + lam y = 0."""
    return ReferenceSolution("mittag-leffler-scalar", y0 * mittag_leffler(alpha, -lam * t**alpha))
