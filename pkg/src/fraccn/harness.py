"""Convergence and error-decay studies with CSV output.

A study fixes the mesh and measures the temporal error ``u_h(t) - U_h^N``
against a fine-step run on the same mesh, so the spatial error cancels.
"""
from __future__ import annotations

import io
import math
import os
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .fem import FemSpace, GridFunction, build_interval_space, build_square_space, l2_norm
from .oracles import (PROBLEMS, MittagLefflerError, ProblemSpec, catalog, fine_step_reference,
                      initial_norm, initial_vector, manufactured_ex1a, mittag_leffler,
                      source_sampler)
from .stepper import VARIANTS, SchemeConfig, SteppingError, advance, advance_scalar

__all__ = [
    "StudySpec",
    "ErrorRow",
    "ErrorTable",
    "ReferenceCache",
    "CSV_HEADER",
    "build_space",
    "run_convergence_study",
    "run_time_decay_study",
    "run_scalar_study",
    "error_history",
    "estimate_rate",
    "mean_tail_rate",
    "fit_decay_exponent",
    "emit_csv",
    "format_csv",
]

CSV_HEADER = "alpha,N,tau,l2_error,normalized_error,rate"

# failures a study row absorbs instead of aborting the table
_NUMERICAL_ERRORS = (SteppingError, MittagLefflerError, ArithmeticError, np.linalg.LinAlgError)


def build_space(dimension: int, M: int) -> FemSpace:
    return build_interval_space(M) if dimension == 1 else build_square_space(M)


@dataclass(frozen=True)
class StudySpec:
    """One convergence table: every alpha against every N at a single time.

    ``problem`` is a catalog name; ex1a is rebuilt per alpha since its source
    depends on it. ``reference`` is "fine-step" (corrected2 at
    tau = t_eval / refinement on the same mesh) or "exact" (ex1a only).
    """

    problem: str
    alphas: tuple
    n_list: tuple
    t_eval: float = 1.0
    space_M: int = 64
    variant: str = "corrected2"
    reference: str = "fine-step"
    refinement: int = 1000
    beta: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))
        if self.problem not in PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r}; choose from {PROBLEMS}")
        if not self.alphas:
            raise ValueError("need at least one alpha")
        bad = [a for a in self.alphas if not 0.0 < a <= 1.0]
        if bad:
            raise ValueError(f"alpha must lie in (0, 1], got {bad}")
        if not self.n_list or any(n < 1 for n in self.n_list):
            raise ValueError("step counts must be positive")
        if any(b <= a for a, b in zip(self.n_list, self.n_list[1:])):
            raise ValueError(f"N list must be strictly increasing, got {self.n_list}")
        if not self.t_eval > 0:
            raise ValueError("t_eval must be positive")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if self.reference not in ("fine-step", "exact"):
            raise ValueError("reference must be 'fine-step' or 'exact'")
        if self.reference == "exact" and self.problem != "ex1a":
            raise ValueError("only ex1a has a closed-form solution")
        if self.refinement < 2:
            raise ValueError("refinement must be at least 2")
        if self.space_M < 2 or (self.dimension == 2 and self.space_M % 2):
            raise ValueError(f"mesh M={self.space_M} invalid: need M >= 2, even in 2D")
        # validates alpha / beta constraints up front
        for a in self.alphas:
            self.problem_for(a)

    def problem_for(self, alpha: float) -> ProblemSpec:
        return catalog(self.problem, alpha=alpha, beta=self.beta)

    @property
    def dimension(self) -> int:
        return 1 if self.problem.startswith("ex1") else 2


@dataclass
class ErrorRow:
    alpha: float
    N: int
    tau: float
    l2_error: float
    normalized_error: float
    rate: Optional[float] = None
    block: str = ""
    failure: Optional[str] = None

    @property
    def t(self) -> float:
        return self.N * self.tau


@dataclass
class ErrorTable:
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def blocks(self) -> list:
        """Block labels in first-appearance order."""
        seen = []
        for r in self.rows:
            if r.block not in seen:
                seen.append(r.block)
        return seen

    def block(self, label: str) -> list:
        return [r for r in self.rows if r.block == label]

    def select(self, **match) -> list:
        return [r for r in self.rows if all(math.isclose(getattr(r, k), v) if isinstance(v, float)
                                            else getattr(r, k) == v for k, v in match.items())]

    def mean_rate(self, label: Optional[str] = None, last: int = 3) -> float:
        """Mean of the last ``last`` rates of a block (the only block if None)."""
        labels = self.blocks()
        if label is None:
            if len(labels) != 1:
                raise ValueError(f"table has {len(labels)} blocks; name one")
            label = labels[0]
        return mean_tail_rate([r.rate for r in self.block(label)], last)

    @classmethod
    def concat(cls, tables: Sequence["ErrorTable"], metadata: Optional[dict] = None) -> "ErrorTable":
        out = cls(metadata=dict(metadata or {}))
        for i, t in enumerate(tables):
            out.rows.extend(t.rows)
            for k, v in t.metadata.items():
                out.metadata.setdefault(k if len(tables) == 1 else f"{k}[{i}]", v)
        return out


def estimate_rate(errors: Iterable) -> list:
    """log2 ratios of consecutive errors from (N, e) pairs with N doubling.

    The first entry is None; a ratio involving a zero or non-finite error is
    None as well.
    """
    pairs = list(errors)
    rates = [None]
    for (n0, e0), (n1, e1) in zip(pairs, pairs[1:]):
        if n1 != 2 * n0:
            raise ValueError(f"N must double between rows, got {n0} -> {n1}")
        ok = all(np.isfinite(e) and e > 0 for e in (e0, e1))
        rates.append(math.log2(e0 / e1) if ok else None)
    return rates


def mean_tail_rate(rates: Sequence, last: int = 3) -> float:
    vals = [r for r in rates if r is not None]
    if len(vals) < last:
        return float("nan")
    return float(np.mean(vals[-last:]))


def fit_decay_exponent(ts: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(t) over all points."""
    ts, errors = np.asarray(ts, float), np.asarray(errors, float)
    keep = np.isfinite(errors) & (errors > 0)
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(ts[keep]), np.log(errors[keep]), 1)[0])


class ReferenceCache:
    """Fine-step references keyed by (problem label, alpha, t, space id)."""

    def __init__(self, refinement: int = 1000):
        self.refinement = refinement
        self.computations = 0
        self._store = {}

    def get(self, space: FemSpace, problem: ProblemSpec, alpha: float, t: float) -> GridFunction:
        key = (problem.label, float(alpha), float(t), id(space))
        if key not in self._store:
            self.computations += 1
            self._store[key] = (space, fine_step_reference(space, problem, t, alpha,
                                                           self.refinement).payload)
        return self._store[key][1]


def _block_label(problem: ProblemSpec, alpha: float, t: float, variant: str) -> str:
    return f"{problem.label} alpha={alpha:g} t={t:g} {variant}"


def _error_row(space, problem, ref, alpha, N, t, variant, block, norm_v):
    config = SchemeConfig.uniform(alpha, t, N, variant)
    try:
        traj = advance(space, initial_vector(space, problem), source_sampler(space, problem), config)
        err = l2_norm(ref - traj.grid_function(N))
    except _NUMERICAL_ERRORS as exc:
        return ErrorRow(alpha, N, config.tau, float("nan"), float("nan"), None, block, str(exc))
    normalized = err / norm_v if norm_v > 0 else err
    return ErrorRow(alpha, N, config.tau, err, normalized, None, block)


def _attach_rates(rows):
    for r, rate in zip(rows, estimate_rate([(r.N, r.normalized_error) for r in rows])):
        r.rate = rate


def _timestamp():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def run_convergence_study(spec: StudySpec, space: Optional[FemSpace] = None,
                          cache: Optional[ReferenceCache] = None) -> ErrorTable:
    """Errors at t_eval for every (alpha, N); one block per alpha.

    The error is normalized by ||v|| when v != 0 and left raw otherwise.
    """
    space = space or build_space(spec.dimension, spec.space_M)
    if space.dimension != spec.dimension:
        raise ValueError("space dimension does not match the problem")
    cache = cache or ReferenceCache(spec.refinement)
    before = cache.computations
    table = ErrorTable(metadata={"study": "convergence", **_spec_echo(spec), "space_M": space.subdivisions})
    for alpha in spec.alphas:
        problem = spec.problem_for(alpha)
        block = _block_label(problem, alpha, spec.t_eval, spec.variant)
        try:
            ref = (manufactured_ex1a(space, spec.t_eval) if spec.reference == "exact"
                   else cache.get(space, problem, alpha, spec.t_eval))
        except _NUMERICAL_ERRORS as exc:
            for N in spec.n_list:
                table.rows.append(ErrorRow(alpha, N, spec.t_eval / N, float("nan"), float("nan"),
                                           None, block, f"reference failed: {exc}"))
            continue
        norm_v = initial_norm(space, problem)
        rows = [_error_row(space, problem, ref, alpha, N, spec.t_eval, spec.variant, block, norm_v)
                for N in spec.n_list]
        _attach_rates(rows)
        table.rows.extend(rows)
    table.metadata["reference_computations"] = cache.computations - before
    table.metadata["generated"] = _timestamp()
    return table


def _spec_echo(spec: StudySpec) -> dict:
    echo = asdict(spec)
    echo["alphas"] = " ".join(f"{a:g}" for a in spec.alphas)
    echo["n_list"] = " ".join(str(n) for n in spec.n_list)
    return {k: v for k, v in echo.items() if v is not None}


def run_time_decay_study(problem: str, alpha: float, n_fixed: int, t_list: Sequence[float],
                         space_M: int = 64, variant: str = "corrected2", refinement: int = 1000,
                         beta: Optional[float] = None, space: Optional[FemSpace] = None) -> ErrorTable:
    """Error at a fixed step count N for each t (so tau = t / N shrinks with t).

    The fitted exponent of error ~ t^p goes to ``metadata["fitted_exponent"]``.
    """
    t_list = [float(t) for t in t_list]
    if any(b >= a for a, b in zip(t_list, t_list[1:])):
        raise ValueError("t list must be strictly decreasing")
    spec = StudySpec(problem, (alpha,), (n_fixed,), t_list[0], space_M, variant,
                     refinement=refinement, beta=beta)
    space = space or build_space(spec.dimension, space_M)
    prob = spec.problem_for(alpha)
    cache = ReferenceCache(refinement)
    norm_v = initial_norm(space, prob)
    block = f"{prob.label} alpha={alpha:g} N={n_fixed} {variant}"
    table = ErrorTable(metadata={"study": "time-decay", "problem": problem, "alpha": alpha,
                                 "N": n_fixed, "t_list": " ".join(f"{t:g}" for t in t_list),
                                 "space_M": space.subdivisions, "variant": variant,
                                 "refinement": refinement})
    for t in t_list:
        try:
            ref = cache.get(space, prob, alpha, t)
        except _NUMERICAL_ERRORS as exc:
            table.rows.append(ErrorRow(alpha, n_fixed, t / n_fixed, float("nan"), float("nan"),
                                       None, block, f"reference failed: {exc}"))
            continue
        table.rows.append(_error_row(space, prob, ref, alpha, n_fixed, t, variant, block, norm_v))
    table.metadata["fitted_exponent"] = fit_decay_exponent(
        [r.t for r in table.rows], [r.normalized_error for r in table.rows])
    table.metadata["generated"] = _timestamp()
    return table


def run_scalar_study(lam: float, y0: float, alphas: Sequence[float], n_list: Sequence[int],
                     t_eval: float = 1.0, variant: str = "corrected2",
                     source: Optional[Callable[[float], float]] = None,
                     exact: Optional[Callable[[float, float], float]] = None) -> ErrorTable:
    """Scalar D^a y + lam y = f convergence against a closed-form solution.

    With ``source`` None the exact value is y0 E_a(-lam t^a); otherwise
    ``exact(alpha, t)`` must be given.
    """
    if source is not None and exact is None:
        raise ValueError("a source term needs an exact solution")
    table = ErrorTable(metadata={"study": "scalar", "lambda": lam, "y0": y0, "t_eval": t_eval,
                                 "variant": variant})
    for alpha in alphas:
        block = f"scalar lambda={lam:g} alpha={alpha:g} t={t_eval:g} {variant}"
        try:
            target = (y0 * float(mittag_leffler(alpha, -lam * t_eval**alpha)) if exact is None
                      else float(exact(alpha, t_eval)))
        except _NUMERICAL_ERRORS as exc:
            table.rows.extend(ErrorRow(alpha, N, t_eval / N, float("nan"), float("nan"), None, block,
                                       f"reference failed: {exc}") for N in n_list)
            continue
        rows = []
        for N in n_list:
            config = SchemeConfig.uniform(alpha, t_eval, N, variant)
            try:
                err = abs(float(advance_scalar(lam, y0, source, config).final[0]) - target)
            except _NUMERICAL_ERRORS as exc:
                rows.append(ErrorRow(alpha, N, config.tau, float("nan"), float("nan"), None, block, str(exc)))
                continue
            normalized = err / abs(y0) if y0 != 0 else err
            rows.append(ErrorRow(alpha, N, config.tau, err, normalized, None, block))
        _attach_rates(rows)
        table.rows.extend(rows)
    table.metadata["generated"] = _timestamp()
    return table


def error_history(problem: str, alpha: float, final_time: float, n_steps: int,
                  space_M: int = 16, variants: Sequence[str] = ("uncorrected", "corrected2"),
                  refinement: int = 16, beta: Optional[float] = None) -> dict:
    """Error at every t_n of a single run, against one fine run with
    tau_ref = tau / refinement sampled at the coarse times.

    Returns {"t": times, variant: errors, ...} with errors normalized as in
    the convergence tables.
    """
    spec = StudySpec(problem, (alpha,), (n_steps,), final_time, space_M, refinement=refinement, beta=beta)
    space = build_space(spec.dimension, space_M)
    prob = spec.problem_for(alpha)
    v = initial_vector(space, prob)
    source = source_sampler(space, prob)
    norm_v = initial_norm(space, prob) or 1.0
    fine = advance(space, v, source, SchemeConfig.uniform(alpha, final_time, n_steps * refinement))
    ref_states = fine.states[::refinement]
    out = {"t": SchemeConfig.uniform(alpha, final_time, n_steps).times[1:]}
    for variant in variants:
        traj = advance(space, v, source, SchemeConfig.uniform(alpha, final_time, n_steps, variant))
        diff = traj.states - ref_states
        errs = np.sqrt(np.maximum(np.einsum("ij,ij->i", diff, (space.mass @ diff.T).T), 0.0))
        out[variant] = errs[1:] / norm_v
    return out


def _fmt(x) -> str:
    if x is None:
        return ""
    return format(float(x), ".12g")


def format_csv(table: ErrorTable) -> str:
    """CSV text: ``#`` metadata lines, the header, then rows grouped under
    ``# block:`` comments. Only the ``generated`` line varies between runs."""
    buf = io.StringIO()
    for key in sorted(table.metadata):
        value = table.metadata[key]
        text = _fmt(value) if isinstance(value, float) else str(value)
        buf.write(f"# {key}: {text}\n")
    buf.write(CSV_HEADER + "\n")
    for label in table.blocks():
        if label:
            buf.write(f"# block: {label}\n")
        for r in table.block(label):
            if r.failure:
                buf.write(f"# failed: alpha={r.alpha:g} N={r.N}: {r.failure}\n")
            buf.write(",".join([_fmt(r.alpha), str(r.N), _fmt(r.tau), _fmt(r.l2_error),
                                _fmt(r.normalized_error), _fmt(r.rate)]) + "\n")
    return buf.getvalue()


def emit_csv(table: ErrorTable, destination) -> None:
    """Write to a path, or to an open text stream."""
    text = format_csv(table)
    if hasattr(destination, "write"):
        destination.write(text)
        return
    directory = os.path.dirname(os.fspath(destination))
    if directory and not os.path.isdir(directory):
        raise OSError(f"directory {directory!r} does not exist")
    with open(destination, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
