import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fraccn.cq_symbols import be_cq_weights
from fraccn.fem import GridFunction, build_interval_space, build_square_space, l2_norm, load_vector
from fraccn.stepper import (CORRECTION_WEIGHTS, VARIANTS, SchemeConfig, SourceSampler, SteppingError,
                            advance, advance_scalar, correction_weights, history_convolution)


def random_spd(n, rng):
    q = rng.standard_normal((n, n))
    return q @ q.T + n * np.eye(n)


def space_with(space, mass, stiff):
    import scipy.sparse as sp
    return dataclasses.replace(space, mass=sp.csr_matrix(mass), stiffness=sp.csr_matrix(stiff))


def step_residuals(space, traj, source):
    """Residual of the displayed step equations, one per step.

    corrected variants add kappa_n (A c_v - G^0) terms on the first steps, with
    kappa from the displayed schemes (not from the stepper's table).
    """
    cfg = traj.config
    a, tau, N = cfg.alpha, cfg.tau, cfg.n_steps
    M, A = space.mass.toarray(), space.stiffness.toarray()
    b = be_cq_weights(a, N).weights
    c = traj.states
    w = traj.increments
    G = np.array([source(n * tau) for n in range(N + 1)])
    cv = c[0]
    extra = {
        "uncorrected": {},
        "corrected2": {1: 0.5 - a / 4, 2: a / 4},
        "corrected3": {1: 1 - a / 2, 2: 3 * a / 4 - 0.5, 3: -a / 4},
    }[cfg.variant]
    res = []
    for n in range(1, N + 1):
        lhs = tau ** (-a) * M @ sum(b[n - j] * w[j] for j in range(1, n + 1))
        lhs = lhs + (1 - a / 2) * A @ c[n]
        rhs = (1 - a / 2) * G[n]
        if cfg.variant == "uncorrected" or n >= 2:
            lhs = lhs + (a / 2) * A @ c[n - 1]
            rhs = rhs + (a / 2) * G[n - 1]
        if n in extra:
            lhs = lhs + extra[n] * A @ cv
            rhs = rhs + extra[n] * G[0]
        res.append(np.max(np.abs(lhs - rhs)) / max(1.0, np.max(np.abs(rhs))))
    return np.array(res)


def chi_source(space):
    load = load_vector(space, lambda x, y: (x <= 0.5) + 0.0 * y) if space.dimension == 2 else \
        load_vector(space, lambda x: (x <= 0.5) + 0.0)
    return SourceSampler(lambda t: (1.0 + t**1.5) * load, space.interior_node_count)


@pytest.mark.parametrize("variant", VARIANTS)
def test_trajectory_satisfies_displayed_equations(variant):
    s = build_interval_space(10)
    rng = np.random.default_rng(3)
    v = GridFunction(s, rng.standard_normal(9))
    src = chi_source(s)
    traj = advance(s, v, src, SchemeConfig(0.6, 0.05, 8, variant))
    assert np.all(step_residuals(s, traj, src) < 1e-10)


def test_corrections_only_alter_first_steps():
    # the uncorrected equations hold from step 3 (corrected2) / 4 (corrected3) on
    s = build_interval_space(10)
    v = GridFunction(s, np.random.default_rng(4).standard_normal(9))
    src = chi_source(s)
    for variant, horizon in (("corrected2", 2), ("corrected3", 3)):
        traj = advance(s, v, src, SchemeConfig(0.4, 0.05, 8, variant))
        plain = dataclasses.replace(traj, config=dataclasses.replace(traj.config, variant="uncorrected"))
        res = step_residuals(s, plain, src)
        assert np.all(res[horizon:] < 1e-10)
        assert np.all(res[:horizon] > 1e-6)


def test_variants_coincide_without_correction_data():
    # A v_h = 0 (v = 0) and F^0 = 0: every variant is the same scheme
    s = build_square_space(8)
    load = load_vector(s, lambda x, y: (x <= 0.5) + 0.0 * y)
    src = SourceSampler.separable(load, lambda t: t**0.3)
    runs = [advance(s, s.zeros(), src, SchemeConfig(0.5, 0.1, 10, v)).states for v in VARIANTS]
    for other in runs[1:]:
        np.testing.assert_allclose(other, runs[0], rtol=0, atol=1e-15)


def test_correction_weights_table():
    a = 0.3
    np.testing.assert_allclose(correction_weights("uncorrected", a), [a / 2])
    np.testing.assert_allclose(correction_weights("corrected2", a), [0.5 - a / 4, a / 4])
    np.testing.assert_allclose(correction_weights("corrected3", a), [1 - a / 2, 3 * a / 4 - 0.5, -a / 4])
    with pytest.raises(ValueError):
        correction_weights("bdf2", a)
    assert set(CORRECTION_WEIGHTS) == set(VARIANTS)


@pytest.mark.parametrize("variant,poly", [
    ("corrected2", lambda x: 3 * x - x**2),
    ("corrected3", lambda x: 4 * x - 3 * x**2 + x**3),
])
def test_correction_generating_function(variant, poly):
    # (1 - x)[x/(1 - x) - (a/2) x + sum kappa_n x^n] = p(x) (1 - a/2 + a/2 x) / 2
    for a in (0.2, 0.5, 0.9):
        kappa = correction_weights(variant, a)
        for x in np.linspace(-0.9, 0.9, 7):
            lhs = (1 - x) * (x / (1 - x) - a / 2 * x + sum(k * x ** (n + 1) for n, k in enumerate(kappa)))
            rhs = poly(x) * (1 - a / 2 + a / 2 * x) / 2
            assert lhs == pytest.approx(rhs, abs=1e-14)


@pytest.mark.parametrize("variant", VARIANTS)
def test_zero_is_fixed_point(variant):
    s = build_square_space(4)
    traj = advance(s, s.zeros(), SourceSampler.zero(9), SchemeConfig(0.5, 0.1, 5, variant))
    assert np.all(traj.states == 0)


def classical_cn(M, A, c0, G, tau, N):
    lhs = M / tau + 0.5 * A
    out = [c0]
    for n in range(1, N + 1):
        rhs = (M / tau - 0.5 * A) @ out[-1] + 0.5 * (G(n * tau) + G((n - 1) * tau))
        out.append(np.linalg.solve(lhs, rhs))
    return np.array(out)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), tau=st.floats(1e-3, 0.5))
def test_alpha_one_is_classical_crank_nicolson(seed, tau):
    rng = np.random.default_rng(seed)
    base = build_interval_space(7)
    M, A = random_spd(6, rng), random_spd(6, rng)
    s = space_with(base, M, A)
    c0 = rng.standard_normal(6)
    g = rng.standard_normal(6)
    G = lambda t: np.cos(3 * t) * g
    traj = advance(s, GridFunction(s, c0), SourceSampler(G, 6), SchemeConfig(1.0, tau, 12, "uncorrected"))
    ref = classical_cn(M, A, c0, G, tau, 12)
    scale = max(1.0, np.max(np.abs(ref)))
    assert np.max(np.abs(traj.states - ref)) <= 1e-12 * scale


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), variant=st.sampled_from(VARIANTS),
       alpha=st.floats(0.05, 1.0))
def test_linearity(seed, variant, alpha):
    rng = np.random.default_rng(seed)
    s = build_interval_space(12)
    n = s.interior_node_count
    v1, v2 = rng.standard_normal(n), rng.standard_normal(n)
    g1, g2 = rng.standard_normal(n), rng.standard_normal(n)
    f1 = SourceSampler(lambda t: (1 + t) * g1, n)
    f2 = SourceSampler(lambda t: np.sqrt(t) * g2, n)
    f12 = SourceSampler(lambda t: (1 + t) * g1 + np.sqrt(t) * g2, n)
    cfg = SchemeConfig(alpha, 0.05, 10, variant)
    u1 = advance(s, GridFunction(s, v1), f1, cfg).states
    u2 = advance(s, GridFunction(s, v2), f2, cfg).states
    u12 = advance(s, GridFunction(s, v1 + v2), f12, cfg).states
    np.testing.assert_allclose(u12, u1 + u2, atol=1e-10 * max(1.0, np.max(np.abs(u12))))


@pytest.mark.parametrize("variant", VARIANTS)
def test_unconditional_stability(variant):
    rng = np.random.default_rng(11)
    for s in (build_interval_space(64), build_square_space(16)):
        v = GridFunction(s, rng.standard_normal(s.interior_node_count))
        n0 = l2_norm(v)
        zero = SourceSampler.zero(s.interior_node_count)
        for alpha in (0.2, 0.5, 0.9):
            for tau in s.h * np.geomspace(1e-2, 1e2, 5):  # tau/h over 4 orders
                st_ = advance(s, v, zero, SchemeConfig(alpha, tau, 40, variant)).states
                norms = np.sqrt(np.einsum("ij,ij->i", st_, (s.mass @ st_.T).T))
                assert norms.max() <= 1.01 * n0


def test_initial_state_is_exact_copy():
    s = build_interval_space(8)
    c = np.random.default_rng(2).standard_normal(7)
    traj = advance(s, GridFunction(s, c), SourceSampler.zero(7), SchemeConfig(0.5, 0.1, 3))
    assert np.array_equal(traj.states[0], c)
    assert np.array_equal(traj.grid_function(0).coeffs, c)


def test_advance_rejects_foreign_initial_vector():
    s1, s2 = build_interval_space(8), build_interval_space(8)
    with pytest.raises(ValueError):
        advance(s1, s2.zeros(), SourceSampler.zero(7), SchemeConfig(0.5, 0.1, 3))


def test_non_finite_state_reported():
    s = build_interval_space(4)
    bad = SourceSampler(lambda t: np.full(3, np.nan if t > 0.15 else 0.0), 3)
    with pytest.raises(SteppingError, match="step 2"):
        advance(s, s.zeros(), bad, SchemeConfig(0.5, 0.1, 4))


def test_scheme_config():
    cfg = SchemeConfig.uniform(0.5, 1.0, 30)
    assert abs(cfg.final_time - 1.0) <= 1e-12
    assert cfg.variant == "corrected2"
    assert len(cfg.times) == 31
    for kwargs in (dict(alpha=0.0), dict(alpha=1.2), dict(tau=0.0), dict(n_steps=0), dict(variant="x")):
        base = dict(alpha=0.5, tau=0.1, n_steps=3, variant="corrected2")
        base.update(kwargs)
        with pytest.raises(ValueError):
            SchemeConfig(**base)


def test_source_sampler_deterministic():
    s = build_square_space(4)
    src = SourceSampler.from_field(s, lambda x, y, t: np.sin(t) * x * y)
    assert np.array_equal(src(0.3), src(0.3))
    assert SourceSampler.zero(9).is_zero
    assert not src.is_zero


def test_history_convolution_examples():
    w = be_cq_weights(1.0, 3)
    hist = np.array([[0.0], [1.0], [1.0]])
    assert np.all(history_convolution(w, np.eye(1), hist, 1, 0.1) == 0)
    assert history_convolution(w, np.eye(1), hist, 3, 0.1)[0] == pytest.approx(-1 / 0.1)
    w = be_cq_weights(0.5, 2)
    assert history_convolution(w, np.eye(1), np.array([[0.0], [1.0]]), 2, 1.0)[0] == pytest.approx(-0.5)


def test_history_convolution_matches_loop():
    rng = np.random.default_rng(5)
    w = be_cq_weights(0.37, 20)
    M = random_spd(4, rng)
    hist = rng.standard_normal((20, 4))
    hist[0] = 0
    for n in (2, 7, 20):
        loop = 0.2 ** (-0.37) * M @ sum(w[n - j] * hist[j] for j in range(1, n))
        np.testing.assert_allclose(history_convolution(w, M, hist, n, 0.2), loop, rtol=1e-12)


@pytest.mark.parametrize("variant", VARIANTS)
def test_scalar_constant_solution(variant):
    traj = advance_scalar(0.0, 1.0, None, SchemeConfig(0.5, 0.1, 20, variant))
    np.testing.assert_array_equal(traj.scalar_values(), 1.0)


def test_scalar_rejects_negative_lambda():
    with pytest.raises(ValueError):
        advance_scalar(-1.0, 1.0, None, SchemeConfig(0.5, 0.1, 2))


def test_scalar_ode_power_rate():
    # D^0.5 y = t^0.5, y(0) = 0: y(1) = Gamma(1.5) / Gamma(2)
    exact = math.gamma(1.5) / math.gamma(2.0)
    errs = [abs(advance_scalar(0.0, 0.0, lambda t: t**0.5, SchemeConfig.uniform(0.5, 1.0, N)).final[0] - exact)
            for N in (10, 20, 40, 80, 160, 320)]
    rates = np.log2(np.array(errs[:-1]) / errs[1:])
    assert abs(np.mean(rates[-3:]) - 1.5) <= 0.1


def test_scalar_matches_matrix_mode():
    s = build_interval_space(2)  # one unknown: mass 1/3, stiffness 4
    lam = 4.0 / (1.0 / 3.0)
    v = GridFunction(s, np.array([0.7]))
    src = SourceSampler(lambda t: np.array([np.cos(t) / 3.0]), 1)
    for variant in VARIANTS:
        cfg = SchemeConfig(0.45, 0.05, 15, variant)
        mat = advance(s, v, src, cfg).scalar_values()
        sca = advance_scalar(lam, 0.7, np.cos, cfg).scalar_values()
        np.testing.assert_allclose(mat, sca, rtol=1e-12)


def test_three_step_correction_rates_settle_to_two():
    # pre-asymptotic rates above 2 decrease monotonically toward 2 on a long ladder
    from fraccn.harness import run_scalar_study
    rates = [r.rate for r in run_scalar_study(10.0, 1.0, (0.5,), (40, 80, 160, 320, 640, 1280),
                                              variant="corrected3").rows[1:]]
    assert all(b < a for a, b in zip(rates, rates[1:]))
    assert 2.0 <= rates[-1] <= 2.15
