import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from mbpp.exogenous import MultiImpulse, PiecewiseConstant, SinePlus
from mbpp.kernels import ExponentialKernel, PowerLawKernel
from mbpp.losses import (EndogenousPart, HawkesModel, bregman, discrete_kernel, gamma_constant,
                         hip_intensity, hip_loss, ic_ll, kl_divergence, pp_ll, self_excitation, sse)
from mbpp.mbpp_closed import MbppModel, interval_compensators

K = ExponentialKernel(0.6, 0.8)
counts = st.lists(st.integers(0, 50), min_size=1, max_size=20)


def test_no_events_constant_rate():
    s = PiecewiseConstant([0, 30], [1.5])
    assert pp_ll(HawkesModel(K, s, []), [], 30.0) == pytest.approx(45.0)


def test_two_event_hawkes_against_quadrature():
    s = PiecewiseConstant([0, 3], [0.7])
    events = np.array([1.0, 2.0])
    m = HawkesModel(K, s, events)
    lam = lambda t: 0.7 + sum(float(K(t - e)) for e in events)
    ref = -np.log(lam(1.0)) - np.log(lam(2.0)) + quad(lam, 0, 3, points=[1, 2])[0]
    assert pp_ll(m, events, 3.0, m.intensity_at_parents()) == pytest.approx(ref, abs=1e-6)
    assert pp_ll(m, events, 3.0) == pytest.approx(ref, abs=1e-6)


@pytest.mark.parametrize("kernel", [K, PowerLawKernel(0.4, 1.1, 0.5)], ids=["exp", "powerlaw"])
def test_self_excitation_against_pairwise_sum(kernel):
    t = np.sort(np.random.default_rng(0).uniform(0, 20, 300))
    t[10] = t[11]  # a tie: simultaneous events do not excite each other
    brute = np.array([kernel(ti - t[t < ti]).sum() for ti in t])
    np.testing.assert_allclose(self_excitation(kernel, t), brute, rtol=1e-10, atol=1e-14)


def test_events_on_atoms_take_no_log_term():
    s = MultiImpulse([1.0, 2.5])
    m = MbppModel(K, s)
    loss = pp_ll(m, [1.0, 2.5], 5.0)
    mass = float(m.compensator(5.0))
    assert loss == pytest.approx(mass)


def test_nonpositive_intensity_is_infeasible():
    s = PiecewiseConstant([0, 3], [0.0])
    assert pp_ll(HawkesModel(K, s, []), [1.0], 3.0) == np.inf


def test_ic_ll_examples():
    assert ic_ll([2.0], [0]) == pytest.approx(2.0)
    assert ic_ll([2.0, 3.0], [2, 3]) == pytest.approx(0.31786, abs=1e-5)
    assert ic_ll([2.0, 3.0], [2, 3]) == pytest.approx(5 - 2 * np.log(2) - 3 * np.log(3), rel=1e-15)


def test_ic_ll_floors_the_logarithm():
    assert np.isfinite(ic_ll([0.0, 1.0], [3, 1]))


def test_sse_and_bregman():
    assert sse([1, 2], [0, 0]) == 5
    assert bregman("sse", [1, 2], [0, 0]) == 5
    assert bregman("kl", [1.0, 2.0], [1.0, 2.0]) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError, match="unknown Bregman"):
        bregman("hinge", [1], [1])
    with pytest.raises(ValueError):
        kl_divergence([1.0], [0.0])


@given(x=st.lists(st.floats(0, 100), min_size=1, max_size=10))
def test_bregman_vanishes_on_the_diagonal(x):
    y = np.asarray(x) + 1e-3
    assert bregman("sse", y, y) == 0.0
    assert abs(bregman("kl", y, y)) < 1e-9


@settings(max_examples=200)
@given(c=counts, seed=st.integers(0, 2**32 - 1))
def test_ic_ll_is_kl_plus_count_constant(c, seed):
    c = np.asarray(c, dtype=float)
    xi = np.random.default_rng(seed).uniform(0.01, 60, c.size)
    assert ic_ll(xi, c) == pytest.approx(kl_divergence(c, xi) + gamma_constant(c), abs=1e-10)


@settings(max_examples=100)
@given(c=counts, seed=st.integers(0, 2**32 - 1))
def test_kl_is_nonnegative(c, seed):
    xi = np.random.default_rng(seed).uniform(0.01, 60, len(c))
    assert kl_divergence(c, xi) >= -1e-12


def test_gamma_constant_sign():
    # ic_ll minus KL has this value for every compensator
    c = np.array([2.0, 3.0, 0.0])
    assert gamma_constant(c) == pytest.approx(5 - 2 * np.log(2) - 3 * np.log(3))


def test_discrete_kernel_samples_the_kernel():
    d = discrete_kernel(K, 3)
    np.testing.assert_allclose(d, [0.0, *K(np.arange(1.0, 4.0))])


def test_hip_kappa_zero():
    s = np.array([3.0, 1.0, 4.0, 1.0])
    c = np.array([2.0, 2.0, 2.0])
    k0 = ExponentialKernel(0.0, 1.0)
    np.testing.assert_allclose(hip_intensity(k0, s), s)
    assert hip_loss(k0, s, c) == pytest.approx(((c - s[1:]) ** 2).sum())


def test_hip_intensity_against_explicit_recursion():
    s = np.random.default_rng(1).uniform(0, 5, 40)
    k = PowerLawKernel(0.4, 0.9, 1.2)
    phi = discrete_kernel(k, s.size)
    ref = np.zeros(s.size)
    for i in range(s.size):
        ref[i] = s[i] + sum(ref[i - tau] * phi[tau] for tau in range(1, i + 1))
    np.testing.assert_allclose(hip_intensity(k, s), ref, rtol=1e-13)


def test_hip_loss_needs_one_more_exogenous_day():
    with pytest.raises(ValueError):
        hip_loss(K, np.ones(3), np.ones(3))


def test_endogenous_part_zero_when_kappa_zero():
    s = MultiImpulse([1.0, 2.0])
    e = EndogenousPart(MbppModel(ExponentialKernel(0.0, 1.0), s))
    xi = interval_compensators(e, np.linspace(0, 5, 6))
    np.testing.assert_array_equal(xi, 0.0)
    assert ic_ll(xi, np.zeros(5)) == 0.0


def test_mean_field_hawkes_compensator_matches_quadrature():
    s = PiecewiseConstant([0, 2, 5], [1.0, 3.0])
    m = HawkesModel(K, s, [0.5, 3.0], mean_field=True)
    ref = quad(lambda t: float(m.intensity(t)), 0, 6, points=[0.5, 2, 3, 5], limit=200)[0]
    assert float(m.compensator(6.0)) == pytest.approx(ref, rel=1e-9)


def test_mean_field_needs_piecewise_constant():
    with pytest.raises(TypeError):
        HawkesModel(K, SinePlus(), [], mean_field=True)
