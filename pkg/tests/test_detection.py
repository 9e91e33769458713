import math

import numpy as np
import pytest

from ftn_covert.detection import (H0, H1, LinkState, build_detector, detector_from_load, error_probs_cf,
                                  error_probs_mc, sample_observation, sample_statistic, tail_probability,
                                  test_statistic)
from ftn_covert.isi import EigenSpectrum, build_isi_matrix, eigen_spectrum, nyquist_spectrum
from ftn_covert.pulse import PulseConfig
from ftn_covert.quadrature import QuadratureError


def _single(lam=1.0):
    return EigenSpectrum(values=np.array([lam]))


def _spec64(tau=0.8, alpha=0.3):
    return eigen_spectrum(build_isi_matrix(64, PulseConfig(alpha=alpha, tau=tau)), vectors=False)


def test_no_signal_detector_is_degenerate():
    det = build_detector(LinkState(), _spec64())
    assert np.all(det.alphas == 0) and np.all(det.gammas == 0) and det.theta == 0
    rng = np.random.default_rng(0)
    assert sample_statistic(det, H0, rng) == 0.0
    assert error_probs_mc(det, 1000, seed=1)[:2] == (1.0, 0.0)
    assert error_probs_cf(det) == (1.0, 0.0)


def test_scalar_detector_values():
    det = detector_from_load(1.0, _single())
    assert det.alphas[0] == pytest.approx(0.25)
    assert det.gammas[0] == pytest.approx(0.5)
    assert det.theta == pytest.approx(math.log(2))
    assert det.log_beta1 == pytest.approx(-math.log(2))


def test_nyquist_threshold():
    x = 0.37
    det = detector_from_load(x, nyquist_spectrum(25))
    assert det.theta == pytest.approx(25 * math.log1p(x), rel=1e-14)
    assert det.n == 25


def test_statistic_means_match_moment_identity(rng):
    det = detector_from_load(0.3, _spec64())
    for hyp in (H0, H1):
        kappa = det.kappas(hyp)
        t = sample_statistic(det, hyp, rng, size=1_000_000)
        se = math.sqrt(4 * np.sum(kappa**2) / t.size)  # Var(kappa |v|^2) = 4 kappa^2 for v ~ CN(0, 2)
        assert abs(t.mean() - 2 * kappa.sum()) <= 4 * se


def test_observation_statistic_is_same_law(rng):
    # T_1 from a simulated rotated observation has the H0 and H1 means of the detector weights
    link = LinkState(h_aw_sq=0.8, sigma_w_sq=1.3, sigma_a_sq=0.4)
    spec = _spec64(tau=0.7)
    det = build_detector(link, spec)
    for hyp in (H0, H1):
        vals = np.array([test_statistic(sample_observation(link, spec, hyp, rng), link, spec)
                         for _ in range(20000)])
        kappa = det.kappas(hyp)
        se = math.sqrt(4 * np.sum(kappa**2) / vals.size)
        assert abs(vals.mean() - 2 * kappa.sum()) <= 4 * se


@pytest.mark.parametrize("load", [0.05, 0.5, 1.0, 5.0])
def test_cf_matches_exponential_closed_form(load):
    det = detector_from_load(load, _single())
    a, g, th = det.alphas[0], det.gammas[0], det.theta
    p_fa, p_md = error_probs_cf(det)
    assert abs(p_fa - math.exp(-th / (2 * a))) <= 1e-8
    assert abs(p_md - (1 - math.exp(-th / (2 * g)))) <= 1e-8


def test_mc_matches_exponential_closed_form():
    det = detector_from_load(0.8, _single())
    p_fa, p_md, ci = error_probs_mc(det, 400_000, seed=7)
    th = det.theta
    assert abs(p_fa - math.exp(-th / (2 * det.alphas[0]))) <= ci * 3 / 1.96
    assert abs(p_md - (1 - math.exp(-th / (2 * det.gammas[0])))) <= ci * 3 / 1.96


def test_tail_probability_hypoexponential():
    # distinct weights: P(T > x) = sum_i prod_{j != i} k_i/(k_i - k_j) exp(-x/(2 k_i))
    kappa = np.array([0.9, 0.5, 0.2, 0.05])
    for x in (0.01, 0.7, 3.0, 12.0):
        exact = 0.0
        for i, ki in enumerate(kappa):
            c = np.prod([ki / (ki - kj) for j, kj in enumerate(kappa) if j != i])
            exact += c * math.exp(-x / (2 * ki))
        assert tail_probability(kappa, x) == pytest.approx(exact, abs=1e-12)


def test_tail_probability_counts_equal_repeat():
    kappa = np.array([0.3, 0.1])
    counts = np.array([3, 5])
    assert tail_probability(kappa, 2.0, counts) == pytest.approx(tail_probability(np.repeat(kappa, counts), 2.0),
                                                                 abs=1e-13)
    # Erlang tail for a single repeated weight
    k, m, x = 0.4, 4, 3.1
    erlang = math.exp(-x / (2 * k)) * sum((x / (2 * k)) ** i / math.factorial(i) for i in range(m))
    assert tail_probability(np.array([k]), x, np.array([m])) == pytest.approx(erlang, abs=1e-12)


def test_cf_agrees_with_mc_on_table_point():
    det = detector_from_load(0.05, _spec64())
    fa_cf, md_cf = error_probs_cf(det)
    fa, md, ci = error_probs_mc(det, 200_000, seed=11)
    assert abs(fa - fa_cf) <= 3 * ci and abs(md - md_cf) <= 3 * ci
    assert fa_cf + md_cf >= 1 - 0.2


def test_total_error_non_increasing_in_power():
    spec = _spec64(tau=0.6)
    xi = [sum(error_probs_cf(detector_from_load(x, spec))) for x in np.geomspace(1e-3, 3, 15)]
    assert all(b <= a + 1e-10 for a, b in zip(xi[:-1], xi[1:]))
    assert xi[-1] < xi[0]


def test_mc_is_seed_deterministic():
    det = detector_from_load(0.2, _spec64())
    assert error_probs_mc(det, 50_000, seed=3) == error_probs_mc(det, 50_000, seed=3)
    assert error_probs_mc(det, 50_000, seed=3) != error_probs_mc(det, 50_000, seed=4)


def test_mc_rejects_bad_trials():
    with pytest.raises(ValueError):
        error_probs_mc(detector_from_load(0.2, _single()), 0)


def test_link_state_validation_and_power():
    cfg = PulseConfig(tau=0.8, T=2.0)
    link = LinkState.from_power(3.0, cfg, h_aw_sq=2.0, sigma_w_sq=0.5)
    assert link.sigma_a_sq == pytest.approx(4.8)
    assert link.power(cfg) == pytest.approx(3.0)
    assert link.rho == pytest.approx(4.0)
    assert link.load == pytest.approx(19.2)
    with pytest.raises(ValueError):
        LinkState(sigma_w_sq=0.0)
    with pytest.raises(ValueError):
        LinkState(h_aw_sq=-1.0)


def test_negative_spectrum_rejected():
    with pytest.raises(ValueError):
        detector_from_load(1.0, EigenSpectrum(values=np.array([1.0, -0.5])))


def test_quadrature_error_type():
    assert issubclass(QuadratureError, RuntimeError)


def test_chernoff_bound_dominates_exact_tails():
    from ftn_covert.detection import _log_chernoff
    # Erlang(4) with 2 kappa = 1: P(T > x) = e^-x sum_{i<4} x^i / i!
    k, c = np.array([0.5]), np.array([4.0])
    for x in (6.0, 20.0, 60.0):
        exact = math.exp(-x) * sum(x**i / math.factorial(i) for i in range(4))
        assert math.exp(_log_chernoff(k, c, x, upper=True)) >= exact
    for x in (0.5, 1.5):
        exact = 1 - math.exp(-x) * sum(x**i / math.factorial(i) for i in range(4))
        assert math.exp(_log_chernoff(k, c, x, upper=False)) >= exact


def test_far_tails_are_exact_zero_or_one():
    kappa = np.array([0.3, 0.1])
    counts = np.array([2000, 3000])
    mean = 2 * np.dot(counts, kappa)
    assert tail_probability(kappa, 3 * mean, counts) == 0.0
    assert tail_probability(kappa, mean / 3, counts) == 1.0
    # strongly separated hypotheses at large N: xi -> 0 without quadrature failure
    spec = EigenSpectrum(values=np.array([1.4, 0.6, 1e-3]), counts=np.array([4000, 4000, 4000]))
    p_fa, p_md = error_probs_cf(detector_from_load(2.0, spec))
    assert p_fa + p_md <= 1e-15
