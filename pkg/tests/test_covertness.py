import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ftn_covert.covertness import (BAYESIAN, KL, CovertnessConstraint, bayesian_total_error, delta_ftn,
                                   delta_nyquist, dense_kl_divergence, divergence_at_load, kl_divergence,
                                   satisfied, x_minus_log1p)
from ftn_covert.detection import LinkState
from ftn_covert.isi import build_isi_matrix, eigen_spectrum, nyquist_spectrum, spectrum_for
from ftn_covert.power import max_power_kl
from ftn_covert.pulse import PulseConfig


@pytest.mark.parametrize("x", [0.0, 1e-300, 1e-12, 3e-5, 0.01, 0.0499, 0.05, 0.3, 2.0, 1e6])
def test_x_minus_log1p_against_mpmath(x):
    mpmath.mp.dps = 60
    exact = float(mpmath.mpf(x) - mpmath.log1p(mpmath.mpf(x)))
    assert x_minus_log1p(x) == pytest.approx(exact, rel=2e-15, abs=0)


def test_summand_positivity():
    x = np.concatenate([[0.0], np.geomspace(1e-10, 1e4, 500)])
    v = x_minus_log1p(x)
    assert v[0] == 0 and np.all(v[1:] > 0)


def test_zero_power_zero_divergence():
    assert kl_divergence(LinkState(), eigen_spectrum(build_isi_matrix(8, PulseConfig(tau=0.7)))).divergence == 0


def test_dense_oracle_random_small_blocks(rng):
    for _ in range(30):
        n = int(rng.integers(1, 9))
        cfg = PulseConfig(alpha=float(rng.uniform(0.1, 1)), tau=float(rng.uniform(0.5, 1)))
        link = LinkState(h_aw_sq=float(rng.uniform(0.1, 3)), sigma_w_sq=float(rng.uniform(0.5, 2)),
                         sigma_a_sq=float(10 ** rng.uniform(-2, 1)))
        g = build_isi_matrix(n, cfg)
        assert kl_divergence(link, eigen_spectrum(g)).divergence == pytest.approx(
            dense_kl_divergence(link, g.entries), rel=1e-8)


def test_nyquist_divergence_scalar_form():
    x = 0.123
    link = LinkState(sigma_a_sq=x)
    assert kl_divergence(link, nyquist_spectrum(40)).divergence == pytest.approx(40 * (x - math.log1p(x)),
                                                                                  rel=1e-14)


def test_divergence_strictly_increasing_in_power():
    spec = spectrum_for(200, PulseConfig(tau=0.8))
    d = [divergence_at_load(x, spec) for x in np.geomspace(1e-6, 10, 40)]
    assert all(b > a for a, b in zip(d[:-1], d[1:]))


def test_total_error_no_signal_and_strong_signal():
    spec = eigen_spectrum(build_isi_matrix(64, PulseConfig(tau=0.8)), vectors=False)
    assert bayesian_total_error(LinkState(), spec)[0] == 1.0
    strong = LinkState(sigma_a_sq=100 / spec.values.min())
    assert bayesian_total_error(strong, spec)[0] <= 0.05


def test_pinsker_randomized(rng):
    for _ in range(10):
        n = int(rng.integers(1, 33))
        spec = eigen_spectrum(build_isi_matrix(n, PulseConfig(tau=float(rng.uniform(0.5, 1)))), vectors=False)
        link = LinkState(sigma_a_sq=float(10 ** rng.uniform(-2, 0.5)))
        d = kl_divergence(link, spec).divergence
        xi, _ = bayesian_total_error(link, spec, "cf")
        xi_mc, ci = bayesian_total_error(link, spec, "mc", trials=50_000, seed=int(rng.integers(1000)))
        assert xi <= 1 + 1e-9
        assert xi >= 1 - math.sqrt(d / 2) - 1e-9
        assert xi_mc >= 1 - math.sqrt(d / 2) - 3 * ci


def test_unknown_method():
    with pytest.raises(ValueError):
        bayesian_total_error(LinkState(sigma_a_sq=0.1), nyquist_spectrum(3), "exact")


def test_satisfied_margins():
    spec = nyquist_spectrum(100)
    kl = CovertnessConstraint(KL, 0.01)
    chk = satisfied(kl, LinkState(), spec)
    assert chk.satisfied and chk.margin == pytest.approx(2e-4)
    bay = CovertnessConstraint(BAYESIAN, 0.01)
    assert not satisfied(bay, LinkState(sigma_a_sq=5.0), spec).satisfied
    mc = satisfied(bay, LinkState(sigma_a_sq=1e-4), spec, method="mc", trials=20_000, seed=0)
    assert mc.ci_halfwidth > 0


def test_satisfied_at_power_root():
    cfg = PulseConfig(tau=0.8)
    spec = spectrum_for(300, cfg)
    kl = CovertnessConstraint(KL, 0.02)
    sol = max_power_kl(kl, LinkState(), spec, cfg)
    chk = satisfied(kl, LinkState.from_power(sol.p_max, cfg), spec)
    assert abs(chk.margin) <= 1e-15


@pytest.mark.parametrize("kw", [dict(kind="tv", epsilon=0.1), dict(kind=KL, epsilon=1.0),
                                dict(kind=KL, epsilon=-0.1)])
def test_constraint_validation(kw):
    with pytest.raises(ValueError):
        CovertnessConstraint(**kw)


def test_delta_zero_power():
    assert delta_ftn(0.0, PulseConfig(tau=0.8), 1.0) == 0.0
    assert delta_nyquist(0.0, PulseConfig(), 1.0) == 0.0


def test_delta_nyquist_substitution():
    assert delta_nyquist(1.0, PulseConfig(T=1.0), 1.0) == pytest.approx(1 - math.log(2), rel=1e-15)
    d = [delta_nyquist(p, PulseConfig(), 1.0) for p in np.geomspace(1e-4, 10, 30)]
    assert all(b > a for a, b in zip(d[:-1], d[1:]))


@settings(max_examples=25, deadline=None)
@given(p=st.floats(1e-5, 50.0))
def test_delta_ftn_reduces_to_nyquist(p):
    assert delta_ftn(p, PulseConfig(tau=1.0), 1.0) == pytest.approx(delta_nyquist(p, PulseConfig(), 1.0), rel=1e-9)


def test_delta_ftn_flat_below_threshold():
    vals = [delta_ftn(0.02, PulseConfig(tau=t), 1.0) for t in (0.5, 0.6, 0.7, 0.75)]
    assert max(vals) - min(vals) <= 1e-9 * max(vals)
    above = [delta_ftn(0.02, PulseConfig(tau=t), 1.0) for t in (0.8, 0.9, 1.0)]
    assert vals[-1] < above[0] < above[1] < above[2]


def test_finite_n_matches_asymptotic_density():
    cfg = PulseConfig(tau=0.8)
    p = 0.05
    spec = eigen_spectrum(build_isi_matrix(4096, cfg), vectors=False)
    d = kl_divergence(LinkState.from_power(p, cfg), spec).divergence
    d1 = delta_ftn(p, cfg, 1.0)
    assert abs(d / (4096 * cfg.symbol_interval) - d1) / d1 <= 0.05
