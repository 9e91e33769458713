import math

import numpy as np
import pytest
from scipy import integrate

from ftn_covert.covertness import BAYESIAN, KL, CovertnessConstraint
from ftn_covert.detection import LinkState
from ftn_covert.isi import spectrum_for
from ftn_covert.pulse import PulseConfig, rrc_energy_spectrum
from ftn_covert.rate import (FadingModel, _rate_many, ergodic_covert_rate, instantaneous_covert_rate, rate_ftn,
                             rate_nyquist)


def test_zero_power_zero_rate():
    assert rate_ftn(0.0, 1.0, PulseConfig(tau=0.8)) == 0.0


def test_nyquist_closed_form():
    assert rate_ftn(1.0, 1.0, PulseConfig(tau=1.0), 2.0) == pytest.approx(1.0, rel=1e-12)
    for p, h in ((0.3, 2.0), (5.0, 0.1)):
        assert rate_nyquist(p, h, PulseConfig(tau=0.6), 2.0) == pytest.approx(math.log2(1 + h * p), rel=1e-10)
        assert rate_nyquist(p, h, PulseConfig(tau=0.6)) == rate_ftn(p, h, PulseConfig(tau=1.0))


def test_rate_over_full_band_below_threshold():
    p = 0.7
    band = integrate.quad(lambda f: math.log2(1 + p * rrc_energy_spectrum(f, PulseConfig())), -0.65, 0.65,
                          points=[-0.35, 0.35], epsabs=1e-13)[0]
    rates = [rate_ftn(p, 1.0, PulseConfig(tau=t)) for t in (0.5, 0.6, 0.7, 1 / 1.3)]
    np.testing.assert_allclose(rates, band, rtol=1e-9)


def test_rate_monotonicity():
    cfg = PulseConfig(tau=0.8)
    by_power = [rate_ftn(p, 1.0, cfg) for p in (0.1, 0.2, 0.4, 0.8)]
    assert all(b > a for a, b in zip(by_power[:-1], by_power[1:]))
    r = [rate_ftn(0.5, 1.0, PulseConfig(tau=t)) for t in (1 / 1.3, 0.8, 0.9, 1.0)]
    assert all(b <= a + 1e-12 for a, b in zip(r[:-1], r[1:]))
    assert rate_ftn(0.5, 2.0, cfg) > rate_ftn(0.5, 1.0, cfg)


def test_ftn_rate_exceeds_nyquist_at_equal_power():
    for tau in (0.5, 0.8, 0.95):
        assert rate_ftn(0.2, 1.0, PulseConfig(tau=tau)) > rate_nyquist(0.2, 1.0, PulseConfig(tau=tau))


def test_quadrature_converged():
    cfg = PulseConfig(tau=0.85)
    from ftn_covert import rate as mod
    base = rate_ftn(0.9, 1.0, cfg)
    old = mod.RATE_NODES
    try:
        mod.RATE_NODES = 2 * old - 1
        assert rate_ftn(0.9, 1.0, cfg) == pytest.approx(base, rel=1e-8)
    finally:
        mod.RATE_NODES = old


def test_vectorized_rates_match_scalar():
    cfg = PulseConfig(tau=0.9)
    h = np.array([0.1, 1.0, 3.0])
    np.testing.assert_allclose(_rate_many(0.4, h, cfg, 2.0), [rate_ftn(0.4, x, cfg) for x in h], rtol=1e-13)


def test_instantaneous_covert_rates():
    cfg = PulseConfig(tau=0.8)
    n_prime = 500
    n = math.ceil(n_prime / cfg.tau)
    kl = CovertnessConstraint(KL, 0.01)
    ftn = instantaneous_covert_rate(kl, LinkState(), n, cfg)
    nyq = instantaneous_covert_rate(kl, LinkState(), n_prime, cfg.nyquist())
    assert ftn.rate > nyq.rate
    bay = instantaneous_covert_rate(CovertnessConstraint(BAYESIAN, 0.01), LinkState(), n, cfg)
    assert ftn.rate <= bay.rate
    assert instantaneous_covert_rate(CovertnessConstraint(KL, 0.0), LinkState(), n, cfg).rate == 0.0
    assert instantaneous_covert_rate(kl, LinkState(h_aw_sq=0.0), n, cfg).unbounded


def test_fading_draws_are_seeded_and_paired():
    a = FadingModel(draws=1000, seed=3).sample()
    b = FadingModel(draws=1000, seed=3).sample()
    np.testing.assert_array_equal(a[0], b[0])
    assert np.mean(a[0]) == pytest.approx(1.0, abs=0.1)
    with pytest.raises(ValueError):
        FadingModel(h_ab_sq=(1.0, 2.0), h_aw_sq=(1.0,)).sample()


def test_ergodic_single_draw_matches_instantaneous():
    cfg = PulseConfig(tau=0.8)
    n = 100
    spec = spectrum_for(n, cfg)
    one = FadingModel(h_ab_sq=(1.0,), h_aw_sq=(1.0,))
    for c in (CovertnessConstraint(KL, 0.05), CovertnessConstraint(BAYESIAN, 0.05)):
        erg = ergodic_covert_rate(c, one, n, cfg, spec=spec)
        inst = instantaneous_covert_rate(c, LinkState(), n, cfg, spec=spec)
        tol = 1e-9 if c.kind == KL else 2e-6
        assert erg.rate == pytest.approx(inst.rate, rel=tol)


def test_ergodic_ftn_beats_nyquist_and_zero_eps():
    cfg = PulseConfig(tau=0.8)
    n_prime = 200
    fading = FadingModel(draws=300, seed=1)
    for c in (CovertnessConstraint(KL, 0.05), CovertnessConstraint(BAYESIAN, 0.05)):
        ftn = ergodic_covert_rate(c, fading, math.ceil(n_prime / 0.8), cfg)
        nyq = ergodic_covert_rate(c, fading, n_prime, cfg.nyquist())
        assert ftn.rate > nyq.rate
    assert ergodic_covert_rate(CovertnessConstraint(KL, 0.0), fading, 250, cfg).rate == 0.0
