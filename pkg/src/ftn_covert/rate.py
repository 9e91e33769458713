"""Achievable and covert rates over the folded spectrum.

R_FTN = int_{-1/(2 tau T)}^{1/(2 tau T)} log2(1 + 2 |h_ab|^2 P H_fo(f) / N0) df

in bits per second. Covert rates plug in the maximum power allowed by a
covertness constraint, either for one channel realization or averaged over
Rayleigh block fading with a single power level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .covertness import CovertnessConstraint
from .detection import LinkState
from .isi import EigenSpectrum, spectrum_for
from .power import PowerSolution, XiCurve, ergodic_sigma_a_sq, max_power
from .pulse import PulseConfig, folded_spectrum, spectrum_breakpoints
from .quadrature import composite_simpson

RATE_NODES = 4097
RATE_RTOL = 1e-10


@dataclass(frozen=True)
class RateResult:
    rate: float
    power_used: float
    constraint: CovertnessConstraint
    channel: LinkState
    solution: PowerSolution | None = None

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.power_used)


@dataclass(frozen=True)
class FadingModel:
    """Rayleigh block fading: |h|^2 ~ Exp(1) for both A-B and A-W.

    Draws come from h = (a + jb)/sqrt(2) with standard normal a, b. Explicit
    arrays may be supplied instead of (draws, seed).
    """

    draws: int = 10_000
    seed: int = 0
    h_ab_sq: tuple | None = None
    h_aw_sq: tuple | None = None

    def sample(self):
        if self.h_ab_sq is not None or self.h_aw_sq is not None:
            ab = np.asarray(self.h_ab_sq, float)
            aw = np.asarray(self.h_aw_sq, float)
            if ab.shape != aw.shape:
                raise ValueError("paired channel draws must have equal length")
            return ab, aw
        if self.draws < 1:
            raise ValueError("draws must be positive")
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, 0xFAD]))
        g = rng.standard_normal((4, self.draws))
        ab = 0.5 * (g[0] ** 2 + g[1] ** 2)
        aw = 0.5 * (g[2] ** 2 + g[3] ** 2)
        return ab, aw


def _rate_many(p: float, h_ab_sq, cfg: PulseConfig, n0: float):
    """R_FTN for an array of |h_ab|^2 values at power p."""
    h = np.atleast_1d(np.asarray(h_ab_sq, float))
    if p < 0:
        raise ValueError("power must be non-negative")
    if p == 0.0:
        return np.zeros_like(h)
    snr = 2.0 * p * h / n0
    half = 0.5 * cfg.fold_period
    bp = spectrum_breakpoints(cfg, 0.0, half)

    out = np.empty_like(snr)
    for start in range(0, snr.size, 64):
        chunk = snr[start:start + 64]
        out[start:start + 64] = 2.0 * composite_simpson(
            lambda f: np.log1p(np.multiply.outer(chunk, folded_spectrum(f, cfg))) / math.log(2.0),
            0.0, half, bp, nodes=RATE_NODES, rtol=RATE_RTOL)
    return out


def rate_ftn(p: float, h_ab_sq: float, cfg: PulseConfig, n0: float = 2.0) -> float:
    """Instantaneous FTN rate in bits/s (even integrand, integrated over [0, 1/(2 tau T)] twice)."""
    return float(_rate_many(p, h_ab_sq, cfg, n0)[0])


def rate_nyquist(p: float, h_ab_sq: float, cfg: PulseConfig, n0: float = 2.0) -> float:
    return rate_ftn(p, h_ab_sq, cfg.nyquist(), n0)


def instantaneous_covert_rate(c: CovertnessConstraint, link: LinkState, n: int, cfg: PulseConfig,
                              spec: EigenSpectrum | None = None, method: str = "cf",
                              trials: int = 100_000, seed: int = 0) -> RateResult:
    """Rate at the maximum covert power for one channel realization.

    ``n`` is the block length N seen by Willie; for tau = 1 this is the Nyquist
    baseline with N = N'. An unbounded power (Willie's channel is zero) is
    reported as infinite power and infinite rate.
    """
    if spec is None:
        spec = spectrum_for(n, cfg)
    sol = max_power(c, link, spec, cfg, method, trials, seed)
    if sol.unbounded:
        return RateResult(rate=math.inf, power_used=math.inf, constraint=c, channel=link, solution=sol)
    rate = rate_ftn(sol.p_max, link.h_ab_sq, cfg, link.n0)
    used = link.with_sigma_a_sq(sol.p_max * cfg.symbol_interval)
    return RateResult(rate=rate, power_used=sol.p_max, constraint=c, channel=used, solution=sol)


def ergodic_covert_rate(c: CovertnessConstraint, fading: FadingModel, n: int, cfg: PulseConfig,
                        spec: EigenSpectrum | None = None, sigma_w_sq: float = 1.0, n0: float = 2.0,
                        xi_curve: XiCurve | None = None) -> RateResult:
    """Mean rate over |h_ab|^2 draws at the single power meeting the constraint in expectation over |h_aw|^2.

    FTN and Nyquist comparisons should share one FadingModel so both see the
    same paired draws. The Bayesian path uses characteristic-function inversion.
    """
    if spec is None:
        spec = spectrum_for(n, cfg)
    h_ab, h_aw = fading.sample()
    sigma_a_sq, it, margin = ergodic_sigma_a_sq(c, h_aw / sigma_w_sq, spec, xi_curve=xi_curve)
    snapshot = LinkState(h_ab_sq=float(np.mean(h_ab)), h_aw_sq=float(np.mean(h_aw)),
                         sigma_w_sq=sigma_w_sq, n0=n0,
                         sigma_a_sq=sigma_a_sq if math.isfinite(sigma_a_sq) else 0.0)
    if math.isinf(sigma_a_sq):
        return RateResult(rate=math.inf, power_used=math.inf, constraint=c, channel=snapshot)
    p = sigma_a_sq / cfg.symbol_interval
    rates = _rate_many(p, h_ab, cfg, n0)
    sol = PowerSolution(p_max=p, constraint=c, residual=margin, iterations=it, method="bisection",
                        load=sigma_a_sq / sigma_w_sq)
    # math.fsum: order-independent, exactly rounded accumulation
    return RateResult(rate=math.fsum(rates) / rates.size, power_used=p, constraint=c, channel=snapshot,
                      solution=sol)
