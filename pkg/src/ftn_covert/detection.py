"""Willie's optimal likelihood-ratio detector.

In the eigenbasis of G the log-likelihood ratio reduces to a weighted sum of
independent chi-square(2) variables compared against theta = -log beta_1:

    T_1 = sum_n kappa_n |v_n|^2,   v_n ~ CN(0, 2),

with kappa_n = alpha_n under H0 and gamma_n under H1. Error probabilities are
obtained either by Monte Carlo or by inverting the characteristic function
prod_n (1 - 2j kappa_n w)^-1 with the Gil-Pelaez integral.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .isi import EigenSpectrum
from .pulse import PulseConfig
from .quadrature import QuadratureError

H0, H1 = "H0", "H1"

# rows * N elements generated per Monte Carlo chunk
_CHUNK_ELEMENTS = 1 << 21


@dataclass(frozen=True)
class LinkState:
    """One block-fading realization: channel gains, noise levels and symbol energy."""

    h_ab_sq: float = 1.0
    h_aw_sq: float = 1.0
    sigma_w_sq: float = 1.0
    n0: float = 2.0
    sigma_a_sq: float = 0.0

    def __post_init__(self):
        if self.h_ab_sq < 0 or self.h_aw_sq < 0:
            raise ValueError("channel power gains must be non-negative")
        if not (self.sigma_w_sq > 0 and self.n0 > 0):
            raise ValueError("noise levels must be positive")
        if self.sigma_a_sq < 0:
            raise ValueError("symbol energy must be non-negative")

    @classmethod
    def from_power(cls, power: float, cfg: PulseConfig, **kw) -> "LinkState":
        return cls(sigma_a_sq=power * cfg.symbol_interval, **kw)

    def power(self, cfg: PulseConfig) -> float:
        """Transmit power P = sigma_a^2/(tau T) in watts."""
        return self.sigma_a_sq / cfg.symbol_interval

    @property
    def rho(self) -> float:
        return self.h_aw_sq / self.sigma_w_sq

    @property
    def load(self) -> float:
        """rho * sigma_a^2, the per-eigenvalue SNR scale seen by Willie."""
        return self.rho * self.sigma_a_sq

    def with_sigma_a_sq(self, sigma_a_sq: float) -> "LinkState":
        return LinkState(self.h_ab_sq, self.h_aw_sq, self.sigma_w_sq, self.n0, sigma_a_sq)


@dataclass(frozen=True, eq=False)
class DetectorModel:
    alphas: np.ndarray
    gammas: np.ndarray
    theta: float
    log_beta1: float
    counts: np.ndarray | None = None

    @property
    def n(self) -> int:
        return int(self.alphas.size if self.counts is None else self.counts.sum())

    def weights(self) -> np.ndarray:
        return np.ones_like(self.alphas) if self.counts is None else self.counts.astype(float)

    def kappas(self, hyp: str) -> np.ndarray:
        if hyp == H0:
            return self.alphas
        if hyp == H1:
            return self.gammas
        raise ValueError(f"unknown hypothesis {hyp!r}")


def detector_from_load(load: float, spec: EigenSpectrum) -> DetectorModel:
    """Detector for a given rho*sigma_a^2; only this product enters the statistics."""
    if np.any(spec.values < -1e-9):
        raise ValueError("ISI spectrum has negative eigenvalues")
    lam = spec.floored()
    s = load * lam
    alphas = 0.5 * s / (s + 1.0)
    gammas = 0.5 * s
    theta = float(np.dot(spec.weights(), np.log1p(s)))
    counts = None if spec.counts is None else spec.counts.copy()
    return DetectorModel(alphas=alphas, gammas=gammas, theta=theta, log_beta1=-theta, counts=counts)


def build_detector(link: LinkState, spec: EigenSpectrum) -> DetectorModel:
    return detector_from_load(link.load, spec)


def _expanded(det: DetectorModel, hyp: str) -> np.ndarray:
    k = det.kappas(hyp)
    return k if det.counts is None else np.repeat(k, det.counts)


def sample_statistic(det: DetectorModel, hyp: str, rng: np.random.Generator, size=None):
    """Draw T_1 under ``hyp``; v_n = a + jb with a, b standard normal, so v_n ~ CN(0, 2)."""
    kappa = _expanded(det, hyp)
    shape = (1 if size is None else int(size), kappa.size)
    a = rng.standard_normal(shape)
    b = rng.standard_normal(shape)
    t = (a * a + b * b) @ kappa
    return float(t[0]) if size is None else t


def sample_observation(link: LinkState, spec: EigenSpectrum, hyp: str, rng: np.random.Generator):
    """Rotated observation y = V^T r_w with per-entry variance from the hypothesis.

    H0: sigma_w^2 lambda_n; H1: |h_aw|^2 sigma_a^2 lambda_n^2 + sigma_w^2 lambda_n.
    Real and imaginary parts each carry half the variance.
    """
    lam = spec.floored() if spec.counts is None else np.repeat(spec.floored(), spec.counts)
    var = link.sigma_w_sq * lam
    if hyp == H1:
        var = var + link.h_aw_sq * link.sigma_a_sq * lam**2
    elif hyp != H0:
        raise ValueError(f"unknown hypothesis {hyp!r}")
    scale = np.sqrt(var / 2.0)
    return scale * (rng.standard_normal(lam.size) + 1j * rng.standard_normal(lam.size))


def test_statistic(y, link: LinkState, spec: EigenSpectrum) -> float:
    """T_1(y) = sum_n |h|^2 sigma_a^2 / (sigma_w^2 (|h|^2 sigma_a^2 lambda_n + sigma_w^2)) |y_n|^2."""
    lam = spec.floored() if spec.counts is None else np.repeat(spec.floored(), spec.counts)
    hs = link.h_aw_sq * link.sigma_a_sq
    c = hs / (link.sigma_w_sq * (hs * lam + link.sigma_w_sq))
    return float(np.dot(c, np.abs(np.asarray(y)) ** 2))


test_statistic.__test__ = False  # keep pytest from collecting it


def _mc_count(kappa: np.ndarray, theta: float, trials: int, seed: int, stream: int, above: bool) -> int:
    rows = max(1, _CHUNK_ELEMENTS // kappa.size)
    hits = 0
    done = 0
    chunk = 0
    while done < trials:
        m = min(rows, trials - done)
        rng = np.random.default_rng(np.random.SeedSequence([seed, stream, chunk]))
        a = rng.standard_normal((m, kappa.size))
        b = rng.standard_normal((m, kappa.size))
        t = (a * a + b * b) @ kappa
        hits += int(np.count_nonzero(t >= theta if above else t < theta))
        done += m
        chunk += 1
    return hits


def error_probs_mc(det: DetectorModel, trials: int, seed: int = 0):
    """Monte Carlo (p_fa, p_md, ci_halfwidth) for the test T_1 >= theta -> D1.

    Each hypothesis draws from its own stream; chunks use streams derived from
    (seed, hypothesis, chunk index), so results do not depend on chunking order.
    The half-width is 1.96 sqrt(p(1-p)/trials), the larger of the two.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    fa = _mc_count(_expanded(det, H0), det.theta, trials, seed, 0, above=True)
    md = _mc_count(_expanded(det, H1), det.theta, trials, seed, 1, above=False)
    p_fa, p_md = fa / trials, md / trials
    ci = max(1.96 * math.sqrt(p * (1.0 - p) / trials) for p in (p_fa, p_md))
    return p_fa, p_md, ci


def _log_abs_phi(w, kappa, counts):
    return -0.5 * np.dot(counts, np.log1p((2.0 * kappa * w) ** 2))


def _arg_phi(w, kappa, counts):
    return np.dot(counts, np.arctan(2.0 * kappa * w))


# tails whose Chernoff bound falls below this are returned as exactly 0 or 1
_NEGLIGIBLE_TAIL = 1e-16


def _log_chernoff(kappa, counts, x: float, upper: bool) -> float:
    """log of the Chernoff bound on P(T > x) (upper) or P(T < x), with 2 max(kappa) = 1."""
    n = float(counts.sum())
    if upper:
        def f(s):
            return -np.dot(counts, np.log1p(-2.0 * kappa * s)) - s * x
        bounds = (0.0, 1.0 - 1e-12)
    else:
        def f(s):
            return -np.dot(counts, np.log1p(2.0 * kappa * s)) + s * x
        bounds = (0.0, n / x)  # f is increasing beyond n/x
    res = optimize.minimize_scalar(f, bounds=bounds, method="bounded", options={"xatol": 1e-10})
    return min(0.0, float(res.fun))


def tail_probability(kappa, x: float, counts=None, epsabs: float = 1e-12) -> float:
    """P(sum_n kappa_n chi2_2 > x) by Gil-Pelaez inversion.

    P = 1/2 + (1/pi) int_0^inf Im(phi(w) e^{-jwx}) / w dw with
    phi(w) = prod (1 - 2j kappa_n w)^-counts_n. The head of the integral runs
    through adaptive quadrature on the un-split phase; when |phi| decays slowly
    (few terms) the remainder is done as a Fourier integral on [W, inf).
    """
    kappa = np.asarray(kappa, float)
    counts = np.ones_like(kappa) if counts is None else np.asarray(counts, float)
    keep = kappa > 0
    kappa, counts = kappa[keep], counts[keep]
    if kappa.size == 0:
        return 1.0 if x < 0 else 0.0
    if x <= 0:
        return 1.0
    # scale so that 2*max(kappa) = 1; the tail probability is scale-invariant
    s = 2.0 * kappa.max()
    kappa = kappa / s
    x = x / s
    mean = 2.0 * np.dot(counts, kappa)
    # far tails: quadrature only sees roundoff there, the bound settles them
    if x > mean and _log_chernoff(kappa, counts, x, upper=True) < math.log(_NEGLIGIBLE_TAIL):
        return 0.0
    if x < mean and _log_chernoff(kappa, counts, x, upper=False) < math.log(_NEGLIGIBLE_TAIL):
        return 1.0

    def integrand(w):
        if w == 0.0:
            return mean - x
        phase = _arg_phi(w, kappa, counts) - w * x
        return math.exp(_log_abs_phi(w, kappa, counts)) * math.sin(phase) / w

    def envelope(w):
        return _log_abs_phi(w, kappa, counts) - math.log(w)

    # smallest power-of-two cut where the envelope |phi|/w drops below 1e-16
    head_cap = min(4096.0, max(64.0, 400.0 / x))
    w_cut = 1.0
    while envelope(w_cut) > math.log(1e-16) and w_cut < head_cap:
        w_cut *= 2.0
    w_cut = min(w_cut, head_cap)
    need_tail = envelope(w_cut) > math.log(1e-16)

    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            # subdivide by expected oscillations of the residual phase
            pieces = max(1, int(math.ceil(w_cut * x / 50.0)))
            edges = np.linspace(0.0, w_cut, pieces + 1)
            head = 0.0
            for lo, hi in zip(edges[:-1], edges[1:]):
                val, _ = integrate.quad(integrand, lo, hi, limit=500, epsabs=epsabs / pieces, epsrel=1e-12)
                head += val
            tail = 0.0
            if need_tail:
                def f_cos(w):
                    return math.exp(_log_abs_phi(w, kappa, counts)) * math.sin(_arg_phi(w, kappa, counts)) / w

                def f_sin(w):
                    return math.exp(_log_abs_phi(w, kappa, counts)) * math.cos(_arg_phi(w, kappa, counts)) / w

                c, _ = integrate.quad(f_cos, w_cut, np.inf, weight="cos", wvar=x, limlst=200, epsabs=epsabs)
                sn, _ = integrate.quad(f_sin, w_cut, np.inf, weight="sin", wvar=x, limlst=200, epsabs=epsabs)
                tail = c - sn
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"characteristic-function inversion did not converge: {exc}") from exc
    p = 0.5 + (head + tail) / math.pi
    return float(min(1.0, max(0.0, p)))


def error_probs_cf(det: DetectorModel, epsabs: float = 1e-12):
    """(p_fa, p_md) by characteristic-function inversion."""
    counts = det.weights()
    if det.theta <= 0.0:
        # statistic and threshold both vanish; ties go to D1
        return 1.0, 0.0
    p_fa = tail_probability(det.alphas, det.theta, counts, epsabs)
    p_md = 1.0 - tail_probability(det.gammas, det.theta, counts, epsabs)
    return p_fa, max(0.0, p_md)
