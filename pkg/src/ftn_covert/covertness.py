"""Covertness constraints: optimal-detector total error and KL divergence.

The KL route is closed form in the ISI eigenvalues,

    D(p1 || p0) = sum_n [x lambda_n - log(1 + x lambda_n)],  x = rho sigma_a^2,

in nats. The large-N densities Delta_1 (FTN) and Delta_2 (Nyquist) are the
per-second limits of that sum written over the folded spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import detection
from .detection import LinkState
from .isi import EigenSpectrum
from .pulse import PulseConfig, folded_spectrum, spectrum_breakpoints
from .quadrature import composite_simpson

BAYESIAN = "bayesian"
KL = "kl"

# below this argument the alternating series replaces x - log1p(x); 12 terms
# reach double precision at the cutoff
_SERIES_CUTOFF = 0.05
_SERIES = [(-1) ** k / k for k in range(13, 1, -1)]


def x_minus_log1p(x):
    """x - log(1 + x) without cancellation for small x (x >= 0)."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x < _SERIES_CUTOFF
    xs = x[small]
    acc = np.full_like(xs, _SERIES[0])
    for c in _SERIES[1:]:
        acc = acc * xs + c
    out[small] = acc * xs * xs
    xl = x[~small]
    out[~small] = xl - np.log1p(xl)
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class CovertnessConstraint:
    kind: str
    epsilon: float

    def __post_init__(self):
        if self.kind not in (BAYESIAN, KL):
            raise ValueError(f"constraint kind must be {BAYESIAN!r} or {KL!r}, got {self.kind!r}")
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in [0, 1), got {self.epsilon}")

    @property
    def kl_budget(self) -> float:
        return 2.0 * self.epsilon**2

    @property
    def min_total_error(self) -> float:
        return 1.0 - self.epsilon

    def __str__(self):
        return f"{self.kind}({self.epsilon:g})"


@dataclass(frozen=True)
class KlBudget:
    divergence: float
    budget: float

    @property
    def slack(self) -> float:
        return self.budget - self.divergence


@dataclass(frozen=True)
class ConstraintCheck:
    satisfied: bool
    margin: float
    ci_halfwidth: float = 0.0


def divergence_at_load(load: float, spec: EigenSpectrum) -> float:
    """sum_n x_minus_log1p(load * lambda_n), nats."""
    return float(np.dot(spec.weights(), x_minus_log1p(load * spec.floored())))


def kl_divergence(link: LinkState, spec: EigenSpectrum, epsilon: float = 0.0) -> KlBudget:
    return KlBudget(divergence=divergence_at_load(link.load, spec), budget=2.0 * epsilon**2)


def dense_kl_divergence(link: LinkState, G: np.ndarray) -> float:
    """KL between the zero-mean complex Gaussians CN(0, S1) and CN(0, S0), from full matrices.

    S0 = sigma_w^2 G, S1 = |h_aw|^2 sigma_a^2 G G^T + sigma_w^2 G;
    D = tr(S0^-1 S1) - N - log det(S0^-1 S1).
    """
    G = np.asarray(G, float)
    n = G.shape[0]
    s0 = link.sigma_w_sq * G
    s1 = link.h_aw_sq * link.sigma_a_sq * G @ G.T + s0
    m = np.linalg.solve(s0, s1)
    sign, logdet = np.linalg.slogdet(m)
    if sign <= 0:
        raise np.linalg.LinAlgError("covariance ratio is not positive definite")
    return float(np.trace(m) - n - logdet)


def bayesian_total_error(link: LinkState, spec: EigenSpectrum, method: str = "cf",
                         trials: int = 100_000, seed: int = 0):
    """xi_min = p_fa + p_md of the optimal equal-prior test.

    ``method`` is "cf" (characteristic-function inversion) or "mc"; the Monte
    Carlo path returns (xi, ci_halfwidth), the CF path (xi, 0.0).
    """
    det = detection.build_detector(link, spec)
    if method == "cf":
        p_fa, p_md = detection.error_probs_cf(det)
        return p_fa + p_md, 0.0
    if method == "mc":
        p_fa, p_md, ci = detection.error_probs_mc(det, trials, seed)
        return p_fa + p_md, ci
    raise ValueError(f"unknown method {method!r}")


def satisfied(c: CovertnessConstraint, link: LinkState, spec: EigenSpectrum, method: str = "cf",
              trials: int = 100_000, seed: int = 0) -> ConstraintCheck:
    """Check ``c``; margin > 0 means inside the covert region.

    KL margin is 2 eps^2 - D in nats; Bayesian margin is xi_min - (1 - eps).
    """
    if c.kind == KL:
        d = divergence_at_load(link.load, spec)
        margin = c.kl_budget - d
        return ConstraintCheck(satisfied=margin >= 0.0, margin=margin)
    xi, ci = bayesian_total_error(link, spec, method, trials, seed)
    margin = xi - c.min_total_error
    return ConstraintCheck(satisfied=margin >= 0.0, margin=margin, ci_halfwidth=ci)


def delta_ftn(p_f: float, cfg: PulseConfig, rho: float, nodes: int = 4097) -> float:
    """Delta_1 = rho P - int_0^{1/(tau T)} log(1 + rho P H_fo(f)) df (nats per second)."""
    if p_f < 0:
        raise ValueError("power must be non-negative")
    if p_f == 0.0 or rho == 0.0:
        return 0.0
    s = rho * p_f
    half = 0.5 * cfg.fold_period
    # H_fo integrates to 1 over a period, so rho P = int rho P H_fo df and the
    # combined x - log(1+x) integrand avoids cancellation at small power.
    # H_fo is even and periodic: integrate [0, half] twice.
    val = 2.0 * composite_simpson(lambda f: x_minus_log1p(s * folded_spectrum(f, cfg)), 0.0, half,
                                  spectrum_breakpoints(cfg, 0.0, half), nodes=nodes, rtol=1e-10, atol=1e-300)
    return float(val)


def delta_nyquist(p_n: float, cfg: PulseConfig, rho: float) -> float:
    """Delta_2 = (1/T) (rho P T - log(1 + rho P T))."""
    if p_n < 0:
        raise ValueError("power must be non-negative")
    return float(x_minus_log1p(rho * p_n * cfg.T)) / cfg.T
