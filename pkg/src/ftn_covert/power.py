"""Maximum covert transmit power under a covertness constraint.

Both constraints depend on the transmit power only through Willie's load
x = rho * sigma_a^2 = rho * P * tau * T, so the solvers bisect on x and map
back to watts at the end. The KL constraint is a smooth, strictly increasing
function of x and is solved to machine precision; the Bayesian constraint is
solved to a relative tolerance on P, with common random numbers when it is
estimated by Monte Carlo.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from . import detection
from .covertness import (_SERIES, _SERIES_CUTOFF, BAYESIAN, KL, CovertnessConstraint, divergence_at_load,
                         x_minus_log1p)
from .detection import LinkState
from .isi import EigenSpectrum, nyquist_spectrum
from .pulse import PulseConfig

MAX_ITER = 200
BAYES_RTOL = 1e-6
# bracket growth factor from the small-load expansion
GROWTH = 4.0


class NonMonotoneError(RuntimeError):
    """Sampled constraint was not monotone in power; raise the trial count."""


@dataclass(frozen=True)
class PowerSolution:
    p_max: float
    constraint: CovertnessConstraint
    residual: float
    iterations: int
    method: str
    load: float = 0.0
    ci_halfwidth: float = 0.0
    unbounded: bool = False


def _bisect(margin, lo: float, hi: float, rtol: float, max_iter: int = MAX_ITER):
    """Shrink [lo, hi] with margin(lo) >= 0 > margin(hi); returns (lo, iterations)."""
    it = 0
    while it < max_iter and hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if margin(mid) >= 0.0:
            lo = mid
        else:
            hi = mid
        it += 1
    return lo, it


def _bracket(margin, x0: float, lo: float = 0.0):
    """Grow hi geometrically from x0 until the constraint is violated."""
    hi = x0
    steps = 0
    while margin(hi) >= 0.0:
        lo = hi
        hi *= GROWTH
        steps += 1
        if steps > MAX_ITER or not math.isfinite(hi):
            raise RuntimeError("could not bracket the maximum power")
    return lo, hi, steps


def _small_load_guess(epsilon: float, spec: EigenSpectrum, second_moment: float = 1.0) -> float:
    # D ~ x^2 sum(lambda^2)/2 at small x; x - log(1+x) <= x^2/2 makes this feasible
    s2 = float(np.dot(spec.weights(), spec.floored() ** 2)) * second_moment
    return 2.0 * epsilon / math.sqrt(s2)


def kl_load(epsilon: float, spec: EigenSpectrum):
    """Largest x with sum_n (x lambda_n - log(1 + x lambda_n)) <= 2 eps^2; (x, iterations, residual)."""
    budget = 2.0 * epsilon**2
    if epsilon == 0.0:
        return 0.0, 0, 0.0

    def margin(x):
        return budget - divergence_at_load(x, spec)

    x0 = _small_load_guess(epsilon, spec)
    lo, hi, steps = _bracket(margin, x0)
    x, it = _bisect(margin, lo, hi, rtol=0.0)
    return x, steps + it, margin(x)


def _power_from_load(x: float, rho: float, cfg: PulseConfig) -> float:
    return x / (rho * cfg.symbol_interval)


def _unbounded(c: CovertnessConstraint, method: str) -> PowerSolution:
    return PowerSolution(p_max=math.inf, constraint=c, residual=math.inf, iterations=0,
                         method=method, load=0.0, unbounded=True)


def max_power_kl(c: CovertnessConstraint, link: LinkState, spec: EigenSpectrum, cfg: PulseConfig) -> PowerSolution:
    """P_max with D(p1||p0) = 2 eps^2; ``link`` supplies the channel, its power is ignored."""
    if c.kind != KL:
        raise ValueError("max_power_kl needs a KL constraint")
    if link.rho == 0.0:
        return _unbounded(c, "bisection")
    x, it, res = kl_load(c.epsilon, spec)
    return PowerSolution(p_max=_power_from_load(x, link.rho, cfg), constraint=c, residual=res,
                         iterations=it, method="bisection", load=x)


def _xi_objective(spec: EigenSpectrum, method: str, trials: int, seed: int):
    """x -> (xi_min, ci) for the detector at load x."""
    def xi(x):
        det = detection.detector_from_load(x, spec)
        if method == "cf":
            p_fa, p_md = detection.error_probs_cf(det)
            return p_fa + p_md, 0.0
        # same seed at every probe: common random numbers across powers
        p_fa, p_md, ci = detection.error_probs_mc(det, trials, seed)
        return p_fa + p_md, ci
    return xi


def min_trials(epsilon: float) -> int:
    """Trials for which the worst-case 95% half-width 0.98/sqrt(trials) is below eps/10."""
    return int(math.floor((9.8 / epsilon) ** 2)) + 1


def bayesian_load(epsilon: float, spec: EigenSpectrum, method: str = "cf", trials: int = 100_000,
                  seed: int = 0, rtol: float = BAYES_RTOL):
    """Largest x with xi_min(x) >= 1 - eps; returns (x, iterations, margin, ci)."""
    if epsilon == 0.0:
        return 0.0, 0, 0.0, 0.0
    if method == "mc" and trials < min_trials(epsilon):
        raise ValueError(f"{trials} trials cannot resolve eps={epsilon}; need at least {min_trials(epsilon)}")
    xi = _xi_objective(spec, method, trials, seed)
    target = 1.0 - epsilon
    probes: list[tuple[float, float, float]] = []

    def margin(x):
        v, ci = xi(x)
        probes.append((x, v, ci))
        return v - target

    x_kl, _, _ = kl_load(epsilon, spec)
    x, it = _bayes_search(margin, x_kl, rtol)
    _check_monotone(probes, method)
    final = [p for p in probes if p[0] == x]
    v, ci = (final[-1][1], final[-1][2]) if final else xi(x)
    return x, it, v - target, ci


def _bayes_search(margin, x_kl: float, rtol: float):
    """Bisection for the Bayesian boundary, started from the KL solution.

    KL feasibility implies Bayesian feasibility (Pinsker), so x_kl is normally
    a valid lower end and the bracket grows from 2 x_kl.
    """
    lo = 0.0
    if margin(x_kl) >= 0.0:
        lo = x_kl
    lo, hi, steps = _bracket(margin, 2.0 * x_kl if lo else x_kl, lo)
    x, it = _bisect(margin, lo, hi, rtol=rtol)
    return x, steps + it


def _check_monotone(probes, method: str):
    pts = sorted(probes)
    for (x1, v1, c1), (x2, v2, c2) in zip(pts[:-1], pts[1:]):
        slack = 1e-9 if method == "cf" else 2.0 * max(c1, c2)
        if v2 > v1 + slack:
            raise NonMonotoneError(
                f"total error rose from {v1:.6g} to {v2:.6g} between loads {x1:.6g} and {x2:.6g}")


def max_power_bayesian(c: CovertnessConstraint, link: LinkState, spec: EigenSpectrum, cfg: PulseConfig,
                       method: str = "cf", trials: int = 100_000, seed: int = 0,
                       rtol: float = BAYES_RTOL) -> PowerSolution:
    """P_max with p_fa + p_md >= 1 - eps, xi estimated by CF inversion or Monte Carlo."""
    if c.kind != BAYESIAN:
        raise ValueError("max_power_bayesian needs a Bayesian constraint")
    name = "bisection" if method == "cf" else "mc-bisection"
    if link.rho == 0.0:
        return _unbounded(c, name)
    x, it, res, ci = bayesian_load(c.epsilon, spec, method, trials, seed, rtol)
    return PowerSolution(p_max=_power_from_load(x, link.rho, cfg), constraint=c, residual=res,
                         iterations=it, method=name, load=x, ci_halfwidth=ci)


def max_power(c: CovertnessConstraint, link: LinkState, spec: EigenSpectrum, cfg: PulseConfig,
              method: str = "cf", trials: int = 100_000, seed: int = 0) -> PowerSolution:
    if c.kind == KL:
        return max_power_kl(c, link, spec, cfg)
    return max_power_bayesian(c, link, spec, cfg, method, trials, seed)


def max_power_nyquist(c: CovertnessConstraint, link: LinkState, n_prime: int, cfg: PulseConfig,
                      method: str = "cf", trials: int = 100_000, seed: int = 0) -> PowerSolution:
    """Nyquist baseline: N' unit eigenvalues and x = rho P T."""
    return max_power(c, link, nyquist_spectrum(n_prime), cfg.nyquist(), method, trials, seed)


class XiCurve:
    """xi_min(x) for one spectrum, tabulated by CF inversion and interpolated.

    The total variation 1 - xi is interpolated monotonically in log-log space on
    a grid around the covert operating load 1/sqrt(sum lambda^2); below the grid
    it is linear in x (its small-load behaviour), above it is held constant.
    """

    def __init__(self, spec: EigenSpectrum, decades=(-5.0, 3.0), per_decade: int = 16):
        s2 = float(np.dot(spec.weights(), spec.floored() ** 2))
        ref = 1.0 / math.sqrt(s2)
        exps = np.linspace(decades[0], decades[1], int(round((decades[1] - decades[0]) * per_decade)) + 1)
        self.x = ref * 10.0**exps
        tv = np.empty_like(self.x)
        for i, x in enumerate(self.x):
            p_fa, p_md = detection.error_probs_cf(detection.detector_from_load(float(x), spec))
            tv[i] = 1.0 - (p_fa + p_md)
        tv = np.maximum.accumulate(np.clip(tv, 1e-300, 1.0))
        self.tv = tv
        self._interp = PchipInterpolator(np.log(self.x), np.log(tv))

    def __call__(self, x):
        x = np.asarray(x, float)
        out = np.empty_like(x)
        low = x < self.x[0]
        high = x > self.x[-1]
        mid = ~(low | high)
        out[low] = self.tv[0] * x[low] / self.x[0]
        out[high] = self.tv[-1]
        out[mid] = np.exp(self._interp(np.log(x[mid])))
        return 1.0 - out


class MeanDivergence:
    """s -> (1/M) sum_i sum_n D-term(rho_i s lambda_n) for fixed channel draws rho_i.

    Products below the series cutoff are summed through prefix sums of rho^k
    over the sorted draws (they form a prefix for each lambda_n); only the
    remaining large products are evaluated term by term.
    """

    def __init__(self, rho, spec: EigenSpectrum):
        self.rho = np.sort(np.asarray(rho, float))
        self.lam = spec.floored()
        self.w = spec.weights()
        # coefficients of y^k, k = 2..13, low order first
        self.coef = np.array(_SERIES[::-1])
        ks = np.arange(2, 2 + self.coef.size)
        powers = self.rho[None, :] ** ks[:, None]
        self.prefix = np.concatenate([np.zeros((ks.size, 1)), np.cumsum(powers, axis=1)], axis=1)
        self.ks = ks

    def __call__(self, s: float) -> float:
        if s == 0.0:
            return 0.0
        m = self.rho.size
        sl = s * self.lam
        split = np.searchsorted(self.rho, _SERIES_CUTOFF / sl, side="left")
        # small part: sum_k coef_k (s lambda_n)^k sum_{i < split_n} rho_i^k
        sums = self.prefix[:, split]
        small = np.sum(self.coef[:, None] * sl[None, :] ** self.ks[:, None] * sums, axis=0)
        total = float(np.dot(self.w, small))
        big = m - split
        idx = np.nonzero(big)[0]
        for start in range(0, idx.size, 64):
            for n in idx[start:start + 64]:
                total += self.w[n] * float(np.sum(x_minus_log1p(sl[n] * self.rho[split[n]:])))
        return total / m


def ergodic_sigma_a_sq(c: CovertnessConstraint, rho_draws, spec: EigenSpectrum,
                       direct_limit: int = 32, xi_curve: XiCurve | None = None):
    """Largest symbol energy meeting the constraint averaged over Willie's channel draws.

    KL: mean_i D(rho_i s) <= 2 eps^2. Bayesian: mean_i xi_min(rho_i s) >= 1 - eps,
    with the detector matched to each draw. Up to ``direct_limit`` draws the
    Bayesian objective is evaluated directly; beyond that through an XiCurve.
    Returns (sigma_a_sq, iterations, margin); sigma_a_sq is inf when every draw is 0.
    """
    rho = np.asarray(rho_draws, float)
    if c.epsilon == 0.0:
        return 0.0, 0, 0.0
    if not np.any(rho > 0):
        return math.inf, 0, math.inf
    x0 = _small_load_guess(c.epsilon, spec, float(np.mean(rho**2)))
    mean_div = MeanDivergence(rho, spec)
    budget = c.kl_budget

    def kl_margin(s):
        return budget - mean_div(s)

    lo, hi, steps = _bracket(kl_margin, x0)
    s_kl, it = _bisect(kl_margin, lo, hi, rtol=0.0)
    if c.kind == KL:
        return s_kl, steps + it, kl_margin(s_kl)

    target = c.min_total_error
    if rho.size <= direct_limit:
        xi = _xi_objective(spec, "cf", 0, 0)

        def margin(s):
            return float(np.mean([xi(float(r * s))[0] for r in rho])) - target
    else:
        curve = xi_curve if xi_curve is not None else XiCurve(spec)

        def margin(s):
            return float(np.mean(curve(rho * s))) - target
    s, it = _bayes_search(margin, s_kl, BAYES_RTOL)
    return s, it, margin(s)
