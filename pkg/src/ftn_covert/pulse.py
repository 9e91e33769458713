"""Raised-cosine quantities induced by a unit-energy root-raised-cosine filter.

Everything here is closed form: the matched-filter autocorrelation g(t), the
energy spectrum |H(f)|^2 and its periodization at the FTN symbol rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# |2*alpha*t/T - 1| below this switches to the analytic limit of g(t)
_SINGULAR_WINDOW = 1e-8


@dataclass(frozen=True)
class PulseConfig:
    """RRC roll-off ``alpha``, orthogonal interval ``T`` (s) and acceleration factor ``tau``."""

    alpha: float = 0.3
    T: float = 1.0
    tau: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not self.T > 0.0:
            raise ValueError(f"T must be positive, got {self.T}")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError(f"tau must lie in (0, 1], got {self.tau}")

    @property
    def symbol_interval(self) -> float:
        """tau*T, the FTN symbol spacing in seconds."""
        return self.tau * self.T

    @property
    def fold_period(self) -> float:
        """1/(tau*T), the period of the folded spectrum in Hz."""
        return 1.0 / (self.tau * self.T)

    @property
    def critical_tau(self) -> float:
        """1/(1+alpha): below this the spectral replicas no longer overlap."""
        return 1.0 / (1.0 + self.alpha)

    def nyquist(self) -> "PulseConfig":
        return PulseConfig(alpha=self.alpha, T=self.T, tau=1.0)

    def with_tau(self, tau: float) -> "PulseConfig":
        return PulseConfig(alpha=self.alpha, T=self.T, tau=tau)


def rc_autocorrelation(t, cfg: PulseConfig):
    """g(t) = sinc(t/T) cos(pi alpha t/T) / (1 - (2 alpha t/T)^2).

    sinc is the normalized sin(pi x)/(pi x). At t = +-T/(2 alpha) the removable
    singularity is replaced by its limit (pi/4) sinc(1/(2 alpha)).
    Accepts scalars or arrays; returns the same shape.
    """
    t = np.asarray(t, dtype=float)
    u = t / cfg.T
    a = cfg.alpha
    denom = 1.0 - (2.0 * a * u) ** 2
    singular = np.abs(np.abs(2.0 * a * u) - 1.0) < _SINGULAR_WINDOW if a > 0 else np.zeros(u.shape, bool)
    safe = np.where(singular, 0.0, u)
    g = np.sinc(safe) * np.cos(np.pi * a * safe) / np.where(singular, 1.0, denom)
    if a > 0 and np.any(singular):
        g = np.where(singular, (np.pi / 4.0) * np.sinc(1.0 / (2.0 * a)), g)
    return g[()] if g.ndim == 0 else g


def rrc_energy_spectrum(f, cfg: PulseConfig):
    """|H(f)|^2 of the unit-energy RRC filter, i.e. the raised-cosine spectrum (seconds)."""
    f = np.abs(np.asarray(f, dtype=float))
    T, a = cfg.T, cfg.alpha
    f1 = (1.0 - a) / (2.0 * T)
    f2 = (1.0 + a) / (2.0 * T)
    out = np.zeros_like(f)
    out[f <= f1] = T
    if a > 0:
        band = (f > f1) & (f <= f2)
        out[band] = 0.5 * T * (1.0 + np.cos(np.pi * T / a * (f[band] - f1)))
    return out[()] if out.ndim == 0 else out


def _fold_span(cfg: PulseConfig) -> int:
    # replicas beyond this index cannot reach the principal band [-1/(2 tau T), 1/(2 tau T)]
    return math.ceil((1.0 + cfg.alpha) * cfg.tau) + 1


def folded_spectrum(f, cfg: PulseConfig):
    """H_fo(f) = sum_k |H(f - k/(tau T))|^2.

    |H|^2 vanishes for |f| > (1+alpha)/(2T), so after reducing f into one period
    only the replicas with |k| <= ceil((1+alpha) tau) + 1 can contribute and the
    finite sum is exact.
    """
    f = np.asarray(f, dtype=float)
    period = cfg.fold_period
    reduced = f - np.round(f / period) * period
    span = _fold_span(cfg)
    total = np.zeros_like(reduced)
    for k in range(-span, span + 1):
        total = total + rrc_energy_spectrum(reduced - k * period, cfg)
    return total[()] if total.ndim == 0 else total


def spectrum_breakpoints(cfg: PulseConfig, lo: float, hi: float) -> list[float]:
    """Kinks of the folded spectrum inside (lo, hi), sorted.

    These are the band edges (1 +- alpha)/(2T) and all their images under the
    folding, which quadrature grids must hit exactly.
    """
    T, a = cfg.T, cfg.alpha
    period = cfg.fold_period
    edges = {(1.0 - a) / (2.0 * T), (1.0 + a) / (2.0 * T)}
    kmax = int(math.ceil(max(abs(lo), abs(hi)) / period)) + _fold_span(cfg) + 1
    points = set()
    for e in edges:
        for s in (e, -e):
            for k in range(-kmax, kmax + 1):
                p = s + k * period
                if lo < p < hi:
                    points.add(p)
    # merge points closer than rounding noise
    merged: list[float] = []
    for p in sorted(points):
        if not merged or p - merged[-1] > 1e-12 * max(1.0, abs(p)):
            merged.append(p)
    return merged
