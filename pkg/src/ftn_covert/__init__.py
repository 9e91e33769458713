"""Covertness and covert-rate analysis of faster-than-Nyquist signaling."""

__version__ = "0.1.0"

from .covertness import (BAYESIAN, KL, CovertnessConstraint, KlBudget, bayesian_total_error, delta_ftn,
                         delta_nyquist, kl_divergence, satisfied)
from .detection import (DetectorModel, LinkState, build_detector, error_probs_cf, error_probs_mc,
                        sample_statistic)
from .isi import (EigenSpectrum, IsiMatrix, SpectrumCache, asymptotic_eigenvalues, build_isi_matrix, eigen_spectrum,
                  spectrum_for)
from .power import PowerSolution, max_power_bayesian, max_power_kl, max_power_nyquist
from .pulse import PulseConfig, folded_spectrum, rc_autocorrelation, rrc_energy_spectrum
from .rate import (FadingModel, RateResult, ergodic_covert_rate, instantaneous_covert_rate, rate_ftn,
                   rate_nyquist)

__all__ = [
    "BAYESIAN", "KL", "CovertnessConstraint", "KlBudget", "bayesian_total_error", "delta_ftn", "delta_nyquist",
    "kl_divergence", "satisfied", "DetectorModel", "LinkState", "build_detector", "error_probs_cf",
    "error_probs_mc", "sample_statistic", "EigenSpectrum", "IsiMatrix", "asymptotic_eigenvalues",
    "build_isi_matrix", "eigen_spectrum", "SpectrumCache", "spectrum_for", "PowerSolution", "max_power_bayesian", "max_power_kl",
    "max_power_nyquist", "PulseConfig", "folded_spectrum", "rc_autocorrelation", "rrc_energy_spectrum",
    "FadingModel", "RateResult", "ergodic_covert_rate", "instantaneous_covert_rate", "rate_ftn", "rate_nyquist",
]
