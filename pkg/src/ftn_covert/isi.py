"""ISI Gram matrix of FTN signaling and its eigen-spectrum.

G[m, k] = g((m - k) tau T) is the covariance shape of both the matched-filter
noise and the received signal. Its eigenvalues drive every detector and
divergence quantity downstream, either computed exactly from a dense
eigensolve or approximated by samples of the folded spectrum.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import toeplitz

from .pulse import PulseConfig, folded_spectrum, rc_autocorrelation

# applied before any log or division; tiny eigenvalues are small, not zero
EIGEN_FLOOR = 1e-12

CACHE_HEADER = "ftn-eig-v1"


@dataclass(frozen=True, eq=False)
class IsiMatrix:
    n: int
    entries: np.ndarray
    cfg: PulseConfig


@dataclass(frozen=True, eq=False)
class EigenSpectrum:
    """Eigenvalues sorted descending, with G = V^T diag(values) V.

    ``basis`` holds V (rows are eigenvectors) and is only present when requested
    from an exact decomposition. ``counts`` gives multiplicities when the
    spectrum has been compressed to its distinct values.
    """

    values: np.ndarray
    kind: str = "exact"
    basis: np.ndarray | None = None
    counts: np.ndarray | None = field(default=None)

    @property
    def n(self) -> int:
        return int(self.values.size if self.counts is None else self.counts.sum())

    def weights(self) -> np.ndarray:
        return np.ones_like(self.values) if self.counts is None else self.counts.astype(float)

    def floored(self) -> np.ndarray:
        return np.maximum(self.values, EIGEN_FLOOR)

    def expanded(self) -> np.ndarray:
        return self.values if self.counts is None else np.repeat(self.values, self.counts)

    def compressed(self) -> "EigenSpectrum":
        """Collapse exactly repeated eigenvalues into (value, count) pairs.

        Asymptotic spectra sample an even, flat-topped function and shrink by an
        order of magnitude; results of every downstream sum are unchanged.
        """
        vals, counts = np.unique(self.expanded(), return_counts=True)
        order = np.argsort(vals)[::-1]
        return EigenSpectrum(values=vals[order], kind=self.kind, counts=counts[order])

    def trace(self) -> float:
        return float(np.dot(self.weights(), self.values))


def build_isi_matrix(n: int, cfg: PulseConfig) -> IsiMatrix:
    if n < 1:
        raise ValueError(f"block length must be at least 1, got {n}")
    row = rc_autocorrelation(np.arange(n) * cfg.symbol_interval, cfg)
    row = np.atleast_1d(row).astype(float)
    row[0] = 1.0
    return IsiMatrix(n=n, entries=toeplitz(row), cfg=cfg)


def eigen_spectrum(g: IsiMatrix, vectors: bool = True) -> EigenSpectrum:
    """Dense symmetric eigendecomposition of G, eigenvalues descending."""
    try:
        if vectors:
            w, U = np.linalg.eigh(g.entries)
        else:
            w, U = np.linalg.eigvalsh(g.entries), None
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure on symmetric input
        raise RuntimeError("eigendecomposition of the ISI matrix did not converge") from exc
    order = np.argsort(w)[::-1]
    w = w[order]
    basis = U[:, order].T.copy() if U is not None else None
    return EigenSpectrum(values=w, kind="exact", basis=basis)


def asymptotic_eigenvalues(n: int, cfg: PulseConfig) -> EigenSpectrum:
    """lambda_i ~ H_fo(f_i)/(tau T) on the one-sided grid f_i = i/(N tau T), i = 0..N-1."""
    if n < 1:
        raise ValueError(f"block length must be at least 1, got {n}")
    f = np.arange(n) / (n * cfg.symbol_interval)
    lam = np.atleast_1d(folded_spectrum(f, cfg)) / cfg.symbol_interval
    return EigenSpectrum(values=np.sort(lam)[::-1], kind="asymptotic")


def nyquist_spectrum(n: int) -> EigenSpectrum:
    """G = I: n unit eigenvalues, stored compressed."""
    return EigenSpectrum(values=np.ones(1), kind="exact", counts=np.array([n]))


def wasserstein1(a, b) -> float:
    """W1 distance between two equal-size empirical distributions."""
    a, b = np.sort(np.asarray(a, float)), np.sort(np.asarray(b, float))
    if a.size != b.size:
        raise ValueError("samples must have the same size")
    return float(np.mean(np.abs(a - b)))


class SpectrumCache:
    """On-disk eigenvalue cache keyed by (kind, alpha, T, tau, N).

    One file per key. Layout: an ASCII header line
    ``ftn-eig-v1 kind=<k> alpha=<a> T=<T> tau=<tau> n=<N>\\n`` followed by N
    little-endian float64 eigenvalues in descending order.
    """

    def __init__(self, directory):
        self.directory = Path(directory)

    @staticmethod
    def header(kind: str, n: int, cfg: PulseConfig) -> str:
        return f"{CACHE_HEADER} kind={kind} alpha={cfg.alpha!r} T={cfg.T!r} tau={cfg.tau!r} n={n}"

    def path(self, kind: str, n: int, cfg: PulseConfig) -> Path:
        digest = hashlib.sha256(self.header(kind, n, cfg).encode()).hexdigest()[:20]
        return self.directory / f"eig-{digest}.bin"

    def load(self, kind: str, n: int, cfg: PulseConfig) -> np.ndarray | None:
        p = self.path(kind, n, cfg)
        if not p.exists():
            return None
        raw = p.read_bytes()
        head, _, body = raw.partition(b"\n")
        if head.decode("ascii", "replace") != self.header(kind, n, cfg):
            return None
        vals = np.frombuffer(body, dtype="<f8")
        return vals.copy() if vals.size == n else None

    def store(self, kind: str, n: int, cfg: PulseConfig, values: np.ndarray) -> None:
        self.directory.mkdir(parents=True, exist_ok=True)
        p = self.path(kind, n, cfg)
        tmp = p.with_suffix(f".tmp{os.getpid()}")
        tmp.write_bytes(self.header(kind, n, cfg).encode("ascii") + b"\n"
                        + np.asarray(values, dtype="<f8").tobytes())
        os.replace(tmp, p)


def spectrum_for(n: int, cfg: PulseConfig, kind: str = "exact", cache: SpectrumCache | None = None,
                 exact_limit: int = 4096) -> EigenSpectrum:
    """Eigenvalues of the n x n ISI matrix for sweeps (no eigenvectors).

    ``kind`` is "exact", "asymptotic" or "auto" (exact up to ``exact_limit``).
    tau = 1 short-circuits to the identity spectrum.
    """
    if kind == "auto":
        kind = "exact" if n <= exact_limit else "asymptotic"
    if kind not in ("exact", "asymptotic"):
        raise ValueError(f"unknown spectrum kind {kind!r}")
    if cfg.tau == 1.0 and kind == "exact":
        return nyquist_spectrum(n)
    if cache is not None:
        vals = cache.load(kind, n, cfg)
        if vals is not None:
            return EigenSpectrum(values=vals, kind=kind)
    if kind == "exact":
        spec = eigen_spectrum(build_isi_matrix(n, cfg), vectors=False)
    else:
        spec = asymptotic_eigenvalues(n, cfg)
    if cache is not None:
        cache.store(kind, n, cfg, spec.values)
    return spec
