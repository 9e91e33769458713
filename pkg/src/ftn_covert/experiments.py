"""Experiment configuration and parameter sweeps behind the CLI.

Every sweep expands into a list of row tasks, solves them (optionally on a
process pool) and returns the rows in sweep order, so the CSV is identical for
a given config and seed no matter how the work was scheduled.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from . import __version__
from .covertness import BAYESIAN, KL, CovertnessConstraint
from .detection import LinkState
from .isi import SpectrumCache, nyquist_spectrum, spectrum_for
from .power import max_power
from .pulse import PulseConfig
from .rate import FadingModel, ergodic_covert_rate, rate_ftn

TABLE1_TAUS = tuple(round(0.5 + 0.05 * i, 2) for i in range(11))
TABLE1_N_PRIMES = tuple(range(1000, 10001, 1000))

COLUMNS = ["figure", "constraint", "epsilon", "scheme", "tau", "n_prime", "n", "alpha", "T",
           "sigma_w_sq", "n0", "channel", "h_aw_sq", "h_ab_sq", "eigen", "method", "trials", "draws",
           "seed", "p_max", "rate", "residual", "iterations", "error"]


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending key."""


@dataclass(frozen=True)
class ExperimentConfig:
    alpha: float = 0.3
    T: float = 1.0
    taus: tuple = TABLE1_TAUS
    epsilons: tuple = (0.01, 0.05)
    constraints: tuple = (BAYESIAN, KL)
    n_primes: tuple = TABLE1_N_PRIMES
    sigma_w_sq: float = 1.0
    n0: float = 2.0
    allow_noise_mismatch: bool = False
    h_aw_sq: float = 1.0
    h_ab_sq: float = 1.0
    channel: str = "awgn"
    eigen: str = "auto"
    exact_limit: int = 4096
    bayes_method: str = "cf"
    trials: int = 100_000
    draws: int = 10_000
    seed: int = 0
    # figure overrides; None keeps the figure's own value
    epsilon: float | None = None
    n_prime: int | None = None
    output: str | None = None
    cache_dir: str | None = None
    workers: int = 1
    strict: bool = False

    def pulse(self, tau: float = 1.0) -> PulseConfig:
        return PulseConfig(alpha=self.alpha, T=self.T, tau=tau)

    def config_hash(self) -> str:
        skip = {"output", "cache_dir", "workers", "strict"}
        payload = {k: v for k, v in asdict(self).items() if k not in skip}
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:12]


_RUNTIME_KEYS = {f.name for f in fields(ExperimentConfig)}


def _parse_value(key: str, raw: str, default):
    raw = raw.strip()
    try:
        if key in ("epsilon",):
            return None if raw.lower() in ("", "none") else float(raw)
        if key in ("n_prime",):
            return None if raw.lower() in ("", "none") else int(raw)
        if key in ("output", "cache_dir"):
            return None if raw.lower() in ("", "none") else raw
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            items = [s.strip() for s in raw.split(",") if s.strip()]
            if key in ("taus", "epsilons"):
                return tuple(float(s) for s in items)
            if key == "n_primes":
                return tuple(int(s) for s in items)
            return tuple(s.lower() for s in items)
        return raw
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r}") from None


def _read_pairs(text: str):
    pairs = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = line.split("=", 1)
        pairs[key.strip().replace("-", "_")] = value
    return pairs


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    def bad(key, why):
        raise ConfigError(f"{key}: {why}")

    if not 0.0 <= cfg.alpha <= 1.0:
        bad("alpha", f"must lie in [0, 1], got {cfg.alpha}")
    if not cfg.T > 0:
        bad("T", f"must be positive, got {cfg.T}")
    if not cfg.taus:
        bad("taus", "empty list")
    for t in cfg.taus:
        if not 0.0 < t <= 1.0:
            bad("taus", f"tau must lie in (0, 1], got {t}")
    for e in cfg.epsilons + ((cfg.epsilon,) if cfg.epsilon is not None else ()):
        if not 0.0 <= e < 1.0:
            bad("epsilons" if cfg.epsilon is None or e != cfg.epsilon else "epsilon",
                f"epsilon must lie in [0, 1), got {e}")
    for c in cfg.constraints:
        if c not in (BAYESIAN, KL):
            bad("constraints", f"unknown constraint {c!r}")
    for n in cfg.n_primes + ((cfg.n_prime,) if cfg.n_prime is not None else ()):
        if n < 1:
            bad("n_primes", f"N' must be positive, got {n}")
    if not (cfg.sigma_w_sq > 0):
        bad("sigma_w_sq", "must be positive")
    if not (cfg.n0 > 0):
        bad("n0", "must be positive")
    if not cfg.allow_noise_mismatch and not math.isclose(cfg.sigma_w_sq, cfg.n0 / 2.0, rel_tol=1e-12):
        bad("sigma_w_sq", f"{cfg.sigma_w_sq} != n0/2 = {cfg.n0 / 2.0}; set allow_noise_mismatch = true to override")
    if cfg.h_aw_sq < 0 or cfg.h_ab_sq < 0:
        bad("h_aw_sq", "channel gains must be non-negative")
    if cfg.channel not in ("awgn", "rayleigh"):
        bad("channel", f"must be awgn or rayleigh, got {cfg.channel!r}")
    if cfg.eigen not in ("exact", "asymptotic", "auto"):
        bad("eigen", f"must be exact, asymptotic or auto, got {cfg.eigen!r}")
    if cfg.bayes_method not in ("cf", "mc"):
        bad("bayes_method", f"must be cf or mc, got {cfg.bayes_method!r}")
    if cfg.trials < 1:
        bad("trials", "must be positive")
    if cfg.draws < 1:
        bad("draws", "must be positive")
    if cfg.workers < 1:
        bad("workers", "must be positive")
    return cfg


def parse_config(text: str = "", overrides: dict | None = None) -> ExperimentConfig:
    """Build a validated config from ``key = value`` text plus flag overrides (flags win).

    Unset keys keep the Table I defaults.
    """
    pairs = _read_pairs(text)
    for k, v in (overrides or {}).items():
        if v is not None:
            pairs[k.replace("-", "_")] = str(v)
    defaults = ExperimentConfig()
    values = {}
    for key, raw in pairs.items():
        if key not in _RUNTIME_KEYS:
            raise ConfigError(f"{key}: unknown configuration key")
        values[key] = _parse_value(key, raw, getattr(defaults, key))
    return validate(replace(defaults, **values))


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    text = Path(path).read_text() if path else ""
    return parse_config(text, overrides)


# ---------------------------------------------------------------- row tasks

@dataclass(frozen=True)
class RowTask:
    figure: str
    kind: str
    epsilon: float
    scheme: str
    tau: float
    n_prime: int
    channel: str
    cfg: ExperimentConfig = field(repr=False)

    @property
    def n(self) -> int:
        if self.scheme == "nyquist":
            return self.n_prime
        return int(math.ceil(self.n_prime / self.tau - 1e-9))


def _spectrum(task: RowTask):
    cfg = task.cfg
    if task.scheme == "nyquist":
        return nyquist_spectrum(task.n_prime), "exact"
    cache = SpectrumCache(cfg.cache_dir) if cfg.cache_dir else None
    kind = cfg.eigen
    if kind == "auto":
        kind = "exact" if task.n <= cfg.exact_limit else "asymptotic"
    spec = spectrum_for(task.n, cfg.pulse(task.tau), kind, cache)
    if spec.kind == "asymptotic":
        spec = spec.compressed()
    return spec, kind


def solve_row(task: RowTask) -> dict:
    cfg = task.cfg
    pulse = cfg.pulse(1.0 if task.scheme == "nyquist" else task.tau)
    c = CovertnessConstraint(task.kind, task.epsilon)
    method = cfg.bayes_method if (task.kind == BAYESIAN and task.channel == "awgn") else "cf"
    row = {
        "figure": task.figure, "constraint": task.kind, "epsilon": task.epsilon, "scheme": task.scheme,
        "tau": pulse.tau, "n_prime": task.n_prime, "n": task.n, "alpha": cfg.alpha, "T": cfg.T,
        "sigma_w_sq": cfg.sigma_w_sq, "n0": cfg.n0, "channel": task.channel,
        "h_aw_sq": cfg.h_aw_sq if task.channel == "awgn" else "", "h_ab_sq": cfg.h_ab_sq if task.channel == "awgn" else "",
        "eigen": "", "method": method if task.kind == BAYESIAN else "kl-closed-form",
        "trials": cfg.trials if method == "mc" else "", "draws": cfg.draws if task.channel == "rayleigh" else "",
        "seed": cfg.seed, "p_max": "", "rate": "", "residual": "", "iterations": "", "error": "",
    }
    try:
        spec, kind = _spectrum(task)
        row["eigen"] = kind
        if task.channel == "awgn":
            link = LinkState(h_ab_sq=cfg.h_ab_sq, h_aw_sq=cfg.h_aw_sq, sigma_w_sq=cfg.sigma_w_sq, n0=cfg.n0)
            sol = max_power(c, link, spec, pulse, method, cfg.trials, cfg.seed)
            rate = math.inf if sol.unbounded else rate_ftn(sol.p_max, cfg.h_ab_sq, pulse, cfg.n0)
            row.update(p_max=sol.p_max, rate=rate, residual=sol.residual, iterations=sol.iterations)
        else:
            fading = FadingModel(draws=cfg.draws, seed=cfg.seed)
            res = ergodic_covert_rate(c, fading, task.n, pulse, spec=spec, sigma_w_sq=cfg.sigma_w_sq, n0=cfg.n0)
            sol = res.solution
            row.update(p_max=res.power_used, rate=res.rate,
                       residual=sol.residual if sol else "", iterations=sol.iterations if sol else "")
    except Exception as exc:  # recorded per row; the sweep continues
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _fig_rows(figure: str, cfg: ExperimentConfig, epsilon: float, n_primes, channel: str):
    tasks = []
    for n_prime in n_primes:
        for kind in cfg.constraints:
            for tau in cfg.taus:
                tasks.append(RowTask(figure, kind, epsilon, "ftn", tau, n_prime, channel, cfg))
            tasks.append(RowTask(figure, kind, epsilon, "nyquist", 1.0, n_prime, channel, cfg))
    return tasks


def fig2_tasks(cfg: ExperimentConfig):
    """Max power vs N' (AWGN, eps = 0.01 unless overridden)."""
    eps = 0.01 if cfg.epsilon is None else cfg.epsilon
    return _fig_rows("fig2", cfg, eps, cfg.n_primes, "awgn")


def fig3_tasks(cfg: ExperimentConfig):
    """Max power vs tau at N' = 5000 (AWGN, eps = 0.01 unless overridden)."""
    eps = 0.01 if cfg.epsilon is None else cfg.epsilon
    n_prime = 5000 if cfg.n_prime is None else cfg.n_prime
    return _fig_rows("fig3", cfg, eps, (n_prime,), "awgn")


def fig4_tasks(cfg: ExperimentConfig):
    """Ergodic covert rate vs N' over Rayleigh block fading (eps = 0.05 unless overridden)."""
    eps = 0.05 if cfg.epsilon is None else cfg.epsilon
    return _fig_rows("fig4", cfg, eps, cfg.n_primes, "rayleigh")


def sweep_tasks(cfg: ExperimentConfig):
    tasks = []
    for kind in cfg.constraints:
        for eps in cfg.epsilons:
            for n_prime in cfg.n_primes:
                for tau in cfg.taus:
                    tasks.append(RowTask("sweep", kind, eps, "ftn", tau, n_prime, cfg.channel, cfg))
                tasks.append(RowTask("sweep", kind, eps, "nyquist", 1.0, n_prime, cfg.channel, cfg))
    return tasks


TASKS = {"fig2": fig2_tasks, "fig3": fig3_tasks, "fig4": fig4_tasks, "sweep": sweep_tasks}


def run(figure: str, cfg: ExperimentConfig) -> list[dict]:
    tasks = TASKS[figure](cfg)
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(solve_row, tasks))
    return [solve_row(t) for t in tasks]


def run_fig2(cfg: ExperimentConfig) -> list[dict]:
    return run("fig2", cfg)


def run_fig3(cfg: ExperimentConfig) -> list[dict]:
    return run("fig3", cfg)


def run_fig4(cfg: ExperimentConfig) -> list[dict]:
    return run("fig4", cfg)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render_csv(rows: list[dict], cfg: ExperimentConfig) -> str:
    buf = io.StringIO()
    buf.write(f"# ftn-covert v{__version__} seed={cfg.seed} config-hash={cfg.config_hash()}\r\n")
    w = csv.writer(buf)
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in COLUMNS])
    return buf.getvalue()


def read_csv(text: str) -> list[dict]:
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))
