"""Seeded Monte Carlo experiments with CSV output.

Every random draw comes from a seed derived from the master seed plus a
tuple of labels naming the grid point and trial (for instance
``("signal", "gaussian", 25, 7)``). Labels are values, not positions, so
extending a grid never changes the draws of points already present, and
trial order has no effect on the aggregates. Rows are reduced in grid order
regardless of how many workers ran the trials.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from . import imaging
from .errors import DomainError, PmolsError
from .linalg import mutual_coherence
from .precondition import pip_preconditioner
from .recovery import SolverParams, SparseSignal, default_iteration_cap, mols, omp, pmols

log = logging.getLogger(__name__)

SUCCESS_TOL = 1e-6
GAUSSIAN, PAM2, TWO_VALUED = "gaussian", "pam2", "two_valued"
SIGNAL_KINDS = (GAUSSIAN, PAM2, TWO_VALUED)
PAM2_LEVELS = np.array([-3.0, -1.0, 1.0, 3.0])
WORKERS_ENV = "PMOLS_WORKERS"
CAP_RULES = ("blocks", "literal", "wide")
RECOVERY_METHODS = ("OMP", "mOLS", "PmOLS")
IMAGING_METHODS = ("GI", "mOLS", "PmOLS")


# --- seeding and generators ---------------------------------------------------


def _label_int(label):
    if isinstance(label, (bool, np.bool_)):
        return int(label)
    if isinstance(label, (int, np.integer)) and label >= 0:
        return int(label)
    return zlib.crc32(repr(label).encode("utf-8"))


def derive_seed(master, *labels):
    """Counter-style child seed for ``(master, labels...)``."""
    return np.random.SeedSequence(entropy=int(master), spawn_key=tuple(_label_int(x) for x in labels))


def gen_gaussian_matrix(m, n, seed):
    """``m x n`` matrix with i.i.d. N(0, 1/m) entries."""
    if m < 1 or n < 1:
        raise DomainError(f"need m, n >= 1, got {m}x{n}")
    rng = np.random.default_rng(seed)
    return rng.standard_normal((m, n)) / math.sqrt(m)


def gen_sparse_signal(n, K, kind, seed):
    if not 0 <= K <= n:
        raise DomainError(f"need 0 <= K <= n, got K={K}, n={n}")
    rng = np.random.default_rng(seed)
    support = np.sort(rng.choice(n, size=K, replace=False)).astype(np.int64)
    if kind == GAUSSIAN:
        vals = rng.standard_normal(K)
        while np.any(vals == 0):  # measure-zero, but keep the support exact
            vals[vals == 0] = rng.standard_normal(int(np.sum(vals == 0)))
    elif kind == PAM2:
        vals = rng.choice(PAM2_LEVELS, size=K)
    elif kind == TWO_VALUED:
        vals = np.full(K, 255.0)
    else:
        raise DomainError(f"unknown signal kind {kind!r}")
    x = np.zeros(n)
    x[support] = vals
    return SparseSignal(values=x, support=support)


def noise_variance(snr_db, K, m):
    return (K / m) * 10.0 ** (-snr_db / 10.0)


def add_noise(y, snr_db, K, m, seed):
    if not math.isfinite(snr_db):
        raise DomainError(f"SNR must be finite, got {snr_db}")
    rng = np.random.default_rng(seed)
    y = np.asarray(y, dtype=float)
    return y + rng.standard_normal(y.shape) * math.sqrt(noise_variance(snr_db, K, m))


# --- plumbing -------------------------------------------------------------------


def config_hash(config):
    payload = json.dumps({"type": type(config).__name__, **asdict(config)}, sort_keys=True, default=list)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:12]


def default_workers():
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _map(func, tasks, workers):
    workers = default_workers() if workers is None else workers
    if workers <= 1 or len(tasks) <= 1:
        return [func(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def fmt(value):
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".9g")
    return str(value)


def write_csv(rows, fields, out=None):
    """Render rows as CSV text (UTF-8, header row, 9 significant digits); write it if ``out`` is a path."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for row in rows:
        w.writerow([fmt(row[f]) for f in fields])
    text = buf.getvalue()
    if out is not None:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def _check_choices(what, values, allowed):
    bad = [v for v in values if v not in allowed]
    if bad or not values:
        raise DomainError(f"unknown {what} {bad!r}; choose from {', '.join(allowed)}")


def _check_methods(methods):
    for method in methods:
        if method.startswith("ModifiedPmOLS:"):
            try:
                lam = float(method.split(":", 1)[1])
            except ValueError:
                raise DomainError(f"bad lambda in method {method!r}") from None
            if not lam >= 0:
                raise DomainError(f"lambda must be nonnegative in {method!r}")
        elif method not in RECOVERY_METHODS:
            raise DomainError(
                f"unknown method {method!r}; choose from {', '.join(RECOVERY_METHODS)} or ModifiedPmOLS:<lambda>"
            )
    if not methods:
        raise DomainError("need at least one method")


def binomial_se(p, trials):
    return math.sqrt(max(p * (1.0 - p), 0.0) / trials)


def relative_error(x_hat, x):
    nx = float(np.linalg.norm(x))
    diff = float(np.linalg.norm(x_hat - x))
    if nx == 0:
        return 0.0 if diff == 0 else math.inf
    return diff / nx


def iteration_cap(rule, K, s, m):
    """Iteration cap used by the sweeps.

    ``"blocks"`` is ``ceil(K/s)`` (just enough blocks to hold ``K`` indices),
    ``"literal"`` is ``floor(min(K, m/K))`` and ``"wide"`` is
    ``min(K, floor(m/s))``.
    """
    if rule == "blocks":
        return math.ceil(K / s)
    if rule == "literal":
        return default_iteration_cap(K, m)
    if rule == "wide":
        return min(K, m // s)
    raise DomainError(f"unknown iteration cap rule {rule!r}")


@dataclass(frozen=True)
class TrialRecord:
    seed: str
    method: str
    K: int
    m: int
    success: bool
    relative_error: float
    wall_time: float = 0.0


# --- mutual coherence versus sampling rate ----------------------------------------


@dataclass(frozen=True)
class CoherenceSweepConfig:
    n: int = 256
    rates: tuple = tuple(round(0.05 * i, 2) for i in range(1, 21))
    trials: int = 500
    seed: int = 0

    def validate(self):
        if self.n < 2:
            raise DomainError(f"n must be >= 2, got {self.n}")
        if self.trials < 1:
            raise DomainError("trials must be >= 1")
        if not self.rates or any(not r > 0 for r in self.rates):
            raise DomainError("rates must be a nonempty list of positive numbers")


COHERENCE_FIELDS = ["rate", "m", "mean_mu_psi", "mean_mu_ppsi", "trials", "config_hash"]


def _coherence_trial(task):
    seed, n, m, t = task
    psi = gen_gaussian_matrix(m, n, derive_seed(seed, "coherence", m, t))
    phi = pip_preconditioner(psi).P @ psi
    return mutual_coherence(psi), mutual_coherence(phi)


def coherence_sweep(config, workers=1):
    """Mean coherence of Gaussian ``psi`` and of ``P psi`` per sampling rate ``m / n``."""
    config.validate()
    h = config_hash(config)
    rows = []
    for rate in config.rates:
        m = int(round(rate * config.n))
        if not 0 < m < config.n:
            log.warning("rate %s gives m=%d; PIP needs 0 < m < n, row omitted", rate, m)
            continue
        tasks = [(config.seed, config.n, m, t) for t in range(config.trials)]
        res = np.array(_map(_coherence_trial, tasks, workers))
        rows.append(
            {
                "rate": float(rate),
                "m": m,
                "mean_mu_psi": float(res[:, 0].mean()),
                "mean_mu_ppsi": float(res[:, 1].mean()),
                "trials": config.trials,
                "config_hash": h,
            }
        )
    return rows


# --- exact recovery frequency versus sparsity ----------------------------------------


@dataclass(frozen=True)
class RecoveryConfig:
    n: int = 256
    m: int = 128
    K_grid: tuple = tuple(range(5, 65, 5))
    kinds: tuple = SIGNAL_KINDS
    s: int = 3
    trials: int = 500
    seed: int = 0
    methods: tuple = ("mOLS", "PmOLS")
    cap_rule: str = "wide"
    enforce_selection_bound: bool = True

    def validate(self):
        if self.n < 1 or self.m < 1:
            raise DomainError(f"need m, n >= 1, got {self.m}x{self.n}")
        if self.trials < 1:
            raise DomainError("trials must be >= 1")
        if self.s < 1:
            raise DomainError(f"s must be >= 1, got {self.s}")
        if not self.K_grid or any(not 1 <= K <= self.n for K in self.K_grid):
            raise DomainError(f"every K must lie in [1, n={self.n}]")
        _check_choices("signal kind", self.kinds, SIGNAL_KINDS)
        _check_methods(self.methods)
        _check_choices("cap rule", (self.cap_rule,), CAP_RULES)


RECOVERY_FIELDS = ["kind", "K", "method", "frequency", "successes", "trials", "config_hash"]


def _solve(method, psi, y0, K, s, cap, enforce=True):
    if method == "OMP":
        return omp(psi, y0, K, max_iters=K).x_hat
    params = SolverParams(K=K, s=s, max_iters=cap, enforce_selection_bound=enforce)
    if method == "mOLS":
        return mols(psi, y0, params).x_hat
    if method == "PmOLS":
        return pmols(psi, y0, params, mode="pip").x_hat
    if method.startswith("ModifiedPmOLS"):
        lam = float(method.split(":", 1)[1])
        return pmols(psi, y0, params, mode="modified_pip", lam=lam).x_hat
    raise DomainError(f"unknown method {method!r}")


def _recovery_trial(task):
    config, kind, K, t = task
    psi = gen_gaussian_matrix(config.m, config.n, derive_seed(config.seed, "matrix", kind, K, t))
    sig = gen_sparse_signal(config.n, K, kind, derive_seed(config.seed, "signal", kind, K, t))
    y0 = psi @ sig.values
    cap = iteration_cap(config.cap_rule, K, config.s, config.m)
    scale = 255.0 if kind == TWO_VALUED else 1.0
    out = []
    for method in config.methods:
        try:
            x_hat = _solve(method, psi, y0, K, config.s, cap, config.enforce_selection_bound)
            err = relative_error(x_hat / scale, sig.values / scale)
        except (PmolsError, np.linalg.LinAlgError) as exc:
            log.debug("trial %s/%s/%d/%d failed: %s", kind, method, K, t, exc)
            err = math.nan
        out.append(
            TrialRecord(
                seed=f"{config.seed}:{kind}:{K}:{t}", method=method, K=K, m=config.m,
                success=bool(err <= SUCCESS_TOL), relative_error=err,
            )
        )
    return out


def _admissible(config, K):
    if K < config.s:
        return f"s={config.s} > K={K}"
    if config.enforce_selection_bound and config.s > config.m // K:
        return f"s={config.s} > floor(m/K)={config.m // K}"
    return None


def recovery_frequency(config, workers=1, records=None):
    """Exact-recovery frequency per (signal kind, K, method).

    Pass a list as ``records`` to also collect every ``TrialRecord``.
    """
    config.validate()
    h = config_hash(config)
    rows = []
    for kind in config.kinds:
        for K in config.K_grid:
            why = _admissible(config, K)
            if why:
                log.warning("skipping kind=%s K=%d: %s", kind, K, why)
                continue
            tasks = [(config, kind, K, t) for t in range(config.trials)]
            results = _map(_recovery_trial, tasks, workers)
            for j, method in enumerate(config.methods):
                wins = sum(trial[j].success for trial in results)
                rows.append(
                    {
                        "kind": kind, "K": K, "method": method,
                        "frequency": wins / config.trials, "successes": wins,
                        "trials": config.trials, "config_hash": h,
                    }
                )
            if records is not None:
                records.extend(r for trial in results for r in trial)
    return rows


def critical_sparsity(rows, kind, method):
    """Largest K before the first K whose frequency drops below one (0 if none)."""
    best = 0
    for row in sorted((r for r in rows if r["kind"] == kind and r["method"] == method), key=lambda r: r["K"]):
        if row["frequency"] < 1.0:
            break
        best = row["K"]
    return best


# --- MSE versus SNR ------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseConfig:
    n: int = 256
    m: int = 128
    K: int = 50
    s: int = 3
    snrs: tuple = (10.0, 20.0, 30.0, 40.0)
    lambdas: tuple = (0.01, 0.1, 0.3, 1.0)
    trials: int = 100
    seed: int = 0
    cap_rule: str = "wide"

    def validate(self):
        if self.n < 1 or not 1 <= self.m <= self.n:
            raise DomainError(f"need 1 <= m <= n, got {self.m}x{self.n}")
        if not 1 <= self.K <= self.n or not 1 <= self.s <= self.K:
            raise DomainError(f"need 1 <= s <= K <= n, got s={self.s}, K={self.K}")
        if self.trials < 1:
            raise DomainError("trials must be >= 1")
        if not self.snrs or any(not math.isfinite(x) for x in self.snrs):
            raise DomainError("SNR grid must be nonempty and finite")
        if not self.lambdas or any(not (lam >= 0 and math.isfinite(lam)) for lam in self.lambdas):
            raise DomainError("lambda grid must be nonempty, finite and nonnegative")
        _check_choices("cap rule", (self.cap_rule,), CAP_RULES)


NOISE_FIELDS = ["snr_db", "method", "lam", "mean_mse", "se_mse", "trials", "config_hash"]


def _noise_trial(task):
    config, snr, t = task
    psi = gen_gaussian_matrix(config.m, config.n, derive_seed(config.seed, "matrix", t))
    sig = gen_sparse_signal(config.n, config.K, GAUSSIAN, derive_seed(config.seed, "signal", t))
    y0 = add_noise(psi @ sig.values, snr, config.K, config.m, derive_seed(config.seed, "noise", float(snr), t))
    cap = iteration_cap(config.cap_rule, config.K, config.s, config.m)
    methods = ["PmOLS"] + [f"ModifiedPmOLS:{lam!r}" for lam in config.lambdas]
    out = []
    for method in methods:
        try:
            x_hat = _solve(method, psi, y0, config.K, config.s, cap, enforce=False)
            out.append(float(np.sum((x_hat - sig.values) ** 2)) / config.n)
        except (PmolsError, np.linalg.LinAlgError):
            out.append(math.nan)
    return out


def noise_sweep(config, workers=1):
    """Mean squared error ``||x_hat - x||^2 / n`` of PmOLS and modified PmOLS per SNR.

    The same matrix and signal are reused across SNR points within a trial
    so the curves are paired; only the noise draw depends on the SNR.
    """
    config.validate()
    h = config_hash(config)
    rows = []
    for snr in config.snrs:
        res = np.array(_map(_noise_trial, [(config, snr, t) for t in range(config.trials)], workers))
        labels = [("PmOLS", "")] + [("ModifiedPmOLS", lam) for lam in config.lambdas]
        for j, (method, lam) in enumerate(labels):
            col = res[:, j]
            rows.append(
                {
                    "snr_db": float(snr), "method": method, "lam": lam,
                    "mean_mse": float(np.mean(col)),
                    "se_mse": float(np.std(col, ddof=1) / math.sqrt(len(col))) if len(col) > 1 else 0.0,
                    "trials": config.trials, "config_hash": h,
                }
            )
    return rows


# --- synthetic imaging ----------------------------------------------------------------


@dataclass(frozen=True)
class ImagingConfig:
    samples: tuple = (("digit3", 360), ("digit7", 420), ("taichi", 410))
    object_dir: Optional[str] = None
    s: int = 3
    seed: int = 0
    methods: tuple = IMAGING_METHODS
    cap_rule: str = "wide"

    def validate(self):
        if not self.samples:
            raise DomainError("need at least one (object, m) pair")
        for name, m in self.samples:
            if m < 2:
                raise DomainError(f"object {name!r}: need m >= 2 samples, got {m}")
        if self.s < 1:
            raise DomainError(f"s must be >= 1, got {self.s}")
        _check_choices("imaging method", self.methods, IMAGING_METHODS)
        _check_choices("cap rule", (self.cap_rule,), CAP_RULES)


IMAGING_FIELDS = ["object", "m", "method", "K", "psnr", "config_hash"]


def _load_objects(config):
    if config.object_dir is None:
        return imaging.synthetic_objects()
    found = {}
    for name, _ in config.samples:
        found[name] = imaging.load_pgm(os.path.join(config.object_dir, f"{name}.pgm"))
    return found


def reconstruct_image(method, psi0, y0, K, s, cap):
    """Reconstruct a vectorised object from lifted patterns and bucket samples."""
    n = psi0.shape[1]
    if method == "GI":
        return imaging.gi_correlate(psi0, y0)
    if K == 0 or not np.any(y0):
        return np.zeros(n)
    params = SolverParams(K=K, s=min(s, K), max_iters=cap, enforce_selection_bound=False)
    if method == "mOLS":
        return mols(psi0, y0, params).x_hat
    if method == "PmOLS":
        return pmols(psi0, y0, params).x_hat
    raise DomainError(f"unknown imaging method {method!r}")


def imaging_experiment(config, objects=None, images=None):
    """Lift, sample, reconstruct, rescale to [0, 255] and score each object.

    Pass a dict as ``images`` to collect the rescaled reconstructions, keyed
    by ``(object, m, method)``.
    """
    config.validate()
    h = config_hash(config)
    objects = _load_objects(config) if objects is None else objects
    rows = []
    for name, m in config.samples:
        img = objects[name]
        x = img.vector()
        n = x.size
        K = int(np.count_nonzero(x))
        psi = gen_gaussian_matrix(m, n, derive_seed(config.seed, "imaging", name, m))
        lifted = imaging.lift_nonnegative(psi)
        y0 = imaging.bucket_sample(lifted.psi0, x)
        cap = iteration_cap(config.cap_rule, max(K, 1), config.s, m)
        for method in config.methods:
            try:
                x_hat = reconstruct_image(method, lifted.psi0, y0, K, config.s, cap)
                shown = imaging.rescale_minmax(x_hat).reshape(img.pixels.shape)
                score = imaging.psnr(shown, img.pixels)
                if images is not None:
                    images[(name, m, method)] = shown
            except (PmolsError, np.linalg.LinAlgError) as exc:
                log.warning("imaging %s/%s failed: %s", name, method, exc)
                score = math.nan
            rows.append({"object": name, "m": m, "method": method, "K": K, "psnr": score, "config_hash": h})
    return rows
