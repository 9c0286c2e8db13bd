"""Deterministic and sampling integrators with reproducible parallelism.

Three methods share one entry point, :func:`integrate`:

* ``AdaptiveProduct`` wraps :func:`scipy.integrate.cubature`.  Up to four
  dimensions it uses the tensor-product Gauss-Kronrod rule; beyond that the
  Genz-Malik rule.  The error estimate is the embedded-rule difference.
* ``QuasiMonteCarlo`` averages randomly scrambled Sobol' replicas; the
  error estimate is the replica standard error.
* ``MonteCarlo`` draws points in fixed-size blocks.  Block ``b`` comes from a
  Philox generator keyed by the seed with ``b`` in its counter, so
  the point set is a pure function of ``(seed, block index)``.  Block
  partial sums are reduced in index order after the worker pool returns,
  which makes the estimate independent of the worker count.

The sampling methods double their sample count until the standard error
meets the tolerance or ``max_evals`` is exhausted.  Because the
``n``-sample set is always a prefix of the ``2n``-sample set, tightening the
tolerance only ever adds points.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
from scipy import integrate as sp_integrate
from scipy.stats import qmc

__all__ = [
    "Method",
    "IntegrationConfig",
    "IntegralResult",
    "integrate",
    "mc_block",
    "MC_BLOCK_SIZE",
    "MAX_DIMENSION",
]

MC_BLOCK_SIZE = 4096
MAX_DIMENSION = 13
_QMC_REPLICAS = 8


class Method(str, enum.Enum):
    ADAPTIVE_PRODUCT = "adaptive"
    QUASI_MONTE_CARLO = "qmc"
    MONTE_CARLO = "mc"

    @classmethod
    def parse(cls, text) -> "Method":
        if isinstance(text, Method):
            return text
        key = str(text).strip().lower().replace("-", "").replace("_", "")
        aliases = {
            "adaptive": cls.ADAPTIVE_PRODUCT, "adaptiveproduct": cls.ADAPTIVE_PRODUCT,
            "qmc": cls.QUASI_MONTE_CARLO, "quasimontecarlo": cls.QUASI_MONTE_CARLO,
            "mc": cls.MONTE_CARLO, "montecarlo": cls.MONTE_CARLO,
        }
        if key not in aliases:
            raise ValueError(f"unknown integration method {text!r}")
        return aliases[key]


@dataclass(frozen=True)
class IntegrationConfig:
    """Integration controls.

    A result is accepted when its error estimate is at most
    ``max(rel_tol * |estimate|, abs_tol)``.
    ``truncation_sigmas`` is consumed by callers that cut infinite Gaussian
    directions down to finite boxes; ``integrate`` itself only sees boxes.
    """

    method: Method = Method.ADAPTIVE_PRODUCT
    rel_tol: float = 1e-2
    abs_tol: float = 0.0
    max_evals: int = 2_000_000
    truncation_sigmas: float = 6.0
    seed: int = 0
    workers: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "method", Method.parse(self.method))
        if not (self.rel_tol > 0 and math.isfinite(self.rel_tol)):
            raise ValueError("rel_tol must be > 0")
        if not (self.abs_tol >= 0):
            raise ValueError("abs_tol must be >= 0")
        if self.truncation_sigmas < 4:
            raise ValueError("truncation_sigmas must be >= 4")
        if int(self.max_evals) != self.max_evals or self.max_evals < 1000:
            raise ValueError("max_evals must be an integer >= 1000")
        if not (0 <= int(self.seed) < 2**64) or int(self.seed) != self.seed:
            raise ValueError("seed must be an integer in [0, 2**64)")
        if int(self.workers) != self.workers or self.workers < 1:
            raise ValueError("workers must be an integer >= 1")
        object.__setattr__(self, "max_evals", int(self.max_evals))
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "workers", int(self.workers))

    def with_(self, **changes) -> "IntegrationConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class IntegralResult:
    estimate: float
    error_estimate: float
    evals: int
    converged: bool


Integrand = Callable[[np.ndarray], np.ndarray]


def _tolerance(estimate: float, config: IntegrationConfig) -> float:
    return max(config.rel_tol * abs(estimate), config.abs_tol)


def _check_domain(domain) -> tuple[np.ndarray, np.ndarray]:
    dom = np.asarray(domain, dtype=float)
    if dom.ndim != 2 or dom.shape[1] != 2:
        raise ValueError("domain must be a sequence of (low, high) pairs")
    if dom.shape[0] < 1 or dom.shape[0] > MAX_DIMENSION:
        raise ValueError(f"dimension must be between 1 and {MAX_DIMENSION}")
    if not np.all(np.isfinite(dom)):
        raise ValueError("bounds must be finite; truncate Gaussian directions first")
    if np.any(dom[:, 1] <= dom[:, 0]):
        raise ValueError("each domain pair must satisfy low < high")
    return dom[:, 0].copy(), dom[:, 1].copy()


def _evaluate(integrand: Integrand, x: np.ndarray) -> np.ndarray:
    vals = np.asarray(integrand(x), dtype=float).reshape(-1)
    if vals.shape[0] != x.shape[0]:
        raise ValueError("integrand must return one value per point")
    return vals


def mc_block(seed: int, block: int, dim: int, size: int = MC_BLOCK_SIZE) -> np.ndarray:
    """Uniform points of Monte-Carlo block ``block`` in the unit cube.

    The generator state is a pure function of ``(seed, block)``.  The block
    index sits in the top counter word, so streams of different blocks never
    overlap however many values each one draws.
    """
    bitgen = np.random.Philox(key=int(seed), counter=[0, 0, 0, int(block)])
    return np.random.Generator(bitgen).random((size, dim))


def _map(config: IntegrationConfig, fn, items):
    items = list(items)
    if config.workers == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        return list(pool.map(fn, items))


def _adaptive(integrand, lo, hi, config):
    count = [0]

    def wrapped(x):
        count[0] += x.shape[0]
        return _evaluate(integrand, x)

    dim = lo.size
    per_region = 21**dim if dim <= 4 else (2**dim + 2 * dim * dim + 2 * dim + 1)
    rule = "gk21" if dim <= 4 else "genz-malik"
    max_sub = max(1, config.max_evals // per_region)
    # scipy stops at atol + rtol*|est|; halving both makes that imply the max() rule
    res = sp_integrate.cubature(wrapped, lo, hi, rule=rule, rtol=0.5 * config.rel_tol, atol=0.5 * config.abs_tol,
                                max_subdivisions=max_sub)
    est = float(np.asarray(res.estimate).reshape(-1)[0])
    err = float(np.asarray(res.error).reshape(-1)[0])
    converged = res.status == "converged" and err <= _tolerance(est, config)
    return IntegralResult(est, err, count[0], bool(converged))


def _mc(integrand, lo, hi, config):
    dim = lo.size
    vol = float(np.prod(hi - lo))

    def block_sums(b):
        u = mc_block(config.seed, b, dim)
        vals = _evaluate(integrand, lo + (hi - lo) * u)
        return float(np.sum(vals)), float(np.sum(vals * vals))

    sums = []
    n_blocks = max(1, 1024 // MC_BLOCK_SIZE)
    max_blocks = max(1, config.max_evals // MC_BLOCK_SIZE)
    while True:
        need = min(n_blocks, max_blocks)
        sums.extend(_map(config, block_sums, range(len(sums), need)))
        s1 = sum(s for s, _ in sums)
        s2 = sum(q for _, q in sums)
        n = len(sums) * MC_BLOCK_SIZE
        mean = s1 / n
        var = max(s2 / n - mean * mean, 0.0) * n / max(n - 1, 1)
        est = vol * mean
        err = vol * math.sqrt(var / n)
        if err <= _tolerance(est, config) or need >= max_blocks:
            return IntegralResult(est, err, n, bool(err <= _tolerance(est, config)))
        n_blocks = need * 2


def _qmc(integrand, lo, hi, config):
    dim = lo.size
    vol = float(np.prod(hi - lo))
    seeds = np.random.SeedSequence(config.seed).spawn(_QMC_REPLICAS)
    engines = [qmc.Sobol(d=dim, scramble=True, seed=np.random.default_rng(s)) for s in seeds]
    totals = [0.0] * _QMC_REPLICAS
    taken = 0
    m = 8
    while True:
        n_new = 2**m - taken

        def replica(i):
            pts = engines[i].random(n_new)
            return float(np.sum(_evaluate(integrand, lo + (hi - lo) * pts)))

        parts = _map(config, replica, range(_QMC_REPLICAS))
        totals = [t + p for t, p in zip(totals, parts)]
        taken = 2**m
        means = np.array(totals) / taken
        est = vol * float(np.mean(means))
        err = vol * float(np.std(means, ddof=1)) / math.sqrt(_QMC_REPLICAS)
        done = err <= _tolerance(est, config)
        if done or _QMC_REPLICAS * 2 ** (m + 1) > config.max_evals:
            return IntegralResult(est, err, _QMC_REPLICAS * taken, bool(done))
        m += 1


def integrate(integrand: Integrand, domain: Sequence[Sequence[float]], config: IntegrationConfig) -> IntegralResult:
    """Integrate a vectorised callback over a finite box.

    Parameters
    ----------
    integrand : callable
        Takes an ``(npoints, ndim)`` array and returns ``npoints`` values.  It
        must be pure and safe to call from several threads at once.
    domain : sequence of (low, high)
        At most 13 dimensions, all finite.
    config : IntegrationConfig

    Returns
    -------
    IntegralResult
        ``converged`` is False when ``max_evals`` ran out first; the best
        estimate is still returned.
    """
    lo, hi = _check_domain(domain)
    if config.method is Method.ADAPTIVE_PRODUCT:
        return _adaptive(integrand, lo, hi, config)
    if config.method is Method.MONTE_CARLO:
        return _mc(integrand, lo, hi, config)
    return _qmc(integrand, lo, hi, config)
