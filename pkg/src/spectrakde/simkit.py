"""Monte-Carlo experiments: density curves, MSE tables, Kolmogorov rates.

Replicate ``i`` of an experiment with seed ``s`` draws X from the stream keyed
``(s, 0, i)`` and, for random populations, Y from ``(s, 1, i)``.  Replicates
run on a thread pool (the eigensolver releases the GIL) and are reduced by
index with exactly rounded sums, so results do not depend on completion
order or thread count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .ensembles import (
    EXPONENTIAL,
    DiscreteMeasure,
    EntryDistribution,
    PopulationSpec,
    STREAM_X,
    build_population,
    sample_entries,
)
from .kde import GAUSSIAN, BandwidthRule, EmpiricalSpectrum, KernelSpec, bandwidth, kde_density
from .limitlaw import DensityCurve, SpectralLaw, density_curve, law_cdf_function
from .specmat import sample_covariance

REFERENCE_POINTS = (0.30, 0.511, 0.722, 0.933, 1.144, 1.356, 1.567, 1.778, 1.989, 2.20)
THREADS_ENV = "SPECTRA_KDE_THREADS"


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    return os.cpu_count() or 1


@dataclass(frozen=True)
class ExperimentConfig:
    ensemble: EntryDistribution = EXPONENTIAL
    population: str = "identity"
    p: int = 50
    n: int = 200
    replicates: int = 50
    bandwidth: BandwidthRule = field(default_factory=BandwidthRule)
    kernel: KernelSpec = GAUSSIAN
    eval_points: tuple = REFERENCE_POINTS
    seed: int = 0
    limit: Optional[SpectralLaw] = None
    allow_wide: bool = False
    # population measure for "diagonal"; entry law and n2/p ratio for "wishart"
    measure: Optional[DiscreteMeasure] = None
    wishart_entry: Optional[EntryDistribution] = None
    wishart_ratio: float = 4.0

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.p < 1 or self.n < 1:
            raise ValueError("p and n must be >= 1")
        if self.p >= self.n and not self.allow_wide:
            raise ValueError(f"p < n required (got p={self.p}, n={self.n}); set allow_wide to override")
        object.__setattr__(self, "eval_points", tuple(float(x) for x in self.eval_points))
        self.population_spec()

    @property
    def c(self) -> float:
        return self.p / self.n

    def population_spec(self) -> PopulationSpec:
        if self.population == "identity":
            return PopulationSpec("identity", self.p)
        if self.population == "diagonal":
            return PopulationSpec("diagonal", self.p, measure=self.measure)
        if self.population == "wishart":
            return PopulationSpec("wishart", self.p, entry=self.wishart_entry,
                                  n2=int(round(self.wishart_ratio * self.p)))
        raise ValueError(f"unknown population {self.population!r}")

    def h(self) -> float:
        return bandwidth(self.bandwidth, self.n)

    def resized(self, p: int, n: int) -> "ExperimentConfig":
        return replace(self, p=p, n=n)


@dataclass(frozen=True)
class MseTable:
    eval_points: np.ndarray
    mse: np.ndarray
    mode: str
    replicates: int

    def __post_init__(self):
        if self.mode not in ("vs_limit", "vs_average"):
            raise ValueError(f"unknown MSE mode {self.mode!r}")
        if len(self.eval_points) != len(self.mse):
            raise ValueError("eval_points and mse lengths differ")


@dataclass(frozen=True)
class RateReport:
    n_values: np.ndarray
    distances: np.ndarray
    fitted_exponent: float
    per_replicate: np.ndarray = field(default=None, repr=False)


def sample_spectrum(config: ExperimentConfig, replicate: int = 0):
    """Eigenvalues of one sampled A_n plus the population's ESD H_n."""
    pop = config.population_spec()
    t, t_sqrt, h_n = build_population(pop, config.seed, replicate)
    x = sample_entries(config.ensemble, config.p, config.n, config.seed, STREAM_X, replicate)
    a = sample_covariance(t_sqrt, x, identity_population=pop.is_identity)
    return EmpiricalSpectrum.from_matrix(a, config.n), h_n


def _map_replicates(fn: Callable[[int], object], replicates: int) -> list:
    workers = min(thread_count(), replicates)
    if workers <= 1:
        return [fn(i) for i in range(replicates)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(replicates)))


def run_density_curve(config: ExperimentConfig, grid: Optional[Sequence[float]] = None,
                      replicate: int = 0) -> DensityCurve:
    """f_n on ``grid`` (default: the config's eval points) for one matrix."""
    grid = np.asarray(config.eval_points if grid is None else grid, dtype=np.float64)
    spec, _ = sample_spectrum(config, replicate)
    return DensityCurve(grid, kde_density(spec, config.kernel, config.h(), grid))


def replicate_estimates(config: ExperimentConfig, points=None) -> np.ndarray:
    """replicates x len(points) matrix of f_n values."""
    pts = np.asarray(config.eval_points if points is None else points, dtype=np.float64)
    h = config.h()

    def one(i):
        spec, _ = sample_spectrum(config, i)
        return kde_density(spec, config.kernel, h, pts)

    return np.vstack(_map_replicates(one, config.replicates))


def exact_mean(rows: np.ndarray) -> np.ndarray:
    """Column means with exactly rounded sums (order independent)."""
    return np.array([math.fsum(col) for col in rows.T]) / rows.shape[0]


def mse_from_estimates(estimates: np.ndarray, reference: Optional[np.ndarray] = None):
    """(mode, mse): against ``reference`` if given, else against the replicate mean."""
    if reference is None:
        reference = exact_mean(estimates)
        mode = "vs_average"
    else:
        mode = "vs_limit"
    sq = (estimates - np.asarray(reference)[None, :]) ** 2
    return mode, exact_mean(sq)


def run_mse_experiment(config: ExperimentConfig) -> MseTable:
    """Pointwise MSE of f_n over replicates, against the limit law when known."""
    pts = np.asarray(config.eval_points, dtype=np.float64)
    est = replicate_estimates(config, pts)
    reference = None
    if config.limit is not None:
        reference = density_curve(config.limit, pts).values
    mode, mse = mse_from_estimates(est, reference)
    return MseTable(pts, mse, mode, config.replicates)


def kolmogorov_distance(spec: EmpiricalSpectrum, reference_cdf: Callable) -> float:
    """sup_x |F^A(x) - G(x)| for a nondecreasing reference CDF ``G``.

    F is constant between jumps, so the supremum is attained at a jump point
    or approached from its left; G is evaluated at both.
    """
    locs, counts = np.unique(spec.eigenvalues, return_counts=True)
    upper = np.cumsum(counts) / spec.p
    lower = upper - counts / spec.p
    g = np.asarray(reference_cdf(locs), dtype=np.float64)
    g_left = np.asarray(reference_cdf(np.nextafter(locs, -np.inf)), dtype=np.float64)
    d = max(np.max(np.abs(lower - g_left)), np.max(np.abs(upper - g)))
    return float(min(max(d, 0.0), 1.0))


def fitted_exponent(n_values, distances) -> float:
    slope, _ = np.polyfit(np.log(n_values), np.log(distances), 1)
    return float(slope)


def rate_check(base_config: ExperimentConfig, n_values: Sequence[int]) -> RateReport:
    """Mean Kolmogorov distance between the ESD and F_{c_n,H_n} for each n.

    p is ``round(c n)`` with c taken from ``base_config``.
    """
    n_values = np.asarray(list(n_values), dtype=int)
    if n_values.size < 3:
        raise ValueError("need >= 3 n-values")
    if np.any(np.diff(n_values) <= 0):
        raise ValueError("n-values must be increasing")
    c = base_config.c
    rows = []
    for n in n_values:
        cfg = base_config.resized(max(1, int(round(c * n))), int(n))
        fixed_ref = None
        if cfg.population != "wishart":
            _, _, h_n = build_population(cfg.population_spec(), cfg.seed)
            fixed_ref = law_cdf_function(SpectralLaw(cfg.p / cfg.n, h_n))

        def one(i, cfg=cfg, fixed_ref=fixed_ref):
            spec, h_n = sample_spectrum(cfg, i)
            ref = fixed_ref or law_cdf_function(SpectralLaw(cfg.p / cfg.n, h_n))
            return kolmogorov_distance(spec, ref)

        rows.append(_map_replicates(one, cfg.replicates))
    per = np.array(rows)
    dist = exact_mean(per.T)
    return RateReport(n_values, dist, fitted_exponent(n_values, dist), per)


def sup_distance(values: np.ndarray, reference: np.ndarray) -> float:
    return float(np.max(np.abs(np.asarray(values) - np.asarray(reference))))
