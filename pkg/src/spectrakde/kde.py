"""Kernel estimate of the limiting spectral density from one matrix's eigenvalues.

    f_n(x) = (p h)^-1 sum_i K((x - mu_i) / h)

with ``mu_i`` the eigenvalues of the p x p sample covariance matrix, and its
integral ``F_n``.  The Gaussian kernel is the default; any kernel passing
:func:`check_kernel` may be used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import ndtr

from .quadrature import integrate
from .specmat import eigvalsh

_SQRT_2PI = math.sqrt(2.0 * math.pi)
_CHUNK = 4_000_000  # max p * len(x) elements per kernel evaluation block


@dataclass(frozen=True)
class KernelSpec:
    """Kernel function with optional derivative and closed-form CDF."""

    name: str
    evaluator: Callable[[np.ndarray], np.ndarray]
    derivative: Optional[Callable[[np.ndarray], np.ndarray]] = None
    cdf: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __call__(self, u):
        return self.evaluator(u)


def _gauss(u):
    u = np.asarray(u, dtype=np.float64)
    return np.exp(-0.5 * u * u) / _SQRT_2PI


def _gauss_prime(u):
    u = np.asarray(u, dtype=np.float64)
    return -u * _gauss(u)


def gaussian_kernel() -> KernelSpec:
    """Standard normal density."""
    return KernelSpec("gaussian", _gauss, _gauss_prime, ndtr)


GAUSSIAN = gaussian_kernel()


@dataclass(frozen=True)
class KernelCheck:
    condition: str
    measured: float
    passed: bool


@dataclass(frozen=True)
class KernelReport:
    kernel: str
    checks: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self):
        return [f"{'PASS' if c.passed else 'FAIL'} {c.condition}: {c.measured:.6g}" for c in self.checks]


def check_kernel(k: KernelSpec, half_width: float = 50.0) -> KernelReport:
    """Numerically check boundedness, tail decay, unit mass and ∫|K'| < ∞.

    The derivative condition compares ∫|K'| (quadrature of the supplied
    derivative, or of central differences) with the total variation of K on
    a fine grid; a mismatch means K has jumps and is not absolutely
    continuous.
    """
    grid = np.linspace(-half_width, half_width, 100_001)
    kv = np.asarray(k.evaluator(grid), dtype=np.float64)
    sup = float(np.max(np.abs(kv))) if np.all(np.isfinite(kv)) else math.inf
    checks = [KernelCheck("sup|K| finite", sup, math.isfinite(sup))]

    tails = []
    for r in (10.0, 20.0, 50.0):
        pts = np.array([-r, r])
        tails.append(float(np.max(np.abs(pts * k.evaluator(pts)))))
    decaying = tails[0] >= tails[1] >= tails[2] and tails[2] < 1e-8
    checks.append(KernelCheck("|x K(x)| -> 0 (value at |x|=50)", tails[2], decaying))

    mass, _ = integrate(k.evaluator, -half_width, half_width, atol=1e-12, pieces=200, strict=False)
    checks.append(KernelCheck("integral of K equals 1", float(mass), abs(mass - 1.0) <= 1e-6))

    if k.derivative is not None:
        dk = k.derivative
    else:
        step = 1e-6
        dk = lambda u: (k.evaluator(u + step) - k.evaluator(u - step)) / (2 * step)  # noqa: E731
    var_quad, _ = integrate(lambda u: np.abs(dk(u)), -half_width, half_width,
                            atol=1e-9, pieces=200, strict=False)
    var_grid = float(np.sum(np.abs(np.diff(kv))))
    ok = math.isfinite(var_quad) and abs(var_quad - var_grid) <= 1e-3 * max(1.0, var_grid)
    checks.append(KernelCheck("integral of |K'| finite (matches total variation)", float(var_quad), ok))
    return KernelReport(k.name, tuple(checks))


@dataclass(frozen=True)
class BandwidthRule:
    """``default`` (0.5 n^-1/3), ``power`` (coef n^-exponent) or ``fixed``."""

    kind: str = "default"
    coef: float = 0.5
    exponent: float = 1.0 / 3.0
    h: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("default", "power", "fixed"):
            raise ValueError(f"unknown bandwidth rule {self.kind!r}")
        if self.kind == "fixed" and not (self.h is not None and self.h > 0):
            raise ValueError("fixed bandwidth must be positive")

    @classmethod
    def power(cls, coef: float, exponent: float) -> "BandwidthRule":
        return cls("power", coef, exponent)

    @classmethod
    def fixed(cls, h: float) -> "BandwidthRule":
        return cls("fixed", h=h)

    @classmethod
    def parse(cls, text: str) -> "BandwidthRule":
        """``default``, ``fixed:<h>`` or ``power:<coef>:<exp>`` (h = coef n^-exp)."""
        parts = text.strip().split(":")
        try:
            if parts == ["default"]:
                return cls()
            if parts[0] == "fixed" and len(parts) == 2:
                return cls.fixed(float(parts[1]))
            if parts[0] == "power" and len(parts) == 3:
                return cls.power(float(parts[1]), float(parts[2]))
        except ValueError as exc:
            raise ValueError(f"bad bandwidth {text!r}: {exc}") from None
        raise ValueError(f"bad bandwidth {text!r}; expected default, fixed:<h> or power:<coef>:<exp>")

    def label(self) -> str:
        if self.kind == "default":
            return "default"
        if self.kind == "fixed":
            return f"fixed:{self.h!r}"
        return f"power:{self.coef!r}:{self.exponent!r}"

    def satisfies_band_condition(self) -> bool:
        """n h^{5/2} -> inf and h -> 0 (needed for general populations)."""
        if self.kind == "fixed":
            return False
        return 0.0 < self.exponent < 0.4


def bandwidth(rule: BandwidthRule, n: int) -> float:
    if n < 1:
        raise ValueError("n must be >= 1")
    if rule.kind == "fixed":
        h = rule.h
    elif rule.kind == "default":
        h = 0.5 * n ** (-1.0 / 3.0)
    else:
        h = rule.coef * n ** (-rule.exponent)
    if not h > 0:
        raise ValueError(f"bandwidth must be positive, got {h!r}")
    return float(h)


@dataclass(frozen=True)
class EmpiricalSpectrum:
    """Sorted eigenvalues of a p x p sample covariance built from n samples."""

    eigenvalues: np.ndarray
    n: int

    def __post_init__(self):
        ev = np.sort(np.atleast_1d(np.asarray(self.eigenvalues, dtype=np.float64)))
        if ev.size == 0:
            raise ValueError("empty spectrum")
        if not np.all(np.isfinite(ev)):
            raise ValueError("spectrum has non-finite eigenvalues")
        ev.setflags(write=False)
        object.__setattr__(self, "eigenvalues", ev)

    @classmethod
    def from_matrix(cls, a, n: int) -> "EmpiricalSpectrum":
        return cls(eigvalsh(a), n)

    @property
    def p(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def ratio(self) -> float:
        return self.p / self.n

    def esd(self, x):
        """Empirical spectral distribution F(x) = #{mu_i <= x} / p."""
        return np.searchsorted(self.eigenvalues, x, side="right") / self.p


def _check(spec: EmpiricalSpectrum, h: float):
    if not h > 0:
        raise ValueError(f"bandwidth must be positive, got {h!r}")
    if spec.p == 0:
        raise ValueError("empty spectrum")


def _kernel_average(fn, spec: EmpiricalSpectrum, h: float, x: np.ndarray) -> np.ndarray:
    mu = spec.eigenvalues
    out = np.empty(x.size)
    step = max(1, _CHUNK // mu.size)
    for start in range(0, x.size, step):
        xs = x[start:start + step]
        out[start:start + step] = fn((xs[:, None] - mu[None, :]) / h).mean(axis=1)
    return out


def kde_density(spec: EmpiricalSpectrum, k: KernelSpec, h: float, x):
    """f_n(x); vectorized over ``x``."""
    _check(spec, h)
    scalar = np.ndim(x) == 0
    xv = np.atleast_1d(np.asarray(x, dtype=np.float64)).ravel()
    out = _kernel_average(k.evaluator, spec, h, xv) / h
    return float(out[0]) if scalar else out.reshape(np.shape(x))


def kde_cdf(spec: EmpiricalSpectrum, k: KernelSpec, h: float, x):
    """F_n(x) = integral of f_n up to x.

    Closed form (average of kernel CDFs) when the kernel carries one,
    otherwise adaptive quadrature of f_n from mu_min - 50 h.
    """
    _check(spec, h)
    scalar = np.ndim(x) == 0
    xv = np.atleast_1d(np.asarray(x, dtype=np.float64)).ravel()
    if k.cdf is not None:
        out = _kernel_average(k.cdf, spec, h, xv)
    else:
        lo = spec.eigenvalues[0] - 50.0 * h
        out = np.empty(xv.size)
        for i, xi in enumerate(xv):
            if xi <= lo:
                out[i] = 0.0
                continue
            pieces = int(min(2000, max(1, math.ceil((xi - lo) / h))))
            out[i], _ = integrate(lambda t: kde_density(spec, k, h, t), lo, xi,
                                  atol=1e-10, pieces=pieces, strict=False)
    out = np.clip(out, 0.0, 1.0)
    return float(out[0]) if scalar else out.reshape(np.shape(x))
