"""Limiting spectral laws of sample covariance matrices.

``F_{c,H}`` is the limit of the eigenvalue distribution of
``n^-1 T^{1/2} X X^T T^{1/2}`` when ``p/n -> c`` and the spectrum of ``T``
tends to ``H``.  For ``H = delta_1`` it is the Marcenko-Pastur law and has a
closed form; otherwise its density is read off the companion Stieltjes
transform ``mc(z)``, the unique root in the upper half plane of

    mc = -1 / (z - c * sum_k w_k t_k / (1 + t_k mc)),

evaluated just above the real axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import trapezoid

from .ensembles import DiscreteMeasure

DEFAULT_ETA = 1e-6
RESIDUAL_TOL = 1e-10
NEGATIVE_DENSITY_CLAMP = -1e-9


class SolverError(ArithmeticError):
    """Fixed-point solve failed; ``residual`` holds the last residual."""

    def __init__(self, message: str, residual: float = math.nan):
        self.residual = residual
        super().__init__(message)


@dataclass(frozen=True)
class SpectralLaw:
    """The pair (c, H) identifying ``F_{c,H}``."""

    c: float
    h: DiscreteMeasure = field(default_factory=lambda: DiscreteMeasure.point(1.0))

    def __post_init__(self):
        if not (self.c > 0 and math.isfinite(self.c)):
            raise ValueError(f"aspect ratio c must be positive, got {self.c!r}")
        if not isinstance(self.h, DiscreteMeasure):
            object.__setattr__(self, "h", DiscreteMeasure.from_pairs(self.h))

    @property
    def is_marcenko_pastur(self) -> bool:
        return self.h.locations.size == 1 and self.h.locations[0] == 1.0

    @property
    def point_mass_at_zero(self) -> float:
        return max(0.0, 1.0 - 1.0 / self.c)

    def support_bounds(self) -> tuple[float, float]:
        """Interval enclosing the continuous part of the support."""
        lo, hi = mp_support(self.c)
        t = self.h.locations
        return float(lo * max(t.min(), 0.0)), float(hi * t.max())


@dataclass(frozen=True)
class DensityCurve:
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        if g.ndim != 1 or g.shape != v.shape:
            raise ValueError("grid and values must be equal-length vectors")
        if g.size > 1 and np.any(np.diff(g) <= 0):
            raise ValueError("grid must be strictly increasing")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)

    def integral(self) -> float:
        return float(trapezoid(self.values, self.grid))


@dataclass(frozen=True)
class CumulativeCurve:
    """CDF of the continuous part on a grid, plus the atom at the origin (c > 1)."""

    grid: np.ndarray
    values: np.ndarray
    atom_at_zero: float = 0.0

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        cont = np.interp(x, self.grid, self.values, left=0.0, right=self.values[-1])
        return cont + self.atom_at_zero * (x >= 0)


def mp_support(c: float) -> tuple[float, float]:
    if not c > 0:
        raise ValueError(f"aspect ratio c must be positive, got {c!r}")
    r = math.sqrt(c)
    return (1.0 - r) ** 2, (1.0 + r) ** 2


def mp_density(c: float, x):
    """Marcenko-Pastur density (continuous part) at ``x``; zero off [a, b]."""
    a, b = mp_support(c)
    x = np.asarray(x, dtype=np.float64)
    inside = (x > a) & (x < b)
    safe = np.where(inside, x, 1.0)
    vals = np.sqrt(np.clip((b - safe) * (safe - a), 0.0, None)) / (2.0 * math.pi * c * safe)
    out = np.where(inside, vals, 0.0)
    return float(out) if out.ndim == 0 else out


def companion_from_primary(c: float, m, z):
    """mc = -(1 - c)/z + c m."""
    z = np.asarray(z, dtype=np.complex128)
    if np.any(z == 0):
        raise ValueError("z must be nonzero")
    out = -(1.0 - c) / z + c * np.asarray(m, dtype=np.complex128)
    return complex(out) if out.ndim == 0 else out


def primary_from_companion(c: float, mc, z):
    """Inverse of :func:`companion_from_primary`."""
    z = np.asarray(z, dtype=np.complex128)
    if np.any(z == 0):
        raise ValueError("z must be nonzero")
    out = (np.asarray(mc, dtype=np.complex128) + (1.0 - c) / z) / c
    return complex(out) if out.ndim == 0 else out


def _weighted_sums(law: SpectralLaw, mc: np.ndarray):
    t = law.h.locations
    w = law.h.masses
    denom = 1.0 + mc[:, None] * t[None, :]
    s1 = (w * t / denom).sum(axis=1)
    s2 = (w * t * t / (denom * denom)).sum(axis=1)
    return s1, s2


def inverse_map(law: SpectralLaw, mc):
    """z(mc) = -1/mc + c sum w t / (1 + t mc)."""
    mc = np.atleast_1d(np.asarray(mc, dtype=np.complex128))
    s1, _ = _weighted_sums(law, mc)
    return -1.0 / mc + law.c * s1


def fixed_point_residual(law: SpectralLaw, mc, z):
    mc = np.atleast_1d(np.asarray(mc, dtype=np.complex128))
    z = np.broadcast_to(np.asarray(z, dtype=np.complex128), mc.shape)
    s1, _ = _weighted_sums(law, mc)
    return np.abs(mc + 1.0 / (z - law.c * s1))


def _damped_fixed_point(law, mc, z, steps, omega=0.5):
    # m <- (1 - w) m + w G(m); w halves wherever the residual grows.
    om = np.full(mc.shape, omega)
    s1, _ = _weighted_sums(law, mc)
    g = -1.0 / (z - law.c * s1)
    res = np.abs(mc - g)
    for _ in range(steps):
        cand = (1.0 - om) * mc + om * g
        cand = np.where(cand.imag > 0, cand, mc)
        s1, _ = _weighted_sums(law, cand)
        g_new = -1.0 / (z - law.c * s1)
        res_new = np.abs(cand - g_new)
        worse = res_new > res
        om = np.where(worse, 0.5 * om, om)
        mc = np.where(worse, mc, cand)
        g = np.where(worse, g, g_new)
        res = np.where(worse, res, res_new)
        if res.max() < 1e-8:
            break
    return mc


def _newton(law, mc, z, max_iter=60):
    # Newton on z(mc) - z = 0 with backtracking that keeps Im mc > 0 and
    # never increases |z(mc) - z|.
    c = law.c
    active = np.ones(mc.shape, dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        m = mc[idx]
        zz = z[idx]
        s1, s2 = _weighted_sums(law, m)
        g = -1.0 / m + c * s1 - zz
        dg = 1.0 / (m * m) - c * s2
        step = g / dg
        lam = np.ones(idx.size)
        cand = m - step
        for _ in range(40):
            s1c, _ = _weighted_sums(law, cand)
            gc = -1.0 / cand + c * s1c - zz
            bad = (cand.imag <= 0) | ~np.isfinite(cand) | (np.abs(gc) > np.abs(g))
            if not bad.any():
                break
            lam = np.where(bad, 0.5 * lam, lam)
            cand = np.where(bad, m - lam * step, cand)
        bad = (cand.imag <= 0) | ~np.isfinite(cand)
        cand = np.where(bad, m, cand)
        mc[idx] = cand
        tiny = np.abs(cand - m) <= 4e-16 * np.abs(cand)
        small = np.abs(gc) <= 1e-14 * np.maximum(1.0, np.abs(zz))
        active[idx[tiny | small | bad]] = False
    return mc


def solve_companion(law: SpectralLaw, z, ratio: float = 0.5, tol: float = RESIDUAL_TOL):
    """Companion Stieltjes transform ``mc(z)`` for each z in the upper half plane.

    Starts at ``-1/z`` on the line Im z = 1 and walks Im z down geometrically
    (factor ``ratio``) to the target, reusing the previous root at each level.
    Every returned value satisfies the fixed-point residual bound ``tol``.
    """
    z = np.atleast_1d(np.asarray(z, dtype=np.complex128)).ravel()
    if np.any(z.imag <= 0):
        raise ValueError("solve_companion needs Im z > 0")
    target = z.imag
    levels = [1.0]
    while levels[-1] > target.min():
        levels.append(levels[-1] * ratio)
    start = np.maximum(target, 1.0)
    zl = z.real + 1j * start
    mc = _damped_fixed_point(law, -1.0 / zl, zl, steps=200)
    mc = _newton(law, mc, zl)
    for v in levels[1:]:
        im = np.maximum(target, v)
        moving = im < zl.imag
        if not moving.any():
            continue
        zl = z.real + 1j * im
        idx = np.flatnonzero(moving)
        m = _damped_fixed_point(law, mc[idx], zl[idx], steps=4)
        mc[idx] = _newton(law, m, zl[idx])
    res = fixed_point_residual(law, mc, z)
    bad = (res > tol) | (mc.imag <= 0) | ~np.isfinite(mc)
    if bad.any():
        idx = np.flatnonzero(bad)
        start = np.where(bad[idx] & (mc[idx].imag > 0) & np.isfinite(mc[idx]), mc[idx], -1.0 / z[idx])
        m = _damped_fixed_point(law, start, z[idx], steps=50)
        mc[idx] = _newton(law, m, z[idx], max_iter=200)
        res = fixed_point_residual(law, mc, z)
        bad = (res > tol) | (mc.imag <= 0) | ~np.isfinite(mc)
        if bad.any():
            worst = float(np.nanmax(np.where(bad, res, 0.0)))
            raise SolverError(
                f"Silverstein solve failed at z={z[bad][0]!r} (residual {worst:.3e})", worst)
    return mc


def solve_silverstein(law: SpectralLaw, z):
    """Companion transform at a single point or an array of points."""
    scalar = np.ndim(z) == 0
    out = solve_companion(law, z)
    return complex(out[0]) if scalar else out.reshape(np.shape(z))


def stieltjes_law(law: SpectralLaw, z):
    """Stieltjes transform m(z) of ``F_{c,H}`` itself (not the companion)."""
    scalar = np.ndim(z) == 0
    zz = np.atleast_1d(np.asarray(z, dtype=np.complex128)).ravel()
    m = primary_from_companion(law.c, solve_companion(law, zz), zz)
    return complex(m[0]) if scalar else np.asarray(m).reshape(np.shape(z))


def limit_density(law: SpectralLaw, x, eta: float = DEFAULT_ETA):
    """Density of ``F_{c,H}`` at real ``x`` as Im m(x + i eta) / pi."""
    if not eta > 0:
        raise ValueError("eta must be positive")
    if np.any(law.h.locations <= 0):
        raise ValueError("density evaluation needs all population atoms > 0")
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if np.any(x == 0):
        raise ValueError("limit_density is undefined at x = 0")
    z = x + 1j * eta
    m = primary_from_companion(law.c, solve_companion(law, z), z)
    dens = np.asarray(m).imag / math.pi
    if law.c > 1:
        # remove the smeared atom at the origin; it is carried separately
        dens = dens - law.point_mass_at_zero * (eta / (x * x + eta * eta)) / math.pi
    if np.any(dens < NEGATIVE_DENSITY_CLAMP):
        raise SolverError(f"negative density {dens.min():.3e}", float(-dens.min()))
    dens = np.clip(dens, 0.0, None)
    return float(dens[0]) if scalar else dens


def default_grid(law: SpectralLaw, points: int = 2001, margin: float = 0.1) -> np.ndarray:
    lo, hi = law.support_bounds()
    grid = np.linspace(lo - margin, hi + margin, points)
    return grid[grid != 0.0]


def density_curve(law: SpectralLaw, grid: Optional[np.ndarray] = None, eta: float = DEFAULT_ETA) -> DensityCurve:
    if grid is None:
        grid = default_grid(law)
    grid = np.asarray(grid, dtype=np.float64)
    if law.is_marcenko_pastur:
        return DensityCurve(grid, mp_density(law.c, grid))
    return DensityCurve(grid, limit_density(law, grid, eta))


def limit_cdf(law: SpectralLaw, grid, eta: float = DEFAULT_ETA) -> CumulativeCurve:
    """Trapezoid CDF of the continuous part of ``F_{c,H}`` on ``grid``.

    For c > 1 the values run from 0 to about 1/c; the origin atom is reported
    in ``atom_at_zero``.
    """
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing with at least two points")
    dens = limit_density(law, grid, eta)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
    return CumulativeCurve(grid, cum, law.point_mass_at_zero)


def mp_cdf_function(c: float, points: int = 20001) -> CumulativeCurve:
    """Tabulated Marcenko-Pastur CDF (continuous part) for Kolmogorov distances.

    The grid is Chebyshev-spaced on [a, b] so the square-root edges are
    resolved; cumulative integration is by the trapezoid rule.
    """
    a, b = mp_support(c)
    theta = np.linspace(math.pi, 0.0, points)
    grid = 0.5 * (a + b) + 0.5 * (b - a) * np.cos(theta)
    dens = mp_density(c, grid)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
    cum *= (1.0 if c <= 1 else 1.0 / c) / cum[-1]
    return CumulativeCurve(grid, cum, max(0.0, 1.0 - 1.0 / c))


def law_cdf_function(law: SpectralLaw, points: int = 4001, eta: float = DEFAULT_ETA) -> CumulativeCurve:
    if law.is_marcenko_pastur:
        return mp_cdf_function(law.c)
    lo, hi = law.support_bounds()
    grid = np.linspace(max(lo - 0.05, 1e-9), hi + 0.05, points)
    return limit_cdf(law, grid, eta)
