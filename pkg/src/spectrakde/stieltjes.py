"""Stieltjes transforms of spectral estimates and what can be read off them.

Two uses are covered:

* the MMSE receiver SIR functional  p1 * ∫ (x + sigma^2)^-1 dF(x);
* recovery of the population spectrum H.  With mc the companion transform
  and z1 = -1/mc(z),

      s(z1) = mc (c - 1 - z mc) / c = ∫ dH(t) / (t - z1),

  so samples of s along a contour are samples of the Stieltjes transform of
  H, from which its moments are fitted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import wofz

from . import limitlaw
from .kde import EmpiricalSpectrum, KernelSpec, kde_density
from .limitlaw import SpectralLaw, companion_from_primary
from .quadrature import integrate

QUAD_ATOL = 1e-9


class RecoveryError(ArithmeticError):
    pass


@dataclass(frozen=True)
class EmpiricalSource:
    spectrum: EmpiricalSpectrum

    def support(self):
        ev = self.spectrum.eigenvalues
        return float(ev[0]), float(ev[-1])


@dataclass(frozen=True)
class KdeSource:
    spectrum: EmpiricalSpectrum
    kernel: KernelSpec
    h: float
    # kernel mass outside [mu_min - tail*h, mu_max + tail*h] is ignored
    tail: float = 10.0

    def support(self):
        ev = self.spectrum.eigenvalues
        return float(ev[0] - self.tail * self.h), float(ev[-1] + self.tail * self.h)


@dataclass(frozen=True)
class LawSource:
    law: SpectralLaw

    def support(self):
        return self.law.support_bounds()


TransformSource = EmpiricalSource | KdeSource | LawSource


def _kde_transform_quadrature(src: KdeSource, z: complex) -> complex:
    lo, hi = src.support()
    pieces = int(min(4000, max(8, math.ceil((hi - lo) / src.h))))
    spec, k, h = src.spectrum, src.kernel, src.h
    value, _ = integrate(lambda x: kde_density(spec, k, h, x) / (x - z), lo, hi,
                         atol=QUAD_ATOL, rtol=1e-12, pieces=pieces)
    return complex(value)


def kde_transform_gaussian(spectrum: EmpiricalSpectrum, h: float, z) -> np.ndarray:
    """Closed form of the Gaussian-kernel transform via the Faddeeva function.

    For Im w > 0, ∫ phi(u) / (u - w) du = i sqrt(pi/2) wofz(w / sqrt 2).
    """
    z = np.atleast_1d(np.asarray(z, dtype=np.complex128))
    w = (z[:, None] - spectrum.eigenvalues[None, :]) / h
    vals = 1j * math.sqrt(math.pi / 2.0) * wofz(w / math.sqrt(2.0))
    return vals.mean(axis=1) / h


def stieltjes(source: TransformSource, z, method: str = "quadrature"):
    """m(z) = ∫ (x - z)^-1 dF(x) for z in the upper half plane.

    Empirical sources are exact sums; kernel sources integrate f_n with
    adaptive Gauss-Kronrod (abs tol 1e-9), or use the Faddeeva closed form
    with ``method="faddeeva"`` for the Gaussian kernel; laws call the
    Silverstein solver.
    """
    scalar = np.ndim(z) == 0
    zv = np.atleast_1d(np.asarray(z, dtype=np.complex128)).ravel()
    if np.any(zv.imag <= 0):
        raise ValueError("Stieltjes transform needs Im z > 0")
    if isinstance(source, EmpiricalSource):
        mu = source.spectrum.eigenvalues
        out = (1.0 / (mu[None, :] - zv[:, None])).mean(axis=1)
    elif isinstance(source, KdeSource):
        if method == "faddeeva":
            if source.kernel.name != "gaussian":
                raise ValueError("faddeeva method needs the Gaussian kernel")
            out = kde_transform_gaussian(source.spectrum, source.h, zv)
        else:
            out = np.array([_kde_transform_quadrature(source, zz) for zz in zv])
    elif isinstance(source, LawSource):
        out = np.asarray(limitlaw.stieltjes_law(source.law, zv))
    else:
        raise TypeError(f"unsupported transform source {type(source).__name__}")
    return complex(out[0]) if scalar else out.reshape(np.shape(z))


def mmse_sir_limit(source: TransformSource, sigma2: float, p1: float = 1.0) -> float:
    """p1 * ∫ (x + sigma2)^-1 dF(x): the large-system SIR of user 1."""
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    if not p1 > 0:
        raise ValueError("p1 must be positive")
    lo, hi = source.support()
    if lo <= -sigma2:
        raise ValueError(f"spectrum support reaches -sigma2 = {-sigma2!r}")
    if isinstance(source, EmpiricalSource):
        val = np.mean(1.0 / (source.spectrum.eigenvalues + sigma2))
    elif isinstance(source, KdeSource):
        spec, k, h = source.spectrum, source.kernel, source.h
        pieces = int(min(4000, max(8, math.ceil((hi - lo) / h))))
        val, _ = integrate(lambda x: kde_density(spec, k, h, x) / (x + sigma2), lo, hi,
                           atol=QUAD_ATOL, pieces=pieces)
    elif isinstance(source, LawSource):
        # m(-sigma2) is real; approach it from just above the axis
        val = limitlaw.stieltjes_law(source.law, complex(-sigma2, 1e-12)).real
    else:
        raise TypeError(f"unsupported transform source {type(source).__name__}")
    return float(p1 * val)


@dataclass(frozen=True)
class SSample:
    z: np.ndarray
    z1: np.ndarray
    s: np.ndarray
    companion: np.ndarray


def recover_s(source: TransformSource, c: float, z, method: str = "quadrature") -> SSample:
    """Estimate s(z1) = ∫ dH / (t - z1) at z1 = -1/mc(z).

    ``source`` is usually a :class:`KdeSource`; exact-law sources give the
    noise-free pipeline.
    """
    if not 0 < c <= 1:
        raise ValueError("recovery requires c in (0,1]")
    zv = np.atleast_1d(np.asarray(z, dtype=np.complex128)).ravel()
    m = np.atleast_1d(stieltjes(source, zv, method=method))
    return s_from_transform(c, m, zv)


def s_from_transform(c: float, m, z) -> SSample:
    z = np.atleast_1d(np.asarray(z, dtype=np.complex128))
    m = np.atleast_1d(np.asarray(m, dtype=np.complex128))
    mc = companion_from_primary(c, m, z)
    if np.any(~(np.asarray(mc).imag > 0)):
        raise RecoveryError("companion transform left upper half-plane")
    z1 = -1.0 / mc
    s = mc * (c - 1.0 - z * mc) / c
    return SSample(z, z1, s, np.asarray(mc))


@dataclass(frozen=True)
class Contour:
    """Horizontal segment z = x_j + i*im to the right of the spectrum.

    ``x_j`` spans [edge + start, edge + stop] where ``edge`` is the upper end
    of the source support.
    """

    im: float = 0.5
    start: float = 4.0
    stop: float = 40.0
    points: int = 24
    terms: int = 8
    residual_cap: float = 1e-3

    def __post_init__(self):
        if not self.im > 0:
            raise ValueError("contour imaginary part must be positive")
        if self.points < 4:
            raise ValueError("contour needs at least 4 points")

    def nodes(self, edge: float) -> np.ndarray:
        x = edge + np.geomspace(self.start, self.stop, self.points)
        return x + 1j * self.im


@dataclass(frozen=True)
class RecoveryResult:
    s_values: np.ndarray
    z1_values: np.ndarray
    h_moments: tuple
    tr_t2_over_n: float
    diagnostics: dict = field(default_factory=dict)


def fit_moments(z1, s, terms: int = 8):
    """Least-squares fit of -s(z1) = 1/z1 + sum_k M_k / z1^(k+1), M_k real.

    Returns ``(moments, relative_rms_residual)``.
    """
    z1 = np.asarray(z1, dtype=np.complex128)
    s = np.asarray(s, dtype=np.complex128)
    y = -s * z1 - 1.0
    design = np.stack([z1 ** (-k) for k in range(1, terms + 1)], axis=1)
    a = np.concatenate([design.real, design.imag])
    b = np.concatenate([y.real, y.imag])
    # column scaling keeps the high-order terms from dominating conditioning
    scale = np.linalg.norm(a, axis=0)
    coef, *_ = np.linalg.lstsq(a / scale, b, rcond=None)
    coef = coef / scale
    resid = np.linalg.norm(a @ coef - b) / max(np.linalg.norm(np.abs(s * z1)), 1e-300)
    return coef, float(resid)


def recover_population(source: TransformSource, c: float, contour: Optional[Contour] = None,
                       method: str = "quadrature") -> RecoveryResult:
    """First two moments of H from s(z1) samples along ``contour``.

    ``tr_t2_over_n`` is the second moment ∫ t^2 dH, i.e. tr(T^2)/p for the
    sampled population.
    """
    if not 0 < c < 1:
        raise ValueError("recovery requires c in (0,1)")
    contour = contour or Contour()
    _, edge = source.support()
    z = contour.nodes(edge)
    m = np.atleast_1d(stieltjes(source, z, method=method))
    mc = companion_from_primary(c, m, z)
    usable = np.isfinite(mc) & (np.asarray(mc).imag > 0)
    if usable.sum() < 4:
        raise RecoveryError(f"only {int(usable.sum())} usable contour points (need 4)")
    sample = s_from_transform(c, m[usable], z[usable])
    if usable.sum() < contour.terms:
        terms = int(usable.sum()) - 1
    else:
        terms = contour.terms
    coef, resid = fit_moments(sample.z1, sample.s, terms)
    m1, m2 = float(coef[0]), float(coef[1])
    diagnostics = {
        "fit_residual": resid,
        "contour_im": contour.im,
        "contour_x": [float(v) for v in z[usable].real],
        "terms": terms,
        "usable_points": int(usable.sum()),
        "min_im_z1": float(sample.z1.imag.min()),
    }
    if resid > contour.residual_cap:
        raise RecoveryError(f"moment fit residual {resid:.3e} exceeds cap {contour.residual_cap:.1e}")
    if m2 < m1 * m1 - 1e-9:
        raise RecoveryError(f"recovered moments imply negative variance (m1={m1:.6g}, m2={m2:.6g})")
    return RecoveryResult(sample.s, sample.z1, (m1, m2), m2, diagnostics)


@dataclass(frozen=True)
class InversionResult:
    v_values: np.ndarray
    masses: np.ndarray
    extrapolated: float


def invert_stieltjes(transform: Callable[[np.ndarray], np.ndarray], interval, v_sequence) -> InversionResult:
    """Mass of [a, b] from (1/pi) ∫_a^b Im m(u + iv) du as v -> 0.

    ``transform`` must accept an array of complex points.  The last two
    v values feed a first-order Richardson extrapolation.
    """
    a, b = map(float, interval)
    if not b > a:
        raise ValueError("interval must satisfy a < b")
    v = np.asarray(v_sequence, dtype=np.float64)
    if v.size < 2 or np.any(v <= 0) or np.any(np.diff(v) >= 0):
        raise ValueError("v_sequence must be strictly decreasing positive values (at least two)")
    masses = []
    for vi in v:
        pieces = int(min(2000, max(4, math.ceil((b - a) / (20.0 * vi)))))
        val, _ = integrate(lambda u: np.imag(transform(u + 1j * vi)), a, b,
                           atol=1e-8, pieces=pieces, strict=False)
        masses.append(val / math.pi)
    masses = np.array(masses)
    v1, v2 = v[-2], v[-1]
    extrapolated = masses[-1] + (masses[-1] - masses[-2]) * v2 / (v1 - v2)
    return InversionResult(v, masses, float(extrapolated))
