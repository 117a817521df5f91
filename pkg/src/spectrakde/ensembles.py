"""Seeded sampling of entry distributions and population matrices.

Random streams use numpy's Philox4x64 counter-based generator.  Every draw is
keyed by ``(seed, stream, replicate)`` through :class:`numpy.random.SeedSequence`, so the
data matrix X and the auxiliary matrix Y of a Wishart population never share a
stream, and replicate ``i`` of an experiment gets its own key.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .specmat import as_symmetric, eigh, symmetrize

STREAM_X = 0
STREAM_T = 1


def generator(seed: int, stream: int = STREAM_X, replicate: int = 0) -> np.random.Generator:
    """Philox generator keyed by the fixed-length tuple (seed, stream, replicate)."""
    if seed < 0 or replicate < 0:
        raise ValueError("seed and replicate must be non-negative")
    key = [int(seed), int(stream), int(replicate)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finitely supported probability measure (sorted, merged atoms)."""

    locations: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        loc = np.atleast_1d(np.asarray(self.locations, dtype=np.float64))
        mass = np.atleast_1d(np.asarray(self.masses, dtype=np.float64))
        if loc.shape != mass.shape or loc.ndim != 1 or loc.size == 0:
            raise ValueError("locations and masses must be equal-length non-empty vectors")
        if not np.all(np.isfinite(loc)):
            raise ValueError("atom locations must be finite")
        if np.any(mass <= 0):
            raise ValueError("atom masses must be positive")
        if abs(mass.sum() - 1.0) > 1e-12:
            raise ValueError(f"atom masses sum to {mass.sum()!r}, not 1")
        order = np.argsort(loc, kind="stable")
        loc, mass = loc[order], mass[order]
        loc.setflags(write=False)
        mass.setflags(write=False)
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "masses", mass)

    @classmethod
    def from_pairs(cls, pairs) -> "DiscreteMeasure":
        pairs = list(pairs)
        return cls([a for a, _ in pairs], [w for _, w in pairs])

    @classmethod
    def point(cls, location: float = 1.0) -> "DiscreteMeasure":
        return cls([location], [1.0])

    @classmethod
    def empirical(cls, values) -> "DiscreteMeasure":
        """Equal mass 1/p at each value; exact ties are merged."""
        values = np.asarray(values, dtype=np.float64)
        locs, counts = np.unique(values, return_counts=True)
        return cls(locs, counts / values.size)

    def moment(self, k: int) -> float:
        return float(np.sum(self.masses * self.locations**k))

    def pairs(self):
        return list(zip(self.locations.tolist(), self.masses.tolist()))


@dataclass(frozen=True)
class EntryDistribution:
    """Standardized (mean 0, variance 1) i.i.d. entry law.

    ``kind`` is ``"shifted_exponential"``, ``"rademacher"`` or ``"custom"``;
    a custom law supplies an inverse CDF mapping uniforms on (0, 1] to draws.
    """

    kind: str
    inverse_cdf: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)
    label: str = ""

    def __post_init__(self):
        if self.kind not in ("shifted_exponential", "rademacher", "custom"):
            raise ValueError(f"unknown entry distribution {self.kind!r}")
        if self.kind == "custom" and self.inverse_cdf is None:
            raise ValueError("custom distribution needs an inverse_cdf")

    @property
    def name(self) -> str:
        return self.label or {"shifted_exponential": "exp", "rademacher": "bion"}.get(self.kind, "custom")


EXPONENTIAL = EntryDistribution("shifted_exponential")
RADEMACHER = EntryDistribution("rademacher")

_ENSEMBLE_ALIASES = {
    "exp": EXPONENTIAL,
    "exponential": EXPONENTIAL,
    "shifted_exponential": EXPONENTIAL,
    "bion": RADEMACHER,
    "binomial": RADEMACHER,
    "rademacher": RADEMACHER,
}


def entry_distribution(name: str) -> EntryDistribution:
    try:
        return _ENSEMBLE_ALIASES[name.strip().lower()]
    except KeyError:
        raise ValueError(f"unknown ensemble {name!r} (expected exp or bion)") from None


def draw(dist: EntryDistribution, size, rng: np.random.Generator) -> np.ndarray:
    if dist.kind == "rademacher":
        return np.where(rng.random(size) < 0.5, -1.0, 1.0)
    # 1 - U lies in (0, 1], so the logarithm stays finite.
    u = 1.0 - rng.random(size)
    if dist.kind == "shifted_exponential":
        # P(X > x) = exp(-(x + 1)) for x >= -1
        return -np.log(u) - 1.0
    return np.asarray(dist.inverse_cdf(u), dtype=np.float64).reshape(size)


def sample_entries(dist: EntryDistribution, p: int, n: int, seed: int,
                   stream: int = STREAM_X, replicate: int = 0) -> np.ndarray:
    """p x n matrix of i.i.d. standardized draws, reproducible per key."""
    if p < 1 or n < 1:
        raise ValueError(f"matrix size must be positive, got {p}x{n}")
    return draw(dist, (p, n), generator(seed, stream, replicate))


@dataclass(frozen=True)
class PopulationSpec:
    """Population covariance T: identity, diagonal from a measure, or Wishart-type.

    For ``wishart``, T = Y Y^T / n2 with Y a p x n2 matrix of ``entry`` draws.
    """

    kind: str
    p: int
    measure: Optional[DiscreteMeasure] = None
    entry: Optional[EntryDistribution] = None
    n2: Optional[int] = None

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if self.kind == "identity":
            return
        if self.kind == "diagonal":
            if self.measure is None:
                raise ValueError("diagonal population needs a measure")
            if np.any(self.measure.locations <= 0):
                raise ValueError("diagonal population atoms must be positive")
        elif self.kind == "wishart":
            if self.entry is None or self.n2 is None:
                raise ValueError("wishart population needs entry distribution and n2")
            if self.n2 < self.p:
                raise ValueError(f"wishart population needs n2 >= p (got n2={self.n2}, p={self.p})")
        else:
            raise ValueError(f"unknown population kind {self.kind!r}")

    @property
    def is_identity(self) -> bool:
        return self.kind == "identity"

    def with_p(self, p: int, n2: Optional[int] = None) -> "PopulationSpec":
        if self.kind == "wishart":
            ratio = self.n2 // self.p if self.n2 % self.p == 0 else self.n2 / self.p
            return PopulationSpec("wishart", p, entry=self.entry, n2=n2 or int(round(ratio * p)))
        return PopulationSpec(self.kind, p, measure=self.measure)


def multiplicities(measure: DiscreteMeasure, p: int) -> np.ndarray:
    """Integer atom counts summing to p (largest-remainder rounding)."""
    raw = measure.masses * p
    counts = np.floor(raw).astype(int)
    short = p - counts.sum()
    if short > 0:
        # stable sort keeps ties in location order
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:short]] += 1
    return counts


def build_population(spec: PopulationSpec, seed: int = 0, replicate: int = 0):
    """Return ``(t, t_sqrt, h_n)`` where ``h_n`` is the ESD of ``t``."""
    p = spec.p
    if spec.kind == "identity":
        eye = np.eye(p)
        return eye, eye.copy(), DiscreteMeasure.point(1.0)
    if spec.kind == "diagonal":
        counts = multiplicities(spec.measure, p)
        diag = np.repeat(spec.measure.locations, counts)
        t = np.diag(diag)
        return t, np.diag(np.sqrt(diag)), DiscreteMeasure.empirical(diag)
    y = sample_entries(spec.entry, p, spec.n2, seed, stream=STREAM_T, replicate=replicate)
    t = symmetrize(y @ y.T) / spec.n2
    vals, vecs = eigh(t)
    if vals[0] <= 1e-10:
        raise ValueError(f"population not positive definite (min eigenvalue {vals[0]:.3e})")
    t_sqrt = symmetrize((vecs * np.sqrt(vals)) @ vecs.T)
    return as_symmetric(t, check=False), t_sqrt, DiscreteMeasure(vals, np.full(p, 1.0 / p))


def parse_population(text: str, p: int) -> PopulationSpec:
    """Parse ``identity``, ``diagonal:LOC=MASS,...`` or ``wishart:ENS:RATIO``."""
    kind, _, rest = text.strip().partition(":")
    kind = kind.lower()
    if kind == "identity":
        return PopulationSpec("identity", p)
    if kind == "diagonal":
        if not rest:
            raise ValueError("diagonal population needs atoms, e.g. diagonal:1=0.5,2=0.5")
        pairs = []
        for item in rest.split(","):
            loc, sep, mass = item.partition("=")
            if not sep:
                raise ValueError(f"bad atom {item!r}; expected LOC=MASS")
            pairs.append((float(loc), float(mass)))
        return PopulationSpec("diagonal", p, measure=DiscreteMeasure.from_pairs(pairs))
    if kind == "wishart":
        ens, _, ratio = rest.partition(":")
        ratio = float(ratio) if ratio else 4.0
        return PopulationSpec("wishart", p, entry=entry_distribution(ens or "bion"),
                              n2=int(round(ratio * p)))
    raise ValueError(f"unknown population {text!r}")
