"""Spacing ratios, minimum-singular-value moments and reference densities."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateError, DomainError, InputError, ParameterError


class RatioKind(str, enum.Enum):
    REAL = "realRatio"
    COMPLEX = "complexRatio"


class RatioSource(str, enum.Enum):
    A = "spectrum_of_A"
    AAT = "spectrum_of_AAT"


@dataclass(frozen=True, eq=False)
class RatioSample:
    kind: RatioKind
    values: np.ndarray
    source: RatioSource = RatioSource.AAT
    degenerate: int = 0

    def __len__(self):
        return len(self.values)

    def mean(self) -> float:
        if len(self.values) == 0:
            raise DegenerateError("empty ratio sample")
        return float(np.mean(self.values))


# Normalization families: (PE-side field, RGE-side field) of ReferenceConstants
FAMILIES = {
    "rR_AAT": ("rR_PEPET", "rR_RGERGET"),
    "rC_AAT": ("rC_PEPET", "rC_RGERGET"),
    "rC_A": ("rC_PE", "rC_RGE"),
}


@dataclass(frozen=True)
class ReferenceConstants:
    """Mean ratios of the PE and RGE endpoints used to normalize transition curves.

    Defaults are the published large-n values (n=1000, 1000 matrices).
    """

    rR_PEPET: float = 0.386
    rR_RGERGET: float = 0.531
    rC_PE: float = 0.500
    rC_PEPET: float = 0.500
    rC_RGE: float = 0.737
    rC_RGERGET: float = 0.569

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (0.0 < v < 1.0):
                raise ParameterError(f"{f.name}={v!r} is not in (0, 1)")
        for family, (lo, hi) in FAMILIES.items():
            if not getattr(self, hi) > getattr(self, lo):
                raise ParameterError(f"{family}: RGE-side value must exceed PE-side")

    def endpoints(self, family: str) -> tuple[float, float]:
        try:
            lo, hi = FAMILIES[family]
        except KeyError:
            raise ParameterError(f"unknown ratio family {family!r}") from None
        return getattr(self, lo), getattr(self, hi)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ReferenceConstants":
        """Accepts a flat mapping or a calibration document with a ``constants`` key."""
        data = data.get("constants", data)
        names = {f.name for f in fields(cls)}
        return cls(**{k: float(v) for k, v in data.items() if k in names})

    @classmethod
    def load(cls, path) -> "ReferenceConstants":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class MinSingularStats:
    mean: float
    mean_sq: float
    moment_ratio: float
    count: int


def real_spacing_ratios(spectrum, source=RatioSource.AAT) -> RatioSample:
    """min/max ratio of consecutive gaps of a real spectrum.

    Interior points only, so a spectrum of length n gives at most n - 2
    ratios. Where both gaps vanish the ratio is undefined; it is dropped and
    counted in ``degenerate``.
    """
    x = np.asarray(spectrum, dtype=float).ravel()
    if x.size < 3:
        raise InputError("need at least 3 values for spacing ratios")
    if not np.isfinite(x).all():
        raise InputError("spectrum has non-finite values")
    x = np.sort(x)[::-1]
    gaps = x[:-1] - x[1:]
    lo = np.minimum(gaps[:-1], gaps[1:])
    hi = np.maximum(gaps[:-1], gaps[1:])
    ok = hi > 0.0
    return RatioSample(
        RatioKind.REAL, lo[ok] / hi[ok], RatioSource(source), int(np.count_nonzero(~ok))
    )


def nearest_two(points) -> tuple[np.ndarray, np.ndarray]:
    """Distances from each point to its nearest and next-to-nearest neighbor.

    A k-d tree only selects the candidates; distances are recomputed as
    ``abs(z_j - z_k)`` so results match a brute-force search bit for bit.
    """
    z = np.asarray(points, dtype=complex).ravel()
    xy = np.column_stack([z.real, z.imag])
    # k=4 leaves room for self not coming first when points coincide
    k = min(4, len(z))
    _, idx = cKDTree(xy).query(xy, k=k)
    own = np.arange(len(z))[:, None]
    d = np.abs(z[idx] - z[:, None])
    # drop one self-index per row, keep the two smallest remaining
    is_self = idx == own
    first_self = is_self & (np.cumsum(is_self, axis=1) == 1)
    d = np.where(first_self, np.inf, d)
    d.sort(axis=1)
    return d[:, 0], d[:, 1]


def complex_spacing_ratios(spectrum, source=RatioSource.A) -> RatioSample:
    """Nearest over next-to-nearest neighbor distance for every point in the plane.

    Real spectra are accepted and treated as points on the real axis.
    """
    z = np.asarray(spectrum).ravel()
    if z.size < 3:
        raise InputError("need at least 3 values for spacing ratios")
    if not np.isfinite(z).all():
        raise InputError("spectrum has non-finite values")
    d1, d2 = nearest_two(z)
    ok = d2 > 0.0
    return RatioSample(
        RatioKind.COMPLEX, d1[ok] / d2[ok], RatioSource(source), int(np.count_nonzero(~ok))
    )


def normalize_ratio(raw_mean: float, family: str, refs: ReferenceConstants | None = None) -> float:
    """Map a mean ratio onto the PE -> 0, RGE -> 1 scale. Not clamped."""
    refs = refs or ReferenceConstants()
    pe, rge = refs.endpoints(family)
    if rge == pe:
        raise DegenerateError(f"{family}: PE and RGE references coincide")
    return (raw_mean - pe) / (rge - pe)


def min_singular_stats(samples) -> MinSingularStats:
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise InputError("no minimum singular values given")
    if (x < 0).any() or not np.isfinite(x).all():
        raise InputError("minimum singular values must be finite and >= 0")
    mean = math.fsum(x) / x.size
    mean_sq = math.fsum(x * x) / x.size
    if mean == 0.0:
        raise DegenerateError("mean of minimum singular values is zero")
    # the ratio is scale free; a power-of-two rescale avoids underflow exactly
    y = np.ldexp(x, -math.frexp(float(x.max()))[1])
    ratio = (math.fsum(y * y) / x.size) / (math.fsum(y) / x.size) ** 2
    return MinSingularStats(mean, mean_sq, ratio, int(x.size))


def _unit_interval(r):
    r = np.asarray(r, dtype=float)
    if ((r < 0.0) | (r > 1.0) | ~np.isfinite(r)).any():
        raise DomainError("ratio density is defined on [0, 1] only")
    return r


def _scalar_or_array(out, like):
    return float(out) if np.ndim(like) == 0 else out


def pdf_pe_ratio(r):
    """Ratio density for uncorrelated levels, 2 / (1 + r)^2."""
    x = _unit_interval(r)
    return _scalar_or_array(2.0 / (1.0 + x) ** 2, r)


def pdf_goe_ratio(r):
    """GOE 3x3 surmise for the ratio density."""
    x = _unit_interval(r)
    return _scalar_or_array(6.75 * (x + x * x) / (1.0 + x + x * x) ** 2.5, r)


def pdf_pe_min_singular(x):
    """Exponential law for lambda_min / <lambda_min> in the Poisson limit."""
    y = np.asarray(x, dtype=float)
    if ((y < 0.0) | np.isnan(y)).any():
        raise DomainError("density is defined for x >= 0 only")
    return _scalar_or_array(np.exp(-y), x)


def cdf_pe_ratio(r):
    x = _unit_interval(r)
    return _scalar_or_array(2.0 * x / (1.0 + x), r)


@dataclass(frozen=True, eq=False)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    out_of_range: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def widths(self) -> np.ndarray:
        # bins are uniform; a single width avoids rounding noise from diff()
        width = (self.edges[-1] - self.edges[0]) / len(self.counts)
        return np.full(len(self.counts), width)

    @property
    def in_range(self) -> int:
        return int(self.counts.sum())

    @property
    def density(self) -> np.ndarray:
        total = self.in_range
        if total == 0:
            raise InputError("histogram has no in-range data")
        return self.counts / (total * self.widths)

    def merged(self, other: "Histogram") -> "Histogram":
        if not np.array_equal(self.edges, other.edges):
            raise InputError("cannot merge histograms with different bins")
        return Histogram(
            self.edges, self.counts + other.counts, self.out_of_range + other.out_of_range
        )


def bin_edges(lo: float, hi: float, bins: int) -> np.ndarray:
    if int(bins) != bins or bins < 1:
        raise InputError(f"bins must be a positive integer, got {bins!r}")
    if not hi > lo:
        raise InputError(f"empty range [{lo}, {hi}]")
    return np.linspace(lo, hi, int(bins) + 1)


def count_into(values, edges: np.ndarray) -> Histogram:
    """Histogram counts on fixed edges; values outside [lo, hi] are tallied apart."""
    v = np.asarray(values, dtype=float).ravel()
    counts, _ = np.histogram(v, bins=edges)
    inside = (v >= edges[0]) & (v <= edges[-1])
    return Histogram(edges, counts.astype(np.int64), int(v.size - np.count_nonzero(inside)))


def histogram(values, range=(0.0, 1.0), bins: int = 50) -> Histogram:
    """Density histogram normalized over the in-range values."""
    h = count_into(values, bin_edges(range[0], range[1], bins))
    if h.in_range == 0:
        raise InputError("no values fall inside the histogram range")
    return h
