"""Monte Carlo ensembles over graph realizations.

Realization ``i`` of a point with master seed ``s`` is generated from
:func:`derive_seed(s, i) <derive_seed>`, so results do not depend on how
realizations are distributed over workers. Sweeps reuse the master seed at
every grid point (common random numbers): neighbouring points share weights
and uniforms, which keeps transition curves smooth.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BracketError,
    ConvergenceError,
    EnsembleError,
    NotFoundError,
    NumericalError,
    ParameterError,
)
from .models import SQRT2, GraphModelParams, Model, measure_degree
from .spectra import complex_eigenvalues, singular_values
from .stats import (
    FAMILIES,
    Histogram,
    MinSingularStats,
    RatioSource,
    ReferenceConstants,
    bin_edges,
    complex_spacing_ratios,
    count_into,
    min_singular_stats,
    normalize_ratio,
    real_spacing_ratios,
)

try:
    from threadpoolctl import threadpool_limits
except ImportError:  # pragma: no cover
    threadpool_limits = None

log = logging.getLogger(__name__)

RATIO_STATS = ("rR_AAT", "rC_AAT", "rC_A")
STATISTICS = RATIO_STATS + ("min_singular",)
FAILURE_FRACTION = 1e-3
LMIN_RANGE = (0.0, 8.0)


def derive_seed(master_seed: int, index: int) -> int:
    """128-bit seed of realization ``index`` under ``master_seed``."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(index),))
    hi, lo = ss.generate_state(2, dtype=np.uint64)
    return (int(hi) << 64) | int(lo)


def check_statistics(statistics) -> tuple[str, ...]:
    stats = tuple(dict.fromkeys(statistics))
    bad = [s for s in stats if s not in STATISTICS]
    if bad or not stats:
        raise ParameterError(
            f"unknown statistics {bad}; choose from {', '.join(STATISTICS)}"
        )
    return tuple(s for s in STATISTICS if s in stats)


@dataclass
class _Tally:
    """What one realization contributes to the point averages."""

    index: int
    seed: int
    k: float = 0.0
    sums: dict = field(default_factory=dict)  # stat -> (sum, count, degenerate)
    lmin: float | None = None
    counts: dict = field(default_factory=dict)  # stat -> Histogram
    error: str | None = None


def _realize(params, index, seed, statistics, squared, edges) -> _Tally:
    tally = _Tally(index, seed)
    context = {"seed": seed, "index": index, "params": params}
    try:
        g = params.generate(seed)
        tally.k = measure_degree(g)
        samples = {}
        if {"rR_AAT", "rC_AAT", "min_singular"} & set(statistics):
            sv = singular_values(g.adjacency, squared=squared, context=context)
            if "rR_AAT" in statistics:
                samples["rR_AAT"] = real_spacing_ratios(sv.values, RatioSource.AAT)
            if "rC_AAT" in statistics:
                samples["rC_AAT"] = complex_spacing_ratios(sv.values, RatioSource.AAT)
            tally.lmin = sv.minimum
        if "rC_A" in statistics:
            ev = complex_eigenvalues(g.adjacency, context=context)
            samples["rC_A"] = complex_spacing_ratios(ev.values, RatioSource.A)
    except NumericalError as exc:
        tally.error = str(exc)
        return tally
    for name, sample in samples.items():
        tally.sums[name] = (float(np.sum(sample.values)), len(sample), sample.degenerate)
        if edges is not None:
            tally.counts[name] = count_into(sample.values, edges)
    return tally


def _realize_chunk(params, indices, seeds, statistics, squared, edges):
    if threadpool_limits is None:
        return [_realize(params, i, s, statistics, squared, edges) for i, s in zip(indices, seeds)]
    with threadpool_limits(limits=1):
        return [_realize(params, i, s, statistics, squared, edges) for i, s in zip(indices, seeds)]


@dataclass(frozen=True)
class RatioSummary:
    mean: float
    stderr: float
    count: int
    degenerate: int = 0


@dataclass(eq=False)
class EnsembleStats:
    """Aggregated statistics of one (model, n, param) point."""

    model: Model
    n: int
    param: float | None
    seed: int
    realizations: int
    statistics: tuple
    squared: bool
    refs: ReferenceConstants
    k_mean: float = math.nan
    k_stderr: float = math.nan
    ratios: dict = field(default_factory=dict)
    normalized: dict = field(default_factory=dict)
    normalized_stderr: dict = field(default_factory=dict)
    min_singular: MinSingularStats | None = None
    min_singular_values: np.ndarray | None = field(default=None, repr=False)
    histograms: dict = field(default_factory=dict, repr=False)
    per_matrix: dict = field(default_factory=dict, repr=False)
    failures: list = field(default_factory=list)

    @property
    def completed(self) -> int:
        return self.realizations - len(self.failures)

    @property
    def params(self) -> GraphModelParams:
        return GraphModelParams.of(self.model, self.n, self.param)

    def _mean(self, name):
        s = self.ratios.get(name)
        return s.mean if s else math.nan

    @property
    def mean_rR_AAT(self):
        return self._mean("rR_AAT")

    @property
    def mean_rC_AAT(self):
        return self._mean("rC_AAT")

    @property
    def mean_rC_A(self):
        return self._mean("rC_A")

    def lmin_histogram(self, bins: int = 50, range=LMIN_RANGE) -> Histogram:
        """Histogram of lambda_min / <lambda_min>."""
        if self.min_singular is None:
            raise ParameterError("min_singular was not computed at this point")
        x = self.min_singular_values / self.min_singular.mean
        return count_into(x, bin_edges(range[0], range[1], bins))

    def row(self) -> dict:
        """Flat record in sweep-CSV column order."""
        ms = self.min_singular
        nan = math.nan
        return {
            "model": self.model.value,
            "n": self.n,
            "param": self.param if self.param is not None else nan,
            "k_mean": self.k_mean,
            "rR_AAT": self.mean_rR_AAT,
            "rC_AAT": self.mean_rC_AAT,
            "rC_A": self.mean_rC_A,
            "rR_AAT_norm": self.normalized.get("rR_AAT", nan),
            "rC_AAT_norm": self.normalized.get("rC_AAT", nan),
            "rC_A_norm": self.normalized.get("rC_A", nan),
            "lmin_mean": ms.mean if ms else nan,
            "lmin_meansq": ms.mean_sq if ms else nan,
            "lmin_moment_ratio": ms.moment_ratio if ms else nan,
            "samples": self.completed,
        }

    def to_dict(self) -> dict:
        out = {
            "model": self.model.value,
            "n": self.n,
            "param": self.param,
            "seed": self.seed,
            "realizations": self.realizations,
            "completed": self.completed,
            "statistics": list(self.statistics),
            "squared": self.squared,
            "k_mean": self.k_mean,
            "k_stderr": self.k_stderr,
            "ratios": {
                k: {"mean": v.mean, "stderr": v.stderr, "count": v.count, "degenerate": v.degenerate}
                for k, v in self.ratios.items()
            },
            "normalized": dict(self.normalized),
            "normalized_stderr": dict(self.normalized_stderr),
            "failures": [{"index": i, "seed": str(s), "error": e} for i, s, e in self.failures],
        }
        if self.min_singular is not None:
            ms = self.min_singular
            out["min_singular"] = {
                "mean": ms.mean, "mean_sq": ms.mean_sq,
                "moment_ratio": ms.moment_ratio, "count": ms.count,
            }
        if self.histograms:
            out["histograms"] = {
                k: {
                    "edges": h.edges.tolist(),
                    "counts": h.counts.tolist(),
                    "out_of_range": h.out_of_range,
                }
                for k, h in self.histograms.items()
            }
        return out


def _stderr(values: np.ndarray) -> float:
    if len(values) < 2:
        return math.nan
    mean = math.fsum(values) / len(values)
    var = math.fsum((values - mean) ** 2) / (len(values) - 1)
    return math.sqrt(var / len(values))


def _chunks(n_items: int, workers: int):
    # a handful of chunks per worker balances load without much pickling
    size = max(1, math.ceil(n_items / (4 * workers)))
    return [range(i, min(i + size, n_items)) for i in range(0, n_items, size)]


def _collect(params, realizations, seed, statistics, squared, edges, workers):
    seeds = [derive_seed(seed, i) for i in range(realizations)]
    if workers <= 1:
        return _realize_chunk(params, range(realizations), seeds, statistics, squared, edges)
    tallies = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(
                _realize_chunk, params, list(c), [seeds[i] for i in c],
                statistics, squared, edges,
            )
            for c in _chunks(realizations, workers)
        ]
        for fut in futures:
            tallies.extend(fut.result())
    return tallies


def run_point(
    params: GraphModelParams,
    realizations: int,
    seed: int = 0,
    statistics=STATISTICS,
    *,
    refs: ReferenceConstants | None = None,
    squared: bool = False,
    histograms: bool = False,
    bins: int = 50,
    workers: int = 1,
) -> EnsembleStats:
    """Generate ``realizations`` graphs at one parameter point and aggregate.

    Parameters
    ----------
    params : GraphModelParams
        Model, size and control parameter.
    realizations : int
        Number of independent matrices.
    seed : int
        Master seed; realization ``i`` uses ``derive_seed(seed, i)``.
    statistics : iterable of str
        Subset of ``rR_AAT``, ``rC_AAT``, ``rC_A``, ``min_singular``.
    refs : ReferenceConstants, optional
        Endpoints for the normalized ratios (published values by default).
    squared : bool
        Evaluate the AA^T ratios on sigma**2 instead of sigma.
    histograms : bool
        Also accumulate ratio histograms with ``bins`` bins on [0, 1].
    workers : int
        Process count; the result does not depend on it.

    Raises
    ------
    EnsembleError
        If more than 0.1% of the realizations hit a solver failure.
    """
    if not isinstance(params, GraphModelParams):
        raise ParameterError("params must be a GraphModelParams")
    if int(realizations) != realizations or realizations < 1:
        raise ParameterError(f"realizations must be >= 1, got {realizations!r}")
    if int(workers) != workers or workers < 1:
        raise ParameterError(f"workers must be >= 1, got {workers!r}")
    realizations = int(realizations)
    statistics = check_statistics(statistics)
    refs = refs or ReferenceConstants()
    edges = bin_edges(0.0, 1.0, bins) if histograms else None

    tallies = _collect(params, realizations, seed, statistics, squared, edges, int(workers))
    tallies.sort(key=lambda t: t.index)
    failures = [(t.index, t.seed, t.error) for t in tallies if t.error is not None]
    if len(failures) > FAILURE_FRACTION * realizations:
        idx, s, err = failures[0]
        raise EnsembleError(
            f"{len(failures)}/{realizations} realizations failed at {params}; "
            f"first: index={idx} seed={s}: {err}"
        )
    for idx, s, err in failures:
        log.warning("dropping realization %d (seed %d): %s", idx, s, err)
    good = [t for t in tallies if t.error is None]

    out = EnsembleStats(
        model=params.model, n=params.n, param=params.param, seed=int(seed),
        realizations=realizations, statistics=statistics, squared=bool(squared),
        refs=refs, failures=failures,
    )
    k = np.array([t.k for t in good])
    out.k_mean = math.fsum(k) / len(k)
    out.k_stderr = _stderr(k)
    for name in statistics:
        if name == "min_singular":
            lmin = np.array([t.lmin for t in good])
            out.min_singular_values = lmin
            out.min_singular = min_singular_stats(lmin)
            continue
        sums = [t.sums[name] for t in good]
        total = math.fsum(s for s, _, _ in sums)
        count = sum(c for _, c, _ in sums)
        per_matrix = np.array([s / c for s, c, _ in sums if c > 0])
        summary = RatioSummary(
            mean=total / count if count else math.nan,
            stderr=_stderr(per_matrix),
            count=count,
            degenerate=sum(d for _, _, d in sums),
        )
        out.ratios[name] = summary
        out.per_matrix[name] = per_matrix
        pe, rge = refs.endpoints(name)
        out.normalized[name] = normalize_ratio(summary.mean, name, refs)
        out.normalized_stderr[name] = summary.stderr / (rge - pe)
        if edges is not None:
            h = good[0].counts[name]
            for t in good[1:]:
                h = h.merged(t.counts[name])
            out.histograms[name] = h
    return out


@dataclass
class SweepSpec:
    """A grid of (n, param) points for one model.

    ``realizations`` fixes the matrix count per point; alternatively
    ``ratio_budget`` asks for about that many ratios (or minima) per point,
    i.e. ``ceil(ratio_budget / n)`` matrices at size ``n``.
    """

    model: Model
    n_list: list
    param_grid: list = field(default_factory=list)
    realizations: int | None = None
    master_seed: int = 0
    statistics: tuple = STATISTICS
    ratio_budget: int | None = None
    squared: bool = False
    histograms: bool = False
    bins: int = 50

    def __post_init__(self):
        self.model = Model.parse(self.model)
        self.n_list = [int(n) for n in self.n_list]
        if not self.n_list:
            raise ParameterError("n_list is empty")
        self.statistics = check_statistics(self.statistics)
        if self.model in (Model.PE, Model.RGE):
            if any(p is not None for p in self.param_grid):
                raise ParameterError(f"{self.model.value} takes no parameter grid")
            self.param_grid = [None]
        else:
            if not self.param_grid:
                raise ParameterError("param_grid is empty")
            self.param_grid = [float(p) for p in self.param_grid]
        if (self.realizations is None) == (self.ratio_budget is None):
            raise ParameterError("give exactly one of realizations and ratio_budget")
        if self.realizations is not None and self.realizations < 1:
            raise ParameterError("realizations must be >= 1")
        if self.ratio_budget is not None and self.ratio_budget < 1:
            raise ParameterError("ratio_budget must be >= 1")
        # validate every grid point up front
        for n in self.n_list:
            for p in self.param_grid:
                GraphModelParams.of(self.model, n, p)

    def realizations_for(self, n: int) -> int:
        if self.realizations is not None:
            return int(self.realizations)
        return math.ceil(self.ratio_budget / n)

    def points(self):
        for n in sorted(self.n_list):
            for p in sorted(self.param_grid, key=lambda v: -1.0 if v is None else v):
                yield GraphModelParams.of(self.model, n, p)


@dataclass
class SweepResult:
    points: list
    errors: list  # (params, exception)

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)


def run_sweep(spec: SweepSpec, refs=None, workers: int = 1, progress=None) -> SweepResult:
    """Run every grid point of ``spec``; failing points are collected, not raised."""
    points, errors = [], []
    for params in spec.points():
        try:
            st = run_point(
                params, spec.realizations_for(params.n), spec.master_seed,
                spec.statistics, refs=refs, squared=spec.squared,
                histograms=spec.histograms, bins=spec.bins, workers=workers,
            )
        except (EnsembleError, NumericalError) as exc:
            log.error("point %s failed: %s", params, exc)
            errors.append((params, exc))
            continue
        points.append(st)
        if progress is not None:
            progress(st)
    return SweepResult(points, errors)


@dataclass(frozen=True)
class Calibration:
    constants: ReferenceConstants
    stderr: dict
    n: int
    realizations: int
    seed: int
    small_n_warning: bool

    def to_dict(self) -> dict:
        return {
            "constants": self.constants.to_dict(),
            "stderr": dict(self.stderr),
            "n": self.n,
            "realizations": self.realizations,
            "seed": self.seed,
            "small_n_warning": self.small_n_warning,
        }


SMALL_N = 50


def calibrate_references(
    n: int, realizations: int, seed: int = 0, *, squared: bool = False, workers: int = 1
) -> Calibration:
    """Measure all six endpoint means from fresh PE and RGE ensembles."""
    stats = RATIO_STATS
    pe = run_point(GraphModelParams(Model.PE, n), realizations, derive_seed(seed, 0),
                   stats, squared=squared, workers=workers)
    rge = run_point(GraphModelParams(Model.RGE, n), realizations, derive_seed(seed, 1),
                    stats, squared=squared, workers=workers)
    values = {
        "rR_PEPET": pe.ratios["rR_AAT"],
        "rR_RGERGET": rge.ratios["rR_AAT"],
        "rC_PE": pe.ratios["rC_A"],
        "rC_PEPET": pe.ratios["rC_AAT"],
        "rC_RGE": rge.ratios["rC_A"],
        "rC_RGERGET": rge.ratios["rC_AAT"],
    }
    return Calibration(
        constants=ReferenceConstants(**{k: v.mean for k, v in values.items()}),
        stderr={k: v.stderr for k, v in values.items()},
        n=int(n),
        realizations=int(realizations),
        seed=int(seed),
        small_n_warning=n < SMALL_N,
    )


DEFAULT_BRACKETS = {Model.DERG: (1e-4, 1.0), Model.DRRG: (1e-3, SQRT2)}


@dataclass(frozen=True)
class LocateResult:
    param: float
    estimate: float
    stderr: float
    realizations: int
    iterations: int
    history: tuple = ()


def locate_parameter(
    model,
    n: int,
    target: float,
    tolerance: float = 0.02,
    seed: int = 0,
    *,
    family: str = "rR_AAT",
    bracket: tuple | None = None,
    refs: ReferenceConstants | None = None,
    pilot_realizations: int = 32,
    max_realizations: int = 20000,
    max_iter: int = 40,
    squared: bool = False,
    workers: int = 1,
) -> LocateResult:
    """Find p (dERG) or rho (dRRG) whose normalized mean ratio hits ``target``.

    Bisects geometrically inside ``bracket``. The realization count grows
    until the standard error of each estimate is below ``tolerance / 2``.
    The first evaluated point within ``tolerance`` of the target is returned,
    bracket ends included.
    """
    model = Model.parse(model)
    if model not in DEFAULT_BRACKETS:
        raise ParameterError("locate_parameter needs dERG or dRRG")
    if not 0.0 <= target <= 1.0:
        raise ParameterError(f"target must lie in [0, 1], got {target!r}")
    if family not in FAMILIES:
        raise ParameterError(f"unknown ratio family {family!r}")
    lo, hi = bracket or DEFAULT_BRACKETS[model]
    if not 0.0 < lo < hi:
        raise ParameterError(f"bad bracket {(lo, hi)!r}")
    stats = (family,)
    state = {"R": int(pilot_realizations)}
    history = []

    def estimate(param):
        params = GraphModelParams.of(model, n, param)
        while True:
            st = run_point(params, state["R"], seed, stats, refs=refs,
                           squared=squared, workers=workers)
            value, se = st.normalized[family], st.normalized_stderr[family]
            if not se > tolerance / 2 or state["R"] >= max_realizations:
                break
            grow = math.ceil(state["R"] * 1.2 * (se / (tolerance / 2)) ** 2)
            state["R"] = min(max_realizations, max(grow, state["R"] + 1))
        history.append((param, value, se, state["R"]))
        return value, se

    def done(param, value, se, it):
        return LocateResult(param, value, se, state["R"], it, tuple(history))

    f_lo, se_lo = estimate(lo)
    if abs(f_lo - target) <= tolerance:
        return done(lo, f_lo, se_lo, 0)
    f_hi, se_hi = estimate(hi)
    if abs(f_hi - target) <= tolerance:
        return done(hi, f_hi, se_hi, 0)
    if not f_lo < target < f_hi:
        raise BracketError(
            f"bracket {(lo, hi)} gives {f_lo:.4f}..{f_hi:.4f}, not straddling {target}"
        )
    for it in range(1, max_iter + 1):
        mid = math.sqrt(lo * hi)
        f_mid, se_mid = estimate(mid)
        if abs(f_mid - target) <= tolerance:
            return done(mid, f_mid, se_mid, it)
        if f_mid < target:
            lo = mid
        else:
            hi = mid
    raise ConvergenceError(
        f"no parameter within {tolerance} of target {target} after {max_iter} bisections"
    )


def transition_onset(k_values, rbar_values, threshold: float = 0.1) -> float:
    """Mean degree at which a normalized curve first exceeds ``threshold``.

    Linear interpolation between the last point below and the first point
    above the threshold; points are taken in order of increasing degree.
    """
    k = np.asarray(k_values, dtype=float)
    r = np.asarray(rbar_values, dtype=float)
    if k.shape != r.shape or k.ndim != 1 or k.size == 0:
        raise ParameterError("k_values and rbar_values must be equal-length 1-D sequences")
    order = np.argsort(k, kind="stable")
    k, r = k[order], r[order]
    above = np.flatnonzero(r > threshold)
    if above.size == 0:
        raise NotFoundError(f"curve never exceeds {threshold}")
    j = above[0]
    if j == 0:
        return float(k[0])
    k0, k1, r0, r1 = k[j - 1], k[j], r[j - 1], r[j]
    return float(k0 + (threshold - r0) * (k1 - k0) / (r1 - r0))


def onset_from_points(points, family: str = "rR_AAT", threshold: float = 0.1) -> float:
    return transition_onset(
        [p.k_mean for p in points], [p.normalized[family] for p in points], threshold
    )
