"""Directed random graphs and their randomly weighted adjacency matrices.

Every model draws its randomness in the same order from a single
``numpy.random.Generator``:

1. vertex positions (dRRG only), shape ``(n, 2)``
2. Gaussian weights, shape ``(n, n)``
3. edge uniforms (dERG only), shape ``(n, n)``

so that, for a fixed seed, graphs at different ``p`` (or ``rho``) share the
same weights and differ only in which entries are switched on.  The PE and
RGE limits are the dERG model at ``p=0`` and ``p=1``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError

SQRT2 = math.sqrt(2.0)


class Model(str, enum.Enum):
    DERG = "dERG"
    DRRG = "dRRG"
    PE = "PE"
    RGE = "RGE"

    @classmethod
    def parse(cls, value) -> "Model":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        for member in cls:
            if member.value.lower() == key:
                return member
        raise ParameterError(
            f"unknown model {value!r}; expected one of "
            + ", ".join(m.value for m in cls)
        )


@dataclass(frozen=True)
class GraphModelParams:
    """One point of a graph family: the model, its size and its control parameter.

    ``p`` is required for dERG and ``rho`` for dRRG; PE and RGE take only ``n``.
    The limiting values ``p=0`` and ``rho=0`` are accepted and give the PE.
    """

    model: Model
    n: int
    p: float | None = None
    rho: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "model", Model.parse(self.model))
        _check_n(self.n)
        object.__setattr__(self, "n", int(self.n))
        if self.model is Model.DERG:
            if self.p is None or self.rho is not None:
                raise ParameterError("dERG takes p and no rho")
            _check_p(self.p)
        elif self.model is Model.DRRG:
            if self.rho is None or self.p is not None:
                raise ParameterError("dRRG takes rho and no p")
            _check_rho(self.rho)
        elif self.p is not None or self.rho is not None:
            raise ParameterError(f"{self.model.value} takes neither p nor rho")

    @classmethod
    def of(cls, model, n: int, param: float | None = None) -> "GraphModelParams":
        """Build params from a model and its (optional) control parameter."""
        model = Model.parse(model)
        if model is Model.DERG:
            return cls(model, n, p=param)
        if model is Model.DRRG:
            return cls(model, n, rho=param)
        if param is not None:
            raise ParameterError(f"{model.value} takes no control parameter")
        return cls(model, n)

    @property
    def param(self) -> float | None:
        return self.p if self.model is Model.DERG else self.rho

    def generate(self, seed) -> "WeightedDigraph":
        if self.model is Model.DERG:
            return generate_derg(self.n, self.p, seed)
        if self.model is Model.DRRG:
            return generate_drrg(self.n, self.rho, seed)
        return generate_reference(self.model, self.n, seed)


@dataclass(frozen=True)
class VertexCloud:
    positions: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 2:
            raise ParameterError("positions must have shape (n, 2)")
        if pos.size and (pos.min() < 0.0 or pos.max() > 1.0):
            raise ParameterError("positions must lie in the unit square")
        object.__setattr__(self, "positions", pos)

    def __len__(self):
        return len(self.positions)

    def distances(self) -> np.ndarray:
        diff = self.positions[:, None, :] - self.positions[None, :, :]
        return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


@dataclass(frozen=True, eq=False)
class WeightedDigraph:
    """A weighted adjacency matrix with self-loop weights on the diagonal."""

    adjacency: np.ndarray
    seed: object = None
    model: Model | None = None
    param: float | None = None
    cloud: VertexCloud | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def pattern(self) -> np.ndarray:
        return self.adjacency != 0.0

    @property
    def edge_count(self) -> int:
        """Number of nonzero off-diagonal entries."""
        nnz = np.count_nonzero(self.adjacency)
        return int(nnz - np.count_nonzero(np.diagonal(self.adjacency)))


def _check_n(n):
    if isinstance(n, bool) or int(n) != n or n < 2:
        raise ParameterError(f"n must be an integer >= 2, got {n!r}")


def _check_p(p):
    if not (0.0 <= p <= 1.0):
        raise ParameterError(f"p must lie in [0, 1], got {p!r}")


def _check_rho(rho):
    if not (0.0 <= rho <= SQRT2):
        raise ParameterError(f"rho must lie in [0, sqrt(2)], got {rho!r}")


def _weighted(rng: np.random.Generator, n: int, edges: np.ndarray) -> np.ndarray:
    weights = rng.standard_normal((n, n))
    np.fill_diagonal(edges, True)
    return np.where(edges, weights, 0.0)


def generate_derg(n: int, p: float, seed) -> WeightedDigraph:
    """Directed Erdos-Renyi graph G(n, p) with N(0, 1) edge and self-loop weights."""
    _check_n(n)
    _check_p(p)
    n = int(n)
    rng = np.random.default_rng(seed)
    weights = rng.standard_normal((n, n))
    edges = rng.random((n, n)) < p
    np.fill_diagonal(edges, True)
    adjacency = np.where(edges, weights, 0.0)
    return WeightedDigraph(adjacency, seed=seed, model=Model.DERG, param=float(p))


def generate_drrg(n: int, rho: float, seed) -> WeightedDigraph:
    """Random geometric digraph on the unit square with connection radius ``rho``.

    Two vertices closer than ``rho`` are joined in both directions; the two
    directions get independent weights, so the pattern is symmetric but the
    matrix is not.
    """
    _check_n(n)
    _check_rho(rho)
    n = int(n)
    rng = np.random.default_rng(seed)
    cloud = VertexCloud(rng.random((n, 2)))
    adjacency = _weighted(rng, n, cloud.distances() < rho)
    return WeightedDigraph(
        adjacency, seed=seed, model=Model.DRRG, param=float(rho), cloud=cloud
    )


def generate_reference(ensemble, n: int, seed) -> WeightedDigraph:
    """Sample the Poisson ensemble (diagonal) or the real Ginibre ensemble (full).

    Draws coincide with ``generate_derg`` at ``p=0`` and ``p=1`` for the same seed.
    """
    ensemble = Model.parse(ensemble)
    if ensemble not in (Model.PE, Model.RGE):
        raise ParameterError(f"reference ensemble must be PE or RGE, not {ensemble.value}")
    g = generate_derg(n, 0.0 if ensemble is Model.PE else 1.0, seed)
    return WeightedDigraph(g.adjacency, seed=seed, model=ensemble)


def measure_degree(g: WeightedDigraph) -> float:
    """Mean out-degree, self-loops excluded."""
    return g.edge_count / g.n
