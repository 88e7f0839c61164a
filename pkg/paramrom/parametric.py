""" Parametric reduced model: learned operator sets at the training
    parameters, interpolated entrywise with barycentric weights over a
    simplicial decomposition of the parameter domain.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np
import torch
from scipy.spatial import Delaunay, QhullError
from torch import Tensor

from .base import DTYPE, ArrayLike, as_tensor
from .exceptions import (
    CollinearParametersError,
    ConfigError,
    DimensionMismatchError,
    DuplicateParameterError,
    ExtrapolationError,
)
from .operators import ReducedOperatorSet
from .pod import PodBasis
from .scaling import ScalingTransform
from .snapshots import VariableLayout

logger = logging.getLogger(__name__)

# Barycentric weights above -INSIDE_TOL count as inside a simplex
INSIDE_TOL = 1e-12
# Relative in-circle determinant below which four points are cocircular
COCIRCULAR_TOL = 1e-10


def _barycentric(vertices: np.ndarray, point: np.ndarray) -> np.ndarray:
    """Weights of ``point`` in the simplex with vertex rows ``vertices``"""
    T = (vertices[1:] - vertices[0]).T
    w = np.linalg.solve(T, point - vertices[0])
    return np.concatenate([[1.0 - w.sum()], w])


class Triangulation:
    """
    Simplicial decomposition of the training parameters.

    For one parameter the simplices are consecutive segments of the sorted
    points. For two parameters it is the Delaunay triangulation, in which
    every cocircular quadrilateral uses the diagonal through its lowest
    vertex index.
    """

    def __init__(self, points: ArrayLike):
        points = np.asarray(as_tensor(points).numpy(), dtype=np.float64)
        if points.ndim == 1:
            points = points[:, None]
        self.points = points
        d, d_p = points.shape
        if d_p not in (1, 2):
            raise ConfigError(f"parameter dimension must be 1 or 2, got {d_p}")

        for i in range(d):
            same = np.nonzero(np.all(points[i + 1 :] == points[i], axis=1))[0]
            if same.size:
                raise DuplicateParameterError(
                    f"training parameters {i} and {i + 1 + same[0]} coincide: "
                    f"{points[i].tolist()}"
                )
        if d < d_p + 1:
            raise CollinearParametersError(
                f"{d} training parameters span no {d_p}-simplex"
            )

        if d_p == 1:
            order = np.argsort(points[:, 0], kind="stable")
            simplices = np.stack([order[:-1], order[1:]], axis=1)
        else:
            centered = points - points.mean(axis=0)
            if np.linalg.matrix_rank(centered, tol=1e-12 * np.abs(centered).max()) < 2:
                raise CollinearParametersError(
                    "training parameters are collinear, no triangle exists"
                )
            try:
                simplices = Delaunay(points).simplices.astype(np.int64)
            except QhullError as err:
                raise CollinearParametersError(
                    f"triangulation of the training parameters failed: {err}"
                ) from None
            simplices = self._resolve_cocircular(points, simplices)
        # canonical order: sorted vertices, simplices sorted lexicographically
        simplices = np.sort(simplices, axis=1)
        self.simplices = simplices[np.lexsort(simplices.T[::-1])]
        self.neighbors = self._neighbors(self.simplices)
        logger.debug(
            "triangulated %d parameters into %d simplices", d, len(self.simplices)
        )

    @property
    def d_p(self) -> int:
        return self.points.shape[1]

    @staticmethod
    def _neighbors(simplices: np.ndarray) -> np.ndarray:
        """neighbors[s, i]: simplex across the facet opposite vertex i, -1 on the hull"""
        facets = {}
        neighbors = -np.ones_like(simplices)
        for s, simplex in enumerate(simplices):
            for i in range(simplex.size):
                facet = tuple(sorted(np.delete(simplex, i).tolist()))
                if facet in facets:
                    t, j = facets.pop(facet)
                    neighbors[s, i], neighbors[t, j] = t, s
                else:
                    facets[facet] = (s, i)
        return neighbors

    @staticmethod
    def _resolve_cocircular(points: np.ndarray, simplices: np.ndarray) -> np.ndarray:
        simplices = simplices.copy()
        scale = np.ptp(points, axis=0).max() ** 4
        changed, sweeps = True, 0
        while changed and sweeps < 4 * len(simplices):
            changed, sweeps = False, sweeps + 1
            neighbors = Triangulation._neighbors(simplices)
            for s in range(len(simplices)):
                for i in range(3):
                    t = neighbors[s, i]
                    if t < s:
                        continue
                    a = simplices[s, i]
                    p, q = np.delete(simplices[s], i)
                    b = [v for v in simplices[t] if v not in (p, q)][0]
                    if abs(_incircle(points, p, q, a, b)) > COCIRCULAR_TOL * scale:
                        continue
                    # keep the diagonal through the smallest index of the quad
                    if min(a, b) < min(p, q):
                        simplices[s] = (a, b, p)
                        simplices[t] = (a, b, q)
                        changed = True
                        break
                if changed:
                    break
        return simplices

    def barycentric(self, s: int, point: np.ndarray) -> np.ndarray:
        return _barycentric(self.points[self.simplices[s]], point)

    def locate(self, point: ArrayLike) -> tuple[int, np.ndarray]:
        """Containing simplex of ``point`` and its barycentric weights

        Walks across facets from the first simplex; falls back to a scan in
        index order. Points on shared facets resolve to the lowest index.
        """
        point = np.asarray(as_tensor(point).reshape(-1).numpy(), dtype=np.float64)
        if point.size != self.d_p:
            raise DimensionMismatchError(
                f"query has {point.size} entries, parameters have d_p={self.d_p}"
            )

        s, found = 0, None
        for _ in range(len(self.simplices)):
            w = self.barycentric(s, point)
            i = int(np.argmin(w))
            if w[i] >= -INSIDE_TOL:
                found = (s, w)
                break
            s = self.neighbors[s, i]
            if s < 0:
                break

        if found is None or np.any(np.abs(found[1]) <= INSIDE_TOL):
            found = None
            for s in range(len(self.simplices)):
                w = self.barycentric(s, point)
                if np.all(w >= -INSIDE_TOL):
                    found = (s, w)
                    break
        if found is None:
            raise ExtrapolationError(
                f"parameter {point.tolist()} lies outside the convex hull of the "
                "training parameters"
            )
        s, w = found
        w = np.clip(w, 0.0, None)
        return s, w / w.sum()


def _incircle(points: np.ndarray, p: int, q: int, a: int, b: int) -> float:
    """In-circle determinant of b against the circle through p, q, a"""
    rows = []
    for v in (p, q, a):
        x, y = points[v] - points[b]
        rows.append([x, y, x * x + y * y])
    return float(np.linalg.det(np.array(rows)))


@dataclass(frozen=True, eq=False)
class ParametricRom:
    """
    Trained parametric model.

    Args:
        train_params: training parameters with shape=(d,d_p)
        operator_sets: learned operators aligned with ``train_params``
        triangulation: simplicial decomposition of ``train_params``
        basis: global POD basis, absent in an interpolant skeleton
        scaling: scaling of the training data
        layout: variable layout of the full states
        reference_state: physical state projected to start predictions
            with shape=(N,)
        metadata: run information (regularization, time grid, input ramp,
            offline cost)
    """

    train_params: Tensor
    operator_sets: tuple[ReducedOperatorSet, ...]
    triangulation: Triangulation
    basis: Optional[PodBasis] = None
    scaling: Optional[ScalingTransform] = None
    layout: Optional[VariableLayout] = None
    reference_state: Optional[Tensor] = None
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.operator_sets) != self.train_params.shape[0]:
            raise DimensionMismatchError(
                f"{len(self.operator_sets)} operator sets for "
                f"{self.train_params.shape[0]} training parameters"
            )
        dims = {(ops.r, ops.m) for ops in self.operator_sets}
        if len(dims) != 1:
            raise DimensionMismatchError(f"operator sets disagree on (r, m): {dims}")
        if self.basis is not None and self.basis.r != self.r:
            raise DimensionMismatchError(
                f"basis has r={self.basis.r}, operators have r={self.r}"
            )

    @property
    def d(self) -> int:
        return self.train_params.shape[0]

    @property
    def d_p(self) -> int:
        return self.train_params.shape[1]

    @property
    def r(self) -> int:
        return self.operator_sets[0].r

    @property
    def m(self) -> int:
        return self.operator_sets[0].m

    def with_model(self, **kwargs) -> ParametricRom:
        """Copy with basis, scaling, layout, reference state or metadata filled in"""
        values = {
            "basis": self.basis,
            "scaling": self.scaling,
            "layout": self.layout,
            "reference_state": self.reference_state,
            "metadata": self.metadata,
        }
        values.update(kwargs)
        return ParametricRom(
            self.train_params, self.operator_sets, self.triangulation, **values
        )


def build_interpolant(
    train_params: ArrayLike, operator_sets: Sequence[ReducedOperatorSet]
) -> ParametricRom:
    """Triangulates the training parameters

    Args:
        train_params (ArrayLike): parameters with shape=(d,d_p)
        operator_sets (Sequence[ReducedOperatorSet]): one set per parameter

    Returns:
        ParametricRom: interpolant without basis and scaling
    """
    params = as_tensor(train_params)
    if params.ndim == 1:
        params = params[:, None]
    if params.shape[0] != len(operator_sets):
        raise DimensionMismatchError(
            f"{params.shape[0]} training parameters but {len(operator_sets)} "
            "operator sets"
        )
    triangulation = Triangulation(params)
    return ParametricRom(params, tuple(operator_sets), triangulation)


def interpolate_operators(rom: ParametricRom, mu_star: ArrayLike) -> ReducedOperatorSet:
    """Entrywise barycentric interpolation of the operators at ``mu_star``

    Raises:
        ExtrapolationError: ``mu_star`` lies outside the training hull
    """
    mu = as_tensor(mu_star).reshape(-1)
    exact = torch.nonzero(torch.all(rom.train_params == mu, dim=1))
    if exact.numel():
        return rom.operator_sets[int(exact[0, 0].item())]

    s, weights = rom.triangulation.locate(mu)
    vertices = rom.triangulation.simplices[s]
    O = sum(
        float(w) * rom.operator_sets[int(v)].operator_matrix()
        for w, v in zip(weights, vertices)
    )
    return ReducedOperatorSet.from_matrix(O, rom.operator_sets[0].dims)
