""" Operator inference: one Tikhonov-regularized regression per
    training parameter and the search over the regularization grid.

    For a data matrix D with shape=(K,d) and derivatives dS/dt with
    shape=(r,K) the operator matrix O solves the normal equations
        (D^T D + Lambda^2) O^T = D^T dS/dt^T,
        Lambda = diag(l1, l1 I_r, l2 I_{r(r+1)/2}, l3 I_m).
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
import pandas as pd
import torch
from torch import Tensor

from .base import DTYPE, as_tensor, check_finite
from .exceptions import (
    AllCandidatesDivergedError,
    ConfigError,
    DimensionMismatchError,
    DivergenceError,
)
from .functional.derivatives import estimate_derivatives
from .functional.features import FeatureDims, build_data_matrix
from .functional.linalg import spd_solve, stacked_lstsq
from .metrics import ErrorReport, relative_state_error
from .operators import ReducedOperatorSet
from .pod import PodBasis
from .rom import InputSignal, RomSolution, reconstruct, rk4_trajectory, signal_of
from .scaling import ScalingTransform, apply_scaling
from .snapshots import SnapshotSet

logger = logging.getLogger(__name__)

GRID_POINTS = 7


def logspace_grid(low: float, high: float, num: int = GRID_POINTS) -> tuple[float, ...]:
    """``num`` log-spaced values from ``low`` to ``high``"""
    return tuple(np.logspace(math.log10(low), math.log10(high), num).tolist())


@dataclass(frozen=True)
class RegularizationConfig:
    """
    Block-Tikhonov weights and the candidate grid of the sweep.

    Args:
        lambda1: weight of the constant and linear blocks
        lambda2: weight of the quadratic block
        lambda3: weight of the input block
        grid1, grid2, grid3: ascending candidate values of each weight
    """

    lambda1: float = 1e-3
    lambda2: float = 1e2
    lambda3: float = 1e-3
    grid1: tuple[float, ...] = logspace_grid(1e-3, 1e3)
    grid2: tuple[float, ...] = logspace_grid(1e0, 1e6)
    grid3: tuple[float, ...] = logspace_grid(1e-3, 1e3)

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "lambda3"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("grid1", "grid2", "grid3"):
            values = tuple(float(v) for v in getattr(self, name))
            object.__setattr__(self, name, values)
            if len(values) == 0:
                raise ConfigError(f"{name} is empty")
            if any(v <= 0 for v in values):
                raise ConfigError(f"{name} must hold positive values")
            if any(b <= a for a, b in zip(values, values[1:])):
                raise ConfigError(f"{name} must be sorted ascending")

    @property
    def triple(self) -> tuple[float, float, float]:
        return self.lambda1, self.lambda2, self.lambda3

    def with_triple(self, triple: Sequence[float]) -> RegularizationConfig:
        l1, l2, l3 = triple
        return replace(self, lambda1=float(l1), lambda2=float(l2), lambda3=float(l3))

    def candidates(self) -> list[tuple[float, float, float]]:
        """All grid triples in lexicographic order"""
        return list(itertools.product(self.grid1, self.grid2, self.grid3))

    def diagonal(self, dims: FeatureDims) -> Tensor:
        """Diagonal of Lambda with shape=(d,)"""
        return regularization_diagonal(torch.tensor([self.triple], dtype=DTYPE), dims)[0]


def regularization_diagonal(triples: Tensor, dims: FeatureDims) -> Tensor:
    """Diagonals of Lambda for a batch of triples with shape=(b,3) -> (b,d)"""
    counts = torch.tensor([1 + dims.r, dims.r2, dims.m])
    return triples.repeat_interleave(counts, dim=1)


def solve_regression(
    D: Tensor,
    dSdt: Tensor,
    reg: RegularizationConfig,
    method: str = "cholesky",
) -> ReducedOperatorSet:
    """Learns (c, A, H, B) from one trajectory

    Args:
        D (Tensor): data matrix with shape=(K,d)
        dSdt (Tensor): reduced time derivatives with shape=(r,K)
        reg (RegularizationConfig): weights lambda1-3
        method (str, optional): ``"cholesky"`` for the normal equations,
            ``"qr"`` for the stacked least-squares system. Defaults to "cholesky".

    Returns:
        ReducedOperatorSet: the learned operators
    """
    D = check_finite(as_tensor(D), "data matrix")
    dSdt = check_finite(as_tensor(dSdt), "time derivatives")
    r, K = dSdt.shape
    if D.shape[0] != K:
        raise DimensionMismatchError(
            f"data matrix has {D.shape[0]} rows, derivatives have K={K} columns"
        )
    m = D.shape[1] - 1 - r - r * (r + 1) // 2
    dims = FeatureDims(r, m)
    lam = reg.diagonal(dims)

    if method == "cholesky":
        G = D.mT @ D + torch.diag(lam.square())
        Ot = spd_solve(G, D.mT @ dSdt.mT)
    elif method == "qr":
        Ot = stacked_lstsq(D, dSdt.mT, lam)
    else:
        raise ConfigError(f"unknown regression method '{method}'")
    return ReducedOperatorSet.from_matrix(Ot.mT, dims)


@dataclass(frozen=True, eq=False)
class TrainingData:
    """
    Regression inputs of one training parameter.

    Args:
        snapshots: the full-order trajectory
        reduced_states: projected scaled states with shape=(r,K)
        derivatives: their time derivatives with shape=(r,K)
        data_matrix: data matrix with shape=(K,d)
        signal: input signal used to integrate the learned model
    """

    snapshots: SnapshotSet
    reduced_states: Tensor
    derivatives: Tensor
    data_matrix: Tensor
    signal: InputSignal

    @property
    def parameter(self) -> Tensor:
        return self.snapshots.parameter

    @property
    def initial_state(self) -> Tensor:
        return self.reduced_states[:, 0]


def prepare_training(
    sets: Sequence[SnapshotSet], basis: PodBasis, scaling: ScalingTransform
) -> list[TrainingData]:
    """Projects every training trajectory and assembles its regression data"""
    training = []
    for sset in sets:
        reduced = basis.project(apply_scaling(scaling, sset.states))
        derivatives = estimate_derivatives(reduced, sset.delta)
        D = build_data_matrix(reduced, sset.inputs)
        training.append(TrainingData(sset, reduced, derivatives, D, signal_of(sset)))
    return training


def learn_operators(
    training: Sequence[TrainingData], reg: RegularizationConfig
) -> list[ReducedOperatorSet]:
    """One operator set per training parameter, each from its own data only"""
    ops = []
    for data in training:
        ops.append(solve_regression(data.data_matrix, data.derivatives, reg))
    return ops


def training_errors(
    ops: Sequence[ReducedOperatorSet],
    training: Sequence[TrainingData],
    basis: PodBasis,
    scaling: ScalingTransform,
) -> list[ErrorReport]:
    """Errors of each learned model integrated over its own training horizon"""
    reports = []
    for op, data in zip(ops, training):
        states, first_bad = rk4_trajectory(
            op, data.initial_state, data.signal, data.snapshots.times
        )
        if first_bad.item() >= 0:
            raise DivergenceError(
                f"model of parameter {data.parameter.tolist()} diverged at "
                f"time index {first_bad.item()}",
                step=int(first_bad.item()),
            )
        rom = reconstruct(RomSolution(data.snapshots.times, states), basis, scaling)
        reports.append(
            relative_state_error(data.snapshots.states, rom, data.snapshots.layout)
        )
    return reports


def grid_search(
    training: Sequence[TrainingData],
    basis: PodBasis,
    scaling: ScalingTransform,
    grid: RegularizationConfig,
    batch_size: Optional[int] = None,
) -> tuple[tuple[float, float, float], pd.DataFrame]:
    """Selects the weight triple with the smallest training state error

    Every candidate learns all operator sets, integrates each one over its
    training horizon, reconstructs and scores the mean over training
    parameters of the group-averaged relative state error. Candidates whose
    integration turns non-finite score infinity.

    Args:
        training (Sequence[TrainingData]): projected training data
        basis (PodBasis): global basis
        scaling (ScalingTransform): scaling of the training data
        grid (RegularizationConfig): candidate grids
        batch_size (int, optional): candidates solved and integrated together,
            all of them by default

    Returns:
        best (tuple): the selected (lambda1, lambda2, lambda3)
        table (pd.DataFrame): one row per candidate in lexicographic order
    """
    if len(training) == 0:
        raise ConfigError("grid search needs at least one training parameter")
    candidates = grid.candidates()
    n = len(candidates)
    batch_size = batch_size or n
    layout = training[0].snapshots.layout
    groups = [g.name for g in layout.variable_groups]
    dims = FeatureDims(basis.r, training[0].snapshots.m)

    errors = torch.zeros((n, len(training), len(groups)), dtype=DTYPE)
    diverged = torch.zeros(n, dtype=torch.bool)

    for ell, data in enumerate(training):
        D = data.data_matrix
        G0 = D.mT @ D
        R = D.mT @ data.derivatives.mT
        for start in range(0, n, batch_size):
            stop = min(start + batch_size, n)
            triples = torch.tensor(candidates[start:stop], dtype=DTYPE)
            lam2 = regularization_diagonal(triples, dims).square()
            G = G0 + torch.diag_embed(lam2)
            L, info = torch.linalg.cholesky_ex(G)
            failed = info > 0
            L = torch.where(failed[:, None, None], torch.eye(dims.total, dtype=DTYPE), L)
            Ot = torch.cholesky_solve(R.expand(stop - start, *R.shape), L)
            O = Ot.mT
            failed |= ~torch.isfinite(O).all(-1).all(-1)
            O = torch.where(failed[:, None, None], torch.zeros_like(O), O)

            ops = ReducedOperatorSet.from_matrix(O, dims)
            states, first_bad = rk4_trajectory(
                ops, data.initial_state, data.signal, data.snapshots.times
            )
            bad = failed | (first_bad >= 0)
            diverged[start:stop] |= bad

            for b in range(stop - start):
                if bad[b]:
                    continue
                rom = reconstruct(
                    RomSolution(data.snapshots.times, states[b]), basis, scaling
                )
                report = relative_state_error(data.snapshots.states, rom, layout)
                if not math.isfinite(report.average):
                    diverged[start + b] = True
                    continue
                errors[start + b, ell] = torch.tensor(
                    [report.per_group[g] for g in groups], dtype=DTYPE
                )
        logger.debug("swept %d candidates on training parameter %d", n, ell)

    per_group = errors.mean(dim=1)
    average = per_group.mean(dim=1)
    per_group[diverged] = math.inf
    average[diverged] = math.inf

    table = pd.DataFrame(candidates, columns=["lambda1", "lambda2", "lambda3"])
    for i, g in enumerate(groups):
        table[f"error_{g}"] = per_group[:, i].tolist()
    table["average_error"] = average.tolist()
    table["diverged"] = diverged.tolist()

    if diverged.all():
        raise AllCandidatesDivergedError(
            f"all {n} regularization candidates diverged on the training data"
        )
    # first minimum in lexicographic order
    finite = average[~diverged]
    best_index = int(torch.nonzero(average == finite.min())[0, 0].item())
    best = candidates[best_index]
    logger.info(
        "best regularization (%.3g, %.3g, %.3g) with training error %.4e, "
        "%d of %d candidates diverged",
        *best,
        average[best_index].item(),
        int(diverged.sum().item()),
        n,
    )
    return best, table


def write_sweep(table: pd.DataFrame, path: str) -> pd.DataFrame:
    """Writes the sweep table as CSV"""
    table.to_csv(path, index=False)
    return table
