""" Global POD basis of the scaled training data and the
    energy / projection-error bookkeeping used to choose its rank.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import pandas as pd
import torch
from torch import Tensor

from .base import as_tensor
from .exceptions import DegenerateInputError, DimensionMismatchError, RankError
from .functional.linalg import (
    DETERMINISTIC_MAX_COLUMNS,
    OVERSAMPLE,
    POWER_ITERS,
    deterministic_svd,
    randomized_svd,
)

logger = logging.getLogger(__name__)

ORTHONORMAL_TOL = 1e-10


@dataclass(frozen=True)
class SvdConfig:
    """Settings of the POD decomposition

    Args:
        target_rank: rank r_t of the randomized decomposition, None keeps the
            full spectrum of the deterministic path
        oversample: extra Gaussian test vectors of the randomized SVD
        power_iters: power iterations of the randomized SVD
        seed: seed of the Gaussian test matrix
        deterministic_max_columns: use the exact SVD up to this column count
    """

    target_rank: Optional[int] = None
    oversample: int = OVERSAMPLE
    power_iters: int = POWER_ITERS
    seed: int = 0
    deterministic_max_columns: int = DETERMINISTIC_MAX_COLUMNS


@dataclass(frozen=True, eq=False)
class PodBasis:
    """
    Orthonormal POD basis V_r with its singular-value spectrum.

    Args:
        basis: orthonormal basis with shape=(N,r)
        singular_values: retained spectrum sigma_1 >= ... >= sigma_{r_t} with
            shape=(r_t,)
    """

    basis: Tensor
    singular_values: Tensor

    def __post_init__(self):
        object.__setattr__(self, "basis", as_tensor(self.basis))
        object.__setattr__(self, "singular_values", as_tensor(self.singular_values))
        sigma = self.singular_values
        if self.basis.ndim != 2 or sigma.ndim != 1:
            raise DimensionMismatchError("basis must be a matrix, spectrum a vector")
        if self.r > self.r_t:
            raise RankError(f"retained rank r={self.r} exceeds r_t={self.r_t}")
        if torch.any(sigma < 0) or torch.any(sigma[1:] > sigma[:-1]):
            raise RankError("singular values must be non-negative and non-increasing")

    @property
    def N(self) -> int:
        return self.basis.shape[0]

    @property
    def r(self) -> int:
        return self.basis.shape[1]

    @property
    def r_t(self) -> int:
        return self.singular_values.numel()

    def project(self, X: Tensor) -> Tensor:
        """V_r^T X with shape=(r,k)"""
        if X.shape[0] != self.N:
            raise DimensionMismatchError(
                f"states have {X.shape[0]} rows, basis expects N={self.N}"
            )
        return self.basis.mT @ X

    def lift(self, X_hat: Tensor) -> Tensor:
        """V_r X_hat with shape=(N,k)"""
        if X_hat.shape[0] != self.r:
            raise DimensionMismatchError(
                f"reduced states have {X_hat.shape[0]} rows, basis has r={self.r}"
            )
        return self.basis @ X_hat

    def truncate(self, r: int) -> PodBasis:
        """Basis of the leading ``r`` modes, spectrum unchanged"""
        if not 1 <= r <= self.r:
            raise RankError(f"cannot truncate rank {self.r} basis to r={r}")
        return PodBasis(self.basis[:, :r].contiguous(), self.singular_values)

    def orthonormality_defect(self) -> float:
        """max |V_r^T V_r - I_r|"""
        eye = torch.eye(self.r, dtype=self.basis.dtype)
        return (self.basis.mT @ self.basis - eye).abs().max().item()


def compute_basis(
    X: Tensor,
    r: Optional[int] = None,
    energy_threshold: Optional[float] = None,
    config: SvdConfig = SvdConfig(),
) -> PodBasis:
    """POD basis of the scaled data matrix ``X``

    The exact SVD is used whenever the column count is at most
    ``config.deterministic_max_columns``, the randomized SVD otherwise.
    Exactly one of ``r`` and ``energy_threshold`` selects the rank.

    Args:
        X (Tensor): scaled training matrix with shape=(N,M)
        r (int, optional): explicit rank
        energy_threshold (float, optional): cumulative energy to retain
        config (SvdConfig, optional): decomposition settings

    Returns:
        PodBasis: basis with shape=(N,r)
    """
    if (r is None) == (energy_threshold is None):
        raise RankError("give exactly one of an explicit rank and an energy threshold")

    n, m = X.shape
    if m <= config.deterministic_max_columns:
        V, sigma, _ = deterministic_svd(X)
        if config.target_rank is not None:
            V, sigma = V[:, : config.target_rank], sigma[: config.target_rank]
        logger.info("deterministic SVD of %d x %d data matrix", n, m)
    else:
        target = config.target_rank
        if target is None:
            target = min(n, m) - config.oversample
        V, sigma, _ = randomized_svd(
            X, target, config.oversample, config.power_iters, config.seed
        )
        logger.info(
            "randomized SVD of %d x %d data matrix, r_t=%d, oversample=%d, "
            "power_iters=%d",
            n,
            m,
            target,
            config.oversample,
            config.power_iters,
        )

    if energy_threshold is not None:
        r = choose_rank(sigma, energy_threshold)
    if not 1 <= r <= sigma.numel():
        raise RankError(f"rank r={r} outside [1, {sigma.numel()}]")

    basis = PodBasis(V[:, :r].contiguous(), sigma)
    logger.info(
        "POD rank r=%d, cumulative energy %.8f, residual energy %.3e",
        r,
        cumulative_energy(sigma, r),
        residual_energy(sigma, r),
    )
    return basis


def cumulative_energy(singular_values: Tensor, r: int) -> float:
    """Fraction sum_{eta<=r} sigma_eta^2 / sum_eta sigma_eta^2"""
    sigma = as_tensor(singular_values)
    if not 1 <= r <= sigma.numel():
        raise RankError(f"rank r={r} outside [1, {sigma.numel()}]")
    energy = sigma.square()
    total = energy.sum()
    if total == 0:
        raise DegenerateInputError("spectrum carries no energy")
    return (energy[:r].sum() / total).item()


def residual_energy(singular_values: Tensor, r: int) -> float:
    """Discarded energy fraction, equals the relative projection error"""
    sigma = as_tensor(singular_values)
    if not 1 <= r <= sigma.numel():
        raise RankError(f"rank r={r} outside [1, {sigma.numel()}]")
    energy = sigma.square()
    total = energy.sum()
    if total == 0:
        raise DegenerateInputError("spectrum carries no energy")
    return (energy[r:].sum() / total).item()


def projection_error(X: Tensor, basis: PodBasis) -> float:
    """Relative squared projection error ||X - V_r V_r^T X||_F^2 / ||X||_F^2

    Args:
        X (Tensor): scaled states with shape=(N,k)
        basis (PodBasis): basis with shape=(N,r)

    Returns:
        float: projection error in [0, 1]
    """
    norm2 = X.square().sum()
    if norm2 == 0:
        raise DegenerateInputError("projection error of a zero matrix is undefined")
    residual = X - basis.lift(basis.project(X))
    return (residual.square().sum() / norm2).item()


def choose_rank(singular_values: Tensor, energy_threshold: float) -> int:
    """Smallest r whose cumulative energy reaches ``energy_threshold``"""
    if not 0 < energy_threshold < 1:
        raise RankError(f"energy threshold must lie in (0, 1), got {energy_threshold}")
    sigma = as_tensor(singular_values)
    energy = sigma.square()
    total = energy.sum()
    if total == 0:
        raise DegenerateInputError("spectrum carries no energy")
    cumulative = torch.cumsum(energy, dim=0) / total
    reached = torch.nonzero(cumulative >= energy_threshold)
    if reached.numel() == 0:
        raise RankError(
            f"energy threshold {energy_threshold} not reached within "
            f"{sigma.numel()} singular values (max {cumulative[-1].item():.8f})"
        )
    return int(reached[0, 0].item()) + 1


def spectrum_table(singular_values: Tensor) -> pd.DataFrame:
    """Singular-value decay and energy curves, one row per index"""
    sigma = as_tensor(singular_values)
    energy = sigma.square()
    cumulative = torch.cumsum(energy, dim=0) / energy.sum()
    return pd.DataFrame(
        {
            "index": range(1, sigma.numel() + 1),
            "sigma": sigma.tolist(),
            "sigma_normalized": (sigma / sigma[0]).tolist(),
            "cumulative_energy": cumulative.tolist(),
            "residual_energy": (1 - cumulative).clamp(min=0).tolist(),
        }
    )


def write_spectrum(singular_values: Tensor, path: str) -> pd.DataFrame:
    """Writes :func:`spectrum_table` as CSV"""
    table = spectrum_table(singular_values)
    table.to_csv(path, index=False)
    return table
