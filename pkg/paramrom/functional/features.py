""" Quadratic feature lift of reduced states and the
    regression data matrix of operator inference.

    Column blocks of the data matrix, in this order:
        [ 1 | s^T | (s x s)^T | u^T ]
    where (s x s) is the compact Kronecker product with row-major upper
    triangular ordering
        (s_1^2, s_1 s_2, ..., s_1 s_r, s_2^2, s_2 s_3, ..., s_r^2).
    The off-diagonal product s_i s_j (i < j) appears once, so its matching
    column of the quadratic operator carries the combined coefficient of
    both symmetric full-Kronecker entries.
"""

from dataclasses import dataclass
from functools import lru_cache

import torch
from torch import Tensor

from ..exceptions import ConfigError, DimensionMismatchError

# Tag of the ordering above, stored in model archives
FEATURE_ORDERING = "c-A-Htriu_rowmajor-B"


@dataclass(frozen=True)
class FeatureDims:
    """Dimensions of the quadratic regression problem

    Args:
        r: reduced dimension
        m: number of inputs
    """

    r: int
    m: int

    def __post_init__(self):
        if self.r < 1 or self.m < 0:
            raise ConfigError(f"invalid feature dimensions r={self.r}, m={self.m}")

    @property
    def r2(self) -> int:
        """Length r(r+1)/2 of the compact Kronecker product"""
        return self.r * (self.r + 1) // 2

    @property
    def total(self) -> int:
        """d(r,m) = 1 + r + r(r+1)/2 + m"""
        return 1 + self.r + self.r2 + self.m

    def slices(self) -> tuple[slice, slice, slice, slice]:
        """Column slices of the (c, A, H, B) blocks"""
        a = 1 + self.r
        h = a + self.r2
        return slice(0, 1), slice(1, a), slice(a, h), slice(h, h + self.m)


@lru_cache(maxsize=64)
def _triu(r: int) -> tuple[Tensor, Tensor]:
    i, j = torch.triu_indices(r, r)
    return i, j


def compact_kron(x: Tensor) -> Tensor:
    """Compact Kronecker product of reduced states

    Args:
        x (Tensor): states with shape=(...,r)

    Returns:
        Tensor: products x_i x_j for i <= j with shape=(...,r(r+1)/2)
    """
    r = x.shape[-1]
    if r < 1:
        raise ConfigError("compact Kronecker product needs r >= 1")
    i, j = _triu(r)
    return x[..., i] * x[..., j]


def build_data_matrix(reduced_states: Tensor, inputs: Tensor) -> Tensor:
    """Assemble the data matrix D = [1, S^T, (S x S)^T, U^T]

    Args:
        reduced_states (Tensor): reduced trajectory with shape=(r,K)
        inputs (Tensor): input signals with shape=(m,K)

    Returns:
        D (Tensor): data matrix with shape=(K,d(r,m))
    """
    if reduced_states.shape[-1] != inputs.shape[-1]:
        raise DimensionMismatchError(
            f"reduced states have {reduced_states.shape[-1]} columns, "
            f"inputs have {inputs.shape[-1]}"
        )
    S = reduced_states.mT
    ones = torch.ones((S.shape[0], 1), dtype=S.dtype)
    return torch.cat([ones, S, compact_kron(S), inputs.mT.to(S.dtype)], dim=1)
