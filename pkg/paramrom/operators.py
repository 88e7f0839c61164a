""" Reduced quadratic operators
        ds/dt = c + A s + H (s x s) + B u
    of one parameter, or of a batch of parameters / regularization
    candidates stacked along leading dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import torch
from torch import Tensor

from .base import as_tensor, check_finite
from .exceptions import DimensionMismatchError
from .functional.features import FeatureDims, compact_kron


@dataclass(frozen=True, eq=False)
class ReducedOperatorSet:
    """
    The quartet (c, A, H, B) of a quadratic reduced model.

    Args:
        c_hat: constant term with shape=(...,r)
        A_hat: linear operator with shape=(...,r,r)
        H_hat: quadratic operator on the compact Kronecker product
            with shape=(...,r,r(r+1)/2)
        B_hat: input operator with shape=(...,r,m)
    """

    c_hat: Tensor
    A_hat: Tensor
    H_hat: Tensor
    B_hat: Tensor

    def __post_init__(self):
        for name in ("c_hat", "A_hat", "H_hat", "B_hat"):
            value = check_finite(as_tensor(getattr(self, name)), name)
            object.__setattr__(self, name, value)
        r = self.c_hat.shape[-1]
        dims = FeatureDims(r, self.B_hat.shape[-1])
        expected = {
            "A_hat": (r, r),
            "H_hat": (r, dims.r2),
            "B_hat": (r, dims.m),
        }
        for name, shape in expected.items():
            if tuple(getattr(self, name).shape[-2:]) != shape:
                raise DimensionMismatchError(
                    f"{name} has shape {tuple(getattr(self, name).shape)}, "
                    f"expected trailing shape {shape}"
                )

    @property
    def dims(self) -> FeatureDims:
        return FeatureDims(self.c_hat.shape[-1], self.B_hat.shape[-1])

    @property
    def r(self) -> int:
        return self.c_hat.shape[-1]

    @property
    def m(self) -> int:
        return self.B_hat.shape[-1]

    @property
    def batch_shape(self) -> torch.Size:
        return self.c_hat.shape[:-1]

    def operator_matrix(self) -> Tensor:
        """O = [c A H B] with shape=(...,r,d(r,m))"""
        return torch.cat([self.c_hat[..., None], self.A_hat, self.H_hat, self.B_hat], -1)

    @classmethod
    def from_matrix(cls, O: Tensor, dims: FeatureDims) -> ReducedOperatorSet:
        """Splits O with shape=(...,r,d(r,m)) into its column blocks"""
        if tuple(O.shape[-2:]) != (dims.r, dims.total):
            raise DimensionMismatchError(
                f"operator matrix has shape {tuple(O.shape)}, expected trailing "
                f"shape {(dims.r, dims.total)}"
            )
        c, a, h, b = dims.slices()
        return cls(O[..., c][..., 0], O[..., a], O[..., h], O[..., b])

    @classmethod
    def stack(cls, sets: Sequence[ReducedOperatorSet]) -> ReducedOperatorSet:
        """Stacks operator sets along a new leading batch dimension"""
        return cls(
            torch.stack([s.c_hat for s in sets]),
            torch.stack([s.A_hat for s in sets]),
            torch.stack([s.H_hat for s in sets]),
            torch.stack([s.B_hat for s in sets]),
        )

    def __getitem__(self, index) -> ReducedOperatorSet:
        return ReducedOperatorSet(
            self.c_hat[index], self.A_hat[index], self.H_hat[index], self.B_hat[index]
        )

    def rhs(self, s: Tensor, u: Tensor) -> Tensor:
        """Right-hand side c + A s + H (s x s) + B u

        Args:
            s (Tensor): reduced states with shape=(...,r)
            u (Tensor): inputs with shape=(...,m) or shape=(m,)

        Returns:
            Tensor: time derivative with shape=(...,r)
        """
        out = self.c_hat + (self.A_hat @ s[..., None])[..., 0]
        out = out + (self.H_hat @ compact_kron(s)[..., None])[..., 0]
        if self.m > 0:
            out = out + (self.B_hat @ u[..., None])[..., 0]
        return out
