""" Common tensor helpers and the transform base class """

from typing import Sequence, Union

import numpy as np
import torch
from torch import Tensor

from .exceptions import NonFiniteError

ArrayLike = Union[Tensor, np.ndarray, Sequence[float], float]

DTYPE = torch.float64


def as_tensor(x: ArrayLike) -> Tensor:
    """Converts array-likes into float64 tensors without copying when possible"""
    if isinstance(x, Tensor):
        return x.to(dtype=DTYPE)
    return torch.as_tensor(np.asarray(x, dtype=np.float64), dtype=DTYPE)


def check_finite(x: Tensor, name: str) -> Tensor:
    """Raises NonFiniteError if ``x`` holds NaN or Inf entries"""
    if not torch.isfinite(x).all():
        raise NonFiniteError(f"{name} contains non-finite entries")
    return x


class StateTransform:
    """Base class for invertible transforms acting on state matrices.

    Note:
    To make it easy as a reader, the forward pass denotes the mapping from
    raw (physical) states to the training representation and vice versa, i.e.
        ..math::
            forward: f(s) = x.
            inverse: f^{-1}(x) = s.
    State matrices have shape=(N,k): one state per column.
    """

    def __init__(self, dim: int):
        """
        Args:
            dim (int): row count N of the states the transform acts on.
        """
        self.dim = dim

    def __call__(self, states: Tensor, inverse: bool = False) -> Tensor:
        return self.forward(states, inverse=inverse)

    def forward(self, states: Tensor, inverse: bool = False) -> Tensor:
        """
        Forward pass of the transform ``f``. If inverse = True, it encodes
        the inverse pass ``f^{-1}``.

        Args:
            states (Tensor): states with shape=(N,k) or shape=(N,).

        Returns:
            out (Tensor): transformed states with the same shape.
        """
        if inverse:
            return self.map_inverse(states)
        return self.map(states)

    def map(self, states: Tensor) -> Tensor:
        """Should be overridden by all subclasses."""
        raise NotImplementedError(
            f"{self.__class__.__name__} does not provide map(...) method"
        )

    def map_inverse(self, states: Tensor) -> Tensor:
        """Should be overridden by all subclasses."""
        raise NotImplementedError(
            f"{self.__class__.__name__} does not provide map_inverse(...) method"
        )
