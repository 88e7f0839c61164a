""" Centering and scaling of multiscale state variables.

    Every variable block v is mapped as
        x = (s - shift_v) / scale_v
    where shift_v is the temporal-spatial mean of the training block (only
    for mean-subtracted variables, zero otherwise) and scale_v is the largest
    absolute value of the shifted training block, so that the training data
    lands in [-1, 1].
"""

from __future__ import annotations

import logging
from typing import Iterable

import torch
from torch import Tensor

from .base import DTYPE, StateTransform, as_tensor
from .exceptions import DimensionMismatchError
from .snapshots import GlobalDataMatrix, VariableLayout

logger = logging.getLogger(__name__)

# Variables that are mean-subtracted unless told otherwise
DEFAULT_MEAN_SUBTRACT = ("pressure", "temperature")


def default_mean_subtract(layout: VariableLayout) -> tuple[str, ...]:
    """Default mean-subtraction flags restricted to the variables of ``layout``"""
    return tuple(name for name in layout.names if name in DEFAULT_MEAN_SUBTRACT)


class ScalingTransform(StateTransform):
    """
    Per-variable shift/scale pair mapping raw states to training scale
    and back. Immutable after construction.
    """

    def __init__(
        self,
        layout: VariableLayout,
        shifts: Tensor,
        scales: Tensor,
        mean_subtracted: Iterable[str] = (),
    ):
        """
        Args:
            layout (VariableLayout): layout the transform was fitted on
            shifts (Tensor): shift per variable with shape=(n_v,)
            scales (Tensor): positive scale per variable with shape=(n_v,)
            mean_subtracted (Iterable[str]): names of mean-subtracted variables
        """
        super().__init__(layout.N)
        shifts = as_tensor(shifts).reshape(-1)
        scales = as_tensor(scales).reshape(-1)
        if shifts.numel() != layout.n_v or scales.numel() != layout.n_v:
            raise DimensionMismatchError(
                f"expected {layout.n_v} shifts and scales, got "
                f"{shifts.numel()} and {scales.numel()}"
            )
        if torch.any(scales <= 0):
            raise DimensionMismatchError("scales must be positive")
        mean_subtracted = tuple(mean_subtracted)
        for name in mean_subtracted:
            layout.index(name)

        self.layout = layout
        self.shifts = shifts.clone()
        self.scales = scales.clone()
        self.mean_subtracted = mean_subtracted
        # row-wise expansion, shape=(N,1)
        self._shift_rows = self.shifts.repeat_interleave(layout.n_x)[:, None]
        self._scale_rows = self.scales.repeat_interleave(layout.n_x)[:, None]

    def _rows(self, states: Tensor) -> tuple[Tensor, Tensor]:
        if states.shape[0] != self.dim:
            raise DimensionMismatchError(
                f"states have {states.shape[0]} rows, transform expects N={self.dim}"
            )
        if states.ndim == 1:
            return self._shift_rows[:, 0], self._scale_rows[:, 0]
        return self._shift_rows, self._scale_rows

    def map(self, states: Tensor) -> Tensor:
        """Raw states with shape=(N,k) to scaled states with shape=(N,k)"""
        shift, scale = self._rows(states)
        return (states - shift) / scale

    def map_inverse(self, states: Tensor) -> Tensor:
        """Scaled states with shape=(N,k) back to physical units"""
        shift, scale = self._rows(states)
        return states * scale + shift

    @property
    def shift_field(self) -> Tensor:
        """Physical state that maps onto the zero vector, shape=(N,)"""
        return self._shift_rows[:, 0].clone()

    def __repr__(self):
        pairs = ", ".join(
            f"{name}: ({shift:.6g}, {scale:.6g})"
            for name, shift, scale in zip(
                self.layout.names, self.shifts.tolist(), self.scales.tolist()
            )
        )
        return f"ScalingTransform({pairs})"


def fit_scaling(
    global_data: GlobalDataMatrix, mean_subtract: Iterable[str]
) -> ScalingTransform:
    """Fits shift and scale of every variable block on the training matrix

    Args:
        global_data (GlobalDataMatrix): training states
        mean_subtract (Iterable[str]): variables whose mean is subtracted

    Returns:
        ScalingTransform: the fitted transform
    """
    layout = global_data.layout
    mean_subtract = tuple(mean_subtract)
    flagged = {layout.index(name) for name in mean_subtract}

    shifts = torch.zeros(layout.n_v, dtype=DTYPE)
    scales = torch.ones(layout.n_v, dtype=DTYPE)
    for i, (name, rows) in enumerate(layout.blocks()):
        block = global_data.matrix[rows]
        if i in flagged:
            shifts[i] = block.mean()
        max_abs = (block - shifts[i]).abs().max()
        # constant blocks keep scale 1
        if max_abs > 0:
            scales[i] = max_abs
        logger.debug(
            "scaling of '%s': shift=%.6g scale=%.6g", name, shifts[i], scales[i]
        )
    return ScalingTransform(layout, shifts, scales, mean_subtract)


def apply_scaling(transform: ScalingTransform, states: Tensor) -> Tensor:
    """(x - shift_v) / scale_v on every variable block"""
    return transform(states)


def invert_scaling(transform: ScalingTransform, scaled: Tensor) -> Tensor:
    """Exact inverse of :func:`apply_scaling`"""
    return transform(scaled, inverse=True)
