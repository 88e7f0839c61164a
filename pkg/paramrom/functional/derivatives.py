""" Finite-difference time derivatives of sampled trajectories """

import torch
from torch import Tensor

from ..exceptions import ConfigError


def estimate_derivatives(states: Tensor, delta: float) -> Tensor:
    """Second-order finite differences along the time axis

    Interior columns use the central stencil (s_{k+1} - s_{k-1}) / 2 delta,
    the first and last columns the one-sided three-point stencils
        (-3 s_0 + 4 s_1 - s_2) / 2 delta,
        (3 s_{K-1} - 4 s_{K-2} + s_{K-3}) / 2 delta.

    Args:
        states (Tensor): uniformly sampled trajectory with shape=(r,K)
        delta (float): time step

    Returns:
        Tensor: time derivatives with shape=(r,K)
    """
    K = states.shape[-1]
    if K < 3:
        raise ConfigError(f"derivative estimation needs K >= 3 snapshots, got {K}")
    if not delta > 0:
        raise ConfigError(f"time step must be positive, got {delta}")

    ds = torch.empty_like(states)
    ds[..., 1:-1] = (states[..., 2:] - states[..., :-2]) / (2 * delta)
    ds[..., 0] = (-3 * states[..., 0] + 4 * states[..., 1] - states[..., 2]) / (
        2 * delta
    )
    ds[..., -1] = (3 * states[..., -1] - 4 * states[..., -2] + states[..., -3]) / (
        2 * delta
    )
    return ds
