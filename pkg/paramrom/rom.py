""" Online stage: time integration of the reduced quadratic model
    and reconstruction of full physical states.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Union

import torch
from torch import Tensor

from .base import DTYPE, ArrayLike, as_tensor, check_finite
from .exceptions import ConfigError, DimensionMismatchError, DivergenceError
from .operators import ReducedOperatorSet
from .pod import PodBasis
from .scaling import ScalingTransform, apply_scaling, invert_scaling
from .snapshots import SnapshotSet, VariableLayout, check_uniform

logger = logging.getLogger(__name__)

# Columns reconstructed per block
RECONSTRUCT_BLOCK = 256


# ------------------------------------------
# Input signals
# ------------------------------------------


@dataclass(frozen=True, eq=False)
class RampSignal:
    """
    Inputs that move linearly from ``initial`` to ``final`` over
    [t_start, t_end] and stay constant outside the window.

    Args:
        initial: levels before the ramp with shape=(m,)
        final: levels after the ramp with shape=(m,)
        t_start: start of the ramp window
        t_end: end of the ramp window
    """

    initial: Tensor
    final: Tensor
    t_start: float = 0.0
    t_end: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "initial", as_tensor(self.initial).reshape(-1))
        object.__setattr__(self, "final", as_tensor(self.final).reshape(-1))
        if self.initial.shape != self.final.shape:
            raise DimensionMismatchError(
                f"ramp has {self.initial.numel()} initial and "
                f"{self.final.numel()} final levels"
            )
        if not self.t_end > self.t_start:
            raise ConfigError(
                f"ramp window [{self.t_start}, {self.t_end}] is empty"
            )

    @property
    def m(self) -> int:
        return self.initial.numel()

    def __call__(self, t: float) -> Tensor:
        frac = min(max((t - self.t_start) / (self.t_end - self.t_start), 0.0), 1.0)
        return self.initial + frac * (self.final - self.initial)

    def sample(self, times: Tensor) -> Tensor:
        """Levels at every time with shape=(m,K)"""
        frac = ((times - self.t_start) / (self.t_end - self.t_start)).clamp(0.0, 1.0)
        return self.initial[:, None] + frac[None, :] * (self.final - self.initial)[:, None]

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": "ramp",
            "initial": self.initial.tolist(),
            "final": self.final.tolist(),
            "t_start": self.t_start,
            "t_end": self.t_end,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> RampSignal:
        try:
            return cls(
                data["initial"],
                data["final"],
                float(data.get("t_start", 0.0)),
                float(data["t_end"]),
            )
        except (KeyError, TypeError) as err:
            raise ConfigError(f"malformed ramp signal description: {err}") from None


class SampledSignal:
    """Piecewise-linear interpolation of sampled inputs"""

    def __init__(self, times: Tensor, values: Tensor):
        self.times = as_tensor(times)
        self.values = as_tensor(values)
        if self.values.ndim != 2 or self.values.shape[1] != self.times.numel():
            raise DimensionMismatchError(
                f"samples with shape {tuple(self.values.shape)} do not match "
                f"{self.times.numel()} times"
            )
        self.delta = check_uniform(self.times)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    def __call__(self, t: float) -> Tensor:
        if self.times.numel() == 1:
            return self.values[:, 0]
        pos = (t - self.times[0].item()) / self.delta
        pos = min(max(pos, 0.0), self.times.numel() - 1.0)
        k = min(int(pos), self.times.numel() - 2)
        frac = pos - k
        return (1 - frac) * self.values[:, k] + frac * self.values[:, k + 1]


InputSignal = Union[RampSignal, SampledSignal, Callable[[float], Tensor]]


def signal_of(sset: SnapshotSet) -> InputSignal:
    """Analytic input signal recorded with a snapshot set, else its samples"""
    described = sset.metadata.get("input_signal")
    if described is not None:
        return RampSignal.from_dict(described)
    return SampledSignal(sset.times, sset.inputs)


# ------------------------------------------
# Integration
# ------------------------------------------


@dataclass(frozen=True, eq=False)
class RomSolution:
    """
    Reduced trajectory on the output grid.

    Args:
        times: output times with shape=(K,)
        reduced_states: reduced states with shape=(...,r,K)
        states: reconstructed physical states with shape=(N,K), if computed
    """

    times: Tensor
    reduced_states: Tensor
    states: Optional[Tensor] = None
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def K(self) -> int:
        return self.times.numel()

    @property
    def r(self) -> int:
        return self.reduced_states.shape[-2]


def rk4_trajectory(
    ops: ReducedOperatorSet,
    s0_reduced: Tensor,
    input_signal: InputSignal,
    times: Tensor,
) -> tuple[Tensor, Tensor]:
    """Fixed-step classical Runge-Kutta integration without divergence checks

    Batch members integrate independently; a member whose state turns
    non-finite keeps NaN from then on.

    Args:
        ops (ReducedOperatorSet): operators with batch shape (...)
        s0_reduced (Tensor): initial states with shape=(...,r) or shape=(r,)
        input_signal (InputSignal): inputs u(t) with shape=(m,)
        times (Tensor): uniform grid with shape=(K,)

    Returns:
        states (Tensor): trajectories with shape=(...,r,K)
        first_bad (Tensor): first non-finite time index per member, -1 if
            none, with shape=(...)
    """
    times = as_tensor(times)
    delta = check_uniform(times)
    s = as_tensor(s0_reduced)
    if s.shape[-1] != ops.r:
        raise DimensionMismatchError(
            f"initial reduced state has length {s.shape[-1]}, operators have r={ops.r}"
        )
    s = s.expand(*ops.batch_shape, ops.r).clone()

    K = times.numel()
    out = torch.empty((*ops.batch_shape, ops.r, K), dtype=DTYPE)
    first_bad = torch.full(ops.batch_shape, -1, dtype=torch.int64)
    out[..., 0] = s
    bad = ~torch.isfinite(s).all(-1)
    first_bad[bad] = 0

    h = delta
    for k in range(1, K):
        t = times[k - 1].item()
        u0 = input_signal(t)
        uh = input_signal(t + 0.5 * h)
        u1 = input_signal(t + h)
        k1 = ops.rhs(s, u0)
        k2 = ops.rhs(s + 0.5 * h * k1, uh)
        k3 = ops.rhs(s + 0.5 * h * k2, uh)
        k4 = ops.rhs(s + h * k3, u1)
        s = s + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        out[..., k] = s

        newly_bad = ~torch.isfinite(s).all(-1) & (first_bad < 0)
        if newly_bad.any():
            first_bad[newly_bad] = k
            s = torch.where(newly_bad[..., None], torch.nan, s)
            if (first_bad >= 0).all():
                out[..., k + 1 :] = torch.nan
                break
    return out, first_bad


def integrate(
    ops: ReducedOperatorSet,
    s0_reduced: ArrayLike,
    input_signal: InputSignal,
    times: ArrayLike,
) -> RomSolution:
    """Integrates ds/dt = c + A s + H (s x s) + B u(t) with RK4 at the grid step

    Args:
        ops (ReducedOperatorSet): reduced operators, optionally batched
        s0_reduced (ArrayLike): initial reduced state with shape=(r,)
        input_signal (InputSignal): inputs u(t) with shape=(m,)
        times (ArrayLike): uniform output grid with shape=(K,)

    Returns:
        RomSolution: reduced trajectory sampled at ``times``
    """
    times = as_tensor(times)
    states, first_bad = rk4_trajectory(ops, as_tensor(s0_reduced), input_signal, times)
    if (first_bad >= 0).any():
        step = int(first_bad[first_bad >= 0].min().item())
        raise DivergenceError(
            f"reduced state became non-finite at time index {step} "
            f"(t={times[step].item():.6g})",
            step=step,
        )
    return RomSolution(times, states)


# ------------------------------------------
# Full states
# ------------------------------------------


def reconstruct(
    solution: RomSolution,
    basis: PodBasis,
    scaling: ScalingTransform,
    block_size: int = RECONSTRUCT_BLOCK,
) -> Tensor:
    """Physical states invert_scaling(V_r X_hat), assembled in column blocks

    Returns:
        Tensor: states with shape=(N,K)
    """
    reduced = solution.reduced_states
    if reduced.ndim != 2 or reduced.shape[0] != basis.r:
        raise DimensionMismatchError(
            f"reduced states with shape {tuple(reduced.shape)} do not match "
            f"basis rank r={basis.r}"
        )
    if scaling.dim != basis.N:
        raise DimensionMismatchError(
            f"scaling acts on N={scaling.dim}, basis has N={basis.N}"
        )
    K = reduced.shape[1]
    out = torch.empty((basis.N, K), dtype=DTYPE)
    for start in range(0, K, block_size):
        stop = min(start + block_size, K)
        out[:, start:stop] = invert_scaling(scaling, basis.lift(reduced[:, start:stop]))
    return out


def initial_reduced_state(
    s0_full: ArrayLike, basis: PodBasis, scaling: ScalingTransform
) -> Tensor:
    """V_r^T apply_scaling(s0) with shape=(r,)"""
    s0 = check_finite(as_tensor(s0_full), "initial state")
    if s0.ndim != 1 or s0.numel() != basis.N:
        raise DimensionMismatchError(
            f"initial state has shape {tuple(s0.shape)}, expected ({basis.N},)"
        )
    return basis.project(apply_scaling(scaling, s0)[:, None])[:, 0]


def to_snapshot_set(
    solution: RomSolution,
    parameter: ArrayLike,
    inputs: Tensor,
    layout: VariableLayout,
) -> SnapshotSet:
    """Packs a reconstructed solution into the snapshot format"""
    if solution.states is None:
        raise ConfigError("solution has no reconstructed states to export")
    return SnapshotSet(
        parameter=parameter,
        times=solution.times,
        states=solution.states,
        inputs=inputs,
        layout=layout,
        metadata=dict(solution.metadata),
    )
