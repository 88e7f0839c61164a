""" Synthetic parametrized full-order model.

    A viscous Burgers velocity v coupled to a passively advected temperature
    perturbation theta' on the unit interval with homogeneous Dirichlet ends,
        v_t      = nu v_xx      - v v_x      + phi_in q(t) + phi_out p(t)
        theta'_t = kappa theta'_xx - v theta'_x - beta phi_in q(t)
    with the reported temperature theta = theta_ref + theta'. The inputs are
    linear ramps, the inflow ramp ending at mu_q times its nominal level and
    the outflow ramp at mu_p times its nominal level. Diffusion is stepped
    implicitly, advection and forcing explicitly.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
import torch
from scipy.linalg import cho_solve_banded, cholesky_banded

from .exceptions import ConfigError, NonFiniteError, StabilityError
from .rom import RampSignal
from .snapshots import SnapshotSet, Variable, VariableLayout, uniform_grid

logger = logging.getLogger(__name__)

VARIABLES = (Variable("velocity", "m/s"), Variable("temperature", "K"))


@dataclass(frozen=True)
class SynthConfig:
    """
    Settings of one synthetic run.

    Args:
        n_x: interior grid points
        n_v: 1 (velocity) or 2 (velocity and temperature)
        length: domain length
        viscosity: nu > 0
        diffusivity: kappa > 0
        mu_q: scaling of the final inflow level
        mu_p: scaling of the final outflow level
        inflow_ramp: (initial, nominal final) inflow level
        outflow_ramp: (initial, nominal final) outflow level
        ramp_end: end of the ramp window, the horizon T by default
        delta: output step
        K: output count
        advection: include the quadratic advection terms
        initial_amplitude: amplitude of the sinusoidal initial perturbation
        initial_mode: wave number of the initial perturbation
        temperature_ref: base temperature
        cooling: coupling beta of the inflow into the temperature
        inflow_center, outflow_center, source_width: Gaussian forcing profiles
        cfl: advective Courant number of the internal step
        min_substeps: internal steps per output step at least
        max_substeps: internal steps per output step at most
    """

    n_x: int = 2000
    n_v: int = 2
    length: float = 1.0
    viscosity: float = 0.05
    diffusivity: float = 0.05
    mu_q: float = 1.0
    mu_p: float = 1.0
    inflow_ramp: tuple[float, float] = (0.2, 0.5)
    outflow_ramp: tuple[float, float] = (0.1, 0.3)
    ramp_end: Optional[float] = None
    delta: float = 0.005
    K: int = 200
    advection: bool = True
    initial_amplitude: float = 0.0
    initial_mode: int = 1
    temperature_ref: float = 300.0
    cooling: float = 20.0
    inflow_center: float = 0.15
    outflow_center: float = 0.75
    source_width: float = 0.08
    cfl: float = 0.5
    min_substeps: int = 10
    max_substeps: int = 10000

    def __post_init__(self):
        if self.n_x < 16:
            raise ConfigError(f"n_x must be at least 16, got {self.n_x}")
        if self.n_v not in (1, 2):
            raise ConfigError(f"n_v must be 1 or 2, got {self.n_v}")
        if not (self.viscosity > 0 and self.diffusivity > 0):
            raise ConfigError("viscosity and diffusivity must be positive")
        if not (self.delta > 0 and self.K >= 2 and self.length > 0):
            raise ConfigError("delta, K and length must describe a non-empty horizon")
        if self.min_substeps < 1 or self.max_substeps < self.min_substeps:
            raise ConfigError("substep bounds are inconsistent")

    @property
    def T(self) -> float:
        return self.delta * (self.K - 1)

    @property
    def dx(self) -> float:
        return self.length / (self.n_x + 1)

    @property
    def layout(self) -> VariableLayout:
        return VariableLayout(VARIABLES[: self.n_v], self.n_x)

    @property
    def parameter(self) -> tuple[float, float]:
        return self.mu_q, self.mu_p

    def signal(self) -> RampSignal:
        """Inflow and outflow ramps of this run"""
        end = self.T if self.ramp_end is None else self.ramp_end
        return RampSignal(
            [self.inflow_ramp[0], self.outflow_ramp[0]],
            [self.mu_q * self.inflow_ramp[1], self.mu_p * self.outflow_ramp[1]],
            0.0,
            end,
        )


def _upwind_advection(v: np.ndarray, f: np.ndarray, dx: float) -> np.ndarray:
    """v f_x with second-order upwinding, first order next to the walls"""
    pad = np.concatenate([[0.0, 0.0], f, [0.0, 0.0]])
    back = (3 * f - 4 * pad[1:-3] + pad[:-4]) / (2 * dx)
    fwd = (-3 * f + 4 * pad[3:-1] - pad[4:]) / (2 * dx)
    back[0] = f[0] / dx
    fwd[-1] = -f[-1] / dx
    return np.maximum(v, 0.0) * back + np.minimum(v, 0.0) * fwd


def _diffusion_factor(n: int, coeff: float, dt: float, dx: float):
    """Banded Cholesky factor of I - dt coeff d^2/dx^2"""
    ab = np.empty((2, n))
    ab[0, :] = -dt * coeff / dx**2
    ab[1, :] = 1.0 + 2.0 * dt * coeff / dx**2
    return cholesky_banded(ab, lower=False)


def substeps(config: SynthConfig) -> int:
    """Internal steps per output step from the stability limits"""
    signal = config.signal()
    peak = float(signal.initial.abs().sum().item())
    peak = max(peak, float(signal.final.abs().sum().item()))
    v_bound = abs(config.initial_amplitude) + config.T * peak
    dt = config.delta / config.min_substeps
    if config.advection and v_bound > 0:
        dt = min(dt, config.cfl * config.dx / v_bound)
        dt = min(dt, 2.0 * config.viscosity / v_bound**2)
    n = max(config.min_substeps, math.ceil(config.delta / dt - 1e-12))
    if n > config.max_substeps:
        raise StabilityError(
            f"n_x={config.n_x} needs {n} internal steps per output step, "
            f"more than max_substeps={config.max_substeps}"
        )
    return n


def generate(config: SynthConfig) -> SnapshotSet:
    """Runs the synthetic model and samples it at the output times

    Args:
        config (SynthConfig): run settings

    Returns:
        SnapshotSet: states with shape=(n_v n_x, K) and the two ramp inputs
    """
    start = time.perf_counter()
    n, dx = config.n_x, config.dx
    n_sub = substeps(config)
    dt = config.delta / n_sub
    x = dx * np.arange(1, n + 1)
    signal = config.signal()
    q0, p0 = signal.initial.tolist()
    q1, p1 = signal.final.tolist()

    def ramp(t: float) -> tuple[float, float]:
        frac = min(max((t - signal.t_start) / (signal.t_end - signal.t_start), 0.0), 1.0)
        return q0 + frac * (q1 - q0), p0 + frac * (p1 - p0)

    width2 = 2 * config.source_width**2
    phi_in = np.exp(-((x - config.inflow_center) ** 2) / width2)
    phi_out = np.exp(-((x - config.outflow_center) ** 2) / width2)

    v = config.initial_amplitude * np.sin(config.initial_mode * np.pi * x / config.length)
    theta = v.copy()
    factor_v = _diffusion_factor(n, config.viscosity, dt, dx)
    factor_t = _diffusion_factor(n, config.diffusivity, dt, dx)

    times = uniform_grid(0.0, config.delta, config.K)
    states = np.empty((config.n_v * n, config.K))
    inputs = signal.sample(times).numpy()

    def store(k: int):
        states[:n, k] = v
        if config.n_v == 2:
            states[n:, k] = config.temperature_ref + theta

    store(0)
    t = 0.0
    for k in range(1, config.K):
        for i in range(n_sub):
            t = config.delta * (k - 1) + i * dt
            q, p = ramp(t)
            rhs_v = v + dt * (phi_in * q + phi_out * p)
            if config.advection:
                rhs_v -= dt * _upwind_advection(v, v, dx)
            if config.n_v == 2:
                rhs_t = theta - dt * config.cooling * phi_in * q
                if config.advection:
                    rhs_t -= dt * _upwind_advection(v, theta, dx)
                theta = cho_solve_banded((factor_t, False), rhs_t)
            v = cho_solve_banded((factor_v, False), rhs_v)
        if not (np.isfinite(v).all() and np.isfinite(theta).all()):
            raise NonFiniteError(
                f"synthetic model diverged before output step {k} "
                f"(mu_q={config.mu_q}, mu_p={config.mu_p})"
            )
        store(k)

    seconds = time.perf_counter() - start
    logger.info(
        "synthetic run mu=(%.4g, %.4g), n_x=%d, %d substeps, %.3f s",
        config.mu_q,
        config.mu_p,
        n,
        n_sub,
        seconds,
    )
    return SnapshotSet(
        parameter=torch.tensor(config.parameter, dtype=torch.float64),
        times=times,
        states=torch.from_numpy(states),
        inputs=torch.from_numpy(np.ascontiguousarray(inputs)),
        layout=config.layout,
        metadata={"input_signal": signal.to_dict(), "fom_seconds": seconds},
    )


def generate_grid(
    base: SynthConfig,
    mu_q_values: Sequence[float],
    mu_p_values: Sequence[float],
    workers: int = 1,
) -> list[SnapshotSet]:
    """One run per (mu_q, mu_p) pair, mu_q varying slowest

    Runs are independent; ``workers`` > 1 evaluates them in a thread pool
    with the same results in the same order.
    """
    if len(mu_q_values) == 0 or len(mu_p_values) == 0:
        raise ConfigError("parameter value lists must be non-empty")
    configs = [
        replace(base, mu_q=float(q), mu_p=float(p))
        for q in mu_q_values
        for p in mu_p_values
    ]
    if workers <= 1:
        return [generate(c) for c in configs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(generate, configs))
