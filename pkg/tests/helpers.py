import torch

from paramrom.operators import ReducedOperatorSet
from paramrom.rom import RampSignal, rk4_trajectory
from paramrom.snapshots import SnapshotSet, Variable, VariableLayout, uniform_grid

torch.set_default_dtype(torch.float64)

LAYOUT = VariableLayout((Variable("velocity", "m/s"), Variable("temperature", "K")), 20)


def random_basis(N: int, r: int, seed: int = 0) -> torch.Tensor:
    """Orthonormal N x r matrix"""
    g = torch.Generator().manual_seed(seed)
    Q, _ = torch.linalg.qr(torch.randn(N, r, generator=g))
    return Q


def stable_operators(mu: float = 1.0, r: int = 3, m: int = 2) -> ReducedOperatorSet:
    """Small, damped quadratic operators depending smoothly on ``mu``"""
    g = torch.Generator().manual_seed(7)
    A = -torch.diag(torch.linspace(1.0, 2.0, r)) * mu
    A = A + 0.1 * torch.randn(r, r, generator=g)
    H = 0.05 * torch.randn(r, r * (r + 1) // 2, generator=g)
    B = 0.5 * torch.randn(r, m, generator=g)
    c = 0.1 * torch.randn(r, generator=g)
    return ReducedOperatorSet(c, A, H, B)


def lifted_snapshots(
    mu: tuple[float, float],
    layout: VariableLayout = LAYOUT,
    K: int = 60,
    delta: float = 0.01,
) -> SnapshotSet:
    """Snapshots whose states are an exact linear lift of quadratic reduced
    dynamics, so operator inference can reproduce them"""
    ops = stable_operators(mu[0])
    signal = RampSignal([0.2, 0.1], [0.5 * mu[0], 0.3 * mu[1]], 0.0, delta * (K - 1))
    times = uniform_grid(0.0, delta, K)
    s0 = torch.tensor([0.5, -0.3, 0.2])
    reduced, _ = rk4_trajectory(ops, s0, signal, times)
    V = random_basis(layout.N, ops.r)
    states = V @ reduced
    return SnapshotSet(
        parameter=torch.tensor(mu),
        times=times,
        states=states,
        inputs=signal.sample(times),
        layout=layout,
        metadata={"input_signal": signal.to_dict()},
    )
