""" Dense linear algebra kernels: thin and randomized SVDs
    and regularized least-squares solves.

    The randomized SVD follows the Gaussian range finder with
    power iterations of
    [1] https://arxiv.org/abs/0909.4061
"""

from typing import Optional, Tuple

import torch
from torch import Tensor

from ..base import DTYPE, check_finite
from ..exceptions import DimensionMismatchError, RankError, SolverError

# Column count up to which the exact SVD is used for POD
DETERMINISTIC_MAX_COLUMNS = 2000
OVERSAMPLE = 10
POWER_ITERS = 2


def normalize_signs(V: Tensor, sigma: Tensor, W: Tensor) -> Tuple[Tensor, Tensor, Tensor]:
    """Flips singular pairs so the largest-magnitude entry of each left vector is positive"""
    peak = V.abs().argmax(dim=0, keepdim=True)
    signs = torch.where(V.gather(0, peak) < 0, -1.0, 1.0).to(V.dtype)
    return V * signs, sigma, W * signs


def deterministic_svd(X: Tensor) -> Tuple[Tensor, Tensor, Tensor]:
    """Thin singular value decomposition X = V diag(sigma) W^T

    Args:
        X (Tensor): data matrix with shape=(N,M)

    Returns:
        V (Tensor): left singular vectors with shape=(N,min(N,M))
        sigma (Tensor): non-increasing singular values with shape=(min(N,M),)
        W (Tensor): right singular vectors with shape=(M,min(N,M))
    """
    check_finite(X, "data matrix")
    V, sigma, Wt = torch.linalg.svd(X, full_matrices=False)
    return normalize_signs(V, sigma, Wt.mT)


def gaussian_test_matrix(
    n: int, l: int, generator: torch.Generator, dtype=DTYPE
) -> Tensor:
    """n x l test matrix with i.i.d. N(0, 1) entries"""
    return torch.randn((n, l), generator=generator, dtype=dtype)


def randomized_svd(
    X: Tensor,
    rank: int,
    oversample: int = OVERSAMPLE,
    power_iters: int = POWER_ITERS,
    seed: int = 0,
) -> Tuple[Tensor, Tensor, Tensor]:
    """Leading ``rank`` singular triplets of X from a randomized range finder

    Args:
        X (Tensor): data matrix with shape=(N,M)
        rank (int): target rank r_t
        oversample (int, optional): extra test vectors. Defaults to 10.
        power_iters (int, optional): number of power iterations. Defaults to 2.
        seed (int, optional): seed of the Gaussian test matrix. Defaults to 0.

    Returns:
        V (Tensor): left singular vectors with shape=(N,rank)
        sigma (Tensor): singular values with shape=(rank,)
        W (Tensor): right singular vectors with shape=(M,rank)
    """
    check_finite(X, "data matrix")
    n, m = X.shape
    l = rank + oversample
    if rank < 1 or oversample < 0 or power_iters < 0:
        raise RankError(
            f"invalid randomized SVD settings rank={rank}, "
            f"oversample={oversample}, power_iters={power_iters}"
        )
    if l > min(n, m):
        raise RankError(
            f"rank + oversample = {l} exceeds min(N, M) = {min(n, m)}"
        )

    generator = torch.Generator().manual_seed(seed)
    omega = gaussian_test_matrix(m, l, generator, dtype=X.dtype)

    # range finder with re-orthonormalized power iterations
    Q, _ = torch.linalg.qr(X @ omega)
    for _ in range(power_iters):
        Z, _ = torch.linalg.qr(X.mT @ Q)
        Q, _ = torch.linalg.qr(X @ Z)

    # svd in the captured subspace
    B = Q.mT @ X
    U_tilde, sigma, Wt = torch.linalg.svd(B, full_matrices=False)
    V = Q @ U_tilde
    return normalize_signs(V[:, :rank], sigma[:rank], Wt[:rank].mT)


def spd_solve(G: Tensor, R: Tensor) -> Tensor:
    """Solves G X = R for symmetric positive-definite G via Cholesky

    Args:
        G (Tensor): SPD matrices with shape=(...,n,n)
        R (Tensor): right-hand sides with shape=(...,n,k)

    Returns:
        X (Tensor): solution with shape=(...,n,k)
    """
    L, info = torch.linalg.cholesky_ex(G)
    if torch.any(info > 0):
        raise SolverError(
            "Cholesky factorization of the regularized normal equations failed, "
            "the system is not numerically positive definite"
        )
    return torch.cholesky_solve(R, L)


def stacked_lstsq(D: Tensor, Y: Tensor, reg: Optional[Tensor] = None) -> Tensor:
    """Solves min ||D X - Y||_F^2 + ||diag(reg) X||_F^2 by QR of [D; diag(reg)]

    Args:
        D (Tensor): data matrix with shape=(K,n)
        Y (Tensor): targets with shape=(K,k)
        reg (Tensor, optional): diagonal regularization with shape=(n,)

    Returns:
        X (Tensor): solution with shape=(n,k)
    """
    if D.shape[0] != Y.shape[0]:
        raise DimensionMismatchError(
            f"D has {D.shape[0]} rows but Y has {Y.shape[0]}"
        )
    if reg is not None:
        D = torch.cat([D, torch.diag(reg)], dim=0)
        Y = torch.cat([Y, Y.new_zeros((reg.numel(), Y.shape[1]))], dim=0)
    Q, R = torch.linalg.qr(D)
    return torch.linalg.solve_triangular(R, Q.mT @ Y, upper=True)
