"""Rayleigh fading, jointly normalised MRT and exact received powers.

This is the dense reference: one realization at a time, full
``(n_rrh, n_user, M)`` tensors. The batched simulator in ``montecarlo``
computes the same quantities on sparse serving pairs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Assignment, _as_rng, pairwise_distances


def sample_fading(n_rrh: int, n_user: int, M: int, seed) -> np.ndarray:
    """i.i.d. CN(0, 1) coefficients, shape ``(n_rrh, n_user, M)``."""
    if min(n_rrh, n_user, M) < 0:
        raise ValueError("dimensions must be non-negative")
    rng = _as_rng(seed)
    z = rng.standard_normal((n_rrh, n_user, M, 2)) * np.sqrt(0.5)
    return z[..., 0] + 1j * z[..., 1]


@dataclass(frozen=True)
class Realization:
    rrhs: np.ndarray     # (n_rrh, 2)
    users: np.ndarray    # (n_user, 2)
    h: np.ndarray        # (n_rrh, n_user, M)
    alpha: float

    def gains(self) -> np.ndarray:
        """Channel vectors g_ij = h_ij r_ij^(-alpha/2)."""
        d = pairwise_distances(self.rrhs, self.users)
        return self.h * d[:, :, None] ** (-0.5 * self.alpha)


@dataclass(frozen=True)
class PowerSplit:
    P_U: float
    P_I1: float
    P_I2: float
    N0: float = 0.0
    signed: bool = False   # True when P_I1 carries a cross term and may be negative

    def __post_init__(self):
        values = [self.P_U, self.P_I2, self.N0] + ([] if self.signed else [self.P_I1])
        if min(values) < 0:
            raise ValueError("negative power in an unsigned split")

    @property
    def interference(self) -> float:
        return self.P_I1 + self.P_I2

    @property
    def sinr(self) -> float:
        den = self.interference + self.N0
        if self.P_U == 0:
            return 0.0
        return self.P_U / den if den > 0 else np.inf


def mrt_weights(realization: Realization, assignment: Assignment) -> np.ndarray:
    """w_ij = conj(g_ij) / |g_j| on serving pairs, zero elsewhere."""
    g = realization.gains()
    w = np.zeros_like(g)
    for j, Cj in enumerate(assignment.serving_sets):
        if len(Cj) == 0:
            continue
        norm = np.sqrt(np.sum(np.abs(g[Cj, j, :]) ** 2))
        if norm == 0:
            raise ValueError(f"user {j} has only zero channel vectors")
        w[Cj, j, :] = np.conj(g[Cj, j, :]) / norm
    return w


def received_power_exact(realization: Realization, assignment: Assignment, weights: np.ndarray,
                         target_user: int = 0, N0: float = 0.0) -> PowerSplit:
    """Useful power and in-set / out-of-set interference at ``target_user``.

    For an interferer whose serving set straddles the target's set, the
    in-set partial sum ``a`` and out-of-set partial sum ``b`` give
    ``|a|^2 + 2 Re(a conj(b))`` to P_I1 and ``|b|^2`` to P_I2.
    """
    n_user = realization.users.shape[0]
    if not 0 <= target_user < n_user:
        raise ValueError("target user does not exist")
    g_t = realization.gains()[:, target_user, :]              # channels towards the target
    contrib = np.einsum("ijk,ik->ij", weights, g_t)           # per (i, j) complex amplitude
    own = assignment.serving_sets[target_user]
    in_set = np.zeros(realization.rrhs.shape[0], dtype=bool)
    in_set[own] = True
    P_U = float(abs(contrib[own, target_user].sum()) ** 2)
    P_I1 = P_I2 = 0.0
    for j, Cj in enumerate(assignment.serving_sets):
        if j == target_user or len(Cj) == 0:
            continue
        a = contrib[Cj[in_set[Cj]], j].sum()
        b = contrib[Cj[~in_set[Cj]], j].sum()
        P_I1 += abs(a) ** 2 + 2.0 * (a * np.conj(b)).real
        P_I2 += abs(b) ** 2
    return PowerSplit(P_U, float(P_I1), float(P_I2), N0, signed=True)


def total_received_power(realization: Realization, assignment: Assignment, weights: np.ndarray,
                         target_user: int = 0) -> float:
    """Unsplit interference sum over all users other than the target."""
    g_t = realization.gains()[:, target_user, :]
    contrib = np.einsum("ijk,ik->ij", weights, g_t)
    per_user = np.abs(contrib.sum(axis=0)) ** 2
    return float(per_user.sum() - per_user[target_user])
