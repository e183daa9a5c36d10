"""Point-process sampling, cooperative sets and disk-intersection areas."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .core_model import NetworkParams, SeedSpec


@dataclass(frozen=True)
class SimWindow:
    """Disk of radius ``R_sim`` centred on the origin.

    Users live in the disk. RRHs are sampled in the disk grown by ``r1`` so
    that every user in the window sees its complete cooperative set.
    """
    R_sim: float

    @classmethod
    def default(cls, params: NetworkParams) -> "SimWindow":
        return cls(params.r1 + 4.0 / math.sqrt(math.pi * params.lambda_U))

    def check(self, params: NetworkParams) -> "SimWindow":
        if self.R_sim < params.r1:
            raise ValueError("window radius must be at least r1")
        return self

    def scaled(self, factor: float) -> "SimWindow":
        return SimWindow(self.R_sim * factor)


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, SeedSpec):
        return seed.rng()
    return np.random.default_rng(seed)


def uniform_in_annulus(n: int, r_in: float, r_out: float, rng: np.random.Generator) -> np.ndarray:
    """``n`` points uniform on the annulus ``r_in <= |x| <= r_out``."""
    u = rng.random(n)
    rho = np.sqrt(r_in ** 2 + u * (r_out ** 2 - r_in ** 2))
    phi = rng.random(n) * (2.0 * math.pi)
    return np.column_stack((rho * np.cos(phi), rho * np.sin(phi)))


def sample_ppp(intensity: float, window: SimWindow | float, seed, r_in: float = 0.0) -> np.ndarray:
    """Homogeneous PPP on the disk (or annulus when ``r_in > 0``).

    Returns an ``(n, 2)`` array of coordinates in metres.
    """
    if intensity < 0:
        raise ValueError("intensity must be non-negative")
    R = window.R_sim if isinstance(window, SimWindow) else float(window)
    rng = _as_rng(seed)
    if intensity == 0:
        return np.empty((0, 2))
    n = rng.poisson(intensity * math.pi * (R ** 2 - r_in ** 2))
    return uniform_in_annulus(n, r_in, R, rng)


def pairwise_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float).reshape(-1, 2)
    b = np.asarray(b, dtype=float).reshape(-1, 2)
    if len(a) == 0 or len(b) == 0:
        return np.empty((len(a), len(b)))
    return cdist(a, b)


def exclusion_mask(points: np.ndarray, rrhs: np.ndarray, r0: float) -> np.ndarray:
    """True for points at distance >= r0 from every RRH."""
    if len(rrhs) == 0 or len(points) == 0:
        return np.ones(len(points), dtype=bool)
    return pairwise_distances(points, rrhs).min(axis=1) >= r0


def sample_users(intensity: float, window: SimWindow | float, rrhs: np.ndarray, r0: float, seed) -> np.ndarray:
    """User PPP on the window with every point closer than r0 to an RRH removed."""
    if r0 <= 0:
        raise ValueError("r0 must be positive")
    pts = sample_ppp(intensity, window, seed)
    return pts[exclusion_mask(pts, np.asarray(rrhs).reshape(-1, 2), r0)]


@dataclass(frozen=True)
class Assignment:
    """``serving_sets[j]`` lists the RRHs of user j; ``served_users[i]`` the users of RRH i."""
    serving_sets: tuple
    served_users: tuple

    @classmethod
    def from_mask(cls, serve: np.ndarray) -> "Assignment":
        serve = np.asarray(serve, dtype=bool)
        C = tuple(np.flatnonzero(serve[:, j]) for j in range(serve.shape[1]))
        B = tuple(np.flatnonzero(serve[i, :]) for i in range(serve.shape[0]))
        return cls(C, B)

    def is_dual(self) -> bool:
        for j, Cj in enumerate(self.serving_sets):
            for i in Cj:
                if j not in self.served_users[i]:
                    return False
        for i, Bi in enumerate(self.served_users):
            for j in Bi:
                if i not in self.serving_sets[j]:
                    return False
        return True


def serving_mask(rrhs: np.ndarray, users: np.ndarray, r1: float) -> np.ndarray:
    """Boolean ``(n_rrh, n_user)`` matrix, True where the pair is within r1."""
    rrhs = np.asarray(rrhs).reshape(-1, 2)
    users = np.asarray(users).reshape(-1, 2)
    return pairwise_distances(rrhs, users) <= r1


def build_assignment(rrhs: np.ndarray, users: np.ndarray, r1: float) -> Assignment:
    return Assignment.from_mask(serving_mask(rrhs, users, r1))


def lens_area_exact(d, r1: float):
    """Intersection area of two disks of radius r1 whose centres are ``d`` apart."""
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValueError("d must be non-negative")
    x = np.clip(d / (2.0 * r1), 0.0, 1.0)
    area = 2.0 * r1 ** 2 * np.arccos(x) - 0.5 * d * np.sqrt(np.clip(4.0 * r1 ** 2 - d ** 2, 0.0, None))
    area = np.where(d >= 2.0 * r1, 0.0, area)
    return area if area.ndim else float(area)


def lens_area_linearized(r, r1: float):
    """First-order expansion of the lens area around r = 0, clamped at zero."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("r must be non-negative")
    area = np.maximum(math.pi * r1 ** 2 * (1.0 - 2.0 * r / (math.pi * r1)), 0.0)
    return area if area.ndim else float(area)
