"""Tensor cubic-spline Galerkin ingredients on a uniform square mesh."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .bttb import GeneratingArray

__all__ = [
    "GeneratingArray", "Grid2D", "s3", "s3_deriv", "s3_hat", "phi0_hat", "gram_1d",
    "mass_generating", "bs_stiffness_generating", "spread_payoff", "interpolate_psi",
    "eval_spline",
]


def s3(x):
    """Irwin-Hall cubic spline, normalised to ``s3(0) = 1`` and supported on [-2, 2]."""
    a = np.abs(np.asarray(x, dtype=float))
    inner = (3 * a**3 - 6 * a**2 + 4) / 4
    outer = (2 - a) ** 3 / 4
    return np.where(a < 1, inner, np.where(a <= 2, outer, 0.0))


def s3_deriv(x):
    x = np.asarray(x, dtype=float)
    a = np.abs(x)
    inner = (9 * x * a - 12 * x) / 4
    outer = -3 * np.sign(x) * (2 - a) ** 2 / 4
    return np.where(a < 1, inner, np.where(a <= 2, outer, 0.0))


def s3_hat(w):
    """Fourier transform ``int s3(x) exp(-i w x) dx`` (real and even)."""
    w = np.asarray(w, dtype=float)
    return 1.5 * np.sinc(w / (2 * np.pi)) ** 4


def phi0_hat(xi1, xi2, h: float):
    """Transform of the basis function centred at the origin with mesh width ``h``."""
    return h * h * s3_hat(h * np.asarray(xi1, float)) * s3_hat(h * np.asarray(xi2, float))


@dataclass(frozen=True)
class Grid2D:
    """Uniform mesh of ``[-L/2, L/2]^2`` with ``2^N - 1`` interior nodes per axis.

    ``band`` adds that many extra nodes on each side (used for the lifting
    function), keeping the spacing. Axis index ``i`` sits at
    ``-L/2 + (i + 1 - band) h``.
    """

    L: float = 8.0
    N: int = 4
    band: int = 0

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError("L must be positive")
        if self.band < 0:
            raise ValueError("band must be non-negative")
        if 2**self.N - 1 < 4:
            raise ValueError("need at least 4 interior nodes per axis (N >= 3)")

    @property
    def h(self) -> float:
        return self.L / 2**self.N

    @property
    def n_int(self) -> int:
        return 2**self.N - 1

    @property
    def n(self) -> int:
        """Nodes per axis including the band."""
        return self.n_int + 2 * self.band

    @property
    def size(self) -> int:
        return self.n**2

    @property
    def x0(self) -> float:
        """Coordinate of axis index 0."""
        return -self.L / 2 + (1 - self.band) * self.h

    @property
    def axis(self) -> np.ndarray:
        return self.x0 + self.h * np.arange(self.n)

    def with_band(self, band: int) -> "Grid2D":
        return Grid2D(self.L, self.N, band)

    def interior_slice(self) -> slice:
        return slice(self.band, self.band + self.n_int)

    def flat_index(self, i1, i2):
        return np.asarray(i2) * self.n + np.asarray(i1)

    def node(self, k: int) -> tuple[float, float]:
        i2, i1 = divmod(int(k), self.n)
        return (self.x0 + i1 * self.h, self.x0 + i2 * self.h)


_GL_T, _GL_W = np.polynomial.legendre.leggauss(4)


def gram_1d(h: float, d_trial: int, d_test: int) -> np.ndarray:
    """``int phi_j^(d_trial) phi_k^(d_test) dx`` for ``k - j = -3..3``.

    Exact: 4-point Gauss on each unit cell integrates the degree <= 6 pieces.
    """
    f = (s3, s3_deriv)
    t = np.concatenate([c + 0.5 + 0.5 * _GL_T for c in range(-2, 2)])
    w = np.tile(0.5 * _GL_W, 4)
    out = np.array([np.sum(w * f[d_trial](t) * f[d_test](t - off)) for off in range(-3, 4)])
    return out * h ** (1 - d_trial - d_test)


def _stencil_to_gen(n: int, stencil: np.ndarray) -> GeneratingArray:
    small = GeneratingArray(4, 4, stencil)
    if n >= 4:
        return small.pad(n, n)
    return small.crop(n, n)


def mass_generating(grid: Grid2D) -> GeneratingArray:
    G = gram_1d(grid.h, 0, 0)
    return _stencil_to_gen(grid.n, np.outer(G, G))


def bs_stiffness_generating(grid: Grid2D, Sigma, b) -> GeneratingArray:
    """Stiffness of ``-(1/2) div(Sigma grad) - b.grad`` in weak form.

    Row ``k``/column ``j`` holds
    ``1/2 sum_ab Sigma_ab (d_b phi_j, d_a phi_k) - sum_a b_a (d_a phi_j, phi_k)``.
    """
    S = np.asarray(Sigma, dtype=float)
    b = np.asarray(b, dtype=float)
    if S.shape != (2, 2) or not np.allclose(S, S.T):
        raise ValueError("Sigma must be symmetric 2x2")
    if np.any(np.linalg.eigvalsh(S) <= 0):
        raise ValueError("Sigma must be positive definite")
    h = grid.h
    G00 = gram_1d(h, 0, 0)
    G11 = gram_1d(h, 1, 1)
    G10 = gram_1d(h, 1, 0)  # trial differentiated
    G01 = gram_1d(h, 0, 1)  # test differentiated
    # outer(x2 factor, x1 factor)
    st = 0.5 * (S[0, 0] * np.outer(G00, G11) + S[1, 1] * np.outer(G11, G00)
                + S[0, 1] * np.outer(G10, G01) + S[1, 0] * np.outer(G01, G10))
    st -= b[0] * np.outer(G00, G10) + b[1] * np.outer(G10, G00)
    return _stencil_to_gen(grid.n, st)


def spread_payoff(x1, x2, K: float, c: float, s0) -> np.ndarray:
    """``(S2 - c S1 - K)^+`` at log-moneyness ``x = log(S / s0)``."""
    return np.maximum(s0[1] * np.exp(x2) - c * s0[0] * np.exp(x1) - K, 0.0)


def _collocation_solve(rhs: np.ndarray, axis: int) -> np.ndarray:
    n = rhs.shape[axis]
    ab = np.zeros((3, n))
    ab[0, 1:] = 0.25
    ab[1, :] = 1.0
    ab[2, :-1] = 0.25
    moved = np.moveaxis(rhs, axis, 0)
    sol = solve_banded((1, 1), ab, moved.reshape(n, -1)).reshape(moved.shape)
    return np.moveaxis(sol, 0, axis)


def interpolate_psi(grid: Grid2D, K: float, c: float, s0) -> np.ndarray:
    """Spline coefficients whose expansion matches the payoff at every node.

    Returned as a flat vector over all ``grid.n^2`` nodes (x1 fastest).
    """
    x = grid.axis
    vals = spread_payoff(x[None, :], x[:, None], K, c, s0)
    coef = _collocation_solve(_collocation_solve(vals, 0), 1)
    return coef.reshape(-1)


def _basis_weights(grid: Grid2D, x):
    """Indices and values of the four basis functions alive at each point."""
    x = np.asarray(x, dtype=float)
    t = (x - grid.x0) / grid.h
    base = np.floor(t).astype(int) - 1
    idx = base[..., None] + np.arange(4)
    w = s3(t[..., None] - idx)
    valid = (idx >= 0) & (idx < grid.n)
    return np.clip(idx, 0, grid.n - 1), np.where(valid, w, 0.0)


def eval_spline(grid: Grid2D, coef, x1, x2) -> np.ndarray:
    """Evaluate ``sum_k coef_k phi_k`` at points ``(x1, x2)`` (broadcast)."""
    C = np.asarray(coef).reshape(grid.n, grid.n)
    x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
    i1, w1 = _basis_weights(grid, x1)
    i2, w2 = _basis_weights(grid, x2)
    vals = C[i2[..., :, None], i1[..., None, :]]
    return np.einsum("...a,...b,...ab->...", w2, w1, vals)


def tail_fraction(radius_factor: float) -> float:
    """Upper bound on the share of ``int |s3_hat|^2`` outside ``[-R, R]``.

    Uses ``|s3_hat(w)| <= 24 / w^4``; the bound is decreasing in ``R``.
    """
    R = float(radius_factor)
    total = 2 * 151 / 140 * math.pi  # 2 pi int s3^2
    return 2 * 24.0**2 / (7 * R**7) / total
