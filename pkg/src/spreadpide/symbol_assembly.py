"""Jump-operator generating arrays from a pseudo-differential symbol.

For basis functions ``phi_j = s3((x - x_j)/h)`` the Galerkin entry of an
operator with symbol ``A`` is

    g(p, q) = (2 pi)^-2 int A(xi) exp(-i xi.(q h, p h)) |phi0_hat(xi)|^2 dxi
            = (2 pi)^-2 h^2 int A(w/h) s3_hat(w1)^2 s3_hat(w2)^2 exp(-i(w1 q + w2 p)) dw.

The fast path samples the rescaled integrand on ``[-c, c)^2`` with step
``2 pi / P``, folds the samples into one ``P x P`` period and applies a
single 2D FFT.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import fft as sfft
from scipy import integrate

from .bttb import GeneratingArray
from .fem import Grid2D, s3_hat, tail_fraction

log = logging.getLogger(__name__)

Symbol = Callable[[np.ndarray, np.ndarray], np.ndarray]


class ConfigError(ValueError):
    pass


class AssemblyError(ArithmeticError):
    pass


@dataclass(frozen=True)
class SymbolQuadConfig:
    """Quadrature settings for the symbol method.

    ``radius_factor`` is the half-width ``c`` of the rescaled frequency window
    (``|xi| < c / h``); it must be a multiple of ``pi`` so the sample lattice
    lines up with the node lattice. ``min_period`` sets the smallest FFT
    period in log-price units, which bounds wrap-around of slowly decaying
    kernels. ``imag_tol`` is the allowed relative imaginary residue.
    """

    radius_factor: float = 10 * math.pi
    min_period: float = 24.0
    imag_tol: float = 1e-10
    skip_tol: float = 1e-15

    def __post_init__(self):
        k = self.radius_factor / math.pi
        if k < 1 or abs(k - round(k)) > 1e-9:
            raise ConfigError("radius_factor must be a positive integer multiple of pi")
        if self.min_period <= 0:
            raise ConfigError("min_period must be positive")

    @property
    def copies(self) -> int:
        return int(round(self.radius_factor / math.pi))


def fft_period(n: int, h: float, quad: SymbolQuadConfig) -> int:
    return sfft.next_fast_len(max(2 * n - 1, math.ceil(quad.min_period / h)))


def jump_generating(grid: Grid2D, symbol: Symbol, quad: SymbolQuadConfig | None = None,
                    n: int | None = None) -> GeneratingArray:
    """Generating array of ``(A phi_j, phi_k)`` on ``grid`` (``n`` nodes per axis)."""
    quad = quad or SymbolQuadConfig()
    h = grid.h
    n = grid.n if n is None else n
    P = fft_period(n, h, quad)
    c = quad.radius_factor
    ncopy = quad.copies
    dw = 2 * math.pi / P
    base = -c + dw * np.arange(P)
    # per-copy envelope bound on s3_hat^2, for skipping negligible blocks
    env = np.array([np.max(s3_hat(base + 2 * math.pi * k) ** 2) for k in range(ncopy)])
    env_max = env.max()
    ksum = np.zeros((P, P), dtype=complex)
    skipped = 0
    for k2 in range(ncopy):
        w2 = base + 2 * math.pi * k2
        s2 = s3_hat(w2) ** 2
        for k1 in range(ncopy):
            if env[k1] * env[k2] < quad.skip_tol * env_max**2:
                skipped += 1
                continue
            w1 = base + 2 * math.pi * k1
            s1 = s3_hat(w1) ** 2
            A = symbol(w1[None, :] / h, w2[:, None] / h)
            ksum += A * (s2[:, None] * s1[None, :])
    spec = sfft.fft2(ksum)
    p = np.arange(-(n - 1), n)
    phase = np.exp(1j * c * (p[:, None] + p[None, :]))
    vals = (h * h / P**2) * phase * spec[np.ix_(p % P, p % P)]
    scale = float(np.max(np.abs(vals))) if vals.size else 0.0
    resid = float(np.max(np.abs(vals.imag))) if vals.size else 0.0
    log.debug("symbol method: P=%d, skipped %d/%d blocks, tail<=%.2e, imag residue %.2e",
              P, skipped, ncopy**2, tail_fraction(c), resid)
    if scale > 0 and resid > quad.imag_tol * scale:
        raise AssemblyError(f"imaginary residue {resid:.3e} exceeds tolerance (scale {scale:.3e})")
    return GeneratingArray(n, n, vals.real)


def _integrand(symbol: Symbol, h: float, P2: np.ndarray, Q2: np.ndarray):
    pp = P2.reshape(-1)
    qq = Q2.reshape(-1)

    def f(x):
        w1, w2 = x[:, 0], x[:, 1]
        base = symbol(w1 / h, w2 / h) * s3_hat(w1) ** 2 * s3_hat(w2) ** 2
        ph = np.exp(-1j * (np.outer(w1, qq) + np.outer(w2, pp)))
        val = base[:, None] * ph
        return np.concatenate([val.real, val.imag], axis=1)

    return f


def jump_generating_direct(h: float, m: int, symbol: Symbol, radius: float = 20 * math.pi,
                           atol: float = 1e-11, rtol: float = 1e-10) -> GeneratingArray:
    """Reference entries by adaptive cubature, one call per ``2 pi`` cell.

    Slow; meant for toy sizes (``m`` nodes per axis, offsets ``|p|, |q| < m``).
    """
    k = int(round(radius / math.pi))
    if abs(radius / math.pi - k) > 1e-9 or k % 2:
        raise ConfigError("radius must be an even multiple of pi")
    offs = np.arange(-(m - 1), m)
    P2, Q2 = np.meshgrid(offs, offs, indexing="ij")
    f = _integrand(symbol, h, P2, Q2)
    edges = -radius + 2 * math.pi * np.arange(k + 1)
    total = np.zeros(2 * P2.size)
    for a in range(k):
        for b in range(k):
            res = integrate.cubature(
                f, [edges[a], edges[b]], [edges[a + 1], edges[b + 1]],
                rtol=rtol, atol=atol, max_subdivisions=2000,
            )
            if res.status != "converged":
                raise AssemblyError(f"cubature did not converge on cell ({a}, {b})")
            total += res.estimate
    vals = (total[:P2.size] + 1j * total[P2.size:]) * h * h / (4 * math.pi**2)
    return GeneratingArray(m, m, vals.reshape(P2.shape).real)


def jump_entry_gauss(h: float, symbol: Symbol, p: int, q: int, radius: float = 20 * math.pi,
                     order: int = 24) -> complex:
    """One entry by tensor Gauss-Legendre on ``2 pi`` cells (independent check)."""
    k = int(round(radius / math.pi))
    t, w = np.polynomial.legendre.leggauss(order)
    nodes = (-radius + math.pi * (2 * np.arange(k)[:, None] + 1 + t[None, :])).reshape(-1)
    wts = np.tile(math.pi * w, k)
    W1, W2 = np.meshgrid(nodes, nodes)
    Wt = np.outer(wts, wts)
    val = symbol(W1 / h, W2 / h) * s3_hat(W1) ** 2 * s3_hat(W2) ** 2 * np.exp(-1j * (W1 * q + W2 * p))
    return complex(np.sum(Wt * val) * h * h / (4 * math.pi**2))
