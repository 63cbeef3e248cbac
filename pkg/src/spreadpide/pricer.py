"""Galerkin theta-scheme pricer for European spread options.

Unknown: ``u(tau, x)``, the discounted option value at time-to-maturity
``tau`` in log-moneyness ``x = log(S / s0)``. It solves

    du/dtau + (A + r) u = 0,   u(0, x) = payoff(x),

with ``A`` the pseudo-differential operator of symbol ``-Psi(-xi)``. The
solution is split as ``u = v + psi`` with ``psi`` the spline interpolant of
the payoff on an extended mesh, and ``v`` vanishing outside the outer box.
"""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .bttb import BTTBMatrix, GeneratingArray, SolverStats, bicgstab, optimal_bccb
from .fem import (Grid2D, bs_stiffness_generating, eval_spline, interpolate_psi,
                  mass_generating, spread_payoff)
from .models import JumpDiffusionParams, Model, jump_symbol, merton_rn_drift
from .symbol_assembly import SymbolQuadConfig, jump_generating


@dataclass(frozen=True)
class Contract:
    K: float = 1.0
    c: float = 1 / 42
    T: float = 0.5
    s0: tuple[float, float] = (100.0, 2.0)

    def __post_init__(self):
        object.__setattr__(self, "s0", (float(self.s0[0]), float(self.s0[1])))
        if self.K < 0:
            raise ValueError("strike must be non-negative")
        if self.c < 0:
            raise ValueError("conversion factor must be non-negative")
        if not self.T > 0:
            raise ValueError("maturity must be positive")
        if min(self.s0) <= 0:
            raise ValueError("initial prices must be positive")

    def payoff(self, S1, S2):
        return np.maximum(np.asarray(S2) - self.c * np.asarray(S1) - self.K, 0.0)


@dataclass(frozen=True)
class SchemeConfig:
    """Discretisation settings.

    ``M=None`` couples the step count to the level (``M = 2^N``). ``band`` is
    the minimum number of extra lifting nodes per side; ``margin`` widens it
    to cover at least that distance in log-price units. ``rannacher`` replaces
    that many leading steps with two implicit-Euler half steps each.
    """

    N: int = 4
    L: float = 8.0
    theta: float = 0.5
    M: int | None = None
    omega: float = 1.1
    band: int = 3
    margin: float = 1.0
    rannacher: int = 0
    tol: float = 1e-10
    maxit: int = 500
    store: str = "all"
    quad: SymbolQuadConfig = field(default_factory=SymbolQuadConfig)

    def __post_init__(self):
        if not 0 <= self.theta <= 1:
            raise ValueError("theta must lie in [0, 1]")
        if self.M is not None and self.M < 0:
            raise ValueError("M must be non-negative")
        if not 0 < self.omega < self.L / 2:
            raise ValueError("effective domain must sit strictly inside the outer box")
        if self.store not in ("all", "final"):
            raise ValueError("store must be 'all' or 'final'")
        if self.rannacher < 0:
            raise ValueError("rannacher must be non-negative")
        Grid2D(self.L, self.N)

    @property
    def steps(self) -> int:
        return 2**self.N if self.M is None else self.M

    @property
    def grid(self) -> Grid2D:
        return Grid2D(self.L, self.N)

    @property
    def grid_ext(self) -> Grid2D:
        g = self.grid
        return g.with_band(max(self.band, math.ceil(self.margin / g.h - 1e-9)))


@dataclass
class Assembled:
    grid: Grid2D
    grid_ext: Grid2D
    Mgen: GeneratingArray
    Agen: GeneratingArray
    Jgen: GeneratingArray
    r: float
    psi: np.ndarray
    F: np.ndarray

    @property
    def Ggen(self) -> GeneratingArray:
        return self.Agen + self.Jgen + self.r * self.Mgen


def _interior(grid_ext: Grid2D, vec: np.ndarray) -> np.ndarray:
    s = grid_ext.interior_slice()
    return vec.reshape(grid_ext.n, grid_ext.n)[s, s].reshape(-1)


def _embed_interior(grid_ext: Grid2D, vec: np.ndarray) -> np.ndarray:
    out = np.zeros((grid_ext.n, grid_ext.n))
    s = grid_ext.interior_slice()
    out[s, s] = vec.reshape(grid_ext.n_int, grid_ext.n_int)
    return out.reshape(-1)


def assemble(model: Model, contract: Contract, cfg: SchemeConfig) -> Assembled:
    """Mass, stiffness and jump generating arrays plus the lifting load.

    The jump-diffusion splits into an exactly integrated diffusion-drift
    part and a symbol-method jump part; the time-changed model goes entirely
    through the symbol method.
    """
    ge = cfg.grid_ext
    n_int = ge.n_int
    Mx = mass_generating(ge)
    if isinstance(model, JumpDiffusionParams):
        Ax = bs_stiffness_generating(ge, model.sigma_B, merton_rn_drift(model))
    else:
        Ax = GeneratingArray.zeros(ge.n, ge.n)
    Jx = jump_generating(ge, lambda a, b: jump_symbol(model, a, b), cfg.quad)
    psi = interpolate_psi(ge, contract.K, contract.c, contract.s0)
    Gx = Ax + Jx + model.r * Mx
    F = -_interior(ge, BTTBMatrix(Gx).matvec(psi))
    return Assembled(
        grid=cfg.grid, grid_ext=ge, Mgen=Mx.crop(n_int, n_int), Agen=Ax.crop(n_int, n_int),
        Jgen=Jx.crop(n_int, n_int), r=model.r, psi=psi, F=F,
    )


@dataclass
class PriceSurface:
    grid_ext: Grid2D
    taus: np.ndarray
    U: list
    psi: np.ndarray
    contract: Contract
    r: float
    stats: list = field(default_factory=list)

    @property
    def mean_iterations(self) -> float:
        return float(np.mean([s.iterations for s in self.stats])) if self.stats else 0.0

    def coefficients(self, k: int = -1) -> np.ndarray:
        return self.psi + _embed_interior(self.grid_ext, self.U[k])

    def values_at(self, k: int, x1, x2) -> np.ndarray:
        return eval_spline(self.grid_ext, self.coefficients(k), x1, x2)


def _step_matrices(asm: Assembled, dt: float, theta: float):
    G = asm.Ggen
    GL = asm.Mgen + (dt * theta) * G
    GR = asm.Mgen - (dt * (1 - theta)) * G
    TL = BTTBMatrix(GL)
    return TL, optimal_bccb(TL), BTTBMatrix(GR)


def evolve(asm: Assembled, cfg: SchemeConfig, T: float, contract: Contract) -> PriceSurface:
    M = cfg.steps
    n = asm.grid_ext.n_int
    U = np.zeros(n * n)
    store_all = cfg.store == "all"
    surf = PriceSurface(asm.grid_ext, np.array([0.0]), [U.copy()], asm.psi, contract, asm.r)
    if M == 0:
        return surf
    dt = T / M
    TL, P, TR = _step_matrices(asm, dt, cfg.theta)
    if cfg.rannacher:
        TLh, Ph, TRh = _step_matrices(asm, dt / 2, 1.0)
    taus = [0.0]
    for k in range(M):
        if k < cfg.rannacher:
            iters = 0
            for _ in range(2):
                U, st = bicgstab(TLh, Ph, TRh.matvec(U) + (dt / 2) * asm.F, cfg.tol, cfg.maxit, x0=U)
                iters += st.iterations
            st = SolverStats(iters, st.residual, st.breakdown, st.restarts, st.converged)
        else:
            U, st = bicgstab(TL, P, TR.matvec(U) + dt * asm.F, cfg.tol, cfg.maxit, x0=U)
        surf.stats.append(st)
        if store_all:
            surf.U.append(U.copy())
            taus.append((k + 1) * dt)
    if not store_all:
        surf.U = [surf.U[0], U.copy()]
        taus = [0.0, T]
    surf.taus = np.array(taus)
    return surf


def solve(model: Model, contract: Contract, cfg: SchemeConfig) -> PriceSurface:
    return evolve(assemble(model, contract, cfg), cfg, contract.T, contract)


def price_at(surface: PriceSurface, tau: float, S1, S2) -> np.ndarray:
    """Option value at time-to-maturity ``tau`` for spot prices ``(S1, S2)``.

    Linear in time between stored levels. Points outside the outer box raise.
    """
    taus = surface.taus
    if not taus[0] - 1e-12 <= tau <= taus[-1] + 1e-12:
        raise ValueError(f"tau={tau} outside the solved range [0, {taus[-1]}]")
    s0 = surface.contract.s0
    x1 = np.log(np.asarray(S1, float) / s0[0])
    x2 = np.log(np.asarray(S2, float) / s0[1])
    half = surface.grid_ext.L / 2
    if np.any(np.abs(x1) > half) or np.any(np.abs(x2) > half):
        raise ValueError("price requested outside the computational box")
    k = int(np.searchsorted(taus, tau - 1e-12))
    if k < len(taus) and abs(taus[k] - tau) <= 1e-12:
        return surface.values_at(k, x1, x2)
    w = (tau - taus[k - 1]) / (taus[k] - taus[k - 1])
    return (1 - w) * surface.values_at(k - 1, x1, x2) + w * surface.values_at(k, x1, x2)


def gauss_points_on(grid: Grid2D, half_width: float, order: int = 4):
    """Tensor Gauss points and weights of the mesh cells clipped to ``[-a, a]^2``."""
    t, w = np.polynomial.legendre.leggauss(order)
    edges = -grid.L / 2 + grid.h * np.arange(2**grid.N + 1)
    lo = np.clip(edges[:-1], -half_width, half_width)
    hi = np.clip(edges[1:], -half_width, half_width)
    keep = hi > lo
    lo, hi = lo[keep], hi[keep]
    x = (0.5 * (lo + hi)[:, None] + 0.5 * (hi - lo)[:, None] * t[None, :]).reshape(-1)
    wx = (0.5 * (hi - lo)[:, None] * w[None, :]).reshape(-1)
    X1, X2 = np.meshgrid(x, x)
    return X1.reshape(-1), X2.reshape(-1), np.outer(wx, wx).reshape(-1)


def relative_l2_error(coarse: PriceSurface, ref: PriceSurface, half_width: float,
                      k_coarse: int = -1, k_ref: int = -1) -> float:
    x1, x2, w = gauss_points_on(coarse.grid_ext, half_width)
    uc = coarse.values_at(k_coarse, x1, x2)
    ur = ref.values_at(k_ref, x1, x2)
    return float(np.sqrt(np.sum(w * (uc - ur) ** 2) / np.sum(w * ur**2)))


@dataclass
class ErrorRow:
    N: int
    rel_L2_error: float
    mean_iterations: float
    seconds: float


@dataclass
class ErrorTable:
    rows: list
    ref_level: int

    @property
    def errors(self) -> np.ndarray:
        return np.array([r.rel_L2_error for r in self.rows])

    @property
    def levels(self) -> np.ndarray:
        return np.array([r.N for r in self.rows])

    @property
    def rate(self) -> float:
        """Least-squares slope of ``-log2(error)`` against the level."""
        e = self.errors
        ok = e > 0
        if ok.sum() < 2:
            return float("nan")
        return float(-np.polyfit(self.levels[ok], np.log2(e[ok]), 1)[0])

    def to_csv(self, path, header: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if header:
                for line in header.splitlines():
                    fh.write(f"# {line}\n")
            w = csv.writer(fh)
            w.writerow(["N", "rel_L2_error", "mean_iterations", "seconds"])
            for r in self.rows:
                w.writerow([r.N, f"{r.rel_L2_error:.6e}", f"{r.mean_iterations:.3f}", f"{r.seconds:.3f}"])


def convergence_study(model: Model, contract: Contract, levels=range(4, 9), ref_level: int = 9,
                      base: SchemeConfig | None = None, progress=None) -> ErrorTable:
    base = base or SchemeConfig()
    levels = list(levels)
    if levels and ref_level < max(levels):
        raise ValueError("reference level must not be below the studied levels")

    def run(N):
        cfg = replace(base, N=N, store="final")
        t0 = time.perf_counter()
        s = solve(model, contract, cfg)
        return s, time.perf_counter() - t0

    ref, ref_sec = run(ref_level)
    if progress:
        progress(f"reference N={ref_level}: {ref_sec:.1f}s, {ref.mean_iterations:.2f} it/step")
    rows = []
    for N in levels:
        if N == ref_level:
            s, sec = ref, ref_sec
        else:
            s, sec = run(N)
        err = relative_l2_error(s, ref, base.omega)
        rows.append(ErrorRow(N, err, s.mean_iterations, sec))
        if progress:
            progress(f"N={N}: err={err:.4e} it/step={s.mean_iterations:.2f} {sec:.1f}s")
    return ErrorTable(rows, ref_level)


def payoff_on_nodes(surface: PriceSurface) -> np.ndarray:
    g = surface.grid_ext
    x = g.axis
    c = surface.contract
    return spread_payoff(x[None, :], x[:, None], c.K, c.c, c.s0)
