"""Finite-element PIDE pricing of European spread options under bivariate Levy models."""
from .bttb import BCCBPreconditioner, BTTBMatrix, GeneratingArray, SolverStats, bicgstab, optimal_bccb
from .fem import Grid2D
from .models import JumpDiffusionParams, TimeChangeParams
from .pricer import Contract, SchemeConfig, assemble, convergence_study, evolve, price_at, solve
from .oracle import mc_price

__all__ = [
    "BCCBPreconditioner", "BTTBMatrix", "GeneratingArray", "SolverStats", "bicgstab", "optimal_bccb",
    "Grid2D", "JumpDiffusionParams", "TimeChangeParams", "Contract", "SchemeConfig", "assemble",
    "convergence_study", "evolve", "price_at", "solve", "mc_price",
]
__version__ = "0.1.0"
