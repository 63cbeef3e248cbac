"""Monte Carlo reference: exact sampling of both models."""
from __future__ import annotations

import math

import numpy as np

from .models import JumpDiffusionParams, Model, TimeChangeParams, merton_rn_drift


def _rng_stream(seed, n_chunks: int):
    ss = np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in ss.spawn(n_chunks)]


def _jd_increments(p: JumpDiffusionParams, dt: float, n: int, rng, drift: str, z=None):
    """One increment over ``dt`` for ``n`` paths; ``z`` (n, 2) overrides the Brownian draws."""
    b = merton_rn_drift(p) if drift == "risk_neutral" else np.zeros(2)
    LB = np.linalg.cholesky(p.sigma_B)
    if z is None:
        z = rng.standard_normal((n, 2))
    y = b * dt + math.sqrt(dt) * z @ LB.T
    for j, (lam, mu, s) in enumerate(((p.lambda1, p.muJ1, p.sigJ1), (p.lambda2, p.muJ2, p.sigJ2))):
        k = rng.poisson(lam * dt, n)
        y[:, j] += k * mu + np.sqrt(k) * s * rng.standard_normal(n)
    k0 = rng.poisson(p.lambda0 * dt, n)
    L0 = np.linalg.cholesky(p.sigma_0J)
    y += k0[:, None] * np.array([p.mu01, p.mu02]) + np.sqrt(k0)[:, None] * (rng.standard_normal((n, 2)) @ L0.T)
    return y


def _tc_increments(p: TimeChangeParams, dt: float, n: int, rng, z=None):
    L = [rng.gamma(p.alpha(l) * dt, 1.0 / p.beta(l), n) for l in range(3)]
    if z is None:
        z = rng.standard_normal((n, 2))
    y = np.empty((n, 2))
    for j in (1, 2):
        R = L[0] + p.d(j) * L[j]
        y[:, j - 1] = p.mu(j) * R + p.sigr(j) * np.sqrt(R) * z[:, j - 1]
    return y


def simulate_jd(p: JumpDiffusionParams, T: float, steps: int, n_paths: int, seed=None,
                drift: str = "risk_neutral", paths: bool = False):
    """Log-returns of the jump-diffusion.

    Returns terminal values ``(n_paths, 2)``, or with ``paths=True`` the
    cumulative path ``(n_paths, steps + 1, 2)`` starting at zero.
    """
    if drift not in ("risk_neutral", "physical"):
        raise ValueError("drift must be 'risk_neutral' or 'physical'")
    rng = np.random.default_rng(seed)
    if not paths:
        return _jd_increments(p, T, n_paths, rng, drift)
    dt = T / steps
    out = np.zeros((n_paths, steps + 1, 2))
    for k in range(steps):
        out[:, k + 1] = out[:, k] + _jd_increments(p, dt, n_paths, rng, drift)
    return out


def simulate_tc(p: TimeChangeParams, T: float, steps: int, n_paths: int, seed=None,
                paths: bool = False):
    """Log-returns of the Gamma time-changed model (same layout as :func:`simulate_jd`)."""
    rng = np.random.default_rng(seed)
    if not paths:
        return _tc_increments(p, T, n_paths, rng)
    dt = T / steps
    out = np.zeros((n_paths, steps + 1, 2))
    for k in range(steps):
        out[:, k + 1] = out[:, k] + _tc_increments(p, dt, n_paths, rng)
    return out


def simulate(p: Model, T: float, steps: int, n_paths: int, seed=None, paths: bool = False):
    if isinstance(p, JumpDiffusionParams):
        return simulate_jd(p, T, steps, n_paths, seed, paths=paths)
    return simulate_tc(p, T, steps, n_paths, seed, paths=paths)


def _antithetic_pair(p: Model, T: float, n: int, rng):
    z = rng.standard_normal((n, 2))
    state = rng.bit_generator.state
    if isinstance(p, JumpDiffusionParams):
        y1 = _jd_increments(p, T, n, rng, "risk_neutral", z)
        rng.bit_generator.state = state
        y2 = _jd_increments(p, T, n, rng, "risk_neutral", -z)
    else:
        y1 = _tc_increments(p, T, n, rng, z)
        rng.bit_generator.state = state
        y2 = _tc_increments(p, T, n, rng, -z)
    return y1, y2


def mc_price(model: Model, contract, n_paths: int = 1_000_000, seed=None,
             chunk: int = 1 << 17) -> tuple[float, float]:
    """Discounted spread-option price and its standard error.

    Antithetic in the Gaussian draws; jump and clock draws are shared within
    each pair. The standard error is computed from pair averages.
    """
    n_pairs = max(1, n_paths // 2)
    n_chunks = -(-n_pairs // chunk)
    s0 = np.asarray(contract.s0)
    disc = math.exp(-model.r * contract.T)
    tot = tot2 = 0.0
    done = 0
    for rng in _rng_stream(seed, n_chunks):
        n = min(chunk, n_pairs - done)
        y1, y2 = _antithetic_pair(model, contract.T, n, rng)
        v = 0.0
        for y in (y1, y2):
            S = s0 * np.exp(y)
            v = v + 0.5 * contract.payoff(S[:, 0], S[:, 1])
        tot += v.sum()
        tot2 += (v * v).sum()
        done += n
    mean = tot / done
    var = max(tot2 / done - mean**2, 0.0) * done / max(done - 1, 1)
    return disc * mean, disc * math.sqrt(var / done)
