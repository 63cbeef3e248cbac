"""Price-series ingestion, sample moments and moment-matching calibration."""
from __future__ import annotations

import csv
import datetime as _dt
import math
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np
from scipy import optimize
from scipy.stats import qmc

from .models import (JumpDiffusionParams, MomentSet, TimeChangeParams, gamma_rn_mu,
                     jd_theoretical_moments, tc_moments)

TRADING_DT = 1 / 310


@dataclass(frozen=True)
class PriceSeries:
    """Aligned daily prices; asset 1 in USD/barrel, asset 2 in USD/gallon."""

    dates: tuple
    p1: np.ndarray
    p2: np.ndarray
    dt: float = TRADING_DT
    dropped: tuple = ()

    def __post_init__(self):
        p1 = np.asarray(self.p1, float)
        p2 = np.asarray(self.p2, float)
        if p1.shape != p2.shape or len(self.dates) != p1.size:
            raise ValueError("series lengths differ")
        if np.any(p1 <= 0) or np.any(p2 <= 0):
            raise ValueError("prices must be strictly positive")
        if p1.size < 3:
            raise ValueError("need at least three observations")
        object.__setattr__(self, "p1", p1)
        object.__setattr__(self, "p2", p2)

    @classmethod
    def from_rows(cls, rows, dt: float = TRADING_DT) -> "PriceSeries":
        """Build from ``(date, p1, p2)`` rows, dropping non-positive prints."""
        keep, dropped = [], []
        for d, a, b in rows:
            a, b = float(a), float(b)
            (keep if a > 0 and b > 0 else dropped).append((d, a, b))
        dates = tuple(r[0] for r in keep)
        return cls(dates, np.array([r[1] for r in keep]), np.array([r[2] for r in keep]), dt,
                   tuple(r[0] for r in dropped))

    @classmethod
    def from_csv(cls, path_or_file, dt: float = TRADING_DT) -> "PriceSeries":
        def read(fh):
            rdr = csv.reader(line for line in fh if not line.startswith("#"))
            header = next(rdr)
            if len(header) < 3:
                raise ValueError("expected columns: date, asset1, asset2")
            return [(_dt.date.fromisoformat(r[0]), r[1], r[2]) for r in rdr if r]

        if hasattr(path_or_file, "read"):
            return cls.from_rows(read(path_or_file), dt)
        with open(path_or_file, newline="") as fh:
            return cls.from_rows(read(fh), dt)

    def log_returns(self) -> np.ndarray:
        return np.diff(np.log(np.column_stack([self.p1, self.p2])), axis=0)


def load_fixture() -> PriceSeries:
    """Bundled daily WTI (USD/bbl) and RBOB (USD/gal) series."""
    ref = resources.files("spreadpide") / "data" / "wti_rbob.csv"
    with ref.open("r", newline="") as fh:
        return PriceSeries.from_csv(fh)


@dataclass(frozen=True)
class SampleMoments(MomentSet):
    n: int = 0

    def __post_init__(self):
        super().__post_init__()
        if np.any(self.std <= 0):
            raise ValueError("zero sample standard deviation")
        if np.any(self.kurt < 1 + self.skew**2 - 1e-9):
            raise ValueError("kurtosis below 1 + skewness^2")


def moments_of_returns(y: np.ndarray, dt: float) -> SampleMoments:
    y = np.asarray(y, float)
    if y.ndim != 2 or y.shape[1] != 2 or y.shape[0] < 2:
        raise ValueError("returns must be an (n, 2) array with n >= 2")
    m = np.stack([np.mean(y**k, axis=0) for k in range(1, 5)], axis=1)
    m12 = float(np.mean(y[:, 0] * y[:, 1]))
    sd = np.std(y, axis=0)
    if np.any(sd <= 0):
        raise ValueError("zero sample standard deviation")
    corr = float(np.mean((y[:, 0] - m[0, 0]) * (y[:, 1] - m[1, 0])) / (sd[0] * sd[1]))
    return SampleMoments(m=m, m12=m12, corr=corr, dt=dt, n=y.shape[0])


def sample_moments(series: PriceSeries) -> SampleMoments:
    return moments_of_returns(series.log_returns(), series.dt)


@dataclass
class CalibrationResult:
    params: object
    residuals: np.ndarray
    cost: float
    starts: int
    info: dict = field(default_factory=dict)


def _sobol_starts(lo, hi, n: int, seed: int) -> list:
    """At least ``n`` scrambled Sobol points in the box (rounded up to a power of two)."""
    k = max(0, math.ceil(math.log2(max(n, 1))))
    pts = qmc.Sobol(len(lo), seed=seed).random_base2(k)
    return list(qmc.scale(pts, lo, hi))


# ------------------------------------------------------------ jump diffusion


def _jd_sigma_from_constraint(p: JumpDiffusionParams, mean_rate: np.ndarray) -> np.ndarray:
    """Diffusion variances implied by the drift constraint for the observed mean."""
    kJ = np.array([math.expm1(p.muJ1 + 0.5 * p.sigJ1**2), math.expm1(p.muJ2 + 0.5 * p.sigJ2**2)])
    k0 = np.array([math.expm1(p.mu01 + 0.5 * p.sig01**2), math.expm1(p.mu02 + 0.5 * p.sig02**2)])
    lam = np.array([p.lambda1, p.lambda2])
    return 2 * (p.r - mean_rate - lam * kJ - p.lambda0 * k0)


def jd_constraint_residual(p: JumpDiffusionParams, moments: MomentSet) -> np.ndarray:
    return np.array([p.sigma1**2, p.sigma2**2]) - _jd_sigma_from_constraint(p, moments.mean / moments.dt)


def calibrate_jd(moments: MomentSet, fixed: JumpDiffusionParams | None = None,
                 starts: int = 16, seed: int = 0) -> CalibrationResult:
    """Match means, variances and correlation of one-step log-returns.

    ``fixed`` supplies intensities, common-jump volatilities, ``rho_J``,
    ``muJ`` and ``r``. Free: ``rho_B`` and, where the matching intensity is
    positive, ``sigJ1, sigJ2, mu01, mu02``. Diffusion volatilities are
    implied by the risk-neutral drift constraint at the observed mean.
    """
    base = fixed or JumpDiffusionParams.reference()
    dt = moments.dt
    mean_rate = moments.mean / dt
    names = ["rho_B"]
    lo, hi = [-0.99], [0.99]
    if base.lambda1 > 0:
        names.append("sigJ1"); lo.append(1e-3); hi.append(2.0)
    if base.lambda2 > 0:
        names.append("sigJ2"); lo.append(1e-3); hi.append(2.0)
    if base.lambda0 > 0:
        names += ["mu01", "mu02"]; lo += [-1.0, -1.0]; hi += [1.0, 1.0]
    lo, hi = np.array(lo), np.array(hi)
    sd, corr = moments.std, moments.corr

    def build(theta):
        kw = dict(zip(names, map(float, theta)))
        # placeholder volatilities; the constraint fixes them below
        q = replace(base, **kw, sigma1=1.0, sigma2=1.0)
        s2 = _jd_sigma_from_constraint(q, mean_rate)
        return q, s2

    def resid(theta):
        q, s2 = build(theta)
        if np.any(s2 <= 0):
            pen = 1e3 * (1 + np.sum(np.minimum(s2, 0) ** 2))
            return np.full(5, pen)
        q = replace(q, sigma1=math.sqrt(s2[0]), sigma2=math.sqrt(s2[1]))
        mod = jd_theoretical_moments(q, dt, drift="physical")
        return np.concatenate([
            (mod.mean - moments.mean) / sd,
            mod.var / sd**2 - 1,
            [mod.corr - corr],
        ])

    x0s = [np.clip(np.array([getattr(base, n) for n in names], float), lo, hi)]
    x0s += _sobol_starts(lo, hi, starts - 1, seed)
    best = None
    for x0 in x0s:
        try:
            sol = optimize.least_squares(resid, x0, bounds=(lo, hi), xtol=1e-15, ftol=1e-15,
                                         gtol=1e-15, max_nfev=2000)
        except ValueError:
            continue
        if best is None or sol.cost < best.cost:
            best = sol
    q, s2 = build(best.x)
    if np.any(s2 <= 0):
        raise RuntimeError("no start produced admissible diffusion volatilities")
    q = replace(q, sigma1=math.sqrt(s2[0]), sigma2=math.sqrt(s2[1]))
    return CalibrationResult(q, best.fun, float(2 * best.cost), len(x0s),
                             {"free": names, "status": best.status})


# ---------------------------------------------------------- time change


def _tc_with(base: TimeChangeParams, **kw) -> TimeChangeParams:
    """Replace fields and re-solve the drifts from the martingale condition."""
    raw = {f: getattr(base, f) for f in base.__dataclass_fields__}
    raw.update({k: float(v) for k, v in kw.items()})
    for j in (1, 2):
        raw[f"mu{j}"] = gamma_rn_mu(raw["r"], raw["alpha0"], raw["beta0"], raw[f"alpha{j}"],
                                    raw[f"beta{j}"], raw[f"d{j}"], raw[f"sigr{j}"])
    return TimeChangeParams(**raw)


def calibrate_tc(moments: MomentSet, fixed: TimeChangeParams | None = None,
                 starts: int = 16, seed: int = 0) -> CalibrationResult:
    """Two-step moment matching for the Gamma time-changed model.

    Subordinators have unit mean rate (``alpha_l = beta_l``) and ``d_j`` and
    ``r`` come from ``fixed``. Drifts follow from the martingale condition.
    Step one fits ``(beta0, beta1, sigr1)`` to the first four moments of
    asset 1; step two fits ``(beta2, sigr2)`` to the cross moment and the
    first two moments of asset 2.
    """
    base = fixed or TimeChangeParams.reference()
    dt = moments.dt
    tgt = moments.m
    scale1 = np.abs(tgt[0]) + 1e-300
    rng_lo1, rng_hi1 = np.array([0.05, 0.05, 0.01]), np.array([20.0, 20.0, 2.0])

    def model1(theta):
        b0, b1, s1 = theta
        q = _tc_with(base, alpha0=b0, beta0=b0, alpha1=b1, beta1=b1, sigr1=s1)
        return q, tc_moments(q, dt)

    def res1(theta):
        try:
            q, mom = model1(theta)
        except (ValueError, ArithmeticError):
            return np.full(4, 1e3)
        return mom.m[0] / scale1 - np.sign(tgt[0])

    def multistart(fun, lo, hi, x_base, n_res):
        x0s = [np.clip(x_base, lo, hi)]
        x0s += _sobol_starts(lo, hi, starts - 1, seed)
        best = None
        for x0 in x0s:
            sol = optimize.least_squares(fun, x0, bounds=(lo, hi), xtol=1e-14, ftol=1e-14,
                                         gtol=1e-14, max_nfev=3000)
            if best is None or sol.cost < best.cost:
                best = sol
        return best, len(x0s)

    s1, n1 = multistart(res1, rng_lo1, rng_hi1, np.array([base.beta0, base.beta1, base.sigr1]), 4)

    scale2 = np.array([abs(moments.m12), abs(tgt[1, 0]), abs(tgt[1, 1])]) + 1e-300
    t2 = np.array([moments.m12, tgt[1, 0], tgt[1, 1]])

    def step2(q1):
        def model2(theta):
            b2, s2 = theta
            q = _tc_with(q1, alpha2=b2, beta2=b2, sigr2=s2)
            return q, tc_moments(q, dt)

        def res2(theta):
            try:
                q, mom = model2(theta)
            except (ValueError, ArithmeticError):
                return np.full(3, 1e3)
            return (np.array([mom.m12, mom.m[1, 0], mom.m[1, 1]]) - t2) / scale2

        sol, n = multistart(res2, np.array([0.05, 0.01]), np.array([20.0, 2.0]),
                            np.array([base.beta2, base.sigr2]), 3)
        return sol, n, model2(sol.x)[0]

    # asset 1 alone cannot tell beta0 from beta1; let the cross moment decide
    b0, b1, sig1 = s1.x
    best, n2 = None, 0
    for a, b in {(b0, b1), (b1, b0)}:
        try:
            q1, _ = model1((a, b, sig1))
        except (ValueError, ArithmeticError):
            continue
        sol, n, q = step2(q1)
        n2 += n
        if best is None or sol.cost < best[0].cost:
            best = (sol, q)
    s2, q2 = best
    res = np.concatenate([s1.fun, s2.fun])
    return CalibrationResult(q2, res, float(np.sum(res**2)), n1 + n2,
                             {"step1_cost": 2 * s1.cost, "step2_cost": 2 * s2.cost})
