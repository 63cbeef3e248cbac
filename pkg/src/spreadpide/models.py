"""Bivariate exponential Levy models for spread options.

Two models are supported:

* ``JumpDiffusionParams`` -- correlated Brownian motion plus idiosyncratic
  and common Gaussian (Merton) jumps.
* ``TimeChangeParams`` -- Brownian motion with drift evaluated at
  ``R_j = L0 + d_j L_j`` where ``L0, L1, L2`` are independent Gamma
  subordinators.

Characteristic exponents use the convention ``E[exp(i u.Y_t)] = exp(t Psi(u))``;
the symbol of the pricing operator is ``A(xi) = -Psi(-xi)`` for real ``xi``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from math import comb
from typing import Union

import numpy as np
from scipy import optimize


class ModelDomainError(ValueError):
    """Raised when an exponent is evaluated outside its analytic domain."""


def _pair(v) -> tuple[float, float]:
    a, b = v
    return (float(a), float(b))


@dataclass(frozen=True)
class JumpDiffusionParams:
    r: float = 0.02
    sigma1: float = 0.7025
    sigma2: float = 0.5356
    rho_B: float = 0.5364
    lambda0: float = 3.0
    lambda1: float = 2.0
    lambda2: float = 2.0
    muJ1: float = 0.0
    muJ2: float = 0.0
    sigJ1: float = 0.2808
    sigJ2: float = 0.3528
    mu01: float = -0.0775
    mu02: float = -0.0620
    sig01: float = 0.02
    sig02: float = 0.01
    rho_J: float = 0.30
    s0: tuple[float, float] = (100.0, 2.0)

    def __post_init__(self):
        object.__setattr__(self, "s0", _pair(self.s0))
        for name in ("sigma1", "sigma2", "sigJ1", "sigJ2", "sig01", "sig02"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not abs(self.rho_B) < 1 or not abs(self.rho_J) < 1:
            raise ValueError("correlations must lie in (-1, 1)")
        for name in ("lambda0", "lambda1", "lambda2"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if min(self.s0) <= 0:
            raise ValueError("initial prices must be positive")

    @classmethod
    def reference(cls, **overrides) -> "JumpDiffusionParams":
        """Crack-spread calibration of the double Merton model."""
        return cls(**overrides)

    @property
    def sigma_B(self) -> np.ndarray:
        c = self.rho_B * self.sigma1 * self.sigma2
        return np.array([[self.sigma1**2, c], [c, self.sigma2**2]])

    @property
    def sigma_0J(self) -> np.ndarray:
        c = self.rho_J * self.sig01 * self.sig02
        return np.array([[self.sig01**2, c], [c, self.sig02**2]])

    @property
    def total_intensity(self) -> float:
        return self.lambda0 + self.lambda1 + self.lambda2


@dataclass(frozen=True)
class TimeChangeParams:
    r: float = 0.02
    alpha0: float = 0.5
    beta0: float = 0.5
    alpha1: float = 0.7
    beta1: float = 0.7
    alpha2: float = 0.8
    beta2: float = 0.8
    d1: float = 1.0
    d2: float = 1.0
    mu1: float = -0.0673
    mu2: float = -0.050701
    sigr1: float = 0.4633
    sigr2: float = 0.2236
    s0: tuple[float, float] = (100.0, 2.0)

    def __post_init__(self):
        object.__setattr__(self, "s0", _pair(self.s0))
        for name in ("alpha0", "beta0", "alpha1", "beta1", "alpha2", "beta2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.d1 < 0 or self.d2 < 0:
            raise ValueError("loading factors must be non-negative")
        if self.sigr1 < 0 or self.sigr2 < 0:
            raise ValueError("Brownian volatilities must be non-negative")
        for j in (1, 2):
            x = self.mu(j) + 0.5 * self.sigr(j) ** 2
            if not 0 < x < min(self.beta0, self.beta(j)):
                raise ValueError(
                    f"asset {j}: mu + sigma^2/2 = {x:.6g} outside (0, min(beta0, beta{j}))"
                )
        if min(self.s0) <= 0:
            raise ValueError("initial prices must be positive")

    def mu(self, j: int) -> float:
        return self.mu1 if j == 1 else self.mu2

    def sigr(self, j: int) -> float:
        return self.sigr1 if j == 1 else self.sigr2

    def alpha(self, j: int) -> float:
        return (self.alpha0, self.alpha1, self.alpha2)[j]

    def beta(self, j: int) -> float:
        return (self.beta0, self.beta1, self.beta2)[j]

    def d(self, j: int) -> float:
        return self.d1 if j == 1 else self.d2

    @classmethod
    def reference(cls, **overrides) -> "TimeChangeParams":
        """Gamma time-change calibration with risk-neutral drifts.

        The nominal drifts in ``GAMMA_TC_NOMINAL`` do not satisfy the
        martingale condition, so ``mu1, mu2`` are re-solved from it with every
        other nominal value held fixed.
        """
        raw = dict(GAMMA_TC_NOMINAL)
        raw.update(overrides)
        for j in (1, 2):
            if f"mu{j}" in overrides:
                continue
            raw[f"mu{j}"] = gamma_rn_mu(
                raw["r"], raw["alpha0"], raw["beta0"], raw[f"alpha{j}"],
                raw[f"beta{j}"], raw[f"d{j}"], raw[f"sigr{j}"],
            )
        return cls(**raw)


GAMMA_TC_NOMINAL = dict(
    r=0.02, alpha0=0.5, beta0=0.5, alpha1=0.7, beta1=0.7, alpha2=0.8, beta2=0.8,
    d1=1.0, d2=1.0, mu1=-0.0673, mu2=-0.050701, sigr1=0.4633, sigr2=0.2236,
    s0=(100.0, 2.0),
)

Model = Union[JumpDiffusionParams, TimeChangeParams]


@dataclass(frozen=True)
class MomentSet:
    """Raw moments of one-step log-returns.

    ``m[j, k-1]`` is ``E[dY_j^k]`` for asset ``j`` (0-based) and ``k = 1..4``.
    """

    m: np.ndarray
    m12: float
    corr: float
    dt: float

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float).reshape(2, 4)
        object.__setattr__(self, "m", m)
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if np.any(m[:, 1] < m[:, 0] ** 2 * (1 - 1e-12)):
            raise ValueError("second moment below squared mean")
        if abs(self.corr) > 1 + 1e-12:
            raise ValueError("|corr| > 1")

    @property
    def mean(self) -> np.ndarray:
        return self.m[:, 0]

    @property
    def var(self) -> np.ndarray:
        return self.m[:, 1] - self.m[:, 0] ** 2

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.var)

    @property
    def skew(self) -> np.ndarray:
        m1, m2, m3 = self.m[:, 0], self.m[:, 1], self.m[:, 2]
        return (m3 - 3 * m1 * m2 + 2 * m1**3) / self.var**1.5

    @property
    def kurt(self) -> np.ndarray:
        m1, m2, m3, m4 = self.m.T
        c4 = m4 - 4 * m1 * m3 + 6 * m1**2 * m2 - 3 * m1**4
        return c4 / self.var**2


# ---------------------------------------------------------------- Merton model


def merton_rn_drift(p: JumpDiffusionParams) -> np.ndarray:
    """Diffusion drift making ``exp(-rt) S_t`` a martingale in each coordinate."""
    kJ = np.array([math.expm1(p.muJ1 + 0.5 * p.sigJ1**2), math.expm1(p.muJ2 + 0.5 * p.sigJ2**2)])
    k0 = np.array([math.expm1(p.mu01 + 0.5 * p.sig01**2), math.expm1(p.mu02 + 0.5 * p.sig02**2)])
    sig2 = np.array([p.sigma1**2, p.sigma2**2])
    lam = np.array([p.lambda1, p.lambda2])
    return p.r - 0.5 * sig2 - lam * kJ - p.lambda0 * k0


def merton_jump_exponent(p: JumpDiffusionParams, u1, u2):
    u1 = np.asarray(u1, dtype=complex)
    u2 = np.asarray(u2, dtype=complex)
    idio = p.lambda1 * np.expm1(1j * p.muJ1 * u1 - 0.5 * p.sigJ1**2 * u1**2)
    idio = idio + p.lambda2 * np.expm1(1j * p.muJ2 * u2 - 0.5 * p.sigJ2**2 * u2**2)
    S = p.sigma_0J
    quad = S[0, 0] * u1**2 + 2 * S[0, 1] * u1 * u2 + S[1, 1] * u2**2
    common = p.lambda0 * np.expm1(1j * (p.mu01 * u1 + p.mu02 * u2) - 0.5 * quad)
    return idio + common


def merton_char_exponent(p: JumpDiffusionParams, u1, u2):
    """Risk-neutral characteristic exponent of the log-returns."""
    with np.errstate(over="raise", invalid="raise"):
        try:
            u1 = np.asarray(u1, dtype=complex)
            u2 = np.asarray(u2, dtype=complex)
            b = merton_rn_drift(p)
            S = p.sigma_B
            quad = S[0, 0] * u1**2 + 2 * S[0, 1] * u1 * u2 + S[1, 1] * u2**2
            return 1j * (b[0] * u1 + b[1] * u2) - 0.5 * quad + merton_jump_exponent(p, u1, u2)
        except FloatingPointError as exc:
            raise ModelDomainError("exponent overflow; argument out of range") from exc


# ------------------------------------------------------- Gamma time change


def _gamma_log_args(p: TimeChangeParams, u1, u2):
    u1 = np.asarray(u1, dtype=complex)
    u2 = np.asarray(u2, dtype=complex)
    z0 = u1 * p.mu1 + u2 * p.mu2 + 0.5j * (p.sigr1**2 * u1**2 + p.sigr2**2 * u2**2)
    z1 = p.d1 * (u1 * p.mu1 + 0.5j * p.sigr1**2 * u1**2)
    z2 = p.d2 * (u2 * p.mu2 + 0.5j * p.sigr2**2 * u2**2)
    return [
        (p.alpha0, 1 - 1j * z0 / p.beta0),
        (p.alpha1, 1 - 1j * z1 / p.beta1),
        (p.alpha2, 1 - 1j * z2 / p.beta2),
    ]


def gamma_char_exponent(p: TimeChangeParams, u1, u2):
    """Characteristic exponent of the Gamma time-changed log-returns."""
    out = 0
    for alpha, w in _gamma_log_args(p, u1, u2):
        if np.any(np.real(w) <= 0):
            raise ModelDomainError("Gamma log argument with non-positive real part")
        out = out - alpha * np.log(w)
    return out


def gamma_marginal_exponent(p: TimeChangeParams, j: int, u):
    """Closed form of ``Psi_Y(u, 0)`` (j = 1) or ``Psi_Y(0, u)`` (j = 2)."""
    u = np.asarray(u, dtype=complex)
    mu, s = p.mu(j), p.sigr(j)
    bj, dj = p.beta(j), p.d(j)
    return (
        -p.alpha0 * np.log(1 - 1j * mu * u / p.beta0 + s**2 * u**2 / (2 * p.beta0))
        - p.alpha(j) * np.log(1 - 1j * mu * dj * u / bj + s**2 * dj * u**2 / (2 * bj))
    )


def gamma_martingale_lhs(r, alpha0, beta0, alpha_j, beta_j, d_j, mu, sigr) -> float:
    """``Psi^{(j)}(-i)``; equals ``r`` under the risk-neutral measure."""
    x = mu + 0.5 * sigr**2
    a, b = 1 - x / beta0, 1 - x * d_j / beta_j
    if a <= 0 or b <= 0:
        raise ModelDomainError("martingale condition outside the log domain")
    return -alpha0 * math.log(a) - alpha_j * math.log(b)


def gamma_rn_mu(r, alpha0, beta0, alpha_j, beta_j, d_j, sigr) -> float:
    """Drift ``mu_j`` solving the martingale condition, other values fixed."""
    # lhs is increasing in x = mu + sigr^2/2 on (0, x_max) and vanishes at 0
    xmax = min(beta0, beta_j / d_j if d_j > 0 else np.inf)

    def f(x):
        return -alpha0 * math.log(1 - x / beta0) - alpha_j * math.log(1 - x * d_j / beta_j) - r

    if r <= 0:
        raise ModelDomainError("martingale drift needs r > 0 for the admissible branch")
    x = optimize.brentq(f, 0.0, xmax * (1 - 1e-15), xtol=1e-15, rtol=1e-15, maxiter=200)
    return x - 0.5 * sigr**2


def gamma_rn_residual(p: TimeChangeParams) -> np.ndarray:
    """``Psi(-i e_j) - r`` for j = 1, 2 evaluated through the full exponent."""
    return np.array([
        float(np.real(gamma_char_exponent(p, -1j, 0.0))) - p.r,
        float(np.real(gamma_char_exponent(p, 0.0, -1j))) - p.r,
    ])


# ------------------------------------------------------------------ symbols


def char_exponent(p: Model, u1, u2):
    if isinstance(p, JumpDiffusionParams):
        return merton_char_exponent(p, u1, u2)
    return gamma_char_exponent(p, u1, u2)


def martingale_residual(p: Model) -> np.ndarray:
    return np.array([
        float(np.real(char_exponent(p, -1j, 0.0))) - p.r,
        float(np.real(char_exponent(p, 0.0, -1j))) - p.r,
    ])


def full_symbol(p: Model, xi1, xi2):
    """``A(xi) = -Psi(-xi)`` without the discounting term."""
    return -char_exponent(p, -np.asarray(xi1, float), -np.asarray(xi2, float))


def jump_symbol(p: Model, xi1, xi2):
    """Symbol routed through the Fourier (symbol-method) assembly.

    For the jump-diffusion this is the pure-jump part; diffusion and drift
    are assembled exactly elsewhere. The time-changed model has no such
    split, so its whole symbol is returned.
    """
    xi1 = np.asarray(xi1, float)
    xi2 = np.asarray(xi2, float)
    if isinstance(p, JumpDiffusionParams):
        return -merton_jump_exponent(p, -xi1, -xi2)
    return full_symbol(p, xi1, xi2)


# ------------------------------------------------------------------ moments


def _gamma_raw_moments(shape: float, rate: float, kmax: int = 4) -> np.ndarray:
    out = np.ones(kmax + 1)
    for k in range(1, kmax + 1):
        out[k] = out[k - 1] * (shape + k - 1) / rate
    return out


def tc_moments(p: TimeChangeParams, dt: float) -> MomentSet:
    """Raw moments of the time-changed log-return over ``dt``.

    Subordinator moments of ``R_j = L0 + d_j L_j`` are expanded binomially,
    including the cross terms between the independent clocks.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    EL = [_gamma_raw_moments(p.alpha(l) * dt, p.beta(l)) for l in range(3)]
    m = np.zeros((2, 4))
    ER = []
    for j in (1, 2):
        dj = p.d(j)
        E = np.array([
            sum(comb(k, i) * EL[0][i] * dj ** (k - i) * EL[j][k - i] for i in range(k + 1))
            for k in range(5)
        ])
        ER.append(E)
        mu, s2 = p.mu(j), p.sigr(j) ** 2
        m[j - 1] = [
            mu * E[1],
            mu**2 * E[2] + s2 * E[1],
            mu**3 * E[3] + 3 * mu * s2 * E[2],
            mu**4 * E[4] + 6 * mu**2 * s2 * E[3] + 3 * s2**2 * E[2],
        ]
    ER1R2 = (EL[0][2] + p.d2 * EL[0][1] * EL[2][1] + p.d1 * EL[1][1] * EL[0][1]
             + p.d1 * p.d2 * EL[1][1] * EL[2][1])
    m12 = p.mu1 * p.mu2 * ER1R2
    var = m[:, 1] - m[:, 0] ** 2
    corr = (m12 - m[0, 0] * m[1, 0]) / math.sqrt(var[0] * var[1])
    return MomentSet(m=m, m12=m12, corr=corr, dt=dt)


def jd_theoretical_moments(p: JumpDiffusionParams, dt: float, drift: str = "physical") -> MomentSet:
    """Exact one-step moments of the jump-diffusion log-returns.

    ``drift="physical"`` gives the Brownian part zero drift, so the mean rate is
    the jump mean ``lambda_j muJ_j + lambda0 mu0_j``; ``"risk_neutral"`` adds the
    martingale drift.
    """
    if drift not in ("physical", "risk_neutral"):
        raise ValueError("drift must be 'physical' or 'risk_neutral'")
    b = merton_rn_drift(p) if drift == "risk_neutral" else np.zeros(2)
    lam = (p.lambda1, p.lambda2)
    muJ, sJ = (p.muJ1, p.muJ2), (p.sigJ1, p.sigJ2)
    mu0, s0 = (p.mu01, p.mu02), (p.sig01, p.sig02)
    sig = (p.sigma1, p.sigma2)

    def gauss_raw(mu, s):
        return (mu, mu**2 + s**2, mu**3 + 3 * mu * s**2, mu**4 + 6 * mu**2 * s**2 + 3 * s**4)

    m = np.zeros((2, 4))
    for j in range(2):
        gi, gc = gauss_raw(muJ[j], sJ[j]), gauss_raw(mu0[j], s0[j])
        k1 = dt * (b[j] + lam[j] * gi[0] + p.lambda0 * gc[0])
        k2 = dt * (sig[j] ** 2 + lam[j] * gi[1] + p.lambda0 * gc[1])
        k3 = dt * (lam[j] * gi[2] + p.lambda0 * gc[2])
        k4 = dt * (lam[j] * gi[3] + p.lambda0 * gc[3])
        m[j] = [
            k1,
            k2 + k1**2,
            k3 + 3 * k2 * k1 + k1**3,
            k4 + 4 * k3 * k1 + 3 * k2**2 + 6 * k2 * k1**2 + k1**4,
        ]
    cov = dt * (p.rho_B * p.sigma1 * p.sigma2
                + p.lambda0 * (p.rho_J * p.sig01 * p.sig02 + p.mu01 * p.mu02))
    var = m[:, 1] - m[:, 0] ** 2
    return MomentSet(m=m, m12=cov + m[0, 0] * m[1, 0], corr=cov / math.sqrt(var[0] * var[1]), dt=dt)


def jd_sample_correlation(p: JumpDiffusionParams, dt: float, stds) -> float:
    """Model covariance of the diffusion and common-jump parts over given sample stds.

    This omits the common-jump intensity and mean terms of the exact covariance.
    """
    s1, s2 = stds
    return (p.rho_B * p.sigma1 * p.sigma2 + p.rho_J * p.sig01 * p.sig02) * dt / (s1 * s2)


# -------------------------------------------------- well-posedness checks


def weight_admissible(eta, norm_order: int = 2) -> bool:
    """Whether the spread payoff lies in the ``eta``-weighted L^1 / L^2 space.

    Admissible weights are ``(0, a - k) x (-inf, -a)`` for some ``a > k`` with
    ``k`` the norm order.
    """
    if norm_order not in (1, 2):
        raise ValueError("norm_order must be 1 or 2")
    e1, e2 = float(eta[0]), float(eta[1])
    k = norm_order
    return e1 > 0 and e2 < -k and e1 < -e2 - k


@dataclass(frozen=True)
class CoercivityReport:
    C1: float
    C2: float
    C3: float
    m_eig: float
    M_eig: float
    pointwise: np.ndarray = field(repr=False)
    alpha_idx: int = 2
    beta_idx: int = 1

    @property
    def holds(self) -> bool:
        return bool(np.all(self.pointwise))


def coercivity_report(p: JumpDiffusionParams, sample_grid=None) -> CoercivityReport:
    """Continuity and Garding constants of the jump-diffusion symbol.

    ``sample_grid`` is a pair of 1-d frequency axes; defaults to the integer
    grid on ``[-50, 50]^2``.
    """
    if sample_grid is None:
        ax = np.arange(-50.0, 51.0)
        sample_grid = (ax, ax)
    u1, u2 = np.meshgrid(np.asarray(sample_grid[0], float), np.asarray(sample_grid[1], float))
    eig = np.linalg.eigvalsh(p.sigma_B)
    m_eig, M_eig = float(eig[0]), float(eig[-1])
    lam = p.total_intensity
    b = merton_rn_drift(p)
    C1 = max(float(np.linalg.norm(b)), M_eig / 2, 2 * lam)
    C2 = m_eig / 2
    C3 = max(2 * lam + m_eig / 2, math.sqrt(2 * m_eig))
    A = full_symbol(p, u1, u2)
    nu = 1 + np.hypot(u1, u2)
    ok = (np.abs(A) <= C1 * nu**2 * (1 + 1e-12)) & (np.real(A) >= C2 * nu**2 - C3 * nu - 1e-12)
    return CoercivityReport(C1=C1, C2=C2, C3=C3, m_eig=m_eig, M_eig=M_eig, pointwise=ok)


def params_from_mapping(kind: str, mapping) -> Model:
    """Build params from a flat string mapping (config section)."""
    cls = JumpDiffusionParams if kind == "merton" else TimeChangeParams
    names = {f.name for f in fields(cls)}
    kw = {}
    for key, val in mapping.items():
        if key == "s0":
            kw["s0"] = tuple(float(x) for x in str(val).replace(",", " ").split())
        elif key in names:
            kw[key] = float(val)
        else:
            raise KeyError(f"unknown {kind} field '{key}'")
    if cls is TimeChangeParams:
        return TimeChangeParams.reference(**kw)
    return cls(**kw)


def params_to_mapping(p: Model) -> dict[str, str]:
    out = {}
    for f in fields(p):
        v = getattr(p, f.name)
        out[f.name] = " ".join(repr(float(x)) for x in v) if f.name == "s0" else repr(float(v))
    return out
