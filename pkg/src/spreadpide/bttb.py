"""Block Toeplitz with Toeplitz blocks (BTTB) operators.

Unknowns are laid out row-major with the second coordinate indexing blocks:
flat index ``i2 * n + i1``. A generating array ``g`` of shape
``(2m-1, 2n-1)`` defines the matrix entry between rows ``(k2, k1)`` and
columns ``(j2, j1)`` as ``g(k2 - j2, k1 - j1)``, stored at
``values[p + m - 1, q + n - 1]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft
from scipy.sparse.linalg import LinearOperator


class SingularPreconditionerError(ArithmeticError):
    pass


@dataclass(frozen=True)
class GeneratingArray:
    m: int
    n: int
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if not np.iscomplexobj(v):
            v = v.astype(float)
        if v.shape != (2 * self.m - 1, 2 * self.n - 1):
            raise ValueError(f"values shape {v.shape} != {(2 * self.m - 1, 2 * self.n - 1)}")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, m: int, n: int, dtype=float) -> "GeneratingArray":
        return cls(m, n, np.zeros((2 * m - 1, 2 * n - 1), dtype=dtype))

    @classmethod
    def from_function(cls, m: int, n: int, g) -> "GeneratingArray":
        p = np.arange(-(m - 1), m)[:, None]
        q = np.arange(-(n - 1), n)[None, :]
        return cls(m, n, np.broadcast_to(g(p, q), (2 * m - 1, 2 * n - 1)))

    def __call__(self, p: int, q: int):
        if abs(p) >= self.m or abs(q) >= self.n:
            return 0.0
        return self.values[p + self.m - 1, q + self.n - 1]

    def _check(self, other: "GeneratingArray"):
        if (self.m, self.n) != (other.m, other.n):
            raise ValueError("generating arrays of different sizes")

    def __add__(self, other: "GeneratingArray") -> "GeneratingArray":
        self._check(other)
        return GeneratingArray(self.m, self.n, self.values + other.values)

    def __sub__(self, other: "GeneratingArray") -> "GeneratingArray":
        self._check(other)
        return GeneratingArray(self.m, self.n, self.values - other.values)

    def __mul__(self, a) -> "GeneratingArray":
        return GeneratingArray(self.m, self.n, a * self.values)

    __rmul__ = __mul__

    def __neg__(self) -> "GeneratingArray":
        return GeneratingArray(self.m, self.n, -self.values)

    def crop(self, m: int, n: int) -> "GeneratingArray":
        """Generating array of the leading ``m x n``-node principal subsystem."""
        if m > self.m or n > self.n:
            raise ValueError("crop larger than source")
        a, b = self.m - m, self.n - n
        return GeneratingArray(m, n, self.values[a:a + 2 * m - 1, b:b + 2 * n - 1])

    def pad(self, m: int, n: int) -> "GeneratingArray":
        """Embed a narrow stencil into a larger node count (zeros outside)."""
        if m < self.m or n < self.n:
            raise ValueError("pad smaller than source")
        out = np.zeros((2 * m - 1, 2 * n - 1), dtype=self.values.dtype)
        a, b = m - self.m, n - self.n
        out[a:a + 2 * self.m - 1, b:b + 2 * self.n - 1] = self.values
        return GeneratingArray(m, n, out)

    def to_dense(self) -> np.ndarray:
        m, n = self.m, self.n
        k2, k1 = np.divmod(np.arange(m * n), n)
        P = k2[:, None] - k2[None, :] + m - 1
        Q = k1[:, None] - k1[None, :] + n - 1
        return self.values[P, Q]


def _embed(gen: GeneratingArray, shape) -> np.ndarray:
    """Place g(p, q) at (p mod P1, q mod P2) of a zero array."""
    m, n = gen.m, gen.n
    c = np.zeros(shape, dtype=gen.values.dtype)
    p = np.arange(-(m - 1), m) % shape[0]
    q = np.arange(-(n - 1), n) % shape[1]
    c[np.ix_(p, q)] = gen.values
    return c


@dataclass
class BTTBMatrix:
    gen: GeneratingArray
    _shape: tuple = field(init=False, repr=False)
    _spec: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        m, n = self.gen.m, self.gen.n
        self._complex = np.iscomplexobj(self.gen.values)
        real = not self._complex
        self._shape = (sfft.next_fast_len(2 * m - 1, real=real), sfft.next_fast_len(2 * n - 1, real=real))
        c = _embed(self.gen, self._shape)
        # eager so that the object is safe to share afterwards
        self._spec = sfft.fft2(c) if self._complex else sfft.rfft2(c)

    @property
    def m(self) -> int:
        return self.gen.m

    @property
    def n(self) -> int:
        return self.gen.n

    @property
    def size(self) -> int:
        return self.m * self.n

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if x.shape != (self.size,):
            raise ValueError(f"expected vector of length {self.size}, got {x.shape}")
        X = x.reshape(self.m, self.n)
        if self._complex or np.iscomplexobj(x):
            spec = self._spec if self._complex else None
            if spec is None:
                spec = sfft.fft2(_embed(self.gen, self._shape))
            y = sfft.ifft2(spec * sfft.fft2(X, s=self._shape))
        else:
            y = sfft.irfft2(self._spec * sfft.rfft2(X, s=self._shape), s=self._shape)
        return y[:self.m, :self.n].reshape(-1)

    def __matmul__(self, x):
        return self.matvec(x)

    def as_linear_operator(self) -> LinearOperator:
        dt = complex if self._complex else float
        return LinearOperator((self.size, self.size), matvec=self.matvec, dtype=dt)

    def to_dense(self) -> np.ndarray:
        return self.gen.to_dense()


def matvec(T: BTTBMatrix, x: np.ndarray) -> np.ndarray:
    return T.matvec(x)


@dataclass(frozen=True)
class BCCBPreconditioner:
    m: int
    n: int
    eigen: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.eigen)
        if e.shape != (self.m, self.n):
            raise ValueError("eigenvalue array has wrong shape")
        scale = max(float(np.max(np.abs(e))), np.finfo(float).tiny)
        if float(np.min(np.abs(e))) <= 1e3 * np.finfo(float).eps * scale:
            raise SingularPreconditionerError("block-circulant preconditioner is singular")
        c = sfft.ifft2(e)
        real = bool(np.max(np.abs(c.imag)) <= 1e-13 * np.max(np.abs(c)))
        object.__setattr__(self, "_real", real)
        if real:
            object.__setattr__(self, "_rspec", sfft.rfft2(c.real))

    @classmethod
    def identity(cls, m: int, n: int) -> "BCCBPreconditioner":
        return cls(m, n, np.ones((m, n)))

    def apply_inverse(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if x.shape != (self.m * self.n,):
            raise ValueError("dimension mismatch")
        X = x.reshape(self.m, self.n)
        if self._real and np.isrealobj(x):
            y = sfft.irfft2(sfft.rfft2(X) / self._rspec, s=X.shape)
        else:
            y = sfft.ifft2(sfft.fft2(X) / self.eigen)
        return y.reshape(-1)

    def to_dense(self) -> np.ndarray:
        """Dense circulant matrix with this spectrum (small instances only)."""
        c = sfft.ifft2(self.eigen)
        return GeneratingArray.from_function(
            self.m, self.n, lambda p, q: c[p % self.m, q % self.n]
        ).to_dense()


def optimal_bccb(T: BTTBMatrix | GeneratingArray) -> BCCBPreconditioner:
    """Frobenius-optimal block-circulant-with-circulant-blocks approximation."""
    gen = T.gen if isinstance(T, BTTBMatrix) else T
    m, n = gen.m, gen.n
    p = np.arange(m)[:, None]
    q = np.arange(n)[None, :]

    def g(a, b):
        # g at offsets possibly equal to -m or -n (weight zero there)
        a = np.broadcast_to(a, (m, n))
        b = np.broadcast_to(b, (m, n))
        ok = (np.abs(a) < m) & (np.abs(b) < n)
        out = np.zeros((m, n), dtype=gen.values.dtype)
        out[ok] = gen.values[a[ok] + m - 1, b[ok] + n - 1]
        return out

    c = ((m - p) * (n - q) * g(p, q) + p * (n - q) * g(p - m, q)
         + (m - p) * q * g(p, q - n) + p * q * g(p - m, q - n)) / (m * n)
    return BCCBPreconditioner(m, n, sfft.fft2(c))


def apply_inverse(P: BCCBPreconditioner, x: np.ndarray) -> np.ndarray:
    return P.apply_inverse(x)


@dataclass(frozen=True)
class SolverStats:
    iterations: int
    residual: float
    breakdown: bool = False
    restarts: int = 0
    converged: bool = True


def _apply(A, x):
    if callable(A) and not hasattr(A, "matvec"):
        return A(x)
    return A.matvec(x)


def bicgstab(A, P, b, tol: float = 1e-10, maxit: int = 500, x0=None,
             rng: np.random.Generator | None = None):
    """Right-preconditioned BICGSTAB.

    ``A`` is anything with ``matvec`` (or a callable), ``P`` anything with
    ``apply_inverse`` or ``None``. Convergence is declared on the true
    relative residual ``||b - A x|| / ||b||``. A breakdown triggers one
    restart with a perturbed shadow vector; a second one returns the current
    iterate with ``breakdown=True``.
    """
    b = np.asarray(b)
    dtype = np.result_type(b, np.float64)
    Pinv = (lambda v: v) if P is None else P.apply_inverse
    x = np.zeros_like(b, dtype=dtype) if x0 is None else np.array(x0, dtype=dtype)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(x), SolverStats(0, 0.0)
    r = b - _apply(A, x)
    res = float(np.linalg.norm(r)) / bnorm
    if res <= tol:
        return x, SolverStats(0, res)

    rng = rng if rng is not None else np.random.default_rng(0)
    it = 0
    restarts = 0
    rhat = r.copy()
    rho = alpha = omega = 1.0
    v = np.zeros_like(r)
    p = np.zeros_like(r)
    tiny = np.finfo(float).eps ** 2

    while it < maxit:
        rho_new = np.vdot(rhat, r)
        broke = abs(rho_new) <= tiny * np.linalg.norm(rhat) * np.linalg.norm(r) or omega == 0
        if not broke:
            it += 1
            beta = (rho_new / rho) * (alpha / omega)
            p = r + beta * (p - omega * v)
            phat = Pinv(p)
            v = _apply(A, phat)
            denom = np.vdot(rhat, v)
            broke = denom == 0
        if broke:
            if restarts >= 1:
                r = b - _apply(A, x)
                res = float(np.linalg.norm(r)) / bnorm
                return x, SolverStats(it, res, True, restarts, res <= tol)
            restarts += 1
            r = b - _apply(A, x)
            noise = rng.standard_normal(r.shape)
            rhat = r + 1e-3 * np.linalg.norm(r) / np.sqrt(r.size) * noise
            rho = alpha = omega = 1.0
            v = np.zeros_like(r)
            p = np.zeros_like(r)
            continue
        alpha = rho_new / denom
        s = r - alpha * v
        if np.linalg.norm(s) / bnorm <= tol:
            x = x + alpha * phat
            r = s
            break
        shat = Pinv(s)
        t = _apply(A, shat)
        tt = np.vdot(t, t)
        omega = np.vdot(t, s) / tt if tt != 0 else 0.0
        x = x + alpha * phat + omega * shat
        r = s - omega * t
        rho = rho_new
        if np.linalg.norm(r) / bnorm <= tol:
            break

    # recursive residuals drift; report the true one
    res = float(np.linalg.norm(b - _apply(A, x))) / bnorm
    if np.isrealobj(b) and np.iscomplexobj(x):
        x = x.real
    return x, SolverStats(it, res, False, restarts, res <= tol)
