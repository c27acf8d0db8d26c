"""Toeplitz and circulant matrices, the optimal circulant and FFT kernels.

DFT convention: the Fourier matrix is ``[F]_{jk} = exp(-2 pi i jk / n) / sqrt(n)``
and a circulant factors as ``C = F^* diag(lam) F``. With that choice the
eigenvalues ``lam`` are the *unnormalised forward* DFT of the first column,
``lam = np.fft.fft(first_col)``, and ``F^* diag(mu) F d = ifft(mu * fft(d))``.
Every FFT path in this module uses exactly this pair.
"""

import csv
import io
import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ._validation import check_function_kind, check_positive_int, check_vector, next_pow2
from .exceptions import NearSingularFunctionValue
from .genfn import TrigPoly, fourier_coeffs

SCALAR_FUNCTIONS = {"exp": np.exp, "sin": np.sin, "cos": np.cos}

# |g(lambda_j)| <= SINGULARITY_RTOL * max_j |g(lambda_j)| is treated as singular
SINGULARITY_RTOL = 1e-12

# largest n for which dense materialisation is offered
MAX_DENSE = 4096


def _frozen(a):
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


def _check_dense_size(n):
    if n > MAX_DENSE:
        raise ValueError(f"dense materialisation is limited to n <= {MAX_DENSE}, got {n}")


def _pairs(a):
    return [[float(z.real), float(z.imag)] for z in a]


def _unpairs(rows):
    return np.array([complex(re, im) for re, im in rows], dtype=complex)


@dataclass(frozen=True, eq=False)
class ToeplitzMatrix:
    """n x n Toeplitz matrix with entry (j, k) equal to a_{j-k}.

    ``coeffs`` holds a_{-(n-1)}, ..., a_{n-1}; ``coeffs[k + n - 1] = a_k``.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.coeffs)
        if a.ndim != 1 or a.size % 2 == 0:
            raise ValueError("Toeplitz coefficients must be a 1-D array of odd length 2n-1")
        if not np.all(np.isfinite(a)):
            raise ValueError("Toeplitz coefficients must be finite")
        object.__setattr__(self, "coeffs", _frozen(a))

    @property
    def n(self):
        return (self.coeffs.size + 1) // 2

    @property
    def shape(self):
        return (self.n, self.n)

    def coeff(self, k):
        return self.coeffs[k + self.n - 1] if abs(k) < self.n else 0j

    @property
    def first_column(self):
        return self.coeffs[self.n - 1 :]

    @property
    def first_row(self):
        return self.coeffs[self.n - 1 :: -1]

    @property
    def is_hermitian(self):
        a = self.coeffs
        return bool(np.allclose(a, np.conj(a[::-1]), rtol=0, atol=1e-14 * max(np.max(np.abs(a)), 1)))

    def to_dense(self):
        _check_dense_size(self.n)
        idx = np.arange(self.n)
        return self.coeffs[idx[:, None] - idx[None, :] + self.n - 1].copy()

    def matvec(self, x):
        return toeplitz_matvec(self, x)

    def __matmul__(self, x):
        return self.matvec(x)

    def to_dict(self):
        return {"kind": "toeplitz", "n": self.n, "coeffs": _pairs(self.coeffs)}

    @classmethod
    def from_dict(cls, data):
        T = cls(_unpairs(data["coeffs"]))
        if "n" in data and data["n"] != T.n:
            raise ValueError(f"n = {data['n']} does not match {T.coeffs.size} coefficients")
        return T


@dataclass(frozen=True, eq=False)
class CirculantMatrix:
    """n x n circulant with entry (j, k) equal to first_col[(j - k) mod n]."""

    first_col: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.first_col)
        if c.ndim != 1 or c.size == 0:
            raise ValueError("circulant first column must be a non-empty 1-D array")
        if not np.all(np.isfinite(c)):
            raise ValueError("circulant first column must be finite")
        object.__setattr__(self, "first_col", _frozen(c))

    @property
    def n(self):
        return self.first_col.size

    @property
    def shape(self):
        return (self.n, self.n)

    @cached_property
    def eigenvalues(self):
        lam = np.fft.fft(self.first_col)
        lam.setflags(write=False)
        return lam

    def function_eigenvalues(self, g):
        return SCALAR_FUNCTIONS[check_function_kind(g)](self.eigenvalues)

    def to_dense(self):
        _check_dense_size(self.n)
        idx = np.arange(self.n)
        return self.first_col[(idx[:, None] - idx[None, :]) % self.n].copy()

    def matvec(self, x):
        x = check_vector(x, self.n, allow_2d=True)
        return _diag_in_fourier(self.eigenvalues, x)

    def __matmul__(self, x):
        return self.matvec(x)

    def apply_fn(self, g, d):
        """g(C) d."""
        d = check_vector(d, self.n, name="d", allow_2d=True)
        return _diag_in_fourier(self.function_eigenvalues(g), d)

    def apply_fn_inv(self, g, d):
        return circulant_apply_fn_inv(self, g, d)

    def fn_dense(self, g):
        """Dense g(C), built from its first column ifft(g(lam))."""
        _check_dense_size(self.n)
        return CirculantMatrix(np.fft.ifft(self.function_eigenvalues(g))).to_dense()

    def to_dict(self):
        return {"kind": "circulant", "n": self.n, "first_col": _pairs(self.first_col)}

    @classmethod
    def from_dict(cls, data):
        return cls(_unpairs(data["first_col"]))


@dataclass(frozen=True, eq=False)
class AbsCirculant:
    """|g(C)| = F^* |g(Lambda)| F, Hermitian positive definite."""

    base: CirculantMatrix
    abs_eigs: np.ndarray
    func: str = None

    def __post_init__(self):
        e = np.asarray(self.abs_eigs, dtype=float)
        if e.shape != (self.base.n,) or np.any(e < 0):
            raise ValueError("abs_eigs must be n non-negative reals")
        e = e.copy()
        e.setflags(write=False)
        object.__setattr__(self, "abs_eigs", e)

    @property
    def n(self):
        return self.base.n

    def matvec(self, d):
        d = check_vector(d, self.n, name="d", allow_2d=True)
        return _diag_in_fourier(self.abs_eigs, d)

    def solve(self, d):
        """|g(C)|^{-1} d."""
        d = check_vector(d, self.n, name="d", allow_2d=True)
        return _diag_in_fourier(1.0 / self.abs_eigs, d)

    def to_dense(self):
        _check_dense_size(self.n)
        return CirculantMatrix(np.fft.ifft(self.abs_eigs)).to_dense()


def _diag_in_fourier(mu, d):
    """F^* diag(mu) F d, column-wise for 2-D ``d``."""
    if d.ndim == 2:
        return np.fft.ifft(mu[:, None] * np.fft.fft(d, axis=0), axis=0)
    return np.fft.ifft(mu * np.fft.fft(d))


def toeplitz_from_symbol(f, n):
    """A_n[f], the Toeplitz matrix generated by symbol ``f``."""
    return ToeplitzMatrix(fourier_coeffs(f, check_positive_int(n, "n")))


def toeplitz_matvec(A, x):
    """A x via embedding into a circulant of size next_pow2(2n - 1)."""
    n = A.n
    x = check_vector(x, n, allow_2d=True)
    if n == 1:
        return A.coeffs[0] * x
    L = next_pow2(2 * n - 1)
    emb = np.zeros(L, dtype=complex)
    emb[:n] = A.first_column
    emb[L - n + 1 :] = A.coeffs[: n - 1]  # a_{-(n-1)}, ..., a_{-1}
    lam = np.fft.fft(emb)
    if x.ndim == 2:
        y = np.fft.ifft(lam[:, None] * np.fft.fft(x, n=L, axis=0), axis=0)
    else:
        y = np.fft.ifft(lam * np.fft.fft(x, n=L))
    return y[:n]


def optimal_circulant(A):
    """c(A): first_col[k] = ((n - k) a_k + k a_{k-n}) / n, the Frobenius-nearest circulant."""
    n = A.n
    k = np.arange(n)
    a_k = A.coeffs[k + n - 1]
    a_wrap = np.zeros(n, dtype=complex)
    a_wrap[1:] = A.coeffs[k[1:] - 1]  # a_{k-n} for k >= 1
    return CirculantMatrix(((n - k) * a_k + k * a_wrap) / n)


def circulant_eigs(C):
    """Eigenvalues lam_j = sum_k c_k exp(-2 pi i jk / n)."""
    return np.array(C.eigenvalues)


def _checked_function_eigs(C, g):
    values = C.function_eigenvalues(g)
    mags = np.abs(values)
    floor = SINGULARITY_RTOL * mags.max()
    bad = np.flatnonzero(mags <= floor)
    if bad.size:
        j = int(bad[np.argmin(mags[bad])])
        raise NearSingularFunctionValue(j, values[j], floor)
    return values


def circulant_apply_fn_inv(C, g, d):
    """g(C)^{-1} d = F^* diag(1 / g(lam)) F d in O(n log n)."""
    values = _checked_function_eigs(C, g)
    d = check_vector(d, C.n, name="d", allow_2d=True)
    return _diag_in_fourier(1.0 / values, d)


def abs_circulant_fn(C, g):
    """|g(C)| with eigenvalues |g(lam_j)|."""
    values = _checked_function_eigs(C, g)
    return AbsCirculant(C, np.abs(values), func=g)


def fn_inverse_operator(C, g, absolute=False, sign=1.0):
    """LinearOperator for (sign * g(C))^{-1}, or |g(C)|^{-1} when ``absolute``.

    The adjoint is supplied too, so the operator can precondition normal
    equations. ``sign=-1`` turns a negative definite g(C) into an HPD one.
    """
    from scipy.sparse.linalg import LinearOperator

    values = _checked_function_eigs(C, g)
    mu = 1.0 / (np.abs(values) if absolute else sign * values)
    mu_adj = np.conj(mu)
    return LinearOperator(
        C.shape,
        matvec=lambda d: _diag_in_fourier(mu, np.asarray(d, dtype=complex)),
        rmatvec=lambda d: _diag_in_fourier(mu_adj, np.asarray(d, dtype=complex)),
        dtype=complex,
    )


def split_correction(p, n):
    """Dense (U, W) with c_n[p] - A_n[p] = U - W for a trigonometric polynomial.

    U carries the wrap-around corner blocks ((n-m)/n) rho_{+-m}, of rank <= 2M;
    W is banded with entries (m/n) rho_{+-m} on the m-th sub/super-diagonal.
    """
    if not isinstance(p, TrigPoly):
        raise TypeError("split_correction needs a TrigPoly")
    n = check_positive_int(n, "n")
    M = p.degree
    if n <= 2 * M:
        raise ValueError(f"need n > 2M, got n = {n}, M = {M}")
    _check_dense_size(n)
    U = np.zeros((n, n), dtype=complex)
    W = np.zeros((n, n), dtype=complex)
    for m in range(1, M + 1):
        rows = np.arange(m, n)
        W[rows, rows - m] = (m / n) * p.coeff(m)
        W[rows - m, rows] = (m / n) * p.coeff(-m)
        # j - l = n - m (lower-left corner) and j - l = -(n - m) (upper-right)
        rows = np.arange(n - m, n)
        U[rows, rows - (n - m)] = ((n - m) / n) * p.coeff(-m)
        U[rows - (n - m), rows] = ((n - m) / n) * p.coeff(m)
    return U, W


def matrix_to_json(M):
    if isinstance(M, (ToeplitzMatrix, CirculantMatrix)):
        return json.dumps(M.to_dict())
    M = np.asarray(M)
    return json.dumps({"kind": "dense", "n": M.shape[0], "rows": [_pairs(row) for row in M]})


def matrix_from_json(text):
    data = json.loads(text)
    kind = data.get("kind")
    if kind == "toeplitz":
        return ToeplitzMatrix.from_dict(data)
    if kind == "circulant":
        return CirculantMatrix.from_dict(data)
    if kind == "dense":
        return np.array([_unpairs(row) for row in data["rows"]])
    raise ValueError(f"unknown matrix kind {kind!r}")


def dense_to_csv(M, fh=None):
    """Write a dense matrix as CSV of "re,im" cells; returns the text if ``fh`` is None."""
    M = np.asarray(M, dtype=complex)
    out = fh if fh is not None else io.StringIO()
    writer = csv.writer(out)
    for row in M:
        writer.writerow([f"{float(z.real)!r},{float(z.imag)!r}" for z in row])
    if fh is None:
        return out.getvalue()


def dense_from_csv(text):
    rows = []
    for row in csv.reader(io.StringIO(text)):
        rows.append([complex(*map(float, cell.split(","))) for cell in row])
    return np.array(rows, dtype=complex)
