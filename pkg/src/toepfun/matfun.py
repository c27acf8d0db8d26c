"""Dense matrix functions: exp, sin, cos and truncated Taylor series."""

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from ._validation import check_function_kind, check_positive_int, check_square_matrix
from .exceptions import BoundViolation, RadiusViolation

TAYLOR_DEGREE = 16
_EXP_COEFFS = np.array([1.0 / math.factorial(i) for i in range(TAYLOR_DEGREE + 1)])


def _poly_paterson_stockmeyer(X, coeffs, block=4):
    """sum_i coeffs[i] X^i with O(sqrt(deg)) matrix products."""
    n = X.shape[0]
    eye = np.eye(n, dtype=X.dtype)
    powers = [eye, X]
    for _ in range(2, block + 1):
        powers.append(powers[-1] @ X)
    Xb = powers[block]
    deg = len(coeffs) - 1
    nblocks = deg // block
    result = None
    for j in range(nblocks, -1, -1):
        chunk = coeffs[j * block : (j + 1) * block]
        B = sum(c * P for c, P in zip(chunk, powers))
        result = B if result is None else B + Xb @ result
    return result


def expm(A):
    """Matrix exponential by scaling and squaring with degree-16 Taylor.

    The scaling is s = 2^ceil(log2 ||A||_1) (at least 1), so the Taylor
    polynomial is evaluated on a matrix of 1-norm <= 1.
    """
    A = check_square_matrix(A)
    norm1 = np.linalg.norm(A, 1)
    squarings = max(0, math.ceil(math.log2(norm1))) if norm1 > 0 else 0
    E = _poly_paterson_stockmeyer(A / 2.0**squarings, _EXP_COEFFS)
    for _ in range(squarings):
        E = E @ E
    return E


def sinm(A):
    """sin A = (e^{iA} - e^{-iA}) / 2i."""
    A = check_square_matrix(A)
    return (expm(1j * A) - expm(-1j * A)) / 2j


def cosm(A):
    """cos A = (e^{iA} + e^{-iA}) / 2."""
    A = check_square_matrix(A)
    return (expm(1j * A) + expm(-1j * A)) / 2


MATRIX_FUNCTIONS = {"exp": expm, "sin": sinm, "cos": cosm}


def matrix_function(g, A):
    return MATRIX_FUNCTIONS[check_function_kind(g)](A)


def taylor_exp(A, r, s):
    """P_{r,s} = (sum_{i=0}^r (A/s)^i / i!)^s."""
    A = check_square_matrix(A)
    r = check_positive_int(r, "r")
    s = check_positive_int(s, "s")
    coeffs = np.array([1.0 / math.factorial(i) for i in range(r + 1)])
    return np.linalg.matrix_power(_poly_paterson_stockmeyer(A / s, coeffs), s)


def taylor_exp_bound(A, r, s):
    """2-norm bound ||A||^{r+1} / (s^r (r+1)!) e^{||A||} on ||e^A - P_{r,s}||."""
    nA = np.linalg.norm(A, 2)
    return nA ** (r + 1) / (s**r * math.factorial(r + 1)) * math.exp(nA)


@dataclass(frozen=True)
class TaylorSpec:
    """h(z) = sum_k coeffs[k] (z - center)^k with radius of convergence ``radius``."""

    center: complex
    coeffs: np.ndarray
    radius: float = math.inf

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != 1 or c.size == 0 or not np.all(np.isfinite(c)):
            raise ValueError("Taylor coefficients must be a finite non-empty 1-D array")
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "center", complex(self.center))

    @classmethod
    def exp(cls, order=40):
        return cls(0.0, [1.0 / math.factorial(k) for k in range(order)])

    @classmethod
    def geometric(cls, order=200):
        """1 / (1 - z) around 0."""
        return cls(0.0, np.ones(order), radius=1.0)


class TaylorResult(NamedTuple):
    value: np.ndarray
    # norm-based geometric proxy for the truncation error; None if unavailable
    remainder_estimate: Optional[float]
    spectral_radius: float


def taylor_matfun(h, A, K):
    """Partial sum sum_{k<K} a_k (A - alpha I)^k of an analytic function.

    The series is only valid when the spectral radius of A - alpha I is below
    the radius of convergence; otherwise :class:`RadiusViolation` is raised.
    The remainder estimate is ||a_K X^K||_2 / (1 - ||X||_2 / r), reported only
    when ||X||_2 < r and a_K is known.
    """
    A = check_square_matrix(A)
    K = check_positive_int(K, "K")
    if K > h.coeffs.size:
        raise ValueError(f"K = {K} exceeds the {h.coeffs.size} known coefficients")
    n = A.shape[0]
    X = A - h.center * np.eye(n)
    rho = float(np.max(np.abs(np.linalg.eigvals(X))))
    if not rho < h.radius:
        raise RadiusViolation(rho, h.radius)
    total = np.zeros((n, n), dtype=complex)
    P = np.eye(n, dtype=complex)
    for k in range(K):
        total += h.coeffs[k] * P
        P = P @ X
    remainder = None
    ratio = np.linalg.norm(X, 2) / h.radius
    if ratio < 1 and K < h.coeffs.size:
        remainder = float(np.linalg.norm(h.coeffs[K] * P, 2) / (1 - ratio))
    return TaylorResult(total, remainder, rho)


def expm_perturbation_gap(A, B, slack=1e-8):
    """||e^A - e^B||_2, checked against ||A - B||_2 e^{max(||A||_2, ||B||_2)}."""
    A = check_square_matrix(A, "A")
    B = check_square_matrix(B, "B")
    if A.shape != B.shape:
        raise ValueError(f"dimension mismatch: {A.shape} vs {B.shape}")
    gap = float(np.linalg.norm(expm(A) - expm(B), 2))
    bound = np.linalg.norm(A - B, 2) * math.exp(max(np.linalg.norm(A, 2), np.linalg.norm(B, 2)))
    if gap > bound + slack:
        raise BoundViolation(f"||e^A - e^B|| = {gap:.6e} exceeds {bound:.6e}")
    return gap
