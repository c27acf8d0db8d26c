"""Input validation helpers shared across modules."""

import numbers

import numpy as np

from .exceptions import NotHermitian

FUNCTION_KINDS = ("exp", "sin", "cos")

# relative tolerance used to certify a Hermitian flag
HERMITIAN_RTOL = 1e-12


def check_function_kind(g):
    if g not in FUNCTION_KINDS:
        raise ValueError(f"unknown function kind {g!r}; expected one of {FUNCTION_KINDS}")
    return g


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_square_matrix(A, name="A", hermitian=False):
    """Return ``A`` as a finite complex square ndarray.

    With ``hermitian=True`` the matrix is certified Hermitian:
    ``max|A - A^*| <= 1e-12 * ||A||_F``.
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {A.shape}")
    if A.shape[0] == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    A = A.astype(complex, copy=False)
    if hermitian and not is_hermitian(A):
        raise NotHermitian(f"{name} is not Hermitian to {HERMITIAN_RTOL:g} relative")
    return A


def is_hermitian(A, rtol=HERMITIAN_RTOL):
    A = np.asarray(A)
    scale = np.linalg.norm(A)
    return bool(np.max(np.abs(A - A.conj().T)) <= rtol * max(scale, np.finfo(float).tiny))


def check_vector(x, n=None, name="x", allow_2d=False):
    """Return ``x`` as a finite complex array whose first axis has length ``n``."""
    x = np.asarray(x)
    if x.ndim not in ((1, 2) if allow_2d else (1,)):
        raise ValueError(f"{name} must be a vector, got shape {x.shape}")
    if n is not None and x.shape[0] != n:
        raise ValueError(f"dimension mismatch: {name} has length {x.shape[0]}, expected {n}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} has non-finite entries")
    return x.astype(complex, copy=False)


def next_pow2(m):
    return 1 << max(0, int(m - 1).bit_length())
