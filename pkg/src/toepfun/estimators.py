"""scikit-learn style wrappers around the functional API."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_function_kind, check_vector
from .exceptions import NotHermitian
from .krylov import SOLVERS, SolverConfig
from .matfun import matrix_function
from .structured import ToeplitzMatrix, fn_inverse_operator, optimal_circulant


def _as_toeplitz(T):
    if isinstance(T, ToeplitzMatrix):
        return T
    return ToeplitzMatrix(np.asarray(T))


class CirculantPreconditioner(TransformerMixin, BaseEstimator):
    """Applies g(c)^{-1} (or |g(c)|^{-1}) where c is the optimal circulant of T.

    ``fit`` takes a :class:`ToeplitzMatrix` or its length 2n-1 coefficient
    array; ``transform`` maps each row d of X to g(c)^{-1} d.
    """

    def __init__(self, func="exp", absolute=False):
        self.func = func
        self.absolute = absolute

    def fit(self, T, y=None):
        check_function_kind(self.func)
        T = _as_toeplitz(T)
        self.circulant_ = optimal_circulant(T)
        self.operator_ = fn_inverse_operator(self.circulant_, self.func, absolute=self.absolute)
        self.n_features_in_ = T.n
        return self

    def transform(self, X):
        check_is_fitted(self, "operator_")
        X = np.asarray(X)
        one_d = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        out = self.operator_.matmat(X.T.astype(complex)).T
        return out[0] if one_d else out

    def as_operator(self):
        check_is_fitted(self, "operator_")
        return self.operator_


class FunctionToeplitzSolver(BaseEstimator):
    """Solves g(A_n) x = b with a Krylov method and an optional circulant preconditioner.

    preconditioner: "none", "circulant" or "abs_circulant".
    """

    def __init__(self, func="exp", method="gmres", preconditioner="circulant", tol=1e-7, max_iter=100000):
        self.func = func
        self.method = method
        self.preconditioner = preconditioner
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, T, y=None):
        check_function_kind(self.func)
        if self.method not in SOLVERS:
            raise ValueError(f"method must be one of {sorted(SOLVERS)}, got {self.method!r}")
        if self.preconditioner not in ("none", "circulant", "abs_circulant"):
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")
        self.cfg_ = SolverConfig(self.tol, self.max_iter)
        T = _as_toeplitz(T)
        if self.method in ("cg", "minres") and not T.is_hermitian:
            raise NotHermitian(f"{self.method} needs a Hermitian Toeplitz matrix")
        self.toeplitz_ = T
        self.matrix_ = matrix_function(self.func, T.to_dense())
        self.n_features_in_ = T.n
        if self.preconditioner == "none":
            self.precond_ = None
        else:
            self.precond_ = CirculantPreconditioner(
                self.func, absolute=self.preconditioner == "abs_circulant"
            ).fit(T)
        return self

    def solve(self, b):
        check_is_fitted(self, "matrix_")
        b = check_vector(b, self.n_features_in_, "b")
        M = None if self.precond_ is None else self.precond_.as_operator()
        name = {"none": "none", "circulant": "circulant_fn", "abs_circulant": "abs_circulant_fn"}
        self.report_ = SOLVERS[self.method](
            self.matrix_, b, M, self.cfg_, precond_name=name[self.preconditioner]
        )
        return self.report_

    def predict(self, B):
        """Solve for each row of B; returns the solutions row-wise."""
        B = np.asarray(B)
        if B.ndim == 1:
            return self.solve(B).x
        return np.vstack([self.solve(b).x for b in B])
