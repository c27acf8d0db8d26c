"""Numerical checks of the spectral structure of preconditioned operators."""

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ._validation import check_function_kind, check_positive_int, check_square_matrix
from .exceptions import SpectrumError
from .genfn import sup_norm
from .matfun import expm, matrix_function
from .structured import (
    MAX_DENSE,
    abs_circulant_fn,
    circulant_apply_fn_inv,
    optimal_circulant,
    toeplitz_from_symbol,
)

logger = logging.getLogger(__name__)

CLUSTER_EPS = 0.1
OUTLIER_SLACK = 2
RANK_CUT_RTOL = 1e-2
EIG_RESIDUAL_RTOL = 1e-8


@dataclass
class SpectrumReport:
    n: int
    eigenvalues: np.ndarray = field(repr=False)
    cluster_center: complex
    cluster_radius: float
    outlier_count: int
    outlier_indices: list

    @property
    def inlier_fraction(self):
        return 1.0 - self.outlier_count / self.n

    def to_dict(self):
        return {
            "n": self.n,
            "cluster_center": [self.cluster_center.real, self.cluster_center.imag],
            "cluster_radius": self.cluster_radius,
            "outlier_count": self.outlier_count,
            "outlier_indices": self.outlier_indices,
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
        }


@dataclass
class DecompositionReport:
    """Singular-value split of a difference matrix into rank-cut + tail."""

    sigma: np.ndarray = field(repr=False)
    rank_cut: int
    tail_norm: float
    frob_tail: float
    eps: float

    def to_dict(self):
        out = asdict(self)
        out["sigma"] = [float(s) for s in self.sigma]
        return out


def spectrum(op):
    """Dense eigenvalues, each pair certified by ||A v - lam v|| <= 1e-8 ||A||."""
    A = check_square_matrix(op)
    if A.shape[0] > MAX_DENSE:
        raise ValueError(f"spectrum is limited to n <= {MAX_DENSE}")
    try:
        lam, V = np.linalg.eig(A)
    except np.linalg.LinAlgError as exc:
        raise SpectrumError(f"eigensolver failed for n = {A.shape[0]}: {exc}") from exc
    resid = np.linalg.norm(A @ V - V * lam, axis=0) / np.linalg.norm(V, axis=0)
    scale = np.linalg.norm(A, 2)
    worst = float(resid.max()) if resid.size else 0.0
    if worst > EIG_RESIDUAL_RTOL * max(scale, 1e-300):
        raise SpectrumError(
            f"eigenpair residual {worst:.3e} exceeds {EIG_RESIDUAL_RTOL:g} * ||A|| = "
            f"{EIG_RESIDUAL_RTOL * scale:.3e}"
        )
    return lam


def cluster_report(eigs, center=1.0, eps=CLUSTER_EPS):
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    eigs = np.asarray(eigs, dtype=complex)
    dist = np.abs(eigs - center)
    order = np.argsort(-dist, kind="stable")
    outliers = np.flatnonzero(dist > eps)
    return SpectrumReport(
        n=eigs.size,
        eigenvalues=eigs[order],
        cluster_center=complex(center),
        cluster_radius=float(eps),
        outlier_count=int(outliers.size),
        outlier_indices=[int(i) for i in outliers],
    )


def decompose_difference(D, eps):
    """rank_cut = #{sigma_k > eps}, i.e. min{k : sigma_{k+1} <= eps}."""
    D = check_square_matrix(D, "D")
    sigma = np.linalg.svd(D, compute_uv=False)
    cut = int(np.count_nonzero(sigma > eps))
    tail = sigma[cut:]
    return DecompositionReport(
        sigma=sigma,
        rank_cut=cut,
        tail_norm=float(tail[0]) if tail.size else 0.0,
        frob_tail=float(np.sqrt(np.sum(tail**2))),
        eps=float(eps),
    )


@dataclass
class FunctionPair:
    """Dense g(A_n[f]) together with the optimal circulant c_n[f]."""

    g: str
    toeplitz: object
    circulant: object
    gA: np.ndarray = field(repr=False)

    @property
    def n(self):
        return self.toeplitz.n

    def preconditioned(self, absolute=False):
        """g(c)^{-1} g(A), or |g(c)|^{-1} g(A)."""
        if absolute:
            return abs_circulant_fn(self.circulant, self.g).solve(self.gA)
        return circulant_apply_fn_inv(self.circulant, self.g, self.gA)

    def normal_equations(self):
        P = self.preconditioned()
        return P.conj().T @ P

    def difference(self):
        """g(c) - g(A)."""
        return self.circulant.fn_dense(self.g) - self.gA


def function_pair(f, g, n):
    check_function_kind(g)
    n = check_positive_int(n, "n")
    if n > MAX_DENSE:
        raise ValueError(f"dense analysis is limited to n <= {MAX_DENSE}")
    T = toeplitz_from_symbol(f, n)
    return FunctionPair(g, T, optimal_circulant(T), matrix_function(g, T.to_dense()))


def normal_equations_outliers(f, g, n, eps=CLUSTER_EPS):
    """Outlier count of [(g(c))^{-1} g(A)]^* [(g(c))^{-1} g(A)] around 1."""
    N = function_pair(f, g, n).normal_equations()
    eigs = np.linalg.eigvalsh((N + N.conj().T) / 2)
    return cluster_report(eigs, 1.0, eps)


def difference_rank_cut(f, g, n, rtol=RANK_CUT_RTOL):
    D = function_pair(f, g, n).difference()
    return decompose_difference(D, rtol * np.linalg.norm(D, 2))


@dataclass
class UnitaryPlusReport:
    n: int
    g: str
    involution_error: float  # ||Q^2 - I||_F
    hermitian_error: float  # ||Q - Q^*||_F
    negative_signs: int
    decomposition: DecompositionReport
    pm1_fraction: float
    pm1_tol: float
    eigenvalues: np.ndarray = field(repr=False)

    @property
    def q_ok(self):
        bound = 1e-10 * math.sqrt(self.n)
        return self.involution_error <= bound and self.hermitian_error <= bound


def unitary_plus_check(f, g, n, eps=None, pm1_tol=0.05):
    """Compare |g(c)|^{-1} g(A) with Q = F^* sign(g(Lambda)) F for real f."""
    if g not in ("sin", "cos"):
        raise ValueError("unitary_plus_check applies to sin and cos")
    if not f.is_real_valued():
        raise ValueError("unitary_plus_check needs a real-valued symbol")
    pair = function_pair(f, g, n)
    absC = abs_circulant_fn(pair.circulant, g)  # raises on near-singular values
    gl = pair.circulant.function_eigenvalues(g).real
    signs = np.sign(gl)
    Q = np.fft.ifft(signs[:, None] * np.fft.fft(np.eye(n), axis=0), axis=0)
    eye = np.eye(n)
    P = absC.solve(pair.gA)
    D = P - Q
    if eps is None:
        eps = RANK_CUT_RTOL * np.linalg.norm(D, 2)
    lam = np.linalg.eigvals(P)
    near = np.minimum(np.abs(lam - 1), np.abs(lam + 1)) < pm1_tol
    return UnitaryPlusReport(
        n=n,
        g=g,
        involution_error=float(np.linalg.norm(Q @ Q - eye)),
        hermitian_error=float(np.linalg.norm(Q - Q.conj().T)),
        negative_signs=int(np.count_nonzero(signs < 0)),
        decomposition=decompose_difference(D, eps),
        pm1_fraction=float(np.mean(near)),
        pm1_tol=pm1_tol,
        eigenvalues=lam,
    )


@dataclass
class AuditReport:
    checks: dict
    slack: float

    @property
    def passed(self):
        return all(c["holds"] for c in self.checks.values())


def _bound(lhs, rhs, slack):
    return {"lhs": float(lhs), "rhs": float(rhs), "holds": bool(lhs <= rhs + slack)}


def norm_bound_audit(f, n, slack=1e-8):
    """||A||_2 <= 2||f||, ||c||_2 <= 2||f|| and ||(e^c)^{-1}||_2 <= e^{2||f||}."""
    T = toeplitz_from_symbol(f, n)
    C = optimal_circulant(T)
    fnorm = sup_norm(f)
    Cd = C.to_dense()
    checks = {
        "toeplitz_norm": _bound(np.linalg.norm(T.to_dense(), 2), 2 * fnorm, slack),
        "circulant_norm": _bound(np.linalg.norm(Cd, 2), 2 * fnorm, slack),
        "inverse_exp_norm": _bound(np.linalg.norm(expm(-Cd), 2), math.exp(2 * fnorm), slack),
    }
    report = AuditReport(checks, slack)
    if not report.passed:
        logger.error("norm bound audit failed for n=%d: %s", n, checks)
    return report


def split_bound_check(p, n, eps=0.0):
    """||W||_2 <= M(M+1)/n * max|rho|, and the (eps + ||f||) form of the same bound."""
    from .structured import split_correction

    U, W = split_correction(p, n)
    M = p.degree
    rho_max = max((abs(v) for v in p.coeffs.values()), default=0.0)
    w_norm = float(np.linalg.norm(W, 2))
    return {
        "w_norm": w_norm,
        "bound_rho": M * (M + 1) / n * rho_max,
        "bound_sup": M * (M + 1) / n * (eps + sup_norm(p)),
        "rank_u": int(np.linalg.matrix_rank(U)) if M else 0,
        "U": U,
        "W": W,
    }
