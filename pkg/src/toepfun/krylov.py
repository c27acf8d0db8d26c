"""Preconditioned CG, CG on the normal equations, MINRES and GMRES.

Operators are anything :func:`scipy.sparse.linalg.aslinearoperator` accepts.
A preconditioner ``M`` is passed as the operator applying the *inverse* of
the preconditioning matrix, as in scipy. All solvers start from the zero
vector and stop on ``||r_j||_2 / ||b||_2 < tol``; the reported
``relres_final`` is always recomputed from scratch at exit.
"""

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import LinearOperator, aslinearoperator

from ._validation import check_vector
from .exceptions import (
    BreakdownHessenbergSingular,
    IndefinitenessDetected,
    MaxIterExceeded,
    NotHermitian,
    PreconditionerNotHPD,
)

_PROBE_SEED = 7
_PROBE_RTOL = 1e-8


@dataclass
class SolverConfig:
    tol: float = 1e-7
    max_iter: int = 100000
    raise_on_failure: bool = False

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if int(self.max_iter) < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        self.max_iter = int(self.max_iter)


@dataclass
class SolveReport:
    """Outcome of one solve.

    ``residual_history[0]`` belongs to the zero initial guess. For MINRES and
    GMRES the history tracks the norm each method minimises (preconditioned
    norm), which is monotone; for CG it is the recurrence residual.
    """

    solver: str
    preconditioner: str
    iterations: int
    converged: bool
    relres_final: float
    residual_history: list = field(default_factory=list)
    wall_time: float = 0.0
    details: dict = field(default_factory=dict)
    x: np.ndarray = field(default=None, repr=False)

    def to_dict(self, include_history=True):
        out = {
            "solver": self.solver,
            "preconditioner": self.preconditioner,
            "iterations": self.iterations,
            "converged": self.converged,
            "relres_final": self.relres_final,
            "wall_time": self.wall_time,
            "details": self.details,
        }
        if include_history:
            out["residual_history"] = [float(v) for v in self.residual_history]
        return out


def _as_op(A, n=None):
    op = aslinearoperator(A)
    if op.shape[0] != op.shape[1]:
        raise ValueError(f"operator must be square, got shape {op.shape}")
    if n is not None and op.shape[0] != n:
        raise ValueError(f"dimension mismatch: operator is {op.shape}, vector has length {n}")
    return op


def _probe_quadratic_forms(op, count=3):
    rng = np.random.default_rng(_PROBE_SEED)
    n = op.shape[0]
    for _ in range(count):
        x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        q = np.vdot(x, op.matvec(x))
        yield q, np.linalg.norm(x) * np.linalg.norm(op.matvec(x))


def check_hpd(op, name="A", error=IndefinitenessDetected):
    """Spot-check Hermitian positive definiteness on three random probes."""
    for q, scale in _probe_quadratic_forms(op):
        if abs(q.imag) > _PROBE_RTOL * max(scale, 1e-300):
            raise NotHermitian(f"{name} failed the Hermitian probe (Im<x, Ax> = {q.imag:.3e})")
        if q.real <= 0:
            raise error(f"{name} failed the positive-definiteness probe (<x, Ax> = {q.real:.3e})")


def check_hermitian(op, name="A"):
    for q, scale in _probe_quadratic_forms(op):
        if abs(q.imag) > _PROBE_RTOL * max(scale, 1e-300):
            raise NotHermitian(f"{name} failed the Hermitian probe (Im<x, Ax> = {q.imag:.3e})")


def _finish(report, cfg):
    report.converged = bool(report.relres_final < cfg.tol)
    if not report.converged and cfg.raise_on_failure:
        raise MaxIterExceeded(report)
    return report


def _prec_name(M, name):
    if name is not None:
        return name
    return "none" if M is None else "custom"


def cg(A, b, M=None, cfg=None, *, callback=None, check=True, precond_name=None):
    """Preconditioned conjugate gradients for Hermitian positive definite A."""
    cfg = cfg or SolverConfig()
    start = time.perf_counter()
    b = check_vector(b, name="b")
    A = _as_op(A, b.size)
    M = None if M is None else _as_op(M, b.size)
    if check:
        check_hpd(A, "A")
        if M is not None:
            check_hpd(M, "M", error=PreconditionerNotHPD)

    x = np.zeros_like(b)
    history = [1.0]
    nb = np.linalg.norm(b)
    report = SolveReport("cg", _prec_name(M, precond_name), 0, False, 0.0, history)
    if nb == 0:
        report.x = x
        report.converged = True
        return report

    r = b.copy()
    z = r if M is None else M.matvec(r)
    p = z.copy()
    rz = np.vdot(r, z).real
    it = 0
    while it < cfg.max_iter:
        it += 1
        Ap = A.matvec(p)
        curvature = np.vdot(p, Ap).real
        if curvature <= 0:
            raise IndefinitenessDetected(f"<p, Ap> = {curvature:.3e} at iteration {it}")
        alpha = rz / curvature
        x += alpha * p
        r -= alpha * Ap
        relres = np.linalg.norm(r) / nb
        history.append(relres)
        if callback is not None:
            callback(x)
        if relres < cfg.tol:
            # confirm with the true residual before stopping
            r = b - A.matvec(x)
            if np.linalg.norm(r) / nb < cfg.tol:
                break
            history[-1] = np.linalg.norm(r) / nb
        z = r if M is None else M.matvec(r)
        rz_new = np.vdot(r, z).real
        p = z + (rz_new / rz) * p
        rz = rz_new

    report.iterations = it
    report.x = x
    report.relres_final = float(np.linalg.norm(b - A.matvec(x)) / nb)
    report.wall_time = time.perf_counter() - start
    return _finish(report, cfg)


def normal_equations_operator(G, M=None):
    """(M G)^* (M G) as a LinearOperator; M must support ``rmatvec``."""
    G = _as_op(G)
    n = G.shape[0]
    M = None if M is None else _as_op(M, n)

    def K(x):
        y = G.matvec(x)
        return y if M is None else M.matvec(y)

    def K_adj(y):
        if M is not None:
            y = M.rmatvec(y)
        return G.rmatvec(y)

    def matvec(x):
        return K_adj(K(x))

    return LinearOperator((n, n), matvec=matvec, rmatvec=matvec, dtype=complex), K_adj


def cgnr(G, b, M=None, cfg=None, *, callback=None, precond_name=None):
    """CG on [(M G)^* (M G)] x = (M G)^* M b.

    Convergence is judged on the normal-equations residual relative to the
    normal-equations right-hand side; ``details["unnormalized_relres"]``
    carries ||b - G x|| / ||b||.
    """
    cfg = cfg or SolverConfig()
    start = time.perf_counter()
    b = check_vector(b, name="b")
    G = _as_op(G, b.size)
    N, K_adj = normal_equations_operator(G, M)
    rhs = K_adj(b if M is None else _as_op(M).matvec(b))
    report = cg(N, rhs, None, cfg=SolverConfig(cfg.tol, cfg.max_iter), callback=callback, check=False)
    report.solver = "cgnr"
    report.preconditioner = _prec_name(M, precond_name)
    nb = np.linalg.norm(b)
    report.details["unnormalized_relres"] = (
        float(np.linalg.norm(b - G.matvec(report.x)) / nb) if nb > 0 else 0.0
    )
    report.wall_time = time.perf_counter() - start
    return _finish(report, cfg)


def minres(A, b, M=None, cfg=None, *, callback=None, check=True, precond_name=None):
    """Preconditioned MINRES for Hermitian (possibly indefinite) A.

    ``M`` must be Hermitian positive definite. Stops when the true residual
    ||b - A x|| / ||b|| drops below tol; the true residual is carried by a
    short recurrence and recomputed from scratch before accepting.
    """
    cfg = cfg or SolverConfig()
    start = time.perf_counter()
    b = check_vector(b, name="b")
    n = b.size
    A = _as_op(A, n)
    M = None if M is None else _as_op(M, n)
    if check:
        check_hermitian(A, "A")
        if M is not None:
            check_hpd(M, "M", error=PreconditionerNotHPD)
    precond = (lambda v: v) if M is None else M.matvec

    x = np.zeros(n, dtype=complex)
    nb = np.linalg.norm(b)
    history = [1.0]
    report = SolveReport("minres", _prec_name(M, precond_name), 0, False, 0.0, history)
    if nb == 0:
        report.x = x
        report.converged = True
        return report

    r1 = b.copy()
    y = precond(r1)
    beta1_sq = np.vdot(r1, y).real
    if beta1_sq <= 0:
        raise PreconditionerNotHPD(f"<b, M b> = {beta1_sq:.3e}")
    beta1 = np.sqrt(beta1_sq)
    r2 = r1.copy()
    oldb, beta, dbar, epsln, phibar = 0.0, beta1, 0.0, 0.0, beta1
    cs, sn = -1.0, 0.0
    w = np.zeros(n, dtype=complex)
    w2 = np.zeros(n, dtype=complex)
    Aw = np.zeros(n, dtype=complex)
    Aw2 = np.zeros(n, dtype=complex)
    res = b.copy()  # true residual b - A x, updated by recurrence

    it = 0
    while it < cfg.max_iter:
        it += 1
        v = y / beta
        Av = A.matvec(v)
        y = Av.copy()
        if it >= 2:
            y -= (beta / oldb) * r1
        alfa = np.vdot(v, y).real
        y -= (alfa / beta) * r2
        r1, r2 = r2, y
        y = precond(r2)
        oldb = beta
        beta_sq = np.vdot(r2, y).real
        if beta_sq < 0:
            raise PreconditionerNotHPD(f"<r, M r> = {beta_sq:.3e} at iteration {it}")
        beta = np.sqrt(beta_sq)

        oldeps = epsln
        delta = cs * dbar + sn * alfa
        gbar = sn * dbar - cs * alfa
        epsln = sn * beta
        dbar = -cs * beta
        gamma = max(np.hypot(gbar, beta), np.finfo(float).tiny)
        cs, sn = gbar / gamma, beta / gamma
        phi = cs * phibar
        phibar = sn * phibar

        w1, w2 = w2, w
        Aw1, Aw2 = Aw2, Aw
        w = (v - oldeps * w1 - delta * w2) / gamma
        Aw = (Av - oldeps * Aw1 - delta * Aw2) / gamma
        x += phi * w
        res -= phi * Aw
        history.append(phibar / beta1)
        if callback is not None:
            callback(x)
        if np.linalg.norm(res) / nb < cfg.tol:
            res = b - A.matvec(x)
            if np.linalg.norm(res) / nb < cfg.tol:
                break
        if beta == 0:
            # invariant subspace found: x is exact in exact arithmetic
            break

    report.iterations = it
    report.x = x
    report.relres_final = float(np.linalg.norm(b - A.matvec(x)) / nb)
    report.wall_time = time.perf_counter() - start
    return _finish(report, cfg)


def gmres(G, b, M=None, cfg=None, *, callback=None, precond_name=None):
    """Full (unrestarted) GMRES with left preconditioning.

    Minimises ||M (b - G x)||_2 over the Krylov space of M G; convergence is
    ``||M (b - G x)|| / ||M b|| < tol``. ``callback`` receives the current
    relative residual estimate, since forming x every step is not free. Orthogonalisation is classical
    Gram-Schmidt with a second pass whenever the first one cancels more than
    a factor 1/sqrt(2) of the vector's norm.
    """
    cfg = cfg or SolverConfig()
    start = time.perf_counter()
    b = check_vector(b, name="b")
    n = b.size
    G = _as_op(G, n)
    M = None if M is None else _as_op(M, n)
    precond = (lambda v: v) if M is None else M.matvec

    r0 = precond(b)
    beta = np.linalg.norm(r0)
    history = [1.0]
    report = SolveReport("gmres", _prec_name(M, precond_name), 0, False, 0.0, history)
    if beta == 0:
        report.x = np.zeros(n, dtype=complex)
        report.converged = True
        return report

    m = min(cfg.max_iter, n)
    V = np.zeros((n, m + 1), dtype=complex)
    H = np.zeros((m + 1, m), dtype=complex)
    cs = np.zeros(m)
    sn = np.zeros(m, dtype=complex)
    g = np.zeros(m + 1, dtype=complex)
    g[0] = beta
    V[:, 0] = r0 / beta

    k = 0
    happy = False
    for j in range(m):
        w = precond(G.matvec(V[:, j]))
        norm_in = np.linalg.norm(w)
        Vj = V[:, : j + 1]
        h = Vj.conj().T @ w
        w = w - Vj @ h
        norm_out = np.linalg.norm(w)
        if norm_out < norm_in / np.sqrt(2):
            h2 = Vj.conj().T @ w
            w = w - Vj @ h2
            h += h2
            norm_out = np.linalg.norm(w)
        H[: j + 1, j] = h
        H[j + 1, j] = norm_out
        if norm_out > 1e-14 * norm_in:
            V[:, j + 1] = w / norm_out
        else:
            happy = True

        for i in range(j):
            t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
            H[i + 1, j] = -np.conj(sn[i]) * H[i, j] + cs[i] * H[i + 1, j]
            H[i, j] = t
        a, bb = H[j, j], H[j + 1, j]
        d = np.hypot(abs(a), abs(bb))
        if d == 0:
            raise BreakdownHessenbergSingular(f"zero column in the Hessenberg matrix at step {j + 1}")
        if abs(a) == 0:
            cs[j], sn[j] = 0.0, 1.0
        else:
            cs[j] = abs(a) / d
            sn[j] = (a / abs(a)) * np.conj(bb) / d
        H[j, j] = cs[j] * a + sn[j] * bb
        H[j + 1, j] = 0.0
        g[j + 1] = -np.conj(sn[j]) * g[j]
        g[j] = cs[j] * g[j]

        k = j + 1
        history.append(abs(g[k]) / beta)
        if callback is not None:
            callback(history[-1])
        if history[-1] < cfg.tol or happy:
            break

    R = H[:k, :k]
    diag = np.abs(np.diag(R))
    if np.any(diag <= 1e-14 * diag.max()):
        raise BreakdownHessenbergSingular("triangular factor of the Hessenberg matrix is singular")
    coef = scipy.linalg.solve_triangular(R, g[:k])
    x = V[:, :k] @ coef

    report.iterations = k
    report.x = x
    report.relres_final = float(np.linalg.norm(precond(b - G.matvec(x))) / beta)
    report.details["unnormalized_relres"] = float(np.linalg.norm(b - G.matvec(x)) / np.linalg.norm(b))
    report.wall_time = time.perf_counter() - start
    return _finish(report, cfg)


SOLVERS = {"cg": cg, "cgnr": cgnr, "minres": minres, "gmres": gmres}
