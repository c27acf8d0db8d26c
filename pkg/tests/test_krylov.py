import numpy as np
import pytest
from scipy.sparse.linalg import aslinearoperator

from conftest import random_complex, random_hermitian
from toepfun.analysis import function_pair
from toepfun.exceptions import (
    IndefinitenessDetected,
    MaxIterExceeded,
    NotHermitian,
    PreconditionerNotHPD,
)
from toepfun.genfn import get_symbol
from toepfun.krylov import SolverConfig, cg, cgnr, gmres, minres
from toepfun.structured import CirculantMatrix, fn_inverse_operator


def hpd(rng, n, cond=50.0):
    Q, _ = np.linalg.qr(random_complex(rng, n, n))
    lam = np.geomspace(1, cond, n)
    return (Q * lam) @ Q.conj().T


def true_relres(A, x, b):
    return np.linalg.norm(b - A @ x) / np.linalg.norm(b)


class TestConfig:
    def test_defaults(self):
        cfg = SolverConfig()
        assert cfg.tol == 1e-7 and cfg.max_iter == 100000

    @pytest.mark.parametrize("kwargs", [{"tol": 0}, {"tol": -1}, {"max_iter": 0}])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            SolverConfig(**kwargs)


class TestCG:
    def test_identity_one_iteration(self, rng):
        rep = cg(np.eye(5), random_complex(rng, 5))
        assert rep.iterations == 1 and rep.converged

    def test_diag_two_steps(self):
        rep = cg(np.diag([1.0, 2.0]), np.array([1.0, 1.0]))
        assert rep.iterations <= 2 and rep.converged
        assert np.allclose(rep.x, [1, 0.5])

    def test_history_starts_at_one(self, rng):
        rep = cg(hpd(rng, 20), random_complex(rng, 20))
        assert rep.residual_history[0] == 1.0
        assert len(rep.residual_history) == rep.iterations + 1

    def test_relres_recomputed(self, rng):
        A = hpd(rng, 30)
        b = random_complex(rng, 30)
        rep = cg(A, b)
        assert rep.relres_final == pytest.approx(true_relres(A, rep.x, b), rel=1e-12)
        assert rep.relres_final < 1e-7

    def test_energy_error_monotone(self, rng):
        A = hpd(rng, 25, 1e3)
        b = random_complex(rng, 25)
        xstar = np.linalg.solve(A, b)
        errs = []
        cg(A, b, callback=lambda x: errs.append(np.sqrt(np.vdot(x - xstar, A @ (x - xstar)).real)))
        assert all(e2 <= e1 * (1 + 1e-10) for e1, e2 in zip(errs, errs[1:]))

    def test_exact_preconditioner(self, rng):
        C = CirculantMatrix(np.fft.ifft(rng.uniform(1, 5, 16)))
        A = C.to_dense()
        Minv = np.linalg.inv(A)
        rep = cg(A, random_complex(rng, 16), Minv)
        assert rep.iterations == 1

    def test_scale_invariance(self, rng):
        A = hpd(rng, 30, 1e3)
        b = random_complex(rng, 30)
        # power-of-two and unit scalings are exact in floating point
        its = {cg(A, alpha * b).iterations for alpha in (1.0, 2.0**-20, -(2.0**15), 8j)}
        assert len(its) == 1
        (base,) = its
        # general scalings perturb b by roundoff only
        general = [cg(A, alpha * b).iterations for alpha in (1e-6, -3e4, 0.7 - 2j)]
        assert max(abs(k - base) for k in general) <= 1

    def test_indefinite_detected(self):
        with pytest.raises(IndefinitenessDetected):
            cg(np.diag([1.0, -2.0, 3.0]), np.ones(3), check=False)

    def test_probe_rejects_negative_definite(self):
        with pytest.raises(IndefinitenessDetected):
            cg(-np.eye(3), np.ones(3))

    def test_probe_rejects_non_hermitian(self, rng):
        with pytest.raises(NotHermitian):
            cg(random_complex(rng, 6, 6), np.ones(6))

    def test_bad_preconditioner(self, rng):
        with pytest.raises(PreconditionerNotHPD):
            cg(hpd(rng, 5), np.ones(5), -np.eye(5))

    def test_max_iter(self, rng):
        A = hpd(rng, 40, 1e4)
        b = random_complex(rng, 40)
        rep = cg(A, b, cfg=SolverConfig(max_iter=3))
        assert not rep.converged and rep.iterations == 3
        with pytest.raises(MaxIterExceeded) as info:
            cg(A, b, cfg=SolverConfig(max_iter=3, raise_on_failure=True))
        assert info.value.report.iterations == 3

    def test_zero_rhs(self):
        rep = cg(np.eye(3), np.zeros(3))
        assert rep.converged and rep.iterations == 0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            cg(np.eye(3), np.ones(4))

    def test_accepts_linear_operator(self, rng):
        A = hpd(rng, 12)
        rep = cg(aslinearoperator(A), random_complex(rng, 12))
        assert rep.converged

    def test_ex1_unpreconditioned(self):
        pair = function_pair(get_symbol("ex1"), "exp", 128)
        b = np.random.default_rng(1).standard_normal(128)
        assert 180 <= cg(pair.gA, b).iterations <= 280


class TestCGNR:
    def test_identity(self, rng):
        assert cgnr(np.eye(4), random_complex(rng, 4)).iterations == 1

    def test_solves_nonhermitian(self, rng):
        G = np.eye(20) + 0.3 * random_complex(rng, 20, 20) / np.sqrt(20)
        b = random_complex(rng, 20)
        rep = cgnr(G, b)
        assert rep.converged
        assert rep.details["unnormalized_relres"] < 1e-5

    def test_normal_equations_display(self, rng):
        # the solved system is (MG)^*(MG) x = (MG)^* M b
        G = np.eye(10) + 0.3 * random_complex(rng, 10, 10)
        Mi = np.linalg.inv(np.eye(10) + 0.1 * random_complex(rng, 10, 10))
        b = random_complex(rng, 10)
        rep = cgnr(G, b, aslinearoperator(Mi), cfg=SolverConfig(tol=1e-12))
        K = Mi @ G
        assert np.allclose(rep.x, np.linalg.solve(K.conj().T @ K, K.conj().T @ Mi @ b), atol=1e-8)

    def test_ex2_preconditioned_n128(self):
        pair = function_pair(get_symbol("ex2"), "exp", 128)
        b = random_complex(np.random.default_rng(2), 128)
        M = fn_inverse_operator(pair.circulant, "exp")
        assert 40 <= cgnr(pair.gA, b, M).iterations <= 120

    def test_ex2_unpreconditioned_n128_is_slow(self):
        pair = function_pair(get_symbol("ex2"), "exp", 128)
        b = random_complex(np.random.default_rng(2), 128)
        assert cgnr(pair.gA, b).iterations > 5000


class TestMINRES:
    def test_two_eigenvalues(self):
        rep = minres(np.diag([1.0, -1.0]), np.array([1.0, 1.0]))
        assert rep.iterations <= 2 and rep.converged

    def test_indefinite_system(self, rng):
        Q, _ = np.linalg.qr(random_complex(rng, 30, 30))
        A = (Q * np.linspace(-3, 2, 30)) @ Q.conj().T + 0.01 * np.eye(30)
        b = random_complex(rng, 30)
        rep = minres(A, b)
        assert rep.converged
        assert rep.relres_final == pytest.approx(true_relres(A, rep.x, b), rel=1e-12)

    def test_history_monotone(self, rng):
        A = random_hermitian(rng, 40)
        b = random_complex(rng, 40)
        rep = minres(A, b, hpd(rng, 40, 5.0))
        h = rep.residual_history
        assert all(b2 <= b1 * (1 + 1e-12) for b1, b2 in zip(h, h[1:]))

    def test_matches_direct_solve(self, rng):
        A = random_hermitian(rng, 15) + 0.5 * np.eye(15)
        b = random_complex(rng, 15)
        rep = minres(A, b, cfg=SolverConfig(tol=1e-12))
        assert np.allclose(rep.x, np.linalg.solve(A, b), atol=1e-8)

    def test_rejects_indefinite_preconditioner(self, rng):
        with pytest.raises(PreconditionerNotHPD):
            minres(random_hermitian(rng, 6), np.ones(6), np.diag([1, 1, 1, -1, 1, 1.0]))

    def test_rejects_non_hermitian(self, rng):
        with pytest.raises(NotHermitian):
            minres(random_complex(rng, 6, 6), np.ones(6))

    def test_ex3_abs_sin(self):
        pair = function_pair(get_symbol("ex3"), "sin", 128)
        b = np.random.default_rng(3).standard_normal(128)
        M = fn_inverse_operator(pair.circulant, "sin", absolute=True)
        assert 10 <= minres(pair.gA, b, M).iterations <= 25

    def test_ex5a_abs_cos(self):
        pair = function_pair(get_symbol("ex5a"), "cos", 512)
        b = np.random.default_rng(4).standard_normal(512)
        M = fn_inverse_operator(pair.circulant, "cos", absolute=True)
        assert 25 <= minres(pair.gA, b, M).iterations <= 55


class TestGMRES:
    def test_identity(self, rng):
        assert gmres(np.eye(6), random_complex(rng, 6)).iterations == 1

    def test_three_distinct_eigenvalues(self, rng):
        n = 8
        j = np.arange(n)
        F = np.exp(-2j * np.pi * np.outer(j, j) / n) / np.sqrt(n)
        lam = np.array([1, 1j, -1, 1, 1j, -1, 1, 1j])
        G = F.conj().T @ np.diag(lam) @ F
        rep = gmres(G, random_complex(rng, n))
        assert rep.converged and rep.iterations <= 3

    def test_history_monotone_and_final(self, rng):
        G = np.eye(50) + random_complex(rng, 50, 50) / 10
        b = random_complex(rng, 50)
        rep = gmres(G, b)
        h = rep.residual_history
        assert all(b2 <= b1 * (1 + 1e-12) for b1, b2 in zip(h, h[1:]))
        assert rep.relres_final == pytest.approx(true_relres(G, rep.x, b), rel=1e-12)

    def test_left_preconditioned_residual(self, rng):
        G = np.eye(30) + random_complex(rng, 30, 30) / 5
        Mi = np.linalg.inv(np.eye(30) + random_complex(rng, 30, 30) / 20)
        b = random_complex(rng, 30)
        rep = gmres(G, b, Mi)
        pres = np.linalg.norm(Mi @ (b - G @ rep.x)) / np.linalg.norm(Mi @ b)
        assert rep.converged and rep.relres_final == pytest.approx(pres, rel=1e-12)

    def test_scale_invariance(self, rng):
        G = np.eye(40) + random_complex(rng, 40, 40) / 8
        b = random_complex(rng, 40)
        its = {gmres(G, alpha * b).iterations for alpha in (1.0, 2.0**-24, 2.0**12 * 1j)}
        assert len(its) == 1

    def test_max_iter_not_converged(self, rng):
        G = np.eye(40) + random_complex(rng, 40, 40)
        rep = gmres(G, random_complex(rng, 40), cfg=SolverConfig(max_iter=5))
        assert rep.iterations == 5 and not rep.converged

    def test_ex2_preconditioned(self):
        pair = function_pair(get_symbol("ex2"), "exp", 128)
        b = random_complex(np.random.default_rng(5), 128)
        M = fn_inverse_operator(pair.circulant, "exp")
        assert 15 <= gmres(pair.gA, b, M).iterations <= 30


def test_report_serialization(rng):
    rep = cg(np.eye(3), np.ones(3))
    d = rep.to_dict()
    assert d["solver"] == "cg" and d["preconditioner"] == "none"
    assert "residual_history" in d and "x" not in d
    assert "residual_history" not in rep.to_dict(include_history=False)


def test_operator_linearity(rng):
    pair = function_pair(get_symbol("ex4"), "sin", 32)
    op = fn_inverse_operator(pair.circulant, "sin")
    x, y = random_complex(rng, 32), random_complex(rng, 32)
    a, b = 0.3 - 2j, 1.7
    lhs = op.matvec(a * x + b * y)
    assert np.linalg.norm(lhs - a * op.matvec(x) - b * op.matvec(y)) <= 1e-10 * np.linalg.norm(lhs)
