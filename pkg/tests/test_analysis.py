import json
import math

import numpy as np
import pytest
import scipy.linalg

from conftest import random_complex
from toepfun import analysis
from toepfun.analysis import (
    cluster_report,
    decompose_difference,
    difference_rank_cut,
    function_pair,
    norm_bound_audit,
    normal_equations_outliers,
    spectrum,
    split_bound_check,
    unitary_plus_check,
)
from toepfun.exceptions import NearSingularFunctionValue, SpectrumError
from toepfun.experiments import DEFAULT_TRIG_SYMBOLS
from toepfun.genfn import TrigPoly, get_symbol, sup_norm
from toepfun.structured import CirculantMatrix, optimal_circulant, toeplitz_from_symbol


class TestSpectrum:
    def test_identity(self):
        assert np.allclose(spectrum(np.eye(4)), 1)

    def test_diag(self):
        assert np.allclose(np.sort(spectrum(np.diag([1.0, 2.0, 3.0])).real), [1, 2, 3])

    def test_shift(self):
        lam = spectrum(CirculantMatrix([0, 1, 0, 0]).to_dense())
        assert np.allclose(np.sort_complex(lam), np.sort_complex(np.array([1, 1j, -1, -1j])))

    def test_matches_scipy(self, rng):
        A = random_complex(rng, 20, 20)
        lam = np.sort_complex(spectrum(A))
        assert np.allclose(lam, np.sort_complex(scipy.linalg.eigvals(A)), atol=1e-10)

    def test_solver_failure_is_typed(self, monkeypatch):
        def boom(A):
            raise np.linalg.LinAlgError("no convergence")

        monkeypatch.setattr(np.linalg, "eig", boom)
        with pytest.raises(SpectrumError):
            spectrum(np.eye(3))

    def test_residual_certificate(self, monkeypatch):
        monkeypatch.setattr(np.linalg, "eig", lambda A: (np.zeros(2), np.eye(2)))
        with pytest.raises(SpectrumError):
            spectrum(np.diag([1.0, 2.0]))


class TestClusterReport:
    def test_all_inside(self):
        assert cluster_report([1, 1, 1], 1.0, 0.1).outlier_count == 0

    def test_one_outlier(self):
        rep = cluster_report([1, 1, 5], 1.0, 0.1)
        assert rep.outlier_count == 1 and rep.outlier_indices == [2]

    def test_sorted_by_distance(self, rng):
        eigs = 1 + random_complex(rng, 30) * 0.2
        rep = cluster_report(eigs)
        d = np.abs(rep.eigenvalues - 1)
        assert np.all(np.diff(d) <= 0)
        assert rep.outlier_count == np.count_nonzero(np.abs(eigs - 1) > 0.1)

    def test_json(self):
        data = json.loads(json.dumps(cluster_report([1, 2j]).to_dict()))
        assert data["outlier_count"] == 1 and data["eigenvalues"][0] == [0.0, 2.0]

    def test_rejects_nonpositive_eps(self):
        with pytest.raises(ValueError):
            cluster_report([1.0], eps=0)

    def test_ex2_outliers_stable(self):
        a = normal_equations_outliers(get_symbol("ex2"), "exp", 128).outlier_count
        b = normal_equations_outliers(get_symbol("ex2"), "exp", 256).outlier_count
        print(f"ex2 exp outliers n=128: {a}, n=256: {b}")
        assert b <= a + 2


class TestDecompose:
    def test_zero(self):
        rep = decompose_difference(np.zeros((4, 4)), 1e-3)
        assert rep.rank_cut == 0 and rep.tail_norm == 0

    def test_rank_two_plus_noise(self, rng):
        u, v = random_complex(rng, 20, 2), random_complex(rng, 20, 2)
        D = u @ v.conj().T + 1e-9 * random_complex(rng, 20, 20)
        rep = decompose_difference(D, 1e-6)
        assert rep.rank_cut == 2
        s = np.linalg.svd(D, compute_uv=False)
        assert rep.tail_norm == pytest.approx(s[2])
        assert rep.frob_tail == pytest.approx(np.sqrt(np.sum(s[2:] ** 2)))

    def test_sigma_nonincreasing(self, rng):
        rep = decompose_difference(random_complex(rng, 10, 10), 1.0)
        assert np.all(np.diff(rep.sigma) <= 0)
        assert rep.tail_norm == rep.sigma[rep.rank_cut]

    def test_ex1_rank_cut_stable(self):
        a = difference_rank_cut(get_symbol("ex1"), "exp", 128).rank_cut
        b = difference_rank_cut(get_symbol("ex1"), "exp", 256).rank_cut
        print(f"ex1 exp rank cut n=128: {a}, n=256: {b}")
        assert b <= a + 2


class TestFunctionPair:
    def test_pieces(self):
        pair = function_pair(get_symbol("ex4"), "sin", 16)
        A = pair.toeplitz.to_dense()
        assert np.allclose(pair.gA, scipy.linalg.sinm(A), atol=1e-12)
        P = pair.preconditioned()
        assert np.allclose(P, np.linalg.solve(scipy.linalg.sinm(pair.circulant.to_dense()), pair.gA), atol=1e-10)
        D = pair.difference()
        assert np.allclose(D, scipy.linalg.sinm(pair.circulant.to_dense()) - pair.gA, atol=1e-12)

    def test_rejects_large_n(self):
        with pytest.raises(ValueError):
            function_pair(TrigPoly({0: 1}), "exp", 5000)


class TestTrigPolyProperties:
    @pytest.mark.parametrize("name", sorted(DEFAULT_TRIG_SYMBOLS))
    @pytest.mark.parametrize("g", ["exp", "sin", "cos"])
    def test_outliers_flat_in_n(self, name, g):
        p = DEFAULT_TRIG_SYMBOLS[name]
        counts = [normal_equations_outliers(p, g, n).outlier_count for n in (16, 32, 64, 128)]
        assert all(b <= a + 2 for a, b in zip(counts, counts[1:]))

    @pytest.mark.parametrize("name", sorted(DEFAULT_TRIG_SYMBOLS))
    @pytest.mark.parametrize("n", [16, 32, 64])
    def test_split_rank(self, name, n):
        p = DEFAULT_TRIG_SYMBOLS[name]
        split = split_bound_check(p, n)
        T = toeplitz_from_symbol(p, n)
        D = optimal_circulant(T).to_dense() - T.to_dense()
        assert decompose_difference(D, split["w_norm"] + 1e-12).rank_cut <= 2 * p.degree
        assert split["w_norm"] <= split["bound_rho"] + 1e-12
        assert split["rank_u"] <= 2 * p.degree

    def test_split_bound_with_sup(self):
        p = DEFAULT_TRIG_SYMBOLS["tp_complex"]
        split = split_bound_check(p, 40, eps=0.0)
        assert split["w_norm"] <= split["bound_sup"] + 1e-12


class TestUnitaryPlus:
    def test_all_positive_signs_gives_identity(self):
        # symbol with values in (0, pi): sin of the circulant spectrum is positive
        p = TrigPoly({0: 1.5, 1: 0.4, -1: 0.4})
        rep = unitary_plus_check(p, "sin", 32)
        assert rep.negative_signs == 0
        P = function_pair(p, "sin", 32).preconditioned(absolute=True)
        Q = np.eye(32)
        assert decompose_difference(P - Q, rep.decomposition.eps).rank_cut == rep.decomposition.rank_cut

    def test_ex3_involution(self):
        rep = unitary_plus_check(get_symbol("ex3"), "sin", 256)
        assert rep.involution_error <= 1e-10 and rep.q_ok
        assert rep.negative_signs == 256  # sin of a negative definite spectrum in (-pi, 0)

    def test_ex5a_cos_plus_minus_one(self):
        rep = unitary_plus_check(get_symbol("ex5a"), "cos", 512)
        assert rep.pm1_fraction >= 0.9
        assert 0 < rep.negative_signs < 512

    def test_rejects_exp(self):
        with pytest.raises(ValueError):
            unitary_plus_check(get_symbol("ex3"), "exp", 16)

    def test_rejects_complex_symbol(self):
        with pytest.raises(ValueError):
            unitary_plus_check(get_symbol("ex4"), "sin", 16)

    def test_near_singular_propagates(self):
        with pytest.raises(NearSingularFunctionValue):
            unitary_plus_check(TrigPoly({0: 0.0}), "sin", 8)


class TestNormAudit:
    def test_zero_symbol(self):
        rep = norm_bound_audit(TrigPoly({0: 0.0}), 8)
        assert rep.passed
        assert rep.checks["inverse_exp_norm"]["lhs"] == pytest.approx(1.0)
        assert rep.checks["inverse_exp_norm"]["rhs"] == 1.0

    def test_ex1_norm_pair(self):
        rep = norm_bound_audit(get_symbol("ex1"), 128)
        assert rep.checks["toeplitz_norm"]["holds"] and rep.checks["circulant_norm"]["holds"]
        # independent dense SVD oracle
        T = toeplitz_from_symbol(get_symbol("ex1"), 128)
        assert rep.checks["toeplitz_norm"]["lhs"] == pytest.approx(np.linalg.svd(T.to_dense(), compute_uv=False)[0])

    def test_ex2_inverse_exponential(self):
        f = get_symbol("ex2")
        rep = norm_bound_audit(f, 256)
        C = optimal_circulant(toeplitz_from_symbol(f, 256)).to_dense()
        lhs = np.linalg.norm(np.linalg.inv(scipy.linalg.expm(C)), 2)
        assert rep.checks["inverse_exp_norm"]["holds"]
        assert lhs <= math.exp(2 * sup_norm(f))

    def test_failure_is_loud(self, monkeypatch, caplog):
        monkeypatch.setattr(analysis, "sup_norm", lambda f: 0.0)
        rep = norm_bound_audit(TrigPoly({0: 1.0}), 4)
        assert not rep.passed
        assert "norm bound audit failed" in caplog.text
