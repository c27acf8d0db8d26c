"""Experiment harness: iteration tables, spectra and the verification suite."""

import json
import logging
import math
import os
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import analysis
from ._validation import check_function_kind
from .exceptions import NearSingularFunctionValue, ToepfunError
from .genfn import EXPERIMENT_FUNCTION, TrigPoly, experiment_symbols, get_symbol, sup_norm
from .krylov import SOLVERS, SolverConfig, _as_op, _probe_quadratic_forms
from .matfun import (
    cosm,
    expm,
    expm_perturbation_gap,
    matrix_function,
    sinm,
    taylor_exp,
    taylor_exp_bound,
)
from .structured import (
    CirculantMatrix,
    ToeplitzMatrix,
    abs_circulant_fn,
    circulant_apply_fn_inv,
    fn_inverse_operator,
    optimal_circulant,
    toeplitz_from_symbol,
)

logger = logging.getLogger(__name__)

DEFAULT_SEED = 20160701
PRECONDITIONERS = {"": "none", "c": "circulant_fn", "|c|": "abs_circulant_fn"}

# column layouts of the six reproduced experiments
PRESETS = {
    "ex1-exp": ("ex1", "exp", ["cg", "cg+c"]),
    "ex2-exp": ("ex2", "exp", ["cgnr", "cgnr+c", "gmres", "gmres+c"]),
    "ex3-sin": ("ex3", "sin", ["minres", "minres+|c|", "cg", "cg+c"]),
    "ex4-sin": ("ex4", "sin", ["cgnr", "cgnr+c", "gmres", "gmres+c"]),
    "ex5a-cos": ("ex5a", "cos", ["minres", "minres+|c|"]),
    "ex5b-cos": ("ex5b", "cos", ["cgnr", "cgnr+c", "gmres", "gmres+c"]),
}


def parse_column(column):
    """'gmres+c' -> ('gmres', 'circulant_fn'); 'minres+|c|' -> ('minres', 'abs_circulant_fn')."""
    solver, _, prec = column.strip().lower().partition("+")
    prec = {"abs": "|c|"}.get(prec, prec)
    if solver not in SOLVERS:
        raise ValueError(f"unknown solver {solver!r} in column {column!r}")
    if prec not in PRECONDITIONERS:
        raise ValueError(f"unknown preconditioner {prec!r} in column {column!r}")
    return solver, PRECONDITIONERS[prec]


def symbol_id(symbol):
    if isinstance(symbol, str):
        return symbol
    return json.dumps(symbol, sort_keys=True) if isinstance(symbol, dict) else symbol.to_json()


@dataclass
class ExperimentSpec:
    symbol: object
    g: str
    sizes: list
    solvers: list
    seed: int = DEFAULT_SEED
    tol: float = 1e-7
    max_iter: int = 100000
    rhs: str = "auto"

    def __post_init__(self):
        check_function_kind(self.g)
        self.sizes = [int(n) for n in self.sizes]
        if not self.sizes or any(n < 1 for n in self.sizes):
            raise ValueError(f"sizes must be positive integers, got {self.sizes}")
        if self.rhs not in ("auto", "real", "complex"):
            raise ValueError(f"rhs must be auto, real or complex, got {self.rhs!r}")
        SolverConfig(self.tol, self.max_iter)
        self.function = get_symbol(self.symbol)
        self.columns = [parse_column(c) for c in self.solvers]
        self.real_symbol = self.function.is_real_valued()
        for (solver, prec), name in zip(self.columns, self.solvers):
            if solver == "minres" and not self.real_symbol:
                raise ValueError(f"column {name!r} needs Hermitian g(A), i.e. a real-valued symbol")
            if prec == "abs_circulant_fn" and not self.real_symbol:
                raise ValueError(f"column {name!r} needs a real-valued symbol")

    @classmethod
    def preset(cls, name, sizes=(128, 256, 512, 1024), **kwargs):
        symbol, g, solvers = PRESETS[name]
        return cls(symbol, g, list(sizes), list(solvers), **kwargs)

    def row_seed(self, n):
        cell = f"{symbol_id(self.symbol)}|{self.g}|{n}".encode()
        return (int(self.seed) ^ zlib.crc32(cell)) & 0xFFFFFFFF

    def rhs_vector(self, n):
        rng = np.random.default_rng(self.row_seed(n))
        complex_rhs = self.rhs == "complex" or (self.rhs == "auto" and not self.real_symbol)
        if complex_rhs:
            return rng.standard_normal(n) + 1j * rng.standard_normal(n)
        return rng.standard_normal(n)

    def to_dict(self):
        return {
            "symbol": self.symbol if isinstance(self.symbol, (str, dict)) else symbol_id(self.symbol),
            "g": self.g,
            "sizes": self.sizes,
            "solvers": list(self.solvers),
            "seed": self.seed,
            "tol": self.tol,
            "max_iter": self.max_iter,
            "rhs": self.rhs,
        }


def _is_negative_definite(G):
    return all(q.real < 0 for q, _ in _probe_quadratic_forms(_as_op(G)))


def solve_cell(pair, solver, prec, b, cfg):
    """One solve of g(A) x = b with the requested preconditioner."""
    G = pair.gA
    sign = 1.0
    if solver == "cg" and _is_negative_definite(G):
        # negative definite Hermitian system: run CG on -g(A) x = -b
        sign = -1.0
    M = None
    if prec == "circulant_fn":
        M = fn_inverse_operator(pair.circulant, pair.g, sign=sign)
    elif prec == "abs_circulant_fn":
        M = fn_inverse_operator(pair.circulant, pair.g, absolute=True)
    report = SOLVERS[solver](sign * G, sign * b, M, cfg, precond_name=prec)
    if sign < 0:
        report.details["negated"] = True
    return report


def _run_row(spec, n, cfg):
    row = {"n": n, "seed": spec.row_seed(n), "cells": {}}
    try:
        pair = analysis.function_pair(spec.function, spec.g, n)
    except ToepfunError as exc:
        for name in spec.solvers:
            row["cells"][name] = {"error": exc.code, "message": str(exc)}
        return row
    b = spec.rhs_vector(n)
    for name, (solver, prec) in zip(spec.solvers, spec.columns):
        try:
            report = solve_cell(pair, solver, prec, b, cfg)
            row["cells"][name] = report.to_dict()
        except ToepfunError as exc:
            row["cells"][name] = {"error": exc.code, "message": str(exc)}
        logger.info("n=%d %s: %s", n, name, row["cells"][name].get("iterations", "error"))
    return row


def thread_cap():
    value = os.environ.get("TOEPFUN_THREADS")
    if value:
        return max(1, int(value))
    return os.cpu_count() or 1


def run_table(spec, threads=None):
    """One row per n, one cell per solver column; deterministic given the seed."""
    cfg = SolverConfig(spec.tol, spec.max_iter)
    workers = max(1, min(threads or thread_cap(), len(spec.sizes)))
    if workers == 1:
        rows = [_run_row(spec, n, cfg) for n in spec.sizes]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda n: _run_row(spec, n, cfg), spec.sizes))
    return {"experiment": spec.to_dict(), "rows": rows}


def iteration_counts(table, column):
    """Iteration counts of one column; None for failed or errored cells."""
    out = []
    for row in table["rows"]:
        cell = row["cells"][column]
        out.append(cell["iterations"] if cell.get("converged") else None)
    return out


def format_table(table):
    """Aligned plain-text rendering; '>N' marks non-convergence within max_iter."""
    spec = table["experiment"]
    columns = spec["solvers"]
    header = ["n"] + columns
    lines = []
    for row in table["rows"]:
        cells = [str(row["n"])]
        for name in columns:
            cell = row["cells"][name]
            if "error" in cell:
                cells.append(f"ERR:{cell['error']}")
            elif cell["converged"]:
                cells.append(str(cell["iterations"]))
            else:
                cells.append(f">{cell['iterations']}")
        lines.append(cells)
    widths = [max(len(r[i]) for r in [header] + lines) for i in range(len(header))]
    fmt = lambda r: " | ".join(v.rjust(w) for v, w in zip(r, widths))
    rule = "-+-".join("-" * w for w in widths)
    title = f"{spec['symbol']} / {spec['g']}  (seed {spec['seed']}, tol {spec['tol']:g})"
    return "\n".join([title, fmt(header), rule] + [fmt(r) for r in lines])


def table_to_json(table, drop_timing=False):
    def scrub(obj):
        if isinstance(obj, dict):
            return {k: scrub(v) for k, v in obj.items() if not (drop_timing and k == "wall_time")}
        if isinstance(obj, list):
            return [scrub(v) for v in obj]
        return obj

    return json.dumps(scrub(table), indent=1, sort_keys=True)


SPECTRUM_VARIANTS = ("raw", "preconditioned", "normal_eq", "abs_preconditioned")


def run_spectrum(symbol, g, n, variant, eps=analysis.CLUSTER_EPS):
    """Eigenvalue cloud of g(A) or a preconditioned version, with a cluster report."""
    if variant not in SPECTRUM_VARIANTS:
        raise ValueError(f"variant must be one of {SPECTRUM_VARIANTS}, got {variant!r}")
    f = get_symbol(symbol)
    pair = analysis.function_pair(f, g, n)
    if variant == "raw":
        eigs = analysis.spectrum(pair.gA)
    elif variant == "preconditioned":
        eigs = analysis.spectrum(pair.preconditioned())
    elif variant == "abs_preconditioned":
        eigs = analysis.spectrum(pair.preconditioned(absolute=True))
    else:
        N = pair.normal_equations()
        eigs = np.linalg.eigvalsh((N + N.conj().T) / 2).astype(complex)
    report = analysis.cluster_report(eigs, 1.0, eps)
    summary = report.to_dict()
    summary.update(symbol=symbol_id(symbol), g=g, variant=variant)
    pm1 = np.minimum(np.abs(eigs - 1), np.abs(eigs + 1))
    summary["pm1_fraction"] = float(np.mean(pm1 < 0.05))
    # central interval of the real parts holding 90% of the eigenvalues; descriptive only
    lo = np.quantile(eigs.real, 0.05, method="lower")
    hi = np.quantile(eigs.real, 0.95, method="higher")
    summary["interval_90"] = [float(lo), float(hi)]
    return eigs, summary


def spectrum_to_csv(eigs):
    return "".join(f"{float(z.real)!r},{float(z.imag)!r}\n" for z in eigs)


# verification suite ---------------------------------------------------------

# ranges kept near 0.8 so that neither sin nor cos comes close to vanishing
DEFAULT_TRIG_SYMBOLS = {
    "tp_real": TrigPoly({0: 0.8, 1: 0.15, -1: 0.15}),
    "tp_complex": TrigPoly({0: 0.8, 1: 0.1 + 0.05j, -1: 0.1, 2: 0.05j}),
}
RANK_CUT_SYMBOLS = ("ex1", "ex3", "ex5a")


@dataclass
class _Suite:
    circulant_builder: object
    rng: np.random.Generator
    checks: list = field(default_factory=list)

    def record(self, module, name, passed, **detail):
        self.checks.append(
            {"module": module, "name": name, "passed": bool(passed), "detail": _jsonable(detail)}
        )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else str(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _random_toeplitz(rng, n, hermitian=False):
    a = rng.standard_normal(2 * n - 1) + 1j * rng.standard_normal(2 * n - 1)
    if hermitian:
        a = (a + np.conj(a[::-1])) / 2
    return ToeplitzMatrix(a)


def _random_circulant(rng, n, hermitian=False, scale=1.0):
    lam = rng.standard_normal(n) + (0 if hermitian else 1j * rng.standard_normal(n))
    return CirculantMatrix(np.fft.ifft(scale * lam))


def _check_structured(suite, symbols, sizes):
    rng = suite.rng
    build = suite.circulant_builder
    for name, f in symbols.items():
        fnorm = sup_norm(f)
        for n in sizes:
            T = toeplitz_from_symbol(f, n)
            a_norm = np.linalg.norm(T.to_dense(), 2)
            c_norm = np.linalg.norm(build(T).to_dense(), 2)
            suite.record(
                "structured", "norm_bounds", max(a_norm, c_norm) <= 2 * fnorm + 1e-8,
                symbol=name, n=n, toeplitz=a_norm, circulant=c_norm, bound=2 * fnorm,
            )

    worst_gain = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 17))
        T = _random_toeplitz(rng, n)
        A = T.to_dense()
        base = np.linalg.norm(build(T).to_dense() - A)
        D = _random_circulant(rng, n).to_dense()
        D /= np.linalg.norm(D)
        perturbed = np.linalg.norm(build(T).to_dense() + 1e-3 * D - A)
        worst_gain = max(worst_gain, base - perturbed)
    suite.record("structured", "frobenius_optimality", worst_gain <= 0, worst_gain=worst_gain)

    for n in sorted({min(n, 64) for n in sizes}):
        for g in ("exp", "sin", "cos"):
            C = _random_circulant(rng, n, hermitian=True, scale=0.5)
            d = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            gC = matrix_function(g, C.to_dense())
            err = np.linalg.norm(circulant_apply_fn_inv(C, g, gC @ d) - d) / np.linalg.norm(d)
            suite.record("structured", "fn_inverse_roundtrip", err <= 1e-9, n=n, g=g, error=err)
            absC = abs_circulant_fn(C, g)
            q = np.vdot(d, absC.solve(d)).real
            suite.record("structured", "abs_inverse_positive", q > 0, n=n, g=g, quadratic_form=q)

    for n in sorted(set(sizes) | {1, 7, 33}):
        T = _random_toeplitz(rng, n, hermitian=True)
        x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        ref = T.to_dense() @ x
        err = np.linalg.norm(T.matvec(x) - ref) / np.linalg.norm(ref)
        suite.record("structured", "fft_matvec", err <= 1e-11, n=n, error=err)


def _random_matrix(rng, n, norm2):
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return A * (norm2 / np.linalg.norm(A, 2))


def _check_matfun(suite, sizes):
    rng = suite.rng
    for n in sorted({min(n, 32) for n in sizes}):
        A = _random_matrix(rng, n, 3.0)
        err = np.linalg.norm(expm(A) @ expm(-A) - np.eye(n)) / np.sqrt(n)
        suite.record("matfun", "exp_inverse", err <= 1e-10, n=n, error=err)

        S, C = sinm(A), cosm(A)
        err = np.linalg.norm(S @ S + C @ C - np.eye(n)) / np.sqrt(n)
        suite.record("matfun", "pythagorean", err <= 1e-9, n=n, error=err)

        H = A + A.conj().T
        lam = np.linalg.eigvalsh((expm(H) + expm(H).conj().T) / 2)
        suite.record("matfun", "hermitian_exp_pd", lam.min() > 0, n=n, min_eig=lam.min())

        B = _random_matrix(rng, n, 2.0)
        E = expm(B)
        errors = [np.linalg.norm(E - taylor_exp(B, r, 1), 2) for r in (2, 4, 8, 16)]
        monotone = all(e1 >= e2 for e1, e2 in zip(errors, errors[1:]))
        suite.record("matfun", "taylor_convergence", monotone, n=n, errors=errors)

    violations = 0
    for _ in range(200):
        A = _random_matrix(rng, 16, rng.uniform(0, 2))
        B = _random_matrix(rng, 16, rng.uniform(0, 2))
        try:
            expm_perturbation_gap(A, B)
        except AssertionError:
            violations += 1
    suite.record("matfun", "perturbation_bound", violations == 0, trials=200, violations=violations)

    worst = -math.inf
    for r in (2, 4, 8):
        for s in (1, 4):
            A = _random_matrix(rng, 16, 2.0)
            err = np.linalg.norm(expm(A) - taylor_exp(A, r, s), 2)
            worst = max(worst, err - taylor_exp_bound(A, r, s))
    suite.record("matfun", "truncated_taylor_bound", worst <= 1e-8, worst_excess=worst)


def applicable_functions(name, f):
    """exp plus the experiment's own function for catalog symbols; all three otherwise."""
    if name in EXPERIMENT_FUNCTION:
        return sorted({"exp", EXPERIMENT_FUNCTION[name]})
    return ["cos", "exp", "sin"]


def _check_analysis(suite, symbols, sizes):
    doubles = [(n, 2 * n) for n in sizes if 2 * n in sizes]
    for name, f in symbols.items():
        for g in applicable_functions(name, f):
            for n, m in doubles:
                try:
                    a = analysis.normal_equations_outliers(f, g, n).outlier_count
                    b = analysis.normal_equations_outliers(f, g, m).outlier_count
                except NearSingularFunctionValue as exc:
                    suite.record("analysis", "cluster_stability", True, symbol=name, g=g, skipped=str(exc))
                    continue
                suite.record(
                    "analysis", "cluster_stability", b <= a + analysis.OUTLIER_SLACK,
                    symbol=name, g=g, n=n, outliers=[a, b],
                )

    rank_symbols = {k: v for k, v in symbols.items() if k in RANK_CUT_SYMBOLS}
    for name, f in rank_symbols.items():
        for g in ("exp", "sin", "cos"):
            for n, m in doubles:
                a = analysis.difference_rank_cut(f, g, n).rank_cut
                b = analysis.difference_rank_cut(f, g, m).rank_cut
                suite.record(
                    "analysis", "rank_cut_stability", b <= a + analysis.OUTLIER_SLACK,
                    symbol=name, g=g, n=n, rank_cuts=[a, b],
                )

    for name, f in symbols.items():
        if not f.is_real_valued():
            continue
        for g in ("sin", "cos"):
            for n in sizes:
                try:
                    rep = analysis.unitary_plus_check(f, g, n)
                except NearSingularFunctionValue as exc:
                    suite.record("analysis", "unitary_involution", True, symbol=name, g=g, n=n, skipped=str(exc))
                    continue
                suite.record(
                    "analysis", "unitary_involution", rep.q_ok, symbol=name, g=g, n=n,
                    involution_error=rep.involution_error, hermitian_error=rep.hermitian_error,
                )

    for name, f in symbols.items():
        if not isinstance(f, TrigPoly):
            continue
        M = f.degree
        for n in sizes:
            if n <= 2 * M:
                continue
            split = analysis.split_bound_check(f, n)
            T = toeplitz_from_symbol(f, n)
            D = optimal_circulant(T).to_dense() - T.to_dense()
            cut = analysis.decompose_difference(D, split["w_norm"] + 1e-12).rank_cut
            suite.record(
                "analysis", "split_rank", cut <= 2 * M and split["w_norm"] <= split["bound_rho"] + 1e-12,
                symbol=name, n=n, rank_cut=cut, degree=M, w_norm=split["w_norm"], bound=split["bound_rho"],
            )

    for name, f in symbols.items():
        for n in sizes:
            audit = analysis.norm_bound_audit(f, n)
            suite.record("analysis", "norm_bound_audit", audit.passed, symbol=name, n=n, checks=audit.checks)


def run_verification_suite(sizes, symbols=None, circulant_builder=optimal_circulant, seed=DEFAULT_SEED):
    """Execute the structured/matfun/analysis invariants; failures are data."""
    start = time.perf_counter()
    sizes = sorted({int(n) for n in sizes})
    if symbols is None:
        symbols = experiment_symbols()
    elif isinstance(symbols, (list, tuple)):
        symbols = {s if isinstance(s, str) else symbol_id(s): get_symbol(s) for s in symbols}
    suite = _Suite(circulant_builder, np.random.default_rng(seed))
    _check_structured(suite, symbols, sizes)
    _check_matfun(suite, sizes)
    _check_analysis(suite, symbols, sizes)
    failed = [c for c in suite.checks if not c["passed"]]
    return {
        "sizes": sizes,
        "symbols": sorted(symbols),
        "passed": not failed,
        "n_checks": len(suite.checks),
        "n_failed": len(failed),
        "checks": suite.checks,
        "wall_time": time.perf_counter() - start,
    }
