"""Generating functions (symbols) and their Fourier coefficients.

A symbol is a 2*pi-periodic complex function on [-pi, pi). Two kinds are
supported: :class:`TrigPoly`, a finite Fourier sum, and :class:`SampledSymbol`,
an arbitrary vectorised callable. Formulas that are not periodic on
[-pi, pi) are extended periodically, which may introduce a jump at +-pi.
"""

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ._validation import check_positive_int, next_pow2

DEFAULT_GRID = 1 << 16
# floor on the number of quadrature points used for Fourier coefficients
MIN_QUADRATURE_POINTS = 1 << 16


def reduce_angle(theta):
    """Map angles onto [-pi, pi)."""
    return np.mod(np.asarray(theta, dtype=float) + np.pi, 2 * np.pi) - np.pi


class GeneratingFunction:
    """Base class: subclasses implement :meth:`_evaluate` on [-pi, pi]."""

    name = None

    def __call__(self, theta):
        return self._evaluate(reduce_angle(theta))

    def _evaluate(self, theta):
        raise NotImplementedError

    def seam_value(self):
        """Average of the one-sided limits at +-pi (the trapezoid end weight)."""
        ends = np.asarray(self._evaluate(np.array([-np.pi, np.pi])), dtype=complex)
        return 0.5 * (ends[0] + ends[1])

    def grid(self, size):
        check_positive_int(size, "grid_size", minimum=2)
        theta = -np.pi + 2 * np.pi * np.arange(size) / size
        values = np.asarray(self._evaluate(theta), dtype=complex)
        values = np.broadcast_to(values, theta.shape).copy()
        if not np.all(np.isfinite(values)):
            raise ValueError(f"symbol {self.name or self!r} has non-finite samples")
        return theta, values

    @cached_property
    def sup_norm_estimate(self):
        return sup_norm(self)

    def is_real_valued(self, grid_size=4096, rtol=1e-14):
        _, v = self.grid(grid_size)
        return bool(np.max(np.abs(v.imag)) <= rtol * max(np.max(np.abs(v)), 1.0))

    def to_json(self):
        if self.name is None:
            raise TypeError("only catalog symbols and trigonometric polynomials serialize")
        return json.dumps(self.name)


@dataclass(frozen=True, eq=False)
class TrigPoly(GeneratingFunction):
    """p(theta) = sum_k rho_k exp(i k theta) for finitely many k.

    >>> TrigPoly({1: 1, -1: 1})(0.0)
    (2+0j)
    """

    coeffs: dict = field(default_factory=dict)
    name: str = None

    def __post_init__(self):
        clean = {}
        for k, v in dict(self.coeffs).items():
            v = complex(v)
            if not np.isfinite(v):
                raise ValueError(f"coefficient rho_{k} is not finite")
            if v != 0:
                clean[int(k)] = v
        object.__setattr__(self, "coeffs", clean)

    @property
    def degree(self):
        return max((abs(k) for k in self.coeffs), default=0)

    def coeff(self, k):
        return self.coeffs.get(int(k), 0j)

    def _evaluate(self, theta):
        theta = np.asarray(theta, dtype=float)
        out = np.zeros(theta.shape, dtype=complex)
        for k, rho in self.coeffs.items():
            out += rho * np.exp(1j * k * theta)
        return out

    def __add__(self, other):
        keys = set(self.coeffs) | set(other.coeffs)
        return TrigPoly({k: self.coeff(k) + other.coeff(k) for k in keys})

    def __mul__(self, alpha):
        return TrigPoly({k: alpha * v for k, v in self.coeffs.items()})

    __rmul__ = __mul__

    def to_dict(self):
        return {
            "kind": "trigpoly",
            "coeffs": [[k, v.real, v.imag] for k, v in sorted(self.coeffs.items())],
        }

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data):
        if data.get("kind") != "trigpoly":
            raise ValueError(f"not a trigpoly document: {data!r}")
        return cls({int(k): complex(re, im) for k, re, im in data["coeffs"]})


@dataclass(frozen=True, eq=False)
class SampledSymbol(GeneratingFunction):
    """A symbol given by a vectorised callable on [-pi, pi].

    The callable must be re-entrant; it is evaluated after angle reduction.
    """

    func: object
    name: str = None

    def _evaluate(self, theta):
        return self.func(np.asarray(theta, dtype=float))


def fourier_coeffs(f, n, oversample=4):
    """Fourier coefficients a_{-(n-1)}, ..., a_{n-1} of ``f``.

    Composite trapezoid rule on S uniform points of [-pi, pi] evaluated by one
    FFT, S the smallest power of two with
    ``S >= max(oversample * (2n - 1), 4n, 2**16)``. The sample at -pi is the
    average of the one-sided limits at -pi and pi, so symbols with a jump at
    the seam are integrated as their periodic extension.

    Returns a complex array ``a`` of length 2n - 1 with ``a[k + n - 1] = a_k``.
    """
    n = check_positive_int(n, "n")
    oversample = check_positive_int(oversample, "oversample")
    S = next_pow2(max(oversample * (2 * n - 1), 4 * n, MIN_QUADRATURE_POINTS))
    _, samples = f.grid(S)
    samples[0] = f.seam_value()
    if not np.isfinite(samples[0]):
        raise ValueError("symbol has a non-finite value at the seam")
    # theta_j = -pi + 2 pi j / S, so exp(-i k theta_j) = (-1)^k exp(-2 pi i jk / S)
    spectrum = np.fft.fft(samples) / S
    k = np.arange(-(n - 1), n)
    sign = np.where(k % 2 == 0, 1.0, -1.0)
    return spectrum[k % S] * sign


def sup_norm(f, grid_size=DEFAULT_GRID):
    """max |f(theta_j)| over a uniform grid of [-pi, pi)."""
    _, values = f.grid(grid_size)
    return float(np.max(np.abs(values)))


def _ex1(t):
    return 4.0 / 3.0 * t * np.cos(t)


def _ex2(t):
    return 2.0 * t * np.cos(t) + 1j * t


def _ex3(t):
    return -(t**2 / (2 * np.pi) + 1e-3)


def _ex4(t):
    return -(t**2 / (2 * np.pi) * 1j + 1e-3)


def _ex5a(t):
    return (np.pi / 2 - 1e-4) * np.cos(t**2) - np.pi / 4


def _ex5b(t):
    return (np.pi / 2 - 1e-4) * np.cos(t**2) + (t / np.pi) * 1j


_CATALOG = {
    "ex1": _ex1,
    "ex2": _ex2,
    "ex3": _ex3,
    "ex4": _ex4,
    "ex5a": _ex5a,
    "ex5b": _ex5b,
}

# pairing of each catalog symbol with the matrix function it is studied under
EXPERIMENT_FUNCTION = {
    "ex1": "exp",
    "ex2": "exp",
    "ex3": "sin",
    "ex4": "sin",
    "ex5a": "cos",
    "ex5b": "cos",
}


def experiment_symbols():
    """The six named symbols used by the experiment harness."""
    return {name: SampledSymbol(func, name=name) for name, func in _CATALOG.items()}


def get_symbol(spec):
    """Resolve a catalog name, trigpoly dict, JSON string or JSON file path."""
    if isinstance(spec, GeneratingFunction):
        return spec
    if isinstance(spec, dict):
        return TrigPoly.from_dict(spec)
    if not isinstance(spec, str):
        raise TypeError(f"cannot interpret {spec!r} as a symbol")
    if spec in _CATALOG:
        return SampledSymbol(_CATALOG[spec], name=spec)
    text = spec.strip()
    if not text.startswith(("{", '"')):
        try:
            with open(text) as fh:
                text = fh.read()
        except OSError:
            raise ValueError(
                f"unknown symbol {spec!r}; expected one of {sorted(_CATALOG)}, "
                "a trigpoly JSON document or a path to one"
            ) from None
    data = json.loads(text)
    if isinstance(data, str):
        return get_symbol(data)
    return TrigPoly.from_dict(data)
