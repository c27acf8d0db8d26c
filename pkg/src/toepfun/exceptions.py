"""Exception types raised by toepfun."""


class ToepfunError(Exception):
    """Base class for all package errors."""

    code = "error"


class NearSingularFunctionValue(ToepfunError, ValueError):
    """g(lambda_j) of a circulant is too close to zero to invert."""

    code = "near_singular"

    def __init__(self, index, value, floor):
        self.index = int(index)
        self.value = complex(value)
        self.floor = float(floor)
        super().__init__(
            f"|g(lambda_{self.index})| = {abs(self.value):.3e} is below the "
            f"singularity floor {self.floor:.3e}"
        )


class RadiusViolation(ToepfunError, ValueError):
    """Spectral radius of A - alpha*I is outside the Taylor disc."""

    code = "radius_violation"

    def __init__(self, spectral_radius, radius):
        self.spectral_radius = float(spectral_radius)
        self.radius = float(radius)
        super().__init__(
            f"spectral radius {self.spectral_radius:.6g} of A - alpha*I is not "
            f"below the radius of convergence {self.radius:.6g}"
        )


class BoundViolation(ToepfunError, AssertionError):
    """A norm inequality that must hold was violated beyond its slack."""

    code = "bound_violation"


class NotHermitian(ToepfunError, ValueError):
    code = "not_hermitian"


class IndefinitenessDetected(ToepfunError, ValueError):
    """CG met a direction with non-positive curvature."""

    code = "indefinite"


class PreconditionerNotHPD(ToepfunError, ValueError):
    code = "preconditioner_not_hpd"


class BreakdownHessenbergSingular(ToepfunError, ArithmeticError):
    code = "hessenberg_singular"


class MaxIterExceeded(ToepfunError, RuntimeError):
    """Raised only when a solver is configured with ``raise_on_failure``."""

    code = "max_iter"

    def __init__(self, report):
        self.report = report
        super().__init__(
            f"{report.solver} did not converge in {report.iterations} iterations "
            f"(relres {report.relres_final:.3e})"
        )


class SpectrumError(ToepfunError, ArithmeticError):
    code = "eigensolver"
