"""Exception types raised by starwave."""


class StarWaveError(Exception):
    """Base class for all package errors."""


class DivergentIntegralError(StarWaveError, ArithmeticError):
    pass


class HalfPlaneError(StarWaveError, ValueError):
    pass


class CriticalCouplingError(StarWaveError, ValueError):
    pass


class DomainError(StarWaveError, ValueError):
    """A vertex condition fails; ``condition`` names which one."""

    def __init__(self, condition: str, value: float, tol: float):
        self.condition = condition
        self.value = value
        self.tol = tol
        super().__init__(f"{condition} violated: {value:.3e} > {tol:.1e}")


class ZeroFunctionError(StarWaveError, ValueError):
    pass


class IntegrabilityError(StarWaveError, ValueError):
    pass


class EmptyDictionaryError(StarWaveError, ValueError):
    pass


class NegativeTimeError(StarWaveError, ValueError):
    pass


class HorizonError(StarWaveError, ValueError):
    pass


class CriticalityError(StarWaveError, ValueError):
    pass


class CoercivityError(StarWaveError, ValueError):
    pass


class MeshTooCoarseError(StarWaveError, RuntimeError):
    pass


class ConfigError(StarWaveError, ValueError):
    pass
