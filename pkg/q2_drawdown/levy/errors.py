# ----------------------------------------------------------------------------
# Copyright (c) 2022, Bokulich Lab.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------


class NumericalWarning(UserWarning):
    pass


class LevyError(Exception):
    def __init__(self, message="Fluctuation-theory computation failed."):
        self.message = message
        super().__init__(self.message)


class DomainError(LevyError, ValueError):
    def __init__(self, message="Argument lies outside the admissible domain."):
        super().__init__(message)


class ModelError(LevyError, ValueError):
    def __init__(self, message="Invalid Levy model specification."):
        super().__init__(message)


class ConvergenceError(LevyError):
    def __init__(self, message="Root bracketing did not converge."):
        super().__init__(message)


class NoCramerRoot(LevyError):
    def __init__(self, message="The Laplace exponent has no positive root."):
        super().__init__(message)


class InfeasibleProportion(LevyError, ValueError):
    def __init__(self, message="Proportion is not attained by psi'."):
        super().__init__(message)


class UnsupportedModel(LevyError):
    def __init__(self, message="Operation is not available for this model."):
        super().__init__(message)


class PrecisionLoss(LevyError):
    def __init__(self, message="Laplace inversion lost too much precision."):
        super().__init__(message)


class HorizonError(LevyError, ValueError):
    def __init__(self, message="Path does not cover the requested horizon."):
        super().__init__(message)


class BoundaryProportion(LevyError, ValueError):
    def __init__(self, message="Proportion lies on the Cramer/Hoglund boundary."):
        super().__init__(message)


class EffectiveSampleSizeError(LevyError):
    def __init__(self, message="Effective sample size below the configured floor."):
        super().__init__(message)


class ConditionViolated(LevyError):
    def __init__(self, condition="", message=None):
        self.condition = condition
        if message is None:
            message = f"Condition {condition} is violated."
        super().__init__(message)


class NumericRange(LevyError):
    def __init__(self, message="Assembled probability left the unit interval."):
        super().__init__(message)


class PoleProximity(LevyError, ValueError):
    def __init__(self, message="Argument is too close to a pole of the transform."):
        super().__init__(message)


class QuadratureError(LevyError):
    def __init__(self, message="Adaptive quadrature did not converge."):
        super().__init__(message)


class Underflow(LevyError):
    def __init__(self, message="Tail function underflows at the requested range."):
        super().__init__(message)


class ConfigError(LevyError, ValueError):
    def __init__(self, message="Invalid configuration.", field=None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)
