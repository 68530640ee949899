"""Exception hierarchy.

Every error carries an ``exit_code`` so the command line front end can map
failures onto distinct process exit statuses.
"""


class MixkinError(Exception):
    exit_code = 1


class ConfigurationError(MixkinError, ValueError):
    exit_code = 2


class DegenerateDensityError(MixkinError, ValueError):
    exit_code = 3

    def __init__(self, message, species=None, cell=None):
        super().__init__(message)
        self.species = species
        self.cell = cell


class InvalidTemperatureError(MixkinError, ValueError):
    exit_code = 3


class InvalidStateError(MixkinError, ValueError):
    exit_code = 3


class NonConvergenceError(MixkinError, RuntimeError):
    exit_code = 4

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConstraintViolationError(MixkinError, ValueError):
    exit_code = 5


class StepSizeError(MixkinError, ValueError):
    exit_code = 6


class PositivityError(MixkinError, RuntimeError):
    exit_code = 6


class AdmissibilityError(MixkinError, RuntimeError):
    exit_code = 6

    def __init__(self, message, cell=None):
        super().__init__(message)
        self.cell = cell


class OutputError(MixkinError, OSError):
    exit_code = 7
