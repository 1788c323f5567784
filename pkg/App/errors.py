#DeskEBM
#Energy-based model training toolkit

#ERRORS - Defines the exceptions raised by the controllers, and the exit code each one maps to on the command line.

#Exit codes used by the command layer.
EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DIVERGENCE = 4
EXIT_INTERNAL = 5


#Base class for every error raised by the toolkit. Each subclass carries the exit code reported by manage.py.
class ToolkitError(Exception):
    exitCode = EXIT_INTERNAL

    def toDict(self):
        return {
            "error" : type(self).__name__,
            "message" : str(self),
            "exitCode" : self.exitCode
        }


#Raised for configuration problems: unknown keys, bad values, and mode/head mismatches.
class ConfigError(ToolkitError):
    exitCode = EXIT_CONFIG


#Raised when tensor or sample shapes do not conform.
class ShapeError(ConfigError):
    pass


#Raised for malformed, truncated, empty or non-finite data.
class DataError(ToolkitError):
    exitCode = EXIT_DATA


class MalformedHeaderError(DataError):
    pass


class TruncatedPayloadError(DataError):
    pass


class LabelRangeError(DataError):
    pass


#Raised when training or sampling blows up. Carries where it happened and the offending value.
class DivergenceError(ToolkitError):
    exitCode = EXIT_DIVERGENCE

    def __init__(self, message, iteration=None, step=None, value=None):
        super().__init__(message)
        self.iteration = iteration
        self.step = step
        self.value = value

    def toDict(self):
        report = super().toDict()
        report.update({
            "iteration" : self.iteration,
            "step" : self.step,
            "value" : None if self.value is None else float(self.value)
        })
        return report


#Raised when an internal invariant does not hold.
class InvariantError(ToolkitError):
    exitCode = EXIT_INTERNAL
