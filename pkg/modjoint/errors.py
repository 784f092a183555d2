# -*- coding: utf-8 -*-

""" ModJoint exceptions.
"""


class ModJointError(Exception):
    """ Base class for errors raised by ModJoint.
    """


class ConfigError(ModJointError):
    """ Raised when the run configuration file or one of its values is invalid.
    """


class ParameterError(ModJointError):
    """ Raised when a numeric parameter is outside its valid range.
    """


class NetworkError(ModJointError):
    """ Raised when a road network cannot be loaded or fails validation.
    """


class NoPathError(NetworkError):
    """ Raised when a destination cannot be reached from an origin.
    """


class DemandError(ModJointError):
    """ Raised when a demand file is invalid.

        :param str message:
            An error message.
        :type line:
            None or int
        :param line:
            The 1-based line number in the demand file that caused the
            error, if known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = "line {}: {}".format(line, message)
        super().__init__(message)
        self.line = line


class DomainError(ModJointError):
    """ Raised when a numeric function is evaluated outside its domain.
    """


class EmptySupplyError(ModJointError):
    """ Raised when a wait function is evaluated with no open vehicles.
    """


class CalibrationError(ModJointError):
    """ Raised when a steady-state calibration has no nonnegative solution.
    """


class ProblemSizeError(ModJointError):
    """ Raised when an exhaustive search is asked to enumerate too many options.
    """
