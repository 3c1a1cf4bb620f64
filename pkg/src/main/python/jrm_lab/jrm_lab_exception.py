"""Exceptions for the jrm_lab package"""


class JrmLabException(Exception):
    """Personalised exception for the joint reconstruction lab"""
    def __init__(self, message):
        self.__message = message
        super().__init__(self.message)

    @property
    def message(self):
        """gets the message value"""
        return self.__message

    @message.setter
    def message(self, value):
        self.__message = value


class ParameterError(JrmLabException):
    """Out-of-range shape, joint or sweep parameter"""


class UnsupportedShapeError(JrmLabException):
    """Operation not available for this shape"""


class InputError(JrmLabException):
    """Input violates an operation precondition"""


class PlacementError(JrmLabException):
    """Scene layout could not be completed"""


class ConfigurationError(JrmLabException):
    """Invalid model or experiment configuration"""


class CalibrationError(JrmLabException):
    """Descriptor thresholds cannot separate the corpus"""


class DimensionError(JrmLabException):
    """Tensor shapes do not match"""


class CapacityError(JrmLabException):
    """Too many objects for one joint group"""


class NonFiniteError(JrmLabException):
    """NaN or infinity in a loss or activation"""


class DegeneracyError(JrmLabException):
    """Point configuration too degenerate for a rigid fit"""


class UndefinedMetricError(JrmLabException):
    """Metric is undefined for the given inputs"""


class StorageError(JrmLabException):
    """Reading or writing an artifact failed"""
