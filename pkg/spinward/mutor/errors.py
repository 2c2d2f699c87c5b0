"""
Exception hierarchy for spinward.mutor.

Library code raises these; the command-line front end turns them into
an exit status.
"""


class MutorError(Exception):
    """Base class for all spinward.mutor errors."""


class ConfigurationError(MutorError):
    pass


class DimensionError(MutorError):
    pass


class MaskError(MutorError):
    pass


class InputError(MutorError):
    pass


class ContextError(MutorError):
    pass


class TapeError(MutorError):
    pass


class CheckpointError(MutorError):
    pass


class NonFiniteGradientError(MutorError):
    """
    Raised by the optimizer when a gradient holds NaN or Inf.
    """

    def __init__(self, name, index):
        super(NonFiniteGradientError, self).__init__(
            "Non-finite gradient in %s at flat index %d" % (name, index))
        self.name = name
        self.index = index


class DatasetParseError(MutorError):
    """
    Raised for a malformed dataset line. Line numbers are 1-based.
    """

    def __init__(self, path, line_number, reason):
        super(DatasetParseError, self).__init__(
            "%s:%d: %s" % (path, line_number, reason))
        self.path = path
        self.line_number = line_number
        self.reason = reason


class TrainingAborted(MutorError):
    """
    Raised when a run stops on a non-finite loss or gradient.
    The last good checkpoint (possibly None) is left on disk.
    """

    def __init__(self, step, reason, last_good_checkpoint=None):
        super(TrainingAborted, self).__init__(
            "Training aborted at step %d: %s (last good checkpoint: %s)"
            % (step, reason, last_good_checkpoint))
        self.step = step
        self.reason = reason
        self.last_good_checkpoint = last_good_checkpoint
