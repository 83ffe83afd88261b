"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class VocabTrimError(Exception):
    exit_code = 3


class ConfigError(VocabTrimError):
    exit_code = 2


class DataError(VocabTrimError):
    exit_code = 3


class EmptyCorpus(DataError):
    pass


class IdOutOfRange(DataError):
    pass


class LengthMismatch(DataError):
    pass


class KTooSmall(DataError):
    pass


class EmptyResult(DataError):
    pass


class EmptyPrefix(DataError):
    pass


class EmptyPromptSet(DataError):
    pass


class ZeroBlocks(DataError):
    pass


class ZeroTarget(DataError):
    pass


class FormatError(DataError):
    """Malformed or stale artifact file."""


class InvariantViolation(VocabTrimError):
    exit_code = 4
