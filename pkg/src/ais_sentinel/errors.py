"""Exception hierarchy.

``ValidationError`` subclasses map to CLI exit code 3 and ``TrainingError``
subclasses to exit code 4.
"""


class AisSentinelError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(AisSentinelError, ValueError):
    pass


class TrainingError(AisSentinelError, RuntimeError):
    pass


# codec
class MalformedSentence(ValidationError):
    pass


class ChecksumMismatch(ValidationError):
    pass


class InvalidPayloadChar(ValidationError):
    pass


class UnsupportedMessageType(ValidationError):
    def __init__(self, msg_type: int):
        super().__init__(f"unsupported AIS message type {msg_type}")
        self.msg_type = msg_type


class TruncatedPayload(ValidationError):
    pass


class FieldOutOfRange(ValidationError):
    pass


# geo
class ExhaustedRejection(ValidationError):
    pass


# pipeline
class DegenerateColumn(ValidationError):
    pass


class TooFewVessels(ValidationError):
    pass


# nn
class DimensionMismatch(ValidationError):
    pass


class CorruptModelFile(ValidationError):
    pass


class SchemaVersionMismatch(ValidationError):
    pass


class SingleClassDataset(TrainingError):
    pass


class NonFiniteLoss(TrainingError):
    pass


# eval
class LengthMismatch(ValidationError):
    pass


class IndexOutOfRange(ValidationError):
    pass
