"""Exception hierarchy shared by every module."""


class NafError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(NafError, ValueError):
    pass


class NoOverlapError(NafError, ValueError):
    """Combined weights have zero mass: the sources share no support."""


class EnumerationInfeasibleError(NafError):
    pass


class MultiplicityError(NafError, ValueError):
    def __init__(self, tag, multiplicity, m):
        self.tag = tag
        self.multiplicity = multiplicity
        self.m = m
        super().__init__(
            f"tag {tag!r} is accessed by {multiplicity} distinct datapoints but m={m}; "
            f"deduplicate the dataset or raise m to at least {multiplicity}"
        )


class ShardPlanError(NafError, ValueError):
    pass


class EmptyDatasetError(NafError, ValueError):
    pass


class VocabMismatchError(NafError, ValueError):
    pass


class ExhaustedError(NafError, RuntimeError):
    def __init__(self, attempts):
        self.attempts = attempts
        super().__init__(
            f"no sample accepted after {attempts} attempts; the acceptance probability is too small"
        )


class UndefinedBoundError(NafError, ValueError):
    pass


class NoFiniteKError(NafError, ValueError):
    pass
