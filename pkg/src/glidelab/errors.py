"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map it without a lookup
table: 1 for computational failures, 2 for input/config problems.
"""


class GlidelabError(Exception):
    exit_code = 1


class InputError(GlidelabError):
    exit_code = 2


class MalformedRow(InputError):
    pass


class GapInDates(InputError):
    pass


class NonPositiveLevel(InputError):
    pass


class LengthMismatch(InputError):
    pass


class DegenerateSeries(GlidelabError):
    pass


class InsufficientData(GlidelabError):
    pass


class ParameterOutOfDomain(GlidelabError):
    pass


class OptimizationFailed(GlidelabError):
    pass


class InfeasibleTarget(GlidelabError):
    pass


class InfeasibleGoal(GlidelabError):
    pass


class NoConvergence(GlidelabError):
    pass


class GridTooSmall(GlidelabError):
    pass


class UnknownTime(GlidelabError):
    pass


class EmptySample(GlidelabError):
    pass


class BlockTooLong(GlidelabError):
    pass


class WindowOutOfRange(InputError):
    pass
