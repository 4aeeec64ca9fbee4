"""Exception hierarchy.

Every error raised by the package derives from :class:`GWElectricError`.
Configuration problems derive from :class:`ConfigError` and compute-budget
problems from :class:`BudgetError`; the CLI maps those two families to exit
codes 2 and 3.
"""


class GWElectricError(Exception):
    pass


class ConfigError(GWElectricError, ValueError):
    pass


class BudgetError(GWElectricError):
    pass


# model laws
class InvalidPmf(ConfigError):
    pass


class SubcriticalOrCritical(ConfigError):
    pass


class ZeroOffspring(ConfigError):
    pass


class InvalidResistanceLaw(ConfigError):
    pass


class MissingMoment(GWElectricError):
    pass


class MissingInverseMoment(MissingMoment):
    pass


# engines
class InvalidOption(ConfigError):
    pass


class DepthOverflow(BudgetError):
    pass


class BudgetExceeded(BudgetError):
    pass


class TruncationTooDeep(InvalidOption):
    pass


class PoolTooSmall(InvalidOption):
    pass


# oracles
class InvalidNetwork(ConfigError):
    pass


class Disconnected(GWElectricError):
    pass


class SingularSystem(GWElectricError):
    pass


class NotATree(GWElectricError):
    pass


class LeavesAtMixedDepth(GWElectricError):
    pass


# harness / reporting
class InsufficientSamples(GWElectricError):
    pass


class DubucViolated(GWElectricError):
    pass


class MissingRun(GWElectricError):
    pass
