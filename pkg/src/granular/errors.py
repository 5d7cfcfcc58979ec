"""Exception types shared across the package."""


class NegativeCapital(ArithmeticError):
    """A subtraction or construction would produce negative capital."""


class ScheduleExhausted(IndexError):
    """A wager schedule was evaluated beyond its horizon."""


class IncompleteTable(KeyError):
    """A capital table is missing an entry it must contain."""


class InvalidInput(ValueError):
    """An input object fails validation required by an operation."""


class InvalidMachine(ValueError):
    """A reference machine's domain is not prefix-free."""


class IndexOverflow(LookupError):
    """A preimage falls outside the restricted enumeration."""


class NoDescription(LookupError):
    """The reference machine has no codeword for the requested string."""
