"""Exception types shared across the package."""


class InputError(ValueError):
    """Malformed or inconsistent user input (bad names, arity, ranges)."""


class ParseError(InputError):
    """A property or grid text could not be parsed.

    ``position`` is the 0-based character offset where parsing failed.
    """

    def __init__(self, message: str, position: int, text: str = ""):
        self.position = position
        self.text = text
        super().__init__(f"{message} (at position {position})")


class ContractViolation(RuntimeError):
    """An incremental routine was handed a stale or mismatched input."""


class NoCandidate(LookupError):
    """No edit instantiating the requested operator schema exists."""


class OracleBoundExceeded(RuntimeError):
    """The brute-force oracle refuses inputs above its state bound."""


class RetryCapExceeded(RuntimeError):
    """Sparse generation gave up after too many rejected attempts."""
