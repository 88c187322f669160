"""Exception hierarchy shared by all cforge modules."""


class CforgeError(Exception):
    """Base class for every error raised by cforge."""


class NotPrimeError(CforgeError, ValueError):
    pass


class NotInvertible(CforgeError, ValueError):
    def __init__(self, a: int, m: int):
        super().__init__(f"{a} is not invertible modulo {m}")
        self.a = a
        self.m = m


class Inconsistent(CforgeError, ValueError):
    """A congruence system has no solution."""


class FactorizationTooHard(CforgeError):
    """Factoring exceeded its effort budget; the caller must supply factors."""


class NotCoprime(CforgeError, ValueError):
    def __init__(self, a: int, q: int):
        super().__init__(f"a and q not coprime: gcd({a}, {q}) > 1")
        self.a = a
        self.q = q


class SelectionExhausted(CforgeError):
    pass


class InternalInconsistency(CforgeError):
    """A construction postcondition failed. Always a bug, never user error."""


# Lemma triple construction failures
class LemmaError(CforgeError):
    pass


class FormNotPrime(LemmaError):
    def __init__(self, which: str, value: int):
        super().__init__(f"NotPrime({which}: {value})")
        self.which = which
        self.value = value


class NotDistinct(LemmaError):
    pass


class AlignmentViolation(LemmaError):
    pass


class HypothesisViolation(LemmaError):
    pass


class PresieveUnsound(CforgeError, ValueError):
    pass


class SpecNotVerified(CforgeError):
    pass


class CertificateCheckFailed(CforgeError):
    pass


class CheckpointMismatch(CforgeError):
    pass
