"""Exception hierarchy shared by all modules."""


class BranchLabError(Exception):
    """Base class for every error raised by branchlab."""

    exit_code = 1


# group definitions
class ParseError(BranchLabError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + where)


class UnknownGenerator(BranchLabError):
    pass


class ArityMismatch(BranchLabError):
    pass


class BadPermutation(BranchLabError):
    pass


class UnsupportedPrime(BranchLabError):
    pass


class LevelTooLarge(BranchLabError):
    pass


# permutation groups
class DegreeMismatch(BranchLabError):
    pass


class NotASubgroup(BranchLabError):
    pass


class NotAMember(BranchLabError):
    pass


class NotAPGroup(BranchLabError):
    pass


class CosetSpaceTooLarge(BranchLabError):
    exit_code = 2


class CapExceeded(BranchLabError):
    exit_code = 2


# enumeration
class BudgetExceeded(BranchLabError):
    """Raised when an enumeration runs out of its memory/disk/record budget.

    ``partial`` holds whatever complete prefix was produced and ``resume_token``
    the path of a token file that lets the job continue.
    """

    exit_code = 2

    def __init__(self, message, partial=None, resume_token=None):
        super().__init__(message)
        self.partial = partial
        self.resume_token = resume_token


class IncompleteEnumeration(BranchLabError):
    pass


class NotFound(BranchLabError):
    pass


# modules
class PhiVanishesOnGenerators(BranchLabError):
    pass


class NotGenerating(BranchLabError):
    pass


class EmptyTable(BranchLabError):
    pass


class InequalityViolated(BranchLabError):
    exit_code = 3


class VerificationFailed(BranchLabError):
    exit_code = 3
