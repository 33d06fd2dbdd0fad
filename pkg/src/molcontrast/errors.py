"""Exception hierarchy shared by every subpackage.

Errors carry an ``exit_code`` so the command line can map them onto its
documented exit statuses (2 for bad data, 3 for numeric failures).
"""


class MolContrastError(Exception):
    exit_code = 2


# --- parsing -----------------------------------------------------------------

class SmilesError(MolContrastError, ValueError):
    """Base class for anything wrong with a SMILES string."""


class EmptyInput(MolContrastError, ValueError):
    pass


class EmptySmiles(EmptyInput, SmilesError):
    pass


class SmilesSyntaxError(SmilesError):
    pass


class UnbalancedParenthesis(SmilesError):
    pass


class UnclosedRingBond(SmilesError):
    pass


class UnknownAtomSymbol(SmilesError):
    pass


class ValenceViolation(SmilesError):
    pass


class MultiFragmentInput(SmilesError):
    pass


class FeatureOutOfRange(MolContrastError, ValueError):
    pass


# --- fingerprints / augmentation / fragments ---------------------------------

class WidthMismatch(MolContrastError, ValueError):
    pass


class DomainError(MolContrastError, ValueError):
    pass


class IndexOutOfRange(MolContrastError, IndexError):
    pass


class PartitionMismatch(MolContrastError, ValueError):
    pass


# --- model / loss ------------------------------------------------------------

class CodeOutOfVocab(MolContrastError, ValueError):
    pass


class TraceMismatch(MolContrastError, ValueError):
    pass


class ZeroVector(MolContrastError, ValueError):
    exit_code = 3


class WeightShapeMismatch(MolContrastError, ValueError):
    pass


class UnpairedRow(MolContrastError, ValueError):
    pass


class NonFinite(MolContrastError, FloatingPointError):
    exit_code = 3


class NonFiniteGrad(NonFinite):
    pass


class ShapeMismatch(MolContrastError, ValueError):
    pass


# --- training / io -----------------------------------------------------------

class CheckpointError(MolContrastError):
    pass


class CheckpointVersionMismatch(CheckpointError):
    pass


class TaskTypeMismatch(MolContrastError, ValueError):
    pass


class EmptyDataset(MolContrastError, ValueError):
    pass


class SingleClass(MolContrastError, ValueError):
    pass


class ZeroRange(MolContrastError, ValueError):
    pass


class ConfigError(MolContrastError, ValueError):
    pass


class TestEmptyWarning(UserWarning):
    """Scaffold split left the test partition empty."""

    __test__ = False  # keep pytest from collecting this as a test class
