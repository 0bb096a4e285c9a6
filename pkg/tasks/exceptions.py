# tasks/exceptions.py
from django.core.exceptions import ValidationError


class TransductionError(ValidationError):
    """
    Base of every input error the engine raises.

    It is a ValidationError so each kind carries a stable ``code`` that callers
    (commands, tests) can check without matching message text.
    """
    default_code = 'invalid'

    def __init__(self, message, code=None, params=None):
        super().__init__(message, code=code or self.default_code, params=params)

    def __str__(self):
        return '; '.join(self.messages)


# --- task validation ---
class DimensionMismatch(TransductionError):
    default_code = 'dimension_mismatch'


class NonFiniteValue(TransductionError):
    default_code = 'non_finite_value'


class LabelOutOfRange(TransductionError):
    default_code = 'label_out_of_range'


class NormTooFarFromUnit(TransductionError):
    default_code = 'norm_too_far_from_unit'


class EmptyMatrix(TransductionError):
    default_code = 'empty_matrix'


# --- prototype initialisation / few-shot protocol ---
class EmptyClass(TransductionError):
    default_code = 'empty_class'


class InsufficientShots(TransductionError):
    default_code = 'insufficient_shots'


class EmptyGrid(TransductionError):
    default_code = 'empty_grid'


# --- file formats ---
class BadMagic(TransductionError):
    default_code = 'bad_magic'


class TruncatedFile(TransductionError):
    default_code = 'truncated_file'


class TrailingData(TransductionError):
    default_code = 'trailing_data'


class OversizedFile(TransductionError):
    default_code = 'oversized_file'


class RaggedCsv(TransductionError):
    default_code = 'ragged_csv'


class ParseError(TransductionError):
    default_code = 'parse_error'


class NegativeLabel(TransductionError):
    default_code = 'negative_label'


class IoFailure(TransductionError):
    default_code = 'io_failure'
