"""Exception hierarchy shared across the toolkit.

Grouped into families so the CLI can map each family to a distinct exit code.
"""


class AutomscError(Exception):
    """Base class for all toolkit errors."""


# --- corpus / data format -------------------------------------------------


class DataFormatError(AutomscError):
    """A corpus or prediction file violates its format contract."""


class MalformedCode(DataFormatError):
    """String is not a valid 5-character MSC code."""


class MalformedField(DataFormatError):
    """Reference-mscs field segment cannot be decoded."""


class CsvSyntax(DataFormatError):
    """CSV stream is structurally invalid; message carries the position."""


class DuplicateId(DataFormatError):
    """Two article rows share the same document id."""


class EmptyLabels(DataFormatError):
    """Article row has no MSC labels."""


class DuplicateKey(DataFormatError):
    """Two prediction rows share the (de, method, pos) key."""


class UnknownId(DataFormatError):
    """A split policy references a document id absent from the corpus."""


# --- training -------------------------------------------------------------


class TrainingError(AutomscError):
    """Model fitting cannot proceed or diverged."""


class SingleClass(TrainingError):
    """Training set contains fewer than two distinct subjects."""


class NonFinite(TrainingError):
    """Loss or gradient became non-finite."""


class NoReferences(TrainingError):
    """Article has no reference MSC codes to vote over."""


class TooFewPerClass(TrainingError):
    """Some class has fewer members than the number of folds."""


# --- model files / application --------------------------------------------


class ModelError(AutomscError):
    """Model file or model application problem."""


class DimensionMismatch(ModelError):
    """Feature vector dimension differs from the model's."""


class VersionMismatch(ModelError):
    """Model file carries an unsupported format version."""


class CorruptFile(ModelError):
    """Model file is truncated or fails its checksum."""


# --- evaluation -----------------------------------------------------------


class EvaluationError(AutomscError):
    """Evaluation inputs violate a precondition."""


class LengthMismatch(EvaluationError):
    """Truth and prediction sequences differ in length (or are empty)."""


class AllClassesFiltered(EvaluationError):
    """min_class_size removed every class from the aggregation."""


class MissingScore(EvaluationError):
    """A prediction lacks the score required by the operation."""


class UnknownDe(EvaluationError):
    """A prediction references a document id absent from the truth set."""
