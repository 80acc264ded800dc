"""Exception hierarchy for the toolkit.

Three families matter to callers: configuration problems (reject before any
work starts), data problems (bad corpora, labels, archives), and job
failures (training/inference runs that started and then broke). The CLI
maps these to distinct exit codes.
"""


class RRSegError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(RRSegError):
    """Invalid configuration: bad keys, bad values, inconsistent dims."""


class DataError(RRSegError):
    """Invalid or inconsistent input data."""


class LabelError(DataError):
    """Unknown or malformed rhetorical-role label code."""


class IngestionError(DataError):
    """Raw-document ingestion produced no usable sentences."""


class AnnotationImportError(DataError):
    """Malformed annotation export (JSONL or WebAnno TSV)."""


class AdjudicationError(DataError):
    """Gold-label adjudication violated its preconditions."""


class ArchiveError(DataError):
    """Embedding archive is inconsistent with the request."""


class ArchiveCorruptError(ArchiveError):
    """A stored matrix failed its checksum."""


class LeakageError(DataError):
    """Train/val/test contamination detected."""


class MetricError(RRSegError):
    """Metric undefined or called with invalid counts."""


class JobError(RRSegError):
    """A training or inference job failed after starting."""


class NumericsError(JobError):
    """NaN or Inf reached a model where finiteness is required."""


class ClassifierUnavailable(JobError):
    """The external judgment classifier could not be reached."""
