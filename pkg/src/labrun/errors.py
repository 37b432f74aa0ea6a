"""Exception hierarchy for labrun.

Every error raised by the public API derives from :class:`LabrunError` so
callers (and the CLI) can catch one type. Subclasses mark which subsystem
rejected the input; messages carry the specifics.
"""

from __future__ import annotations


class LabrunError(Exception):
    """Base class for all labrun errors."""


class ConfigError(LabrunError):
    """A study configuration is syntactically or semantically invalid."""


class ExpansionError(LabrunError):
    """A parameter study cannot be expanded into cases."""


class MaterializeError(LabrunError):
    """Case directories cannot be created as requested."""


class RunError(LabrunError):
    """A study run cannot start or continue."""


class StudyLockedError(RunError):
    """Another process holds the study lock."""


class UnknownStudyError(LabrunError):
    """The named study does not exist under the project root."""


class UnknownCaseError(LabrunError):
    """The named case does not exist in the study."""


class AlreadyFinishedError(LabrunError):
    """A cancel request targeted a case that already finished."""


class DataError(LabrunError):
    """Secondary data is missing or malformed."""


class CompareError(LabrunError):
    """A table comparison cannot be carried out."""


class TagError(LabrunError):
    """A milestone tag does not follow the naming grammar."""


class ManifestError(LabrunError):
    """An artifact manifest is invalid or incomplete."""


class ArchiveError(LabrunError):
    """A secondary-data archive cannot be built."""


class RecipeError(LabrunError):
    """A container recipe cannot be parsed."""


class ReportError(LabrunError):
    """A report cannot be generated from the study state."""
