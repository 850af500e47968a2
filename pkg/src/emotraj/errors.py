"""Exception hierarchy.

Every leaf class carries its own process exit code; the CLI returns it
verbatim. Codes are grouped by decade:

    1x  configuration      2x  manifest       3x  data / geometry
    4x  model file         5x  filesystem
"""


class EmotrajError(Exception):
    exit_code = 1


# -- configuration ---------------------------------------------------------

class ConfigurationError(EmotrajError):
    exit_code = 19


class SingleClass(ConfigurationError, ValueError):
    exit_code = 10


class MissingEmotion(ConfigurationError, ValueError):
    exit_code = 11


class EmptyClass(ConfigurationError, ValueError):
    exit_code = 12


# -- manifests ---------------------------------------------------------------

class ManifestError(EmotrajError):
    exit_code = 29


class MissingFile(ManifestError, FileNotFoundError):
    exit_code = 20


class BadFrameCount(ManifestError, ValueError):
    exit_code = 21


class DuplicateFrameIndex(ManifestError, ValueError):
    exit_code = 22


class UnknownLabel(ManifestError, ValueError):
    exit_code = 23


class ManifestFormatError(ManifestError, ValueError):
    exit_code = 24


# -- data / geometry -----------------------------------------------------------

class DataError(EmotrajError):
    exit_code = 39


class ImageDecodeError(DataError, ValueError):
    exit_code = 30


class DimensionMismatch(DataError, ValueError):
    exit_code = 31


class DegenerateData(DataError, ValueError):
    exit_code = 32


class DegenerateEyes(DataError, ValueError):
    exit_code = 33


class OutOfBounds(DataError, IndexError):
    exit_code = 34


class EmptyTestSet(DataError, ValueError):
    exit_code = 35


# -- model files -------------------------------------------------------------

class UnreadableModel(EmotrajError, ValueError):
    exit_code = 40


class VersionMismatch(UnreadableModel):
    exit_code = 41


# -- filesystem --------------------------------------------------------------

class IoError(EmotrajError, OSError):
    exit_code = 50


class SingleSequenceClass(UserWarning):
    """A class has too few sequences to appear in both halves of a split."""
