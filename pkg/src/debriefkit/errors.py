"""Exception types raised by the engine."""


class DebriefError(Exception):
    """Base class for all debriefkit errors."""


class FormatError(DebriefError):
    """Malformed input file: bad header, bad row, bad JSON line."""


class NonMonotonicError(DebriefError):
    """Per-entity timestamps decreased beyond the jitter allowance."""


class TimelineError(DebriefError):
    """Phase markers violate the ordering invariant."""


class PhaseUnsetError(DebriefError):
    """Requested phase whose marker was never tagged."""


class WindowError(DebriefError):
    """Time window outside the session or inverted."""


class EmptyAudioError(DebriefError):
    """Voice activity detection called on an empty stream."""


class InvalidSegmentError(DebriefError):
    """Voice segment with from_ms >= to_ms."""


class LayoutError(DebriefError):
    """Ward layout fails validation."""


class AlreadySealedError(DebriefError):
    """Mutation attempted on a sealed session."""


class NotSealedError(DebriefError):
    """Analytics requested on a recording session without a snapshot."""


class OutOfOrderError(DebriefError):
    """Phase tag that would break marker ordering."""


class UnknownActionError(DebriefError):
    """Action tag whose id is not in the catalog."""


class TooManyItemsError(DebriefError):
    """Share request with more than three items."""


class UnknownVizError(DebriefError):
    """Visualization id not in the catalogue."""


class SessionClosedError(DebriefError):
    """Interaction logged after the debrief room was closed."""


class EmptySequenceError(DebriefError):
    """Strategy classification of an empty selection sequence."""


class EmptyTextError(DebriefError):
    """Utterance coding of empty text."""


class InvalidScriptError(DebriefError):
    """Scenario script fails validation."""
