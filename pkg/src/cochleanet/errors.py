"""Exception hierarchy shared across the package."""


class CochleaNetError(Exception):
    """Base class for every error raised by cochleanet."""


class ChannelOutOfRange(CochleaNetError, ValueError):
    pass


class AddressOutOfRange(CochleaNetError, ValueError):
    pass


class BadMagic(CochleaNetError, ValueError):
    pass


class TruncatedRecord(CochleaNetError, ValueError):
    pass


class UnsupportedFormat(CochleaNetError, ValueError):
    pass


class CorruptRiff(CochleaNetError, ValueError):
    pass


class NyquistViolation(CochleaNetError, ValueError):
    pass


class NonPositiveTau(CochleaNetError, ValueError):
    pass


class NonMonotoneEvent(CochleaNetError, ValueError):
    """An event is older than the newest timestamp already stored for its slot."""


class TooFewPoints(CochleaNetError, ValueError):
    pass


class DimensionMismatch(CochleaNetError, ValueError):
    pass


class FeatureOutOfRange(CochleaNetError, ValueError):
    pass


class BadVersion(CochleaNetError, ValueError):
    """Model document is unreadable, truncated or of an unknown version."""


class EmptyClass(CochleaNetError, ValueError):
    pass


class EmptyHistogram(CochleaNetError, ValueError):
    pass


class DegenerateInput(CochleaNetError, ValueError):
    pass


class TooFewSamples(CochleaNetError, ValueError):
    pass
