"""Exception hierarchy.

Two broad classes matter for the CLI exit-code contract: UsageError maps to
exit 1 (bad invocation, unreadable files), DataError maps to exit 2 (the
input was read but is invalid or corrupt).
"""


class TspackError(Exception):
    pass


class UsageError(TspackError):
    pass


class DataError(TspackError):
    pass


class ManifestError(UsageError):
    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class CsvError(DataError):
    def __init__(self, message, line=None, column=None):
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + where)
        self.line = line
        self.column = column


class NonMonotonicTimestamps(DataError):
    def __init__(self, index, message=None):
        super().__init__(message or f"timestamps decrease at index {index}")
        self.index = index


class JitterViolation(DataError):
    """Raised by the CLI when a stream fails the rate constraint and no repair was requested."""

    def __init__(self, report, name=""):
        n = len(report.violations)
        super().__init__(f"stream {name!r}: {n} inter-sample gap(s) exceed 1/rate")
        self.report = report


class GapError(DataError):
    def __init__(self, start_s, end_s):
        super().__init__(f"gap of {float(end_s - start_s):.6g} s between t={float(start_s):.6g} and t={float(end_s):.6g}")
        self.start_s = start_s
        self.end_s = end_s


class SsaError(DataError):
    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class RiceDecodeError(DataError):
    def __init__(self, bit_offset, message="bitstream truncated"):
        super().__init__(f"{message} at bit {bit_offset}")
        self.bit_offset = bit_offset


class FlacError(DataError):
    pass


class FlacBadMagic(FlacError):
    pass


class FlacCrcError(FlacError):
    def __init__(self, kind, frame_index):
        super().__init__(f"{kind} mismatch in frame {frame_index}")
        self.kind = kind
        self.frame_index = frame_index


class FlacMd5Error(FlacError):
    def __init__(self):
        super().__init__("decoded samples do not match the stream-header MD5")


class Rice32Error(DataError):
    pass


class EbmlError(DataError):
    def __init__(self, message, offset=None):
        super().__init__(f"{message} (byte {offset})" if offset is not None else message)
        self.offset = offset


class MkvError(EbmlError):
    pass
