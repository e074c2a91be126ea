"""Exception hierarchy shared by all seedmap modules."""


class SeedmapError(Exception):
    """Base class for every error raised deliberately by seedmap."""


class ParseError(SeedmapError, ValueError):
    """Malformed FASTA/FASTQ input."""

    def __init__(self, message, line=None, read_id=None):
        self.line = line
        self.read_id = read_id
        where = []
        if line is not None:
            where.append(f"line {line}")
        if read_id is not None:
            where.append(f"read {read_id!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class BuildError(SeedmapError):
    """Index construction refused (input too large, memory cap exceeded)."""


class IndexFormatError(SeedmapError):
    """An index file could not be decoded."""


class BadMagicError(IndexFormatError):
    pass


class VersionMismatchError(IndexFormatError):
    pass


class TruncatedIndexError(IndexFormatError):
    pass


class ChecksumMismatchError(IndexFormatError):
    pass


class ChunkError(SeedmapError):
    """A worker failed while processing a chunk; no partial output is produced."""
