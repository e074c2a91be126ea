"""seedmap: FM-index SMEM seeding, suffix-array lookup, chaining and batched banded
Smith-Waterman extension for short reads."""

from .bsw import BswParams
from .fmindex import FMIndex, build_index
from .pipeline import MapParams, MappingRecord, format_record, parse_record, process_chunk
from .refseq import ReadRecord, ReferenceSequence
from .smem import SmemParams

__version__ = "0.1.0"

__all__ = ["BswParams", "FMIndex", "MapParams", "MappingRecord", "ReadRecord",
           "ReferenceSequence", "SmemParams", "build_index", "format_record", "parse_record",
           "process_chunk"]
