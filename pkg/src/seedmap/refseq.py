"""Sequence input: FASTA/FASTQ parsing, base encoding and the forward+revcomp text."""

from __future__ import annotations

from dataclasses import dataclass
from typing import BinaryIO, Iterator, Sequence

import numpy as np

from .errors import ParseError

AMBIG = 4
MAX_READ_LEN = 512
ALPHABET = b"ACGTN"

_ENCODE = np.full(256, AMBIG, dtype=np.uint8)
for _i, _ch in enumerate(b"ACGT"):
    _ENCODE[_ch] = _i
    _ENCODE[_ch + 32] = _i  # lowercase
_DECODE = np.frombuffer(ALPHABET, dtype=np.uint8)
_COMPLEMENT = np.array([3, 2, 1, 0, 4], dtype=np.uint8)


def encode(text: bytes | str) -> np.ndarray:
    """Map letters to base codes: ACGT (any case) to 0..3, everything else to 4."""
    if isinstance(text, str):
        text = text.encode("ascii")
    return _ENCODE[np.frombuffer(text, dtype=np.uint8)]


def decode(codes) -> str:
    return _DECODE[np.asarray(codes, dtype=np.uint8)].tobytes().decode("ascii")


def complement(codes) -> np.ndarray:
    return _COMPLEMENT[np.asarray(codes, dtype=np.uint8)]


def revcomp(codes) -> np.ndarray:
    return complement(codes)[::-1].copy()


@dataclass(frozen=True)
class RecordSpan:
    name: str
    offset: int
    length: int


@dataclass
class ReferenceSequence:
    """A (possibly multi-record) reference flattened into one coordinate space."""

    name: str
    bases: np.ndarray
    records: tuple[RecordSpan, ...] = ()

    def __post_init__(self):
        self.bases = np.ascontiguousarray(self.bases, dtype=np.uint8)
        if not self.records:
            self.records = (RecordSpan(self.name, 0, len(self.bases)),)

    @property
    def n_ref(self) -> int:
        return int(self.bases.shape[0])

    @property
    def boundaries(self) -> list[int]:
        """Start offsets of records 1..k-1 (record 0 always starts at 0)."""
        return [r.offset for r in self.records[1:]]

    def record_offsets(self) -> np.ndarray:
        return np.array([r.offset for r in self.records], dtype=np.int64)


@dataclass
class ConcatSequence:
    bases: np.ndarray
    n_ref: int


@dataclass
class ReadRecord:
    id: str
    bases: np.ndarray
    qualities: bytes | None = None
    ordinal: int = 0
    comment: str = ""

    def __len__(self):
        return int(self.bases.shape[0])


def _lines(stream: BinaryIO):
    for lineno, raw in enumerate(stream, start=1):
        yield lineno, raw.rstrip(b"\r\n")


def parse_fasta(stream: BinaryIO) -> ReferenceSequence:
    """Read every record of a FASTA stream into one ReferenceSequence."""
    names: list[str] = []
    chunks: list[list[bytes]] = []
    seen_any = False
    for lineno, line in _lines(stream):
        if not line.strip():
            continue
        seen_any = True
        if line.startswith(b">"):
            name = line[1:].split(maxsplit=1)
            names.append(name[0].decode("utf-8", "replace") if name else "")
            chunks.append([])
        elif not chunks:
            raise ParseError("sequence data before the first '>' header", line=lineno)
        else:
            chunks[-1].append(line.strip())
    if not seen_any:
        raise ParseError("empty FASTA input", line=1)

    records = []
    parts = []
    offset = 0
    for name, lines in zip(names, chunks):
        seq = b"".join(lines)
        if not seq:
            raise ParseError(f"record {name!r} has no sequence")
        records.append(RecordSpan(name, offset, len(seq)))
        parts.append(encode(seq))
        offset += len(seq)
    bases = np.concatenate(parts) if len(parts) > 1 else parts[0]
    return ReferenceSequence(names[0], bases, tuple(records))


def read_fasta(path) -> ReferenceSequence:
    with open(path, "rb") as fh:
        return parse_fasta(fh)


def write_fasta(ref: ReferenceSequence, stream: BinaryIO, width: int = 60) -> None:
    for rec in ref.records:
        stream.write(b">" + rec.name.encode() + b"\n")
        seq = decode(ref.bases[rec.offset:rec.offset + rec.length]).encode()
        for i in range(0, len(seq), width):
            stream.write(seq[i:i + width] + b"\n")


def parse_fastq(stream: BinaryIO, batch_size: int = 512) -> Iterator[list[ReadRecord]]:
    """Yield batches of at most ``batch_size`` reads in file order."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    batch: list[ReadRecord] = []
    ordinal = 0
    it = _lines(stream)
    for lineno, header in it:
        if not header:
            continue
        if not header.startswith(b"@"):
            raise ParseError("FASTQ header must start with '@'", line=lineno)
        head = header[1:].decode("utf-8", "replace").split(maxsplit=1)
        rid = head[0] if head else ""
        comment = head[1] if len(head) > 1 else ""
        try:
            _, seq = next(it)
            plus_no, plus = next(it)
            _, qual = next(it)
        except StopIteration:
            raise ParseError("truncated FASTQ record", line=lineno, read_id=rid) from None
        if not plus.startswith(b"+"):
            raise ParseError("expected '+' separator", line=plus_no, read_id=rid)
        if len(seq) != len(qual):
            raise ParseError("sequence and quality lengths differ", line=lineno, read_id=rid)
        if not 1 <= len(seq) <= MAX_READ_LEN:
            raise ParseError(f"read length must be in 1..{MAX_READ_LEN}", line=lineno, read_id=rid)
        batch.append(ReadRecord(rid, encode(seq), bytes(qual), ordinal, comment))
        ordinal += 1
        if len(batch) == batch_size:
            yield batch
            batch = []
    if batch:
        yield batch


def write_fastq(reads: Sequence[ReadRecord], stream: BinaryIO) -> None:
    for r in reads:
        head = r.id if not r.comment else f"{r.id} {r.comment}"
        qual = r.qualities if r.qualities is not None else b"I" * len(r)
        stream.write(b"@" + head.encode() + b"\n" + decode(r.bases).encode() + b"\n+\n" + qual + b"\n")


def build_concat(ref: ReferenceSequence) -> ConcatSequence:
    """Reference followed by its reverse complement (length 2*n_ref)."""
    if ref.n_ref < 1:
        raise ValueError("reference must contain at least one base")
    fwd = ref.bases
    return ConcatSequence(np.concatenate([fwd, revcomp(fwd)]), ref.n_ref)
