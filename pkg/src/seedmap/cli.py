"""seedmap command line: ``index``, ``mem`` and ``bench``.

Exit status: 0 success, 1 usage, 2 I/O or input format, 3 internal failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .errors import BuildError, ChunkError, IndexFormatError, ParseError
from .fmindex import FMIndex, mem_cap_from_env, parse_size
from .refseq import build_concat, parse_fastq, read_fasta

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_INTERNAL = 0, 1, 2, 3

log = logging.getLogger("seedmap")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive(kind=int):
    def conv(raw):
        v = kind(raw)
        if v < 1:
            raise argparse.ArgumentTypeError(f"must be >= 1, got {raw}")
        return v
    return conv


def _nonneg(raw):
    v = int(raw)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {raw}")
    return v


def _size(raw):
    try:
        return parse_size(raw)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add_mapping_flags(p):
    g = p.add_argument_group("mapping")
    g.add_argument("-t", "--threads", type=_positive(), default=1, help="worker threads")
    g.add_argument("--batch-size", type=_positive(), default=512, help="reads per batch")
    g.add_argument("--chunk-bytes", type=_positive(), default=1_000_000,
                   help="read bases per chunk")
    g.add_argument("-k", "--min-seed-len", type=_positive(), default=19,
                   help="minimum SMEM length")
    g.add_argument("--max-occ", type=_positive(), default=500,
                   help="hits looked up per SMEM interval")
    g.add_argument("-A", "--match", type=_positive(), default=1, help="match score")
    g.add_argument("-B", "--mismatch", type=_nonneg, default=4, help="mismatch penalty")
    g.add_argument("-O", "--gap-open", type=_nonneg, default=6, help="gap open penalty")
    g.add_argument("-E", "--gap-extend", type=_nonneg, default=1, help="gap extension penalty")
    g.add_argument("-w", "--band", type=_positive(), default=100, help="band width")
    g.add_argument("-z", "--zdrop", type=int, default=100, help="Z-drop threshold (<= 0 disables)")
    g.add_argument("--end-bonus", type=_nonneg, default=5, help="bonus for reaching a read end")
    g.add_argument("--prefetch", choices=("on", "off"), default="on",
                   help="software prefetch in SMEM")
    g.add_argument("--lane-width", type=_positive(), default=None,
                   help="BSW lanes per group for both precisions (default 64 at 8 bits, 32 at 16)")
    g.add_argument("--mem-cap", type=_size, default=None,
                   help="memory cap, e.g. 8G (default $SEEDMAP_MEM_CAP or 8G)")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = _Parser(prog="seedmap", description="Seed-and-extend short-read mapper.",
                formatter_class=fmt)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    pi = sub.add_parser("index", help="build an index from FASTA", formatter_class=fmt)
    pi.add_argument("fasta")
    pi.add_argument("out")
    pi.add_argument("--mem-cap", type=_size, default=None,
                    help="memory cap, e.g. 8G (default $SEEDMAP_MEM_CAP or 8G)")

    pm = sub.add_parser("mem", help="map FASTQ reads", formatter_class=fmt)
    pm.add_argument("index")
    pm.add_argument("reads")
    pm.add_argument("-o", "--output", default="-", help="output path")
    _add_mapping_flags(pm)

    pb = sub.add_parser("bench", help="per-stage kernel timing as CSV", formatter_class=fmt)
    pb.add_argument("index")
    pb.add_argument("reads")
    pb.add_argument("--repeat", type=_positive(), default=3, help="timed passes per stage")
    pb.add_argument("-o", "--output", default="-", help="CSV output path")
    _add_mapping_flags(pb)
    return p


def params_from_args(args):
    """MapParams from parsed flags; ValueError on an invalid combination."""
    from .bsw import BswParams
    from .pipeline import MapParams
    from .smem import SmemParams
    smem = SmemParams(min_seed_len=args.min_seed_len, max_occ=args.max_occ)
    bsw = BswParams(a=args.match, b=args.mismatch, g_o=args.gap_open, g_e=args.gap_extend,
                    w=args.band, zdrop=args.zdrop, end_bonus=args.end_bonus)
    kw = {}
    if args.lane_width:
        kw = dict(lane_width8=args.lane_width, lane_width16=args.lane_width)
    return MapParams(smem=smem, bsw=bsw, batch_size=args.batch_size,
                     prefetch=args.prefetch == "on", **kw)


def _open_out(path):
    if path == "-":
        return sys.stdout, False
    return open(path, "w"), True


def _load_index(path, cap):
    size = os.path.getsize(path)
    if size > cap:
        raise BuildError(f"index of {size} bytes exceeds the memory cap of {cap}")
    return FMIndex.load(path)


def cmd_index(args) -> int:
    cap = args.mem_cap if args.mem_cap is not None else mem_cap_from_env()
    ref = read_fasta(args.fasta)
    index = FMIndex.build(build_concat(ref), mem_cap=cap, records=ref.records)
    index.save(args.out)
    print(f"n_ref\t{index.n_ref}\nn\t{index.n}\nbuckets\t{index.bucket_count}")
    return EXIT_OK


def cmd_mem(args) -> int:
    from .pipeline import Worker, chunk_reads, format_record, process_chunk
    params = params_from_args(args)
    cap = args.mem_cap if args.mem_cap is not None else mem_cap_from_env()
    index = _load_index(args.index, cap)
    pool = [Worker() for _ in range(args.threads)]
    out, close = _open_out(args.output)
    n = 0
    try:
        with open(args.reads, "rb") as fh:
            for chunk in chunk_reads(parse_fastq(fh, params.batch_size), args.chunk_bytes):
                recs = process_chunk(chunk, index, params, args.threads, pool=pool)
                out.write("".join(format_record(r) for r in recs))
                n += len(recs)
                log.info("mapped %d reads", n)
        out.flush()
    finally:
        if close:
            out.close()
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench import rows_to_csv, run_bench
    params = params_from_args(args)
    cap = args.mem_cap if args.mem_cap is not None else mem_cap_from_env()
    index = _load_index(args.index, cap)
    with open(args.reads, "rb") as fh:
        reads = [r for batch in parse_fastq(fh, params.batch_size) for r in batch]
    rows = run_bench(reads, index, params, repeat=args.repeat)
    out, close = _open_out(args.output)
    try:
        out.write(rows_to_csv(rows))
    finally:
        if close:
            out.close()
    return EXIT_OK


COMMANDS = {"index": cmd_index, "mem": cmd_mem, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="[seedmap] %(message)s", stream=sys.stderr)
    try:
        if args.command != "index":
            params_from_args(args)  # validate every flag before touching any file
        return COMMANDS[args.command](args)
    except ValueError as exc:
        if isinstance(exc, ParseError):
            print(f"seedmap: input error: {exc}", file=sys.stderr)
            return EXIT_IO
        print(f"seedmap: invalid argument: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, IndexFormatError, BuildError) as exc:
        print(f"seedmap: {exc}", file=sys.stderr)
        return EXIT_IO
    except ChunkError as exc:
        cause = exc.__cause__
        if isinstance(cause, ParseError):
            print(f"seedmap: input error: {cause}", file=sys.stderr)
            return EXIT_IO
        print(f"seedmap: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # any other failure is a broken invariant
        print(f"seedmap: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
