"""Memory-access trace parsing, generation and partitioning.

Trace file format (UTF-8 text, one record per line):

    <cycle> <R|W> 0x<hex-address>

separated by single spaces and terminated by a newline. Lines starting with
`#` are comments. Cycles must be non-decreasing across the file.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

READ = "R"
WRITE = "W"


class TraceFormatError(ValueError):
    """Malformed trace input; the message carries the offending line number."""


@dataclass(frozen=True)
class TraceRecord:
    cycle: int
    op: str  # READ or WRITE
    address: int


@dataclass(frozen=True)
class Partition:
    records: tuple[TraceRecord, ...]
    index: int


def parse_trace(text: str) -> list[TraceRecord]:
    records: list[TraceRecord] = []
    last_cycle = -1
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise TraceFormatError(f"line {lineno}: expected '<cycle> <R|W> 0x<addr>', got {line!r}")
        try:
            cycle = int(parts[0])
        except ValueError:
            raise TraceFormatError(f"line {lineno}: bad cycle {parts[0]!r}") from None
        op = parts[1]
        if op not in (READ, WRITE):
            raise TraceFormatError(f"line {lineno}: bad op {op!r}, expected R or W")
        try:
            address = int(parts[2], 16)
        except ValueError:
            raise TraceFormatError(f"line {lineno}: bad address {parts[2]!r}") from None
        if cycle < 0:
            raise TraceFormatError(f"line {lineno}: negative cycle")
        if address < 0 or address >= (1 << 64):
            raise TraceFormatError(f"line {lineno}: address out of 64-bit range")
        if cycle < last_cycle:
            raise TraceFormatError(f"line {lineno}: cycle {cycle} decreases (previous {last_cycle})")
        last_cycle = cycle
        records.append(TraceRecord(cycle, op, address))
    return records


def parse_trace_file(path: str | Path) -> list[TraceRecord]:
    return parse_trace(Path(path).read_text(encoding="utf-8"))


def serialize_trace(records: Iterable[TraceRecord]) -> str:
    return "".join(f"{r.cycle} {r.op} 0x{r.address:x}\n" for r in records)


def write_trace_file(path: str | Path, records: Iterable[TraceRecord]) -> None:
    Path(path).write_text(serialize_trace(records), encoding="utf-8")


def split(records: Sequence[TraceRecord], trace_split: int) -> list[Partition]:
    """Cut the record stream into fixed-size partitions of `trace_split`
    records; only the last partition may be shorter. Empty input yields no
    partitions."""
    if trace_split < 1:
        raise ValueError("trace_split must be >= 1")
    out = []
    for i in range(0, len(records), trace_split):
        out.append(Partition(tuple(records[i:i + trace_split]), len(out)))
    return out


def gen_stream(count: int, start_addr: int = 0, stride_bytes: int = 64,
               gap_cycles: int = 4) -> list[TraceRecord]:
    """Sequential sweep: addresses start + i*stride, 3 reads to 1 write."""
    if count < 1:
        raise ValueError("gen_stream: count must be >= 1")
    records = []
    for i in range(count):
        op = WRITE if i % 4 == 3 else READ
        records.append(TraceRecord(i * gap_cycles, op,
                                   (start_addr + i * stride_bytes) & ((1 << 64) - 1)))
    return records


def gen_gemm(n: int, block: int, gap_cycles: int = 4,
             base_a: int = 0, base_b: int | None = None,
             base_c: int | None = None) -> list[TraceRecord]:
    """Address pattern of blocked C = A*B over row-major n x n arrays of
    8-byte elements.

    Per block triple: for each (i, j) in the block, stream the A row and the
    B column an element pair at a time, then write the C element once. Total
    reads are 2*n^3; writes are n^3/block (n^2 when block == n).
    """
    if n < 1 or block < 1:
        raise ValueError("gen_gemm: n and block must be >= 1")
    if block > n:
        raise ValueError("gen_gemm: block must be <= n")
    elem = 8
    if base_b is None:
        base_b = base_a + elem * n * n
    if base_c is None:
        base_c = base_b + elem * n * n
    records = []
    t = 0

    def emit(op, addr):
        nonlocal t
        records.append(TraceRecord(t, op, addr))
        t += gap_cycles

    for ii in range(0, n, block):
        for jj in range(0, n, block):
            for kk in range(0, n, block):
                for i in range(ii, min(ii + block, n)):
                    for j in range(jj, min(jj + block, n)):
                        for k in range(kk, min(kk + block, n)):
                            emit(READ, base_a + elem * (i * n + k))
                            emit(READ, base_b + elem * (k * n + j))
                        emit(WRITE, base_c + elem * (i * n + j))
    return records


def gen_irregular(count: int, address_space_bytes: int = 1 << 26,
                  seed: int = 0, gap_cycles: int = 4) -> list[TraceRecord]:
    """Uniform random 64-byte-aligned addresses, 9 reads to 1 write."""
    if count < 1:
        raise ValueError("gen_irregular: count must be >= 1")
    if address_space_bytes < 64 or address_space_bytes & (address_space_bytes - 1):
        raise ValueError("gen_irregular: address space must be a power of two >= 64")
    rng = np.random.default_rng(seed)
    lines = rng.integers(0, address_space_bytes // 64, size=count)
    records = []
    for i in range(count):
        op = WRITE if i % 10 == 9 else READ
        records.append(TraceRecord(i * gap_cycles, op, int(lines[i]) * 64))
    return records


GENERATORS = ("stream", "gemm", "irregular")
