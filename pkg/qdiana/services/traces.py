import csv
import io
import struct
from pathlib import Path
from typing import Dict, List, TextIO, Union

from qdiana.exceptions import CorruptMessageError, InvalidInputError
from qdiana.models.trace import CSV_COLUMNS, Trace, TraceRecord

BINARY_MAGIC = b"QDTR"
BINARY_VERSION = 1
_BINARY_HEADER = struct.Struct("<4sHI")
_BINARY_RECORD = struct.Struct("<qddddddqqd")


def format_value(value) -> str:
    if isinstance(value, int):
        return str(value)
    return f"{value:.17g}"


def write_csv_stream(trace: Trace, stream: TextIO) -> None:
    writer = csv.DictWriter(stream, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for record in trace.records:
        writer.writerow({column: format_value(value) for column, value in zip(CSV_COLUMNS, record.as_row())})


def trace_csv(trace: Trace) -> str:
    buffer = io.StringIO()
    write_csv_stream(trace, buffer)
    return buffer.getvalue()


def write_csv(trace: Trace, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as stream:
        write_csv_stream(trace, stream)
    return path


def read_csv(path: Union[str, Path]) -> List[Dict[str, float]]:
    try:
        with open(path, encoding="utf-8", newline="") as stream:
            reader = csv.DictReader(stream)
            if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
                raise InvalidInputError(f"{path} does not carry the trace header")
            return [{column: float(row[column]) for column in CSV_COLUMNS} for row in reader]
    except FileNotFoundError:
        raise InvalidInputError(f"trace file not found: {path}")
    except ValueError as exc:
        raise InvalidInputError(f"{path} holds a non-numeric value: {exc}")


def records_from_rows(rows: List[Dict[str, float]]) -> List[TraceRecord]:
    return [
        TraceRecord(
            k=int(row["k"]),
            f_gap=row["f_gap"],
            dist_sq=row["dist_sq"],
            lyapunov=row["lyapunov"],
            H=row["H"],
            D=row["D"],
            grad_norm_sq=row["grad_norm_sq"],
            bits_up_cum=int(row["bits_up_cum"]),
            bits_down_cum=int(row["bits_down_cum"]),
            wall_ms=row["wall_ms"],
        )
        for row in rows
    ]


def serialize_trace(trace: Trace) -> bytes:
    chunks = [_BINARY_HEADER.pack(BINARY_MAGIC, BINARY_VERSION, len(trace.records))]
    chunks.extend(_BINARY_RECORD.pack(*record.as_row()) for record in trace.records)
    return b"".join(chunks)


def deserialize_trace(payload: bytes) -> List[TraceRecord]:
    if len(payload) < _BINARY_HEADER.size:
        raise CorruptMessageError("binary trace shorter than its header")
    magic, version, count = _BINARY_HEADER.unpack_from(payload)
    if magic != BINARY_MAGIC:
        raise CorruptMessageError("not a binary trace")
    if version != BINARY_VERSION:
        raise CorruptMessageError(f"unsupported binary trace version {version}")
    if len(payload) != _BINARY_HEADER.size + count * _BINARY_RECORD.size:
        raise CorruptMessageError(f"binary trace length does not match {count} records")

    return [
        TraceRecord(*_BINARY_RECORD.unpack_from(payload, _BINARY_HEADER.size + index * _BINARY_RECORD.size))
        for index in range(count)
    ]


def write_binary_trace(trace: Trace, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(serialize_trace(trace))
    return path
