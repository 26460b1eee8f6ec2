"""Versioned binary artifact formats shared by the CLI and library.

Every artifact starts with a 4-byte magic and a uint32 version; loads reject
anything with the wrong magic or version.  All integers are little-endian,
all floats are little-endian float64.
"""

from __future__ import annotations

import struct
from typing import BinaryIO

import numpy as np

from .graph import Graph

GRAPH_MAGIC = b"SGRB"
GRAPH_VERSION = 1


class FormatError(ValueError):
    pass


def write_header(fh: BinaryIO, magic: bytes, version: int) -> None:
    fh.write(magic)
    fh.write(struct.pack("<I", version))


def check_header(fh: BinaryIO, magic: bytes, version: int) -> None:
    got = fh.read(4)
    if got != magic:
        raise FormatError(f"bad magic {got!r}, expected {magic!r}")
    (ver,) = struct.unpack("<I", read_exact(fh, 4))
    if ver != version:
        raise FormatError(f"unsupported version {ver}, expected {version}")


def read_exact(fh: BinaryIO, size: int) -> bytes:
    data = fh.read(size)
    if len(data) != size:
        raise FormatError(f"truncated file: wanted {size} bytes, got {len(data)}")
    return data


def write_u32(fh: BinaryIO, value: int) -> None:
    fh.write(struct.pack("<I", value))


def read_u32(fh: BinaryIO) -> int:
    return struct.unpack("<I", read_exact(fh, 4))[0]


def write_i32(fh: BinaryIO, value: int) -> None:
    fh.write(struct.pack("<i", value))


def read_i32(fh: BinaryIO) -> int:
    return struct.unpack("<i", read_exact(fh, 4))[0]


def write_f64(fh: BinaryIO, value: float) -> None:
    fh.write(struct.pack("<d", value))


def read_f64(fh: BinaryIO) -> float:
    return struct.unpack("<d", read_exact(fh, 8))[0]


def write_array(fh: BinaryIO, arr: np.ndarray) -> None:
    """Shape-prefixed array; dtype is encoded as a short tag."""
    arr = np.ascontiguousarray(arr)
    if arr.dtype == np.float64:
        tag = b"f8"
    elif arr.dtype == np.int32:
        tag = b"i4"
    elif arr.dtype == np.int64:
        tag = b"i8"
    else:
        raise FormatError(f"unsupported dtype {arr.dtype}")
    fh.write(tag)
    write_u32(fh, arr.ndim)
    for dim in arr.shape:
        write_u32(fh, dim)
    fh.write(arr.astype(arr.dtype.newbyteorder("<")).tobytes())


def read_array(fh: BinaryIO) -> np.ndarray:
    tag = read_exact(fh, 2)
    dtypes = {b"f8": np.float64, b"i4": np.int32, b"i8": np.int64}
    if tag not in dtypes:
        raise FormatError(f"unknown array tag {tag!r}")
    ndim = read_u32(fh)
    shape = tuple(read_u32(fh) for _ in range(ndim))
    dtype = np.dtype(dtypes[tag]).newbyteorder("<")
    count = int(np.prod(shape)) if shape else 1
    data = read_exact(fh, count * dtype.itemsize)
    return np.frombuffer(data, dtype=dtype).reshape(shape).astype(dtypes[tag])


def save_graph(path: str, g: Graph) -> None:
    edges = list(g.edges())
    with open(path, "wb") as fh:
        write_header(fh, GRAPH_MAGIC, GRAPH_VERSION)
        write_u32(fh, g.vertex_count)
        write_u32(fh, len(edges))
        for u, v, w in edges:
            fh.write(struct.pack("<IId", u, v, w))


def load_graph(path: str) -> Graph:
    with open(path, "rb") as fh:
        check_header(fh, GRAPH_MAGIC, GRAPH_VERSION)
        n = read_u32(fh)
        m = read_u32(fh)
        edges = []
        for _ in range(m):
            u, v, w = struct.unpack("<IId", read_exact(fh, 16))
            edges.append((u, v, w))
    return Graph.from_edges(n, edges)
