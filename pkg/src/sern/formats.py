"""Graph serialization: GraphML, plain edge lists, and a packed binary form.

All writers take a binary stream so the CLI can point them at a file or
at stdout.  Floats are stored as float32 and printed with the shortest
text that parses back to the identical float32, so text round trips are
value-exact.  A writer that fails mid-stream leaves a partial file; the
caller owns cleanup.

Binary layout (little endian):

    magic   4 bytes  b"SERN"
    version u16      currently 1
    flags   u16      bit 0 set when per-edge distances are present
    n       u64
    e       u64
    x       f32 * n
    y       f32 * n
    from    u32 * e
    to      u32 * e
    d       f32 * e  only when bit 0 of flags is set
"""
from __future__ import annotations

import struct
import xml.etree.ElementTree as ET
from typing import BinaryIO, Optional, Tuple

import numpy as np

from .edgegen import EdgeStore
from .errors import IntegrityError
from .nodegen import NodeStore

MAGIC = b"SERN"
BINARY_VERSION = 1
FLAG_DISTANCES = 0x0001
_HEADER = struct.Struct("<4sHHQQ")

GRAPHML_NS = "http://graphml.graphdrawing.org/xmlns"
_XSI = "http://www.w3.org/2001/XMLSchema-instance"
_SCHEMA = ("http://graphml.graphdrawing.org/xmlns "
           "http://graphml.graphdrawing.org/xmlns/1.0/graphml.xsd")

FORMATS = ("graphml", "edgelist", "binary")
_CHUNK_LINES = 65536


def f32_str(v) -> str:
    """Shortest decimal text that round-trips to the same float32."""
    return str(np.float32(v))


def _single_bucket_store(x: np.ndarray, y: np.ndarray) -> NodeStore:
    n = x.shape[0]
    return NodeStore(
        x=np.ascontiguousarray(x, dtype=np.float32),
        y=np.ascontiguousarray(y, dtype=np.float32),
        counts=np.array([n], dtype=np.int64),
        offsets=np.array([0], dtype=np.int64),
    )


def _write_text(dest: BinaryIO, lines) -> None:
    buf = []
    for line in lines:
        buf.append(line)
        if len(buf) >= _CHUNK_LINES:
            dest.write("".join(buf).encode("ascii"))
            buf.clear()
    if buf:
        dest.write("".join(buf).encode("ascii"))


# ---------------------------------------------------------------- GraphML

def write_graphml(nodes: NodeStore, edges: EdgeStore,
                  include_distances: bool, dest: BinaryIO) -> None:
    include_distances = include_distances and edges.dist is not None

    def lines():
        yield '<?xml version="1.0" encoding="UTF-8"?>\n'
        yield (f'<graphml xmlns="{GRAPHML_NS}" xmlns:xsi="{_XSI}" '
               f'xsi:schemaLocation="{_SCHEMA}">\n')
        yield '  <key id="x" for="node" attr.name="x" attr.type="float"/>\n'
        yield '  <key id="y" for="node" attr.name="y" attr.type="float"/>\n'
        if include_distances:
            yield '  <key id="d" for="edge" attr.name="d" attr.type="float"/>\n'
        yield '  <graph id="G" edgedefault="undirected">\n'
        x, y = nodes.x, nodes.y
        for k in range(nodes.n):
            yield (f'    <node id="n{k}"><data key="x">{str(x[k])}</data>'
                   f'<data key="y">{str(y[k])}</data></node>\n')
        fr, to, dd = edges.from_ids, edges.to_ids, edges.dist
        if include_distances:
            for k in range(edges.e):
                yield (f'    <edge source="n{fr[k]}" target="n{to[k]}">'
                       f'<data key="d">{str(dd[k])}</data></edge>\n')
        else:
            for k in range(edges.e):
                yield f'    <edge source="n{fr[k]}" target="n{to[k]}"/>\n'
        yield '  </graph>\n'
        yield '</graphml>\n'

    _write_text(dest, lines())


def read_graphml(src: BinaryIO) -> Tuple[NodeStore, EdgeStore]:
    tree = ET.parse(src)
    root = tree.getroot()
    ns = {"g": GRAPHML_NS}
    graph = root.find("g:graph", ns)
    if graph is None:
        raise IntegrityError("graphml input has no <graph> element")
    node_elems = graph.findall("g:node", ns)
    n = len(node_elems)
    x = np.empty(n, dtype=np.float32)
    y = np.empty(n, dtype=np.float32)
    for elem in node_elems:
        ident = elem.get("id", "")
        if not ident.startswith("n"):
            raise IntegrityError(f"unexpected node id {ident!r}")
        k = int(ident[1:])
        if not 0 <= k < n:
            raise IntegrityError(f"node id {ident!r} out of range")
        vals = {d.get("key"): d.text for d in elem.findall("g:data", ns)}
        x[k] = np.float32(vals["x"])
        y[k] = np.float32(vals["y"])
    edge_elems = graph.findall("g:edge", ns)
    e = len(edge_elems)
    fr = np.empty(e, dtype=np.uint32)
    to = np.empty(e, dtype=np.uint32)
    dist = None
    for k, elem in enumerate(edge_elems):
        fr[k] = int(elem.get("source")[1:])
        to[k] = int(elem.get("target")[1:])
        data = elem.find("g:data", ns)
        if data is not None and data.get("key") == "d":
            if dist is None:
                dist = np.zeros(e, dtype=np.float32)
            dist[k] = np.float32(data.text)
    return _single_bucket_store(x, y), EdgeStore(from_ids=fr, to_ids=to, dist=dist)


# --------------------------------------------------------------- edgelist

def write_edgelist(nodes: NodeStore, edges: EdgeStore,
                   include_distances: bool, dest: BinaryIO) -> None:
    include_distances = include_distances and edges.dist is not None

    def lines():
        yield f"# nodes {nodes.n}\n"
        yield f"# edges {edges.e}\n"
        x, y = nodes.x, nodes.y
        for k in range(nodes.n):
            yield f"{str(x[k])} {str(y[k])}\n"
        fr, to, dd = edges.from_ids, edges.to_ids, edges.dist
        if include_distances:
            for k in range(edges.e):
                yield f"{fr[k]} {to[k]} {str(dd[k])}\n"
        else:
            for k in range(edges.e):
                yield f"{fr[k]} {to[k]}\n"

    _write_text(dest, lines())


def read_edgelist(src: BinaryIO) -> Tuple[NodeStore, EdgeStore]:
    def next_line():
        while True:
            raw = src.readline()
            if not raw:
                raise IntegrityError("edge list ended early")
            line = raw.decode("ascii").strip()
            if line:
                return line

    head_n = next_line()
    head_e = next_line()
    if not head_n.startswith("# nodes ") or not head_e.startswith("# edges "):
        raise IntegrityError("edge list is missing its header lines")
    n = int(head_n[len("# nodes "):])
    e = int(head_e[len("# edges "):])
    x = np.empty(n, dtype=np.float32)
    y = np.empty(n, dtype=np.float32)
    for k in range(n):
        a, b = next_line().split()
        x[k] = np.float32(a)
        y[k] = np.float32(b)
    fr = np.empty(e, dtype=np.uint32)
    to = np.empty(e, dtype=np.uint32)
    dist = None
    for k in range(e):
        parts = next_line().split()
        fr[k] = int(parts[0])
        to[k] = int(parts[1])
        if len(parts) > 2:
            if dist is None:
                dist = np.zeros(e, dtype=np.float32)
            dist[k] = np.float32(parts[2])
    return _single_bucket_store(x, y), EdgeStore(from_ids=fr, to_ids=to, dist=dist)


# ----------------------------------------------------------------- binary

def write_binary(nodes: NodeStore, edges: EdgeStore,
                 include_distances: bool, dest: BinaryIO) -> None:
    include_distances = include_distances and edges.dist is not None
    flags = FLAG_DISTANCES if include_distances else 0
    dest.write(_HEADER.pack(MAGIC, BINARY_VERSION, flags, nodes.n, edges.e))
    dest.write(np.ascontiguousarray(nodes.x, dtype="<f4").tobytes())
    dest.write(np.ascontiguousarray(nodes.y, dtype="<f4").tobytes())
    dest.write(np.ascontiguousarray(edges.from_ids, dtype="<u4").tobytes())
    dest.write(np.ascontiguousarray(edges.to_ids, dtype="<u4").tobytes())
    if include_distances:
        dest.write(np.ascontiguousarray(edges.dist, dtype="<f4").tobytes())


def _read_exact(src: BinaryIO, count: int) -> bytes:
    data = src.read(count)
    while len(data) < count:
        more = src.read(count - len(data))
        if not more:
            raise IntegrityError("binary input ended before the declared payload")
        data += more
    return data


def read_binary(src: BinaryIO) -> Tuple[NodeStore, EdgeStore]:
    magic, version, flags, n, e = _HEADER.unpack(_read_exact(src, _HEADER.size))
    if magic != MAGIC:
        raise IntegrityError("binary input does not start with the SERN magic")
    if version != BINARY_VERSION:
        raise IntegrityError(f"unsupported binary version {version}")
    x = np.frombuffer(_read_exact(src, 4 * n), dtype="<f4").astype(np.float32)
    y = np.frombuffer(_read_exact(src, 4 * n), dtype="<f4").astype(np.float32)
    fr = np.frombuffer(_read_exact(src, 4 * e), dtype="<u4").astype(np.uint32)
    to = np.frombuffer(_read_exact(src, 4 * e), dtype="<u4").astype(np.uint32)
    dist = None
    if flags & FLAG_DISTANCES:
        dist = np.frombuffer(_read_exact(src, 4 * e), dtype="<f4").astype(np.float32)
    return _single_bucket_store(x, y), EdgeStore(from_ids=fr, to_ids=to, dist=dist)


_WRITERS = {"graphml": write_graphml, "edgelist": write_edgelist,
            "binary": write_binary}
_READERS = {"graphml": read_graphml, "edgelist": read_edgelist,
            "binary": read_binary}


def write_graph(fmt: str, nodes: NodeStore, edges: EdgeStore,
                include_distances: bool, dest: BinaryIO) -> None:
    try:
        writer = _WRITERS[fmt]
    except KeyError:
        raise IntegrityError(f"unknown graph format {fmt!r}") from None
    writer(nodes, edges, include_distances, dest)


def read_graph(fmt: str, src: BinaryIO) -> Tuple[NodeStore, EdgeStore]:
    try:
        reader = _READERS[fmt]
    except KeyError:
        raise IntegrityError(f"unknown graph format {fmt!r}") from None
    return reader(src)
