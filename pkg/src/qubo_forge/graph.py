"""Weighted graphs and readers for TSPLIB ``.tsp`` and FHCP-style ``.hcp`` files.

A weight of zero means the edge is absent.  Vertices are 0-based inside
:class:`Graph`; the file formats are 1-based and the conversion happens only
in this module's readers and writers.
"""
from __future__ import annotations

import io
import math
import os
import warnings
from dataclasses import dataclass
from typing import IO, Union

import numpy as np

from .errors import ContractError, ParseError, StructuralError, UnsupportedFormatError

Source = Union[str, bytes, IO]

# Earth radius and pi exactly as fixed by the TSPLIB reference implementation;
# published optima (burma14 = 3323) depend on these truncated constants.
GEO_RADIUS = 6378.388
GEO_PI = 3.141592

_HEADER_KEYS = {
    "NAME",
    "TYPE",
    "COMMENT",
    "DIMENSION",
    "CAPACITY",
    "EDGE_WEIGHT_TYPE",
    "EDGE_WEIGHT_FORMAT",
    "EDGE_DATA_FORMAT",
    "NODE_COORD_TYPE",
    "DISPLAY_DATA_TYPE",
}
_SECTION_KEYS = {
    "NODE_COORD_SECTION",
    "EDGE_WEIGHT_SECTION",
    "EDGE_DATA_SECTION",
    "DISPLAY_DATA_SECTION",
    "FIXED_EDGES_SECTION",
    "TOUR_SECTION",
    "DEPOT_SECTION",
    "DEMAND_SECTION",
}
_SKIPPED_SECTIONS = {"DISPLAY_DATA_SECTION", "FIXED_EDGES_SECTION"}

_MATRIX_FORMATS = ("FULL_MATRIX", "UPPER_ROW", "UPPER_DIAG_ROW", "LOWER_DIAG_ROW")


@dataclass(frozen=True, eq=False)
class Graph:
    """Weighted graph on ``n`` vertices given by its adjacency matrix."""

    n: int
    directed: bool
    weights: np.ndarray
    name: str = ""

    def __post_init__(self):
        w = np.asarray(self.weights)
        if self.n < 1:
            raise ContractError(f"a graph needs at least one vertex, got n={self.n}")
        if w.shape != (self.n, self.n):
            raise ContractError(f"weights must be {self.n}x{self.n}, got {w.shape}")
        if (w < 0).any():
            raise ContractError("weights must be non-negative")
        if np.diagonal(w).any():
            raise ContractError("self-loops are not allowed (diagonal must be 0)")
        if not self.directed and not np.array_equal(w, w.T):
            raise ContractError("an undirected graph needs a symmetric weight matrix")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_matrix(cls, weights, directed=False, name=""):
        """Build a graph, storing integral weights as int64 and anything else as float64."""
        w = np.asarray(weights)
        if w.dtype.kind == "f" and np.all(np.mod(w, 1) == 0) and np.abs(w).max(initial=0) < 2**53:
            w = w.astype(np.int64)
        elif w.dtype.kind in "biu":
            w = w.astype(np.int64)
        else:
            w = w.astype(np.float64)
        return cls(n=w.shape[0], directed=directed, weights=w, name=name)

    @classmethod
    def complete(cls, n, weight=1, name=""):
        w = np.full((n, n), weight, dtype=np.int64 if float(weight).is_integer() else np.float64)
        np.fill_diagonal(w, 0)
        return cls.from_matrix(w, name=name or f"K{n}")

    @classmethod
    def from_edges(cls, n, edges, directed=False, name=""):
        """Unit-weight graph from 0-based ``(u, v)`` pairs."""
        w = np.zeros((n, n), dtype=np.int64)
        for u, v in edges:
            w[u, v] = 1
            if not directed:
                w[v, u] = 1
        return cls(n=n, directed=directed, weights=w, name=name)

    @property
    def is_integral(self):
        return self.weights.dtype.kind in "iu"

    def has_edge(self, u, v):
        return bool(self.weights[u, v] > 0)

    def without_edge(self, u, v):
        """Copy with edge ``(u, v)`` removed (both directions when undirected)."""
        w = self.weights.copy()
        w[u, v] = 0
        if not self.directed:
            w[v, u] = 0
        return Graph(n=self.n, directed=self.directed, weights=w, name=self.name)

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.n == other.n
            and self.directed == other.directed
            and self.name == other.name
            and np.array_equal(self.weights, other.weights)
        )

    def __repr__(self):
        kind = "directed" if self.directed else "undirected"
        return f"Graph(name={self.name!r}, n={self.n}, {kind}, m={edge_census(self).m})"


@dataclass(frozen=True)
class EdgeCensus:
    """Present (``m``) and missing (``k``) ordered vertex pairs, self-loops excluded."""

    n: int
    m: int
    k: int


def edge_census(g: Graph) -> EdgeCensus:
    off = ~np.eye(g.n, dtype=bool)
    m = int(np.count_nonzero((g.weights > 0) & off))
    return EdgeCensus(n=g.n, m=m, k=g.n * (g.n - 1) - m)


# ----------------------------------------------------------------------------
# TSPLIB tokenising


def _read_text(source: Source) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8", errors="replace")
    if isinstance(source, str):
        return source
    data = source.read()
    return data.decode("utf-8", errors="replace") if isinstance(data, bytes) else data


class _Document:
    """Header keywords plus raw section bodies of a TSPLIB-family file."""

    def __init__(self, text):
        self.header = {}
        self.header_lines = {}
        self.sections = {}  # name -> (first body line number, [(lineno, tokens)])
        self._scan(text)

    def _scan(self, text):
        lines = text.splitlines()
        if not any(line.strip() for line in lines):
            raise ParseError("empty input")
        current = None
        for lineno, raw in enumerate(lines, start=1):
            line = raw.strip()
            if not line:
                continue
            head = line.split(":", 1)[0].strip().upper() if ":" in line else line.split()[0].upper()
            if head == "EOF":
                break
            if _is_number(line.split()[0]):
                if current is None:
                    raise ParseError(f"data outside any section: {line!r}", lineno)
                self.sections[current][1].append((lineno, line.split()))
                continue
            if head in _SECTION_KEYS:
                current = head
                self.sections[head] = (lineno + 1, [])
                continue
            if head in _HEADER_KEYS:
                if ":" not in line:
                    raise ParseError(f"keyword {head} has no value", lineno)
                self.header[head] = line.split(":", 1)[1].strip()
                self.header_lines[head] = lineno
                current = None
                continue
            raise ParseError(f"unknown keyword {head!r}", lineno)

    def require(self, key):
        if key not in self.header:
            raise ParseError(f"missing required keyword {key}")
        return self.header[key]

    def dimension(self):
        raw = self.require("DIMENSION")
        try:
            n = int(raw)
        except ValueError:
            raise ParseError(f"DIMENSION is not an integer: {raw!r}", self.header_lines["DIMENSION"]) from None
        if n < 1:
            raise StructuralError(f"DIMENSION must be positive, got {n}", self.header_lines["DIMENSION"])
        return n

    def warn_skipped(self):
        for name in _SKIPPED_SECTIONS & self.sections.keys():
            warnings.warn(f"TSPLIB section {name} is not supported and was skipped", stacklevel=3)


def _is_number(token):
    try:
        float(token)
    except ValueError:
        return False
    return True


# ----------------------------------------------------------------------------
# distance functions


def nint(x):
    """TSPLIB nearest-integer rounding."""
    return int(x + 0.5)


def euc_2d(coords):
    xy = np.asarray(coords, dtype=np.float64)
    n = len(xy)
    w = np.zeros((n, n), dtype=np.int64)
    for i in range(n):
        for j in range(i + 1, n):
            d = nint(math.sqrt((xy[i, 0] - xy[j, 0]) ** 2 + (xy[i, 1] - xy[j, 1]) ** 2))
            w[i, j] = w[j, i] = d
    return w


def _geo_radians(x):
    deg = int(x)
    minutes = x - deg
    return GEO_PI * (deg + 5.0 * minutes / 3.0) / 180.0


def geo(coords):
    """Great-circle distances following the TSPLIB ``GEO`` convention.

    Coordinates are ``DDD.MM`` (degrees and minutes); the result is truncated
    to an integer after adding 1.0, exactly as the reference code does.
    """
    n = len(coords)
    lat = [_geo_radians(float(c[0])) for c in coords]
    lon = [_geo_radians(float(c[1])) for c in coords]
    w = np.zeros((n, n), dtype=np.int64)
    for i in range(n):
        for j in range(i + 1, n):
            q1 = math.cos(lon[i] - lon[j])
            q2 = math.cos(lat[i] - lat[j])
            q3 = math.cos(lat[i] + lat[j])
            arg = min(1.0, max(-1.0, 0.5 * ((1.0 + q1) * q2 - (1.0 - q1) * q3)))
            w[i, j] = w[j, i] = int(GEO_RADIUS * math.acos(arg) + 1.0)
    return w


def _explicit_matrix(values, n, fmt, lineno):
    expected = {
        "FULL_MATRIX": n * n,
        "UPPER_ROW": n * (n - 1) // 2,
        "UPPER_DIAG_ROW": n * (n + 1) // 2,
        "LOWER_DIAG_ROW": n * (n + 1) // 2,
    }[fmt]
    if len(values) != expected:
        raise StructuralError(
            f"EDGE_WEIGHT_SECTION holds {len(values)} values; {fmt} with DIMENSION {n} needs {expected}",
            lineno,
        )
    w = np.zeros((n, n), dtype=values.dtype)
    it = iter(values)
    if fmt == "FULL_MATRIX":
        w[:] = values.reshape(n, n)
    elif fmt == "UPPER_ROW":
        for i in range(n):
            for j in range(i + 1, n):
                w[i, j] = w[j, i] = next(it)
    elif fmt == "UPPER_DIAG_ROW":
        for i in range(n):
            for j in range(i, n):
                w[i, j] = w[j, i] = next(it)
    else:
        for i in range(n):
            for j in range(i + 1):
                w[i, j] = w[j, i] = next(it)
    np.fill_diagonal(w, 0)
    return w


def _numbers(tokens, lineno):
    try:
        vals = [float(t) for t in tokens]
    except ValueError:
        raise ParseError(f"non-numeric token in {tokens!r}", lineno) from None
    arr = np.array(vals, dtype=np.float64)
    if np.all(np.mod(arr, 1) == 0):
        return arr.astype(np.int64)
    return arr


def parse_tsplib(source: Source) -> Graph:
    """Read a TSPLIB ``.tsp`` (or full-matrix ``.atsp``) instance."""
    doc = _Document(_read_text(source))
    problem_type = doc.require("TYPE").split()[0].upper()
    if problem_type not in ("TSP", "ATSP"):
        raise UnsupportedFormatError(f"unsupported TYPE {problem_type!r}", doc.header_lines["TYPE"])
    n = doc.dimension()
    name = doc.header.get("NAME", "")
    ewt = doc.require("EDGE_WEIGHT_TYPE").upper()
    doc.warn_skipped()

    if ewt == "EXPLICIT":
        fmt = doc.require("EDGE_WEIGHT_FORMAT").upper()
        if fmt not in _MATRIX_FORMATS:
            raise UnsupportedFormatError(
                f"unsupported format: EDGE_WEIGHT_FORMAT {fmt}", doc.header_lines["EDGE_WEIGHT_FORMAT"]
            )
        if "EDGE_WEIGHT_SECTION" not in doc.sections:
            raise StructuralError("EXPLICIT weights but no EDGE_WEIGHT_SECTION")
        start, rows = doc.sections["EDGE_WEIGHT_SECTION"]
        tokens = [t for _, toks in rows for t in toks]
        values = _numbers(tokens, start) if tokens else np.zeros(0, dtype=np.int64)
        w = _explicit_matrix(values, n, fmt, start)
        directed = problem_type == "ATSP"
        if not directed and not np.array_equal(w, w.T):
            raise StructuralError("TYPE TSP requires a symmetric weight matrix", start)
    elif ewt in ("EUC_2D", "GEO"):
        if "NODE_COORD_SECTION" not in doc.sections:
            raise StructuralError(f"{ewt} weights but no NODE_COORD_SECTION")
        start, rows = doc.sections["NODE_COORD_SECTION"]
        if len(rows) != n:
            raise StructuralError(f"NODE_COORD_SECTION has {len(rows)} nodes, DIMENSION is {n}", start)
        coords = np.zeros((n, 2))
        seen = set()
        for lineno, toks in rows:
            if len(toks) != 3:
                raise ParseError(f"expected 'index x y', got {' '.join(toks)!r}", lineno)
            idx = int(float(toks[0]))
            if not 1 <= idx <= n or idx in seen:
                raise StructuralError(f"bad or repeated node index {idx}", lineno)
            seen.add(idx)
            coords[idx - 1] = float(toks[1]), float(toks[2])
        w = euc_2d(coords) if ewt == "EUC_2D" else geo(coords)
        directed = False
    else:
        raise UnsupportedFormatError(
            f"unsupported format: EDGE_WEIGHT_TYPE {ewt}", doc.header_lines["EDGE_WEIGHT_TYPE"]
        )
    return Graph.from_matrix(w, directed=directed, name=name)


def parse_hcp(source: Source) -> Graph:
    """Read an FHCP/TSPLIB ``.hcp`` edge list as an undirected unit-weight graph."""
    doc = _Document(_read_text(source))
    problem_type = doc.require("TYPE").split()[0].upper()
    if problem_type != "HCP":
        raise UnsupportedFormatError(f"expected TYPE HCP, got {problem_type!r}", doc.header_lines["TYPE"])
    n = doc.dimension()
    fmt = doc.header.get("EDGE_DATA_FORMAT", "EDGE_LIST").upper()
    if fmt != "EDGE_LIST":
        raise UnsupportedFormatError(f"unsupported format: EDGE_DATA_FORMAT {fmt}")
    if "EDGE_DATA_SECTION" not in doc.sections:
        raise StructuralError("no EDGE_DATA_SECTION")
    doc.warn_skipped()
    start, rows = doc.sections["EDGE_DATA_SECTION"]
    flat = [(lineno, t) for lineno, toks in rows for t in toks]
    w = np.zeros((n, n), dtype=np.int64)
    pos = 0
    while True:
        if pos >= len(flat):
            raise ParseError("EDGE_DATA_SECTION is not terminated by -1", flat[-1][0] if flat else start)
        lineno, tok = flat[pos]
        u = int(tok)
        if u == -1:
            break
        if pos + 1 >= len(flat):
            raise ParseError("dangling vertex at end of EDGE_DATA_SECTION", lineno)
        v = int(flat[pos + 1][1])
        pos += 2
        for x in (u, v):
            if not 1 <= x <= n:
                raise StructuralError(f"vertex {x} outside 1..{n}", lineno)
        if u == v:
            warnings.warn(f"line {lineno}: self-loop on vertex {u} ignored", stacklevel=2)
            continue
        w[u - 1, v - 1] = w[v - 1, u - 1] = 1
    return Graph(n=n, directed=False, weights=w, name=doc.header.get("NAME", ""))


def load_graph(path) -> Graph:
    """Read ``path``, choosing the HCP or TSPLIB reader from its TYPE line."""
    with open(path, "rb") as fh:
        text = _read_text(fh)
    for line in text.splitlines():
        if line.strip().upper().startswith("TYPE"):
            if line.split(":", 1)[-1].strip().upper().startswith("HCP"):
                return parse_hcp(text)
            break
    g = parse_tsplib(text)
    if not g.name:
        object.__setattr__(g, "name", os.path.splitext(os.path.basename(path))[0])
    return g


# ----------------------------------------------------------------------------
# writers


def _fmt_number(x):
    x = float(x)
    return str(int(x)) if x.is_integer() else repr(x)


def format_full_matrix(g: Graph) -> str:
    """Emit ``g`` as an EXPLICIT/FULL_MATRIX TSPLIB file (ATSP when directed)."""
    buf = io.StringIO()
    buf.write(f"NAME : {g.name}\n")
    buf.write(f"TYPE : {'ATSP' if g.directed else 'TSP'}\n")
    buf.write(f"DIMENSION : {g.n}\n")
    buf.write("EDGE_WEIGHT_TYPE : EXPLICIT\n")
    buf.write("EDGE_WEIGHT_FORMAT : FULL_MATRIX\n")
    buf.write("EDGE_WEIGHT_SECTION\n")
    for row in g.weights:
        buf.write(" ".join(_fmt_number(x) for x in row) + "\n")
    buf.write("EOF\n")
    return buf.getvalue()


def format_hcp(g: Graph) -> str:
    if g.directed:
        raise ContractError("the HCP edge-list format is undirected")
    buf = io.StringIO()
    buf.write(f"NAME : {g.name}\nTYPE : HCP\nDIMENSION : {g.n}\n")
    buf.write("EDGE_DATA_FORMAT : EDGE_LIST\nEDGE_DATA_SECTION\n")
    for u, v in zip(*np.nonzero(np.triu(g.weights))):
        buf.write(f"{u + 1} {v + 1}\n")
    buf.write("-1\nEOF\n")
    return buf.getvalue()
