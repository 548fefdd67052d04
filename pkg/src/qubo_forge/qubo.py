"""Block-matrix QUBO models for the Hamiltonian cycle and travelling salesman problems.

Variable ``x[v, p]`` (vertex ``v`` at tour position ``p``) lives at index
``v * n + p`` (0-based), so the vector is the concatenation of one length-``n``
block per vertex.  Matrices keep the non-symmetric layout in which each term
is written once per ordered pair; ``canonical_upper`` folds that into an
upper-triangular form for export.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .errors import ContractError, ParseError
from .graph import Graph, edge_census

HAMILTONIANS = ("Hvp", "Hpv", "HEc", "HW", "HCP", "TSP")


@dataclass(frozen=True, eq=False)
class QuboMatrix:
    """Coefficient matrix over ``n * n`` binary variables plus a constant offset.

    ``coeffs`` is a CSR matrix; treat it as read-only.  Its diagonal holds the
    linear coefficients.
    """

    n: int
    coeffs: sp.csr_array
    offset: float = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        c = sp.csr_array(self.coeffs)
        c.sum_duplicates()
        c.eliminate_zeros()
        if c.shape != (self.n * self.n, self.n * self.n):
            raise ContractError(f"coefficient matrix must be {self.dim}x{self.dim}, got {c.shape}")
        object.__setattr__(self, "coeffs", c)

    @property
    def dim(self):
        return self.n * self.n

    @property
    def is_integral(self):
        return self.coeffs.dtype.kind in "iu" and float(self.offset).is_integer()

    def toarray(self):
        return self.coeffs.toarray()

    def __add__(self, other):
        if not isinstance(other, QuboMatrix):
            return NotImplemented
        if other.n != self.n:
            raise ContractError("cannot add QUBOs over different vertex counts")
        return QuboMatrix(self.n, self.coeffs + other.coeffs, self.offset + other.offset)

    def scaled(self, factor):
        return QuboMatrix(self.n, self.coeffs * factor, self.offset * factor, dict(self.meta))

    def max_abs(self):
        return float(np.abs(self.coeffs.data).max(initial=0))

    def canonical_upper(self):
        """Equivalent upper-triangular matrix: every ``(j, i)`` with ``j > i`` folded into ``(i, j)``."""
        c = self.coeffs
        folded = sp.triu(c, k=0, format="csr") + sp.tril(c, k=-1, format="csr").T
        return QuboMatrix(self.n, sp.csr_array(folded), self.offset, dict(self.meta))

    def entries(self):
        """Nonzero cells as ``(i, j, w)`` sorted by ``(i, j)``; ``w`` is int when integral."""
        coo = self.coeffs.tocoo()
        order = np.lexsort((coo.col, coo.row))
        cast = int if self.coeffs.dtype.kind in "iu" else float
        return [(int(coo.row[k]), int(coo.col[k]), cast(coo.data[k])) for k in order]


@dataclass(frozen=True)
class PenaltyConfig:
    c1: float = 1
    c2: float = 1

    def __post_init__(self):
        if not self.c1 > 0:
            raise ContractError(f"c1 must be positive, got {self.c1}")
        if not self.c2 >= 0:
            raise ContractError(f"c2 must be non-negative, got {self.c2}")


@dataclass(frozen=True)
class ConstraintCensus:
    linear: int
    quadratic: int

    @property
    def total(self):
        return self.linear + self.quadratic

    def as_dict(self):
        return {"linear": self.linear, "quadratic": self.quadratic, "total": self.total}


# ----------------------------------------------------------------------------
# position blocks


def shift_block(n, dtype=np.int64):
    """Cyclic successor matrix: ones at ``(p, p+1)`` and the wraparound ``(n-1, 0)``."""
    rows = np.arange(n)
    return sp.csr_array((np.ones(n, dtype=dtype), (rows, (rows + 1) % n)), shape=(n, n))


def folded_block(n, dtype=np.int64):
    """Successor matrix with the wraparound folded to ``(0, n-1)`` so it stays upper triangular.

    Entries that land on the same cell add up, which keeps ``x^T F x`` equal to
    the cyclic successor sum for every ``n`` (``F_1 = [1]``, ``F_2 = [[0, 2], [0, 0]]``).
    """
    rows = np.arange(n)
    cols = (rows + 1) % n
    lo, hi = np.minimum(rows, cols), np.maximum(rows, cols)
    return sp.csr_array((np.ones(n, dtype=dtype), (lo, hi)), shape=(n, n))


def one_hot_block(n):
    """-1 on the diagonal, 2 strictly above: ``x^T J x + 1 = (1 - sum x)^2`` for binary ``x``."""
    j = np.triu(np.full((n, n), 2, dtype=np.int64), k=1)
    np.fill_diagonal(j, -1)
    return sp.csr_array(j)


def _kron(a, b):
    # scipy drops to float64 when either factor is empty
    dtype = np.result_type(a.dtype, b.dtype)
    return sp.csr_array(sp.kron(a, b, format="csr")).astype(dtype)


def _eye(n):
    return sp.identity(n, dtype=np.int64, format="csr")


def _weight_dtype(g):
    return np.int64 if g.is_integral else np.float64


# ----------------------------------------------------------------------------
# builders


def build_M_vp(n) -> QuboMatrix:
    """Each vertex occupies exactly one position: block diagonal of one-hot blocks."""
    if n < 1:
        raise ContractError("n must be at least 1")
    return QuboMatrix(n, _kron(_eye(n), one_hot_block(n)), n)


def build_M_pv(n) -> QuboMatrix:
    """Each position holds exactly one vertex: ``-I`` diagonal blocks, ``2I`` blocks above."""
    if n < 1:
        raise ContractError("n must be at least 1")
    return QuboMatrix(n, _kron(one_hot_block(n), _eye(n)), n)


def missing_pairs(g: Graph):
    """0/1 matrix marking ordered pairs ``u != v`` without an edge."""
    absent = (g.weights == 0).astype(np.int64)
    np.fill_diagonal(absent, 0)
    return absent


def build_M_Ec(g: Graph) -> QuboMatrix:
    """Penalty for consecutive tour positions joined by a non-edge.

    Diagonal blocks use the folded successor block; each missing ordered pair
    ``(u, v)`` receives a cyclic shift block at ``(u, v)``.
    """
    n = g.n
    coeffs = _kron(_eye(n), folded_block(n)) + _kron(sp.csr_array(missing_pairs(g)), shift_block(n))
    return QuboMatrix(n, coeffs, 0)


def build_M_W(g: Graph, folded: bool = False) -> QuboMatrix:
    """Tour-cost matrix: block ``(u, v)`` is ``w[u, v]`` times a successor block.

    ``folded=True`` uses the upper-triangular folded block instead of the cyclic
    shift.  Both give the same energy on symmetric weights; the folded layout is
    the one the normalised worked example displays.
    """
    if folded and g.directed:
        raise ContractError("the folded layout misattributes wraparound arcs on directed graphs")
    dtype = _weight_dtype(g)
    block = folded_block(g.n, dtype) if folded else shift_block(g.n, dtype)
    return QuboMatrix(g.n, _kron(sp.csr_array(g.weights.astype(dtype)), block), 0)


def build_M_HCP(g: Graph, cfg: PenaltyConfig = PenaltyConfig()) -> QuboMatrix:
    """``c1 * (M_vp + M_pv + M_Ec)`` with offset ``2 n c1``."""
    base = build_M_vp(g.n) + build_M_pv(g.n) + build_M_Ec(g)
    return base if cfg.c1 == 1 else base.scaled(cfg.c1)


def build_M_TSP(
    g: Graph,
    cfg: PenaltyConfig = PenaltyConfig(),
    normalize: bool = False,
    folded: Optional[bool] = None,
) -> QuboMatrix:
    """``M_HCP + c2 * M_W``, or ``M_HCP + c2 * N_W`` with min-max normalised weights.

    ``folded`` selects the weight-block layout; by default the folded layout is
    used for normalised undirected graphs and the cyclic shift everywhere else,
    reproducing both worked examples cell for cell.
    """
    from .normalize import min_max_normalize

    if folded is None:
        folded = normalize and not g.directed
    hcp = build_M_HCP(g, cfg)
    mw = build_M_W(g, folded=folded)
    meta = {}
    if normalize:
        mw, stats = min_max_normalize(mw)
        meta = {"m_min": stats.m_min, "m_max": stats.m_max}
    if cfg.c2 != 1:
        mw = mw.scaled(cfg.c2)
    out = hcp + mw
    return replace(out, meta=meta) if meta else out


# ----------------------------------------------------------------------------
# evaluation and counting


def energy(m: QuboMatrix, x, include_offset: bool = False):
    """``x^T M x`` (plus the offset when asked); exact for integer matrices."""
    x = np.asarray(x)
    if x.shape != (m.dim,):
        raise ContractError(f"assignment has shape {x.shape}, QUBO needs ({m.dim},)")
    if m.coeffs.dtype.kind in "iu":
        xv = x.astype(np.int64)
        val = int(xv @ (m.coeffs @ xv))
        if include_offset:
            off = m.offset
            val = val + (int(off) if float(off).is_integer() else off)
        return val
    xv = x.astype(np.float64)
    val = float(xv @ (m.coeffs @ xv))
    return val + m.offset if include_offset else val


def census(m: QuboMatrix) -> ConstraintCensus:
    """Nonzero diagonal cells (linear) and nonzero off-diagonal cells (quadratic)."""
    coo = m.coeffs.tocoo()
    nz = coo.data != 0
    diag = coo.row == coo.col
    return ConstraintCensus(linear=int(np.count_nonzero(nz & diag)), quadratic=int(np.count_nonzero(nz & ~diag)))


def census_expected(n, m, k, which, complete=False) -> ConstraintCensus:
    """Closed-form term counts for graph with ``m`` present and ``k`` missing ordered pairs.

    ``HEc`` counts only the terms it adds beyond ``Hvp``: zero on a complete
    graph, ``n k`` otherwise.
    """
    if which not in HAMILTONIANS:
        raise ContractError(f"unknown Hamiltonian {which!r}; choose from {HAMILTONIANS}")
    if n < 1 or m < 0 or k < 0 or m + k != n * (n - 1):
        raise ContractError(f"need m + k = n(n-1); got n={n}, m={m}, k={k}")
    if complete and k != 0:
        raise ContractError("a complete graph has no missing edges")
    n2 = n * n
    one_hot = ConstraintCensus(n2, n2 * (n - 1) // 2)
    table = {
        "Hvp": one_hot,
        "Hpv": one_hot,
        "HEc": ConstraintCensus(0, n * k),
        "HW": ConstraintCensus(0, n * m),
        "HCP": ConstraintCensus(n2, n2 * (n - 1) + n * k),
        "TSP": ConstraintCensus(n2, n2 * (n - 1) + n * (m + k)),
    }
    return table[which]


def census_expected_for(g: Graph, which) -> ConstraintCensus:
    ec = edge_census(g)
    return census_expected(ec.n, ec.m, ec.k, which, complete=ec.k == 0)


# ----------------------------------------------------------------------------
# serialisation


def format_number(x):
    """Integers without a decimal point, other floats in shortest round-trip form."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if x.is_integer() and abs(x) < 2**53:
        return str(int(x))
    return repr(x)


def to_qbsolv(m: QuboMatrix, comment: str = "") -> str:
    """qbsolv ``.qubo`` text of the canonical upper form; the offset rides in a comment."""
    up = m.canonical_upper()
    entries = up.entries()
    diag = [(i, j, w) for i, j, w in entries if i == j]
    couplers = [(i, j, w) for i, j, w in entries if i != j]
    lines = []
    if comment:
        lines.extend(f"c {line}" for line in comment.splitlines())
    lines.append(f"c n {m.n}")
    lines.append(f"c offset {format_number(m.offset)}")
    lines.append(f"p qubo 0 {m.dim} {len(diag)} {len(couplers)}")
    lines.extend(f"{i} {j} {format_number(w)}" for i, j, w in diag)
    lines.extend(f"{i} {j} {format_number(w)}" for i, j, w in couplers)
    return "\n".join(lines) + "\n"


def _parse_number(tok):
    try:
        return int(tok)
    except ValueError:
        return float(tok)


def from_qbsolv(text: str) -> QuboMatrix:
    n = None
    offset = 0
    header = None
    rows, cols, vals = [], [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("c"):
            parts = line.split()
            if len(parts) == 3 and parts[1] == "offset":
                offset = _parse_number(parts[2])
            elif len(parts) == 3 and parts[1] == "n":
                n = int(parts[2])
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 6 or parts[1] != "qubo":
                raise ParseError(f"bad problem line {line!r}", lineno)
            header = tuple(int(p) for p in parts[2:])
            continue
        if header is None:
            raise ParseError("entry before the 'p qubo' line", lineno)
        parts = line.split()
        if len(parts) != 3:
            raise ParseError(f"expected 'i j w', got {line!r}", lineno)
        i, j = int(parts[0]), int(parts[1])
        if i > j:
            raise ParseError(f"coupler ({i}, {j}) is not in upper form", lineno)
        rows.append(i)
        cols.append(j)
        vals.append(_parse_number(parts[2]))
    if header is None:
        raise ParseError("missing 'p qubo' line")
    _, max_nodes, n_nodes, n_couplers = header
    n_diag = sum(1 for i, j in zip(rows, cols) if i == j)
    if n_diag != n_nodes or len(rows) - n_diag != n_couplers:
        raise ParseError(f"header announces {n_nodes} nodes / {n_couplers} couplers, file has {n_diag} / {len(rows) - n_diag}")
    if n is None:
        n = math.isqrt(max_nodes)
    if n * n != max_nodes:
        raise ParseError(f"{max_nodes} variables is not a square vertex-by-position layout")
    dtype = np.int64 if all(isinstance(v, int) for v in vals) else np.float64
    coeffs = sp.csr_array((np.array(vals, dtype=dtype), (rows, cols)), shape=(max_nodes, max_nodes))
    return QuboMatrix(n, coeffs, offset)


def to_json(m: QuboMatrix) -> str:
    doc = {"n": m.n, "dim": m.dim, "offset": m.offset, "entries": [list(e) for e in m.entries()]}
    doc.update(m.meta)
    return json.dumps(doc, default=_json_default)


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def from_json(text: str) -> QuboMatrix:
    doc = json.loads(text)
    n, dim = doc["n"], doc["dim"]
    if n * n != dim:
        raise ParseError(f"dim {dim} is not n^2 for n={n}")
    entries = doc["entries"]
    vals = [e[2] for e in entries]
    dtype = np.int64 if all(isinstance(v, int) for v in vals) else np.float64
    coeffs = sp.csr_array(
        (np.array(vals, dtype=dtype), ([e[0] for e in entries], [e[1] for e in entries])), shape=(dim, dim)
    )
    meta = {k: doc[k] for k in ("m_min", "m_max") if k in doc}
    return QuboMatrix(n, coeffs, doc.get("offset", 0), meta)


def to_csv(m: QuboMatrix) -> str:
    lines = ["i,j,w"]
    lines.extend(f"{i},{j},{format_number(w)}" for i, j, w in m.entries())
    return "\n".join(lines) + "\n"
