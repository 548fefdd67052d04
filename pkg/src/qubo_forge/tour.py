"""Tours, their bit-vector encoding, and constraint checking of solver output.

Tours are reported with 1-based vertex labels, matching the benchmark files.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import ContractError, EdgeViolationError
from .graph import Graph


@dataclass(frozen=True)
class Tour:
    order: tuple
    cost: Optional[float] = None

    def __len__(self):
        return len(self.order)


@dataclass(frozen=True)
class ValidityReport:
    vertex_violations: tuple = ()
    position_violations: tuple = ()
    edge_violations: tuple = ()

    @property
    def valid(self):
        return not (self.vertex_violations or self.position_violations or self.edge_violations)

    @property
    def count(self):
        return len(self.vertex_violations) + len(self.position_violations) + len(self.edge_violations)

    def as_dict(self):
        return {
            "vertex": list(self.vertex_violations),
            "position": list(self.position_violations),
            "edge": [list(e) for e in self.edge_violations],
        }


def _check_permutation(order, n):
    if sorted(order) != list(range(1, n + 1)):
        raise ContractError(f"{order!r} is not a permutation of 1..{n}")


def canonical(order, directed=False):
    """Rotate to start at vertex 1; undirected tours also pick the direction with the smaller second vertex."""
    order = tuple(int(v) for v in order)
    i = order.index(1)
    rot = order[i:] + order[:i]
    if not directed and len(rot) > 2:
        rev = (rot[0],) + tuple(reversed(rot[1:]))
        if rev[1] < rot[1]:
            rot = rev
    return rot


def tour_cost(t, g: Graph):
    """Cyclic weight sum of ``t`` (a :class:`Tour` or a 1-based vertex sequence)."""
    order = t.order if isinstance(t, Tour) else tuple(t)
    _check_permutation(order, g.n)
    total = 0
    if g.n == 1:
        return total
    for a, b in zip(order, order[1:] + order[:1]):
        w = g.weights[a - 1, b - 1]
        if w == 0:
            raise EdgeViolationError(f"tour uses missing edge ({a}, {b})")
        total += w
    return total.item() if hasattr(total, "item") else total


def encode(t, n) -> np.ndarray:
    """Bit vector with ``x[(v-1)*n + (p-1)] = 1`` for the vertex ``v`` at position ``p``."""
    order = t.order if isinstance(t, Tour) else tuple(t)
    _check_permutation(order, n)
    bits = np.zeros(n * n, dtype=np.int8)
    for p, v in enumerate(order):
        bits[(v - 1) * n + p] = 1
    return bits


def check(x, g: Graph) -> ValidityReport:
    """List every violated integrity constraint of assignment ``x`` on ``g``."""
    n = g.n
    x = np.asarray(x)
    if x.shape != (n * n,):
        raise ContractError(f"assignment has shape {x.shape}, expected ({n * n},)")
    grid = x.reshape(n, n).astype(bool)  # [vertex, position]
    bad_vertices = tuple(int(v) + 1 for v in np.nonzero(grid.sum(axis=1) != 1)[0])
    bad_positions = tuple(int(p) + 1 for p in np.nonzero(grid.sum(axis=0) != 1)[0])
    bad_edges = set()
    if n > 1:
        for p in range(n):
            nxt = (p + 1) % n
            for u in np.nonzero(grid[:, p])[0]:
                for v in np.nonzero(grid[:, nxt])[0]:
                    if u != v and g.weights[u, v] == 0:
                        bad_edges.add((int(u) + 1, int(v) + 1))
    return ValidityReport(bad_vertices, bad_positions, tuple(sorted(bad_edges)))


def decode(x, g: Graph) -> Union[Tour, ValidityReport]:
    """Tour encoded by ``x`` if it satisfies every constraint, else the violations."""
    report = check(x, g)
    if not report.valid:
        return report
    grid = np.asarray(x).reshape(g.n, g.n)
    order = tuple(int(np.argmax(grid[:, p])) + 1 for p in range(g.n))
    order = canonical(order, g.directed)
    return Tour(order, tour_cost(order, g))


def partial_cost(x, g: Graph):
    """Weight of every consecutive pair joined by a present edge; used to score invalid output."""
    n = g.n
    grid = np.asarray(x).reshape(n, n).astype(np.int64)
    if n == 1:
        return 0
    succ = np.roll(grid, -1, axis=1)  # succ[v, p] = x[v, p + 1]
    return np.einsum("up,uv,vp->", grid, g.weights, succ).item()


def enumerate_tours(n, directed=False):
    """Every distinct Hamiltonian cycle on ``n`` labelled vertices, in canonical form."""
    if n <= 2:
        yield tuple(range(1, n + 1))
        return
    for rest in itertools.permutations(range(2, n + 1)):
        if not directed and rest[0] > rest[-1]:
            continue
        yield (1,) + rest


def count_tours(n, directed=False):
    if n <= 2:
        return 1
    return math.factorial(n - 1) // (1 if directed else 2)
