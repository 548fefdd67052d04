"""Classical solvers: simulated annealing over QUBOs plus exact oracles for checking it.

Annealing restarts are independent.  Restart ``r`` draws from a PCG64 stream
seeded with ``SeedSequence([seed, r])``, so the merged result does not depend
on how many threads run the restarts.
"""
from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .errors import ContractError, LimitExceededError
from .graph import Graph
from .qubo import QuboMatrix, energy
from .tour import Tour, ValidityReport, canonical, check, decode, enumerate_tours, partial_cost, tour_cost

RNG_ALGORITHM = "numpy-PCG64/SeedSequence([seed, restart])"
EXACT_LIMIT = 25
_UNIFORM_BUDGET = 1 << 20  # uniforms drawn per kernel call


@dataclass(frozen=True)
class AnnealSchedule:
    """Geometric cooling schedule; ``t_start=None`` means ten times the largest |coefficient|."""

    t_start: Optional[float] = None
    t_end: float = 0.01
    sweeps: int = 2000
    restarts: int = 20
    seed: int = 42

    def __post_init__(self):
        if not self.t_end > 0:
            raise ContractError("t_end must be positive")
        if self.t_start is not None and not self.t_start > self.t_end:
            raise ContractError("t_start must exceed t_end")
        if self.sweeps < 1 or self.restarts < 1:
            raise ContractError("sweeps and restarts must be at least 1")
        if self.seed < 0:
            raise ContractError("seed must be non-negative")

    def resolved_t_start(self, m: QuboMatrix):
        if self.t_start is not None:
            return float(self.t_start)
        return max(10.0 * m.max_abs(), 10.0 * self.t_end)

    def betas(self, m: QuboMatrix):
        temps = np.geomspace(self.resolved_t_start(m), self.t_end, self.sweeps)
        return 1.0 / temps


@dataclass
class SolveReport:
    best_bits: np.ndarray
    best_energy: float  # x^T M x, offset excluded
    best_hamiltonian: float  # offset included
    variables: int
    wall_time: float  # seconds; not comparable to annealer access times
    schedule: dict
    valid: Optional[bool] = None
    success_rate: Optional[float] = None
    cost: Optional[float] = None
    cost_basis: Optional[str] = None  # "tour", or "invalid" for a partial sum over present edges
    tour: Optional[Tour] = None
    violations: Optional[ValidityReport] = None
    restart_energies: list = field(default_factory=list)
    rng: str = RNG_ALGORITHM

    def to_dict(self, instance="", problem=""):
        viol = self.violations.as_dict() if self.violations is not None else {"vertex": [], "position": [], "edge": []}
        return {
            "instance": instance,
            "problem": problem,
            "variables": self.variables,
            "best_energy": _plain(self.best_energy),
            "best_hamiltonian": _plain(self.best_hamiltonian),
            "cost": _plain(self.cost),
            "cost_basis": self.cost_basis,
            "valid": self.valid,
            "success_rate": self.success_rate,
            "tour": list(self.tour.order) if self.tour is not None else None,
            "wall_time_ms": round(self.wall_time * 1000.0, 3),
            "schedule": self.schedule,
            "seed": self.schedule["seed"],
            "rng": self.rng,
            "violations": viol,
            "best_bits": "".join(str(int(b)) for b in self.best_bits),
        }


def _plain(v):
    if isinstance(v, np.generic):
        return v.item()
    return v


def _thread_count(jobs):
    raw = os.environ.get("QUBO_FORGE_THREADS", "")
    limit = int(raw) if raw.strip() else (os.cpu_count() or 1)
    return max(1, min(jobs, limit))


class _Prepared:
    """CSR arrays of the symmetrised coupling ``Q + Q^T`` (zero diagonal) and the linear terms."""

    def __init__(self, m: QuboMatrix):
        q = m.coeffs.astype(np.float64)
        self.linear = np.ascontiguousarray(q.diagonal(), dtype=np.float64)
        s = sp.csr_array(q + q.T)
        s.setdiag(0)
        s.eliminate_zeros()
        s.sort_indices()
        self.indptr = s.indptr.astype(np.int64)
        self.indices = s.indices.astype(np.int64)
        self.data = np.ascontiguousarray(s.data, dtype=np.float64)
        self.coupling = s
        self.dim = m.dim

    def local_field(self, x):
        return np.ascontiguousarray(self.coupling @ x.astype(np.float64), dtype=np.float64)


def _anneal_restart(m, prep, betas, seed, restart, kernel, verify):
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, restart])))
    dim = prep.dim
    x = rng.integers(0, 2, size=dim, dtype=np.int8)
    field = prep.local_field(x)
    e = float(energy(m, x))
    best_x = x.copy()
    best_e = e
    chunk = max(1, _UNIFORM_BUDGET // max(dim, 1))
    for start in range(0, len(betas), chunk):
        b = np.ascontiguousarray(betas[start : start + chunk])
        u = rng.random((len(b), dim))
        if verify is not None:
            e, best_e = kernel.anneal_sweeps(
                prep.indptr, prep.indices, prep.data, prep.linear, x, field, b, u, e, best_x, best_e, verify=verify
            )
        else:
            e, best_e = kernel.anneal_sweeps(
                prep.indptr, prep.indices, prep.data, prep.linear, x, field, b, u, e, best_x, best_e
            )
    return best_x


def simulated_anneal(
    m: QuboMatrix,
    s: AnnealSchedule = AnnealSchedule(),
    graph: Optional[Graph] = None,
    *,
    backend: Optional[str] = None,
    threads: Optional[int] = None,
    debug: bool = False,
) -> SolveReport:
    """Best assignment over ``s.restarts`` independent Metropolis runs.

    With ``graph`` the report also carries validity, success rate and cost.
    ``debug=True`` runs the pure-Python kernel and re-evaluates the energy from
    scratch after every accepted flip.
    """
    kernels = _kernels.available_backends()
    if debug:
        backend = "python"
    kernel = kernels[backend] if backend else (kernels.get(_kernels.BACKEND) or kernels["python"])
    verify = _make_verifier(m) if debug else None

    t0 = time.perf_counter()
    prep = _Prepared(m)
    betas = s.betas(m)
    jobs = range(s.restarts)
    workers = threads if threads is not None else _thread_count(s.restarts)
    if workers > 1 and verify is None:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda r: _anneal_restart(m, prep, betas, s.seed, r, kernel, None), jobs))
    else:
        results = [_anneal_restart(m, prep, betas, s.seed, r, kernel, verify) for r in jobs]

    energies = [energy(m, bx) for bx in results]
    best = min(range(len(results)), key=lambda r: (energies[r], r))
    bits = results[best]
    schedule = {
        "t_start": s.resolved_t_start(m),
        "t_end": s.t_end,
        "sweeps": s.sweeps,
        "restarts": s.restarts,
        "seed": s.seed,
    }
    report = SolveReport(
        best_bits=bits,
        best_energy=energies[best],
        best_hamiltonian=energy(m, bits, include_offset=True),
        variables=m.dim,
        wall_time=0.0,
        schedule=schedule,
        restart_energies=energies,
    )
    if graph is not None:
        score(report, graph, results)
    report.wall_time = time.perf_counter() - t0
    return report


def score(report: SolveReport, g: Graph, samples=None):
    """Fill the tour-quality fields of ``report`` by checking each restart against ``g``."""
    if g.n * g.n != report.variables:
        raise ContractError(f"graph has {g.n} vertices but the QUBO has {report.variables} variables")
    samples = samples if samples is not None else [report.best_bits]
    report.success_rate = sum(check(x, g).valid for x in samples) / len(samples)
    decoded = decode(report.best_bits, g)
    if isinstance(decoded, Tour):
        report.valid = True
        report.tour = decoded
        report.cost = decoded.cost
        report.cost_basis = "tour"
        report.violations = ValidityReport()
    else:
        report.valid = False
        report.violations = decoded
        report.cost = partial_cost(report.best_bits, g)
        report.cost_basis = "invalid"
    return report


def _make_verifier(m):
    q = m.coeffs.astype(np.float64)
    scale = max(1.0, float(np.abs(q.data).sum()))

    def verify(xs, e):
        x = np.asarray(xs, dtype=np.float64)
        full = float(x @ (q @ x))
        if abs(full - e) > 1e-9 * scale:
            raise AssertionError(f"incremental energy {e} drifted from full evaluation {full}")

    return verify


# ----------------------------------------------------------------------------
# exact oracles


@dataclass(frozen=True)
class GroundState:
    energy: float  # offset excluded
    count: int
    witness: np.ndarray


def exact_ground_state(m: QuboMatrix, limit: int = EXACT_LIMIT, *, backend: Optional[str] = None) -> GroundState:
    """Global minimum of ``x^T M x`` by scanning all ``2**dim`` assignments."""
    if m.dim > limit:
        raise LimitExceededError(f"exhaustive search over {m.dim} variables exceeds the limit of {limit}")
    kernels = _kernels.available_backends()
    kernel = kernels[backend] if backend else (kernels.get(_kernels.BACKEND) or kernels["python"])
    prep = _Prepared(m)
    tol = 1e-9 * max(1.0, float(np.abs(m.coeffs.data).sum()))
    _, count, mask = kernel.exhaustive_minimum(prep.indptr, prep.indices, prep.data, prep.linear, tol)
    witness = ((int(mask) >> np.arange(m.dim)) & 1).astype(np.int8)
    return GroundState(energy=energy(m, witness), count=int(count), witness=witness)


@dataclass(frozen=True)
class TspOptimum:
    tour: Optional[Tour]
    cost: float

    @property
    def feasible(self):
        return self.tour is not None


def oracle_tsp(g: Graph, method: str = "held_karp") -> TspOptimum:
    """Minimum-cost Hamiltonian cycle over present edges; infeasible instances give ``cost=inf``."""
    if method == "permutation":
        if g.n > 12:
            raise LimitExceededError("permutation enumeration is limited to n <= 12")
        return _tsp_by_permutation(g)
    if method == "held_karp":
        if g.n > 20:
            raise LimitExceededError("Held-Karp is limited to n <= 20")
        return _held_karp(g)
    raise ContractError(f"unknown oracle method {method!r}")


def _tsp_by_permutation(g):
    best_cost, best = math.inf, None
    w = g.weights
    for order in enumerate_tours(g.n, g.directed):
        total = 0
        for a, b in zip(order, order[1:] + order[:1]):
            if g.n > 1 and w[a - 1, b - 1] == 0:
                break
            total += w[a - 1, b - 1] if g.n > 1 else 0
        else:
            if total < best_cost:
                best_cost, best = total, order
    if best is None:
        return TspOptimum(None, math.inf)
    return TspOptimum(Tour(canonical(best, g.directed), _plain(best_cost)), _plain(best_cost))


def _held_karp(g):
    """Bitmask dynamic programme over subsets of vertices ``1..n-1``, vectorised by popcount layer."""
    n = g.n
    if n == 1:
        return TspOptimum(Tour((1,), 0), 0)
    integral = g.is_integral
    inf = (1 << 60) if integral else math.inf
    dtype = np.int64 if integral else np.float64
    w = g.weights.astype(dtype)
    w = np.where(w > 0, w, inf)
    np.fill_diagonal(w, inf)
    k = n - 1  # vertices 1..n-1 map to bits 0..k-1
    size = 1 << k
    dp = np.full((size, k), inf, dtype=dtype)
    for j in range(k):
        dp[1 << j, j] = w[0, j + 1]
    masks = np.arange(size)
    popcount = np.zeros(size, dtype=np.int64)
    for j in range(k):
        popcount += (masks >> j) & 1
    inner = w[1:, 1:]  # inner[a, b] = weight from vertex a+1 to b+1
    for layer in range(2, k + 1):
        layer_masks = masks[popcount == layer]
        for j in range(k):
            sel = layer_masks[(layer_masks >> j) & 1 == 1]
            if sel.size == 0:
                continue
            prev = dp[sel ^ (1 << j)]
            cand = (prev + inner[:, j][None, :]).min(axis=1)
            dp[sel, j] = np.minimum(cand, inf) if integral else cand
    full = size - 1
    closing = dp[full] + w[1:, 0]
    last = int(np.argmin(closing))
    cost = closing[last]
    if cost >= inf:
        return TspOptimum(None, math.inf)
    order = [last]
    mask = full
    while mask & (mask - 1):
        j = order[-1]
        prev_mask = mask ^ (1 << j)
        cand = dp[prev_mask] + inner[:, j]
        order.append(int(np.argmin(np.where(((prev_mask >> np.arange(k)) & 1) == 1, cand, inf))))
        mask = prev_mask
    tour = (1,) + tuple(v + 2 for v in reversed(order))
    cost = _plain(cost)
    return TspOptimum(Tour(canonical(tour, g.directed), tour_cost(tour, g)), cost)


def oracle_hcp(g: Graph):
    """``(exists, witness_tour)`` by depth-first backtracking with degree and reachability pruning."""
    n = g.n
    if n > 20:
        raise LimitExceededError("backtracking HCP oracle is limited to n <= 20")
    if n == 1:
        return True, Tour((1,), 0)
    adj = g.weights > 0
    succ = [np.nonzero(adj[u])[0].tolist() for u in range(n)]
    pred = [np.nonzero(adj[:, u])[0].tolist() for u in range(n)]
    if any(not succ[u] or not pred[u] for u in range(n)):
        return False, None
    if not g.directed and n >= 3 and any(len(succ[u]) < 2 for u in range(n)):
        return False, None
    for u in range(n):
        succ[u].sort(key=lambda v: len(succ[v]))
    path = [0]
    on_path = [False] * n
    on_path[0] = True

    def stranded():
        # An unvisited vertex with no unvisited or endpoint predecessor can never be entered.
        end = path[-1]
        for v in range(n):
            if on_path[v]:
                continue
            if not any((not on_path[p]) or p == end for p in pred[v]):
                return True
        return False

    def extend():
        if len(path) == n:
            return adj[path[-1], 0]
        for v in succ[path[-1]]:
            if on_path[v]:
                continue
            path.append(v)
            on_path[v] = True
            if not stranded() and extend():
                return True
            on_path[v] = False
            path.pop()
        return False

    if extend():
        order = tuple(v + 1 for v in path)
        return True, Tour(canonical(order, g.directed), tour_cost(order, g))
    return False, None
