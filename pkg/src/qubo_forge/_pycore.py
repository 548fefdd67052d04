"""Pure-Python kernels, used when the compiled ``_core`` extension is unavailable.

``anneal_sweeps`` mirrors the compiled loop step for step (same float
operations in the same order), so the two backends agree bit for bit.
"""
import math

import numpy as np


def anneal_sweeps(indptr, indices, data, linear, x, field, betas, uniforms, energy, best_x, best_energy, verify=None):
    """Metropolis single-flip sweeps; mutates ``x``, ``field`` and ``best_x`` in place.

    ``verify(x, energy)`` is called after every accepted flip when given.
    """
    ptr = indptr.tolist()
    idx = indices.tolist()
    val = data.tolist()
    lin = linear.tolist()
    xs = x.tolist()
    fl = field.tolist()
    dim = len(xs)
    exp = math.exp
    for beta, row in zip(betas.tolist(), uniforms.tolist()):
        for i in range(dim):
            d = lin[i] + fl[i]
            if xs[i]:
                d = -d
            if d <= 0.0 or row[i] < exp(-beta * d):
                if xs[i]:
                    xs[i] = 0
                    sign = -1.0
                else:
                    xs[i] = 1
                    sign = 1.0
                for k in range(ptr[i], ptr[i + 1]):
                    fl[idx[k]] += sign * val[k]
                energy += d
                if verify is not None:
                    verify(xs, energy)
                if energy < best_energy:
                    best_energy = energy
                    best_x[:] = xs
    x[:] = xs
    field[:] = fl
    return energy, best_energy


def exhaustive_minimum(indptr, indices, data, linear, tol, chunk_bits=14):
    """Minimum energy over all ``2**dim`` assignments, its multiplicity and a witness mask.

    Splits each assignment into low and high bits.  The energy of every low
    pattern is tabulated once; each high pattern then adds its own energy and
    one matrix-vector product for the cross terms.
    """
    import scipy.sparse as sp

    dim = len(linear)
    coupling = sp.csr_array((data, indices, indptr), shape=(dim, dim))
    upper = sp.triu(coupling, k=1).toarray()
    b = min(dim, chunk_bits)
    lo = np.arange(1 << b, dtype=np.int64)
    lo_bits = ((lo[:, None] >> np.arange(b)) & 1).astype(np.float64)
    e_lo = lo_bits @ linear[:b] + ((lo_bits @ upper[:b, :b]) * lo_bits).sum(axis=1)
    cross = upper[:b, b:]
    lin_hi, up_hi = linear[b:], upper[b:, b:]
    best, count, witness = math.inf, 0, 0
    for hi in range(1 << (dim - b)):
        hb = ((hi >> np.arange(dim - b)) & 1).astype(np.float64)
        e = e_lo + (lo_bits @ (cross @ hb) + (hb @ lin_hi + hb @ up_hi @ hb))
        m = e.min()
        if m < best - tol:
            best = m
            count = 0
            witness = (hi << b) | int(np.argmin(e))
        if m <= best + tol:
            count += int(np.count_nonzero(np.abs(e - best) <= tol))
    return float(best), count, witness
