# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled annealing and enumeration kernels.

Semantics match ``_pycore`` operation for operation, so both backends return
bit-identical results for identical inputs.
"""
from libc.math cimport exp, fabs

import numpy as np


def anneal_sweeps(
    const long long[::1] indptr,
    const long long[::1] indices,
    const double[::1] data,
    const double[::1] linear,
    signed char[::1] x,
    double[::1] field,
    const double[::1] betas,
    const double[:, ::1] uniforms,
    double energy,
    signed char[::1] best_x,
    double best_energy,
):
    cdef Py_ssize_t dim = x.shape[0]
    cdef Py_ssize_t nsweeps = betas.shape[0]
    cdef Py_ssize_t s, i, k, j
    cdef double d, beta, sign
    with nogil:
        for s in range(nsweeps):
            beta = betas[s]
            for i in range(dim):
                d = linear[i] + field[i]
                if x[i]:
                    d = -d
                if d <= 0.0 or uniforms[s, i] < exp(-beta * d):
                    if x[i]:
                        x[i] = 0
                        sign = -1.0
                    else:
                        x[i] = 1
                        sign = 1.0
                    for k in range(indptr[i], indptr[i + 1]):
                        field[indices[k]] += sign * data[k]
                    energy += d
                    if energy < best_energy:
                        best_energy = energy
                        for j in range(dim):
                            best_x[j] = x[j]
    return energy, best_energy


cdef inline Py_ssize_t _low_bit(long long step) noexcept nogil:
    cdef Py_ssize_t b = 0
    while not (step >> b) & 1:
        b += 1
    return b


cdef inline double _flip(
    const long long[::1] indptr,
    const long long[::1] indices,
    const double[::1] data,
    const double[::1] linear,
    signed char[::1] x,
    double[::1] field,
    Py_ssize_t b,
) noexcept nogil:
    """Flip bit ``b``, update the local field and return the energy change."""
    cdef double d = linear[b] + field[b], sign = 1.0
    cdef Py_ssize_t k
    if x[b]:
        d = -d
        sign = -1.0
    x[b] = 1 - x[b]
    for k in range(indptr[b], indptr[b + 1]):
        field[indices[k]] += sign * data[k]
    return d


def exhaustive_minimum(
    const long long[::1] indptr,
    const long long[::1] indices,
    const double[::1] data,
    const double[::1] linear,
    double tol,
    int chunk_bits=14,
):
    """Scan all assignments; returns (min energy, multiplicity, witness mask).

    The low ``chunk_bits`` bits are tabulated once by a Gray-code walk.  An
    outer Gray walk over the high bits keeps the field they exert on the low
    bits, and an inner Gray walk adds that field in one step per assignment.
    """
    cdef Py_ssize_t dim = linear.shape[0]
    cdef Py_ssize_t nlo = min(dim, chunk_bits)
    cdef long long size_lo = 1LL << nlo, size_hi = 1LL << (dim - nlo)
    cdef long long step, hstep, lo_code = 0, hi_code, witness = 0, count = 0
    cdef Py_ssize_t b
    cdef double e = 0.0, e_hi = 0.0, cross, total, best = 0.0
    cdef bint first = True
    cdef signed char[::1] x = np.zeros(dim, dtype=np.int8)
    cdef double[::1] field = np.zeros(dim, dtype=np.float64)
    cdef double[::1] e_lo = np.zeros(size_lo, dtype=np.float64)
    with nogil:
        for step in range(1, size_lo):
            b = _low_bit(step)
            e += _flip(indptr, indices, data, linear, x, field, b)
            lo_code ^= 1LL << b
            e_lo[lo_code] = e
        # return the low bits to zero so the field only carries high-bit contributions
        for b in range(nlo):
            if x[b]:
                _flip(indptr, indices, data, linear, x, field, b)
        hi_code = 0
        for hstep in range(size_hi):
            if hstep:
                b = nlo + _low_bit(hstep)
                e_hi += _flip(indptr, indices, data, linear, x, field, b)
                hi_code ^= 1LL << (b - nlo)
            lo_code = 0
            cross = 0.0
            for step in range(size_lo):
                if step:
                    b = _low_bit(step)
                    if (lo_code >> b) & 1:
                        cross -= field[b]
                    else:
                        cross += field[b]
                    lo_code ^= 1LL << b
                total = e_hi + e_lo[lo_code] + cross
                if first or total < best - tol:
                    best = total
                    count = 1
                    witness = (hi_code << nlo) | lo_code
                    first = False
                elif fabs(total - best) <= tol:
                    count += 1
    return best, count, witness
