"""Min-max rescaling of the tour-cost matrix into [0, 1]."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DegenerateNormalizationError
from .qubo import QuboMatrix


@dataclass(frozen=True)
class NormalizationStats:
    m_min: float
    m_max: float


def matrix_range(m: QuboMatrix):
    """Smallest and largest cell value over the whole ``dim x dim`` matrix, zeros included."""
    data = m.coeffs.data
    values = data.tolist()
    if m.coeffs.nnz < m.dim * m.dim:
        values.append(0)
    return min(values), max(values)


def min_max_normalize(mw: QuboMatrix):
    """Map every cell to ``(cell - min) / (max - min)``.

    Min and max run over all cells, so any matrix with an empty cell has
    ``min == 0`` and the map reduces to division by the largest weight.
    Returns the normalised matrix and the range used.
    """
    lo, hi = matrix_range(mw)
    if lo == hi:
        raise DegenerateNormalizationError(f"all entries equal {lo}; min-max normalisation divides by zero")
    span = float(hi - lo)
    if lo == 0:
        coeffs = mw.coeffs.astype(np.float64) / span
    else:
        # Empty cells map to a nonzero value, so the result is dense.
        coeffs = sp.csr_array((mw.coeffs.toarray().astype(np.float64) - lo) / span)
    return QuboMatrix(mw.n, coeffs, mw.offset), NormalizationStats(m_min=lo, m_max=hi)
