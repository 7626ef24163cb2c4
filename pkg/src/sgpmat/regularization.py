"""Density-filter regularization of the design tensor field.

The filtered field is ``S B`` with row-normalized hat-kernel weights
``w_ij = max(0, r0 - |c_i - c_j|) * area_j`` on element centroids, and the
penalty is the area-weighted squared distance between ``B`` and ``S B``:

    J_reg = sum_entries b^H M b,   M = (I - S)^T D (I - S),   D = diag(area)

with the off-diagonal entry counted twice.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .objectives import DesignGradient

_ENTRY_WEIGHT = np.array([1.0, 1.0, 2.0])


@dataclass
class FilterMatrix:
    m: sp.csr_matrix
    r0: float
    s: sp.csr_matrix


def filter_from_points(centroids, areas, r0) -> FilterMatrix:
    """Filter matrix for elements with the given centroids and areas."""
    if r0 <= 0:
        raise ValueError("filter radius must be positive")
    centroids = np.asarray(centroids, dtype=float)
    areas = np.asarray(areas, dtype=float)
    k = len(areas)
    pairs = cKDTree(centroids).query_pairs(r0, output_type="ndarray")
    i = np.concatenate([np.arange(k), pairs[:, 0], pairs[:, 1]])
    j = np.concatenate([np.arange(k), pairs[:, 1], pairs[:, 0]])
    dist = np.linalg.norm(centroids[i] - centroids[j], axis=1)
    w = np.maximum(0.0, r0 - dist) * areas[j]
    s = sp.coo_matrix((w, (i, j)), shape=(k, k)).tocsr()
    s = sp.diags(1.0 / np.asarray(s.sum(axis=1)).ravel()) @ s
    if k > 1 and s.nnz == k:
        warnings.warn(f"filter radius {r0:g} is below the centroid spacing; regularization vanishes",
                      RuntimeWarning, stacklevel=2)
    ims = sp.identity(k, format="csr") - s
    m = (ims.T @ sp.diags(areas) @ ims).tocsr()
    m.eliminate_zeros()
    return FilterMatrix(m, float(r0), s.tocsr())


def build_filter_matrix(mesh, r0) -> FilterMatrix:
    """Filter matrix over the design triangles of ``mesh``."""
    k = mesh.n_design
    return filter_from_points(mesh.centroids[:k], mesh.areas[:k], r0)


def j_reg(tensors, filt: FilterMatrix) -> float:
    b = np.asarray(tensors, dtype=complex)
    mb = filt.m @ b
    return float(np.real(np.sum(np.conj(b) * mb, axis=0)) @ _ENTRY_WEIGHT)


def j_reg_gradient(tensors, filt: FilterMatrix) -> DesignGradient:
    """Gradient ``2 M B`` split into real and imaginary parts."""
    mb = filt.m @ np.asarray(tensors, dtype=complex)
    return DesignGradient(2.0 * mb.real, 2.0 * mb.imag)
