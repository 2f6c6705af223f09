"""Orthonormal DCT codec between reservoir weights and coefficient vectors.

The reservoir's unfrozen weights, read in layout order, form a vector of
length M.  Its type-II DCT (orthonormal) concentrates most energy in the
leading coefficients, so a genome of C << M low-frequency coefficients can
represent the weight vector with small reconstruction error.  `decode` maps a
coefficient vector back to a full reservoir matrix (zero-padding the missing
high frequencies); `encode` does the reverse.
"""

import numpy as np
import scipy.fft

from .errors import LayoutError


def dct(s):
    """Orthonormal type-II DCT.  Preserves the l2 norm."""
    s = np.asarray(s, dtype=float)
    if s.size == 0:
        raise ValueError("dct requires a non-empty input")
    return scipy.fft.dct(s, type=2, norm="ortho")


def idct(coeffs):
    """Inverse of `dct` (orthonormal type-III DCT)."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.size == 0:
        raise ValueError("idct requires a non-empty input")
    return scipy.fft.idct(coeffs, type=2, norm="ortho")


def dct_direct(s):
    """O(J^2) evaluation of the orthonormal type-II DCT sum formula.

    Reference path used to cross-check the fast transform; do not call it for
    large J.
    """
    s = np.asarray(s, dtype=float)
    if s.size == 0:
        raise ValueError("dct requires a non-empty input")
    j = s.size
    k = np.arange(j)
    basis = np.cos(np.pi * np.outer(k, 2 * k + 1) / (2 * j)) * np.sqrt(2.0 / j)
    basis[0, :] = 1.0 / np.sqrt(j)
    return basis @ s


def idct_direct(coeffs):
    """O(J^2) evaluation of the inverse (type-III) sum formula."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.size == 0:
        raise ValueError("idct requires a non-empty input")
    j = coeffs.size
    k = np.arange(j)
    basis = np.cos(np.pi * np.outer(k, 2 * k + 1) / (2 * j)) * np.sqrt(2.0 / j)
    basis[0, :] = 1.0 / np.sqrt(j)
    return basis.T @ coeffs


def pad(coeffs, m):
    """Extend a coefficient vector with zeros to length ``m``."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.size > m:
        raise ValueError(f"cannot pad {coeffs.size} coefficients to shorter length {m}")
    if coeffs.size == m:
        return coeffs.copy()
    out = np.zeros(m)
    out[: coeffs.size] = coeffs
    return out


def decode(coeffs, layout):
    """Coefficient vector -> N x N reservoir matrix at the layout positions.

    Entries outside the layout are exactly zero.
    """
    values = idct(pad(coeffs, layout.m))
    return layout.scatter(values)


def encode(w_h, layout, n_coefficients):
    """Reservoir matrix -> leading DCT coefficients of its layout-ordered weights."""
    if n_coefficients < 1 or n_coefficients > layout.m:
        raise ValueError(f"coefficient count must be in [1, {layout.m}], got {n_coefficients}")
    off_layout = np.array(w_h, dtype=float, copy=True)
    off_layout[layout.rows, layout.cols] = 0.0
    if np.any(off_layout != 0.0):
        raise LayoutError("matrix has nonzero entries outside the reservoir layout")
    return dct(layout.gather(w_h))[:n_coefficients]
