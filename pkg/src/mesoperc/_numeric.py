"""Small exact-arithmetic helpers shared by several modules."""

from __future__ import annotations

import math

import numpy as np


def midpoint_sum(Hv, Pv) -> complex:
    """``sum_k (H_k + H_{k+1}) / 2 * (P_{k+1} - P_k)`` over a closed sample sequence.

    Evaluated as ``1/2 sum (H_k P_{k+1} - H_{k+1} P_k)``; the dropped squared
    terms telescope because the last sample repeats the first. Every real
    product is accumulated by ``math.fsum``, so constant H and H = P give
    exactly zero and H = conj(P) gives the exact shoelace value.
    """
    Hv = np.asarray(Hv, dtype=complex)
    Pv = np.asarray(Pv, dtype=complex)
    hr, hi = Hv.real[:-1], Hv.imag[:-1]
    hr1, hi1 = Hv.real[1:], Hv.imag[1:]
    pr, pi = Pv.real[:-1], Pv.imag[:-1]
    pr1, pi1 = Pv.real[1:], Pv.imag[1:]
    re_terms = np.concatenate([hr * pr1, -(hi * pi1), -(hr1 * pr), hi1 * pi])
    im_terms = np.concatenate([hr * pi1, hi * pr1, -(hr1 * pi), -(hi1 * pr)])
    return complex(0.5 * math.fsum(re_terms.tolist()), 0.5 * math.fsum(im_terms.tolist()))
