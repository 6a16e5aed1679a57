# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled matvec kernels for the periodic ANNNI chain.

Arithmetic order matches ``_kernels_py`` exactly so both backends agree
bit for bit (the extension is built with ``-ffp-contract=off``).
"""
import numpy as np

cimport numpy as cnp
from libc.stdint cimport int64_t

cnp.import_array()


def bond_sums(int n_sites):
    """Return (nn, nnn): per basis index, sum of s_n s_{n+1} and s_n s_{n+2}."""
    cdef int64_t dim = (<int64_t>1) << n_sites
    cdef int64_t i
    cdef int n, a, b, c, snn, snnn
    nn_arr = np.empty(dim, dtype=np.int8)
    nnn_arr = np.empty(dim, dtype=np.int8)
    cdef cnp.int8_t[::1] nn = nn_arr
    cdef cnp.int8_t[::1] nnn = nnn_arr
    with nogil:
        for i in range(dim):
            snn = 0
            snnn = 0
            for n in range(n_sites):
                a = (i >> n) & 1
                b = (i >> ((n + 1) % n_sites)) & 1
                c = (i >> ((n + 2) % n_sites)) & 1
                snn += 1 if a == b else -1
                snnn += 1 if a == c else -1
            nn[i] = snn
            nnn[i] = snnn
    return nn_arr, nnn_arr


def matvec(const double[::1] diag, const double[::1] v, double[::1] out,
           int n_sites, double bx):
    """out[i] = diag[i] v[i] - bx * sum_n v[i ^ (1 << n)]."""
    cdef int64_t dim = diag.shape[0]
    cdef int64_t i
    cdef int n
    cdef double s
    if v.shape[0] != dim or out.shape[0] != dim:
        raise ValueError("length mismatch")
    with nogil:
        for i in range(dim):
            s = 0.0
            for n in range(n_sites):
                s = s + v[i ^ ((<int64_t>1) << n)]
            out[i] = diag[i] * v[i] - bx * s
