# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-tick pose kernels.

Numerically bit-identical twin of ``_pure.py``: the build passes
-ffp-contract=off so a*b + c*d rounds once per operation, exactly like the
NumPy fallback.  Keep the two files in lockstep.
"""

from libc.math cimport fmod, M_PI

BACKEND = "native"

cdef double TWO_PI = 2.0 * M_PI


cdef inline double _wrap(double x) nogil:
    cdef double r = fmod(x + M_PI, TWO_PI)
    if r < 0.0:
        r = r + TWO_PI
    return r - M_PI


def add_offsets(double[:, ::1] bones, const long[::1] idx, const double[:, ::1] deltas, double scale):
    """Accumulate scale*deltas into bones rows in order, then wrap angles."""
    cdef Py_ssize_t k = idx.shape[0]
    cdef Py_ssize_t n = bones.shape[0]
    cdef Py_ssize_t i, j
    cdef long b
    for i in range(k):
        b = idx[i]
        for j in range(6):
            bones[b, j] = bones[b, j] + scale * deltas[i, j]
    for i in range(n):
        for j in range(3, 6):
            bones[i, j] = _wrap(bones[i, j])


def wrap_angles(double[:, :] x):
    """Wrap radians into [-pi, pi) in place; accepts strided views."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t m = x.shape[1]
    cdef Py_ssize_t i, j
    for i in range(n):
        for j in range(m):
            x[i, j] = _wrap(x[i, j])


def ema_blend(const double[::1] prev, const double[::1] target, double alpha, double[::1] out):
    """out = alpha*target + (1-alpha)*prev, channel-wise."""
    cdef Py_ssize_t n = prev.shape[0]
    cdef double beta = 1.0 - alpha
    cdef Py_ssize_t i
    for i in range(n):
        out[i] = alpha * target[i] + beta * prev[i]
