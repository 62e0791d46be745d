# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the kernels in ``_pykernels``; same signatures and semantics."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, sqrt, pow

from fusion_forge.errors import NearZeroQueryNorm

cnp.import_array()

DEF COSINE = 0
DEF MAXSIM = 1
DEF KL_CONSENSUS = 0
DEF JENSEN_SHANNON = 1
DEF KL_TARGET = 2
DEF NORM_FLOOR = 1e-12

cdef double LOG_HALF = log(0.5)


cdef inline double _dot(const double[:, ::1] a, Py_ssize_t i, const double[:, ::1] b, Py_ssize_t j, Py_ssize_t d) nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t k
    for k in range(d):
        acc += a[i, k] * b[j, k]
    return acc


cdef inline double _logaddexp(double x, double y) nogil:
    if x >= y:
        return x + log(1.0 + exp(y - x))
    return y + log(1.0 + exp(x - y))


cdef double _query_norm(const double[:, ::1] Z) nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t k
    for k in range(Z.shape[1]):
        acc += Z[0, k] * Z[0, k]
    return sqrt(acc)


cdef void _scores(int kind, const double[:, ::1] Z, const double[:, ::1] tokens,
                  const long[::1] offsets, const double[::1] norms,
                  double[::1] out, long[:, ::1] arg) nogil:
    cdef Py_ssize_t n = offsets.shape[0] - 1
    cdef Py_ssize_t r = Z.shape[0]
    cdef Py_ssize_t d = Z.shape[1]
    cdef Py_ssize_t i, k, j, best_j
    cdef double nz, acc, best, sim
    if kind == COSINE:
        nz = _query_norm(Z)
        for i in range(n):
            out[i] = _dot(tokens, i, Z, 0, d) / (nz * norms[i])
        return
    for i in range(n):
        acc = 0.0
        for k in range(r):
            best_j = offsets[i]
            best = _dot(tokens, best_j, Z, k, d)
            for j in range(offsets[i] + 1, offsets[i + 1]):
                sim = _dot(tokens, j, Z, k, d)
                if sim > best:
                    best = sim
                    best_j = j
            arg[i, k] = best_j
            acc += best
        out[i] = acc


cdef void _log_softmax(const double[::1] s, double[::1] out) nogil:
    cdef Py_ssize_t n = s.shape[0]
    cdef Py_ssize_t i
    cdef double m = s[0]
    cdef double total = 0.0
    for i in range(1, n):
        if s[i] > m:
            m = s[i]
    for i in range(n):
        total += exp(s[i] - m)
    total = log(total)
    for i in range(n):
        out[i] = (s[i] - m) - total


cdef double _divergence(const double[::1] lp1, const double[::1] lp2, int variant, double[::1] gs) nogil:
    cdef Py_ssize_t n = lp1.shape[0]
    cdef Py_ssize_t i
    cdef double p1, p2, la, w, loss = 0.0, wsum = 0.0, half_a = 0.0, half_b = 0.0
    for i in range(n):
        p1 = exp(lp1[i])
        p2 = exp(lp2[i])
        if variant == KL_TARGET:
            loss += p2 * (lp2[i] - lp1[i])
            w = p1 - p2
        else:
            if lp1[i] == lp2[i]:
                la = lp1[i]
            else:
                la = LOG_HALF + _logaddexp(lp1[i], lp2[i])
            if variant == KL_CONSENSUS:
                loss += 0.5 * (p1 + p2) * (la - lp1[i])
                w = 0.5 * p1 * (la - lp1[i]) + 0.5 * (p1 - p2)
            else:
                half_a += p2 * (lp2[i] - la)
                half_b += p1 * (lp1[i] - la)
                w = 0.5 * p1 * (lp1[i] - la)
        gs[i] = w
        wsum += w
    for i in range(n):
        gs[i] = gs[i] - exp(lp1[i]) * wsum
    if variant == JENSEN_SHANNON:
        loss = 0.5 * half_a + 0.5 * half_b
    return loss


cdef double _loss_grad(int kind, const double[:, ::1] Z, const double[:, ::1] tokens,
                       const long[::1] offsets, const double[::1] norms, const double[::1] lp2,
                       int variant, double[::1] s, double[::1] lp1, double[::1] gs,
                       long[:, ::1] arg, double[:, ::1] grad) nogil:
    cdef Py_ssize_t n = offsets.shape[0] - 1
    cdef Py_ssize_t r = Z.shape[0]
    cdef Py_ssize_t d = Z.shape[1]
    cdef Py_ssize_t i, k, c
    cdef double nz, loss, coef, cross = 0.0
    _scores(kind, Z, tokens, offsets, norms, s, arg)
    _log_softmax(s, lp1)
    loss = _divergence(lp1, lp2, variant, gs)
    for k in range(r):
        for c in range(d):
            grad[k, c] = 0.0
    if kind == COSINE:
        nz = _query_norm(Z)
        for i in range(n):
            coef = gs[i] / (nz * norms[i])
            cross += gs[i] * s[i]
            for c in range(d):
                grad[0, c] += coef * tokens[i, c]
        cross = cross / (nz * nz)
        for c in range(d):
            grad[0, c] -= cross * Z[0, c]
    else:
        for k in range(r):
            for i in range(n):
                for c in range(d):
                    grad[k, c] += gs[i] * tokens[arg[i, k], c]
    return loss


def _check_norm(int kind, const double[:, ::1] Z):
    cdef double nz
    if kind == COSINE:
        nz = _query_norm(Z)
        if nz < NORM_FLOOR:
            raise NearZeroQueryNorm(f"query norm {nz:.3e} below {NORM_FLOOR}")


def dot_scores(int kind, Z, tokens, offsets, norms):
    cdef const double[:, ::1] Zv = np.ascontiguousarray(Z, dtype=np.float64)
    cdef const double[:, ::1] tv = np.ascontiguousarray(tokens, dtype=np.float64)
    cdef const long[::1] ov = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef const double[::1] nv = np.ascontiguousarray(norms, dtype=np.float64)
    cdef Py_ssize_t n = ov.shape[0] - 1
    out = np.empty(n, dtype=np.float64)
    arg = np.empty((n if kind == MAXSIM else 0, Zv.shape[0]), dtype=np.int64)
    cdef double[::1] outv = out
    cdef long[:, ::1] argv = arg
    with nogil:
        _scores(kind, Zv, tv, ov, nv, outv, argv)
    return out


def log_softmax(scores):
    cdef const double[::1] sv = np.ascontiguousarray(scores, dtype=np.float64)
    out = np.empty(sv.shape[0], dtype=np.float64)
    cdef double[::1] outv = out
    _log_softmax(sv, outv)
    return out


def divergence_terms(lp1, lp2, int variant):
    cdef const double[::1] a = np.ascontiguousarray(lp1, dtype=np.float64)
    cdef const double[::1] b = np.ascontiguousarray(lp2, dtype=np.float64)
    gs = np.empty(a.shape[0], dtype=np.float64)
    cdef double[::1] gv = gs
    loss = _divergence(a, b, variant, gv)
    return loss, gs


def loss_grad(int kind, Z, tokens, offsets, norms, lp2, int variant):
    cdef const double[:, ::1] Zv = np.ascontiguousarray(Z, dtype=np.float64)
    cdef const double[:, ::1] tv = np.ascontiguousarray(tokens, dtype=np.float64)
    cdef const long[::1] ov = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef const double[::1] nv = np.ascontiguousarray(norms, dtype=np.float64)
    cdef const double[::1] lv = np.ascontiguousarray(lp2, dtype=np.float64)
    _check_norm(kind, Zv)
    cdef Py_ssize_t n = ov.shape[0] - 1
    cdef Py_ssize_t r = Zv.shape[0]
    s = np.empty(n)
    lp1 = np.empty(n)
    gs = np.empty(n)
    arg = np.empty((n, r), dtype=np.int64)
    grad = np.empty((r, Zv.shape[1]))
    cdef double[::1] sv = s, l1 = lp1, gv = gs
    cdef long[:, ::1] av = arg
    cdef double[:, ::1] grv = grad
    cdef double loss
    with nogil:
        loss = _loss_grad(kind, Zv, tv, ov, nv, lv, variant, sv, l1, gv, av, grv)
    return loss, grad


def refine(int kind, Z, tokens, offsets, norms, lp2, int variant, int iterations,
           double lr, double beta1, double beta2, double eps):
    z = np.array(Z, dtype=np.float64, copy=True, order="C")
    cdef double[:, ::1] zv = z
    cdef const double[:, ::1] tv = np.ascontiguousarray(tokens, dtype=np.float64)
    cdef const long[::1] ov = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef const double[::1] nv = np.ascontiguousarray(norms, dtype=np.float64)
    cdef const double[::1] lv = np.ascontiguousarray(lp2, dtype=np.float64)
    cdef Py_ssize_t n = ov.shape[0] - 1
    cdef Py_ssize_t r = zv.shape[0]
    cdef Py_ssize_t d = zv.shape[1]
    cdef double[::1] sv = np.empty(n), l1 = np.empty(n), gv = np.empty(n)
    cdef long[:, ::1] av = np.empty((n, r), dtype=np.int64)
    cdef double[:, ::1] g = np.empty((r, d))
    cdef double[:, ::1] m = np.zeros((r, d))
    cdef double[:, ::1] v = np.zeros((r, d))
    losses = np.empty(iterations)
    cdef double[::1] lossv = losses
    cdef Py_ssize_t t, k, c
    cdef double bc1, bc2, mhat, vhat
    for t in range(1, iterations + 1):
        _check_norm(kind, zv)
        with nogil:
            lossv[t - 1] = _loss_grad(kind, zv, tv, ov, nv, lv, variant, sv, l1, gv, av, g)
            bc1 = 1.0 - pow(beta1, <double>t)
            bc2 = 1.0 - pow(beta2, <double>t)
            for k in range(r):
                for c in range(d):
                    m[k, c] = beta1 * m[k, c] + (1.0 - beta1) * g[k, c]
                    v[k, c] = beta2 * v[k, c] + (1.0 - beta2) * (g[k, c] * g[k, c])
                    mhat = m[k, c] / bc1
                    vhat = v[k, c] / bc2
                    zv[k, c] = zv[k, c] - lr * mhat / (sqrt(vhat) + eps)
    return z, losses
