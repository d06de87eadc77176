# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled RK4 driver for the five consensus protocols.

Scalar functions arrive as (code, 4 params) rows; piecewise-linear ones
index into shared knot pools. Codes match ``functions.FN_*``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, expm1, fabs, isfinite
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef enum:
    FN_CONSTANT = 0
    FN_LINEAR = 1
    FN_EXPSGN = 2
    FN_RAS = 3
    FN_BUMP = 4
    FN_PWL = 5

cdef enum:
    K_FIRST = 0
    K_SECOND = 1
    K_DAMPED = 2
    K_PI_SINGLE = 3
    K_PI_DOUBLE = 4


cdef inline double fn_eval(int code, const double* p, const double* kx, const double* ky,
                           double y) noexcept nogil:
    cdef int off, cnt, lo, hi, mid
    cdef double t, u
    if code == FN_CONSTANT:
        return p[0]
    elif code == FN_LINEAR:
        return p[0] * y
    elif code == FN_EXPSGN:
        if y > 0:
            return p[0] * expm1(y)
        elif y < 0:
            return -p[0] * expm1(-y)
        return 0.0
    elif code == FN_RAS:
        return 1.0 / (fabs(y) + p[0])
    elif code == FN_BUMP:
        t = (y - p[2]) / p[3]
        return 1.0 / (p[0] + p[1] * exp(-t * t))
    else:
        off = <int>p[0]
        cnt = <int>p[1]
        if y <= kx[off]:
            return ky[off]
        if y >= kx[off + cnt - 1]:
            return ky[off + cnt - 1]
        lo = off
        hi = off + cnt - 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if kx[mid] <= y:
                lo = mid
            else:
                hi = mid
        u = (y - kx[lo]) / (kx[hi] - kx[lo])
        return ky[lo] + u * (ky[hi] - ky[lo])


cdef struct Model:
    int kind
    int n
    int m
    const cnp.intp_t* tail
    const cnp.intp_t* head
    const double* w
    const int* a_code
    const double* a_par
    const int* b_code
    const double* b_par
    const int* g_code
    const double* g_par
    const double* kx
    const double* ky
    double pa
    double pb
    double pgamma
    double pdelta
    const double* d
    const double* anchor
    double* flow_a  # n scratch
    double* flow_b  # n scratch


cdef inline void edge_sum(const Model* M, const int* code, const double* par,
                          const double* x, double* out) noexcept nogil:
    """out_i = sum over edges of f_e(x_i - x_j) with the head getting -f_e."""
    cdef int e, i, j
    cdef double f
    for i in range(M.n):
        out[i] = 0.0
    for e in range(M.m):
        i = M.tail[e]
        j = M.head[e]
        f = fn_eval(code[e], &par[4 * e], M.kx, M.ky, x[i] - x[j])
        out[i] += f
        out[j] -= f


cdef inline void lap_mul(const Model* M, const double* x, double* out) noexcept nogil:
    cdef int e, i, j
    cdef double f
    for i in range(M.n):
        out[i] = 0.0
    for e in range(M.m):
        i = M.tail[e]
        j = M.head[e]
        f = M.w[e] * (x[i] - x[j])
        out[i] += f
        out[j] -= f


cdef void rhs(const Model* M, const double* y, double* dy) noexcept nogil:
    cdef int n = M.n
    cdef int i
    cdef const double* x
    cdef const double* v
    cdef const double* z
    if M.kind == K_FIRST:
        edge_sum(M, M.a_code, M.a_par, y, M.flow_a)
        for i in range(n):
            dy[i] = -fn_eval(M.g_code[i], &M.g_par[4 * i], M.kx, M.ky, y[i]) * M.flow_a[i]
    elif M.kind == K_SECOND:
        x = y
        v = y + n
        edge_sum(M, M.a_code, M.a_par, x, M.flow_a)
        edge_sum(M, M.b_code, M.b_par, v, M.flow_b)
        for i in range(n):
            dy[i] = v[i]
            dy[n + i] = -fn_eval(M.g_code[i], &M.g_par[4 * i], M.kx, M.ky, v[i]) * (M.flow_a[i] + M.flow_b[i])
    elif M.kind == K_DAMPED:
        x = y
        v = y + n
        edge_sum(M, M.a_code, M.a_par, x, M.flow_a)
        for i in range(n):
            dy[i] = v[i]
            dy[n + i] = -fn_eval(M.g_code[i], &M.g_par[4 * i], M.kx, M.ky, x[i]) * v[i] - M.flow_a[i]
    elif M.kind == K_PI_SINGLE:
        z = y
        x = y + n
        lap_mul(M, x, M.flow_a)
        lap_mul(M, z, M.flow_b)
        for i in range(n):
            dy[i] = x[i]
            dy[n + i] = M.d[i] - M.pb * M.flow_a[i] - M.pa * M.flow_b[i] - M.pdelta * (x[i] - M.anchor[i])
    else:
        z = y
        x = y + n
        v = y + 2 * n
        lap_mul(M, x, M.flow_a)
        lap_mul(M, z, M.flow_b)
        for i in range(n):
            dy[i] = x[i]
            dy[n + i] = v[i]
            dy[2 * n + i] = (M.d[i] - M.pb * M.flow_a[i] - M.pa * M.flow_b[i] - M.pgamma * v[i]
                             - M.pdelta * (x[i] - M.anchor[i]))


def integrate_protocol(int kind, int n,
                       cnp.intp_t[::1] tail, cnp.intp_t[::1] head, double[::1] weights,
                       int[::1] a_code, double[:, ::1] a_par,
                       int[::1] b_code, double[:, ::1] b_par,
                       int[::1] g_code, double[:, ::1] g_par,
                       double[::1] kx, double[::1] ky,
                       double pa, double pb, double pgamma, double pdelta,
                       double[::1] d, double[::1] anchor,
                       double[::1] y0, double h, long n_steps, long record_every, double cap):
    """Fixed-step RK4. Returns (samples, sample_steps, status, fail_step).

    status: 0 completed, 1 diverged (state above ``cap``), 2 non-finite.
    """
    cdef int dim = y0.shape[0]
    cdef long n_rec = n_steps // record_every + 2
    samples_np = np.empty((n_rec, dim))
    steps_np = np.empty(n_rec, dtype=np.int64)
    cdef double[:, ::1] samples = samples_np
    cdef long long[::1] rec_steps = steps_np
    cdef double* buf = <double*>malloc(sizeof(double) * (7 * dim + 2 * n + 1))
    if buf == NULL:
        raise MemoryError()
    cdef double* y = buf
    cdef double* k1 = buf + dim
    cdef double* k2 = buf + 2 * dim
    cdef double* k3 = buf + 3 * dim
    cdef double* k4 = buf + 4 * dim
    cdef double* tmp = buf + 5 * dim
    cdef double* ynew = buf + 6 * dim
    cdef Model M
    cdef double dummy = 0.0
    cdef int dummy_code = 0
    M.kind = kind
    M.n = n
    M.m = tail.shape[0]
    M.tail = &tail[0] if M.m else NULL
    M.head = &head[0] if M.m else NULL
    M.w = &weights[0] if M.m else NULL
    M.a_code = &a_code[0] if a_code.shape[0] else &dummy_code
    M.a_par = &a_par[0, 0] if a_par.shape[0] else &dummy
    M.b_code = &b_code[0] if b_code.shape[0] else &dummy_code
    M.b_par = &b_par[0, 0] if b_par.shape[0] else &dummy
    M.g_code = &g_code[0] if g_code.shape[0] else &dummy_code
    M.g_par = &g_par[0, 0] if g_par.shape[0] else &dummy
    M.kx = &kx[0] if kx.shape[0] else &dummy
    M.ky = &ky[0] if ky.shape[0] else &dummy
    M.pa = pa
    M.pb = pb
    M.pgamma = pgamma
    M.pdelta = pdelta
    M.d = &d[0]
    M.anchor = &anchor[0]
    M.flow_a = buf + 7 * dim
    M.flow_b = buf + 7 * dim + n

    cdef long k, r = 0
    cdef int i
    cdef int status = 0
    cdef long fail_step = -1
    cdef double hh = 0.5 * h, h6 = h / 6.0, mx
    cdef bint finite
    for i in range(dim):
        y[i] = y0[i]
        samples[0, i] = y[i]
    rec_steps[0] = 0
    r = 1
    with nogil:
        for k in range(1, n_steps + 1):
            rhs(&M, y, k1)
            for i in range(dim):
                tmp[i] = y[i] + hh * k1[i]
            rhs(&M, tmp, k2)
            for i in range(dim):
                tmp[i] = y[i] + hh * k2[i]
            rhs(&M, tmp, k3)
            for i in range(dim):
                tmp[i] = y[i] + h * k3[i]
            rhs(&M, tmp, k4)
            finite = True
            mx = 0.0
            for i in range(dim):
                ynew[i] = y[i] + h6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                if not isfinite(ynew[i]):
                    finite = False
                elif fabs(ynew[i]) > mx:
                    mx = fabs(ynew[i])
            if not finite:
                status = 2
                fail_step = k - 1
                break
            for i in range(dim):
                y[i] = ynew[i]
            if mx > cap:
                status = 1
                fail_step = k
                for i in range(dim):
                    samples[r, i] = y[i]
                rec_steps[r] = k
                r += 1
                break
            if k % record_every == 0 or k == n_steps:
                for i in range(dim):
                    samples[r, i] = y[i]
                rec_steps[r] = k
                r += 1
    free(buf)
    return samples_np[:r].copy(), steps_np[:r].copy(), status, fail_step
