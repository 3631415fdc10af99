# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot kernels.

Mirrors kernels.pure step for step: the active-set iteration visits the same
working sets with the same tie-breaking, so the two backends agree to
floating-point noise. Keep both files in sync when touching either.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, sqrt, fabs, isfinite, NAN
from libc.string cimport memset
from posix.time cimport clock_gettime, timespec, CLOCK_MONOTONIC

cnp.import_array()

STATUS_OK = 0
STATUS_DEPENDENT = 1
STATUS_ENUMERATED = 2
STATUS_INFEASIBLE = -1

KKT_TOL = 1e-8
RANK_TOL = 1e-10

STOP_STEPS = 0
STOP_CAPTURED = 1
STOP_INFEASIBLE = 2
STOP_BLOWUP = 3

BLOW_UP_NORM = 1e6

FIELD_UNSTABLE_LINEAR = 0
FIELD_LIMIT_CYCLE = 1
FIELD_LINEAR_GOAL = 2
FIELD_MIXTURE = 3

DEF MAX_C = 64
DEF MAX_M = 16

# C copies of the status/stop/field codes, readable from nogil code.
cdef int _ST_DEPENDENT = 1
cdef int _ST_ENUMERATED = 2
cdef int _ST_INFEASIBLE = -1
cdef int _STOP_STEPS = 0
cdef int _STOP_CAPTURED = 1
cdef int _STOP_INFEASIBLE = 2
cdef int _STOP_BLOWUP = 3
cdef int _F_UNSTABLE = 0
cdef int _F_LIMIT_CYCLE = 1
cdef int _F_LINEAR_GOAL = 2
cdef int _F_MIXTURE = 3
cdef double _BLOW_UP = 1e6


def backend_name():
    return "compiled"


cdef inline double _now() noexcept nogil:
    cdef timespec ts
    clock_gettime(CLOCK_MONOTONIC, &ts)
    return <double>ts.tv_sec + <double>ts.tv_nsec * 1e-9


cdef int _gs_keep(const double* A, const int* rows, int nrows, int m,
                  double rank_tol, int* keep, double* qbuf) noexcept nogil:
    # In-order Gram-Schmidt over A[rows]; writes positions of the kept rows
    # (indices into `rows`) and returns how many survived.
    cdef int i, j, t, nkept = 0
    cdef double dot, nrm
    for i in range(nrows):
        for t in range(m):
            qbuf[nkept * m + t] = A[rows[i] * m + t]
        for j in range(nkept):
            dot = 0.0
            for t in range(m):
                dot += qbuf[j * m + t] * qbuf[nkept * m + t]
            for t in range(m):
                qbuf[nkept * m + t] -= dot * qbuf[j * m + t]
        nrm = 0.0
        for t in range(m):
            nrm += qbuf[nkept * m + t] * qbuf[nkept * m + t]
        nrm = sqrt(nrm)
        if nrm <= rank_tol:
            continue
        for t in range(m):
            qbuf[nkept * m + t] /= nrm
        keep[nkept] = i
        nkept += 1
    return nkept


cdef bint _solve_lin(double* M, double* rhs, int k) noexcept nogil:
    # Gaussian elimination with partial pivoting, in place; rhs becomes the
    # solution. False when a pivot column is exactly zero.
    cdef int col, row, piv, t
    cdef double best, v, factor, tmp
    for col in range(k):
        piv = col
        best = fabs(M[col * k + col])
        for row in range(col + 1, k):
            v = fabs(M[row * k + col])
            if v > best:
                best = v
                piv = row
        if best == 0.0:
            return False
        if piv != col:
            for t in range(k):
                tmp = M[col * k + t]
                M[col * k + t] = M[piv * k + t]
                M[piv * k + t] = tmp
            tmp = rhs[col]
            rhs[col] = rhs[piv]
            rhs[piv] = tmp
        for row in range(col + 1, k):
            factor = M[row * k + col] / M[col * k + col]
            if factor != 0.0:
                for t in range(col, k):
                    M[row * k + t] -= factor * M[col * k + t]
                rhs[row] -= factor * rhs[col]
    for col in range(k - 1, -1, -1):
        v = rhs[col]
        for t in range(col + 1, k):
            v -= M[col * k + t] * rhs[t]
        rhs[col] = v / M[col * k + col]
    return True


cdef bint _solve_subset_c(const double* A, const double* b, const double* u_o,
                          int c, int m, const int* work, int nwork,
                          double* u, double* lam,
                          double* gram, double* rhs) noexcept nogil:
    # Least-norm equality solve over the working set; fills u and lam.
    cdef int i, j, t
    cdef double s
    for i in range(nwork):
        s = b[work[i]]
        for t in range(m):
            s -= A[work[i] * m + t] * u_o[t]
        rhs[i] = s
        for j in range(nwork):
            s = 0.0
            for t in range(m):
                s += A[work[i] * m + t] * A[work[j] * m + t]
            gram[i * nwork + j] = s
    if not _solve_lin(gram, rhs, nwork):
        return False
    for i in range(nwork):
        if not isfinite(rhs[i]):
            return False
    for t in range(m):
        s = u_o[t]
        for i in range(nwork):
            s += A[work[i] * m + t] * rhs[i]
        u[t] = s
    for i in range(nwork):
        lam[i] = -2.0 * rhs[i]
    return True


cdef int _qp_solve(const double* A, const double* b, const double* u_o,
                   int c, int m, double kkt_tol, double rank_tol,
                   double* u, unsigned char* active,
                   int* work, int* keep, double* qbuf,
                   double* gram, double* rhs, double* lam,
                   unsigned char* member, unsigned long long* visited) noexcept nogil:
    cdef int nwork = 0, nvis = 0, it, i, t, jadd, kdrop, nkept, guard
    cdef int size, pos, found
    cdef double s, best, lammin, v
    cdef unsigned long long key
    cdef bint need_enum = False
    cdef int status = 0
    cdef int comb[MAX_M + 1]

    memset(active, 0, c)
    if c == 0:
        for t in range(m):
            u[t] = u_o[t]
        return 0

    for i in range(c):
        s = b[i]
        for t in range(m):
            s -= A[i * m + t] * u_o[t]
        if s < 0.0:
            work[nwork] = i
            nwork += 1

    guard = 4 * c + 16
    for it in range(guard):
        key = 0
        for i in range(nwork):
            key |= (<unsigned long long>1) << work[i]
        need_enum = False
        for i in range(nvis):
            if visited[i] == key:
                need_enum = True
                break
        if need_enum:
            break
        visited[nvis] = key
        nvis += 1

        if nwork:
            nkept = _gs_keep(A, work, nwork, m, rank_tol, keep, qbuf)
            if nkept != nwork:
                status |= _ST_DEPENDENT
                for i in range(nkept):
                    work[i] = work[keep[i]]
                nwork = nkept
        if nwork:
            if not _solve_subset_c(A, b, u_o, c, m, work, nwork, u, lam, gram, rhs):
                need_enum = True
                break
        else:
            for t in range(m):
                u[t] = u_o[t]

        memset(member, 0, c)
        for i in range(nwork):
            member[work[i]] = 1
        best = -1e308
        jadd = -1
        for i in range(c):
            if member[i]:
                continue
            v = -b[i]
            for t in range(m):
                v += A[i * m + t] * u[t]
            if v > best:
                best = v
                jadd = i
        if jadd >= 0 and best > kkt_tol:
            work[nwork] = jadd
            nwork += 1
            continue
        if nwork:
            lammin = lam[0]
            kdrop = 0
            for i in range(1, nwork):
                if lam[i] < lammin:
                    lammin = lam[i]
                    kdrop = i
            if lammin < -kkt_tol:
                for i in range(kdrop, nwork - 1):
                    work[i] = work[i + 1]
                nwork -= 1
                continue
        for i in range(nwork):
            active[work[i]] = 1
        return status

    # Cycled, hit the guard, or hit a singular solve: enumerate subsets.
    status |= _ST_ENUMERATED
    size = 0
    while size <= (c if c < m else m):
        if size == 0:
            found = 1
            for i in range(c):
                v = -b[i]
                for t in range(m):
                    v += A[i * m + t] * u_o[t]
                if v > kkt_tol:
                    found = 0
                    break
            if found:
                for t in range(m):
                    u[t] = u_o[t]
                memset(active, 0, c)
                return status
            size += 1
            continue
        for i in range(size):
            comb[i] = i
        while True:
            if _gs_keep(A, comb, size, m, rank_tol, keep, qbuf) == size:
                if _solve_subset_c(A, b, u_o, c, m, comb, size, u, lam, gram, rhs):
                    found = 1
                    for i in range(size):
                        if lam[i] < -kkt_tol:
                            found = 0
                            break
                    if found:
                        for i in range(c):
                            v = -b[i]
                            for t in range(m):
                                v += A[i * m + t] * u[t]
                            if v > kkt_tol:
                                found = 0
                                break
                    if found:
                        memset(active, 0, c)
                        for i in range(size):
                            active[comb[i]] = 1
                        return status
            pos = size - 1
            while pos >= 0 and comb[pos] == c - size + pos:
                pos -= 1
            if pos < 0:
                break
            comb[pos] += 1
            for i in range(pos + 1, size):
                comb[i] = comb[i - 1] + 1
        size += 1

    for t in range(m):
        u[t] = NAN
    memset(active, 0, c)
    return _ST_INFEASIBLE


def field_eval(int code, fp, goal, x):
    """Compiled drift evaluation; same contract as kernels.pure.field_eval."""
    cdef cnp.ndarray[double, ndim=1] fp_arr = np.ascontiguousarray(fp, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] goal_arr = np.ascontiguousarray(goal, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] x_arr = np.ascontiguousarray(x, dtype=np.float64)
    cdef int n = x_arr.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.zeros(n)
    cdef cnp.ndarray[double, ndim=1] logits = np.zeros(max(1, fp_arr.shape[0]))
    if _field_eval(code, &fp_arr[0], &goal_arr[0], &x_arr[0], &out[0], n,
                   &logits[0]) != 0:
        raise ValueError(f"unknown field code {code}")
    return out


def qp_filter(u_o, A, b, double kkt_tol=1e-8, double rank_tol=1e-10):
    """Compiled minimal-correction solve; same contract as kernels.pure.qp_filter."""
    cdef cnp.ndarray[double, ndim=1] u_o_arr = np.ascontiguousarray(u_o, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] A_arr = np.ascontiguousarray(np.atleast_2d(A), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] b_arr = np.ascontiguousarray(b, dtype=np.float64)
    cdef int c = A_arr.shape[0]
    cdef int m = A_arr.shape[1]
    if c > MAX_C or m > MAX_M:
        raise ValueError(f"compiled kernel supports at most {MAX_C} constraints and {MAX_M} inputs")
    cdef cnp.ndarray[double, ndim=1] u = np.zeros(m)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] active = np.zeros(c if c else 1, dtype=np.uint8)
    cdef int work[MAX_C]
    cdef int keep[MAX_C]
    cdef double qbuf[MAX_C * MAX_M]
    cdef double gram[MAX_C * MAX_C]
    cdef double rhs[MAX_C]
    cdef double lam[MAX_C]
    cdef unsigned char member[MAX_C]
    cdef unsigned long long visited[4 * MAX_C + 16]
    cdef int status
    with nogil:
        status = _qp_solve(<const double*>A_arr.data,
                           <const double*>b_arr.data,
                           <const double*>u_o_arr.data,
                           c, m, kkt_tol, rank_tol,
                           <double*>u.data, <unsigned char*>active.data,
                           work, keep, qbuf, gram, rhs, lam, member, visited)
    return u, active[:c], status


cdef int _field_eval(int code, const double* fp, const double* goal,
                     const double* x, double* out, int n,
                     double* logits) noexcept nogil:
    cdef int K, nn, k, i, j, off_w, off_s, off_mu, off_A
    cdef double r2, d2, mx, tot, s, diff
    if code == _F_UNSTABLE:
        for i in range(n):
            out[i] = fp[0] * x[i]
        return 0
    if code == _F_LIMIT_CYCLE:
        r2 = x[0] * x[0] + x[1] * x[1]
        out[0] = x[1] - x[0] * (r2 - 1.0)
        out[1] = -x[0] - x[1] * (r2 - 1.0)
        return 0
    if code == _F_LINEAR_GOAL:
        for i in range(n):
            out[i] = fp[0] * (goal[i] - x[i])
        return 0
    if code == _F_MIXTURE:
        K = <int>fp[0]
        nn = <int>fp[1]
        off_w = 2
        off_s = off_w + K
        off_mu = off_s + K
        off_A = off_mu + K * nn
        mx = -1e308
        for k in range(K):
            d2 = 0.0
            for j in range(nn):
                diff = (x[j] - goal[j]) - fp[off_mu + k * nn + j]
                d2 += diff * diff
            logits[k] = fp[off_w + k] - d2 * fp[off_s + k]
            if logits[k] > mx:
                mx = logits[k]
        tot = 0.0
        for k in range(K):
            logits[k] = exp(logits[k] - mx)
            tot += logits[k]
        for i in range(nn):
            out[i] = 0.0
        for k in range(K):
            s = logits[k] / tot
            for i in range(nn):
                d2 = 0.0
                for j in range(nn):
                    d2 += fp[off_A + (k * nn + i) * nn + j] * (x[j] - goal[j])
                out[i] += s * d2
        return 0
    return -1


def rollout(int code, fp, goal, bint has_goal, double capture_tol,
            N, offs, gains, x0, double dt, long n_steps):
    """Compiled fused filtered simulation; same contract as kernels.pure.rollout."""
    cdef cnp.ndarray[double, ndim=1] fp_arr = np.ascontiguousarray(fp, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] goal_arr = np.ascontiguousarray(goal, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] N_arr = np.ascontiguousarray(np.atleast_2d(N), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] offs_arr = np.ascontiguousarray(offs, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] gains_arr = np.ascontiguousarray(gains, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] x0_arr = np.ascontiguousarray(x0, dtype=np.float64)
    cdef int n = x0_arr.shape[0]
    cdef int c = N_arr.shape[0]
    if c > MAX_C or n > MAX_M:
        raise ValueError(f"compiled kernel supports at most {MAX_C} constraints and {MAX_M} state dims")
    if code == FIELD_LIMIT_CYCLE and n != 2:
        raise ValueError("limit cycle field is planar")

    cdef cnp.ndarray[double, ndim=2] xs = np.zeros((n_steps + 1, n))
    cdef cnp.ndarray[double, ndim=2] us = np.zeros((n_steps, n))
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] active = np.zeros((n_steps, c if c else 1), dtype=np.uint8)
    cdef cnp.ndarray[cnp.int8_t, ndim=1] status = np.zeros(n_steps, dtype=np.int8)
    cdef cnp.ndarray[double, ndim=1] solve_time = np.zeros(n_steps)

    cdef double* xs_p = <double*>xs.data
    cdef double* us_p = <double*>us.data
    cdef unsigned char* act_p = <unsigned char*>active.data
    cdef cnp.int8_t* st_p = <cnp.int8_t*>status.data
    cdef double* tsol_p = <double*>solve_time.data
    cdef const double* fp_p = <const double*>fp_arr.data
    cdef const double* goal_p = <const double*>goal_arr.data
    cdef const double* N_p = <const double*>N_arr.data
    cdef const double* offs_p = <const double*>offs_arr.data
    cdef const double* gains_p = <const double*>gains_arr.data

    cdef double A_mat[MAX_C * MAX_M]
    cdef double bvec[MAX_C]
    cdef double hvec[MAX_C]
    cdef double x[MAX_M]
    cdef double f[MAX_M]
    cdef double u[MAX_M]
    cdef double zero_u[MAX_M]
    cdef double logits[MAX_C]
    cdef unsigned char act_step[MAX_C]
    cdef int work[MAX_C]
    cdef int keep[MAX_C]
    cdef double qbuf[MAX_C * MAX_M]
    cdef double gram[MAX_C * MAX_C]
    cdef double rhs[MAX_C]
    cdef double lam[MAX_C]
    cdef unsigned char member[MAX_C]
    cdef unsigned long long visited[4 * MAX_C + 16]

    cdef int i, t, st
    cdef long k, steps_done = 0
    cdef int stop = _STOP_STEPS
    cdef double t0, nrm, s
    cdef int act_stride = active.shape[1]

    for i in range(n):
        x[i] = x0_arr[i]
        xs_p[i] = x0_arr[i]
        zero_u[i] = 0.0
    for i in range(c):
        for t in range(n):
            A_mat[i * n + t] = -N_p[i * n + t]

    with nogil:
        for k in range(n_steps):
            if _field_eval(code, fp_p, goal_p, x, f, n, logits) != 0:
                stop = _STOP_INFEASIBLE
                break
            if c:
                for i in range(c):
                    s = offs_p[i]
                    for t in range(n):
                        s += N_p[i * n + t] * x[t]
                    hvec[i] = s
                    s = gains_p[i] * hvec[i]
                    for t in range(n):
                        s += N_p[i * n + t] * f[t]
                    bvec[i] = s
                t0 = _now()
                st = _qp_solve(A_mat, bvec, zero_u, c, n, 1e-8, 1e-10,
                               u, act_step, work, keep, qbuf, gram, rhs, lam,
                               member, visited)
                tsol_p[k] = _now() - t0
                if st < 0:
                    st_p[k] = <cnp.int8_t>_ST_INFEASIBLE
                    stop = _STOP_INFEASIBLE
                    break
                st_p[k] = <cnp.int8_t>st
                for i in range(c):
                    act_p[k * act_stride + i] = act_step[i]
            else:
                for t in range(n):
                    u[t] = 0.0
            nrm = 0.0
            for t in range(n):
                x[t] = x[t] + dt * (f[t] + u[t])
                us_p[k * n + t] = u[t]
                xs_p[(k + 1) * n + t] = x[t]
                nrm += x[t] * x[t]
            nrm = sqrt(nrm)
            steps_done = k + 1
            if not isfinite(nrm) or nrm > _BLOW_UP:
                stop = _STOP_BLOWUP
                break
            if has_goal:
                s = 0.0
                for t in range(n):
                    s += (x[t] - goal_p[t]) * (x[t] - goal_p[t])
                if sqrt(s) < capture_tol:
                    stop = _STOP_CAPTURED
                    break

    return xs, us, active[:, :c], status, solve_time, int(steps_done), int(stop)
