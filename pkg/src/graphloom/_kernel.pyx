# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-iteration hot loop.

Mirrors ``transformer._iterate_numpy`` operation for operation: same wire
orders, same buffer-then-add MLP staging, same bitwise-tie hardmax. Under
hardmax the per-element arithmetic matches the numpy path wherever
attention rows tie over at most two positions, and wider averages that
feed decisions are band-rounded or cancel within their layer, so output
and termination columns stay bit-identical between backends. The one
known gap: a parked all-zero pointer gives a zero query, every score
ties, and the uniform average over K rows sums in BLAS order on the
numpy path, so transient scratch can differ by an ulp until the next
real selection overwrites it (such values sit far from every decision
margin and are gated off from persistent state). Under softmax the
exp/sum reductions associate differently, so agreement there is at
decoded-output level.

Entry point::

    run(X, A, AT, n_layers, term_idx, softmax, <22 plan arrays>,
        limit, check_term) -> iterations (or -1 when the limit is hit)

With ``check_term`` the loop stops once X[0, term_idx] >= 0.5 and returns
the number of completed passes; -1 signals the iteration limit. Without it
exactly ``limit`` passes run.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp
from libc.string cimport memcpy, memset

cnp.import_array()

ctypedef cnp.int32_t i32
ctypedef cnp.float64_t f64


cdef void _project(const f64[:, ::1] Xin, f64[:, ::1] out, Py_ssize_t K,
                   const i32[::1] off, const i32[::1] src,
                   const i32[::1] axis, const f64[::1] val, int h) noexcept:
    # out is (2, K): one contiguous row per projection axis
    cdef Py_ssize_t i, w
    cdef int a, s
    cdef double v
    for i in range(K):
        out[0, i] = 0.0
        out[1, i] = 0.0
    for w in range(off[h], off[h + 1]):
        s = src[w]
        a = axis[w]
        v = val[w]
        for i in range(K):
            out[a, i] += Xin[i, s] * v


cdef void _softmax_row(const f64[:, ::1] s, f64[:, ::1] sig,
                       Py_ssize_t i, Py_ssize_t K) noexcept:
    cdef Py_ssize_t j
    cdef double m = s[i, 0]
    cdef double tot = 0.0
    for j in range(1, K):
        if s[i, j] > m:
            m = s[i, j]
    for j in range(K):
        sig[i, j] = exp(s[i, j] - m)
        tot += sig[i, j]
    for j in range(K):
        sig[i, j] /= tot


cdef void _iterate(f64[:, ::1] X, const f64[:, ::1] A, const f64[:, ::1] AT,
                   int n_layers, int softmax,
                   const i32[::1] layer_head_off, const i32[::1] head_kind,
                   const i32[::1] q_off, const i32[::1] q_src,
                   const i32[::1] q_axis, const f64[::1] q_val,
                   const i32[::1] k_off, const i32[::1] k_src,
                   const i32[::1] k_axis, const f64[::1] k_val,
                   const i32[::1] v_off, const i32[::1] v_src,
                   const i32[::1] v_slot, const f64[::1] v_val,
                   const i32[::1] slot_off, const i32[::1] slot_dst,
                   const i32[::1] m_off, const i32[::1] m_src,
                   const i32[::1] m_dst, const f64[::1] m_val,
                   const i32[::1] mz_off, const i32[::1] mz_col,
                   f64[:, ::1] Xin, f64[:, ::1] qb, f64[:, ::1] kb,
                   f64[:, ::1] sc, f64[:, ::1] sig, f64[::1] srow,
                   cnp.int32_t[::1] tix,
                   f64[:, ::1] u, f64[:, ::1] t, f64[:, ::1] t2,
                   f64[:, ::1] za, f64[:, ::1] zb) noexcept:
    cdef Py_ssize_t K = X.shape[0]
    cdef Py_ssize_t i, j, w, si
    cdef int l, h, stage, base, nslots, kind, c, sidx, didx, cnt
    cdef double acc, v, q0, q1, s, m, tw
    cdef f64[:, ::1] zr
    cdef f64[:, ::1] zw

    for l in range(n_layers):
        memcpy(&Xin[0, 0], &X[0, 0], K * X.shape[1] * sizeof(double))

        for h in range(layer_head_off[l], layer_head_off[l + 1]):
            nslots = slot_off[h + 1] - slot_off[h]
            if nslots == 0:
                continue
            _project(Xin, qb, K, q_off, q_src, q_axis, q_val, h)
            _project(Xin, kb, K, k_off, k_src, k_axis, k_val, h)
            for i in range(K):
                for si in range(nslots):
                    u[i, si] = 0.0
            for w in range(v_off[h], v_off[h + 1]):
                sidx = v_src[w]
                si = v_slot[w]
                v = v_val[w]
                for i in range(K):
                    u[i, si] += Xin[i, sidx] * v
            if softmax:
                for i in range(K):
                    q0 = qb[0, i]
                    q1 = qb[1, i]
                    for j in range(K):
                        sc[i, j] = q0 * kb[0, j] + q1 * kb[1, j]
                for i in range(K):
                    _softmax_row(sc, sig, i, K)
                for i in range(K):
                    for si in range(nslots):
                        acc = 0.0
                        for j in range(K):
                            acc += sig[i, j] * u[j, si]
                        t[i, si] = acc
            else:
                # averaging the tied rows in ascending index order skips
                # only exact-zero terms, so this matches the dense sum
                # bit for bit
                for i in range(K):
                    q0 = qb[0, i]
                    q1 = qb[1, i]
                    m = q0 * kb[0, 0] + q1 * kb[1, 0]
                    srow[0] = m
                    for j in range(1, K):
                        s = q0 * kb[0, j] + q1 * kb[1, j]
                        srow[j] = s
                        if s > m:
                            m = s
                    cnt = 0
                    for j in range(K):
                        if srow[j] == m:
                            tix[cnt] = <cnp.int32_t> j
                            cnt += 1
                    tw = 1.0 / cnt
                    for si in range(nslots):
                        acc = 0.0
                        for c in range(cnt):
                            acc += tw * u[tix[c], si]
                        t[i, si] = acc
            kind = head_kind[h]
            if kind != 0:
                for i in range(K):
                    for si in range(nslots):
                        acc = 0.0
                        if kind == 1:
                            for j in range(K):
                                acc += A[i, j] * t[j, si]
                        else:
                            for j in range(K):
                                acc += AT[i, j] * t[j, si]
                        t2[i, si] = acc
                for i in range(K):
                    for si in range(nslots):
                        t[i, si] = t2[i, si]
            for si in range(nslots):
                didx = slot_dst[slot_off[h] + si]
                for i in range(K):
                    X[i, didx] += t[i, si]

        # MLP: stages 1..3 are ReLU-clipped transient buffers, stage 4 is
        # accumulated in full and then added to X (buffer-then-add).
        # za / zb hold only their stage's touched columns; those are
        # re-zeroed after use so both buffers stay all-zero between layers.
        base = 4 * l
        for stage in range(4):
            zr = za if stage % 2 == 1 else zb
            zw = za if stage % 2 == 0 else zb
            for w in range(m_off[base + stage], m_off[base + stage + 1]):
                sidx = m_src[w]
                didx = m_dst[w]
                v = m_val[w]
                if stage == 0:
                    for i in range(K):
                        zw[i, didx] += X[i, sidx] * v
                else:
                    for i in range(K):
                        zw[i, didx] += zr[i, sidx] * v
            if stage < 3:
                for w in range(mz_off[base + stage], mz_off[base + stage + 1]):
                    c = mz_col[w]
                    for i in range(K):
                        if zw[i, c] < 0.0:
                            zw[i, c] = 0.0
            else:
                for w in range(mz_off[base + stage], mz_off[base + stage + 1]):
                    c = mz_col[w]
                    for i in range(K):
                        X[i, c] += zw[i, c]
            if stage > 0:
                for w in range(mz_off[base + stage - 1], mz_off[base + stage]):
                    c = mz_col[w]
                    for i in range(K):
                        zr[i, c] = 0.0
        for w in range(mz_off[base + 3], mz_off[base + 4]):
            c = mz_col[w]
            for i in range(K):
                zb[i, c] = 0.0


def run(cnp.ndarray[f64, ndim=2] X not None,
        cnp.ndarray[f64, ndim=2] A not None,
        cnp.ndarray[f64, ndim=2] AT not None,
        int n_layers, int term_idx, int softmax,
        cnp.ndarray[i32, ndim=1] layer_head_off not None,
        cnp.ndarray[i32, ndim=1] head_kind not None,
        cnp.ndarray[i32, ndim=1] q_off not None,
        cnp.ndarray[i32, ndim=1] q_src not None,
        cnp.ndarray[i32, ndim=1] q_axis not None,
        cnp.ndarray[f64, ndim=1] q_val not None,
        cnp.ndarray[i32, ndim=1] k_off not None,
        cnp.ndarray[i32, ndim=1] k_src not None,
        cnp.ndarray[i32, ndim=1] k_axis not None,
        cnp.ndarray[f64, ndim=1] k_val not None,
        cnp.ndarray[i32, ndim=1] v_off not None,
        cnp.ndarray[i32, ndim=1] v_src not None,
        cnp.ndarray[i32, ndim=1] v_slot not None,
        cnp.ndarray[f64, ndim=1] v_val not None,
        cnp.ndarray[i32, ndim=1] slot_off not None,
        cnp.ndarray[i32, ndim=1] slot_dst not None,
        cnp.ndarray[i32, ndim=1] m_off not None,
        cnp.ndarray[i32, ndim=1] m_src not None,
        cnp.ndarray[i32, ndim=1] m_dst not None,
        cnp.ndarray[f64, ndim=1] m_val not None,
        cnp.ndarray[i32, ndim=1] mz_off not None,
        cnp.ndarray[i32, ndim=1] mz_col not None,
        int limit, int check_term):
    cdef Py_ssize_t K = X.shape[0]
    cdef Py_ssize_t d = X.shape[1]
    cdef int h, nh = head_kind.shape[0]
    cdef int smax = 1
    for h in range(nh):
        if slot_off[h + 1] - slot_off[h] > smax:
            smax = slot_off[h + 1] - slot_off[h]

    cdef cnp.ndarray[f64, ndim=2] Xin = np.empty((K, d))
    cdef cnp.ndarray[f64, ndim=2] qb = np.empty((2, K))
    cdef cnp.ndarray[f64, ndim=2] kb = np.empty((2, K))
    cdef cnp.ndarray[f64, ndim=2] sc = np.empty((K, K))
    cdef cnp.ndarray[f64, ndim=2] sig = np.empty((K, K))
    cdef cnp.ndarray[f64, ndim=1] srow = np.empty(K)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] tix = np.empty(K, dtype=np.int32)
    cdef cnp.ndarray[f64, ndim=2] u = np.empty((K, smax))
    cdef cnp.ndarray[f64, ndim=2] t = np.empty((K, smax))
    cdef cnp.ndarray[f64, ndim=2] t2 = np.empty((K, smax))
    cdef cnp.ndarray[f64, ndim=2] za = np.zeros((K, d))
    cdef cnp.ndarray[f64, ndim=2] zb = np.zeros((K, d))

    cdef f64[:, ::1] Xv = X
    cdef int it = 0
    while True:
        if check_term:
            if Xv[0, term_idx] >= 0.5:
                return it
            if it >= limit:
                return -1
        elif it >= limit:
            return it
        _iterate(Xv, A, AT, n_layers, softmax,
                 layer_head_off, head_kind,
                 q_off, q_src, q_axis, q_val,
                 k_off, k_src, k_axis, k_val,
                 v_off, v_src, v_slot, v_val,
                 slot_off, slot_dst,
                 m_off, m_src, m_dst, m_val,
                 mz_off, mz_col,
                 Xin, qb, kb, sc, sig, srow, tix, u, t, t2, za, zb)
        it += 1
