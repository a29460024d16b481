# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Per-group detection kernels, compiled twin of groupdet_py.

Same contracts and tie-break rules as the pure-numpy reference: strict
comparisons keep the first (lowest-index) optimum, sorts are stable.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, INFINITY

cnp.import_array()

__all__ = ["group_mld", "llr_matrix", "llrd", "tc_llrd", "grcd", "rscd",
           "slice_symbols", "mld_scan"]


def mld_scan(t_stack, y_in):
    """Odometer scan over the per-group codeword product; see the numpy twin.

    The running partial sums over the group prefix are patched only for the
    digits a candidate increment changes, so the scan is O(total * m) with
    a small constant.
    """
    cdef double complex[:, :, ::1] t = np.ascontiguousarray(t_stack, dtype=np.complex128)
    cdef double complex[::1] y = np.ascontiguousarray(y_in, dtype=np.complex128)
    cdef Py_ssize_t n = t.shape[0], d = t.shape[1], m = t.shape[2]
    cdef long long total = 1
    cdef Py_ssize_t j, i, lvl
    for j in range(n):
        total *= d
    part_buf = np.zeros((n + 1, m), dtype=np.complex128)
    dig_buf = np.zeros(n, dtype=np.int64)
    cdef double complex[:, ::1] part = part_buf
    cdef long long[::1] dig = dig_buf
    for j in range(n):
        for i in range(m):
            part[j + 1, i] = part[j, i] + t[j, 0, i]
    cdef double best = INFINITY, metric
    cdef long long best_idx = 0, c
    cdef Py_ssize_t carry
    for c in range(total):
        metric = 0.0
        for i in range(m):
            metric += _cabs2(part[n, i] - y[i])
        if metric < best:
            best = metric
            best_idx = c
        if c == total - 1:
            break
        # odometer increment from the least significant (last) group
        carry = n - 1
        while dig[carry] == d - 1:
            dig[carry] = 0
            carry -= 1
        dig[carry] += 1
        for lvl in range(carry, n):
            for i in range(m):
                part[lvl + 1, i] = part[lvl, i] + t[lvl, dig[lvl], i]
    return int(best_idx), float(best)


cdef inline double _cabs2(double complex z) noexcept nogil:
    return z.real * z.real + z.imag * z.imag


cdef inline Py_ssize_t _nearest(double complex v, double complex[::1] points) noexcept nogil:
    cdef Py_ssize_t q, best = 0
    cdef double d, dbest = _cabs2(v - points[0])
    for q in range(1, points.shape[0]):
        d = _cabs2(v - points[q])
        if d < dbest:
            dbest = d
            best = q
    return best


cdef void _argsort_desc(double* key, Py_ssize_t* out, Py_ssize_t m) noexcept nogil:
    # stable insertion sort, descending by key
    cdef Py_ssize_t i, j, tmp
    for i in range(m):
        out[i] = i
    for i in range(1, m):
        j = i
        while j > 0 and key[out[j]] > key[out[j - 1]]:
            tmp = out[j]; out[j] = out[j - 1]; out[j - 1] = tmp
            j -= 1


cdef void _sort_asc_inplace(Py_ssize_t* a, Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t i, j, v
    for i in range(1, m):
        v = a[i]
        j = i - 1
        while j >= 0 and a[j] > v:
            a[j + 1] = a[j]
            j -= 1
        a[j + 1] = v


def slice_symbols(values, points):
    """Nearest constellation label per entry, ties to the lowest label."""
    vals = np.ascontiguousarray(values, dtype=np.complex128)
    flat = vals.reshape(-1)
    out = np.empty(flat.shape[0], dtype=np.int64)
    cdef double complex[::1] v = flat
    cdef double complex[::1] p = np.array(points, dtype=np.complex128)
    cdef long long[::1] o = out
    cdef Py_ssize_t i
    for i in range(v.shape[0]):
        o[i] = _nearest(v[i], p)
    return out.reshape(vals.shape)


def group_mld(xt, codewords):
    cdef double complex[:, ::1] x = np.ascontiguousarray(xt, dtype=np.complex128)
    cdef double complex[:, ::1] cw = np.ascontiguousarray(codewords, dtype=np.complex128)
    cdef Py_ssize_t n = x.shape[0], m_t = x.shape[1], d = cw.shape[0]
    out = np.empty(n, dtype=np.int64)
    cdef long long[::1] o = out
    cdef Py_ssize_t g, w, m, best
    cdef double metric, mbest
    for g in range(n):
        mbest = INFINITY
        best = 0
        for w in range(d):
            metric = 0.0
            for m in range(m_t):
                metric += _cabs2(x[g, m] - cw[w, m])
            if metric < mbest:
                mbest = metric
                best = w
        o[g] = best
    return out, {"codeword_metrics": int(n * d)}


def llr_matrix(xt, points, double n0, long long k):
    cdef double complex[:, ::1] x = np.ascontiguousarray(xt, dtype=np.complex128)
    cdef double complex[::1] p = np.array(points, dtype=np.complex128)
    cdef Py_ssize_t n = x.shape[0], m_t = x.shape[1], q = p.shape[0]
    lam = np.empty((n, m_t), dtype=np.float64)
    cdef double[:, ::1] L = lam
    cdef double prior = log(<double> k) - log(<double> (m_t - k))
    cdef Py_ssize_t g, m, j
    cdef double e, shift, acc
    work = np.empty(q, dtype=np.float64)
    cdef double[::1] wv = work
    for g in range(n):
        for m in range(m_t):
            shift = -INFINITY
            for j in range(q):
                e = -_cabs2(x[g, m] - p[j]) / n0
                wv[j] = e
                if e > shift:
                    shift = e
            acc = 0.0
            for j in range(q):
                acc += exp(wv[j] - shift)
            L[g, m] = prior + _cabs2(x[g, m]) / n0 + shift + log(acc)
    return lam


cdef void _top_k(double[:, ::1] lam, Py_ssize_t g, Py_ssize_t k,
                 Py_ssize_t* order, Py_ssize_t* sel, double* keybuf) noexcept nogil:
    cdef Py_ssize_t m_t = lam.shape[1]
    cdef Py_ssize_t i
    for i in range(m_t):
        keybuf[i] = lam[g, i]
    _argsort_desc(keybuf, order, m_t)
    for i in range(k):
        sel[i] = order[i]
    _sort_asc_inplace(sel, k)


def llrd(lam_in, xt, masks, taps, points):
    cdef double[:, ::1] lam = np.ascontiguousarray(lam_in, dtype=np.float64)
    cdef double complex[:, ::1] x = np.ascontiguousarray(xt, dtype=np.complex128)
    cdef unsigned char[:, ::1] mk = np.ascontiguousarray(masks, dtype=np.uint8)
    cdef long long[:, ::1] tp = np.ascontiguousarray(taps, dtype=np.int64)
    cdef double complex[::1] p = np.array(points, dtype=np.complex128)
    cdef Py_ssize_t n = x.shape[0], m_t = x.shape[1]
    cdef Py_ssize_t c = mk.shape[0], k = tp.shape[1], q = p.shape[0]
    tap_idx = np.empty(n, dtype=np.int64)
    positions = np.empty((n, k), dtype=np.int64)
    labels = np.empty((n, k), dtype=np.int64)
    cdef long long[::1] ti = tap_idx
    cdef long long[:, ::1] pos = positions
    cdef long long[:, ::1] lab = labels
    buf_o = np.empty(m_t, dtype=np.intp); buf_s = np.empty(m_t, dtype=np.intp)
    buf_k = np.empty(m_t, dtype=np.float64); buf_m = np.empty(m_t, dtype=np.uint8)
    cdef Py_ssize_t[::1] order = buf_o
    cdef Py_ssize_t[::1] sel = buf_s
    cdef double[::1] key = buf_k
    cdef unsigned char[::1] gm = buf_m
    cdef Py_ssize_t g, i, ci, best
    cdef long long dist, dbest
    for g in range(n):
        _top_k(lam, g, k, &order[0], &sel[0], &key[0])
        for i in range(m_t):
            gm[i] = 0
        for i in range(k):
            gm[sel[i]] = 1
            pos[g, i] = sel[i]
            lab[g, i] = _nearest(x[g, sel[i]], p)
        dbest = m_t + 1
        best = 0
        for ci in range(c):
            dist = 0
            for i in range(m_t):
                if gm[i] != mk[ci, i]:
                    dist += 1
            if dist < dbest:
                dbest = dist
                best = ci
        ti[g] = best
    counters = {"llr_evals": int(n * m_t * q), "symbol_metrics": int(n * k * q)}
    return tap_idx, positions, labels, counters


def tc_llrd(lam_in, xt, masks, taps, points):
    cdef double[:, ::1] lam = np.ascontiguousarray(lam_in, dtype=np.float64)
    cdef double complex[:, ::1] x = np.ascontiguousarray(xt, dtype=np.complex128)
    cdef unsigned char[:, ::1] mk = np.ascontiguousarray(masks, dtype=np.uint8)
    cdef long long[:, ::1] tp = np.ascontiguousarray(taps, dtype=np.int64)
    cdef double complex[::1] p = np.array(points, dtype=np.complex128)
    cdef Py_ssize_t n = x.shape[0], m_t = x.shape[1]
    cdef Py_ssize_t c = mk.shape[0], k = tp.shape[1], q = p.shape[0]
    tap_idx = np.empty(n, dtype=np.int64)
    labels = np.empty((n, k), dtype=np.int64)
    cdef long long[::1] ti = tap_idx
    cdef long long[:, ::1] lab = labels
    buf_o = np.empty(m_t, dtype=np.intp); buf_s = np.empty(m_t, dtype=np.intp)
    buf_k = np.empty(m_t, dtype=np.float64); buf_m = np.empty(m_t, dtype=np.uint8)
    buf_d = np.empty(c, dtype=np.int64)
    cdef Py_ssize_t[::1] order = buf_o
    cdef Py_ssize_t[::1] sel = buf_s
    cdef double[::1] key = buf_k
    cdef unsigned char[::1] gm = buf_m
    cdef long long[::1] dist = buf_d
    cdef Py_ssize_t g, i, ci, best
    cdef long long dmin, u_sum = 0, u_max = 0, u
    cdef double score, sbest
    for g in range(n):
        _top_k(lam, g, k, &order[0], &sel[0], &key[0])
        for i in range(m_t):
            gm[i] = 0
        for i in range(k):
            gm[sel[i]] = 1
        dmin = m_t + 1
        for ci in range(c):
            dist[ci] = 0
            for i in range(m_t):
                if gm[i] != mk[ci, i]:
                    dist[ci] += 1
            if dist[ci] < dmin:
                dmin = dist[ci]
        if dmin == 0:
            best = 0
            for ci in range(c):
                if dist[ci] == 0:
                    best = ci
                    break
        else:
            u = 0
            sbest = -INFINITY
            best = 0
            for ci in range(c):
                if dist[ci] == dmin:
                    u += 1
                    score = 0.0
                    for i in range(m_t):
                        if mk[ci, i]:
                            score += lam[g, i]
                    if score > sbest:
                        sbest = score
                        best = ci
            u_sum += u
            if u > u_max:
                u_max = u
        ti[g] = best
        for i in range(k):
            lab[g, i] = _nearest(x[g, tp[best, i]], p)
    counters = {"llr_evals": int(n * m_t * q), "symbol_metrics": int(n * k * q),
                "tc_candidates": int(u_sum), "tc_worst_u": int(u_max)}
    return tap_idx, labels, counters


cdef double _tap_residual(double complex[:, ::1] x, Py_ssize_t g, double total,
                          long long[:, ::1] tp, Py_ssize_t ci,
                          double complex[::1] p, long long* lab_out) noexcept nogil:
    cdef Py_ssize_t k = tp.shape[1], i, j
    cdef double resid = total
    cdef double complex v
    for i in range(k):
        v = x[g, tp[ci, i]]
        j = _nearest(v, p)
        lab_out[i] = j
        resid -= _cabs2(v)
        resid += _cabs2(v - p[j])
    return resid


def grcd(xt, taps, ant_indptr, ant_ids, points, long long t1, double eps_th):
    cdef double complex[:, ::1] x = np.ascontiguousarray(xt, dtype=np.complex128)
    cdef long long[:, ::1] tp = np.ascontiguousarray(taps, dtype=np.int64)
    cdef long long[::1] indptr = np.ascontiguousarray(ant_indptr, dtype=np.int64)
    cdef long long[::1] ids = np.ascontiguousarray(ant_ids, dtype=np.int64)
    cdef double complex[::1] p = np.array(points, dtype=np.complex128)
    cdef Py_ssize_t n = x.shape[0], m_t = x.shape[1]
    cdef Py_ssize_t c = tp.shape[0], k = tp.shape[1], q = p.shape[0]
    tap_idx = np.empty(n, dtype=np.int64)
    labels = np.empty((n, k), dtype=np.int64)
    resid = np.empty(n, dtype=np.float64)
    cdef long long[::1] ti = tap_idx
    cdef long long[:, ::1] lab = labels
    cdef double[::1] rs = resid
    buf_o = np.empty(m_t, dtype=np.intp); buf_k = np.empty(m_t, dtype=np.float64)
    buf_a = np.empty(c, dtype=np.uint8)
    buf_l = np.empty(k, dtype=np.int64); buf_b = np.empty(k, dtype=np.int64)
    cdef Py_ssize_t[::1] order = buf_o
    cdef double[::1] key = buf_k
    cdef unsigned char[::1] avail = buf_a
    cdef long long[::1] lab_t = buf_l
    cdef long long[::1] lab_best = buf_b
    cdef long long checks = 0, iters = 0, it
    cdef Py_ssize_t g, i, ai, ci, ant, tap_t, best_tap
    cdef long long lo, hi, any_avail
    cdef double total, eps, eps_t, best_eps
    for g in range(n):
        total = 0.0
        for i in range(m_t):
            key[i] = _cabs2(x[g, i])
            total += key[i]
        _argsort_desc(&key[0], &order[0], m_t)
        for ci in range(c):
            avail[ci] = 1
        best_eps = INFINITY
        best_tap = -1
        it = 0
        for ai in range(m_t):
            if it >= t1:
                break
            ant = order[ai]
            lo = indptr[ant]; hi = indptr[ant + 1]
            if hi == lo:
                continue
            any_avail = 0
            eps_t = INFINITY
            tap_t = -1
            for i in range(lo, hi):
                ci = ids[i]
                if not avail[ci]:
                    continue
                any_avail = 1
                eps = _tap_residual(x, g, total, tp, ci, p, &lab_t[0])
                checks += 1
                if eps < eps_t:
                    eps_t = eps
                    tap_t = ci
            if not any_avail:
                break
            it += 1
            if eps_t < best_eps:
                best_eps = eps_t
                best_tap = tap_t
            if eps_t < eps_th:
                break
            for i in range(lo, hi):
                avail[ids[i]] = 0
        iters += it
        # recompute labels of the winner (kept out of the scan loop)
        best_eps = _tap_residual(x, g, total, tp, best_tap, p, &lab_best[0])
        ti[g] = best_tap
        rs[g] = best_eps
        for i in range(k):
            lab[g, i] = lab_best[i]
    counters = {"tap_checks": int(checks), "iterations": int(iters),
                "symbol_metrics": int(checks * k * q)}
    return tap_idx, labels, resid, counters


def rscd(xt, taps, points, long long t2):
    cdef double complex[:, ::1] x = np.ascontiguousarray(xt, dtype=np.complex128)
    cdef long long[:, ::1] tp = np.ascontiguousarray(taps, dtype=np.int64)
    cdef double complex[::1] p = np.array(points, dtype=np.complex128)
    cdef Py_ssize_t n = x.shape[0], m_t = x.shape[1]
    cdef Py_ssize_t c = tp.shape[0], k = tp.shape[1], q = p.shape[0]
    tap_idx = np.empty(n, dtype=np.int64)
    labels = np.empty((n, k), dtype=np.int64)
    resid = np.empty(n, dtype=np.float64)
    cdef long long[::1] ti = tap_idx
    cdef long long[:, ::1] lab = labels
    cdef double[::1] rs = resid
    buf_h = np.empty(m_t, dtype=np.float64)
    buf_al = np.empty(c, dtype=np.float64)
    buf_or = np.empty(c, dtype=np.intp)
    buf_l = np.empty(k, dtype=np.int64); buf_b = np.empty(k, dtype=np.int64)
    cdef double[::1] herr = buf_h
    cdef double[::1] alpha = buf_al
    cdef Py_ssize_t[::1] order = buf_or
    cdef long long[::1] lab_t = buf_l
    cdef long long[::1] lab_best = buf_b
    cdef long long checks = 0
    cdef Py_ssize_t g, i, j, ci, t, best_tap, n_test
    cdef double total, eps, best_eps
    cdef double complex v
    for g in range(n):
        total = 0.0
        for i in range(m_t):
            v = x[g, i]
            total += _cabs2(v)
            j = _nearest(v, p)
            herr[i] = _cabs2(p[j] - v)
        for ci in range(c):
            alpha[ci] = 0.0
            for i in range(k):
                alpha[ci] += herr[tp[ci, i]]
        # stable ascending insertion sort of pattern indices by alpha
        for ci in range(c):
            order[ci] = ci
        for ci in range(1, c):
            i = ci
            while i > 0 and alpha[order[i]] < alpha[order[i - 1]]:
                j = order[i]; order[i] = order[i - 1]; order[i - 1] = j
                i -= 1
        best_eps = INFINITY
        best_tap = -1
        n_test = t2 if t2 < c else c
        for t in range(n_test):
            ci = order[t]
            eps = _tap_residual(x, g, total, tp, ci, p, &lab_t[0])
            checks += 1
            if eps < best_eps:
                best_eps = eps
                best_tap = ci
                for i in range(k):
                    lab_best[i] = lab_t[i]
        ti[g] = best_tap
        rs[g] = best_eps
        for i in range(k):
            lab[g, i] = lab_best[i]
    counters = {"tap_checks": int(checks), "iterations": int(checks),
                "symbol_metrics": int(n * m_t * q + checks * k * q),
                "alpha_metrics": int(n * c * k)}
    return tap_idx, labels, resid, counters
