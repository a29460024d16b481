"""Per-group detection kernels, pure-numpy reference implementation.

Each function processes every group of one frame.  All tie-breaks take the
lowest index (argmin/argmax first occurrence, stable sorts), which the
compiled twin reproduces exactly.
"""
from __future__ import annotations

import numpy as np

__all__ = ["group_mld", "llr_matrix", "llrd", "tc_llrd", "grcd", "rscd",
           "slice_symbols", "mld_scan"]


def mld_scan(t_stack: np.ndarray, y: np.ndarray,
             mem_limit: int = 1 << 22) -> tuple[int, float]:
    """Best frame candidate index over the product of per-group codewords.

    t_stack is (n_groups, d, m): the receive-space image of every group
    codeword.  Candidate c has image sum_j t_stack[j, digit_j(c)] with
    digits in big-endian group order; returns (argmin index, metric) of
    ||image - y||^2, ties to the lowest candidate index.  Suffix partial
    sums are materialized level by level; leading-group assignments are
    streamed when the full table would exceed mem_limit elements.
    """
    n, d, m = t_stack.shape

    def _table(blocks) -> np.ndarray:
        v = np.zeros((1, m), dtype=np.complex128)
        for t_j in blocks:
            v = (v[:, None, :] + t_j[None, :, :]).reshape(-1, m)
        return v

    n_suffix = n
    while n_suffix > 1 and (d ** n_suffix) * m > mem_limit:
        n_suffix -= 1
    suffix = _table(t_stack[n - n_suffix:])
    best_idx, best_metric = -1, np.inf
    n_prefix = d ** (n - n_suffix)
    radix_p = d ** np.arange(n - n_suffix - 1, -1, -1)
    for pi in range(n_prefix):
        v_pref = -y.astype(np.complex128)
        for j, w in enumerate((pi // radix_p) % d if n_prefix > 1 else []):
            v_pref = v_pref + t_stack[j][w]
        diff = suffix + v_pref[None, :]
        metric = np.einsum("ij,ij->i", diff.real, diff.real)
        metric += np.einsum("ij,ij->i", diff.imag, diff.imag)
        i = int(np.argmin(metric))
        if metric[i] < best_metric:
            best_metric = float(metric[i])
            best_idx = pi * suffix.shape[0] + i
    return best_idx, best_metric


def slice_symbols(values: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Nearest constellation label per entry, ties to the lowest label."""
    d = np.abs(np.asarray(values)[..., None] - points) ** 2
    return np.argmin(d, axis=-1)


def group_mld(xt: np.ndarray, codewords: np.ndarray):
    """Scan all codewords per group; returns (best_word (n,), counters)."""
    metric = np.abs(xt[:, None, :] - codewords[None, :, :]) ** 2
    best = np.argmin(metric.sum(axis=2), axis=1)
    return best, {"codeword_metrics": xt.shape[0] * codewords.shape[0]}


def llr_matrix(xt: np.ndarray, points: np.ndarray, n0: float, k: int) -> np.ndarray:
    """Per-antenna activity log-likelihood ratios, max-shifted for stability."""
    m_t = xt.shape[1]
    prior = np.log(k) - np.log(m_t - k)
    e = -np.abs(xt[:, :, None] - points[None, None, :]) ** 2 / n0
    shift = e.max(axis=2)
    lse = shift + np.log(np.exp(e - shift[:, :, None]).sum(axis=2))
    return prior + np.abs(xt) ** 2 / n0 + lse


def _top_k_sets(lam: np.ndarray, k: int):
    """Indices of the K largest LLRs per group, ascending, ties to lower index."""
    order = np.argsort(-lam, axis=1, kind="stable")
    return np.sort(order[:, :k], axis=1)


def _legalize(sets: np.ndarray, masks: np.ndarray):
    """Hamming distances of each group's activation set to every legal mask."""
    n, m_t = sets.shape[0], masks.shape[1]
    set_mask = np.zeros((n, m_t), dtype=np.uint8)
    np.put_along_axis(set_mask, sets, 1, axis=1)
    dist = (set_mask[:, None, :] != masks[None, :, :]).sum(axis=2)
    return set_mask, dist


def llrd(lam, xt, masks, taps, points):
    """Plain LLR detector: top-K antennas kept for symbols even when illegal.

    Returns (tap_idx, positions, labels, counters); tap_idx is the legal
    pattern at minimum Hamming distance (lowest index on ties) so the bit
    output is always decodable, while symbols are detected at the raw top-K
    positions.
    """
    n, m_t = lam.shape
    q = points.shape[0]
    k = taps.shape[1]
    positions = _top_k_sets(lam, k)
    _, dist = _legalize(positions, masks)
    tap_idx = np.argmin(dist, axis=1)
    rows = np.arange(n)[:, None]
    labels = slice_symbols(xt[rows, positions], points)
    counters = {"llr_evals": n * m_t * q, "symbol_metrics": n * k * q}
    return tap_idx, positions, labels, counters


def tc_llrd(lam, xt, masks, taps, points):
    """Activation-pattern checking detector (projects illegal top-K sets).

    Distance-0 sets pass through; otherwise the legal patterns at minimum
    Hamming distance compete on their masked LLR mass sum(lam[m], m in u).
    The squared-norm form is degenerate once inactive antennas reach
    |lam| comparable to active ones (always at high SNR), so the signed
    sum is used; both agree whenever the competing LLRs are positive.
    """
    n, m_t = lam.shape
    q = points.shape[0]
    k = taps.shape[1]
    positions = _top_k_sets(lam, k)
    _, dist = _legalize(positions, masks)
    dmin = dist.min(axis=1)
    scores = lam @ masks.T.astype(np.float64)
    scores[dist != dmin[:, None]] = -np.inf
    tap_idx = np.argmax(scores, axis=1)
    legal = dmin == 0
    tap_idx[legal] = np.argmin(dist[legal], axis=1)
    u = np.where(legal, 0, (dist == dmin[:, None]).sum(axis=1))
    rows = np.arange(n)[:, None]
    chosen = taps[tap_idx]
    labels = slice_symbols(xt[rows, chosen], points)
    counters = {"llr_evals": n * m_t * q, "symbol_metrics": n * k * q,
                "tc_candidates": int(u.sum()), "tc_worst_u": int(u.max())}
    return tap_idx, labels, counters


def _residual(xt_g: np.ndarray, tap: np.ndarray, points: np.ndarray):
    """Least-squares gather + per-entry slice; returns (labels, residual)."""
    vals = xt_g[tap]
    labels = slice_symbols(vals, points)
    err = np.abs(vals - points[labels]) ** 2
    on = np.abs(vals) ** 2
    total = np.abs(xt_g) ** 2
    resid = total.sum() - on.sum() + err.sum()
    return labels, float(resid)


def grcd(xt, taps, ant_indptr, ant_ids, points, t1, eps_th):
    """Greedy residual search over patterns containing the most reliable antennas.

    Patterns evaluated in one pass are removed from the pool, so none is
    tested twice; the best residual seen is returned after early stop, pool
    exhaustion or t1 passes.
    """
    n, m_t = xt.shape
    c, k = taps.shape
    q = points.shape[0]
    tap_idx = np.empty(n, dtype=np.int64)
    labels = np.empty((n, k), dtype=np.int64)
    resid = np.empty(n)
    checks = 0
    iters = 0
    for g in range(n):
        xg = xt[g]
        order = np.argsort(-np.abs(xg) ** 2, kind="stable")
        avail = np.ones(c, dtype=bool)
        best_eps = np.inf
        best_tap = -1
        best_lab = None
        it = 0
        for ant in order:
            if it >= t1:
                break
            members = ant_ids[ant_indptr[ant]:ant_indptr[ant + 1]]
            if members.size == 0:
                continue  # antenna in no legal pattern: move down the list
            cand = members[avail[members]]
            if cand.size == 0:
                break  # every pattern for this antenna already checked
            it += 1
            eps_t = np.inf
            tap_t = -1
            lab_t = None
            for ci in cand:
                lab, eps = _residual(xg, taps[ci], points)
                checks += 1
                if eps < eps_t:
                    eps_t, tap_t, lab_t = eps, ci, lab
            if eps_t < best_eps:
                best_eps, best_tap, best_lab = eps_t, tap_t, lab_t
            if eps_t < eps_th:
                break
            avail[cand] = False
        iters += it
        tap_idx[g] = best_tap
        labels[g] = best_lab
        resid[g] = best_eps
    counters = {"tap_checks": checks, "iterations": iters,
                "symbol_metrics": checks * k * q}
    return tap_idx, labels, resid, counters


def rscd(xt, taps, points, t2):
    """Reduced-space search: rank patterns by hard/soft mismatch, test the top t2."""
    n, m_t = xt.shape
    c, k = taps.shape
    q = points.shape[0]
    tap_idx = np.empty(n, dtype=np.int64)
    labels = np.empty((n, k), dtype=np.int64)
    resid = np.empty(n)
    checks = 0
    for g in range(n):
        xg = xt[g]
        hard = points[slice_symbols(xg, points)]
        alpha = (np.abs(hard - xg) ** 2)[taps].sum(axis=1)
        order = np.argsort(alpha, kind="stable")
        best_eps = np.inf
        best_tap = -1
        best_lab = None
        for t in range(min(t2, c)):
            ci = order[t]
            lab, eps = _residual(xg, taps[ci], points)
            checks += 1
            if eps < best_eps:
                best_eps, best_tap, best_lab = eps, ci, lab
        tap_idx[g] = best_tap
        labels[g] = best_lab
        resid[g] = best_eps
    counters = {"tap_checks": checks, "iterations": checks,
                "symbol_metrics": n * m_t * q + checks * k * q,
                "alpha_metrics": n * c * k}
    return tap_idx, labels, resid, counters
