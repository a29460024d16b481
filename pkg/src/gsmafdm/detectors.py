"""Frame detectors: joint ML, linear-MMSE based group detectors, greedy and
reduced-space residual searches.

All group detectors first equalize the whole frame, split the soft estimate
into N groups and decide each group independently.  The hot per-group loops
live in the kernel backends (compiled when available); this module owns the
equalizer, candidate tables, bit assembly and operation counting.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import log2

import numpy as np

from . import _kernels
from .errors import CapabilityError, ConfigurationError, NumericError
from .mapping import (Constellation, GsmConfig, TapCodebook, bits_from_indices,
                      build_tap_codebook, group_codewords)

__all__ = [
    "DetectorContext",
    "DetectionResult",
    "DETECTOR_NAMES",
    "lmmse_equalize",
    "mld_joint",
    "lmmse_mld",
    "llrd_detect",
    "tc_llrd_detect",
    "grcd_detect",
    "rscd_detect",
    "detect_frame",
    "llr_per_antenna",
    "symbolwise_ml",
    "complexity_model_ops",
]

DETECTOR_NAMES = ("mld", "lmmse-mld", "lmmse-llrd", "lmmse-tc-llrd", "grcd", "rscd")

MLD_MAX_BITS = 24


@dataclass(frozen=True)
class DetectorContext:
    """Precomputed tables shared by every detector for one system setup."""

    config: GsmConfig
    codebook: TapCodebook
    constellation: Constellation
    codewords: np.ndarray = field(repr=False, default=None)    # (D, M_t)
    cw_tap: np.ndarray = field(repr=False, default=None)       # (D,)
    cw_labels: np.ndarray = field(repr=False, default=None)    # (D, K)
    taps: np.ndarray = field(repr=False, default=None)         # (C, K)
    masks: np.ndarray = field(repr=False, default=None)        # (C, M_t)
    ant_indptr: np.ndarray = field(repr=False, default=None)
    ant_ids: np.ndarray = field(repr=False, default=None)

    @classmethod
    def build(cls, config: GsmConfig,
              codebook: TapCodebook | None = None,
              constellation: Constellation | None = None) -> "DetectorContext":
        codebook = codebook or build_tap_codebook(config.m_t, config.k)
        constellation = constellation or Constellation(config.q)
        cw, cw_tap, cw_labels = group_codewords(config, codebook, constellation)
        taps = codebook.tap_array()
        masks = codebook.masks()
        members = [np.flatnonzero(masks[:, a]).astype(np.int64)
                   for a in range(config.m_t)]
        indptr = np.zeros(config.m_t + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([m.size for m in members])
        ids = np.concatenate(members) if members else np.zeros(0, dtype=np.int64)
        return cls(config=config, codebook=codebook, constellation=constellation,
                   codewords=cw, cw_tap=cw_tap, cw_labels=cw_labels,
                   taps=taps, masks=masks, ant_indptr=indptr, ant_ids=ids)

    @property
    def points(self) -> np.ndarray:
        return self.constellation.points


@dataclass
class DetectionResult:
    """Recovered bits plus per-group decisions and operation counters."""

    bits: np.ndarray
    tap_indices: np.ndarray
    symbol_labels: np.ndarray
    residuals: np.ndarray | None
    counters: dict


def lmmse_equalize(y: np.ndarray, g: np.ndarray, gamma_s: float) -> np.ndarray:
    """Regularized linear equalizer: solve (G^H G + I/gamma_s) x = G^H y."""
    y = np.asarray(y, dtype=np.complex128).reshape(-1)
    if not np.all(np.isfinite(y)) or not np.all(np.isfinite(g)):
        raise NumericError("non-finite input to the equalizer")
    gram = g.conj().T @ g
    gram.flat[:: gram.shape[0] + 1] += 1.0 / gamma_s
    try:
        return np.linalg.solve(gram, g.conj().T @ y)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"equalizer solve failed: {exc}") from exc


def llr_per_antenna(xt_group: np.ndarray, n0: float, k: int, m_t: int,
                    constellation: Constellation) -> np.ndarray:
    """Activity log-likelihood ratios of one group (K < M_t required)."""
    if k >= m_t:
        raise ConfigurationError("the LLR prior needs K < M_t")
    xt = np.asarray(xt_group, dtype=np.complex128).reshape(1, m_t)
    return _kernels.active.llr_matrix(xt, constellation.points, float(n0), k)[0]


def symbolwise_ml(values: np.ndarray, constellation: Constellation) -> np.ndarray:
    """Per-entry nearest constellation point, ties to the lowest label."""
    labels = _kernels.active.slice_symbols(
        np.asarray(values, dtype=np.complex128), constellation.points)
    return constellation.points[labels]


def mld_joint(y: np.ndarray, g: np.ndarray, ctx: DetectorContext) -> DetectionResult:
    """Exhaustive scan of all 2^L frame candidates (guarded).

    The scan over the per-group codeword product runs in the kernel
    backend; candidate enumeration order equals bit order, so argmin ties
    resolve to the lowest candidate index.
    """
    cfg = ctx.config
    if cfg.l_total > MLD_MAX_BITS:
        raise CapabilityError(
            f"joint search over 2^{cfg.l_total} candidates is infeasible; "
            "use a per-group detector")
    y = np.asarray(y, dtype=np.complex128).reshape(-1)
    d = ctx.codewords.shape[0]
    n, m_t = cfg.n, cfg.m_t
    total = d ** n
    t_stack = np.stack(
        [(g[:, j * m_t:(j + 1) * m_t] @ ctx.codewords.T).T for j in range(n)])
    best_idx, _ = _kernels.active.mld_scan(t_stack, y)
    radix = d ** np.arange(n - 1, -1, -1)
    digits = (best_idx // radix) % d
    tap_idx = ctx.cw_tap[digits]
    labels = ctx.cw_labels[digits]
    bits = bits_from_indices(tap_idx, labels, cfg)
    counters = {"codeword_metrics": total, "equalizer_solves": 0}
    return DetectionResult(bits=bits, tap_indices=tap_idx, symbol_labels=labels,
                           residuals=None, counters=counters)


def _group_stage(name: str, xt_groups: np.ndarray, ctx: DetectorContext,
                 n0: float, t1: int, t2: int, eps_th: float):
    kern = _kernels.active
    cfg = ctx.config
    if name == "lmmse-mld":
        word, counters = kern.group_mld(xt_groups, ctx.codewords)
        return ctx.cw_tap[word], ctx.cw_labels[word], None, counters
    if name in ("lmmse-llrd", "lmmse-tc-llrd"):
        if cfg.k >= cfg.m_t:
            raise ConfigurationError("LLR detectors need K < M_t")
        lam = kern.llr_matrix(xt_groups, ctx.points, n0, cfg.k)
        if name == "lmmse-llrd":
            tap_idx, positions, labels, counters = kern.llrd(
                lam, xt_groups, ctx.masks, ctx.taps, ctx.points)
            return tap_idx, labels, None, counters
        tap_idx, labels, counters = kern.tc_llrd(
            lam, xt_groups, ctx.masks, ctx.taps, ctx.points)
        return tap_idx, labels, None, counters
    if name == "grcd":
        tap_idx, labels, resid, counters = kern.grcd(
            xt_groups, ctx.taps, ctx.ant_indptr, ctx.ant_ids, ctx.points,
            t1, eps_th)
        return tap_idx, labels, resid, counters
    if name == "rscd":
        tap_idx, labels, resid, counters = kern.rscd(
            xt_groups, ctx.taps, ctx.points, t2)
        return tap_idx, labels, resid, counters
    raise ConfigurationError(f"unknown detector {name!r}")


def detect_frame(name: str, y: np.ndarray, g: np.ndarray, gamma_s: float,
                 ctx: DetectorContext, t1: int = 3, t2: int = 3,
                 eps_th: float | None = None) -> DetectionResult:
    """Run one detector on one received frame.

    y is the stacked transform-domain receive vector, g the effective
    channel matrix seen by the receiver, gamma_s the linear symbol SNR.
    """
    if name == "mld":
        return mld_joint(y, g, ctx)
    cfg = ctx.config
    n0 = cfg.k / (gamma_s * cfg.m_t)
    if eps_th is None:
        eps_th = cfg.k * n0
    xt = lmmse_equalize(y, g, gamma_s)
    xt_groups = np.ascontiguousarray(xt.reshape(cfg.n, cfg.m_t))
    tap_idx, labels, resid, counters = _group_stage(
        name, xt_groups, ctx, n0, t1, t2, eps_th)
    counters = dict(counters)
    counters["equalizer_solves"] = 1
    bits = bits_from_indices(tap_idx, labels, cfg)
    return DetectionResult(bits=bits, tap_indices=np.asarray(tap_idx),
                           symbol_labels=np.asarray(labels),
                           residuals=resid, counters=counters)


def lmmse_mld(y, g, gamma_s, ctx: DetectorContext) -> DetectionResult:
    """Equalize, then scan the per-group codeword table."""
    return detect_frame("lmmse-mld", y, g, gamma_s, ctx)


def llrd_detect(y, g, gamma_s, ctx: DetectorContext) -> DetectionResult:
    """Equalize, then take the top-K activity LLRs per group."""
    return detect_frame("lmmse-llrd", y, g, gamma_s, ctx)


def tc_llrd_detect(y, g, gamma_s, ctx: DetectorContext) -> DetectionResult:
    """Equalize, then LLR detection with legal-pattern projection."""
    return detect_frame("lmmse-tc-llrd", y, g, gamma_s, ctx)


def grcd_detect(y, g, gamma_s, ctx: DetectorContext, t1: int = 3,
                eps_th: float | None = None) -> DetectionResult:
    """Equalize, then greedy residual search over reliable antennas."""
    return detect_frame("grcd", y, g, gamma_s, ctx, t1=t1, eps_th=eps_th)


def rscd_detect(y, g, gamma_s, ctx: DetectorContext, t2: int = 3) -> DetectionResult:
    """Equalize, then test the t2 most reliable patterns."""
    return detect_frame("rscd", y, g, gamma_s, ctx, t2=t2)


def complexity_model_ops(name: str, config: GsmConfig, counters: dict,
                         frames: int, worst_case_tc: bool = False) -> float:
    """Detection cost in the per-group operation accounting used for
    complexity comparisons.

    The equalizer contributes (N M_t)^2 per solve; the detector stage is
    charged per group from the measured iteration/candidate counts:

    * group ML: 2^L_b candidate checks,
    * LLR detectors: M_t Q for the ratios plus Q K for the symbols, the
      pattern-check step adding M_t per scored candidate,
    * greedy search: M_t log2 M_t sorting plus (Q K + M_t) per pass,
    * reduced-space search: C K + C log2 C ranking plus (Q K + M_t) per
      tested pattern.
    """
    cfg = config
    n, m_t, k, q, c = cfg.n, cfg.m_t, cfg.k, cfg.q, cfg.n_taps
    groups = frames * n
    eq = counters.get("equalizer_solves", 0) * (n * m_t) ** 2
    if name == "mld":
        return counters.get("codeword_metrics", 0) * m_t
    if name == "lmmse-mld":
        return eq + counters.get("codeword_metrics", 0)
    if name == "lmmse-llrd":
        return eq + groups * (m_t * q + q * k)
    if name == "lmmse-tc-llrd":
        u_total = groups * c if worst_case_tc else counters.get("tc_candidates", 0)
        return eq + groups * (m_t * q + q * k) + m_t * u_total
    if name == "grcd":
        return eq + groups * m_t * log2(m_t) \
            + counters.get("iterations", 0) * (q * k + m_t)
    if name == "rscd":
        return eq + groups * (c * k + c * log2(c)) \
            + counters.get("iterations", 0) * (q * k + m_t)
    raise ConfigurationError(f"unknown detector {name!r}")
