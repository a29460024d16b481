"""Bit mapping between information bits and sparse multi-antenna frames.

Per chirp subcarrier, K of M_t transmit antennas are active.  The choice of
active set (the activation pattern, "TAP") carries L1 = floor(log2(C(M_t,K)))
bits and each active antenna carries one log2(Q)-bit constellation symbol,
so a group maps L_b = L1 + K*log2(Q) bits and a frame maps N*L_b bits.

Conventions (pinned by the worked four-antenna QPSK example and kept for
every configuration):

* the legal activation patterns are the first half plus the last half of the
  lexicographic K-combination list (this balances antenna usage compared to
  a pure prefix; for M_t=4, K=2 it yields {0,1},{0,2},{1,3},{2,3});
* the L1 activation bits are read as a little-endian index into that list;
* symbol bits are consumed log2(Q) at a time, big-endian, and placed on the
  active antennas in ascending antenna order.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import comb

import numpy as np

from .errors import ConfigurationError, DemapError, InputError

__all__ = [
    "GsmConfig",
    "TapCodebook",
    "Constellation",
    "build_tap_codebook",
    "mapping_matrix",
    "map_group",
    "demap_group",
    "build_frame",
    "demap_frame",
    "group_codewords",
]


@dataclass(frozen=True)
class GsmConfig:
    """System dimensions: antennas, subcarriers, sparsity and modulation order."""

    m_t: int
    m_r: int
    n: int
    k: int
    q: int

    def __post_init__(self):
        if not (1 <= self.k <= self.m_t):
            raise ConfigurationError(f"need 1 <= K <= M_t, got K={self.k}, M_t={self.m_t}")
        if self.m_r < 1 or self.n < 1:
            raise ConfigurationError("M_r and N must be positive")
        if self.q < 2 or (self.q & (self.q - 1)) != 0:
            raise ConfigurationError(f"Q must be a power of two >= 2, got {self.q}")

    @property
    def l1(self) -> int:
        return int(comb(self.m_t, self.k)).bit_length() - 1

    @property
    def l2(self) -> int:
        return self.k * (self.q.bit_length() - 1)

    @property
    def l_b(self) -> int:
        return self.l1 + self.l2

    @property
    def l_total(self) -> int:
        return self.n * self.l_b

    @property
    def n_taps(self) -> int:
        return 1 << self.l1

    @property
    def bits_per_symbol(self) -> int:
        return self.q.bit_length() - 1


@dataclass(frozen=True)
class TapCodebook:
    """Legal activation patterns, each a sorted tuple of K antenna indices."""

    m_t: int
    k: int
    taps: tuple[tuple[int, ...], ...]
    _index: dict = field(repr=False, hash=False, compare=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(self.taps)})

    def __len__(self) -> int:
        return len(self.taps)

    def index_of(self, tap) -> int:
        """Codebook index of an activation pattern; DemapError when illegal."""
        key = tuple(sorted(int(a) for a in tap))
        try:
            return self._index[key]
        except KeyError:
            raise DemapError(f"support {key} is not a legal activation pattern") from None

    def contains(self, tap) -> bool:
        return tuple(sorted(int(a) for a in tap)) in self._index

    def masks(self) -> np.ndarray:
        """(C, M_t) 0/1 activation masks in codebook order."""
        out = np.zeros((len(self.taps), self.m_t), dtype=np.uint8)
        for i, tap in enumerate(self.taps):
            out[i, list(tap)] = 1
        return out

    def tap_array(self) -> np.ndarray:
        """(C, K) antenna indices in codebook order, ascending within a row."""
        return np.array(self.taps, dtype=np.int64).reshape(len(self.taps), self.k)


def build_tap_codebook(m_t: int, k: int) -> TapCodebook:
    """Select the 2^L1 legal K-of-M_t activation patterns.

    Takes ceil(C/2) patterns from the head and the remainder from the tail of
    the lexicographic combination list, then keeps the whole selection in
    lexicographic order.
    """
    if not (1 <= k <= m_t):
        raise ConfigurationError(f"need 1 <= K <= M_t, got K={k}, M_t={m_t}")
    total = comb(m_t, k)
    c = 1 << (total.bit_length() - 1)
    all_combos = list(combinations(range(m_t), k))
    n_head = (c + 1) // 2
    n_tail = c - n_head
    chosen = all_combos[:n_head] + (all_combos[len(all_combos) - n_tail:] if n_tail else [])
    return TapCodebook(m_t=m_t, k=k, taps=tuple(chosen))


def _gray_pam_levels(bits_per_axis: int, descending: bool) -> np.ndarray:
    """Map each bit label to an odd integer PAM level via a Gray ruler.

    Ascending: label 0...0 -> most negative level (used for the in-phase
    axis so that the one-bit case is 0 -> -1, 1 -> +1).  Descending mirrors
    it for the quadrature axis (0 -> +, 1 -> -).
    """
    m = 1 << bits_per_axis
    levels = np.zeros(m)
    for i in range(m):
        gray = i ^ (i >> 1)
        lev = 2 * i - (m - 1)
        levels[gray] = -lev if descending else lev
    return levels


def _make_points(q: int) -> np.ndarray:
    """Unit-average-energy constellation with the pinned bit labeling."""
    bps = q.bit_length() - 1
    if q == 2:
        return np.array([-1.0 + 0j, 1.0 + 0j])
    if bps % 2 == 0:
        half = bps // 2
        i_lev = _gray_pam_levels(half, descending=False)
        q_lev = _gray_pam_levels(half, descending=True)
        labels = np.arange(q)
        re = i_lev[labels >> half]
        im = q_lev[labels & ((1 << half) - 1)]
        pts = re + 1j * im
        return pts / np.sqrt(np.mean(np.abs(pts) ** 2))
    # odd number of bits per symbol: Gray-labeled PSK, offset off the axes
    order = np.zeros(q, dtype=int)
    for i in range(q):
        order[i ^ (i >> 1)] = i
    return np.exp(1j * (np.pi / q + 2 * np.pi * order / q))


@dataclass(frozen=True)
class Constellation:
    """Q complex points indexed by their (big-endian) bit label."""

    q: int
    points: np.ndarray = field(hash=False, compare=False, default=None)

    def __post_init__(self):
        if self.q < 2 or (self.q & (self.q - 1)) != 0:
            raise ConfigurationError(f"Q must be a power of two >= 2, got {self.q}")
        if self.points is None:
            object.__setattr__(self, "points", _make_points(self.q))
        pts = np.asarray(self.points, dtype=np.complex128)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def bits_per_symbol(self) -> int:
        return self.q.bit_length() - 1

    def index_of(self, value: complex, tol: float = 1e-9) -> int:
        d = np.abs(self.points - value)
        i = int(np.argmin(d))
        if d[i] > tol:
            raise DemapError(f"{value} is not a constellation point")
        return i


def mapping_matrix(tap, m_t: int) -> np.ndarray:
    """(M_t, K) selection matrix: column k is the basis vector at tap[k]."""
    tap = [int(a) for a in tap]
    if len(set(tap)) != len(tap) or any(a < 0 or a >= m_t for a in tap):
        raise InputError(f"bad activation pattern {tap} for M_t={m_t}")
    out = np.zeros((m_t, len(tap)))
    out[tap, np.arange(len(tap))] = 1.0
    return out


def _bits_to_tap_index(bits: np.ndarray) -> int:
    # little-endian: the first activation bit has weight 1
    return int(np.dot(bits, 1 << np.arange(bits.size)))


def _tap_index_to_bits(idx: int, l1: int) -> np.ndarray:
    return ((idx >> np.arange(l1)) & 1).astype(np.uint8)


def _bits_to_symbol_labels(bits: np.ndarray, k: int, bps: int) -> np.ndarray:
    # big-endian within each log2(Q)-bit chunk
    chunks = bits.reshape(k, bps)
    weights = 1 << np.arange(bps - 1, -1, -1)
    return chunks @ weights


def _symbol_labels_to_bits(labels: np.ndarray, bps: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    shifts = np.arange(bps - 1, -1, -1)
    return ((labels[:, None] >> shifts) & 1).astype(np.uint8).reshape(-1)


def _check_bits(bits, expect: int) -> np.ndarray:
    arr = np.asarray(bits, dtype=np.uint8).reshape(-1)
    if arr.size != expect:
        raise InputError(f"expected {expect} bits, got {arr.size}")
    if np.any(arr > 1):
        raise InputError("bits must be 0/1")
    return arr


def map_group(bits, codebook: TapCodebook, constellation: Constellation,
              config: GsmConfig | None = None) -> np.ndarray:
    """Map one L_b-bit group to its length-M_t transmit vector."""
    k, m_t = codebook.k, codebook.m_t
    l1 = len(codebook).bit_length() - 1
    bps = constellation.bits_per_symbol
    bits = _check_bits(bits, l1 + k * bps)
    tap = codebook.taps[_bits_to_tap_index(bits[:l1])]
    labels = _bits_to_symbol_labels(bits[l1:], k, bps)
    out = np.zeros(m_t, dtype=np.complex128)
    out[list(tap)] = constellation.points[labels]
    return out


def demap_group(group, codebook: TapCodebook, constellation: Constellation) -> np.ndarray:
    """Invert map_group.

    Accepts either a length-M_t vector (support is located and checked
    against the codebook) or a (tap, symbols) pair where tap is an
    activation pattern or codebook index and symbols are points or labels.
    """
    k = codebook.k
    l1 = len(codebook).bit_length() - 1
    bps = constellation.bits_per_symbol
    if isinstance(group, tuple) and len(group) == 2:
        tap, symbols = group
        tap_idx = int(tap) if np.isscalar(tap) else codebook.index_of(tap)
        if not 0 <= tap_idx < len(codebook):
            raise DemapError(f"activation index {tap_idx} out of range")
        symbols = np.asarray(symbols)
        if symbols.size != k:
            raise DemapError(f"expected {k} symbols, got {symbols.size}")
        if np.iscomplexobj(symbols) or symbols.dtype.kind == "f":
            labels = np.array([constellation.index_of(s) for s in symbols])
        else:
            labels = symbols.astype(np.int64)
    else:
        vec = np.asarray(group, dtype=np.complex128).reshape(-1)
        if vec.size != codebook.m_t:
            raise DemapError(f"expected a length-{codebook.m_t} vector")
        support = np.flatnonzero(vec)
        if support.size != k:
            raise DemapError(f"support size {support.size} != K={k}")
        tap_idx = codebook.index_of(support)
        labels = np.array([constellation.index_of(v) for v in vec[support]])
    return np.concatenate([_tap_index_to_bits(tap_idx, l1),
                           _symbol_labels_to_bits(labels, bps)])


def build_frame(bits, config: GsmConfig, codebook: TapCodebook,
                constellation: Constellation) -> np.ndarray:
    """Map N*L_b bits to the (M_t, N) frame; column n is group n."""
    bits = _check_bits(bits, config.l_total)
    groups = bits.reshape(config.n, config.l_b)
    tap_idx, labels = _words_to_indices(groups, config)
    return _indices_to_frame(tap_idx, labels, config, codebook, constellation)


def demap_frame(frame: np.ndarray, config: GsmConfig, codebook: TapCodebook,
                constellation: Constellation) -> np.ndarray:
    """Column-wise inverse of build_frame."""
    frame = np.asarray(frame)
    if frame.shape != (config.m_t, config.n):
        raise InputError(f"expected a ({config.m_t}, {config.n}) frame")
    cols = [demap_group(frame[:, j], codebook, constellation) for j in range(config.n)]
    return np.concatenate(cols)


def _words_to_indices(groups: np.ndarray, config: GsmConfig):
    """Split (n_words, L_b) bit rows into activation indices and symbol labels."""
    l1, k, bps = config.l1, config.k, config.bits_per_symbol
    tap_bits = groups[:, :l1]
    tap_idx = tap_bits @ (1 << np.arange(l1)) if l1 else np.zeros(groups.shape[0], dtype=np.int64)
    sym_bits = groups[:, l1:].reshape(groups.shape[0], k, bps)
    labels = sym_bits @ (1 << np.arange(bps - 1, -1, -1))
    return np.asarray(tap_idx, dtype=np.int64), np.asarray(labels, dtype=np.int64)


def _indices_to_frame(tap_idx, labels, config, codebook, constellation) -> np.ndarray:
    taps = codebook.tap_array()[tap_idx]               # (N, K)
    vals = constellation.points[labels]                # (N, K)
    frame = np.zeros((config.m_t, config.n), dtype=np.complex128)
    cols = np.repeat(np.arange(tap_idx.size), config.k)
    frame[taps.reshape(-1), cols] = vals.reshape(-1)
    return frame


def group_codewords(config: GsmConfig, codebook: TapCodebook,
                    constellation: Constellation):
    """All 2^L_b group vectors in bit order.

    Returns (codewords, tap_idx, labels): (D, M_t) complex matrix plus the
    activation index and (D, K) symbol labels of each word.  Row w encodes
    the L_b-bit word whose big-endian integer value is w.
    """
    d = 1 << config.l_b
    words = np.arange(d)
    shifts = np.arange(config.l_b - 1, -1, -1)
    bits = ((words[:, None] >> shifts) & 1).astype(np.uint8)
    tap_idx, labels = _words_to_indices(bits, config)
    taps = codebook.tap_array()[tap_idx]
    vals = constellation.points[labels]
    cw = np.zeros((d, config.m_t), dtype=np.complex128)
    rows = np.repeat(np.arange(d), config.k)
    cw[rows, taps.reshape(-1)] = vals.reshape(-1)
    return cw, tap_idx, labels


def bits_from_indices(tap_idx: np.ndarray, labels: np.ndarray,
                      config: GsmConfig) -> np.ndarray:
    """Assemble the frame bit sequence from per-group detection indices."""
    n, l1, bps = config.n, config.l1, config.bits_per_symbol
    out = np.empty((n, config.l_b), dtype=np.uint8)
    if l1:
        out[:, :l1] = (np.asarray(tap_idx)[:, None] >> np.arange(l1)) & 1
    shifts = np.arange(bps - 1, -1, -1)
    sym_bits = (np.asarray(labels)[:, :, None] >> shifts) & 1
    out[:, l1:] = sym_bits.reshape(n, config.k * bps)
    return out.reshape(-1)
