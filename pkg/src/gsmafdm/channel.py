"""Doubly selective channel synthesis and effective MIMO matrices.

A realization has P paths with integer delay taps l_p, real Doppler indices
k_p shared by all antenna pairs, and per-link complex gains h[p, m_r, m_t].
The time-domain matrix of one path is Gamma(l_p) Delta(k_p) Pi^l_p, where Pi
is the forward cyclic shift, Delta the Doppler phase ramp and Gamma the
prefix phase correction.  Conjugating by the chirp transform gives the
transform-domain per-path matrix H_p, available both as an operator
composition (exact) and in banded closed form.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import sparse

from .errors import ConfigurationError, InputError
from .waveform import AfdmParams, daft, idaft

__all__ = [
    "PathSet",
    "EffectiveChannel",
    "NoiseModel",
    "generate_paths",
    "td_channel_matrix",
    "daft_channel_operator",
    "daft_channel_sparse",
    "assemble_effective",
    "apply_td_channel",
    "add_noise",
    "corrupt_csi",
]


@dataclass(frozen=True)
class PathSet:
    """One channel realization: delays/Dopplers per path, gains per link."""

    delays: np.ndarray      # (P,) int, delays[0] == 0
    dopplers: np.ndarray    # (P,) float
    gains: np.ndarray       # (P, M_r, M_t) complex

    def __post_init__(self):
        object.__setattr__(self, "delays", np.asarray(self.delays, dtype=np.int64))
        object.__setattr__(self, "dopplers", np.asarray(self.dopplers, dtype=np.float64))
        object.__setattr__(self, "gains", np.asarray(self.gains, dtype=np.complex128))
        if self.gains.ndim != 3 or self.delays.ndim != 1 or self.dopplers.ndim != 1:
            raise InputError("delays/dopplers must be 1-D and gains (P, M_r, M_t)")
        if not (len(self.delays) == len(self.dopplers) == self.gains.shape[0]):
            raise InputError("path count mismatch between delays, dopplers and gains")

    @property
    def p(self) -> int:
        return len(self.delays)

    @property
    def m_r(self) -> int:
        return self.gains.shape[1]

    @property
    def m_t(self) -> int:
        return self.gains.shape[2]

    def to_json(self) -> str:
        """Serialize for fixture replay."""
        return json.dumps({
            "delays": self.delays.tolist(),
            "dopplers": self.dopplers.tolist(),
            "gains_real": self.gains.real.tolist(),
            "gains_imag": self.gains.imag.tolist(),
        })

    @classmethod
    def from_json(cls, text: str) -> "PathSet":
        d = json.loads(text)
        gains = np.asarray(d["gains_real"]) + 1j * np.asarray(d["gains_imag"])
        return cls(delays=np.asarray(d["delays"]), dopplers=np.asarray(d["dopplers"]),
                   gains=gains)

    def to_csv(self) -> str:
        """One row per path: l_p, k_p, then gain re/im per (m_r, m_t) link."""
        cols = ["l_p", "k_p"] + [f"h_{f}_{r}_{t}" for r in range(self.m_r)
                                 for t in range(self.m_t) for f in ("re", "im")]
        lines = [",".join(cols)]
        for i in range(self.p):
            row = [str(int(self.delays[i])), repr(float(self.dopplers[i]))]
            for r in range(self.m_r):
                for t in range(self.m_t):
                    row += [repr(float(self.gains[i, r, t].real)),
                            repr(float(self.gains[i, r, t].imag))]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "PathSet":
        lines = [ln for ln in text.strip().splitlines() if ln]
        header = lines[0].split(",")
        n_links = (len(header) - 2) // 2
        m_r = max(int(c.split("_")[2]) for c in header[2:]) + 1
        m_t = n_links // m_r
        delays, dopplers = [], []
        gains = np.zeros((len(lines) - 1, m_r, m_t), dtype=np.complex128)
        for i, line in enumerate(lines[1:]):
            vals = line.split(",")
            delays.append(int(vals[0]))
            dopplers.append(float(vals[1]))
            flat = np.asarray(vals[2:], dtype=float)
            gains[i] = (flat[0::2] + 1j * flat[1::2]).reshape(m_r, m_t)
        return cls(delays=np.asarray(delays), dopplers=np.asarray(dopplers),
                   gains=gains)

    def with_gains(self, gains: np.ndarray) -> "PathSet":
        return PathSet(delays=self.delays, dopplers=self.dopplers, gains=gains)


def generate_paths(p: int, l_max: int, k_max: float, m_r: int, m_t: int,
                   rng: np.random.Generator, integer_doppler: bool = False,
                   delays: np.ndarray | None = None,
                   dopplers: np.ndarray | None = None) -> PathSet:
    """Draw a realization: uniform delays, Jakes-spectrum Dopplers, CN(0,1/P) gains.

    The first delay is pinned to zero and the rest are uniform integers on
    [1, l_max].  Doppler indices are k_max*cos(phi) with phi uniform on
    [-pi, pi], rounded to integers in integer_doppler mode.  Fixed delays or
    dopplers may be supplied to pin the realization structure.
    """
    if p < 1 or l_max < 0:
        raise ConfigurationError("need P >= 1 and l_max >= 0")
    if delays is None:
        if l_max == 0:
            if p > 1:
                warnings.warn("l_max = 0 with P > 1: all paths at delay zero",
                              stacklevel=2)
            delays = np.zeros(p, dtype=np.int64)
        else:
            delays = np.concatenate([[0], rng.integers(1, l_max + 1, size=p - 1)])
    else:
        delays = np.asarray(delays, dtype=np.int64)
        if delays.size != p:
            raise ConfigurationError("fixed delays must have length P")
    if dopplers is None:
        phi = rng.uniform(-np.pi, np.pi, size=p)
        dopplers = k_max * np.cos(phi)
    else:
        dopplers = np.asarray(dopplers, dtype=np.float64)
        if dopplers.size != p:
            raise ConfigurationError("fixed dopplers must have length P")
    if integer_doppler:
        dopplers = np.round(dopplers)
    gains = (rng.standard_normal((p, m_r, m_t)) +
             1j * rng.standard_normal((p, m_r, m_t))) * np.sqrt(0.5 / p)
    return PathSet(delays=delays, dopplers=dopplers, gains=gains)


def _prefix_phase(delay: int, n: int, c1: float) -> np.ndarray:
    """Gamma diagonal: rho_i = exp(-j 2 pi c1 (N^2 - 2N(l - i))) for i < l, else 1."""
    i = np.arange(n)
    rho = np.ones(n, dtype=np.complex128)
    head = i < delay
    rho[head] = np.exp(-2j * np.pi * c1 * (n * n - 2 * n * (delay - i[head])))
    return rho


def td_channel_matrix(delay: int, doppler: float, n: int, c1: float) -> np.ndarray:
    """Dense time-domain per-path matrix Gamma Delta Pi^delay (unit gain)."""
    if not 0 <= delay < n:
        raise InputError(f"need 0 <= delay < N, got {delay}")
    rows = np.arange(n)
    cols = (rows - delay) % n
    vals = _prefix_phase(delay, n, c1) * np.exp(-2j * np.pi * doppler * rows / n)
    out = np.zeros((n, n), dtype=np.complex128)
    out[rows, cols] = vals
    return out


def _apply_td(delay: int, doppler: float, n: int, c1: float,
              x: np.ndarray) -> np.ndarray:
    """Gamma Delta Pi^delay applied to the columns of x without forming it."""
    rows = np.arange(n)
    vals = _prefix_phase(delay, n, c1) * np.exp(-2j * np.pi * doppler * rows / n)
    return vals[:, None] * x[(rows - delay) % n, :]


def daft_channel_operator(delay: int, doppler: float, params: AfdmParams) -> np.ndarray:
    """Exact transform-domain per-path matrix via operator composition.

    Applies the inverse transform column-wise to the identity, the
    time-domain factors, then the forward transform: no dense chirp matrix
    is ever built.
    """
    n = params.n
    basis = _idaft_basis(params)
    return daft(_apply_td(delay, doppler, n, params.c1, basis), params)


@lru_cache(maxsize=64)
def _idaft_basis(params: AfdmParams) -> np.ndarray:
    basis = idaft(np.eye(params.n, dtype=np.complex128), params)
    basis.setflags(write=False)
    return basis


@lru_cache(maxsize=4096)
def _operator_cached(delay: int, doppler: float, params: AfdmParams) -> np.ndarray:
    h = daft_channel_operator(delay, doppler, params)
    h.setflags(write=False)
    return h


def zeta(offsets: np.ndarray, n: int) -> np.ndarray:
    """Doppler spreading kernel: geometric sum over x = a - b + Ind.

    Equals N when x is congruent to 0 mod N (the singular limit of the
    ratio form), and (exp(-j2pi x) - 1)/(exp(-j2pi x/N) - 1) otherwise.
    """
    x = np.asarray(offsets, dtype=np.float64)
    out = np.empty(x.shape, dtype=np.complex128)
    frac = np.abs(x - n * np.round(x / n))
    singular = frac < 1e-12
    reg = ~singular
    out[singular] = n
    num = np.exp(-2j * np.pi * x[reg]) - 1.0
    den = np.exp(-2j * np.pi * x[reg] / n) - 1.0
    out[reg] = num / den
    return out


def eta(delay: int, a: np.ndarray, b: np.ndarray, params: AfdmParams) -> np.ndarray:
    """Delay/chirp phase factor of the closed-form channel entry."""
    n, c1, c2 = params.n, params.c1, params.c2
    expo = n * c1 * delay * delay - b * delay + n * c2 * (b * b - a * a)
    return np.exp(2j * np.pi * expo / n)


def doppler_shift_index(delay: int, doppler: float, params: AfdmParams) -> float:
    """Column offset of the per-row peak: (k + 2 N c1 l) mod N."""
    return float((doppler + 2 * params.n * params.c1 * delay) % params.n)


def daft_channel_sparse(delay: int, doppler: float, params: AfdmParams,
                        k_nu: int | None = None) -> sparse.csr_matrix:
    """Banded closed-form per-path matrix (unit gain).

    Row a holds entries eta*zeta/N at the 2*k_nu+1 columns centred on
    round((a + Ind) mod N); for integer Doppler the band degenerates to one
    entry per row and matches the operator construction exactly.
    """
    n = params.n
    if k_nu is None:
        k_nu = params.k_nu
    k_nu = min(k_nu, (n - 1) // 2)  # wider bands would wrap onto themselves
    ind = doppler_shift_index(delay, doppler, params)
    a = np.arange(n)
    peak = np.round((a + ind) % n).astype(np.int64) % n
    offs = np.arange(-k_nu, k_nu + 1)
    cols = (peak[:, None] + offs[None, :]) % n
    rows = np.broadcast_to(a[:, None], cols.shape)
    x = rows - cols + ind
    vals = eta(delay, rows.astype(float), cols.astype(float), params) \
        * zeta(x, n) / n
    keep = np.abs(vals) > 1e-12
    mat = sparse.csr_matrix((vals[keep], (rows[keep], cols[keep])), shape=(n, n))
    return mat


@dataclass(frozen=True)
class EffectiveChannel:
    """Per-path, per-link and stacked MIMO channel matrices plus the shuffle."""

    paths: PathSet
    params: AfdmParams
    h_paths: np.ndarray = field(repr=False)   # (P, N, N) unit-gain per-path
    h: np.ndarray = field(repr=False)         # (N*M_r, N*M_t) antenna-major blocks
    perm: np.ndarray = field(repr=False)      # group-major column -> antenna-major column
    g: np.ndarray = field(repr=False)         # h with columns permuted

    @property
    def n(self) -> int:
        return self.params.n

    @property
    def m_r(self) -> int:
        return self.paths.m_r

    @property
    def m_t(self) -> int:
        return self.paths.m_t

    def block(self, m_r: int, m_t: int) -> np.ndarray:
        n = self.n
        return self.h[m_r * n:(m_r + 1) * n, m_t * n:(m_t + 1) * n]

    def shuffle(self, x: np.ndarray) -> np.ndarray:
        """Group-major stack (N groups of M_t) -> antenna-major stack."""
        return np.asarray(x).reshape(self.n, self.m_t).T.reshape(-1)

    def unshuffle(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z).reshape(self.m_t, self.n).T.reshape(-1)


def shuffle_permutation(n: int, m_t: int) -> np.ndarray:
    """perm such that (H P)[:, j] = H[:, perm[j]] for the group-major layout."""
    grid = np.arange(n * m_t).reshape(n, m_t)          # j = n_idx*M_t + m_t_idx
    m_idx, n_idx = np.meshgrid(np.arange(m_t), np.arange(n))
    return (m_idx * n + n_idx).reshape(-1)


def assemble_effective(paths: PathSet, params: AfdmParams) -> EffectiveChannel:
    """Build H_p, the stacked MIMO matrix H and the shuffled G = H P.

    G is realized by permuting columns of H, never by a dense product.
    """
    n, p = params.n, paths.p
    m_r, m_t = paths.m_r, paths.m_t
    h_paths = np.stack([
        _operator_cached(int(paths.delays[i]), float(paths.dopplers[i]), params)
        for i in range(p)
    ])
    # h_link[r, t] = sum_p gains[p, r, t] * h_paths[p]
    h_link = np.einsum("prt,pab->rtab", paths.gains, h_paths)
    h = h_link.transpose(0, 2, 1, 3).reshape(n * m_r, n * m_t)
    perm = shuffle_permutation(n, m_t)
    g = h[:, perm]
    return EffectiveChannel(paths=paths, params=params, h_paths=h_paths,
                            h=h, perm=perm, g=g)


def apply_td_channel(paths: PathSet, s_ext: np.ndarray, params: AfdmParams) -> np.ndarray:
    """Physical time-domain application over prefixed transmit signals.

    s_ext is (M_t, N + L_P) including the prefix; the return is the (M_r, N)
    post-prefix-removal receive block.  Each path delays into the prefix
    region, applies the Doppler ramp over the retained N samples, and the
    per-link gains combine the transmit streams.
    """
    n, lp = params.n, params.l_p
    if s_ext.shape != (paths.m_t, n + lp):
        raise InputError(f"expected transmit block of shape ({paths.m_t}, {n + lp})")
    core = np.arange(n)
    shifted = np.empty((paths.p, paths.m_t, n), dtype=np.complex128)
    for i in range(paths.p):
        idx = core + lp - int(paths.delays[i])
        ramp = np.exp(-2j * np.pi * float(paths.dopplers[i]) * core / n)
        shifted[i] = s_ext[:, idx] * ramp[None, :]
    return np.einsum("prt,ptn->rn", paths.gains, shifted)


@dataclass(frozen=True)
class NoiseModel:
    """Per-dimension noise level for a symbol SNR: N0 = K / (gamma_s * M_t)."""

    gamma_s: float
    k: int
    m_t: int

    def __post_init__(self):
        if self.gamma_s <= 0:
            raise ConfigurationError("gamma_s must be positive")

    @property
    def n0(self) -> float:
        return self.k / (self.gamma_s * self.m_t)


def add_noise(y_clean: np.ndarray, gamma_s: float, k: int, m_t: int,
              rng: np.random.Generator) -> np.ndarray:
    """Add circular complex Gaussian noise at N0 = K/(gamma_s*M_t)."""
    n0 = NoiseModel(gamma_s=gamma_s, k=k, m_t=m_t).n0
    shape = np.shape(y_clean)
    w = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(n0 / 2)
    return y_clean + w


def corrupt_csi(gains: np.ndarray, kappa_h: float, rng: np.random.Generator) -> np.ndarray:
    """Multiplicative estimation error: h * (1 + kappa_h * exp(j theta))."""
    if not 0 <= kappa_h < 1:
        raise ConfigurationError("need 0 <= kappa_h < 1")
    if kappa_h == 0:
        return np.array(gains, copy=True)
    theta = rng.uniform(0, 2 * np.pi, size=np.shape(gains))
    return gains * (1 + kappa_h * np.exp(1j * theta))
