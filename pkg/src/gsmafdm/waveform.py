"""Chirp-carrier (affine Fourier) transforms and prefix handling.

The forward transform is a unitary DFT sandwiched between two quadratic
phase ramps, daft(s) = L(c2) F L(c1) s with L(c) = diag(exp(-j 2 pi c i^2)).
Both directions are computed with FFTs plus two diagonal multiplies, never
as dense matrix products; a dense matrix constructor is provided only as a
reference for validation.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InputError

__all__ = [
    "AfdmParams",
    "choose_c1",
    "choose_c2",
    "validate_dimensions",
    "daft",
    "idaft",
    "daft_matrix",
    "add_cpp",
    "remove_cpp",
]


def choose_c1(alpha_max: int, k_nu: int, n: int) -> float:
    """First chirp rate that keeps per-path channel supports disjoint."""
    if n < 1 or alpha_max < 0 or k_nu < 0:
        raise ConfigurationError("need N >= 1 and non-negative Doppler bounds")
    return (2 * (alpha_max + k_nu) + 1) / (2 * n)


def choose_c2(n: int) -> float:
    """Default second chirp rate: a fixed rational well below 1/(2N)."""
    if n < 1:
        raise ConfigurationError("need N >= 1")
    return 1.0 / (4 * n * n)


def validate_dimensions(alpha_max: int, k_nu: int, l_max: int, n: int) -> None:
    """Require 2(alpha_max+k_nu)(l_max+1) + l_max < N for disjoint supports."""
    if alpha_max < 0 or k_nu < 0 or l_max < 0 or n < 1:
        raise ConfigurationError("counts must be non-negative, N >= 1")
    lhs = 2 * (alpha_max + k_nu) * (l_max + 1) + l_max
    if lhs >= n:
        raise ConfigurationError(
            f"2(alpha_max+k_nu)(l_max+1)+l_max = {lhs} is not < N = {n}; "
            "reduce the delay/Doppler spread or increase N")


@dataclass(frozen=True)
class AfdmParams:
    """Waveform parameters: size, chirp rates, prefix length and channel bounds."""

    n: int
    c1: float
    c2: float
    l_p: int
    alpha_max: int = 0
    k_nu: int = 0
    l_max: int = 0
    delta_f: float = 2e3

    def __post_init__(self):
        if self.n < 1:
            raise ConfigurationError("need N >= 1")
        if not 0 <= self.l_p <= self.n:
            raise ConfigurationError("need 0 <= L_P <= N")
        if self.l_p < self.l_max:
            raise ConfigurationError("prefix must cover the maximum delay (L_P >= l_max)")

    @classmethod
    def full_diversity(cls, n: int, alpha_max: int, k_nu: int, l_max: int,
                       c2: float | None = None, delta_f: float = 2e3) -> "AfdmParams":
        """Parameters per the disjoint-support rule; c2 defaults to 1/(4N^2)."""
        validate_dimensions(alpha_max, k_nu, l_max, n)
        if c2 is None:
            c2 = choose_c2(n)
        elif c2 >= 1 / (2 * n):
            warnings.warn(f"c2 = {c2} is not below 1/(2N) = {1/(2*n)}; "
                          "per-path supports may overlap", stacklevel=2)
        return cls(n=n, c1=choose_c1(alpha_max, k_nu, n), c2=c2, l_p=l_max,
                   alpha_max=alpha_max, k_nu=k_nu, l_max=l_max, delta_f=delta_f)

    @classmethod
    def ofdm(cls, n: int, l_max: int, delta_f: float = 2e3) -> "AfdmParams":
        """Degenerate c1 = c2 = 0 setup: plain OFDM with a cyclic prefix."""
        return cls(n=n, c1=0.0, c2=0.0, l_p=l_max, alpha_max=0, k_nu=0,
                   l_max=l_max, delta_f=delta_f)


def _chirp(c: float, n: int) -> np.ndarray:
    i = np.arange(n)
    return np.exp(-2j * np.pi * c * i * i)


def daft(s: np.ndarray, params: AfdmParams) -> np.ndarray:
    """Forward transform along axis 0 of a length-N vector or (N, m) array."""
    s = np.asarray(s, dtype=np.complex128)
    if s.shape[0] != params.n:
        raise InputError(f"expected length {params.n} along axis 0, got {s.shape[0]}")
    ph1 = _chirp(params.c1, params.n)
    ph2 = _chirp(params.c2, params.n)
    if s.ndim == 1:
        return ph2 * (np.fft.fft(ph1 * s) / np.sqrt(params.n))
    return ph2[:, None] * (np.fft.fft(ph1[:, None] * s, axis=0) / np.sqrt(params.n))


def idaft(z: np.ndarray, params: AfdmParams) -> np.ndarray:
    """Inverse transform; exact inverse of daft (unitary)."""
    z = np.asarray(z, dtype=np.complex128)
    if z.shape[0] != params.n:
        raise InputError(f"expected length {params.n} along axis 0, got {z.shape[0]}")
    ph1 = _chirp(params.c1, params.n).conj()
    ph2 = _chirp(params.c2, params.n).conj()
    if z.ndim == 1:
        return ph1 * (np.fft.ifft(ph2 * z) * np.sqrt(params.n))
    return ph1[:, None] * (np.fft.ifft(ph2[:, None] * z, axis=0) * np.sqrt(params.n))


def daft_matrix(params: AfdmParams) -> np.ndarray:
    """Dense N x N transform matrix; reference path for validation only."""
    n = params.n
    f = np.exp(-2j * np.pi * np.outer(np.arange(n), np.arange(n)) / n) / np.sqrt(n)
    return np.diag(_chirp(params.c2, n)) @ f @ np.diag(_chirp(params.c1, n))


def add_cpp(s: np.ndarray, params: AfdmParams) -> np.ndarray:
    """Prepend the L_P-sample chirp-periodic prefix.

    Prefix sample at position n in [-L_P, -1] is s(N+n) scaled by
    exp(-j 2 pi c1 (N^2 + 2 N n)); with c1 = 0 this is a plain cyclic prefix.
    """
    s = np.asarray(s, dtype=np.complex128)
    n, lp = params.n, params.l_p
    if s.shape[-1] != n:
        raise InputError(f"expected length {n} along the last axis")
    if lp == 0:
        return s.copy()
    idx = np.arange(-lp, 0)
    phase = np.exp(-2j * np.pi * params.c1 * (n * n + 2 * n * idx))
    prefix = s[..., n + idx] * phase
    return np.concatenate([prefix, s], axis=-1)


def remove_cpp(r: np.ndarray, params: AfdmParams) -> np.ndarray:
    """Drop the first L_P samples."""
    r = np.asarray(r)
    if r.shape[-1] != params.n + params.l_p:
        raise InputError(f"expected length {params.n + params.l_p} along the last axis")
    return r[..., params.l_p:]
