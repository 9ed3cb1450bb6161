"""Orthonormal 2-D precoding bases and their fast transforms.

Every basis here is a Kronecker product ``S = A kron B`` of two small unitary
factors. For a vector ``x`` indexed ``i * len(B) + j`` this gives
``S x = vec_rows(A @ X @ B.T)`` with ``X = x.reshape(len(A), len(B))``, so a
basis never needs to be materialised to be applied. For the grid-shaped bases
(DSFT, 2-D DPS) the outer factor acts along time and the inner one along
frequency, which matches the column-stacked data vector ``m' * N' + q``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .frame import ConfigurationError, FrameConfig

BASIS_KINDS = ("none", "dsft", "wht", "dps2d")


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def fwht(x: np.ndarray) -> np.ndarray:
    """Orthonormal fast Walsh-Hadamard transform along the last axis.

    Natural (Sylvester) ordering, so ``fwht(x) == hadamard(n) @ x / sqrt(n)``.
    The transform is its own inverse.
    """
    x = np.array(x, dtype=np.result_type(x, float), copy=True)
    n = x.shape[-1]
    if not _is_power_of_two(n):
        raise ValueError(f"fast WHT needs a power-of-two length, got {n}")
    lead = x.shape[:-1]
    h = 1
    while h < n:
        # butterflies on pairs (j, j+h) inside blocks of 2h
        y = x.reshape(lead + (n // (2 * h), 2, h))
        a = y[..., 0, :].copy()
        b = y[..., 1, :]
        y[..., 0, :] += b
        y[..., 1, :] = a - b
        h *= 2
    return x / np.sqrt(n)


def _fwht_matrix_rows(X: np.ndarray) -> np.ndarray:
    # X @ H.T for a symmetric Sylvester H
    return fwht(X)


@dataclass(frozen=True)
class PrecodingBasis:
    """Unitary precoding matrix ``S = outer kron inner``.

    Parameters
    ----------
    kind : str
        One of ``"none"``, ``"dsft"``, ``"wht"``, ``"dps2d"``.
    outer, inner : ndarray
        Square unitary factors.
    constant_modulus : bool
        True when every entry of ``S`` has squared modulus ``1/size``.
    """

    kind: str
    outer: np.ndarray = field(repr=False)
    inner: np.ndarray = field(repr=False)
    constant_modulus: bool
    _forward: Callable | None = field(default=None, repr=False, compare=False)
    _adjoint: Callable | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        for mat in (self.outer, self.inner):
            if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
                raise ValueError("basis factors must be square matrices")
            mat.setflags(write=False)

    @property
    def size(self) -> int:
        return self.outer.shape[0] * self.inner.shape[0]

    @property
    def factor_shape(self) -> tuple[int, int]:
        return (self.outer.shape[0], self.inner.shape[0])

    @property
    def matrix(self) -> np.ndarray:
        """Dense ``S``; columns are the vectorized precoding sequences."""
        return np.kron(self.outer, self.inner)

    def _split(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if x.shape[-1] != self.size:
            raise ValueError(f"expected length {self.size}, got {x.shape[-1]}")
        return x.reshape(x.shape[:-1] + self.factor_shape)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """``S @ x`` along the last axis."""
        X = self._split(x)
        if self._forward is not None:
            Y = self._forward(X)
        else:
            Y = self.outer @ X @ self.inner.T
        return Y.reshape(x.shape)

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        """``S^H @ y`` along the last axis."""
        Y = self._split(y)
        if self._adjoint is not None:
            X = self._adjoint(Y)
        else:
            X = self.outer.conj().T @ Y @ self.inner.conj()
        return X.reshape(np.shape(y))

    def gamma(self, gain_power: np.ndarray) -> np.ndarray:
        """Effective channel coefficients ``sum_k |S[k, i]|^2 * gain_power[k]``.

        ``gain_power`` holds ``|g|^2`` on the data positions (data-vector order);
        the result is indexed like the data symbols.
        """
        G = self._split(np.asarray(gain_power, dtype=float))
        if self.kind == "none":
            return G.reshape(np.shape(gain_power)).copy()
        A2 = np.abs(self.outer) ** 2
        B2 = np.abs(self.inner) ** 2
        return (A2.T @ G @ B2).reshape(np.shape(gain_power))


def identity_basis(size: int) -> PrecodingBasis:
    """No precoding, ``S = I``."""
    if size < 1:
        raise ValueError("basis size must be positive")
    return PrecodingBasis(
        "none",
        np.eye(1),
        np.eye(size),
        constant_modulus=(size == 1),
        _forward=lambda X: X.copy(),
        _adjoint=lambda Y: Y.copy(),
    )


def dsft_factors(n_time: int, n_freq: int) -> tuple[np.ndarray, np.ndarray]:
    m = np.arange(n_time)
    q = np.arange(n_freq)
    ft = np.exp(2j * np.pi * np.outer(m, m) / n_time) / np.sqrt(n_time)
    ff = np.exp(-2j * np.pi * np.outer(q, q) / n_freq) / np.sqrt(n_freq)
    return ft, ff


def dsft_apply_fast(b: np.ndarray, n_time: int, n_freq: int) -> np.ndarray:
    """DSFT precoding via an inverse FFT over time and an FFT over frequency.

    ``b`` is the data vector ``vec(B)`` of an ``n_freq x n_time`` symbol grid.
    """
    b = np.asarray(b)
    if b.shape[-1] != n_time * n_freq:
        raise ValueError(f"expected length {n_time * n_freq}, got {b.shape[-1]}")
    X = b.reshape(b.shape[:-1] + (n_time, n_freq))
    Y = np.fft.fft(np.fft.ifft(X, axis=-2, norm="ortho"), axis=-1, norm="ortho")
    return Y.reshape(b.shape)


def dsft_adjoint_fast(d: np.ndarray, n_time: int, n_freq: int) -> np.ndarray:
    """Adjoint (= inverse) of :func:`dsft_apply_fast`."""
    d = np.asarray(d)
    if d.shape[-1] != n_time * n_freq:
        raise ValueError(f"expected length {n_time * n_freq}, got {d.shape[-1]}")
    Y = d.reshape(d.shape[:-1] + (n_time, n_freq))
    X = np.fft.fft(np.fft.ifft(Y, axis=-1, norm="ortho"), axis=-2, norm="ortho")
    return X.reshape(d.shape)


def dsft_basis(n_time: int, n_freq: int) -> PrecodingBasis:
    """DSFT basis ``exp(j2pi(mn/M' - qp/N')) / sqrt(M'N')`` on an ``N' x M'`` grid."""
    if n_time < 1 or n_freq < 1:
        raise ValueError("grid dimensions must be positive")
    ft, ff = dsft_factors(n_time, n_freq)
    return PrecodingBasis(
        "dsft",
        ft,
        ff,
        constant_modulus=True,
        _forward=lambda X: np.fft.fft(np.fft.ifft(X, axis=-2, norm="ortho"), axis=-1, norm="ortho"),
        _adjoint=lambda Y: np.fft.fft(np.fft.ifft(Y, axis=-1, norm="ortho"), axis=-2, norm="ortho"),
    )


def wht_matrix(size: int) -> np.ndarray:
    """Orthonormal Sylvester-Hadamard matrix built by the 2x2 recursion."""
    if not _is_power_of_two(size):
        raise ConfigurationError(f"WHT size must be a power of two, got {size}")
    return scipy.linalg.hadamard(size).astype(float) / np.sqrt(size)


def wht_basis(size: int) -> PrecodingBasis:
    """Walsh-Hadamard basis of power-of-two ``size`` with a butterfly fast path."""
    H = wht_matrix(size)
    return PrecodingBasis(
        "wht",
        np.eye(1),
        H,
        constant_modulus=True,
        _forward=_fwht_matrix_rows,
        _adjoint=_fwht_matrix_rows,
    )


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    return all(n % d for d in range(2, int(n**0.5) + 1))


def paley_hadamard(order: int) -> np.ndarray:
    """Paley type-I Hadamard matrix of ``order = q + 1`` with ``q = 3 mod 4`` prime.

    Entries are +-1 and ``H @ H.T == order * I``.
    """
    q = order - 1
    if not (_is_prime(q) and q % 4 == 3):
        raise ConfigurationError(f"no Paley type-I Hadamard matrix of order {order}")
    residues = {(x * x) % q for x in range(1, q)}
    chi = np.array([0] + [1 if k in residues else -1 for k in range(1, q)])
    idx = np.arange(q)
    jacobsthal = chi[(idx[None, :] - idx[:, None]) % q]
    core = np.zeros((order, order), dtype=int)
    core[0, 1:] = 1
    core[1:, 0] = -1
    core[1:, 1:] = jacobsthal
    return core + np.eye(order, dtype=int)


def hadamard_factorization(size: int) -> tuple[int, int]:
    """Split ``size = core * 2**k`` with a Paley-constructible ``core`` (1 if none needed)."""
    if _is_power_of_two(size):
        return 1, size
    k = size & -size
    for pow2 in (k >> s for s in range(k.bit_length())):
        core = size // pow2
        if core % 4 == 0 and _is_prime(core - 1) and (core - 1) % 4 == 3:
            return core, pow2
    raise ConfigurationError(f"no Sylvester/Paley Hadamard construction for size {size}")


def hadamard_basis(size: int) -> PrecodingBasis:
    """Constant-modulus +-1/sqrt(size) basis for sizes that are not powers of two.

    Built as ``Paley(core) kron Sylvester(2**k)``; reduces to :func:`wht_basis`
    for powers of two.
    """
    core, pow2 = hadamard_factorization(size)
    if core == 1:
        return wht_basis(size)
    P = paley_hadamard(core) / np.sqrt(core)
    H = wht_matrix(pow2)
    return PrecodingBasis(
        "wht",
        P,
        H,
        constant_modulus=True,
        _forward=lambda X: fwht(P @ X),
        _adjoint=lambda Y: fwht(P.T @ Y),
    )


@dataclass(frozen=True)
class DpsBasis:
    """Discrete prolate spheroidal sequences for band ``band`` and length ``L``.

    ``sequences[:, i]`` is the i-th sequence; eigenvalues are descending.
    """

    band: tuple[float, float]
    sequences: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray

    @property
    def length(self) -> int:
        return self.sequences.shape[0]


def dps_kernel(band: tuple[float, float], length: int) -> np.ndarray:
    """Matrix ``[C_{l-m}(W)]_{m,l}`` with ``C_k(W) = int_W exp(j2pi k nu) dnu``."""
    nu1, nu2 = band
    k = np.arange(length)[None, :] - np.arange(length)[:, None]
    width = nu2 - nu1
    with np.errstate(divide="ignore", invalid="ignore"):
        C = (np.exp(2j * np.pi * k * nu2) - np.exp(2j * np.pi * k * nu1)) / (2j * np.pi * k)
    C[k == 0] = width
    if np.isclose(nu1, -nu2):
        C = C.real
    return C


def dps_sequences(band: tuple[float, float], length: int) -> DpsBasis:
    """DPS sequences as the eigenvectors of the band-limiting kernel."""
    nu1, nu2 = map(float, band)
    width = nu2 - nu1
    if not 0 < width < 1:
        raise ValueError(f"band width must lie in (0, 1), got [{nu1}, {nu2}]")
    if length < 1:
        raise ValueError("sequence length must be positive")
    K = dps_kernel((nu1, nu2), length)
    lam, U = np.linalg.eigh(K)
    lam, U = lam[::-1], U[:, ::-1]
    # first non-negligible component made real positive
    first = np.argmax(np.abs(U) > 1e-12 * np.abs(U).max(axis=0), axis=0)
    pivot = U[first, np.arange(length)]
    U = U * (np.abs(pivot) / pivot)[None, :]
    if np.isrealobj(K):
        U = U.real
    return DpsBasis((nu1, nu2), U, lam)


def dps2d_basis(n_time: int, n_freq: int, nu_d: float, theta_p: float) -> PrecodingBasis:
    """Products of time DPS sequences on ``[-nu_d, nu_d]`` and frequency DPS on ``[0, theta_p]``."""
    ut = dps_sequences((-nu_d, nu_d), n_time).sequences
    uf = dps_sequences((0.0, theta_p), n_freq).sequences
    return PrecodingBasis("dps2d", ut.astype(complex), uf.astype(complex), constant_modulus=False)


def make_basis(
    kind: str,
    config: FrameConfig,
    nu_d: float | None = None,
    theta_p: float | None = None,
    min_support: float = 1e-4,
) -> PrecodingBasis:
    """Build the named basis for the data sub-grid of ``config``.

    ``nu_d`` and ``theta_p`` are only used by ``"dps2d"``; supports below
    ``min_support`` are raised to it so the DPS kernel stays well defined.
    """
    kind = kind.lower()
    n_freq, n_time = config.data_shape
    if kind == "none":
        return identity_basis(n_freq * n_time)
    if kind == "dsft":
        return dsft_basis(n_time, n_freq)
    if kind == "wht":
        return hadamard_basis(n_freq * n_time)
    if kind == "dps2d":
        if nu_d is None or theta_p is None:
            raise ConfigurationError("dps2d needs the Doppler and delay supports")
        return dps2d_basis(n_time, n_freq, max(nu_d, min_support), max(theta_p, min_support))
    raise ConfigurationError(f"unknown basis kind {kind!r}; expected one of {BASIS_KINDS}")


def precode(basis: PrecodingBasis, b: np.ndarray) -> np.ndarray:
    """Precoded symbols ``d = S b``."""
    return basis.apply(b)
