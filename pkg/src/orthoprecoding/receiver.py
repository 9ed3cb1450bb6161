"""Iterative receiver: LMMSE-windowed matched filter, soft PIC and symbol-wise ML."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fec import (
    LLR_CLIP,
    QPSK_ALPHABET,
    QPSK_LABELS,
    ConvolutionalCode,
    Interleaver,
    bcjr_decode,
    soft_bits,
    soft_symbols,
)
from .frame import PilotPattern
from .precoding import PrecodingBasis


def lmmse_window(g_hat: np.ndarray, sigma2: float) -> np.ndarray:
    """Receive window ``conj(g) / (|g|^2 + sigma_n^2)``; zero where both vanish."""
    g_hat = np.asarray(g_hat, dtype=complex)
    den = np.abs(g_hat) ** 2 + sigma2
    out = np.zeros(g_hat.shape, dtype=complex)
    np.divide(g_hat.conj(), den, out=out, where=den > 0)
    return out


def matched_filter_stage(
    y: np.ndarray, window: np.ndarray, basis: PrecodingBasis, pattern: PilotPattern
) -> np.ndarray:
    """Symbol estimates ``S^H diag(w) y`` restricted to the data positions.

    ``y`` and ``window`` are full-grid vectors.
    """
    y = np.asarray(y)
    window = np.asarray(window)
    if y.shape[-1] != pattern.grid_size or window.shape[-1] != pattern.grid_size:
        raise ValueError("received frame and window must cover the full grid")
    return basis.adjoint(pattern.data_part(window * y))


def first_iteration_llr(b_hat: np.ndarray, sigma2: float) -> np.ndarray:
    """``L_k = 2 c_k / sigma_n^2`` with ``c_k`` the per-rail soft value of ``b_hat``."""
    c = soft_bits(b_hat)
    if sigma2 == 0:
        return np.sign(c) * LLR_CLIP
    return np.clip(2 * c / sigma2, -LLR_CLIP, LLR_CLIP)


def effective_gamma(basis: PrecodingBasis, g_data: np.ndarray) -> np.ndarray:
    """``gamma_i = sum_k |S[k, i]|^2 |g_k|^2`` over the data positions."""
    return basis.gamma(np.abs(np.asarray(g_data)) ** 2)


def pic_iterate(
    y_data: np.ndarray,
    b_soft: np.ndarray,
    basis: PrecodingBasis,
    g_data: np.ndarray,
    gamma: np.ndarray | None = None,
) -> np.ndarray:
    """Parallel interference cancellation with a rectangular receive window.

    Computes ``a_i = s~_i^H (y - S~ b~ + s~_i b~_i)`` for all ``i`` at once via
    the residual ``r = y - S~ b~``: ``a = S~^H r + gamma * b~``.
    """
    if gamma is None:
        gamma = effective_gamma(basis, g_data)
    residual = y_data - g_data * basis.apply(b_soft)
    return basis.adjoint(g_data.conj() * residual) + gamma * b_soft


def ml_detect(a: np.ndarray, gamma: np.ndarray, sigma2: float) -> np.ndarray:
    """Max-log bit LLRs for ``a = gamma b + n`` by exhaustive QPSK search.

    The noise power of ``s~^H n`` is ``gamma * sigma_n^2``, which is used to
    scale the metric difference. ``gamma == 0`` yields zero LLRs.
    """
    a = np.atleast_1d(a)
    gamma = np.broadcast_to(np.asarray(gamma, dtype=float), a.shape)
    dist = np.abs(a[..., None] - gamma[..., None] * QPSK_ALPHABET) ** 2
    out = np.empty(a.shape + (2,))
    for bit in range(2):
        d0 = dist[..., QPSK_LABELS[:, bit] == 0].min(axis=-1)
        d1 = dist[..., QPSK_LABELS[:, bit] == 1].min(axis=-1)
        out[..., bit] = d1 - d0
    noise = gamma * sigma2
    with np.errstate(divide="ignore", invalid="ignore"):
        llr = out / noise[..., None]
    llr[gamma == 0] = 0.0
    llr = np.nan_to_num(llr, nan=0.0, posinf=LLR_CLIP, neginf=-LLR_CLIP)
    return np.clip(llr, -LLR_CLIP, LLR_CLIP).reshape(a.shape[:-1] + (-1,))


@dataclass
class IterationRecord:
    """Per-iteration diagnostics of one frame."""

    iteration: int
    soft_variance: float
    bit_errors: int | None = None
    n_bits: int | None = None
    info_bits: np.ndarray | None = field(default=None, repr=False)
    g_hat: np.ndarray | None = field(default=None, repr=False)

    @property
    def ber(self) -> float | None:
        if self.bit_errors is None:
            return None
        return self.bit_errors / self.n_bits


class PerfectCsi:
    """Channel "estimator" that returns the true response."""

    def __init__(self, g: np.ndarray):
        self.g = np.asarray(g)

    def estimate(self, y, b_soft=None, soft_variance=0.0):
        return self.g


@dataclass
class DetectionResult:
    info_bits: np.ndarray
    iterations: list[IterationRecord]


def detect_frame(
    y: np.ndarray,
    estimator,
    sigma2: float,
    basis: PrecodingBasis,
    pattern: PilotPattern,
    code: ConvolutionalCode,
    interleaver: Interleaver,
    n_iterations: int = 3,
    info_bits: np.ndarray | None = None,
    keep_estimates: bool = False,
) -> DetectionResult:
    """Run the iterative receiver on one received grid vector.

    ``estimator`` provides ``estimate(y, b_soft, soft_variance) -> g_hat``
    (full-grid vector); iteration 1 passes zero feedback. Iteration 1 applies
    the LMMSE window and matched filter, later iterations soft PIC followed by
    symbol-wise ML detection. If ``info_bits`` is given, bit errors are
    recorded per iteration.
    """
    y = np.asarray(y)
    b_soft = np.zeros(pattern.n_data, dtype=complex)
    soft_var = 0.0
    y_data = pattern.data_part(y)
    records = []
    decided = None
    for it in range(1, n_iterations + 1):
        g_hat = np.asarray(estimator.estimate(y, b_soft, soft_var))
        g_data = pattern.data_part(g_hat)
        if it == 1:
            b_hat = matched_filter_stage(y, lmmse_window(g_hat, sigma2), basis, pattern)
            llr = first_iteration_llr(b_hat, sigma2)
        else:
            gamma = effective_gamma(basis, g_data)
            a = pic_iterate(y_data, b_soft, basis, g_data, gamma)
            llr = ml_detect(a, gamma, sigma2)
        dec = bcjr_decode(code, interleaver.deinterleave(llr))
        decided = dec.info_bits
        soft = soft_symbols(interleaver.interleave(dec.code_llr))
        b_soft, soft_var = soft.values, soft.variance
        rec = IterationRecord(it, soft_var, info_bits=decided)
        if info_bits is not None:
            rec.bit_errors = int(np.count_nonzero(decided != info_bits))
            rec.n_bits = int(decided.size)
        if keep_estimates:
            rec.g_hat = g_hat
        records.append(rec)
    return DetectionResult(decided, records)
