"""Bit pipeline: convolutional code, interleaver, QPSK mapping and BCJR decoding.

LLR convention throughout: ``L = log P(bit=0) - log P(bit=1)``, so a positive
value favours bit 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numba
import numpy as np

from .frame import ConfigurationError

LLR_CLIP = 30.0
SQRT_HALF = 1.0 / np.sqrt(2.0)


@dataclass(frozen=True)
class ConvolutionalCode:
    """Feed-forward rate ``1/n`` convolutional code with zero-tail termination.

    Generators are given in octal with the most significant bit tapping the
    current input, e.g. ``(0o133, 0o171)`` for the K=7 industry-standard code.
    """

    generators: tuple[int, ...] = (0o133, 0o171)
    constraint_length: int = 7

    def __post_init__(self):
        K = self.constraint_length
        if K < 1:
            raise ConfigurationError("constraint length must be positive")
        if any(g <= 0 or g >= 1 << K for g in self.generators):
            raise ConfigurationError("generator does not fit the constraint length")

    @property
    def n_out(self) -> int:
        return len(self.generators)

    @property
    def rate(self) -> float:
        return 1.0 / self.n_out

    @property
    def memory(self) -> int:
        return self.constraint_length - 1

    @property
    def n_states(self) -> int:
        return 1 << self.memory

    @cached_property
    def taps(self) -> np.ndarray:
        """``taps[j, i]`` multiplies the input delayed by ``i``."""
        K = self.constraint_length
        return np.array([[(g >> (K - 1 - i)) & 1 for i in range(K)] for g in self.generators])

    @cached_property
    def trellis(self) -> tuple[np.ndarray, np.ndarray]:
        """``(next_state[s, u], outputs[s, u, j])``.

        The state holds the last ``K-1`` inputs, most recent in the high bit.
        """
        K, S = self.constraint_length, self.n_states
        next_state = np.zeros((S, 2), dtype=np.int64)
        outputs = np.zeros((S, 2, self.n_out), dtype=np.int64)
        for s in range(S):
            for u in range(2):
                reg = (u << (K - 1)) | s
                next_state[s, u] = reg >> 1
                for j, g in enumerate(self.generators):
                    outputs[s, u, j] = bin(reg & g).count("1") & 1
        return next_state, outputs

    def info_length(self, n_code_bits: int) -> int:
        """Number of information bits that fill ``n_code_bits`` after termination."""
        if n_code_bits % self.n_out:
            raise ConfigurationError(f"{n_code_bits} code bits is not a multiple of {self.n_out}")
        k = n_code_bits // self.n_out - self.memory
        if k < 1:
            raise ConfigurationError("code block too short for the termination tail")
        return k

    def encode(self, info: np.ndarray) -> np.ndarray:
        """Zero-terminated encoding; output bits are interleaved per trellis step."""
        u = np.concatenate([np.asarray(info, dtype=np.int64), np.zeros(self.memory, np.int64)])
        out = np.empty((u.size, self.n_out), dtype=np.int8)
        for j, t in enumerate(self.taps):
            out[:, j] = np.convolve(u, t)[: u.size] & 1
        return out.reshape(-1)


@numba.njit(cache=True)
def _bcjr_kernel(llr, next_state, label, n_info):
    # probability-domain forward-backward with per-step normalisation; the
    # branch weight only depends on the output label, so 2**n_out exps per step
    n_steps, n_out = llr.shape
    S = next_state.shape[0]
    n_labels = 1 << n_out
    gam = np.empty((n_steps, n_labels))
    for t in range(n_steps):
        for o in range(n_labels):
            m = 0.0
            for j in range(n_out):
                m += (0.5 - ((o >> j) & 1)) * llr[t, j]
            gam[t, o] = np.exp(m)
    alpha = np.zeros((n_steps + 1, S))
    alpha[0, 0] = 1.0
    for t in range(n_steps):
        u_max = 2 if t < n_info else 1
        total = 0.0
        for s in range(S):
            a = alpha[t, s]
            if a == 0.0:
                continue
            for u in range(u_max):
                w = a * gam[t, label[s, u]]
                alpha[t + 1, next_state[s, u]] += w
                total += w
        for s in range(S):
            alpha[t + 1, s] /= total
    beta = np.zeros(S)
    beta[0] = 1.0
    new_beta = np.zeros(S)
    app = np.zeros((n_steps, n_out))
    info = np.zeros(n_steps)
    num = np.zeros((n_out, 2))
    for t in range(n_steps - 1, -1, -1):
        u_max = 2 if t < n_info else 1
        num[:] = 0.0
        inf = np.zeros(2)
        total = 0.0
        for s in range(S):
            acc = 0.0
            for u in range(u_max):
                o = label[s, u]
                w = gam[t, o] * beta[next_state[s, u]]
                acc += w
                p = alpha[t, s] * w
                inf[u] += p
                for j in range(n_out):
                    num[j, (o >> j) & 1] += p
            new_beta[s] = acc
            total += acc
        for s in range(S):
            beta[s] = new_beta[s] / total
        for j in range(n_out):
            app[t, j] = np.log(num[j, 0]) - np.log(num[j, 1])
        info[t] = np.log(inf[0]) - np.log(inf[1])
    return app, info


@dataclass
class DecoderOutput:
    """A-posteriori code-bit LLRs plus information-bit LLRs and decisions."""

    code_llr: np.ndarray
    info_llr: np.ndarray
    info_bits: np.ndarray


def bcjr_decode(code: ConvolutionalCode, llr: np.ndarray) -> DecoderOutput:
    """Exact MAP forward-backward decoding of a zero-terminated block.

    Runs in the probability domain with per-step normalisation, which is exact
    (no max-log approximation). Input and output LLRs are clipped to
    ``+-LLR_CLIP``; ties (``L == 0``) decide bit 0.
    """
    llr = np.asarray(llr, dtype=float)
    n_info = code.info_length(llr.size)
    steps = np.clip(llr, -LLR_CLIP, LLR_CLIP).reshape(-1, code.n_out)
    next_state, outputs = code.trellis
    label = (outputs << np.arange(code.n_out)).sum(axis=-1)
    app, info = _bcjr_kernel(np.ascontiguousarray(steps), next_state, label, n_info)
    code_llr = np.clip(app.reshape(-1), -LLR_CLIP, LLR_CLIP)
    info_llr = np.clip(info[:n_info], -LLR_CLIP, LLR_CLIP)
    return DecoderOutput(code_llr, info_llr, (info_llr < 0).astype(np.int8))


def viterbi_decode(code: ConvolutionalCode, bits: np.ndarray) -> np.ndarray:
    """Hard-decision Viterbi decoding of a zero-terminated block (Hamming metric)."""
    bits = np.asarray(bits, dtype=np.int64).reshape(-1, code.n_out)
    n_info = code.info_length(bits.size)
    next_state, outputs = code.trellis
    S = code.n_states
    metric = np.full(S, np.inf)
    metric[0] = 0
    history = np.zeros((bits.shape[0], S, 2), dtype=np.int64)  # (prev state, input)
    for t, r in enumerate(bits):
        new = np.full(S, np.inf)
        inputs = (0, 1) if t < n_info else (0,)
        for s in range(S):
            if not np.isfinite(metric[s]):
                continue
            for u in inputs:
                ns = next_state[s, u]
                m = metric[s] + np.count_nonzero(outputs[s, u] != r)
                if m < new[ns]:
                    new[ns] = m
                    history[t, ns] = (s, u)
        metric = new
    state = 0
    decided = np.zeros(bits.shape[0], dtype=np.int8)
    for t in range(bits.shape[0] - 1, -1, -1):
        state, decided[t] = history[t, state]
    return decided[:n_info]


class Interleaver:
    """Seeded random bit permutation; ``seed=None`` gives the identity."""

    def __init__(self, length: int, seed: int | None = 0):
        self.length = length
        self.seed = seed
        if seed is None:
            self.permutation = np.arange(length)
        else:
            self.permutation = np.random.default_rng(seed).permutation(length)
        self.permutation.setflags(write=False)

    def interleave(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if x.shape[-1] != self.length:
            raise ValueError(f"expected length {self.length}, got {x.shape[-1]}")
        return x[..., self.permutation]

    def deinterleave(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y)
        if y.shape[-1] != self.length:
            raise ValueError(f"expected length {self.length}, got {y.shape[-1]}")
        out = np.empty_like(y)
        out[..., self.permutation] = y
        return out


def map_qpsk(bits: np.ndarray) -> np.ndarray:
    """Gray QPSK: bit pair ``(b0, b1)`` -> ``((1-2b0) + j(1-2b1)) / sqrt(2)``."""
    bits = np.asarray(bits)
    if bits.shape[-1] % 2:
        raise ValueError("QPSK mapping needs an even number of bits")
    pairs = bits.reshape(bits.shape[:-1] + (-1, 2)).astype(float)
    return ((1 - 2 * pairs[..., 0]) + 1j * (1 - 2 * pairs[..., 1])) * SQRT_HALF


QPSK_ALPHABET = map_qpsk(np.array([0, 0, 0, 1, 1, 0, 1, 1]))
QPSK_LABELS = np.array([[0, 0], [0, 1], [1, 0], [1, 1]])


def demap_hard(symbols: np.ndarray) -> np.ndarray:
    """Nearest-point QPSK demapping back to bits."""
    s = np.asarray(symbols)
    out = np.empty(s.shape[:-1] + (s.shape[-1], 2), dtype=np.int8)
    out[..., 0] = s.real < 0
    out[..., 1] = s.imag < 0
    return out.reshape(s.shape[:-1] + (-1,))


def soft_bits(symbols: np.ndarray) -> np.ndarray:
    """Real per-bit soft values ``sqrt(2) * (Re, Im)``, interleaved per symbol."""
    s = np.asarray(symbols)
    out = np.stack([s.real, s.imag], axis=-1) * np.sqrt(2.0)
    return out.reshape(s.shape[:-1] + (-1,))


@dataclass
class SoftSymbols:
    """Soft-symbol feedback and its sample power."""

    values: np.ndarray
    variance: float


def soft_symbols(llr: np.ndarray) -> SoftSymbols:
    """Posterior-mean QPSK symbols from (interleaved) code-bit LLRs.

    With Gray mapping the mean factorises per rail:
    ``(tanh(L_I / 2) + j tanh(L_Q / 2)) / sqrt(2)``.
    """
    llr = np.asarray(llr, dtype=float)
    if llr.shape[-1] % 2:
        raise ValueError("QPSK soft symbols need an even number of LLRs")
    t = np.tanh(llr.reshape(llr.shape[:-1] + (-1, 2)) / 2)
    values = (t[..., 0] + 1j * t[..., 1]) * SQRT_HALF
    return SoftSymbols(values, float(np.mean(np.abs(values) ** 2)))
