"""Self-contained oracle checks that run without a Monte-Carlo budget.

Each check compares a fast implementation against a slow, independently
written reference on a small instance.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .chanest import wiener_dense, wiener_lowrank
from .channel import covariance_flat
from .fec import ConvolutionalCode, bcjr_decode
from .frame import FrameConfig
from .precoding import BASIS_KINDS, dps_sequences, dsft_apply_fast, fwht, make_basis
from .receiver import effective_gamma, pic_iterate


@dataclass
class CheckResult:
    name: str
    error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.error <= self.tolerance)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<38s} err={self.error:.2e}  tol={self.tolerance:.0e}"


def _crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def check_orthonormality(rng) -> float:
    cfg = FrameConfig(n_subcarriers=8, n_symbols=6, cp_length=2, n_pilot_symbols=2)
    err = 0.0
    for kind in BASIS_KINDS:
        S = make_basis(kind, cfg, 0.01, 0.15).matrix
        err = max(err, np.abs(S.conj().T @ S - np.eye(S.shape[1])).max())
    full = FrameConfig()
    for kind in BASIS_KINDS:
        b = make_basis(kind, full, 0.0087, 0.156)
        for f in (b.outer, b.inner):
            err = max(err, np.abs(f.conj().T @ f - np.eye(f.shape[0])).max())
    return err


def check_fast_transforms(rng) -> float:
    n_time, n_freq = 40, 64
    b = _crandn(rng, n_time * n_freq)
    m, q = np.arange(n_time), np.arange(n_freq)
    ft = np.exp(2j * np.pi * np.outer(m, m) / n_time) / np.sqrt(n_time)
    ff = np.exp(-2j * np.pi * np.outer(q, q) / n_freq) / np.sqrt(n_freq)
    dense = np.kron(ft, ff) @ b
    err = np.linalg.norm(dsft_apply_fast(b, n_time, n_freq) - dense) / np.linalg.norm(dense)
    H = np.ones((1, 1))
    while H.shape[0] < 256:
        H = np.block([[H, H], [H, -H]])
    x = rng.standard_normal(256)
    ref = H @ x / 16.0
    return max(err, np.linalg.norm(fwht(x) - ref) / np.linalg.norm(ref))


def check_bcjr(rng) -> float:
    code = ConvolutionalCode((0o5, 0o7), 3)
    n_info = 8
    llr = rng.normal(0, 3, 2 * (n_info + code.memory))
    words = np.array([code.encode(np.array(u)) for u in itertools.product((0, 1), repeat=n_info)], float)
    logw = (0.5 - words) @ llr
    w = np.exp(logw - logw.max())
    p1 = w @ words
    ref = np.log(w.sum() - p1) - np.log(p1)
    return float(np.abs(bcjr_decode(code, llr).code_llr - ref).max())


def _naive_pic(y, b, S, g):
    St = g[:, None] * S
    out = np.empty(S.shape[1], dtype=complex)
    for i in range(S.shape[1]):
        others = St @ b - St[:, i] * b[i]
        out[i] = St[:, i].conj() @ (y - others)
    return out


def check_pic_residual(rng) -> float:
    cfg = FrameConfig(n_subcarriers=4, n_symbols=4, cp_length=1, n_pilot_symbols=0)
    err = 0.0
    for kind in BASIS_KINDS:
        basis = make_basis(kind, cfg, 0.05, 0.2)
        g, y, b = _crandn(rng, 16), _crandn(rng, 16), _crandn(rng, 16)
        err = max(err, np.abs(pic_iterate(y, b, basis, g) - _naive_pic(y, b, basis.matrix, g)).max())
    return err


def check_pic_exact(rng) -> float:
    cfg = FrameConfig()
    err = 0.0
    for kind in BASIS_KINDS:
        basis = make_basis(kind, cfg, 0.0087, 0.156)
        g = _crandn(rng, basis.size)
        b = (np.sign(rng.standard_normal(basis.size)) + 1j * np.sign(rng.standard_normal(basis.size))) / np.sqrt(2)
        a = pic_iterate(g * basis.apply(b), b, basis, g)
        err = max(err, np.abs(a - effective_gamma(basis, g) * b).max())
    return err


def check_wiener(rng) -> float:
    cov = covariance_flat(0.2, 0.6, 4, 4)
    R = cov.matrix
    d, y = _crandn(rng, 16), _crandn(rng, 16)
    lam, sigma2 = rng.uniform(0, 1, 16), 0.3
    A = np.vstack([np.eye(16), np.diag(d)])
    joint = A @ R @ A.conj().T
    joint[16:, 16:] += np.diag(lam + sigma2)
    ref = joint[:16, 16:] @ np.linalg.solve(joint[16:, 16:], y)
    eigvals, U = cov.principal(0.0)
    return max(
        np.abs(wiener_dense(y, d, lam, R, sigma2) - ref).max(),
        np.abs(wiener_lowrank(y, d, lam, eigvals, U, sigma2) - ref).max(),
    )


def check_kronecker_spectrum(rng) -> float:
    cov = covariance_flat(0.009, 0.15, 8, 8)
    dense = np.sort(np.linalg.eigvalsh(cov.matrix))[::-1]
    return float(np.abs(cov.eigenvalues - dense).max())


def check_dps_trace(rng) -> float:
    dps = dps_sequences((-0.1, 0.1), 16)
    return abs(dps.eigenvalues.sum() - 16 * 0.2)


def check_determinism(rng) -> float:
    from .sim import SimulationPlan, run_curves

    plan = SimulationPlan(
        frame=FrameConfig(n_subcarriers=16, n_symbols=12, cp_length=4, n_pilot_symbols=2),
        scenarios=["doubly-selective"],
        bases=["dsft"],
        estimation="iterative",
        ebn0_db=[2.0],
        max_frames=3,
        seed=int(rng.integers(2**32)),
    )
    a = [(r.errors, r.bits) for r in run_curves(plan)]
    b = [(r.errors, r.bits) for r in run_curves(plan)]
    return 0.0 if a == b else 1.0


CHECKS = [
    ("basis orthonormality", check_orthonormality, 1e-10),
    ("fast vs dense DSFT/WHT", check_fast_transforms, 1e-10),
    ("BCJR vs brute-force APP", check_bcjr, 1e-9),
    ("PIC residual vs naive", check_pic_residual, 1e-12),
    ("PIC perfect feedback", check_pic_exact, 1e-10),
    ("Wiener vs Gaussian conditioning", check_wiener, 1e-8),
    ("Kronecker vs dense spectrum", check_kronecker_spectrum, 1e-8),
    ("DPS trace identity", check_dps_trace, 1e-6),
    ("determinism", check_determinism, 0.0),
]


def run_selftest(seed: int = 0) -> list[CheckResult]:
    """Run every check with its own generator derived from ``seed``."""
    children = np.random.SeedSequence(seed).spawn(len(CHECKS))
    return [
        CheckResult(name, float(fn(np.random.default_rng(child))), tol)
        for (name, fn, tol), child in zip(CHECKS, children)
    ]
