"""Geometry-based doubly-selective channel, AWGN and second-order statistics."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .frame import ConfigurationError, FrameConfig

SPEED_OF_LIGHT = 3e8  # rounded, reproduces the 1092 Hz reference figure

# (nu_D, theta_P) pairs of the four reference channel types
PRESETS = {
    "non-selective": (1e-4, 1e-4),
    "time-selective": (0.009, 1e-4),
    "frequency-selective": (1e-4, 0.15),
    "doubly-selective": (0.009, 0.15),
}


def max_doppler(velocity_kmh: float, carrier_freq: float) -> float:
    """Maximum Doppler shift in Hz for a relative velocity in km/h."""
    return velocity_kmh / 3.6 / SPEED_OF_LIGHT * carrier_freq


@dataclass(frozen=True)
class ScatteringConfig:
    """Delay-Doppler support and profile of the scattering function.

    ``theta_rms`` is the normalized RMS delay spread used by the exponential
    power-delay profile; both delays and Doppler shifts are normalized to the
    OFDM grid (see :meth:`from_physical`).
    """

    nu_d: float
    theta_p: float
    pdp: str = "flat"
    theta_rms: float | None = None
    n_paths: int = 60
    name: str = ""

    def __post_init__(self):
        if not 0 <= self.nu_d < 0.5:
            raise ConfigurationError(f"Doppler support {self.nu_d} outside [0, 0.5)")
        if not 0 <= self.theta_p < 1:
            raise ConfigurationError(f"delay support {self.theta_p} outside [0, 1)")
        if self.n_paths < 1:
            raise ConfigurationError("at least one propagation path is required")
        if self.pdp not in ("flat", "exponential"):
            raise ConfigurationError(f"unknown power-delay profile {self.pdp!r}")
        if self.pdp == "exponential" and not (self.theta_rms and self.theta_rms > 0):
            raise ConfigurationError("exponential profile needs a positive theta_rms")

    def check_cyclic_prefix(self, config: FrameConfig) -> None:
        if self.theta_p > config.cp_length / config.n_subcarriers:
            raise ConfigurationError("delay support exceeds the cyclic prefix")

    @classmethod
    def preset(cls, name: str, n_paths: int = 60) -> "ScatteringConfig":
        try:
            nu_d, theta_p = PRESETS[name]
        except KeyError:
            raise ConfigurationError(f"unknown channel preset {name!r}") from None
        return cls(nu_d, theta_p, n_paths=n_paths, name=name)

    @classmethod
    def from_physical(
        cls,
        config: FrameConfig,
        velocity_kmh: float,
        max_delay: float = 1e-6,
        rms_delay: float | None = 0.4e-6,
        n_paths: int = 60,
        name: str = "",
    ) -> "ScatteringConfig":
        """Normalize a velocity and delay spread to the grid of ``config``.

        ``nu_D = f_D * T_S`` and ``theta = tau / (N * T_C)``. ``rms_delay=None``
        selects a flat delay profile.
        """
        nu_d = max_doppler(velocity_kmh, config.carrier_freq) * config.symbol_duration
        scale = config.n_subcarriers * config.chip_duration
        return cls(
            nu_d,
            max_delay / scale,
            pdp="flat" if rms_delay is None else "exponential",
            theta_rms=None if rms_delay is None else rms_delay / scale,
            n_paths=n_paths,
            name=name or f"v{velocity_kmh:g}",
        )

    def to_dict(self) -> dict:
        return {
            "nu_d": self.nu_d,
            "theta_p": self.theta_p,
            "pdp": self.pdp,
            "theta_rms": self.theta_rms,
            "n_paths": self.n_paths,
            "name": self.name,
        }


@dataclass(frozen=True)
class Paths:
    """Path weights ``eta``, normalized delays ``theta`` and Doppler shifts ``nu``."""

    eta: np.ndarray
    theta: np.ndarray
    nu: np.ndarray


def draw_paths(cfg: ScatteringConfig, rng: np.random.Generator | int | None = None) -> Paths:
    """Draw one set of propagation paths.

    Doppler shifts are uniform on ``[-nu_D, nu_D]`` and delays uniform on
    ``[0, theta_P]``. The exponential profile is applied as an amplitude
    weight ``exp(-theta / (2 theta_rms))``; weights are renormalized so that
    ``sum |eta|^2 = 1``.
    """
    rng = np.random.default_rng(rng)
    P = cfg.n_paths
    nu = rng.uniform(-cfg.nu_d, cfg.nu_d, P)
    theta = rng.uniform(0.0, cfg.theta_p, P)
    phase = rng.uniform(0.0, 2 * np.pi, P)
    amp = np.ones(P)
    if cfg.pdp == "exponential":
        amp = np.exp(-theta / (2 * cfg.theta_rms))
    amp /= np.sqrt(np.sum(amp**2))
    return Paths(amp * np.exp(1j * phase), theta, nu)


@dataclass(frozen=True)
class ChannelRealization:
    """Sampled time-variant frequency response ``g[q, m]`` of one frame."""

    g: np.ndarray
    paths: Paths | None = None

    @property
    def vector(self) -> np.ndarray:
        return self.g.reshape(-1, order="F")


def realize(paths: Paths, config: FrameConfig) -> ChannelRealization:
    """Evaluate ``sum_l eta_l exp(-j2pi theta_l q) exp(j2pi nu_l m)`` on the grid.

    TX and RX filter responses are taken as all-ones.
    """
    N, M = config.grid_shape
    q = np.arange(N)
    m = np.arange(M)
    freq = np.exp(-2j * np.pi * np.outer(q, paths.theta))
    time = paths.eta[:, None] * np.exp(2j * np.pi * np.outer(paths.nu, m))
    return ChannelRealization(freq @ time, paths)


def noise_variance(ebn0_db: float, config: FrameConfig) -> float:
    """``sigma_n^2 = 1 / (r * alpha * Eb/N0)`` for unit-energy symbols."""
    if np.isposinf(ebn0_db):
        return 0.0
    ebn0 = 10.0 ** (ebn0_db / 10.0)
    return 1.0 / (config.code_rate * config.bits_per_symbol * ebn0)


def complex_noise(shape, sigma2: float, rng: np.random.Generator) -> np.ndarray:
    """Circular complex Gaussian samples with total variance ``sigma2``."""
    scale = np.sqrt(sigma2 / 2)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def add_noise(
    y_clean: np.ndarray,
    ebn0_db: float,
    config: FrameConfig,
    rng: np.random.Generator | int | None = None,
) -> tuple[np.ndarray, float]:
    """Add AWGN for the given Eb/N0; returns ``(y, sigma_n^2)``."""
    sigma2 = noise_variance(ebn0_db, config)
    y_clean = np.asarray(y_clean)
    if sigma2 == 0.0:
        return y_clean.astype(complex, copy=True), 0.0
    rng = np.random.default_rng(rng)
    return y_clean + complex_noise(y_clean.shape, sigma2, rng), sigma2


def time_correlation(nu_d: float, n_symbols: int) -> np.ndarray:
    """``[R_t]_{m,m'}`` for a flat Doppler spectrum on ``[-nu_D, nu_D]``."""
    k = np.arange(n_symbols)[:, None] - np.arange(n_symbols)[None, :]
    return np.sinc(2 * nu_d * k).astype(complex)


def frequency_correlation(theta_p: float, n_subcarriers: int) -> np.ndarray:
    """``[R_f]_{q,q'}`` for a flat delay profile on ``[0, theta_P]``."""
    k = np.arange(n_subcarriers)[:, None] - np.arange(n_subcarriers)[None, :]
    return np.exp(-1j * np.pi * theta_p * k) * np.sinc(theta_p * k)


@dataclass(frozen=True)
class CovarianceModel:
    """Separable channel covariance ``R_g = R_t kron R_f`` (column-stacked grid)."""

    time: np.ndarray = field(repr=False)
    freq: np.ndarray = field(repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        """``(N, M)`` of the grid this covariance describes."""
        return (self.freq.shape[0], self.time.shape[0])

    @property
    def size(self) -> int:
        return self.time.shape[0] * self.freq.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        return np.kron(self.time, self.freq)

    @cached_property
    def factor_eigen(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Eigenpairs ``(lam_t, U_t, lam_f, U_f)`` of the two factors."""
        lt, ut = np.linalg.eigh(self.time)
        lf, uf = np.linalg.eigh(self.freq)
        return np.clip(lt, 0, None), ut, np.clip(lf, 0, None), uf

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        """Descending spectrum ``{lam_t,i * lam_f,j}`` normalized to sum to ``M N``."""
        lt, _, lf, _ = self.factor_eigen
        lam = np.sort(np.outer(lt, lf).ravel())[::-1]
        return lam * (self.size / lam.sum())

    def principal(self, rel_cutoff: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
        """Eigenpairs of ``R_g`` with ``lam > rel_cutoff * lam_max``, descending.

        Returns ``(lam, U)`` with ``U`` of shape ``(M N, r)``.
        """
        lt, ut, lf, uf = self.factor_eigen
        lam = np.outer(lt, lf).ravel()
        order = np.argsort(lam)[::-1]
        keep = order[lam[order] > rel_cutoff * lam[order[0]]]
        it, jf = np.divmod(keep, lf.size)
        # column (i, j) of kron(U_t, U_f) is kron(ut[:, i], uf[:, j])
        U = (ut[:, None, it] * uf[None, :, jf]).reshape(self.size, keep.size)
        return lam[keep], U


def covariance_flat(nu_d: float, theta_p: float, n_symbols: int, n_subcarriers: int) -> CovarianceModel:
    """Covariance of a flat delay-Doppler scattering function."""
    if nu_d < 0 or theta_p < 0:
        raise ConfigurationError("supports must be non-negative")
    return CovarianceModel(time_correlation(nu_d, n_symbols), frequency_correlation(theta_p, n_subcarriers))
