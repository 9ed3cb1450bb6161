"""Channel hardening of constant-modulus precoding.

With constant-modulus sequences every symbol sees the same effective channel
``gamma = mean |g|^2``. For a Gaussian channel with covariance eigenvalues
``lam_i`` this is a weighted sum of unit-mean exponentials with weights
``lam_i / (M N)``, so its variance is ``sum lam_i^2 / (M N)^2``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.integrate
import scipy.stats

from .channel import PRESETS, CovarianceModel, ScatteringConfig, covariance_flat, draw_paths, realize
from .frame import FrameConfig

REPORT_CUTOFF = 1e-4


@dataclass(frozen=True)
class GammaDistribution:
    """Distribution of ``gamma = sum_i w_i E_i`` with ``E_i ~ Exp(1)`` i.i.d."""

    weights: np.ndarray = field(repr=False)

    @classmethod
    def from_covariance(cls, cov: CovarianceModel) -> "GammaDistribution":
        return cls(cov.eigenvalues / cov.size)

    @property
    def mean(self) -> float:
        return float(np.sum(self.weights))

    @property
    def variance(self) -> float:
        return float(np.sum(self.weights**2))

    def significant_weights(self, rel_tol: float = 1e-12) -> np.ndarray:
        w = np.sort(np.asarray(self.weights, dtype=float))[::-1]
        return w[w > rel_tol * w[0]]

    def characteristic(self, t: np.ndarray) -> np.ndarray:
        """``E exp(j t gamma) = prod_i 1 / (1 - j w_i t)``."""
        w = self.significant_weights()
        t = np.asarray(t, dtype=float)
        return np.exp(-np.sum(np.log1p(-1j * np.multiply.outer(t, w)), axis=-1))

    def pdf(self, x) -> np.ndarray:
        return gamma_density(self, x)


def gamma_variance(cov: CovarianceModel) -> float:
    """``sigma_gamma^2 = sum lam_i^2 / (M N)^2``."""
    lam = cov.eigenvalues
    return float(np.sum(lam**2) / cov.size**2)


def _equal_weight_cluster(w: np.ndarray, rel_tol: float) -> bool:
    return bool(np.all(np.abs(w - w[0]) <= rel_tol * w[0]))


def gamma_density(dist: GammaDistribution, x, rel_tol: float = 1e-6) -> np.ndarray:
    """Density of a weighted sum of unit-mean exponentials.

    If all significant weights coincide (within ``rel_tol``) the sum is Erlang
    and evaluated in closed form; otherwise the characteristic function is
    inverted numerically, ``f(x) = 1/pi int_0^inf Re(phi(t) e^{-jtx}) dt``.
    """
    x = np.asarray(x, dtype=float)
    w = dist.significant_weights()
    if _equal_weight_cluster(w, rel_tol):
        return scipy.stats.gamma.pdf(x, a=w.size, scale=float(np.mean(w)))

    def re_phi(t):
        return dist.characteristic(t).real

    def im_phi(t):
        return dist.characteristic(t).imag

    out = np.zeros(x.shape)
    for idx, xv in np.ndenumerate(x):
        if xv < 0:
            continue
        if xv == 0:
            val = scipy.integrate.quad(re_phi, 0, np.inf, limit=200)[0]
        else:
            c = scipy.integrate.quad(re_phi, 0, np.inf, weight="cos", wvar=xv, limlst=100)[0]
            s = scipy.integrate.quad(im_phi, 0, np.inf, weight="sin", wvar=xv, limlst=100)[0]
            val = c + s
        out[idx] = max(val / np.pi, 0.0)
    return out


def gamma_cdf_grid(dist: GammaDistribution, x_max: float, n: int = 801) -> tuple[np.ndarray, np.ndarray]:
    """CDF on ``linspace(0, x_max, n)`` by cumulative trapezoidal integration."""
    x = np.linspace(0.0, x_max, n)
    f = gamma_density(dist, x)
    F = scipy.integrate.cumulative_trapezoid(f, x, initial=0.0)
    return x, F


@dataclass
class GammaSamples:
    """Monte-Carlo draws of ``gamma^CM`` and of single-point ``|g|^2``."""

    gamma: np.ndarray = field(repr=False)
    point_power: np.ndarray = field(repr=False)

    @property
    def mean(self) -> float:
        return float(np.mean(self.gamma))

    @property
    def variance(self) -> float:
        return float(np.var(self.gamma, ddof=1))

    def histogram(self, bins: int = 50):
        return np.histogram(self.gamma, bins=bins, density=True)

    @property
    def point_variance(self) -> float:
        """Sample variance of ``|g_{q,m}|^2``, averaged over grid points."""
        return float(np.mean(np.var(self.point_power, axis=0, ddof=1)))


def gamma_monte_carlo(
    cfg: ScatteringConfig,
    config: FrameConfig,
    n_frames: int,
    seed: int = 0,
) -> GammaSamples:
    """Draw ``n_frames`` channel realizations and record ``mean |g|^2`` per frame."""
    if n_frames < 1:
        raise ValueError("need at least one frame")
    root = np.random.SeedSequence(seed)
    gammas = np.empty(n_frames)
    power = np.empty((n_frames, config.grid_size))
    for i, child in enumerate(root.spawn(n_frames)):
        g = realize(draw_paths(cfg, np.random.default_rng(child)), config).vector
        p = np.abs(g) ** 2
        power[i] = p
        gammas[i] = p.mean()
    return GammaSamples(gammas, power)


def eigen_spectrum_report(cov: CovarianceModel, cutoff: float = REPORT_CUTOFF):
    """Descending eigenvalues and those whose normalized value ``lam/(M N)`` exceeds ``cutoff``.

    Returns ``(reported, full)``; ``full`` sums to ``M N``.
    """
    full = cov.eigenvalues
    return full[full / cov.size > cutoff], full


def ks_statistic(samples: np.ndarray, dist: GammaDistribution, n_grid: int = 801) -> float:
    """Kolmogorov-Smirnov distance between samples and ``dist`` (CDF on a grid)."""
    samples = np.sort(np.asarray(samples))
    x, F = gamma_cdf_grid(dist, float(samples[-1]) * 1.05, n_grid)
    ecdf_hi = np.searchsorted(samples, x, side="right") / samples.size
    ecdf_lo = np.searchsorted(samples, x, side="left") / samples.size
    return float(max(np.max(np.abs(ecdf_hi - F)), np.max(np.abs(ecdf_lo - F))))


def table_rows(config: FrameConfig, n_frames: int = 0, seed: int = 0, n_paths: int = 60) -> list[dict]:
    """One row per preset: supports, analytic and (optionally) empirical variance."""
    N, M = config.grid_shape
    rows = []
    for name, (nu_d, theta_p) in PRESETS.items():
        cov = covariance_flat(nu_d, theta_p, M, N)
        row = {
            "preset": name,
            "nu_d": nu_d,
            "theta_p": theta_p,
            "sigma2_analytic": gamma_variance(cov),
            "sigma2_empirical": float("nan"),
        }
        if n_frames:
            mc = gamma_monte_carlo(ScatteringConfig.preset(name, n_paths), config, n_frames, seed)
            row["sigma2_empirical"] = mc.variance
        rows.append(row)
    return rows


def write_reports(out_dir: str | Path, config: FrameConfig, n_frames: int = 0, seed: int = 0) -> list[Path]:
    """Write the variance table and one eigenvalue spectrum file per preset."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    rows = table_rows(config, n_frames, seed)
    table = out / "hardening_table.csv"
    with table.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (f"{v:.6g}" if isinstance(v, float) else v) for k, v in row.items()})
    written.append(table)
    N, M = config.grid_shape
    for name, (nu_d, theta_p) in PRESETS.items():
        cov = covariance_flat(nu_d, theta_p, M, N)
        reported, _ = eigen_spectrum_report(cov)
        path = out / f"spectrum_{name}.csv"
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["index", "eigenvalue", "normalized"])
            for i, lam in enumerate(reported):
                writer.writerow([i, f"{lam:.10g}", f"{lam / cov.size:.10g}"])
        written.append(path)
    return written
