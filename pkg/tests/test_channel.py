import numpy as np
import pytest
import scipy.stats

from orthoprecoding.channel import (
    PRESETS,
    ScatteringConfig,
    add_noise,
    covariance_flat,
    draw_paths,
    max_doppler,
    noise_variance,
    realize,
)
from orthoprecoding.channel import Paths
from orthoprecoding.frame import ConfigurationError, FrameConfig

TINY = FrameConfig(n_subcarriers=8, n_symbols=6, cp_length=2, n_pilot_symbols=0)


def single_path(theta, nu):
    return Paths(np.array([1.0 + 0j]), np.array([theta]), np.array([nu]))


def test_single_path_at_origin():
    p = draw_paths(ScatteringConfig(0.0, 0.0, n_paths=1), 0)
    assert abs(abs(p.eta[0]) - 1) < 1e-15 and p.theta[0] == 0 and p.nu[0] == 0


def test_flat_sampler_histograms():
    cfg = ScatteringConfig(0.01, 0.15, n_paths=10_000)
    p = draw_paths(cfg, 42)
    for values, lo, hi in ((p.nu, -0.01, 0.01), (p.theta, 0.0, 0.15)):
        counts, _ = np.histogram(values, bins=20, range=(lo, hi))
        assert counts.sum() == 10_000
        assert scipy.stats.chisquare(counts).pvalue > 1e-3
    np.testing.assert_allclose(np.sum(np.abs(p.eta) ** 2), 1.0)


def test_exponential_profile_weights_short_delays():
    cfg = ScatteringConfig(0.0, 0.15, pdp="exponential", theta_rms=0.05, n_paths=2000)
    p = draw_paths(cfg, 1)
    early = np.abs(p.eta[p.theta < 0.05]).mean()
    late = np.abs(p.eta[p.theta > 0.10]).mean()
    assert early > 2 * late
    np.testing.assert_allclose(np.sum(np.abs(p.eta) ** 2), 1.0)


def test_max_doppler_200kmh():
    assert max_doppler(200, 5.9e9) == pytest.approx(1092, abs=1)


def test_from_physical_vehicular():
    cfg = ScatteringConfig.from_physical(FrameConfig(), 200)
    assert cfg.nu_d == pytest.approx(1092.9 * 8e-6, rel=1e-3)
    assert cfg.theta_p == pytest.approx(0.15625)
    assert cfg.pdp == "exponential" and cfg.theta_rms == pytest.approx(0.0625)


def test_invalid_supports():
    with pytest.raises(ConfigurationError):
        ScatteringConfig(0.5, 0.1)
    with pytest.raises(ConfigurationError):
        ScatteringConfig(0.01, -0.1)
    with pytest.raises(ConfigurationError):
        ScatteringConfig(0.01, 0.1, n_paths=0)
    with pytest.raises(ConfigurationError):
        ScatteringConfig(0.01, 0.3).check_cyclic_prefix(FrameConfig())
    with pytest.raises(ConfigurationError):
        ScatteringConfig.preset("urban")


def test_realize_constant_channel():
    np.testing.assert_allclose(realize(single_path(0.0, 0.0), TINY).g, 1.0)


def test_realize_pure_delay():
    g = realize(single_path(0.25, 0.0), TINY).g
    q = np.arange(8)
    np.testing.assert_allclose(g, np.exp(-2j * np.pi * 0.25 * q)[:, None] * np.ones(6), atol=1e-15)


def test_realize_two_paths_vs_pointwise():
    p = Paths(np.array([0.6 + 0.2j, -0.3j]), np.array([0.05, 0.12]), np.array([0.01, -0.02]))
    g = realize(p, TINY).g
    for q in range(8):
        for m in range(6):
            ref = sum(
                eta * np.exp(-2j * np.pi * th * q) * np.exp(2j * np.pi * nu * m)
                for eta, th, nu in zip(p.eta, p.theta, p.nu)
            )
            assert abs(g[q, m] - ref) < 1e-12


def test_noise_variance_values():
    assert noise_variance(0.0, FrameConfig()) == pytest.approx(1.0)
    assert noise_variance(10.0, FrameConfig()) == pytest.approx(0.1)
    assert noise_variance(np.inf, FrameConfig()) == 0.0


def test_noiseless_passthrough():
    y = np.arange(4) + 1j
    out, s2 = add_noise(y, np.inf, FrameConfig())
    assert s2 == 0 and np.array_equal(out, y)


def test_noise_sample_variance():
    y, s2 = add_noise(np.zeros(100_000), 3.0, FrameConfig(), rng=5)
    assert abs(np.var(y) / s2 - 1) < 0.02
    assert abs(np.var(y.real) / (s2 / 2) - 1) < 0.02


def test_fully_correlated_limit():
    cov = covariance_flat(0.0, 0.0, 4, 3)
    np.testing.assert_allclose(cov.matrix, np.ones((12, 12)))
    lam = cov.eigenvalues
    assert lam[0] == pytest.approx(12) and np.allclose(lam[1:], 0, atol=1e-12)


@pytest.mark.parametrize("supports", list(PRESETS.values()) + [(0.05, 0.3)])
def test_kronecker_spectrum_vs_dense(supports):
    cov = covariance_flat(*supports, 8, 8)
    R = cov.matrix
    np.testing.assert_allclose(np.diag(R), 1.0)
    np.testing.assert_allclose(R, R.conj().T, atol=1e-15)
    dense = np.sort(np.linalg.eigvalsh(R))[::-1]
    np.testing.assert_allclose(cov.eigenvalues, dense, atol=1e-8)
    assert cov.eigenvalues.sum() == pytest.approx(64)


def test_principal_subspace_reconstructs(rng):
    cov = covariance_flat(0.03, 0.2, 6, 8)
    lam, U = cov.principal(0.0)
    np.testing.assert_allclose((U * lam) @ U.conj().T, cov.matrix, atol=1e-10)
    np.testing.assert_allclose(U.conj().T @ U, np.eye(48), atol=1e-10)
    lam_r, U_r = cov.principal(1e-3)
    assert lam_r.size < 48 and np.all(lam_r >= 1e-3 * lam[0])


def test_empirical_covariance_matches_model():
    cfg = ScatteringConfig(0.05, 0.2)
    n = 10_000
    root = np.random.SeedSequence(11)
    G = np.array([realize(draw_paths(cfg, np.random.default_rng(s)), TINY).vector for s in root.spawn(n)])
    R_emp = G.T @ G.conj() / n
    R = covariance_flat(0.05, 0.2, TINY.n_symbols, TINY.n_subcarriers).matrix
    assert np.max(np.abs(R_emp - R)) < 0.05
    energy = np.mean(np.abs(G) ** 2, axis=1)
    assert abs(energy.mean() - 1) < 0.02
