"""
One frame through the link
==========================

Follows a single frame from information bits to decoded bits: coding,
interleaving, QPSK mapping, DSFT precoding, pilot multiplexing, a vehicular
doubly-selective channel and the iterative receiver with perfect channel
knowledge.
"""

# %%
# Frame layout
# ------------
# 64 subcarriers and 44 OFDM symbols, four of which carry pilots.
import numpy as np

from orthoprecoding.channel import ScatteringConfig, add_noise, draw_paths, realize
from orthoprecoding.fec import ConvolutionalCode, Interleaver, map_qpsk
from orthoprecoding.frame import FrameConfig, default_pilot_pattern
from orthoprecoding.precoding import make_basis
from orthoprecoding.receiver import PerfectCsi, detect_frame

config = FrameConfig()
pattern = default_pilot_pattern(config)
print("grid (N, M):", config.grid_shape)
print("pilot symbols at m =", config.pilot_symbol_indices)
print("data symbols per frame:", config.n_data)

# %%
# Transmitter
# -----------
rng = np.random.default_rng(0)
code = ConvolutionalCode()
interleaver = Interleaver(config.n_code_bits, seed=0)
info = rng.integers(0, 2, code.info_length(config.n_code_bits))
symbols = map_qpsk(interleaver.interleave(code.encode(info)))

basis = make_basis("dsft", config)
x = pattern.multiplex(basis.apply(symbols))

# %%
# Channel
# -------
# 200 km/h at 5.9 GHz, exponential delay profile.
scattering = ScatteringConfig.from_physical(config, velocity_kmh=200)
print(f"nu_D = {scattering.nu_d:.5f}, theta_P = {scattering.theta_p:.4f}")
g = realize(draw_paths(scattering, rng), config).vector
y, sigma2 = add_noise(g * x, ebn0_db=3.0, config=config, rng=rng)

# %%
# Receiver
# --------
# Iteration 1 is the LMMSE matched filter; the later ones cancel interference
# with the decoder's soft symbols.
result = detect_frame(y, PerfectCsi(g), sigma2, basis, pattern, code, interleaver,
                      n_iterations=3, info_bits=info)
for rec in result.iterations:
    print(f"iteration {rec.iteration}: {rec.bit_errors} bit errors, "
          f"soft-symbol power {rec.soft_variance:.3f}")
