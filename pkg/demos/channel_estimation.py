"""
Iterative channel estimation
============================

Pilots alone give a coarse estimate of the time-variant channel. Feeding the
decoder's soft symbols back as extra pilots refines it.
"""

# %%
import numpy as np

from orthoprecoding.chanest import WienerEstimator
from orthoprecoding.sim import LinkContext, SimulationPlan
from orthoprecoding.channel import add_noise, draw_paths, realize
from orthoprecoding.fec import map_qpsk
from orthoprecoding.receiver import detect_frame

plan = SimulationPlan(estimation="iterative")
ctx = LinkContext(plan, "v200", "dsft")
rng = np.random.default_rng(3)

# %%
# Simulate a few frames and track the estimation error per iteration.
mse = np.zeros(plan.frame.n_iterations)
n_frames = 20
for _ in range(n_frames):
    info = rng.integers(0, 2, ctx.n_info)
    b = map_qpsk(ctx.interleaver.interleave(ctx.code.encode(info)))
    g = realize(draw_paths(ctx.scattering, rng), ctx.frame).vector
    y, sigma2 = add_noise(g * ctx.pattern.multiplex(ctx.basis.apply(b)), 7.0, ctx.frame, rng)
    est = ctx.estimator(g, sigma2)
    assert isinstance(est, WienerEstimator)
    res = detect_frame(y, est, sigma2, ctx.basis, ctx.pattern, ctx.code, ctx.interleaver,
                       plan.frame.n_iterations, info, keep_estimates=True)
    mse += [np.mean(np.abs(r.g_hat - g) ** 2) for r in res.iterations]

for i, m in enumerate(mse / n_frames, start=1):
    print(f"estimate used in iteration {i}: MSE = {m:.2e}")
