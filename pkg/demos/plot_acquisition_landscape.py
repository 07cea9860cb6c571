"""
Acquisition landscapes on a one-dimensional posterior
=====================================================

A small GP is conditioned on four noiseless observations.  One bundle of
posterior sample paths is then shared by every sample-based acquisition, so
the curves differ only through the criterion itself.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from ves_bo import acquisition as acq
from ves_bo.gp_model import GpPosterior, KernelSpec, ObservationSet
from ves_bo.posterior_paths import JointSampleBatch, draw_paths, joint_samples

out = Path("demo_output")
out.mkdir(exist_ok=True)

# four observations of an unknown function on [0, 1]
obs = ObservationSet([[0.08], [0.35], [0.55], [0.9]], [0.1, 0.9, 0.4, -0.2])
gp = GpPosterior.condition(obs, KernelSpec([0.15], 1.0, 1e-10))
grid = np.linspace(0, 1, 400)[:, None]
mean, var = gp.mean_var(grid)

# 256 pathwise samples; their maxima are the y* samples
bundle = draw_paths(gp, n_paths=256, seed=0)
print(f"incumbent {gp.incumbent:.3f}, mean sampled maximum {bundle.y_star_base.mean():.3f}")

# closed-form criteria
log_ei = acq.log_ei(mean, np.sqrt(var), gp.incumbent)
mes = acq.mes_from_moments(mean, np.sqrt(var), bundle.y_star_base)

# sample-based criteria share the bundle; the exponential bound uses the rate fitted at the EI argmax
ei = acq.mc_ei_values(bundle, grid)
x_ei = grid[np.argmax(ei)]
y_star, y_x = joint_samples(bundle, x_ei[None])
lam = acq.solve_lambda(JointSampleBatch.from_arrays(y_star[0], y_x[0], gp.incumbent))
exp_bound = acq.eslbo_exp_values(bundle, grid, lam, 1e-10)
gamma_bound = acq.profiled_values(bundle, grid, acq.AcquisitionSpec())

# the exponential bound and Monte-Carlo EI peak at the same place
print("EI argmax", x_ei[0], "exponential-bound argmax", grid[np.argmax(exp_bound), 0])

fig, axes = plt.subplots(3, 1, figsize=(7, 8), sharex=True)
axes[0].plot(grid, mean, color="k")
axes[0].fill_between(grid[:, 0], mean - 2 * np.sqrt(var), mean + 2 * np.sqrt(var), alpha=0.2)
axes[0].plot(obs.points, obs.values, "o", color="C3")
axes[0].set_ylabel("posterior")
axes[1].plot(grid, log_ei, label="LogEI")
axes[1].plot(grid, np.log(mes + 1e-12), label="log MES")
axes[1].set_ylim(-20, None)  # LogEI dives to about -1e5 right at the observations
axes[1].legend()
axes[2].plot(grid, exp_bound, label="exponential bound")
axes[2].plot(grid, gamma_bound, label="Gamma bound (profiled)")
axes[2].legend()
axes[2].set_xlabel("x")
fig.tight_layout()
fig.savefig(out / "acquisition_landscape.png", dpi=120)
print("wrote", out / "acquisition_landscape.png")
