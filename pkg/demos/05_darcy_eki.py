# %% [markdown]
# # Recovering Darcy permeability with ensemble Kalman inversion
#
# Two log-permeability parameters, one per half of the unit square. The data
# are 64 Fourier amplitudes of the pressure sampled on a 9 x 9 interior grid.
# This uses a coarse grid and a small ensemble; `nlbayes eki --config
# demos/configs/darcy.yaml` runs the full-size problem (several minutes).

# %%
from nlbayes import preset, run_eki_experiment

cfg = preset("darcy", grid_n=24, ensemble_size=200, max_iters=10, output_dir="results/demo_darcy")
traces = run_eki_experiment(cfg, ["eakf", "nlbu+ss"])

# %%
for label, tr in traces.items():
    print(label)
    for i, (err, fb, M) in enumerate(zip(tr.error, tr.fallback, tr.subsample_size)):
        tag = "fallback" if fb else ""
        print(f"  iter {i:2d}  error {err:.3e}  local members {'-' if M is None else M:>4}  {tag}")
