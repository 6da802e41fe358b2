# %% [markdown]
# # Lorenz 63 twin experiment
#
# Only y is observed, every 0.4 time units with noise variance 0.01. This is
# a shortened run (150 cycles); the full protocol is
#
#     nlbayes sweep --config demos/configs/l63.yaml --method eakf --inflation 1.0:1.5:0.05
#     nlbayes run --config demos/configs/l63.yaml
#
# and takes a couple of minutes.

# %%
from nlbayes import preset, run_twin_experiment, sweep_inflation, parse_range

cfg = preset("l63", n_cycles=150)
rows, _ = sweep_inflation(cfg, parse_range("1.0:1.2:0.05"))
for r in rows:
    print(f"EAKF inflation {r.inflation:.2f}: prior {r.prior:.4f} post {r.post:.4f}{'  *' if r.best else ''}")
best = next(r for r in rows if r.best)

# %%
# same inflation for the nonlinear update, with subsampling and clustering
nl = run_twin_experiment(cfg.replace(method="nlbu", clustering=True, inflation=best.inflation))
print(f"{nl.method}: prior {nl.prior_mean_error:.4f} post {nl.post_mean_error:.4f}, "
      f"EAKF fallback in {nl.fallback_fraction:.0%} of cycles")
