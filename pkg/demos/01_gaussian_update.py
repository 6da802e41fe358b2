# %% [markdown]
# # The linear update, three ways
#
# A joint Gaussian over (u, v) with only v measured. The closed-form
# posterior, the conditional mean evaluated at the denoised v, and a
# serial EAKF on an ensemble should all agree.

# %%
import numpy as np

from nlbayes import (Ensemble, MeasurementModel, StatePartition, conditional_gaussian,
                     eakf_update, ensemble_moments, kalman_posterior_moments)

rng = np.random.default_rng(0)
part = StatePartition.trailing(2, 1)  # two hidden components, one observed
cov = np.array([[1.0, 0.3, 0.6],
                [0.3, 2.0, -0.8],
                [0.6, -0.8, 1.5]])
X = rng.multivariate_normal([0.0, 1.0, -0.5], cov, size=2000)
ens = Ensemble(X, part)
meas = MeasurementModel(part, [[0.2]], [0.7])

# %%
prior = ensemble_moments(ens)
post = kalman_posterior_moments(prior, meas)
print("posterior mean      ", post.mean)

# the u-part of the posterior is the linear regression of u on v, evaluated at v_hat
v_hat = post.mean[part.v_index]
u_hat, _ = conditional_gaussian(prior, v_hat)
print("regression at v_hat ", u_hat)

# %% [markdown]
# The EAKF moves members deterministically, so its sample moments match
# the formulas up to floating point.

# %%
after = eakf_update(ens, meas)
print("EAKF ensemble mean  ", after.mean)
print("max covariance gap  ", np.abs(np.cov(after.members.T) - post.cov).max())
