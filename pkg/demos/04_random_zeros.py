"""Zeros that are not censoring: contamination and the random-zero extension.

A fraction eta of observations is replaced by an exact 0 regardless of the
latent angle.  The plain model attributes every zero to censoring; the
extension learns eta and which zeros are likely random.

Run with ``python3 demos/04_random_zeros.py``; about a minute.
"""

from dataclasses import replace

import numpy as np

from zilcrm import ChainConfig, ModelVariant, RngStream, generate_dataset, preset, run_chain
from zilcrm.simulate import fit_censoring, truth_vector

spec = preset("table7", n=300, eta_y=0.1, eta_x=0.1)
data = generate_dataset(RngStream(5), spec)
clean = generate_dataset(RngStream(5), replace(spec, eta_y=0.0, eta_x=0.0))
print(f"response zeros: {100 * clean.zero_y.mean():.1f}% from censoring alone, "
      f"{100 * data.zero_y.mean():.1f}% after contamination")

cfg = ChainConfig(iterations=6000, burn_in=2000, thin=5, seed=2)
cs = fit_censoring(spec)
plain = run_chain(data, cs, ModelVariant.model1(), spec.priors(), cfg)
mixed = run_chain(data, cs, ModelVariant.model1(random_zeros=True), spec.priors(), cfg)

for name in ("eta_y", "eta_x"):
    lo, hi = np.quantile(mixed[name], [0.025, 0.975])
    print(f"{name}: posterior mean {mixed[name].mean():.3f}, 95% interval ({lo:.3f}, {hi:.3f}), truth 0.1")

print(f"\n{'parameter':<10}{'truth':>7}{'plain':>9}{'random-zero':>13}")
for k, t in truth_vector(spec).items():
    if not k.startswith("beta2_"):
        continue
    print(f"{k:<10}{t:>7.2f}{plain[k].mean():>9.3f}{mixed[k].mean():>13.3f}")
