"""
Gain estimation with a finite array
====================================

The sample covariance of ``M`` antennas converges to ``R`` at rate
``1/sqrt(M)``, and the gain estimates follow.  Non-negative least squares
uses the prior ``g >= 0`` and never does worse than clipping ZF.
"""

import numpy as np

from pilotgain import PackingConfig, gen_grassmannian
from pilotgain import experiments as ex
from pilotgain.channel import pathloss_gains

q, k = 4, 16
p = gen_grassmannian(q, k, PackingConfig(seed=0))

# %%
# Users scattered between 1 and 3 distance units, pathloss exponent 3.8,
# normalized so the strongest user has gain 1; unit noise power.

dist = np.random.default_rng(7).uniform(1.0, 3.0, k)
g = pathloss_gains(dist)
g /= g.max()
print("gains:", np.round(g, 3))

m_values = (64, 256, 1024, 4096, 16384)
for method in ("ZF", "NNLS"):
    spec = ex.SimulationSpec(m_values, trials=30, seed=1, sigma_w2=1.0, method=method)
    summary = ex.summarize(ex.run_simulation(p, g, spec))
    line = "  ".join(f"M={s['m']}: {s['nmse_median']:.2e}" for s in summary)
    print(f"{method:>4} median NMSE  {line}")

# %%
# Each factor of 4 in M cuts the NMSE by about 4: the error power decays as
# 1/M, i.e. the amplitude error as 1/sqrt(M).
