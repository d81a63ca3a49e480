"""
How many users can share Q pilot symbols?
==========================================

The base station sees the pilot covariance ``R = P diag(g) P^H + sigma_w2 I``.
Stacking it column by column gives ``Q^2`` linear equations in the ``K``
unknown gains, ``vec(R) - sigma_w2 vec(I) = D g``, so the gains are
identifiable exactly when ``D`` has full column rank.  This script counts
that rank for the codebook families in the package.
"""

import numpy as np

from pilotgain import build_design_matrix, gen_gaussian_complex, gen_gaussian_real, gen_random_phase, gen_vandermonde

# %%
# Generic complex pilots fill all of ``C^{Q^2}``: up to ``K = Q^2`` users.
# Real pilots only produce symmetric ``p p^T``, so ``D`` lives in a
# ``Q(Q+1)/2`` dimensional space.  Constant-modulus pilots all put ``1/Q``
# on the diagonal of ``p p^H``, which removes ``Q - 1`` more dimensions.

print(f"{'Q':>3} {'K=Q^2':>6} {'complex':>8} {'real':>6} {'phase':>6} {'Vandermonde':>12}")
for q in range(2, 7):
    k = q * q
    ranks = [build_design_matrix(gen(q, k, 0)).rank() for gen in (gen_gaussian_complex, gen_gaussian_real, gen_random_phase)]
    ranks.append(build_design_matrix(gen_vandermonde(q, k, seed=0)).rank() if q <= 3 else "-")
    print(f"{q:>3} {k:>6} {ranks[0]:>8} {ranks[1]:>6} {ranks[2]:>6} {ranks[3]!s:>12}")
    assert ranks[:3] == [q * q, q * (q + 1) // 2, q * q - q + 1]

# %%
# The Vandermonde construction makes the full-rank claim explicit: with
# rows ``a_i^0 .. a_i^{K-1}``, ``D`` is itself Vandermonde in the products
# ``conj(a_i) a_j`` and is invertible when those are distinct.  Real
# generators break this: ``a_1 a_2 == a_2 a_1``.

for a in ([0.8 * np.exp(0.4j), 1.6 * np.exp(2.1j)], [2.0, 3.0]):
    d = build_design_matrix(gen_vandermonde(2, 4, a))
    print(f"generators {np.round(a, 3)} -> rank {d.rank()}")
