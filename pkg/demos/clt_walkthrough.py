"""Repeated self-convolution of a random d=7 state drifting to its mean state."""
import numpy as np

from qconv import SystemShape, clt_bound, find_params, iterate_convolution, mean_state, random_density
from qconv.entropy import relative_entropy, von_neumann

sh = SystemShape(7)
params = find_params(7)  # (s, t) = (2, 2)
rho = random_density(sh, seed=np.random.default_rng(0))

rep = mean_state(rho)
print(f"params {params.s, params.t}  magic gap {rep.gap:.3f}  mean-state rank {rep.rank}")

print(" N   S(rho_N)   D(rho_N || M)   bound")
for N, s in enumerate(iterate_convolution(rho, 6, params), start=1):
    D = relative_entropy(s, rep.mean)
    b = clt_bound(rep, rho.purity(), N).value
    print(f"{N:2d}  {von_neumann(s):.6f}  {D:.3e}      {b:.3e}")
