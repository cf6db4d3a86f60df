"""Ruzsa divergence of magic for the qubit T-state and a random d=7 state."""
import math

import numpy as np

from qconv import SystemShape, build_catalog, find_params, magic_measure_direct, magic_measure_msps, random_density, t_state
from qconv.convolution import QubitConvolution


def report(label, rho, params):
    cat = build_catalog(rho.shape)
    direct, idx = magic_measure_direct(rho, params, list(cat.pure_states))
    alt = magic_measure_msps(rho, params, [e.state for e in cat.msps])
    print(f"{label:10s} direct {direct:.10f} (closest stabilizer #{idx})  msps route {alt:.10f}")


report("T-state", t_state(), QubitConvolution(3))
p = (1 + 1 / math.sqrt(2)) / 2
print(f"{'':10s} binary entropy h({p:.4f}) = {-p * math.log(p) - (1 - p) * math.log(1 - p):.10f}")

# at d=7 the two routes differ: the s = 2 scaling relabels the dephased state
report("d=7 random", random_density(SystemShape(7), seed=np.random.default_rng(1)), find_params(7))
