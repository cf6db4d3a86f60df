"""Convolution entropy is neither sub- nor superadditive: two exact d=7 examples."""
import math

from qconv import SystemShape, conv2, find_params, maximally_mixed, von_neumann
from qconv.states import x_eigenstate, z_eigenstate

sh = SystemShape(7)
params = find_params(7)

z, x = z_eigenstate(sh), x_eigenstate(sh)
out = conv2(z, x, params)
print(f"S(z)={abs(von_neumann(z)):.1e}  S(x)={abs(von_neumann(x)):.1e}  S(z conv x)={von_neumann(out):.12f}  log 7={math.log(7):.12f}")

flat = maximally_mixed(sh)
out = conv2(flat, flat, params)
print(f"S(I/7 conv I/7)={von_neumann(out):.12f}  S(I/7)+S(I/7)={2 * von_neumann(flat):.12f}")
