"""Quantum convolutions: the two-register qudit rotation and the qubit CNOT network."""
from __future__ import annotations

import functools
import logging
from dataclasses import dataclass

import numpy as np

from .phase_space import SystemShape, check_budget, char_function, inverse_char, is_prime, tables
from .states import DensityMatrix

log = logging.getLogger(__name__)


class NoValidParams(ValueError):
    """Exhaustive search found no admissible parameters."""

    def __init__(self, msg: str, searched: int):
        super().__init__(msg)
        self.searched = searched


@dataclass(frozen=True)
class ConvolutionParams:
    d: int
    s: int
    t: int

    def __post_init__(self):
        d, s, t = self.d, self.s % self.d, self.t % self.d
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "t", t)
        if s == 0 or t == 0 or (s * s + t * t) % d != 1:
            raise ValueError(f"(s, t) = ({s}, {t}) violates s^2 + t^2 = 1 mod {d} with s, t != 0")

    @property
    def balanced(self) -> bool:
        return self.s == self.t


@dataclass(frozen=True)
class TripleConvolutionParams:
    """Balanced ``(s, t)`` for the inner convolution and ``(l, m)`` for the outer one."""

    base: ConvolutionParams
    l: int
    m: int

    def __post_init__(self):
        d = self.base.d
        l, m = self.l % d, self.m % d
        object.__setattr__(self, "l", l)
        object.__setattr__(self, "m", m)
        if not self.base.balanced:
            raise ValueError("triple convolution needs s = t mod d")
        if l == 0 or m == 0 or m != (l * self.base.s) % d or (l * l + m * m) % d != 1:
            raise ValueError(f"(l, m) = ({l}, {m}) inadmissible for s = {self.base.s} mod {d}")

    @property
    def outer(self) -> ConvolutionParams:
        return ConvolutionParams(self.base.d, self.l, self.m)

    def as_tuple(self):
        return (self.base.s, self.base.t, self.l, self.m)


@dataclass(frozen=True)
class QubitConvolution:
    """Qubit ``K``-input convolution; as a two-argument map see :func:`qubit_pair_convolve`."""

    K: int = 3

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be positive")

    d = 2


def find_params(d: int, balanced: bool = False) -> ConvolutionParams:
    """Lexicographically smallest ``(s, t)`` with ``s^2 + t^2 = 1 mod d``."""
    if not is_prime(d):
        raise ValueError(f"{d} is not prime")
    searched = 0
    for s in range(1, d):
        for t in range(1, d):
            if balanced and s != t:
                continue
            searched += 1
            if (s * s + t * t) % d == 1:
                return ConvolutionParams(d, s, t)
    kind = "balanced " if balanced else ""
    raise NoValidParams(f"no {kind}(s, t) for d={d} ({searched} pairs searched)", searched)


def find_triple_params(d: int) -> TripleConvolutionParams:
    """Smallest ``(s, s, l, l s)`` with ``2 s^2 = 1`` and ``l^2 (1 + s^2) = 1 mod d``."""
    if not is_prime(d):
        raise ValueError(f"{d} is not prime")
    searched = 0
    found_base = False
    for s in range(1, d):
        searched += 1
        if (2 * s * s) % d != 1:
            continue
        found_base = True
        for l in range(1, d):
            searched += 1
            m = (l * s) % d
            if m and (l * l + m * m) % d == 1:
                return TripleConvolutionParams(ConvolutionParams(d, s, s), l, m)
    stage = "(l, m)" if found_base else "balanced (s, t)"
    raise NoValidParams(f"no {stage} for d={d} ({searched} candidates searched)", searched)


# --------------------------------------------------------------------------- #
# qudit convolution
# --------------------------------------------------------------------------- #


@functools.lru_cache(maxsize=64)
def _preimages(d: int, n: int, s: int, t: int):
    """``I[a, b], J[a, b]``: the input basis pair mapped to output ``(a, b)``."""
    tb = tables(SystemShape(d, n))
    dig = tb.digits
    a = dig[:, None, :]
    b = dig[None, :, :]
    I = ((s * a - t * b) % d) @ tb.weights
    J = ((t * a + s * b) % d) @ tb.weights
    I.setflags(write=False)
    J.setflags(write=False)
    return I, J


def conv_unitary(params: ConvolutionParams, n: int) -> np.ndarray:
    """Permutation matrix ``sum |s i + t j><i| (x) |-t i + s j><j|`` on 2n qudits."""
    d, s, t = params.d, params.s, params.t
    D = d ** n
    check_budget(D * D, "two-register dimension")
    tb = tables(SystemShape(d, n))
    dig = tb.digits
    i = dig[:, None, :]
    j = dig[None, :, :]
    out_a = ((s * i + t * j) % d) @ tb.weights
    out_b = ((-t * i + s * j) % d) @ tb.weights
    U = np.zeros((D * D, D * D))
    cols = (np.arange(D)[:, None] * D + np.arange(D)[None, :]).reshape(-1)
    U[(out_a * D + out_b).reshape(-1), cols] = 1.0
    return U


def _check_pair(rho: DensityMatrix, sigma: DensityMatrix, params) -> SystemShape:
    if rho.shape != sigma.shape:
        raise ValueError(f"shape mismatch: {rho.shape} vs {sigma.shape}")
    if rho.d != params.d:
        raise ValueError(f"params for d={params.d} applied to d={rho.d}")
    return rho.shape


def _partial_traces(joint: np.ndarray, D: int):
    t = joint.reshape(D, D, D, D)
    return np.trace(t, axis1=1, axis2=3), np.trace(t, axis1=0, axis2=2)


def _convolve(rho, sigma, params, keep: str, method: str) -> DensityMatrix:
    shape = _check_pair(rho, sigma, params)
    D = shape.dim
    if method == "auto":
        method = "unitary" if D * D <= 256 else "index"
    if method == "unitary":
        U = conv_unitary(params, shape.n)
        joint = U @ np.kron(rho.op, sigma.op) @ U.T
        out_a, out_b = _partial_traces(joint, D)
        return DensityMatrix(out_a if keep == "A" else out_b, shape)
    if method != "index":
        raise ValueError(f"unknown method {method!r}")
    I, J = _preimages(shape.d, shape.n, params.s, params.t)
    r, g = rho.op, sigma.op
    out = np.zeros((D, D), dtype=complex)
    if keep == "A":
        for b in range(D):
            ib, jb = I[:, b], J[:, b]
            out += r[np.ix_(ib, ib)] * g[np.ix_(jb, jb)]
    else:
        for a in range(D):
            ia, ja = I[a], J[a]
            out += r[np.ix_(ia, ia)] * g[np.ix_(ja, ja)]
    return DensityMatrix(out, shape)


def convolve(rho: DensityMatrix, sigma: DensityMatrix, params: ConvolutionParams, method: str = "auto") -> DensityMatrix:
    """``Tr_B[U_{s,t} (rho (x) sigma) U_{s,t}^dag]``.

    ``method="unitary"`` multiplies the explicit permutation matrix; ``"index"``
    sums index blocks of the traced register directly.  ``"auto"`` picks the
    explicit product for small registers.
    """
    return _convolve(rho, sigma, params, "A", method)


def complementary_convolve(rho: DensityMatrix, sigma: DensityMatrix, params: ConvolutionParams, method: str = "auto") -> DensityMatrix:
    """Complementary channel: trace out register A instead of B."""
    return _convolve(rho, sigma, params, "B", method)


def convolve_fast(rho: DensityMatrix, sigma: DensityMatrix, params: ConvolutionParams) -> DensityMatrix:
    """Same output as :func:`convolve` through ``Xi_out(x) = Xi_rho(s x) Xi_sigma(t x)``."""
    shape = _check_pair(rho, sigma, params)
    vals = char_function(rho).scaled(params.s) * char_function(sigma).scaled(params.t)
    return DensityMatrix(inverse_char(vals, shape), shape)


def complementary_convolve_fast(rho: DensityMatrix, sigma: DensityMatrix, params: ConvolutionParams) -> DensityMatrix:
    """``Xi_out(x) = Xi_rho(-t x) Xi_sigma(s x)``, the form observed for the complementary output."""
    shape = _check_pair(rho, sigma, params)
    vals = char_function(rho).scaled(-params.t) * char_function(sigma).scaled(params.s)
    return DensityMatrix(inverse_char(vals, shape), shape)


def triple_convolve(rho, tau, sigma, tparams: TripleConvolutionParams, fast: bool = True) -> DensityMatrix:
    """``(rho box_{s,t} tau) box_{l,m} sigma``."""
    conv = convolve_fast if fast else convolve
    return conv(conv(rho, tau, tparams.base), sigma, tparams.outer)


# --------------------------------------------------------------------------- #
# qubit convolution
# --------------------------------------------------------------------------- #


def _cnot_network(K: int, x: list) -> list:
    """Apply ``(prod_j CNOT_{j->1})(prod_i CNOT_{1->i})`` to a bit list, rightmost first."""
    x = list(x)
    for i in range(1, K):
        x[i] ^= x[0]
    for j in range(1, K):
        x[0] ^= x[j]
    return x


@functools.lru_cache(maxsize=32)
def _key_permutation(K: int, n: int) -> np.ndarray:
    """``perm[in] = out`` for ``V = U^{(x) n}`` on K systems of n qubits (system-major order)."""
    nq = K * n
    size = 1 << nq
    idx = np.arange(size)
    bits = (idx[:, None] >> (nq - 1 - np.arange(nq))[None, :]) & 1
    out = bits.copy()
    for i in range(n):
        cols = [k * n + i for k in range(K)]
        x = [bits[:, c] for c in cols]
        for c, v in zip(cols, _cnot_network(K, x)):
            out[:, c] = v
    perm = out @ (1 << (nq - 1 - np.arange(nq)))
    perm.setflags(write=False)
    return perm


def qubit_key_unitary(K: int, n: int, d: int = 2) -> np.ndarray:
    """Permutation matrix ``V`` on ``K n`` qubits."""
    if d != 2:
        raise ValueError("the key unitary is defined for qubits only")
    check_budget(2 ** (K * n), "key-unitary dimension")
    perm = _key_permutation(K, n)
    V = np.zeros((perm.size, perm.size))
    V[perm, np.arange(perm.size)] = 1.0
    return V


def _check_qubit_inputs(states) -> SystemShape:
    if not states:
        raise ValueError("empty input list")
    shape = states[0].shape
    if shape.d != 2:
        raise ValueError("qubit convolution needs d = 2")
    if any(s.shape != shape for s in states):
        raise ValueError("all inputs must share one shape")
    return shape


def qubit_convolve(states, method: str = "dense") -> DensityMatrix:
    """``Tr_{2..K}[V (rho_1 (x) ... (x) rho_K) V^dag]``."""
    shape = _check_qubit_inputs(states)
    K, n, D = len(states), shape.n, shape.dim
    if method == "fast":
        return DensityMatrix(inverse_char(qubit_char_product([char_function(s).values for s in states], shape), shape), shape)
    if method != "dense":
        raise ValueError(f"unknown method {method!r}")
    check_budget(2 ** (K * n), "key-unitary dimension")
    perm = _key_permutation(K, n)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(perm.size)
    R = D ** (K - 1)
    out = np.zeros((D, D), dtype=complex)
    a = np.arange(D)
    for r in range(R):
        src = inv[a * R + r]
        block = np.ones((D, D), dtype=complex)
        for k, st in enumerate(states):
            ik = (src >> (n * (K - 1 - k))) & (D - 1)
            block *= st.op[np.ix_(ik, ik)]
        out += block
    return DensityMatrix(out, shape)


def qubit_sign(shape: SystemShape, K: int) -> np.ndarray:
    """``(-1)^{((K-1)/2) p.q}``: the Y-type sign picked up by the odd-K network."""
    tb = tables(shape)
    dots = tb.digits @ tb.digits.T
    return np.where(((K - 1) // 2 * dots) % 2 == 0, 1.0, -1.0)


def qubit_char_product(tables_, shape: SystemShape) -> np.ndarray:
    K = len(tables_)
    if K % 2 == 0:
        raise ValueError("the characteristic-function path needs odd K")
    prod = np.ones_like(tables_[0])
    for t in tables_:
        prod = prod * t
    return qubit_sign(shape, K) * prod


# --------------------------------------------------------------------------- #
# generic two-argument interface
# --------------------------------------------------------------------------- #


def qubit_pair_convolve(rho: DensityMatrix, sigma: DensityMatrix, K: int = 3, fast: bool = True) -> DensityMatrix:
    """Two-argument qubit convolution with ``Xi_out = Xi_rho Xi_sigma^{K-1}``.

    This is ``box_K(rho, sigma, ..., sigma)`` up to a transpose (which carries the
    Y-type sign), so every entropy agrees with the literal network output.
    """
    out = qubit_convolve([rho] + [sigma] * (K - 1), method="fast" if fast else "dense")
    if (K - 1) // 2 % 2:
        return DensityMatrix(out.op.T, out.shape)
    return out


def conv2(rho: DensityMatrix, sigma: DensityMatrix, params, fast: bool = True) -> DensityMatrix:
    """``rho box sigma`` for either parameter family."""
    if isinstance(params, QubitConvolution):
        return qubit_pair_convolve(rho, sigma, params.K, fast)
    return convolve_fast(rho, sigma, params) if fast else convolve(rho, sigma, params)


def iterate_convolution(rho: DensityMatrix, N: int, params, method: str | None = None) -> list:
    """Self-convolution trajectory.

    Qudits: left fold ``rho_{k+1} = rho_k box rho`` for k < N, returning N states.
    Qubits: ``box_K(rho, ..., rho)`` for every odd ``K <= N`` (N must be odd).
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if isinstance(params, QubitConvolution) or (params is None and rho.d == 2):
        if N % 2 == 0:
            raise ValueError("qubit trajectories need odd N")
        method = method or "fast"
        if method == "fast":
            xi = char_function(rho).values
            return [
                DensityMatrix(inverse_char(qubit_sign(rho.shape, K) * xi ** K, rho.shape), rho.shape)
                for K in range(1, N + 1, 2)
            ]
        return [rho] + [qubit_convolve([rho] * K, method) for K in range(3, N + 1, 2)]
    method = method or "dense"
    step = convolve_fast if method == "fast" else convolve
    traj = [rho]
    for _ in range(N - 1):
        traj.append(step(traj[-1], rho, params))
    return traj
