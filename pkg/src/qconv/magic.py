"""Mean state, magic gap and the entropic functionals built on convolution."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .convolution import (
    ConvolutionParams,
    TripleConvolutionParams,
    complementary_convolve_fast,
    conv2,
    iterate_convolution,
    qubit_convolve,
    triple_convolve,
)
from .entropy import relative_entropy, renyi, von_neumann
from .phase_space import (
    PhasePoint,
    SystemShape,
    char_function,
    group_closed,
    inverse_char,
    symplectic_matrix,
    tables,
    weyl,
)
from .states import DensityMatrix, StabilizerGroupDescriptor, maximally_mixed, x_eigenstate, z_eigenstate

log = logging.getLogger(__name__)

UNIMODULAR_TOL = 1e-9
SUPPORT_TOL = 1e-10
CHECK_TOL = 1e-8


class MeanStateError(ValueError):
    pass


class ZeroMeanError(ValueError):
    def __init__(self, msg: str, best: PhasePoint, deviation: float):
        super().__init__(f"{msg} (best displacement {best}, deviation {deviation:.3e})")
        self.best = best
        self.deviation = deviation


class Unbounded(ArithmeticError):
    """The inverse-sumset coefficient has a vanishing denominator."""


@dataclass(frozen=True, eq=False)
class MeanStateReport:
    mean: DensityMatrix
    group: StabilizerGroupDescriptor
    group_points: np.ndarray  # flat indices of G
    rank: int
    gap: float
    lam: float  # (1 - gap)^2
    margin: float  # kept minimum modulus minus discarded maximum

    @property
    def shape(self) -> SystemShape:
        return self.mean.shape


def _basis(shape: SystemShape, flat: np.ndarray) -> list:
    """Greedy generating set of the subgroup listed in ``flat``."""
    tb = tables(shape)
    D = shape.dim
    span = {0}
    gens = []
    for x in flat:
        x = int(x)
        if x in span:
            continue
        gens.append(x)
        xp, xq = divmod(x, D)
        grown = set()
        for y in span:
            yp, yq = divmod(y, D)
            for c in range(shape.d):
                cp, cq = tb.reg_scale(c)[xp], tb.reg_scale(c)[xq]
                grown.add(int(tb.reg_add[yp, cp]) * D + int(tb.reg_add[yq, cq]))
        span = grown
    return gens


def mean_state(rho: DensityMatrix, unimodular_tol: float = UNIMODULAR_TOL) -> MeanStateReport:
    """Project onto the unimodular part of the characteristic function."""
    if not 0 < unimodular_tol < 0.5:
        raise ValueError("unimodular_tol must lie in (0, 0.5)")
    shape = rho.shape
    xi = char_function(rho).values
    mods = np.abs(xi)
    keep = mods >= 1 - unimodular_tol
    flat = np.flatnonzero(keep.reshape(-1))
    if not group_closed(shape, flat):
        raise MeanStateError(f"unimodular support ({flat.size} points) is not a subgroup; check unimodular_tol")
    order = flat.size
    rank = shape.dim // order
    if rank * order != shape.dim:
        raise MeanStateError(f"group order {order} does not divide {shape.dim}")
    mean = DensityMatrix(inverse_char(np.where(keep, xi, 0), shape), shape)

    rest = mods[~keep]
    nonunit = rest[rest > SUPPORT_TOL]
    gap = float(1 - nonunit.max()) if nonunit.size else 0.0
    margin = float(mods[keep].min() - (rest.max() if rest.size else 0.0))

    gens = []
    for g in _basis(shape, flat):
        # Xi(x) = omega^{-k}
        k = int(round(-np.angle(xi.reshape(-1)[g]) * shape.d / (2 * np.pi))) % shape.d
        gens.append((PhasePoint.from_index(shape, g), k))
    group = StabilizerGroupDescriptor(tuple(gens), shape.d)
    return MeanStateReport(mean, group, flat, rank, gap, (1 - gap) ** 2, margin)


def is_zero_mean(rho: DensityMatrix, tol: float = UNIMODULAR_TOL) -> bool:
    rep = mean_state(rho, tol)
    vals = char_function(rho).flat[rep.group_points]
    return bool(np.abs(vals - 1).max() <= 10 * tol)


def to_zero_mean(rho: DensityMatrix, tol: float = UNIMODULAR_TOL):
    """Displace by ``w(x)`` so the characteristic function is 1 on the group.

    Conjugation multiplies ``Xi(y)`` by ``omega^{-<y, x>}``; the first point
    (in index order) that fixes every group phase is verified and returned.
    """
    shape = rho.shape
    rep = mean_state(rho, tol)
    vals = char_function(rho).flat[rep.group_points]
    cand = np.arange(shape.npoints)
    ex = symplectic_matrix(shape, rep.group_points, cand)  # (|G|, D^2)
    phased = np.exp(-2j * np.pi * ex / shape.d) * vals[:, None]
    dev = np.abs(phased - 1).max(axis=0)
    for x in np.flatnonzero(dev <= 10 * tol):
        pt = PhasePoint.from_index(shape, int(x))
        out = rho.conjugate(weyl(shape, pt))
        if is_zero_mean(out, tol):
            return out, pt
    best = int(np.argmin(dev))
    raise ZeroMeanError("no displacement makes the state zero-mean", PhasePoint.from_index(shape, best), float(dev[best]))


def _zero_meaned(rho: DensityMatrix) -> DensityMatrix:
    if is_zero_mean(rho):
        return rho
    out, x = to_zero_mean(rho)
    log.info("input displaced by w(%s) to make it zero-mean", x)
    return out


def clt_relative_entropy_trace(rho: DensityMatrix, N: int, params, method: str | None = None) -> list:
    """``S(M(rho)) - S(box^k rho)`` along the self-convolution trajectory.

    For qubits the trajectory runs over odd ``k <= N``.
    """
    rho = _zero_meaned(rho)
    sm = von_neumann(mean_state(rho).mean)
    return [max(sm - von_neumann(s), 0.0) for s in iterate_convolution(rho, N, params, method)]


class CLTBound(NamedTuple):
    value: float
    linear: float


def _contraction(report: MeanStateReport, N: int) -> float:
    if N < 1:
        raise ValueError("N must be >= 1")
    return (1 - report.gap) ** (2 * N - 2)


def clt_bound(report: MeanStateReport, purity: float, N: int) -> CLTBound:
    lin = _contraction(report, N) * max(purity * report.rank - 1, 0.0)
    return CLTBound(math.log1p(lin), lin)


def renyi_clt_bound(report: MeanStateReport, purity: float, N: int) -> float:
    if N < 1:
        raise ValueError("N must be >= 1")
    R = report.rank
    rad = math.sqrt(max(purity - 1 / R, 0.0))
    return math.log1p((1 - report.gap) ** (N - 1) * R * rad)


def pinsker_trace_bound(report: MeanStateReport, purity: float, N: int) -> float:
    return math.sqrt(2 * _contraction(report, N) * max(purity * report.rank - 1, 0.0))


def doubling_constant(rho: DensityMatrix, params, alpha: float = 1.0, fast: bool = True) -> float:
    """``exp(S_a(rho box rho) - S_a(rho))``."""
    return math.exp(renyi(conv2(rho, rho, params, fast), alpha) - renyi(rho, alpha))


def difference_constant(rho: DensityMatrix, params: ConvolutionParams, alpha: float = 1.0) -> float:
    """``exp(S_a(rho boxminus rho) - S_a(rho))``."""
    if not isinstance(params, ConvolutionParams):
        raise TypeError("the difference constant needs qudit parameters")
    return math.exp(renyi(complementary_convolve_fast(rho, rho, params), alpha) - renyi(rho, alpha))


class Tripling(NamedTuple):
    difference: float
    exponential: float


def tripling_constant(rho: DensityMatrix, fast: bool = True) -> Tripling:
    if rho.d != 2:
        raise ValueError("the tripling constant is defined for qubits")
    diff = von_neumann(qubit_convolve([rho] * 3, method="fast" if fast else "dense")) - von_neumann(rho)
    return Tripling(diff, math.exp(diff))


def qist_bound(psi: DensityMatrix, C: float, report: MeanStateReport | None = None) -> float:
    """Upper bound on ``D(psi || M(psi))`` from a doubling bound ``C``.

    Qubits use ``lambda^2`` in place of ``lambda``.
    """
    if abs(psi.purity() - 1) > 1e-8:
        raise ValueError("the inverse-sumset bound needs a pure state")
    report = report or mean_state(psi)
    logC = math.log(C)
    R = report.rank
    if logC <= 0 or R == 1:
        return 0.0
    lam = report.lam ** 2 if psi.d == 2 else report.lam
    denom = math.log(R) - math.log1p(lam * (R - 1))
    if denom <= 0:
        raise Unbounded(f"log R = {math.log(R):.6g} does not exceed log(1 + lambda (R - 1))")
    return math.log(R) / denom * logC


def ruzsa_divergence(rho: DensityMatrix, sigma: DensityMatrix, params, alpha: float = 1.0) -> float:
    """``S_a(rho box sigma) - S_a(rho)``."""
    return renyi(conv2(rho, sigma, params), alpha) - renyi(rho, alpha)


def symmetrized_ruzsa(rho: DensityMatrix, sigma: DensityMatrix, params, alpha: float = 1.0) -> float:
    return 0.5 * (ruzsa_divergence(rho, sigma, params, alpha) + ruzsa_divergence(sigma, rho, params, alpha))


class Check(NamedTuple):
    lhs: float
    rhs: float
    holds: bool

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs


def cssa_check(rho, sigma, tau, tparams: TripleConvolutionParams, tol: float = CHECK_TOL, fast: bool = True) -> Check:
    """``S(rho box tau box sigma) + S(sigma) <= S(rho box sigma) + S(sigma box tau)``."""
    lhs = von_neumann(triple_convolve(rho, tau, sigma, tparams, fast)) + von_neumann(sigma)
    rhs = von_neumann(conv2(rho, sigma, tparams.base, fast)) + von_neumann(conv2(sigma, tau, tparams.base, fast))
    return Check(lhs, rhs, lhs <= rhs + tol)


def triangle_check(rho, sigma, tau, params, tol: float = CHECK_TOL) -> Check:
    """``S(rho box tau) + S(sigma) <= S(rho box sigma) + S(sigma box tau)``."""
    if isinstance(params, ConvolutionParams) and not params.balanced:
        raise ValueError("the triangle form needs balanced parameters (s = t mod d)")
    lhs = von_neumann(conv2(rho, tau, params)) + von_neumann(sigma)
    rhs = von_neumann(conv2(rho, sigma, params)) + von_neumann(conv2(sigma, tau, params))
    return Check(lhs, rhs, lhs <= rhs + tol)


def subadditivity_counterexamples(shape: SystemShape, params) -> dict:
    """Both failures of (super)additivity, checked against ``I/d^n``."""
    ceil = shape.n * math.log(shape.d)
    flat = maximally_mixed(shape)
    rho, sigma = z_eigenstate(shape), x_eigenstate(shape)
    out_a = conv2(rho, sigma, params)
    out_b = conv2(flat, flat, params)
    rep = {
        "not_subadditive": {"S_conv": von_neumann(out_a), "S_sum": von_neumann(rho) + von_neumann(sigma),
                  "dev_from_flat": float(np.abs(out_a.op - flat.op).max())},
        "not_superadditive": {"S_conv": von_neumann(out_b), "S_sum": 2 * von_neumann(flat),
                "dev_from_flat": float(np.abs(out_b.op - flat.op).max())},
        "ceiling": ceil,
    }
    a, b = rep["not_subadditive"], rep["not_superadditive"]
    if not (abs(a["S_conv"] - ceil) < 1e-9 and a["S_conv"] > a["S_sum"] + 1e-9):
        raise AssertionError(f"subadditivity counterexample failed: {a}")
    if not (abs(b["S_conv"] - ceil) < 1e-9 and b["S_conv"] < b["S_sum"] - 1e-9):
        raise AssertionError(f"superadditivity counterexample failed: {b}")
    return rep


def magic_measure_direct(rho: DensityMatrix, params, stab_set) -> tuple:
    """``min_sigma D_Rz(rho || sigma)`` over ``stab_set``; returns (value, index)."""
    if not len(stab_set):
        raise ValueError("empty stabilizer set")
    s_rho = von_neumann(rho)
    vals = [von_neumann(conv2(rho, s, params)) - s_rho for s in stab_set]
    i = int(np.argmin(vals))
    return float(vals[i]), i


def magic_measure_msps(rho: DensityMatrix, params, msps_set) -> float:
    """``min_sigma D(rho || rho box sigma)`` over ``msps_set``."""
    if not len(msps_set):
        raise ValueError("empty MSPS set")
    return float(min(relative_entropy(rho, conv2(rho, s, params)) for s in msps_set))
