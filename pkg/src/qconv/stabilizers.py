"""Stabilizer states of small registers: enumeration, membership and Clifford gates."""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .phase_space import (
    BudgetExceeded,
    PhasePoint,
    SystemShape,
    char_function,
    group_closed,
    weyl,
    weyl_coefficients,
)
from .states import (
    FORMAT_VERSION,
    DensityMatrix,
    StabilizerGroupDescriptor,
    maximally_mixed,
    stabilizer_from_generators,
    state_from_dict,
    state_to_dict,
)

MAX_STATES = 4096
DEDUPE_TOL = 1e-9


class CliffordVerificationError(RuntimeError):
    pass


@dataclass(frozen=True)
class MSPSEntry:
    state: DensityMatrix
    group: StabilizerGroupDescriptor
    rank: int  # d^{n - r}


@dataclass(frozen=True)
class StabilizerCatalog:
    shape: SystemShape
    pure_states: tuple
    groups: tuple
    msps: tuple = ()

    def __len__(self):
        return len(self.pure_states)


def pure_count(d: int, n: int) -> int:
    """``d^n prod_{k=1..n} (d^k + 1)``."""
    out = d ** n
    for k in range(1, n + 1):
        out *= d ** k + 1
    return out


def _check_enum_budget(shape: SystemShape, max_states: int) -> None:
    if shape.n > 2 or shape.dim > 64:
        raise BudgetExceeded(f"enumeration needs n <= 2 and d^n <= 64, got {shape}")
    if pure_count(shape.d, shape.n) > max_states:
        raise BudgetExceeded(f"{pure_count(shape.d, shape.n)} pure stabilizer states exceed the cap {max_states}")


def subspaces(d: int, m: int, r: int):
    """Every r-dimensional subspace of ``Z_d^m`` as an RREF basis ``(r, m)``."""
    if r == 0:
        yield np.zeros((0, m), dtype=np.int64)
        return
    for pivots in itertools.combinations(range(m), r):
        free = [(i, c) for i in range(r) for c in range(pivots[i] + 1, m) if c not in pivots]
        for vals in itertools.product(range(d), repeat=len(free)):
            B = np.zeros((r, m), dtype=np.int64)
            B[np.arange(r), pivots] = 1
            for (i, c), v in zip(free, vals):
                B[i, c] = v
            yield B


def _isotropic(B: np.ndarray, n: int, d: int) -> bool:
    P, Q = B[:, :n], B[:, n:]
    return not ((P @ Q.T - Q @ P.T) % d).any()


def isotropic_subspaces(shape: SystemShape, r: int) -> list:
    return [B for B in subspaces(shape.d, 2 * shape.n, r) if _isotropic(B, shape.n, shape.d)]


def _states_for(shape: SystemShape, B: np.ndarray):
    n = shape.n
    pts = [PhasePoint.of(shape, row[:n], row[n:]) for row in B]
    for ks in itertools.product(range(shape.d), repeat=len(pts)):
        desc = StabilizerGroupDescriptor(tuple(zip(pts, ks)), shape.d)
        yield stabilizer_from_generators(shape, desc), desc


def _dedupe(items) -> list:
    buckets: dict = {}
    out = []
    for rho, desc in items:
        key = (np.round(rho.op * 1e6) + 0.0).tobytes()  # + 0.0 folds -0.0
        seen = buckets.setdefault(key, [])
        if any(np.abs(np.linalg.eigvalsh(rho.op - o.op)).sum() < DEDUPE_TOL for o in seen):
            continue
        seen.append(rho)
        out.append((rho, desc))
    return out


def _msps(shape: SystemShape, r: int) -> list:
    if r == 0:
        return [MSPSEntry(maximally_mixed(shape), StabilizerGroupDescriptor((), shape.d), shape.dim)]
    found = _dedupe(s for B in isotropic_subspaces(shape, r) for s in _states_for(shape, B))
    return [MSPSEntry(rho, desc, shape.d ** (shape.n - r)) for rho, desc in found]


def enumerate_pure_stabilizers(shape: SystemShape, max_states: int = MAX_STATES) -> StabilizerCatalog:
    """Maximal isotropic subgroups times phase assignments."""
    _check_enum_budget(shape, max_states)
    found = _msps(shape, shape.n)
    return StabilizerCatalog(shape, tuple(e.state for e in found), tuple(e.group for e in found))


def enumerate_msps(shape: SystemShape, max_rank_exponent: int | None = None, max_states: int = MAX_STATES) -> list:
    """MSPS for ``r = n`` down to ``n - max_rank_exponent`` (default: down to 0)."""
    _check_enum_budget(shape, max_states)
    depth = shape.n if max_rank_exponent is None else min(int(max_rank_exponent), shape.n)
    out = []
    for r in range(shape.n, shape.n - depth - 1, -1):
        out.extend(_msps(shape, r))
    return out


def build_catalog(shape: SystemShape, max_rank_exponent: int | None = None) -> StabilizerCatalog:
    msps = enumerate_msps(shape, max_rank_exponent)
    pure = [e for e in msps if e.rank == 1]
    return StabilizerCatalog(shape, tuple(e.state for e in pure), tuple(e.group for e in pure), tuple(msps))


def is_stabilizer_pure(psi: DensityMatrix, tol: float = 1e-8) -> bool:
    if abs(psi.purity() - 1) > tol:
        raise ValueError("is_stabilizer_pure needs a pure state")
    mods = np.abs(char_function(psi).flat)
    unit = np.flatnonzero(mods >= 1 - tol)
    return unit.size == psi.dim and group_closed(psi.shape, unit)


def has_stabilizer_support(rho: DensityMatrix, tol: float = 1e-8) -> bool:
    """Every characteristic value is either 0 or unimodular on a subgroup (the MSPS criterion)."""
    mods = np.abs(char_function(rho).flat)
    unit = np.flatnonzero(mods >= 1 - tol)
    rest = mods[mods < 1 - tol]
    return bool((rest <= tol).all()) and group_closed(rho.shape, unit)


# --------------------------------------------------------------------------- #
# Clifford gates
# --------------------------------------------------------------------------- #


def _local(U: np.ndarray, site: int, n: int) -> np.ndarray:
    d = U.shape[0]
    ops = [np.eye(d)] * n
    ops[site] = U
    out = ops[0]
    for o in ops[1:]:
        out = np.kron(out, o)
    return out


def fourier_gate(d: int) -> np.ndarray:
    j = np.arange(d)
    return np.exp(2j * np.pi * np.outer(j, j) / d) / np.sqrt(d)


def phase_gate(d: int) -> np.ndarray:
    """``diag(zeta^{k^2})``; the S gate for qubits."""
    k = np.arange(d)
    if d == 2:
        return np.diag(1j ** (k * k))
    return np.diag(np.exp(2j * np.pi * ((d + 1) // 2) * k * k / d))


def sum_gate(d: int) -> np.ndarray:
    """``|i, j> -> |i, i + j>``."""
    U = np.zeros((d * d, d * d))
    for i in range(d):
        for j in range(d):
            U[i * d + (i + j) % d, i * d + j] = 1
    return U


def clifford_image(U: np.ndarray, shape: SystemShape, x: PhasePoint, tol: float = 1e-9):
    """``(y, c)`` with ``U w(x) U^dag = c w(y)``; raises if no such pair exists."""
    a = weyl_coefficients(U @ weyl(shape, x) @ U.conj().T, shape).reshape(-1)
    k = int(np.argmax(np.abs(a)))
    c = a[k]
    rest = np.delete(np.abs(a), k)
    if abs(abs(c) - 1) > tol or (rest.size and rest.max() > tol):
        raise CliffordVerificationError(f"conjugate of w{x} is not a phased Weyl operator")
    return PhasePoint.from_index(shape, k), complex(c)


def verify_clifford(U: np.ndarray, shape: SystemShape) -> None:
    n = shape.n
    for i in range(2 * n):
        e = np.zeros(2 * n, dtype=int)
        e[i] = 1
        clifford_image(U, shape, PhasePoint.of(shape, e[:n], e[n:]))


def clifford_generators(shape: SystemShape) -> list:
    """Fourier and phase gates on each qudit, plus SUM on both orderings when n = 2."""
    if shape.n > 2:
        raise BudgetExceeded("Clifford generators are provided for n <= 2")
    d, n = shape.d, shape.n
    gates = []
    for site in range(n):
        gates.append(_local(fourier_gate(d), site, n))
        gates.append(_local(phase_gate(d), site, n))
    if n == 2:
        S = sum_gate(d)
        swap = np.eye(d * d)[[(k % d) * d + k // d for k in range(d * d)]]
        gates.append(S)
        gates.append(swap @ S @ swap)
    for U in gates:
        verify_clifford(U, shape)
    return gates


def random_clifford(shape: SystemShape, length: int, seed=None) -> np.ndarray:
    rng = np.random.default_rng(seed)
    gens = clifford_generators(shape)
    U = np.eye(shape.dim, dtype=complex)
    for i in rng.integers(len(gens), size=length):
        U = gens[i] @ U
    return U


# --------------------------------------------------------------------------- #
# export
# --------------------------------------------------------------------------- #


def export_catalog(catalog: StabilizerCatalog, path) -> None:
    sh = catalog.shape
    doc = {
        "format_version": FORMAT_VERSION,
        "d": sh.d,
        "n": sh.n,
        "states": [state_to_dict(r, group=g.to_json(sh)) for r, g in zip(catalog.pure_states, catalog.groups)],
    }
    Path(path).write_text(json.dumps(doc) + "\n")


def load_catalog(path) -> StabilizerCatalog:
    doc = json.loads(Path(path).read_text())
    sh = SystemShape(int(doc["d"]), int(doc["n"]))
    states, groups = [], []
    for item in doc["states"]:
        states.append(state_from_dict(item))
        groups.append(StabilizerGroupDescriptor.from_json(item["group"], sh))
    return StabilizerCatalog(sh, tuple(states), tuple(groups))
