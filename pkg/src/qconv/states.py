"""Density matrices: validation, constructors, seeded ensembles and the state file format."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .phase_space import (
    STATE_TOL,
    PhasePoint,
    SystemShape,
    inverse_char,
    tables,
    weyl,
    weyl_commutation_phase,
)

FORMAT_VERSION = 1
CLAMP_TOL = 1e-10


class InvalidState(ValueError):
    """A matrix violates a density-matrix invariant."""

    def __init__(self, invariant: str, magnitude: float):
        super().__init__(f"{invariant} violated (magnitude {magnitude:.3e})")
        self.invariant = invariant
        self.magnitude = magnitude


class InvalidStabilizer(ValueError):
    pass


def _validate(op: np.ndarray, dim: int, tol: float) -> None:
    if op.shape != (dim, dim):
        raise InvalidState("shape", float(abs(op.shape[0] - dim)))
    herm = float(np.abs(op - op.conj().T).max())
    if herm > tol:
        raise InvalidState("hermiticity", herm)
    tr = abs(complex(np.trace(op)) - 1.0)
    if tr > tol:
        raise InvalidState("trace", tr)
    lo = float(np.linalg.eigvalsh((op + op.conj().T) / 2).min())
    if lo < -tol:
        raise InvalidState("positivity", -lo)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Validated Hermitian PSD unit-trace matrix on ``shape.dim`` dimensions.

    The stored matrix is the Hermitian part of the input; it is read-only.
    """

    op: np.ndarray
    shape: SystemShape
    tol: float = field(default=STATE_TOL, repr=False)

    def __post_init__(self):
        op = np.array(self.op, dtype=complex)
        _validate(op, self.shape.dim, self.tol)
        op = (op + op.conj().T) / 2
        op.setflags(write=False)
        object.__setattr__(self, "op", op)

    @property
    def d(self):
        return self.shape.d

    @property
    def n(self):
        return self.shape.n

    @property
    def dim(self):
        return self.shape.dim

    def purity(self) -> float:
        return float(np.real(np.vdot(self.op, self.op)))

    def spectrum(self) -> np.ndarray:
        """Eigenvalues in descending order, clamped at zero."""
        ev = np.linalg.eigvalsh(self.op)[::-1]
        if ev[-1] < -CLAMP_TOL:
            raise InvalidState("positivity", float(-ev[-1]))
        return np.clip(ev, 0.0, None)

    def conjugate(self, U: np.ndarray) -> "DensityMatrix":
        return DensityMatrix(U @ self.op @ U.conj().T, self.shape)

    def __repr__(self):
        return f"DensityMatrix{self.shape}"


def pure_state(vec, shape: SystemShape | None = None) -> DensityMatrix:
    v = np.asarray(vec, dtype=complex).reshape(-1)
    if shape is None:
        shape = _infer_shape(v.size)
    if v.size != shape.dim:
        raise ValueError(f"vector length {v.size} does not match {shape}")
    nrm = np.vdot(v, v).real
    if nrm == 0:
        raise ValueError("zero vector")
    return DensityMatrix(np.outer(v, v.conj()) / nrm, shape)


def _infer_shape(dim: int) -> SystemShape:
    for d in range(2, dim + 1):
        n, r = 0, dim
        while r % d == 0:
            r //= d
            n += 1
        if r == 1:
            return SystemShape(d, n)
    raise ValueError(f"dimension {dim} is not a prime power")


def maximally_mixed(shape: SystemShape) -> DensityMatrix:
    return DensityMatrix(np.eye(shape.dim) / shape.dim, shape)


def z_eigenstate(shape: SystemShape) -> DensityMatrix:
    """``(1/d^n) sum_a Z^a``: the +1 eigenstate of every Z."""
    acc = np.zeros((shape.dim, shape.dim), dtype=complex)
    for a in range(shape.dim):
        acc += weyl(shape, PhasePoint.from_index(shape, a * shape.dim))
    return DensityMatrix(acc / shape.dim, shape)


def x_eigenstate(shape: SystemShape) -> DensityMatrix:
    """``(1/d^n) sum_a X^a``: the +1 eigenstate of every X."""
    acc = np.zeros((shape.dim, shape.dim), dtype=complex)
    for a in range(shape.dim):
        acc += weyl(shape, PhasePoint.from_index(shape, a))
    return DensityMatrix(acc / shape.dim, shape)


def diagonal_state(probs, shape: SystemShape) -> DensityMatrix:
    p = np.asarray(probs, dtype=float)
    return DensityMatrix(np.diag(p / p.sum()).astype(complex), shape)


def t_state() -> DensityMatrix:
    """Single-qubit magic state ``(|0> + e^{i pi/4}|1>)/sqrt 2``."""
    return pure_state([1.0, np.exp(1j * np.pi / 4)], SystemShape(2, 1))


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def random_density(shape: SystemShape, rank: int | None = None, seed=None) -> DensityMatrix:
    """Ginibre state ``G G^dag / Tr`` with ``G`` of width ``rank`` (default full rank)."""
    rank = shape.dim if rank is None else int(rank)
    if not 1 <= rank <= shape.dim:
        raise ValueError(f"rank must lie in [1, {shape.dim}], got {rank}")
    rng = _rng(seed)
    G = rng.standard_normal((shape.dim, rank)) + 1j * rng.standard_normal((shape.dim, rank))
    rho = G @ G.conj().T
    return DensityMatrix(rho / np.trace(rho).real, shape)


def random_pure(shape: SystemShape, seed=None) -> DensityMatrix:
    return random_density(shape, 1, seed)


def tensor(*states: DensityMatrix) -> DensityMatrix:
    d = states[0].d
    if any(s.d != d for s in states):
        raise ValueError("tensor factors must share the local dimension")
    op = states[0].op
    for s in states[1:]:
        op = np.kron(op, s.op)
    return DensityMatrix(op, SystemShape(d, sum(s.n for s in states)))


def partial_trace(rho: DensityMatrix, traced) -> DensityMatrix:
    """Trace out the qudits listed in ``traced``."""
    traced = sorted({int(traced)} if np.isscalar(traced) else set(traced))
    d, n = rho.d, rho.n
    keep = [i for i in range(n) if i not in traced]
    if not keep:
        raise ValueError("cannot trace out every qudit")
    t = rho.op.reshape((d,) * (2 * n))
    for i in reversed(traced):
        cur = t.ndim // 2
        t = np.trace(t, axis1=i, axis2=i + cur)
    m = d ** len(keep)
    return DensityMatrix(t.reshape(m, m), SystemShape(d, len(keep)))


@dataclass(frozen=True)
class StabilizerGroupDescriptor:
    """Generators ``(x, k)``: the state satisfies ``w(x) rho = omega^k rho``.

    For qubits ``omega = -1``.  ``Xi(x) = omega^{-k}`` on each generator.
    """

    generators: tuple
    d: int

    @property
    def rank(self) -> int:
        return len(self.generators)

    @property
    def order(self) -> int:
        return self.d ** len(self.generators)

    def points(self) -> list:
        return [g for g, _ in self.generators]

    def to_json(self, shape: SystemShape) -> list:
        return [{"p": list(x.p), "q": list(x.q), "phase": int(k)} for x, k in self.generators]

    @classmethod
    def from_json(cls, items, shape: SystemShape) -> "StabilizerGroupDescriptor":
        return cls(tuple((PhasePoint.of(shape, it["p"], it["q"]), int(it["phase"]) % shape.d) for it in items), shape.d)


def stabilizer_from_generators(shape: SystemShape, gens: StabilizerGroupDescriptor) -> DensityMatrix:
    """MSPS ``d^{-(n-r)} prod_i E_k (omega^{-k_i} w(x_i))^k``; pure when r = n."""
    d, D = shape.d, shape.dim
    r = gens.rank
    if r > shape.n:
        raise InvalidStabilizer(f"{r} generators exceed register length {shape.n}")
    pts = gens.points()
    for i in range(r):
        for j in range(i + 1, r):
            c = weyl_commutation_phase(shape, pts[i], pts[j])
            if abs(c - 1) > 1e-9:
                raise InvalidStabilizer(f"generators {i} and {j} do not commute")
    tb = tables(shape)
    proj = np.eye(D, dtype=complex)
    for x, k in gens.generators:
        g = weyl(shape, x) * tb.roots[(-tb.ome * int(k)) % tb.M]
        avg = np.zeros((D, D), dtype=complex)
        gp = np.eye(D, dtype=complex)
        for _ in range(d):
            avg += gp
            gp = gp @ g
        proj = proj @ (avg / d)
    tr = np.trace(proj).real
    expected = d ** (shape.n - r)
    if tr < 0.5:
        raise InvalidStabilizer("inconsistent phases: projector vanishes")
    if abs(tr - expected) > 1e-6:
        raise InvalidStabilizer(f"generators are not independent (projector rank {tr:.3f}, expected {expected})")
    return DensityMatrix(proj / expected, shape)


# --------------------------------------------------------------------------- #
# state file format
# --------------------------------------------------------------------------- #


def _num(x: float) -> str:
    return format(float(x), ".17g")


def _payload(rho: DensityMatrix) -> dict:
    flat = rho.op.reshape(-1)
    return {
        "format_version": FORMAT_VERSION,
        "d": rho.d,
        "n": rho.n,
        "matrix": [[_num(z.real), _num(z.imag)] for z in flat],
    }


def _checksum(payload: dict) -> str:
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def state_to_dict(rho: DensityMatrix, **extra) -> dict:
    payload = _payload(rho)
    doc = dict(payload)
    doc["checksum"] = _checksum(payload)
    doc.update(extra)
    return doc


def state_from_dict(doc: dict) -> DensityMatrix:
    try:
        version = int(doc["format_version"])
        d, n = int(doc["d"]), int(doc["n"])
        entries = doc["matrix"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed state document: {exc}") from None
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported format_version {version}")
    payload = {"format_version": version, "d": d, "n": n, "matrix": entries}
    if "checksum" in doc and doc["checksum"] != _checksum(payload):
        raise ValueError("checksum mismatch")
    shape = SystemShape(d, n)
    if len(entries) != shape.dim ** 2:
        raise ValueError(f"matrix has {len(entries)} entries, expected {shape.dim ** 2}")
    vals = np.array([complex(float(re), float(im)) for re, im in entries])
    return DensityMatrix(vals.reshape(shape.dim, shape.dim), shape)


def save_state(rho: DensityMatrix, path, **extra) -> None:
    Path(path).write_text(json.dumps(state_to_dict(rho, **extra), indent=1) + "\n")


def load_state(path) -> DensityMatrix:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"malformed state file {path}: {exc}") from None
    return state_from_dict(doc)


def from_char_values(values: np.ndarray, shape: SystemShape) -> DensityMatrix:
    return DensityMatrix(inverse_char(values, shape), shape)
