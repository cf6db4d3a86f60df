"""Discrete phase space of n qudits: Weyl operators and characteristic functions.

Phase points ``x = (p, q)`` live in ``Z_d^n x Z_d^n``.  Tables over phase space
are stored as ``(d^n, d^n)`` arrays indexed ``[p_index, q_index]`` where a
register vector is encoded big-endian (qudit 0 is the most significant digit,
matching ``np.kron`` ordering).  The flat index of a point is therefore
``p_index * d^n + q_index``.

All phases are carried as exact integer exponents of a root of unity and
exponentiated once through a lookup table.
"""
from __future__ import annotations

import functools
import os
from dataclasses import dataclass

import numpy as np

DEFAULT_BUDGET = 4096
STRUCT_TOL = 1e-12
STATE_TOL = 1e-10


class BudgetExceeded(ValueError):
    pass


def dimension_budget() -> int:
    """Dense-dimension cap; ``QCONV_BUDGET`` overrides the default."""
    env = os.environ.get("QCONV_BUDGET")
    return int(env) if env else DEFAULT_BUDGET


def is_prime(d: int) -> bool:
    if d < 2:
        return False
    if d < 4:
        return True
    if d % 2 == 0:
        return False
    f = 3
    while f * f <= d:
        if d % f == 0:
            return False
        f += 2
    return True


def check_budget(dim: int, what: str = "dimension") -> None:
    cap = dimension_budget()
    if dim > cap:
        raise BudgetExceeded(f"{what} {dim} exceeds dense budget {cap} (set QCONV_BUDGET)")


@dataclass(frozen=True)
class SystemShape:
    """n qudits of prime local dimension d."""

    d: int
    n: int = 1

    def __post_init__(self):
        if not is_prime(int(self.d)):
            raise ValueError(f"local dimension must be prime, got {self.d}")
        if self.n < 1:
            raise ValueError(f"register length must be positive, got {self.n}")
        check_budget(self.dim)

    @property
    def dim(self) -> int:
        return self.d ** self.n

    @property
    def npoints(self) -> int:
        return self.dim ** 2

    def __str__(self):
        return f"(d={self.d}, n={self.n})"


@dataclass(frozen=True)
class PhasePoint:
    p: tuple
    q: tuple

    @classmethod
    def of(cls, shape: SystemShape, p, q) -> "PhasePoint":
        p = (p,) if np.isscalar(p) else tuple(p)
        q = (q,) if np.isscalar(q) else tuple(q)
        if len(p) != shape.n or len(q) != shape.n:
            raise ValueError(f"point ({p}, {q}) does not match {shape}")
        return cls(tuple(int(v) % shape.d for v in p), tuple(int(v) % shape.d for v in q))

    @classmethod
    def from_index(cls, shape: SystemShape, index: int) -> "PhasePoint":
        pi, qi = divmod(int(index), shape.dim)
        dig = _tables(shape.d, shape.n).digits
        return cls(tuple(int(v) for v in dig[pi]), tuple(int(v) for v in dig[qi]))

    def index(self, shape: SystemShape) -> int:
        return _encode(self.p, shape.d) * shape.dim + _encode(self.q, shape.d)

    def neg(self, shape: SystemShape) -> "PhasePoint":
        return PhasePoint.of(shape, [-v for v in self.p], [-v for v in self.q])

    def add(self, other: "PhasePoint", shape: SystemShape) -> "PhasePoint":
        return PhasePoint.of(shape, np.add(self.p, other.p), np.add(self.q, other.q))

    def scale(self, c: int, shape: SystemShape) -> "PhasePoint":
        return PhasePoint.of(shape, [c * v for v in self.p], [c * v for v in self.q])


def _encode(vec, d: int) -> int:
    idx = 0
    for v in vec:
        idx = idx * d + int(v) % d
    return idx


class _Tables:
    """Per-(d, n) index and phase tables, shared read-only."""

    def __init__(self, d: int, n: int):
        self.d, self.n = d, n
        D = d ** n
        self.dim = D
        self.digits = np.array(
            [[(k // d ** (n - 1 - i)) % d for i in range(n)] for k in range(D)], dtype=np.int64
        ).reshape(D, n)
        weights = d ** np.arange(n - 1, -1, -1, dtype=np.int64)
        self.weights = weights
        # register-level arithmetic maps
        self.reg_neg = ((-self.digits) % d) @ weights
        self.reg_add = ((self.digits[:, None, :] + self.digits[None, :, :]) % d) @ weights
        self.reg_sub = ((self.digits[:, None, :] - self.digits[None, :, :]) % d) @ weights
        # roots of unity: work modulo M so omega = r^ome and zeta = r^zet
        if d == 2:
            self.M, self.ome, self.zet = 4, 2, 1
        else:
            self.M, self.ome, self.zet = d, 1, (d + 1) // 2
        self.roots = np.exp(2j * np.pi * np.arange(self.M) / self.M)
        dots = self.digits @ self.digits.T  # plain integer dot products p.k
        self.dot_exp = (self.ome * dots) % self.M  # omega^{p.k}
        self.zeta_exp = (-self.zet * dots) % self.M  # zeta^{-p.q}
        self.char = self.roots[self.dot_exp]
        self.zeta_phase = self.roots[self.zeta_exp]
        # U[k, q] = rho[k - q, k]
        self.shift_rows = self.reg_sub  # reg_sub[k, q] = k - q

    @functools.lru_cache(maxsize=None)
    def reg_scale(self, c: int) -> np.ndarray:
        return ((c * self.digits) % self.d) @ self.weights


@functools.lru_cache(maxsize=None)
def _tables(d: int, n: int) -> _Tables:
    return _Tables(d, n)


def tables(shape: SystemShape) -> _Tables:
    return _tables(shape.d, shape.n)


def weyl(shape: SystemShape, x: PhasePoint) -> np.ndarray:
    """Weyl operator ``w(p, q) = (x)_i zeta^{-p_i q_i} Z^{p_i} X^{q_i}``.

    Column ``l`` carries ``zeta^{-p.q} omega^{p.(l+q)}`` on row ``l+q``.
    """
    tb = tables(shape)
    pi, qi = _encode(x.p, shape.d), _encode(x.q, shape.d)
    D = shape.dim
    cols = np.arange(D)
    rows = tb.reg_add[cols, qi]
    exps = (tb.dot_exp[pi, rows] + tb.zeta_exp[pi, qi]) % tb.M
    w = np.zeros((D, D), dtype=complex)
    w[rows, cols] = tb.roots[exps]
    return w


def symplectic_exponent(shape: SystemShape, x: PhasePoint, y: PhasePoint) -> int:
    """``p.q' - q.p' mod d`` for ``x=(p,q)``, ``y=(p',q')``."""
    return int((np.dot(x.p, y.q) - np.dot(x.q, y.p)) % shape.d)


def weyl_commutation_phase(shape: SystemShape, x: PhasePoint, y: PhasePoint) -> complex:
    """Scalar c with ``w(x) w(y) = c w(y) w(x)``; equals omega^{p.q' - q.p'}."""
    return complex(np.exp(2j * np.pi * symplectic_exponent(shape, x, y) / shape.d))


@dataclass(frozen=True, eq=False)
class CharacteristicFunction:
    """Weyl-basis coefficients ``Xi(x) = Tr[rho w(-x)]``, table ``[p_index, q_index]``."""

    values: np.ndarray
    shape: SystemShape

    def __post_init__(self):
        D = self.shape.dim
        if self.values.shape != (D, D):
            raise ValueError(f"table shape {self.values.shape} does not match {self.shape}")
        self.values.setflags(write=False)

    def at(self, x: PhasePoint) -> complex:
        return complex(self.values[_encode(x.p, self.shape.d), _encode(x.q, self.shape.d)])

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def scaled(self, c: int) -> np.ndarray:
        """Table of ``x -> Xi(c x)``."""
        sm = tables(self.shape).reg_scale(int(c) % self.shape.d)
        return self.values[np.ix_(sm, sm)]

    def parseval(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2).real / self.shape.dim)


def _as_array(op) -> np.ndarray:
    return np.asarray(getattr(op, "op", op))


def char_function(rho, shape: SystemShape | None = None) -> CharacteristicFunction:
    """Characteristic function of a state (or any operator, given ``shape``)."""
    if shape is None:
        shape = rho.shape
    A = _as_array(rho)
    tb = tables(shape)
    D = shape.dim
    k = np.arange(D)[:, None]
    # T[p, q] = Tr[A w(p, q)] = zeta^{-p.q} sum_k omega^{p.k} A[k - q, k]
    U = A[tb.shift_rows, np.broadcast_to(k, (D, D))]
    T = tb.zeta_phase * (tb.char @ U)
    neg = tb.reg_neg
    return CharacteristicFunction(T[np.ix_(neg, neg)], shape)


def inverse_char(xi: CharacteristicFunction | np.ndarray, shape: SystemShape | None = None) -> np.ndarray:
    """Operator ``(1/d^n) sum_x Xi(x) w(x)``."""
    if isinstance(xi, CharacteristicFunction):
        shape, vals = xi.shape, xi.values
    else:
        vals = np.asarray(xi)
    tb = tables(shape)
    D = shape.dim
    # A[k, k - q] = (1/D) sum_p Xi(p, q) zeta^{-p.q} omega^{p.k}
    W = tb.char @ (vals * tb.zeta_phase) / D
    A = np.zeros((D, D), dtype=complex)
    k = np.broadcast_to(np.arange(D)[:, None], (D, D))
    A[k, tb.shift_rows] = W
    return A


def weyl_coefficients(op: np.ndarray, shape: SystemShape) -> np.ndarray:
    """Coefficients ``a(x)`` with ``op = sum_x a(x) w(x)``."""
    return char_function(op, shape).values / shape.dim


def group_closed(shape: SystemShape, points: np.ndarray) -> bool:
    """Whether a set of flat point indices is closed under phase-space addition."""
    tb = tables(shape)
    D = shape.dim
    pts = np.asarray(points, dtype=np.int64)
    if pts.size == 0:
        return False
    members = np.zeros(D * D, dtype=bool)
    members[pts] = True
    if not members[0]:
        return False
    pi, qi = np.divmod(pts, D)
    sp = tb.reg_add[pi[:, None], pi[None, :]]
    sq = tb.reg_add[qi[:, None], qi[None, :]]
    return bool(members[sp * D + sq].all())


def point_digits(shape: SystemShape, flat: np.ndarray) -> np.ndarray:
    """``(len, 2n)`` array of (p, q) digits for flat indices."""
    tb = tables(shape)
    pi, qi = np.divmod(np.asarray(flat, dtype=np.int64), shape.dim)
    return np.concatenate([tb.digits[pi], tb.digits[qi]], axis=-1)


def symplectic_matrix(shape: SystemShape, flat_a: np.ndarray, flat_b: np.ndarray) -> np.ndarray:
    """Symplectic exponents between two lists of points, mod d."""
    n = shape.n
    a = point_digits(shape, flat_a)
    b = point_digits(shape, flat_b)
    return (a[:, :n] @ b[:, n:].T - a[:, n:] @ b[:, :n].T) % shape.d
