"""Entropies and divergences in nats."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .states import CLAMP_TOL, InvalidState

SUPPORT_TOL = 1e-10


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray  # descending, clamped >= 0
    dim: int

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[0])


def spectrum(rho) -> Spectrum:
    op = getattr(rho, "op", rho)
    ev = np.linalg.eigvalsh(op)[::-1]
    if ev[-1] < -CLAMP_TOL:
        raise InvalidState("positivity", float(-ev[-1]))
    return Spectrum(np.clip(ev, 0.0, None), len(ev))


def _shannon(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def von_neumann(rho) -> float:
    """``-Tr rho log rho`` with ``0 log 0 = 0``."""
    return max(_shannon(spectrum(rho).eigenvalues), 0.0)


def renyi(rho, alpha: float) -> float:
    """Renyi entropy of order ``alpha`` in ``[0, inf]``."""
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    ev = spectrum(rho).eigenvalues
    if alpha == 1:
        return max(_shannon(ev), 0.0)
    if math.isinf(alpha):
        return -math.log(ev[0])
    if alpha == 0:
        return math.log(np.count_nonzero(ev > SUPPORT_TOL))
    ev = ev[ev > 0]
    return float(np.log(np.sum(ev ** alpha)) / (1 - alpha))


def _support_violation(rho_op, sig_w, sig_V) -> bool:
    ker = sig_V[:, sig_w <= SUPPORT_TOL]
    if ker.shape[1] == 0:
        return False
    leak = ker.conj().T @ rho_op @ ker
    return float(np.abs(np.trace(leak))) > SUPPORT_TOL


def relative_entropy(rho, sigma) -> float:
    """``Tr rho (log rho - log sigma)``; ``inf`` when supp rho is not inside supp sigma."""
    r, s = rho.op, sigma.op
    sw, sV = np.linalg.eigh(s)
    if _support_violation(r, sw, sV):
        return math.inf
    on = sw > SUPPORT_TOL
    Vs = sV[:, on]
    log_s = (Vs * np.log(sw[on])) @ Vs.conj().T
    cross = float(np.real(np.vdot(r, log_s)))  # Tr[rho log sigma] (both Hermitian)
    return max(-von_neumann(rho) - cross, 0.0)


def _frac_power(w, V, gamma):
    on = w > SUPPORT_TOL
    Vs = V[:, on]
    return (Vs * w[on] ** gamma) @ Vs.conj().T


def renyi_relative(rho, sigma, alpha: float) -> float:
    """Sandwiched Renyi divergence ``(alpha - 1)^{-1} log Tr (s^g rho s^g)^alpha``, ``g = (1 - alpha)/(2 alpha)``."""
    if alpha == 1:
        return relative_entropy(rho, sigma)
    if math.isinf(alpha):
        return max_relative(rho, sigma)
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    sw, sV = np.linalg.eigh(sigma.op)
    if alpha > 1 and _support_violation(rho.op, sw, sV):
        return math.inf
    P = _frac_power(sw, sV, (1 - alpha) / (2 * alpha))
    M = P @ rho.op @ P
    ev = np.clip(np.linalg.eigvalsh((M + M.conj().T) / 2), 0.0, None)
    return float(np.log(np.sum(ev ** alpha)) / (alpha - 1))


def max_relative(rho, sigma) -> float:
    """``log min{lam : rho <= lam sigma}`` via the top eigenvalue of ``sigma^{-1/2} rho sigma^{-1/2}``."""
    sw, sV = np.linalg.eigh(sigma.op)
    if _support_violation(rho.op, sw, sV):
        return math.inf
    P = _frac_power(sw, sV, -0.5)
    M = P @ rho.op @ P
    return float(np.log(np.linalg.eigvalsh((M + M.conj().T) / 2)[-1]))


def trace_distance(rho, sigma) -> float:
    """``||rho - sigma||_1`` (no factor 1/2)."""
    if getattr(rho, "shape", None) != getattr(sigma, "shape", None):
        raise ValueError("shape mismatch")
    diff = rho.op - sigma.op
    return float(np.abs(np.linalg.eigvalsh((diff + diff.conj().T) / 2)).sum())
