"""Canonization of constant Poisson matrices by phase-space extension.

``darboux_reduce`` brings a constant antisymmetric matrix to the standard form
``J_c(2m) + 0_nu``; ``extend_minimal`` appends one angle per Casimir so the
result is a regular canonical matrix, and ``unfreeze`` couples those angles
back into the Hamiltonian so the Casimirs start to move.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .errors import DomainError
from .poisson import (
    PoissonOperator,
    PoissonSystem,
    ScalarObservable,
    canonical_matrix,
    jacobi_residual,
)

ZERO_THRESHOLD = 1e-12


@dataclass(frozen=True)
class DarbouxTransform:
    """Congruence ``T J T^T = J_std`` with ``J_std = [[0, I_m], [-I_m, 0]] + 0_nu``.

    Rows of ``T`` define the new coordinates ``z' = T z``; the trailing
    ``nullity`` rows are linear Casimirs of ``J``.
    """

    T: np.ndarray
    J_std: np.ndarray
    rank: int
    nullity: int
    source: np.ndarray

    @property
    def casimir_rows(self):
        return self.T[self.rank:]

    def congruence_defect(self):
        return float(np.max(np.abs(self.T @ self.source @ self.T.T - self.J_std)))


def darboux_reduce(J, rel_tol: float = 1e-10) -> DarbouxTransform:
    """Real normal form of a constant antisymmetric matrix.

    Uses the real Schur form (block diagonal for normal matrices), rescales
    each ``[[0, s], [-s, 0]]`` block to unit size and orders coordinates as
    ``(q_1..q_m, p_1..p_m, c_1..c_nu)``.
    """
    J = np.asarray(J, dtype=float)
    n = J.shape[0]
    if J.shape != (n, n):
        raise DomainError("J must be square")
    scale = float(np.max(np.abs(J))) if J.size else 0.0
    if np.max(np.abs(J + J.T), initial=0.0) > 1e-12 * max(scale, 1.0):
        raise DomainError("J is not antisymmetric")
    if scale == 0.0:
        return DarbouxTransform(np.eye(n), np.zeros((n, n)), 0, n, J)

    U, Q = scipy.linalg.schur(J, output="real")
    cut = rel_tol * scale
    qs, ps, ks = [], [], []
    i = 0
    while i < n:
        if i + 1 < n and abs(U[i + 1, i]) > cut:
            s = U[i, i + 1]
            r = 1.0 / np.sqrt(abs(s))
            qs.append(Q[:, i] * r)
            ps.append(Q[:, i + 1] * r * np.sign(s))
            i += 2
        else:
            ks.append(Q[:, i])
            i += 1
    rows = qs + ps + ks
    T = np.array(rows)
    m = len(qs)
    J_std = np.zeros((n, n))
    J_std[: 2 * m, : 2 * m] = canonical_matrix(m)
    return DarbouxTransform(T, J_std, 2 * m, n - 2 * m, J)


@dataclass(frozen=True)
class ExtendedSystem:
    """Minimal canonical extension of a Darboux-reduced constant system.

    Coordinates are ``(zeta_1..zeta_{n-nu}, C_1..C_nu, theta_1..theta_nu)``; the
    matrix couples each Casimir ``C_i`` with its angle ``theta_i`` through the
    block ``[[0, -I], [I, 0]]`` and never depends on the angles.
    """

    darboux: DarbouxTransform
    J_ex: np.ndarray
    labels: tuple[str, ...]

    @property
    def base_dimension(self):
        return self.darboux.T.shape[0]

    @property
    def nullity(self):
        return self.darboux.nullity

    @property
    def dimension(self):
        return self.base_dimension + self.nullity

    def lift(self, z, theta=None):
        """Map a base state to extended coordinates (angles default to 0)."""
        zp = self.darboux.T @ np.asarray(z, dtype=float)
        th = np.zeros(self.nullity) if theta is None else np.asarray(theta, dtype=float)
        return np.concatenate([zp, th])

    def project(self, z_ex):
        """Base state ``T^-1 (zeta, C)`` of an extended state."""
        return np.linalg.solve(self.darboux.T, np.asarray(z_ex)[: self.base_dimension])

    def casimir_values(self, z_ex):
        n = self.base_dimension
        return np.asarray(z_ex)[n - self.nullity: n]

    def angles(self, z_ex):
        return np.asarray(z_ex)[self.base_dimension:]


def extend_minimal(d: DarbouxTransform) -> ExtendedSystem:
    n, nu, r = d.T.shape[0], d.nullity, d.rank
    m = r // 2
    N = n + nu
    J_ex = np.zeros((N, N))
    J_ex[:r, :r] = canonical_matrix(m)
    I = np.eye(nu)
    J_ex[r:n, n:] = -I
    J_ex[n:, r:n] = I
    labels = tuple(
        [f"zeta{i + 1}" for i in range(r)]
        + [f"C{i + 1}" for i in range(nu)]
        + [f"theta{i + 1}" for i in range(nu)]
    )
    return ExtendedSystem(d, J_ex, labels)


@dataclass(frozen=True)
class DoubledOperator:
    operator: PoissonOperator
    worst_jacobi_residual: float
    probes: tuple


def extend_double(J: PoissonOperator, L: Callable[[np.ndarray], np.ndarray],
                  probes: Sequence, cond_max: float = 1e12) -> DoubledOperator:
    """Doubled operator ``[[J(z), L(chi)], [-L(chi)^T, 0]]`` on ``(z, chi)``.

    Whether ``L`` satisfies the Maurer-Cartan condition is checked only
    numerically, as the worst Jacobi residual over the probes.
    """
    n = J.dimension

    def evaluator(w):
        z, chi = w[:n], w[n:]
        Lm = np.asarray(L(chi), dtype=float)
        out = np.zeros((2 * n, 2 * n))
        out[:n, :n] = J(z)
        out[:n, n:] = Lm
        out[n:, :n] = -Lm.T
        return out

    probes = tuple(np.asarray(p, dtype=float) for p in probes)
    for p in probes:
        if np.linalg.cond(np.asarray(L(p[n:]), dtype=float)) > cond_max:
            raise DomainError(f"L(chi) is singular at probe chi={p[n:]}")
    Lconst = False
    if J.constant and probes:
        # constant L is detected by comparing evaluations across the probes
        L0 = np.asarray(L(probes[0][n:]), dtype=float)
        Lconst = all(np.array_equal(L0, np.asarray(L(p[n:]), dtype=float)) for p in probes)
    op = PoissonOperator(evaluator, 2 * n, constant=Lconst)
    worst = max((jacobi_residual(op, p) for p in probes), default=0.0)
    return DoubledOperator(op, worst, probes)


def unfreeze(ext: ExtendedSystem, H_base: ScalarObservable, D: Sequence[float]) -> PoissonSystem:
    """Extended system with Hamiltonian ``H_base + sum_i D_i theta_i^2 / 2``.

    ``H_base`` is a function of the base state ``z``; it is pulled back to the
    Darboux coordinates, so the angles enter only through the coupling.  With
    ``J_ex`` this gives ``dC_i/dt = -D_i theta_i`` and
    ``dtheta_i/dt = dH_base/dC_i``.
    """
    D = np.atleast_1d(np.asarray(D, dtype=float))
    if D.shape != (ext.nullity,):
        raise DomainError(f"need {ext.nullity} couplings, got {D.shape}")
    if not np.all(np.isfinite(D)):
        raise DomainError("couplings must be finite")
    n = ext.base_dimension
    T = ext.darboux.T
    Tinv = np.linalg.inv(T)

    def value(w):
        z = Tinv @ w[:n]
        th = w[n:]
        return H_base(z) + 0.5 * float(np.sum(D * th * th))

    def grad(w):
        z = Tinv @ w[:n]
        return np.concatenate([Tinv.T @ H_base.gradient(z), D * w[n:]])

    J = PoissonOperator.from_matrix(ext.J_ex)
    casimirs = {f"C{i + 1}": ScalarObservable.coordinate(n - ext.nullity + i, f"C{i + 1}")
                for i in range(ext.nullity)}
    H = ScalarObservable(value, grad, "H_ext")
    return PoissonSystem(J, H, casimirs, ext.labels)
