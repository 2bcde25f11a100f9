"""Finite-dimensional noncanonical Hamiltonian systems.

A system is a state-dependent antisymmetric operator ``J(z)`` together with a
Hamiltonian; Casimirs are observables whose gradients lie in the kernel of
``J``.  Everything here is pure: systems and observables are immutable and
can be shared between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import DegenerateEquilibrium, EvaluationError, NonConvergenceError
from .integrate import Trajectory, drift, integrate

__all__ = [
    "ScalarObservable",
    "PoissonOperator",
    "PoissonSystem",
    "KernelBasis",
    "EquilibriumReport",
    "canonical_matrix",
    "canonical_operator",
    "so3_operator",
    "bracket",
    "jacobi_residual",
    "kernel_basis",
    "verify_casimir",
    "rhs",
    "energy_casimir_shift",
    "evolve",
    "casimir_drift",
    "find_equilibrium",
]


def fd_steps(z):
    return np.maximum(1e-6, 1e-6 * np.abs(z))


def fd_gradient(fn, z):
    """Central-difference gradient with step ``max(1e-6, 1e-6|z_i|)``."""
    z = np.asarray(z, dtype=float)
    h = fd_steps(z)
    g = np.empty_like(z)
    for i in range(z.size):
        zp = z.copy()
        zm = z.copy()
        zp[i] += h[i]
        zm[i] -= h[i]
        g[i] = (fn(zp) - fn(zm)) / (2.0 * h[i])
    return g


@dataclass(frozen=True)
class ScalarObservable:
    """A real function on phase space with an optional analytic gradient."""

    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = ""

    def __call__(self, z):
        return float(self.value(np.asarray(z, dtype=float)))

    def gradient(self, z):
        z = np.asarray(z, dtype=float)
        g = np.asarray(self.grad(z), dtype=float) if self.grad is not None else fd_gradient(self.value, z)
        if not np.all(np.isfinite(g)):
            raise EvaluationError(f"non-finite gradient of {self.name or 'observable'} at {z}")
        return g

    @classmethod
    def coordinate(cls, i, name=""):
        def value(z):
            return z[i]

        def grad(z):
            e = np.zeros_like(z)
            e[i] = 1.0
            return e

        return cls(value, grad, name or f"z{i}")

    @classmethod
    def quadratic(cls, Q, name=""):
        """Observable ``z.Q.z / 2`` for a symmetric matrix ``Q``."""
        Q = np.asarray(Q, dtype=float)
        return cls(lambda z: 0.5 * z @ Q @ z, lambda z: Q @ z, name)


@dataclass(frozen=True)
class PoissonOperator:
    """Antisymmetric operator ``z -> J(z)``; ``constant`` skips re-evaluation."""

    evaluator: Callable[[np.ndarray], np.ndarray]
    dimension: int
    constant: bool = False

    @classmethod
    def from_matrix(cls, J):
        J = np.array(J, dtype=float)
        J.setflags(write=False)
        return cls(lambda z: J, J.shape[0], constant=True)

    def __call__(self, z):
        J = np.asarray(self.evaluator(np.asarray(z, dtype=float)), dtype=float)
        if J.shape != (self.dimension, self.dimension):
            raise EvaluationError(f"J has shape {J.shape}, expected {(self.dimension,) * 2}")
        if not np.all(np.isfinite(J)):
            raise EvaluationError("non-finite Poisson operator")
        return J

    def antisymmetry_defect(self, z):
        J = self(z)
        scale = max(np.max(np.abs(J)), 1e-300)
        return float(np.max(np.abs(J + J.T)) / scale)


@dataclass(frozen=True)
class PoissonSystem:
    J: PoissonOperator
    H: ScalarObservable
    casimirs: Mapping[str, ScalarObservable] = field(default_factory=dict)
    labels: tuple[str, ...] = ()

    @property
    def dimension(self):
        return self.J.dimension


@dataclass(frozen=True)
class KernelBasis:
    vectors: np.ndarray  # shape (n, nullity), orthonormal columns
    rank: int
    nullity: int
    tol: float
    singular_values: np.ndarray


@dataclass(frozen=True)
class EquilibriumReport:
    point: np.ndarray
    gradient_norm: float
    iterations: int
    hessian_eigenvalues: np.ndarray
    n_positive: int
    n_negative: int


def canonical_matrix(m):
    """The ``2m x 2m`` matrix ``[[0, I], [-I, 0]]``."""
    I = np.eye(m)
    Z = np.zeros((m, m))
    return np.block([[Z, I], [-I, Z]])


def canonical_operator(m):
    return PoissonOperator.from_matrix(canonical_matrix(m))


def so3_operator(w: Callable[[np.ndarray], np.ndarray]):
    """Operator ``J_ij = eps_ijk w_k(z)`` on R^3.

    With ``w = z`` this is the rigid-body bracket; for general ``w`` the Jacobi
    identity holds only where ``w . curl w = 0``.
    """

    def evaluator(z):
        a, b, c = w(z)
        return np.array([[0.0, c, -b], [-c, 0.0, a], [b, -a, 0.0]])

    return PoissonOperator(evaluator, 3)


def bracket(F: ScalarObservable, G: ScalarObservable, z, sys_or_J) -> float:
    """Poisson bracket ``dF . J(z) . dG``."""
    J = sys_or_J.J if isinstance(sys_or_J, PoissonSystem) else sys_or_J
    z = np.asarray(z, dtype=float)
    return float(F.gradient(z) @ J(z) @ G.gradient(z))


def jacobi_residual(J: PoissonOperator, z) -> float:
    """Largest cyclic Jacobi sum ``J_il d_l J_jk + J_jl d_l J_ki + J_kl d_l J_ij``.

    Derivatives of the entries are central differences; constant operators
    return exactly zero.
    """
    z = np.asarray(z, dtype=float)
    n = J.dimension
    if J.constant:
        return 0.0
    h = fd_steps(z)
    dJ = np.empty((n, n, n))  # dJ[l, j, k] = d_l J_jk
    for l in range(n):
        zp = z.copy()
        zm = z.copy()
        zp[l] += h[l]
        zm[l] -= h[l]
        dJ[l] = (J(zp) - J(zm)) / (2.0 * h[l])
    J0 = J(z)
    # T[i, j, k] = sum_l J_il d_l J_jk
    T = np.einsum("il,ljk->ijk", J0, dJ)
    cyc = T + np.transpose(T, (1, 2, 0)) + np.transpose(T, (2, 0, 1))
    return float(np.max(np.abs(cyc)))


def kernel_basis(J: PoissonOperator, z, tol: float = 1e-9) -> KernelBasis:
    """Orthonormal basis of ``Ker J(z)`` from the SVD, cut at ``tol * sigma_max``."""
    if not 0.0 < tol < 1.0:
        raise ValueError("tol must lie in (0, 1)")
    M = J(np.asarray(z, dtype=float))
    try:
        _, s, Vt = np.linalg.svd(M)
    except np.linalg.LinAlgError as exc:
        raise EvaluationError(f"SVD failed: {exc}") from exc
    smax = s[0] if s.size else 0.0
    small = s <= tol * smax if smax > 0 else np.ones_like(s, dtype=bool)
    rank = int(np.count_nonzero(~small))
    vecs = Vt[rank:].T.copy()
    return KernelBasis(vecs, rank, M.shape[0] - rank, tol, s)


def verify_casimir(J: PoissonOperator, C: ScalarObservable, probes) -> float:
    """``max_z |J(z) dC(z)|`` over the probes; zero certifies a Casimir."""
    probes = list(probes)
    if not probes:
        raise ValueError("need at least one probe")
    return max(float(np.linalg.norm(J(p) @ C.gradient(p))) for p in probes)


def rhs(system: PoissonSystem, z) -> np.ndarray:
    """Hamiltonian vector field ``J(z) dH(z)``."""
    z = np.asarray(z, dtype=float)
    return system.J(z) @ system.H.gradient(z)


def energy_casimir_shift(H: ScalarObservable, C: ScalarObservable, mu: float) -> ScalarObservable:
    """Energy-Casimir function ``H - mu C``."""

    def grad(z):
        return H.gradient(z) - mu * C.gradient(z)

    return ScalarObservable(lambda z: H(z) - mu * C(z), grad, f"{H.name}-{mu:g}*{C.name}")


def evolve(system: PoissonSystem, z0, t_end: float, dt: float,
           monitors: Mapping[str, ScalarObservable] | None = None) -> Trajectory:
    """RK4 integration of ``z' = J(z) dH(z)``.

    ``monitors`` defaults to the Hamiltonian (as ``"energy"``) plus every
    registered Casimir.
    """
    if monitors is None:
        monitors = {"energy": system.H, **system.casimirs}
    if system.J.constant:
        J0 = system.J(np.asarray(z0, dtype=float))
        field_ = lambda t, z: J0 @ system.H.gradient(z)  # noqa: E731
    else:
        field_ = lambda t, z: rhs(system, z)  # noqa: E731
    return integrate(field_, np.asarray(z0, dtype=float), t_end, dt,
                     {k: (lambda z, o=o: o(z)) for k, o in monitors.items()})


def casimir_drift(traj: Trajectory, name: str) -> float:
    return drift(traj, name)


def fd_hessian(H: ScalarObservable, z):
    z = np.asarray(z, dtype=float)
    h = fd_steps(z)
    n = z.size
    Hm = np.empty((n, n))
    for i in range(n):
        zp = z.copy()
        zm = z.copy()
        zp[i] += h[i]
        zm[i] -= h[i]
        Hm[:, i] = (H.gradient(zp) - H.gradient(zm)) / (2.0 * h[i])
    return 0.5 * (Hm + Hm.T)


def find_equilibrium(H_eff: ScalarObservable, z_guess, tol: float = 1e-10,
                     max_iter: int = 50, singular_tol: float = 1e-9) -> EquilibriumReport:
    """Newton iteration with backtracking on ``|dH|`` for a critical point.

    A singular Hessian raises :class:`DegenerateEquilibrium` rather than
    stepping with a pseudo-inverse.
    """
    z = np.atleast_1d(np.array(z_guess, dtype=float))
    g = H_eff.gradient(z)
    for it in range(max_iter + 1):
        gnorm = float(np.linalg.norm(g))
        Hm = fd_hessian(H_eff, z)
        eig = np.linalg.eigvalsh(Hm)
        scale = max(1.0, float(np.max(np.abs(eig))))
        if gnorm < tol:
            if np.min(np.abs(eig)) <= singular_tol * scale:
                raise DegenerateEquilibrium("critical point with singular Hessian", z, eig)
            return EquilibriumReport(z, gnorm, it, eig,
                                     int(np.sum(eig > 0)), int(np.sum(eig < 0)))
        if it == max_iter:
            break
        if np.min(np.abs(eig)) <= singular_tol * scale:
            raise DegenerateEquilibrium("singular Hessian during Newton iteration", z, eig)
        step = -np.linalg.solve(Hm, g)
        t = 1.0
        while True:
            z_try = z + t * step
            g_try = H_eff.gradient(z_try)
            if np.linalg.norm(g_try) < gnorm or t < 1e-8:
                break
            t *= 0.5
        z, g = z_try, g_try
    raise NonConvergenceError(f"Newton did not converge in {max_iter} iterations (|dH|={gnorm:.3e})")
