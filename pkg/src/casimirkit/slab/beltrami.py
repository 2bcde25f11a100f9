"""Plane Beltrami equilibria ``curl B = mu B`` with prescribed toroidal fluxes.

Here ``B = (0, B_y(x), B_z(x))`` and "flux" means the cross-sectional mean
``(1/2a) int B dx``, i.e. the harmonic part of the field.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.integrate
import scipy.linalg

from ..errors import DomainError, NoBranchError, ResonantMultiplierError
from .geometry import SlabGeometry
from .spectral import ZeroModeSpace, curl_eigensolve

RESONANCE_TOL = 1e-8


@dataclass(frozen=True)
class HarmonicField:
    """Uniform vacuum field ``(0, hy, hz)``; curl-free and divergence-free."""

    hy: float
    hz: float

    def fluxes(self, a, Ly, Lz):
        """Toroidal fluxes through the ``x-z`` and ``x-y`` cuts."""
        return 2 * a * Lz * self.hy, 2 * a * Ly * self.hz


@dataclass(frozen=True)
class BeltramiEquilibrium:
    """``B_y = A cos(mu x) + C sin(mu x)``, ``B_z = -A sin(mu x) + C cos(mu x)``."""

    mu: float
    a: float
    hy: float
    hz: float
    A: float
    C: float

    def By(self, x):
        x = np.asarray(x, dtype=float)
        return self.A * np.cos(self.mu * x) + self.C * np.sin(self.mu * x)

    def Bz(self, x):
        x = np.asarray(x, dtype=float)
        return -self.A * np.sin(self.mu * x) + self.C * np.cos(self.mu * x)

    def dBy(self, x):
        return self.mu * self.Bz(x)

    def dBz(self, x):
        return -self.mu * self.By(x)

    def B_par(self, x, ky, kz):
        """``k.B/|k|``."""
        k = np.hypot(ky, kz)
        return (ky * self.By(x) + kz * self.Bz(x)) / k

    def B_perp(self, x, ky, kz):
        k = np.hypot(ky, kz)
        return (-kz * self.By(x) + ky * self.Bz(x)) / k

    def dB_perp(self, x, ky, kz):
        k = np.hypot(ky, kz)
        return (-kz * self.dBy(x) + ky * self.dBz(x)) / k

    def fluxes(self, order: int = 64):
        """Mean field by Gauss-Legendre quadrature of the profile."""
        t, w = np.polynomial.legendre.leggauss(order)
        x = self.a * t
        return np.array([np.dot(w, self.By(x)), np.dot(w, self.Bz(x))]) / 2.0

    def energy(self):
        """``(1/2) int |B|^2 dx`` across the slab."""
        return self.a * (self.A ** 2 + self.C ** 2)

    def sample(self, x):
        return self.By(x), self.Bz(x)


def beltrami_solve(a: float, mu: float, hy: float, hz: float) -> BeltramiEquilibrium:
    """Closed-form Beltrami field with mean ``(hy, hz)``.

    Raises :class:`ResonantMultiplierError` when ``mu a`` is a nonzero
    multiple of ``pi`` (a ``k = 0`` curl eigenvalue), where the flux
    condition cannot be met.
    """
    if a <= 0:
        raise DomainError("a must be positive")
    s = mu * a
    if s == 0.0:
        return BeltramiEquilibrium(0.0, a, hy, hz, hy, hz)
    n = round(s / np.pi)
    if n != 0 and abs(np.sin(s)) < RESONANCE_TOL:
        raise ResonantMultiplierError(mu, n * np.pi / a)
    factor = s / np.sin(s)
    return BeltramiEquilibrium(mu, a, hy, hz, factor * hy, factor * hz)


def shooting_solve(a: float, mu: float, hy: float, hz: float, rtol: float = 1e-13,
                   atol: float = 1e-15):
    """Independent solution by integrating ``B' = mu (B_z, -B_y)`` across the slab.

    The ODE is linear, so two unit shots with running flux integrals give the
    2x2 map from wall values to fluxes.  Returns a callable ``x -> (B_y, B_z)``.
    """

    def rhs(x, y):
        return [mu * y[1], -mu * y[0], y[0], y[1]]

    sols = []
    end = np.empty((2, 2))
    for i, y0 in enumerate(([1.0, 0.0], [0.0, 1.0])):
        sol = scipy.integrate.solve_ivp(rhs, (-a, a), y0 + [0.0, 0.0], method="DOP853",
                                        rtol=rtol, atol=atol, dense_output=True)
        if not sol.success:
            raise DomainError(f"shooting integration failed: {sol.message}")
        sols.append(sol)
        end[:, i] = sol.y[2:, -1] / (2 * a)
    try:
        c = np.linalg.solve(end, [hy, hz])
    except np.linalg.LinAlgError as exc:
        raise ResonantMultiplierError(mu, mu) from exc

    def profile(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = c[0] * sols[0].sol(x) + c[1] * sols[1].sol(x)
        return y[0], y[1]

    return profile


def fd_weights(offsets, deriv: int = 1):
    """Finite-difference weights on the given integer offsets (unit spacing)."""
    offsets = np.asarray(offsets, dtype=float)
    n = offsets.size
    V = np.vander(offsets, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[deriv] = float(np.prod(np.arange(1, deriv + 1)))
    return np.linalg.solve(V, rhs)


def derivative6(values, h):
    """Sixth-order first derivative on a uniform grid, one-sided near the ends."""
    values = np.asarray(values, dtype=float)
    n = values.size
    if n < 7:
        raise DomainError("need at least 7 samples")
    out = np.empty(n)
    for i in range(n):
        lo = min(max(i - 3, 0), n - 7)
        offs = np.arange(lo, lo + 7) - i
        out[i] = fd_weights(offs) @ values[lo:lo + 7] / h
    return out


def curl_residual(eq: BeltramiEquilibrium, x):
    """``max |curl B - mu B|`` on the samples, curl by a sixth-order difference."""
    x = np.asarray(x, dtype=float)
    h = x[1] - x[0]
    By, Bz = eq.By(x), eq.Bz(x)
    ry = -derivative6(Bz, h) - eq.mu * By
    rz = derivative6(By, h) - eq.mu * Bz
    return float(np.max(np.hypot(ry, rz)))


@dataclass(frozen=True)
class HodgeParts:
    harmonic: np.ndarray  # mean (B_y, B_z)
    By_sigma: np.ndarray
    Bz_sigma: np.ndarray


def hodge_decompose(By, Bz, weights):
    """Split a ``k = 0`` field into its mean and a flux-free remainder."""
    By = np.asarray(By, dtype=float)
    Bz = np.asarray(Bz, dtype=float)
    w = np.asarray(weights, dtype=float)
    total = w.sum()
    hy, hz = np.dot(w, By) / total, np.dot(w, Bz) / total
    return HodgeParts(np.array([hy, hz]), By - hy, Bz - hz)


def vector_potential(x, By, Bz):
    """``A = (0, int B_z, -int B_y)`` from the left wall (trapezoid rule)."""
    Ay = scipy.integrate.cumulative_trapezoid(Bz, x, initial=0.0)
    Az = -scipy.integrate.cumulative_trapezoid(By, x, initial=0.0)
    return Ay, Az


def helicity(x, By, Bz):
    """``C_1 = (1/2) int A.B dx`` with the wall-anchored gauge ``A(-a) = 0``."""
    Ay, Az = vector_potential(x, By, Bz)
    return 0.5 * float(scipy.integrate.trapezoid(Ay * By + Az * Bz, x))


def cross_helicity(x, V, B):
    """``int V.B dx`` for sampled component tuples."""
    dot = sum(np.asarray(v) * np.asarray(b) for v, b in zip(V, B))
    return float(scipy.integrate.trapezoid(dot, x))


def field_energy(x, By, Bz):
    return 0.5 * float(scipy.integrate.trapezoid(np.asarray(By) ** 2 + np.asarray(Bz) ** 2, x))


@dataclass(frozen=True)
class BifurcationDirection:
    """Unit eigenfield of a degenerate ``k = 0`` eigenvalue orthogonal to ``A_H``.

    ``coefficients = (P, Q)`` describe the profile
    ``(P cos(lam x) + Q sin(lam x), -P sin(lam x) + Q cos(lam x))``.
    When ``degenerate`` is set (zero fluxes) every member of the eigenspace
    qualifies and ``basis`` holds all of it.
    """

    eigenvalue: float
    grid_eigenvalue: float
    vector: np.ndarray | None
    coefficients: np.ndarray | None
    basis: np.ndarray
    degenerate: bool
    space: ZeroModeSpace = field(repr=False)

    def profile(self, x):
        P, Q = self.coefficients
        lam = self.eigenvalue
        return (P * np.cos(lam * x) + Q * np.sin(lam * x),
                -P * np.sin(lam * x) + Q * np.cos(lam * x))


def _fit_coefficients(space, vec, lam):
    """Least-squares ``(P, Q)`` of a staggered eigenvector in the cos/sin form."""
    xy, xz = space.x_y, space.x_z
    rows = np.concatenate([np.column_stack([np.cos(lam * xy), np.sin(lam * xy)]),
                           np.column_stack([-np.sin(lam * xz), np.cos(lam * xz)])])
    coef, *_ = np.linalg.lstsq(rows, vec, rcond=None)
    return coef


def bifurcation_direction(geometry: SlabGeometry, j: int, hy: float, hz: float,
                          flux_tol: float = 1e-14) -> BifurcationDirection:
    """Direction ``omega_hat`` in the ``j``-th positive ``k = 0`` eigenspace.

    ``j`` counts positive eigenvalues from 1.  The eigenspace is two
    dimensional; the returned unit vector satisfies ``<A_H, omega_hat> = 0``
    with ``A_H = (0, hz x, -hy x)``.
    """
    if j < 1:
        raise DomainError("j counts from 1")
    sp = curl_eigensolve(geometry, 0.0, 0.0, 4 * j, extrapolate=True)
    pos = np.flatnonzero(sp.eigenvalues > 0)
    pick = pos[2 * (j - 1): 2 * j]
    lam_grid = float(np.mean(sp.eigenvalues[pick]))
    lam = float(np.mean(sp.extrapolated[pick]))
    lam_exact = j * np.pi / geometry.a
    if abs(lam - lam_exact) < 1e-6 * lam_exact:
        lam = lam_exact
    basis = sp.vectors[:, pick]
    space = sp.space
    if np.hypot(hy, hz) <= flux_tol:
        return BifurcationDirection(lam, lam_grid, None, None, basis, True, space)
    A_H = space.sample(lambda x: hz * x, lambda x: -hy * x)
    A_H[space.M] = 0.0  # x jumps across the periodic seam; use the average of -a and a
    o = np.array([space.inner(basis[:, i], A_H).real for i in range(2)])
    v = o[1] * basis[:, 0] - o[0] * basis[:, 1]
    v /= space.norm(v)
    ref = space.sample(lambda x: hz * np.cos(lam * x) - hy * np.sin(lam * x),
                       lambda x: -hz * np.sin(lam * x) - hy * np.cos(lam * x))
    if space.inner(v, ref).real < 0:
        v = -v
    coef = _fit_coefficients(space, v, lam)
    return BifurcationDirection(lam, lam_grid, v, coef, basis, False, space)


@dataclass(frozen=True)
class BifurcatedBranch:
    """``B = B_H + G + alpha omega_hat`` at the bifurcation eigenvalue."""

    direction: BifurcationDirection
    fluxes: np.ndarray
    particular: np.ndarray  # G on the staggered grid
    alpha: float

    @property
    def mu(self):
        return self.direction.eigenvalue

    def sample(self, x):
        x = np.asarray(x, dtype=float)
        sp = self.direction.space
        M = sp.M
        Gy = np.interp(x, sp.x_y, self.particular[:M])
        Gz = np.interp(x, sp.x_z, self.particular[M:])
        wy, wz = self.direction.profile(x)
        return (self.fluxes[0] + Gy + self.alpha * wy,
                self.fluxes[1] + Gz + self.alpha * wz)

    def with_alpha(self, alpha):
        return BifurcatedBranch(self.direction, self.fluxes, self.particular, float(alpha))


def bifurcated_branch(geometry: SlabGeometry, j: int, hy: float, hz: float,
                      alpha: float = 0.0, consistency_tol: float = 1e-8) -> BifurcatedBranch:
    """Non-Taylor branch of ``curl B = lambda_j B`` with fluxes ``(hy, hz)``.

    Solves ``P(curl - lambda_j) G = lambda_j P B_H`` on the flux-free
    complement of the eigenspace; the solvability condition is that the
    forcing has no component along the eigenspace.
    """
    d = bifurcation_direction(geometry, j, hy, hz)
    space = d.space
    M = space.M
    h = geometry.h
    lam = d.grid_eigenvalue
    B_H = np.concatenate([np.full(M, hy), np.full(M, hz)])
    # orthonormal basis of constants + eigenspace, then its complement
    const = np.zeros((2 * M, 2))
    const[:M, 0] = const[M:, 1] = 1.0 / np.sqrt(h * M)
    excl = np.column_stack([const, d.basis])
    forcing = lam * B_H
    forcing = forcing - excl[:, :2] @ (h * excl[:, :2].T @ forcing)  # flux-free projection
    along = h * d.basis.T @ forcing
    scale = max(1.0, float(np.sqrt(h) * np.linalg.norm(forcing)), abs(lam) * np.hypot(hy, hz))
    if np.linalg.norm(along) > consistency_tol * scale:
        raise NoBranchError(f"forcing has component {np.linalg.norm(along):.3e} along the eigenspace")
    Q, _ = np.linalg.qr(np.sqrt(h) * excl)
    full, _ = np.linalg.qr(np.column_stack([Q, np.eye(2 * M)]))
    comp = full[:, excl.shape[1]:] / np.sqrt(h)
    S = space.curl
    A = h * comp.T @ ((S - lam * np.eye(2 * M)) @ comp)
    rhs = h * comp.T @ forcing
    if np.linalg.norm(rhs) == 0.0:
        G = np.zeros(2 * M)
    else:
        G = comp @ scipy.linalg.solve(A, rhs, assume_a="sym")
    return BifurcatedBranch(d, np.array([hy, hz], dtype=float), G, float(alpha))


@dataclass(frozen=True)
class EnergyComparison:
    mu: float
    helicity: float
    taylor_energy: float
    branch_energy: float
    alpha: float


def matched_helicity_comparison(branch: BifurcatedBranch, mu: float, samples: int = 4001,
                                alpha_sign: float = 1.0) -> EnergyComparison:
    """Energies of the Taylor state at ``mu`` and of the branch at equal helicity.

    Both fields carry the same fluxes.  Helicity along the branch is
    quadratic in ``alpha``; its three coefficients come from evaluations at
    ``alpha = -1, 0, 1`` and the root with sign ``alpha_sign`` is used.
    """
    a = branch.direction.space.geometry.a
    x = np.linspace(-a, a, samples)
    hy, hz = branch.fluxes
    taylor = beltrami_solve(a, mu, hy, hz)
    C_T = helicity(x, *taylor.sample(x))
    c = [helicity(x, *branch.with_alpha(s).sample(x)) for s in (-1.0, 0.0, 1.0)]
    q2 = 0.5 * (c[0] + c[2]) - c[1]
    q1 = 0.5 * (c[2] - c[0])
    q0 = c[1] - C_T
    disc = q1 * q1 - 4 * q2 * q0
    if q2 == 0 or disc < 0:
        raise NoBranchError(f"branch helicity cannot reach {C_T:.6g}")
    roots = [(-q1 + s * np.sqrt(disc)) / (2 * q2) for s in (1.0, -1.0)]
    alpha = max(roots, key=lambda r: alpha_sign * r)
    E_B = field_energy(x, *branch.with_alpha(alpha).sample(x))
    E_T = field_energy(x, *taylor.sample(x))
    return EnergyComparison(float(mu), float(C_T), float(E_T), float(E_B), float(alpha))
