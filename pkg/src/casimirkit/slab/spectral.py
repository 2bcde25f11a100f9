"""Discrete curl operators per Fourier mode and their spectra.

For ``k = (k_y, k_z) != 0`` a solenoidal field with ``u_x(+-a) = 0`` is fixed
by two profiles: ``f = u_x`` and ``g = u_perp`` (the component along
``e = (-k_z, k_y)/|k|``); the component along ``k`` follows from the
divergence, ``u_par = i f'/|k|``.  ``f`` and ``g`` sit at cell centres and
``u_par`` at nodes, with ghost cells enforcing ``u_x = 0`` on the walls.  In
these coordinates curl is

    (f, g) -> (i|k| g, -(i/|k|)(k^2 - d^2/dx^2) f)

and is exactly self-adjoint for the discrete L2 inner product ``W``.

For ``k = 0`` the field is ``(0, u_y, u_z)``; curl is ``(0, -u_z', u_y')``
on a periodic staggered grid (``u_y`` at centres, ``u_z`` at nodes), which
builds in the endpoint matching that keeps ``curl u`` flux-free.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg

from ..errors import CasimirKitError, ConditioningError
from .geometry import SlabGeometry


def _ghost_gradient(M, h):
    """Centres -> nodes difference with odd ghosts (zero value on the walls)."""
    G = np.zeros((M + 1, M))
    idx = np.arange(M)
    G[idx, idx] = 1.0 / h
    G[idx + 1, idx] -= 1.0 / h
    G[0, 0] = 2.0 / h
    G[M, M - 1] = -2.0 / h
    return G


@dataclass(frozen=True)
class ModeField:
    """Solenoidal Fourier-mode field ``u(x) exp(i(k_y y + k_z z))`` in (f, g) coordinates."""

    space: "ModeSpace"
    coeffs: np.ndarray = field(repr=False)

    @property
    def mode(self):
        return self.space.ky, self.space.kz

    @property
    def f(self):
        return self.coeffs[: self.space.M]

    @property
    def g(self):
        return self.coeffs[self.space.M:]

    def components(self):
        """``(x, u_x, u_y, u_z)`` at cell centres."""
        return self.space.components(self.coeffs)

    def __add__(self, other):
        return ModeField(self.space, self.coeffs + other.coeffs)

    def __mul__(self, s):
        return ModeField(self.space, s * self.coeffs)

    __rmul__ = __mul__


class ModeSpace:
    """Discrete solenoidal fields of one Fourier mode ``k != 0``."""

    def __init__(self, geometry: SlabGeometry, ky: float, kz: float):
        if ky == 0 and kz == 0:
            raise CasimirKitError("ModeSpace needs k != 0; use ZeroModeSpace for k = 0")
        self.geometry = geometry
        self.ky = float(ky)
        self.kz = float(kz)
        self.k = float(np.hypot(ky, kz))
        self.M = geometry.cells
        h = geometry.h
        self.G = _ghost_gradient(self.M, h)
        self.L = self.G.T @ (geometry.node_weights[:, None] * self.G) / h  # -d2/dx2 with Dirichlet
        self.P = self.k ** 2 * np.eye(self.M) + self.L
        self.Wf = (h / self.k ** 2) * self.P
        self._Wf_chol = scipy.linalg.cho_factor(self.Wf)
        self._P_chol = scipy.linalg.cho_factor(self.P)

    # unit vectors of the (par, perp) frame in the y-z plane
    @property
    def khat(self):
        return np.array([self.ky, self.kz]) / self.k

    @property
    def ehat(self):
        return np.array([-self.kz, self.ky]) / self.k

    @property
    def dim(self):
        return 2 * self.M

    def same_mode(self, other):
        return (other.geometry == self.geometry and np.isclose(other.ky, self.ky)
                and np.isclose(other.kz, self.kz))

    def field(self, coeffs):
        return ModeField(self, np.asarray(coeffs, dtype=complex))

    def zeros(self):
        return self.field(np.zeros(self.dim, dtype=complex))

    # -- metric -------------------------------------------------------------
    def W_apply(self, c):
        M = self.M
        return np.concatenate([self.Wf @ c[:M], self.geometry.h * c[M:]])

    def W_solve(self, r):
        M = self.M
        return np.concatenate([scipy.linalg.cho_solve(self._Wf_chol, r[:M]), r[M:] / self.geometry.h])

    @cached_property
    def W(self):
        M = self.M
        out = np.zeros((2 * M, 2 * M))
        out[:M, :M] = self.Wf
        out[M:, M:] = self.geometry.h * np.eye(M)
        return out

    def inner(self, u, v):
        """``<u, v> = int u . conj(v) dx`` (linear in the first slot)."""
        u = getattr(u, "coeffs", u)
        v = getattr(v, "coeffs", v)
        return complex(np.vdot(v, self.W_apply(u)))

    def norm(self, u):
        return float(np.sqrt(max(self.inner(u, u).real, 0.0)))

    # -- reconstruction ------------------------------------------------------
    def u_par(self, c):
        return (1j / self.k) * (self.G @ c[: self.M])

    def components(self, c):
        c = getattr(c, "coeffs", c)
        f, g = c[: self.M], c[self.M:]
        par_n = self.u_par(c)
        par_c = 0.5 * (par_n[:-1] + par_n[1:])
        kh, eh = self.khat, self.ehat
        uy = kh[0] * par_c + eh[0] * g
        uz = kh[1] * par_c + eh[1] * g
        return self.geometry.centers, f, uy, uz

    def divergence(self, c):
        """Discrete ``u_x' + i k.u`` at nodes (zero by construction)."""
        c = getattr(c, "coeffs", c)
        return self.G @ c[: self.M] + 1j * self.k * self.u_par(c)

    def project(self, wx, w_par, w_perp):
        """L2-orthogonal projection of a general mode field onto the solenoidal space.

        ``wx`` and ``w_perp`` at centres, ``w_par`` at nodes.  Removing the
        gradient part amounts to one tridiagonal solve with ``W_f``.
        """
        h = self.geometry.h
        rf = h * np.asarray(wx) - (1j / self.k) * (self.G.T @ (self.geometry.node_weights * np.asarray(w_par)))
        rg = h * np.asarray(w_perp)
        return self.W_solve(np.concatenate([rf, rg]).astype(complex))

    # -- operators -----------------------------------------------------------
    @cached_property
    def curl(self):
        """Dense matrix of curl in (f, g) coordinates."""
        M, k = self.M, self.k
        S = np.zeros((2 * M, 2 * M), dtype=complex)
        S[:M, M:] = 1j * k * np.eye(M)
        S[M:, :M] = -(1j / k) * self.P
        return S

    def curl_apply(self, c):
        M, k = self.M, self.k
        return np.concatenate([1j * k * c[M:], -(1j / k) * (self.P @ c[:M])])

    def curl_inverse_apply(self, c):
        M, k = self.M, self.k
        F, G = c[:M], c[M:]
        return np.concatenate([1j * k * scipy.linalg.cho_solve(self._P_chol, G), -1j * F / k])

    def K_apply(self, c, mu):
        """``(1 - mu S^-1) c``."""
        return c - mu * self.curl_inverse_apply(c)

    def K_matrix(self, mu):
        M, k = self.M, self.k
        Sinv = np.zeros((2 * M, 2 * M), dtype=complex)
        Sinv[:M, M:] = 1j * k * scipy.linalg.cho_solve(self._P_chol, np.eye(M))
        Sinv[M:, :M] = -(1j / k) * np.eye(M)
        return np.eye(2 * M) - mu * Sinv

    def adjointness_defect(self, u, v):
        return abs(self.inner(self.curl_apply(u), v) - self.inner(u, self.curl_apply(v)))


class ZeroModeSpace:
    """``k = 0`` fields ``(0, u_y, u_z)``: ``u_y`` at centres, ``u_z`` at periodic nodes."""

    def __init__(self, geometry: SlabGeometry):
        self.geometry = geometry
        self.M = geometry.cells
        h = geometry.h
        M = self.M
        D = np.zeros((M, M))  # periodic nodes -> centres forward difference
        idx = np.arange(M)
        D[idx, idx] = -1.0 / h
        D[idx, (idx + 1) % M] = 1.0 / h
        self.D = D
        self.ky = self.kz = 0.0
        self.k = 0.0

    @property
    def dim(self):
        return 2 * self.M

    @property
    def x_y(self):
        return self.geometry.centers

    @property
    def x_z(self):
        return self.geometry.nodes[:-1]

    def sample(self, fy, fz):
        """Stack callables sampled at their staggered positions."""
        return np.concatenate([fy(self.x_y), fz(self.x_z)])

    @cached_property
    def curl(self):
        M = self.M
        S = np.zeros((2 * M, 2 * M))
        S[:M, M:] = -self.D
        S[M:, :M] = -self.D.T
        return S

    def curl_apply(self, c):
        M = self.M
        return np.concatenate([-self.D @ c[M:], -self.D.T @ c[:M]])

    def inner(self, u, v):
        return complex(self.geometry.h * np.vdot(v, u))

    def norm(self, u):
        return float(np.sqrt(self.inner(u, u).real))

    def means(self, c):
        M = self.M
        return np.array([np.mean(c[:M]), np.mean(c[M:])])

    def adjointness_defect(self, u, v):
        return abs(self.inner(self.curl_apply(u), v) - self.inner(u, self.curl_apply(v)))


def curl_matrix(geometry: SlabGeometry, ky: float, kz: float):
    """Discrete curl for one mode; returns the owning space and its dense matrix."""
    space = ZeroModeSpace(geometry) if ky == 0 and kz == 0 else ModeSpace(geometry, ky, kz)
    return space, space.curl


@dataclass(frozen=True)
class CurlSpectrum:
    mode: tuple[float, float]
    eigenvalues: np.ndarray  # sorted by |lambda|, positive first within ties
    vectors: np.ndarray  # columns, orthonormal in the discrete inner product
    residuals: np.ndarray
    space: object
    extrapolated: np.ndarray | None = None

    def eigenfield(self, j):
        if isinstance(self.space, ModeSpace):
            return self.space.field(self.vectors[:, j])
        return self.vectors[:, j]

    def smallest_positive(self):
        pos = np.flatnonzero(self.eigenvalues > 0)
        if pos.size == 0:
            raise CasimirKitError("no positive eigenvalue")
        j = pos[np.argmin(self.eigenvalues[pos])]
        return int(j), float(self.eigenvalues[j])

    def orthogonality_defect(self):
        V = self.vectors
        if isinstance(self.space, ModeSpace):
            Gm = V.conj().T @ (self.space.W @ V)
        else:
            Gm = self.space.geometry.h * (V.conj().T @ V)
        return float(np.max(np.abs(Gm - np.eye(V.shape[1]))))


def _order(lam):
    # |lambda| ascending, +lambda before -lambda
    return np.lexsort((-np.sign(lam), np.round(np.abs(lam), 10)))


def _raw_spectrum(geometry, ky, kz, count):
    space, S = curl_matrix(geometry, ky, kz)
    try:
        if isinstance(space, ModeSpace):
            A = space.W @ S
            A = 0.5 * (A + A.conj().T)
            lam, V = scipy.linalg.eigh(A, space.W)
        else:
            lam, V = scipy.linalg.eigh(S)
            keep = np.abs(lam) > 1e-9 * np.max(np.abs(lam))  # drop the harmonic constants
            lam, V = lam[keep], V[:, keep] / np.sqrt(geometry.h)
    except np.linalg.LinAlgError as exc:
        raise CasimirKitError(f"curl eigensolve failed: {exc}") from exc
    order = _order(lam)[:count]
    lam, V = lam[order], V[:, order]
    res = np.array([np.linalg.norm(S @ V[:, j] - lam[j] * V[:, j]) for j in range(len(lam))])
    return space, lam, V, res


def curl_eigensolve(geometry: SlabGeometry, ky: float, kz: float, count: int,
                    extrapolate: bool = False) -> CurlSpectrum:
    """Eigenpairs of the constrained discrete curl, sorted by ``|lambda|``.

    With ``extrapolate=True`` the same eigenvalues are also computed on a grid
    with half as many cells and combined by Richardson extrapolation for the
    second-order error; the raw values stay in ``eigenvalues``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    space, lam, V, res = _raw_spectrum(geometry, ky, kz, count)
    extra = None
    if extrapolate:
        coarse = geometry.with_nodes((geometry.cells + 1) // 2 + 1)
        _, lam_c, _, _ = _raw_spectrum(coarse, ky, kz, count)
        hf, hc = geometry.h, coarse.h
        extra = (hc ** 2 * lam - hf ** 2 * lam_c) / (hc ** 2 - hf ** 2)
    return CurlSpectrum((float(ky), float(kz)), lam, V, res, space, extra)


@dataclass(frozen=True)
class ModeScan:
    lambda1: float
    mode: tuple[float, float]
    spectra: dict


def lowest_positive_eigenvalue(geometry: SlabGeometry, modes, count: int = 4) -> ModeScan:
    """Smallest positive curl eigenvalue over a finite scan set of modes."""
    modes = list(modes)
    if not modes:
        raise CasimirKitError("empty mode set")
    spectra = {}
    best = (np.inf, None)
    for ky, kz in modes:
        sp = curl_eigensolve(geometry, ky, kz, count)
        spectra[(ky, kz)] = sp
        _, lam = sp.smallest_positive()
        if lam < best[0]:
            best = (lam, (ky, kz))
    return ModeScan(best[0], best[1], spectra)


def check_conditioning(matrix, limit=1e12):
    c = np.linalg.cond(matrix)
    if not np.isfinite(c) or c > limit:
        raise ConditioningError(f"condition number {c:.3e} exceeds {limit:.1e}")
    return c
