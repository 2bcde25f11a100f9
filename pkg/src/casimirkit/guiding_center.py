"""Guiding-centre hierarchy in a dipole field.

The gyro-phase/magnetic-moment pair is either kept as a canonical pair
(microscopic system) or cut out of the Poisson matrix (macroscopic system), in
which case the magnetic moment becomes a Casimir.  The statistical side
covers the grand-canonical density law and its maximum-entropy derivation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .errors import DomainError, NonConvergenceError
from .poisson import PoissonOperator, PoissonSystem, ScalarObservable, canonical_matrix

# state layout (theta_c, mu, zeta, p_par, theta, P_theta)
GC_LABELS = ("theta_c", "mu", "zeta", "p_par", "theta", "P_theta")
# cartesian gyro layout (x_g, y_g, zeta, p_par, theta, P_theta) with mu = (x_g^2 + y_g^2)/2
GC_CARTESIAN_LABELS = ("x_g", "y_g", "zeta", "p_par", "theta", "P_theta")


@dataclass(frozen=True)
class FieldModel:
    """Axisymmetric point-dipole field sampled along the line ``r = r0``.

    The guiding centre moves along the vertical line at radius ``r0``; the
    coordinate ``zeta`` is the height on that line.  ``omega_c = (q/m)|B|`` and
    the flux function is ``psi = M r^2 / (r^2 + z^2)^(3/2)``.
    """

    moment: float = 1.0
    r0: float = 1.0
    charge: float = 1.0
    mass: float = 1.0
    potential: float = 0.0  # uniform electrostatic potential

    def r(self, zeta=0.0):
        return self.r0

    def psi(self, r, z):
        return self.moment * r * r / (r * r + z * z) ** 1.5

    def field_strength(self, r, z):
        R2 = r * r + z * z
        return abs(self.moment) * np.sqrt(r * r + 4.0 * z * z) / R2 ** 2

    def omega_c(self, r, z):
        return (self.charge / self.mass) * self.field_strength(r, z)

    def phi(self, r, z):
        return self.potential

    # derivatives along zeta at fixed r0, needed for analytic gradients
    def d_omega_c_dz(self, r, z):
        R2 = r * r + z * z
        s = np.sqrt(r * r + 4.0 * z * z)
        dB = abs(self.moment) * (4.0 * z / s / R2 ** 2 - 4.0 * z * s / R2 ** 3)
        return (self.charge / self.mass) * dB

    def d_psi_dz(self, r, z):
        return -3.0 * self.moment * r * r * z / (r * r + z * z) ** 2.5


@dataclass(frozen=True)
class GCState:
    theta_c: float
    mu: float
    zeta: float
    p_par: float
    theta: float
    P_theta: float

    def __post_init__(self):
        if self.mu < 0:
            raise DomainError("magnetic moment must be non-negative")

    def as_array(self):
        return np.array([self.theta_c, self.mu, self.zeta, self.p_par, self.theta, self.P_theta])


def hamiltonian_gc(s, f: FieldModel, m: float | None = None, q: float | None = None) -> float:
    """Guiding-centre energy ``mu w_c + p_par^2/2m + (P_theta - q psi)^2/(2 m r^2) + q phi``."""
    z = s.as_array() if isinstance(s, GCState) else np.asarray(s, dtype=float)
    m = f.mass if m is None else m
    q = f.charge if q is None else q
    mu, zeta, p_par, P_th = z[1], z[2], z[3], z[5]
    r = f.r(zeta)
    if r == 0:
        raise DomainError("guiding centre on the symmetry axis (r = 0)")
    return float(
        mu * f.omega_c(r, zeta)
        + p_par ** 2 / (2.0 * m)
        + (P_th - q * f.psi(r, zeta)) ** 2 / (2.0 * m * r * r)
        + q * f.phi(r, zeta)
    )


def _gc_gradient(z, f: FieldModel):
    m, q = f.mass, f.charge
    mu, zeta, p_par, P_th = z[1], z[2], z[3], z[5]
    r = f.r(zeta)
    w = f.omega_c(r, zeta)
    drift = P_th - q * f.psi(r, zeta)
    g = np.zeros(6)
    g[1] = w
    g[2] = mu * f.d_omega_c_dz(r, zeta) - drift * q * f.d_psi_dz(r, zeta) / (m * r * r)
    g[3] = p_par / m
    g[5] = drift / (m * r * r)
    return g, w


def gc_system(f: FieldModel, poisson: str = "noncanonical", gyro: str = "action-angle") -> PoissonSystem:
    """Six-dimensional guiding-centre system.

    ``poisson="noncanonical"`` zeroes the gyro block so the magnetic moment is
    a Casimir; ``"canonical"`` keeps the full symplectic matrix.  With
    ``gyro="cartesian"`` the gyro pair is replaced by ``(x_g, y_g)`` with
    ``mu = (x_g^2 + y_g^2)/2``, so the moment is no longer a coordinate and its
    conservation becomes a genuine test of the integrator.
    """
    if poisson not in ("noncanonical", "canonical"):
        raise ValueError(f"unknown poisson={poisson!r}")
    if gyro not in ("action-angle", "cartesian"):
        raise ValueError(f"unknown gyro={gyro!r}")
    Jc = canonical_matrix(1)
    J = np.zeros((6, 6))
    for k in range(3):
        J[2 * k: 2 * k + 2, 2 * k: 2 * k + 2] = Jc
    if poisson == "noncanonical":
        J[:2, :2] = 0.0

    if gyro == "action-angle":
        def value(z):
            return hamiltonian_gc(z, f)

        def grad(z):
            return _gc_gradient(z, f)[0]

        mu_obs = ScalarObservable.coordinate(1, "mu")
        labels = GC_LABELS
    else:
        def to_aa(z):
            out = np.array(z, dtype=float)
            out[0] = 0.0
            out[1] = 0.5 * (z[0] ** 2 + z[1] ** 2)
            return out

        def value(z):
            return hamiltonian_gc(to_aa(z), f)

        def grad(z):
            g, w = _gc_gradient(to_aa(z), f)
            g[0] = w * z[0]
            g[1] = w * z[1]
            return g

        mu_obs = ScalarObservable(lambda z: 0.5 * (z[0] ** 2 + z[1] ** 2),
                                  lambda z: np.array([z[0], z[1], 0, 0, 0, 0.0]), "mu")
        labels = GC_CARTESIAN_LABELS

    H = ScalarObservable(value, grad, "H_c")
    return PoissonSystem(PoissonOperator.from_matrix(J), H, {"mu": mu_obs}, labels)


@dataclass(frozen=True)
class EquilibriumParams:
    alpha: float
    beta: float
    mass: float = 1.0
    charge: float = 1.0
    Z: float = 1.0

    def __post_init__(self):
        if not self.beta > 0:
            raise DomainError("inverse temperature beta must be positive")


def _check_integrable(p: EquilibriumParams, omega_c):
    if np.any(p.beta * np.asarray(omega_c) + p.alpha <= 0):
        raise DomainError("beta*omega_c + alpha must be positive for the mu-integral to converge")


def density_profile(p: EquilibriumParams, omega_c):
    """Relative density ``omega_c / (beta omega_c + alpha)`` (unnormalized)."""
    _check_integrable(p, omega_c)
    omega_c = np.asarray(omega_c, dtype=float)
    out = omega_c / (p.beta * omega_c + p.alpha)
    return float(out) if out.ndim == 0 else out


def marginal_density_quadrature(p: EquilibriumParams, omega_c: float, n_mu: int = 64,
                                n_v: int = 64, tail: float = 1e-10) -> float:
    """Density from direct quadrature of ``f_alpha (2 pi omega_c / m) dmu dv_d dv_par``.

    The moment integral is truncated where ``exp(-(beta w + alpha) mu)`` drops
    below ``tail`` and the velocity integrals where the Maxwellian does; all
    three use Gauss-Legendre nodes.  The potential term is a constant factor
    and is dropped together with ``Z``.
    """
    _check_integrable(p, omega_c)
    m = p.mass
    rate = p.beta * omega_c + p.alpha
    L = -np.log(tail)
    mu_max = L / rate
    v_max = np.sqrt(2.0 * L / (p.beta * m))
    x, w = np.polynomial.legendre.leggauss(n_mu)
    mu = 0.5 * mu_max * (x + 1.0)
    wmu = 0.5 * mu_max * w
    xv, wv = np.polynomial.legendre.leggauss(n_v)
    v = v_max * xv
    wv = v_max * wv
    I_mu = np.sum(wmu * np.exp(-rate * mu))
    I_v = np.sum(wv * np.exp(-0.5 * p.beta * m * v * v))
    tail_mass = np.exp(-L) + 2.0 * erfc(v_max * np.sqrt(0.5 * p.beta * m))
    if tail_mass > 1e-8:
        warnings.warn(f"truncated tail mass {tail_mass:.2e} exceeds 1e-8", RuntimeWarning)
    return float((2.0 * np.pi * omega_c / m) * I_mu * I_v * I_v / p.Z)



@dataclass(frozen=True)
class MaxEntGrid:
    """Phase-space cells: energy, moment and measure weight of each cell."""

    energy: np.ndarray
    moment: np.ndarray
    weight: np.ndarray

    @classmethod
    def guiding_center(cls, omega_values, field_: FieldModel | None = None, n_mu: int = 24,
                       n_v: int = 12, mu_max: float = 8.0, v_max: float = 4.0):
        """Tensor grid over (position, mu, v_d, v_par) with the measure ``2 pi w_c/m``."""
        m = 1.0 if field_ is None else field_.mass
        xm, wm = np.polynomial.legendre.leggauss(n_mu)
        mu = 0.5 * mu_max * (xm + 1.0)
        wmu = 0.5 * mu_max * wm
        xv, wv = np.polynomial.legendre.leggauss(n_v)
        v = v_max * xv
        wv = v_max * wv
        W, MU, VD, VP = np.meshgrid(np.asarray(omega_values, dtype=float), mu, v, v, indexing="ij")
        _, WMU, WVD, WVP = np.meshgrid(np.ones(len(omega_values)), wmu, wv, wv, indexing="ij")
        energy = MU * W + 0.5 * m * VD ** 2 + 0.5 * m * VP ** 2
        weight = WMU * WVD * WVP * 2.0 * np.pi * W / m
        return cls(energy.ravel(), MU.ravel(), weight.ravel())

    def distribution(self, alpha, beta, N=1.0):
        logf = -(beta * self.energy + alpha * self.moment)
        logf -= logf.max()
        f = np.exp(logf)
        return N * f / np.sum(self.weight * f)

    def moments(self, f):
        w = self.weight * f
        return np.array([w.sum(), (w * self.moment).sum(), (w * self.energy).sum()])

    def entropy(self, f):
        w = self.weight
        safe = np.where(f > 0, f, 1.0)
        return float(-np.sum(w * f * np.log(safe)))


@dataclass(frozen=True)
class MaxEntResult:
    f: np.ndarray
    alpha: float
    beta: float
    log_Z: float
    iterations: int
    residual: float


def max_entropy_distribution(targets, grid: MaxEntGrid, fix_alpha: float | None = None,
                             guess=(0.0, 1.0), tol: float = 1e-12, max_iter: int = 100) -> MaxEntResult:
    """Maximize ``-sum w f log f`` subject to particle number, moment and energy.

    The stationarity conditions give ``f = exp(-beta H - alpha mu) / Z``; the
    multipliers are found by damped Newton on the convex dual
    ``log sum w e^{-beta H - alpha mu} + alpha M/N + beta E/N``.  Passing
    ``fix_alpha=0`` drops the moment constraint (plain Boltzmann).
    """
    N, M, E = (float(t) for t in targets)
    if N <= 0:
        raise DomainError("particle number must be positive")
    mbar, ebar = M / N, E / N
    H, mu, w = grid.energy, grid.moment, grid.weight
    free = [0, 1] if fix_alpha is None else [1]
    x = np.array([guess[0] if fix_alpha is None else fix_alpha, guess[1]], dtype=float)

    def dual(x):
        a = -(x[1] * H + x[0] * mu)
        amax = a.max()
        e = w * np.exp(a - amax)
        s = e.sum()
        p = e / s
        mean = np.array([p @ mu, p @ H])
        obs = np.stack([mu, H])
        cov = (obs * p) @ obs.T - np.outer(mean, mean)
        val = amax + np.log(s) + x[0] * mbar + x[1] * ebar
        g = np.array([mbar, ebar]) - mean
        return val, g, cov

    for it in range(max_iter):
        val, g, cov = dual(x)
        gf = g[free]
        res = float(np.max(np.abs(gf / np.array([mbar, ebar])[free])))
        if res < tol:
            break
        Hs = cov[np.ix_(free, free)]
        try:
            step = -np.linalg.solve(Hs, gf)
        except np.linalg.LinAlgError as exc:
            raise NonConvergenceError(f"singular dual Hessian: {exc}") from exc
        t = 1.0
        while t > 1e-10:
            xt = x.copy()
            xt[free] += t * step
            if dual(xt)[0] <= val + 1e-4 * t * (gf @ step):
                break
            t *= 0.5
        x = xt
    else:
        raise NonConvergenceError(f"max-entropy Newton stalled (residual {res:.2e})")
    f = grid.distribution(x[0], x[1], N)
    a = -(x[1] * H + x[0] * mu)
    log_Z = float(np.log(np.sum(w * np.exp(a))) - np.log(N))
    return MaxEntResult(f, float(x[0]), float(x[1]), log_Z, it, res)
