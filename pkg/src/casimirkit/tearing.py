"""Linearized ideal MHD around a Beltrami slab equilibrium, one Fourier mode.

Perturbations ``(V, B)`` live in the solenoidal (f, g) coordinates of
:class:`~casimirkit.slab.ModeSpace`.  With the induction operator
``T = curl(. x B_mu)`` and ``K = 1 - mu curl^-1`` the dynamics are

    dV/dt = -T^dagger K B,        dB/dt = T V,

which conserve ``(|V|^2 + <K B, B>)/2`` and every pairing ``<B, b>`` with
``T^dagger b = 0``.  The extended ("unfrozen") system adds the Casimir value
``p`` and its conjugate angle ``q`` with coupling ``D``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.linalg
import scipy.optimize

from .errors import ConditioningError, DomainError, ResonantMultiplierError
from .integrate import Trajectory, step_count
from .slab.beltrami import BeltramiEquilibrium, beltrami_solve
from .slab.geometry import SlabGeometry
from .slab.resonance import KernelElement, build_kernel_element, find_resonant_surface
from .slab.spectral import ModeField, ModeSpace, curl_eigensolve

DEFAULT_SCAN_MODES = ((0.0, 0.5), (0.5, 0.0), (0.5, 0.5), (0.0, 1.0), (1.0, 0.0))


# -- operators -----------------------------------------------------------------

@dataclass(frozen=True)
class TearingOperators:
    """``T``, its adjoint and ``K`` for one mode around one equilibrium."""

    space: ModeSpace
    eq: BeltramiEquilibrium
    B_par: np.ndarray = field(repr=False)  # k.B/|k| at cell centres
    dB_perp: np.ndarray = field(repr=False)  # d/dx of e.B at cell centres

    @classmethod
    def build(cls, space: ModeSpace, eq: BeltramiEquilibrium):
        x = space.geometry.centers
        return cls(space, eq, eq.B_par(x, space.ky, space.kz), eq.dB_perp(x, space.ky, space.kz))

    @property
    def mu(self):
        return self.eq.mu

    def T_apply(self, c):
        """``curl(v x B)`` = ``i (k.B) v - v_x B'`` in (f, g) coordinates."""
        M, k = self.space.M, self.space.k
        f, g = c[:M], c[M:]
        ikb = 1j * k * self.B_par
        return np.concatenate([ikb * f, ikb * g - self.dB_perp * f])

    def T_adjoint_apply(self, c):
        sp = self.space
        M, k = sp.M, sp.k
        r = sp.W_apply(c)
        x, y = r[:M], r[M:]
        ikb = 1j * k * self.B_par
        return sp.W_solve(np.concatenate([-ikb * x - self.dB_perp * y, -ikb * y]))

    def K_apply(self, c):
        return self.space.K_apply(c, self.mu)

    # dense forms for the linear propagators
    def T_matrix(self):
        M, k = self.space.M, self.space.k
        ikb = np.diag(1j * k * self.B_par)
        out = np.zeros((2 * M, 2 * M), dtype=complex)
        out[:M, :M] = ikb
        out[M:, M:] = ikb
        out[M:, :M] = -np.diag(self.dB_perp)
        return out

    def T_adjoint_matrix(self):
        W = self.space.W
        return scipy.linalg.solve(W, self.T_matrix().conj().T @ W, assume_a="pos")


def K_mu_apply(B: ModeField, mu: float, cond_max: float = 1e12) -> ModeField:
    """``(1 - mu curl^-1) B`` on the solenoidal mode space."""
    sp = B.space
    if mu != 0.0:
        c = np.linalg.cond(sp.P)
        if not np.isfinite(c) or c > cond_max:
            raise ConditioningError(f"curl inverse ill-conditioned (cond {c:.2e})")
    return sp.field(sp.K_apply(B.coeffs, mu))


# -- problem assembly ----------------------------------------------------------

@dataclass(frozen=True)
class TearingProblem:
    """Everything needed to evolve one mode: space, operators, kernel element."""

    geometry: SlabGeometry
    eq: BeltramiEquilibrium
    space: ModeSpace
    ops: TearingOperators
    b: KernelElement

    @property
    def mu(self):
        return self.eq.mu

    @classmethod
    def build(cls, geometry: SlabGeometry, eq: BeltramiEquilibrium, ky: float, kz: float,
              x_dagger: float | None = None):
        space = ModeSpace(geometry, ky, kz)
        if x_dagger is None:
            roots = find_resonant_surface(eq, ky, kz)
            x_dagger = float(roots[np.argmin(np.abs(roots))])
        b = build_kernel_element(space, eq, x_dagger)
        return cls(geometry, eq, space, TearingOperators.build(space, eq), b)

    def field(self, coeffs):
        return self.space.field(coeffs)

    def energy(self, V, B):
        sp = self.space
        return 0.5 * (sp.inner(V, V).real + sp.inner(sp.K_apply(B, self.mu), B).real)

    def casimir(self, B):
        return self.space.inner(B, self.b.coeffs)

    def project_parallel(self, B):
        """Remove the component along ``b``."""
        bc = self.b.coeffs
        return B - self.space.inner(B, bc) * bc


def slab_instance(N: int = 256, mu: float = 0.5, hy: float = 1.0, hz: float = 0.0,
                  a: float = np.pi, Ly: float = 4 * np.pi, Lz: float = 4 * np.pi,
                  mode=(0.0, 0.5)) -> TearingProblem:
    """Default slab: ``a = pi``, periods ``4 pi``, axial-free field ``h = (1, 0)``.

    For the mode ``(0, 1/2)`` the resonant surface is the mid-plane, which is
    a cell centre whenever ``N`` is even.
    """
    g = SlabGeometry(a, Ly, Lz, N)
    eq = beltrami_solve(a, mu, hy, hz)
    return TearingProblem.build(g, eq, *mode)


# -- ideal (frozen Casimir) dynamics --------------------------------------------

def linearized_rhs(problem: TearingProblem, V, B):
    """``(dV/dt, dB/dt)`` of the linearized ideal dynamics."""
    ops = problem.ops
    return -ops.T_adjoint_apply(ops.K_apply(B)), ops.T_apply(V)


def linearized_matrix(problem: TearingProblem):
    sp, ops = problem.space, problem.ops
    n = sp.dim
    A = np.zeros((2 * n, 2 * n), dtype=complex)
    A[:n, n:] = -ops.T_adjoint_matrix() @ sp.K_matrix(problem.mu)
    A[n:, :n] = ops.T_matrix()
    return A


def rk4_propagator(A, dt):
    """One classical RK4 step of ``y' = A y`` as a matrix."""
    hA = dt * A
    I = np.eye(A.shape[0], dtype=A.dtype)
    return I + hA @ (I + hA @ (I / 2 + hA @ (I / 6 + hA / 24)))


def integrate_linear(A, y0, t_end, dt, monitors, samples: int = 201):
    """Fixed-step RK4 for a linear autonomous system, storing about ``samples`` states."""
    n = step_count(t_end, dt)
    h = t_end / n
    R = rk4_propagator(A, h)
    stride = max(1, n // max(samples - 1, 1))
    y = np.array(y0, dtype=complex)
    times, states = [0.0], [y.copy()]
    for i in range(1, n + 1):
        y = R @ y
        if not np.all(np.isfinite(y)):
            from .errors import DivergenceError
            raise DivergenceError("non-finite state", i * h)
        if i % stride == 0 or i == n:
            times.append(i * h)
            states.append(y.copy())
    states = np.array(states)
    mons = {k: np.array([fn(s) for s in states]) for k, fn in monitors.items()}
    return Trajectory(np.array(times), states, mons)


def ideal_evolve(problem: TearingProblem, V0, B0, t_end: float, dt: float,
                 samples: int = 201) -> Trajectory:
    """RK4 run of the ideal linearized dynamics.

    Monitors: ``energy``, ``C_b`` (complex), ``div_V``, ``div_B`` (discrete
    divergence norms) and ``orth_b`` (``|<B, b>|``).
    """
    sp = problem.space
    n = sp.dim
    V0 = getattr(V0, "coeffs", V0)
    B0 = getattr(B0, "coeffs", B0)
    y0 = np.concatenate([V0, B0]).astype(complex)
    monitors = {
        "energy": lambda y: problem.energy(y[:n], y[n:]),
        "C_b": lambda y: problem.casimir(y[n:]),
        "div_V": lambda y: float(np.linalg.norm(sp.divergence(y[:n]))),
        "div_B": lambda y: float(np.linalg.norm(sp.divergence(y[n:]))),
    }
    return integrate_linear(linearized_matrix(problem), y0, t_end, dt, monitors, samples)


def relative_drift(traj: Trajectory, name: str, scale: float | None = None):
    m = traj.monitors[name]
    ref = abs(m[0]) if scale is None else scale
    return float(np.max(np.abs(m - m[0])) / ref) if ref > 0 else float(np.max(np.abs(m - m[0])))


# -- tearing mode and overlap -----------------------------------------------------

def tearing_stationary(mu: float, beta: float, b: KernelElement, method: str = "direct",
                       resonance_tol: float = 1e-10):
    """Stationary point of ``<K B, B>/2 - beta Re<B, b>``: solves ``K_mu B = beta b``.

    ``method`` is ``"direct"`` (dense linear solve) or ``"eigen"``
    (expansion in curl eigenfunctions).
    """
    sp = b.space
    if beta == 0.0:
        return sp.zeros()
    if mu == 0.0:
        return sp.field(beta * b.coeffs)
    spec = curl_eigensolve(sp.geometry, sp.ky, sp.kz, sp.dim)
    lam = spec.eigenvalues
    near = lam[np.argmin(np.abs(lam - mu))]
    if abs(near - mu) < resonance_tol * max(1.0, abs(mu)):
        raise ResonantMultiplierError(mu, float(near))
    if method == "direct":
        coeffs = scipy.linalg.solve(sp.K_matrix(mu), beta * b.coeffs)
    elif method == "eigen":
        V = spec.vectors
        proj = V.conj().T @ sp.W_apply(b.coeffs)
        coeffs = V @ (beta * proj / (1.0 - mu / lam))
    else:
        raise ValueError(f"unknown method {method!r}")
    out = sp.field(coeffs)
    grad = sp.K_apply(coeffs, mu) - beta * b.coeffs
    if np.linalg.norm(grad) > 1e-8 * max(1.0, abs(beta)) * np.sqrt(sp.dim):
        raise ConditioningError(f"stationarity residual {np.linalg.norm(grad):.2e}")
    return out


def gamma_overlap(omega1: ModeField, b: KernelElement, warn_below: float = 1e-12) -> float:
    """``|<omega_1, b>|``; zero when the modes differ."""
    if not b.space.same_mode(omega1.space):
        return 0.0
    g = abs(b.space.inner(omega1.coeffs, b.coeffs))
    if g < warn_below:
        warnings.warn("overlap below 1e-12: reduced tearing model is degenerate", RuntimeWarning)
    return float(g)


@dataclass(frozen=True)
class GlobalEigen:
    """Smallest positive curl eigenvalue over a scan set and its eigenfield."""

    lambda1: float
    mode: tuple[float, float]
    omega1: ModeField | np.ndarray
    per_mode: dict


def lowest_eigenpair(geometry: SlabGeometry, modes=DEFAULT_SCAN_MODES, tie_tol: float = 1e-10):
    """Global ``lambda_1`` over ``modes``; ties go to the earliest mode in the list."""
    modes = list(modes)
    if not modes:
        raise DomainError("empty mode set")
    best = None
    per_mode = {}
    for ky, kz in modes:
        sp = curl_eigensolve(geometry, ky, kz, 4)
        j, lam = sp.smallest_positive()
        per_mode[(ky, kz)] = lam
        if best is None or lam < best[0] * (1 - tie_tol):
            best = (lam, (ky, kz), sp.eigenfield(j))
    return GlobalEigen(best[0], best[1], best[2], per_mode)


def phase_aligned(omega: ModeField, b: KernelElement) -> ModeField:
    """Rotate the eigenfield's phase so that ``<omega, b>`` is real and positive."""
    z = b.space.inner(omega.coeffs, b.coeffs)
    if z == 0:
        return omega
    return omega.space.field(omega.coeffs * np.conj(z) / abs(z))


def coercivity_form(omega: ModeField, mu: float) -> float:
    """``<H_mu u, u>`` for ``u = (0, omega)``, i.e. ``<K_mu omega, omega>``."""
    sp = omega.space
    return sp.inner(sp.K_apply(omega.coeffs, mu), omega.coeffs).real


# -- extended (unfrozen) dynamics --------------------------------------------------

@dataclass(frozen=True)
class ExtendedTearingState:
    """``(V, B_par, p, q)``; ``B_par`` is kept orthogonal to ``b``."""

    V: np.ndarray
    B_par: np.ndarray
    p: complex
    q: complex

    def pack(self):
        return np.concatenate([self.V, self.B_par, [self.p, self.q]]).astype(complex)

    @classmethod
    def unpack(cls, y, n):
        return cls(y[:n], y[n:2 * n], y[2 * n], y[2 * n + 1])


def extended_rhs(problem: TearingProblem, s: ExtendedTearingState, D: float) -> ExtendedTearingState:
    """Time derivative of the unfrozen system.

    With ``B_tot = B_par + p b``: ``dV/dt = -T^dagger P K B_tot``,
    ``dB_par/dt = P T V``, ``dp/dt = -D q``, ``dq/dt = <K B_tot, b>``, where
    ``P`` projects out ``b``.  The energy
    ``(|V|^2 + <K B_tot, B_tot> + D |q|^2)/2`` is conserved.
    """
    ops = problem.ops
    bc = problem.b.coeffs
    KB = ops.K_apply(s.B_par + s.p * bc)
    dV = -ops.T_adjoint_apply(problem.project_parallel(KB))
    dB = problem.project_parallel(ops.T_apply(s.V))
    return ExtendedTearingState(dV, dB, -D * s.q, problem.space.inner(KB, bc))


@dataclass(frozen=True)
class QdotComparison:
    full: complex
    estimate: complex
    discrepancy: float


def qdot_comparison(problem: TearingProblem, s: ExtendedTearingState, lambda1: float) -> QdotComparison:
    """Full pairing ``<K B_tot, b>`` next to the single-mode estimate.

    If ``B_tot`` is a multiple of the lowest eigenfield, ``K`` acts on it as
    ``1 - mu/lambda1`` and the pairing reduces to ``(1 - mu/lambda1) p``.
    The relative discrepancy measures how far the state is from that.
    """
    full = extended_rhs(problem, s, 0.0).q
    est = (1.0 - problem.mu / lambda1) * s.p
    return QdotComparison(full, est, float(abs(full - est) / max(abs(full), abs(est), 1e-300)))


def extended_matrix(problem: TearingProblem, D: float):
    sp, ops = problem.space, problem.ops
    n = sp.dim
    bc = problem.b.coeffs
    Wb = sp.W_apply(bc)
    Pm = np.eye(n) - np.outer(bc, Wb.conj())  # X -> X - <X, b> b
    K = sp.K_matrix(problem.mu)
    Kb = K @ bc
    A = np.zeros((2 * n + 2, 2 * n + 2), dtype=complex)
    TdPK = -ops.T_adjoint_matrix() @ Pm @ K
    A[:n, n:2 * n] = TdPK
    A[:n, 2 * n] = TdPK @ bc
    A[n:2 * n, :n] = Pm @ ops.T_matrix()
    A[2 * n, 2 * n + 1] = -D
    A[2 * n + 1, n:2 * n] = Wb.conj() @ K
    A[2 * n + 1, 2 * n] = Wb.conj() @ Kb
    return A


def extended_energy(problem: TearingProblem, y, D: float):
    n = problem.space.dim
    s = ExtendedTearingState.unpack(y, n)
    Bt = s.B_par + s.p * problem.b.coeffs
    return problem.energy(s.V, Bt) + 0.5 * D * abs(s.q) ** 2


def extended_evolve(problem: TearingProblem, s0: ExtendedTearingState, D: float, t_end: float,
                    dt: float, samples: int = 401) -> Trajectory:
    """RK4 run of the unfrozen system; monitors ``energy``, ``p``, ``q``, ``orth_b``."""
    n = problem.space.dim
    monitors = {
        "energy": lambda y: extended_energy(problem, y, D),
        "p": lambda y: y[2 * n],
        "q": lambda y: y[2 * n + 1],
        "orth_b": lambda y: abs(problem.casimir(y[n:2 * n])),
    }
    return integrate_linear(extended_matrix(problem, D), s0.pack(), t_end, dt, monitors, samples)


# -- reduced (p, q) model ------------------------------------------------------------

StabilityClass = Literal["oscillatory", "marginal", "growing"]


@dataclass(frozen=True)
class ReducedTearingParams:
    mu: float
    lambda1: float
    gamma: float
    D: float

    def __post_init__(self):
        if not self.lambda1 > 0:
            raise DomainError("lambda1 must be positive")
        if not self.gamma > 0:
            raise DomainError("gamma must be positive (absorb its sign into p)")

    @property
    def c(self):
        return (1.0 - self.mu / self.lambda1) * self.gamma

    def matrix(self):
        return np.array([[0.0, -self.D], [self.c, 0.0]])

    def hamiltonian(self, p, q):
        return 0.5 * self.c * p * p + 0.5 * self.D * q * q


@dataclass(frozen=True)
class StabilityReport:
    klass: StabilityClass
    frequency: float | None
    rate: float | None
    energy_signature: int


def classify_stability(params: ReducedTearingParams, tol: float = 1e-12) -> StabilityReport:
    """Sign rule on ``D c``: positive oscillates, negative grows, zero is marginal."""
    c, D = params.c, params.D
    Dc = D * c
    sig = int(np.sign(c)) if abs(c) > tol * params.gamma else 0
    if abs(Dc) <= tol * params.gamma * max(1.0, abs(D)):
        return StabilityReport("marginal", None, None, sig)
    if Dc > 0:
        return StabilityReport("oscillatory", float(np.sqrt(Dc)), None, sig)
    return StabilityReport("growing", None, float(np.sqrt(-Dc)), sig)


def reduced_evolve(params: ReducedTearingParams, p0: float, q0: float, t_end: float,
                   samples: int = 4001) -> Trajectory:
    """Exact solution of ``p' = -D q``, ``q' = c p`` by the matrix exponential."""
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    t = np.linspace(0.0, t_end, samples)
    A = params.matrix()
    y0 = np.array([p0, q0], dtype=float)
    states = np.array([scipy.linalg.expm(A * ti) @ y0 for ti in t])
    H = params.hamiltonian(states[:, 0], states[:, 1])
    return Trajectory(t, states, {"p": states[:, 0], "q": states[:, 1], "H_p": H})


# -- fits ------------------------------------------------------------------------------

@dataclass(frozen=True)
class FitResult:
    klass: StabilityClass
    rate: float | None
    frequency: float | None


def fit_growth_rate(t, y):
    """Least-squares slope of ``log|y|`` over the second half of the samples."""
    t = np.asarray(t)
    y = np.abs(np.asarray(y))
    half = t >= t[-1] / 2
    slope, _ = np.polyfit(t[half], np.log(y[half]), 1)
    return float(slope)


def fit_frequency(t, y):
    """Angular frequency of ``A cos(wt) + B sin(wt) + C`` fitted to the second half."""
    t = np.asarray(t)
    y = np.real(np.asarray(y))
    half = t >= t[-1] / 2
    th, yh = t[half], y[half]
    yc = yh - yh.mean()
    crossings = np.flatnonzero(np.sign(yc[:-1]) * np.sign(yc[1:]) < 0)
    if crossings.size >= 2:
        w0 = np.pi * (crossings.size - 1) / (th[crossings[-1]] - th[crossings[0]])
    else:
        w0 = np.pi / (th[-1] - th[0])

    def model(tt, w, A, B, C):
        return A * np.cos(w * tt) + B * np.sin(w * tt) + C

    amp = max(np.max(np.abs(yc)), 1e-300)
    popt, _ = scipy.optimize.curve_fit(model, th, yh, p0=[w0, amp, 0.0, yh.mean()], maxfev=20000)
    return float(abs(popt[0]))


def fitted_class(t, y, growth_factor: float = 4.0, flat_tol: float = 1e-9) -> FitResult:
    """Classify a time series as growing, oscillatory or marginal from its shape.

    Growing: the late-quarter amplitude exceeds the largest amplitude of the
    first half (initial value included) by ``growth_factor``; bounded
    recurrences after phase mixing therefore do not count as growth.
    Oscillatory: the mean-removed second half changes sign at least twice.
    Anything else (constant or linear drift) is marginal.
    """
    t = np.asarray(t)
    y = np.asarray(y)
    T = t[-1]
    early = np.max(np.abs(y[t <= T / 2]))
    late = np.max(np.abs(y[t >= 3 * T / 4]))
    if late > growth_factor * early:
        return FitResult("growing", fit_growth_rate(t, y), None)
    half = t >= T / 2
    yr = np.real(y[half])
    th = t[half]
    # remove a linear trend so secular drift is not mistaken for oscillation
    trend = np.polyval(np.polyfit(th, yr, 1), th)
    resid = yr - trend
    scale = max(np.max(np.abs(yr)), 1e-300)
    if np.max(np.abs(resid)) <= flat_tol * scale:
        return FitResult("marginal", None, None)
    yc = yr - yr.mean()
    changes = int(np.count_nonzero(np.sign(yc[:-1]) * np.sign(yc[1:]) < 0))
    if changes >= 2:
        return FitResult("oscillatory", None, fit_frequency(t, y))
    return FitResult("marginal", None, None)


# -- stability scans ---------------------------------------------------------------------

@dataclass(frozen=True)
class ScanRow:
    ratio: float
    D: float
    predicted: StabilityClass
    fitted: StabilityClass
    rate: float | None
    frequency: float | None
    energy_drift: float | None = None

    @property
    def agree(self):
        return self.predicted == self.fitted


def _reduced_cell(lambda1, gamma, ratio, D, t_end, samples):
    params = ReducedTearingParams(ratio * lambda1, lambda1, gamma, D)
    pred = classify_stability(params)
    tr = reduced_evolve(params, 1.0, 0.0, t_end, samples)
    fit = fitted_class(tr.times, tr.monitors["p"])
    return ScanRow(ratio, D, pred.klass, fit.klass, fit.rate, fit.frequency, None)


def energy_scale(problem: TearingProblem, y, D: float):
    """Sum of magnitudes of the energy's terms, a scale for indefinite forms."""
    n = problem.space.dim
    s = ExtendedTearingState.unpack(y, n)
    sp = problem.space
    Bt = s.B_par + s.p * problem.b.coeffs
    return 0.5 * (sp.inner(s.V, s.V).real + abs(sp.inner(sp.K_apply(Bt, problem.mu), Bt).real)
                  + abs(D) * abs(s.q) ** 2)


def stable_step(A, dt, courant: float = 0.1):
    """``dt`` capped so that ``dt * spectral radius <= courant``."""
    rho = float(np.max(np.abs(np.linalg.eigvals(A))))
    return min(dt, courant / rho) if rho > 0 else dt


def _full_cell(N, lambda1, gamma, ratio, D, t_end, dt, samples, instance_kwargs, courant=0.03):
    problem = slab_instance(N=N, mu=ratio * lambda1, **instance_kwargs)
    pred = classify_stability(ReducedTearingParams(ratio * lambda1, lambda1, gamma, D))
    n = problem.space.dim
    s0 = ExtendedTearingState(np.zeros(n, complex), np.zeros(n, complex), 1.0, 0.0)
    dt = stable_step(extended_matrix(problem, D), dt, courant)
    tr = extended_evolve(problem, s0, D, t_end, dt, samples)
    fit = fitted_class(tr.times, tr.monitors["p"])
    scale = np.array([energy_scale(problem, y, D) for y in tr.states])
    drift = float(np.max(np.abs(tr.monitors["energy"] - tr.monitors["energy"][0]) / scale))
    return ScanRow(ratio, D, pred.klass, fit.klass, fit.rate, fit.frequency, drift)


def stability_scan(lambda1: float, gamma: float, ratios, Ds, model: str = "reduced",
                   t_end: float = 200.0, dt: float = 0.01, samples: int = 4001, N: int = 64,
                   threads: int = 1, instance_kwargs=None, courant: float = 0.03) -> list[ScanRow]:
    """Predicted vs fitted stability over a ``(mu/lambda1, D)`` grid.

    ``model="reduced"`` fits the exact ``(p, q)`` solution; ``model="full"``
    runs the unfrozen field dynamics from ``p = 1`` and fits ``p(t)``.  Rows
    come back in grid order (D outer, ratio inner) whatever ``threads`` is.
    Full runs cap ``dt * spectral radius`` at ``courant``; RK4 energy error on
    the stiffest oscillation scales as its fifth power.
    """
    cells = [(float(r), float(D)) for D in Ds for r in ratios]
    if model == "reduced":
        work = lambda rd: _reduced_cell(lambda1, gamma, rd[0], rd[1], t_end, samples)  # noqa: E731
    elif model == "full":
        kw = dict(instance_kwargs or {})
        work = lambda rd: _full_cell(N, lambda1, gamma, rd[0], rd[1], t_end, dt,  # noqa: E731
                                     min(samples, 801), kw, courant)
    else:
        raise ValueError(f"unknown model {model!r}")
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(work, cells))
    return [work(c) for c in cells]
