import itertools

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from casimirkit import (
    DegenerateEquilibrium,
    DivergenceError,
    EvaluationError,
    NonConvergenceError,
    PoissonOperator,
    PoissonSystem,
    ScalarObservable,
    bracket,
    energy_casimir_shift,
    evolve,
    find_equilibrium,
    integrate,
    jacobi_residual,
    kernel_basis,
    verify_casimir,
)
from casimirkit.poisson import canonical_operator, casimir_drift, rhs, so3_operator

from .conftest import nc_matrix

finite = st.floats(-5, 5, allow_nan=False)


def smooth_observable(seed):
    r = np.random.default_rng(seed)
    a, Q = r.normal(size=6), r.normal(size=(6, 6))
    return ScalarObservable(lambda z: float(np.sin(a @ z) + z @ Q @ z))


# -- bracket ------------------------------------------------------------------------

def test_canonical_pair_bracket(J_c, rng):
    q, p = ScalarObservable.coordinate(0), ScalarObservable.coordinate(1)
    for z in rng.normal(size=(5, 2)):
        assert bracket(q, p, z, J_c) == 1.0


@settings(max_examples=50, deadline=None)
@given(arrays(float, 3, elements=finite), st.integers(0, 1000), st.integers(0, 1000))
def test_bracket_antisymmetric_so3(z, s1, s2):
    r1, r2 = np.random.default_rng(s1), np.random.default_rng(s2)
    a, b = r1.normal(size=3), r2.normal(size=3)
    F = ScalarObservable(lambda x: float(np.cos(a @ x)))
    G = ScalarObservable(lambda x: float((b @ x) ** 2))
    J = so3_operator(lambda x: x)
    fg, gf = bracket(F, G, z, J), bracket(G, F, z, J)
    assert abs(fg + gf) <= 1e-12 * max(1.0, abs(fg))


def test_bracket_self_is_zero(J_nc, rng):
    F = smooth_observable(3)
    for z in rng.normal(size=(10, 6)):
        assert abs(bracket(F, F, z, J_nc)) < 1e-12 * max(1.0, np.linalg.norm(F.gradient(z)) ** 2)


def test_moment_bracket_vanishes(J_nc, rng):
    mu = ScalarObservable.coordinate(1, "mu")
    for seed, z in enumerate(rng.normal(size=(20, 6))):
        assert bracket(mu, smooth_observable(seed), z, J_nc) == 0.0


def test_nonfinite_gradient_raises(J_c):
    F = ScalarObservable(lambda z: 0.0, lambda z: np.array([np.nan, 0.0]))
    with pytest.raises(EvaluationError):
        bracket(F, ScalarObservable.coordinate(0), [0.0, 0.0], J_c)


# -- Jacobi -------------------------------------------------------------------------

def symbolic_jacobi(w_expr, point):
    """Max cyclic Jacobi sum of ``J_ij = eps_ijk w_k`` by symbolic expansion."""
    z = sp.symbols("z1:4")
    w = [e.subs({sp.Symbol(f"z{i + 1}"): z[i] for i in range(3)}) for e in w_expr]
    J = sp.Matrix(3, 3, lambda i, j: sum(sp.LeviCivita(i, j, k) * w[k] for k in range(3)))
    worst = 0
    for i, j, k in itertools.product(range(3), repeat=3):
        s = sum(J[i, l] * sp.diff(J[j, k], z[l]) + J[j, l] * sp.diff(J[k, i], z[l])
                + J[k, l] * sp.diff(J[i, j], z[l]) for l in range(3))
        worst = max(worst, abs(float(s.subs(dict(zip(z, point))))))
    curl = [sp.diff(w[2], z[1]) - sp.diff(w[1], z[2]), sp.diff(w[0], z[2]) - sp.diff(w[2], z[0]),
            sp.diff(w[1], z[0]) - sp.diff(w[0], z[1])]
    helic = abs(float(sum(wi * ci for wi, ci in zip(w, curl)).subs(dict(zip(z, point)))))
    return worst, helic


def test_jacobi_violator_matches_symbolic_expansion():
    z1, z2, z3 = sp.symbols("z1:4")
    worst, helic = symbolic_jacobi([z3, z1, z2], (1, 1, 1))
    assert worst == pytest.approx(helic)
    J = so3_operator(lambda z: np.array([z[2], z[0], z[1]]))
    assert jacobi_residual(J, [1.0, 1.0, 1.0]) == pytest.approx(helic, abs=1e-6)


def test_jacobi_rigid_body_and_constant(J_nc, rng):
    J = so3_operator(lambda z: z)
    for z in rng.normal(size=(5, 3)):
        assert jacobi_residual(J, z) < 1e-10
    assert jacobi_residual(J_nc, rng.normal(size=6)) == 0.0
    # a constant matrix wrapped as a generic evaluator goes through finite differences
    M = nc_matrix()
    generic = PoissonOperator(lambda z: M, 6)
    assert jacobi_residual(generic, rng.normal(size=6)) < 1e-12


# -- kernel ---------------------------------------------------------------------------

def test_kernel_canonical_is_empty():
    kb = kernel_basis(canonical_operator(3), np.zeros(6))
    assert (kb.rank, kb.nullity) == (6, 0)


def test_kernel_nc_spans_gyro_pair(J_nc):
    kb = kernel_basis(J_nc, np.zeros(6))
    assert kb.nullity == 2 and kb.rank == 4
    P = kb.vectors @ kb.vectors.T
    np.testing.assert_allclose(P[:2, :2], np.eye(2), atol=1e-12)
    np.testing.assert_allclose(P[2:, 2:], 0.0, atol=1e-12)
    np.testing.assert_allclose(kb.vectors.T @ kb.vectors, np.eye(2), atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([3, 5, 7]), st.integers(0, 10_000))
def test_odd_antisymmetric_is_singular(n, seed):
    A = np.random.default_rng(seed).normal(size=(n, n))
    kb = kernel_basis(PoissonOperator.from_matrix(A - A.T), np.zeros(n))
    assert kb.nullity >= 1


def test_kernel_nullity_invariant_under_orthogonal_conjugation(J_nc, rng):
    Q, _ = np.linalg.qr(rng.normal(size=(6, 6)))
    kb = kernel_basis(PoissonOperator.from_matrix(Q @ nc_matrix() @ Q.T), np.zeros(6))
    assert kb.nullity == 2


def test_kernel_tol_validated(J_c):
    with pytest.raises(ValueError):
        kernel_basis(J_c, [0, 0], tol=1.5)


# -- Casimirs and energy-Casimir shift ------------------------------------------------------

def test_verify_casimir_examples(J_c, J_nc, so3, rng):
    mu = ScalarObservable.coordinate(1)
    assert verify_casimir(J_nc, mu, rng.normal(size=(10, 6))) == 0.0
    H = ScalarObservable(lambda z: float(z[0] ** 2 + np.sin(z[1])))
    assert verify_casimir(J_c, H, rng.normal(size=(10, 2))) > 1e-3
    C = ScalarObservable(lambda z: 0.5 * float(z @ z), lambda z: z)
    assert verify_casimir(so3, C, rng.normal(size=(10, 3))) < 1e-14
    with pytest.raises(ValueError):
        verify_casimir(J_c, H, [])


def test_rhs_examples(J_c):
    osc = PoissonSystem(J_c, ScalarObservable.quadratic(np.eye(2)))
    np.testing.assert_allclose(rhs(osc, [1.0, 0.0]), [0.0, -1.0])
    free = PoissonSystem(J_c, ScalarObservable(lambda z: 0.5 * z[1] ** 2, lambda z: np.array([0.0, z[1]])))
    np.testing.assert_allclose(rhs(free, [0.3, 2.0]), [2.0, 0.0])


def test_energy_casimir_vector_field_identity(gc, rng):
    C = gc.casimirs["mu"]
    shifted = PoissonSystem(gc.J, energy_casimir_shift(gc.H, C, 2.5))
    for z in rng.uniform(0.1, 1.0, size=(100, 6)):
        np.testing.assert_allclose(rhs(shifted, z), rhs(gc, z), rtol=0, atol=1e-10)


def test_energy_casimir_shift_values(gc, rng):
    C = gc.casimirs["mu"]
    z = rng.uniform(0.1, 1.0, size=6)
    assert energy_casimir_shift(gc.H, C, 0.0)(z) == gc.H(z)
    assert energy_casimir_shift(gc.H, C, 1.7)(z) == pytest.approx(gc.H(z) - 1.7 * C(z))


# -- evolution -------------------------------------------------------------------------

def oscillator(J_c):
    return PoissonSystem(J_c, ScalarObservable.quadratic(np.eye(2), "H"))


def test_oscillator_period_returns(J_c):
    errs = []
    for dt in (2 * np.pi / 200, 2 * np.pi / 400):
        tr = evolve(oscillator(J_c), [1.0, 0.0], 2 * np.pi, dt)
        errs.append(np.linalg.norm(tr.final_state - [1.0, 0.0]))
    assert errs[0] < 1e-7
    assert 12 < errs[0] / errs[1] < 20


def test_free_particle_momentum_constant(J_c):
    free = PoissonSystem(J_c, ScalarObservable(lambda z: 0.5 * z[1] ** 2, lambda z: np.array([0.0, z[1]])),
                         {"p": ScalarObservable.coordinate(1)})
    tr = evolve(free, [0.0, 1.3], 5.0, 0.1)
    assert casimir_drift(tr, "p") == 0.0
    assert tr.final_state[0] == pytest.approx(6.5)


def test_energy_drift_fourth_order(J_c):
    # a particle crossing a potential hill: no periodic cancellation of the error
    def grad(z):
        return np.array([-2 * np.tanh(z[0]) / np.cosh(z[0]) ** 2, z[1]])

    sys_ = PoissonSystem(J_c, ScalarObservable(lambda z: 0.5 * z[1] ** 2 + 1 / np.cosh(z[0]) ** 2, grad))
    d = [casimir_drift(evolve(sys_, [-4.0, 1.6], 6.0, dt), "energy") for dt in (0.1, 0.05)]
    assert d[0] > 0
    assert 12 < d[0] / d[1] < 20


def test_integrate_divergence():
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(DivergenceError) as exc:
            integrate(lambda t, y: y ** 2, [10.0], 10.0, 0.05)
    assert 0 < exc.value.last_time < 10.0


def test_casimir_drift_unknown_key(J_c):
    tr = evolve(oscillator(J_c), [1.0, 0.0], 1.0, 0.1)
    with pytest.raises(KeyError):
        casimir_drift(tr, "nope")


# -- equilibria ---------------------------------------------------------------------------

def test_equilibrium_quadratic():
    rep = find_equilibrium(ScalarObservable.quadratic(np.eye(3)), [0.4, -1.0, 2.0])
    np.testing.assert_allclose(rep.point, 0.0, atol=1e-10)
    assert (rep.n_positive, rep.n_negative) == (3, 0)


def test_equilibrium_double_well():
    H = ScalarObservable(lambda z: float(-z[0] ** 2 / 2 + z[0] ** 4 / 4),
                         lambda z: np.array([-z[0] + z[0] ** 3]))
    # full Newton from 0.5 overshoots to the mirror well; a guess on the right side finds +1
    rep = find_equilibrium(H, [0.5])
    assert abs(rep.point[0]) == pytest.approx(1.0, abs=1e-10)
    assert find_equilibrium(H, [0.8]).point[0] == pytest.approx(1.0, abs=1e-10)
    assert rep.n_positive == 1


def test_equilibrium_reduced_tearing():
    c, D = -0.3, 0.7
    H = ScalarObservable.quadratic(np.diag([c, D]))
    rep = find_equilibrium(H, [0.2, -0.1])
    np.testing.assert_allclose(rep.point, 0.0, atol=1e-10)
    assert (rep.n_positive, rep.n_negative) == (1, 1)


def test_equilibrium_degenerate_and_nonconvergent():
    flat = ScalarObservable(lambda z: float(z[0] ** 4), lambda z: np.array([4 * z[0] ** 3]))
    with pytest.raises(DegenerateEquilibrium):
        find_equilibrium(ScalarObservable.quadratic(np.diag([1.0, 0.0])), [0.3, 0.2])
    with pytest.raises((DegenerateEquilibrium, NonConvergenceError)):
        find_equilibrium(flat, [1.0], max_iter=5)
