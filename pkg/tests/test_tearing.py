import numpy as np
import pytest

from casimirkit import DomainError, ResonantMultiplierError
from casimirkit.slab import SlabGeometry, beltrami_solve, curl_eigensolve
from casimirkit.tearing import (
    ExtendedTearingState,
    ReducedTearingParams,
    TearingProblem,
    K_mu_apply,
    classify_stability,
    coercivity_form,
    energy_scale,
    extended_evolve,
    extended_matrix,
    extended_rhs,
    fitted_class,
    gamma_overlap,
    ideal_evolve,
    linearized_matrix,
    linearized_rhs,
    phase_aligned,
    qdot_comparison,
    lowest_eigenpair,
    reduced_evolve,
    relative_drift,
    rk4_propagator,
    slab_instance,
    stability_scan,
    tearing_stationary,
)


@pytest.fixture(scope="module")
def problem():
    return slab_instance(N=64)


@pytest.fixture(scope="module")
def spectrum(problem):
    sp = problem.space
    return curl_eigensolve(sp.geometry, sp.ky, sp.kz, 6)


def rand_coeffs(n, rng):
    return rng.normal(size=n) + 1j * rng.normal(size=n)


def smooth_field(problem):
    sp = problem.space
    x = sp.geometry.centers
    a = sp.geometry.a
    f = np.cos(0.5 * np.pi * x / a) * (1 + 0.3 * np.sin(x))
    g = 0.4 * np.cos(1.5 * np.pi * x / a)
    return np.concatenate([f, g]).astype(complex)


# -- K operator ---------------------------------------------------------------------------

def test_K_examples(spectrum):
    sp = spectrum.space
    w = spectrum.eigenfield(0)
    lam = spectrum.eigenvalues[0]
    np.testing.assert_allclose(K_mu_apply(w, 0.0).coeffs, w.coeffs)
    np.testing.assert_allclose(K_mu_apply(w, 0.3).coeffs, (1 - 0.3 / lam) * w.coeffs, atol=1e-12)
    assert sp.norm(K_mu_apply(w, lam).coeffs) < 1e-12
    np.testing.assert_allclose(sp.K_matrix(0.3) @ w.coeffs, sp.K_apply(w.coeffs, 0.3), atol=1e-12)


# -- ideal linearized dynamics -----------------------------------------------------------------

def test_rhs_examples(rng):
    g = SlabGeometry(N=64)
    spec = curl_eigensolve(g, 0.0, 0.5, 2)
    j, lam = spec.smallest_positive()
    pr = TearingProblem.build(g, beltrami_solve(np.pi, lam, 1.0, 0.0), 0.0, 0.5)
    n = pr.space.dim
    dV, dB = linearized_rhs(pr, np.zeros(n), spec.eigenfield(j).coeffs)
    assert np.max(np.abs(dV)) < 1e-10 and np.max(np.abs(dB)) == 0.0
    B = rand_coeffs(n, rng)
    dV, dB = linearized_rhs(pr, np.zeros(n), B)
    assert np.max(np.abs(dB)) == 0.0
    sp = pr.space
    scale = np.max(np.abs(dV)) / sp.geometry.h
    assert np.max(np.abs(sp.divergence(dV))) < 1e-10 * scale


def test_matrix_matches_rhs(problem, rng):
    n = problem.space.dim
    V, B = rand_coeffs(n, rng), rand_coeffs(n, rng)
    dV, dB = linearized_rhs(problem, V, B)
    np.testing.assert_allclose(linearized_matrix(problem) @ np.concatenate([V, B]), np.concatenate([dV, dB]),
                               atol=1e-10 * np.max(np.abs(dV)))


def test_T_adjoint(problem, rng):
    sp, ops = problem.space, problem.ops
    u, v = rand_coeffs(sp.dim, rng), rand_coeffs(sp.dim, rng)
    lhs = sp.inner(ops.T_apply(u), v)
    rhs = sp.inner(u, ops.T_adjoint_apply(v))
    assert abs(lhs - rhs) < 1e-12 * abs(lhs) * 1e3


def test_ideal_run_freezes_casimir(problem):
    n = problem.space.dim
    tr = ideal_evolve(problem, np.zeros(n), smooth_field(problem), 10.0, 0.05)
    assert relative_drift(tr, "C_b") < 1e-10
    assert relative_drift(tr, "energy") < 1e-6
    assert np.max(tr.monitors["div_B"]) < 1e-10 * np.linalg.norm(smooth_field(problem)) / problem.space.geometry.h


def test_ideal_energy_drift_at_least_fourth_order(problem):
    n = problem.space.dim
    d = [relative_drift(ideal_evolve(problem, np.zeros(n), smooth_field(problem), 10.0, dt), "energy")
         for dt in (0.1, 0.05)]
    assert d[0] / d[1] > 12


def test_orthogonal_data_stays_orthogonal(problem):
    n = problem.space.dim
    B0 = problem.project_parallel(smooth_field(problem))
    tr = ideal_evolve(problem, np.zeros(n), B0, 10.0, 0.05)
    assert np.max(np.abs(tr.monitors["C_b"])) < 1e-12 * problem.space.norm(B0)


def test_misaligned_surface_casimir_drift_first_order():
    # resonant surface off the cell centres: the discrete pairing is no longer an exact invariant
    drifts = []
    for N, dt in ((64, 0.1), (128, 0.05)):
        g = SlabGeometry(N=N)
        eq = beltrami_solve(np.pi, 0.5, 1.0, 0.0)
        x_d = np.pi / 2
        pr = TearingProblem.build(g, eq, 1.0, 1.0, x_dagger=x_d)
        assert abs(pr.b.offset) > 0.1 * g.h
        n = pr.space.dim
        tr = ideal_evolve(pr, np.zeros(n), smooth_field(pr), 5.0, dt)
        drifts.append(np.max(np.abs(tr.monitors["C_b"] - tr.monitors["C_b"][0])))
    assert drifts[0] / drifts[1] > 1.5


def test_rk4_propagator_matches_expansion(problem):
    A = linearized_matrix(problem)
    dt = 0.01
    R = rk4_propagator(A, dt)
    hA = dt * A
    expected = np.eye(A.shape[0]) + hA + hA @ hA / 2 + hA @ hA @ hA / 6 + hA @ hA @ hA @ hA / 24
    np.testing.assert_allclose(R, expected, atol=1e-13)


# -- tearing mode ---------------------------------------------------------------------------

def test_tearing_stationary_examples(problem):
    b = problem.b
    assert np.all(tearing_stationary(0.3, 0.0, b).coeffs == 0)
    np.testing.assert_allclose(tearing_stationary(0.0, 1.7, b).coeffs, 1.7 * b.coeffs)
    direct = tearing_stationary(0.5, 1.0, b, "direct")
    eigen = tearing_stationary(0.5, 1.0, b, "eigen")
    np.testing.assert_allclose(eigen.coeffs, direct.coeffs, atol=1e-8 * np.max(np.abs(direct.coeffs)))
    sp = b.space
    np.testing.assert_allclose(sp.K_apply(direct.coeffs, 0.5), b.coeffs, atol=1e-10)


def test_tearing_stationary_rejects_eigenvalue(problem, spectrum):
    with pytest.raises(ResonantMultiplierError):
        tearing_stationary(float(spectrum.eigenvalues[0]), 1.0, problem.b)
    with pytest.raises(ValueError):
        tearing_stationary(0.5, 1.0, problem.b, "other")


def test_gamma_overlap(problem):
    ge = lowest_eigenpair(problem.geometry)
    assert ge.mode == (0.0, 0.5)
    gam = gamma_overlap(ge.omega1, problem.b)
    assert 0 < gam <= problem.space.norm(ge.omega1.coeffs) + 1e-12
    other = slab_instance(N=64, mode=(1.0, 1.0))
    assert gamma_overlap(ge.omega1, other.b) == 0.0


def test_gamma_closed_form_and_refinement():
    # continuum: omega_1 has f = cos(x/2)/(2 sqrt(pi)); c_1 = sqrt(2/(k tanh(k a)))
    k, a = 0.5, np.pi
    exact = np.sqrt(2 / (k * np.tanh(k * a))) / (2 * np.sqrt(np.pi))
    vals = {}
    for N in (128, 256, 512):
        pr = slab_instance(N=N)
        vals[N] = gamma_overlap(lowest_eigenpair(pr.geometry, [(0.0, 0.5)]).omega1, pr.b)
    h = {N: 2 * np.pi / (N - 1) for N in vals}
    assert abs(vals[512] - exact) < 1e-5
    r1 = (h[128] ** 2 * vals[256] - h[256] ** 2 * vals[128]) / (h[128] ** 2 - h[256] ** 2)
    r2 = (h[256] ** 2 * vals[512] - h[512] ** 2 * vals[256]) / (h[256] ** 2 - h[512] ** 2)
    assert abs(r1 - r2) < 1e-6
    assert abs(r2 - exact) < 1e-6


def test_lowest_eigenpair_tie_goes_to_first():
    g = SlabGeometry(N=64)
    a = lowest_eigenpair(g, [(0.0, 0.5), (0.5, 0.0)])
    b = lowest_eigenpair(g, [(0.5, 0.0), (0.0, 0.5)])
    assert a.mode == (0.0, 0.5) and b.mode == (0.5, 0.0)
    with pytest.raises(DomainError):
        lowest_eigenpair(g, [])


def test_coercivity_form_sign(problem):
    ge = lowest_eigenpair(problem.geometry)
    lam = ge.lambda1
    for r in (0.5, 0.99, 1.01, 2.0):
        val = coercivity_form(ge.omega1, r * lam)
        assert np.sign(val) == np.sign(1 - r)
        assert val == pytest.approx(1 - r, abs=1e-10)


# -- extended dynamics ---------------------------------------------------------------------

def test_extended_frozen_limit(problem, rng):
    n = problem.space.dim
    V = rand_coeffs(n, rng)
    Bp = problem.project_parallel(rand_coeffs(n, rng))
    p = 0.7 - 0.2j
    s = ExtendedTearingState(V, Bp, p, 0.3)
    d = extended_rhs(problem, s, 0.0)
    assert d.p == 0.0
    dV, dB = linearized_rhs(problem, V, Bp + p * problem.b.coeffs)
    scale = max(np.max(np.abs(dV)), np.max(np.abs(dB)))
    # dV differs only by the b-component of K B, which T^dagger maps to zero
    np.testing.assert_allclose(d.V, dV, atol=1e-10 * scale)
    dB_total = d.B_par + d.p * problem.b.coeffs
    np.testing.assert_allclose(dB_total, problem.project_parallel(dB), atol=1e-10 * scale)
    assert abs(problem.casimir(dB)) < 1e-10 * scale


def test_extended_qdot_pairing(problem):
    n = problem.space.dim
    sp, bc = problem.space, problem.b.coeffs
    s = ExtendedTearingState(np.zeros(n), np.zeros(n), 1.0, 0.0)
    d = extended_rhs(problem, s, 0.8)
    assert d.q == pytest.approx(sp.inner(sp.K_apply(bc, problem.mu), bc), rel=1e-12)
    A = extended_matrix(problem, 0.8)
    np.testing.assert_allclose((A @ s.pack())[2 * n + 1], d.q, rtol=1e-12)


def test_qdot_single_mode_estimate(problem):
    ge = lowest_eigenpair(problem.geometry, [(problem.space.ky, problem.space.kz)])
    w = 0.7 * phase_aligned(ge.omega1, problem.b).coeffs
    n = problem.space.dim
    s = ExtendedTearingState(np.zeros(n), problem.project_parallel(w), problem.casimir(w), 0.0)
    assert qdot_comparison(problem, s, ge.lambda1).discrepancy < 1e-10
    # a bare kernel element is far from the eigenfield
    bare = qdot_comparison(problem, ExtendedTearingState(np.zeros(n), np.zeros(n), 1.0, 0.0), ge.lambda1)
    assert bare.discrepancy > 0.1


@pytest.mark.parametrize("D", [0.0, 1.0, -1.0])
def test_extended_run_conserves_energy(problem, D):
    n = problem.space.dim
    s0 = ExtendedTearingState(np.zeros(n), problem.project_parallel(0.1 * smooth_field(problem)), 1.0, 0.0)
    tr = extended_evolve(problem, s0, D, 20.0, 0.02)
    e = tr.monitors["energy"]
    # the form is indefinite for growing runs, so drift is measured against the size of its terms
    scale = np.array([energy_scale(problem, y, D) for y in tr.states])
    assert np.max(np.abs(e - e[0]) / scale) < 1e-6
    # roundoff in <B, b> scales with the field itself
    bnorm = np.linalg.norm(tr.states[:, n:2 * n], axis=1)
    assert np.max(tr.monitors["orth_b"] / np.maximum(bnorm, 1.0)) < 1e-12
    p = tr.monitors["p"]
    if D == 0.0:
        assert np.max(np.abs(p - p[0])) < 1e-12
    else:
        assert np.max(np.abs(p - p[0])) > 1e-3


# -- reduced model -------------------------------------------------------------------------

def test_reduced_examples():
    P = ReducedTearingParams(1.0, 1.0, 0.5, 2.0)
    tr = reduced_evolve(P, 1.0, 0.3, 5.0, 11)
    np.testing.assert_allclose(tr.monitors["q"], 0.3, atol=1e-14)
    np.testing.assert_allclose(tr.monitors["p"], 1.0 - 2.0 * 0.3 * tr.times, atol=1e-12)
    tr = reduced_evolve(ReducedTearingParams(3.0, 1.0, 0.5, 0.0), 1.0, 0.3, 5.0, 11)
    np.testing.assert_allclose(tr.monitors["p"], 1.0, atol=0)
    tr = reduced_evolve(ReducedTearingParams(2.0, 1.0, 1.0, 1.0), 1.0, 0.0, 3.0, 31)
    np.testing.assert_allclose(tr.monitors["p"], np.cosh(tr.times), rtol=1e-12)
    H = tr.monitors["H_p"]
    np.testing.assert_allclose(H, H[0], atol=1e-12 * np.max(np.abs(tr.states)) ** 2)


def test_reduced_params_validation():
    with pytest.raises(DomainError):
        ReducedTearingParams(1.0, 0.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        ReducedTearingParams(1.0, 1.0, -0.1, 1.0)


@pytest.mark.parametrize("ratio, D, klass", [(0.5, 1.0, "oscillatory"), (1.5, 1.0, "growing"),
                                             (0.5, -1.0, "growing"), (1.0, 1.0, "marginal"),
                                             (1.5, 0.0, "marginal"), (1.5, -1.0, "oscillatory")])
def test_classify_sign_rule(ratio, D, klass):
    P = ReducedTearingParams(ratio * 0.7, 0.7, 0.6, D)
    rep = classify_stability(P)
    assert rep.klass == klass
    if klass == "oscillatory":
        assert rep.frequency == pytest.approx(np.sqrt(D * P.c))
    if klass == "growing":
        assert rep.rate == pytest.approx(np.sqrt(-D * P.c))
    assert rep.energy_signature == int(np.sign(1 - ratio))


def test_fitted_class_and_rates():
    t = np.linspace(0, 40, 4001)
    f = fitted_class(t, np.cosh(0.3 * t))
    assert f.klass == "growing" and f.rate == pytest.approx(0.3, rel=1e-3)
    f = fitted_class(t, np.cos(1.3 * t))
    assert f.klass == "oscillatory" and f.frequency == pytest.approx(1.3, rel=1e-8)
    assert fitted_class(t, np.ones_like(t)).klass == "marginal"
    assert fitted_class(t, 1 - 0.01 * t).klass == "marginal"


def test_reduced_scan_full_agreement():
    ratios = np.linspace(0.5, 2.0, 21)
    rows = stability_scan(0.7071, 0.589, ratios, (-1.0, 0.5, 1.0))
    assert len(rows) == 63
    assert all(r.agree for r in rows)
    # D = -1 mirrors D = 1 away from the bifurcation point
    mirror = {"oscillatory": "growing", "growing": "oscillatory", "marginal": "marginal"}
    pos = [r for r in rows if r.D == 1.0]
    neg = [r for r in rows if r.D == -1.0]
    assert [mirror[r.predicted] for r in pos] == [r.predicted for r in neg]


def test_scan_row_at_bifurcation_is_marginal():
    row, = stability_scan(0.7071, 0.589, [1.0], [1.0])
    assert row.predicted == row.fitted == "marginal"


def test_scan_rejects_unknown_model():
    with pytest.raises(ValueError):
        stability_scan(1.0, 1.0, [1.0], [1.0], model="other")
