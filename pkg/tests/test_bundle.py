import numpy as np
import pytest
from scipy.linalg import expm

from hadwave import bundle as bd
from hadwave import geometry as geo
from hadwave.errors import GridTooCoarse, UnsupportedDimension
from hadwave.grids import SampledDistribution

S1 = np.array([[0, 1], [1, 0]], dtype=complex)
S2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
S3 = np.array([[1, 0], [0, -1]], dtype=complex)


def minkowski(m):
    return geo.build_metric("minkowski", m)


# ---------------------------------------------------------------------------
# gamma matrices
# ---------------------------------------------------------------------------

def eta_diag(m):
    return np.array([1.0] + [-1.0] * (m - 1))


@pytest.mark.parametrize("m", [3, 4])
def test_clifford_relations(m):
    gammas = bd.make_gamma_matrices(m)
    r = gammas[0].shape[0]
    eta = eta_diag(m)
    for a in range(m):
        for b in range(m):
            anti = gammas[a] @ gammas[b] + gammas[b] @ gammas[a]
            want = 2.0 * (eta[a] if a == b else 0.0) * np.eye(r)
            assert np.max(np.abs(anti - want)) < 1e-15


@pytest.mark.parametrize("m", [3, 4])
def test_adjoint_and_majorana_conditions(m):
    gammas = bd.make_gamma_matrices(m)
    assert np.max(np.abs(gammas[0].conj().T - gammas[0])) < 1e-15
    for k in range(1, m):
        assert np.max(np.abs(gammas[k].conj().T + gammas[k])) < 1e-15
    for g in gammas:
        # purely imaginary entries: entrywise conjugate flips the sign
        assert np.max(np.abs(np.conj(g) + g)) < 1e-15


def test_three_dim_set_is_the_sigma_basis():
    g0, g1, g2 = bd.make_gamma_matrices(3)
    assert np.array_equal(g0, S2)
    assert np.array_equal(g1, 1j * S1)
    assert np.array_equal(g2, 1j * S3)


@pytest.mark.parametrize("m", [2, 5])
def test_unsupported_dimension(m):
    with pytest.raises(UnsupportedDimension):
        bd.make_gamma_matrices(m)


# ---------------------------------------------------------------------------
# wave operator application
# ---------------------------------------------------------------------------

def test_flat_scalar_on_squared_time_coordinate():
    P = bd.scalar_wave_bundle(minkowski(4))
    out = bd.apply_wave_operator(P, lambda x: np.array([x[0] ** 2]),
                                 np.array([0.05, -0.1, 0.2, 0.0]))
    assert abs(out[0] - 2.0) < 1e-8


def test_flat_scalar_on_constant():
    P = bd.scalar_wave_bundle(minkowski(4))
    out = bd.apply_wave_operator(P, lambda x: np.array([3.7]),
                                 np.array([0.0, 0.1, -0.2, 0.3]))
    # stencil cancellation noise scales like eps / h^2
    assert abs(out[0]) < 1e-9


def _rank2_test_bundle():
    """r=2 bundle with x-dependent A and constant B on the conformal metric."""
    def A(x):
        out = np.zeros((3, 2, 2), dtype=complex)
        out[0] = np.array([[0.3, x[1]], [0.0, 0.1]])
        out[1] = np.array([[0.0, -0.2], [x[0], 0.5]])
        out[2] = np.array([[x[2], 0.0], [0.1, -0.3]])
        return out

    def B(x):
        return np.array([[1.0, 0.25], [-0.5, 2.0]], dtype=complex)

    return bd.BundleModel(r=2, A=A, B=B, Gamma_conj=np.eye(2),
                          h=lambda x: np.eye(2))


def test_rank2_operator_against_symbolic_oracle():
    sympy = pytest.importorskip("sympy")
    model = geo.build_metric("conformal", 3)
    P = bd.WaveOperator(base=model, bundle=_rank2_test_bundle())

    x0, x1, x2 = sympy.symbols("x0 x1 x2", real=True)
    xs = (x0, x1, x2)
    a = 1 + x0 ** 2
    g = sympy.diag(a ** 2, -a ** 2, -a ** 2)
    ginv = g.inv()
    f = sympy.Matrix([sympy.sin(x0) + x1 ** 2, x0 * x1 * x2])
    A0 = sympy.Matrix([[sympy.Rational(3, 10), x1], [0, sympy.Rational(1, 10)]])
    A1 = sympy.Matrix([[0, sympy.Rational(-1, 5)], [x0, sympy.Rational(1, 2)]])
    A2 = sympy.Matrix([[x2, 0], [sympy.Rational(1, 10), sympy.Rational(-3, 10)]])
    Bm = sympy.Matrix([[1, sympy.Rational(1, 4)], [sympy.Rational(-1, 2), 2]])

    expr = sympy.zeros(2, 1)
    for mu in range(3):
        for nu in range(3):
            expr += ginv[mu, nu] * sympy.diff(f, xs[mu], xs[nu])
    for nu, Anu in enumerate((A0, A1, A2)):
        expr += Anu * sympy.diff(f, xs[nu])
    expr += Bm * f

    pt = {x0: 0.1, x1: -0.2, x2: 0.15}
    want = np.array([complex(expr[i].subs(pt)) for i in range(2)])

    def f_num(x):
        return np.array([np.sin(x[0]) + x[1] ** 2, x[0] * x[1] * x[2]],
                        dtype=complex)

    got = bd.apply_wave_operator(P, f_num, np.array([0.1, -0.2, 0.15]))
    assert np.max(np.abs(got - want)) < 1e-7


def test_gamma_invariance_of_real_wave_operator():
    P = bd.scalar_wave_bundle(geo.build_metric("ultrastatic-bump", 3), mass=0.4)
    assert bd.gamma_invariance_residual(P, rng=7) < 1e-8


# ---------------------------------------------------------------------------
# induced connection
# ---------------------------------------------------------------------------

def test_flat_connection_is_plain_derivative():
    P = bd.scalar_wave_bundle(minkowski(3))
    v = np.array([0.7, -0.3, 0.2])
    x = np.array([0.1, 0.05, -0.2])
    out = bd.induced_connection(P, v, lambda x: np.array([np.sin(x[0]) * x[1]]), x)
    want = v[0] * np.cos(x[0]) * x[1] + v[1] * np.sin(x[0])
    assert abs(out[0] - want) < 1e-10


def test_scalar_box_has_vanishing_connection_coefficients():
    P = bd.scalar_wave_bundle(geo.build_metric("conformal", 3))
    omega = bd.connection_coefficients(P, np.array([0.2, -0.1, 0.3]))
    assert np.max(np.abs(omega)) < 1e-13


def test_defining_identity_on_curved_metric():
    # 2 nabla_{grad phi} f = P(phi f) - phi P f - (box phi) f
    model = geo.build_metric("conformal", 3)
    P = bd.WaveOperator(base=model, bundle=_rank2_test_bundle())
    box = bd.scalar_wave_bundle(model)
    rng = np.random.default_rng(3)

    for _ in range(3):
        cf = rng.normal(size=(2, 4))

        def f(x, cf=cf):
            u = np.array([1.0, np.sin(x[0]), x[1] * x[2], x[0] ** 2])
            return (cf @ u).astype(complex)

        kp = rng.normal(size=3)

        def phi(x, kp=kp):
            return np.cos(kp @ x) + 0.5 * x[1] ** 2

        x = np.array([0.15, -0.1, 0.2]) + 0.1 * rng.normal(size=3)

        grad_phi = np.linalg.inv(model.metric(x)) @ (
            np.array([0.0, 0.0, 0.0])
            + np.array([-kp[0] * np.sin(kp @ x),
                        -kp[1] * np.sin(kp @ x) + x[1],
                        -kp[2] * np.sin(kp @ x)]))
        box_phi = bd.apply_wave_operator(
            box, lambda xx: np.array([phi(xx)]), x)[0]
        lhs = 2.0 * bd.induced_connection(P, grad_phi, f, x)
        rhs = (bd.apply_wave_operator(P, lambda xx: phi(xx) * f(xx), x)
               - phi(x) * bd.apply_wave_operator(P, f, x)
               - box_phi * f(x))
        assert np.max(np.abs(lhs - rhs)) < 1e-6


def test_connection_linear_in_direction():
    model = geo.build_metric("conformal", 3)
    P = bd.WaveOperator(base=model, bundle=_rank2_test_bundle())
    x = np.array([0.1, 0.2, -0.1])

    def f(x):
        return np.array([x[0] * x[1], np.cos(x[2])], dtype=complex)

    v = np.array([1.0, 0.5, -0.25])
    w = np.array([-0.3, 0.8, 0.1])
    lhs = bd.induced_connection(P, 2.0 * v + 0.7 * w, f, x)
    rhs = (2.0 * bd.induced_connection(P, v, f, x)
           + 0.7 * bd.induced_connection(P, w, f, x))
    assert np.max(np.abs(lhs - rhs)) < 1e-12


# ---------------------------------------------------------------------------
# parallel transport
# ---------------------------------------------------------------------------

def _straight_path(model, x0, u0, t_end=1.0):
    return geo.integrate_geodesic(model, x0, u0, (0.0, t_end))


def test_transport_trivial_for_vanishing_connection():
    P = bd.scalar_wave_bundle(minkowski(3))
    path = _straight_path(P.base, np.array([-0.3, -0.2, 0.0]),
                          np.array([0.5, 0.3, 0.1]))
    vals = bd.parallel_transport(P, path, np.array([1.0 + 2.0j]))
    assert np.max(np.abs(vals - (1.0 + 2.0j))) < 1e-12


def _constant_A_bundle(A_mats):
    def A(x, _A=A_mats):
        return np.array(_A, dtype=complex)

    return bd.BundleModel(r=A_mats[0].shape[0], A=A,
                          B=lambda x: np.zeros_like(A_mats[0]),
                          Gamma_conj=np.eye(A_mats[0].shape[0]),
                          h=lambda x: np.eye(A_mats[0].shape[0]))


def test_transport_matches_matrix_exponential():
    # flat metric, constant A: omega_rho = g_{rho lam} A^lam / 2 and the
    # transport along a straight line is exp(-t u^rho omega_rho)
    model = minkowski(3)
    A_mats = [0.4 * S1 + 0.1j * S2, 0.3 * S3, 0.2 * S1 - 0.5 * S3]
    P = bd.WaveOperator(base=model, bundle=_constant_A_bundle(A_mats))
    u0 = np.array([0.5, 0.2, -0.3])
    path = _straight_path(model, np.array([-0.2, -0.1, 0.1]), u0, 0.8)
    v0 = np.array([1.0, -0.5j])
    vals = bd.parallel_transport(P, path, v0)
    eta = np.diag([1.0, -1.0, -1.0])
    omega = 0.5 * np.einsum("rl,lab->rab", eta, np.array(A_mats))
    gen = np.einsum("r,rab->ab", u0, omega)
    want = expm(-0.8 * gen) @ v0
    assert np.max(np.abs(vals[-1] - want)) < 1e-9


def test_round_trip_returns_start():
    model = geo.build_metric("ultrastatic-bump", 3)
    A_mats = [0.4 * S1, 0.3 * S2, -0.2 * S3]
    P = bd.WaveOperator(base=model, bundle=_constant_A_bundle(A_mats))
    path = geo.integrate_geodesic(model, np.array([-0.2, -0.3, 0.1]),
                                  np.array([0.6, 0.4, -0.2]), (0.0, 0.7))
    v0 = np.array([0.3 + 1.0j, -0.7])
    fwd = bd.parallel_transport(P, path, v0)
    back = geo.GeodesicPath(t=path.t[-1] - path.t[::-1], x=path.x[::-1],
                            u=-path.u[::-1], chart_exit=False,
                            stats=path.stats)
    rt = bd.parallel_transport(P, back, fwd[-1])
    assert np.max(np.abs(rt[-1] - v0)) < 1e-8


def test_concatenated_transport_matches_single_solve():
    model = geo.build_metric("ultrastatic-bump", 3)
    A_mats = [0.4 * S1, 0.3 * S2, -0.2 * S3]
    P = bd.WaveOperator(base=model, bundle=_constant_A_bundle(A_mats))
    x0, u0 = np.array([-0.2, -0.3, 0.1]), np.array([0.6, 0.4, -0.2])
    whole = geo.integrate_geodesic(model, x0, u0, (0.0, 0.8))
    first = geo.integrate_geodesic(model, x0, u0, (0.0, 0.4))
    second = geo.integrate_geodesic(model, first.x[-1], first.u[-1],
                                    (0.4, 0.8))
    v0 = np.array([1.0, 0.25j])
    via_half = bd.parallel_transport(
        P, second, bd.parallel_transport(P, first, v0)[-1])[-1]
    direct = bd.parallel_transport(P, whole, v0)[-1]
    assert np.max(np.abs(via_half - direct)) < 1e-8


def test_transport_against_dense_step_oracle():
    model = geo.build_metric("ultrastatic-bump", 3)

    def A(x):
        out = np.zeros((3, 2, 2), dtype=complex)
        out[0] = 0.5 * S1 * np.cos(x[1])
        out[1] = 0.4 * S2 + 0.2 * x[0] * S3
        out[2] = 0.3 * S3
        return out

    bun = bd.BundleModel(r=2, A=A, B=lambda x: np.zeros((2, 2)),
                         Gamma_conj=np.eye(2), h=lambda x: np.eye(2))
    P = bd.WaveOperator(base=model, bundle=bun)
    path = geo.integrate_geodesic(model, np.array([-0.2, 0.1, -0.1]),
                                  np.array([0.6, -0.3, 0.4]), (0.0, 0.75))
    v0 = np.array([0.8, -0.4 + 0.3j])
    got = bd.parallel_transport(P, path, v0)[-1]

    # fixed-step RK4 along spline-interpolated path data
    from scipy.interpolate import CubicSpline
    xs = CubicSpline(path.t, path.x)
    us = CubicSpline(path.t, path.u)

    def rhs(t, v):
        om = bd.connection_coefficients(P, xs(t))
        return -np.einsum("n,nab,b->a", us(t), om, v)

    n, v = 4000, v0.astype(complex)
    h = (path.t[-1] - path.t[0]) / n
    t = path.t[0]
    for _ in range(n):
        k1 = rhs(t, v)
        k2 = rhs(t + h / 2, v + h / 2 * k1)
        k3 = rhs(t + h / 2, v + h / 2 * k2)
        k4 = rhs(t + h, v + h * k3)
        v = v + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
    assert np.max(np.abs(got - v)) < 1e-6


def test_transport_preserves_hermitean_form():
    # flat metric, A anti-hermitean w.r.t. h = identity
    model = minkowski(3)
    A_mats = [1j * S1, 0.5j * S3, 1j * S2]
    P = bd.WaveOperator(base=model, bundle=_constant_A_bundle(A_mats))
    path = _straight_path(model, np.array([-0.3, 0.0, 0.0]),
                          np.array([0.7, 0.2, -0.1]), 0.9)
    v0 = np.array([0.6, 0.8j])
    vals = bd.parallel_transport(P, path, v0)
    norms = np.einsum("ta,ta->t", np.conj(vals), vals).real
    assert np.max(np.abs(norms - norms[0])) < 1e-8


# ---------------------------------------------------------------------------
# Dirac operators
# ---------------------------------------------------------------------------

def test_flat_massless_dirac_kills_constants():
    D = bd.make_dirac(minkowski(3), mass=0.0)
    out = bd.dirac_apply(D, bd.RIGHT, lambda x: np.array([1.0, -2.0]),
                         np.array([0.0, 0.1, 0.0]))
    assert np.max(np.abs(out)) < 1e-12


def test_flat_massive_dirac_on_constant_is_mass_term():
    D = bd.make_dirac(minkowski(3), mass=2.0)
    c = np.array([0.5, 1.5])
    x = np.array([0.1, 0.0, -0.1])
    out_r = bd.dirac_apply(D, bd.RIGHT, lambda x: c, x)
    out_l = bd.dirac_apply(D, bd.LEFT, lambda x: c, x)
    assert np.max(np.abs(out_r - 2j * c)) < 1e-12
    assert np.max(np.abs(out_l + 2j * c)) < 1e-12


@pytest.mark.parametrize("m", [3, 4])
def test_flat_dirac_on_plane_wave(m):
    D = bd.make_dirac(minkowski(m), mass=0.6)
    gammas = D.gammas
    k = np.array([0.8, -0.5, 0.3, 0.2][:m])
    c = np.arange(1, D.rank + 1).astype(complex)

    def f(x):
        return c * np.exp(1j * (k @ x))

    x = np.zeros(m)
    x[1] = 0.1
    got = bd.dirac_apply(D, bd.RIGHT, f, x)
    phase = np.exp(1j * (k @ x))
    want = (1j * sum(k[a] * gammas[a] for a in range(m)) @ c
            + 0.6j * c) * phase
    assert np.max(np.abs(got - want)) < 1e-6


def test_dirac_anticommutes_with_conjugation():
    model = geo.build_metric("conformal", 3)
    D = bd.make_dirac(model, mass=0.8)
    rng = np.random.default_rng(11)
    for _ in range(3):
        cf = rng.normal(size=(2, 3)) + 1j * rng.normal(size=(2, 3))

        def f(x, cf=cf):
            u = np.array([1.0, np.sin(x[0] + x[2]), x[1] ** 2])
            return cf @ u

        x = np.array([0.1, -0.15, 0.2]) + 0.05 * rng.normal(size=3)
        lhs = np.conj(bd.dirac_apply(D, bd.RIGHT, f, x))
        rhs = -bd.dirac_apply(D, bd.RIGHT, lambda xx: np.conj(f(xx)), x)
        assert np.max(np.abs(lhs - rhs)) < 1e-8


def test_spin_connection_vanishes_in_flat_frame():
    D = bd.make_dirac(minkowski(4), mass=0.0)
    Om = bd.spin_connection(D, np.array([0.05, 0.1, -0.1, 0.2]))
    assert np.max(np.abs(Om)) < 1e-12


def test_spin_connection_anti_selfadjoint_wrt_form():
    model = geo.build_metric("ultrastatic-bump", 3)
    D = bd.make_dirac(model, mass=0.0)
    g0 = D.gammas[0]
    for x in (np.array([0.1, 0.3, -0.2]), np.array([-0.2, 0.1, 0.4])):
        Om = bd.spin_connection(D, x)
        for mu in range(3):
            res = Om[mu].conj().T @ g0 + g0 @ Om[mu]
            assert np.max(np.abs(res)) < 1e-8


def test_dirac_factorization_flat():
    # D_right D_left = box + mass^2 exactly in the flat frame
    model = minkowski(3)
    D = bd.make_dirac(model, mass=0.7)
    cf = np.array([[0.5, -0.2, 0.8], [0.1, 0.9, -0.3]])

    def f(x, cf=cf):
        u = np.array([np.sin(x[0]) * x[1], np.cos(x[2]), x[0] ** 2 * x[2]])
        return (cf @ u).astype(complex)

    def box_f(x, cf=cf):
        u = np.array([-np.sin(x[0]) * x[1], np.cos(x[2]), 2.0 * x[2]])
        return cf @ u

    x = np.array([0.12, -0.2, 0.25])

    def inner(xx):
        return bd.dirac_apply(D, bd.LEFT, f, xx)

    got = bd.dirac_apply(D, bd.RIGHT, inner, x)
    want = box_f(x) + 0.7 ** 2 * f(x)
    assert np.max(np.abs(got - want)) < 1e-6


def test_derived_wave_operator_flat_coefficients():
    D = bd.make_dirac(minkowski(3), mass=0.7)
    P = bd.dirac_wave_operator(D)
    x = np.array([0.1, -0.05, 0.2])
    assert np.max(np.abs(P.bundle.A(x))) < 1e-7
    assert np.max(np.abs(P.bundle.B(x) - 0.49 * np.eye(2))) < 1e-7


def test_factorization_matches_derived_wave_operator_curved():
    model = geo.build_metric("conformal", 3)
    D = bd.make_dirac(model, mass=0.3)
    P = bd.dirac_wave_operator(D)
    rng = np.random.default_rng(5)
    cf = rng.normal(size=(2, 4))

    def f(x, cf=cf):
        u = np.array([np.sin(x[0] + 0.5 * x[1]), x[1] * x[2],
                      np.cos(x[2]), x[0] ** 2])
        return (cf @ u).astype(complex)

    def inner(xx):
        return bd.dirac_apply(D, bd.LEFT, f, xx)

    x = np.array([0.1, 0.15, -0.2])
    got = bd.dirac_apply(D, bd.RIGHT, inner, x)
    want = bd.apply_wave_operator(P, f, x)
    assert np.max(np.abs(got - want)) < 1e-6


def test_derived_connection_is_spin_connection():
    model = geo.build_metric("conformal", 3)
    D = bd.make_dirac(model, mass=0.3)
    P = bd.dirac_wave_operator(D)
    x = np.array([0.12, -0.1, 0.15])
    omega = bd.connection_coefficients(P, x)
    Om = bd.spin_connection(D, x)
    assert np.max(np.abs(omega - Om)) < 1e-5


def test_principal_symbol_is_scalar():
    # plane-wave probes: hbar^2 e^{-i k x / hbar} (D_r D_l f) tends to
    # -g^{mu nu} k_mu k_nu * Id; Richardson in hbar kills the O(hbar) term
    model = geo.build_metric("conformal", 3)
    D = bd.make_dirac(model, mass=0.3)
    x = np.array([0.1, 0.05, -0.1])
    k = np.array([0.9, 0.4, -0.3])
    ginv = np.linalg.inv(model.metric(x))
    want = -float(k @ ginv @ k)

    def symbol(hbar):
        cols = []
        for b in range(2):
            c = np.zeros(2, dtype=complex)
            c[b] = 1.0

            def f(xx, c=c):
                return c * np.exp(1j * (k @ xx) / hbar)

            def inner(xx):
                return bd.dirac_apply(D, bd.LEFT, f, xx)

            out = bd.dirac_apply(D, bd.RIGHT, inner, x)
            cols.append(out * hbar ** 2 * np.exp(-1j * (k @ x) / hbar))
        return np.stack(cols, axis=-1)

    M = 2.0 * symbol(0.025) - symbol(0.05)
    assert np.max(np.abs(M - want * np.eye(2))) < 0.01 * abs(want)


# ---------------------------------------------------------------------------
# Dirac layer on sampled kernels
# ---------------------------------------------------------------------------

def test_parametrix_factor_on_plane_wave_grid():
    D = bd.make_dirac(minkowski(3), mass=0.5)
    k = np.array([0.7, -0.4, 0.2])
    c = np.array([[1.0, 0.3], [-0.2j, 0.8]])

    kern = SampledDistribution.from_callable(
        lambda z: np.exp(1j * np.einsum("...d,d->...", z, k))[..., None, None] * c,
        origin=(-0.1, 0.2, -0.1), spacing=(0.01, 0.01, 0.01),
        shape=(12, 12, 12))
    out = bd.dirac_parametrix_factor(D, kern)
    mesh = kern.meshgrid()
    phase = np.exp(1j * np.einsum("...d,d->...", mesh, k))
    gk = sum(k[a] * D.gammas[a] for a in range(3))
    want = phase[..., None, None] * ((1j * gk + 0.5j * np.eye(2)) @ c)
    assert np.max(np.abs(out.values - want)) < 1e-4


def test_parametrix_factor_scalar_kernel_closed_form():
    # flat massless m=3: scalar kernel (1/2pi) s^{-1/2} on a spacelike patch
    # maps to (1/2pi) s^{-3/2} z_mu gamma^mu
    D = bd.make_dirac(minkowski(3), mass=0.0)

    def s_of(z):
        return -(z[..., 0] ** 2 - z[..., 1] ** 2 - z[..., 2] ** 2)

    kern = SampledDistribution.from_callable(
        lambda z: (0.5 / np.pi) * s_of(z) ** -0.5,
        origin=(-0.05, 0.8, -0.05), spacing=(0.01, 0.01, 0.01),
        shape=(11, 12, 11))
    out = bd.dirac_parametrix_factor(D, kern)
    mesh = kern.meshgrid()
    z_lower = mesh * np.array([1.0, -1.0, -1.0])  # eta_{mu nu} z^nu
    gz = np.einsum("...m,mab->...ab", z_lower, np.stack(D.gammas))
    want = (0.5 / np.pi) * s_of(mesh)[..., None, None] ** -1.5 * gz
    assert np.max(np.abs(out.values - want)) < 1e-4


def test_parametrix_factor_constant_kernel_massless():
    D = bd.make_dirac(minkowski(3), mass=0.0)
    kern = SampledDistribution(origin=(0.0, 0.0, 0.0),
                               spacing=(0.05, 0.05, 0.05),
                               values=np.full((8, 8, 8), 2.5 + 0j))
    out = bd.dirac_parametrix_factor(D, kern)
    assert np.max(np.abs(out.values)) < 1e-12


def test_parametrix_factor_linear_in_kernel():
    D = bd.make_dirac(minkowski(3), mass=0.4)
    rng = np.random.default_rng(2)
    v1 = rng.normal(size=(8, 8, 8, 2, 2)) + 1j * rng.normal(size=(8, 8, 8, 2, 2))
    v2 = rng.normal(size=(8, 8, 8, 2, 2))
    mk = lambda v: SampledDistribution(origin=(0, 0, 0),
                                       spacing=(0.05, 0.05, 0.05), values=v)
    lhs = bd.dirac_parametrix_factor(D, mk(2.0 * v1 + v2)).values
    rhs = (2.0 * bd.dirac_parametrix_factor(D, mk(v1)).values
           + bd.dirac_parametrix_factor(D, mk(v2)).values)
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_parametrix_factor_grid_too_coarse():
    D = bd.make_dirac(minkowski(3), mass=0.0)
    kern = SampledDistribution(origin=(0.0, 0.0, 0.0),
                               spacing=(0.1, 0.1, 0.1),
                               values=np.zeros((5, 8, 8)))
    with pytest.raises(GridTooCoarse):
        bd.dirac_parametrix_factor(D, kern)
