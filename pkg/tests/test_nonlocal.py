import numpy as np
import pytest

from stablehomog.ergodic import EmpiricalMeasure
from stablehomog.fields import FourierField, GridField, VectorField, grid_points
from stablehomog.jumpmaps import LinearJumpMap, MatrixField
from stablehomog.levy import StableMeasureSpec
from stablehomog.model import CoefficientModel
from stablehomog.nonlocal_solver import (
    GeneratorPlan,
    MaxPrincipleError,
    QuadratureBudgetError,
    compute_corrector,
    corrector_residual,
    get_plan,
    oscillatory_tail,
    radial_rule,
    resolvent_mc,
    solve_poisson_centered,
    solve_resolvent,
)

PSI_2PI = 52.63789013914324     # symbol of the standard 1d measure at 2 pi


def make_model(dim=1, alpha=1.5, b=None, c=None, e=None, sigma=None):
    if sigma is None:
        sigma = LinearJumpMap(1.0) if dim == 1 else \
            LinearJumpMap(MatrixField.constant(2, np.eye(2)))
    key = 1 if dim == 1 else (1, 1)
    return CoefficientModel(
        dim=dim,
        alpha=alpha,
        beta_target=0.5,
        drift_fast=b or VectorField.zero(dim),
        drift_slow=c or VectorField.zero(dim),
        potential_fast=e or FourierField.zero(dim),
        potential_slow=FourierField.zero(dim),
        initial_data=FourierField.from_harmonics(dim, cos={key: 1.0}),
        jump_map=sigma,
    )


# -- radial kernel ------------------------------------------------------------

def test_oscillatory_tail_matches_adaptive_quadrature():
    from scipy.integrate import quad

    for alpha in (1.2, 1.5, 1.8):
        for w in (0.03, 0.3, 3.0, 30.0, 300.0):
            re = quad(lambda r: r ** (-1 - alpha), 1, np.inf,
                      weight="cos", wvar=w, limit=800)[0]
            im = quad(lambda r: r ** (-1 - alpha), 1, np.inf,
                      weight="sin", wvar=w, limit=800)[0]
            val = oscillatory_tail(w, alpha)
            assert val.real == pytest.approx(re, abs=1e-8)
            assert val.imag == pytest.approx(im, abs=1e-8)


def test_oscillatory_tail_general_lower_limit():
    from scipy.integrate import quad

    alpha, w, lo = 1.5, 2.0, 0.25
    re = quad(lambda r: r ** (-1 - alpha), lo, np.inf,
              weight="cos", wvar=w, limit=800)[0]
    im = quad(lambda r: r ** (-1 - alpha), lo, np.inf,
              weight="sin", wvar=w, limit=800)[0]
    val = oscillatory_tail(w, alpha, lower=lo)
    assert val.real == pytest.approx(re, abs=1e-7)
    assert val.imag == pytest.approx(im, abs=1e-7)


def test_oscillatory_tail_symmetry_and_zero():
    vals = oscillatory_tail(np.array([0.0, 0.7, -0.7, 40.0, -40.0]), 1.5)
    assert vals[0] == pytest.approx(1.0 / 1.5)
    assert vals[2] == pytest.approx(np.conj(vals[1]))
    assert vals[4] == pytest.approx(np.conj(vals[3]))
    # scalar input stays scalar
    assert np.ndim(oscillatory_tail(1.0, 1.5)) == 0


def test_radial_rule_budget_guard():
    with pytest.raises(QuadratureBudgetError):
        radial_rule(2.0 / 64, 1.5, 1e6)
    rule = radial_rule(2.0 / 64, 1.5, 400.0)
    # weights integrate r^{-1-alpha} exactly on the covered interval
    total = rule.weights.sum()
    exact = (rule.r_inner ** -1.5 - 1.0) / 1.5
    assert total == pytest.approx(exact, rel=1e-12)


# -- generator application ----------------------------------------------------

def test_generator_annihilates_constants():
    plan = get_plan(make_model(), n=64)
    out = plan.apply(np.full(64, 3.7))
    assert np.abs(out).max() < 1e-10


def test_constant_coefficients_reproduce_symbol():
    m = make_model()
    plan = get_plan(m, n=64)
    x = grid_points(1, 64)[:, 0]
    u = np.cos(2 * np.pi * x)
    out = plan.apply(u)
    np.testing.assert_allclose(out, -PSI_2PI * u, atol=2e-5 * PSI_2PI)
    # higher mode against the measure symbol
    u2 = np.sin(4 * np.pi * x)
    psi2 = m.measure.symbol([4 * np.pi])[0]
    np.testing.assert_allclose(plan.apply(u2), -psi2 * u2, atol=1e-4 * psi2)


def test_symbol_error_decreases_under_refinement():
    m = make_model()
    errs = []
    for n in (32, 64, 128):
        plan = get_plan(m, n=n)
        x = grid_points(1, n)[:, 0]
        u = np.cos(2 * np.pi * x)
        errs.append(np.abs(plan.apply(u) + PSI_2PI * u).max())
    assert errs[1] < 0.5 * errs[0]
    assert errs[2] < 0.5 * errs[1]


def test_pure_drift_transport():
    m = make_model(b=VectorField.constant(1, 1.0), sigma=LinearJumpMap(0.0))
    plan = get_plan(m, n=64)
    x = grid_points(1, 64)[:, 0]
    u = np.sin(2 * np.pi * x)
    np.testing.assert_allclose(plan.apply(u), 2 * np.pi * np.cos(2 * np.pi * x),
                               atol=1e-10)


def test_two_dimensional_symbol():
    m = make_model(dim=2)
    plan = get_plan(m, n=16)
    pts = grid_points(2, 16)
    u = np.cos(2 * np.pi * (pts[:, 0] + pts[:, 1]))
    psi = m.measure.symbol([[2 * np.pi, 2 * np.pi]])[0]
    np.testing.assert_allclose(plan.apply(u), -psi * u, atol=2e-4 * psi)
    assert np.abs(plan.apply(np.ones(256))).max() < 1e-10


def test_assembled_matrix_matches_apply():
    for sigma in (None,
                  LinearJumpMap(FourierField.from_harmonics(
                      1, const=1.0, sin={1: 0.5}))):
        m = make_model(sigma=sigma)
        plan = get_plan(m, n=64)
        gm = plan.assemble()
        rng = np.random.default_rng(3)
        u = rng.standard_normal(64)
        ref = plan.apply(u)
        scale = np.abs(ref).max()
        assert np.abs(gm.matrix @ u - ref).max() < 1e-8 * scale
        assert gm.row_sum_max < 1e-8


def test_assembled_spectrum_against_symbol():
    m = make_model()
    gm = get_plan(m, n=64).assemble()
    x = grid_points(1, 64)[:, 0]
    for k in (1, 2, 3):
        vec = np.exp(2j * np.pi * k * x)
        ratio = (gm.matrix @ vec) / vec
        psi = m.measure.symbol([2 * np.pi * k])[0]
        np.testing.assert_allclose(ratio, -psi, atol=2e-4 * psi)


def test_oscillating_variant_reduces_to_tilde_at_eps_one():
    sig = LinearJumpMap(FourierField.from_harmonics(1, const=1.0, sin={1: 0.5}))
    m = make_model(b=VectorField.constant(1, 0.4),
                   c=VectorField.constant(1, 0.2), sigma=sig)
    a = GeneratorPlan(m, variant="tilde", n=32, eps=1.0)
    b = GeneratorPlan(m, variant="oscillating", n=32, eps=1.0)
    u = np.cos(2 * np.pi * grid_points(1, 32)[:, 0])
    np.testing.assert_allclose(a.apply(u), b.apply(u), rtol=1e-12, atol=1e-10)


def test_limit_variant_constant_generator():
    class Hom:
        pi_spec = StableMeasureSpec.standard(1, 1.5)
        C_bar = np.array([0.7])

        def fingerprint(self):
            return "hom-test"

    plan = get_plan(Hom(), variant="limit", n=64)
    x = grid_points(1, 64)[:, 0]
    u = np.cos(2 * np.pi * x)
    ref = -PSI_2PI * u - 0.7 * 2 * np.pi * np.sin(2 * np.pi * x)
    np.testing.assert_allclose(plan.apply(u), ref, atol=2e-5 * PSI_2PI)


# -- resolvent ----------------------------------------------------------------

def test_resolvent_constant_data():
    u = solve_resolvent(2.0, GridField(1, np.ones(64)), make_model())
    np.testing.assert_allclose(u.values, 0.5, atol=1e-10)


def test_resolvent_single_harmonic():
    m = make_model()
    x = grid_points(1, 64)[:, 0]
    f = GridField(1, np.cos(2 * np.pi * x))
    u = solve_resolvent(2.0, f, m)
    ref = np.cos(2 * np.pi * x) / (2.0 + PSI_2PI)
    np.testing.assert_allclose(u.values, ref, atol=1e-4 * np.abs(ref).max())


def test_resolvent_max_principle_random_fields():
    m = make_model()
    rng = np.random.default_rng(11)
    x = grid_points(1, 64)[:, 0]
    for _ in range(20):
        f = np.zeros(64)
        for k in range(1, 5):
            f += rng.normal() * np.cos(2 * np.pi * k * x)
            f += rng.normal() * np.sin(2 * np.pi * k * x)
        f += rng.normal()
        for kappa in (0.5, 1.0, 2.0):
            u = solve_resolvent(kappa, GridField(1, f), m)
            assert kappa * np.abs(u.values).max() <= 1.02 * np.abs(f).max()


def test_resolvent_rejects_bad_inputs():
    m = make_model()
    with pytest.raises(ValueError):
        solve_resolvent(-1.0, GridField(1, np.ones(16)), m)
    with pytest.raises(TypeError):
        solve_resolvent(1.0, np.ones(16), m)


def test_resolvent_mc_discounted_mass():
    m = make_model()
    kappa = 2.0
    r = resolvent_mc(kappa, lambda s: np.ones(len(s)), [0.3], m,
                     n_paths=200, t_max=3.0, dt=2e-3, master_seed=5)
    ref = (1.0 - np.exp(-kappa * 3.0)) / kappa
    # f = 1 has zero variance; only the time-discretization bias remains
    assert r["stderr"] < 1e-12
    assert r["estimate"] == pytest.approx(ref, abs=2 * kappa * 2e-3)


def test_resolvent_mc_cross_checks_collocation():
    m = make_model()
    x = grid_points(1, 64)[:, 0]
    f = GridField(1, np.cos(2 * np.pi * x))
    r = resolvent_mc(2.0, f, [0.1], m, n_paths=1500, t_max=4.0, dt=2e-3,
                     master_seed=9)
    u = solve_resolvent(2.0, f, m)
    ref = float(u.eval(np.array([[0.1]]))[0, 0])
    assert abs(r["estimate"] - ref) < 3 * r["stderr"] + 5e-3


def test_resolvent_mc_deterministic():
    m = make_model()
    a = resolvent_mc(1.0, lambda s: np.cos(2 * np.pi * s[:, 0]), [0.2], m,
                     n_paths=50, t_max=1.0, dt=5e-3, master_seed=21)
    b = resolvent_mc(1.0, lambda s: np.cos(2 * np.pi * s[:, 0]), [0.2], m,
                     n_paths=50, t_max=1.0, dt=5e-3, master_seed=21)
    assert a["estimate"] == b["estimate"]


# -- Poisson and correctors ---------------------------------------------------

def test_poisson_centered_zero_data():
    res = solve_poisson_centered(GridField(1, np.zeros(64)), None, make_model())
    assert np.abs(res.field.values).max() < 1e-12
    assert res.residual < 1e-10


def test_poisson_centered_single_harmonic():
    m = make_model()
    x = grid_points(1, 64)[:, 0]
    f = GridField(1, np.cos(2 * np.pi * x))
    ref = np.cos(2 * np.pi * x) / PSI_2PI
    for mu in (None, EmpiricalMeasure.uniform(1, 64)):
        res = solve_poisson_centered(f, mu, m)
        np.testing.assert_allclose(res.field.values, ref,
                                   atol=1e-4 * np.abs(ref).max())
        assert res.residual < 1e-8
        assert abs(res.centering_shift) < 1e-12
        # solution is centered against the supplied weights
        assert abs(res.null_weights @ res.field.values.ravel()) < 1e-10


def test_poisson_records_centering_shift():
    m = make_model()
    x = grid_points(1, 64)[:, 0]
    f = GridField(1, 1.3 + np.cos(2 * np.pi * x))
    res = solve_poisson_centered(f, None, m)
    assert res.centering_shift == pytest.approx(1.3, abs=1e-10)
    assert res.residual < 1e-8


def test_corrector_zero_drift_is_zero():
    corr = compute_corrector("b_hat", make_model(), n=32)
    assert corr.sup_norm() < 1e-12
    assert corr.jacobian.shape == (32, 1, 1)


def test_corrector_potential_single_harmonic():
    e = FourierField.from_harmonics(1, cos={1: 0.3})
    m = make_model(e=e)
    corr = compute_corrector("e_hat", m, n=64)
    x = grid_points(1, 64)[:, 0]
    ref = 0.3 * np.cos(2 * np.pi * x) / PSI_2PI
    np.testing.assert_allclose(corr.components[0].values, ref,
                               atol=1e-4 * np.abs(ref).max())
    # jacobian holds the spectral gradient
    grad_ref = -0.3 * 2 * np.pi * np.sin(2 * np.pi * x) / PSI_2PI
    np.testing.assert_allclose(corr.jacobian[:, 0, 0], grad_ref,
                               atol=1e-3 * np.abs(grad_ref).max())


def test_corrector_residual_small_on_fine_grid():
    e = FourierField.from_harmonics(1, cos={1: 0.3})
    m = make_model(e=e)
    corr = compute_corrector("e_hat", m, n=64)
    res = corrector_residual(corr, m)
    assert res < 1e-4
    assert corr.which == "e_hat"


def test_corrector_rejects_unknown_name():
    with pytest.raises(ValueError):
        compute_corrector("a_hat", make_model())
