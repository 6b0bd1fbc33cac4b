import numpy as np
import pytest

from stablehomog.fields import FourierField, VectorField
from stablehomog.homogenize import HomogenizedModel
from stablehomog.jumpmaps import LinearJumpMap, MatrixField
from stablehomog.levy import StableMeasureSpec
from stablehomog.model import CoefficientModel
from stablehomog.nonlocal_solver import compute_corrector
from stablehomog.pde import (
    PotentialOverflowError,
    error_table_csv,
    evolve_limit,
    homogenization_error,
    plot_script,
    solve_limit_mc,
    solve_limit_spectral,
    solve_u_eps_mc,
)

PSI_2PI = 52.63789013914324


def make_model(dim=1, alpha=1.5, b=None, c=None, e=None, g=None, sigma=None,
               u0=None):
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
        potential_slow=g or FourierField.zero(dim),
        initial_data=u0 or FourierField.from_harmonics(dim, cos={key: 1.0}),
        jump_map=sigma,
    )


def limit_model(c_bar=0.0, e_bar=0.0, weights=(1.0, 1.0), alpha=1.5):
    return HomogenizedModel(
        1, alpha, [c_bar], e_bar,
        StableMeasureSpec(1, alpha, weights=np.array(weights, dtype=float)),
        {"c_bar_error": [0.0], "e_bar_error": 0.0, "pi_defect": 0.0},
    )


# -- oscillating solver -------------------------------------------------------

def test_u_eps_constant_initial_data_is_exact():
    model = make_model(c=VectorField.constant(1, 0.3),
                       u0=FourierField.constant(1, 1.0))
    sol = solve_u_eps_mc(model, 0.25, 0.3, [0.1, 0.6], n_paths=200, dt=2e-3)
    assert np.allclose(sol["values"], 1.0, atol=1e-12)
    assert np.allclose(sol["stderr"], 0.0, atol=1e-12)


def test_u_eps_deterministic_characteristics():
    model = make_model(c=VectorField.constant(1, 0.3),
                       g=FourierField.constant(1, 0.2),
                       sigma=LinearJumpMap(0.0))
    xs = np.array([0.0, 0.2, 0.45, 0.8])
    sol = solve_u_eps_mc(model, 0.2, 1.0, xs, n_paths=64, dt=1e-3)
    expect = np.exp(0.2) * np.cos(2 * np.pi * (xs + 0.3))
    assert np.allclose(sol["values"], expect, atol=1e-9)
    assert np.allclose(sol["stderr"], 0.0, atol=1e-12)


def test_u_eps_matches_limit_for_scale_free_model():
    # x-independent coefficients solve the limit equation at every scale
    model = make_model(c=VectorField.constant(1, 0.3),
                       g=FourierField.constant(1, 0.2))
    hom = limit_model(c_bar=0.3, e_bar=0.2)
    xs = (np.arange(8) + 0.5) / 8
    t = 0.05
    sol = solve_u_eps_mc(model, 0.1, t, xs, n_paths=3000, dt=1e-3)
    ref = solve_limit_spectral(hom, model.initial_data, t, xs)
    z = np.abs(sol["values"] - ref) / sol["stderr"]
    assert z.max() < 3.5
    assert np.abs(sol["values"] - ref).max() < 0.05


def test_u_eps_stays_in_initial_range_without_potential():
    model = make_model()
    sol = solve_u_eps_mc(model, 0.3, 0.1, [0.0, 0.33, 0.71], n_paths=400,
                         dt=1e-3)
    assert sol["values"].max() <= 1.0 + 1e-12
    assert sol["values"].min() >= -1.0 - 1e-12


def test_u_eps_overflow_guard():
    model = make_model(g=FourierField.constant(1, 0.5))
    with pytest.raises(PotentialOverflowError) as exc:
        solve_u_eps_mc(model, 0.25, 1.0, [0.1], n_paths=16, dt=2e-3, y_cap=0.3)
    assert exc.value.max_exponent == pytest.approx(0.5, abs=1e-9)
    assert exc.value.cap == 0.3


def test_u_eps_corrector_adjusted_estimate():
    model = make_model(e=FourierField.from_harmonics(1, cos={1: 0.3}),
                       c=VectorField.constant(1, 0.2))
    corr = compute_corrector("e_hat", model, None, n=64)
    sol = solve_u_eps_mc(model, 0.25, 0.2, [0.1, 0.6], n_paths=500, dt=1e-3,
                         corrector=corr)
    assert "values_hat" in sol and "stderr_hat" in sol
    # the adjustment is a bounded pathwise reweighting
    factor = np.exp(2 * 0.25 * corr.sup_norm())
    assert np.all(np.abs(sol["values_hat"]) <= factor * np.abs(sol["values"])
                  + factor * 3 * sol["stderr"] + 1e-9)
    wrong = compute_corrector("b_hat", model, None, n=64)
    with pytest.raises(ValueError):
        solve_u_eps_mc(model, 0.25, 0.1, [0.1], n_paths=8, corrector=wrong)


def test_u_eps_clt_scaling():
    model = make_model(c=VectorField.constant(1, 0.3))
    a = solve_u_eps_mc(model, 0.2, 0.02, [0.15], n_paths=500, dt=1e-3)
    b = solve_u_eps_mc(model, 0.2, 0.02, [0.15], n_paths=1000, dt=1e-3,
                       path_offset=10_000)
    ratio = a["stderr"][0] / b["stderr"][0]
    assert abs(ratio - np.sqrt(2.0)) < 0.2 * np.sqrt(2.0)


# -- limit solvers ------------------------------------------------------------

def test_limit_spectral_time_zero_and_constant_mode():
    hom = limit_model(c_bar=0.7, e_bar=0.4)
    u0 = FourierField.from_harmonics(1, const=0.3, cos={1: 1.0, 3: 0.2})
    xs = np.linspace(0.0, 1.0, 9)
    assert np.allclose(solve_limit_spectral(hom, u0, 0.0, xs), u0.eval(xs),
                       atol=1e-13)
    ones = FourierField.constant(1, 1.0)
    vals = solve_limit_spectral(hom, ones, 0.5, xs)
    assert np.allclose(vals, np.exp(0.4 * 0.5), atol=1e-13)


def test_limit_spectral_decay_matches_generator_symbol():
    # mode-1 decay rate equals the jump symbol measured on the solver side
    hom = limit_model()
    t = 0.01
    vals = solve_limit_spectral(hom, FourierField.from_harmonics(1, cos={1: 1.0}),
                                t, np.array([0.0, 0.25]))
    assert vals[0] == pytest.approx(np.exp(-t * PSI_2PI), rel=1e-11)
    assert vals[1] == pytest.approx(0.0, abs=1e-14)


def test_limit_spectral_semigroup():
    hom = limit_model(c_bar=0.3, e_bar=-0.2, weights=(0.8, 0.8))
    u0 = FourierField.from_harmonics(1, const=0.1, cos={1: 1.0}, sin={2: 0.4})
    one = evolve_limit(hom, u0, 0.7)
    two = evolve_limit(hom, evolve_limit(hom, u0, 0.3), 0.4)
    assert np.array_equal(one.modes, two.modes)
    assert np.allclose(one.coeffs, two.coeffs, rtol=1e-13, atol=1e-16)


def test_limit_spectral_rejects_asymmetric_measure():
    class Skew:
        dim = 1
        alpha = 1.5
        C_bar = np.array([0.0])
        E_bar = 0.0
        pi_spec = StableMeasureSpec(1, 1.5, weights=[1.0, 2.0])

    with pytest.raises(ValueError, match="symmetric"):
        solve_limit_spectral(Skew(), FourierField.constant(1, 1.0), 0.1, [0.0])


def test_limit_symbol_positive_away_from_zero():
    pi = StableMeasureSpec(1, 1.5, weights=[0.3, 0.3])
    for k in range(1, 6):
        assert pi.symbol(2 * np.pi * k) > 0.0


def test_limit_mc_cross_validates_spectral():
    hom = limit_model(c_bar=0.25, e_bar=0.1)
    u0 = FourierField.from_harmonics(1, cos={1: 1.0})
    xs = (np.arange(16) + 0.5) / 16
    t = 0.02
    mc = solve_limit_mc(hom, u0, t, xs, n_paths=4000, master_seed=9)
    ref = solve_limit_spectral(hom, u0, t, xs)
    z = np.abs(mc["values"] - ref) / mc["stderr"]
    assert z.max() < 3.0


def test_limit_mc_constant_and_shift_property():
    u0 = FourierField.from_harmonics(1, cos={2: 0.7})
    xs = np.array([0.05, 0.4, 0.9])
    t = 0.03
    ones = FourierField.constant(1, 1.0)
    mc = solve_limit_mc(limit_model(e_bar=0.3), ones, t, xs, n_paths=200)
    assert np.allclose(mc["values"], np.exp(0.3 * t), atol=1e-12)
    assert np.allclose(mc["stderr"], 0.0, atol=1e-12)

    moved = solve_limit_mc(limit_model(c_bar=0.4), u0, t, xs, n_paths=500,
                           master_seed=4)
    still = solve_limit_mc(limit_model(c_bar=0.0), u0, t, xs + 0.4 * t,
                           n_paths=500, master_seed=4)
    assert np.allclose(moved["values"], still["values"], atol=1e-13)


# -- convergence driver -------------------------------------------------------

def test_error_table_scale_free_model_sits_on_noise_floor():
    model = make_model(c=VectorField.constant(1, 0.3),
                       g=FourierField.constant(1, 0.2))
    xs = (np.arange(8) + 0.5) / 8
    report = homogenization_error(
        model, [0.5, 0.25], 0.04, xs,
        budgets={"n_paths": 1500, "dt": 1e-3, "hom_n": 64, "hom_mc_n": 2000},
        master_seed=3,
    )
    for row in report["rows"]:
        assert row["sup_err"] < 4.0 * row["stderr_max"] + report["quad_error"]
    assert report["nonincreasing_within_envelopes"]
    # scale-free model + common random numbers: every eps sees the same paths
    vals = [report["per_eps"][e]["u_eps"] for e in report["epsilon"]]
    assert np.array_equal(vals[0], vals[1])


def test_error_table_csv_and_plot_script():
    model = make_model(c=VectorField.constant(1, 0.3))
    xs = np.array([0.1, 0.6])
    report = homogenization_error(
        model, [0.5], 0.02, xs,
        budgets={"n_paths": 200, "dt": 2e-3, "hom_n": 48, "hom_mc_n": 1000},
        master_seed=1,
    )
    text = error_table_csv(report)
    lines = text.strip().split("\n")
    assert lines[0] == "epsilon,x,u_eps,stderr,u_limit,abs_err"
    assert len(lines) == 1 + 2
    eps, x, u, s, ul, err = map(float, lines[1].split(","))
    assert eps == 0.5 and x == 0.1
    assert err == pytest.approx(abs(u - ul), rel=1e-12)

    script = plot_script("table.csv")
    compile(script, "plot.py", "exec")
    assert "table.csv" in script and "matplotlib" in script


def test_error_table_rejects_bad_epsilon():
    model = make_model()
    with pytest.raises(ValueError):
        homogenization_error(model, [0.2, 0.0], 0.1, [0.1],
                             budgets={"hom_n": 48, "hom_mc_n": 1000})
