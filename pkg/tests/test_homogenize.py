import json
from types import SimpleNamespace

import numpy as np
import pytest

from stablehomog.ergodic import EmpiricalMeasure, stationary_average
from stablehomog.fields import FourierField, GridField, VectorField, grid_points
from stablehomog.homogenize import (
    HomogenizedModel,
    effective_drift,
    effective_jump_measure,
    effective_potential,
    fclt_diagnostics,
    format_fclt_report,
    homogenize_model,
    stationary_node_weights,
)
from stablehomog.jumpmaps import LinearJumpMap, MatrixField
from stablehomog.levy import StableMeasureSpec, sample_jump_stream
from stablehomog.model import CoefficientModel
from stablehomog.nonlocal_solver import compute_corrector
from stablehomog.rng import DOMAIN_SERIES, substream


def make_model(dim=1, alpha=1.5, b=None, c=None, e=None, g=None, sigma=None):
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
        initial_data=FourierField.from_harmonics(dim, cos={key: 1.0}),
        jump_map=sigma,
    )


def wavy_model():
    """Nontrivial fast drift with constant slow drift; used across tests."""
    return make_model(
        b=VectorField([FourierField.from_harmonics(1, cos={1: 1.2}, sin={2: 0.2})]),
        c=VectorField.constant(1, 0.3),
        e=FourierField.from_harmonics(1, cos={1: 0.3}),
        g=FourierField.constant(1, 0.1),
        sigma=LinearJumpMap(0.4),
    )


def const_grid(n, value):
    return GridField(1, np.full(n, float(value)))


# -- averaged drift and potential ---------------------------------------------

def test_effective_drift_constant_slow_is_exact():
    model = make_model(c=VectorField.constant(1, 0.3))
    corr = compute_corrector("b_hat", model, None, n=64)
    mu = EmpiricalMeasure.uniform(1, 64)
    est = effective_drift(mu, const_grid(64, 0.3), corr)
    assert est.value[0] == pytest.approx(0.3, abs=1e-10)
    assert est.stderr[0] == 0.0          # no sample count on a synthetic measure
    assert est.error[0] < 1e-10


def test_effective_drift_zero_mean_slow_vanishes():
    model = make_model()
    corr = compute_corrector("b_hat", model, None, n=64)
    cg = GridField(1, np.cos(2 * np.pi * np.arange(64) / 64))
    est = effective_drift(EmpiricalMeasure.uniform(1, 64), cg, corr)
    assert est.value[0] == pytest.approx(0.0, abs=1e-12)


def test_effective_drift_reports_sampling_error():
    model = make_model(c=VectorField.constant(1, 0.3))
    corr = compute_corrector("b_hat", model, None, n=64)
    rng = substream(11, DOMAIN_SERIES, 0)
    mu = EmpiricalMeasure.from_counts(1, 64, rng.integers(50, 150, size=64))
    cg = GridField(1, 0.3 + 0.2 * np.sin(2 * np.pi * np.arange(64) / 64))
    est = effective_drift(mu, cg, corr)
    assert est.stderr[0] > 0.0
    assert est.error[0] >= est.stderr[0]


def test_effective_drift_grid_mismatch_rejected():
    model = make_model(c=VectorField.constant(1, 0.3))
    corr = compute_corrector("b_hat", model, None, n=64)
    with pytest.raises(ValueError):
        effective_drift(EmpiricalMeasure.uniform(1, 32), const_grid(32, 0.3), corr)


def test_effective_potential_constant_and_centered():
    model = make_model()
    corr = compute_corrector("e_hat", model, None, n=64)
    mu = EmpiricalMeasure.uniform(1, 64)
    c = const_grid(64, 0.3)
    est = effective_potential(mu, const_grid(64, 0.2), c, corr)
    assert est.value == pytest.approx(0.2, abs=1e-10)
    gg = GridField(1, np.cos(2 * np.pi * np.arange(64) / 64))
    est2 = effective_potential(mu, gg, c, corr)
    assert est2.value == pytest.approx(0.0, abs=1e-12)


def test_averaged_coefficients_match_path_averages():
    # quadrature values against long-run time averages along the fast motion
    model = wavy_model()
    n = 96
    corr_b = compute_corrector("b_hat", model, None, n=n)
    corr_e = compute_corrector("e_hat", model, None, n=n)
    w = stationary_node_weights(model, n=n)
    c = const_grid(n, 0.3)
    g = const_grid(n, 0.1)
    drift = effective_drift(w, c, corr_b)
    pot = effective_potential(w, g, c, corr_e)

    gb = corr_b.gradient_component(0, 0)
    ge = corr_e.gradient_component(0, 0)

    mean_d, err_d, _ = stationary_average(
        model, lambda x: 0.3 * (1.0 + gb.eval(x).reshape(-1)),
        dt=1e-3, n_steps=4000, n_chains=32, master_seed=5,
    )
    mean_p, err_p, _ = stationary_average(
        model, lambda x: 0.1 + 0.3 * ge.eval(x).reshape(-1),
        dt=1e-3, n_steps=4000, n_chains=32, master_seed=6,
    )
    assert abs(drift.value[0] - mean_d) < 5 * err_d + drift.error[0] + 1e-3
    assert abs(pot.value - mean_p) < 5 * err_p + pot.error + 1e-3
    # the corrector genuinely shifts the average
    assert abs(drift.value[0] - 0.3) > 0.01


# -- effective jump measure ---------------------------------------------------

def test_jump_measure_identity_amplitude():
    model = make_model()
    pi = effective_jump_measure(model, EmpiricalMeasure.uniform(1, 32), mc_n=0)
    assert pi.weights[0] == pytest.approx(1.0, abs=1e-12)
    assert pi.weights[1] == pytest.approx(1.0, abs=1e-12)


def test_jump_measure_constant_amplitude_power_law():
    model = make_model(sigma=LinearJumpMap(1.5))
    pi = effective_jump_measure(model, EmpiricalMeasure.uniform(1, 32), mc_n=0)
    expected = 1.8371173070873836          # 1.5 ** 1.5
    assert pi.weights[0] == pytest.approx(expected, rel=1e-12)
    assert pi.weights[1] == pytest.approx(expected, rel=1e-12)


def test_jump_measure_varying_amplitude_and_mc_cross_check():
    sig = LinearJumpMap(FourierField.from_harmonics(1, const=1.0, sin={1: 0.5}))
    model = make_model(sigma=sig)
    rng = substream(3, DOMAIN_SERIES, 1)
    mu = EmpiricalMeasure.from_counts(1, 64, rng.integers(10, 100, size=64))
    pi, diag = effective_jump_measure(model, mu, mc_n=40000,
                                      return_diagnostics=True)
    x = mu.cell_centers().reshape(-1)
    expected = float(mu.probs @ np.abs(1.0 + 0.5 * np.sin(2 * np.pi * x)) ** 1.5)
    assert pi.weights[0] == pytest.approx(expected, rel=1e-12)
    assert diag["symmetry_defect"] < 1e-12
    assert diag["mc_max_z"] < 5.0


def test_jump_measure_ignores_measure_when_amplitude_is_constant():
    model = make_model(sigma=LinearJumpMap(0.7))
    rng = substream(9, DOMAIN_SERIES, 2)
    lumpy = EmpiricalMeasure.from_counts(1, 32, rng.integers(1, 60, size=32))
    a = effective_jump_measure(model, EmpiricalMeasure.uniform(1, 32), mc_n=0)
    b = effective_jump_measure(model, lumpy, mc_n=0)
    assert np.allclose(a.weights, b.weights, atol=1e-12)


def test_jump_measure_scaling_on_cone_annuli():
    sig = LinearJumpMap(FourierField.from_harmonics(1, const=1.0, sin={1: 0.5}))
    model = make_model(sigma=sig)
    pi = effective_jump_measure(model, EmpiricalMeasure.uniform(1, 64), mc_n=0)

    def annulus(side, a, b):
        # mass of {r * theta : r in [a, b)} for one direction atom
        return pi.quad_weights[side] * (a ** -pi.alpha - b ** -pi.alpha) / pi.alpha

    for r in (2.0, 3.7):
        for side in (0, 1):
            m1 = annulus(side, 0.5, 2.5)
            mr = annulus(side, r * 0.5, r * 2.5)
            assert mr == pytest.approx(r ** -pi.alpha * m1, rel=1e-12)
    assert pi.tail_mass(2.0 * 0.7) == pytest.approx(
        2.0 ** -pi.alpha * pi.tail_mass(0.7), rel=1e-12)


def test_jump_measure_rejects_uneven_amplitude():
    class SkewMap:
        dim = 1

        def __call__(self, x, y):
            scale = np.where(y[..., 0] > 0, 1.4, 1.0)
            return scale[..., None] * y

        def at_directions(self, x, dirs):
            out = np.broadcast_to(dirs[None, :, :],
                                  (len(x),) + dirs.shape).copy()
            scale = np.where(dirs[None, :, 0] > 0, 1.4, 1.0)
            return out * scale[..., None]

    fake = SimpleNamespace(dim=1, alpha=1.5,
                           measure=StableMeasureSpec.standard(1, 1.5),
                           jump_map=SkewMap())
    with pytest.raises(ValueError, match="odd"):
        effective_jump_measure(fake, EmpiricalMeasure.uniform(1, 16), mc_n=0)


def test_pushforward_tail_index():
    # simulated jumps of the limit driver recover the stability index
    model = make_model()
    pi = effective_jump_measure(model, EmpiricalMeasure.uniform(1, 32), mc_n=0)
    rng = substream(21, DOMAIN_SERIES, 3)
    stream = sample_jump_stream(pi, 0.05, 60.0, rng)
    mags = np.sort(np.abs(stream.vectors.reshape(-1)))[::-1]
    k = 1500
    assert len(mags) > 4 * k
    hill = k / np.sum(np.log(mags[:k] / mags[k]))
    assert abs(hill - 1.5) < 0.1


# -- bundled limit model ------------------------------------------------------

def good_provenance():
    return {"c_bar_error": [0.0], "e_bar_error": 0.0, "pi_defect": 0.0}


def test_homogenized_model_validation():
    pi = StableMeasureSpec.standard(1, 1.5)
    HomogenizedModel(1, 1.5, [0.1], 0.0, pi, good_provenance())
    skew = StableMeasureSpec(1, 1.5, weights=[1.0, 2.0])
    with pytest.raises(ValueError, match="symmetric"):
        HomogenizedModel(1, 1.5, [0.1], 0.0, skew, good_provenance())
    with pytest.raises(ValueError, match="provenance"):
        HomogenizedModel(1, 1.5, [0.1], 0.0, pi, {"c_bar_error": [0.0]})
    with pytest.raises(ValueError, match="match"):
        HomogenizedModel(1, 1.8, [0.1], 0.0, pi, good_provenance())


def test_homogenize_model_pipeline_and_roundtrip():
    model = wavy_model()
    hom = homogenize_model(model, n=64, mc_n=4000, master_seed=2)
    assert hom.pi_spec.symmetry_defect() == 0.0
    assert hom.provenance["measure_kind"] == "discrete-null"
    assert hom.provenance["pi_mc_max_z"] < 6.0
    # matches the coefficient functions called directly on the same grid
    w = stationary_node_weights(model, n=64)
    corr_b = compute_corrector("b_hat", model, None, n=64)
    direct = effective_drift(w, const_grid(64, 0.3), corr_b)
    assert hom.C_bar[0] == pytest.approx(direct.value[0], abs=1e-12)

    blob = json.dumps(hom.to_spec())
    back = HomogenizedModel.from_spec(json.loads(blob))
    assert np.allclose(back.C_bar, hom.C_bar)
    assert back.E_bar == pytest.approx(hom.E_bar)
    assert np.allclose(back.pi_spec.weights, hom.pi_spec.weights)
    assert back.fingerprint() == hom.fingerprint()


def test_stationary_weights_uniform_for_symmetric_generator():
    model = make_model()
    w = stationary_node_weights(model, n=48)
    assert w.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(w, 1.0 / 48, atol=1e-10)


# -- scaling diagnostics ------------------------------------------------------

def test_fclt_without_fast_drift_kills_corrector_columns():
    model = make_model(c=VectorField.constant(1, 0.3))
    report = fclt_diagnostics(model, [0.5, 0.25], t=1.0, master_seed=4,
                              rho=0.25, n_paths=4, drift_substep=2e-3)
    assert report["c_bar"][0] == pytest.approx(0.3, abs=1e-10)
    total = 0.0
    for row in report["rows"]:
        assert row["item_ii_sup_max"] == 0.0
        assert row["item_iii_mean"] == 0.0
        assert row["xi_second_moment_mean"] == 0.0
        assert row["item_i_max"] < 1e-9       # constant integrand, exact line
        total += row["item_iv_mean"]
    # macroscopic jump counts sit on the closed-form target 2 t rho^-alpha / alpha
    limit = report["item_iv_limit"]
    assert limit == pytest.approx(1.0 * 2.0 * 0.25 ** -1.5 / 1.5, rel=1e-12)
    spread = max(np.sqrt(limit / report["n_paths"]), 1e-9)
    for row in report["rows"]:
        assert abs(row["item_iv_mean"] - limit) < 5 * spread
    assert report["item_ii_nonincreasing"]
    assert report["item_iii_nonincreasing"]


def test_fclt_custom_test_function_reference():
    model = make_model(c=VectorField.constant(1, 0.3))

    def f(z):
        r = np.linalg.norm(np.asarray(z, dtype=float), axis=-1)
        return np.where(r > 0.5, np.exp(-(r - 0.5)), 0.0)

    report = fclt_diagnostics(model, [0.5], t=0.5, f_test=f, master_seed=4,
                              n_paths=2, drift_substep=2e-3)
    from scipy.integrate import quad
    ref, _ = quad(lambda r: np.exp(-(r - 0.5)) * r ** -2.5, 0.5, np.inf)
    assert report["item_iv_limit"] == pytest.approx(0.5 * 2.0 * ref, rel=1e-6)


def test_fclt_sweep_contracts_toward_the_effective_line():
    model = wavy_model()
    report = fclt_diagnostics(model, [0.4, 0.1], t=0.8, master_seed=7,
                              n_paths=4, drift_substep=2e-3)
    rows = report["rows"]
    assert rows[0]["eps"] == 0.4 and rows[1]["eps"] == 0.1
    assert rows[0]["n_jumps_mean"] > 100
    # the corrector-adjusted drift integral tightens around C_bar s
    assert rows[1]["item_i_median"] < rows[0]["item_i_median"]
    # sub-cutoff jumps cannot fake increments above the counting threshold
    assert report["xi_truncation_sup"] < 0.03
    text = format_fclt_report(report)
    assert "eps" in text and "macro" in text
    json.dumps(report)                      # fully serializable


def test_fclt_rejects_bad_epsilon():
    model = make_model()
    with pytest.raises(ValueError):
        fclt_diagnostics(model, [0.5, -0.1], t=0.5)
