"""Effective coefficients of the constant-coefficient limit dynamics.

Averaging the corrector-adjusted slow coefficients against the invariant
measure of the fast motion produces an effective drift vector and an
effective potential; pushing the invariant measure times the angular
noise measure through the jump amplitude produces the effective jump
measure.  This module computes all three with error estimates, bundles
them into a :class:`HomogenizedModel`, and provides scaling diagnostics
that track how the oscillating dynamics approach the limit along a
sweep of scale separations.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field as _field

import numpy as np

from .fields import GridField, grid_points
from .levy import StableMeasureSpec
from .nonlocal_solver import Corrector, _left_null_weights, compute_corrector, get_plan
from .rng import DOMAIN_MC, DOMAIN_PATH, substream
from .sde import simulate_fast_chain, simulate_single_path


def _hash_array(a) -> str:
    blob = np.ascontiguousarray(a, dtype=float).tobytes()
    return hashlib.sha256(blob).hexdigest()[:16]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def stationary_node_weights(model, *, n: int = 128, variant: str = "tilde",
                            eps: float = 0.0) -> np.ndarray:
    """Stationary probability weights of the discretized fast generator.

    The left null vector of the collocation matrix, clipped to be
    nonnegative and renormalized.  These weights play the role of the
    invariant measure on the grid nodes when no sampled measure is
    available, and they are exact for the discrete dynamics.
    """
    plan = get_plan(model, variant=variant, n=n, eps=eps)
    w = _left_null_weights(plan.assemble().matrix)
    w = np.clip(w, 0.0, None)
    total = w.sum()
    if total <= 0:
        raise ValueError("degenerate stationary weights")
    return w / total


# -- averaged coefficients ----------------------------------------------------

@dataclass
class EffectiveEstimate:
    """A quadrature value with its sampling error and corrector bias bound."""
    value: np.ndarray | float
    stderr: np.ndarray | float
    bias_bound: np.ndarray | float

    @property
    def error(self):
        return self.stderr + self.bias_bound


def _component_fields(obj, what: str):
    if isinstance(obj, GridField):
        fields = [obj]
    elif isinstance(obj, (list, tuple)):
        fields = list(obj)
    else:
        raise TypeError(f"{what} must be a GridField or a sequence of them")
    dim = fields[0].dim
    if len(fields) != dim:
        raise ValueError(f"{what} needs one component per dimension")
    n = fields[0].n
    for f in fields:
        if f.n != n or f.dim != dim:
            raise ValueError(f"{what} components live on different grids")
    return fields, n, dim


def _jacobian_rows(obj, dim: int, n: int, what: str):
    """Normalize a gradient argument to rows[i][j] of grid fields."""
    residual = 0.0
    if isinstance(obj, Corrector):
        rows = [[obj.gradient_component(i, j) for j in range(dim)]
                for i in range(len(obj.components))]
        if len(obj.residuals):
            residual = float(np.max(obj.residuals))
    elif isinstance(obj, GridField):
        rows = [[obj]]
    else:
        rows = [list(r) if isinstance(r, (list, tuple)) else [r] for r in obj]
    if len(rows) != dim or any(len(r) != dim for r in rows):
        raise ValueError(f"{what} must have dim x dim components")
    for r in rows:
        for g in r:
            if g.n != n or g.dim != dim:
                raise ValueError(
                    f"{what} and the slow coefficients live on different grids"
                )
    return rows, residual


def _node_probabilities(mu_hat, n: int, dim: int):
    """Probability weights on the n**dim grid nodes plus the sample count."""
    if hasattr(mu_hat, "node_weights"):
        w = np.asarray(mu_hat.node_weights(n), dtype=float).ravel()
        return w, int(getattr(mu_hat, "n_samples", 0))
    w = np.asarray(mu_hat, dtype=float).ravel()
    if len(w) != n ** dim:
        raise ValueError(
            f"weight vector has {len(w)} entries but the fields have "
            f"{n ** dim} nodes"
        )
    w = np.clip(w, 0.0, None)
    total = w.sum()
    if total <= 0:
        raise ValueError("weights must carry positive total mass")
    return w / total, 0


def effective_drift(mu_hat, c, grad_b_hat, *, residual_sup=None) -> EffectiveEstimate:
    """Average the corrector-adjusted slow drift against the measure.

    The value is sum over nodes of (I + grad b_hat) c weighted by the
    measure; the standard error propagates the multinomial sampling noise
    of an empirical measure and the bias bound multiplies the corrector
    equation residual by the sup of the slow drift.  ``mu_hat`` may be an
    empirical measure or a plain weight vector on the grid nodes;
    ``grad_b_hat`` a corrector, a grid field (one dimension), or a nested
    sequence of grid fields.
    """
    c_fields, n, dim = _component_fields(c, "c")
    rows, corr_res = _jacobian_rows(grad_b_hat, dim, n, "grad_b_hat")
    if residual_sup is None:
        residual_sup = corr_res
    w, n_samples = _node_probabilities(mu_hat, n, dim)

    cvals = np.stack([f.values.ravel() for f in c_fields], axis=-1)   # (N, dim)
    F = cvals.copy()
    for i in range(dim):
        for j in range(dim):
            F[:, i] += rows[i][j].values.ravel() * cvals[:, j]
    value = w @ F
    var = np.clip(w @ (F * F) - value ** 2, 0.0, None)
    stderr = np.sqrt(var / n_samples) if n_samples > 0 else np.zeros(dim)
    bias = float(residual_sup) * float(np.abs(cvals).max(initial=0.0)) * np.ones(dim)
    return EffectiveEstimate(value=value, stderr=stderr, bias_bound=bias)


def effective_potential(mu_hat, g, c, grad_e_hat, *,
                        residual_sup=None) -> EffectiveEstimate:
    """Average ``g + grad e_hat . c`` against the measure.

    Same conventions and error accounting as :func:`effective_drift`;
    the result is scalar.
    """
    c_fields, n, dim = _component_fields(c, "c")
    if not isinstance(g, GridField):
        raise TypeError("g must be a GridField")
    if g.n != n or g.dim != dim:
        raise ValueError("g and c live on different grids")
    if isinstance(grad_e_hat, Corrector):
        grads = [grad_e_hat.gradient_component(0, j) for j in range(dim)]
        corr_res = float(np.max(grad_e_hat.residuals)) if len(grad_e_hat.residuals) else 0.0
    elif isinstance(grad_e_hat, GridField):
        grads, corr_res = [grad_e_hat], 0.0
    else:
        grads, corr_res = list(grad_e_hat), 0.0
    if len(grads) != dim:
        raise ValueError("grad_e_hat needs one component per dimension")
    for f in grads:
        if f.n != n or f.dim != dim:
            raise ValueError("grad_e_hat and c live on different grids")
    if residual_sup is None:
        residual_sup = corr_res
    w, n_samples = _node_probabilities(mu_hat, n, dim)

    G = g.values.ravel().copy()
    cvals = np.stack([f.values.ravel() for f in c_fields], axis=-1)
    for j in range(dim):
        G += grads[j].values.ravel() * cvals[:, j]
    value = float(w @ G)
    var = max(float(w @ (G * G)) - value ** 2, 0.0)
    stderr = math.sqrt(var / n_samples) if n_samples > 0 else 0.0
    bias = float(residual_sup) * float(np.abs(cvals).max(initial=0.0))
    return EffectiveEstimate(value=value, stderr=stderr, bias_bound=bias)


# -- effective jump measure ---------------------------------------------------

def effective_jump_measure(model, mu_hat, sphere_n: int = 64, mc_n: int = 20000,
                           master_seed: int = 0, *, symmetry_tol: float = 1e-6,
                           return_diagnostics: bool = False):
    """Pushforward of (measure x angular noise) through the jump amplitude.

    Each pair of a spatial cell and a noise direction sends mass
    ``weight * |sigma(x, theta)|^alpha`` to the direction of
    ``sigma(x, theta)``; collecting the mass on a sphere grid gives the
    spectral density of the limiting driver.  The quadrature is
    deterministic; a Monte Carlo resampling of the same pushforward
    cross-checks it when ``mc_n`` is positive.  The jump amplitude must
    be odd in the noise argument, so an asymmetry of the collected mass
    beyond ``symmetry_tol`` raises; below it the result is symmetrized
    exactly.
    """
    dim, alpha = model.dim, model.alpha
    if hasattr(mu_hat, "cell_centers"):
        pts = mu_hat.cell_centers()
        wx = np.asarray(mu_hat.probs, dtype=float)
    else:
        wx = np.asarray(mu_hat, dtype=float).ravel()
        n = int(round(len(wx) ** (1.0 / dim)))
        if n ** dim != len(wx):
            raise ValueError("weight vector length is not a grid size")
        wx = np.clip(wx, 0.0, None)
        wx = wx / wx.sum()
        pts = grid_points(dim, n)

    dirs = model.measure.directions            # (K, dim)
    wth = model.measure.quad_weights
    u = model.jump_map.at_directions(pts, dirs)    # (N, K, dim)
    r = np.linalg.norm(u, axis=-1)
    mass = wx[:, None] * wth[None, :] * r ** alpha

    if dim == 1:
        pos = u[..., 0] > 0.0
        live = r > 0.0
        k_plus = float(mass[pos & live].sum())
        k_minus = float(mass[(~pos) & live].sum())
        raw = StableMeasureSpec(1, alpha, weights=np.array([k_plus, k_minus]))
    else:
        ang = np.mod(np.arctan2(u[..., 1], u[..., 0]), 2.0 * np.pi)
        cell = np.minimum((ang / (2.0 * np.pi / sphere_n)).astype(int),
                          sphere_n - 1)
        m = np.zeros(sphere_n)
        np.add.at(m, cell.ravel(), mass.ravel())
        raw = StableMeasureSpec(2, alpha, density=m / (2.0 * np.pi / sphere_n))

    defect = raw.symmetry_defect()
    if defect > symmetry_tol:
        raise ValueError(
            f"pushforward angular measure is asymmetric (defect {defect:.3e}); "
            "the jump amplitude must be odd in the noise direction"
        )
    spec = raw.symmetrized()
    if not return_diagnostics:
        return spec

    diag = {
        "symmetry_defect": defect,
        "quad_masses": raw.quad_weights.copy(),
        "total_mass": spec.total_mass,
    }
    if mc_n:
        rng = substream(master_seed, DOMAIN_MC, 2 ** 20 + 7)
        if hasattr(mu_hat, "resample"):
            xs = mu_hat.resample(rng, mc_n)
        else:
            xs = pts[rng.choice(len(wx), size=mc_n, p=wx)]
        th = model.measure.sample_directions(rng, mc_n)
        s = model.jump_map(xs, th)
        rs = np.linalg.norm(s, axis=-1)
        total_noise = model.measure.total_mass
        if dim == 1:
            labels = np.where(s[..., 0] > 0.0, 0, 1)
            n_bins = 2
        else:
            a = np.mod(np.arctan2(s[..., 1], s[..., 0]), 2.0 * np.pi)
            labels = np.minimum((a / (2.0 * np.pi / sphere_n)).astype(int),
                                sphere_n - 1)
            n_bins = sphere_n
        est = np.zeros(n_bins)
        sq = np.zeros(n_bins)
        np.add.at(est, labels, rs ** alpha)
        np.add.at(sq, labels, rs ** (2 * alpha))
        mc_mass = total_noise * est / mc_n
        var = np.clip(total_noise ** 2 * sq / mc_n - mc_mass ** 2, 0.0, None)
        mc_err = np.sqrt(var / mc_n)
        quad = raw.quad_weights
        keep = quad > 0.01 * quad.max()
        z = np.zeros(n_bins)
        ok = keep & (mc_err > 0)
        z[ok] = np.abs(mc_mass[ok] - quad[ok]) / mc_err[ok]
        diag.update(
            mc_masses=mc_mass, mc_stderr=mc_err,
            mc_max_z=float(z.max(initial=0.0)), mc_n=int(mc_n),
        )
    return spec, diag


# -- bundled limit description ------------------------------------------------

_REQUIRED_PROVENANCE = ("c_bar_error", "e_bar_error", "pi_defect")


@dataclass
class HomogenizedModel:
    """Constant-coefficient limit: drift vector, potential, jump measure.

    ``provenance`` records where each number came from and must carry an
    error estimate for every entry (enforced on construction).
    """
    dim: int
    alpha: float
    C_bar: np.ndarray
    E_bar: float
    pi_spec: StableMeasureSpec
    provenance: dict = _field(default_factory=dict)

    def __post_init__(self):
        self.C_bar = np.asarray(self.C_bar, dtype=float).reshape(self.dim)
        self.E_bar = float(self.E_bar)
        if self.pi_spec.dim != self.dim or self.pi_spec.alpha != self.alpha:
            raise ValueError("pi_spec does not match (dim, alpha)")
        if self.pi_spec.symmetry_defect() > 1e-8:
            raise ValueError("pi_spec must be symmetric")
        for key in _REQUIRED_PROVENANCE:
            if key not in self.provenance:
                raise ValueError(f"provenance must record '{key}'")

    def to_spec(self) -> dict:
        return {
            "dim": self.dim,
            "alpha": self.alpha,
            "c_bar": [float(v) for v in self.C_bar],
            "e_bar": self.E_bar,
            "pi": self.pi_spec.to_spec(),
            "provenance": _jsonable(self.provenance),
        }

    @classmethod
    def from_spec(cls, spec: dict) -> "HomogenizedModel":
        return cls(
            dim=spec["dim"],
            alpha=spec["alpha"],
            C_bar=np.array(spec["c_bar"], dtype=float),
            E_bar=spec["e_bar"],
            pi_spec=StableMeasureSpec.from_spec(spec["pi"]),
            provenance=dict(spec["provenance"]),
        )

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_spec(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _slow_drift_grids(model, n: int):
    dim = model.dim
    return [GridField(dim, f.on_grid(n).reshape((n,) * dim))
            for f in model.drift_slow.components]


def homogenize_model(model, mu_hat=None, *, n: int = 128, sphere_n: int = 64,
                     mc_n: int = 20000, master_seed: int = 0,
                     correctors=None) -> HomogenizedModel:
    """Run the full averaging pipeline for one coefficient model.

    Solves both cell problems on an n-point grid, averages the slow
    coefficients against ``mu_hat`` (or the discrete stationary weights
    when none is given), and builds the pushforward jump measure.  All
    error estimates land in the provenance record.  ``correctors`` can
    supply a precomputed (b_hat, e_hat) pair from an artifact cache; the
    pair must come from the same model and grid size.
    """
    dim = model.dim
    if correctors is not None:
        corr_b, corr_e = correctors
        if corr_b.which != "b_hat" or corr_e.which != "e_hat":
            raise ValueError("correctors must be the (b_hat, e_hat) pair")
        if corr_b.n != n or corr_e.n != n:
            raise ValueError("precomputed correctors use a different grid")
    else:
        corr_b = compute_corrector("b_hat", model, mu_hat, n=n)
        corr_e = compute_corrector("e_hat", model, mu_hat, n=n)
    if mu_hat is not None:
        weights = mu_hat
        measure_id = _hash_array(mu_hat.probs)
        measure_kind = "empirical"
    else:
        weights = stationary_node_weights(model, n=n)
        measure_id = _hash_array(weights)
        measure_kind = "discrete-null"

    c_fields = _slow_drift_grids(model, n)
    g_field = GridField(dim, model.potential_slow.on_grid(n).reshape((n,) * dim))
    drift = effective_drift(weights, c_fields, corr_b)
    pot = effective_potential(weights, g_field, c_fields, corr_e)
    pi, pdiag = effective_jump_measure(
        model, weights, sphere_n, mc_n, master_seed, return_diagnostics=True,
    )

    provenance = {
        "model_id": model.fingerprint()[:16],
        "measure_id": measure_id,
        "measure_kind": measure_kind,
        "grid_n": n,
        "corrector_ids": {"b_hat": _hash_array(corr_b.jacobian),
                          "e_hat": _hash_array(corr_e.jacobian)},
        "corrector_residuals": {"b_hat": list(corr_b.residuals),
                                "e_hat": list(corr_e.residuals)},
        "c_bar_stderr": drift.stderr,
        "c_bar_bias": drift.bias_bound,
        "c_bar_error": drift.error,
        "e_bar_stderr": pot.stderr,
        "e_bar_bias": pot.bias_bound,
        "e_bar_error": pot.error,
        "pi_defect": pdiag["symmetry_defect"],
        "pi_mc_max_z": pdiag.get("mc_max_z"),
    }
    return HomogenizedModel(
        dim=dim, alpha=model.alpha, C_bar=drift.value, E_bar=pot.value,
        pi_spec=pi, provenance=_jsonable(provenance),
    )


# -- scaling diagnostics ------------------------------------------------------

def _pi_integral(pi: StableMeasureSpec, f) -> float:
    """Integral of f against the spectral measure, direction by direction."""
    from scipy.integrate import quad

    total = 0.0
    for d, w in zip(pi.directions, pi.quad_weights):
        if w == 0:
            continue
        def radial(rr):
            return float(f((rr * d)[None, :])[0]) * rr ** (-1.0 - pi.alpha)
        near, _ = quad(radial, 0.0, 1.0, limit=200)
        far, _ = quad(radial, 1.0, np.inf, limit=200)
        total += w * (near + far)
    return total


def fclt_diagnostics(model, epsilon_list, t, f_test=None, master_seed=0, *,
                     rho: float = 0.03, n_paths: int = 6,
                     drift_substep: float = 1e-3, dt_fast: float = 0.01,
                     n=None, n_workers: int = 1) -> dict:
    """Track the convergence of the oscillating dynamics toward the limit.

    For each scale separation the report estimates, along simulated
    paths over ``[0, t]``:

    * the sup deviation of the corrector-adjusted drift integral from
      its effective line (column ``item_i``),
    * the sup of the accumulated drift of corrector increments above
      the counting threshold ``rho`` (column ``item_ii``) and their
      accumulated second moment,
    * the jump-sum integral of ``f_test`` against the corrector
      increment measure (column ``item_iii``), which must vanish in the
      limit since ``f_test`` vanishes near zero,
    * the jump-sum integral of ``f_test`` against the macroscopic jump
      measure (column ``item_iv``), whose limit ``t * int f dPi`` is
      reported alongside.

    ``f_test`` must be bounded, vanish in a neighborhood of the origin,
    and act on arrays of shape (n, dim); the default is the indicator of
    ``|z| > rho``.  Results come with across-path error bars and
    monotonicity flags; noisy non-monotone columns are reported as they
    are.  ``master_seed`` drives all randomness.
    """
    dim, alpha = model.dim, model.alpha
    eps_arr = np.sort(np.asarray(list(epsilon_list), dtype=float))[::-1]
    if np.any(eps_arr <= 0):
        raise ValueError("scale separations must be positive")
    t = float(t)
    if n is None:
        n = 96 if dim == 1 else 32

    corr = compute_corrector("b_hat", model, None, n=n)
    weights = stationary_node_weights(model, n=n)
    c_fields = _slow_drift_grids(model, n)
    cbar = effective_drift(weights, c_fields, corr)
    pi = effective_jump_measure(model, weights, sphere_n=64, mc_n=0,
                                master_seed=master_seed)

    if f_test is None:
        thresh = float(rho)

        def f(z):
            return (np.linalg.norm(np.asarray(z, dtype=float), axis=-1)
                    > thresh).astype(float)

        iv_limit = t * pi.tail_mass(thresh)
    else:
        f = f_test
        iv_limit = t * _pi_integral(pi, f)

    # largest corrector increment an omitted sub-cutoff jump could carry
    probe = model.jump_map.at_directions(grid_points(dim, 64),
                                         model.measure.directions)
    sig_sup = float(np.linalg.norm(probe, axis=-1).max())
    grad_sup = float(np.abs(corr.jacobian).max(initial=0.0))
    delta = drift_substep ** (1.0 / alpha)
    xi_trunc = grad_sup * sig_sup * delta

    grad_fields = [[corr.gradient_component(i, j) for j in range(dim)]
                   for i in range(dim)]

    def drift_line_fn(i):
        def fn(z):
            out = c_fields[i].eval(z).reshape(-1)
            for j in range(dim):
                out = out + grad_fields[i][j].eval(z).reshape(-1) \
                    * c_fields[j].eval(z).reshape(-1)
            return out
        return fn

    x0_unit = np.stack(
        [np.mod((np.arange(n_paths) + 0.5) / n_paths + 0.38 * a, 1.0)
         for a in range(dim)], axis=-1,
    )

    rows = []
    for ei, eps in enumerate(eps_arr):
        # corrector-adjusted drift integral, run on the rescaled clock
        t_fast = t * eps ** (-alpha)
        n_steps = max(10, int(round(t_fast / dt_fast)))
        stride = max(1, n_steps // 50)
        res = simulate_fast_chain(
            model, eps=eps, x0=x0_unit, t_max=n_steps * dt_fast, dt=dt_fast,
            master_seed=master_seed, domain=DOMAIN_PATH,
            path_offset=10_000 + 1000 * ei,
            integrands={f"lam{i}": drift_line_fn(i) for i in range(dim)},
            record_stride=stride, n_workers=n_workers,
        )
        s_macro = res.times * eps ** alpha                 # (T,)
        dev = np.zeros((n_paths, len(s_macro)))
        for i in range(dim):
            lam = eps ** alpha * res.functionals[f"lam{i}"]
            dev = np.maximum(dev, np.abs(lam - cbar.value[i] * s_macro[None, :]))
        item_i = dev.max(axis=1)                           # (n_paths,)

        # jump-sum estimators on the macroscopic paths
        ii_vals = np.zeros(n_paths)
        iii_vals = np.zeros(n_paths)
        iv_vals = np.zeros(n_paths)
        j2_vals = np.zeros(n_paths)
        n_jumps = np.zeros(n_paths)
        for p in range(n_paths):
            _, _, rec = simulate_single_path(
                model, eps=eps, x0=eps * x0_unit[p], t_max=t,
                master_seed=master_seed, drift_substep=drift_substep,
                domain=DOMAIN_PATH, path_index=50_000 + 1000 * ei + p,
                return_jumps=True,
            )
            n_jumps[p] = len(rec.times)
            if not len(rec.times):
                continue
            z = np.mod(rec.pre_states / eps, 1.0)
            dx = model.jump_map(z, rec.vectors)
            bz = corr.eval(z).reshape(len(z), -1)
            bz2 = corr.eval(np.mod(z + dx / eps, 1.0)).reshape(len(z), -1)
            xi = eps * (bz2 - bz)
            xin = np.linalg.norm(xi, axis=-1)
            iii_vals[p] = f(xi).sum()
            iv_vals[p] = f(dx).sum()
            j2_vals[p] = float((xin ** 2).sum())
            big = xin > rho
            if big.any():
                b2 = np.cumsum(-xi * big[:, None], axis=0)
                ii_vals[p] = float(np.linalg.norm(b2, axis=-1).max())

        def spread(v):
            return float(np.std(v, ddof=1) / math.sqrt(n_paths)) \
                if n_paths > 1 else 0.0

        rows.append({
            "eps": float(eps),
            "n_jumps_mean": float(n_jumps.mean()),
            "item_i_median": float(np.median(item_i)),
            "item_i_mean": float(item_i.mean()),
            "item_i_max": float(item_i.max()),
            "item_ii_sup_mean": float(ii_vals.mean()),
            "item_ii_sup_max": float(ii_vals.max()),
            "xi_second_moment_mean": float(j2_vals.mean()),
            "item_iii_mean": float(iii_vals.mean()),
            "item_iii_median": float(np.median(iii_vals)),
            "item_iii_stderr": spread(iii_vals),
            "item_iv_mean": float(iv_vals.mean()),
            "item_iv_stderr": spread(iv_vals),
        })

    def nonincreasing(key):
        vals = [r[key] for r in rows]
        return bool(all(b <= a + 1e-12 for a, b in zip(vals, vals[1:])))

    return {
        "t": t,
        "rho": float(rho),
        "n_paths": int(n_paths),
        "alpha": alpha,
        "c_bar": [float(v) for v in cbar.value],
        "c_bar_error": [float(v) for v in cbar.error],
        "pi_total_mass": pi.total_mass,
        "item_iv_limit": float(iv_limit),
        "xi_truncation_sup": float(xi_trunc),
        "epsilon": [float(e) for e in eps_arr],
        "rows": rows,
        "item_i_nonincreasing": nonincreasing("item_i_median"),
        "item_ii_nonincreasing": nonincreasing("item_ii_sup_mean"),
        "item_iii_nonincreasing": nonincreasing("item_iii_mean"),
    }


def format_fclt_report(report: dict) -> str:
    """Human-readable table for a scaling diagnostics report."""
    lines = [
        f"scaling diagnostics over [0, {report['t']}] "
        f"(alpha = {report['alpha']}, {report['n_paths']} paths)",
        f"effective drift {np.array(report['c_bar'])} "
        f"+- {np.array(report['c_bar_error'])}",
        f"macroscopic jump integral target {report['item_iv_limit']:.6g}",
        "",
        f"{'eps':>8} {'drift sup':>12} {'large-inc sup':>14} "
        f"{'second mom':>12} {'small-inc f':>12} {'macro f':>12} {'jumps':>8}",
    ]
    for r in report["rows"]:
        lines.append(
            f"{r['eps']:>8.4g} {r['item_i_median']:>12.4g} "
            f"{r['item_ii_sup_max']:>14.4g} {r['xi_second_moment_mean']:>12.4g} "
            f"{r['item_iii_mean']:>12.4g} {r['item_iv_mean']:>12.4g} "
            f"{r['n_jumps_mean']:>8.0f}"
        )
    flags = []
    for key, label in (
        ("item_i_nonincreasing", "drift sup"),
        ("item_ii_nonincreasing", "large-inc sup"),
        ("item_iii_nonincreasing", "small-inc f"),
    ):
        flags.append(f"{label}: {'yes' if report[key] else 'NO'}")
    lines.append("")
    lines.append("nonincreasing in eps  " + " | ".join(flags))
    return "\n".join(lines)
