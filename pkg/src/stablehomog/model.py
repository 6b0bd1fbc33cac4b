"""Problem data: coefficients, standing assumptions, kernel bounds.

A :class:`CoefficientModel` bundles everything that defines one instance of
the two-scale problem: the stability index, the fast (periodic, centered)
and slow drift parts, fast and slow potential parts, the initial datum, the
jump coefficient and the driving angular measure.  The same object feeds
the path simulator, the generator discretization and the homogenizer, so
provenance hashes of derived quantities all trace back to its fingerprint.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .fields import FourierField, VectorField, grid_points
from .jumpmaps import JumpMap, jump_map_from_spec
from .levy import StableMeasureSpec

__all__ = [
    "CoefficientModel",
    "AssumptionCheck",
    "ValidationReport",
    "KernelBounds",
    "validate_assumptions",
    "kernel_density",
    "kernel_bounds",
]


@dataclass
class CoefficientModel:
    dim: int
    alpha: float
    beta_target: float
    drift_fast: VectorField
    drift_slow: VectorField
    potential_fast: FourierField
    potential_slow: FourierField
    initial_data: FourierField
    jump_map: JumpMap
    measure: StableMeasureSpec | None = None

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")
        if not 1.0 < self.alpha < 2.0:
            raise ValueError("alpha must be in (1, 2)")
        lo = 1.0 - self.alpha / 2.0
        if not lo < self.beta_target < 1.0:
            raise ValueError(
                f"beta_target must lie in ({lo}, 1) for alpha = {self.alpha}"
            )
        if self.measure is None:
            self.measure = StableMeasureSpec.standard(self.dim, self.alpha)
        if self.measure.alpha != self.alpha or self.measure.dim != self.dim:
            raise ValueError("driving measure does not match (dim, alpha)")
        for name in ("drift_fast", "drift_slow"):
            if getattr(self, name).dim != self.dim:
                raise ValueError(f"{name} has wrong dimension")
        for name in ("potential_fast", "potential_slow", "initial_data"):
            if getattr(self, name).dim != self.dim:
                raise ValueError(f"{name} has wrong dimension")
        if self.jump_map.dim != self.dim:
            raise ValueError("jump map has wrong dimension")

    # -- serialization ------------------------------------------------------

    def to_spec(self) -> dict:
        return {
            "dim": self.dim,
            "alpha": self.alpha,
            "beta_target": self.beta_target,
            "fields": {
                "drift_fast": self.drift_fast.to_spec(),
                "drift_slow": self.drift_slow.to_spec(),
                "potential_fast": self.potential_fast.to_spec(),
                "potential_slow": self.potential_slow.to_spec(),
                "initial_data": self.initial_data.to_spec(),
            },
            "jump_map": self.jump_map.to_spec(),
            "measure": self.measure.to_spec(),
        }

    @classmethod
    def from_spec(cls, spec: dict) -> "CoefficientModel":
        dim = spec["dim"]
        f = spec["fields"]
        return cls(
            dim=dim,
            alpha=spec["alpha"],
            beta_target=spec["beta_target"],
            drift_fast=VectorField.from_spec(dim, f["drift_fast"]),
            drift_slow=VectorField.from_spec(dim, f["drift_slow"]),
            potential_fast=FourierField.from_spec(dim, f["potential_fast"]),
            potential_slow=FourierField.from_spec(dim, f["potential_slow"]),
            initial_data=FourierField.from_spec(dim, f["initial_data"]),
            jump_map=jump_map_from_spec(dim, spec["jump_map"]),
            measure=StableMeasureSpec.from_spec(spec["measure"]),
        )

    def fingerprint(self) -> str:
        """Stable content hash; identical models hash identically."""
        blob = json.dumps(self.to_spec(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class AssumptionCheck:
    name: str
    passed: bool
    measured: float | None = None
    tolerance: float | None = None
    witness: tuple | None = None
    note: str = ""
    deferred: bool = False


@dataclass
class ValidationReport:
    checks: list

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks if not c.deferred)

    def __getitem__(self, name: str) -> AssumptionCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def summary(self) -> str:
        lines = []
        for c in self.checks:
            tag = "DEFER" if c.deferred else ("PASS " if c.passed else "FAIL ")
            val = "" if c.measured is None else f" measured={c.measured:.3e}"
            tol = "" if c.tolerance is None else f" tol={c.tolerance:.1e}"
            note = f"  ({c.note})" if c.note else ""
            lines.append(f"[{tag}] {c.name}{val}{tol}{note}")
        return "\n".join(lines)


def validate_assumptions(model: CoefficientModel, grid_n: int = 32,
                         n_dirs: int = 32, measure_weights=None) -> ValidationReport:
    """Check the standing structural assumptions numerically.

    ``measure_weights`` (probabilities on the same grid) enables the
    centering checks for the fast coefficients; without it they are
    reported as deferred.
    """
    checks = []
    x = grid_points(model.dim, grid_n)
    if model.dim == 1:
        dirs = np.array([[1.0], [-1.0]])
    else:
        ang = 2 * np.pi * (np.arange(n_dirs) + 0.5) / n_dirs
        dirs = np.stack([np.cos(ang), np.sin(ang)], axis=-1)

    # periodicity: trig fields are periodic by construction, measure float noise
    defect = 0.0
    probes = x[:: max(1, len(x) // 16)]
    for f in (model.potential_fast, model.potential_slow, model.initial_data):
        defect = max(defect, float(np.abs(f.eval(probes) - f.eval(probes + 1.0)).max()))
    for v in (model.drift_fast, model.drift_slow):
        defect = max(defect, float(np.abs(v.eval(probes) - v.eval(probes + 1.0)).max()))
    sdef = float(
        np.abs(model.jump_map(probes, probes * 0 + 0.37)
               - model.jump_map(probes + 1.0, probes * 0 + 0.37)).max()
    )
    defect = max(defect, sdef)
    checks.append(AssumptionCheck("periodicity", defect < 1e-9, defect, 1e-9))

    sig = model.jump_map.at_directions(x, dirs)

    odd = model.jump_map.at_directions(x, -dirs)
    odd_defect = float(np.abs(sig + odd).max())
    checks.append(AssumptionCheck("jump_oddness", odd_defect < 1e-9, odd_defect, 1e-9))

    scale_defect = 0.0
    xs = x[:: max(1, len(x) // 8)]
    ys = dirs[:: max(1, len(dirs) // 4)]
    for r in (0.5, 2.0, 10.0):
        for y in ys:
            yy = np.tile(y, (len(xs), 1))
            d = np.abs(model.jump_map(xs, r * yy) - r * model.jump_map(xs, yy)) / r
            scale_defect = max(scale_defect, float(d.max()))
    checks.append(
        AssumptionCheck("jump_scaling", scale_defect < 1e-9, scale_defect, 1e-9)
    )

    norms = np.linalg.norm(sig, axis=-1)
    phi_sup = float(norms.max())
    phi_inf = float(norms.min())
    imin = np.unravel_index(np.argmin(norms), norms.shape)
    checks.append(
        AssumptionCheck(
            "jump_growth", np.isfinite(phi_sup), phi_sup,
            note=f"linear growth constant {phi_sup:.4g}",
        )
    )
    checks.append(
        AssumptionCheck(
            "jump_nondegeneracy", phi_inf > 1e-8, phi_inf, 1e-8,
            witness=(tuple(x[imin[0]]), tuple(dirs[imin[1]])),
        )
    )

    # invertibility: Jacobian determinant bounded away from zero on directions,
    # plus a round trip through the inverse solver
    nx, nk = sig.shape[:2]
    xx = np.repeat(x, nk, axis=0)
    uu = np.tile(dirs, (nx, 1))
    dets = np.abs(np.linalg.det(model.jump_map.jacobian_y(xx, uu)))
    det_min = float(dets.min())
    rng = np.random.default_rng(0)
    xp = rng.random((64, model.dim))
    yp = rng.standard_normal((64, model.dim))
    try:
        back = model.jump_map.inverse(xp, model.jump_map(xp, yp))
        rt = float(np.abs(back - yp).max())
        inv_ok = det_min > 1e-8 and rt < 1e-8
        note = ""
    except Exception as err:  # noqa: BLE001 - report, solver error is the finding
        rt = np.inf
        inv_ok = False
        note = f"inverse solve failed: {err}"
    checks.append(
        AssumptionCheck("jump_invertibility", inv_ok, det_min, 1e-8, note=note)
    )

    # Lipschitz in x (finite for trig coefficients; record the constant)
    h = 1e-5
    lip = 0.0
    for a in range(model.dim):
        e = np.zeros(model.dim)
        e[a] = h
        d = np.abs(model.jump_map.at_directions(xs + e, ys)
                   - model.jump_map.at_directions(xs - e, ys)) / (2 * h)
        lip = max(lip, float(d.max()))
    checks.append(
        AssumptionCheck("jump_x_lipschitz", np.isfinite(lip), lip,
                        note=f"Lipschitz constant in x about {lip:.4g}")
    )

    grad_sup = max(c.sup_norm() for c in model.initial_data.gradient().components)
    checks.append(
        AssumptionCheck(
            "initial_smoothness", True, grad_sup,
            note=(f"trigonometric datum, smooth; Holder target "
                  f"{model.beta_target} recorded"),
        )
    )

    for name, fobj, is_vec in (
        ("fast_drift_centering", model.drift_fast, True),
        ("fast_potential_centering", model.potential_fast, False),
    ):
        if measure_weights is None:
            checks.append(
                AssumptionCheck(
                    name, True, None, deferred=True,
                    note="needs the invariant measure; checked downstream",
                )
            )
            continue
        w = np.asarray(measure_weights, dtype=float).reshape(-1)
        gx = grid_points(model.dim, int(round(len(w) ** (1.0 / model.dim))))
        vals = fobj.eval(gx)
        if is_vec:
            mean = float(np.abs((w[:, None] * vals.reshape(len(w), -1)).sum(0)).max())
        else:
            mean = float(abs((w * vals.reshape(-1)).sum()))
        scale = max(1.0, fobj.sup_norm())
        checks.append(AssumptionCheck(name, mean < 5e-2 * scale, mean, 5e-2 * scale))

    return ValidationReport(checks)


def kernel_density(model: CoefficientModel, x: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Anisotropy factor of the state-dependent jump kernel.

    The jump kernel of the driven process is
    h(x, z) |z|^{-dim-alpha} dz in dim 2 (with dz Lebesgue), and
    h(x, z) |z|^{-1-alpha} dz separately on each half line in dim 1.
    Computed by pushing the driving measure through the jump map:
    h = lambda-density at the pulled-back direction times
    |det D tau| (|z| / |tau|)^{dim + alpha} with tau the y-inverse.
    """
    x = np.asarray(x, dtype=float).reshape(-1, model.dim)
    z = np.asarray(z, dtype=float).reshape(-1, model.dim)
    tau = model.jump_map.inverse(x, z)
    J = model.jump_map.jacobian_y(x, tau)
    det = np.abs(np.linalg.det(J))
    rz = np.linalg.norm(z, axis=1)
    rt = np.linalg.norm(tau, axis=1)
    ratio = (rz / rt) ** (model.dim + model.alpha)
    spec = model.measure
    if model.dim == 1:
        ang = np.where(tau[:, 0] > 0, spec.weights[0], spec.weights[1])
    else:
        n = len(spec.density)
        theta = np.mod(np.arctan2(tau[:, 1], tau[:, 0]), 2 * np.pi)
        cell = np.minimum((theta / (2 * np.pi / n)).astype(int), n - 1)
        ang = spec.density[cell]
    return ang * ratio / det


@dataclass
class KernelBounds:
    phi_sup: float
    phi_inf: float
    h_min: float
    h_max: float
    gamma: float
    moment_sup: float


def kernel_bounds(model: CoefficientModel, grid_n: int = 32,
                  n_dirs: int = 64) -> KernelBounds:
    """Uniform kernel bounds over the torus.

    ``moment_sup`` bounds the gamma-moment of jumps inside the unit ball,
    for a gamma slightly above alpha; finiteness of this moment is what the
    well-posedness assumptions ask for.
    """
    phi_inf, phi_sup = model.jump_map.direction_bounds(grid_n, n_dirs)
    x = grid_points(model.dim, grid_n)
    if model.dim == 1:
        zdirs = np.array([[1.0], [-1.0]])
    else:
        ang = 2 * np.pi * (np.arange(n_dirs) + 0.5) / n_dirs
        zdirs = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    hs = []
    for u in zdirs:
        zz = np.tile(u, (len(x), 1))
        hs.append(kernel_density(model, x, zz))
    hvals = np.stack(hs)
    gamma = model.alpha + 0.1
    sig = model.jump_map.at_directions(x, model.measure.directions)
    mom = (np.linalg.norm(sig, axis=-1) ** gamma * model.measure.quad_weights).sum(-1)
    moment_sup = float(mom.max()) / (gamma - model.alpha)
    return KernelBounds(
        phi_sup=phi_sup,
        phi_inf=phi_inf,
        h_min=float(hvals.min()),
        h_max=float(hvals.max()),
        gamma=gamma,
        moment_sup=moment_sup,
    )
