"""Jump coefficients sigma(x, y).

A jump map sends a pre-jump state x and a noise increment y to the actual
jump size.  All maps here are periodic in x, positively homogeneous of
degree 1 in y and odd in y, so they are determined by their values for unit
y and jumps scale linearly with the noise radius.  Maps must be invertible
in y for fixed x; the inverse is what turns the driving measure into a
state-dependent jump kernel.
"""

from __future__ import annotations

import numpy as np

from .fields import FourierField, MatrixField, grid_points

__all__ = [
    "JumpMap",
    "jump_map_from_spec",
    "LinearJumpMap",
    "SphereMap",
    "SeparableJumpMap",
    "PerturbedJumpMap",
    "NewtonError",
]


def jump_map_from_spec(dim: int, spec: dict) -> "JumpMap":
    """Rebuild a jump map from its serialized form."""
    kind = spec["kind"]
    if kind == "linear":
        return LinearJumpMap(MatrixField.from_spec(dim, spec["matrix"]))
    if kind == "separable":
        amp = FourierField.from_spec(2, spec["amplitude"])
        shape = SphereMap(
            FourierField.from_spec(1, spec["shape"][0]),
            FourierField.from_spec(1, spec["shape"][1]),
        )
        return SeparableJumpMap(amp, shape)
    if kind == "perturbed":
        base = jump_map_from_spec(dim, spec["base"])
        env = FourierField.from_spec(2, spec["envelope"])
        shape = SphereMap(
            FourierField.from_spec(1, spec["shape"][0]),
            FourierField.from_spec(1, spec["shape"][1]),
        )
        return PerturbedJumpMap(base, env, shape, spec["scale"])
    raise ValueError(f"unknown jump map kind {kind!r}")


class NewtonError(RuntimeError):
    """Inverse solve failed; carries one witness point."""

    def __init__(self, message, x=None, z=None, residual=None):
        super().__init__(message)
        self.x = x
        self.z = z
        self.residual = residual


class JumpMap:
    """Base class; subclasses implement __call__ and may override the rest."""

    dim: int

    def __call__(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def at_directions(self, x: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        """sigma(x_i, theta_k) for all pairs; shape (Nx, Nk, dim)."""
        x = np.asarray(x, dtype=float).reshape(-1, self.dim)
        dirs = np.asarray(dirs, dtype=float).reshape(-1, self.dim)
        nx, nk = len(x), len(dirs)
        xx = np.repeat(x, nk, axis=0)
        yy = np.tile(dirs, (nx, 1))
        return self(xx, yy).reshape(nx, nk, self.dim)

    def jacobian_y(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """d sigma / d y, shape (N, dim, dim).

        Homogeneity makes the Jacobian degree-0 in y, so finite differences
        are taken at unit radius regardless of |y|.
        """
        x = np.asarray(x, dtype=float).reshape(-1, self.dim)
        y = np.asarray(y, dtype=float).reshape(-1, self.dim)
        r = np.linalg.norm(y, axis=1, keepdims=True)
        if np.any(r == 0):
            raise ValueError("Jacobian is undefined at y = 0")
        u = y / r
        h = 1e-6
        out = np.empty((len(x), self.dim, self.dim))
        for j in range(self.dim):
            e = np.zeros(self.dim)
            e[j] = h
            out[:, :, j] = (self(x, u + e) - self(x, u - e)) / (2 * h)
        return out

    def inverse(self, x: np.ndarray, z: np.ndarray, tol: float = 1e-12,
                max_iter: int = 50) -> np.ndarray:
        """Solve sigma(x, y) = z for y (damped Newton, vectorized)."""
        x = np.asarray(x, dtype=float).reshape(-1, self.dim)
        z = np.asarray(z, dtype=float).reshape(-1, self.dim)
        zn = np.linalg.norm(z, axis=1)
        live = zn > 0
        y = np.zeros_like(z)
        if not live.any():
            return y
        xl, zl = x[live], z[live]
        lo, hi = self.direction_bounds()
        scale = np.sqrt(lo * hi)
        yl = zl / scale
        target = np.linalg.norm(zl, axis=1)
        res = np.linalg.norm(self(xl, yl) - zl, axis=1)
        for _ in range(max_iter):
            active = res > tol * target
            if not active.any():
                break
            xa, za = xl[active], zl[active]
            ya = yl[active]
            J = self.jacobian_y(xa, ya)
            step = np.linalg.solve(J, (za - self(xa, ya))[..., None])[..., 0]
            lam = np.ones(len(ya))
            cur = res[active]
            for _ in range(20):
                cand = ya + lam[:, None] * step
                cn = np.linalg.norm(self(xa, cand) - za, axis=1)
                better = cn < cur
                if better.all():
                    break
                lam = np.where(better, lam, lam * 0.5)
            ya = ya + lam[:, None] * step
            yl[active] = ya
            res[active] = np.linalg.norm(self(xa, ya) - za, axis=1)
        else:
            bad = int(np.argmax(res / target))
            raise NewtonError(
                f"jump map inverse did not converge (residual {res[bad]:.3e})",
                x=xl[bad], z=zl[bad], residual=float(res[bad]),
            )
        y[live] = yl
        return y

    def direction_bounds(self, grid_n: int = 32, n_dirs: int = 64):
        """(inf, sup) of |sigma(x, theta)| over a grid of x and directions."""
        x = grid_points(self.dim, grid_n)
        if self.dim == 1:
            dirs = np.array([[1.0], [-1.0]])
        else:
            ang = 2 * np.pi * (np.arange(n_dirs) + 0.5) / n_dirs
            dirs = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
        norms = np.linalg.norm(self.at_directions(x, dirs), axis=-1)
        return float(norms.min()), float(norms.max())

    def phi_bound(self, grid_n: int = 32, n_dirs: int = 64) -> float:
        return self.direction_bounds(grid_n, n_dirs)[1]


class LinearJumpMap(JumpMap):
    """sigma(x, y) = A(x) y with A a periodic matrix field.

    For dim 1 pass a scalar field (or constant); the matrix is 1x1.
    """

    def __init__(self, matrix):
        if isinstance(matrix, FourierField):
            matrix = MatrixField.scalar(matrix)
        elif np.isscalar(matrix):
            matrix = MatrixField.constant(1, float(matrix))
        self.matrix = matrix
        self.dim = matrix.dim

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float).reshape(-1, self.dim)
        y = np.asarray(y, dtype=float).reshape(-1, self.dim)
        A = self.matrix.eval(x).reshape(-1, self.dim, self.dim)
        return np.einsum("nij,nj->ni", A, y)

    def at_directions(self, x, dirs):
        x = np.asarray(x, dtype=float).reshape(-1, self.dim)
        dirs = np.asarray(dirs, dtype=float).reshape(-1, self.dim)
        A = self.matrix.eval(x).reshape(-1, self.dim, self.dim)
        return np.einsum("nij,kj->nki", A, dirs)

    def jacobian_y(self, x, y):
        x = np.asarray(x, dtype=float).reshape(-1, self.dim)
        return self.matrix.eval(x).reshape(-1, self.dim, self.dim)

    def inverse(self, x, z, tol=1e-12, max_iter=50):
        x = np.asarray(x, dtype=float).reshape(-1, self.dim)
        z = np.asarray(z, dtype=float).reshape(-1, self.dim)
        A = self.matrix.eval(x).reshape(-1, self.dim, self.dim)
        return np.linalg.solve(A, z[..., None])[..., 0]

    def to_spec(self) -> dict:
        return {"kind": "linear", "matrix": self.matrix.to_spec()}


class SphereMap:
    """Odd map of the circle into the plane, s(theta + pi) = -s(theta).

    Components are trigonometric polynomials in the normalized angle
    u = theta / (2 pi); oddness means only odd harmonics appear, which is
    checked at construction.  The identity is s(theta) = (cos, sin)(theta).
    """

    def __init__(self, comp1: FourierField, comp2: FourierField):
        for c in (comp1, comp2):
            if c.dim != 1:
                raise ValueError("sphere map components are functions of the angle only")
            live = np.abs(c.coeffs) > 0
            if live.any() and not np.all(np.abs(c.modes[live, 0]) % 2 == 1):
                raise ValueError("sphere map must be odd: only odd harmonics allowed")
        self.comp1 = comp1
        self.comp2 = comp2

    @classmethod
    def identity(cls) -> "SphereMap":
        return cls(
            FourierField.from_harmonics(1, cos={1: 1.0}),
            FourierField.from_harmonics(1, sin={1: 1.0}),
        )

    def eval_angle(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return np.stack([self.comp1.eval(u), self.comp2.eval(u)], axis=-1)

    def eval(self, y: np.ndarray) -> np.ndarray:
        """Homogeneous extension |y| * s(y / |y|); zero at the origin."""
        y = np.asarray(y, dtype=float).reshape(-1, 2)
        r = np.linalg.norm(y, axis=1)
        u = np.arctan2(y[:, 1], y[:, 0]) / (2 * np.pi)
        return r[:, None] * self.eval_angle(u)


class SeparableJumpMap(JumpMap):
    """sigma(x, y) = amplitude(x) * shape(y) with shape an odd homogeneous map.

    dim 2 only; for dim 1 every admissible map is already linear.
    """

    def __init__(self, amplitude: FourierField, shape: SphereMap):
        if amplitude.dim != 2:
            raise ValueError("separable maps are for dim 2")
        self.amplitude = amplitude
        self.shape = shape
        self.dim = 2

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float).reshape(-1, 2)
        y = np.asarray(y, dtype=float).reshape(-1, 2)
        return self.amplitude.eval(x)[:, None] * self.shape.eval(y)

    def at_directions(self, x, dirs):
        x = np.asarray(x, dtype=float).reshape(-1, 2)
        dirs = np.asarray(dirs, dtype=float).reshape(-1, 2)
        a = self.amplitude.eval(x)
        s = self.shape.eval(dirs)
        return a[:, None, None] * s[None, :, :]

    def to_spec(self) -> dict:
        return {
            "kind": "separable",
            "amplitude": self.amplitude.to_spec(),
            "shape": [self.shape.comp1.to_spec(), self.shape.comp2.to_spec()],
        }


class PerturbedJumpMap(JumpMap):
    """base(x, y) + scale * envelope(x) * shape(y).

    A non-separable test map: the direction response varies with x.  Kept
    odd and homogeneous by construction; invertibility must be checked for
    the chosen scale.
    """

    def __init__(self, base: JumpMap, envelope: FourierField, shape: SphereMap,
                 scale: float):
        if base.dim != 2:
            raise ValueError("perturbed maps are for dim 2")
        self.base = base
        self.envelope = envelope
        self.shape = shape
        self.scale = float(scale)
        self.dim = 2

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float).reshape(-1, 2)
        y = np.asarray(y, dtype=float).reshape(-1, 2)
        bump = self.envelope.eval(x)[:, None] * self.shape.eval(y)
        return self.base(x, y) + self.scale * bump

    def to_spec(self) -> dict:
        return {
            "kind": "perturbed",
            "base": self.base.to_spec(),
            "envelope": self.envelope.to_spec(),
            "shape": [self.shape.comp1.to_spec(), self.shape.comp2.to_spec()],
            "scale": self.scale,
        }
