"""Periodic fields on the unit torus.

Two representations are used throughout the package:

* :class:`FourierField` stores a real trigonometric polynomial by its complex
  Fourier coefficients.  Model coefficients are given in this form, so
  periodicity and derivatives are exact.
* :class:`GridField` stores values on a uniform grid.  Solver output lives
  here; off-grid evaluation uses periodic cubic (4-point Lagrange)
  interpolation and derivatives are spectral.

All fields have period 1 in every coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "FourierField",
    "VectorField",
    "MatrixField",
    "GridField",
    "cubic_interp_indices",
    "periodic_cubic_interp",
    "spectral_derivative",
    "fourier_modes",
]


def _as_points(x, dim):
    """Normalize point input to an (N, dim) array plus the caller's shape."""
    pts = np.asarray(x, dtype=float)
    if dim == 1:
        shape = pts.shape
        return pts.reshape(-1, 1), shape
    if pts.ndim == 0 or pts.shape[-1] != dim:
        raise ValueError(f"expected points with last axis {dim}, got shape {pts.shape}")
    return pts.reshape(-1, dim), pts.shape[:-1]


class FourierField:
    """Real trigonometric polynomial on the torus.

    Coefficients are stored for every mode including negatives; Hermitian
    symmetry (real values) is enforced at construction.
    """

    def __init__(self, dim: int, modes, coeffs):
        if dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")
        self.dim = dim
        modes = np.asarray(modes, dtype=np.int64).reshape(-1, dim)
        coeffs = np.asarray(coeffs, dtype=complex).reshape(-1)
        if len(modes) != len(coeffs):
            raise ValueError("modes and coeffs length mismatch")
        # merge duplicate modes and drop numerically dead ones
        table: dict[tuple, complex] = {}
        for m, c in zip(map(tuple, modes), coeffs):
            table[m] = table.get(m, 0.0) + c
        for m in list(table):
            neg = tuple(-k for k in m)
            if neg not in table:
                table[neg] = 0.0
        keys = sorted(
            m for m in table if table[m] != 0 or table[tuple(-k for k in m)] != 0
        )
        self.modes = np.array(keys, dtype=np.int64).reshape(-1, dim)
        self.coeffs = np.array([table[k] for k in keys], dtype=complex)
        herm = np.array([table[tuple(-k for k in m)] for m in keys], dtype=complex)
        defect = np.abs(self.coeffs - np.conj(herm)).max() if len(keys) else 0.0
        scale = max(1.0, np.abs(self.coeffs).max()) if len(keys) else 1.0
        if defect > 1e-12 * scale:
            raise ValueError("coefficients are not Hermitian; field would be complex")

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls, dim: int) -> "FourierField":
        return cls(dim, np.zeros((0, dim)), np.zeros(0))

    @classmethod
    def constant(cls, dim: int, value: float) -> "FourierField":
        return cls(dim, np.zeros((1, dim)), np.array([complex(value)]))

    @classmethod
    def from_harmonics(cls, dim: int, const: float = 0.0, cos=None, sin=None) -> "FourierField":
        """Build from real cosine/sine amplitude tables.

        ``cos`` and ``sin`` map a mode (an int for dim 1, a tuple for dim 2)
        to the amplitude of cos(2 pi k.x) resp. sin(2 pi k.x).
        """
        modes = [tuple([0] * dim)]
        coeffs = [complex(const)]
        for table, factor in ((cos or {}, 0.5), (sin or {}, -0.5j)):
            for k, amp in table.items():
                kt = (int(k),) if np.isscalar(k) else tuple(int(v) for v in k)
                if len(kt) != dim:
                    raise ValueError(f"mode {kt} does not match dim {dim}")
                if all(v == 0 for v in kt):
                    raise ValueError("use const for the zero mode")
                modes.append(kt)
                coeffs.append(factor * amp)
                modes.append(tuple(-v for v in kt))
                coeffs.append(np.conj(factor * amp))
        return cls(dim, np.array(modes), np.array(coeffs))

    # -- queries ------------------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return len(self.coeffs) == 0 or bool(np.abs(self.coeffs).max() == 0.0)

    @property
    def max_mode(self) -> int:
        if len(self.modes) == 0:
            return 0
        return int(np.abs(self.modes).max())

    def eval(self, x):
        pts, shape = _as_points(x, self.dim)
        if len(self.coeffs) == 0:
            return np.zeros(shape)
        phase = np.exp(2j * np.pi * (pts @ self.modes.T))
        return (phase @ self.coeffs).real.reshape(shape)

    __call__ = eval

    def derivative(self, axis: int) -> "FourierField":
        factor = 2j * np.pi * self.modes[:, axis]
        return FourierField(self.dim, self.modes, self.coeffs * factor)

    def gradient(self) -> "VectorField":
        return VectorField([self.derivative(a) for a in range(self.dim)])

    def on_grid(self, n: int) -> np.ndarray:
        g = grid_points(self.dim, n)
        return self.eval(g).reshape(-1)

    def sup_norm(self) -> float:
        n = max(64, 8 * self.max_mode)
        return float(np.abs(self.on_grid(n)).max())

    def mean(self) -> float:
        zero = np.all(self.modes == 0, axis=1)
        return float(self.coeffs[zero].real.sum()) if zero.any() else 0.0

    def coeff(self, mode) -> complex:
        kt = np.atleast_1d(np.asarray(mode, dtype=np.int64))
        hit = np.all(self.modes == kt[None, :], axis=1)
        return complex(self.coeffs[hit][0]) if hit.any() else 0.0

    def __add__(self, other):
        if np.isscalar(other):
            other = FourierField.constant(self.dim, float(other))
        return FourierField(
            self.dim,
            np.vstack([self.modes, other.modes]),
            np.concatenate([self.coeffs, other.coeffs]),
        )

    __radd__ = __add__

    def __mul__(self, scalar):
        return FourierField(self.dim, self.modes, self.coeffs * float(scalar))

    __rmul__ = __mul__

    # -- serialization ------------------------------------------------------

    def to_spec(self) -> dict:
        """Lossless cosine/sine table representation (JSON friendly)."""
        const = self.mean()
        cos, sin = [], []
        seen = set()
        for m, c in zip(map(tuple, self.modes), self.coeffs):
            if all(v == 0 for v in m) or m in seen:
                continue
            neg = tuple(-v for v in m)
            seen.add(m)
            seen.add(neg)
            # report the lexicographically positive representative
            rep = m if m > neg else neg
            crep = c if rep == m else np.conj(c)
            a, b = 2 * crep.real, -2 * crep.imag
            if a != 0.0:
                cos.append([list(map(int, rep)), float(a)])
            if b != 0.0:
                sin.append([list(map(int, rep)), float(b)])
        return {"const": float(const), "cos": sorted(cos), "sin": sorted(sin)}

    @classmethod
    def from_spec(cls, dim: int, spec: dict) -> "FourierField":
        cos = {tuple(k): v for k, v in spec.get("cos", [])}
        sin = {tuple(k): v for k, v in spec.get("sin", [])}
        return cls.from_harmonics(dim, const=spec.get("const", 0.0), cos=cos, sin=sin)


class VectorField:
    """Vector of FourierFields; values in R^dim."""

    def __init__(self, components):
        self.components = list(components)
        self.dim = self.components[0].dim
        if len(self.components) != self.dim:
            raise ValueError("vector field needs one component per dimension")

    @classmethod
    def zero(cls, dim: int) -> "VectorField":
        return cls([FourierField.zero(dim) for _ in range(dim)])

    @classmethod
    def constant(cls, dim: int, values) -> "VectorField":
        vals = np.broadcast_to(np.asarray(values, dtype=float), (dim,))
        return cls([FourierField.constant(dim, v) for v in vals])

    @property
    def is_zero(self) -> bool:
        return all(c.is_zero for c in self.components)

    def eval(self, x):
        pts, shape = _as_points(x, self.dim)
        out = np.stack([c.eval(pts).reshape(-1) for c in self.components], axis=-1)
        return out.reshape(shape + (self.dim,))

    __call__ = eval

    def sup_norm(self) -> float:
        return max(c.sup_norm() for c in self.components)

    def max_mode(self) -> int:
        return max(c.max_mode for c in self.components)

    def to_spec(self):
        return [c.to_spec() for c in self.components]

    @classmethod
    def from_spec(cls, dim, spec):
        return cls([FourierField.from_spec(dim, s) for s in spec])


class MatrixField:
    """dim x dim matrix of FourierFields."""

    def __init__(self, rows):
        self.rows = [list(r) for r in rows]
        self.dim = self.rows[0][0].dim
        if len(self.rows) != self.dim or any(len(r) != self.dim for r in self.rows):
            raise ValueError("matrix field must be dim x dim")

    @classmethod
    def constant(cls, dim: int, matrix) -> "MatrixField":
        m = np.broadcast_to(np.asarray(matrix, dtype=float), (dim, dim))
        return cls([[FourierField.constant(dim, m[i, j]) for j in range(dim)] for i in range(dim)])

    @classmethod
    def scalar(cls, field: FourierField) -> "MatrixField":
        """Isotropic matrix field field(x) * I (the only option for dim 1)."""
        dim = field.dim
        zero = FourierField.zero(dim)
        return cls([[field if i == j else zero for j in range(dim)] for i in range(dim)])

    def eval(self, x):
        pts, shape = _as_points(x, self.dim)
        out = np.empty((len(pts), self.dim, self.dim))
        for i in range(self.dim):
            for j in range(self.dim):
                out[:, i, j] = self.rows[i][j].eval(pts).reshape(-1)
        return out.reshape(shape + (self.dim, self.dim))

    __call__ = eval

    def to_spec(self):
        return [[f.to_spec() for f in r] for r in self.rows]

    @classmethod
    def from_spec(cls, dim, spec):
        return cls([[FourierField.from_spec(dim, s) for s in r] for r in spec])


# ---------------------------------------------------------------------------
# grid machinery


def grid_points(dim: int, n: int) -> np.ndarray:
    """Uniform torus grid; shape (n, 1) for dim 1, (n*n, 2) for dim 2.

    dim 2 ordering is row-major in (x1, x2), matching ``values.reshape(n, n)``
    with axis 0 = x1.
    """
    x = np.arange(n) / n
    if dim == 1:
        return x[:, None]
    a, b = np.meshgrid(x, x, indexing="ij")
    return np.stack([a.ravel(), b.ravel()], axis=-1)


def fourier_modes(dim: int, n: int) -> np.ndarray:
    """Integer frequency vectors in FFT order, flattened; shape (n**dim, dim)."""
    k = np.fft.fftfreq(n, 1.0 / n).astype(np.int64)
    if dim == 1:
        return k[:, None]
    a, b = np.meshgrid(k, k, indexing="ij")
    return np.stack([a.ravel(), b.ravel()], axis=-1)


def cubic_interp_indices(pos, n):
    """4-point Lagrange weights for periodic interpolation in one axis.

    ``pos`` is in grid units (x * n).  Returns (idx, w) with shape
    pos.shape + (4,); idx values are already wrapped mod n.
    """
    pos = np.asarray(pos, dtype=float)
    j = np.floor(pos)
    t = pos - j
    jb = j.astype(np.int64)
    idx = np.stack([(jb - 1) % n, jb % n, (jb + 1) % n, (jb + 2) % n], axis=-1)
    w = np.empty(t.shape + (4,))
    w[..., 0] = -t * (t - 1.0) * (t - 2.0) / 6.0
    w[..., 1] = (t * t - 1.0) * (t - 2.0) / 2.0
    w[..., 2] = -t * (t + 1.0) * (t - 2.0) / 2.0
    w[..., 3] = t * (t * t - 1.0) / 6.0
    return idx, w


def periodic_cubic_interp(values: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Evaluate grid values at arbitrary torus points.

    values: (n,) for dim 1 or (n, n) for dim 2; points: (N, dim).
    """
    if values.ndim == 1:
        n = values.shape[0]
        idx, w = cubic_interp_indices(points[:, 0] * n, n)
        return (values[idx] * w).sum(axis=-1)
    n = values.shape[0]
    idx0, w0 = cubic_interp_indices(points[:, 0] * n, n)
    idx1, w1 = cubic_interp_indices(points[:, 1] * n, n)
    out = np.zeros(len(points))
    for a in range(4):
        row = values[idx0[:, a]]
        gathered = np.take_along_axis(row, idx1, axis=1)
        out += w0[:, a] * (gathered * w1).sum(axis=-1)
    return out


def spectral_derivative(values: np.ndarray, orders) -> np.ndarray:
    """Mixed spectral derivative of grid values.

    ``orders`` gives the derivative order per axis, e.g. (1,) or (2, 0).
    Nyquist modes are zeroed for odd total order, the usual convention for
    real data on an even grid.
    """
    orders = tuple(orders)
    vhat = np.fft.fftn(values)
    for axis, p in enumerate(orders):
        if p == 0:
            continue
        n = values.shape[axis]
        k = np.fft.fftfreq(n, 1.0 / n)
        if p % 2 == 1 and n % 2 == 0:
            k = k.copy()
            k[n // 2] = 0.0
        mult = (2j * np.pi * k) ** p
        shape = [1] * values.ndim
        shape[axis] = n
        vhat = vhat * mult.reshape(shape)
    return np.fft.ifftn(vhat).real


@dataclass
class GridField:
    """Values of a periodic field on the uniform torus grid."""

    dim: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.dim == 1 and self.values.ndim != 1:
            raise ValueError("dim 1 grid field needs 1-d values")
        if self.dim == 2:
            if self.values.ndim != 2 or self.values.shape[0] != self.values.shape[1]:
                raise ValueError("dim 2 grid field needs square values")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def mesh(self) -> float:
        return 1.0 / self.n

    @classmethod
    def from_fourier(cls, field: FourierField, n: int) -> "GridField":
        vals = field.on_grid(n)
        if field.dim == 2:
            vals = vals.reshape(n, n)
        return cls(field.dim, vals)

    def eval(self, x):
        pts, shape = _as_points(x, self.dim)
        return periodic_cubic_interp(self.values, pts).reshape(shape)

    __call__ = eval

    def derivative(self, axis: int) -> "GridField":
        orders = [0] * self.dim
        orders[axis] = 1
        return GridField(self.dim, spectral_derivative(self.values, orders))

    def gradient_values(self) -> np.ndarray:
        """Spectral gradient at the grid nodes, shape (n**dim, dim)."""
        return np.stack(
            [self.derivative(a).values.ravel() for a in range(self.dim)], axis=-1
        )

    def mean(self) -> float:
        return float(self.values.mean())

    def sup_norm(self) -> float:
        return float(np.abs(self.values).max())

    def refine(self, n_new: int) -> "GridField":
        """Trigonometric upsampling to a finer grid (exact for band-limited data)."""
        n = self.n
        if n_new == n:
            return GridField(self.dim, self.values.copy())
        if n_new % n != 0:
            raise ValueError("refinement target must be a multiple of the current grid")
        out = self.values
        for axis in range(self.dim):
            out = _upsample_axis(out, axis, n_new)
        return GridField(self.dim, out)


def _upsample_axis(values: np.ndarray, axis: int, n_new: int) -> np.ndarray:
    """Zero-pad the FFT along one axis; Nyquist split keeps real data real."""
    n = values.shape[axis]
    vhat = np.moveaxis(np.fft.fft(values, axis=axis), axis, 0)
    out = np.zeros((n_new,) + vhat.shape[1:], dtype=complex)
    half = n // 2
    if n % 2 == 0:
        out[:half] = vhat[:half]
        out[n_new - half + 1:] = vhat[half + 1:]
        out[half] = 0.5 * vhat[half]
        out[n_new - half] = 0.5 * vhat[half]
    else:
        out[: half + 1] = vhat[: half + 1]
        out[n_new - half:] = vhat[half + 1:]
    res = np.fft.ifft(out, axis=0).real * (n_new / n)
    return np.moveaxis(res, 0, axis)
