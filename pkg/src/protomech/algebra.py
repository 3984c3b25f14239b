"""Lie algebras given by structure constants, and gridded semidirect products.

Conventions
-----------
``c[i, j, k]`` holds the structure constant with ``[e_i, e_j] = sum_k c[i, j, k] e_k``.
The coadjoint action uses the plus sign::

    <ad*_xi mu, zeta> = <mu, [xi, zeta]>

so that for so(3) with the identity pairing ``ad*_xi mu = mu x xi`` and the
free rigid body reads ``dm/dt = m x Omega``.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import spectral

JACOBI_TOL = 1e-12


def _as_vector(v, dim, what):
    v = np.asarray(v, dtype=float)
    if v.shape != (dim,):
        raise ValueError(f"{what} has shape {v.shape}, expected ({dim},)")
    return v


@dataclass(frozen=True, eq=False)
class AlgebraSpec:
    """Finite-dimensional real Lie algebra with a metric pairing."""

    c: np.ndarray
    metric: np.ndarray = None
    basis_labels: tuple = ()
    dim: int = field(init=False)

    def __post_init__(self):
        c = np.array(self.c, dtype=float)
        if c.ndim != 3 or len(set(c.shape)) != 1 or c.shape[0] < 1:
            raise ValueError(f"structure constants must be n x n x n, got {c.shape}")
        dim = c.shape[0]
        metric = np.eye(dim) if self.metric is None else np.array(self.metric, dtype=float)
        if metric.shape != (dim, dim):
            raise ValueError(f"metric has shape {metric.shape}, expected ({dim}, {dim})")
        if not np.allclose(metric, metric.T, atol=1e-14):
            raise ValueError("metric is not symmetric")
        if np.linalg.eigvalsh(metric).min() <= 0:
            raise ValueError("metric is not positive definite")
        if np.abs(c + c.transpose(1, 0, 2)).max() > 0:
            raise ValueError("structure constants are not antisymmetric in (i, j)")
        labels = tuple(self.basis_labels) or tuple(f"e{i + 1}" for i in range(dim))
        if len(labels) != dim:
            raise ValueError("basis_labels length does not match dim")
        c.setflags(write=False)
        metric.setflags(write=False)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "metric", metric)
        object.__setattr__(self, "basis_labels", labels)
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "_flat_metric", bool(np.array_equal(metric, np.eye(dim))))
        object.__setattr__(self, "_c2", c.reshape(dim, dim * dim))
        object.__setattr__(self, "_upper", np.triu_indices(dim, 1))
        res = self.jacobi_tensor_residual()
        if res > JACOBI_TOL:
            raise ValueError(f"Jacobi identity violated (residual {res:.3e})")

    def jacobi_tensor_residual(self):
        """Max abs entry of the fully contracted Jacobi tensor."""
        c = self.c
        # [[e_i, e_j], e_k] + cyclic, expressed on e_m
        t = np.einsum("ijl,lkm->ijkm", c, c)
        jac = t + t.transpose(1, 2, 0, 3) + t.transpose(2, 0, 1, 3)
        return float(np.abs(jac).max())

    def ad_matrix(self, xi):
        """Matrix of ad_xi: (ad_xi zeta)_k = sum_j A[k, j] zeta_j."""
        xi = _as_vector(xi, self.dim, "xi")
        return self._contract(xi).T

    def _contract(self, xi):
        # (xi . c)[j, k] = sum_i xi_i c[i, j, k]
        return (xi @ self._c2).reshape(self.dim, self.dim)

    def bracket(self, x, y):
        x = _as_vector(x, self.dim, "x")
        y = _as_vector(y, self.dim, "y")
        # sum over i < j of c[i, j] (x_i y_j - x_j y_i): exactly antisymmetric in floating point
        w = np.outer(x, y)
        iu = self._upper
        return (w[iu] - w.T[iu]) @ self.c[iu]

    def ad_star(self, xi, mu):
        mu = _as_vector(mu, self.dim, "mu")
        xi = _as_vector(xi, self.dim, "xi")
        # metric^{-1} A^T metric mu, with A the matrix of ad_xi
        a_t = self._contract(xi)
        if self._flat_metric:
            return a_t @ mu
        return np.linalg.solve(self.metric, a_t @ (self.metric @ mu))

    def pairing(self, mu, xi):
        mu = _as_vector(mu, self.dim, "mu")
        xi = _as_vector(xi, self.dim, "xi")
        return float(mu @ self.metric @ xi)

    @classmethod
    def so3(cls):
        c = np.zeros((3, 3, 3))
        for i, j, k in [(0, 1, 2), (1, 2, 0), (2, 0, 1)]:
            c[i, j, k] = 1.0
            c[j, i, k] = -1.0
        return cls(c, basis_labels=("e1", "e2", "e3"))

    @classmethod
    def from_json(cls, doc):
        """Build from ``{"dim": n, "c": [[i, j, k, value], ...], "metric": ...}``.

        Only the listed entries are set; antisymmetric partners must be listed
        explicitly or the antisymmetry check rejects the document.
        """
        if isinstance(doc, str):
            doc = json.loads(doc)
        unknown = set(doc) - {"dim", "c", "metric", "basis_labels"}
        if unknown:
            raise ValueError(f"unknown keys in algebra document: {sorted(unknown)}")
        dim = int(doc["dim"])
        if dim < 1:
            raise ValueError("dim must be positive")
        c = np.zeros((dim, dim, dim))
        for entry in doc.get("c", []):
            i, j, k, value = entry
            c[int(i), int(j), int(k)] = float(value)
        return cls(c, metric=doc.get("metric"), basis_labels=tuple(doc.get("basis_labels", ())))

    def to_json(self):
        idx = np.argwhere(self.c != 0)
        entries = [[int(i), int(j), int(k), float(self.c[i, j, k])] for i, j, k in idx]
        doc = {"dim": self.dim, "c": entries, "basis_labels": list(self.basis_labels)}
        if not np.array_equal(self.metric, np.eye(self.dim)):
            doc["metric"] = self.metric.tolist()
        return json.dumps(doc)


class GridAlgebra:
    """Vector fields on a periodic 1-D grid, optionally extended by functions.

    Elements are arrays of shape ``(1 + n_functions, n)``: row 0 is the vector
    field component, the remaining rows are the advected scalar functions.
    The bracket is::

        [(v1, U1, ...), (v2, U2, ...)] = (v1 v2' - v2 v1', v1 U2' - v2 U1', ...)

    Dual elements use the same layout and pair by the grid L2 product.
    """

    def __init__(self, n, length=2.0 * np.pi, n_functions=0):
        if n < 8:
            raise ValueError("grid algebra needs at least 8 points")
        if length <= 0:
            raise ValueError("length must be positive")
        self.n = int(n)
        self.length = float(length)
        self.n_functions = int(n_functions)
        self.dx = self.length / self.n
        self.shape = (1 + self.n_functions, self.n)

    def __repr__(self):
        return f"GridAlgebra(n={self.n}, length={self.length}, n_functions={self.n_functions})"

    def _check(self, a, what):
        a = np.asarray(a, dtype=float)
        if a.shape != self.shape:
            raise ValueError(f"{what} has shape {a.shape}, expected {self.shape}")
        return a

    def d(self, f):
        return spectral.derivative(f, self.length)

    def bracket(self, x, y):
        x = self._check(x, "x")
        y = self._check(y, "y")
        v1, v2 = x[0], y[0]
        out = np.empty(self.shape)
        out[0] = v1 * self.d(v2) - v2 * self.d(v1)
        for r in range(1, self.shape[0]):
            out[r] = v1 * self.d(y[r]) - v2 * self.d(x[r])
        return out

    def ad_star(self, xi, mu):
        xi = self._check(xi, "xi")
        mu = self._check(mu, "mu")
        u = xi[0]
        m = mu[0]
        out = np.empty(self.shape)
        out[0] = -self.d(m * u) - m * self.d(u)
        for r in range(1, self.shape[0]):
            out[0] -= mu[r] * self.d(xi[r])
            out[r] = -self.d(mu[r] * u)
        return out

    def pairing(self, mu, xi):
        mu = self._check(mu, "mu")
        xi = self._check(xi, "xi")
        return float(np.sum(mu * xi) * self.dx)


def semidirect_extend(base, n_functions):
    """Semidirect product of a gridded vector-field algebra with functions."""
    if not isinstance(base, GridAlgebra):
        raise ValueError("semidirect_extend needs a GridAlgebra base")
    if base.n_functions != 0:
        raise ValueError("base must be the pure vector-field algebra")
    if n_functions not in (1, 2):
        raise ValueError("n_functions must be 1 or 2")
    return GridAlgebra(base.n, base.length, n_functions)


def bracket(a, x, y):
    return a.bracket(x, y)


def ad_star(a, xi, mu):
    return a.ad_star(xi, mu)


def pairing(a, mu, xi):
    return a.pairing(mu, xi)


def jacobi_residual(a, x, y, z):
    """Max abs of [x,[y,z]] + [y,[z,x]] + [z,[x,y]]."""
    r = a.bracket(x, a.bracket(y, z)) + a.bracket(y, a.bracket(z, x)) + a.bracket(z, a.bracket(x, y))
    return float(np.abs(r).max())


def pairing_identity_residual(a, xi, mu, basis=None):
    """Max over basis directions of |<ad*_xi mu, zeta> - <mu, [xi, zeta]>|."""
    if basis is None:
        if isinstance(a, AlgebraSpec):
            basis = np.eye(a.dim)
        else:
            basis = [b.reshape(a.shape) for b in np.eye(np.prod(a.shape))]
    lhs_vec = a.ad_star(xi, mu)
    return max(abs(a.pairing(lhs_vec, z) - a.pairing(mu, a.bracket(xi, z))) for z in basis)
