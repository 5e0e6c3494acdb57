"""Finite inner-product spaces and the operators between them.

Structure analysis happens on finite spaces: either a plain Euclidean
coordinate space, a quadrature discretization of functions on an
interval (trapezoid weights as the Gram matrix), or a space of Fourier
mode coefficients.   Operators carry their domain and codomain so their
adjoints are taken with respect to the right inner products.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cholesky, solve_triangular

from .errors import ConfigurationError
from .expressions import evaluate, parse

DEFAULT_RANK_TOL = 1e-10


@dataclass(frozen=True)
class InnerProductSpace:
    """A finite-dimensional real space with inner product <u, v> = u' G v.

    gram must be symmetric positive definite.  grid, if present, holds the
    quadrature nodes the coordinates sample a function on; mode_shape, if
    present, says the coordinates are a (nx, ny) table of mode amplitudes
    flattened in row-major order.
    """

    dim: int
    gram: np.ndarray = field(repr=False)
    grid: np.ndarray = field(default=None, repr=False)
    mode_shape: tuple = None
    label: str = ""

    def inner(self, u, v):
        return float(np.asarray(u) @ self.gram @ np.asarray(v))

    def norm(self, u):
        return float(np.sqrt(max(self.inner(u, u), 0.0)))

    def cholesky_factor(self):
        """Lower-triangular L with G = L L'."""
        return cholesky(self.gram, lower=True)


def euclidean_space(dim, label=""):
    return InnerProductSpace(dim=dim, gram=np.eye(dim), label=label)


def grid_space(a, b, nodes, label="", quadrature="trapezoid"):
    """Functions on [a, b] sampled at `nodes` uniform points; the
    quadrature weights form the Gram matrix.  Trapezoid by default,
    composite Simpson on request (odd node count required)."""
    if nodes < 2:
        raise ConfigurationError("a grid space needs at least 2 nodes")
    grid = np.linspace(a, b, nodes)
    h = (b - a) / (nodes - 1)
    if quadrature == "trapezoid":
        weights = np.full(nodes, h)
        weights[0] = weights[-1] = h / 2
    elif quadrature == "simpson":
        if nodes % 2 == 0 or nodes < 3:
            raise ConfigurationError(
                f"simpson quadrature needs an odd node count >= 3, got {nodes}")
        weights = np.full(nodes, 2 * h / 3.0)
        weights[1::2] = 4 * h / 3.0
        weights[0] = weights[-1] = h / 3.0
    else:
        raise ConfigurationError(
            f"unknown quadrature {quadrature!r}; use trapezoid or simpson")
    return InnerProductSpace(dim=nodes, gram=np.diag(weights), grid=grid, label=label)


def mode_space(nx, ny, label=""):
    """Amplitudes of an (nx, ny) table of modes, Euclidean inner product."""
    return InnerProductSpace(dim=nx * ny, gram=np.eye(nx * ny),
                             mode_shape=(nx, ny), label=label)


@dataclass(frozen=True)
class FiniteOperator:
    """A linear map between two inner-product spaces, stored densely."""

    matrix: np.ndarray = field(repr=False)
    domain: InnerProductSpace
    codomain: InnerProductSpace

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (self.codomain.dim, self.domain.dim):
            raise ConfigurationError(
                f"operator matrix shape {m.shape} does not match "
                f"codomain dim {self.codomain.dim} x domain dim {self.domain.dim}")
        object.__setattr__(self, "matrix", m)

    def apply(self, u):
        return self.matrix @ np.asarray(u, dtype=float)

    def adjoint_matrix(self):
        """Matrix of the adjoint map codomain -> domain:
        <A u, v>_cod = <u, A* v>_dom for all u, v."""
        Gd = self.domain.gram
        Gc = self.codomain.gram
        return np.linalg.solve(Gd, self.matrix.T @ Gc)

    def adjoint(self):
        return FiniteOperator(self.adjoint_matrix(), self.codomain, self.domain)

    def weighted_form(self):
        """L_cod' A L_dom^-T: the matrix of the same map between the
        Cholesky-orthonormalized coordinates of both spaces.  Singular
        values of this matrix are the metric-correct singular values."""
        Ld = self.domain.cholesky_factor()
        Lc = self.codomain.cholesky_factor()
        # A L_dom^-T computed as a triangular solve on the right
        right = solve_triangular(Ld, self.matrix.T, lower=True, trans="T").T
        return Lc.T @ right

    def null_basis(self, rank_tol=DEFAULT_RANK_TOL):
        """Columns form a domain-orthonormal basis of the null space.

        Uses the SVD of the metric-weighted matrix; directions with
        singular value <= rank_tol * largest are counted as null.
        Columns are ordered by ascending singular value and sign-fixed
        so the first nonzero coordinate is positive.
        """
        At = self.weighted_form()
        _, s, vt = np.linalg.svd(At)  # vt is (dom_dim, dom_dim)
        if s.size == 0 or s[0] == 0.0:
            rank = 0
        else:
            rank = int(np.sum(s > rank_tol * s[0]))
        ncols = self.domain.dim - rank
        if ncols == 0:
            return np.zeros((self.domain.dim, 0))
        Vt_null = vt[rank:, :][::-1]  # ascending singular value
        Ld = self.domain.cholesky_factor()
        basis = solve_triangular(Ld, Vt_null.T, lower=True, trans="T")
        for j in range(basis.shape[1]):
            col = basis[:, j]
            big = np.abs(col).max()
            if big == 0:
                continue
            nz = np.nonzero(np.abs(col) > 1e-12 * big)[0]
            if nz.size and col[nz[0]] < 0:
                basis[:, j] = -col
        return basis

    def conull_basis(self, rank_tol=DEFAULT_RANK_TOL):
        """Codomain-orthonormal basis of the null space of the adjoint."""
        return self.adjoint().null_basis(rank_tol)


@dataclass(frozen=True)
class VectorElement:
    """A vector tagged with the space it lives in."""

    space: InnerProductSpace
    coords: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        if c.shape != (self.space.dim,):
            raise ConfigurationError(
                f"coordinate length {c.shape} does not match space dim {self.space.dim}")
        object.__setattr__(self, "coords", c)


def adjoint(A):
    return A.adjoint()


def apply(A, u):
    if u.space.dim != A.domain.dim:
        raise ConfigurationError("operator domain does not match the vector's space")
    return VectorElement(A.codomain, A.apply(u.coords))


def inner(u, w):
    if u.space.dim != w.space.dim:
        raise ConfigurationError("inner product needs vectors from one space")
    return u.space.inner(u.coords, w.coords)


def null_space(A, rank_tol=DEFAULT_RANK_TOL):
    basis = A.null_basis(rank_tol)
    return [VectorElement(A.domain, basis[:, j]) for j in range(basis.shape[1])]


def identity_operator(space, scale=1.0):
    return FiniteOperator(scale * np.eye(space.dim), space, space)


def matrix_operator(rows, domain=None, codomain=None):
    m = np.asarray(rows, dtype=float)
    if m.ndim != 2:
        raise ConfigurationError("operator rows must form a 2-d matrix")
    dom = domain if domain is not None else euclidean_space(m.shape[1])
    cod = codomain if codomain is not None else (dom if m.shape[0] == m.shape[1] else euclidean_space(m.shape[0]))
    return FiniteOperator(m, dom, cod)


def make_kernel_operator(space, kind, kernel, exact_on=None, parallel_tol=1e-8):
    """Integral operator on a grid space from a kernel expression in (x, s).

    kind "kernel_only" gives (K u)(x_i) = sum_j w_j k(x_i, s_j) u_j with the
    trapezoid weights w; "identity_minus_kernel" gives I - K.

    exact_on: an expression v(x) that the kernel part should reproduce
    exactly (K v = v for identity_minus_kernel, so that (I - K) v = 0).
    The quadrature only reproduces it approximately, so the kernel is
    rescaled by the factor that makes the reproduction exact.  The sampled
    K v must already be proportional to v to within parallel_tol, else the
    request is refused.
    """
    if space.grid is None:
        raise ConfigurationError("kernel operators need a grid space")
    if kind not in ("identity_minus_kernel", "kernel_only"):
        raise ConfigurationError(f"unknown kernel operator kind {kind!r}")
    ast = parse(kernel) if isinstance(kernel, str) else kernel
    g = space.grid
    X, S = np.meshgrid(g, g, indexing="ij")
    K = np.broadcast_to(np.asarray(evaluate(ast, x=X, s=S), dtype=float),
                        (space.dim, space.dim)).copy()
    weights = np.diag(space.gram)
    K = K * weights[None, :]
    if exact_on is not None:
        v = np.asarray(evaluate(parse(exact_on) if isinstance(exact_on, str) else exact_on,
                                x=g))
        v = np.broadcast_to(v, g.shape).astype(float)
        w = K @ v
        vnorm = np.linalg.norm(v)
        wnorm = np.linalg.norm(w)
        if vnorm == 0 or wnorm == 0:
            raise ConfigurationError("exact_on expression or its image is zero")
        resid = np.linalg.norm(w - (np.dot(v, w) / np.dot(v, v)) * v) / wnorm
        if resid > parallel_tol:
            raise ConfigurationError(
                f"kernel image of exact_on expression is not proportional to it "
                f"(relative deviation {resid:.2e})")
        K = K * (np.dot(v, w) / np.dot(w, w))
    if kind == "identity_minus_kernel":
        m = np.eye(space.dim) - K
    else:
        m = K
    return FiniteOperator(m, space, space)
