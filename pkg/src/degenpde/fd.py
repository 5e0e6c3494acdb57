"""Finite-difference weights and grid derivatives.

Weights come from Fornberg's recurrence, which gives exact differentiation
weights for any node set and derivative order.  Derivatives along one axis
of a sampled field use centered interior stencils with one-sided stencils
of the same order near the boundary.
"""

import numpy as np


def fd_weights(x, x0, m):
    """Weights w such that sum(w * f(x)) approximates the m-th derivative
    of f at x0, exact for polynomials up to degree len(x)-1.

    x : 1-d array of distinct node locations.
    x0 : evaluation point.
    m : derivative order, m >= 0.
    """
    x = np.asarray(x, dtype=float)
    npts = x.size
    if m >= npts:
        raise ValueError(f"need more than {npts} nodes for derivative order {m}")
    c = np.zeros((npts, m + 1))
    c1 = 1.0
    c4 = x[0] - x0
    c[0, 0] = 1.0
    for i in range(1, npts):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 = c2 * c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


def stencil_size(order, accuracy):
    """Smallest odd node count giving the requested accuracy for the
    requested derivative order with a centered stencil."""
    npts = 2 * ((order + 1) // 2) - 1 + accuracy
    if npts % 2 == 0:
        npts += 1
    return npts


def derivative_matrix(n, h, order, accuracy=2):
    """Dense (n, n) matrix mapping samples on a uniform grid of spacing h
    to samples of the order-th derivative.  Interior rows are centered;
    rows near the edge use one-sided stencils of the same node count."""
    npts = stencil_size(order, accuracy)
    if npts > n:
        raise ValueError(f"grid of {n} nodes too small for a {npts}-point stencil")
    half = npts // 2
    D = np.zeros((n, n))
    xloc = np.arange(npts) * h
    # interior rows share one centered weight vector
    w_center = fd_weights(xloc, xloc[half], order)
    for i in range(half, n - half):
        D[i, i - half:i - half + npts] = w_center
    for i in range(half):
        D[i, :npts] = fd_weights(xloc, xloc[i], order)
        D[n - 1 - i, n - npts:] = fd_weights(xloc, xloc[npts - 1 - i], order)
    return D


def derivative_along_axis(values, h, order, axis, accuracy=2):
    """Differentiate a sampled field along one axis of an ndarray."""
    values = np.asarray(values, dtype=float)
    D = derivative_matrix(values.shape[axis], h, order, accuracy)
    moved = np.moveaxis(values, axis, 0)
    out = np.tensordot(D, moved, axes=(1, 0))
    return np.moveaxis(out, 0, axis)
