"""Family solvers and independent closed-form oracles.

Each solver consumes a ReducedProblem, integrates the regular part (RK4
for the time families, convergent series for the two boundary-layer
families), runs the triangular C-recursion, and reassembles the full
solution.  The closed-form oracles at the bottom evaluate the exact
solution formulas of the bundled example problems by direct quadrature;
they share no code with the pipeline beyond elementary helpers.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid, simpson

from .errors import (CompatibilityError, ConfigurationError, EvaluationError,
                     UsageError)
from .fd import derivative_matrix
from .reduction import (apply_differential_operator, beta_tables,
                        compat_residual, reconstruct_solution, rhs_projection,
                        solve_C_recurrence)

DEFAULT_DT = 1e-3
GOURSAT_SERIES_CAP = 40
GOURSAT_SERIES_TOL = 1e-12
MIXED_SERIES_ORDER = 8


@dataclass
class SolutionField:
    """Sampled solution: values holds one row of component samples per
    grid point, shape = axis lengths + (component count,)."""

    axes: tuple
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.axes = tuple((str(name), np.asarray(g, dtype=float))
                          for name, g in self.axes)
        self.values = np.asarray(self.values, dtype=float)
        lens = tuple(len(g) for _, g in self.axes)
        if self.values.shape[:-1] != lens:
            raise ConfigurationError(
                f"value grid {self.values.shape[:-1]} does not match axes {lens}")
        if not np.isfinite(self.values).all():
            raise EvaluationError("solution field contains non-finite samples")

    @property
    def ncomp(self):
        return self.values.shape[-1]


def write_solution_csv(fld, path):
    """Deterministic CSV: header 'axis names..., component, value', rows
    row-major over the axes, then over components, floats via repr."""
    names = [name for name, _ in fld.axes]
    grids = [g for _, g in fld.axes]
    lens = tuple(len(g) for g in grids)
    flat = fld.values.reshape(-1, fld.ncomp)
    lines = [",".join(names + ["component", "value"])]
    for row, idx in enumerate(np.ndindex(*lens) if lens else [()]):
        prefix = ",".join(repr(float(grids[a][i])) for a, i in enumerate(idx))
        for comp in range(fld.ncomp):
            val = repr(float(flat[row, comp]))
            lines.append(f"{prefix},{comp},{val}" if prefix else f"{comp},{val}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def field_raw(fld):
    """The solver-internal representation (sample axes, values with the
    operator-space dimension last) stored next to the display grid."""
    raw = fld.meta.get("raw")
    if raw is not None:
        return raw
    return list(fld.axes), fld.values


# ---------------------------------------------------------------------------
# shared time-stepping helpers

def _time_grid(spec, dt=None):
    lo, hi = spec.box.get("t", (0.0, 1.0))
    step = float(dt if dt is not None else spec.grid.get("dt", DEFAULT_DT))
    span = float(hi) - float(lo)
    if step <= 0 or step > span:
        raise UsageError(f"time step {step} invalid for horizon {span}")
    nt = int(round(span / step))
    if abs(nt * step - span) > 1e-9 * max(1.0, span):
        raise UsageError(f"time step {step} does not divide the horizon {span}")
    return np.linspace(float(lo), float(hi), nt + 1)


def _half_grid(tgrid):
    nt = len(tgrid) - 1
    return np.linspace(tgrid[0], tgrid[-1], 2 * nt + 1)


def _sample_rhs(f, tvals):
    vals = np.asarray(f(t=tvals), dtype=float)
    if vals.ndim == 1:
        vals = np.broadcast_to(vals[None, :], (len(tvals), vals.shape[0])).copy()
    if vals.shape[0] != len(tvals):
        raise ConfigurationError(
            f"right-hand side sampler returned shape {vals.shape} for "
            f"{len(tvals)} time nodes")
    return vals


def _rk4_linear(M, g_half, tgrid, y0):
    """y' = M y + g(t) with g sampled on the half-step grid."""
    h = tgrid[1] - tgrid[0]
    y = np.array(y0, dtype=float)
    out = np.empty((len(tgrid),) + y.shape)
    out[0] = y
    for i in range(len(tgrid) - 1):
        g0, gm, g1 = g_half[2 * i], g_half[2 * i + 1], g_half[2 * i + 2]
        k1 = y @ M.T + g0
        k2 = (y + 0.5 * h * k1) @ M.T + gm
        k3 = (y + 0.5 * h * k2) @ M.T + gm
        k4 = (y + h * k3) @ M.T + g1
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        out[i + 1] = y
    return out


def _cumulative_from_zero(samples, grid, axis=0):
    return cumulative_trapezoid(samples, x=grid, axis=axis, initial=0.0)


def _cumulative_simpson_half(y, grid):
    """Cumulative integral of samples on a uniform half-step grid (an odd
    count 2n+1 covering n full steps), returned on the same grid: Simpson
    panels at the full steps, the quadratic half-panel rule between."""
    y = np.asarray(y, dtype=float)
    n2 = y.shape[0]
    if n2 < 3 or n2 % 2 == 0:
        raise ConfigurationError(
            f"half-step sample count must be odd and >= 3, got {n2}")
    h2 = float(grid[1] - grid[0])
    y0, ym, y1 = y[0:-2:2], y[1:-1:2], y[2::2]
    panels = (h2 / 3.0) * (y0 + 4.0 * ym + y1)
    even = np.concatenate([np.zeros((1,) + y.shape[1:]),
                           np.cumsum(panels, axis=0)], axis=0)
    halves = (h2 / 12.0) * (5.0 * y0 + 8.0 * ym - y1)
    out = np.empty_like(y)
    out[0::2] = even
    out[1::2] = even[:-1] + halves
    return out


def _apply_op_factory(rp, axes, accuracy=2):
    def apply_op(op_index, samples):
        return apply_differential_operator(rp.system.L[op_index], samples, axes,
                                           accuracy=accuracy)
    return apply_op


def _require_family(rp, family):
    if rp.system.family != family:
        raise UsageError(
            f"solver for family {family!r} called on {rp.system.family!r}")


def _post_checks(rp, axes, v, f_nodes, tol=1e-6):
    if rp.compat:
        dev = compat_residual(rp, axes, v, f_nodes)
        if dev > tol:
            raise CompatibilityError(
                "compatibility violated: the unresolvable-direction "
                f"conditions fail with residual {dev:.3e}")


# ---------------------------------------------------------------------------
# evolution families (march in t)

def solve_first_order_evolution(rp, f=None, dt=None):
    """Family evolution1: d/dt(Bu) + A1 u = f."""
    _require_family(rp, "evolution1")
    spec = rp.system
    fun = f if f is not None else spec.f
    tgrid = _time_grid(spec, dt)
    th = _half_grid(tgrid)
    f_half = _sample_rhs(fun, th)
    g_half = rhs_projection(rp, f_half)
    # dynamics projected onto the solvable complement: for m > n the raw
    # A1 Bplus pushes v into the constraint directions handled separately
    IQ = np.eye(rp.js.codomain.dim) - rp.ps.q_total()
    M = -(IQ @ spec.A[0].matrix @ rp.ps.Bplus.matrix)
    d2 = rp.js.codomain.dim
    v = _rk4_linear(M, g_half, tgrid, np.zeros(d2))
    f_nodes = f_half[::2]
    axes = [("t", tgrid)]
    beta = beta_tables(rp, f_nodes)
    # chains of length > 1 differentiate the projections repeatedly; the
    # composed one-sided edge stencils need 4th-order weights to keep the
    # sup error at the RK4 scale
    C = solve_C_recurrence(rp, beta, _apply_op_factory(rp, axes, accuracy=4),
                           lambda rhs, row: rhs)
    u = reconstruct_solution(rp, v, C)
    _post_checks(rp, axes, v, f_nodes)
    return _package_grid_field(rp, axes, u, {"dt": float(tgrid[1] - tgrid[0])})


def solve_second_order_evolution(rp, f=None, dt=None):
    """Family evolution2: d2/dt2(Bu) + d/dt(A1 u) = f."""
    _require_family(rp, "evolution2")
    spec = rp.system
    fun = f if f is not None else spec.f
    tgrid = _time_grid(spec, dt)
    th = _half_grid(tgrid)
    f_half = _sample_rhs(fun, th)
    g_half = rhs_projection(rp, f_half)
    d2 = rp.js.codomain.dim
    IQ = np.eye(d2) - rp.ps.q_total()
    M = IQ @ spec.A[0].matrix @ rp.ps.Bplus.matrix
    # first-order system in (v, w = v_t): w' = -M w + g
    big = np.zeros((2 * d2, 2 * d2))
    big[:d2, d2:] = np.eye(d2)
    big[d2:, d2:] = -M
    g_big = np.zeros((len(th), 2 * d2))
    g_big[:, d2:] = g_half
    state = _rk4_linear(big, g_big, tgrid, np.zeros(2 * d2))
    v = state[:, :d2]
    f_nodes = f_half[::2]
    axes = [("t", tgrid)]
    # run the C-recursion on the half-step grid so the leading integration
    # is Simpson (4th order, matching the RK4 stage accuracy)
    axes_half = [("t", th)]
    beta = beta_tables(rp, f_half)
    C_half = solve_C_recurrence(rp, beta,
                                _apply_op_factory(rp, axes_half, accuracy=4),
                                lambda rhs, row: _cumulative_simpson_half(rhs, th))
    C = {key: arr[::2] for key, arr in C_half.items()}
    u = reconstruct_solution(rp, v, C)
    _post_checks(rp, axes, v, f_nodes)
    return _package_grid_field(rp, axes, u, {"dt": float(tgrid[1] - tgrid[0])})


# ---------------------------------------------------------------------------
# Goursat family (series in the double integral)

def solve_goursat(rp, f=None, series_cap=None, series_tol=None):
    """Family goursat: d2/dxdy(Bu) + A1 u = f, data on both axes.

    The regular part is the convergent series of iterated double
    integrals: term_0 = Bplus V w, term_r = -(Bplus A1) V term_{r-1},
    with V the cumulative double integral from the corner and
    w = (I - Qk) f; iterated trapezoid quadrature on the grid."""
    _require_family(rp, "goursat")
    spec = rp.system
    fun = f if f is not None else spec.f
    cap = int(series_cap if series_cap is not None
              else spec.grid.get("series_cap", GOURSAT_SERIES_CAP))
    tol = float(series_tol if series_tol is not None
                else spec.grid.get("series_tol", GOURSAT_SERIES_TOL))
    xg = _box_grid(spec, "x", 201)
    yg = _box_grid(spec, "y", 201)
    X, Y = np.meshgrid(xg, yg, indexing="ij")
    f_vals = np.asarray(fun(x=X, y=Y), dtype=float)
    w = rhs_projection(rp, f_vals)

    Bp = rp.ps.Bplus.matrix
    IQ = np.eye(rp.js.codomain.dim) - rp.ps.q_total()
    step = IQ @ rp.system.A[0].matrix @ Bp

    def volterra(arr):
        arr = _cumulative_from_zero(arr, xg, axis=0)
        return _cumulative_from_zero(arr, yg, axis=1)

    vterm = volterra(w)
    v = vterm.copy()
    scale = max(1.0, float(np.abs(vterm).max()))
    converged = False
    for r in range(1, cap + 1):
        vterm = -volterra(vterm @ step.T)
        v += vterm
        if np.abs(vterm).max() <= tol * scale:
            converged = True
            break
    if not converged:
        raise ConfigurationError(
            "series truncation failure: the iterated-integral series did "
            f"not decay below {tol:g} within {cap} terms; the domain box "
            "is too large for this operator pair, shrink it")

    axes = [("x", xg), ("y", yg)]
    beta = beta_tables(rp, f_vals)
    C = solve_C_recurrence(rp, beta, _apply_op_factory(rp, axes),
                           lambda rhs, row: rhs)
    u = v @ Bp.T
    for (i, j), samples in C.items():
        u = u + np.asarray(samples)[..., None] * rp.js.phi[i][j - 1]
    _post_checks(rp, axes, v, f_vals)
    meta = {"series_terms": r, "series_tail": float(np.abs(vterm).max())}
    return _package_grid_field(rp, axes, u, meta)


# ---------------------------------------------------------------------------
# mixed boundary family (power series in x)

def solve_mixed_series(rp, f=None, order=None):
    """Family mixed_xy: d2/dx2(Bu) + d/dy(A1 u) = f, layered data.

    Regular part as a power series v = sum_{i>=2} C_i(y) x^i with
    C_{k+2} = (g_k - M C_k')/((k+1)(k+2)), M = A1 Bplus, g_k the x-Taylor
    rows of (I - Qk) f at x = 0."""
    _require_family(rp, "mixed_xy")
    spec = rp.system
    fun = f if f is not None else spec.f
    top = int(order if order is not None
              else spec.grid.get("series_order", MIXED_SERIES_ORDER))
    xg = _box_grid(spec, "x", 101)
    yg = _box_grid(spec, "y", 101)
    X, Y = np.meshgrid(xg, yg, indexing="ij")
    f_vals = np.asarray(fun(x=X, y=Y), dtype=float)
    g = rhs_projection(rp, f_vals)
    IQ = np.eye(rp.js.codomain.dim) - rp.ps.q_total()
    M = IQ @ spec.A[0].matrix @ rp.ps.Bplus.matrix
    hx = float(xg[1] - xg[0])
    hy = float(yg[1] - yg[0])
    d2 = rp.js.codomain.dim
    ny = len(yg)

    taylor, drift = _x_taylor_rows(g, hx, top - 2)
    if drift > 0.05:
        warnings.warn(
            "right-hand side x-derivative estimates disagree between grid "
            f"resolutions (relative drift {drift:.2g}); falling back to "
            "finite-difference marching", RuntimeWarning)
        v = _march_mixed(g, M, xg, yg)
    else:
        Dy = derivative_matrix(ny, hy, 1, accuracy=4)
        coef = np.zeros((top + 1, ny, d2))
        for k in range(0, top - 1):
            gk = taylor[k] if k < len(taylor) else np.zeros((ny, d2))
            ck_prime = np.einsum("ab,bd->ad", Dy, coef[k])
            coef[k + 2] = (gk - ck_prime @ M.T) / ((k + 1.0) * (k + 2.0))
        powers = np.stack([xg ** i for i in range(top + 1)], axis=0)
        v = np.einsum("ix,iyd->xyd", powers, coef)

    axes = [("x", xg), ("y", yg)]
    beta = beta_tables(rp, f_vals)
    C = solve_C_recurrence(rp, beta, _apply_op_factory(rp, axes),
                           lambda rhs, row: _cumulative_from_zero(rhs, yg, axis=1))
    u = reconstruct_solution(rp, v, C)
    _post_checks(rp, axes, v, f_vals)
    return _package_grid_field(rp, axes, u, {"series_order": top})


def _x_taylor_rows(g, hx, kmax):
    """One-sided estimates of d^k g/dx^k (0, y)/k! from the sampled grid,
    plus the relative disagreement between two stencil spacings.  High
    derivatives of slowly varying data are snapped to zero: the stencil
    weights grow like h^-k and would otherwise launder rounding noise
    into spurious series coefficients."""
    from .fd import fd_weights
    rows, drift = [], 0.0
    nx = g.shape[0]
    g_scale = max(1.0, float(np.abs(g).max()))
    for k in range(0, kmax + 1):
        if k == 0:
            rows.append(g[0].copy())
            continue
        width = k + 4
        stride = max(1, (nx - 1) // (3 * (width - 1)))
        while (width - 1) * 2 * stride >= nx and stride > 1:
            stride -= 1
        est = _one_sided_estimate(g, hx, k, width, stride, fd_weights)
        if (width - 1) * 2 * stride < nx:
            est2 = _one_sided_estimate(g, hx, k, width, 2 * stride, fd_weights)
        else:
            est2 = est
        # the two-spacing disagreement doubles as a noise floor: estimates
        # inside it are stencil rounding, not signal
        noise = np.abs(est - est2)
        sig = np.abs(est) > 10.0 * noise + 1e-12 * g_scale
        scale = max(g_scale, float(np.abs(est).max()))
        drift = max(drift, float((noise * sig).max()) / scale)
        est = np.where(sig, est, 0.0)
        fact = 1.0
        for j in range(2, k + 1):
            fact *= j
        rows.append(est / fact)
    return rows, drift


def _one_sided_estimate(g, hx, k, width, stride, fd_weights):
    pts = np.arange(width) * (stride * hx)
    wts = fd_weights(pts, 0.0, k)
    return np.tensordot(wts, g[: width * stride: stride], axes=(0, 0))


def _march_mixed(g, M, xg, yg):
    """Second-order explicit marching for v_xx + M v_y = g with
    v = v_x = 0 on x = 0."""
    hx = float(xg[1] - xg[0])
    hy = float(yg[1] - yg[0])
    Dy = derivative_matrix(len(yg), hy, 1, accuracy=2)
    v = np.zeros((len(xg),) + g.shape[1:])
    if len(xg) > 1:
        v[1] = 0.5 * hx * hx * g[0]
    for i in range(1, len(xg) - 1):
        rhs = g[i] - np.einsum("ab,bd->ad", Dy, v[i]) @ M.T
        v[i + 1] = 2.0 * v[i] - v[i - 1] + hx * hx * rhs
    return v


# ---------------------------------------------------------------------------
# third-order spectral family

def solve_third_order_spectral(rp, f=None, lambda_param=None, modes=None,
                               dt=None):
    """Family spectral3: d3/dt3(Bu) + A1 u = f over a double sine basis.

    B is diagonal over the modes with entries 1 - n^2 (kernel at n = 1),
    A1 with entries lambda - m^2.  Kernel rows are algebraic, the rest
    integrate with RK4 from zero data."""
    _require_family(rp, "spectral3")
    spec = rp.system
    fun = f if f is not None else spec.f
    if modes is None:
        modes = spec.grid.get("modes", (16, 16))
    N, Mm = int(modes[0]), int(modes[1])
    lam = float(lambda_param if lambda_param is not None
                else spec.grid.get("lambda", 5.0))
    check_spectral_parameter(lam, N, Mm)

    tgrid = _time_grid(spec, dt)
    th = _half_grid(tgrid)
    f_half = _sample_rhs(fun, th)
    if f_half.shape[1] != N * Mm:
        raise ConfigurationError(
            f"mode sampler returned {f_half.shape[1]} coefficients for a "
            f"{N}x{Mm} mode grid")
    n_idx = np.repeat(np.arange(1, N + 1), Mm)
    m_idx = np.tile(np.arange(1, Mm + 1), N)
    b = 1.0 - n_idx.astype(float) ** 2
    a = lam - m_idx.astype(float) ** 2
    kernel = np.abs(b) < 1e-12
    if spec.B.domain.dim == N * Mm:
        # the back-end integrates these fixed mode tables; refuse operators
        # that were declared with different diagonals
        if (np.abs(np.diag(spec.B.matrix) - b).max() > 1e-10
                or np.abs(np.diag(spec.A[0].matrix) - a).max() > 1e-10):
            raise ConfigurationError(
                "spectral back-end expects B = diag(1 - n^2) and "
                "A1 = diag(lambda - m^2) over the retained modes")

    u_modes = np.zeros((len(tgrid), N * Mm))
    f_nodes = f_half[::2]
    u_modes[:, kernel] = f_nodes[:, kernel] / a[kernel]

    reg = ~kernel
    nreg = int(reg.sum())
    if nreg:
        c = a[reg] / b[reg]
        g_half = f_half[:, reg] / b[reg]
        u_modes[:, reg] = _rk4_third_order_diag(c, g_half, tgrid)

    resid = _mode_residual(tgrid, u_modes, b, a, f_nodes)
    axes = [("t", tgrid)]
    meta = {"dt": float(tgrid[1] - tgrid[0]), "lambda": lam,
            "modes": (N, Mm), "mode_residual": resid}
    return _package_mode_field(rp, spec, axes, u_modes, N, Mm, meta)


def _rk4_third_order_diag(c, g_half, tgrid):
    """u''' = -c u + g per mode (diagonal), zero initial data; returns the
    u samples only."""
    h = float(tgrid[1] - tgrid[0])
    nreg = len(c)
    y = np.zeros((3, nreg))
    out = np.empty((len(tgrid), nreg))
    out[0] = y[0]

    def deriv(state, g):
        return np.stack([state[1], state[2], -c * state[0] + g])

    for i in range(len(tgrid) - 1):
        g0, gm, g1 = g_half[2 * i], g_half[2 * i + 1], g_half[2 * i + 2]
        k1 = deriv(y, g0)
        k2 = deriv(y + 0.5 * h * k1, gm)
        k3 = deriv(y + 0.5 * h * k2, gm)
        k4 = deriv(y + h * k3, g1)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        out[i + 1] = y[0]
    return out


def check_spectral_parameter(lam, N, Mm, tol=1e-9):
    for n in range(1, N + 1):
        if abs(lam - n * n) <= tol:
            raise CompatibilityError(
                f"resonant lambda: {lam:g} equals n^2 for retained mode n={n}; "
                "the problem has no unique solution")
    for m in range(1, Mm + 1):
        if abs(lam - m * m) <= tol:
            raise CompatibilityError(
                f"singular algebraic row: lambda - m^2 vanishes for m={m}")


def _mode_residual(tgrid, u_modes, b, a, f_nodes):
    """Max interior residual of b u''' + a u - f per mode, 5-point stencils."""
    if len(tgrid) < 7:
        return float("nan")
    h = float(tgrid[1] - tgrid[0])
    D3 = derivative_matrix(len(tgrid), h, 3, accuracy=2)
    resid = b[None, :] * (D3 @ u_modes) + a[None, :] * u_modes - f_nodes
    return float(np.abs(resid[3:-3]).max())


def _sine_table(k, grid):
    return np.sin(np.outer(np.arange(1, k + 1), np.asarray(grid, dtype=float)))


# ---------------------------------------------------------------------------
# field packaging

def _box_grid(spec, name, default_nodes):
    lo, hi = spec.box.get(name, (0.0, 1.0))
    nodes = int(spec.grid.get(f"n{name}", spec.grid.get("nodes", default_nodes)))
    if nodes < 5:
        raise UsageError(f"axis {name} needs at least 5 nodes, got {nodes}")
    return np.linspace(float(lo), float(hi), nodes)


def _output_stride(spec, nt):
    stride = spec.grid.get("output_stride_t")
    if stride is None:
        stride = max(1, (nt - 1) // 20)
    return max(1, int(stride))


def _package_grid_field(rp, axes, u, extra_meta):
    """Display form of a solution whose operator space is a grid or
    coordinate space.  Grid spaces unroll onto their own axis; coordinate
    spaces keep a plain component column."""
    spec = rp.system
    space = rp.js.domain
    meta = {"family": spec.family, "tolerances": dict(spec.tolerances)}
    meta.update(extra_meta)
    meta["raw"] = (list(axes), u)
    if space.grid is not None:
        grid = np.asarray(space.grid, dtype=float)
        if axes and axes[0][0] == "t":
            tgrid = axes[0][1]
            stride = _output_stride(spec, len(tgrid))
            meta["output_stride_t"] = stride
            out_axes = (("t", tgrid[::stride]), ("x", grid))
            vals = u[::stride][..., None]
        else:
            out_axes = tuple(axes) + (("s", grid),)
            vals = u[..., None]
        return SolutionField(axes=out_axes, values=vals, meta=meta)
    return SolutionField(axes=tuple(axes), values=u, meta=meta)


def _package_mode_field(rp, spec, axes, u_modes, N, Mm, meta):
    tgrid = axes[0][1]
    stride = _output_stride(spec, len(tgrid))
    xg = np.linspace(0.0, np.pi, int(spec.grid.get("nx_out", 17)))
    yg = np.linspace(0.0, np.pi, int(spec.grid.get("ny_out", 17)))
    Sx = _sine_table(N, xg)
    Sy = _sine_table(Mm, yg)
    coeff = u_modes[::stride].reshape(-1, N, Mm)
    phys = np.einsum("tnm,nx,my->txy", coeff, Sx, Sy)
    meta = dict(meta)
    meta["raw"] = (list(axes), u_modes)
    meta["output_stride_t"] = stride
    meta["family"] = spec.family
    meta["tolerances"] = dict(spec.tolerances)
    return SolutionField(axes=(("t", tgrid[::stride]), ("x", xg), ("y", yg)),
                         values=phys[..., None], meta=meta)


SOLVERS = {
    "goursat": solve_goursat,
    "evolution1": solve_first_order_evolution,
    "evolution2": solve_second_order_evolution,
    "mixed_xy": solve_mixed_series,
    "spectral3": solve_third_order_spectral,
}


def solve_family(rp, **options):
    solver = SOLVERS.get(rp.system.family)
    if solver is None:
        raise ConfigurationError(
            f"unknown family {rp.system.family!r}; supported: "
            f"{', '.join(sorted(SOLVERS))}")
    if rp.system.family != "spectral3":
        options.pop("lambda_param", None)
        options.pop("modes", None)
    if rp.system.family in ("goursat", "mixed_xy"):
        options.pop("dt", None)
    return solver(rp, **options)


# ---------------------------------------------------------------------------
# closed-form oracles (independent quadrature evaluations)

def bessel_like_sum(z, tol=1e-18, cap=80):
    """sum_k (-1)^k z^k / (k!)^2, the J0(2 sqrt z) series."""
    z = np.asarray(z, dtype=float)
    acc = np.ones_like(z)
    term = np.ones_like(z)
    for k in range(1, cap + 1):
        term = term * (-z) / (k * k)
        acc = acc + term
        if np.abs(term).max() <= tol * max(1.0, float(np.abs(acc).max())):
            break
    return acc


def oracle_goursat_constant(a, b, xg, yg):
    """Exact solution of the two-component corner problem with constant
    right side (a, b): first component a(1 - J0-type sum of xy), second b."""
    X, Y = np.meshgrid(np.asarray(xg, float), np.asarray(yg, float),
                       indexing="ij")
    u1 = a * (1.0 - bessel_like_sum(X * Y))
    u2 = np.full_like(u1, float(b))
    return np.stack([u1, u2], axis=-1)


def _exp_weighted_integral(g_half, tgrid, decay=True):
    """I(t_i) = integral_0^{t_i} e^{t_i - s} g(s) ds (or plain integral when
    decay is False), Simpson steps on the half-step samples."""
    h = float(tgrid[1] - tgrid[0])
    eh = np.exp(h) if decay else 1.0
    ehalf = np.exp(0.5 * h) if decay else 1.0
    out = np.zeros((len(tgrid),) + g_half.shape[1:])
    acc = np.zeros(g_half.shape[1:])
    for i in range(len(tgrid) - 1):
        inc = (h / 6.0) * (eh * g_half[2 * i] + 4.0 * ehalf * g_half[2 * i + 1]
                           + g_half[2 * i + 2])
        acc = eh * acc + inc
        out[i + 1] = acc
    return out


def _weighted_space_integral(f_vals, grid, weight):
    return simpson(f_vals * weight, x=grid, axis=-1)


def oracle_first_order_evolution(f, tgrid, xgrid):
    """Quadrature evaluation of the exact formula
    u(t,x) = int_0^t e^(t-z) [f(z,x) - 3x int s f(z,s) ds] dz
             - 3x int s f(t,s) ds."""
    tgrid = np.asarray(tgrid, float)
    xgrid = np.asarray(xgrid, float)
    th = _half_grid(tgrid)
    f_half = np.asarray(f(t=th), dtype=float)
    mom_half = _weighted_space_integral(f_half, xgrid, xgrid)
    g_half = f_half - 3.0 * mom_half[:, None] * xgrid[None, :]
    integ = _exp_weighted_integral(g_half, tgrid, decay=True)
    mom_nodes = mom_half[::2]
    return integ - 3.0 * mom_nodes[:, None] * xgrid[None, :]


def oracle_second_order_evolution(f, tgrid, xgrid):
    """Quadrature evaluation of the exact formula
    u(t,x) = int_0^t (e^(t-s) - 1) f(s,x) ds
             - 3x int_0^t e^(t-s) [int s' f(s,s') ds'] ds."""
    tgrid = np.asarray(tgrid, float)
    xgrid = np.asarray(xgrid, float)
    th = _half_grid(tgrid)
    f_half = np.asarray(f(t=th), dtype=float)
    I_exp = _exp_weighted_integral(f_half, tgrid, decay=True)
    I_one = _exp_weighted_integral(f_half, tgrid, decay=False)
    mom_half = _weighted_space_integral(f_half, xgrid, xgrid)
    J = _exp_weighted_integral(mom_half[:, None], tgrid, decay=True)[:, 0]
    return I_exp - I_one - 3.0 * J[:, None] * xgrid[None, :]


def naive_cauchy_defect(rp, f=None):
    """Constraint defect of the over-determined second-order problem with
    full zero data: pairing of f(0) against the cokernel direction."""
    spec = rp.system
    fun = f if f is not None else spec.f
    f0 = np.asarray(fun(t=np.zeros(1)), dtype=float)[0]
    psi = rp.js.psi[0][0]
    return abs(float(f0 @ (rp.js.codomain.gram @ psi)))


def asymptotic_leading_term(rp, f0):
    """Corner asymptotic of the mixed family: coefficient fields of the
    x^2/2 and (y - x^2/2) terms at the corner value f0 of the right side."""
    js, ps = rp.js, rp.ps
    f0 = np.asarray(f0, dtype=float)
    if ps.Gamma is None:
        raise ConfigurationError("corner asymptotic needs the bordered inverse")
    quad = ps.Gamma.matrix @ f0
    G2 = js.codomain.gram
    lin = np.zeros(js.domain.dim)
    for i in range(js.l):
        lin = lin + float(f0 @ (G2 @ js.psi[i][0])) * js.phi[i][0]
    return quad, lin
