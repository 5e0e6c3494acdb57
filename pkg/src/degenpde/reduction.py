"""Reduction of a singular operator-differential system to a regular one.

The system is L0(D) B u + sum_r Lr(D) Ar u = f with B non-invertible.
After the Jordan structure of (B, A1) is in hand, the substitution
u = Bplus v + sum C_ij phi_i^(j) + sum lambda_e phi_extra_e splits the
system into a regular equation for v (the lead operator L0 plus the
lower-order terms Ar Bplus) and a triangular scalar system for the C
coefficients, solvable chain by chain from the terminal level down.
"""

from dataclasses import dataclass, field

import numpy as np

from .chains import certify_operators, complete_structure
from .errors import CompatibilityError, ConfigurationError, StructureError
from .fd import derivative_along_axis

FAMILIES = ("goursat", "evolution1", "evolution2", "mixed_xy", "spectral3")

COEFF_TOL = 1e-8


@dataclass(frozen=True)
class DifferentialOperatorSpec:
    """A scalar differential operator: sum of coef * D^k terms, with k a
    multi-index over the nvars evolution variables."""

    terms: tuple
    nvars: int

    def __post_init__(self):
        norm = []
        for k, coef in self.terms:
            k = tuple(int(v) for v in k)
            if len(k) != self.nvars or any(v < 0 for v in k):
                raise ConfigurationError(f"bad multi-index {k} for {self.nvars} variables")
            norm.append((k, float(coef)))
        object.__setattr__(self, "terms", tuple(norm))

    @property
    def order(self):
        return max((sum(k) for k, _ in self.terms), default=0)

    def is_identity(self):
        return (len(self.terms) == 1 and sum(self.terms[0][0]) == 0
                and self.terms[0][1] == 1.0)

    def describe(self):
        parts = []
        for k, coef in self.terms:
            if sum(k) == 0:
                parts.append(f"{coef:g}")
            else:
                ds = "*".join(f"D{i}^{v}" if v > 1 else f"D{i}"
                              for i, v in enumerate(k) if v)
                parts.append(f"{coef:g}*{ds}")
        return " + ".join(parts) if parts else "0"


@dataclass
class DegenerateSystemSpec:
    """A full problem: operators, differential parts, right-hand side."""

    B: object
    A: list
    L: list
    f: object          # callable(**coords) -> samples with codomain dim last
    family: str
    box: dict = field(default_factory=dict)     # axis name -> (lo, hi)
    grid: dict = field(default_factory=dict)    # nodes / dt / modes settings
    lambdas: list = None                        # optional free-function callables
    tolerances: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(
                f"unknown family {self.family!r}; supported: {', '.join(FAMILIES)}")
        if len(self.L) != len(self.A) + 1:
            raise ConfigurationError(
                f"need one differential operator per term: got {len(self.L)} "
                f"L-operators for {len(self.A)} lower-order operators plus the lead")
        orders = [Lop.order for Lop in self.L]
        if any(orders[i] <= orders[i + 1] for i in range(len(orders) - 1)):
            raise ConfigurationError(
                f"differential orders must strictly decrease from the lead: {orders}")
        for i, Aop in enumerate(self.A, start=1):
            if (Aop.domain.dim != self.B.domain.dim
                    or Aop.codomain.dim != self.B.codomain.dim):
                raise ConfigurationError(f"operator A{i} shape mismatch with B")


@dataclass(frozen=True)
class ScalarRow:
    """One equation of the triangular C-system.

    unknown (chain, level) is produced from the projection onto
    psi[proj]: lead_scale * L1(D) C_unknown = beta_proj
    - sum over lower of coef * L_op(D) C_pair."""

    unknown: tuple
    proj: tuple
    lead_scale: float
    lower: tuple


@dataclass
class ReducedProblem:
    system: DegenerateSystemSpec
    js: object
    ps: object
    comm: object
    Ltilde: tuple        # ((DifferentialOperatorSpec, matrix on E2), ...), lead first
    Csystem: tuple
    lambda_slots: tuple
    compat: tuple        # indices into psi_extra columns (m > n only)
    bc_plan: tuple


def boundary_condition_plan(spec, js):
    """The family's projection boundary conditions: which projector of the
    solution carries data (zero in all bundled problems), on which manifold,
    at which derivative order."""
    fam = spec.family
    if fam == "goursat":
        plan = [{"projector": "I-Pk", "axis": "x", "order": 0, "at": 0.0},
                {"projector": "I-Pk", "axis": "y", "order": 0, "at": 0.0}]
    elif fam == "evolution1":
        plan = [{"projector": "I-Pk", "axis": "t", "order": 0, "at": 0.0}]
    elif fam == "evolution2":
        plan = [{"projector": "I", "axis": "t", "order": 0, "at": 0.0},
                {"projector": "I-Pk", "axis": "t", "order": 1, "at": 0.0}]
    elif fam == "mixed_xy":
        plan = [{"projector": "I-Pk", "axis": "x", "order": 0, "at": 0.0},
                {"projector": "I-Pk", "axis": "x", "order": 1, "at": 0.0},
                {"projector": "Pk", "axis": "y", "order": 0, "at": 0.0}]
    elif fam == "spectral3":
        plan = [{"projector": "I-Pk", "axis": "t", "order": i, "at": 0.0}
                for i in (0, 1, 2)]
    else:
        raise ConfigurationError(
            f"unknown family {fam!r}; supported: {', '.join(FAMILIES)}")
    return tuple(plan)


def reduce(spec, js=None, ps=None):
    """Build the regular problem: certify commutability, assemble the
    v-equation terms and the triangular C-system."""
    if js is None or ps is None:
        js, ps = complete_structure(spec.B, spec.A[0] if spec.A else spec.B)
    comm = certify_operators(js, spec.A)
    for i, ok in enumerate(comm.certified, start=1):
        if not ok:
            raise StructureError(
                f"commutability violation: operator A{i} does not map the "
                "chain span consistently onto the z span")
    Bplus = ps.Bplus.matrix
    vterms = [(spec.L[0], np.eye(js.codomain.dim))]
    for r, Aop in enumerate(spec.A, start=1):
        vterms.append((spec.L[r], Aop.matrix @ Bplus))

    idx = js.pair_indices()
    pos = {pair: a for a, pair in enumerate(idx)}
    rows = []
    solved = set()
    matB = comm.matB
    for s in range(js.l):
        for t in range(1, js.p[s] + 1):
            a = pos[(s, t)]
            unknown = (s, js.p[s] + 1 - t)
            lead = float(comm.matA[0][pos[unknown], a]) if comm.matA else 0.0
            if abs(lead - 1.0) > 1e-6:
                raise StructureError(
                    f"C-row for chain {s + 1} level {unknown[1]} has lead "
                    f"coefficient {lead:.3e}, expected 1 after normalization")
            lower = []
            for b, pair in enumerate(idx):
                if js.k and abs(matB[b, a]) > COEFF_TOL:
                    lower.append((0, pair, float(matB[b, a])))
                for r in range(1, len(comm.matA)):
                    c = float(comm.matA[r][b, a])
                    if abs(c) > COEFF_TOL:
                        lower.append((r, pair, c))
                c1 = float(comm.matA[0][b, a]) if comm.matA else 0.0
                if pair != unknown and abs(c1) > COEFF_TOL:
                    raise StructureError(
                        "quasitriangularity not certified: unexpected chain "
                        f"coupling {pair} -> {(s, t)} of size {c1:.2e}")
            for _, pair, _ in lower:
                if pair not in solved:
                    raise StructureError(
                        "quasitriangularity not certified: C-row for "
                        f"{unknown} needs unsolved component {pair}")
            rows.append(ScalarRow(unknown=unknown, proj=(s, t),
                                  lead_scale=lead, lower=tuple(lower)))
            solved.add(unknown)

    n_extra = 0 if js.phi_extra is None else js.phi_extra.shape[1]
    lambda_slots = tuple(f"lambda_{js.l + e + 1}" for e in range(n_extra))
    m_extra = 0 if js.psi_extra is None else js.psi_extra.shape[1]
    compat = tuple(range(m_extra))
    return ReducedProblem(system=spec, js=js, ps=ps, comm=comm,
                          Ltilde=tuple(vterms), Csystem=tuple(rows),
                          lambda_slots=lambda_slots, compat=compat,
                          bc_plan=boundary_condition_plan(spec, js))


def beta_tables(rp, f_samples, lambda_samples=None, apply_op=None):
    """Right-hand projections beta[(s,t)] = <f - lambda terms, psi_s^(t)>.

    f_samples has the codomain dimension on the last axis.  lambda_samples,
    when present, is a list of sampled free functions matching the leading
    axes of f_samples; apply_op(r, samples) must then apply L_r to scalar
    samples (needed because the lambda terms enter under L_r)."""
    js = rp.js
    G2 = js.codomain.gram
    eff = np.asarray(f_samples, dtype=float)
    if lambda_samples:
        for e, lam in enumerate(lambda_samples):
            if lam is None:
                continue
            phi_e = rp.js.phi_extra[:, e]
            for r, Aop in enumerate(rp.system.A, start=1):
                vec = Aop.matrix @ phi_e
                contrib = apply_op(r, np.asarray(lam, dtype=float))
                eff = eff - contrib[..., None] * vec
    beta = {}
    for (s, t) in js.pair_indices():
        psi = js.psi[s][t - 1]
        beta[(s, t)] = eff @ (G2 @ psi)
    return beta


def solve_C_recurrence(rp, beta, apply_op, solve_lead):
    """Forward substitution through the triangular C-system.

    beta maps proj pairs to sampled right sides; apply_op(op_index,
    samples) applies L_{op_index} to sampled scalars (op 0 is the lead
    L0); solve_lead(samples, row) inverts the family's L1 with the
    homogeneous data of the bc plan.  Returns {(chain, level): samples}."""
    solved = {}
    for row in rp.Csystem:
        rhs = np.array(beta[row.proj], dtype=float)
        for op_idx, pair, coef in row.lower:
            if pair not in solved:
                raise StructureError(
                    f"underdetermined C-row: {row.unknown} needs {pair} first")
            rhs = rhs - coef * apply_op(op_idx, solved[pair])
        solved[row.unknown] = solve_lead(rhs / row.lead_scale, row)
    return solved


def rhs_projection(rp, f_samples, lambda_samples=None, apply_op=None):
    """(I - Qk - Qextra)(f - sum_r Lr(D) Ar phi_extra_e lambda_e): the
    right-hand side of the regular v-equation."""
    js, ps = rp.js, rp.ps
    eff = np.asarray(f_samples, dtype=float)
    if lambda_samples:
        for e, lam in enumerate(lambda_samples):
            if lam is None:
                continue
            phi_e = js.phi_extra[:, e]
            for r, Aop in enumerate(rp.system.A, start=1):
                vec = Aop.matrix @ phi_e
                contrib = apply_op(r, np.asarray(lam, dtype=float))
                eff = eff - contrib[..., None] * vec
    IQ = np.eye(js.codomain.dim) - ps.q_total()
    return eff @ IQ.T


def reconstruct_solution(rp, v_samples, C_solved, lambda_samples=None,
                         v_constraint_tol=1e-8):
    """u = Bplus v + sum C_ij phi_i^(j) + sum lambda_e phi_extra_e.

    The codomain/domain dimension is the last axis of the sample arrays.
    For m > n the v samples must stay in the annihilator of the extra
    cokernel directions; violation means the right-hand side is
    incompatible."""
    js, ps = rp.js, rp.ps
    v = np.asarray(v_samples, dtype=float)
    if ps.Qextra is not None:
        dev = np.abs(v @ ps.Qextra.matrix.T).max() / max(1.0, np.abs(v).max())
        if dev > v_constraint_tol:
            raise CompatibilityError(
                f"compatibility violated: the regular part leaks into the "
                f"unresolvable cokernel directions (relative size {dev:.2e})")
    u = v @ ps.Bplus.matrix.T
    for (i, j), samples in C_solved.items():
        u = u + np.asarray(samples, dtype=float)[..., None] * js.phi[i][j - 1]
    if lambda_samples:
        for e, lam in enumerate(lambda_samples):
            if lam is None:
                continue
            u = u + np.asarray(lam, dtype=float)[..., None] * js.phi_extra[:, e]
    return u


def compat_residual(rp, axes, v_samples, f_samples):
    """Residual of the unresolvable-direction conditions (m > n): for each
    extra cokernel functional, sum_r Lr(D) <Ar Bplus v, psi_e> - <f, psi_e>
    must vanish identically."""
    js, ps = rp.js, rp.ps
    if not rp.compat:
        return 0.0
    G2 = js.codomain.gram
    Bplus = ps.Bplus.matrix
    worst = 0.0
    for e in rp.compat:
        psi_e = js.psi_extra[:, e]
        total = -(np.asarray(f_samples) @ (G2 @ psi_e))
        for r, Aop in enumerate(rp.system.A, start=1):
            scal = np.asarray(v_samples) @ ((Aop.matrix @ Bplus).T @ (G2 @ psi_e))
            total = total + apply_differential_operator(rp.system.L[r], scal, axes)
        worst = max(worst, float(np.abs(_interior(total, rp.system.L)).max()))
    return worst


def apply_differential_operator(Lspec, samples, axes, accuracy=2):
    """Apply a DifferentialOperatorSpec to sampled scalars; axes is the
    ordered list of (name, grid) the leading sample axes run over."""
    out = np.zeros_like(np.asarray(samples, dtype=float))
    for k, coef in Lspec.terms:
        part = np.asarray(samples, dtype=float)
        for axis_i, order in enumerate(k):
            if order:
                grid = axes[axis_i][1]
                h = float(grid[1] - grid[0])
                part = derivative_along_axis(part, h, order, axis=axis_i,
                                             accuracy=accuracy)
        out = out + coef * part
    return out


def _interior(arr, Lops, width=2):
    """Trim a stencil-width band off every differentiated axis."""
    arr = np.asarray(arr)
    diff_axes = set()
    for Lop in Lops:
        for k, _ in Lop.terms:
            for i, order in enumerate(k):
                if order:
                    diff_axes.add(i)
    slicer = tuple(slice(width, -width) if i in diff_axes else slice(None)
                   for i in range(arr.ndim))
    return arr[slicer] if arr.ndim else arr


def residual_check(spec, axes, u_samples, js=None, ps=None):
    """Substitute u back into the system with centered finite differences.

    axes: ordered list of (name, grid) matching the leading axes of
    u_samples (domain dimension last).  Returns (residual, report dict)
    with the interior max-norm of L0(D)Bu + sum Lr(D)Ar u - f and the
    norm of every projection boundary condition of the family plan."""
    u = np.asarray(u_samples, dtype=float)
    for name, grid in axes:
        if len(grid) < 5:
            raise ConfigurationError(
                f"axis {name} has {len(grid)} nodes; the difference stencils need >= 5")
    coords = _mesh_coords(axes)
    f_vals = np.asarray(spec.f(**coords), dtype=float)
    total = apply_differential_operator(spec.L[0], u @ spec.B.matrix.T, axes)
    for r, Aop in enumerate(spec.A, start=1):
        total = total + apply_differential_operator(spec.L[r], u @ Aop.matrix.T, axes)
    resid_field = total - f_vals
    resid = float(np.abs(_interior(resid_field, spec.L)).max())
    report = {"equation_residual": resid}
    if js is not None and ps is not None:
        axis_names = [name for name, _ in axes]
        for cond in boundary_condition_plan(spec, js):
            key = (f"{cond['projector']} d{cond['order']}u/d{cond['axis']}"
                   f"{cond['order']} at {cond['axis']}={cond['at']:g}")
            report[key] = _condition_norm(cond, axes, axis_names, u, ps)
    return resid, report


def _condition_norm(cond, axes, axis_names, u, ps):
    if cond["axis"] not in axis_names:
        return 0.0
    ax = axis_names.index(cond["axis"])
    grid = axes[ax][1]
    vals = u
    if cond["order"]:
        h = float(grid[1] - grid[0])
        vals = derivative_along_axis(vals, h, cond["order"], axis=ax)
    pick = np.argmin(np.abs(np.asarray(grid) - cond["at"]))
    vals = np.take(vals, pick, axis=ax)
    if cond["projector"] == "I-Pk":
        mat = np.eye(ps.Pk.matrix.shape[0]) - ps.p_total()
    elif cond["projector"] == "Pk":
        mat = ps.Pk.matrix
    else:
        mat = np.eye(ps.Pk.matrix.shape[0])
    return float(np.abs(vals @ mat.T).max())


def _mesh_coords(axes):
    if len(axes) == 1:
        return {axes[0][0]: np.asarray(axes[0][1], dtype=float)}
    grids = np.meshgrid(*[np.asarray(g, dtype=float) for _, g in axes],
                        indexing="ij")
    return {name: grids[i] for i, (name, _) in enumerate(axes)}


def describe_reduction(rp):
    """Stable text report of a reduced problem (for goldens and the CLI)."""
    lines = ["regular part:"]
    for Lspec, mat in rp.Ltilde:
        scale = float(np.abs(mat).max()) if mat.size else 0.0
        lines.append(f"  [{Lspec.describe()}] x operator(|coef|_max={scale:.6g})")
    lines.append(f"C-system rows: {len(rp.Csystem)}")
    for row in rp.Csystem:
        deps = ", ".join(f"L{op} C{pair}" for op, pair, _ in row.lower) or "none"
        lines.append(f"  C{row.unknown} from psi{row.proj}; lower terms: {deps}")
    lines.append(f"free function slots: {', '.join(rp.lambda_slots) or 'none'}")
    lines.append(f"compatibility functionals: {len(rp.compat)}")
    lines.append("boundary plan:")
    for cond in rp.bc_plan:
        lines.append(f"  {cond['projector']} d^{cond['order']}u "
                     f"on {cond['axis']}={cond['at']:g}")
    return "\n".join(lines) + "\n"
