"""System specs, reduction to the regular problem, residual checks."""

import numpy as np
import pytest

from degenpde.errors import (CompatibilityError, ConfigurationError,
                             StructureError)
from degenpde.reduction import (DegenerateSystemSpec, DifferentialOperatorSpec,
                                apply_differential_operator,
                                boundary_condition_plan, describe_reduction,
                                reduce, residual_check)
from degenpde.solvers import solve_family
from degenpde.spaces import identity_operator, matrix_operator

D1 = DifferentialOperatorSpec(terms=(((1,), 1.0),), nvars=1)
D2 = DifferentialOperatorSpec(terms=(((2,), 1.0),), nvars=1)
ID = DifferentialOperatorSpec(terms=(((0,), 1.0),), nvars=1)


def _evolution_spec(B, A, f, L=None, dt=1e-3, t_hi=1.0):
    return DegenerateSystemSpec(B=B, A=A, L=L or [D1, ID], f=f,
                                family="evolution1", box={"t": (0.0, t_hi)},
                                grid={"dt": dt})


# -- differential operator specs ----------------------------------------------

def test_operator_spec_order_and_identity():
    op = DifferentialOperatorSpec(terms=(((2, 1), 1.0), ((0, 0), -3.0)),
                                  nvars=2)
    assert op.order == 3
    assert not op.is_identity()
    assert ID.is_identity()
    assert "D0^2" in op.describe() and "D1" in op.describe()


def test_operator_spec_rejects_bad_multi_index():
    with pytest.raises(ConfigurationError, match="bad multi-index"):
        DifferentialOperatorSpec(terms=(((1, 0), 1.0),), nvars=1)
    with pytest.raises(ConfigurationError, match="bad multi-index"):
        DifferentialOperatorSpec(terms=(((-1,), 1.0),), nvars=1)


def test_apply_differential_operator_mixed_partial():
    x = np.linspace(0.0, 1.0, 41)
    y = np.linspace(0.0, 1.0, 31)
    field = np.outer(x ** 2, y)
    op = DifferentialOperatorSpec(terms=(((1, 1), 1.0),), nvars=2)
    out = apply_differential_operator(op, field, [("x", x), ("y", y)])
    np.testing.assert_allclose(out, np.broadcast_to(2 * x[:, None],
                                                    field.shape), atol=1e-9)


# -- system spec validation ----------------------------------------------------

def test_system_spec_rejects_unknown_family():
    B = matrix_operator(np.eye(2))
    with pytest.raises(ConfigurationError, match="unknown family 'heat'"):
        DegenerateSystemSpec(B=B, A=[B], L=[D1, ID], f=None, family="heat")


def test_system_spec_counts_operators():
    B = matrix_operator(np.eye(2))
    with pytest.raises(ConfigurationError, match="one differential operator"):
        DegenerateSystemSpec(B=B, A=[B], L=[D1], f=None, family="evolution1")


def test_system_spec_requires_decreasing_orders():
    B = matrix_operator(np.eye(2))
    with pytest.raises(ConfigurationError, match="strictly decrease"):
        DegenerateSystemSpec(B=B, A=[B], L=[ID, D1], f=None,
                             family="evolution1")


def test_system_spec_checks_operator_shapes():
    B = matrix_operator(np.eye(2))
    A = matrix_operator(np.eye(3))
    with pytest.raises(ConfigurationError, match="A1 shape mismatch"):
        DegenerateSystemSpec(B=B, A=[A], L=[D1, ID], f=None,
                             family="evolution1")


# -- boundary plans -------------------------------------------------------------

def test_boundary_plans_per_family():
    B = matrix_operator([[1.0, 0.0], [0.0, 0.0]])
    fams = {
        "evolution1": [("I-Pk", "t", 0)],
        "evolution2": [("I", "t", 0), ("I-Pk", "t", 1)],
        "goursat": [("I-Pk", "x", 0), ("I-Pk", "y", 0)],
        "mixed_xy": [("I-Pk", "x", 0), ("I-Pk", "x", 1), ("Pk", "y", 0)],
        "spectral3": [("I-Pk", "t", 0), ("I-Pk", "t", 1), ("I-Pk", "t", 2)],
    }
    for fam, want in fams.items():
        nv = 2 if fam in ("goursat", "mixed_xy") else 1
        zero = tuple(0 for _ in range(nv))
        lead = tuple(3 if i == 0 else 0 for i in range(nv))
        L = [DifferentialOperatorSpec(terms=((lead, 1.0),), nvars=nv),
             DifferentialOperatorSpec(terms=((zero, 1.0),), nvars=nv)]
        spec = DegenerateSystemSpec(B=B, A=[matrix_operator(np.eye(2))],
                                    L=L, f=None, family=fam)
        plan = boundary_condition_plan(spec, None)
        got = [(c["projector"], c["axis"], c["order"]) for c in plan]
        assert got == want, fam


# -- reduction ------------------------------------------------------------------

def test_reduce_single_link_chain_layout():
    B = matrix_operator([[1.0, 0.0], [0.0, 0.0]])
    A = matrix_operator(np.eye(2))
    rp = reduce(_evolution_spec(B, [A], f=None))
    assert len(rp.Csystem) == 1
    row = rp.Csystem[0]
    assert row.unknown == (0, 1) and row.proj == (0, 1)
    assert row.lead_scale == pytest.approx(1.0)
    assert row.lower == ()
    assert rp.lambda_slots == () and rp.compat == ()
    text = describe_reduction(rp)
    for token in ("regular part:", "C-system rows: 1",
                  "free function slots: none",
                  "compatibility functionals: 0", "boundary plan:"):
        assert token in text


def test_reduce_length_two_chain_orders_rows():
    B = matrix_operator([[0.0, 1.0], [0.0, 0.0]])
    A = matrix_operator(np.eye(2))
    rp = reduce(_evolution_spec(B, [A], f=None))
    assert [row.unknown for row in rp.Csystem] == [(0, 2), (0, 1)]
    # the second row depends on the first through the lead operator
    assert rp.Csystem[0].lower == ()
    assert any(pair == (0, 2) for _, pair, _ in rp.Csystem[1].lower)


def test_reduce_names_free_function_slots():
    B = matrix_operator([[1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    A = matrix_operator([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    rp = reduce(_evolution_spec(B, [A], f=None))
    assert rp.lambda_slots == ("lambda_2",)
    assert rp.compat == ()


def test_reduce_counts_compat_functionals():
    B = matrix_operator([[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]])
    A = matrix_operator([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    rp = reduce(_evolution_spec(B, [A], f=None))
    assert rp.compat == (0,)
    assert rp.lambda_slots == ()


def test_reduce_rejects_uncertified_operator():
    B = matrix_operator([[1.0, 0.0], [0.0, 0.0]])
    A1 = matrix_operator(np.eye(2))
    A2 = matrix_operator([[0.0, 1.0], [0.0, 0.0]])  # pushes phi off span z
    spec = DegenerateSystemSpec(B=B, A=[A1, A2], L=[D2, D1, ID], f=None,
                                family="evolution1", box={"t": (0.0, 1.0)})
    with pytest.raises(StructureError, match="commutability violation"):
        reduce(spec)


def test_reduce_rejects_chain_coupling_operator():
    B = matrix_operator(np.diag([1.0, 0.0, 0.0]))
    A1 = matrix_operator(np.eye(3))
    A2 = matrix_operator(np.eye(3)[[0, 2, 1]])  # swaps the two chains
    spec = DegenerateSystemSpec(B=B, A=[A1, A2], L=[D2, D1, ID], f=None,
                                family="evolution1", box={"t": (0.0, 1.0)})
    with pytest.raises(StructureError, match="quasitriangularity not certified"):
        reduce(spec)


# -- end-to-end on a hand-solvable length-two chain -----------------------------

def test_length_two_chain_recovers_manufactured_solution():
    # d/dt(Bu) + u = f with B the 2x2 upper shift: the second component
    # is forced directly, the first follows after one differentiation
    B = matrix_operator([[0.0, 1.0], [0.0, 0.0]])
    A = matrix_operator(np.eye(2))

    def f(t=None):
        t = np.asarray(t, dtype=float)
        return np.stack([np.sin(t), t ** 2], axis=-1)

    rp = reduce(_evolution_spec(B, [A], f=f))
    fld = solve_family(rp)
    t = fld.axes[0][1]
    want1 = np.sin(t) - 2.0 * t
    want2 = t ** 2
    assert np.abs(fld.values[:, 0] - want1).max() <= 1e-9
    assert np.abs(fld.values[:, 1] - want2).max() <= 1e-9


def test_tall_realization_accepts_compatible_data():
    B = matrix_operator([[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]])
    A = matrix_operator([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])

    def f(t=None):
        t = np.asarray(t, dtype=float)
        return np.stack([np.cos(t), np.sin(t), t], axis=-1)

    rp = reduce(_evolution_spec(B, [A], f=f))
    fld = solve_family(rp)
    t = fld.axes[0][1]
    assert np.abs(fld.values[:, 0] - np.sin(t)).max() <= 1e-8
    assert np.abs(fld.values[:, 1] - t).max() <= 1e-8


def test_tall_realization_rejects_incompatible_data():
    B = matrix_operator([[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]])
    A = matrix_operator([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])

    def f(t=None):
        t = np.asarray(t, dtype=float)
        return np.stack([np.ones_like(t), 0 * t, 0 * t], axis=-1)

    rp = reduce(_evolution_spec(B, [A], f=f))
    with pytest.raises(CompatibilityError, match="unresolvable-direction"):
        solve_family(rp)


# -- residual checks -------------------------------------------------------------

def test_residual_check_zero_solution_zero_rhs():
    B = matrix_operator([[1.0, 0.0], [0.0, 0.0]])
    A = matrix_operator(np.eye(2))

    def f(t=None):
        t = np.asarray(t, dtype=float)
        return np.stack([0 * t, 0 * t], axis=-1)

    spec = _evolution_spec(B, [A], f=f)
    tg = np.linspace(0.0, 1.0, 101)
    resid, report = residual_check(spec, [("t", tg)], np.zeros((101, 2)))
    assert resid == 0.0
    assert report["equation_residual"] == 0.0


def test_residual_check_reports_boundary_conditions():
    B = matrix_operator([[1.0, 0.0], [0.0, 0.0]])
    A = matrix_operator(np.eye(2))

    def f(t=None):
        t = np.asarray(t, dtype=float)
        return np.stack([np.cos(t), np.exp(-t)], axis=-1)

    spec = _evolution_spec(B, [A], f=f)
    rp = reduce(spec)
    fld = solve_family(rp)
    axes = [("t", fld.axes[0][1])]
    resid, report = residual_check(spec, axes, fld.values, rp.js, rp.ps)
    assert resid <= 5e-6
    key = "I-Pk d0u/dt0 at t=0"
    assert key in report
    assert report[key] <= 1e-10


def test_residual_check_wants_enough_nodes():
    B = matrix_operator([[1.0, 0.0], [0.0, 0.0]])
    spec = _evolution_spec(B, [matrix_operator(np.eye(2))], f=None)
    with pytest.raises(ConfigurationError, match=">= 5"):
        residual_check(spec, [("t", np.linspace(0, 1, 4))], np.zeros((4, 2)))
