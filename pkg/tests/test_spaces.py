"""Inner-product spaces, adjoints, null bases, kernel operators."""

import numpy as np
import pytest

from degenpde.errors import ConfigurationError
from degenpde.spaces import (FiniteOperator, InnerProductSpace, VectorElement,
                             apply, euclidean_space, grid_space,
                             identity_operator, inner, make_kernel_operator,
                             matrix_operator, mode_space, null_space)


# -- quadrature grams ---------------------------------------------------------

def test_trapezoid_integrates_quadratic():
    sp = grid_space(0.0, 1.0, 201)
    x = sp.grid
    # composite trapezoid error for x^2 is exactly h^2/6
    h = 1.0 / 200
    assert sp.inner(x, x) == pytest.approx(1.0 / 3.0 + h * h / 6.0, abs=1e-12)
    assert abs(sp.inner(x, x) - 1.0 / 3.0) < 1e-4


def test_trapezoid_sine_on_half_period():
    sp = grid_space(0.0, np.pi, 201)
    s = np.sin(sp.grid)
    # the cos(2x) part of sin^2 sums to zero over the uniform grid
    assert sp.inner(s, s) == pytest.approx(np.pi / 2.0, abs=1e-9)


def test_simpson_integrates_quadratic_exactly():
    sp = grid_space(0.0, 1.0, 201, quadrature="simpson")
    x = sp.grid
    assert sp.inner(x, x) == pytest.approx(1.0 / 3.0, abs=5e-15)


def test_simpson_rejects_even_node_count():
    with pytest.raises(ConfigurationError, match="odd node count"):
        grid_space(0.0, 1.0, 200, quadrature="simpson")


def test_unknown_quadrature_rejected():
    with pytest.raises(ConfigurationError, match="unknown quadrature"):
        grid_space(0.0, 1.0, 11, quadrature="gauss")


def test_grid_space_needs_two_nodes():
    with pytest.raises(ConfigurationError, match="at least 2 nodes"):
        grid_space(0.0, 1.0, 1)


def test_mode_space_shape():
    sp = mode_space(4, 3)
    assert sp.dim == 12
    assert sp.mode_shape == (4, 3)
    np.testing.assert_array_equal(sp.gram, np.eye(12))


# -- operators and adjoints ---------------------------------------------------

def test_operator_shape_validated():
    dom = euclidean_space(3)
    cod = euclidean_space(5)
    with pytest.raises(ConfigurationError, match="does not match"):
        FiniteOperator(np.zeros((3, 5)), dom, cod)


def test_euclidean_adjoint_is_transpose(rng):
    dom = euclidean_space(3)
    cod = euclidean_space(5)
    A = FiniteOperator(rng.normal(size=(5, 3)), dom, cod)
    np.testing.assert_allclose(A.adjoint_matrix(), A.matrix.T, atol=1e-14)


def test_adjoint_identity_under_weighted_grams(rng):
    for _ in range(100):
        dom = InnerProductSpace(dim=3, gram=np.diag(rng.uniform(0.5, 2.0, 3)))
        cod = InnerProductSpace(dim=5, gram=np.diag(rng.uniform(0.5, 2.0, 5)))
        A = FiniteOperator(rng.normal(size=(5, 3)), dom, cod)
        u = rng.normal(size=3)
        w = rng.normal(size=5)
        lhs = cod.inner(A.apply(u), w)
        rhs = dom.inner(u, A.adjoint().apply(w))
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


def test_adjoint_is_an_involution(rng):
    dom = grid_space(0.0, 1.0, 31)
    cod = grid_space(0.0, 2.0, 31)
    A = FiniteOperator(rng.normal(size=(31, 31)), dom, cod)
    back = A.adjoint().adjoint()
    assert np.abs(back.matrix - A.matrix).max() <= 1e-12
    assert back.domain is A.domain


def test_multiplicative_kernel_is_self_adjoint():
    sp = grid_space(0.0, 1.0, 101)
    A = make_kernel_operator(sp, "identity_minus_kernel", "3*x*s")
    assert np.abs(A.adjoint_matrix() - A.matrix).max() <= 1e-12


def test_vector_element_checks_length():
    sp = euclidean_space(3)
    with pytest.raises(ConfigurationError, match="does not match space dim"):
        VectorElement(sp, np.zeros(4))


def test_apply_and_inner_check_spaces(rng):
    sp3 = euclidean_space(3)
    sp4 = euclidean_space(4)
    A = identity_operator(sp3)
    with pytest.raises(ConfigurationError, match="domain does not match"):
        apply(A, VectorElement(sp4, np.zeros(4)))
    with pytest.raises(ConfigurationError, match="one space"):
        inner(VectorElement(sp3, np.zeros(3)), VectorElement(sp4, np.zeros(4)))
    u = VectorElement(sp3, rng.normal(size=3))
    assert inner(apply(A, u), u) == pytest.approx(u.coords @ u.coords)


def test_matrix_operator_defaults():
    A = matrix_operator([[1.0, 2.0, 3.0]])
    assert A.domain.dim == 3 and A.codomain.dim == 1
    with pytest.raises(ConfigurationError, match="2-d matrix"):
        matrix_operator([1.0, 2.0])


# -- null bases ---------------------------------------------------------------

def test_null_basis_of_zero_map():
    sp = euclidean_space(2)
    A = FiniteOperator(np.zeros((2, 2)), sp, sp)
    basis = A.null_basis()
    assert basis.shape == (2, 2)
    np.testing.assert_allclose(basis.T @ sp.gram @ basis, np.eye(2), atol=1e-12)
    assert np.abs(A.matrix @ basis).max() == 0.0


def test_null_basis_of_identity_is_empty():
    sp = euclidean_space(4)
    assert identity_operator(sp).null_basis().shape == (4, 0)


def test_null_basis_is_deterministic(rng):
    sp = euclidean_space(6)
    U = np.linalg.qr(rng.normal(size=(6, 6)))[0]
    A = FiniteOperator(U @ np.diag([3.0, 2.0, 1.0, 0, 0, 0]) @ U.T, sp, sp)
    first = A.null_basis()
    second = A.null_basis()
    assert first.tobytes() == second.tobytes()
    assert first.shape == (6, 3)
    # sign fix: first significant coordinate of each column is positive
    for j in range(3):
        col = first[:, j]
        nz = np.nonzero(np.abs(col) > 1e-12 * np.abs(col).max())[0]
        assert col[nz[0]] > 0
    assert np.abs(A.matrix @ first).max() <= 1e-10


def test_raw_kernel_null_direction_is_nearly_linear():
    sp = grid_space(0.0, 1.0, 201)
    A = make_kernel_operator(sp, "identity_minus_kernel", "3*x*s")
    vecs = null_space(A, rank_tol=1e-4)
    assert len(vecs) == 1
    v = vecs[0]
    x = VectorElement(sp, sp.grid)
    cos = abs(inner(v, x)) / (sp.norm(v.coords) * sp.norm(x.coords))
    assert cos >= 1.0 - 1e-6
    # a null direction at this tolerance really is nearly annihilated
    sv_max = np.linalg.svd(A.weighted_form(), compute_uv=False)[0]
    assert sp.norm(A.apply(v.coords)) <= 10 * 1e-4 * sv_max * sp.norm(v.coords)


# -- kernel operators ---------------------------------------------------------

def test_zero_kernel_gives_identity():
    sp = grid_space(0.0, 1.0, 51)
    A = make_kernel_operator(sp, "identity_minus_kernel", "0*x*s")
    np.testing.assert_array_equal(A.matrix, np.eye(51))


def test_raw_kernel_reproduces_linear_to_quadrature_error():
    sp = grid_space(0.0, 1.0, 201)
    A = make_kernel_operator(sp, "identity_minus_kernel", "3*x*s")
    x = sp.grid
    # trapezoid: K x = (1 + h^2/2) x, so the defect is exactly (h^2/2) x
    defect = A.apply(x)
    h = 1.0 / 200
    np.testing.assert_allclose(defect, -(h * h / 2.0) * x, atol=1e-12)
    assert sp.norm(defect) <= 1e-4 * sp.norm(x)


def test_exact_on_makes_annihilation_exact():
    sp = grid_space(0.0, 1.0, 201, quadrature="simpson")
    A = make_kernel_operator(sp, "identity_minus_kernel", "3*x*s",
                             exact_on="x")
    out = A.apply(sp.grid)
    assert np.abs(out).max() <= 1e-14


def test_exact_on_rejects_non_parallel_direction():
    sp = grid_space(0.0, 1.0, 201)
    with pytest.raises(ConfigurationError, match="not proportional"):
        make_kernel_operator(sp, "identity_minus_kernel", "3*x*s",
                             exact_on="1 + 0*x")


def test_exact_on_rejects_zero_direction():
    sp = grid_space(0.0, 1.0, 201)
    with pytest.raises(ConfigurationError, match="is zero"):
        make_kernel_operator(sp, "identity_minus_kernel", "3*x*s",
                             exact_on="0*x")


def test_kernel_operator_needs_grid_space():
    with pytest.raises(ConfigurationError, match="grid space"):
        make_kernel_operator(euclidean_space(4), "kernel_only", "x*s")


def test_unknown_kernel_kind_rejected():
    sp = grid_space(0.0, 1.0, 11)
    with pytest.raises(ConfigurationError, match="unknown kernel operator kind"):
        make_kernel_operator(sp, "resolvent", "x*s")


def test_sine_projector_is_idempotent():
    sp = grid_space(0.0, np.pi, 201)
    P = make_kernel_operator(sp, "kernel_only",
                             "(2/3.14159265358979323846)*sin(x)*sin(s)")
    M = P.matrix
    assert np.abs(M @ M - M).max() <= 1e-12


def test_null_residual_shrinks_at_second_order():
    # the raw-kernel defect is exactly h^2/2, so halving h divides it by 4
    rel = []
    for nodes in (101, 201):
        sp = grid_space(0.0, 1.0, nodes)
        A = make_kernel_operator(sp, "identity_minus_kernel", "3*x*s")
        x = sp.grid
        rel.append(sp.norm(A.apply(x)) / sp.norm(x))
    assert rel[0] / rel[1] >= 4.0 - 1e-6
