import numpy as np
import pytest

from degenpde.reduction import DegenerateSystemSpec, DifferentialOperatorSpec
from degenpde.spaces import grid_space, identity_operator, make_kernel_operator

PROBLEMS = ("example1.json", "example2.json", "example3.json",
            "example4.json", "example5.json")


@pytest.fixture
def rng():
    return np.random.default_rng(20250816)


@pytest.fixture
def problems_dir():
    import pathlib
    return pathlib.Path(__file__).resolve().parent.parent / "problems"


def op_spec(*terms, nvars=1):
    return DifferentialOperatorSpec(terms=tuple(terms), nvars=nvars)


def kernel_evolution_spec(family, f, nodes=201, quadrature="simpson",
                          t_hi=2.0, dt=1e-3, a1_scale=-1.0):
    """The bundled single-kernel evolution problem: B = I - 3xs on [0,1],
    A1 = a1_scale * I, first- or second-order lead in t."""
    sp = grid_space(0.0, 1.0, nodes, quadrature=quadrature)
    B = make_kernel_operator(sp, "identity_minus_kernel", "3*x*s",
                             exact_on="x")
    A1 = identity_operator(sp, scale=a1_scale)
    if family == "evolution1":
        L = [op_spec(((1,), 1.0)), op_spec(((0,), 1.0))]
    else:
        L = [op_spec(((2,), 1.0)), op_spec(((1,), 1.0))]
    return DegenerateSystemSpec(B=B, A=[A1], L=L, f=f, family=family,
                                box={"t": (0.0, t_hi)}, grid={"dt": dt})


def grid_samples(xg):
    xg = np.asarray(xg, dtype=float)

    def wrap(func):
        def sampler(t):
            tv = np.atleast_1d(np.asarray(t, dtype=float))
            vals = np.asarray(func(tv[:, None], xg[None, :]), dtype=float)
            return np.broadcast_to(vals, (tv.shape[0], xg.shape[0])).copy()
        return sampler

    return wrap


@pytest.fixture
def evolution_factory():
    return kernel_evolution_spec
