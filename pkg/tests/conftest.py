import numpy as np
import pytest

from teleloop._kernels import available_backends, get_backend
from teleloop.kinematics import builtin_chain


@pytest.fixture(params=available_backends())
def backend(request):
    """Run kernel-level tests against every available backend."""
    return get_backend(request.param)


@pytest.fixture
def planar2():
    return builtin_chain("planar2")


@pytest.fixture
def planar3():
    return builtin_chain("planar3")


@pytest.fixture
def spatial6():
    return builtin_chain("spatial6")


@pytest.fixture
def lift3():
    return builtin_chain("lift3")


@pytest.fixture
def lift4():
    return builtin_chain("lift4")


def fd_jacobian_linear(fk_fn, q, h=1e-6):
    """Central finite differences of the FK position: the independent oracle
    for the Jacobian's linear block."""
    q = np.asarray(q, dtype=float)
    n = q.shape[0]
    J = np.zeros((3, n))
    for i in range(n):
        qp = q.copy()
        qm = q.copy()
        qp[i] += h
        qm[i] -= h
        J[:, i] = (fk_fn(qp) - fk_fn(qm)) / (2.0 * h)
    return J
