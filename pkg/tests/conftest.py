import pytest

from mse_adjust import CausalDag, LinearGaussianScm, preset


@pytest.fixture(scope="session")
def m1() -> LinearGaussianScm:
    return preset("m1")


@pytest.fixture(scope="session")
def m2() -> LinearGaussianScm:
    return preset("m2")


@pytest.fixture(scope="session")
def g1(m1) -> CausalDag:
    return m1.dag


@pytest.fixture(scope="session")
def g2(m2) -> CausalDag:
    return m2.dag


@pytest.fixture(scope="session")
def g3() -> CausalDag:
    return preset("g3-demo").dag


@pytest.fixture(scope="session")
def nonconverging() -> LinearGaussianScm:
    """Both confounders feed treatment and outcome with cancelling signs, so
    the empty set is unbiased with the smallest asymptotic variance."""
    dag = CausalDag(
        labels=("A", "Y", "O1", "O2"),
        edges=((0, 1), (2, 0), (2, 1), (3, 0), (3, 1)),
        treatment=0,
        outcome=1,
    )
    coef = {
        ("A", "Y"): 1.0,
        ("O1", "A"): 2.0,
        ("O1", "Y"): 1.0,
        ("O2", "A"): -2.0,
        ("O2", "Y"): 1.0,
    }
    return LinearGaussianScm.from_edge_map(dag, coef, 1.0)
