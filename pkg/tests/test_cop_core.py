import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from odece.cop_core import (
    ConstraintSystem,
    ContractError,
    CopInstance,
    Family,
    VarDomain,
    constraint_grad_rho,
    constraint_value,
    constraint_values,
    is_feasible,
    objective_value,
    unsat_mask,
)


def kw(weights, caps):
    w = np.atleast_2d(np.asarray(weights, dtype=float))
    return ConstraintSystem(Family.KNAPSACK_WEIGHTS, w.shape[1], w.shape[0], caps), w.ravel()


def test_knapsack_value_example():
    sys_, rho = kw([2, 5, 3], [4])
    assert constraint_value(sys_, [1, 0, 1], rho, 0) == 1.0


def test_covering_value_example():
    sys_ = ConstraintSystem(Family.COVERING_LHS, 2, 1, [6.0])
    assert constraint_value(sys_, [1, 2], [3, 1], 0) == 1.0


def test_zero_assignment_gives_minus_capacity():
    sys_, rho = kw([2, 5, 3], [4])
    assert constraint_value(sys_, [0, 0, 0], rho, 0) == -4.0


def test_shape_errors():
    sys_, rho = kw([2, 5, 3], [4])
    with pytest.raises(ContractError):
        constraint_value(sys_, [1, 0], rho, 0)
    with pytest.raises(ContractError):
        constraint_value(sys_, [1, 0, 1], rho[:2], 0)
    with pytest.raises(ContractError):
        constraint_value(sys_, [1, 0, 1], rho, 1)
    with pytest.raises(ContractError):
        constraint_value(sys_, [1, 0.5, 1], rho, 0)


def test_system_invariants():
    s = ConstraintSystem(Family.KNAPSACK_CAPACITIES, 4, 2, np.ones(8))
    assert s.predicted_slot_count == 2 and s.var_domain is VarDomain.BINARY
    s = ConstraintSystem(Family.COVERING_LHS, 4, 2, np.ones(2))
    assert s.predicted_slot_count == 8 and s.var_domain is VarDomain.NONNEGATIVE
    with pytest.raises(ContractError):
        ConstraintSystem(Family.KNAPSACK_WEIGHTS, 4, 2, np.ones(3))
    with pytest.raises(ContractError):
        ConstraintSystem(Family.KNAPSACK_WEIGHTS, 0, 2, np.ones(2))


def test_grad_examples():
    s = ConstraintSystem(Family.KNAPSACK_CAPACITIES, 3, 2, np.ones(6))
    assert constraint_grad_rho(s, [1, 0, 1], [1.0, 1.0], 0).tolist() == [-1.0, 0.0]
    s, rho = kw([[3, 4]], [5])
    assert constraint_grad_rho(s, [1, 0], rho, 0).tolist() == [1.0, 0.0]
    s = ConstraintSystem(Family.COVERING_LHS, 2, 2, [1.0, 1.0])
    g = constraint_grad_rho(s, [2.0, 3.0], np.ones(4), 1)
    assert g.tolist() == [0.0, 0.0, -2.0, -3.0]


def _family_case(rng, family, n, m):
    if family is Family.KNAPSACK_WEIGHTS:
        s = ConstraintSystem(family, n, m, rng.uniform(1, 10, m))
        x = rng.integers(0, 2, n).astype(float)
    elif family is Family.KNAPSACK_CAPACITIES:
        s = ConstraintSystem(family, n, m, rng.uniform(1, 10, n * m))
        x = rng.integers(0, 2, n).astype(float)
    else:
        s = ConstraintSystem(family, n, m, rng.uniform(1, 10, m))
        x = rng.uniform(0, 3, n)
    return s, x, rng.normal(size=s.predicted_slot_count)


@pytest.mark.parametrize("family", list(Family))
def test_grad_matches_central_differences(family, rng):
    for _ in range(20):
        s, x, rho = _family_case(rng, family, 5, 3)
        for i in range(3):
            g = constraint_grad_rho(s, x, rho, i)
            fd = np.zeros_like(rho)
            for j in range(rho.size):
                e = np.zeros_like(rho)
                e[j] = 1e-5
                fd[j] = (constraint_value(s, x, rho + e, i) - constraint_value(s, x, rho - e, i)) / 2e-5
            assert np.allclose(g, fd, atol=1e-8)


@pytest.mark.parametrize("family", list(Family))
def test_affine_in_rho(family, rng):
    for _ in range(50):
        s, x, rho = _family_case(rng, family, 6, 2)
        d = rng.normal(size=rho.shape)
        for i in range(2):
            lhs = constraint_value(s, x, rho + d, i) - constraint_value(s, x, rho, i)
            assert abs(lhs - constraint_grad_rho(s, x, rho, i) @ d) < 1e-10


def test_unsat_mask_boundary_is_satisfied():
    s = ConstraintSystem(Family.KNAPSACK_CAPACITIES, 1, 3, [1.0, 1.0, 1.0])
    # g = 1 - cap, so caps [0, 1.5, 1] give g = [1, -0.5, 0]
    assert unsat_mask(s, [1.0], [0.0, 1.5, 1.0]).tolist() == [1, 0, 0]


def test_unsat_mask_examples():
    s, rho = kw([[2, 5, 3], [1, 1, 1]], [4, 4])
    assert unsat_mask(s, [0, 0, 0], rho).tolist() == [0, 0]
    c = ConstraintSystem(Family.COVERING_LHS, 2, 1, [6.0])
    assert unsat_mask(c, [0, 0], [3, 1]).tolist() == [1]
    assert is_feasible(s, [0, 0, 0], rho)
    assert not is_feasible(s, [1, 1, 0], rho)


def test_feasible_iff_max_g_nonpositive(rng):
    for _ in range(10_000):
        n, m = rng.integers(1, 6), rng.integers(1, 4)
        w = rng.normal(size=(m, n))
        cap = rng.normal(size=m)
        s = ConstraintSystem(Family.KNAPSACK_WEIGHTS, n, m, cap)
        x = rng.integers(0, 2, n).astype(float)
        assert is_feasible(s, x, w.ravel()) == (constraint_values(s, x, w.ravel()).max() <= 0)


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(0.0, 10.0), min_size=3, max_size=3),
    st.integers(0, 2),
    st.floats(0.0, 5.0),
)
def test_covering_content_increase_never_raises_g(x, n, delta):
    s = ConstraintSystem(Family.COVERING_LHS, 3, 1, [5.0])
    rho = np.array([1.0, 2.0, 0.5])
    bumped = rho.copy()
    bumped[n] += delta
    assert constraint_value(s, x, bumped, 0) <= constraint_value(s, x, rho, 0)


def test_objective_value():
    assert objective_value([-10, -7], [1, 1]) == -17.0
    assert objective_value([3.0, 4.0], [0, 0]) == 0.0
    with pytest.raises(ContractError):
        objective_value([1, 2], [1, 2, 3])


def test_objective_value_matches_loop(rng):
    for _ in range(100):
        q, x = rng.normal(size=17), rng.normal(size=17)
        naive = 0.0
        for a, b in zip(q, x):
            naive += a * b
        assert abs(objective_value(q, x) - naive) < 1e-12


def test_instance_validation():
    s, rho = kw([2, 5, 3], [4])
    CopInstance(np.zeros(2), rho, -np.ones(3), np.array([1.0, 0, 0])).validate(s)
    with pytest.raises(ContractError):
        CopInstance(np.zeros(2), rho, -np.ones(3), np.array([1.0, 1.0, 0])).validate(s)
    with pytest.raises(ContractError):
        CopInstance(np.array([np.nan]), rho, -np.ones(3)).validate(s)
