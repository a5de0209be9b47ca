import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pathstable.core import (
    ContractViolation,
    IntFeasibility,
    NodeAssignment,
    ParametricMINLP,
    SolveReport,
    Status,
    check_integer_feasible,
    relax,
)
from pathstable.problems import build_parabola, build_unit_circle


def _toy(n_bin=2, D=None, e=None):
    def zero(x, d, t):
        return 0.0

    def zgrad(x, d, t):
        return np.zeros(1 + n_bin)

    def zhess(x, d, t):
        return np.zeros((1 + n_bin, 1 + n_bin))

    return ParametricMINLP(
        n_cont=1, n_bin=n_bin, n_eq=0,
        objective=zero, objective_grad=zgrad, objective_hess=zhess,
        eq_constraints=lambda x, d, t: np.zeros(0),
        eq_jacobian=lambda x, d, t: np.zeros((0, 1 + n_bin)),
        eq_hessian=lambda x, d, t, lam: np.zeros((1 + n_bin, 1 + n_bin)),
        lower_bounds=[0.0], upper_bounds=[1.0],
        int_matrix=D, int_rhs=e,
    )


def test_bounds_must_be_ordered():
    with pytest.raises(ContractViolation):
        ParametricMINLP(
            n_cont=1, n_bin=0, n_eq=0,
            objective=None, objective_grad=None, objective_hess=None,
            eq_constraints=None, eq_jacobian=None, eq_hessian=None,
            lower_bounds=[1.0], upper_bounds=[1.0],
        )


def test_maximize_negates():
    p = build_unit_circle()
    assert p.objective(np.array([0.7]), np.array([0.0]), 1.0) == pytest.approx(-0.7)
    assert p.objective_grad(np.array([0.7]), np.array([0.0]), 1.0)[0] == -1.0


def test_nodes_parse_and_print():
    node = NodeAssignment.parse("1x0")
    assert node == (1, None, 0)
    assert node.free_indices == [1]
    assert node.depth == 2
    assert not node.is_leaf
    assert node.bitmask() == "1x0"
    assert NodeAssignment.root(3).bitmask() == "xxx"
    assert NodeAssignment.parse("111").extends(node) is False
    assert NodeAssignment.parse("100").extends(node)
    with pytest.raises(ContractViolation):
        NodeAssignment.parse("12")


def test_relax_example1_fixed_zero():
    rel = relax(build_unit_circle(), NodeAssignment.parse("0"))
    assert rel.n == 1
    # the circle blend with delta = 0: (1 - t) x + t x^2 = 1
    for t in (0.0, 0.3, 1.0):
        assert rel.constraints(np.array([1.0]), t)[0] == pytest.approx(0.0)
    assert rel.lower[0] == 0.5


def test_relax_all_free_and_all_fixed():
    p = build_parabola()
    free = relax(p, NodeAssignment.root(1))
    assert free.n == p.n_cont + 1
    assert free.lower[-1] == 0.0 and free.upper[-1] == 1.0
    fixed = relax(p, NodeAssignment.parse("1"))
    assert fixed.n == p.n_cont
    x, d = fixed.split(np.arange(5.0))
    assert d.tolist() == [1.0]


def test_relax_rejects_wrong_length():
    with pytest.raises(ContractViolation):
        relax(build_parabola(), NodeAssignment.parse("01"))


def test_relax_interval_domain():
    rel = relax(build_parabola(), [(0.25, 0.75)])
    assert rel.lower[-1] == 0.25 and rel.upper[-1] == 0.75
    with pytest.raises(ContractViolation):
        relax(build_parabola(), [(0.5, 1.5)])


def test_integer_feasibility_examples():
    assert check_integer_feasible(_toy(), NodeAssignment.parse("11")) is IntFeasibility.UNKNOWN
    p = _toy(D=[[1.0, 1.0]], e=[1.0])
    assert check_integer_feasible(p, NodeAssignment.parse("11")) is IntFeasibility.INFEASIBLE
    assert check_integer_feasible(p, NodeAssignment.parse("1x")) is IntFeasibility.UNKNOWN
    assert check_integer_feasible(p, NodeAssignment.parse("00")) is IntFeasibility.INFEASIBLE


@given(st.lists(st.sampled_from([0, 1, None]), min_size=1, max_size=8))
def test_nested_nodes_shrink_domains(values):
    p = _toy(n_bin=len(values))
    node = NodeAssignment(values)
    parent = relax(p, node)
    for i in node.free_indices:
        child_vals = list(values)
        child_vals[i] = 1
        child = relax(p, NodeAssignment(child_vals))
        assert NodeAssignment(child_vals).extends(node)
        for (plo, phi), (clo, chi) in zip(parent.domains, child.domains):
            assert plo <= clo <= chi <= phi


def test_report_bits():
    r = SolveReport(Status.OPTIMAL, objective=1.0, delta=np.array([1.0, 0.0, 1.0 - 1e-12]))
    assert r.ok and r.delta_bits() == "101"
