import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pathstable.bnb import (
    BnbConfig,
    NodeRecord,
    audit_pruning,
    branch,
    enumerate_exhaustive,
    node_log_csv,
    solve_bnb,
)
from pathstable.core import ContractViolation, NodeAssignment, NoSolutionError, ParametricMINLP, Status
from pathstable.problems import build_parabola, build_unit_circle


def separable(costs, curv=None, D=None, e=None):
    """min (x - 0.5)^2 + sum c_i d_i + t sum q_i d_i^2, no equality rows.

    Convex for q >= 0, so every relaxation path is trivially stable; the leaf
    values are ``sum (c_i + q_i) d_i``.
    """
    c = np.asarray(costs, dtype=float)
    q = np.zeros_like(c) if curv is None else np.asarray(curv, dtype=float)
    k = len(c)

    def f(x, d, t):
        return float((x[0] - 0.5) ** 2 + c @ d + t * q @ d**2)

    def grad(x, d, t):
        return np.concatenate([[2 * (x[0] - 0.5)], c + 2 * t * q * d])

    def hess(x, d, t):
        return np.diag(np.concatenate([[2.0], 2 * t * q]))

    return ParametricMINLP(
        n_cont=1, n_bin=k, n_eq=0,
        objective=f, objective_grad=grad, objective_hess=hess,
        eq_constraints=lambda x, d, t: np.zeros(0),
        eq_jacobian=lambda x, d, t: np.zeros((0, 1 + k)),
        eq_hessian=lambda x, d, t, lam: np.zeros((1 + k, 1 + k)),
        lower_bounds=[0.0], upper_bounds=[1.0],
        int_matrix=D, int_rhs=e,
    )


def brute_force(costs, curv, D=None, e=None):
    best, arg = math.inf, None
    for bits in itertools.product((0, 1), repeat=len(costs)):
        d = np.array(bits, dtype=float)
        if D is not None and np.any(np.abs(np.asarray(D) @ d - e) > 1e-9):
            continue
        v = float(np.dot(np.add(costs, curv), d))
        if v < best:
            best, arg = v, bits
    return best, arg


def test_branch_examples():
    assert branch(NodeAssignment.parse("xx"), 0) == (NodeAssignment.parse("0x"), NodeAssignment.parse("1x"))
    assert branch(NodeAssignment.parse("1x"), 1) == (NodeAssignment.parse("10"), NodeAssignment.parse("11"))
    with pytest.raises(ContractViolation):
        branch(NodeAssignment.parse("1x"), 0)


def test_config_validation():
    with pytest.raises(ContractViolation):
        BnbConfig(queue="stack")
    with pytest.raises(ContractViolation):
        BnbConfig(prune_tol=-1.0)
    cfg = BnbConfig(queue="best", workers=4, deterministic=True)
    assert cfg.queue == "lifo" and cfg.workers == 1


def test_example1():
    r = solve_bnb(build_unit_circle())
    assert r.status is Status.OPTIMAL
    assert r.delta_bits() == "0"
    assert r.x[0] == pytest.approx(1.0, abs=1e-6)
    assert r.objective == pytest.approx(-1.0, abs=1e-8)
    e = enumerate_exhaustive(build_unit_circle())
    assert e.delta_bits() == r.delta_bits()
    assert e.objective == pytest.approx(r.objective, rel=1e-10)
    assert [row["status"] for row in e.leaf_table] == ["Optimal", "Infeasible"]


@pytest.mark.parametrize("build", [build_unit_circle, build_parabola])
def test_queue_disciplines_agree(build):
    p = build()
    ref = solve_bnb(p, BnbConfig(queue="lifo"))
    for queue in ("fifo", "best"):
        for rule in ("index", "fractional"):
            r = solve_bnb(p, BnbConfig(queue=queue, branch_rule=rule))
            assert r.delta_bits() == ref.delta_bits()
            assert r.objective == pytest.approx(ref.objective, abs=1e-8)


@pytest.mark.parametrize("build", [build_unit_circle, build_parabola])
def test_examples_audit_clean(build):
    p = build()
    assert audit_pruning(solve_bnb(p), enumerate_exhaustive(p)) == []


costs = st.lists(st.floats(-1.0, 1.0).map(lambda v: round(v, 3)), min_size=1, max_size=4)


@settings(max_examples=15)
@given(c=costs, data=st.data())
def test_matches_brute_force(c, data):
    q = data.draw(st.lists(st.floats(0.0, 0.5), min_size=len(c), max_size=len(c)))
    queue = data.draw(st.sampled_from(["lifo", "fifo", "best"]))
    p = separable(c, q)
    r = solve_bnb(p, BnbConfig(queue=queue))
    best, _ = brute_force(c, q)
    assert r.objective == pytest.approx(best, abs=1e-6)
    assert r.nodes_visited <= 2 ** (len(c) + 1) - 1
    hist = r.incumbent_history
    assert all(b <= a for a, b in zip(hist, hist[1:]))
    assert audit_pruning(r, enumerate_exhaustive(p)) == []


def test_bound_monotone_along_branches():
    p = separable([0.3, -0.2, 0.1, -0.4], [0.1, 0.2, 0.0, 0.3])
    r = solve_bnb(p, BnbConfig(prune_tol=1e9))  # never prune: every node evaluated
    assert r.nodes_visited == 2**5 - 1
    by_id = {rec.node_id: rec for rec in r.node_log}
    for rec in r.node_log:
        if rec.parent_id >= 0 and math.isfinite(rec.value):
            assert by_id[rec.parent_id].value <= rec.value + 1e-8


def test_integer_constraints_and_infeasible_nodes():
    # exactly one of the first two binaries
    D, e = [[1.0, 1.0, 0.0]], [1.0]
    c, q = [-0.5, -0.4, 0.2], [0.0, 0.0, 0.0]
    p = separable(c, q, D, e)
    r = solve_bnb(p, BnbConfig(branch_rule="index", prune_tol=1e9))
    best, arg = brute_force(c, q, np.array(D), np.array(e))
    assert r.delta_bits() == "".join(map(str, arg))
    assert r.objective == pytest.approx(best, abs=1e-6)
    assert any(rec.status == "IntInfeasible" for rec in r.node_log)
    table = enumerate_exhaustive(p).leaf_table
    assert sum(row["status"] == "IntInfeasible" for row in table) == 4


def test_no_solution():
    p = separable([0.1, 0.2], None, [[1.0, 1.0]], [3.0])
    with pytest.raises(NoSolutionError) as info:
        solve_bnb(p)
    assert info.value.report.status is Status.INFEASIBLE
    assert enumerate_exhaustive(p).status is Status.INFEASIBLE


def test_enumeration_without_binaries():
    p = ParametricMINLP(
        n_cont=1, n_bin=0, n_eq=0,
        objective=lambda x, d, t: float((x[0] - 0.25) ** 2),
        objective_grad=lambda x, d, t: np.array([2 * (x[0] - 0.25)]),
        objective_hess=lambda x, d, t: np.array([[2.0]]),
        eq_constraints=lambda x, d, t: np.zeros(0),
        eq_jacobian=lambda x, d, t: np.zeros((0, 1)),
        eq_hessian=lambda x, d, t, lam: np.zeros((1, 1)),
        lower_bounds=[0.0], upper_bounds=[1.0],
    )
    e = enumerate_exhaustive(p)
    assert e.nodes_visited == 1 and len(e.leaf_table) == 1
    assert e.x[0] == pytest.approx(0.25, abs=1e-8)
    assert solve_bnb(p).nodes_visited == 1


def test_enumeration_guard():
    with pytest.raises(ContractViolation):
        enumerate_exhaustive(separable(np.zeros(21)))


def test_audit_flags_unsound_prune():
    p = separable([0.3, -0.2])
    enum = enumerate_exhaustive(p)
    bad = NodeRecord(99, 0, 1, "1x", "Optimal", 5.0, True, "prune")
    r = solve_bnb(p)
    r.node_log.append(bad)
    assert [v[0] for v in audit_pruning(r, enum)] == [bad, bad]


def test_node_log_csv_and_workers(tmp_path):
    p = separable([0.3, -0.2, 0.1])
    serial = solve_bnb(p)
    parallel = solve_bnb(p, BnbConfig(workers=3))
    assert parallel.delta_bits() == serial.delta_bits()
    text = node_log_csv(serial.node_log, tmp_path / "log.csv")
    lines = text.splitlines()
    assert lines[0] == ",".join(NodeRecord.COLUMNS)
    assert len(lines) == serial.nodes_visited + 1
    assert (tmp_path / "log.csv").read_text() == text
