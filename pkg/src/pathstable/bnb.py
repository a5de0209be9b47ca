"""Branch-and-bound over binary assignments with continuation-solved relaxations.

Every popped node is evaluated: integer-infeasible nodes are dropped without a
solve, leaves may become the incumbent, interior nodes are pruned when their
relaxation value exceeds the incumbent by more than ``prune_tol`` and branched
otherwise.
"""
from __future__ import annotations

import collections
import csv
import heapq
import io
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .continuation import ContinuationSchedule, solve_relaxation
from .core import (
    ContractViolation,
    IntFeasibility,
    NodeAssignment,
    NoSolutionError,
    ParametricMINLP,
    SolveReport,
    Status,
    check_integer_feasible,
    relax,
)

QUEUES = ("lifo", "fifo", "best")
BRANCH_RULES = ("index", "fractional")
MAX_ENUMERATION_BINARIES = 20


@dataclass(frozen=True)
class BnbConfig:
    queue: str = "lifo"
    branch_rule: str = "fractional"
    prune_tol: float = 1e-9
    workers: int = 1
    schedule: ContinuationSchedule = field(default_factory=ContinuationSchedule)
    deterministic: bool = False

    def __post_init__(self):
        if self.deterministic:
            object.__setattr__(self, "workers", 1)
            object.__setattr__(self, "queue", "lifo")
        if self.queue not in QUEUES:
            raise ContractViolation(f"queue must be one of {QUEUES}")
        if self.branch_rule not in BRANCH_RULES:
            raise ContractViolation(f"branch rule must be one of {BRANCH_RULES}")
        if not self.prune_tol >= 0:
            raise ContractViolation("prune_tol must be non-negative")
        if self.workers < 1:
            raise ContractViolation("need at least one worker")


@dataclass
class Incumbent:
    objective: float = math.inf
    delta: object = None
    report: SolveReport = None


@dataclass(frozen=True)
class NodeRecord:
    node_id: int
    parent_id: int
    depth: int
    assignment: str
    status: str
    value: float
    pruned: bool
    action: str

    COLUMNS = ("node_id", "parent_id", "depth", "assignment", "status", "C_value", "pruned_flag")


def node_log_csv(records, path=None):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(NodeRecord.COLUMNS)
    for r in records:
        w.writerow([r.node_id, r.parent_id, r.depth, r.assignment, r.status, repr(r.value), int(r.pruned)])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def branch(node: NodeAssignment, index: int):
    """Children fixing ``node[index]`` to 0 and to 1."""
    if not 0 <= index < len(node) or node[index] is not None:
        raise ContractViolation(f"cannot branch on entry {index} of {node.bitmask()}")
    lo, hi = list(node), list(node)
    lo[index], hi[index] = 0, 1
    return NodeAssignment(lo), NodeAssignment(hi)


def _choose_index(node, report, rule):
    free = node.free_indices
    if rule == "fractional" and report is not None and report.delta is not None:
        frac = [abs(report.delta[i] - 0.5) for i in free]
        return free[int(np.argmin(frac))]  # argmin keeps the lowest index on ties
    return free[0]


class _Queue:
    def __init__(self, discipline):
        self.discipline = discipline
        self._items = collections.deque()
        self._heap = []
        self._seq = itertools.count()

    def __len__(self):
        return len(self._heap) if self.discipline == "best" else len(self._items)

    def push_children(self, children, priority):
        """``children`` in preference order: the first one is explored first."""
        if self.discipline == "lifo":
            for item in reversed(children):
                self._items.append(item)
        elif self.discipline == "fifo":
            self._items.extend(children)
        else:
            for item in children:
                heapq.heappush(self._heap, (priority, next(self._seq), item))

    def pop(self):
        if self.discipline == "lifo":
            return self._items.pop()
        if self.discipline == "fifo":
            return self._items.popleft()
        return heapq.heappop(self._heap)[2]


def _evaluate(problem, node, schedule):
    if check_integer_feasible(problem, node) is IntFeasibility.INFEASIBLE:
        return None
    return solve_relaxation(relax(problem, node), schedule)


def solve_bnb(problem: ParametricMINLP, config: BnbConfig = None) -> SolveReport:
    """Global optimum of a mixed-integer path-stable problem.

    Raises :class:`NoSolutionError` when no leaf has a solvable relaxation.
    """
    config = config or BnbConfig()
    schedule = config.schedule
    queue = _Queue(config.queue)
    queue.push_children([(NodeAssignment.root(problem.n_bin), -1)], -math.inf)
    inc = Incumbent()
    log, history = [], []
    lower_bound = math.nan
    warnings = 0
    leaf_failures = 0
    next_id = itertools.count()
    pool = ThreadPoolExecutor(config.workers) if config.workers > 1 else None
    try:
        while len(queue):
            batch = [queue.pop() for _ in range(min(config.workers, len(queue)))]
            if pool is None:
                results = [_evaluate(problem, node, schedule) for node, _ in batch]
            else:
                results = list(pool.map(lambda item: _evaluate(problem, item[0], schedule), batch))
            for (node, parent), res in zip(batch, results):
                node_id = next(next_id)
                if res is None:
                    log.append(NodeRecord(node_id, parent, node.depth, node.bitmask(), "IntInfeasible", math.inf, True, "int-infeasible"))
                    continue
                value = res.objective if res.ok else (math.inf if res.status is Status.INFEASIBLE else -math.inf)
                if parent < 0:
                    lower_bound = value
                if res.status not in (Status.OPTIMAL, Status.INFEASIBLE):
                    warnings += 1
                status = res.status.value
                if node.is_leaf:
                    if res.ok and res.objective < inc.objective:
                        inc = Incumbent(res.objective, res.delta.copy(), res)
                        history.append(res.objective)
                        action = "incumbent"
                    else:
                        if not res.ok and res.status is not Status.INFEASIBLE:
                            leaf_failures += 1
                        action = "discard"
                    log.append(NodeRecord(node_id, parent, node.depth, node.bitmask(), status, value, False, action))
                    continue
                if res.status is Status.INFEASIBLE:
                    log.append(NodeRecord(node_id, parent, node.depth, node.bitmask(), status, value, True, "prune-infeasible"))
                    continue
                if value > inc.objective + config.prune_tol:
                    log.append(NodeRecord(node_id, parent, node.depth, node.bitmask(), status, value, True, "prune"))
                    continue
                log.append(NodeRecord(node_id, parent, node.depth, node.bitmask(), status, value, False, "branch"))
                rule = config.branch_rule if res.ok else "index"
                idx = _choose_index(node, res, rule)
                zero, one = branch(node, idx)
                prefer_one = res.ok and res.delta[idx] >= 0.5
                order = [one, zero] if prefer_one else [zero, one]
                queue.push_children([(child, node_id) for child in order], value)
    finally:
        if pool is not None:
            pool.shutdown()

    common = dict(
        nodes_visited=len(log),
        lower_bound=lower_bound,
        warnings=warnings,
        node_log=log,
        incumbent_history=history,
    )
    if inc.report is None:
        status = Status.SINGULAR_POINT if leaf_failures else Status.INFEASIBLE
        report = SolveReport(status, message="no feasible leaf found", **common)
        raise NoSolutionError("branch-and-bound found no feasible leaf", report)
    leaf = inc.report
    return SolveReport(
        Status.OPTIMAL,
        objective=inc.objective,
        x=leaf.x,
        delta=inc.delta,
        multipliers=leaf.multipliers,
        kkt_residual=leaf.kkt_residual,
        mu=leaf.mu,
        iterations=dict(leaf.iterations),
        **common,
    )


def enumerate_exhaustive(problem: ParametricMINLP, schedule: ContinuationSchedule = None) -> SolveReport:
    """Solve every leaf relaxation; ``leaf_table`` lists all of them."""
    if problem.n_bin > MAX_ENUMERATION_BINARIES:
        raise ContractViolation(f"refusing to enumerate 2^{problem.n_bin} leaves")
    schedule = schedule or ContinuationSchedule()
    table = []
    best = None
    for bits in itertools.product((0, 1), repeat=problem.n_bin):
        node = NodeAssignment(bits)
        res = _evaluate(problem, node, schedule)
        if res is None:
            table.append({"assignment": node.bitmask(), "status": "IntInfeasible", "objective": math.inf})
            continue
        table.append({"assignment": node.bitmask(), "status": res.status.value, "objective": res.objective if res.ok else math.inf})
        if res.ok and (best is None or res.objective < best.objective):
            best = res
    if best is None:
        return SolveReport(Status.INFEASIBLE, nodes_visited=len(table), leaf_table=table)
    return SolveReport(
        Status.OPTIMAL,
        objective=best.objective,
        x=best.x,
        delta=best.delta,
        multipliers=best.multipliers,
        kkt_residual=best.kkt_residual,
        mu=best.mu,
        iterations=dict(best.iterations),
        nodes_visited=len(table),
        leaf_table=table,
    )


def audit_pruning(bnb_report: SolveReport, enum_report: SolveReport, tol=1e-8):
    """Pruned nodes whose value exceeds an extending leaf's value by more than ``tol``.

    Returns a list of ``(pruned record, leaf row)`` violations; empty means sound.
    """
    leaves = [(NodeAssignment.parse(row["assignment"]), row) for row in enum_report.leaf_table]
    violations = []
    for rec in bnb_report.node_log:
        if not rec.pruned or rec.action == "int-infeasible":
            continue
        node = NodeAssignment.parse(rec.assignment)
        for leaf, row in leaves:
            if not leaf.extends(node) or row["status"] != Status.OPTIMAL.value:
                continue
            if rec.action == "prune-infeasible" or rec.value > row["objective"] + tol:
                violations.append((rec, row))
    return violations
