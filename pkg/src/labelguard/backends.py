"""Per-label robustness checks.

``verify_incomplete`` bounds ``out[target] - out[original]`` with the symbolic pass and,
failing that, with an LP over the relaxed network.  ``verify_complete`` wraps the same
check in a depth-first branch and bound over ReLU phases, which is exact once every
neuron on a branch has a fixed phase.
"""

from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .interval import Interval
from .lp import LPError, LPProblem, Relation, solve
from .network import LabeledInput, Network, box_arrays, forward, input_box
from .symbolic import ACTIVE, INACTIVE, UNSTABLE, PropagationResult, propagate, relaxation_slopes

log = logging.getLogger(__name__)

# ``out[target] - out[original]`` must be certified below -ROBUST_MARGIN to count as robust
ROBUST_MARGIN = 1e-7
LINF_TOL = 1e-9


class JStatus(str, enum.Enum):
    ROBUST = "robust"
    FALSIFIED = "falsified"
    UNKNOWN = "unknown"


@dataclass
class Stats:
    lp_calls: int = 0
    splits: int = 0
    elapsed: float = 0.0


@dataclass(frozen=True, eq=False)
class JRobustnessQuery:
    net: Network
    x: LabeledInput
    eps: float
    target: int
    original: int | None = None
    clip: bool = True

    def __post_init__(self):
        if self.original is None:
            object.__setattr__(self, "original", self.x.label)
        if self.target == self.original:
            raise ValueError("target label must differ from the original label")
        if self.eps < 0:
            raise ValueError("eps must be non-negative")
        self.x.check_against(self.net)
        if not 0 <= self.target < self.net.output_dim:
            raise ValueError(f"target {self.target} out of range")

    def box(self) -> list[Interval]:
        return input_box(self.x, self.eps, clip=self.clip)


@dataclass(eq=False)
class JVerdict:
    status: JStatus
    counterexample: np.ndarray | None = None
    stats: Stats = field(default_factory=Stats)
    message: str = ""

    @property
    def robust(self) -> bool:
        return self.status is JStatus.ROBUST


def validate_counterexample(
    net: Network,
    x: LabeledInput,
    eps: float,
    cex,
    target: int,
    domain: bool = True,
) -> bool:
    """True when ``cex`` lies in the eps-ball (and ``[0, 1]`` if ``domain``) and scores
    ``target`` at least as high as the true label."""
    cex = np.asarray(cex, dtype=float)
    if cex.shape != x.values.shape:
        return False
    if np.max(np.abs(cex - x.values), initial=0.0) > eps + LINF_TOL:
        return False
    if domain and (np.any(cex < 0.0) or np.any(cex > 1.0)):
        return False
    out = forward(net, cex)
    return bool(out[target] >= out[x.label])


def relaxed_lp(net: Network, prop: PropagationResult, target: int, original: int) -> LPProblem:
    """LP over the inputs plus one output variable per unstable neuron.

    Stable and phase-fixed neurons are substituted exactly; unstable ones are bounded
    by their relaxation planes.  The objective is ``out[target] - out[original]``.
    """
    d = net.input_dim
    n_vars = d + len(prop.unstable())
    bounds = [Interval(a, b) for a, b in zip(prop.box_lo, prop.box_hi)]
    constraints: list[tuple[np.ndarray, Relation, float]] = []

    # current layer values as affine maps of the LP variables: coeffs @ v + const
    coeffs = np.zeros((d, n_vars))
    coeffs[:, :d] = np.eye(d)
    const = np.zeros(d)
    next_var = d
    for k, layer in enumerate(net.layers[:-1]):
        lb = prop.layers[k]
        z_coeffs = layer.weights @ coeffs
        z_const = layer.weights @ const + layer.bias
        h_coeffs = np.zeros_like(z_coeffs)
        h_const = np.zeros_like(z_const)
        unstable = np.flatnonzero(lb.status == UNSTABLE)
        if unstable.size:
            a_up, a_lo = relaxation_slopes(lb.pre_lo[unstable], lb.pre_hi[unstable], prop.relaxation)
        slot = dict(zip(unstable.tolist(), range(unstable.size)))
        for i in range(layer.out_size):
            fixed = prop.phases.get((k, i))
            if lb.status[i] == ACTIVE:
                h_coeffs[i], h_const[i] = z_coeffs[i], z_const[i]
                if fixed is True:
                    constraints.append((z_coeffs[i], Relation.GE, -z_const[i]))
            elif lb.status[i] == INACTIVE:
                if fixed is False:
                    constraints.append((z_coeffs[i], Relation.LE, -z_const[i]))
            else:
                s = slot[i]
                v = next_var
                next_var += 1
                bounds.append(Interval(0.0, max(0.0, lb.pre_hi[i])))
                h_coeffs[i, v] = 1.0
                l = lb.pre_lo[i]
                # y <= a_up * (z - l)
                row = -a_up[s] * z_coeffs[i]
                row[v] += 1.0
                constraints.append((row, Relation.LE, a_up[s] * (z_const[i] - l)))
                # y >= a_lo * z
                row = -a_lo[s] * z_coeffs[i]
                row[v] += 1.0
                constraints.append((row, Relation.GE, a_lo[s] * z_const[i]))
        coeffs, const = h_coeffs, h_const

    last = net.layers[-1]
    diff = last.weights[target] - last.weights[original]
    objective = diff @ coeffs
    objective_const = float(diff @ const + last.bias[target] - last.bias[original])
    problem = LPProblem(n_vars, [], objective, bounds, objective_const)
    for row, rel, rhs in constraints:
        problem.add(row, rel, rhs)
    return problem


@dataclass
class _NodeResult:
    status: JStatus
    prop: PropagationResult
    candidate: np.ndarray | None = None
    message: str = ""


def _check_node(q: JRobustnessQuery, prop: PropagationResult, stats: Stats) -> _NodeResult:
    """Steps shared by both backends: symbolic fast path, relaxed LP, candidate validation.

    Returns ROBUST (node closed), FALSIFIED (validated candidate) or UNKNOWN (open).
    """
    if prop.infeasible:
        return _NodeResult(JStatus.ROBUST, prop, message="phase combination infeasible")
    if prop.difference_upper_bound(q.target, q.original) < -ROBUST_MARGIN:
        return _NodeResult(JStatus.ROBUST, prop, message="symbolic bound")

    problem = relaxed_lp(q.net, prop, q.target, q.original)
    stats.lp_calls += 1
    outcome = solve(problem)
    if not outcome.optimal:
        return _NodeResult(JStatus.ROBUST, prop, message="relaxed LP infeasible")
    if outcome.value < -ROBUST_MARGIN:
        return _NodeResult(JStatus.ROBUST, prop, message="relaxed LP bound")

    d = q.net.input_dim
    candidate = np.clip(outcome.point[:d], prop.box_lo, prop.box_hi)
    if validate_counterexample(q.net, q.x, q.eps, candidate, q.target, domain=q.clip):
        return _NodeResult(JStatus.FALSIFIED, prop, candidate)
    return _NodeResult(
        JStatus.UNKNOWN, prop, message=f"relaxed LP optimum {outcome.value:.3g} with spurious candidate"
    )


def verify_incomplete(
    q: JRobustnessQuery,
    prop: PropagationResult | None = None,
    relaxation: str = "parallel",
) -> JVerdict:
    """Decide j-robustness with one relaxation; may answer UNKNOWN, never a wrong verdict.

    ``prop`` lets a caller reuse a propagation already computed over the same box.
    """
    start = time.perf_counter()
    stats = Stats()
    try:
        if prop is None:
            prop = propagate(q.net, box_arrays(q.box()), relaxation)
        node = _check_node(q, prop, stats)
        verdict = JVerdict(node.status, node.candidate, stats, node.message)
    except LPError as exc:
        log.warning("LP failure on target %d: %s", q.target, exc)
        verdict = JVerdict(JStatus.UNKNOWN, None, stats, f"LP failure: {exc}")
    stats.elapsed = time.perf_counter() - start
    return verdict


def _branch_neuron(prop: PropagationResult) -> tuple[int, int]:
    best, best_width = None, -1.0
    for k, i in prop.unstable():
        lb = prop.layers[k]
        width = lb.pre_hi[i] - lb.pre_lo[i]
        if width > best_width:
            best, best_width = (k, i), width
    return best


def verify_complete(
    q: JRobustnessQuery,
    budget: int | None = None,
    prop: PropagationResult | None = None,
    relaxation: str = "parallel",
) -> JVerdict:
    """Branch and bound on ReLU phases, depth first, splitting the widest unstable neuron.

    ``budget`` caps the number of splits (``None`` = unlimited); running out yields UNKNOWN.
    """
    if budget is not None and budget < 0:
        raise ValueError("budget must be non-negative")
    start = time.perf_counter()
    stats = Stats()
    lo, hi = box_arrays(q.box())
    stack: list[dict] = [{}]
    undecided = 0
    verdict = None
    try:
        while stack:
            phases = stack.pop()
            if not phases and prop is not None:
                node_prop = prop
            else:
                node_prop = propagate(q.net, (lo, hi), relaxation, phases)
            node = _check_node(q, node_prop, stats)
            if node.status is JStatus.ROBUST:
                continue
            if node.status is JStatus.FALSIFIED:
                verdict = JVerdict(JStatus.FALSIFIED, node.candidate, stats)
                break
            split = _branch_neuron(node_prop)
            if split is None:
                # exact LP on a linear region, optimum within rounding of zero
                undecided += 1
                continue
            if budget is not None and stats.splits >= budget:
                verdict = JVerdict(JStatus.UNKNOWN, None, stats, f"split budget {budget} exhausted")
                break
            stats.splits += 1
            stack.append({**phases, split: False})
            stack.append({**phases, split: True})
    except LPError as exc:
        log.warning("LP failure on target %d: %s", q.target, exc)
        verdict = JVerdict(JStatus.UNKNOWN, None, stats, f"LP failure: {exc}")
    if verdict is None:
        if undecided:
            verdict = JVerdict(
                JStatus.UNKNOWN, None, stats, f"{undecided} leaf region(s) within tolerance of the boundary"
            )
        else:
            verdict = JVerdict(JStatus.ROBUST, None, stats)
    stats.elapsed = time.perf_counter() - start
    return verdict
