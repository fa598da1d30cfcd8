"""Label-guided robustness verification: rank the target labels, then check them one by one."""

from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .backends import (
    JRobustnessQuery,
    JStatus,
    JVerdict,
    validate_counterexample,
    verify_complete,
    verify_incomplete,
)
from .network import TIE, LabeledInput, Network, box_arrays, forward, input_box, predict_label
from .ranking import RankedTargets, fixed_rank, naive_rank, rank_targets
from .symbolic import RELAXATIONS, PropagationResult, propagate

log = logging.getLogger(__name__)

BACKENDS = ("incomplete", "complete")
RANKINGS = ("symbolic", "naive", "fixed")


class Status(str, enum.Enum):
    ROBUST = "robust"
    NON_ROBUST = "non_robust"
    UNKNOWN = "unknown"
    INVALID_INPUT = "invalid_input"


@dataclass(frozen=True)
class VerifyConfig:
    backend: str = "complete"
    ranking: str = "symbolic"
    # None means unlimited
    split_budget: int | None = None
    clip_inputs: bool = True
    relaxation: str = "parallel"

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        if self.ranking not in RANKINGS:
            raise ValueError(f"ranking must be one of {RANKINGS}, got {self.ranking!r}")
        if self.relaxation not in RELAXATIONS:
            raise ValueError(f"relaxation must be one of {RELAXATIONS}, got {self.relaxation!r}")
        if self.split_budget is not None and self.split_budget < 0:
            raise ValueError("split_budget must be non-negative")


@dataclass(eq=False)
class RobustnessVerdict:
    status: Status
    counterexample: np.ndarray | None = None
    per_label: list[tuple[int, JVerdict]] = field(default_factory=list)
    t_sort: float = 0.0
    t_verify: float = 0.0
    ranked: RankedTargets | None = None
    falsified_label: int | None = None

    @property
    def labels_checked(self) -> int:
        return len(self.per_label)

    @property
    def labels_pruned(self) -> int:
        return len(self.ranked.pruned) if self.ranked else 0


def _check_label(
    net: Network,
    x: LabeledInput,
    eps: float,
    target: int,
    cfg: VerifyConfig,
    prop: PropagationResult | None,
) -> JVerdict:
    try:
        q = JRobustnessQuery(net, x, eps, target, clip=cfg.clip_inputs)
        if cfg.backend == "complete":
            return verify_complete(q, cfg.split_budget, prop, cfg.relaxation)
        return verify_incomplete(q, prop, cfg.relaxation)
    except Exception as exc:  # a failing label must not abort the remaining ones
        log.exception("verification of label %d failed", target)
        return JVerdict(JStatus.UNKNOWN, message=f"{type(exc).__name__}: {exc}")


def verify_robustness(
    net: Network, x: LabeledInput, eps: float, cfg: VerifyConfig = VerifyConfig()
) -> RobustnessVerdict:
    """Robust iff every remaining target label is certified; stop at the first falsified one."""
    x.check_against(net)
    if eps < 0:
        raise ValueError("eps must be non-negative")
    predicted = predict_label(forward(net, x.values))
    if predicted is TIE or predicted != x.label:
        return RobustnessVerdict(Status.INVALID_INPUT)

    t0 = time.perf_counter()
    prop = None
    if cfg.ranking == "symbolic":
        prop = propagate(net, box_arrays(input_box(x, eps, cfg.clip_inputs)), cfg.relaxation)
        ranked = rank_targets(prop.output_intervals(), x.label)
    elif cfg.ranking == "naive":
        ranked = naive_rank(forward(net, x.values), x.label)
    else:
        ranked = fixed_rank(net.output_dim, x.label)
    t_sort = time.perf_counter() - t0

    verdict = RobustnessVerdict(Status.ROBUST, t_sort=t_sort, ranked=ranked)
    unknown = False
    t1 = time.perf_counter()
    for target in ranked.labels:
        result = _check_label(net, x, eps, target, cfg, prop)
        verdict.per_label.append((target, result))
        if result.status is JStatus.FALSIFIED:
            cex = result.counterexample
            if validate_counterexample(net, x, eps, cex, target, domain=cfg.clip_inputs):
                verdict.status = Status.NON_ROBUST
                verdict.counterexample = cex
                verdict.falsified_label = target
                break
            log.error("backend returned an invalid counterexample for label %d", target)
            result.status = JStatus.UNKNOWN
            unknown = True
        elif result.status is JStatus.UNKNOWN:
            unknown = True
    else:
        if unknown:
            verdict.status = Status.UNKNOWN
    verdict.t_verify = time.perf_counter() - t1
    return verdict


def verify_baseline(
    net: Network, x: LabeledInput, eps: float, cfg: VerifyConfig = VerifyConfig()
) -> RobustnessVerdict:
    """Unguided reference run: ascending label order, no pruning, no shared propagation."""
    return verify_robustness(net, x, eps, replace(cfg, ranking="fixed"))
