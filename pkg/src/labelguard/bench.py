"""Benchmark harness: run guided and baseline verification over a dataset and summarise.

Reports are plain JSON-compatible dicts; :data:`VERIFY_SCHEMA` and
:data:`COMPARE_SCHEMA` describe them and :func:`validate_report` checks one.
"""

from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Sequence

import jsonschema
import numpy as np

from .network import LabeledInput, Network, input_box
from .orchestrator import RobustnessVerdict, Status, VerifyConfig, verify_baseline, verify_robustness
from .synthetic import make_rng

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class VerdictMismatch(RuntimeError):
    """Guided and baseline runs disagreed under the complete backend."""


# ------------------------------------------------------------------------ job running


@dataclass(frozen=True)
class _Job:
    mode: str  # "guided" | "baseline"
    position: int
    eps: float


def spot_check(net: Network, x: LabeledInput, eps: float, n: int, rng, clip: bool = True) -> int:
    """Count sampled points of the eps-box whose prediction differs from the label (ties count)."""
    box = input_box(x, eps, clip)
    lo = np.array([b.lo for b in box])
    hi = np.array([b.hi for b in box])
    pts = rng.uniform(lo, hi, size=(n, lo.size))
    out = net(pts)
    others = np.delete(out, x.label, axis=1)
    return int(np.sum(others.max(axis=1) >= out[:, x.label]))


def _record(x: LabeledInput, eps: float, v: RobustnessVerdict) -> dict:
    return {
        "index": x.index,
        "eps": eps,
        "verdict": v.status.value,
        "t_sort": v.t_sort,
        "t_verify": v.t_verify,
        "labels_checked": v.labels_checked,
        "labels_pruned": v.labels_pruned,
        "falsified_label": v.falsified_label,
        "counterexample": None if v.counterexample is None else [float(c) for c in v.counterexample],
        "per_label": [
            {
                "label": label,
                "status": r.status.value,
                "lp_calls": r.stats.lp_calls,
                "splits": r.stats.splits,
                "elapsed": r.stats.elapsed,
                "message": r.message,
            }
            for label, r in v.per_label
        ],
    }


def _run_job(net, inputs, cfg, job: _Job, spot: int, seed) -> dict:
    x = inputs[job.position]
    verify = verify_baseline if job.mode == "baseline" else verify_robustness
    try:
        verdict = verify(net, x, job.eps, cfg)
    except Exception as exc:
        log.exception("input %d failed", x.index)
        verdict = RobustnessVerdict(Status.UNKNOWN)
        rec = _record(x, job.eps, verdict)
        rec["error"] = f"{type(exc).__name__}: {exc}"
        return rec
    rec = _record(x, job.eps, verdict)
    if spot and verdict.status is Status.ROBUST:
        rng = make_rng(None if seed is None else seed + x.index)
        rec["spot_check_violations"] = spot_check(net, x, job.eps, spot, rng, cfg.clip_inputs)
    return rec


_worker_state: dict = {}


def _init_worker(net, inputs, cfg, spot, seed):
    _worker_state.update(net=net, inputs=inputs, cfg=cfg, spot=spot, seed=seed)


def _pool_job(job: _Job) -> dict:
    s = _worker_state
    return _run_job(s["net"], s["inputs"], s["cfg"], job, s["spot"], s["seed"])


def run_jobs(
    net: Network,
    inputs: Sequence[LabeledInput],
    jobs: list[_Job],
    cfg: VerifyConfig,
    workers: int = 1,
    spot: int = 0,
    seed: int | None = None,
) -> list[dict]:
    """Run jobs in order; results come back in job order whatever the pool size."""
    if workers <= 1 or len(jobs) <= 1:
        return [_run_job(net, inputs, cfg, job, spot, seed) for job in jobs]
    with ProcessPoolExecutor(
        max_workers=workers, initializer=_init_worker, initargs=(net, list(inputs), cfg, spot, seed)
    ) as pool:
        return list(pool.map(_pool_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


# ---------------------------------------------------------------------------- reports


def _config_dict(cfg: VerifyConfig, eps_list, workers) -> dict:
    return {**asdict(cfg), "eps": list(map(float, eps_list)), "workers": workers}


def summarize(records: list[dict], n: int) -> dict:
    counts = {s.value: 0 for s in Status}
    for r in records:
        counts[r["verdict"]] += 1
    valid = n - counts[Status.INVALID_INPUT.value]
    robust = counts[Status.ROBUST.value]
    t_sorts = [r["t_sort"] for r in records if r["verdict"] != Status.INVALID_INPUT.value]
    return {
        "n": n,
        "valid_count": valid,
        "robust_count": robust,
        "non_robust_count": counts[Status.NON_ROBUST.value],
        "unknown_count": counts[Status.UNKNOWN.value],
        "rst": f"{robust}/{n}",
        "mean_t_sort": float(np.mean(t_sorts)) if t_sorts else 0.0,
        "total_time": float(sum(r["t_sort"] + r["t_verify"] for r in records)),
        "labels_checked": int(sum(r["labels_checked"] for r in records)),
    }


def run_verify(
    net: Network,
    inputs: Sequence[LabeledInput],
    eps_list: Sequence[float],
    cfg: VerifyConfig,
    workers: int = 1,
    spot: int = 0,
    seed: int | None = None,
) -> dict:
    if not eps_list:
        raise ValueError("need at least one eps")
    jobs = [_Job("guided", i, float(e)) for e in eps_list for i in range(len(inputs))]
    records = run_jobs(net, inputs, jobs, cfg, workers, spot, seed)
    runs = []
    for k, eps in enumerate(eps_list):
        chunk = records[k * len(inputs) : (k + 1) * len(inputs)]
        runs.append({"eps": float(eps), "per_input": chunk, "summary": summarize(chunk, len(inputs))})
    report = {
        "kind": "verify",
        "schema_version": SCHEMA_VERSION,
        "config": _config_dict(cfg, eps_list, workers),
        "runs": runs,
        "warnings": [] if inputs else ["dataset is empty"],
    }
    return report


def acc(t_baseline: float, t_guided: float, t_sort: float) -> float | None:
    """Time reduction rate ``(T - T* - t_sort) / T``; None when ``T`` is zero."""
    if t_baseline <= 0:
        return None
    return (t_baseline - t_guided - t_sort) / t_baseline


def run_compare(
    net: Network,
    inputs: Sequence[LabeledInput],
    eps_list: Sequence[float],
    cfg: VerifyConfig,
    workers: int = 1,
    strict: bool | None = None,
) -> dict:
    """Baseline then guided over the same inputs for every eps.

    With the complete backend and no split budget the two modes must agree on every
    verdict category; ``strict`` (default: exactly that situation) turns a disagreement
    into :class:`VerdictMismatch` after the report is built (attached as ``exc.report``).
    """
    if not eps_list:
        raise ValueError("need at least one eps")
    if strict is None:
        strict = cfg.backend == "complete" and cfg.split_budget is None
    n = len(inputs)
    jobs = [_Job(mode, i, float(e)) for e in eps_list for mode in ("baseline", "guided") for i in range(n)]
    records = run_jobs(net, inputs, jobs, cfg, workers)

    rows, warnings, mismatches = [], [], []
    for k, eps in enumerate(eps_list):
        base = records[2 * k * n : (2 * k + 1) * n]
        guided = records[(2 * k + 1) * n : (2 * k + 2) * n]
        sb, sg = summarize(base, n), summarize(guided, n)
        if sg["valid_count"] == 0:
            warnings.append(f"eps={eps}: no valid inputs, row omitted")
            continue
        t_base = float(sum(r["t_sort"] + r["t_verify"] for r in base))
        t_guided = float(sum(r["t_verify"] for r in guided))
        t_sort = float(sum(r["t_sort"] for r in guided))
        row_mismatch = [
            {"index": b["index"], "baseline": b["verdict"], "guided": g["verdict"]}
            for b, g in zip(base, guided)
            if b["verdict"] != g["verdict"]
        ]
        for m in row_mismatch:
            msg = f"eps={eps} input {m['index']}: baseline {m['baseline']} vs guided {m['guided']}"
            warnings.append(msg)
            log.warning("verdict mismatch: %s", msg)
        mismatches.extend(row_mismatch)
        rows.append(
            {
                "eps": float(eps),
                "n": n,
                "valid_count": sg["valid_count"],
                "t_sort_total": t_sort,
                "T_baseline": t_base,
                "T_guided": t_guided,
                "ACC": acc(t_base, t_guided, t_sort),
                "RST_baseline": sb["rst"],
                "RST_guided": sg["rst"],
                "robust_baseline": sb["robust_count"],
                "robust_guided": sg["robust_count"],
                "labels_checked_baseline": sb["labels_checked"],
                "labels_checked_guided": sg["labels_checked"],
                "mismatches": row_mismatch,
                "per_input_baseline": base,
                "per_input_guided": guided,
            }
        )
    if n == 0:
        warnings.append("dataset is empty")
    report = {
        "kind": "compare",
        "schema_version": SCHEMA_VERSION,
        "config": _config_dict(cfg, eps_list, workers),
        "rows": rows,
        "warnings": warnings,
    }
    if strict and mismatches:
        exc = VerdictMismatch(f"{len(mismatches)} verdict mismatch(es) between baseline and guided runs")
        exc.report = report
        raise exc
    return report


def comparison_table(report: dict) -> str:
    """Per-eps CSV summary: eps, t_sort, T, T*, ACC, RST, RST*."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if report["kind"] == "compare":
        writer.writerow(["eps", "t_sort", "T", "T*", "ACC", "RST", "RST*"])
        for row in report["rows"]:
            writer.writerow(
                [
                    row["eps"],
                    f"{row['t_sort_total']:.6f}",
                    f"{row['T_baseline']:.6f}",
                    f"{row['T_guided']:.6f}",
                    "" if row["ACC"] is None else f"{row['ACC']:.4f}",
                    row["RST_baseline"],
                    row["RST_guided"],
                ]
            )
    else:
        writer.writerow(["eps", "valid", "RST", "non_robust", "unknown", "mean_t_sort", "total_time"])
        for run in report["runs"]:
            s = run["summary"]
            writer.writerow(
                [
                    run["eps"],
                    f"{s['valid_count']}/{s['n']}",
                    s["rst"],
                    s["non_robust_count"],
                    s["unknown_count"],
                    f"{s['mean_t_sort']:.6f}",
                    f"{s['total_time']:.6f}",
                ]
            )
    return buf.getvalue()


# --------------------------------------------------------------------------- schemas

_nonneg = {"type": "number", "minimum": 0}
_verdicts = [s.value for s in Status]

_PER_INPUT = {
    "type": "object",
    "required": [
        "index", "eps", "verdict", "t_sort", "t_verify",
        "labels_checked", "labels_pruned", "falsified_label", "counterexample", "per_label",
    ],
    "properties": {
        "index": {"type": "integer", "minimum": 0},
        "eps": _nonneg,
        "verdict": {"enum": _verdicts},
        "t_sort": _nonneg,
        "t_verify": _nonneg,
        "labels_checked": {"type": "integer", "minimum": 0},
        "labels_pruned": {"type": "integer", "minimum": 0},
        "falsified_label": {"type": ["integer", "null"]},
        "counterexample": {"type": ["array", "null"], "items": {"type": "number"}},
        "spot_check_violations": {"type": "integer", "minimum": 0},
        "error": {"type": "string"},
        "per_label": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["label", "status", "lp_calls", "splits", "elapsed"],
                "properties": {
                    "label": {"type": "integer", "minimum": 0},
                    "status": {"enum": ["robust", "falsified", "unknown"]},
                    "lp_calls": {"type": "integer", "minimum": 0},
                    "splits": {"type": "integer", "minimum": 0},
                    "elapsed": _nonneg,
                    "message": {"type": "string"},
                },
            },
        },
    },
}

_CONFIG = {
    "type": "object",
    "required": ["backend", "ranking", "split_budget", "clip_inputs", "relaxation", "eps", "workers"],
    "properties": {
        "backend": {"enum": ["incomplete", "complete"]},
        "ranking": {"enum": ["symbolic", "naive", "fixed"]},
        "split_budget": {"type": ["integer", "null"], "minimum": 0},
        "clip_inputs": {"type": "boolean"},
        "relaxation": {"enum": ["parallel", "area"]},
        "eps": {"type": "array", "items": _nonneg, "minItems": 1},
        "workers": {"type": "integer", "minimum": 1},
    },
}

VERIFY_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["kind", "schema_version", "config", "runs", "warnings"],
    "properties": {
        "kind": {"const": "verify"},
        "schema_version": {"const": SCHEMA_VERSION},
        "config": _CONFIG,
        "warnings": {"type": "array", "items": {"type": "string"}},
        "runs": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["eps", "per_input", "summary"],
                "properties": {
                    "eps": _nonneg,
                    "per_input": {"type": "array", "items": _PER_INPUT},
                    "summary": {
                        "type": "object",
                        "required": [
                            "n", "valid_count", "robust_count", "non_robust_count",
                            "unknown_count", "rst", "mean_t_sort", "total_time", "labels_checked",
                        ],
                        "properties": {
                            "n": {"type": "integer", "minimum": 0},
                            "valid_count": {"type": "integer", "minimum": 0},
                            "robust_count": {"type": "integer", "minimum": 0},
                            "rst": {"type": "string", "pattern": r"^\d+/\d+$"},
                            "mean_t_sort": _nonneg,
                            "total_time": _nonneg,
                        },
                    },
                },
            },
        },
    },
}

COMPARE_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["kind", "schema_version", "config", "rows", "warnings"],
    "properties": {
        "kind": {"const": "compare"},
        "schema_version": {"const": SCHEMA_VERSION},
        "config": _CONFIG,
        "warnings": {"type": "array", "items": {"type": "string"}},
        "rows": {
            "type": "array",
            "items": {
                "type": "object",
                "required": [
                    "eps", "n", "valid_count", "t_sort_total", "T_baseline", "T_guided", "ACC",
                    "RST_baseline", "RST_guided", "mismatches",
                ],
                "properties": {
                    "eps": _nonneg,
                    "t_sort_total": _nonneg,
                    "T_baseline": _nonneg,
                    "T_guided": _nonneg,
                    "ACC": {"type": ["number", "null"]},
                    "RST_baseline": {"type": "string", "pattern": r"^\d+/\d+$"},
                    "RST_guided": {"type": "string", "pattern": r"^\d+/\d+$"},
                    "mismatches": {"type": "array"},
                    "per_input_baseline": {"type": "array", "items": _PER_INPUT},
                    "per_input_guided": {"type": "array", "items": _PER_INPUT},
                },
            },
        },
    },
}


def validate_report(report: dict) -> None:
    """Raise ``jsonschema.ValidationError`` if ``report`` does not match its schema."""
    schema = VERIFY_SCHEMA if report.get("kind") == "verify" else COMPARE_SCHEMA
    jsonschema.validate(report, schema)
    if report["kind"] == "verify":
        for run in report["runs"]:
            s = run["summary"]
            if not s["robust_count"] <= s["valid_count"] <= s["n"]:
                raise jsonschema.ValidationError("robust_count <= valid_count <= n violated")

