"""Run records, regret and violation metrics, audits, and file exchange.

A RunRecord is the complete per-slot trajectory of one run plus the header
needed to replay it (problem name, seed, parameters). Everything downstream
works from records: metric summaries, the drift-plus-penalty audit, and the
CSV/JSON exporters. CSV columns are fixed as
t, mu_0..mu_{d-1}, f_realized, g_0..g_{L-1}, h_0..h_{M-1}, q_norm, h_norm, drift
and numbers are written in repr precision so import reproduces the record
bit-exactly for finite values.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from dataclasses import dataclass
from typing import Optional, TYPE_CHECKING

import numpy as np

from .errors import GeometryError, ProblemError, ReplayMismatchError
from .geometry import (
    Box,
    BregmanGeometry,
    EuclideanGeometry,
    NegativeEntropyGeometry,
    Simplex,
    mix_toward_uniform,
)
from .problems import ProblemInstance, slot_rng

if TYPE_CHECKING:
    from .core import AlgorithmParams

Array = np.ndarray

_REPLAY_TOL = 1e-9


@dataclass
class RunRecord:
    """Full trajectory of one run.

    Dual-norm columns hold the multiplier norms after each slot's update, so
    the final row carries the terminal norms and the drift column telescopes
    against it. The drift column stores the recorded per-slot drift, which
    the audit deliberately trusts (a corrupted value shows up as a violated
    inequality, not as a replay mismatch)."""

    problem: str
    variant: str
    geometry: str
    seed: int
    params: "AlgorithmParams"
    targets: Array  # (M,)
    decisions: Array  # (T, d)
    objective_realized: Array  # (T,)
    ineq_realized: Array  # (T, L)
    eq_realized: Array  # (T, M), raw <h_j^t, mu^t>
    ineq_dual_norm: Array  # (T,)
    eq_dual_norm: Array  # (T,)
    drift: Array  # (T,)
    config_hash: str = ""
    wall_time_s: float = 0.0

    def __post_init__(self):
        t, d = self.decisions.shape
        if self.objective_realized.shape != (t,):
            raise ProblemError("objective column length mismatch")
        if self.ineq_realized.shape[0] != t or self.eq_realized.shape[0] != t:
            raise ProblemError("constraint column length mismatch")
        if self.eq_realized.shape[1] != self.targets.shape[0]:
            raise ProblemError("equality column count must match targets")
        for name in ("ineq_dual_norm", "eq_dual_norm", "drift"):
            if getattr(self, name).shape != (t,):
                raise ProblemError(f"{name} column length mismatch")
        if t and (np.min(self.ineq_dual_norm) < 0 or np.min(self.eq_dual_norm) < 0):
            raise ProblemError("dual norms cannot be negative")

    @property
    def horizon(self) -> int:
        return self.decisions.shape[0]

    @property
    def dimension(self) -> int:
        return self.decisions.shape[1]

    @property
    def n_ineq(self) -> int:
        return self.ineq_realized.shape[1]

    @property
    def n_eq(self) -> int:
        return self.eq_realized.shape[1]


@dataclass(frozen=True)
class MetricsSummary:
    """Headline quantities of one record.

    Violation norms clip after averaging. The expected-form fields are None
    when the problem carries no mean model."""

    horizon: int
    realized_regret: float
    expected_regret: Optional[float]
    ineq_violation: Optional[float]  # || [ (1/T) sum mean-g(mu^t) ]_+ ||_2
    eq_violation: Optional[float]  # || (1/T) sum mean-h mu^t - b ||_2
    ineq_violation_realized: float
    eq_violation_realized: float
    ineq_violation_clip_first: float  # || (1/T) sum [g^t(mu^t)]_+ ||_2
    max_dual_norm: float
    dual_ratio: float  # max dual norm / sqrt(T)
    hindsight_value: float


def compute_metrics(
    record: RunRecord,
    hindsight: tuple,
    problem: ProblemInstance,
) -> MetricsSummary:
    """Summarize a record against the fixed hindsight point.

    Realized regret replays each slot's functions at the comparator, using
    the same per-slot generators as the run; the replayed values at the
    recorded decisions must agree with the recorded columns, otherwise the
    record does not belong to this problem/seed and we refuse to continue.
    """
    mu_star, hindsight_value = hindsight
    mu_star = np.asarray(mu_star, dtype=float)
    if mu_star.shape != (record.dimension,):
        raise ProblemError("hindsight point dimension mismatch")
    horizon = record.horizon
    if horizon == 0:
        return MetricsSummary(
            horizon=0,
            realized_regret=0.0,
            expected_regret=None if problem.means is None else 0.0,
            ineq_violation=None if problem.means is None else 0.0,
            eq_violation=None if problem.means is None else 0.0,
            ineq_violation_realized=0.0,
            eq_violation_realized=0.0,
            ineq_violation_clip_first=0.0,
            max_dual_norm=0.0,
            dual_ratio=0.0,
            hindsight_value=float(hindsight_value),
        )

    comparator_total = 0.0
    for t in range(horizon):
        fns = problem.sample_slot(t, slot_rng(record.seed, t))
        played = fns.objective.value(record.decisions[t])
        recorded = record.objective_realized[t]
        if abs(played - recorded) > _REPLAY_TOL * (1.0 + abs(recorded)):
            raise ReplayMismatchError(
                f"slot {t}: replayed objective {played!r} != recorded {recorded!r}"
            )
        comparator_total += fns.objective.value(mu_star)
    realized_regret = float(np.sum(record.objective_realized)) - comparator_total

    expected_regret = None
    ineq_violation = None
    eq_violation = None
    if problem.means is not None:
        means = problem.means
        gap = 0.0
        g_avg = np.zeros(record.n_ineq)
        for t in range(horizon):
            mean_obj = means.objective_at(t)
            gap += mean_obj.value(record.decisions[t]) - mean_obj.value(mu_star)
            for i, fn in enumerate(means.inequalities):
                g_avg[i] += fn.value(record.decisions[t])
        expected_regret = float(gap)
        g_avg /= horizon
        ineq_violation = float(np.linalg.norm(np.maximum(g_avg, 0.0)))
        h_avg = means.eq_matrix @ (record.decisions.mean(axis=0))
        eq_violation = float(np.linalg.norm(h_avg - record.targets))

    g_realized_avg = (
        record.ineq_realized.mean(axis=0) if record.n_ineq else np.zeros(0)
    )
    ineq_violation_realized = float(np.linalg.norm(np.maximum(g_realized_avg, 0.0)))
    clip_first = (
        np.maximum(record.ineq_realized, 0.0).mean(axis=0)
        if record.n_ineq
        else np.zeros(0)
    )
    ineq_violation_clip_first = float(np.linalg.norm(clip_first))
    h_realized_avg = (
        record.eq_realized.mean(axis=0) if record.n_eq else np.zeros(0)
    )
    eq_violation_realized = float(np.linalg.norm(h_realized_avg - record.targets))

    dual_norms = np.hypot(record.ineq_dual_norm, record.eq_dual_norm)
    max_dual = float(np.max(dual_norms)) if horizon else 0.0
    return MetricsSummary(
        horizon=horizon,
        realized_regret=realized_regret,
        expected_regret=expected_regret,
        ineq_violation=ineq_violation,
        eq_violation=eq_violation,
        ineq_violation_realized=ineq_violation_realized,
        eq_violation_realized=eq_violation_realized,
        ineq_violation_clip_first=ineq_violation_clip_first,
        max_dual_norm=max_dual,
        dual_ratio=max_dual / np.sqrt(horizon),
        hindsight_value=float(hindsight_value),
    )


# ---------------------------------------------------------------------------
# drift-plus-penalty audit


def geometry_by_name(name: str) -> BregmanGeometry:
    if name == "euclidean":
        return EuclideanGeometry()
    if name == "negative_entropy":
        return NegativeEntropyGeometry()
    raise GeometryError(f"unknown geometry {name!r}")


def divergence_radius(geometry: BregmanGeometry, decision_set) -> float:
    """sup over the set of D(x, y), where it is finite."""
    if isinstance(geometry, EuclideanGeometry):
        if isinstance(decision_set, Box):
            span = decision_set.upper - decision_set.lower
            return 0.5 * float(span @ span)
        if isinstance(decision_set, Simplex):
            return 1.0  # ||x - y||_2^2 peaks at 2, between two vertices
    raise GeometryError(
        f"divergence radius unavailable for {geometry.name} on this set"
    )


def _penalty_constant(
    problem: ProblemInstance, geometry: BregmanGeometry, decision_set
) -> float:
    """The additive slack M of the per-slot drift-plus-penalty inequality."""
    if isinstance(geometry, NegativeEntropyGeometry):
        if not isinstance(decision_set, Simplex):
            raise GeometryError("entropy audits require the simplex")
        c = problem.constants_for("linf")
        return (
            c.eq_row_bound**2 + c.ineq_value_bound**2 + c.ineq_grad_bound**2
        )
    c = problem.constants_for(geometry.dual_norm_name)
    radius = divergence_radius(geometry, decision_set)
    return (
        4.0 * radius * c.eq_row_bound**2 / geometry.beta
        + c.ineq_value_bound**2
        + 2.0 * radius * c.ineq_grad_bound**2 / geometry.beta
    )


def _replay_dual_vectors(record: RunRecord, problem: ProblemInstance):
    """Recompute the full multiplier trajectory from the record.

    Returns arrays of the pre-update multipliers: row t holds Q(t), H(t) as
    used by slot t's proximal step. Recomputed post-update norms must match
    the recorded norm columns."""
    horizon = record.horizon
    n_ineq, n_eq = record.n_ineq, record.n_eq
    q_path = np.zeros((horizon, n_ineq))
    h_path = np.zeros((horizon, n_eq))
    q = np.zeros(n_ineq)
    h = np.zeros(n_eq)
    for t in range(horizon):
        q_path[t] = q
        h_path[t] = h
        if t == 0:
            continue  # slot 0 has no previous observations
        fns = problem.sample_slot(t - 1, slot_rng(record.seed, t - 1))
        mu_prev = record.decisions[t - 1]
        mu_new = record.decisions[t]
        step = mu_new - mu_prev
        for i, fn in enumerate(fns.inequalities):
            q[i] = max(q[i] + fn.value(mu_prev) + float(fn.grad(mu_prev) @ step), 0.0)
        if n_eq:
            h = h + fns.eq_matrix @ mu_new - record.targets
        q_norm = float(np.linalg.norm(q))
        h_norm = float(np.linalg.norm(h))
        if abs(q_norm - record.ineq_dual_norm[t]) > _REPLAY_TOL * (1.0 + q_norm):
            raise ReplayMismatchError(
                f"slot {t}: replayed |Q| {q_norm!r} != recorded "
                f"{record.ineq_dual_norm[t]!r}"
            )
        if abs(h_norm - record.eq_dual_norm[t]) > _REPLAY_TOL * (1.0 + h_norm):
            raise ReplayMismatchError(
                f"slot {t}: replayed |H| {h_norm!r} != recorded "
                f"{record.eq_dual_norm[t]!r}"
            )
    return q_path, h_path


def dpp_audit(
    record: RunRecord,
    problem: ProblemInstance,
    n_samples: int,
    audit_seed: int = 0,
) -> float:
    """Check the per-slot drift-plus-penalty inequality on sampled pairs.

    For sampled slots t >= 1 and sampled comparator points, the recorded
    drift plus the objective-advance and prox-cost terms must not exceed the
    comparator side plus the penalty constant. Returns the worst residual
    (positive means violated). Multipliers are replayed from the record; the
    drift column is used exactly as recorded."""
    if record.horizon < 2:
        return 0.0
    geometry = geometry_by_name(record.geometry)
    decision_set = problem.decision_set
    params = record.params
    penalty = _penalty_constant(problem, geometry, decision_set)
    q_path, h_path = _replay_dual_vectors(record, problem)

    rng = np.random.default_rng(audit_seed)
    slots = rng.integers(1, record.horizon, size=n_samples)
    functions = {}
    worst = -np.inf
    for t in slots:
        t = int(t)
        if t - 1 not in functions:
            functions[t - 1] = problem.sample_slot(t - 1, slot_rng(record.seed, t - 1))
        fns = functions[t - 1]
        mu_prev = record.decisions[t - 1]
        mu_new = record.decisions[t]
        comparator = decision_set.sample(rng)
        if record.variant == "simplex":
            base = mix_toward_uniform(mu_prev, params.mixing_weight)
        else:
            base = mu_prev
        grad_f = np.asarray(fns.objective.grad(mu_prev), dtype=float)
        lhs = (
            params.objective_weight * float(grad_f @ (mu_new - mu_prev))
            + record.drift[t]
            + params.prox_weight * geometry.divergence(mu_new, base)
        )
        rhs = params.objective_weight * (
            fns.objective.value(comparator) - fns.objective.value(mu_prev)
        )
        for i, fn in enumerate(fns.inequalities):
            rhs += q_path[t, i] * fn.value(comparator)
        if record.n_eq:
            rhs += float(
                h_path[t] @ (fns.eq_matrix @ comparator - record.targets)
            )
        rhs += params.prox_weight * (
            geometry.divergence(comparator, base)
            - geometry.divergence(comparator, mu_new)
        )
        rhs += penalty
        worst = max(worst, lhs - rhs)
    return float(worst)


# ---------------------------------------------------------------------------
# export / import


def _header_dict(record: RunRecord) -> dict:
    return {
        "problem": record.problem,
        "variant": record.variant,
        "geometry": record.geometry,
        "seed": record.seed,
        "params": dataclasses.asdict(record.params),
        "targets": [float(x) for x in record.targets],
        "config_hash": record.config_hash,
        "wall_time_s": record.wall_time_s,
    }


def _column_names(record: RunRecord) -> list:
    names = ["t"]
    names += [f"mu_{k}" for k in range(record.dimension)]
    names.append("f_realized")
    names += [f"g_{i}" for i in range(record.n_ineq)]
    names += [f"h_{j}" for j in range(record.n_eq)]
    names += ["q_norm", "h_norm", "drift"]
    return names


def export(obj, fmt: str, path) -> None:
    """Write a RunRecord or MetricsSummary as csv or json."""
    if fmt not in ("csv", "json"):
        raise ProblemError(f"unknown export format {fmt!r}")
    if isinstance(obj, RunRecord):
        if fmt == "csv":
            _export_record_csv(obj, path)
        else:
            _export_record_json(obj, path)
        return
    if isinstance(obj, MetricsSummary):
        payload = dataclasses.asdict(obj)
        with open(path, "w", newline="") as fh:
            if fmt == "json":
                json.dump(payload, fh, indent=2)
                fh.write("\n")
            else:
                writer = csv.writer(fh)
                writer.writerow(payload.keys())
                writer.writerow("" if v is None else repr(v) for v in payload.values())
        return
    raise ProblemError(f"cannot export object of type {type(obj).__name__}")


def _export_record_csv(record: RunRecord, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("# pdomd-run v1 " + json.dumps(_header_dict(record)) + "\n")
        writer = csv.writer(fh)
        writer.writerow(_column_names(record))
        for t in range(record.horizon):
            row = [str(t)]
            row += [repr(float(x)) for x in record.decisions[t]]
            row.append(repr(float(record.objective_realized[t])))
            row += [repr(float(x)) for x in record.ineq_realized[t]]
            row += [repr(float(x)) for x in record.eq_realized[t]]
            row.append(repr(float(record.ineq_dual_norm[t])))
            row.append(repr(float(record.eq_dual_norm[t])))
            row.append(repr(float(record.drift[t])))
            writer.writerow(row)


def _export_record_json(record: RunRecord, path) -> None:
    payload = _header_dict(record)
    payload["columns"] = {
        "decisions": record.decisions.tolist(),
        "objective_realized": record.objective_realized.tolist(),
        "ineq_realized": record.ineq_realized.tolist(),
        "eq_realized": record.eq_realized.tolist(),
        "ineq_dual_norm": record.ineq_dual_norm.tolist(),
        "eq_dual_norm": record.eq_dual_norm.tolist(),
        "drift": record.drift.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def _record_from_header_and_columns(header: dict, columns: dict) -> RunRecord:
    from .core import AlgorithmParams

    params = AlgorithmParams(**header["params"])
    n_eq = len(header["targets"])

    def arr(name, width=None):
        data = np.asarray(columns[name], dtype=float)
        if width is not None and data.size == 0:
            data = data.reshape(0, width)
        return data

    return RunRecord(
        problem=header["problem"],
        variant=header["variant"],
        geometry=header["geometry"],
        seed=int(header["seed"]),
        params=params,
        targets=np.asarray(header["targets"], dtype=float),
        decisions=arr("decisions"),
        objective_realized=arr("objective_realized"),
        ineq_realized=arr("ineq_realized"),
        eq_realized=arr("eq_realized", width=n_eq),
        ineq_dual_norm=arr("ineq_dual_norm"),
        eq_dual_norm=arr("eq_dual_norm"),
        drift=arr("drift"),
        config_hash=header.get("config_hash", ""),
        wall_time_s=float(header.get("wall_time_s", 0.0)),
    )


def import_record(path) -> RunRecord:
    """Read a record back from a csv or json export."""
    with open(path) as fh:
        first = fh.read(1)
    if first == "{":
        with open(path) as fh:
            payload = json.load(fh)
        columns = payload.pop("columns")
        return _record_from_header_and_columns(payload, columns)
    return _import_record_csv(path)


def _import_record_csv(path) -> RunRecord:
    with open(path, newline="") as fh:
        header_line = fh.readline()
        prefix = "# pdomd-run v1 "
        if not header_line.startswith(prefix):
            raise ProblemError(f"{path}: not a run record export")
        header = json.loads(header_line[len(prefix):])
        reader = csv.reader(fh)
        names = next(reader)
        rows = [row for row in reader if row]
    d = sum(1 for n in names if n.startswith("mu_"))
    n_ineq = sum(1 for n in names if n.startswith("g_"))
    n_eq = sum(1 for n in names if n.startswith("h_") and n != "h_norm")
    horizon = len(rows)
    decisions = np.zeros((horizon, d))
    objective = np.zeros(horizon)
    ineq = np.zeros((horizon, n_ineq))
    eq = np.zeros((horizon, n_eq))
    q_norm = np.zeros(horizon)
    h_norm = np.zeros(horizon)
    drift = np.zeros(horizon)
    for t, row in enumerate(rows):
        values = [float(x) for x in row[1:]]
        k = 0
        decisions[t] = values[k : k + d]
        k += d
        objective[t] = values[k]
        k += 1
        ineq[t] = values[k : k + n_ineq]
        k += n_ineq
        eq[t] = values[k : k + n_eq]
        k += n_eq
        q_norm[t], h_norm[t], drift[t] = values[k : k + 3]
    columns = {
        "decisions": decisions,
        "objective_realized": objective,
        "ineq_realized": ineq,
        "eq_realized": eq,
        "ineq_dual_norm": q_norm,
        "eq_dual_norm": h_norm,
        "drift": drift,
    }
    return _record_from_header_and_columns(header, columns)
