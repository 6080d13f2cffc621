"""Problem models and the two built-in scenarios.

A problem instance bundles a decision set with per-slot samplers for the
objective, the inequality constraints, and the equality constraint vectors.
Constraint samplers are i.i.d. across slots; the objective may drift with t.
Where exact means are known they are stored alongside, which is what makes
hindsight benchmarks and expected-regret metrics possible.

Two scenarios ship with the package: a seeded synthetic linear problem on the
simplex whose equality rows are linearly independent and whose interior
anchor point makes the windowed static programs well posed, and a data-center
power allocation scenario (50 servers in 5 clusters, electricity prices per
zone, Poisson arrivals, Pareto service noise, budget-pacing equalities).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Protocol, Sequence

import numpy as np

from .errors import ProblemError
from .geometry import Box, DecisionSet, Simplex

Array = np.ndarray


# ---------------------------------------------------------------------------
# sampling primitives


def slot_rng(seed: int, slot: int) -> np.random.Generator:
    """Generator for one slot of one run, replayable in isolation.

    Spawning off the slot index means any single slot's draws can be
    reproduced without replaying the slots before it, which is what the
    record audits rely on."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(slot,)))


def pareto_sample(mean, shape, rng, size=None):
    """Pareto draw(s) with the given mean; scale is mean*(shape-1)/shape.

    numpy's generator exposes the Lomax form, so we shift and rescale.
    Requires shape > 1, otherwise the mean does not exist.
    """
    if shape <= 1.0:
        raise ProblemError(f"pareto shape must exceed 1 for a finite mean, got {shape}")
    if mean <= 0.0:
        raise ProblemError(f"pareto mean must be positive, got {mean}")
    scale = mean * (shape - 1.0) / shape
    return (rng.pareto(shape, size=size) + 1.0) * scale


def poisson_sample(mean, rng):
    """Single Poisson draw (mean > 0)."""
    if mean <= 0.0:
        raise ProblemError(f"poisson mean must be positive, got {mean}")
    return int(rng.poisson(mean))


def service_curve(power, gain=8.0, rate=4.0):
    """Mean jobs served by one server at the given power draw."""
    served = gain * np.log1p(rate * np.asarray(power, dtype=float))
    return float(served) if served.ndim == 0 else served


def service_curve_inverse(target, gain=8.0, rate=4.0, power_cap=30.0):
    """Power needed to serve `target` jobs on average, clipped to the range."""
    target = np.asarray(target, dtype=float)
    if np.any(target < 0.0):
        raise ProblemError("service target must be nonnegative")
    power = np.clip(np.expm1(target / gain) / rate, 0.0, power_cap)
    return float(power) if power.ndim == 0 else power


# ---------------------------------------------------------------------------
# per-slot function objects


class FunctionOracle(Protocol):
    def value(self, point: Array) -> float: ...
    def grad(self, point: Array) -> Array: ...


@dataclass(frozen=True)
class LinearFunction:
    """f(x) = <coeffs, x> - offset."""

    coeffs: Array
    offset: float = 0.0

    def value(self, point: Array) -> float:
        return float(self.coeffs @ point) - self.offset

    def grad(self, point: Array) -> Array:
        return self.coeffs


@dataclass(frozen=True)
class ServiceDeficitFunction:
    """g(x) = level - sum_k weights_k * gain * log(1 + rate * x_k).

    Convex and decreasing in each coordinate; the level is the arrival count
    and the weighted log terms are the (noisy) served jobs.
    """

    level: float
    weights: Array
    gain: float = 8.0
    rate: float = 4.0

    def value(self, point: Array) -> float:
        served = self.weights @ (self.gain * np.log1p(self.rate * point))
        return float(self.level - served)

    def grad(self, point: Array) -> Array:
        return -self.weights * (self.gain * self.rate) / (1.0 + self.rate * point)


@dataclass(frozen=True)
class AveragedFunction:
    """Pointwise average of several function oracles."""

    members: tuple

    def value(self, point: Array) -> float:
        return sum(m.value(point) for m in self.members) / len(self.members)

    def grad(self, point: Array) -> Array:
        total = self.members[0].grad(point).astype(float).copy()
        for m in self.members[1:]:
            total += m.grad(point)
        return total / len(self.members)


def average_functions(members: Sequence[FunctionOracle]) -> FunctionOracle:
    """Average a window of oracles, collapsing all-linear windows exactly."""
    members = tuple(members)
    if not members:
        raise ProblemError("cannot average an empty window")
    if all(isinstance(m, LinearFunction) for m in members):
        coeffs = np.mean([m.coeffs for m in members], axis=0)
        offset = float(np.mean([m.offset for m in members]))
        return LinearFunction(coeffs, offset)
    return AveragedFunction(members)


@dataclass(frozen=True)
class SlotFunctions:
    """The realized functions of one slot, evaluable anywhere on the set."""

    slot: int
    objective: FunctionOracle
    inequalities: tuple
    eq_matrix: Array  # (M, d) rows h_j

    def observe(self, point: Array) -> "ObservationBatch":
        """Package values and subgradients at `point` for the engine."""
        point = np.asarray(point, dtype=float)
        n_ineq = len(self.inequalities)
        dim = point.shape[0]
        ineq_values = np.empty(n_ineq)
        ineq_grads = np.empty((n_ineq, dim))
        for i, fn in enumerate(self.inequalities):
            ineq_values[i] = fn.value(point)
            ineq_grads[i] = fn.grad(point)
        return ObservationBatch(
            slot=self.slot,
            objective_value=self.objective.value(point),
            objective_grad=np.asarray(self.objective.grad(point), dtype=float),
            ineq_values=ineq_values,
            ineq_grads=ineq_grads,
            eq_matrix=self.eq_matrix,
            functions=self,
        )


@dataclass(frozen=True)
class ObservationBatch:
    """What the engine sees at the start of a slot.

    Plain values and subgradients of the previous slot's functions, all
    evaluated at the decision that was played. The SlotFunctions handle is
    carried along so audits and telemetry can re-evaluate at other points.
    """

    slot: int
    objective_value: float
    objective_grad: Array
    ineq_values: Array  # (L,)
    ineq_grads: Array  # (L, d)
    eq_matrix: Array  # (M, d)
    functions: SlotFunctions


# ---------------------------------------------------------------------------
# problem containers


@dataclass(frozen=True)
class MeanModel:
    """Exact means of the random slot functions.

    Constraint means are time-invariant (the streams are i.i.d.); the mean
    objective may vary with the slot, hence the callable."""

    objective_at: Callable[[int], FunctionOracle]
    inequalities: tuple
    eq_matrix: Array  # (M, d)

    def window_objective(self, start: int, length: int) -> FunctionOracle:
        if length < 1:
            raise ProblemError("window length must be at least 1")
        return average_functions(
            [self.objective_at(s) for s in range(start, start + length)]
        )


@dataclass(frozen=True)
class ProblemConstants:
    """Bounds used by the diagnostic inequalities, in one dual norm.

    Constraint bounds aggregate over the constraints in quadrature, which is
    the form the penalty constants need:

    objective_grad_bound  sup ||subgrad f||*
    ineq_grad_bound       sup sqrt(sum_i ||subgrad g_i||*^2)
    ineq_value_bound      sup sqrt(sum_i g_i^2)
    eq_row_bound          sup sqrt(sum_j ||h_j||*^2)
    objective_value_bound sup |f|
    """

    objective_grad_bound: float
    ineq_grad_bound: float
    ineq_value_bound: float
    eq_row_bound: float
    objective_value_bound: float


@dataclass(frozen=True)
class ProblemInstance:
    name: str
    decision_set: DecisionSet
    n_ineq: int
    n_eq: int
    targets: Array  # (M,)
    sample_slot: Callable[[int, np.random.Generator], SlotFunctions]
    means: Optional[MeanModel] = None
    constants: Mapping[str, ProblemConstants] = field(default_factory=dict)
    horizon_cap: Optional[int] = None

    @property
    def dimension(self) -> int:
        return self.decision_set.dim

    def constants_for(self, dual_norm: str) -> ProblemConstants:
        try:
            return self.constants[dual_norm]
        except KeyError:
            raise ProblemError(
                f"no constants recorded for dual norm {dual_norm!r}"
            ) from None


# ---------------------------------------------------------------------------
# synthetic linear scenario


def _norms(matrix: Array, dual_norm: str) -> Array:
    if dual_norm == "l2":
        return np.linalg.norm(matrix, axis=-1)
    if dual_norm == "linf":
        return np.max(np.abs(matrix), axis=-1)
    raise ProblemError(f"unknown dual norm {dual_norm!r}")


def _linear_reach(coeffs: Array, decision_set: DecisionSet) -> float:
    """sup over the set of |<coeffs, x>|, via the two supporting vertices."""
    lo = float(coeffs @ decision_set.support_minimizer(coeffs))
    hi = float(coeffs @ decision_set.support_minimizer(-coeffs))
    return max(abs(lo), abs(hi))


def _l1_reach(decision_set: DecisionSet) -> float:
    """sup over the set of ||x||_1 (bounds the effect of sup-norm noise)."""
    if isinstance(decision_set, Simplex):
        return 1.0
    if isinstance(decision_set, Box):
        return float(np.sum(np.maximum(np.abs(decision_set.lower),
                                       np.abs(decision_set.upper))))
    raise ProblemError("l1 reach not known for this decision set")


def make_linear_problem(
    decision_set: DecisionSet,
    objective_mean: Array,
    *,
    ineq_rows: Optional[Array] = None,
    ineq_margins: Optional[Array] = None,
    eq_rows: Optional[Array] = None,
    targets: Optional[Array] = None,
    objective_noise: float = 0.0,
    ineq_noise: float = 0.0,
    eq_noise: float = 0.0,
    drift_amplitude: float = 0.0,
    drift_period: int = 64,
    name: str = "linear",
) -> ProblemInstance:
    """Linear problem with uniform coefficient noise and optional drift.

    Slot t draws coefficient perturbations uniformly from [-s, s] per entry.
    The mean objective is objective_mean plus a deterministic sinusoidal
    drift (per-coordinate phases), so exact means stay available.
    Inequalities are <a_i, mu> - margin_i <= 0; equalities <h_j, mu> = b_j.
    """
    d = decision_set.dim
    c_base = np.asarray(objective_mean, dtype=float)
    if c_base.shape != (d,):
        raise ProblemError("objective_mean dimension mismatch")

    a_rows = np.zeros((0, d)) if ineq_rows is None else np.asarray(ineq_rows, dtype=float)
    margins = (
        np.zeros(a_rows.shape[0])
        if ineq_margins is None
        else np.asarray(ineq_margins, dtype=float)
    )
    h_rows = np.zeros((0, d)) if eq_rows is None else np.asarray(eq_rows, dtype=float)
    b = np.zeros(h_rows.shape[0]) if targets is None else np.asarray(targets, dtype=float)
    n_ineq, n_eq = a_rows.shape[0], h_rows.shape[0]
    if a_rows.shape != (n_ineq, d) or margins.shape != (n_ineq,):
        raise ProblemError("inequality row/margin shape mismatch")
    if h_rows.shape != (n_eq, d) or b.shape != (n_eq,):
        raise ProblemError("equality row/target shape mismatch")

    phases = 2.0 * np.pi * np.arange(d) / max(d, 1)

    def drift(t: int) -> Array:
        if drift_amplitude == 0.0:
            return np.zeros(d)
        return drift_amplitude * np.sin(2.0 * np.pi * t / drift_period + phases)

    def mean_objective(t: int) -> LinearFunction:
        return LinearFunction(c_base + drift(t))

    mean_ineqs = tuple(
        LinearFunction(a_rows[i].copy(), margins[i]) for i in range(n_ineq)
    )

    def sample_slot(t: int, rng: np.random.Generator) -> SlotFunctions:
        c_t = c_base + drift(t)
        if objective_noise > 0.0:
            c_t = c_t + rng.uniform(-objective_noise, objective_noise, size=d)
        ineqs = []
        for i in range(n_ineq):
            row = a_rows[i]
            if ineq_noise > 0.0:
                row = row + rng.uniform(-ineq_noise, ineq_noise, size=d)
            ineqs.append(LinearFunction(row, margins[i]))
        h_t = h_rows
        if n_eq and eq_noise > 0.0:
            h_t = h_rows + rng.uniform(-eq_noise, eq_noise, size=(n_eq, d))
        return SlotFunctions(
            slot=t,
            objective=LinearFunction(c_t),
            inequalities=tuple(ineqs),
            eq_matrix=np.array(h_t, dtype=float),
        )

    # Exact constant bounds: coefficients live in a known box around their
    # drifting means, so sup-norms come from a one-period scan plus the
    # worst-case noise contribution.
    period = np.arange(max(drift_period, 1))
    drift_grid = np.array([c_base + drift(int(t)) for t in period])
    l1_reach = _l1_reach(decision_set)
    constants = {}
    for dual_norm in ("l2", "linf"):
        noise_unit = float(_norms(np.ones(d), dual_norm))
        d1 = float(np.max(_norms(drift_grid, dual_norm))) + objective_noise * noise_unit
        if n_ineq:
            grad_sups = _norms(a_rows, dual_norm) + ineq_noise * noise_unit
            d2 = float(np.sqrt(np.sum(grad_sups**2)))
            value_sups = np.array([
                _linear_reach(a_rows[i], decision_set) + abs(margins[i])
                + ineq_noise * l1_reach
                for i in range(n_ineq)
            ])
            g_bound = float(np.sqrt(np.sum(value_sups**2)))
        else:
            d2, g_bound = 0.0, 0.0
        if n_eq:
            row_sups = _norms(h_rows, dual_norm) + eq_noise * noise_unit
            h_bound = float(np.sqrt(np.sum(row_sups**2)))
        else:
            h_bound = 0.0
        f_bound = max(
            _linear_reach(drift_grid[t], decision_set) for t in range(len(period))
        ) + objective_noise * l1_reach
        constants[dual_norm] = ProblemConstants(
            objective_grad_bound=d1,
            ineq_grad_bound=d2,
            ineq_value_bound=g_bound,
            eq_row_bound=h_bound,
            objective_value_bound=f_bound,
        )

    means = MeanModel(
        objective_at=mean_objective,
        inequalities=mean_ineqs,
        eq_matrix=h_rows.copy(),
    )
    return ProblemInstance(
        name=name,
        decision_set=decision_set,
        n_ineq=n_ineq,
        n_eq=n_eq,
        targets=b,
        sample_slot=sample_slot,
        means=means,
        constants=constants,
    )


def build_synthetic_problem(d: int, n_ineq: int, n_eq: int, seed: int) -> ProblemInstance:
    """Seeded linear test bed on the simplex with well-posed multipliers.

    The equality rows are drawn until linearly independent and the targets
    come from an interior anchor point, so every windowed static program is
    strictly feasible on the equality slice and the dual optima stay bounded.
    Three choices keep the instance from degenerating into something the
    run solves for free. The anchor sits well away from the centroid, so a
    run started at uniform pays a visible transient before it can track the
    optimum. The objective keeps only a small component along the equality
    row span; most of its pull is parallel to the feasible slice, so drifting
    off the slice buys little objective and the regret is not swamped by
    that trade. The first inequality leans against the objective with a
    modest margin, which makes it active at the static optimum with a
    positive multiplier; the remaining rows stay slack at the anchor.
    """
    if n_eq >= d:
        raise ProblemError("need fewer equality constraints than dimensions")
    rng = np.random.default_rng(seed)
    decision_set = Simplex(d)

    anchor = np.full(d, 1.0 / d)
    tilt = rng.uniform(-1.2, 1.2, size=d) / d
    anchor = anchor + tilt - np.mean(tilt)
    anchor = np.clip(anchor, 0.2 / d, None)
    anchor = anchor / anchor.sum()

    c_base = rng.uniform(0.0, 1.0, size=d)

    eq_rows = None
    targets = None
    if n_eq:
        for _ in range(16):
            rows = rng.standard_normal((n_eq, d))
            rows /= np.linalg.norm(rows, axis=1, keepdims=True)
            if np.linalg.matrix_rank(rows) == n_eq:
                eq_rows = rows
                break
        else:
            raise ProblemError("failed to draw independent equality rows")
        targets = eq_rows @ anchor
        gram_inv = np.linalg.pinv(eq_rows @ eq_rows.T)
        c_base = c_base - 0.9 * eq_rows.T @ (gram_inv @ (eq_rows @ c_base))

    ineq_rows = None
    margins = None
    if n_ineq:
        ineq_rows = rng.standard_normal((n_ineq, d)) / np.sqrt(d)
        slacks = np.full(n_ineq, 0.25)
        lean = 0.65 * (-c_base / np.linalg.norm(c_base)) + 0.35 * (
            ineq_rows[0] / np.linalg.norm(ineq_rows[0])
        )
        ineq_rows[0] = lean / np.linalg.norm(lean)
        slacks[0] = 0.10
        margins = ineq_rows @ anchor + slacks

    return make_linear_problem(
        decision_set,
        c_base,
        ineq_rows=ineq_rows,
        ineq_margins=margins,
        eq_rows=eq_rows,
        targets=targets,
        objective_noise=0.2,
        ineq_noise=0.2,
        eq_noise=0.1,
        name=f"synthetic-d{d}-L{n_ineq}-M{n_eq}-s{seed}",
    )


# ---------------------------------------------------------------------------
# data-center scenario


@dataclass(frozen=True)
class PriceTrace:
    """Electricity prices per zone: names plus a (T, zones) array."""

    zones: tuple
    prices: Array

    def __post_init__(self):
        prices = np.asarray(self.prices, dtype=float)
        if prices.ndim != 2 or prices.shape[1] != len(self.zones):
            raise ProblemError("price array must be (slots, zones)")
        if not np.all(np.isfinite(prices)):
            raise ProblemError("prices must be finite")
        object.__setattr__(self, "prices", prices)

    def __len__(self) -> int:
        return self.prices.shape[0]


@dataclass(frozen=True)
class DatacenterConfig:
    """Cluster layout and distribution parameters of the power scenario."""

    clusters: tuple = (
        tuple(range(0, 10)),
        tuple(range(10, 20)),
        tuple(range(20, 30)),
        tuple(range(30, 40)),
        tuple(range(40, 50)),
    )
    power_cap: float = 30.0
    arrival_mean: float = 1000.0
    service_gain: float = 8.0
    service_rate: float = 4.0
    budget_mean: float = 5.0
    pacing_ratios: tuple = (0.05, 0.10, 0.25, 0.60)
    pareto_shape: float = 2.5

    def __post_init__(self):
        servers = sorted(k for cluster in self.clusters for k in cluster)
        if servers != list(range(len(servers))):
            raise ProblemError("clusters must partition the server index range")
        if abs(sum(self.pacing_ratios) - 1.0) > 1e-12:
            raise ProblemError("pacing ratios must sum to 1")
        if self.pareto_shape <= 1.0:
            raise ProblemError("pareto shape must exceed 1")

    @property
    def n_servers(self) -> int:
        return sum(len(c) for c in self.clusters)


def _pacing_structure(config: DatacenterConfig) -> Array:
    """Rows chi_j - beta_j * 1; the last row merges the final two clusters."""
    d = config.n_servers
    ratios = config.pacing_ratios
    groups = [list(config.clusters[j]) for j in range(3)]
    groups.append(list(config.clusters[3]) + list(config.clusters[4]))
    rows = np.zeros((4, d))
    for j, group in enumerate(groups):
        rows[j, group] = 1.0
        rows[j] -= ratios[j]
    return rows


def _estimate_datacenter_constants(
    config: DatacenterConfig, zone_prices: Array, server_zone: Array
) -> Mapping[str, ProblemConstants]:
    """Monte Carlo tail bounds (99.99th percentile, 1.5x headroom).

    Price-driven quantities are exact since the trace is known; Pareto and
    Poisson tails are estimated from a fixed-seed sample so the constants are
    reproducible for a given config/trace.
    """
    rng = np.random.default_rng(0x7A11B0)
    d = config.n_servers
    n = 100_000
    gain, rate = config.service_gain, config.service_rate
    full_service = gain * np.log1p(rate * config.power_cap)

    arrivals = rng.poisson(config.arrival_mean, size=n).astype(float)
    noise = pareto_sample(1.0, config.pareto_shape, rng, size=(n, d))
    budgets = pareto_sample(config.budget_mean, config.pareto_shape, rng, size=(n, d))

    served_cap = noise.sum(axis=1) * full_service
    g_extreme = np.maximum(arrivals, np.abs(arrivals - served_cap))
    structure = _pacing_structure(config)

    server_prices = zone_prices[:, server_zone]

    def tail(values: Array) -> float:
        return float(np.quantile(values, 0.9999)) * 1.5

    constants = {}
    for dual_norm in ("l2", "linf"):
        d1 = float(np.max(_norms(server_prices, dual_norm)))
        d2 = tail(_norms(noise * (gain * rate), dual_norm))  # steepest at zero power
        h_quad = np.zeros(n)
        for j in range(structure.shape[0]):
            h_quad += _norms(budgets * structure[j], dual_norm) ** 2
        f_bound = float(np.max(server_prices.sum(axis=1))) * config.power_cap
        constants[dual_norm] = ProblemConstants(
            objective_grad_bound=d1,
            ineq_grad_bound=d2,
            ineq_value_bound=tail(g_extreme),
            eq_row_bound=tail(np.sqrt(h_quad)),
            objective_value_bound=f_bound,
        )
    return constants


def build_datacenter_problem(
    config: DatacenterConfig, prices: PriceTrace
) -> ProblemInstance:
    """Power allocation for 50 servers under one service-level inequality
    and four budget-pacing equalities.

    Objective: slot electricity cost sum_k c_k^t mu_k (prices from the trace,
    one zone per cluster). Inequality: arrivals minus noisy served jobs.
    Equalities: each cluster's expected budget spend pinned to its pacing
    share of the total, in homogeneous form with target zero.
    """
    if len(prices.zones) != len(config.clusters):
        raise ProblemError(
            f"trace has {len(prices.zones)} zones, need {len(config.clusters)}"
        )
    if len(prices) == 0:
        raise ProblemError("price trace is empty")
    d = config.n_servers
    server_zone = np.empty(d, dtype=int)
    for z, cluster in enumerate(config.clusters):
        server_zone[list(cluster)] = z
    zone_prices = prices.prices

    structure = _pacing_structure(config)
    mean_rows = config.budget_mean * structure
    gain, rate = config.service_gain, config.service_rate
    shape = config.pareto_shape

    def objective_at(t: int) -> LinearFunction:
        if t >= zone_prices.shape[0]:
            raise ProblemError(
                f"slot {t} beyond trace length {zone_prices.shape[0]}"
            )
        return LinearFunction(zone_prices[t, server_zone].astype(float))

    mean_ineq = ServiceDeficitFunction(
        level=config.arrival_mean, weights=np.ones(d), gain=gain, rate=rate
    )

    def sample_slot(t: int, rng: np.random.Generator) -> SlotFunctions:
        arrivals = poisson_sample(config.arrival_mean, rng)
        noise = pareto_sample(1.0, shape, rng, size=d)
        budgets = pareto_sample(config.budget_mean, shape, rng, size=d)
        return SlotFunctions(
            slot=t,
            objective=objective_at(t),
            inequalities=(
                ServiceDeficitFunction(arrivals, noise, gain=gain, rate=rate),
            ),
            eq_matrix=budgets * structure,
        )

    means = MeanModel(
        objective_at=objective_at,
        inequalities=(mean_ineq,),
        eq_matrix=mean_rows,
    )
    return ProblemInstance(
        name="datacenter",
        decision_set=Box(np.zeros(d), np.full(d, config.power_cap)),
        n_ineq=1,
        n_eq=4,
        targets=np.zeros(4),
        sample_slot=sample_slot,
        means=means,
        constants=_estimate_datacenter_constants(config, zone_prices, server_zone),
        horizon_cap=len(prices),
    )


def reac_policy_step(arrival_history: Sequence[float], config: DatacenterConfig) -> Array:
    """Reactive baseline: forecast arrivals by a trailing average, split the
    load by pacing ratio (last ratio shared by the final two clusters), and
    invert the service curve per server."""
    history = list(arrival_history)[-10:]
    if not history:
        raise ProblemError("arrival history must be nonempty")
    forecast = float(np.mean(history))
    allocation = np.zeros(config.n_servers)
    cluster_loads = [config.pacing_ratios[j] * forecast for j in range(3)]
    cluster_loads += [config.pacing_ratios[3] * forecast / 2.0] * 2  # split evenly
    for cluster, load in zip(config.clusters, cluster_loads):
        allocation[list(cluster)] = service_curve_inverse(
            load / len(cluster),
            config.service_gain,
            config.service_rate,
            config.power_cap,
        )
    return allocation
