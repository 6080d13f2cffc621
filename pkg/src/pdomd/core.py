"""The primal-dual online mirror descent engine.

Each slot plays a decision from a proximal mirror step whose linear term
mixes the previous slot's objective subgradient with multiplier-weighted
constraint subgradients, then pushes the multipliers by the linearized
constraint residuals. The simplex variant first blends the previous decision
toward uniform, which keeps KL divergences finite.

The engine never samples anything itself: it consumes observation batches
(values and subgradients evaluated at the previous decision) and is oblivious
to where they come from. The first slot has no previous observations; by
convention the initial point is played and the multipliers stay at zero,
which is the same as starting the updates one slot late.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import Iterator, Optional, Tuple

import numpy as np

from .errors import ConfigError, ProblemError
from .geometry import (
    BregmanGeometry,
    DecisionSet,
    EuclideanGeometry,
    NegativeEntropyGeometry,
    Simplex,
    mirror_step,
    mix_toward_uniform,
)
from .problems import ObservationBatch, ProblemInstance, SlotFunctions, slot_rng
from .telemetry import RunRecord

Array = np.ndarray

VARIANTS = ("general", "simplex")


@dataclass(frozen=True)
class AlgorithmParams:
    """Engine weights: V, alpha, theta, the horizon, and a window length
    used only by multiplier diagnostics."""

    objective_weight: float  # V
    prox_weight: float  # alpha
    mixing_weight: float  # theta, simplex variant only
    horizon: int
    drift_window: int

    def __post_init__(self):
        if self.objective_weight <= 0.0 or self.prox_weight <= 0.0:
            raise ConfigError("objective and prox weights must be positive")
        if not 0.0 <= self.mixing_weight < 1.0:
            raise ConfigError("mixing weight must lie in [0, 1)")
        if self.drift_window < 1 or self.drift_window > max(self.horizon, 1):
            raise ConfigError("drift window must lie in [1, horizon]")


def parameter_schedule(horizon: int, variant: str = "general") -> AlgorithmParams:
    """The rate-optimal schedule: V = sqrt(T), alpha = T, theta = 1/T."""
    if variant not in VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}")
    if horizon < 2:
        raise ConfigError("schedule needs a horizon of at least 2")
    return AlgorithmParams(
        objective_weight=float(np.sqrt(horizon)),
        prox_weight=float(horizon),
        mixing_weight=1.0 / horizon if variant == "simplex" else 0.0,
        horizon=horizon,
        drift_window=int(round(np.sqrt(horizon))),
    )


@dataclass(frozen=True)
class DualState:
    ineq: Array  # Q, elementwise nonnegative
    eq: Array  # H, signed

    def norms(self) -> Tuple[float, float]:
        return float(np.linalg.norm(self.ineq)), float(np.linalg.norm(self.eq))


@dataclass(frozen=True)
class SolverState:
    slot: int
    decision: Array  # the decision currently in play
    duals: DualState
    params: AlgorithmParams
    geometry: BregmanGeometry
    decision_set: DecisionSet
    targets: Array  # (M,)
    variant: str


@dataclass(frozen=True)
class StepOutcome:
    """Everything the diagnostics need about one slot.

    Dual norms are post-update. surrogate_ineq holds the pre-clip inequality
    increments g + <grad g, step>; eq_residual holds <h, mu_new> - b."""

    decision: Array
    drift: float
    ineq_dual_norm: float
    eq_dual_norm: float
    objective_advance: float  # V <grad f, mu_new - mu_prev>
    prox_cost: float  # alpha D(mu_new, base)
    surrogate_ineq: Array
    eq_residual: Array


def initial_state(
    problem: ProblemInstance,
    params: AlgorithmParams,
    variant: str = "general",
    geometry: Optional[BregmanGeometry] = None,
) -> SolverState:
    if variant not in VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}")
    decision_set = problem.decision_set
    if variant == "simplex" and not isinstance(decision_set, Simplex):
        raise ConfigError("the simplex variant needs a simplex decision set")
    if geometry is None:
        geometry = (
            NegativeEntropyGeometry() if variant == "simplex" else EuclideanGeometry()
        )
    return SolverState(
        slot=0,
        decision=decision_set.initial_point(),
        duals=DualState(np.zeros(problem.n_ineq), np.zeros(problem.n_eq)),
        params=params,
        geometry=geometry,
        decision_set=decision_set,
        targets=np.asarray(problem.targets, dtype=float),
        variant=variant,
    )


def assemble_dual_weighted_gradient(state: SolverState, obs: ObservationBatch) -> Array:
    """Linear coefficients of the proximal subproblem:
    V grad f + sum_i Q_i grad g_i + sum_j H_j h_j."""
    coeffs = state.params.objective_weight * obs.objective_grad
    if state.duals.ineq.size:
        coeffs = coeffs + state.duals.ineq @ obs.ineq_grads
    if state.duals.eq.size:
        coeffs = coeffs + state.duals.eq @ obs.eq_matrix
    return coeffs


def update_inequality_multiplier(
    current: float, g_value: float, g_grad: Array, mu_new: Array, mu_prev: Array
) -> float:
    """max{Q + g + <grad g, mu_new - mu_prev>, 0}."""
    if current < 0.0:
        raise ProblemError("inequality multiplier must be nonnegative")
    return max(current + g_value + float(g_grad @ (mu_new - mu_prev)), 0.0)


def update_equality_multiplier(
    current: float, h_vector: Array, mu_new: Array, target: float
) -> float:
    """H + <h, mu_new> - b, unclipped."""
    return current + float(h_vector @ mu_new) - target


def step(
    state: SolverState, obs: Optional[ObservationBatch]
) -> Tuple[SolverState, StepOutcome]:
    """Advance one slot. obs carries the previous slot's functions evaluated
    at the current decision; None means there is no previous slot."""
    params = state.params
    if obs is None:
        outcome = StepOutcome(
            decision=state.decision,
            drift=0.0,
            ineq_dual_norm=float(np.linalg.norm(state.duals.ineq)),
            eq_dual_norm=float(np.linalg.norm(state.duals.eq)),
            objective_advance=0.0,
            prox_cost=0.0,
            surrogate_ineq=np.zeros_like(state.duals.ineq),
            eq_residual=np.zeros_like(state.duals.eq),
        )
        return replace(state, slot=state.slot + 1), outcome

    n_ineq, n_eq = state.duals.ineq.shape[0], state.duals.eq.shape[0]
    dim = state.decision.shape[0]
    if obs.objective_grad.shape != (dim,):
        raise ProblemError("objective gradient dimension mismatch")
    if obs.ineq_values.shape != (n_ineq,) or obs.ineq_grads.shape != (n_ineq, dim):
        raise ProblemError("inequality observation shape mismatch")
    if obs.eq_matrix.shape != (n_eq, dim):
        raise ProblemError("equality observation shape mismatch")

    mu_prev = state.decision
    if state.variant == "simplex":
        base = mix_toward_uniform(mu_prev, params.mixing_weight)
    else:
        base = mu_prev
    coeffs = assemble_dual_weighted_gradient(state, obs)
    mu_new = mirror_step(
        state.geometry, state.decision_set, base, coeffs, params.prox_weight
    )

    move = mu_new - mu_prev
    surrogate = obs.ineq_values + obs.ineq_grads @ move if n_ineq else np.zeros(0)
    q_new = np.maximum(state.duals.ineq + surrogate, 0.0)
    eq_residual = (
        obs.eq_matrix @ mu_new - state.targets if n_eq else np.zeros(0)
    )
    h_new = state.duals.eq + eq_residual

    q_norm_old, h_norm_old = state.duals.norms()
    new_duals = DualState(q_new, h_new)
    q_norm, h_norm = new_duals.norms()
    drift = 0.5 * (q_norm**2 - q_norm_old**2) + 0.5 * (h_norm**2 - h_norm_old**2)

    outcome = StepOutcome(
        decision=mu_new,
        drift=drift,
        ineq_dual_norm=q_norm,
        eq_dual_norm=h_norm,
        objective_advance=params.objective_weight
        * float(obs.objective_grad @ move),
        prox_cost=params.prox_weight * state.geometry.divergence(mu_new, base),
        surrogate_ineq=surrogate,
        eq_residual=eq_residual,
    )
    new_state = replace(
        state, slot=state.slot + 1, decision=mu_new, duals=new_duals
    )
    return new_state, outcome


def iterate_run(
    problem: ProblemInstance,
    horizon: int,
    params: AlgorithmParams,
    seed: int,
    variant: str = "general",
    geometry: Optional[BregmanGeometry] = None,
) -> Iterator[Tuple[SolverState, StepOutcome, SlotFunctions, ObservationBatch]]:
    """Drive the engine against sampled slots, yielding per-slot results.

    Yields (state after the slot, outcome, the slot's sampled functions, the
    observation of those functions at the played decision). The functions
    are sampled after the decision is made, matching the play order."""
    if problem.horizon_cap is not None and horizon > problem.horizon_cap:
        raise ProblemError(
            f"horizon {horizon} exceeds the problem's trace length "
            f"{problem.horizon_cap}"
        )
    state = initial_state(problem, params, variant, geometry)
    obs = None
    for t in range(horizon):
        state, outcome = step(state, obs)
        fns = problem.sample_slot(t, slot_rng(seed, t))
        obs = fns.observe(state.decision)
        yield state, outcome, fns, obs


def run(
    problem: ProblemInstance,
    horizon: int,
    params: Optional[AlgorithmParams] = None,
    seed: int = 0,
    variant: str = "general",
    geometry: Optional[BregmanGeometry] = None,
    config_hash: str = "",
) -> RunRecord:
    """Run the full loop and collect the trajectory record."""
    if params is None:
        params = parameter_schedule(max(horizon, 2), variant)
    dim = problem.dimension
    decisions = np.zeros((horizon, dim))
    objective = np.zeros(horizon)
    ineq = np.zeros((horizon, problem.n_ineq))
    eq = np.zeros((horizon, problem.n_eq))
    q_norm = np.zeros(horizon)
    h_norm = np.zeros(horizon)
    drift = np.zeros(horizon)

    started = time.perf_counter()
    geometry_name = None
    for t, (state, outcome, fns, obs) in enumerate(
        iterate_run(problem, horizon, params, seed, variant, geometry)
    ):
        geometry_name = state.geometry.name
        decisions[t] = state.decision
        objective[t] = obs.objective_value
        ineq[t] = obs.ineq_values
        eq[t] = obs.eq_matrix @ state.decision if problem.n_eq else np.zeros(0)
        q_norm[t] = outcome.ineq_dual_norm
        h_norm[t] = outcome.eq_dual_norm
        drift[t] = outcome.drift
    if geometry_name is None:  # empty horizon: still name the geometry
        state = initial_state(problem, params, variant, geometry)
        geometry_name = state.geometry.name

    return RunRecord(
        problem=problem.name,
        variant=variant,
        geometry=geometry_name,
        seed=seed,
        params=params,
        targets=np.asarray(problem.targets, dtype=float),
        decisions=decisions,
        objective_realized=objective,
        ineq_realized=ineq,
        eq_realized=eq,
        ineq_dual_norm=q_norm,
        eq_dual_norm=h_norm,
        drift=drift,
        config_hash=config_hash,
        wall_time_s=time.perf_counter() - started,
    )
