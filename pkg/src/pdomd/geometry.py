"""Decision sets, Bregman geometries, and mirror proximal steps.

This module provides the geometric layer for online mirror descent: compact
convex decision sets (axis-aligned boxes and probability simplices), Bregman
divergences generated by a strongly convex potential (squared Euclidean norm
and negative entropy), and the proximal update

.. math::

    x^+ = \\operatorname*{argmin}_{x \\in \\Delta}
        \\; \\langle p, x \\rangle + \\alpha D(x, y),

together with its closed forms: an exponentiated-gradient step for the
simplex under negative entropy and a clipped gradient step for a box under
the Euclidean potential.  Every other combination falls back to a numeric
inner solve certified through a Frank-Wolfe optimality gap.

Both geometries have strong-convexity modulus 1 with respect to their
natural norm pair (Euclidean: l2/l2; negative entropy on the simplex: l1
primal with l-infinity dual, by Pinsker's inequality).
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from . import _descent
from .errors import GeometryError, ProxConvergenceError

Array = np.ndarray

#: Default membership tolerance for decision sets.
MEMBERSHIP_TOL = 1e-12

#: Positivity clamp used by numeric solves on entropy-type objectives.
_POSITIVITY_FLOOR = 1e-18


def _as_vector(x, name: str) -> Array:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise GeometryError(f"{name} must be a one-dimensional vector, got shape {arr.shape}")
    return arr


# ---------------------------------------------------------------------------
# Decision sets
# ---------------------------------------------------------------------------


class DecisionSet(ABC):
    """A compact convex decision set with projection and support oracles."""

    dim: int

    @abstractmethod
    def contains(self, point: Array, tol: float = MEMBERSHIP_TOL) -> bool:
        """Whether ``point`` lies in the set up to tolerance ``tol``."""

    @abstractmethod
    def project(self, point: Array) -> Array:
        """Euclidean projection onto the set."""

    @abstractmethod
    def support_minimizer(self, direction: Array) -> Array:
        """A minimizer of ``<direction, z>`` over the set."""

    @abstractmethod
    def initial_point(self) -> Array:
        """Canonical interior starting point."""

    @abstractmethod
    def sample(self, rng: np.random.Generator) -> Array:
        """A random member of the set (used by audits and tests)."""


@dataclass(frozen=True)
class Box(DecisionSet):
    """Axis-aligned box ``{x : lower <= x <= upper}``.

    Parameters
    ----------
    lower, upper : ndarray
        Finite componentwise bounds with ``lower <= upper``.
    """

    lower: Array
    upper: Array

    def __post_init__(self):
        lower = _as_vector(self.lower, "lower")
        upper = _as_vector(self.upper, "upper")
        if lower.shape != upper.shape:
            raise GeometryError("box bounds must share a shape")
        if not (np.isfinite(lower).all() and np.isfinite(upper).all()):
            raise GeometryError("box bounds must be finite")
        if np.any(lower > upper):
            raise GeometryError("box requires lower <= upper componentwise")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def contains(self, point: Array, tol: float = MEMBERSHIP_TOL) -> bool:
        point = np.asarray(point, dtype=float)
        if point.shape != self.lower.shape:
            return False
        return bool(np.all(point >= self.lower - tol) and np.all(point <= self.upper + tol))

    def project(self, point: Array) -> Array:
        return np.clip(np.asarray(point, dtype=float), self.lower, self.upper)

    def support_minimizer(self, direction: Array) -> Array:
        return np.where(np.asarray(direction) > 0.0, self.lower, self.upper)

    def initial_point(self) -> Array:
        return 0.5 * (self.lower + self.upper)

    def sample(self, rng: np.random.Generator) -> Array:
        return rng.uniform(self.lower, self.upper)


@dataclass(frozen=True)
class Simplex(DecisionSet):
    """Probability simplex ``{x >= 0 : sum(x) = 1}`` in ``dim`` coordinates."""

    dim: int

    def __post_init__(self):
        if int(self.dim) < 1:
            raise GeometryError("simplex dimension must be at least 1")
        object.__setattr__(self, "dim", int(self.dim))

    def contains(self, point: Array, tol: float = MEMBERSHIP_TOL) -> bool:
        point = np.asarray(point, dtype=float)
        if point.shape != (self.dim,):
            return False
        return bool(np.all(point >= -tol) and abs(float(point.sum()) - 1.0) <= tol)

    def project(self, point: Array) -> Array:
        # Sort-based projection onto the simplex.
        v = np.asarray(point, dtype=float)
        u = np.sort(v)[::-1]
        css = np.cumsum(u) - 1.0
        idx = np.arange(1, v.shape[0] + 1)
        rho = idx[u - css / idx > 0][-1]
        threshold = css[rho - 1] / rho
        return np.maximum(v - threshold, 0.0)

    def support_minimizer(self, direction: Array) -> Array:
        out = np.zeros(self.dim)
        out[int(np.argmin(direction))] = 1.0
        return out

    def initial_point(self) -> Array:
        return np.full(self.dim, 1.0 / self.dim)

    def sample(self, rng: np.random.Generator) -> Array:
        return rng.dirichlet(np.ones(self.dim))


# ---------------------------------------------------------------------------
# Bregman geometries
# ---------------------------------------------------------------------------


class BregmanGeometry(ABC):
    """A Bregman divergence with its norm pair and convexity modulus.

    Attributes
    ----------
    name : str
        Stable identifier used in run headers ("euclidean",
        "negative_entropy").
    beta : float
        Strong-convexity modulus of the generating potential with respect to
        the primal norm, so ``D(x, y) >= beta/2 * norm(x - y)**2``.
    """

    name: str
    beta: float = 1.0

    #: Clamp for numeric solves whose gradients blow up at the boundary.
    positivity_floor: float | None = None

    @abstractmethod
    def divergence(self, x: Array, y: Array) -> float:
        """Bregman divergence ``D(x, y)``."""

    @abstractmethod
    def potential_grad(self, x: Array) -> Array:
        """Gradient of the generating potential."""

    @abstractmethod
    def norm(self, v: Array) -> float:
        """Primal norm."""

    @abstractmethod
    def dual_norm(self, v: Array) -> float:
        """Dual norm paired with :meth:`norm`."""


class EuclideanGeometry(BregmanGeometry):
    """Squared Euclidean distance ``D(x, y) = 0.5 * ||x - y||_2**2``."""

    name = "euclidean"
    beta = 1.0
    dual_norm_name = "l2"

    def divergence(self, x: Array, y: Array) -> float:
        x = _as_vector(x, "x")
        y = _as_vector(y, "y")
        if x.shape != y.shape:
            raise GeometryError("divergence arguments must share a shape")
        diff = x - y
        return 0.5 * float(diff @ diff)

    def potential_grad(self, x: Array) -> Array:
        return np.asarray(x, dtype=float)

    def norm(self, v: Array) -> float:
        return float(np.linalg.norm(v))

    def dual_norm(self, v: Array) -> float:
        return float(np.linalg.norm(v))


class NegativeEntropyGeometry(BregmanGeometry):
    """Generalized Kullback-Leibler divergence from the entropy potential.

    ``D(x, y) = sum(x * log(x / y) - x + y)`` with the convention
    ``0 * log(0 / q) = 0``.  On simplex members the linear terms cancel and
    the divergence reduces to the ordinary KL divergence; off the simplex the
    generalized form keeps ``D >= 0``.  The second argument must be strictly
    positive, the first nonnegative.

    The norm pair is l1 primal / l-infinity dual; Pinsker's inequality gives
    modulus ``beta = 1`` on the simplex.
    """

    name = "negative_entropy"
    beta = 1.0
    dual_norm_name = "linf"
    positivity_floor = _POSITIVITY_FLOOR

    def divergence(self, x: Array, y: Array) -> float:
        x = _as_vector(x, "x")
        y = _as_vector(y, "y")
        if x.shape != y.shape:
            raise GeometryError("divergence arguments must share a shape")
        if np.any(y <= 0.0):
            raise GeometryError("negative-entropy divergence needs strictly positive y")
        if np.any(x < 0.0):
            raise GeometryError("negative-entropy divergence needs nonnegative x")
        positive = x > 0.0
        terms = np.where(positive, x * np.log(np.where(positive, x, 1.0) / y), 0.0)
        return float(np.sum(terms) - float(x.sum()) + float(y.sum()))

    def potential_grad(self, x: Array) -> Array:
        return np.log(np.asarray(x, dtype=float))

    def norm(self, v: Array) -> float:
        return float(np.abs(v).sum())

    def dual_norm(self, v: Array) -> float:
        return float(np.max(np.abs(v))) if np.size(v) else 0.0


def bregman_divergence(geometry: BregmanGeometry, x: Array, y: Array) -> float:
    """Evaluate ``D(x, y)`` for the given geometry.

    Examples
    --------
    >>> g = NegativeEntropyGeometry()
    >>> round(bregman_divergence(g, np.array([0.5, 0.5]), np.array([0.25, 0.75])), 6)
    0.143841
    """
    return geometry.divergence(x, y)


# ---------------------------------------------------------------------------
# Proximal steps
# ---------------------------------------------------------------------------


def exponentiated_gradient_step(base: Array, coeffs: Array) -> Array:
    """Multiplicative-weights update ``x_i = base_i * exp(-coeffs_i) / Z``.

    ``coeffs`` is the linear coefficient vector already divided by the
    proximal weight.  The exponent is normalized by subtracting the largest
    entry of ``-coeffs`` (equivalently the smallest coefficient) before
    exponentiation, so the computation cannot overflow and the result is
    exactly invariant under a common shift of the coefficients whenever the
    shifted coefficients are themselves exact.

    Parameters
    ----------
    base : ndarray
        Strictly positive reference point (typically on the simplex).
    coeffs : ndarray
        Finite linear coefficients.

    Returns
    -------
    ndarray
        The updated point, normalized to sum to one.
    """
    base = _as_vector(base, "base")
    coeffs = _as_vector(coeffs, "coeffs")
    if base.shape != coeffs.shape:
        raise GeometryError("base and coeffs must share a shape")
    if np.any(base <= 0.0):
        raise GeometryError("exponentiated-gradient base must be strictly positive")
    if not np.isfinite(coeffs).all():
        raise GeometryError("coefficients must be finite")
    shifted = coeffs - coeffs.min()
    weights = base * np.exp(-shifted)
    total = float(weights.sum())
    if not np.isfinite(total) or total <= 0.0:
        raise GeometryError("exponentiated-gradient weights degenerated to zero")
    return weights / total


def euclidean_box_step(base: Array, coeffs: Array, prox_weight: float, box: Box) -> Array:
    """Closed-form proximal step on a box: clip ``base - coeffs / prox_weight``."""
    base = _as_vector(base, "base")
    coeffs = _as_vector(coeffs, "coeffs")
    if prox_weight <= 0.0:
        raise GeometryError("prox_weight must be positive")
    return box.project(base - coeffs / prox_weight)


def mix_toward_uniform(point: Array, mixing_weight: float) -> Array:
    """Blend a simplex point with the uniform distribution.

    Returns ``(1 - mixing_weight) * point + mixing_weight / d`` so every
    component is at least ``mixing_weight / d``.
    """
    point = _as_vector(point, "point")
    if not 0.0 <= mixing_weight < 1.0:
        raise GeometryError("mixing weight must lie in [0, 1)")
    if mixing_weight == 0.0:
        return point.copy()
    return (1.0 - mixing_weight) * point + mixing_weight / point.shape[0]


def mirror_step(
    geometry: BregmanGeometry,
    decision_set: DecisionSet,
    base: Array,
    coeffs: Array,
    prox_weight: float,
    *,
    gap_tol: float = 1e-10,
    max_iter: int = 100_000,
    force_numeric: bool = False,
) -> Array:
    """Solve ``argmin_x <coeffs, x> + prox_weight * D(x, base)`` over the set.

    Dispatches to the exponentiated-gradient closed form on
    (simplex, negative entropy) and to the clipped gradient step on
    (box, Euclidean).  Any other combination runs the numeric fallback, an
    accelerated projected-gradient solve stopped at a Frank-Wolfe gap of
    ``gap_tol``.  ``force_numeric`` routes even the closed-form pairs through
    the fallback, which is how the closed forms are cross-validated.

    Raises
    ------
    GeometryError
        On malformed inputs (dimension mismatch, base outside the set,
        nonpositive prox weight).
    ProxConvergenceError
        When the numeric fallback cannot certify the gap tolerance within
        ``max_iter`` iterations.
    """
    base = _as_vector(base, "base")
    coeffs = _as_vector(coeffs, "coeffs")
    if base.shape[0] != decision_set.dim or coeffs.shape != base.shape:
        raise GeometryError("base/coeffs dimensions must match the decision set")
    if prox_weight <= 0.0:
        raise GeometryError("prox_weight must be positive")
    if not decision_set.contains(base, tol=1e-9):
        raise GeometryError("base point must belong to the decision set")

    if not force_numeric:
        if isinstance(decision_set, Simplex) and isinstance(geometry, NegativeEntropyGeometry):
            return exponentiated_gradient_step(base, coeffs / prox_weight)
        if isinstance(decision_set, Box) and isinstance(geometry, EuclideanGeometry):
            return euclidean_box_step(base, coeffs, prox_weight, decision_set)

    if isinstance(geometry, NegativeEntropyGeometry) and np.any(base <= 0.0):
        raise GeometryError("entropy prox needs a strictly positive base point")

    grad_base = geometry.potential_grad(base)

    def objective(x: Array) -> float:
        return float(coeffs @ x) + prox_weight * geometry.divergence(x, base)

    def gradient(x: Array) -> Array:
        return coeffs + prox_weight * (geometry.potential_grad(x) - grad_base)

    result = _descent.minimize_on_set(
        objective,
        gradient,
        decision_set,
        base,
        gap_tol=gap_tol,
        max_iter=max_iter,
        floor=geometry.positivity_floor,
        curvature_hint=prox_weight,
    )
    if result.gap > max(gap_tol, 1e-10):
        raise ProxConvergenceError(
            f"mirror-step fallback stalled at gap {result.gap:.3e} "
            f"after {result.iterations} iterations"
        )
    return result.point


@dataclass(frozen=True)
class PushbackResult:
    """Outcome of a three-point (pushback) inequality check."""

    holds: bool
    residual: float
    minimizer: Array


def pushback_check(
    geometry: BregmanGeometry,
    decision_set: DecisionSet,
    coeffs: Array,
    base: Array,
    prox_weight: float,
    probe: Array,
    tol: float = 1e-9,
) -> PushbackResult:
    """Verify the three-point inequality of the proximal step.

    With ``x* = argmin <coeffs, x> + a * D(x, base)`` the inequality

    ``<coeffs, x*> + a D(x*, base) <= <coeffs, z> + a D(z, base) - a D(z, x*)``

    must hold for every ``z`` in the set.  Returns the signed residual
    (right side minus left side, nonnegative when the inequality holds) and
    whether it clears ``-tol``.
    """
    probe = _as_vector(probe, "probe")
    if not decision_set.contains(probe, tol=1e-9):
        raise GeometryError("probe point must belong to the decision set")
    minimizer = mirror_step(geometry, decision_set, base, coeffs, prox_weight)
    lhs = float(coeffs @ minimizer) + prox_weight * geometry.divergence(minimizer, base)
    rhs = (
        float(coeffs @ probe)
        + prox_weight * geometry.divergence(probe, base)
        - prox_weight * geometry.divergence(probe, minimizer)
    )
    residual = rhs - lhs
    return PushbackResult(holds=bool(residual >= -tol), residual=residual, minimizer=minimizer)
