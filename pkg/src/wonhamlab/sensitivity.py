"""Derivatives of the filter with respect to its initial condition, computed by
two independent routes, plus the closed-form exponential bounds that dominate
them and the integral representation of the model-misspecification error.

The flow route differentiates the normalized filter through the linear
propagator; the smoothing route evaluates the same derivative from the
conditional law of the initial state given the observations and the terminal
state.  Log scales cancel in both routes because the simplex projection and its
derivatives are homogeneous, so all algebra runs on unit-mass propagators.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ObservationMismatchError
from .filters import (
    cell_propagators,
    normalize_second_derivative,
    propagate_cell,
    split_rate_matrix,
    zakai_flow,
)
from .models import (
    GeneratorMatrix,
    ModelPair,
    ObservationMap,
    mixing_rate,
    observation_gap,
    validate_simplex,
    validate_tangent,
)
from .simulate import ObservationPath


def _apply(entries, vec) -> np.ndarray:
    """Matrix-vector product broadcast over leading batch axes."""
    v = np.asarray(vec, dtype=float)
    return (entries @ v[..., :, None])[..., 0]


def derivative_from_flow(entries, mu, v) -> np.ndarray:
    """First derivative of the normalized filter, given propagator entries.

    Evaluates the simplex-projection jacobian at the propagated initial law and
    applies it to the propagated direction.  Accepts batches: ``entries`` of
    shape (..., d, d) with ``mu``/``v`` of shape (d,) or (..., d).
    """
    x = _apply(entries, mu)
    w = _apply(entries, v)
    total = x.sum(axis=-1, keepdims=True)
    return (w - x / total * w.sum(axis=-1, keepdims=True)) / total


def second_derivative_from_flow(entries, mu, v) -> np.ndarray:
    """Second derivative along (v, v), batched; algebraically contracted form."""
    x = _apply(entries, mu)
    w = _apply(entries, v)
    total = x.sum(axis=-1, keepdims=True)
    w_sum = w.sum(axis=-1, keepdims=True)
    first = (w - x / total * w_sum) / total
    return -2.0 * w_sum * first / total


def smoothing_from_flow(entries, initial) -> np.ndarray:
    """Initial-state posterior given the terminal state, from propagator entries.

    Row j, column i holds the probability that the chain started in j given the
    observations and terminal state i; each column sums to one.
    """
    nu = np.asarray(initial, dtype=float)
    den = _apply(entries, nu)
    swapped = np.swapaxes(entries, -1, -2)
    return swapped * nu[..., :, None] / den[..., None, :]


def derivative_opnorm_from_flow(entries, mu) -> np.ndarray:
    """Operator norm of the filter derivative over unit-l1 zero-sum directions.

    The extreme directions are (e_i - e_j)/2, so the norm is half the largest
    l1 distance between two columns of the projected propagator.  Batched.
    """
    x = _apply(entries, mu)
    total = x.sum(axis=-1, keepdims=True)
    col_sums = entries.sum(axis=-2, keepdims=True)
    cols = (entries - (x / total)[..., :, None] * col_sums) / total[..., None]
    pair_gaps = np.abs(cols[..., :, :, None] - cols[..., :, None, :]).sum(axis=-3)
    return 0.5 * pair_gaps.max(axis=(-1, -2))


def derivative_flow(mu, v, s, t, obs: ObservationPath, generator: GeneratorMatrix,
                    observation: ObservationMap) -> np.ndarray:
    """Directional derivative of the filter restarted at s, evaluated at t (flow route)."""
    mu = validate_simplex(mu)
    v = validate_tangent(v)
    flow = zakai_flow(s, t, obs, generator, observation)
    return derivative_from_flow(flow.entries, mu, v)


def smoothing_matrix(t, obs: ObservationPath, initial, generator: GeneratorMatrix,
                     observation: ObservationMap) -> np.ndarray:
    """Posterior of the initial state given observations up to t and the state at t."""
    nu = validate_simplex(initial)
    flow = zakai_flow(0.0, t, obs, generator, observation)
    return smoothing_from_flow(flow.entries, nu)


def derivative_smoothing_route(initial, v, t, obs: ObservationPath, generator: GeneratorMatrix,
                               observation: ObservationMap) -> np.ndarray:
    """Directional derivative at the true initial law via smoothing probabilities.

    Component i is ``pi_i * sum_jk (v_j/nu_j) pi_k (rho_ji - rho_jk)`` with rho
    the smoothing matrix and pi the filter at t.
    """
    nu = validate_simplex(initial)
    v = validate_tangent(v)
    flow = zakai_flow(0.0, t, obs, generator, observation)
    x = flow.apply(nu)
    pi = x / x.sum()
    rho = smoothing_from_flow(flow.entries, nu)
    weighted = (v / nu) @ rho
    return pi * (weighted - weighted @ pi)


def tilted_filter(mu, t, obs: ObservationPath, initial, generator: GeneratorMatrix,
                  observation: ObservationMap) -> np.ndarray:
    """Filter restarted from mu, reconstructed from true-model smoothing data.

    Uses the likelihood-ratio representation: reweight the joint law of the
    initial and terminal states by mu/nu and renormalize.
    """
    nu = validate_simplex(initial)
    mu = validate_simplex(mu)
    flow = zakai_flow(0.0, t, obs, generator, observation)
    x = flow.apply(nu)
    pi = x / x.sum()
    rho = smoothing_from_flow(flow.entries, nu)
    joint = rho * pi[None, :]
    ratio = mu / nu
    numerator = ratio @ joint
    return numerator / (ratio @ joint.sum(axis=1))


def derivative_bound(mu, v, s, t, generator: GeneratorMatrix) -> float:
    """Almost-sure bound on the l1 size of the filter derivative.

    Sum of |v_k|/mu_k, damped exponentially at the forgetting rate of the
    (mixing) rate matrix the filter runs with.
    """
    mu = validate_simplex(mu)
    v = validate_tangent(v)
    beta = mixing_rate(generator)
    return float((np.abs(v) / mu).sum() * math.exp(-beta * (t - s)))


def lipschitz_bound(mu_1, mu_2, s, t, generator: GeneratorMatrix) -> float:
    """Almost-sure bound on the l1 gap between filters restarted from two laws."""
    mu_1 = validate_simplex(mu_1)
    mu_2 = validate_simplex(mu_2)
    beta = mixing_rate(generator)
    prefactor = float(np.maximum(1.0 / mu_1, 1.0 / mu_2).max())
    return prefactor * float(np.abs(mu_2 - mu_1).sum()) * math.exp(-beta * (t - s))


def second_derivative_flow(mu, v, s, t, obs: ObservationPath, generator: GeneratorMatrix,
                           observation: ObservationMap) -> np.ndarray:
    """Second directional derivative along (v, v) via the flow route.

    Contracts the second-derivative tensor of the simplex projection at the
    propagated law with two copies of the propagated direction.
    """
    mu = validate_simplex(mu)
    v = validate_tangent(v)
    flow = zakai_flow(s, t, obs, generator, observation)
    x = flow.apply(mu)
    w = flow.apply(v)
    tensor = normalize_second_derivative(x)
    return np.einsum("ikl,k,l->i", tensor, w, w)


def second_derivative_gap_bound(mu, v, w, s, t, generator: GeneratorMatrix) -> float:
    """Almost-sure bound on the l1 gap between second derivatives along v and w."""
    mu = validate_simplex(mu)
    v = validate_tangent(v)
    w = validate_tangent(w)
    beta = mixing_rate(generator)
    plus = (np.abs(v + w) / mu).sum()
    minus = (np.abs(v - w) / mu).sum()
    return float(2.0 * plus * minus * math.exp(-beta * (t - s)))


def _endpoint_flows(propagators: np.ndarray) -> np.ndarray:
    """Unit-mass propagators from every grid node to the final node.

    ``propagators`` holds the per-cell maps, shape (..., n, d, d); the result has
    shape (..., n + 1, d, d) with the identity in the last slot.
    """
    lead = propagators.shape[:-3]
    n, d = propagators.shape[-3], propagators.shape[-1]
    out = np.empty(lead + (n + 1, d, d))
    current = np.broadcast_to(np.eye(d), lead + (d, d)).copy()
    out[..., n, :, :] = current
    for k in range(n - 1, -1, -1):
        current = current @ propagators[..., k, :, :]
        current = current / current.sum(axis=(-1, -2), keepdims=True)
        out[..., k, :, :] = current
    return out


def _vector_trajectory_batch(initial, increments, dt, generator, observation) -> np.ndarray:
    """Normalized filter values at every node for a batch of paths, (m, n+1, d)."""
    s_diag, t_off = split_rate_matrix(generator)
    levels = observation.levels
    inc = np.atleast_2d(np.asarray(increments, dtype=float))
    m, n = inc.shape
    d = generator.d
    values = np.empty((m, n + 1, d))
    state = np.broadcast_to(np.asarray(initial, dtype=float), (m, d)).copy()
    values[:, 0] = state
    for k in range(n):
        state = propagate_cell(state, inc[:, k], dt, s_diag, t_off, levels)
        state = state / state.sum(axis=1, keepdims=True)
        values[:, k + 1] = state
    return values


def error_representation_check(t, obs: ObservationPath, pair: ModelPair) -> float:
    """Residual of the exact integral representation of the drift-misspecification error.

    Runs the filter with the perturbed rate matrix (same observation function),
    rebuilds its gap to the correctly specified filter from the time integral of
    the propagated drift mismatch, and returns the l1 difference between the two
    sides.  Trapezoid quadrature on the grid.
    """
    if observation_gap(pair.true_model.observation, pair.approx_model.observation) > 0.0:
        raise ObservationMismatchError("representation requires identical observation functions")
    truth, approx = pair.true_model, pair.approx_model
    grid = obs.grid
    n = grid.node(t)
    inc = obs.increments[None, :n]
    breve = _vector_trajectory_batch(approx.initial, inc, grid.dt, approx.generator,
                                     truth.observation)[0]
    restarted = _vector_trajectory_batch(approx.initial, inc, grid.dt, truth.generator,
                                         truth.observation)[0]
    props = cell_propagators(obs.increments[:n], grid.dt, truth.generator, truth.observation)
    flows = _endpoint_flows(props)
    delta = approx.generator.drift_transpose - truth.generator.drift_transpose
    mismatch = breve @ delta.T
    integrand = derivative_from_flow(flows, breve, mismatch)
    rhs = np.trapezoid(integrand, dx=grid.dt, axis=0)
    lhs = breve[n] - restarted[n]
    return float(np.abs(lhs - rhs).sum())


def _robustness_inequality_batch(increments, dt, pair: ModelPair) -> tuple[np.ndarray, np.ndarray]:
    """Both sides of the integrated error bound for a batch of paths."""
    truth, approx = pair.true_model, pair.approx_model
    levels = truth.observation
    inc = np.atleast_2d(np.asarray(increments, dtype=float))
    true_traj = _vector_trajectory_batch(truth.initial, inc, dt, truth.generator, levels)
    approx_from_mu = _vector_trajectory_batch(approx.initial, inc, dt, approx.generator, levels)
    approx_from_nu = _vector_trajectory_batch(truth.initial, inc, dt, approx.generator, levels)
    props = cell_propagators(inc, dt, approx.generator, levels)
    flows = _endpoint_flows(props)
    opnorms = derivative_opnorm_from_flow(flows, true_traj)
    delta = truth.generator.drift_transpose - approx.generator.drift_transpose
    mismatch_l1 = np.abs(true_traj @ delta.T).sum(axis=-1)
    integral = np.trapezoid(opnorms * mismatch_l1, dx=dt, axis=-1)
    forgetting = np.abs(approx_from_nu[:, -1] - approx_from_mu[:, -1]).sum(axis=-1)
    lhs = np.abs(true_traj[:, -1] - approx_from_mu[:, -1]).sum(axis=-1)
    return lhs, forgetting + integral


def robustness_inequality(t, obs: ObservationPath, pair: ModelPair) -> tuple[float, float]:
    """Realized filter error and its integrated bound on one observation path.

    The bound side adds the forgetting gap between the two perturbed-filter
    starts to the time integral of the derivative operator norm times the l1
    drift mismatch along the correctly filtered trajectory.  Requires identical
    observation functions.
    """
    if observation_gap(pair.true_model.observation, pair.approx_model.observation) > 0.0:
        raise ObservationMismatchError("bound requires identical observation functions")
    n = obs.grid.node(t)
    lhs, rhs = _robustness_inequality_batch(obs.increments[None, :n], obs.grid.dt, pair)
    return float(lhs[0]), float(rhs[0])


@dataclass(frozen=True)
class DerivativeRecord:
    """One evaluated directional derivative, tagged with its route and horizon."""

    direction: np.ndarray
    value: np.ndarray
    route: str
    s: float
    t: float


def derivative_records_to_csv(records, dest) -> None:
    """Write one row per record: horizon, route, direction and value components."""
    records = list(records)
    if not records:
        raise ValueError("no records to export")
    d = records[0].direction.shape[0]
    with open(dest, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["s", "t", "route", *[f"v_{i + 1}" for i in range(d)], *[f"dpi_{i + 1}" for i in range(d)]]
        )
        for rec in records:
            writer.writerow(
                [f"{rec.s:.10g}", f"{rec.t:.10g}", rec.route,
                 *[f"{x:.17g}" for x in rec.direction],
                 *[f"{x:.17g}" for x in rec.value]]
            )
