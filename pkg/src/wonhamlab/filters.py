"""Filter integrators: the conditional-distribution recursion, its linear
unnormalized propagator, and the gauge-transformed reference integrator.

The reference route rewrites the linear unnormalized equation as a random ODE
with an entrywise-nonnegative coefficient matrix (diagonal gauge change), which
keeps every iterate strictly positive by construction.  Each grid cell is solved
with one classical RK4 step, holding the observation path piecewise linear
inside the cell.  An explicit Euler step of the nonlinear equation is provided
as a diagnostic-only alternative route.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    GridMismatchError,
    IllConditionedWarning,
    NonPositiveEntryError,
    StateCollapseError,
)
from .models import GeneratorMatrix, ObservationMap, validate_simplex
from .simulate import ObservationPath, TimeGrid

EULER_FLOOR = 1e-14
CONDITION_THRESHOLD = 1e12


def normalize(x) -> np.ndarray:
    """Project a strictly positive vector onto the simplex, x / sum(x).

    Rescales by the largest entry first so that subnormal inputs survive.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 0.0) or not np.all(np.isfinite(arr)):
        raise NonPositiveEntryError("normalize needs strictly positive finite entries")
    arr = arr / arr.max()
    return arr / arr.sum()


def normalize_jacobian(x) -> np.ndarray:
    """Derivative matrix of the simplex projection at x.

    Entry (i, j) is (delta_ij - (x/sum x)_i) / sum(x); annihilates x itself and
    scales like 1/alpha under x -> alpha x.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 0.0):
        raise NonPositiveEntryError("jacobian needs strictly positive entries")
    total = arr.sum()
    return (np.eye(arr.shape[0]) - np.outer(arr / total, np.ones(arr.shape[0]))) / total


def normalize_second_derivative(x) -> np.ndarray:
    """Second-derivative tensor of the simplex projection at x.

    Component (i, k, l) equals -(J_ik + J_il) / sum(x) where J is the first
    derivative matrix; scales like 1/alpha^2 under x -> alpha x.
    """
    arr = np.asarray(x, dtype=float)
    jac = normalize_jacobian(arr)
    return -(jac[:, :, None] + jac[:, None, :]) / arr.sum()


def split_rate_matrix(generator: GeneratorMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal part and nonnegative off-diagonal part of the forward drift matrix."""
    s_diag = np.diag(generator.entries).copy()
    t_off = generator.entries.T.copy()
    np.fill_diagonal(t_off, 0.0)
    return s_diag, t_off


def _gauge_exponents(d_y, dt: float, s_diag: np.ndarray, levels: np.ndarray) -> np.ndarray:
    # Per-state exponent rate of the diagonal gauge over one cell, with the
    # observation path interpolated linearly inside the cell.
    slope = np.asarray(d_y, dtype=float)[..., None] / dt
    return 0.5 * levels**2 - s_diag - levels * slope


def propagate_cell(values, d_y, dt, s_diag, t_off, levels) -> np.ndarray:
    """Advance unnormalized filter vectors across one grid cell (RK4 on the gauge ODE).

    ``values`` has shape (..., d) and ``d_y`` broadcasts over the leading axes.
    The image is entrywise positive whenever the input is.
    """
    c = _gauge_exponents(d_y, dt, s_diag, levels)
    e_half = np.exp(c * (0.5 * dt))
    e_full = np.exp(c * dt)

    def coeff(f, e):
        return e * np.einsum("ij,...j->...i", t_off, f / e)

    k1 = np.einsum("ij,...j->...i", t_off, values)
    k2 = coeff(values + (0.5 * dt) * k1, e_half)
    k3 = coeff(values + (0.5 * dt) * k2, e_half)
    k4 = coeff(values + dt * k3, e_full)
    return (values + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)) / e_full


def propagate_cell_matrix(matrices, d_y, dt, s_diag, t_off, levels) -> np.ndarray:
    """Advance propagator matrices (..., d, d) across one grid cell, column-wise."""
    c = _gauge_exponents(d_y, dt, s_diag, levels)[..., :, None]
    e_half = np.exp(c * (0.5 * dt))
    e_full = np.exp(c * dt)

    def coeff(f, e):
        return e * np.einsum("ij,...jk->...ik", t_off, f / e)

    k1 = np.einsum("ij,...jk->...ik", t_off, matrices)
    k2 = coeff(matrices + (0.5 * dt) * k1, e_half)
    k3 = coeff(matrices + (0.5 * dt) * k2, e_half)
    k4 = coeff(matrices + dt * k3, e_full)
    return (matrices + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)) / e_full


def cell_propagators(increments, dt, generator: GeneratorMatrix, observation: ObservationMap) -> np.ndarray:
    """Exact per-cell linear maps of the discretized unnormalized flow.

    For increments of shape (..., n) returns maps of shape (..., n, d, d); the
    product over a cell range reproduces the propagator over that range.
    """
    s_diag, t_off = split_rate_matrix(generator)
    levels = observation.levels
    inc = np.asarray(increments, dtype=float)
    n = inc.shape[-1]
    d = generator.d
    eye = np.broadcast_to(np.eye(d), inc.shape[:-1] + (d, d))
    out = np.empty(inc.shape[:-1] + (n, d, d))
    for k in range(n):
        out[..., k, :, :] = propagate_cell_matrix(eye, inc[..., k], dt, s_diag, t_off, levels)
    return out


def gauge_filter(mu, s, t, obs: ObservationPath, generator: GeneratorMatrix,
                 observation: ObservationMap) -> tuple[np.ndarray, float]:
    """Unnormalized filter over the node range [s, t] started from mu.

    Returns a unit-l1 positive vector together with a log scale; the actual
    unnormalized value is exp(log_scale) times the vector.  Linear in mu, so
    scaling mu scales the result.
    """
    arr = np.asarray(mu, dtype=float)
    if np.any(arr <= 0.0):
        raise NonPositiveEntryError("gauge filter needs a strictly positive start")
    grid = obs.grid
    i0, i1 = grid.node(s), grid.node(t)
    if i1 < i0:
        raise GridMismatchError("need s <= t")
    s_diag, t_off = split_rate_matrix(generator)
    levels = observation.levels
    total = arr.sum()
    rho = arr / total
    log_scale = math.log(total)
    for k in range(i0, i1):
        rho = propagate_cell(rho, obs.increments[k], grid.dt, s_diag, t_off, levels)
        total = rho.sum()
        rho = rho / total
        log_scale += math.log(total)
    return rho, log_scale


def filter_semiflow(mu, s, t, obs: ObservationPath, generator: GeneratorMatrix,
                    observation: ObservationMap) -> np.ndarray:
    """Conditional distribution at t of the filter restarted from mu at s."""
    rho, _ = gauge_filter(mu, s, t, obs, generator, observation)
    return rho


@dataclass(frozen=True)
class FilterTrajectory:
    """Filter values at every grid node, with the accumulated log mass of the
    unnormalized solution stored separately."""

    grid: TimeGrid
    values: np.ndarray
    log_scale: np.ndarray
    tag: str
    initial: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def at(self, t: float) -> np.ndarray:
        return self.values[self.grid.node(t)]


def filter_trajectory(initial, generator: GeneratorMatrix, observation: ObservationMap,
                      obs: ObservationPath, tag: str = "true") -> FilterTrajectory:
    """Run the reference integrator over the whole grid from the given initial law."""
    pi0 = validate_simplex(initial)
    grid = obs.grid
    s_diag, t_off = split_rate_matrix(generator)
    levels = observation.levels
    n = grid.n_steps
    values = np.empty((n + 1, generator.d))
    log_scale = np.empty(n + 1)
    values[0] = pi0
    log_scale[0] = 0.0
    rho = np.array(pi0)
    for k in range(n):
        rho = propagate_cell(rho, obs.increments[k], grid.dt, s_diag, t_off, levels)
        total = rho.sum()
        rho = rho / total
        values[k + 1] = rho
        log_scale[k + 1] = log_scale[k] + math.log(total)
    return FilterTrajectory(grid=grid, values=values, log_scale=log_scale, tag=tag, initial=pi0)


def wonham_step(pi, d_y: float, dt: float, generator: GeneratorMatrix,
                observation: ObservationMap, floor: float = EULER_FLOOR) -> np.ndarray:
    """One explicit Euler step of the nonlinear filter equation, then projection.

    Diagnostic route only; components are clipped at ``floor`` and renormalized.
    A post-step component below -0.5 signals gross instability (dt too large).
    """
    pi = np.asarray(pi, dtype=float)
    levels = observation.levels
    m = float(levels @ pi)
    step = pi + generator.drift_transpose @ pi * dt + pi * (levels - m) * (d_y - m * dt)
    if np.any(step < -0.5):
        raise StateCollapseError(f"Euler step produced component {step.min():.3f}; reduce dt")
    step = np.clip(step, floor, None)
    return step / step.sum()


def euler_filter_trajectory(initial, generator: GeneratorMatrix, observation: ObservationMap,
                            obs: ObservationPath, floor: float = EULER_FLOOR) -> np.ndarray:
    """Euler diagnostic route over the whole grid; returns values at every node."""
    pi = validate_simplex(initial)
    grid = obs.grid
    values = np.empty((grid.n_steps + 1, generator.d))
    values[0] = pi
    pi = np.array(pi)
    for k in range(grid.n_steps):
        pi = wonham_step(pi, obs.increments[k], grid.dt, generator, observation, floor)
        values[k + 1] = pi
    return values


@dataclass(frozen=True)
class FlowMatrix:
    """Propagator of the unnormalized filter over a node range.

    ``entries`` is the nonnegative matrix rescaled to unit total mass;
    ``exp(log_scale) * entries`` recovers the actual propagator.
    """

    entries: np.ndarray
    log_scale: float
    s: float
    t: float

    @property
    def d(self) -> int:
        return self.entries.shape[0]

    def dense(self) -> np.ndarray:
        return math.exp(self.log_scale) * self.entries

    def apply(self, vec) -> np.ndarray:
        """Image of a vector under the scaled entries (log mass dropped)."""
        return self.entries @ np.asarray(vec, dtype=float)


def zakai_flow(s, t, obs: ObservationPath, generator: GeneratorMatrix,
               observation: ObservationMap,
               condition_threshold: float = CONDITION_THRESHOLD) -> FlowMatrix:
    """Propagator over [s, t], integrated column-wise by the gauge method.

    Entries stay nonnegative; the identity is returned exactly when s == t.
    Emits IllConditionedWarning when the condition number passes the threshold.
    """
    grid = obs.grid
    i0, i1 = grid.node(s), grid.node(t)
    if i1 < i0:
        raise GridMismatchError("need s <= t")
    s_diag, t_off = split_rate_matrix(generator)
    levels = observation.levels
    u = np.eye(generator.d)
    log_scale = 0.0
    for k in range(i0, i1):
        u = propagate_cell_matrix(u, obs.increments[k], grid.dt, s_diag, t_off, levels)
        total = u.sum()
        u = u / total
        log_scale += math.log(total)
    if i1 > i0:
        cond = float(np.linalg.cond(u))
        if cond > condition_threshold:
            warnings.warn(
                f"propagator over [{s}, {t}] has condition number {cond:.3e}",
                IllConditionedWarning,
                stacklevel=2,
            )
    return FlowMatrix(entries=u, log_scale=log_scale, s=float(s), t=float(t))


def compose_flows(later: FlowMatrix, earlier: FlowMatrix) -> FlowMatrix:
    """Chain two propagators; spans must abut."""
    if abs(later.s - earlier.t) > 1e-9:
        raise GridMismatchError("flow spans do not abut")
    product = later.entries @ earlier.entries
    total = product.sum()
    return FlowMatrix(
        entries=product / total,
        log_scale=later.log_scale + earlier.log_scale + math.log(total),
        s=earlier.s,
        t=later.t,
    )


def zakai_flow_inverse(s, t, obs: ObservationPath, generator: GeneratorMatrix,
                       observation: ObservationMap) -> tuple[np.ndarray, float]:
    """Inverse propagator over [s, t], diagnostic route.

    Integrates the transposed inverse equation (drift ``H^2 - Lambda``, noise
    coefficient ``-H``) with the same per-cell gauge scheme, so the product with
    the forward propagator should recover the identity up to integrator error.
    Returns (unit-mass matrix, log scale); entries may be signed.
    """
    grid = obs.grid
    i0, i1 = grid.node(s), grid.node(t)
    if i1 < i0:
        raise GridMismatchError("need s <= t")
    levels = observation.levels
    drift = np.diag(levels**2) - generator.entries
    s_diag = np.diag(drift).copy()
    t_off = drift.copy()
    np.fill_diagonal(t_off, 0.0)
    z = np.eye(generator.d)
    log_scale = 0.0
    for k in range(i0, i1):
        z = propagate_cell_matrix(z, obs.increments[k], grid.dt, s_diag, t_off, -levels)
        total = np.abs(z).sum()
        z = z / total
        log_scale += math.log(total)
    return z.T, log_scale


def export_trajectory_csv(traj: FilterTrajectory, dest) -> None:
    """Write (t, pi_1..pi_d, log_scale) rows for every grid node."""
    d = traj.values.shape[1]
    with open(dest, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", *[f"pi_{i + 1}" for i in range(d)], "log_scale"])
        for t, row, ls in zip(traj.times, traj.values, traj.log_scale):
            writer.writerow([f"{t:.10g}", *[f"{x:.17g}" for x in row], f"{ls:.17g}"])
