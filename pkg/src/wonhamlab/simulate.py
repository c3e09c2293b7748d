"""Exact simulation of the hidden chain and of the observation increments.

The chain is simulated event by event (exponential holding times, embedded jump
chain), never discretized, and the observation drift is integrated in closed
form across jump times inside each grid cell.  All randomness flows through
spawned counter-based generators so that runs are reproducible and the signal
and noise streams stay independent.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import AbsorbingStateError, GridMismatchError
from .models import GeneratorMatrix, ObservationMap, validate_simplex

NODE_TOL = 1e-9


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on [0, t_end] with step dt; cells are half-open [t_k, t_{k+1})."""

    t_end: float
    dt: float

    def __post_init__(self):
        if self.dt <= 0.0 or self.t_end <= 0.0:
            raise GridMismatchError("need dt > 0 and t_end > 0")
        n = round(self.t_end / self.dt)
        if n < 1 or abs(n * self.dt - self.t_end) > 1e-12 * max(1.0, self.t_end):
            raise GridMismatchError(f"t_end={self.t_end} is not an integer multiple of dt={self.dt}")

    @property
    def n_steps(self) -> int:
        return round(self.t_end / self.dt)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, self.n_steps + 1)

    def node(self, t: float) -> int:
        """Index of the grid node at time t; raises if t is off the grid."""
        idx = round(t / self.dt)
        if idx < 0 or idx > self.n_steps or abs(idx * self.dt - t) > NODE_TOL:
            raise GridMismatchError(f"t={t} is not a node of the grid (dt={self.dt})")
        return idx

    def refined(self, factor: int = 2) -> "TimeGrid":
        return TimeGrid(self.t_end, self.dt / factor)


@dataclass(frozen=True)
class SignalPath:
    """Piecewise-constant chain trajectory.

    ``states[k]`` holds on ``[segment_starts[k], segment_starts[k+1])``; the last
    segment runs to ``t_end``.  States are 0-based indices.
    """

    segment_starts: np.ndarray
    states: np.ndarray
    t_end: float

    @property
    def initial_state(self) -> int:
        return int(self.states[0])

    @property
    def jump_times(self) -> np.ndarray:
        return self.segment_starts[1:]

    def state_at(self, t) -> np.ndarray:
        idx = np.searchsorted(self.segment_starts, np.asarray(t), side="right") - 1
        return self.states[idx]

    def occupation_times(self, d: int) -> np.ndarray:
        """Total time spent in each of d states."""
        durations = np.diff(np.append(self.segment_starts, self.t_end))
        return np.bincount(self.states, weights=durations, minlength=d)


@dataclass(frozen=True)
class ObservationPath:
    """Increments of the observation process over the cells of a grid."""

    increments: np.ndarray
    grid: TimeGrid

    def __post_init__(self):
        if self.increments.shape != (self.grid.n_steps,):
            raise GridMismatchError(
                f"got {self.increments.shape[0]} increments for {self.grid.n_steps} cells"
            )
        if not np.all(np.isfinite(self.increments)):
            raise GridMismatchError("non-finite observation increment")


def spawn_generators(master_seed: int, n: int) -> list[np.random.Generator]:
    """Split a master seed into n independent counter-based streams."""
    return [np.random.Generator(np.random.Philox(s)) for s in np.random.SeedSequence(master_seed).spawn(n)]


def _as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def simulate_signal(initial, generator: GeneratorMatrix, grid: TimeGrid, seed) -> SignalPath:
    """Sample one chain trajectory on [0, t_end].

    The initial state follows ``initial``; holding times are exponential with the
    state's exit rate and the embedded jump chain follows the normalized
    off-diagonal rates.  Deterministic given the seed.
    """
    nu = validate_simplex(initial, allow_boundary=True)
    rng = _as_generator(seed)
    lam = generator.entries
    d = generator.d
    state = int(rng.choice(d, p=nu))
    t = 0.0
    starts = [0.0]
    states = [state]
    while True:
        exit_rate = -lam[state, state]
        if exit_rate <= 0.0:
            if generator.mixing:
                raise AbsorbingStateError(f"state {state} has zero exit rate in a mixing model")
            break
        t += rng.exponential(1.0 / exit_rate)
        if t >= grid.t_end:
            break
        jump_probs = lam[state].copy()
        jump_probs[state] = 0.0
        jump_probs /= exit_rate
        state = int(rng.choice(d, p=jump_probs))
        starts.append(t)
        states.append(state)
    return SignalPath(
        segment_starts=np.asarray(starts),
        states=np.asarray(states, dtype=np.int64),
        t_end=grid.t_end,
    )


def integrated_drift(path: SignalPath, observation: ObservationMap, grid: TimeGrid) -> np.ndarray:
    """Exact integral of the observation level over each grid cell.

    The running integral is piecewise linear with breakpoints at the jump times,
    so linear interpolation of its breakpoint values is exact.
    """
    if path.t_end < grid.t_end - NODE_TOL:
        raise GridMismatchError("signal path does not cover the grid horizon")
    breaks = np.append(path.segment_starts, path.t_end)
    cumulative = np.zeros(breaks.shape[0])
    cumulative[1:] = np.cumsum(observation.levels[path.states] * np.diff(breaks))
    return np.diff(np.interp(grid.times, breaks, cumulative))


def simulate_observations(
    path: SignalPath, observation: ObservationMap, grid: TimeGrid, seed
) -> ObservationPath:
    """Observation increments: exact drift per cell plus independent Gaussian noise."""
    rng = _as_generator(seed)
    drift = integrated_drift(path, observation, grid)
    noise = np.sqrt(grid.dt) * rng.standard_normal(grid.n_steps)
    return ObservationPath(increments=drift + noise, grid=grid)


def simulate_increments_batch(
    initial,
    generator: GeneratorMatrix,
    observation: ObservationMap,
    grid: TimeGrid,
    master_seed: int,
    n_trials: int,
) -> np.ndarray:
    """Observation increments for n_trials independent paths, shape (n_trials, n_steps).

    Trial i draws its signal and noise streams from the i-th spawn of the master
    seed, so the batch is reproducible and independent of batch size splits.
    """
    out = np.empty((n_trials, grid.n_steps))
    for i, child in enumerate(np.random.SeedSequence(master_seed).spawn(n_trials)):
        sig_seed, noise_seed = child.spawn(2)
        path = simulate_signal(initial, generator, grid, np.random.Generator(np.random.Philox(sig_seed)))
        obs = simulate_observations(path, observation, grid, np.random.Generator(np.random.Philox(noise_seed)))
        out[i] = obs.increments
    return out


def export_path_csv(path: SignalPath, obs: ObservationPath, dest) -> None:
    """Write one (t, state, dY) row per grid cell; t is the left cell edge."""
    grid = obs.grid
    t_left = grid.times[:-1]
    states = path.state_at(t_left)
    with open(dest, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "state", "dY"])
        for t, s, dy in zip(t_left, states, obs.increments):
            writer.writerow([f"{t:.10g}", int(s), f"{dy:.17g}"])
