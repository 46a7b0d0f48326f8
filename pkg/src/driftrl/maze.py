"""Continuous pointmass maze and the non-stationary observation wrapper.

Training happens in the plain maze MDP; at test time every episode (or every
f-step segment) gets its own additive observation offset on the masked state
dimensions, driven by a normalized time series. Transitions and rewards never
change — only what the agent sees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .numkit import Rng

STATE_DIM = 4
ACTION_DIM = 2
DEFAULT_MASK = (0, 1)


@dataclass
class SimState:
    pos: np.ndarray
    vel: np.ndarray

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.pos, self.vel])


class Maze:
    """ASCII wall grid with pointmass dynamics constants.

    '#' is wall, '.' free, 'G' the goal cell. Cell (row, col) spans
    [col, col+1] x [row, row+1]; positions are (x, y) with y growing
    downward, matching row order in the file.
    """

    def __init__(
        self,
        text: str,
        agent_radius: float = 0.15,
        goal_radius: float = 0.5,
        damping: float = 0.9,
        gain: float = 0.15,
        v_max: float = 0.5,
        t_max: int = 200,
    ):
        rows = [line for line in text.strip("\n").splitlines() if line]
        if not rows or len(set(map(len, rows))) != 1:
            raise ValueError("maze rows must be nonempty and equal length")
        self.n_rows = len(rows)
        self.n_cols = len(rows[0])
        self.walls = np.zeros((self.n_rows, self.n_cols), dtype=bool)
        goal = None
        for r, line in enumerate(rows):
            for c, ch in enumerate(line):
                if ch == "#":
                    self.walls[r, c] = True
                elif ch == "G":
                    goal = np.array([c + 0.5, r + 0.5])
                elif ch != ".":
                    raise ValueError(f"unknown maze character {ch!r}")
        if goal is None:
            raise ValueError("maze has no goal cell")
        if not (self.walls[0].all() and self.walls[-1].all()
                and self.walls[:, 0].all() and self.walls[:, -1].all()):
            raise ValueError("maze boundary must be solid wall")
        if self.walls.all():
            raise ValueError("maze has no free space")
        self.goal = goal
        self.agent_radius = agent_radius
        self.goal_radius = goal_radius
        self.damping = damping
        self.gain = gain
        self.v_max = v_max
        self.t_max = t_max
        self._dist_fields: dict[tuple[int, int], np.ndarray] = {}

    @classmethod
    def from_file(cls, path: str, **kwargs) -> "Maze":
        with open(path) as fh:
            return cls(fh.read(), **kwargs)

    def is_wall_cell(self, row: int, col: int) -> bool:
        if not (0 <= row < self.n_rows and 0 <= col < self.n_cols):
            return True
        return bool(self.walls[row, col])

    def collides(self, pos: np.ndarray) -> bool:
        """Disc of agent_radius at pos overlaps a wall cell (or leaves the grid)."""
        x, y = float(pos[0]), float(pos[1])
        r = self.agent_radius
        if not (r <= x <= self.n_cols - r and r <= y <= self.n_rows - r):
            return True
        for row in range(int(math.floor(y - r)), int(math.floor(y + r)) + 1):
            for col in range(int(math.floor(x - r)), int(math.floor(x + r)) + 1):
                if self.is_wall_cell(row, col):
                    nx = min(max(x, col), col + 1.0)
                    ny = min(max(y, row), row + 1.0)
                    if (x - nx) ** 2 + (y - ny) ** 2 < r * r:
                        return True
        return False

    def free_cells(self) -> list[tuple[int, int]]:
        return [(r, c) for r in range(self.n_rows) for c in range(self.n_cols)
                if not self.walls[r, c]]

    def cell_of(self, pos: np.ndarray) -> tuple[int, int]:
        col = min(max(int(pos[0]), 0), self.n_cols - 1)
        row = min(max(int(pos[1]), 0), self.n_rows - 1)
        return row, col

    def distance_field(self, target_cell: tuple[int, int]) -> np.ndarray:
        """BFS hop counts to target over free cells; unreachable = inf. Cached."""
        field = self._dist_fields.get(target_cell)
        if field is not None:
            return field
        dist = np.full((self.n_rows, self.n_cols), np.inf)
        if not self.walls[target_cell]:
            from collections import deque
            dist[target_cell] = 0
            queue = deque([target_cell])
            while queue:
                r, c = queue.popleft()
                for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                    nr, nc = r + dr, c + dc
                    if 0 <= nr < self.n_rows and 0 <= nc < self.n_cols \
                            and not self.walls[nr, nc] and not np.isfinite(dist[nr, nc]):
                        dist[nr, nc] = dist[r, c] + 1
                        queue.append((nr, nc))
        self._dist_fields[target_cell] = dist
        return dist

    def state_ranges(self) -> np.ndarray:
        """Extent of each state dimension, used to scale offset series."""
        free = self.free_cells()
        rows = [r for r, _ in free]
        cols = [c for _, c in free]
        x_range = (max(cols) + 1) - min(cols)
        y_range = (max(rows) + 1) - min(rows)
        return np.array([x_range, y_range, 2 * self.v_max, 2 * self.v_max], dtype=float)


def reset(maze: Maze, rng: Rng) -> SimState:
    """Uniform start over the continuous free space, zero velocity."""
    for _ in range(100_000):
        pos = np.array([
            rng.uniform(0.0, maze.n_cols),
            rng.uniform(0.0, maze.n_rows),
        ])
        if not maze.collides(pos):
            return SimState(pos, np.zeros(2))
    raise RuntimeError("could not sample a free start position")


def step(maze: Maze, state: SimState, action: np.ndarray) -> tuple[SimState, float, bool]:
    """Damped force dynamics with axis-separated wall collision."""
    if maze.collides(state.pos):
        raise ValueError("state position is inside a wall")
    a = np.clip(np.asarray(action, dtype=float), -1.0, 1.0)
    vel = np.clip(maze.damping * state.vel + maze.gain * a, -maze.v_max, maze.v_max)
    pos = state.pos.copy()
    for axis in (0, 1):
        trial = pos.copy()
        trial[axis] += vel[axis]
        if maze.collides(trial):
            vel[axis] = 0.0
        else:
            pos = trial
    new_state = SimState(pos, vel)
    reached = float(np.linalg.norm(pos - maze.goal)) < maze.goal_radius
    return new_state, (1.0 if reached else 0.0), reached


@dataclass
class OffsetSchedule:
    """Per-interval additive offsets on the masked observation dimensions.

    `base` holds the unscaled offset vectors (one row per interval); the
    final offset is alpha_scale * base. In per-episode mode an interval is an
    episode; in intra-episode mode an episode splits into ceil(t_max / f)
    segments, each with its own row.
    """

    base: np.ndarray  # (n_intervals, STATE_DIM)
    mask: tuple[int, ...] = DEFAULT_MASK
    mode: str = "per-episode"
    alpha_scale: float = 1.0
    f: int = 50
    intervals_per_episode: int = 1

    def __post_init__(self):
        if self.mode not in ("per-episode", "intra-episode"):
            raise ValueError(f"unknown schedule mode {self.mode!r}")
        unmasked = [d for d in range(self.base.shape[1]) if d not in self.mask]
        if unmasked and np.any(self.base[:, unmasked] != 0.0):
            raise ValueError("offsets must be zero outside the masked dimensions")

    @property
    def n_episodes(self) -> int:
        return self.base.shape[0] // self.intervals_per_episode

    def interval_index(self, episode: int, t: int) -> int:
        if self.mode == "intra-episode":
            seg = min(t // self.f, self.intervals_per_episode - 1)
        else:
            seg = 0
        u = episode * self.intervals_per_episode + seg
        if not 0 <= u < self.base.shape[0]:
            raise IndexError("offset schedule exhausted")
        return u

    def offset_at(self, episode: int, t: int) -> np.ndarray:
        return self.alpha_scale * self.base[self.interval_index(episode, t)]

    def to_csv(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write("episode,segment,dim,offset\n")
            for u in range(self.base.shape[0]):
                ep, seg = divmod(u, self.intervals_per_episode)
                for d in self.mask:
                    fh.write(f"{ep},{seg},{d},{float(self.alpha_scale * self.base[u, d])!r}\n")


def observe(state: SimState, schedule: OffsetSchedule | None, episode: int, t: int) -> np.ndarray:
    s = state.as_vector()
    if schedule is None:
        return s
    return s + schedule.offset_at(episode, t)


def affine_observe(
    state: SimState | np.ndarray,
    scale_value: float,
    bias: np.ndarray,
    mask: tuple[int, ...] = DEFAULT_MASK,
) -> np.ndarray:
    """Isotropic scaling plus bias on the masked dims; others pass through."""
    if scale_value <= 0.0:
        raise ValueError("scale value must be positive")
    s = state.as_vector() if isinstance(state, SimState) else np.asarray(state, dtype=float)
    o = s.copy()
    for d in mask:
        o[d] = scale_value * s[d] + bias[d]
    return o


def build_offset_schedule(
    series_values: list[np.ndarray],
    alpha_scale: float,
    mode: str,
    episodes: int,
    ranges: np.ndarray,
    mask: tuple[int, ...] = DEFAULT_MASK,
    f: int = 50,
    t_max: int = 200,
    start: int = 0,
) -> OffsetSchedule:
    """Turn one normalized series per masked dim into an offset schedule.

    Row u of the result is range_d * series_d[start + u] on each masked dim d.
    `start` lets the caller reserve a prefix of the series as forecaster
    context.
    """
    if len(series_values) != len(mask):
        raise ValueError("need exactly one series per masked dimension")
    ipe = max(1, -(-t_max // f)) if mode == "intra-episode" else 1
    total = episodes * ipe
    for vals in series_values:
        if len(vals) < start + total:
            raise ValueError(
                f"series of length {len(vals)} too short for {total} intervals"
            )
    base = np.zeros((total, STATE_DIM))
    for d, vals in zip(mask, series_values):
        base[:, d] = ranges[d] * np.asarray(vals, dtype=float)[start:start + total]
    return OffsetSchedule(base, tuple(mask), mode, alpha_scale, f, ipe)
