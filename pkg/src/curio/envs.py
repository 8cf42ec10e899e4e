"""Small deterministic environments with a uniform reset/step/spec contract."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import typesys as ts

DISTINCT_CELLS = "distinct_cells"
MEAN_EPISODE_REWARD = "mean_episode_reward"


@dataclass(frozen=True)
class EnvSpec:
    env_id: str
    binding: ts.EnvTypeBinding
    lifetime: int
    episode_cap: int
    objective: str
    rollouts: int = 5

    def __post_init__(self):
        if self.lifetime % self.episode_cap:
            raise ValueError(f"lifetime {self.lifetime} is not a multiple of the episode cap")
        if self.objective not in (DISTINCT_CELLS, MEAN_EPISODE_REWARD):
            raise ValueError(f"unknown objective {self.objective!r}")


class Env:
    spec_defaults: EnvSpec

    def spec(self) -> EnvSpec:
        return self.spec_defaults

    def reset(self, seed=None) -> np.ndarray:
        raise NotImplementedError

    def step(self, action):
        raise NotImplementedError

    def _check_discrete(self, action, n):
        a = int(action)
        if a != action or not 0 <= a < n:
            raise ValueError(f"action {action!r} outside Discrete({n})")
        return a


# ---------------------------------------------------------------------------
# GridRoom

NORTH, EAST, SOUTH, WEST = range(4)
_HEADING = {NORTH: (0, -1), EAST: (1, 0), SOUTH: (0, 1), WEST: (-1, 0)}
LEFT, RIGHT, FORWARD = range(3)


class GridRoom(Env):
    """10x10 room with boundary walls; turn left, turn right or step forward."""

    size = 10

    def __init__(self, episode_cap: int = 500, lifetime: int = 2500):
        self.spec_defaults = EnvSpec("gridroom", ts.image_binding(4, self.size, self.size, 3),
                                     lifetime, episode_cap, DISTINCT_CELLS)
        self.walls = np.zeros((self.size, self.size))
        self.walls[0, :] = self.walls[-1, :] = self.walls[:, 0] = self.walls[:, -1] = 1.0
        self.rng = np.random.default_rng(0)
        self.pos = (1, 1)
        self.heading = NORTH
        self.t = 0
        self.visited = set()

    def is_wall(self, x, y) -> bool:
        return bool(self.walls[y, x])

    def reset(self, seed=None) -> np.ndarray:
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        x, y = self.rng.integers(1, self.size - 1, size=2)
        self.pos = (int(x), int(y))
        self.heading = int(self.rng.integers(0, 4))
        self.t = 0
        self.visited = {self.pos}
        return self.observe()

    def place(self, x, y, heading):
        if self.is_wall(x, y):
            raise ValueError(f"cell ({x}, {y}) is a wall")
        self.pos, self.heading, self.t, self.visited = (x, y), heading, 0, {(x, y)}

    def observe(self) -> np.ndarray:
        obs = np.zeros((4, self.size, self.size))
        obs[0] = self.walls
        x, y = self.pos
        obs[1, y, x] = 1.0
        angle = self.heading * np.pi / 2
        obs[2, y, x] = np.sin(angle)
        obs[3, y, x] = np.cos(angle)
        return obs

    def step(self, action):
        a = self._check_discrete(action, 3)
        if a == LEFT:
            self.heading = (self.heading - 1) % 4
        elif a == RIGHT:
            self.heading = (self.heading + 1) % 4
        else:
            dx, dy = _HEADING[self.heading]
            nx, ny = self.pos[0] + dx, self.pos[1] + dy
            if not self.is_wall(nx, ny):
                self.pos = (nx, ny)
        self.visited.add(self.pos)
        self.t += 1
        done = self.t >= self.spec_defaults.episode_cap
        return self.observe(), 0.0, done


def distinct_cells_metric(episodes) -> int:
    """Sum over episodes of the number of distinct cells each one visited."""
    return int(sum(len(set(map(tuple, cells))) for cells in episodes))


# ---------------------------------------------------------------------------
# SparsePointMaze

MAZE_LAYOUT = (
    "############",
    "#S...#.....#",
    "#.##.#.###.#",
    "#.#..#...#.#",
    "#.#.####.#.#",
    "#.#......#.#",
    "#.######.#.#",
    "#......#.#.#",
    "######.#.#.#",
    "#......#.#.#",
    "#.######...G",
    "############",
)
MAZE_MOVES = {0: (0, -1), 1: (1, 0), 2: (0, 1), 3: (-1, 0)}


class SparsePointMaze(Env):
    """Corridor maze on a 12x12 grid; reward 1 on reaching the goal cell."""

    def __init__(self, episode_cap: int = 500, lifetime: int = 10000, layout=MAZE_LAYOUT):
        self.layout = [list(row) for row in layout]
        self.height, self.width = len(layout), len(layout[0])
        self.spec_defaults = EnvSpec("pointmaze", ts.vector_binding(dim=2, actions=4),
                                     lifetime, episode_cap, MEAN_EPISODE_REWARD)
        for y, row in enumerate(layout):
            for x, ch in enumerate(row):
                if ch == "S":
                    self.start = (x, y)
                elif ch == "G":
                    self.goal = (x, y)
        self.pos = self.start
        self.t = 0

    def is_wall(self, x, y) -> bool:
        if not (0 <= x < self.width and 0 <= y < self.height):
            return True
        return self.layout[y][x] == "#"

    def observe(self) -> np.ndarray:
        return np.array([self.pos[0] / (self.width - 1), self.pos[1] / (self.height - 1)])

    def reset(self, seed=None) -> np.ndarray:
        self.pos = self.start
        self.t = 0
        return self.observe()

    def step(self, action):
        a = self._check_discrete(action, 4)
        dx, dy = MAZE_MOVES[a]
        nx, ny = self.pos[0] + dx, self.pos[1] + dy
        if not self.is_wall(nx, ny):
            self.pos = (nx, ny)
        self.t += 1
        if self.pos == self.goal:
            return self.observe(), 1.0, True
        return self.observe(), 0.0, self.t >= self.spec_defaults.episode_cap


# ---------------------------------------------------------------------------
# ContinuousPointMass


class ContinuousPointMass(Env):
    """Point mass in [-1, 1]^2 driven by thrust in [-1, 1]^2."""

    dt = 0.1
    drag = 0.05
    goal_radius = 0.1

    def __init__(self, episode_cap: int = 500, lifetime: int = 10000):
        self.spec_defaults = EnvSpec("pointmass", ts.vector_binding(dim=4, actions=2, continuous=True),
                                     lifetime, episode_cap, MEAN_EPISODE_REWARD)
        self.goal = np.array([0.7, 0.7])
        self.rng = np.random.default_rng(0)
        self.state = np.zeros(4)
        self.t = 0

    def reset(self, seed=None) -> np.ndarray:
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        pos = np.array([-0.7, -0.7]) + self.rng.uniform(-0.05, 0.05, size=2)
        self.state = np.concatenate([pos, np.zeros(2)])
        self.t = 0
        return self.state.copy()

    def step(self, action):
        a = np.asarray(action, dtype=np.float64).reshape(-1)
        if a.shape != (2,) or not np.all(np.isfinite(a)) or np.any(np.abs(a) > 1.0 + 1e-12):
            raise ValueError(f"thrust {action!r} outside [-1, 1]^2")
        pos, vel = self.state[:2], self.state[2:]
        vel = vel + (a - self.drag * vel) * self.dt
        pos = pos + vel * self.dt
        hit = np.abs(pos) > 1.0
        pos = np.clip(pos, -1.0, 1.0)
        vel = np.where(hit, 0.0, vel)
        self.state = np.concatenate([pos, vel])
        self.t += 1
        if np.linalg.norm(pos - self.goal) <= self.goal_radius:
            return self.state.copy(), 1.0, True
        return self.state.copy(), 0.0, self.t >= self.spec_defaults.episode_cap


# ---------------------------------------------------------------------------
# two-armed bandit used to sanity-check the agent


class TwoArmedBandit(Env):
    def __init__(self, rewards=(0.0, 1.0), lifetime: int = 6400):
        self.rewards = tuple(rewards)
        self.spec_defaults = EnvSpec("bandit", ts.vector_binding(dim=1, actions=2),
                                     lifetime, 1, MEAN_EPISODE_REWARD)

    def reset(self, seed=None) -> np.ndarray:
        return np.ones(1)

    def step(self, action):
        a = self._check_discrete(action, 2)
        return np.ones(1), self.rewards[a], True


ENVIRONMENTS = {
    "gridroom": GridRoom,
    "pointmaze": SparsePointMaze,
    "pointmass": ContinuousPointMass,
    "bandit": TwoArmedBandit,
}


def make_env(env_id: str, **kwargs) -> Env:
    try:
        return ENVIRONMENTS[env_id](**kwargs)
    except KeyError:
        raise ValueError(f"unknown environment {env_id!r}; choose from {sorted(ENVIRONMENTS)}") from None
