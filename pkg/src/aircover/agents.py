"""Per-UAV tabular Q-learning over lattice workspaces.

Each agent owns a sparse Q-table keyed by its lattice cell, picks one of
seven motion actions epsilon-greedily, and is rewarded by how much of its
member set it serves after simultaneous moves are collision-resolved.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np
from sklearn.base import BaseEstimator

from .clustering import Assignment, Workspace
from .propagation import ChannelParams, link_budget, two_ray_rx_power_w
from .scenario import Scene, Tbs, UserEquipment, distance


class Action(IntEnum):
    """Motion actions. Axis convention: front/back move +y/-y, right/left
    move +x/-x, higher/lower move +z/-z, hover stays."""

    FRONT = 0
    BACK = 1
    LEFT = 2
    RIGHT = 3
    HIGHER = 4
    LOWER = 5
    HOVER = 6


N_ACTIONS = 7

_DELTAS = (
    (0, 1, 0),
    (0, -1, 0),
    (-1, 0, 0),
    (1, 0, 0),
    (0, 0, 1),
    (0, 0, -1),
    (0, 0, 0),
)


@dataclass
class AgentHyperparams:
    """Learning constants shared by every agent."""

    lr: float = 0.5
    gamma: float = 0.9
    epsilon: float = 0.9
    decay: float = 0.999
    epsilon_min: float = 0.01
    battery: int = 300
    rate_threshold_bps: float = 0.1e6
    decay_per_step: bool = False


class QTable:
    """Sparse action-value table over lattice cells.

    Rows exist only for states that have been written to; reads of unknown
    states see zeros without allocating. Values live in one growable pool to
    keep per-state overhead low. Passing the agent's workspace switches to
    compact workspace-local keys, which keeps the key integers small when
    tables grow into the millions of states.
    """

    _SPAN = 1 << 21
    _OFFSET = 1 << 20

    def __init__(self, workspace: Workspace | None = None):
        self._index: dict[int, int] = {}
        self._pool = np.zeros((128, N_ACTIONS), dtype=np.float64)
        self._n = 0
        self._zero = np.zeros(N_ACTIONS, dtype=np.float64)
        self._ws = workspace
        if workspace is None:
            self._origin = None
        else:
            w = workspace.x1 - workspace.x0 + 1
            h = workspace.y1 - workspace.y0 + 1
            self._origin = (workspace.x0, workspace.y0, workspace.z0, w, w * h)

    def _key(self, state: tuple[int, int, int]) -> int:
        x, y, z = state
        o = self._origin
        if o is not None:
            return (x - o[0]) + o[3] * (y - o[1]) + o[4] * (z - o[2])
        return ((x + self._OFFSET) * self._SPAN + (y + self._OFFSET)) * self._SPAN + (
            z + self._OFFSET
        )

    def _unkey(self, key: int) -> tuple[int, int, int]:
        o = self._origin
        if o is not None:
            z, rest = divmod(key, o[4])
            y, x = divmod(rest, o[3])
            return (x + o[0], y + o[1], z + o[2])
        z = key % self._SPAN - self._OFFSET
        key //= self._SPAN
        y = key % self._SPAN - self._OFFSET
        x = key // self._SPAN - self._OFFSET
        return (x, y, z)

    def row(self, state: tuple[int, int, int]) -> np.ndarray:
        """Action values for a state; a shared zero row if never written."""
        i = self._index.get(self._key(state))
        return self._zero if i is None else self._pool[i]

    def row_mut(self, state: tuple[int, int, int]) -> np.ndarray:
        """Writable action-value row, allocated on first touch."""
        k = self._key(state)
        i = self._index.get(k)
        if i is None:
            if self._n == self._pool.shape[0]:
                grown = np.zeros((2 * self._pool.shape[0], N_ACTIONS), dtype=np.float64)
                grown[: self._n] = self._pool
                self._pool = grown
            i = self._n
            self._index[k] = i
            self._n += 1
        return self._pool[i]

    def __len__(self) -> int:
        return self._n

    def __contains__(self, state: tuple[int, int, int]) -> bool:
        return self._key(state) in self._index

    def to_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """(states, values) snapshot: (n, 3) int64 cells and (n, 7) floats."""
        states = np.zeros((self._n, 3), dtype=np.int64)
        for k, i in self._index.items():
            states[i] = self._unkey(k)
        return states, self._pool[: self._n].copy()

    @classmethod
    def from_arrays(cls, states: np.ndarray, values: np.ndarray) -> "QTable":
        q = cls()
        for cell, row in zip(states, values):
            q.row_mut((int(cell[0]), int(cell[1]), int(cell[2])))[:] = row
        return q


def apply_action(
    state: tuple[int, int, int], action: int, workspace: Workspace
) -> tuple[int, int, int]:
    """Next cell under an action, clamped to the workspace box."""
    dx, dy, dz = _DELTAS[action]
    return workspace.clamp(state[0] + dx, state[1] + dy, state[2] + dz)


def select_action(
    q: QTable, state: tuple[int, int, int], epsilon: float, rng: np.random.Generator
) -> int:
    """Epsilon-greedy draw: the argmax keeps probability 1 - eps + eps/7,
    every action keeps at least eps/7. Argmax ties go to the lowest code."""
    if rng.random() < epsilon:
        return int(rng.integers(0, N_ACTIONS))
    return int(np.argmax(q.row(state)))


def decay_epsilon(epsilon: float, decay: float, epsilon_min: float) -> float:
    """Geometric decay with a floor."""
    return max(decay * epsilon, epsilon_min)


def q_update(
    q: QTable,
    state: tuple[int, int, int],
    action: int,
    reward_value: float,
    next_state: tuple[int, int, int],
    lr: float,
    gamma: float,
) -> None:
    """One temporal-difference backup on the visited pair only."""
    next_max = float(q.row(next_state).max())
    row = q.row_mut(state)
    row[action] += lr * (reward_value + gamma * next_max - row[action])


def resolve_collisions(
    currents: list[tuple[int, int, int]], proposals: list[tuple[int, int, int]]
) -> list[tuple[int, int, int]]:
    """Sequential conflict resolution in ascending agent order.

    An agent keeps its current cell when its proposal hits a cell already
    finalized by a lower-index agent, or a cell still occupied by a
    not-yet-processed agent. With pairwise-distinct current cells this
    guarantees pairwise-distinct final cells: a kept cell cannot have been
    granted to anyone earlier, and a granted cell is barred to everyone later.
    """
    owner = {c: j for j, c in enumerate(currents)}
    taken: set[tuple[int, int, int]] = set()
    finals: list[tuple[int, int, int]] = []
    for i, p in enumerate(proposals):
        j = owner.get(p, -1)
        if p in taken or j > i:
            p = currents[i]
        finals.append(p)
        taken.add(p)
    return finals


def reward(m_served: int, m_total: int) -> float:
    """Zero once everything is served, otherwise the shortfall toward -1."""
    if m_total <= 0:
        return 0.0
    if m_served >= m_total:
        return 0.0
    return m_served / m_total - 1.0


def count_served(
    params: ChannelParams,
    members: list[UserEquipment],
    uav_positions: list,
    own_idx: int,
    tbs_list: list[Tbs],
    *,
    scale_m_per_unit: float,
    d_thruav_units: float,
    rate_threshold_bps: float,
) -> tuple[int, int]:
    """Reference member count for one UAV: (served, connected).

    Connected members are those within link range; they share the band, so
    the receiver count feeds every member's rate. Served members are the
    connected ones whose rate clears the threshold. Slow per-user path kept
    as the oracle for the vectorized evaluator.
    """
    own = uav_positions[own_idx]
    m_b = sum(
        1 for m in members if distance(own, m.position) <= d_thruav_units
    )
    served = 0
    for m in members:
        lb = link_budget(
            params,
            m,
            tbs_list,
            uav_positions,
            own_idx,
            scale_m_per_unit=scale_m_per_unit,
            d_thruav_units=d_thruav_units,
            n_receivers=max(m_b, 1),
        )
        if lb.served and lb.rate_bps >= rate_threshold_bps:
            served += 1
    return served, m_b


class RewardField:
    """Vectorized joint evaluation of every agent's served count and reward.

    Mirrors the scalar link-budget path operation for operation so the two
    routes agree to float precision. Ground-station interference onto the
    unserved users is static and precomputed once.
    """

    def __init__(
        self,
        params: ChannelParams,
        scene: Scene,
        assignments: list[Assignment],
        d_thruav_units: float,
        rate_threshold_bps: float,
        dynamic_association: bool = False,
    ):
        self.params = params
        self.scale = scene.scale_m_per_unit
        self.d_thruav_units = d_thruav_units
        self.rate_th = rate_threshold_bps
        self.dynamic = dynamic_association
        self.n_agents = len(assignments)

        ue_by_id = {ue.id: ue for ue in scene.ues}
        if dynamic_association:
            member_ids = list(assignments[0].member_ids)
        else:
            member_ids = [i for a in assignments for i in a.member_ids]
            owner = np.concatenate(
                [np.full(len(a.member_ids), k, dtype=np.intp) for k, a in enumerate(assignments)]
            ) if assignments else np.zeros(0, dtype=np.intp)
            self.owner = owner
            self.m_total = np.array(
                [len(a.member_ids) for a in assignments], dtype=np.float64
            )
        self.member_ids = member_ids
        self.mx = np.array([ue_by_id[i].position.x for i in member_ids])
        self.my = np.array([ue_by_id[i].position.y for i in member_ids])
        self.n_members = len(member_ids)

        # static ground-station interference, watts per member
        interf = np.zeros(self.n_members)
        for t in scene.tbs:
            if not t.active:
                continue
            dx = t.position.x - self.mx
            dy = t.position.y - self.my
            d_units = np.sqrt(dx * dx + dy * dy + t.position.z * t.position.z)
            mask = d_units <= t.coverage_radius
            if not np.any(mask):
                continue
            d_m = d_units[mask] * self.scale
            interf[mask] += two_ray_rx_power_w(
                params, t.position.z * self.scale, 1.5, d_m
            )
        self.tbs_interf_w = interf
        self.noise_w = params.noise_power_w()
        self._fspl_k = 4.0 * np.pi * params.f_c
        self._pt_db = 10.0 * np.log10(params.p_t_w)
        self._rows = np.arange(self.n_members)
        if not dynamic_association:
            self._own_flat = self._rows * self.n_agents + self.owner
        # scratch buffers, reused every step
        shape = (self.n_members, self.n_agents)
        self._dx = np.empty(shape)
        self._dy = np.empty(shape)
        self._du = np.empty(shape)
        self._p_flat = np.zeros(self.n_members * self.n_agents)

    def evaluate(
        self, uav_cells: list[tuple[int, int, int]]
    ) -> tuple[np.ndarray, np.ndarray, float]:
        """Rewards, served counts, and overall coverage for one joint state."""
        p = self.params
        cells = np.asarray(uav_cells, dtype=np.float64)
        ux, uy, uz = cells[:, 0], cells[:, 1], cells[:, 2]

        dx = np.subtract(ux[None, :], self.mx[:, None], out=self._dx)
        dy = np.subtract(uy[None, :], self.my[:, None], out=self._dy)
        du2 = self._du
        np.multiply(dx, dx, out=du2)
        du2 += dy * dy
        du2 += (uz * uz)[None, :]
        du_units = np.sqrt(du2, out=du2)

        if self.dynamic:
            owner = np.argmin(du_units, axis=1)
            m_total = np.bincount(owner, minlength=self.n_agents).astype(np.float64)
            own_flat = self._rows * self.n_agents + owner
        else:
            owner = self.owner
            m_total = self.m_total
            own_flat = self._own_flat

        in_range = du_units <= self.d_thruav_units
        in_flat = in_range.ravel()
        sel = np.flatnonzero(in_flat)

        # the transcendental chain only runs on in-range pairs
        d_m = du_units.ravel()[sel] * self.scale
        alt_m = uz * self.scale
        alt_sel = alt_m[sel % self.n_agents]
        ratio = np.clip(alt_sel / np.maximum(d_m, 1e-300), -1.0, 1.0)
        theta = np.degrees(np.arcsin(ratio))
        pl = 1.0 / (1.0 + p.alpha * np.exp(-p.beta * (theta - p.alpha)))
        loss = (
            20.0 * np.log10(self._fspl_k * np.maximum(d_m, 1e-300) / p.light_speed)
            + pl * p.mu_los_db
            + (1.0 - pl) * p.mu_nlos_db
        )
        p_flat = self._p_flat
        p_flat.fill(0.0)
        p_flat[sel] = 10.0 ** ((self._pt_db - loss) / 10.0)

        own_w = p_flat[own_flat]
        own_in_range = in_flat[own_flat]
        # zero the serving entry before summing so interference is a plain
        # non-negative sum, never a cancellation-prone subtraction
        p_flat[own_flat] = 0.0
        p_i = p_flat.reshape(self.n_members, self.n_agents).sum(axis=1)
        p_i += self.tbs_interf_w

        m_b = np.bincount(
            owner, weights=own_in_range.astype(np.float64), minlength=self.n_agents
        )
        sinr_v = own_w / (p_i + self.noise_w)
        rate_v = p.bandwidth_hz / np.maximum(m_b[owner], 1.0) * np.log2(1.0 + sinr_v)
        served = own_in_range & (rate_v >= self.rate_th)
        m_served = np.bincount(
            owner, weights=served.astype(np.float64), minlength=self.n_agents
        )

        shortfall = m_served / np.maximum(m_total, 1.0) - 1.0
        rewards = np.where(m_served >= m_total, 0.0, shortfall)
        coverage = float(m_served.sum() / self.n_members) if self.n_members else 1.0
        return rewards, m_served.astype(int), coverage


@dataclass(frozen=True)
class EpisodeMetrics:
    """One training episode: length, end coverage, summed rewards, epsilon."""

    episode: int
    steps: int
    coverage: float
    r_sys: float
    r_agents: tuple[float, ...]
    epsilon: float


class Agent:
    """Mutable per-UAV training state."""

    __slots__ = ("id", "workspace", "q", "epsilon", "rng_action", "rng_position", "position")

    def __init__(
        self,
        agent_id: int,
        workspace: Workspace,
        epsilon: float,
        seed: int,
        start: tuple[int, int, int],
    ):
        self.id = agent_id
        self.workspace = workspace
        self.q = QTable(workspace)
        self.epsilon = epsilon
        self.rng_action = np.random.default_rng(
            np.random.SeedSequence(seed, spawn_key=(1, agent_id))
        )
        self.rng_position = np.random.default_rng(
            np.random.SeedSequence(seed, spawn_key=(2, agent_id))
        )
        self.position = start


class FleetQLearner(BaseEstimator):
    """Trains one Q-learning agent per assignment on a fixed scene.

    ``association`` picks how responsibility binds users to agents:
    "cluster" keeps the fixed partition from the assignments, "nearest"
    re-charges every user to its nearest agent each step (the unpartitioned
    baseline). Training history lands in ``history_``.
    """

    def __init__(
        self,
        lr: float = 0.5,
        gamma: float = 0.9,
        epsilon: float = 0.9,
        decay: float = 0.999,
        epsilon_min: float = 0.01,
        battery: int = 300,
        rate_threshold_bps: float = 0.1e6,
        episodes: int = 10000,
        seed: int = 0,
        decay_per_step: bool = False,
        association: str = "cluster",
        uav_range_units: float = 60.0,
        channel: ChannelParams | None = None,
    ):
        self.lr = lr
        self.gamma = gamma
        self.epsilon = epsilon
        self.decay = decay
        self.epsilon_min = epsilon_min
        self.battery = battery
        self.rate_threshold_bps = rate_threshold_bps
        self.episodes = episodes
        self.seed = seed
        self.decay_per_step = decay_per_step
        self.association = association
        self.uav_range_units = uav_range_units
        self.channel = channel

    def fit(self, scene: Scene, assignments: list[Assignment], on_episode=None):
        """Run the full training schedule; streams metrics to ``on_episode``."""
        if self.association not in ("cluster", "nearest"):
            raise ValueError(f"unknown association mode: {self.association!r}")
        if not assignments:
            raise ValueError("need at least one assignment")
        params = self.channel if self.channel is not None else ChannelParams()
        self.field_ = RewardField(
            params,
            scene,
            assignments,
            self.uav_range_units,
            self.rate_threshold_bps,
            dynamic_association=(self.association == "nearest"),
        )
        self.agents_ = [
            Agent(i, a.workspace, self.epsilon, self.seed, a.initial_position)
            for i, a in enumerate(assignments)
        ]
        self.n_agents_ = len(self.agents_)
        self.history_ = []
        for ep in range(self.episodes):
            metrics = self.run_episode(ep)
            self.history_.append(metrics)
            if on_episode is not None:
                on_episode(metrics)
        return self

    def _randomize_positions(self) -> list[tuple[int, int, int]]:
        occupied: set[tuple[int, int, int]] = set()
        cells = []
        for ag in self.agents_:
            ws = ag.workspace
            rng = ag.rng_position
            while True:
                cell = (
                    int(rng.integers(ws.x0, ws.x1 + 1)),
                    int(rng.integers(ws.y0, ws.y1 + 1)),
                    int(rng.integers(ws.z0, ws.z1 + 1)),
                )
                if cell not in occupied:
                    break
            occupied.add(cell)
            ag.position = cell
            cells.append(cell)
        return cells

    def run_episode(self, episode_index: int) -> EpisodeMetrics:
        """One episode: random starts, joint steps until every agent is at
        reward zero simultaneously or the battery budget runs out.

        The loop inlines select_action/apply_action/q_update (hot path); the
        public helpers define the semantics and the loop must keep matching
        them bit for bit.
        """
        agents = self.agents_
        n = self.n_agents_
        lr = self.lr
        gamma = self.gamma
        bounds = [
            (ws.x0, ws.x1, ws.y0, ws.y1, ws.z0, ws.z1)
            for ws in (ag.workspace for ag in agents)
        ]
        origins = [ag.q._origin for ag in agents]
        states = self._randomize_positions()
        rewards, _, coverage = self.field_.evaluate(states)
        cum = np.zeros(n)
        r_sys_total = 0.0
        steps = 0
        done = bool(np.all(rewards == 0.0))
        actions = [0] * n
        keys = [0] * n
        proposals = [(0, 0, 0)] * n

        while not done and steps < self.battery:
            for i in range(n):
                ag = agents[i]
                x, y, z = states[i]
                ox, oy, oz, w, wh = origins[i]
                k = (x - ox) + w * (y - oy) + wh * (z - oz)
                keys[i] = k
                rng = ag.rng_action
                if rng.random() < ag.epsilon:
                    a = int(rng.integers(0, N_ACTIONS))
                else:
                    q = ag.q
                    ri = q._index.get(k)
                    a = 0 if ri is None else int(q._pool[ri].argmax())
                actions[i] = a
                dx, dy, dz = _DELTAS[a]
                x0, x1, y0, y1, z0, z1 = bounds[i]
                nx = x + dx
                ny = y + dy
                nz = z + dz
                if nx < x0:
                    nx = x0
                elif nx > x1:
                    nx = x1
                if ny < y0:
                    ny = y0
                elif ny > y1:
                    ny = y1
                if nz < z0:
                    nz = z0
                elif nz > z1:
                    nz = z1
                proposals[i] = (nx, ny, nz)
            finals = resolve_collisions(states, proposals)
            rewards, _, coverage = self.field_.evaluate(finals)
            for i in range(n):
                ag = agents[i]
                q = ag.q
                fx, fy, fz = finals[i]
                ox, oy, oz, w, wh = origins[i]
                kn = (fx - ox) + w * (fy - oy) + wh * (fz - oz)
                rin = q._index.get(kn)
                next_max = q._pool[rin].max() if rin is not None else 0.0
                ri = q._index.get(keys[i])
                row = q._pool[ri] if ri is not None else q.row_mut(states[i])
                a = actions[i]
                row[a] += lr * (rewards[i] + gamma * next_max - row[a])
                ag.position = finals[i]
            states = finals
            cum += rewards
            r_sys_total += float(rewards.sum())
            steps += 1
            if self.decay_per_step:
                for ag in agents:
                    ag.epsilon = decay_epsilon(ag.epsilon, self.decay, self.epsilon_min)
            done = bool(np.all(rewards == 0.0))

        if not self.decay_per_step:
            for ag in agents:
                ag.epsilon = decay_epsilon(ag.epsilon, self.decay, self.epsilon_min)
        return EpisodeMetrics(
            episode=episode_index,
            steps=steps,
            coverage=coverage,
            r_sys=r_sys_total,
            r_agents=tuple(float(v) for v in cum),
            epsilon=agents[0].epsilon,
        )

    def save_qtables(self, path) -> None:
        """Snapshot every agent's table to one npz archive."""
        arrays = {}
        for ag in self.agents_:
            states, values = ag.q.to_arrays()
            arrays[f"agent{ag.id}_states"] = states
            arrays[f"agent{ag.id}_values"] = values
        np.savez(path, **arrays)

    def greedy_rollout(
        self, agent_idx: int, start: tuple[int, int, int], max_steps: int = 1000
    ) -> list[tuple[int, int, int]]:
        """Follow the learned argmax policy from a start cell (ties to the
        lowest action code); other agents do not move. For inspection."""
        ag = self.agents_[agent_idx]
        cell = start
        trail = [cell]
        for _ in range(max_steps):
            a = int(np.argmax(ag.q.row(cell)))
            cell = apply_action(cell, a, ag.workspace)
            trail.append(cell)
        return trail
