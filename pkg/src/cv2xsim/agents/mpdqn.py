"""Multi-pass parameterized-action DQN over (RRI, power).

An actor network maps the state to one continuous power parameter per discrete
RRI; the critic scores each (state, RRI, parameter) tuple with one masked
forward pass per RRI, so a head's Q value never sees the other heads'
parameters. Exploration is epsilon-greedy over the RRIs with
Ornstein-Uhlenbeck noise on the chosen power, both decaying over episodes.
"""

from __future__ import annotations

import json

import numpy as np

from ..config import SimulationConfig
from ..engine import run_episode
from .base import Agent
from .nets import Adam, Mlp

HIDDEN_SIZES = [128, 64]
STATE_DIM = 4
EPS_START = 1.0
EPS_END = 0.05
EPS_DECAY_EPISODES = 500
OU_THETA = 0.15
OU_SIGMA_FRACTION = 0.2  # of P_max
CHECKPOINT_VERSION = 1


class OuNoise:
    """Temporally correlated exploration noise, one lane per discrete action."""

    def __init__(self, dim: int, theta: float, sigma: float, mu: float = 0.0):
        self.dim = dim
        self.theta = theta
        self.sigma = sigma
        self.mu = mu
        self.state = np.full(dim, mu)

    def reset(self) -> None:
        self.state = np.full(self.dim, self.mu)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        dx = self.theta * (self.mu - self.state) + self.sigma * rng.standard_normal(self.dim)
        self.state = self.state + dx
        return self.state


class ReplayBuffer:
    """FIFO transition store with uniform no-replacement mini-batch sampling.

    Ring buffer over a list: the slot at `head` is the oldest entry once full.
    """

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.buffer: list = []
        self.head = 0

    def push(self, state, k, params, reward, next_state, terminal) -> None:
        entry = (state, k, params, reward, next_state, terminal)
        if len(self.buffer) < self.capacity:
            self.buffer.append(entry)
        else:
            self.buffer[self.head] = entry
            self.head = (self.head + 1) % self.capacity

    def __len__(self) -> int:
        return len(self.buffer)

    def oldest(self):
        return self.buffer[self.head if len(self.buffer) == self.capacity else 0]

    def sample(self, rng: np.random.Generator, batch_size: int):
        if len(self.buffer) < batch_size:
            raise ValueError(f"replay holds {len(self.buffer)} < batch {batch_size}")
        idx = rng.choice(len(self.buffer), size=batch_size, replace=False)
        states, ks, params, rewards, next_states, terminals = zip(
            *(self.buffer[i] for i in idx))
        return (np.stack(states), np.array(ks), np.stack(params),
                np.array(rewards), np.stack(next_states),
                np.array(terminals, dtype=float))


class MpdqnAgent(Agent):
    def __init__(self, cfg: SimulationConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.rng = rng
        self.choices = cfg.rri_choices
        k = len(self.choices)
        self.n_actions = k
        self.p_max_mw = cfg.p_max_mw
        self.actor = Mlp([STATE_DIM, *HIDDEN_SIZES, k], rng, out_range=(0.0, self.p_max_mw))
        self.critic = Mlp([STATE_DIM + k, *HIDDEN_SIZES, k], rng)
        self.actor_target = self.actor.clone()
        self.critic_target = self.critic.clone()
        self.adam_x = Adam(self.actor.params(), cfg.lr_x)
        self.adam_q = Adam(self.critic.params(), cfg.lr_q)
        self.replay = ReplayBuffer(cfg.replay_size)
        self.ou = OuNoise(k, OU_THETA, OU_SIGMA_FRACTION * self.p_max_mw)
        self.explore = True
        self.episode = 0
        self.pending: dict[int, tuple[np.ndarray, int, np.ndarray]] = {}
        self._loss_sums = [0.0, 0.0]
        self._loss_count = 0

    # -------------------------------------------------------------- schedules
    @property
    def epsilon(self) -> float:
        frac = min(self.episode / EPS_DECAY_EPISODES, 1.0)
        return EPS_START + (EPS_END - EPS_START) * frac

    def end_episode(self) -> None:
        self.episode += 1
        self.ou.reset()

    def pop_losses(self) -> tuple[float, float]:
        """Mean (L_Q, L_x) since the last call; zeros when nothing trained."""
        if self._loss_count == 0:
            return 0.0, 0.0
        out = (self._loss_sums[0] / self._loss_count,
               self._loss_sums[1] / self._loss_count)
        self._loss_sums = [0.0, 0.0]
        self._loss_count = 0
        return out

    # -------------------------------------------------------------- inference
    def _multipass_inputs(self, states: np.ndarray, params: np.ndarray) -> np.ndarray:
        """(B, S) states + (B, K) params -> (K*B, S+K) masked critic inputs."""
        b = states.shape[0]
        k = self.n_actions
        x = np.zeros((k * b, STATE_DIM + k))
        for i in range(k):
            x[i * b:(i + 1) * b, :STATE_DIM] = states
            x[i * b:(i + 1) * b, STATE_DIM + i] = params[:, i]
        return x

    def q_values(self, critic: Mlp, states: np.ndarray, params: np.ndarray) -> np.ndarray:
        """Q per discrete action, one masked pass per action: (B, K)."""
        b = states.shape[0]
        out = critic.forward(self._multipass_inputs(states, params))
        return np.stack([out[i * b:(i + 1) * b, i] for i in range(self.n_actions)], axis=1)

    def act(self, state, vehicle):
        params = self.actor.forward(state[None, :])[0]
        if self.explore and self.rng.random() < self.epsilon:
            k = int(self.rng.integers(self.n_actions))
        else:
            q = self.q_values(self.critic, state[None, :], params[None, :])[0]
            k = int(np.argmax(q))
        power = float(params[k])
        if self.explore:
            power += float(self.ou.sample(self.rng)[k]) * self.epsilon
        power = float(min(max(power, 0.0), self.p_max_mw))
        applied = params.copy()
        applied[k] = power
        self.pending[vehicle] = (state.copy(), k, applied)
        return int(self.choices[k]), power

    # -------------------------------------------------------------- learning
    def finish(self, vehicle, reward, next_state, terminal):
        pending = self.pending.pop(vehicle, None)
        if pending is None:
            return
        state, k, params = pending
        self.replay.push(state, k, params, reward, next_state.copy(), terminal)
        if len(self.replay) >= self.cfg.batch_size:
            self.train_step()

    def td_targets(self, rewards, next_states, terminals) -> np.ndarray:
        """y = r + gamma * max_k Q_target(s', k, x_target(s')_k); y = r when terminal."""
        p2 = self.actor_target.forward(next_states)
        q2 = self.q_values(self.critic_target, next_states, p2)
        return rewards + self.cfg.gamma_discount * (1.0 - terminals) * q2.max(axis=1)

    def train_step(self) -> tuple[float, float]:
        cfg = self.cfg
        b = cfg.batch_size
        states, ks, params, rewards, next_states, terminals = self.replay.sample(self.rng, b)
        y = self.td_targets(rewards, next_states, terminals)

        # critic: squared TD error at the stored action, masked pass
        x = np.zeros((b, STATE_DIM + self.n_actions))
        x[:, :STATE_DIM] = states
        rows = np.arange(b)
        x[rows, STATE_DIM + ks] = params[rows, ks]
        q_all, cache_q = self.critic.forward(x, return_cache=True)
        q_pred = q_all[rows, ks]
        loss_q = float(np.mean(0.5 * (y - q_pred) ** 2))
        grad_q = np.zeros_like(q_all)
        grad_q[rows, ks] = (q_pred - y) / b
        grads_q, _ = self.critic.backward(cache_q, grad_q)
        self.adam_q.step(self.critic.params(), grads_q)

        # actor: minimize -sum_k Q(s, k, x(s)_k), gradients through the critic input
        p_cur, cache_a = self.actor.forward(states, return_cache=True)
        x3 = self._multipass_inputs(states, p_cur)
        q3, cache_c = self.critic.forward(x3, return_cache=True)
        grad_q3 = np.zeros_like(q3)
        for i in range(self.n_actions):
            grad_q3[i * b:(i + 1) * b, i] = -1.0 / b
        _, grad_in = self.critic.backward(cache_c, grad_q3, param_grads=False)
        grad_params = np.zeros_like(p_cur)
        for i in range(self.n_actions):
            grad_params[:, i] = grad_in[i * b:(i + 1) * b, STATE_DIM + i]
        grads_a, _ = self.actor.backward(cache_a, grad_params)
        self.adam_x.step(self.actor.params(), grads_a)
        loss_x = -float(sum(q3[i * b:(i + 1) * b, i].sum() for i in range(self.n_actions)) / b)

        self.critic_target.polyak_from(self.critic, cfg.tau_q)
        self.actor_target.polyak_from(self.actor, cfg.tau_x)
        self._loss_sums[0] += loss_q
        self._loss_sums[1] += loss_x
        self._loss_count += 1
        return loss_q, loss_x

    # -------------------------------------------------------------- persistence
    def save(self, path: str) -> None:
        meta = {
            "version": CHECKPOINT_VERSION,
            "rri_choices": list(self.choices),
            "p_max_mw": self.p_max_mw,
            "actor_sizes": self.actor.layer_sizes,
            "critic_sizes": self.critic.layer_sizes,
            "episode": self.episode,
        }
        arrays = {"meta": np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)}
        for tag, net in (("actor", self.actor), ("critic", self.critic),
                         ("actor_t", self.actor_target), ("critic_t", self.critic_target)):
            for i, (w, bias) in enumerate(zip(net.weights, net.biases)):
                arrays[f"{tag}_w{i}"] = w
                arrays[f"{tag}_b{i}"] = bias
        np.savez(path, **arrays)

    @classmethod
    def load(cls, path: str, cfg: SimulationConfig, rng: np.random.Generator) -> "MpdqnAgent":
        data = np.load(path)
        meta = json.loads(bytes(data["meta"]).decode())
        if meta["version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta['version']}")
        agent = cls(cfg, rng)
        if meta["actor_sizes"] != agent.actor.layer_sizes:
            raise ValueError("checkpoint layer sizes do not match this config")
        for tag, net in (("actor", agent.actor), ("critic", agent.critic),
                         ("actor_t", agent.actor_target), ("critic_t", agent.critic_target)):
            for i in range(len(net.weights)):
                net.weights[i] = data[f"{tag}_w{i}"].copy()
                net.biases[i] = data[f"{tag}_b{i}"].copy()
        agent.episode = int(meta["episode"])
        return agent


def train(cfg: SimulationConfig, progress=None):
    """Run the full training schedule; returns (agent, curve rows).

    Curve rows are (episode, mean epoch reward, mean L_Q, mean L_x, epsilon).
    The config seed determines everything, agent initialization included.
    """
    root = np.random.SeedSequence(cfg.seed)
    agent_seed, sim_seed = root.spawn(2)
    agent = MpdqnAgent(cfg, np.random.default_rng(agent_seed))
    episode_seeds = sim_seed.spawn(cfg.episodes)
    rows = []
    for ep in range(cfg.episodes):
        eps_now = agent.epsilon
        metrics = run_episode(cfg, agent, episode_seeds[ep], record_epochs=False)
        loss_q, loss_x = agent.pop_losses()
        rows.append((ep, metrics.mean_reward, loss_q, loss_x, eps_now))
        agent.end_episode()
        if progress is not None:
            progress(ep, metrics, agent)
    return agent, rows
