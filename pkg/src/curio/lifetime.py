"""One agent lifetime: environment rollouts, curiosity rewards and PPO updates."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import program as P
from . import runtime as R
from .envs import DISTINCT_CELLS, EnvSpec, make_env
from .ppo import PPO, AgentConfig, Policy, gae

FLOOR_SCORE = 0.0


@dataclass
class LearningCurve:
    checkpoints: list = field(default_factory=list)  # (env step, cumulative metric)

    def add(self, step: int, value: float):
        if self.checkpoints and step <= self.checkpoints[-1][0]:
            raise ValueError("checkpoint steps must increase")
        self.checkpoints.append((int(step), float(value)))

    def value_at(self, step: int) -> Optional[float]:
        for s, v in self.checkpoints:
            if s == step:
                return v
        return None

    @property
    def steps(self):
        return [s for s, _ in self.checkpoints]

    def encode(self) -> str:
        return ",".join(f"{s}:{v!r}" for s, v in self.checkpoints)

    @classmethod
    def decode(cls, text: str) -> "LearningCurve":
        curve = cls()
        if text:
            for part in text.split(","):
                s, v = part.split(":")
                curve.add(int(s), float(v))
        return curve


@dataclass
class LifetimeResult:
    curve: LearningCurve
    score: float
    failed: bool = False
    failure: str = ""
    reward_log: Optional[dict] = None


def trial_seed_for(base_seed: int, trial: int) -> int:
    """Seed shared by every program on the same trial index."""
    return R.derive_seed(base_seed, f"trial{trial}")


class _Metric:
    def __init__(self, objective: str, rollouts: int):
        self.objective = objective
        self.done_total = 0.0
        self.done_count = 0
        self.running = np.zeros(rollouts)

    def episode_end(self, k: int, env):
        if self.objective == DISTINCT_CELLS:
            self.done_total += len(env.visited)
        else:
            self.done_total += self.running[k]
            self.running[k] = 0.0
        self.done_count += 1

    def value(self) -> float:
        if self.objective == DISTINCT_CELLS:
            return float(self.done_total)
        return float(self.done_total / self.done_count) if self.done_count else 0.0


def lifetime_steps(env_id: str, intrinsic_g: P.ProgramGraph, combiner_g: P.ProgramGraph,
                   agent_cfg: Optional[AgentConfig] = None, trial_seed: int = 0,
                   lifetime: Optional[int] = None, env_kwargs: Optional[dict] = None,
                   record_rewards: bool = False, trace_sink=None, floor_score: float = FLOOR_SCORE):
    """Generator yielding (step, metric) at each checkpoint; returns a LifetimeResult.

    Checkpoints fall on multiples of the episode cap.  The agent only ever sees
    the combined reward.
    """
    cfg = agent_cfg or AgentConfig()
    env_kwargs = dict(env_kwargs or {})
    if lifetime is not None:
        env_kwargs["lifetime"] = lifetime
    envs = [make_env(env_id, **env_kwargs) for _ in range(cfg.rollouts)]
    spec: EnvSpec = envs[0].spec()
    binding = spec.binding
    T = spec.lifetime
    B = cfg.rollouts

    obs = np.stack([env.reset(seed=R.derive_seed(trial_seed, f"env{k}")) for k, env in enumerate(envs)])
    policy = Policy(binding, R.derive_seed(trial_seed, "policy"))
    ppo = PPO(policy, cfg, R.derive_seed(trial_seed, "ppo"))
    act_rng = np.random.default_rng(R.derive_seed(trial_seed, "act"))
    intrinsic = R.instantiate(intrinsic_g, binding, trial_seed)
    combiner = R.instantiate(combiner_g, binding, trial_seed)
    metric = _Metric(spec.objective, B)
    curve = LearningCurve()
    log = {"intrinsic": [], "extrinsic": [], "combined": []} if record_rewards else None

    seg = {k: [] for k in ("obs", "actions", "logp", "values", "rewards", "dones")}
    continuous = binding.action_form.kind == "continuous"
    for t in range(T):
        actions, logp, values = policy.act(obs, act_rng)
        env_actions = np.clip(actions, -1.0, 1.0) if continuous else actions
        nxt, rewards, dones = [], np.zeros(B), np.zeros(B)
        for k, env in enumerate(envs):
            o, r, d = env.step(env_actions[k])
            nxt.append(o)
            rewards[k], dones[k] = r, float(d)
            metric.running[k] += r
        nxt = np.stack(nxt)
        batch = R.TransitionBatch(obs, env_actions, nxt, rewards)
        try:
            i_t = R.step_batch(intrinsic, batch)
            r_hat = R.combiner_step_batch(combiner, i_t, rewards, t / T)
            if not np.all(np.isfinite(r_hat)):
                raise R.EvaluationFailure(combiner_g.output)
        except R.EvaluationFailure as e:
            return LifetimeResult(curve, floor_score, True, str(e), log)
        if log is not None:
            log["intrinsic"].append(i_t)
            log["extrinsic"].append(rewards.copy())
            log["combined"].append(r_hat)
        if trace_sink is not None:
            for line in R.trace_records(t, i_t, rewards, r_hat):
                trace_sink(line)

        seg["obs"].append(obs)
        seg["actions"].append(actions)
        seg["logp"].append(logp)
        seg["values"].append(values)
        seg["rewards"].append(r_hat)
        seg["dones"].append(dones)

        for k, env in enumerate(envs):
            if dones[k]:
                metric.episode_end(k, env)
                nxt[k] = env.reset()
        obs = nxt

        if len(seg["obs"]) == cfg.segment or t == T - 1:
            arr = {k: np.array(v) for k, v in seg.items()}
            adv, ret = gae(arr["rewards"], arr["values"], arr["dones"], policy.value(obs),
                           cfg.gamma, cfg.gae_lambda)
            flat = lambda a: a.reshape((-1,) + a.shape[2:])
            ppo.update(flat(arr["obs"]), flat(arr["actions"]), flat(arr["logp"]), flat(adv), flat(ret))
            seg = {k: [] for k in seg}

        if (t + 1) % spec.episode_cap == 0:
            curve.add(t + 1, metric.value())
            yield t + 1, metric.value()
    return LifetimeResult(curve, metric.value(), False, "", log)


def run_lifetime(env_id: str, intrinsic_g: P.ProgramGraph, combiner_g: P.ProgramGraph,
                 agent_cfg: Optional[AgentConfig] = None, trial_seed: int = 0, **kwargs) -> LifetimeResult:
    gen = lifetime_steps(env_id, intrinsic_g, combiner_g, agent_cfg, trial_seed, **kwargs)
    while True:
        try:
            next(gen)
        except StopIteration as stop:
            return stop.value
