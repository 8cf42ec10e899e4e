"""Clipped-surrogate PPO with GAE, built on the in-house autodiff."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import typesys as ts
from .autodiff import Adam, Network
from .autodiff import tensor as T
from .autodiff.tensor import Tensor

log = logging.getLogger(__name__)

LOG_2PI = float(np.log(2 * np.pi))


@dataclass
class AgentConfig:
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip: float = 0.2
    epochs: int = 4
    minibatches: int = 4
    segment: int = 128
    learning_rate: float = 2.5e-4
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    max_grad_norm: float = 0.5
    rollouts: int = 5


def _arch(binding: ts.EnvTypeBinding, out_dim: int) -> ts.Architecture:
    if binding.state_form.kind == "image":
        return ts.Architecture("cnn", tuple(binding.state_form.shape), out_dim)
    return ts.Architecture("mlp", tuple(binding.state_form.shape), out_dim)


class Policy:
    """Actor and critic with the curiosity net shapes; Gaussian head for continuous actions."""

    def __init__(self, binding: ts.EnvTypeBinding, seed: int):
        self.binding = binding
        self.discrete = binding.action_form.kind == "discrete"
        width = binding.action_form.n
        self.actor = Network(_arch(binding, width), seed)
        self.critic = Network(_arch(binding, 1), seed + 1)
        # small initial policy head keeps the first policy close to uniform
        self.actor.params[-2].data *= 0.01
        self.actor.params[-1].data *= 0.0
        self.params = self.actor.params + self.critic.params
        if not self.discrete:
            self.log_std = Tensor(np.zeros(width), requires_grad=True)
            self.params.append(self.log_std)

    def flat(self) -> np.ndarray:
        return np.concatenate([p.data.reshape(-1) for p in self.params])

    def value(self, obs) -> np.ndarray:
        return self.critic(obs).data[:, 0]

    def act(self, obs, rng: np.random.Generator):
        """Sample actions; returns (actions, log-probs, values)."""
        out = self.actor(obs).data
        values = self.value(obs)
        if self.discrete:
            logp = out - out.max(axis=1, keepdims=True)
            logp = logp - np.log(np.exp(logp).sum(axis=1, keepdims=True))
            probs = np.exp(logp)
            u = rng.random(out.shape[0])
            actions = np.minimum((probs.cumsum(axis=1) < u[:, None]).sum(axis=1), out.shape[1] - 1)
            return actions, logp[np.arange(out.shape[0]), actions], values
        std = np.exp(self.log_std.data)
        actions = out + std * rng.standard_normal(out.shape)
        logp = (-0.5 * ((actions - out) / std) ** 2 - self.log_std.data - 0.5 * LOG_2PI).sum(axis=1)
        return actions, logp, values

    def evaluate(self, obs, actions):
        """Differentiable (log-probs, entropy, values) for a minibatch."""
        out = self.actor(obs)
        values = T.reshape(self.critic(obs), (-1,))
        if self.discrete:
            logp_all = T.log_softmax(out)
            logp = T.take_last(logp_all, actions.astype(np.int64))
            entropy = T.mul(T.tsum(T.mul(T.exp(logp_all), logp_all), axis=1), -1.0)
            return logp, entropy, values
        inv_std = T.exp(T.mul(self.log_std, -1.0))
        z = T.mul(T.sub(Tensor(actions), out), inv_std)
        per_dim = T.sub(T.mul(T.square(z), -0.5), T.add(self.log_std, 0.5 * LOG_2PI))
        logp = T.tsum(per_dim, axis=1)
        ent = T.tsum(T.add(self.log_std, 0.5 * (1.0 + LOG_2PI)))
        entropy = T.add(Tensor(np.zeros(actions.shape[0])), ent)
        return logp, entropy, values


def gae(rewards, values, dones, last_values, gamma, lam):
    """Advantages and returns; arrays are (steps, rollouts)."""
    steps = rewards.shape[0]
    adv = np.zeros_like(rewards)
    running = np.zeros(rewards.shape[1])
    for t in reversed(range(steps)):
        nxt = last_values if t == steps - 1 else values[t + 1]
        live = 1.0 - dones[t]
        delta = rewards[t] + gamma * nxt * live - values[t]
        running = delta + gamma * lam * live * running
        adv[t] = running
    return adv, adv + values


def clipped_surrogate(ratio, advantages, clip):
    """Per-sample PPO objective (to be maximised)."""
    ratio, advantages = T.as_tensor(ratio), T.as_tensor(advantages)
    return T.minimum(T.mul(ratio, advantages), T.mul(T.clip(ratio, 1.0 - clip, 1.0 + clip), advantages))


class PPO:
    def __init__(self, policy: Policy, cfg: AgentConfig, seed: int):
        self.policy = policy
        self.cfg = cfg
        self.opt = Adam(policy.params, lr=cfg.learning_rate)
        self.rng = np.random.default_rng(seed)
        self.skipped = 0

    def update(self, obs, actions, logp_old, advantages, returns):
        """One PPO update on flattened samples; returns the mean loss."""
        cfg = self.cfg
        n = obs.shape[0]
        adv = (advantages - advantages.mean()) / (advantages.std() + 1e-8)
        size = max(1, n // cfg.minibatches)
        losses = []
        for _ in range(cfg.epochs):
            order = self.rng.permutation(n)
            for start in range(0, n, size):
                idx = order[start:start + size]
                loss = self._loss(obs[idx], actions[idx], logp_old[idx], adv[idx], returns[idx])
                if not np.isfinite(loss.data):
                    self.skipped += 1
                    log.warning("non-finite PPO loss; update skipped")
                    continue
                self.opt.zero_grad()
                loss.backward()
                self._clip_grads()
                self.opt.step()
                losses.append(float(loss.data))
        self.opt.zero_grad()
        return float(np.mean(losses)) if losses else float("nan")

    def _loss(self, obs, actions, logp_old, adv, returns):
        cfg = self.cfg
        logp, entropy, values = self.policy.evaluate(obs, actions)
        ratio = T.exp(T.sub(logp, Tensor(logp_old)))
        policy_loss = T.mul(T.mean(clipped_surrogate(ratio, Tensor(adv), cfg.clip)), -1.0)
        value_loss = T.mean(T.square(T.sub(values, Tensor(returns))))
        total = T.add(policy_loss, T.mul(value_loss, cfg.value_coef))
        return T.sub(total, T.mul(T.mean(entropy), cfg.entropy_coef))

    def _clip_grads(self):
        grads = [p.grad for p in self.policy.params if p.grad is not None]
        norm = float(np.sqrt(sum(float((g ** 2).sum()) for g in grads)))
        if norm > self.cfg.max_grad_norm:
            scale = self.cfg.max_grad_norm / (norm + 1e-6)
            for p in self.policy.params:
                if p.grad is not None:
                    p.grad = p.grad * scale
