"""PPO with a diagonal-Gaussian MLP actor and an MLP critic, in plain numpy.

Gradients are derived by hand for this fixed architecture (affine layers with
ELU between them, identity output).  The actor reads the policy observation and
the critic reads the longer critic observation.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class PpoConfig:
    value_loss_coef: float = 1.0
    use_clipped_value_loss: bool = True
    clip_param: float = 0.2
    entropy_coef: float = 0.01
    num_epochs: int = 5
    num_minibatches: int = 4
    learning_rate: float = 1.0e-3
    schedule: str = "adaptive"
    gamma: float = 0.99
    lam: float = 0.95
    desired_kl: float = 0.01
    max_grad_norm: float = 1.0
    steps_per_env: int = 24
    actor_hidden: tuple = (1024, 512, 256)
    critic_hidden: tuple = (1024, 512, 256)
    init_log_std: float = 0.0
    lr_min: float = 1.0e-5
    lr_max: float = 1.0e-2

    def validate(self, batch_size: int | None = None):
        errors = []
        if not 0 < self.gamma <= 1:
            errors.append(("ppo.gamma", "must satisfy 0 < gamma <= 1"))
        if not 0 <= self.lam <= 1:
            errors.append(("ppo.lam", "must satisfy 0 <= lam <= 1"))
        if not self.clip_param > 0:
            errors.append(("ppo.clip_param", "must be > 0"))
        if self.num_epochs < 1 or self.num_minibatches < 1:
            errors.append(("ppo.num_minibatches", "epochs and minibatches must be >= 1"))
        if self.schedule not in ("adaptive", "fixed"):
            errors.append(("ppo.schedule", "must be 'adaptive' or 'fixed'"))
        if not self.learning_rate > 0:
            errors.append(("ppo.learning_rate", "must be > 0"))
        if self.steps_per_env < 1:
            errors.append(("ppo.steps_per_env", "must be >= 1"))
        if batch_size is not None and batch_size % self.num_minibatches:
            errors.append(("ppo.num_minibatches", f"must divide the batch size {batch_size}"))
        return errors


# --------------------------------------------------------------------------
# MLP
# --------------------------------------------------------------------------

def elu(x):
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))


def elu_grad(z):
    return np.where(z > 0, 1.0, np.exp(np.minimum(z, 0.0)))


@dataclass
class MlpParams:
    weights: list
    biases: list

    @property
    def widths(self):
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def arrays(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self):
        return MlpParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])


def orthogonal(rng, shape, gain):
    a = rng.normal(size=(max(shape), min(shape)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if shape[0] < shape[1]:
        q = q.T
    return gain * q[: shape[0], : shape[1]]


def init_mlp(widths, rng, hidden_gain=math.sqrt(2.0), output_gain=1.0) -> MlpParams:
    ws, bs = [], []
    for i, (n_in, n_out) in enumerate(zip(widths[:-1], widths[1:])):
        gain = output_gain if i == len(widths) - 2 else hidden_gain
        ws.append(orthogonal(rng, (n_in, n_out), gain))
        bs.append(np.zeros(n_out))
    return MlpParams(ws, bs)


def mlp_forward(params: MlpParams, x, cache: bool = False):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != params.weights[0].shape[0]:
        raise ValueError(f"input dimension {x.shape[-1]} does not match network input {params.weights[0].shape[0]}")
    h = x
    pre, acts = [], [x]
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w + b
        h = z if i == last else elu(z)
        pre.append(z)
        acts.append(h)
    return (h, (pre, acts)) if cache else h


def mlp_backward(params: MlpParams, cache, grad_out):
    """Gradients of a scalar loss w.r.t. weights and biases, given dL/d(output)."""
    pre, acts = cache
    gw, gb = [None] * len(params.weights), [None] * len(params.weights)
    g = grad_out
    for i in range(len(params.weights) - 1, -1, -1):
        if i != len(params.weights) - 1:
            g = g * elu_grad(pre[i])
        gw[i] = acts[i].T @ g
        gb[i] = g.sum(axis=0)
        if i:
            g = g @ params.weights[i].T
    return MlpParams(gw, gb)


# --------------------------------------------------------------------------
# Policy
# --------------------------------------------------------------------------

@dataclass
class GaussianPolicy:
    actor: MlpParams
    critic: MlpParams
    log_std: np.ndarray

    @classmethod
    def create(cls, policy_dim, critic_dim, action_dim, rng, actor_hidden=(1024, 512, 256),
               critic_hidden=(1024, 512, 256), init_log_std=0.0) -> "GaussianPolicy":
        actor = init_mlp([policy_dim, *actor_hidden, action_dim], rng, output_gain=0.01)
        critic = init_mlp([critic_dim, *critic_hidden, 1], rng, output_gain=1.0)
        return cls(actor, critic, np.full(action_dim, float(init_log_std)))

    @property
    def dims(self):
        return self.actor.widths[0], self.critic.widths[0], self.actor.widths[-1]

    def arrays(self):
        """Every trainable array, in checkpoint order."""
        return self.actor.arrays() + self.critic.arrays() + [self.log_std]

    def copy(self):
        return GaussianPolicy(self.actor.copy(), self.critic.copy(), self.log_std.copy())

    def mean(self, obs):
        return mlp_forward(self.actor, obs)

    def value(self, critic_obs):
        return mlp_forward(self.critic, critic_obs)[..., 0]

    def act_inference(self, obs):
        return self.mean(obs)


def gaussian_log_prob(actions, mean, log_std):
    z = (actions - mean) * np.exp(-log_std)
    return -0.5 * np.sum(z * z, axis=-1) - np.sum(log_std) - 0.5 * mean.shape[-1] * LOG_2PI


def gaussian_entropy(log_std):
    return float(np.sum(log_std) + 0.5 * log_std.shape[-1] * (1.0 + LOG_2PI))


def sample_action(policy: GaussianPolicy, obs, rng: np.random.Generator):
    mean = policy.mean(obs)
    noise = rng.standard_normal(mean.shape)
    actions = mean + np.exp(policy.log_std) * noise
    return actions, gaussian_log_prob(actions, mean, policy.log_std)


def gaussian_kl(mean_old, log_std_old, mean_new, log_std_new):
    """KL(old || new) between diagonal Gaussians, summed over action dimensions."""
    var_old = np.exp(2.0 * log_std_old)
    var_new = np.exp(2.0 * log_std_new)
    return np.sum(log_std_new - log_std_old + (var_old + (mean_old - mean_new) ** 2) / (2.0 * var_new) - 0.5,
                  axis=-1)


# --------------------------------------------------------------------------
# Advantages
# --------------------------------------------------------------------------

def compute_gae(rewards, values, dones, bootstrap_value, gamma=0.99, lam=0.95):
    """Generalized advantage estimates along axis 0 (time).

    ``dones[t]`` marks that the episode ended after step ``t``.  Returns
    ``(advantages, returns)`` with ``returns = advantages + values``.
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    dones = np.asarray(dones, dtype=float)
    if not (rewards.shape == values.shape == dones.shape):
        raise ValueError("rewards, values and dones must have equal shapes")
    adv = np.zeros_like(rewards)
    last = np.zeros(rewards.shape[1:])
    next_value = np.asarray(bootstrap_value, dtype=float)
    for t in range(rewards.shape[0] - 1, -1, -1):
        live = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_value * live - values[t]
        last = delta + gamma * lam * live * last
        adv[t] = last
        next_value = values[t]
    return adv, adv + values


def normalize_advantages(adv):
    # a floor rather than an additive epsilon keeps unit variance at any scale;
    # constant advantages map to zeros
    return (adv - adv.mean()) / max(float(adv.std()), 1e-12)


def adapt_lr(lr, measured_kl, desired_kl=0.01, lr_min=1e-5, lr_max=1e-2):
    if measured_kl > 2.0 * desired_kl:
        lr = lr / 1.5
    elif measured_kl < 0.5 * desired_kl:
        lr = lr * 1.5
    return min(max(lr, lr_min), lr_max)


# --------------------------------------------------------------------------
# Buffer
# --------------------------------------------------------------------------

class RolloutBuffer:
    def __init__(self, steps, num_envs, policy_dim, critic_dim, action_dim):
        self.steps, self.num_envs = steps, num_envs
        self.policy_obs = np.zeros((steps, num_envs, policy_dim))
        self.critic_obs = np.zeros((steps, num_envs, critic_dim))
        self.actions = np.zeros((steps, num_envs, action_dim))
        self.log_probs = np.zeros((steps, num_envs))
        self.values = np.zeros((steps, num_envs))
        self.rewards = np.zeros((steps, num_envs))
        self.dones = np.zeros((steps, num_envs))
        self.causes = np.zeros((steps, num_envs), dtype=np.int64)
        self.means = np.zeros((steps, num_envs, action_dim))
        self.log_std = np.zeros(action_dim)
        self.advantages = np.zeros((steps, num_envs))
        self.returns = np.zeros((steps, num_envs))
        self.t = 0

    def add(self, policy_obs, critic_obs, actions, log_probs, values, rewards, dones, means, causes=None):
        t = self.t
        self.policy_obs[t] = policy_obs
        self.critic_obs[t] = critic_obs
        self.actions[t] = actions
        self.log_probs[t] = log_probs
        self.values[t] = values
        self.rewards[t] = rewards
        self.dones[t] = dones
        self.means[t] = means
        if causes is not None:
            self.causes[t] = causes
        self.t += 1

    def finish(self, bootstrap_value, gamma, lam):
        adv, ret = compute_gae(self.rewards, self.values, self.dones, bootstrap_value, gamma, lam)
        self.returns = ret
        self.advantages = normalize_advantages(adv)
        self.t = 0

    def flat(self):
        n = self.steps * self.num_envs
        return {
            "policy_obs": self.policy_obs.reshape(n, -1), "critic_obs": self.critic_obs.reshape(n, -1),
            "actions": self.actions.reshape(n, -1), "log_probs": self.log_probs.reshape(n),
            "values": self.values.reshape(n), "returns": self.returns.reshape(n),
            "advantages": self.advantages.reshape(n), "means": self.means.reshape(n, -1),
        }


# --------------------------------------------------------------------------
# Loss and gradients
# --------------------------------------------------------------------------

@dataclass
class LossInfo:
    loss: float
    surrogate: float
    value: float
    entropy: float
    kl: float


def ppo_loss_and_grad(policy: GaussianPolicy, batch, cfg: PpoConfig, need_grad: bool = True):
    """Total PPO loss on a minibatch and its gradient w.r.t. ``policy.arrays()``."""
    obs, cobs = batch["policy_obs"], batch["critic_obs"]
    actions, adv = batch["actions"], batch["advantages"]
    old_logp, old_v, ret = batch["log_probs"], batch["values"], batch["returns"]
    n = obs.shape[0]
    eps = cfg.clip_param

    mean, a_cache = mlp_forward(policy.actor, obs, cache=True)
    vout, c_cache = mlp_forward(policy.critic, cobs, cache=True)
    value = vout[:, 0]
    log_std = policy.log_std
    inv_std = np.exp(-log_std)
    z = (actions - mean) * inv_std
    logp = -0.5 * np.sum(z * z, axis=-1) - np.sum(log_std) - 0.5 * mean.shape[1] * LOG_2PI
    ratio = np.exp(logp - old_logp)
    surr1 = ratio * adv
    surr2 = np.clip(ratio, 1.0 - eps, 1.0 + eps) * adv
    surrogate = -np.mean(np.minimum(surr1, surr2))

    if cfg.use_clipped_value_loss:
        v_clipped = old_v + np.clip(value - old_v, -eps, eps)
        l_unc = (value - ret) ** 2
        l_clip = (v_clipped - ret) ** 2
        value_loss = np.mean(np.maximum(l_unc, l_clip))
    else:
        value_loss = np.mean((value - ret) ** 2)
    entropy = gaussian_entropy(log_std)
    loss = surrogate + cfg.value_loss_coef * value_loss - cfg.entropy_coef * entropy
    kl = float(np.mean(gaussian_kl(batch["means"], batch["log_std_old"], mean, log_std))) \
        if "means" in batch and "log_std_old" in batch else 0.0
    info = LossInfo(float(loss), float(surrogate), float(value_loss), entropy, kl)
    if not need_grad:
        return info, None

    # surrogate: d/d ratio flows only through the unclipped branch when it is the minimum
    d_ratio = np.where(surr1 <= surr2, -adv / n, 0.0)
    d_logp = d_ratio * ratio
    d_mean = d_logp[:, None] * z * inv_std
    d_log_std = np.sum(d_logp[:, None] * (z * z - 1.0), axis=0) - cfg.entropy_coef

    if cfg.use_clipped_value_loss:
        # inside the clip band both branches coincide; outside it the clipped branch is constant
        d_value = np.where(l_unc >= l_clip, 2.0 * (value - ret), 0.0)
    else:
        d_value = 2.0 * (value - ret)
    d_value = d_value * cfg.value_loss_coef / n

    g_actor = mlp_backward(policy.actor, a_cache, d_mean)
    g_critic = mlp_backward(policy.critic, c_cache, d_value[:, None])
    return info, g_actor.arrays() + g_critic.arrays() + [d_log_std]


def clip_grad_norm(grads, max_norm):
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if total > max_norm:
        scale = max_norm / (total + 1e-12)
        grads = [g * scale for g in grads]
    return grads, total


class Adam:
    def __init__(self, arrays, betas=(0.9, 0.999), eps=1e-8):
        self.m = [np.zeros_like(a) for a in arrays]
        self.v = [np.zeros_like(a) for a in arrays]
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0

    def step(self, arrays, grads, lr):
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for a, g, m, v in zip(arrays, grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            a -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state(self):
        return [m.copy() for m in self.m], [v.copy() for v in self.v], self.t

    def load(self, state):
        m, v, t = state
        self.m = [x.copy() for x in m]
        self.v = [x.copy() for x in v]
        self.t = t


class NonFiniteLossError(FloatingPointError):
    pass


@dataclass
class UpdateStats:
    surrogate: float
    value: float
    entropy: float
    kl: float
    learning_rate: float
    grad_norm: float = 0.0


@dataclass
class PpoLearner:
    """Holds the policy, optimizer state and current learning rate."""

    policy: GaussianPolicy
    cfg: PpoConfig
    learning_rate: float | None = None
    optimizer: Adam = field(init=False)

    def __post_init__(self):
        if self.learning_rate is None:
            self.learning_rate = self.cfg.learning_rate
        self.optimizer = Adam(self.policy.arrays())

    def update(self, buffer: RolloutBuffer, rng: np.random.Generator) -> UpdateStats:
        return ppo_update(self, buffer, rng)


def ppo_update(learner: PpoLearner, buffer: RolloutBuffer, rng: np.random.Generator) -> UpdateStats:
    """Clipped-surrogate epochs over shuffled minibatches.

    On a non-finite loss the policy and optimizer are restored to their state
    at entry and ``NonFiniteLossError`` is raised.
    """
    cfg, policy = learner.cfg, learner.policy
    data = buffer.flat()
    data["log_std_old"] = buffer.log_std
    n = data["advantages"].shape[0]
    errors = cfg.validate(n)
    if errors:
        raise ValueError("; ".join(f"{p}: {m}" for p, m in errors))
    mb = n // cfg.num_minibatches
    saved = ([a.copy() for a in policy.arrays()], learner.optimizer.state(), learner.learning_rate)

    sums = np.zeros(4)
    count = 0
    grad_norm = 0.0
    for epoch in range(cfg.num_epochs):
        perm = rng.permutation(n)
        for k in range(cfg.num_minibatches):
            idx = perm[k * mb:(k + 1) * mb]
            batch = {key: (val if key == "log_std_old" else val[idx]) for key, val in data.items()}
            info, grads = ppo_loss_and_grad(policy, batch, cfg)
            if not (math.isfinite(info.loss) and all(np.all(np.isfinite(g)) for g in grads)):
                for a, s in zip(policy.arrays(), saved[0]):
                    a[...] = s
                learner.optimizer.load(saved[1])
                learner.learning_rate = saved[2]
                raise NonFiniteLossError(
                    f"non-finite loss at epoch {epoch} minibatch {k}: surrogate={info.surrogate} "
                    f"value={info.value} entropy={info.entropy}; parameters restored")
            if cfg.schedule == "adaptive":
                learner.learning_rate = adapt_lr(learner.learning_rate, info.kl, cfg.desired_kl,
                                                 cfg.lr_min, cfg.lr_max)
            grads, grad_norm = clip_grad_norm(grads, cfg.max_grad_norm)
            learner.optimizer.step(policy.arrays(), grads, learner.learning_rate)
            sums += (info.surrogate, info.value, info.entropy, info.kl)
            count += 1
    s = sums / max(count, 1)
    return UpdateStats(float(s[0]), float(s[1]), float(s[2]), float(s[3]), learner.learning_rate, grad_norm)
