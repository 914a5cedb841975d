"""Training loops: expert training, demo generation, the adversarial reward
learning loop, the baseline-classifier variant, retraining on an exported
reward, plus evaluation helpers.

Every run owns a directory with `config.resolved.json`, `metrics.csv`, an
`events.jsonl` ordering log, `run_record.json`, and checkpoints. Runs are
bit-reproducible: all randomness flows from named streams derived from the
config seed, and evaluation uses streams of its own so its cadence cannot
perturb training. Evaluation episodes run greedily on a separate environment
instance and never reach the replay buffer. Within one training round the
order is fixed: rewards are computed from the current discriminator, then the
actor-critic updates, then the discriminator updates.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from pathlib import Path

import numpy as np

from ..actors import MAACLearner
from ..autodiff import Adam, clip_grad_norm, no_grad, save_params
from ..discriminators import (AirlDiscriminator, GailDiscriminator,
                              LearnedReward, disc_checkpoint_values,
                              save_reward_export)
from ..envs import JointTransition, episode_score, make_env
from ..errors import ConfigError, FormatError, NumericError, UsageError
from ..evaluation import ScoreTriple, nss, pcc
from ..replay import Batch, DemoSet, ReplayBuffer, episodes_from_transitions, \
    load_demos, save_demos
from .config import ExperimentConfig
from .rng import StreamSet


# ---------------------------------------------------------------------------
# small helpers
# ---------------------------------------------------------------------------

def worker_count(cfg):
    """Configured rollout worker count, capped by MADIRL_THREADS when set."""
    k = cfg.workers
    cap = os.environ.get("MADIRL_THREADS", "").strip()
    if cap:
        try:
            cap = int(cap)
        except ValueError:
            raise ConfigError(f"MADIRL_THREADS must be an integer, got {cap!r}")
        if cap >= 1:
            k = min(k, cap)
    return max(1, k)


def rollout_episode(env, learner, seed, mode, act_rng=None):
    """One full episode; returns (transitions, per-agent score)."""
    obs = env.reset(seed)
    transitions = []
    done = False
    step = 0
    while not done:
        actions = learner.act(obs, mode, act_rng)
        next_obs, rewards, done = env.step(actions)
        transitions.append(JointTransition(obs=obs, actions=actions,
                                           next_obs=next_obs, gt_rewards=rewards,
                                           done=done, step_index=step))
        obs = next_obs
        step += 1
    score = episode_score(np.stack([t.gt_rewards for t in transitions]))
    return transitions, score


def batch_of_episode(spec, transitions):
    """Pack one episode's transitions into a Batch (for reward models)."""
    n = spec.n_agents
    return Batch(
        obs=[np.stack([t.obs[i] for t in transitions]) for i in range(n)],
        actions=[np.array([t.actions[i] for t in transitions], dtype=np.int64)
                 for i in range(n)],
        next_obs=[np.stack([t.next_obs[i] for t in transitions]) for i in range(n)],
        done=np.array([t.done for t in transitions], dtype=np.float32),
        gt_rewards=np.stack([t.gt_rewards for t in transitions]),
    )


def log_pi_of(policies, batch):
    """Current-policy log probabilities of the batch's taken actions, (B, N);
    computed through log-softmax (no underflow), returned as constants."""
    out = np.empty((batch.size, len(policies)), dtype=np.float64)
    with no_grad():
        for i, pol in enumerate(policies):
            logp = pol.log_probs(batch.obs[i]).values
            out[:, i] = logp[np.arange(batch.size), batch.actions[i]]
    return out


def random_baseline(env_id, seed, n_episodes=500):
    """Mean per-agent episode score (and its standard error) under uniformly
    random actions for all agents."""
    env = make_env(env_id)
    streams = StreamSet(seed)
    env_rng = streams.get("baseline-env")
    act_rng = streams.get("baseline-act")
    scores = np.empty((n_episodes, env.spec.n_agents))
    for e in range(n_episodes):
        env.reset(int(env_rng.integers(1 << 62)))
        rewards = []
        done = False
        while not done:
            actions = [int(act_rng.integers(n)) for n in env.spec.n_actions]
            _, r, done = env.step(actions)
            rewards.append(r)
        scores[e] = episode_score(np.stack(rewards))
    return {"mean": scores.mean(axis=0),
            "sem": scores.std(axis=0, ddof=1) / np.sqrt(n_episodes),
            "episodes": n_episodes}


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON-serializable: {type(x)}")


def _sha256_of(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _evaluate_greedy(env, learner, seeds):
    scores = np.empty((len(seeds), env.spec.n_agents))
    for k, seed in enumerate(seeds):
        _, scores[k] = rollout_episode(env, learner, int(seed), "argmax")
    return scores


class _RunWriter:
    """Run-directory bookkeeping: metrics rows, event log, final record."""

    def __init__(self, out_dir, cfg, spec):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        (self.dir / "checkpoints").mkdir(exist_ok=True)
        cfg.dump(self.dir / "config.resolved.json")
        self.columns = (["episode", "nss"]
                        + [f"score_agent_{i}" for i in range(spec.n_agents)]
                        + ["disc_loss", "critic_loss"]
                        + [f"policy_loss_{i}" for i in range(spec.n_agents)])
        self._metrics = open(self.dir / "metrics.csv", "w")
        self._metrics.write(",".join(self.columns) + "\n")
        self._events = open(self.dir / "events.jsonl", "w")
        self.iteration = 0
        self.started = time.time()

    @staticmethod
    def _fmt(v):
        if v is None:
            return ""
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        return f"{float(v):.10g}"

    def metrics_row(self, **fields):
        self._metrics.write(",".join(self._fmt(fields.get(c)) for c in self.columns) + "\n")
        self._metrics.flush()

    def event(self, kind, episode, round_idx=None):
        rec = {"iteration": self.iteration, "event": kind, "episode": episode}
        if round_idx is not None:
            rec["round"] = round_idx
        self._events.write(json.dumps(rec) + "\n")

    def finish(self, record):
        record = dict(record)
        record["wall_clock_sec"] = round(time.time() - self.started, 3)
        (self.dir / "run_record.json").write_text(
            json.dumps(record, indent=1, sort_keys=True, default=_jsonable) + "\n")
        self._metrics.close()
        self._events.close()
        return record


class _TrainingLoop:
    """Episode collection, update scheduling, periodic greedy evaluation.

    ``round_fn(episode, round_idx, batch)`` performs one gradient round given
    a replay batch and returns nothing; reward sourcing lives inside it.
    """

    def __init__(self, cfg: ExperimentConfig, out_dir, score_e=None, score_r=None):
        self.cfg = cfg
        self.spec = make_env(cfg.env).spec
        self.streams = StreamSet(cfg.seed)
        self.k_workers = worker_count(cfg)
        self.envs = [make_env(cfg.env) for _ in range(self.k_workers)]
        self.env_rngs = [self.streams.get(f"env/{w}") for w in range(self.k_workers)]
        self.act_rngs = [self.streams.get(f"act/{w}") for w in range(self.k_workers)]
        self.eval_env = make_env(cfg.env)
        self.eval_rng = self.streams.get("eval-env")
        self.replay_rng = self.streams.get("replay")
        self.demo_rng = self.streams.get("demo-sample")
        self.learner = MAACLearner(
            self.spec, self.streams.get("init"), self.streams.get("updates"),
            hidden_dim=cfg.hidden_dim, n_heads=cfg.attn_heads, gamma=cfg.gamma,
            lr_policy=cfg.lr_policy, lr_critic=cfg.lr_critic,
            tau_policy=cfg.tau_policy, tau_critic=cfg.tau_critic,
            entropy_coef=cfg.entropy_coef, critic_clip=cfg.critic_clip,
            huber_delta=cfg.huber_delta)
        self.buffer = ReplayBuffer(self.spec, cfg.buffer_size)
        self.score_e = score_e
        self.score_r = score_r
        self.writer = _RunWriter(out_dir, cfg, self.spec)
        self.last_losses = {"critic": None, "disc": None,
                            "policies": [None] * self.spec.n_agents}
        self.last_good = self.learner.named_values()
        self.round_fn = None
        self.eval_hook = None        # callback(episode, eval_seeds) after each eval
        self.final_nss = None
        self.final_scores = None
        self.episodes_run = 0
        self.stop_reason = None

    def run_id(self):
        return f"{self.cfg.algorithm}-{self.cfg.env.replace(':', '_')}-seed{self.cfg.seed}"

    def ckpt_meta(self):
        return {"env_id": self.cfg.env, "game_spec": self.spec.to_dict(),
                "net": self.learner.net_config(), "algorithm": self.cfg.algorithm,
                "seed": self.cfg.seed}

    def run(self):
        cfg = self.cfg
        steps_since_update = 0
        try:
            for episode in range(cfg.episodes):
                w = episode % self.k_workers
                seed = int(self.env_rngs[w].integers(1 << 62))
                transitions, _ = rollout_episode(self.envs[w], self.learner, seed,
                                                 "sample", self.act_rngs[w])
                for t in transitions:
                    self.buffer.push(t)
                steps_since_update += len(transitions)
                warmup = min(cfg.batch_size, self.buffer.capacity)
                while steps_since_update >= cfg.update_period:
                    steps_since_update -= cfg.update_period
                    if len(self.buffer) >= warmup:
                        for r in range(cfg.updates_per_event):
                            self.round_fn(episode, r)
                        self.writer.iteration += 1
                self.episodes_run = episode + 1
                if (episode + 1) % cfg.eval_every == 0 and self._evaluate(episode + 1):
                    self.stop_reason = "early_stop"
                    return
            self.stop_reason = "budget_exhausted"
        except NumericError as e:
            save_params(self.writer.dir / "checkpoints" / "last_good.ckpt",
                        self.last_good, extra=self.ckpt_meta())
            self.writer.finish({"run_id": self.run_id(), "status": "aborted",
                                "error": str(e), "episodes_run": self.episodes_run})
            raise UsageError(f"training aborted on non-finite loss "
                             f"(last good checkpoint saved): {e}") from e

    def _evaluate(self, episode):
        cfg = self.cfg
        seeds = self.eval_rng.integers(1 << 62, size=cfg.eval_episodes)
        scores = _evaluate_greedy(self.eval_env, self.learner, seeds)
        score_a = scores.mean(axis=0)
        self.final_scores = score_a
        nss_val = None
        if self.score_e is not None and self.score_r is not None:
            nss_val = nss(ScoreTriple(score_a, self.score_e, self.score_r))
            self.final_nss = nss_val
        row = {"episode": episode, "nss": nss_val,
               "disc_loss": self.last_losses["disc"],
               "critic_loss": self.last_losses["critic"]}
        for i in range(self.spec.n_agents):
            row[f"score_agent_{i}"] = score_a[i]
            row[f"policy_loss_{i}"] = self.last_losses["policies"][i]
        self.writer.metrics_row(**row)
        self.writer.event("eval", episode)
        self.last_good = self.learner.named_values()
        if self.eval_hook is not None:
            self.eval_hook(episode, seeds)
        if cfg.early_stop_nss is not None and nss_val is not None \
                and nss_val >= cfg.early_stop_nss:
            return True
        if cfg.early_stop_score is not None \
                and float(score_a.mean()) >= cfg.early_stop_score:
            return True
        return False

    def save_learner(self, name="learner.ckpt"):
        path = self.writer.dir / "checkpoints" / name
        save_params(path, self.learner.named_values(), extra=self.ckpt_meta())
        return path

    def base_record(self, status="completed"):
        return {"run_id": self.run_id(), "status": status,
                "stop_reason": self.stop_reason, "episodes_run": self.episodes_run,
                "final_nss": self.final_nss,
                "final_scores": self.final_scores,
                "score_e": self.score_e, "score_r": self.score_r,
                "workers": self.k_workers}


# ---------------------------------------------------------------------------
# run kinds
# ---------------------------------------------------------------------------

def train_expert(cfg: ExperimentConfig, out_dir):
    """Actor-attention-critic training on the environment's own rewards;
    emits the expert checkpoint and its greedy score statistics."""
    cfg = cfg.resolved()
    if cfg.algorithm != "expert-maac":
        raise ConfigError(f"train_expert needs algorithm 'expert-maac', "
                          f"got {cfg.algorithm!r}")
    loop = _TrainingLoop(cfg, out_dir)

    def round_fn(episode, r):
        batch = loop.buffer.sample(cfg.batch_size, loop.replay_rng)
        loop.writer.event("rewards_computed", episode, r)
        loop.last_losses["critic"] = loop.learner.update_critic(batch, batch.gt_rewards)
        loop.last_losses["policies"] = loop.learner.update_policies(batch)
        loop.learner.update_targets()
        loop.writer.event("maac_update", episode, r)

    loop.round_fn = round_fn
    loop.run()
    ckpt = loop.save_learner()

    eval_seeds = loop.streams.get("expert-eval").integers(
        1 << 62, size=cfg.expert_eval_episodes)
    scores = _evaluate_greedy(loop.eval_env, loop.learner, eval_seeds)
    record = loop.base_record()
    record.update({
        "checkpoint": str(ckpt),
        "expert_score_mean": scores.mean(axis=0),
        "expert_score_sem": scores.std(axis=0, ddof=1) / np.sqrt(len(eval_seeds)),
        "expert_eval_episodes": int(cfg.expert_eval_episodes),
    })
    return loop.writer.finish(record)


def generate_demos(env_id, expert_ckpt, count, seed, out_path, hidden_dim=None):
    """Record ``count`` greedy episodes from an expert checkpoint into a
    ``.demos`` file; the demo-average scores land in the metadata."""
    from ..autodiff import load_params

    named, meta = load_params(expert_ckpt)
    env = make_env(env_id)
    if meta.get("env_id") != env_id:
        raise FormatError(f"checkpoint was trained on {meta.get('env_id')!r}, "
                          f"not {env_id!r}")
    net = meta.get("net", {})
    learner = MAACLearner(env.spec, np.random.default_rng(0), np.random.default_rng(0),
                          hidden_dim=hidden_dim or int(net.get("hidden_dim", 128)),
                          n_heads=int(net.get("n_heads", 4)))
    learner.load_named_values(named)
    streams = StreamSet(seed)
    env_rng = streams.get("demo-env")
    episodes, scores = [], []
    for _ in range(count):
        transitions, score = rollout_episode(env, learner, int(env_rng.integers(1 << 62)),
                                             "argmax")
        episodes.append(transitions)
        scores.append(score)
    mean_scores = np.mean(scores, axis=0)
    demos = DemoSet(spec=env.spec,
                    episodes=episodes_from_transitions(env.spec, episodes),
                    meta={"env_id": env_id, "count": count, "seed": int(seed),
                          "expert_checkpoint_sha256": _sha256_of(expert_ckpt),
                          "mean_scores": [float(s) for s in mean_scores]})
    save_demos(demos, out_path)
    return demos


def train_irl(cfg: ExperimentConfig, demos_path, out_dir):
    """Adversarial reward/policy learning from demonstrations: each round
    computes rewards with the current discriminator, runs one actor-critic
    round on them, then updates the discriminator on the same agent batch
    against a fresh expert batch."""
    cfg = cfg.resolved()
    if cfg.algorithm not in ("ma-daac", "ma-gail"):
        raise ConfigError(f"train_irl needs algorithm 'ma-daac' or 'ma-gail', "
                          f"got {cfg.algorithm!r}")
    spec = make_env(cfg.env).spec
    demos = load_demos(demos_path, expected_spec=spec)
    if cfg.demo_count is None:
        cfg.demo_count = len(demos)
    score_e = np.asarray(demos.meta.get("mean_scores") or demos.mean_scores(),
                         dtype=np.float64)
    baseline = random_baseline(cfg.env, cfg.seed, cfg.random_episodes)
    score_r = baseline["mean"]
    # reject a degenerate normalization before any training happens
    nss(ScoreTriple(score_e, score_e, score_r))

    loop = _TrainingLoop(cfg, out_dir, score_e=score_e, score_r=score_r)
    streams = loop.streams
    if cfg.algorithm == "ma-daac":
        disc = AirlDiscriminator(spec, cfg.disc_variant, cfg.gamma,
                                 streams.get("disc-init"), hidden_dim=cfg.hidden_dim)
    else:
        disc = GailDiscriminator(spec, streams.get("disc-init"),
                                 hidden_dim=cfg.hidden_dim)
    disc_opt = Adam(disc.parameters(), cfg.lr_disc)

    def round_fn(episode, r):
        agent_batch = loop.buffer.sample(cfg.batch_size, loop.replay_rng)
        expert_batch = demos.sample(cfg.batch_size, loop.demo_rng)
        if cfg.algorithm == "ma-daac":
            # tracked forward: the same f tensors feed this round's rewards
            # now and the discriminator objective after the actor update
            f_agent = disc.f_values(agent_batch.obs,
                                    disc._onehots(agent_batch.actions),
                                    agent_batch.next_obs)
            f_vals = np.stack([f_agent[i].values[:, 0]
                               for i in range(spec.n_agents)], axis=1)
            rewards = f_vals - log_pi_of(loop.learner.policies, agent_batch)
        else:
            rewards = disc.rewards(agent_batch)
        loop.writer.event("rewards_computed", episode, r)

        loop.last_losses["critic"] = loop.learner.update_critic(agent_batch, rewards)
        loop.last_losses["policies"] = loop.learner.update_policies(agent_batch)
        loop.learner.update_targets()
        loop.writer.event("maac_update", episode, r)

        if cfg.algorithm == "ma-daac":
            loss = disc.loss_from_f(f_agent,
                                    log_pi_of(loop.learner.policies, agent_batch),
                                    expert_batch,
                                    log_pi_of(loop.learner.policies, expert_batch),
                                    entropy_coef=cfg.disc_entropy_coef)
        else:
            loss = disc.loss(agent_batch, expert_batch,
                             entropy_coef=cfg.disc_entropy_coef)
        disc.zero_grad()
        loss.backward()
        clip_grad_norm([p.grad for p in disc.parameters() if p.grad is not None],
                       cfg.disc_clip)
        disc_opt.step()
        disc.zero_grad()
        loop.last_losses["disc"] = float(loss.values)
        loop.writer.event("disc_update", episode, r)

    loop.round_fn = round_fn
    loop.run()
    ckpt = loop.save_learner()
    disc_path = loop.writer.dir / "checkpoints" / "disc.ckpt"
    extra = {"env_id": cfg.env, "variant": getattr(disc, "variant", "classifier"),
             "algorithm": cfg.algorithm}
    if cfg.algorithm == "ma-daac":
        save_params(disc_path, disc_checkpoint_values(disc), extra=extra)
        reward_path = loop.writer.dir / "checkpoints" / "reward.ckpt"
        save_reward_export(reward_path, disc, extra={
            "env_id": cfg.env, "source_run": loop.run_id(),
            "score_e": [float(s) for s in score_e],
            "score_r": [float(s) for s in score_r],
            "demo_count": len(demos)})
    else:
        save_params(disc_path, disc.value_dict(prefix="disc/"), extra=extra)
        reward_path = None

    record = loop.base_record()
    record.update({"checkpoint": str(ckpt), "disc_checkpoint": str(disc_path),
                   "reward_export": str(reward_path) if reward_path else None,
                   "demo_count": len(demos), "demos_file": str(demos_path),
                   "demos_sha256": _sha256_of(demos_path)})
    return loop.writer.finish(record)


def retrain(cfg: ExperimentConfig, reward_export_path, out_dir):
    """Train fresh policies with the exported learned reward as the only
    reward signal; logged environment rewards are used solely for scores and
    the reward-correlation diagnostic. The same attention-critic learner is
    used at every scale. Control modes: ``ground_truth`` uses the logged
    rewards (sanity upper bound), ``zero`` uses an all-zero reward."""
    cfg = cfg.resolved()
    if cfg.algorithm != "retrain":
        raise ConfigError(f"retrain needs algorithm 'retrain', got {cfg.algorithm!r}")
    learned = LearnedReward.load(reward_export_path)
    if learned.meta.get("env_id") != cfg.env:
        raise FormatError(f"reward export is for {learned.meta.get('env_id')!r}, "
                          f"not {cfg.env!r}")
    score_e = np.asarray(learned.meta["score_e"], dtype=np.float64)
    score_r = np.asarray(learned.meta["score_r"], dtype=np.float64)

    loop = _TrainingLoop(cfg, out_dir, score_e=score_e, score_r=score_r)

    def reward_fn(batch):
        if cfg.retrain_reward == "learned":
            return learned.rewards(batch)
        if cfg.retrain_reward == "zero":
            return np.zeros((batch.size, loop.spec.n_agents), dtype=np.float32)
        return batch.gt_rewards

    def round_fn(episode, r):
        batch = loop.buffer.sample(cfg.batch_size, loop.replay_rng)
        rewards = reward_fn(batch)
        loop.writer.event("rewards_computed", episode, r)
        loop.last_losses["critic"] = loop.learner.update_critic(batch, rewards)
        loop.last_losses["policies"] = loop.learner.update_policies(batch)
        loop.learner.update_targets()
        loop.writer.event("maac_update", episode, r)

    # reward-correlation pairs collected over evaluation episodes
    learned_vals, logged_vals = [], []

    def eval_hook(episode, seeds):
        for seed in seeds:
            transitions, _ = rollout_episode(loop.eval_env, loop.learner,
                                             int(seed), "argmax")
            ep = batch_of_episode(loop.spec, transitions)
            learned_vals.append(reward_fn(ep).ravel())
            logged_vals.append(ep.gt_rewards.ravel())

    loop.round_fn = round_fn
    loop.eval_hook = eval_hook
    loop.run()
    ckpt = loop.save_learner()

    pcc_val = None
    if learned_vals:
        x = np.concatenate(learned_vals)
        y = np.concatenate(logged_vals)
        if x.std() > 0 and y.std() > 0:
            pcc_val = pcc(x, y)
    record = loop.base_record()
    record.update({"checkpoint": str(ckpt), "pcc": pcc_val,
                   "reward_export": str(reward_export_path),
                   "retrain_reward": cfg.retrain_reward,
                   "retrain_marl": "attention-critic (all scales)"})
    return loop.writer.finish(record)


def evaluate_checkpoint(env_id, ckpt_path, n_episodes, seed, demos_path=None,
                        random_episodes=500):
    """Greedy evaluation of a saved learner; with demos, also reports the
    normalized score against the demo average and a fresh random baseline."""
    from ..autodiff import load_params

    named, meta = load_params(ckpt_path)
    env = make_env(env_id)
    if meta.get("env_id") not in (None, env_id):
        raise FormatError(f"checkpoint was trained on {meta.get('env_id')!r}, "
                          f"not {env_id!r}")
    net = meta.get("net", {})
    learner = MAACLearner(env.spec, np.random.default_rng(0), np.random.default_rng(0),
                          hidden_dim=int(net.get("hidden_dim", 128)),
                          n_heads=int(net.get("n_heads", 4)))
    learner.load_named_values(named)
    seeds = StreamSet(seed).get("eval-env").integers(1 << 62, size=n_episodes)
    scores = _evaluate_greedy(env, learner, seeds)
    out = {"score_mean": scores.mean(axis=0),
           "score_sem": scores.std(axis=0, ddof=1) / np.sqrt(n_episodes),
           "episodes": int(n_episodes)}
    if demos_path is not None:
        demos = load_demos(demos_path, expected_spec=env.spec)
        score_e = np.asarray(demos.meta.get("mean_scores") or demos.mean_scores())
        baseline = random_baseline(env_id, seed, random_episodes)
        out["nss"] = nss(ScoreTriple(scores.mean(axis=0), score_e, baseline["mean"]))
        out["score_e"] = score_e
        out["score_r"] = baseline["mean"]
    return out
