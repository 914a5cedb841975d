"""Acceptance criteria, one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s`. Criteria 5-7 share one
session-scoped desk-scale workflow (expert -> demos -> three reward-learning
seeds) on the exactly solvable grid game.
"""

import csv
import json
import math
import time
from types import SimpleNamespace

import numpy as np
import pytest

from madirl.actors import AttentionCritic, DiscretePolicy
from madirl.autodiff import (MLP, check_gradients, copy_values, load_params,
                             one_hot, smooth_seeds)
from madirl.discriminators import AirlDiscriminator, d_value, reward_value
from madirl.envs import make_env, toy_optimal_score
from madirl.evaluation import ScoreTriple, count_params, nss, pcc, report
from madirl.orchestrator import (ExperimentConfig, generate_demos, retrain,
                                 train_expert, train_irl)
from madirl.replay import ReplayBuffer

from helpers import random_batch, tiny_spec
from test_actors import _critic_loss_case
from test_discriminators import disc_gradcheck_case

IRL_SEEDS = (100, 101, 102)


def _line(criterion, ok, detail):
    print(f"\n{'PASS' if ok else 'FAIL'} criterion-{criterion}: {detail}")
    return ok


def _first_crossing(run_dir, level):
    with open(f"{run_dir}/metrics.csv") as f:
        for row in csv.DictReader(f):
            if row["nss"] and float(row["nss"]) >= level:
                return int(row["episode"])
    return None


@pytest.fixture(scope="session")
def desk(tmp_path_factory):
    """Expert, 50 demos, and three adversarial reward-learning seeds."""
    root = tmp_path_factory.mktemp("desk")
    optimal = toy_optimal_score(make_env("toy_coop"))
    t0 = time.time()

    expert_cfg = ExperimentConfig(env="toy_coop", algorithm="expert-maac", seed=0,
                                  episodes=5000, eval_every=100,
                                  expert_eval_episodes=100,
                                  early_stop_score=0.96 * optimal[0])
    expert_rec = train_expert(expert_cfg, root / "expert")
    demos_path = root / "expert50.demos"
    demos = generate_demos("toy_coop", root / "expert" / "checkpoints" / "learner.ckpt",
                           50, 1, demos_path)

    irl_recs = {}
    for seed in IRL_SEEDS:
        cfg = ExperimentConfig(env="toy_coop", algorithm="ma-daac", seed=seed,
                               episodes=5000, eval_every=100, early_stop_nss=0.8,
                               disc_variant="decentralized")
        irl_recs[seed] = train_irl(cfg, demos_path, root / f"irl{seed}")

    return SimpleNamespace(root=root, optimal=optimal, expert=expert_rec,
                           demos=demos, demos_path=demos_path, irl=irl_recs,
                           elapsed=time.time() - t0)


def test_criterion_1_gradient_fidelity():
    t0 = time.time()
    worst = 0.0

    def policy_case(seed):
        rng = np.random.default_rng(seed)
        pol = DiscretePolicy(3, 3, rng, hidden_dim=8, dtype=np.float64)
        obs = rng.normal(size=(4, 3))
        taken = rng.integers(3, size=4)
        adv = rng.normal(size=4)

        def loss_fn():
            from madirl.autodiff import (gather, log_softmax, mul, neg,
                                         reduce_mean, reduce_sum, softmax)

            logits = pol.logits(obs)
            logp = log_softmax(logits)
            ent = reduce_mean(neg(reduce_sum(mul(softmax(logits), logp), axis=1)))
            return reduce_mean(mul(neg(gather(logp, taken)), adv)) + mul(ent, -0.01)

        return pol, loss_fn

    spec = tiny_spec(n_agents=2, obs_dim=3, n_actions=3)
    cases = {
        "policy": policy_case,
        "attention-critic": _critic_loss_case(spec),
        "disc-decentralized": disc_gradcheck_case(spec, "decentralized"),
        "disc-centralized": disc_gradcheck_case(spec, "centralized"),
    }
    for name, build in cases.items():
        for seed in smooth_seeds(lambda s: build(s)[1], 10):
            model, loss_fn = build(seed)
            err = check_gradients(loss_fn, model.named_parameters(), eps=1e-3)
            worst = max(worst, err)
            assert err < 1e-4, f"{name} seed {seed}: rel err {err}"
    elapsed = time.time() - t0
    ok = worst < 1e-4 and elapsed < 60
    assert _line(1, ok, f"worst rel err {worst:.2e} over 4 network kinds x 10 seeds, "
                        f"{elapsed:.1f}s")


def test_criterion_2_attention_invariants():
    t0 = time.time()
    spec = tiny_spec(n_agents=4, obs_dim=5, n_actions=4)
    rng = np.random.default_rng(0)
    critic = AttentionCritic(spec, rng, hidden_dim=16, n_heads=4)
    obs = [rng.normal(size=(6, 5)).astype(np.float32) for _ in range(4)]
    acts = [one_hot(rng.integers(4, size=6), 4) for _ in range(4)]
    for i in range(4):
        for w in critic.attention_weights(obs, acts, i):
            np.testing.assert_allclose(w.sum(axis=1), 1.0, atol=1e-6)

    for a in critic.agents[1:]:
        copy_values(a, critic.agents[0])
    same_obs, same_act = obs[0], acts[0]
    w_uniform = critic.attention_weights([same_obs] * 4, [same_act] * 4, 2)
    for w in w_uniform:
        np.testing.assert_allclose(w, 1 / 3, atol=1e-6)

    before = critic.attention_weights(obs, acts, 3)
    critic.shared.keys[0].W.values += 0.25
    after = critic.attention_weights(obs, acts, 3)
    shared_is_single_storage = any(not np.array_equal(b, a)
                                   for b, a in zip(before, after))
    assert shared_is_single_storage
    assert _line(2, True, f"rows normalized, uniform under identical embeddings, "
                          f"shared storage verified ({time.time() - t0:.1f}s)")


def test_criterion_3_structured_discriminator_identities():
    t0 = time.time()
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(1000):
        f = float(rng.normal(scale=3.0))
        pi = float(rng.uniform(0.01, 1.0))
        d = d_value(f, pi)
        worst = max(worst, abs(math.log(d) - math.log(1 - d) - reward_value(f, pi)))
    assert worst < 1e-6

    spec = tiny_spec()
    gamma = 0.995
    disc = AirlDiscriminator(spec, "decentralized", gamma, np.random.default_rng(1),
                             hidden_dim=8, dtype=np.float64)
    batch = random_batch(spec, 6, rng, dtype=np.float64)
    acts = [one_hot(batch.actions[i], 3, np.float64) for i in range(2)]
    f0 = [t.values.copy() for t in disc.f_values(batch.obs, acts, batch.next_obs)]
    c = 2.3
    for net in disc.nets:
        net.h.layers[-1].b.values += c
    f1 = disc.f_values(batch.obs, acts, batch.next_obs)
    shift_err = max(float(np.abs(f1[i].values - f0[i] - (gamma - 1) * c).max())
                    for i in range(2))
    assert shift_err < 1e-6

    log_pi = np.full((6, 2), math.log(0.5))
    r0 = disc.rewards(batch, log_pi)
    batch.obs[1] += 4.0
    batch.next_obs[1] -= 2.0
    batch.actions[1] = (batch.actions[1] + 1) % 3
    r1 = disc.rewards(batch, log_pi)
    assert np.array_equal(r0[:, 0], r1[:, 0])
    assert _line(3, True, f"log-odds identity (worst {worst:.1e}), potential shift "
                          f"(worst {shift_err:.1e}), local invariance exact "
                          f"({time.time() - t0:.1f}s)")


def test_criterion_4_normalized_score_arithmetic():
    t0 = time.time()
    table = nss(ScoreTriple(np.array([-80.248]), np.array([-77.129]),
                            np.array([-178.575])))
    assert abs(table - 0.9693) < 1e-3
    e, r = np.array([4.0, -3.0]), np.array([-1.0, -9.0])
    assert nss(ScoreTriple(e, e, r)) == 1.0
    assert nss(ScoreTriple(r, e, r)) == 0.0
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(200):
        a = rng.normal(size=3)
        ee = rng.normal(size=3) + 4.0
        rr = rng.normal(size=3) - 4.0
        alpha, beta = float(rng.uniform(0.1, 20)), float(rng.uniform(-30, 30))
        worst = max(worst, abs(nss(ScoreTriple(alpha * a + beta, alpha * ee + beta,
                                               alpha * rr + beta))
                               - nss(ScoreTriple(a, ee, rr))))
    assert worst < 1e-9
    assert _line(4, True, f"published-score example {table:.4f}, boundaries exact, "
                          f"affine invariance worst {worst:.1e} "
                          f"({time.time() - t0:.1f}s)")


def test_criterion_5_desk_scale_imitation(desk):
    optimal = desk.optimal[0]
    expert_scores = np.asarray(desk.expert["expert_score_mean"])
    expert_ok = float(expert_scores.mean()) >= 0.95 * optimal
    passes = {seed: rec["final_nss"] is not None and rec["final_nss"] >= 0.8
              for seed, rec in desk.irl.items()}
    ok = (expert_ok and sum(passes.values()) >= 2 and desk.elapsed <= 15 * 60
          and all(rec["episodes_run"] <= 5000 for rec in desk.irl.values())
          and desk.expert["episodes_run"] <= 5000)
    detail = (f"expert {expert_scores.mean():.3f} vs 0.95x optimal "
              f"{0.95 * optimal:.3f} in {desk.expert['episodes_run']} episodes; "
              f"imitation NSS "
              + ", ".join(f"seed {s}: {desk.irl[s]['final_nss']:.3f}@"
                          f"{desk.irl[s]['episodes_run']}ep" for s in IRL_SEEDS)
              + f"; {sum(passes.values())}/3 seeds >= 0.8; total {desk.elapsed:.0f}s")
    assert _line(5, ok, detail)


@pytest.fixture(scope="session")
def recovery(desk, tmp_path_factory):
    root = tmp_path_factory.mktemp("recovery")
    good_seed = next(s for s in IRL_SEEDS
                     if desk.irl[s]["final_nss"] and desk.irl[s]["final_nss"] >= 0.8)
    export = desk.root / f"irl{good_seed}" / "checkpoints" / "reward.ckpt"
    t0 = time.time()
    recs = {}
    for mode, stop, budget in (("learned", 0.7, 5000), ("ground_truth", 0.9, 5000),
                               ("zero", None, 600)):
        cfg = ExperimentConfig(env="toy_coop", algorithm="retrain", seed=21,
                               episodes=budget, eval_every=100,
                               early_stop_nss=stop, retrain_reward=mode)
        recs[mode] = retrain(cfg, export, root / f"retrain_{mode}")
    return SimpleNamespace(root=root, recs=recs, export=export,
                           elapsed=time.time() - t0)


def test_criterion_6_reward_recovery(recovery):
    learned = recovery.recs["learned"]
    gt = recovery.recs["ground_truth"]
    zero = recovery.recs["zero"]
    ok = (learned["final_nss"] >= 0.7 and learned["episodes_run"] <= 5000
          and gt["final_nss"] >= 0.9 and abs(zero["final_nss"]) <= 0.1
          and recovery.elapsed <= 20 * 60)
    detail = (f"learned-reward retrain NSS {learned['final_nss']:.3f}@"
              f"{learned['episodes_run']}ep, logged-reward control "
              f"{gt['final_nss']:.3f}, zero-reward control {zero['final_nss']:+.3f}; "
              f"{recovery.elapsed:.0f}s")
    assert _line(6, ok, detail)


def test_criterion_7_sample_efficiency(desk, tmp_path_factory):
    root = tmp_path_factory.mktemp("ablation")
    ref_cross = [_first_crossing(desk.root / f"irl{s}", 0.6) for s in IRL_SEEDS]
    assert all(c is not None for c in ref_cross), f"reference never crossed 0.6: {ref_cross}"
    ref_median = float(np.median(ref_cross))
    cap = min(5000, int(math.ceil(ref_median * 1.6 / 100)) * 100 + 100)

    abl_cross = []
    for seed in IRL_SEEDS:
        cfg = ExperimentConfig(env="toy_coop", algorithm="ma-daac", seed=seed,
                               episodes=cap, eval_every=100, early_stop_nss=0.6,
                               disc_variant="decentralized", buffer_size=100)
        train_irl(cfg, desk.demos_path, root / f"abl{seed}")
        crossed = _first_crossing(root / f"abl{seed}", 0.6)
        abl_cross.append(crossed if crossed is not None else cap)
    abl_median = float(np.median(abl_cross))
    ok = ref_median <= 0.7 * abl_median
    assert _line(7, ok, f"episodes to NSS 0.6 - replay: median {ref_median:.0f} "
                        f"{ref_cross}; one-rollout-buffer ablation: median "
                        f"{abl_median:.0f} {abl_cross} (cap {cap}); "
                        f"ratio {ref_median / abl_median:.2f} <= 0.7 required")


class _NaiveJointCritic:
    """Comparison fixture: per-agent value heads over the concatenated joint
    observation/action input (no sharing, no attention)."""

    def __init__(self, spec, hidden=128):
        rng = np.random.default_rng(0)
        joint = sum(spec.obs_dims) + sum(spec.n_actions)
        self.nets = [MLP([joint, hidden, hidden, spec.n_actions[i]], rng)
                     for i in range(spec.n_agents)]

    def named_shapes(self):
        out = {}
        for i, net in enumerate(self.nets):
            out.update({f"critic/agent{i}/{k}": v
                        for k, v in net.value_dict().items()})
        return out


def test_criterion_8_parameter_scaling():
    t0 = time.time()
    agent_counts = np.array([4, 8, 12, 16])
    shared_counts, naive_counts = [], []
    for n in agent_counts:
        spec = tiny_spec(n_agents=int(n), obs_dim=8, n_actions=5)
        critic = AttentionCritic(spec, np.random.default_rng(0),
                                 hidden_dim=32, n_heads=4)
        shared_counts.append(count_params(critic.checkpoint_values()).total)
        naive_counts.append(count_params(_NaiveJointCritic(spec, hidden=32)
                                         .named_shapes()).total)

    A1 = np.stack([np.ones(4), agent_counts], axis=1).astype(float)
    coef1, *_ = np.linalg.lstsq(A1, np.array(shared_counts, float), rcond=None)
    residual = np.abs(np.array(shared_counts) - A1 @ coef1).max()
    A2 = np.stack([np.ones(4), agent_counts, agent_counts ** 2], axis=1).astype(float)
    coef2, *_ = np.linalg.lstsq(A2, np.array(naive_counts, float), rcond=None)
    ok = residual < 1e-6 and coef2[2] > 0
    assert _line(8, ok, f"shared critic affine fit residual {residual:.1e} over "
                        f"N={list(agent_counts)}; naive joint critic quadratic "
                        f"term {coef2[2]:.0f} params/N^2 ({time.time() - t0:.1f}s)")


def test_criterion_9_replay_and_determinism(desk, tmp_path_factory):
    from scipy import stats

    from madirl.envs import JointTransition

    t0 = time.time()
    spec = tiny_spec()
    buf = ReplayBuffer(spec, capacity=3)
    rng = np.random.default_rng(0)
    for tag in range(1, 6):
        buf.push(JointTransition(
            obs=[np.zeros(4, dtype=np.float32)] * 2, actions=np.array([0, 0]),
            next_obs=[np.zeros(4, dtype=np.float32)] * 2,
            gt_rewards=np.full(2, float(tag), dtype=np.float32),
            done=False, step_index=0))
    np.testing.assert_array_equal(buf.contents_gt()[:, 0], [3.0, 4.0, 5.0])

    buf10 = ReplayBuffer(spec, capacity=10)
    for tag in range(10):
        buf10.push(JointTransition(
            obs=[np.zeros(4, dtype=np.float32)] * 2, actions=np.array([0, 0]),
            next_obs=[np.zeros(4, dtype=np.float32)] * 2,
            gt_rewards=np.full(2, float(tag), dtype=np.float32),
            done=False, step_index=0))
    draws = buf10.sample(100_000, np.random.default_rng(1)).gt_rewards[:, 0]
    counts = np.bincount(draws.astype(int), minlength=10)
    chi_p = stats.chisquare(counts).pvalue
    assert chi_p > 0.001

    root = tmp_path_factory.mktemp("determinism")
    for name in ("a", "b"):
        cfg = ExperimentConfig(env="toy_coop", algorithm="ma-daac", seed=7,
                               episodes=200, eval_every=50,
                               disc_variant="decentralized")
        train_irl(cfg, desk.demos_path, root / name)
    identical = (root / "a" / "metrics.csv").read_bytes() == \
        (root / "b" / "metrics.csv").read_bytes()
    ckpt_identical = all(
        (root / "a" / "checkpoints" / ck).read_bytes() ==
        (root / "b" / "checkpoints" / ck).read_bytes()
        for ck in ("learner.ckpt", "disc.ckpt", "reward.ckpt"))
    elapsed = time.time() - t0
    ok = identical and ckpt_identical and elapsed <= 5 * 60
    assert _line(9, ok, f"FIFO exact, uniformity chi-square p={chi_p:.3f}, "
                        f"repeat runs bit-identical (metrics + checkpoints), "
                        f"{elapsed:.0f}s")


def test_criterion_10_discriminator_learning():
    from madirl.autodiff import Adam, clip_grad_norm

    t0 = time.time()
    spec = tiny_spec(n_agents=2, obs_dim=4, n_actions=3)
    results = []
    for seed in range(5):
        disc = AirlDiscriminator(spec, "decentralized", 0.995,
                                 np.random.default_rng(seed), hidden_dim=128)
        opt = Adam(disc.parameters(), 5e-4)
        rng = np.random.default_rng(1000 + seed)

        def make(center, b=200):
            batch = random_batch(spec, b, rng)
            for o in batch.obs + batch.next_obs:
                o += center
            return batch

        log_pi = np.full((200, 2), math.log(1 / 3))
        for _ in range(500):
            loss = disc.loss(make(-1.0), log_pi, make(+1.0), log_pi)
            disc.zero_grad()
            loss.backward()
            clip_grad_norm([p.grad for p in disc.parameters()
                            if p.grad is not None], 10.0)
            opt.step()
            disc.zero_grad()
        d_exp = float(disc.d_values(make(+1.0), log_pi).mean())
        d_agt = float(disc.d_values(make(-1.0), log_pi).mean())
        results.append((d_exp, d_agt))
        assert d_exp > 0.7 and d_agt < 0.3, f"seed {seed}: {d_exp:.3f}/{d_agt:.3f}"
    elapsed = time.time() - t0
    ok = elapsed < 60
    assert _line(10, ok, "5/5 seeds separate synthetic data after 500 updates "
                         + ", ".join(f"({e:.2f},{a:.2f})" for e, a in results)
                         + f"; {elapsed:.0f}s")


def test_criterion_11_reward_correlation_analysis(recovery, tmp_path_factory):
    hand = pcc([1.0, 2.0, 3.0], [1.0, 2.0, 4.0])
    assert abs(hand - 0.9820) < 1e-3
    learned = recovery.recs["learned"]
    assert learned["pcc"] is not None
    summary_dir = tmp_path_factory.mktemp("summary")
    payload = report([recovery.root / "retrain_learned"], summary_dir)
    observations = payload["observations"]
    ok = (learned["final_nss"] >= 0.7 and len(observations) >= 1
          and "correlation" in observations[0])
    assert _line(11, ok, f"hand-computed correlation {hand:.4f}; retraining emitted "
                         f"correlation {learned['pcc']:.3f} alongside NSS "
                         f"{learned['final_nss']:.3f}; report observation recorded: "
                         f"{observations[0][:80]}...")
