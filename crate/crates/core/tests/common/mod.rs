//! Independent reference implementations used as test oracles. Nothing here
//! calls the library's numerics; only plain loops over raw parameters.

#![allow(dead_code)]

use trajher::agent::{AgentConfig, DdpgAgent};
use trajher::env::{ACTION_DIM, EPISODE_STEPS, GOAL_DIM, OBS_DIM, SEGMENT_STEPS};
use trajher::numerics::{Mlp, OutputActivation, RunningNormalizer, SeededRng};
use trajher::replay::{Batch, Episode};

/// Forward pass from the flat layout: per layer, row-major `(out, in)`
/// weights then biases; tanh on hidden layers.
pub fn mlp_forward(sizes: &[usize], params: &[f64], tanh_out: bool, x: &[f64]) -> Vec<f64> {
    let mut a = x.to_vec();
    let mut off = 0;
    let layers = sizes.len() - 1;
    for l in 0..layers {
        let (n_in, n_out) = (sizes[l], sizes[l + 1]);
        let w = &params[off..off + n_in * n_out];
        let b = &params[off + n_in * n_out..off + (n_in + 1) * n_out];
        let mut z = vec![0.0; n_out];
        for o in 0..n_out {
            let mut s = b[o];
            for i in 0..n_in {
                s += w[o * n_in + i] * a[i];
            }
            z[o] = if l + 1 < layers || tanh_out { s.tanh() } else { s };
        }
        off += (n_in + 1) * n_out;
        a = z;
    }
    a
}

fn net_forward(net: &Mlp, params: &[f64], x: &[f64]) -> Vec<f64> {
    mlp_forward(
        net.layer_sizes(),
        params,
        net.output_activation() == OutputActivation::Tanh,
        x,
    )
}

/// `clip((v - mean) / max(std, eps), ±clip)` from raw running sums.
pub fn normalize(n: &RunningNormalizer, v: &[f64]) -> Vec<f64> {
    let dim = n.sum.len();
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let d = i % dim;
            let (mean, std) = if n.count == 0.0 {
                (0.0, 1.0)
            } else {
                let m = n.sum[d] / n.count;
                let var = (n.sum_sq[d] / n.count - m * m).max(0.0);
                (m, var.sqrt())
            };
            ((x - mean) / std.max(n.eps_std)).clamp(-n.clip, n.clip)
        })
        .collect()
}

/// Network input: the observation with its active-goal slot (last three
/// entries) replaced by the conditioning goal, then the goal itself.
fn state_input(agent: &DdpgAgent, obs: &[f64], goal: &[f64]) -> Vec<f64> {
    let mut obs = obs.to_vec();
    obs[OBS_DIM - GOAL_DIM..].copy_from_slice(goal);
    let mut x = normalize(&agent.obs_normalizer, &obs);
    x.extend(normalize(&agent.goal_normalizer, goal));
    x
}

fn row<'a>(v: &'a [f64], i: usize, w: usize) -> &'a [f64] {
    &v[i * w..(i + 1) * w]
}

/// Mean squared TD error with `critic_params` substituted for the critic.
pub fn critic_loss(agent: &DdpgAgent, batch: &Batch, critic_params: &[f64]) -> f64 {
    let (lo, hi) = agent.target_clip;
    let mut total = 0.0;
    for i in 0..batch.size {
        let s_next = state_input(agent, row(&batch.next_obs, i, OBS_DIM), row(&batch.next_goal, i, GOAL_DIM));
        let a_next = net_forward(&agent.target_actor, agent.target_actor.params(), &s_next);
        let mut xc_next = s_next.clone();
        xc_next.extend(&a_next);
        let q_next = net_forward(&agent.target_critic, agent.target_critic.params(), &xc_next)[0];
        let y = (batch.reward[i] + agent.gamma * q_next).clamp(lo, hi);

        let mut xc = state_input(agent, row(&batch.obs, i, OBS_DIM), row(&batch.goal, i, GOAL_DIM));
        xc.extend(row(&batch.action, i, ACTION_DIM));
        let q = net_forward(&agent.critic, critic_params, &xc)[0];
        total += (q - y) * (q - y);
    }
    total / batch.size as f64
}

/// `-mean Q(s, pi(s)) + c mean(pi^2)` with `actor_params` substituted.
pub fn actor_loss(agent: &DdpgAgent, batch: &Batch, actor_params: &[f64]) -> f64 {
    let mut q_sum = 0.0;
    let mut sq = 0.0;
    for i in 0..batch.size {
        let s = state_input(agent, row(&batch.obs, i, OBS_DIM), row(&batch.goal, i, GOAL_DIM));
        let pi = net_forward(&agent.actor, actor_params, &s);
        sq += pi.iter().map(|a| a * a).sum::<f64>();
        let mut xc = s;
        xc.extend(&pi);
        q_sum += net_forward(&agent.critic, agent.critic.params(), &xc)[0];
    }
    let n = batch.size as f64;
    -q_sum / n + agent.action_l2 * sq / (n * ACTION_DIM as f64)
}

/// Central finite-difference gradient of `f` at `params`.
pub fn finite_difference(params: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..p.len())
        .map(|k| {
            let orig = p[k];
            p[k] = orig + h;
            let up = f(&p);
            p[k] = orig - h;
            let down = f(&p);
            p[k] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `|a - b| / max(|a|, |b|, floor)`; the floor keeps near-zero entries from
/// dominating through cancellation noise.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Agent with random widths and depths, randomized normalizer statistics and
/// target networks that differ from the main networks.
pub fn random_agent(rng: &mut SeededRng) -> DdpgAgent {
    let depth = 1 + rng.below(3);
    let hidden = (0..depth).map(|_| 2 + rng.below(7)).collect();
    let cfg = AgentConfig {
        hidden,
        action_l2: rng.uniform_range(0.0, 2.0),
        gamma: rng.uniform_range(0.5, 0.99),
        ..AgentConfig::default()
    };
    let mut agent = DdpgAgent::new(&cfg, (-60.0, 0.0), rng).unwrap();
    for p in agent.target_actor.params_mut().iter_mut() {
        *p += rng.uniform_range(-0.1, 0.1);
    }
    for p in agent.target_critic.params_mut().iter_mut() {
        *p += rng.uniform_range(-0.1, 0.1);
    }
    let obs: Vec<f64> = (0..20 * OBS_DIM).map(|_| rng.uniform_range(-0.2, 0.3)).collect();
    let goals: Vec<f64> = (0..20 * GOAL_DIM).map(|_| rng.uniform_range(-0.15, 0.15)).collect();
    agent.obs_normalizer.update(&obs).unwrap();
    agent.goal_normalizer.update(&goals).unwrap();
    agent
}

pub fn random_batch(n: usize, rng: &mut SeededRng) -> Batch {
    let mut v = |k: usize, lo: f64, hi: f64| (0..k).map(|_| rng.uniform_range(lo, hi)).collect::<Vec<_>>();
    let goal = v(n * GOAL_DIM, -0.15, 0.15);
    Batch {
        size: n,
        obs: v(n * OBS_DIM, -0.2, 0.3),
        action: v(n * ACTION_DIM, -1.0, 1.0),
        reward: v(n, -3.0, 0.0),
        next_obs: v(n * OBS_DIM, -0.2, 0.3),
        next_goal: goal.clone(),
        goal,
        sources: Vec::new(),
    }
}

/// Sparse x-y term plus asymmetric dense height term, written out directly.
pub fn reference_reward(achieved: [f64; 3], goal: [f64; 3], z_weight: f64, with_z: bool) -> f64 {
    let dxy = ((achieved[0] - goal[0]).powi(2) + (achieved[1] - goal[1]).powi(2)).sqrt();
    let r_xy = if dxy <= 0.02 { 0.0 } else { -1.0 };
    if !with_z {
        return r_xy;
    }
    let dz = (achieved[2] - goal[2]).abs();
    let slope = if achieved[2] < goal[2] { z_weight } else { z_weight / 2.0 };
    r_xy - slope * dz
}

/// Episode whose rows encode their own identity: `obs[0] = id`, `obs[1] = t`,
/// achieved x = `t * 1e-3`, so sampled tuples can be traced without trusting
/// any bookkeeping from the sampler.
pub fn tagged_episode(id: usize, rng: &mut SeededRng) -> Episode {
    let t_max = EPISODE_STEPS;
    let mut observations = vec![0.0; (t_max + 1) * OBS_DIM];
    for t in 0..=t_max {
        observations[t * OBS_DIM] = id as f64;
        observations[t * OBS_DIM + 1] = t as f64;
        for k in 2..OBS_DIM {
            observations[t * OBS_DIM + k] = rng.uniform_range(-0.1, 0.1);
        }
    }
    let achieved_goals: Vec<[f64; 3]> = (0..=t_max)
        .map(|t| [t as f64 * 1e-3, rng.uniform_range(-0.1, 0.1), rng.uniform_range(0.0325, 0.2)])
        .collect();
    let seg_goals: Vec<[f64; 3]> = (0..3)
        .map(|_| [rng.uniform_range(0.5, 0.6), rng.uniform_range(-0.1, 0.1), rng.uniform_range(0.0325, 0.15)])
        .collect();
    Episode {
        observations,
        actions: (0..t_max * ACTION_DIM).map(|_| rng.uniform_range(-1.0, 1.0)).collect(),
        achieved_goals,
        desired_goals: (0..t_max).map(|t| seg_goals[t / SEGMENT_STEPS]).collect(),
        segment_ids: (0..t_max).map(|t| (t / SEGMENT_STEPS) as u8).collect(),
        dr_sample: Default::default(),
        success: false,
    }
}
