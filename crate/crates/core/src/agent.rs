//! DDPG actor-critic over normalized `(observation, goal)` inputs.

use ndarray::{s, Array2, ArrayView2};

use crate::env::{RewardConfig, RewardMode, ACTION_DIM, GOAL_DIM, OBS_DIM, OBS_GOAL_OFFSET};
use crate::error::{Error, Result};
use crate::numerics::{adam_step, polyak_update, AdamState, Mlp, OutputActivation, RunningNormalizer, SeededRng};
use crate::replay::{Batch, Episode};

pub const ACTOR_INPUT_DIM: usize = OBS_DIM + GOAL_DIM;
pub const CRITIC_INPUT_DIM: usize = ACTOR_INPUT_DIM + ACTION_DIM;

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub gamma: f64,
    /// Fraction of the old target kept at each polyak update.
    pub polyak: f64,
    pub action_l2: f64,
    pub batch_size: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            hidden: vec![256, 256, 256],
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            gamma: 0.98,
            polyak: 0.95,
            action_l2: 1.0,
            batch_size: 256,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::Config(format!("agent.hidden must be positive sizes, got {:?}", self.hidden)));
        }
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!("agent.gamma {} outside [0, 1)", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.polyak) {
            return Err(Error::Config(format!("agent.polyak {} outside [0, 1]", self.polyak)));
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0 && self.action_l2 >= 0.0) {
            return Err(Error::Config("learning rates must be positive, action_l2 non-negative".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("agent.batch_size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExplorationConfig {
    pub random_action_probability: f64,
    pub noise_std: f64,
}

impl Default for ExplorationConfig {
    fn default() -> Self {
        Self {
            random_action_probability: 0.3,
            noise_std: 0.2,
        }
    }
}

impl ExplorationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.random_action_probability) || !(self.noise_std >= 0.0) {
            return Err(Error::Config(
                "exploration probability must be in [0, 1] and noise std non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Bounds applied to bootstrapped critic targets. Rewards are nonpositive, so
/// returns lie in `[-(worst step reward) / (1 - gamma), 0]`.
pub fn target_bounds(gamma: f64, reward: RewardConfig, max_height: f64) -> (f64, f64) {
    let worst_step = match reward.mode {
        RewardMode::Full => 1.0 + reward.z_weight * max_height,
        RewardMode::PushOnly | RewardMode::Sparse3d => 1.0,
    };
    (-worst_step / (1.0 - gamma), 0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossAndGrad {
    pub loss: f64,
    pub grads: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DdpgAgent {
    pub actor: Mlp,
    pub critic: Mlp,
    pub target_actor: Mlp,
    pub target_critic: Mlp,
    pub obs_normalizer: RunningNormalizer,
    pub goal_normalizer: RunningNormalizer,
    pub actor_adam: AdamState,
    pub critic_adam: AdamState,
    pub gamma: f64,
    pub polyak: f64,
    pub action_l2: f64,
    pub target_clip: (f64, f64),
}

fn check_finite(name: &str, v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::NonFinite(format!("{name}[{i}] = {}", v[i]))),
        None => Ok(()),
    }
}

impl DdpgAgent {
    pub fn new(cfg: &AgentConfig, target_clip: (f64, f64), rng: &mut SeededRng) -> Result<Self> {
        cfg.validate()?;
        let mut actor_sizes = vec![ACTOR_INPUT_DIM];
        actor_sizes.extend(&cfg.hidden);
        actor_sizes.push(ACTION_DIM);
        let mut critic_sizes = vec![CRITIC_INPUT_DIM];
        critic_sizes.extend(&cfg.hidden);
        critic_sizes.push(1);

        let actor = Mlp::new(&actor_sizes, OutputActivation::Tanh, rng)?;
        let critic = Mlp::new(&critic_sizes, OutputActivation::Identity, rng)?;
        Ok(Self {
            actor_adam: AdamState::new(actor.param_count(), cfg.actor_lr),
            critic_adam: AdamState::new(critic.param_count(), cfg.critic_lr),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
            obs_normalizer: RunningNormalizer::new(OBS_DIM),
            goal_normalizer: RunningNormalizer::new(GOAL_DIM),
            gamma: cfg.gamma,
            polyak: cfg.polyak,
            action_l2: cfg.action_l2,
            target_clip,
        })
    }

    /// Normalized `[obs | goal]` rows for the actor. The observation's
    /// active-goal slot is overwritten with `goal` so a relabeled tuple never
    /// carries two different goals.
    fn actor_inputs(&self, obs: &[f64], goal: &[f64]) -> Result<Array2<f64>> {
        if obs.len() % OBS_DIM != 0 || goal.len() % GOAL_DIM != 0 || obs.len() / OBS_DIM != goal.len() / GOAL_DIM {
            return Err(Error::Config(format!(
                "observation/goal sizes {} / {} do not form matching rows",
                obs.len(),
                goal.len()
            )));
        }
        let n = obs.len() / OBS_DIM;
        let mut obs = obs.to_vec();
        for (row, g) in obs.chunks_exact_mut(OBS_DIM).zip(goal.chunks_exact(GOAL_DIM)) {
            row[OBS_GOAL_OFFSET..].copy_from_slice(g);
        }
        let nobs = self.obs_normalizer.normalize(&obs)?;
        let ngoal = self.goal_normalizer.normalize(goal)?;
        let mut x = Array2::<f64>::zeros((n, ACTOR_INPUT_DIM));
        for (i, mut row) in x.rows_mut().into_iter().enumerate() {
            let row = row.as_slice_mut().expect("standard layout");
            row[..OBS_DIM].copy_from_slice(&nobs[i * OBS_DIM..(i + 1) * OBS_DIM]);
            row[OBS_DIM..].copy_from_slice(&ngoal[i * GOAL_DIM..(i + 1) * GOAL_DIM]);
        }
        Ok(x)
    }

    fn critic_inputs(state: ArrayView2<'_, f64>, actions: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut x = Array2::<f64>::zeros((state.nrows(), CRITIC_INPUT_DIM));
        x.slice_mut(s![.., ..ACTOR_INPUT_DIM]).assign(&state);
        x.slice_mut(s![.., ACTOR_INPUT_DIM..]).assign(&actions);
        x
    }

    /// Deterministic policy action.
    pub fn act_exploit(&self, obs: &[f64], goal: &[f64]) -> Result<Vec<f64>> {
        if obs.len() != OBS_DIM || goal.len() != GOAL_DIM {
            return Err(Error::Config(format!(
                "act expects {OBS_DIM}-d observation and {GOAL_DIM}-d goal, got {} and {}",
                obs.len(),
                goal.len()
            )));
        }
        let x = self.actor_inputs(obs, goal)?;
        let cache = self.actor.forward_batch(x.view())?;
        Ok(cache.output().iter().copied().collect())
    }

    /// Uniform random action with the configured probability, otherwise the
    /// policy action plus clipped Gaussian noise.
    pub fn act_explore(
        &self,
        obs: &[f64],
        goal: &[f64],
        rng: &mut SeededRng,
        cfg: &ExplorationConfig,
    ) -> Result<Vec<f64>> {
        if rng.bernoulli(cfg.random_action_probability) {
            return Ok((0..ACTION_DIM).map(|_| rng.uniform_range(-1.0, 1.0)).collect());
        }
        let mut a = self.act_exploit(obs, goal)?;
        crate::env::add_action_noise(&mut a, cfg.noise_std, rng);
        Ok(a)
    }

    fn check_batch(batch: &Batch) -> Result<()> {
        let n = batch.size;
        if n == 0
            || batch.obs.len() != n * OBS_DIM
            || batch.next_obs.len() != n * OBS_DIM
            || batch.goal.len() != n * GOAL_DIM
            || batch.next_goal.len() != n * GOAL_DIM
            || batch.action.len() != n * ACTION_DIM
            || batch.reward.len() != n
        {
            return Err(Error::Config("malformed batch".into()));
        }
        check_finite("obs", &batch.obs)?;
        check_finite("next_obs", &batch.next_obs)?;
        check_finite("goal", &batch.goal)?;
        check_finite("next_goal", &batch.next_goal)?;
        check_finite("action", &batch.action)?;
        check_finite("reward", &batch.reward)
    }

    /// Clipped one-step bootstrapped targets from the target networks.
    pub fn critic_targets(&self, batch: &Batch) -> Result<Vec<f64>> {
        Self::check_batch(batch)?;
        let x_next = self.actor_inputs(&batch.next_obs, &batch.next_goal)?;
        let a_next = self.target_actor.forward_batch(x_next.view())?;
        let xc_next = Self::critic_inputs(x_next.view(), a_next.output().view());
        let q_next = self.target_critic.forward_batch(xc_next.view())?;
        let (lo, hi) = self.target_clip;
        Ok(batch
            .reward
            .iter()
            .zip(q_next.output().column(0))
            .map(|(r, q)| (r + self.gamma * q).clamp(lo, hi))
            .collect())
    }

    /// Mean squared TD error and its gradient with respect to critic parameters.
    pub fn critic_loss(&self, batch: &Batch) -> Result<LossAndGrad> {
        let targets = self.critic_targets(batch)?;
        let n = batch.size as f64;
        let x = self.actor_inputs(&batch.obs, &batch.goal)?;
        let actions = ArrayView2::from_shape((batch.size, ACTION_DIM), &batch.action).expect("checked");
        let xc = Self::critic_inputs(x.view(), actions);
        let cache = self.critic.forward_batch(xc.view())?;
        let mut loss = 0.0;
        let mut upstream = Array2::<f64>::zeros((batch.size, 1));
        for (i, (&q, y)) in cache.output().column(0).iter().zip(&targets).enumerate() {
            let diff = q - y;
            loss += diff * diff;
            upstream[[i, 0]] = 2.0 * diff / n;
        }
        let (grads, _) = self.critic.backward_batch(&cache, upstream.view())?;
        Ok(LossAndGrad { loss: loss / n, grads })
    }

    /// `-mean Q(s, g, pi(s, g)) + action_l2 * mean(pi^2)` and its gradient with
    /// respect to actor parameters. The critic is only read.
    pub fn actor_loss(&self, batch: &Batch) -> Result<LossAndGrad> {
        Self::check_batch(batch)?;
        let n = batch.size;
        let x = self.actor_inputs(&batch.obs, &batch.goal)?;
        let actor_cache = self.actor.forward_batch(x.view())?;
        let pi = actor_cache.output();
        let xc = Self::critic_inputs(x.view(), pi.view());
        let critic_cache = self.critic.forward_batch(xc.view())?;

        let n_act = (n * ACTION_DIM) as f64;
        let q_mean = critic_cache.output().sum() / n as f64;
        let l2 = pi.iter().map(|a| a * a).sum::<f64>() / n_act;
        let loss = -q_mean + self.action_l2 * l2;

        let upstream = Array2::<f64>::from_elem((n, 1), -1.0 / n as f64);
        let dx = self.critic.backward_input(&critic_cache, upstream.view())?;
        let mut da = dx.slice(s![.., ACTOR_INPUT_DIM..]).to_owned();
        da.zip_mut_with(pi, |g, &a| *g += 2.0 * self.action_l2 * a / n_act);
        let (grads, _) = self.actor.backward_batch(&actor_cache, da.view())?;
        Ok(LossAndGrad { loss, grads })
    }

    /// One critic step then one actor step per batch, then a single polyak
    /// update of both target networks.
    pub fn update(&mut self, batches: &[Batch]) -> Result<UpdateStats> {
        if batches.is_empty() {
            return Err(Error::Config("update needs at least one batch".into()));
        }
        let mut stats = UpdateStats::default();
        for batch in batches {
            let c = self.critic_loss(batch)?;
            adam_step(self.critic.params_mut(), &c.grads, &mut self.critic_adam)?;
            let a = self.actor_loss(batch)?;
            adam_step(self.actor.params_mut(), &a.grads, &mut self.actor_adam)?;
            stats.critic_loss += c.loss;
            stats.actor_loss += a.loss;
        }
        self.update_targets()?;
        let k = batches.len() as f64;
        stats.critic_loss /= k;
        stats.actor_loss /= k;
        Ok(stats)
    }

    pub fn update_targets(&mut self) -> Result<()> {
        polyak_update(self.target_actor.params_mut(), self.actor.params(), self.polyak)?;
        polyak_update(self.target_critic.params_mut(), self.critic.params(), self.polyak)
    }

    /// Folds a collected rollout into the input normalizers. Goals include
    /// achieved positions, the pool hindsight goals are drawn from.
    pub fn update_normalizers(&mut self, episode: &Episode) -> Result<()> {
        self.obs_normalizer.update(&episode.observations)?;
        let goals: Vec<f64> = episode
            .desired_goals
            .iter()
            .chain(&episode.achieved_goals)
            .flatten()
            .copied()
            .collect();
        self.goal_normalizer.update(&goals)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> AgentConfig {
        AgentConfig {
            hidden: vec![8, 8],
            ..AgentConfig::default()
        }
    }

    fn zero_agent() -> DdpgAgent {
        let mut a = DdpgAgent::new(&small_cfg(), (-50.0, 0.0), &mut SeededRng::new(0)).unwrap();
        for net in [&mut a.actor, &mut a.critic, &mut a.target_actor, &mut a.target_critic] {
            net.params_mut().iter_mut().for_each(|p| *p = 0.0);
        }
        a
    }

    #[test]
    fn observation_goal_slot_is_replaced_by_conditioning_goal() {
        let agent = DdpgAgent::new(&small_cfg(), (-50.0, 0.0), &mut SeededRng::new(3)).unwrap();
        let goal = [0.05, -0.02, 0.1];
        let mut obs = vec![0.01; OBS_DIM];
        let a = agent.act_exploit(&obs, &goal).unwrap();
        obs[OBS_GOAL_OFFSET..].copy_from_slice(&[-0.1, 0.1, 0.03]);
        assert_eq!(agent.act_exploit(&obs, &goal).unwrap(), a);
        obs[0] = 0.2;
        assert_ne!(agent.act_exploit(&obs, &goal).unwrap(), a);
    }

    fn batch(n: usize, rng: &mut SeededRng) -> Batch {
        let mut v = |k: usize, lo: f64, hi: f64| (0..k).map(|_| rng.uniform_range(lo, hi)).collect::<Vec<_>>();
        let goal = v(n * GOAL_DIM, -0.1, 0.1);
        Batch {
            size: n,
            obs: v(n * OBS_DIM, -0.2, 0.2),
            action: v(n * ACTION_DIM, -1.0, 1.0),
            reward: v(n, -2.0, 0.0),
            next_obs: v(n * OBS_DIM, -0.2, 0.2),
            next_goal: goal.clone(),
            goal,
            sources: Vec::new(),
        }
    }

    #[test]
    fn exploit_is_deterministic_and_bounded() {
        let agent = DdpgAgent::new(&small_cfg(), (-50.0, 0.0), &mut SeededRng::new(1)).unwrap();
        let obs = vec![0.3; OBS_DIM];
        let g = [0.1, -0.1, 0.05];
        let a1 = agent.act_exploit(&obs, &g).unwrap();
        let a2 = agent.act_exploit(&obs, &g).unwrap();
        assert_eq!(a1, a2);
        assert!(a1.iter().all(|a| a.abs() < 1.0));
        assert!(agent.act_exploit(&obs[..10], &g).is_err());
    }

    #[test]
    fn zero_actor_gives_zero_action() {
        let agent = zero_agent();
        assert_eq!(agent.act_exploit(&[0.7; OBS_DIM], &[0.0; 3]).unwrap(), vec![0.0; ACTION_DIM]);
    }

    #[test]
    fn no_exploration_equals_exploit() {
        let agent = DdpgAgent::new(&small_cfg(), (-50.0, 0.0), &mut SeededRng::new(2)).unwrap();
        let cfg = ExplorationConfig {
            random_action_probability: 0.0,
            noise_std: 0.0,
        };
        let obs = vec![0.1; OBS_DIM];
        let g = [0.0, 0.1, 0.2];
        let mut rng = SeededRng::new(3);
        assert_eq!(
            agent.act_explore(&obs, &g, &mut rng, &cfg).unwrap(),
            agent.act_exploit(&obs, &g).unwrap()
        );
    }

    #[test]
    fn zero_gamma_targets_are_rewards() {
        let mut agent = DdpgAgent::new(&small_cfg(), (-50.0, 0.0), &mut SeededRng::new(4)).unwrap();
        agent.gamma = 0.0;
        let b = batch(16, &mut SeededRng::new(5));
        assert_eq!(agent.critic_targets(&b).unwrap(), b.reward);
    }

    #[test]
    fn targets_respect_clip() {
        let mut agent = DdpgAgent::new(&small_cfg(), (-50.0, 0.0), &mut SeededRng::new(4)).unwrap();
        let n = agent.target_critic.param_count();
        agent.target_critic.params_mut()[n - 1] = 1e4;
        let b = batch(8, &mut SeededRng::new(6));
        assert!(agent.critic_targets(&b).unwrap().iter().all(|&y| y == 0.0));
        agent.target_critic.params_mut()[n - 1] = -1e4;
        assert!(agent.critic_targets(&b).unwrap().iter().all(|&y| y == -50.0));
    }

    #[test]
    fn constant_critic_gives_zero_actor_gradient() {
        let mut agent = DdpgAgent::new(&small_cfg(), (-50.0, 0.0), &mut SeededRng::new(7)).unwrap();
        agent.critic.params_mut().iter_mut().for_each(|p| *p = 0.0);
        agent.action_l2 = 0.0;
        let b = batch(10, &mut SeededRng::new(8));
        let g = agent.actor_loss(&b).unwrap();
        assert!(g.grads.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn nan_batch_rejected() {
        let agent = zero_agent();
        let mut b = batch(4, &mut SeededRng::new(9));
        b.reward[2] = f64::NAN;
        assert!(matches!(agent.critic_loss(&b), Err(Error::NonFinite(_))));
        assert!(matches!(agent.actor_loss(&b), Err(Error::NonFinite(_))));
    }

    #[test]
    fn degenerate_update_only_advances_counters() {
        let mut agent = zero_agent();
        let mut b = batch(6, &mut SeededRng::new(10));
        b.reward.iter_mut().for_each(|r| *r = 0.0);
        let before = agent.clone();
        agent.update(&[b.clone(), b]).unwrap();
        assert_eq!(agent.actor, before.actor);
        assert_eq!(agent.critic, before.critic);
        assert_eq!(agent.actor_adam.step, 2);
        assert_eq!(agent.critic_adam.step, 2);
    }

    #[test]
    fn polyak_extremes() {
        let b = batch(8, &mut SeededRng::new(11));
        let mut keep = DdpgAgent::new(&small_cfg(), (-50.0, 0.0), &mut SeededRng::new(12)).unwrap();
        keep.polyak = 1.0;
        let targets = (keep.target_actor.clone(), keep.target_critic.clone());
        keep.update(std::slice::from_ref(&b)).unwrap();
        assert_eq!((keep.target_actor.clone(), keep.target_critic.clone()), targets);
        assert_ne!(keep.actor, keep.target_actor);

        let mut copy = DdpgAgent::new(&small_cfg(), (-50.0, 0.0), &mut SeededRng::new(12)).unwrap();
        copy.polyak = 0.0;
        copy.update(std::slice::from_ref(&b)).unwrap();
        assert_eq!(copy.target_actor.params(), copy.actor.params());
        assert_eq!(copy.target_critic.params(), copy.critic.params());
    }

    #[test]
    fn actor_step_leaves_critic_untouched() {
        let mut agent = DdpgAgent::new(&small_cfg(), (-50.0, 0.0), &mut SeededRng::new(13)).unwrap();
        let b = batch(8, &mut SeededRng::new(14));
        let critic = agent.critic.clone();
        let g = agent.actor_loss(&b).unwrap();
        adam_step(agent.actor.params_mut(), &g.grads, &mut agent.actor_adam).unwrap();
        assert_eq!(agent.critic, critic);
    }

    #[test]
    fn target_bounds_by_mode() {
        let sparse = RewardConfig {
            mode: RewardMode::Sparse3d,
            z_weight: 20.0,
        };
        let (lo, hi) = target_bounds(0.98, sparse, 0.27);
        assert!((lo + 50.0).abs() < 1e-9 && hi == 0.0);
        let (lo, _) = target_bounds(0.98, RewardConfig::default(), 0.27);
        assert!((lo + 6.4 / 0.02).abs() < 1e-9);
    }
}
