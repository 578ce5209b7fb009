use crate::agent::{DdpgAgent, ExplorationConfig};
use crate::env::rollout_log::StepRecord;
use crate::env::{is_success, CubeEnv, ACTION_DIM, EPISODE_STEPS, OBS_DIM, SEGMENT_STEPS};
use crate::error::Result;
use crate::numerics::SeededRng;
use crate::replay::Episode;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    Exploratory,
    Exploiting,
}

/// Anything that can pick an action from an observation and the active goal.
pub trait Policy {
    fn act(&mut self, obs: &[f64], goal: &[f64; 3], kind: PolicyKind, rng: &mut SeededRng) -> Result<Vec<f64>>;
}

/// DDPG agent paired with its exploration settings.
pub struct AgentPolicy<'a> {
    pub agent: &'a DdpgAgent,
    pub exploration: ExplorationConfig,
}

impl Policy for AgentPolicy<'_> {
    fn act(&mut self, obs: &[f64], goal: &[f64; 3], kind: PolicyKind, rng: &mut SeededRng) -> Result<Vec<f64>> {
        match kind {
            PolicyKind::Exploratory => self.agent.act_explore(obs, goal, rng, &self.exploration),
            PolicyKind::Exploiting => self.agent.act_exploit(obs, goal),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub episode: Episode,
    pub records: Vec<StepRecord>,
    pub total_reward: f64,
}

/// Runs one full episode from a fresh reset.
pub fn collect_rollout<P: Policy + ?Sized>(
    policy: &mut P,
    env: &mut CubeEnv,
    kind: PolicyKind,
    rng: &mut SeededRng,
) -> Result<Rollout> {
    let mut obs = env.reset(rng);
    let mut observations = Vec::with_capacity((EPISODE_STEPS + 1) * OBS_DIM);
    let mut actions = Vec::with_capacity(EPISODE_STEPS * ACTION_DIM);
    let mut achieved_goals = Vec::with_capacity(EPISODE_STEPS + 1);
    let mut desired_goals = Vec::with_capacity(EPISODE_STEPS);
    let mut records = Vec::with_capacity(EPISODE_STEPS);
    let mut total_reward = 0.0;

    observations.extend_from_slice(&obs);
    achieved_goals.push(env.state().cube_position);
    for t in 0..EPISODE_STEPS {
        let goal = env.state().active_goal();
        let action = policy.act(&obs, &goal, kind, rng)?;
        let out = env.step(&action)?;
        let commanded = env.state().prev_action;
        actions.extend_from_slice(&commanded);
        observations.extend_from_slice(&out.observation);
        achieved_goals.push(out.achieved_goal);
        desired_goals.push(out.goal);
        total_reward += out.reward;
        records.push(StepRecord {
            episode: 0,
            step: t,
            action: commanded.to_vec(),
            achieved: out.achieved_goal,
            goal: out.goal,
            reward: out.reward,
            success: out.success,
        });
        obs = out.observation;
    }
    let final_goal = env.state().trajectory.final_goal();
    let success = is_success(&achieved_goals[EPISODE_STEPS], &final_goal);
    let episode = Episode {
        observations,
        actions,
        achieved_goals,
        desired_goals,
        segment_ids: (0..EPISODE_STEPS).map(|t| (t / SEGMENT_STEPS) as u8).collect(),
        dr_sample: env.state().dr_sample,
        success,
    };
    Ok(Rollout {
        episode,
        records,
        total_reward,
    })
}
