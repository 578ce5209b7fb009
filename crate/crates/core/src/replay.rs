//! Episode replay buffer with segment-aware hindsight relabeling.
//!
//! Rewards are never stored: every sampled transition has its reward
//! recomputed from the achieved goal after the step and the (possibly
//! relabeled) goal.

use std::collections::VecDeque;

use crate::env::{
    compute_reward, DrSample, RewardConfig, ACTION_DIM, EPISODE_STEPS, GOAL_DIM, OBS_DIM, SEGMENT_STEPS,
};
use crate::error::{Error, Result};
use crate::numerics::SeededRng;

/// One complete 90-step rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    /// `(T + 1) x OBS_DIM`, row-major.
    pub observations: Vec<f64>,
    /// `T x ACTION_DIM`, row-major.
    pub actions: Vec<f64>,
    /// Cube position before the first step and after every step (`T + 1`).
    pub achieved_goals: Vec<[f64; 3]>,
    /// Active goal at each step (`T`).
    pub desired_goals: Vec<[f64; 3]>,
    pub segment_ids: Vec<u8>,
    pub dr_sample: DrSample,
    /// Final cube position within the threshold of the final goal.
    pub success: bool,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.actions.len() / ACTION_DIM
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn observation(&self, t: usize) -> &[f64] {
        &self.observations[t * OBS_DIM..(t + 1) * OBS_DIM]
    }

    pub fn action(&self, t: usize) -> &[f64] {
        &self.actions[t * ACTION_DIM..(t + 1) * ACTION_DIM]
    }

    pub fn validate(&self) -> Result<()> {
        let t = EPISODE_STEPS;
        if self.actions.len() != t * ACTION_DIM
            || self.observations.len() != (t + 1) * OBS_DIM
            || self.achieved_goals.len() != t + 1
            || self.desired_goals.len() != t
            || self.segment_ids.len() != t
        {
            return Err(Error::Input(format!(
                "episode arrays have inconsistent lengths (actions {}, observations {}, achieved {}, desired {}, segments {})",
                self.actions.len(),
                self.observations.len(),
                self.achieved_goals.len(),
                self.desired_goals.len(),
                self.segment_ids.len()
            )));
        }
        for step in 0..t {
            if self.segment_ids[step] as usize != step / SEGMENT_STEPS {
                return Err(Error::Input(format!("segment id at step {step} is {}", self.segment_ids[step])));
            }
            let first = (step / SEGMENT_STEPS) * SEGMENT_STEPS;
            if self.desired_goals[step] != self.desired_goals[first] {
                return Err(Error::Input(format!("desired goal changes inside segment at step {step}")));
            }
        }
        let finite = self.observations.iter().chain(&self.actions).all(|v| v.is_finite())
            && self.achieved_goals.iter().chain(&self.desired_goals).flatten().all(|v| v.is_finite());
        if !finite {
            return Err(Error::Input("episode contains non-finite values".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HerConfig {
    pub relabel_probability: f64,
    /// Draw substitute goals only from the active segment of the transition.
    pub segment_restricted: bool,
    /// Substitute the height too; otherwise only x-y are replaced.
    pub relabel_z: bool,
    pub reward: RewardConfig,
}

impl Default for HerConfig {
    fn default() -> Self {
        Self {
            relabel_probability: 0.8,
            segment_restricted: true,
            relabel_z: false,
            reward: RewardConfig::default(),
        }
    }
}

impl HerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.relabel_probability) {
            return Err(Error::Config(format!(
                "her.relabel_probability {} outside [0, 1]",
                self.relabel_probability
            )));
        }
        Ok(())
    }
}

/// Where a sampled transition came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleSource {
    /// Index into the buffer at sampling time.
    pub episode: usize,
    pub t: usize,
    /// Step whose achieved goal replaced the stored goal, if relabeled.
    pub future: Option<usize>,
}

/// Row-major training batch of `(obs, goal, action, reward, next_obs, next_goal)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub size: usize,
    pub obs: Vec<f64>,
    pub goal: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: Vec<f64>,
    pub next_obs: Vec<f64>,
    pub next_goal: Vec<f64>,
    pub sources: Vec<SampleSource>,
}

impl Batch {
    fn with_capacity(n: usize) -> Self {
        Self {
            size: 0,
            obs: Vec::with_capacity(n * OBS_DIM),
            goal: Vec::with_capacity(n * GOAL_DIM),
            action: Vec::with_capacity(n * ACTION_DIM),
            reward: Vec::with_capacity(n),
            next_obs: Vec::with_capacity(n * OBS_DIM),
            next_goal: Vec::with_capacity(n * GOAL_DIM),
            sources: Vec::with_capacity(n),
        }
    }

    pub fn goal_at(&self, i: usize) -> [f64; 3] {
        let g = &self.goal[i * GOAL_DIM..(i + 1) * GOAL_DIM];
        [g[0], g[1], g[2]]
    }
}

/// Last step index of the segment containing `t`.
pub fn segment_end(t: usize) -> usize {
    (t / SEGMENT_STEPS) * SEGMENT_STEPS + SEGMENT_STEPS - 1
}

/// Reward of transition `t` of `episode` evaluated against `goal`.
pub fn recompute_reward(episode: &Episode, t: usize, goal: &[f64; 3], cfg: RewardConfig) -> f64 {
    compute_reward(&episode.achieved_goals[t + 1], goal, cfg)
}

/// FIFO ring of whole episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    episodes: VecDeque<Episode>,
    capacity: usize,
    inserted: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        Ok(Self {
            episodes: VecDeque::with_capacity(capacity.min(4096)),
            capacity,
            inserted: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Total episodes ever stored, including evicted ones.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn get(&self, i: usize) -> Option<&Episode> {
        self.episodes.get(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Episode> {
        self.episodes.iter()
    }

    pub fn store(&mut self, episode: Episode) -> Result<()> {
        episode.validate()?;
        if self.episodes.len() == self.capacity {
            self.episodes.pop_front();
        }
        self.episodes.push_back(episode);
        self.inserted += 1;
        Ok(())
    }

    pub fn clear(&mut self) {
        self.episodes.clear();
    }

    /// Restores a buffer from its parts, e.g. when loading a checkpoint.
    pub fn from_parts(capacity: usize, inserted: u64, episodes: Vec<Episode>) -> Result<Self> {
        let mut buf = Self::new(capacity)?;
        if episodes.len() > capacity {
            return Err(Error::Input("more episodes than capacity".into()));
        }
        for e in episodes {
            e.validate()?;
            buf.episodes.push_back(e);
        }
        buf.inserted = inserted;
        Ok(buf)
    }

    pub fn sample_batch(&self, batch_size: usize, her: &HerConfig, rng: &mut SeededRng) -> Result<Batch> {
        if self.episodes.is_empty() {
            return Err(Error::State("cannot sample from an empty replay buffer".into()));
        }
        her.validate()?;
        let mut batch = Batch::with_capacity(batch_size);
        for _ in 0..batch_size {
            let ei = rng.below(self.episodes.len());
            let ep = &self.episodes[ei];
            let t = rng.below(ep.len());
            let stored = ep.desired_goals[t];
            let mut goal = stored;
            let mut future = None;
            if rng.bernoulli(her.relabel_probability) {
                let end = if her.segment_restricted { segment_end(t) } else { ep.len() };
                if end > t {
                    let tf = t + 1 + rng.below(end - t);
                    let achieved = ep.achieved_goals[tf];
                    goal[0] = achieved[0];
                    goal[1] = achieved[1];
                    if her.relabel_z {
                        goal[2] = achieved[2];
                    }
                    future = Some(tf);
                }
            }
            batch.obs.extend_from_slice(ep.observation(t));
            batch.goal.extend_from_slice(&goal);
            batch.action.extend_from_slice(ep.action(t));
            batch.reward.push(recompute_reward(ep, t, &goal, her.reward));
            batch.next_obs.extend_from_slice(ep.observation(t + 1));
            batch.next_goal.extend_from_slice(&goal);
            batch.sources.push(SampleSource { episode: ei, t, future });
            batch.size += 1;
        }
        Ok(batch)
    }
}
