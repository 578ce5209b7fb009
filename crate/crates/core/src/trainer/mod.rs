//! Epoch loop and the two-stage curriculum: train without randomization,
//! clear the buffer, collect warm-up experience under randomization without
//! updates, then resume training under randomization.

pub mod evaluate;
pub mod rollout;
pub mod score;

use std::fmt;
use std::time::Instant;

use crate::agent::{target_bounds, AgentConfig, DdpgAgent, ExplorationConfig, UpdateStats};
use crate::env::{CubeEnv, DrConfig, EnvParams, EPISODE_STEPS};
use crate::error::{Error, Result};
use crate::numerics::SeededRng;
use crate::replay::{HerConfig, ReplayBuffer};

pub use evaluate::{evaluate, EvalEpisode, EvalReport, StuckDetector};
pub use rollout::{collect_rollout, AgentPolicy, Policy, PolicyKind, Rollout};
pub use score::{score_episode, ScoreConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub seed: u64,
    pub env: EnvParams,
    pub dr: DrConfig,
    pub her: HerConfig,
    pub exploration: ExplorationConfig,
    pub agent: AgentConfig,
    pub score: ScoreConfig,
    pub cycles_per_epoch: usize,
    pub rollouts_per_cycle: usize,
    pub updates_per_cycle: usize,
    pub eval_episodes_per_epoch: usize,
    pub buffer_capacity: usize,
    pub success_threshold: f64,
    pub warmup_epochs: usize,
    pub stage1_max_epochs: usize,
    pub stage2_max_epochs: usize,
    pub convergence_window: usize,
    pub convergence_tolerance: f64,
    /// Write measured wall time into metrics. Off by default so metrics rows are reproducible byte for byte.
    pub record_wall_time: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            env: EnvParams::default(),
            dr: DrConfig::default(),
            her: HerConfig::default(),
            exploration: ExplorationConfig::default(),
            agent: AgentConfig::default(),
            score: ScoreConfig::default(),
            cycles_per_epoch: 50,
            rollouts_per_cycle: 2,
            updates_per_cycle: 40,
            eval_episodes_per_epoch: 10,
            buffer_capacity: 10_000,
            success_threshold: 0.9,
            warmup_epochs: 3,
            stage1_max_epochs: 300,
            stage2_max_epochs: 100,
            convergence_window: 5,
            convergence_tolerance: 0.02,
            record_wall_time: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.dr.validate()?;
        self.her.validate()?;
        self.exploration.validate()?;
        self.agent.validate()?;
        for (name, v) in [
            ("train.cycles_per_epoch", self.cycles_per_epoch),
            ("train.rollouts_per_cycle", self.rollouts_per_cycle),
            ("train.eval_episodes_per_epoch", self.eval_episodes_per_epoch),
            ("train.buffer_capacity", self.buffer_capacity),
            ("train.stage1_max_epochs", self.stage1_max_epochs),
            ("train.stage2_max_epochs", self.stage2_max_epochs),
            ("train.convergence_window", self.convergence_window),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(0.0..=1.0).contains(&self.success_threshold) {
            return Err(Error::Config("train.success_threshold must be in [0, 1]".into()));
        }
        if !(self.score.d_xy > 0.0 && self.score.d_z > 0.0) {
            return Err(Error::Config("score ranges must be positive".into()));
        }
        Ok(())
    }

    pub fn target_clip(&self) -> (f64, f64) {
        target_bounds(self.agent.gamma, self.her.reward, self.env.max_height)
    }

    /// Env steps collected by one epoch (training plus evaluation episodes).
    pub fn steps_per_epoch(&self) -> u64 {
        ((self.cycles_per_epoch * self.rollouts_per_cycle + self.eval_episodes_per_epoch) * EPISODE_STEPS) as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Training without domain randomization.
    One,
    /// Collection under randomization with no parameter updates.
    Warmup,
    /// Training under randomization.
    Two,
    Done,
}

impl Stage {
    pub fn label(self) -> &'static str {
        match self {
            Stage::One => "stage1",
            Stage::Warmup => "warmup",
            Stage::Two => "stage2",
            Stage::Done => "done",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Stage::One => 0,
            Stage::Warmup => 1,
            Stage::Two => 2,
            Stage::Done => 3,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        [Stage::One, Stage::Warmup, Stage::Two, Stage::Done].get(c as usize).copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: u64,
    pub env_steps: u64,
    pub train_success_rate: f64,
    pub eval_success_rate: f64,
    pub mean_episode_reward: f64,
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub update_steps: u64,
    pub stage: &'static str,
    pub buffer_size: usize,
    pub wall_time_s: f64,
}

impl EpochMetrics {
    pub const CSV_HEADER: &'static str = "epoch,env_steps,train_success_rate,eval_success_rate,mean_episode_reward,critic_loss,actor_loss,update_steps,stage,buffer_size,wall_time_s";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.epoch,
            self.env_steps,
            self.train_success_rate,
            self.eval_success_rate,
            self.mean_episode_reward,
            self.critic_loss,
            self.actor_loss,
            self.update_steps,
            self.stage,
            self.buffer_size,
            self.wall_time_s
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    StageStart,
    StageEnd,
    BufferClear,
    Warning,
    Finished,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::StageStart => "stage_start",
            EventKind::StageEnd => "stage_end",
            EventKind::BufferClear => "buffer_clear",
            EventKind::Warning => "warning",
            EventKind::Finished => "finished",
        }
    }
}

/// Stage transitions and other curriculum milestones.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    /// Number of completed epochs when the event happened.
    pub epoch: u64,
    pub env_steps: u64,
    pub kind: EventKind,
    pub detail: String,
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "epoch={} env_steps={} event={} {}",
            self.epoch,
            self.env_steps,
            self.kind.as_str(),
            self.detail
        )
    }
}

/// Curriculum bookkeeping; everything needed to resume exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Progress {
    pub epoch: u64,
    pub env_steps: u64,
    pub stage: Stage,
    /// Epochs completed in the current stage.
    pub stage_epochs: u64,
    /// Eval success rates of the current stage, oldest first.
    pub eval_history: Vec<f64>,
}

impl Default for Progress {
    fn default() -> Self {
        Self {
            epoch: 0,
            env_steps: 0,
            stage: Stage::One,
            stage_epochs: 0,
            eval_history: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochOutcome {
    pub metrics: EpochMetrics,
    pub events: Vec<Event>,
}

/// Owns every piece of mutable training state.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub cfg: TrainConfig,
    pub agent: DdpgAgent,
    pub buffer: ReplayBuffer,
    pub rng: SeededRng,
    pub progress: Progress,
}

/// Options for a single epoch, independent of the curriculum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpochPlan {
    pub stage: Stage,
    pub randomized: bool,
    pub updates: bool,
}

impl Trainer {
    pub fn new(cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = SeededRng::new(cfg.seed);
        let mut init_rng = rng.child();
        let agent = DdpgAgent::new(&cfg.agent, cfg.target_clip(), &mut init_rng)?;
        let buffer = ReplayBuffer::new(cfg.buffer_capacity)?;
        Ok(Self {
            cfg,
            agent,
            buffer,
            rng,
            progress: Progress::default(),
        })
    }

    fn env(&self, randomized: bool) -> Result<CubeEnv> {
        let dr = DrConfig {
            enabled: randomized,
            ..self.cfg.dr
        };
        CubeEnv::new(self.cfg.env, dr, self.cfg.her.reward)
    }

    pub fn is_finished(&self) -> bool {
        self.progress.stage == Stage::Done
    }

    /// Runs one epoch: `cycles` x (exploratory rollouts, store, updates),
    /// then exploiting evaluation episodes that are scored and also stored.
    pub fn run_epoch(&mut self, plan: EpochPlan) -> Result<EpochMetrics> {
        let started = Instant::now();
        let cfg = self.cfg.clone();
        let mut env = self.env(plan.randomized)?;
        let mut train_successes = 0usize;
        let mut reward_sum = 0.0;
        let mut episodes = 0usize;
        let mut losses = UpdateStats::default();
        let mut update_calls = 0usize;
        let mut update_steps = 0u64;

        for _ in 0..cfg.cycles_per_epoch {
            for _ in 0..cfg.rollouts_per_cycle {
                let mut rollout_rng = self.rng.child();
                let mut policy = AgentPolicy {
                    agent: &self.agent,
                    exploration: cfg.exploration,
                };
                let r = collect_rollout(&mut policy, &mut env, PolicyKind::Exploratory, &mut rollout_rng)?;
                train_successes += r.episode.success as usize;
                reward_sum += r.total_reward;
                episodes += 1;
                self.agent.update_normalizers(&r.episode)?;
                self.buffer.store(r.episode)?;
            }
            if plan.updates && cfg.updates_per_cycle > 0 {
                let batches = (0..cfg.updates_per_cycle)
                    .map(|_| self.buffer.sample_batch(cfg.agent.batch_size, &cfg.her, &mut self.rng))
                    .collect::<Result<Vec<_>>>()?;
                let s = self.agent.update(&batches)?;
                losses.critic_loss += s.critic_loss;
                losses.actor_loss += s.actor_loss;
                update_calls += 1;
                update_steps += batches.len() as u64;
            }
        }

        let mut eval_successes = 0usize;
        for _ in 0..cfg.eval_episodes_per_epoch {
            let mut rollout_rng = self.rng.child();
            let mut policy = AgentPolicy {
                agent: &self.agent,
                exploration: cfg.exploration,
            };
            let r = collect_rollout(&mut policy, &mut env, PolicyKind::Exploiting, &mut rollout_rng)?;
            eval_successes += r.episode.success as usize;
            reward_sum += r.total_reward;
            episodes += 1;
            self.agent.update_normalizers(&r.episode)?;
            self.buffer.store(r.episode)?;
        }

        self.progress.epoch += 1;
        self.progress.env_steps += (episodes * EPISODE_STEPS) as u64;
        let n_train = (cfg.cycles_per_epoch * cfg.rollouts_per_cycle) as f64;
        let calls = update_calls.max(1) as f64;
        Ok(EpochMetrics {
            epoch: self.progress.epoch,
            env_steps: self.progress.env_steps,
            train_success_rate: train_successes as f64 / n_train,
            eval_success_rate: eval_successes as f64 / cfg.eval_episodes_per_epoch as f64,
            mean_episode_reward: reward_sum / episodes as f64,
            critic_loss: losses.critic_loss / calls,
            actor_loss: losses.actor_loss / calls,
            update_steps,
            stage: plan.stage.label(),
            buffer_size: self.buffer.len(),
            wall_time_s: if cfg.record_wall_time {
                started.elapsed().as_secs_f64()
            } else {
                0.0
            },
        })
    }

    fn event(&self, kind: EventKind, detail: impl Into<String>) -> Event {
        Event {
            epoch: self.progress.epoch,
            env_steps: self.progress.env_steps,
            kind,
            detail: detail.into(),
        }
    }

    fn converged(&self) -> bool {
        let w = self.cfg.convergence_window;
        let h = &self.progress.eval_history;
        if h.len() < w {
            return false;
        }
        let recent = &h[h.len() - w..];
        let max = recent.iter().cloned().fold(f64::MIN, f64::max);
        let min = recent.iter().cloned().fold(f64::MAX, f64::min);
        max - min < self.cfg.convergence_tolerance
    }

    fn enter(&mut self, stage: Stage) {
        self.progress.stage = stage;
        self.progress.stage_epochs = 0;
        self.progress.eval_history.clear();
    }

    /// Advances the curriculum by one epoch. Returns `None` once finished.
    pub fn next_epoch(&mut self) -> Result<Option<EpochOutcome>> {
        let mut events = Vec::new();
        if self.progress.epoch == 0 && self.progress.stage == Stage::One && self.progress.stage_epochs == 0 {
            events.push(self.event(EventKind::StageStart, "stage=stage1 randomization=off"));
        }
        let plan = match self.progress.stage {
            Stage::One => EpochPlan {
                stage: Stage::One,
                randomized: false,
                updates: true,
            },
            Stage::Warmup => EpochPlan {
                stage: Stage::Warmup,
                randomized: true,
                updates: false,
            },
            Stage::Two => EpochPlan {
                stage: Stage::Two,
                randomized: true,
                updates: true,
            },
            Stage::Done => return Ok(None),
        };
        let metrics = self.run_epoch(plan)?;
        self.progress.stage_epochs += 1;
        self.progress.eval_history.push(metrics.eval_success_rate);

        match self.progress.stage {
            Stage::One => {
                let reached = metrics.eval_success_rate >= self.cfg.success_threshold;
                let exhausted = self.progress.stage_epochs >= self.cfg.stage1_max_epochs as u64;
                if reached || exhausted {
                    if !reached {
                        events.push(self.event(
                            EventKind::Warning,
                            format!(
                                "stage1 ended at max epochs with eval success {} below threshold {}",
                                metrics.eval_success_rate, self.cfg.success_threshold
                            ),
                        ));
                    }
                    events.push(self.event(EventKind::StageEnd, "stage=stage1"));
                    self.buffer.clear();
                    events.push(self.event(EventKind::BufferClear, "reason=curriculum"));
                    events.push(self.event(EventKind::StageStart, "stage=warmup randomization=on updates=off"));
                    self.enter(Stage::Warmup);
                    if self.cfg.warmup_epochs == 0 {
                        events.push(self.event(EventKind::StageEnd, "stage=warmup"));
                        events.push(self.event(EventKind::StageStart, "stage=stage2 randomization=on"));
                        self.enter(Stage::Two);
                    }
                }
            }
            Stage::Warmup => {
                if self.progress.stage_epochs >= self.cfg.warmup_epochs as u64 {
                    events.push(self.event(EventKind::StageEnd, "stage=warmup"));
                    events.push(self.event(EventKind::StageStart, "stage=stage2 randomization=on"));
                    self.enter(Stage::Two);
                }
            }
            Stage::Two => {
                let converged = self.converged();
                if converged || self.progress.stage_epochs >= self.cfg.stage2_max_epochs as u64 {
                    events.push(self.event(EventKind::StageEnd, "stage=stage2"));
                    if converged {
                        events.push(self.event(EventKind::Finished, "status=converged"));
                    } else {
                        events.push(self.event(
                            EventKind::Warning,
                            "stage2 reached max epochs without converging",
                        ));
                        events.push(self.event(EventKind::Finished, "status=max_epochs"));
                    }
                    self.enter(Stage::Done);
                }
            }
            Stage::Done => unreachable!(),
        }
        Ok(Some(EpochOutcome { metrics, events }))
    }

    /// Runs the whole curriculum to completion.
    pub fn train_curriculum(&mut self) -> Result<Vec<EpochOutcome>> {
        let mut log = Vec::new();
        while let Some(outcome) = self.next_epoch()? {
            log.push(outcome);
        }
        Ok(log)
    }
}
