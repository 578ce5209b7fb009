//! Flat `key = value` configuration text.
//!
//! Keys carry a section prefix (`env.`, `dr.`, `her.`, `explore.`, `agent.`,
//! `score.`, `train.`). Lines starting with `#` and blank lines are ignored.
//! Keys not present keep their defaults. Ranges are written `lo,hi` and layer
//! widths as a comma list.

use std::fmt::Write as _;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::env::RewardMode;
use crate::error::{Error, Result};
use crate::trainer::TrainConfig;

fn bad(line: usize, key: &str, value: &str, why: &str) -> Error {
    Error::Config(format!("line {line}: {key} = {value:?}: {why}"))
}

fn num<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| bad(line, key, value, &format!("expected {}", std::any::type_name::<T>())))
}

fn flag(line: usize, key: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(bad(line, key, value, "expected true or false")),
    }
}

fn range(line: usize, key: &str, value: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(bad(line, key, value, "expected lo,hi"));
    }
    Ok((num(line, key, parts[0])?, num(line, key, parts[1])?))
}

fn widths(line: usize, key: &str, value: &str) -> Result<Vec<usize>> {
    value.split(',').map(|p| num(line, key, p.trim())).collect()
}

/// Parses configuration text on top of the defaults and validates the result.
pub fn parse(text: &str) -> Result<TrainConfig> {
    let mut c = TrainConfig::default();
    let mut seen = std::collections::HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            return Err(Error::Config(format!("line {line}: expected key = value, got {trimmed:?}")));
        };
        let (key, v) = (key.trim(), value.trim());
        if !seen.insert(key.to_string()) {
            return Err(Error::Config(format!("line {line}: duplicate key {key}")));
        }
        match key {
            "env.arena_radius" => c.env.arena_radius = num(line, key, v)?,
            "env.cube_half_extent" => c.env.cube_half_extent = num(line, key, v)?,
            "env.dt" => c.env.dt = num(line, key, v)?,
            "env.v_max" => c.env.v_max = num(line, key, v)?,
            "env.grasp_tolerance" => c.env.grasp_tolerance = num(line, key, v)?,
            "env.push_gain" => c.env.push_gain = num(line, key, v)?,
            "env.gravity_drop" => c.env.gravity_drop = num(line, key, v)?,
            "env.lift_speed_cap" => c.env.lift_speed_cap = num(line, key, v)?,
            "env.max_height" => c.env.max_height = num(line, key, v)?,
            "env.home_radius" => c.env.home_radius = num(line, key, v)?,
            "env.home_height" => c.env.home_height = num(line, key, v)?,
            "env.goal_max_height" => c.env.goal_max_height = num(line, key, v)?,
            "env.floor_goal_prob" => c.env.floor_goal_prob = num(line, key, v)?,
            "dr.push_gain" => c.dr.push_gain = range(line, key, v)?,
            "dr.grasp_tolerance" => c.dr.grasp_tolerance = range(line, key, v)?,
            "dr.cube_half_extent" => c.dr.cube_half_extent = range(line, key, v)?,
            "dr.lift_speed_cap" => c.dr.lift_speed_cap = range(line, key, v)?,
            "dr.action_noise" => c.dr.action_noise = num(line, key, v)?,
            "dr.observation_noise" => c.dr.observation_noise = num(line, key, v)?,
            "her.relabel_probability" => c.her.relabel_probability = num(line, key, v)?,
            "her.segment_restricted" => c.her.segment_restricted = flag(line, key, v)?,
            "her.relabel_z" => c.her.relabel_z = flag(line, key, v)?,
            "her.reward_mode" => {
                c.her.reward.mode =
                    RewardMode::parse(v).ok_or_else(|| bad(line, key, v, "expected full, push_only or sparse3d"))?
            }
            "her.z_weight" => c.her.reward.z_weight = num(line, key, v)?,
            "explore.random_action_probability" => c.exploration.random_action_probability = num(line, key, v)?,
            "explore.noise_std" => c.exploration.noise_std = num(line, key, v)?,
            "agent.hidden" => c.agent.hidden = widths(line, key, v)?,
            "agent.actor_lr" => c.agent.actor_lr = num(line, key, v)?,
            "agent.critic_lr" => c.agent.critic_lr = num(line, key, v)?,
            "agent.gamma" => c.agent.gamma = num(line, key, v)?,
            "agent.polyak" => c.agent.polyak = num(line, key, v)?,
            "agent.action_l2" => c.agent.action_l2 = num(line, key, v)?,
            "agent.batch_size" => c.agent.batch_size = num(line, key, v)?,
            "score.d_xy" => c.score.d_xy = num(line, key, v)?,
            "score.d_z" => c.score.d_z = num(line, key, v)?,
            "train.seed" => c.seed = num(line, key, v)?,
            "train.cycles_per_epoch" => c.cycles_per_epoch = num(line, key, v)?,
            "train.rollouts_per_cycle" => c.rollouts_per_cycle = num(line, key, v)?,
            "train.updates_per_cycle" => c.updates_per_cycle = num(line, key, v)?,
            "train.eval_episodes_per_epoch" => c.eval_episodes_per_epoch = num(line, key, v)?,
            "train.buffer_capacity" => c.buffer_capacity = num(line, key, v)?,
            "train.success_threshold" => c.success_threshold = num(line, key, v)?,
            "train.warmup_epochs" => c.warmup_epochs = num(line, key, v)?,
            "train.stage1_max_epochs" => c.stage1_max_epochs = num(line, key, v)?,
            "train.stage2_max_epochs" => c.stage2_max_epochs = num(line, key, v)?,
            "train.convergence_window" => c.convergence_window = num(line, key, v)?,
            "train.convergence_tolerance" => c.convergence_tolerance = num(line, key, v)?,
            "train.record_wall_time" => c.record_wall_time = flag(line, key, v)?,
            _ => return Err(Error::Config(format!("line {line}: unknown key {key}"))),
        }
    }
    c.validate()?;
    Ok(c)
}

/// Canonical text: every key, fixed order, shortest round-trip number format.
pub fn to_text(c: &TrainConfig) -> String {
    let mut s = String::new();
    let mut put = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    let pair = |(lo, hi): (f64, f64)| format!("{lo},{hi}");
    put("env.arena_radius", c.env.arena_radius.to_string());
    put("env.cube_half_extent", c.env.cube_half_extent.to_string());
    put("env.dt", c.env.dt.to_string());
    put("env.v_max", c.env.v_max.to_string());
    put("env.grasp_tolerance", c.env.grasp_tolerance.to_string());
    put("env.push_gain", c.env.push_gain.to_string());
    put("env.gravity_drop", c.env.gravity_drop.to_string());
    put("env.lift_speed_cap", c.env.lift_speed_cap.to_string());
    put("env.max_height", c.env.max_height.to_string());
    put("env.home_radius", c.env.home_radius.to_string());
    put("env.home_height", c.env.home_height.to_string());
    put("env.goal_max_height", c.env.goal_max_height.to_string());
    put("env.floor_goal_prob", c.env.floor_goal_prob.to_string());
    put("dr.push_gain", pair(c.dr.push_gain));
    put("dr.grasp_tolerance", pair(c.dr.grasp_tolerance));
    put("dr.cube_half_extent", pair(c.dr.cube_half_extent));
    put("dr.lift_speed_cap", pair(c.dr.lift_speed_cap));
    put("dr.action_noise", c.dr.action_noise.to_string());
    put("dr.observation_noise", c.dr.observation_noise.to_string());
    put("her.relabel_probability", c.her.relabel_probability.to_string());
    put("her.segment_restricted", c.her.segment_restricted.to_string());
    put("her.relabel_z", c.her.relabel_z.to_string());
    put("her.reward_mode", c.her.reward.mode.as_str().to_string());
    put("her.z_weight", c.her.reward.z_weight.to_string());
    put("explore.random_action_probability", c.exploration.random_action_probability.to_string());
    put("explore.noise_std", c.exploration.noise_std.to_string());
    put(
        "agent.hidden",
        c.agent.hidden.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
    );
    put("agent.actor_lr", c.agent.actor_lr.to_string());
    put("agent.critic_lr", c.agent.critic_lr.to_string());
    put("agent.gamma", c.agent.gamma.to_string());
    put("agent.polyak", c.agent.polyak.to_string());
    put("agent.action_l2", c.agent.action_l2.to_string());
    put("agent.batch_size", c.agent.batch_size.to_string());
    put("score.d_xy", c.score.d_xy.to_string());
    put("score.d_z", c.score.d_z.to_string());
    put("train.seed", c.seed.to_string());
    put("train.cycles_per_epoch", c.cycles_per_epoch.to_string());
    put("train.rollouts_per_cycle", c.rollouts_per_cycle.to_string());
    put("train.updates_per_cycle", c.updates_per_cycle.to_string());
    put("train.eval_episodes_per_epoch", c.eval_episodes_per_epoch.to_string());
    put("train.buffer_capacity", c.buffer_capacity.to_string());
    put("train.success_threshold", c.success_threshold.to_string());
    put("train.warmup_epochs", c.warmup_epochs.to_string());
    put("train.stage1_max_epochs", c.stage1_max_epochs.to_string());
    put("train.stage2_max_epochs", c.stage2_max_epochs.to_string());
    put("train.convergence_window", c.convergence_window.to_string());
    put("train.convergence_tolerance", c.convergence_tolerance.to_string());
    put("train.record_wall_time", c.record_wall_time.to_string());
    s
}

/// Hex SHA-256 of the canonical text.
pub fn digest(c: &TrainConfig) -> String {
    Sha256::digest(to_text(c).as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Named reward/relabeling variants for the ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Sparse x-y reward relabeled in hindsight, dense z reward tied to the original goal.
    Final,
    /// Both reward terms computed from the relabeled 3-D goal.
    HerBoth,
    /// Sparse 3-D reward with full-goal relabeling.
    HerStandard,
    /// Sparse x-y reward only; goal height ignored.
    PushOnly,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Final, Preset::HerBoth, Preset::HerStandard, Preset::PushOnly];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Final => "final",
            Preset::HerBoth => "her-both",
            Preset::HerStandard => "her-standard",
            Preset::PushOnly => "push-only",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s)
    }

    /// Overwrites the relabeling and reward fields this preset fixes.
    pub fn apply(self, c: &mut TrainConfig) {
        let (mode, relabel_z) = match self {
            Preset::Final => (RewardMode::Full, false),
            Preset::HerBoth => (RewardMode::Full, true),
            Preset::HerStandard => (RewardMode::Sparse3d, true),
            Preset::PushOnly => (RewardMode::PushOnly, false),
        };
        c.her.reward.mode = mode;
        c.her.relabel_z = relabel_z;
    }

    /// One-line summary of the overridden fields.
    pub fn describe(self, c: &TrainConfig) -> String {
        format!(
            "preset {}: her.reward_mode={} her.relabel_z={}",
            self.name(),
            c.her.reward.mode.as_str(),
            c.her.relabel_z
        )
    }
}
