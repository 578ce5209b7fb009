use serde::{Deserialize, Serialize};

/// Distance under which a goal counts as reached, in meters.
pub const GOAL_THRESHOLD: f64 = 0.02;

/// Default weight of the dense height term.
pub const DEFAULT_Z_WEIGHT: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    /// Sparse x-y term plus the dense asymmetric height term.
    Full,
    /// Sparse x-y term only; goal height is ignored.
    PushOnly,
    /// Single sparse term on the full 3-D distance.
    Sparse3d,
}

impl RewardMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RewardMode::Full => "full",
            RewardMode::PushOnly => "push_only",
            RewardMode::Sparse3d => "sparse3d",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "full" => Some(RewardMode::Full),
            "push_only" => Some(RewardMode::PushOnly),
            "sparse3d" => Some(RewardMode::Sparse3d),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardConfig {
    pub mode: RewardMode,
    pub z_weight: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            mode: RewardMode::Full,
            z_weight: DEFAULT_Z_WEIGHT,
        }
    }
}

pub fn xy_distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let (dx, dy, dz) = (a[0] - b[0], a[1] - b[1], a[2] - b[2]);
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// 0 when the achieved x-y lies within the threshold of the goal x-y, else -1.
pub fn xy_reward(achieved: &[f64; 3], goal: &[f64; 3]) -> f64 {
    if xy_distance(achieved, goal) <= GOAL_THRESHOLD {
        0.0
    } else {
        -1.0
    }
}

/// Dense height term: slope `-a` below the goal, `-a/2` above it.
pub fn z_reward(achieved_z: f64, goal_z: f64, a: f64) -> f64 {
    let err = (achieved_z - goal_z).abs();
    if achieved_z < goal_z {
        -a * err
    } else if achieved_z > goal_z {
        -0.5 * a * err
    } else {
        0.0
    }
}

pub fn compute_reward(achieved: &[f64; 3], goal: &[f64; 3], cfg: RewardConfig) -> f64 {
    match cfg.mode {
        RewardMode::Full => xy_reward(achieved, goal) + z_reward(achieved[2], goal[2], cfg.z_weight),
        RewardMode::PushOnly => xy_reward(achieved, goal),
        RewardMode::Sparse3d => {
            if distance(achieved, goal) <= GOAL_THRESHOLD {
                0.0
            } else {
                -1.0
            }
        }
    }
}

/// Full 3-D success test.
pub fn is_success(achieved: &[f64; 3], goal: &[f64; 3]) -> bool {
    distance(achieved, goal) <= GOAL_THRESHOLD
}
