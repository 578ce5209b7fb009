//! Simplified cube-carry environment: three point effectors under Cartesian
//! velocity control, one axis-aligned cube, and a three-waypoint goal
//! trajectory. Optional per-episode domain randomization and Gaussian
//! action/observation noise.

pub mod contact;
mod noise;
pub mod reward;
pub mod rollout_log;

pub use noise::{add_action_noise, add_observation_noise};
pub use reward::{compute_reward, is_success, RewardConfig, RewardMode, GOAL_THRESHOLD};

use crate::error::{Error, Result};
use crate::numerics::SeededRng;
use contact::Vec3;

pub const N_EFFECTORS: usize = 3;
pub const ACTION_DIM: usize = 9;
pub const GOAL_DIM: usize = 3;
pub const OBS_DIM: usize = 36;
pub const EPISODE_STEPS: usize = 90;
pub const SEGMENT_STEPS: usize = 30;
pub const N_SEGMENTS: usize = EPISODE_STEPS / SEGMENT_STEPS;

/// Offset of the active goal inside the observation vector.
pub const OBS_GOAL_OFFSET: usize = 33;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvParams {
    pub arena_radius: f64,
    pub cube_half_extent: f64,
    pub dt: f64,
    /// Effector speed at full action, m/s.
    pub v_max: f64,
    pub grasp_tolerance: f64,
    pub push_gain: f64,
    pub gravity_drop: f64,
    pub lift_speed_cap: f64,
    pub max_height: f64,
    pub home_radius: f64,
    pub home_height: f64,
    /// Upper bound of sampled goal heights.
    pub goal_max_height: f64,
    /// Probability that a sampled goal sits on the floor.
    pub floor_goal_prob: f64,
}

impl Default for EnvParams {
    fn default() -> Self {
        Self {
            arena_radius: 0.19,
            cube_half_extent: 0.0325,
            dt: 0.05,
            v_max: 0.3,
            grasp_tolerance: 0.015,
            push_gain: 1.0,
            gravity_drop: 1.0,
            lift_speed_cap: 0.2,
            max_height: 0.27,
            home_radius: 0.12,
            home_height: 0.08,
            goal_max_height: 0.15,
            floor_goal_prob: 0.25,
        }
    }
}

impl EnvParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("arena_radius", self.arena_radius),
            ("cube_half_extent", self.cube_half_extent),
            ("dt", self.dt),
            ("v_max", self.v_max),
            ("grasp_tolerance", self.grasp_tolerance),
            ("push_gain", self.push_gain),
            ("gravity_drop", self.gravity_drop),
            ("lift_speed_cap", self.lift_speed_cap),
            ("max_height", self.max_height),
            ("home_radius", self.home_radius),
            ("home_height", self.home_height),
            ("goal_max_height", self.goal_max_height),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("env.{name} must be positive, got {v}")));
            }
        }
        if (self.dt - 0.05).abs() > 1e-12 {
            return Err(Error::Config(format!("env.dt must be 0.05 (20 Hz), got {}", self.dt)));
        }
        if self.cube_half_extent >= self.arena_radius {
            return Err(Error::Config("cube does not fit in the arena".into()));
        }
        if self.goal_max_height < self.cube_half_extent || self.goal_max_height > self.max_height {
            return Err(Error::Config(
                "env.goal_max_height must lie in [cube_half_extent, max_height]".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.floor_goal_prob) {
            return Err(Error::Config("env.floor_goal_prob must be in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Per-episode randomization ranges (multipliers) and noise levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrConfig {
    pub enabled: bool,
    pub push_gain: (f64, f64),
    pub grasp_tolerance: (f64, f64),
    pub cube_half_extent: (f64, f64),
    pub lift_speed_cap: (f64, f64),
    pub action_noise: f64,
    pub observation_noise: f64,
}

impl Default for DrConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            push_gain: (0.8, 1.2),
            grasp_tolerance: (0.8, 1.2),
            cube_half_extent: (0.9, 1.1),
            lift_speed_cap: (0.8, 1.2),
            action_noise: 0.05,
            observation_noise: 0.005,
        }
    }
}

impl DrConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [
            ("push_gain", self.push_gain),
            ("grasp_tolerance", self.grasp_tolerance),
            ("cube_half_extent", self.cube_half_extent),
            ("lift_speed_cap", self.lift_speed_cap),
        ] {
            if !(lo > 0.0 && lo <= 1.0 && hi >= 1.0) {
                return Err(Error::Config(format!(
                    "dr.{name} range [{lo}, {hi}] must be positive and contain 1.0"
                )));
            }
        }
        if !(self.action_noise >= 0.0 && self.observation_noise >= 0.0) {
            return Err(Error::Config("dr noise levels must be non-negative".into()));
        }
        Ok(())
    }
}

/// Multipliers drawn for one episode, in the order
/// push gain, grasp tolerance, cube half extent, lift speed cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrSample(pub [f64; 4]);

impl Default for DrSample {
    fn default() -> Self {
        DrSample([1.0; 4])
    }
}

impl DrSample {
    fn draw(cfg: &DrConfig, rng: &mut SeededRng) -> Self {
        let mut m = [1.0; 4];
        for (slot, (lo, hi)) in m.iter_mut().zip([
            cfg.push_gain,
            cfg.grasp_tolerance,
            cfg.cube_half_extent,
            cfg.lift_speed_cap,
        ]) {
            *slot = rng.uniform_range(lo, hi);
        }
        DrSample(m)
    }

    fn apply(&self, base: &EnvParams) -> EnvParams {
        EnvParams {
            push_gain: base.push_gain * self.0[0],
            grasp_tolerance: base.grasp_tolerance * self.0[1],
            cube_half_extent: base.cube_half_extent * self.0[2],
            lift_speed_cap: base.lift_speed_cap * self.0[3],
            ..*base
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoalTrajectory {
    pub goals: [Vec3; N_SEGMENTS],
}

impl GoalTrajectory {
    pub fn constant(goal: Vec3) -> Self {
        Self {
            goals: [goal; N_SEGMENTS],
        }
    }

    pub fn segment(step: usize) -> usize {
        (step / SEGMENT_STEPS).min(N_SEGMENTS - 1)
    }

    pub fn active(&self, step: usize) -> Vec3 {
        self.goals[Self::segment(step)]
    }

    pub fn final_goal(&self) -> Vec3 {
        self.goals[N_SEGMENTS - 1]
    }

    pub fn sample(params: &EnvParams, rng: &mut SeededRng) -> Self {
        let mut goals = [[0.0; 3]; N_SEGMENTS];
        for g in goals.iter_mut() {
            let (x, y) = uniform_disk(params.arena_radius - params.cube_half_extent, rng);
            let z = if rng.bernoulli(params.floor_goal_prob) {
                params.cube_half_extent
            } else {
                rng.uniform_range(params.cube_half_extent, params.goal_max_height)
            };
            *g = [x, y, z];
        }
        Self { goals }
    }
}

fn uniform_disk(radius: f64, rng: &mut SeededRng) -> (f64, f64) {
    let r = radius * rng.uniform().sqrt();
    let theta = std::f64::consts::TAU * rng.uniform();
    (r * theta.cos(), r * theta.sin())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub effector_positions: [Vec3; N_EFFECTORS],
    pub effector_velocities: [Vec3; N_EFFECTORS],
    pub prev_action: [f64; ACTION_DIM],
    pub cube_position: Vec3,
    pub prev_cube_position: Vec3,
    pub held: bool,
    pub step_index: usize,
    pub trajectory: GoalTrajectory,
    /// Physics in effect for this episode (randomized when DR is on).
    pub params: EnvParams,
    pub dr_sample: DrSample,
}

impl EnvState {
    pub fn active_goal(&self) -> Vec3 {
        self.trajectory.active(self.step_index)
    }

    /// Noise-free observation vector.
    pub fn observation(&self) -> Vec<f64> {
        let mut obs = Vec::with_capacity(OBS_DIM);
        for p in &self.effector_positions {
            obs.extend_from_slice(p);
        }
        for v in &self.effector_velocities {
            obs.extend_from_slice(v);
        }
        obs.extend_from_slice(&self.prev_action);
        obs.extend_from_slice(&self.cube_position);
        for d in 0..3 {
            obs.push(self.cube_position[d] - self.prev_cube_position[d]);
        }
        obs.extend_from_slice(&self.active_goal());
        obs
    }
}

pub fn home_positions(params: &EnvParams) -> [Vec3; N_EFFECTORS] {
    let mut out = [[0.0; 3]; N_EFFECTORS];
    for (i, p) in out.iter_mut().enumerate() {
        let angle = std::f64::consts::TAU * i as f64 / N_EFFECTORS as f64;
        *p = [
            params.home_radius * angle.cos(),
            params.home_radius * angle.sin(),
            params.home_height,
        ];
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Vec<f64>,
    pub achieved_goal: Vec3,
    /// Goal that was active while the action was applied.
    pub goal: Vec3,
    pub reward: f64,
    pub success: bool,
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct CubeEnv {
    base: EnvParams,
    dr: DrConfig,
    reward: RewardConfig,
    state: EnvState,
    noise_rng: SeededRng,
}

impl CubeEnv {
    pub fn new(base: EnvParams, dr: DrConfig, reward: RewardConfig) -> Result<Self> {
        base.validate()?;
        dr.validate()?;
        if !(reward.z_weight > 0.0) {
            return Err(Error::Config("reward z weight must be positive".into()));
        }
        let state = EnvState {
            effector_positions: home_positions(&base),
            effector_velocities: [[0.0; 3]; N_EFFECTORS],
            prev_action: [0.0; ACTION_DIM],
            cube_position: [0.0, 0.0, base.cube_half_extent],
            prev_cube_position: [0.0, 0.0, base.cube_half_extent],
            held: false,
            step_index: 0,
            trajectory: GoalTrajectory::constant([0.0, 0.0, base.cube_half_extent]),
            params: base,
            dr_sample: DrSample::default(),
        };
        Ok(Self {
            base,
            dr,
            reward,
            state,
            noise_rng: SeededRng::new(0),
        })
    }

    pub fn base_params(&self) -> &EnvParams {
        &self.base
    }

    pub fn dr(&self) -> &DrConfig {
        &self.dr
    }

    pub fn set_dr(&mut self, dr: DrConfig) -> Result<()> {
        dr.validate()?;
        self.dr = dr;
        Ok(())
    }

    pub fn reward_config(&self) -> RewardConfig {
        self.reward
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    /// Direct state access for scripted scenarios.
    pub fn state_mut(&mut self) -> &mut EnvState {
        &mut self.state
    }

    /// Starts a new episode with a random cube spawn and goal trajectory.
    ///
    /// Consumes exactly one `u64` from `rng`; layout and randomization draw
    /// from separate streams derived from it, so enabling DR with collapsed
    /// ranges and zero noise reproduces the non-DR episode exactly.
    pub fn reset(&mut self, rng: &mut SeededRng) -> Vec<f64> {
        let seed = rand::RngCore::next_u64(rng);
        let mut layout_rng = SeededRng::with_stream(seed, 0);
        let mut dr_rng = SeededRng::with_stream(seed, 1);

        let dr_sample = if self.dr.enabled {
            DrSample::draw(&self.dr, &mut dr_rng)
        } else {
            DrSample::default()
        };
        let params = dr_sample.apply(&self.base);
        let (x, y) = uniform_disk(params.arena_radius - params.cube_half_extent, &mut layout_rng);
        let trajectory = GoalTrajectory::sample(&params, &mut layout_rng);
        self.start_episode(params, dr_sample, [x, y, params.cube_half_extent], trajectory, dr_rng)
    }

    /// Starts an episode with a given cube spawn and goal trajectory and no
    /// randomization.
    pub fn reset_to(&mut self, cube_xy: [f64; 2], trajectory: GoalTrajectory) -> Vec<f64> {
        let params = self.base;
        let cube = [cube_xy[0], cube_xy[1], params.cube_half_extent];
        self.start_episode(params, DrSample::default(), cube, trajectory, SeededRng::new(0))
    }

    fn start_episode(
        &mut self,
        params: EnvParams,
        dr_sample: DrSample,
        cube: Vec3,
        trajectory: GoalTrajectory,
        noise_rng: SeededRng,
    ) -> Vec<f64> {
        self.state = EnvState {
            effector_positions: home_positions(&params),
            effector_velocities: [[0.0; 3]; N_EFFECTORS],
            prev_action: [0.0; ACTION_DIM],
            cube_position: cube,
            prev_cube_position: cube,
            held: false,
            step_index: 0,
            trajectory,
            params,
            dr_sample,
        };
        self.noise_rng = noise_rng;
        self.observe()
    }

    fn observe(&mut self) -> Vec<f64> {
        let mut obs = self.state.observation();
        if self.dr.enabled {
            add_observation_noise(&mut obs[..OBS_GOAL_OFFSET], self.dr.observation_noise, &mut self.noise_rng);
        }
        obs
    }

    pub fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        if action.len() != ACTION_DIM {
            return Err(Error::Input(format!(
                "action has {} entries, expected {ACTION_DIM}",
                action.len()
            )));
        }
        if action.iter().any(|a| !a.is_finite()) {
            return Err(Error::Input("action contains a non-finite value".into()));
        }
        if self.state.step_index >= EPISODE_STEPS {
            return Err(Error::State("episode already finished; call reset".into()));
        }

        let mut commanded = [0.0; ACTION_DIM];
        for (c, a) in commanded.iter_mut().zip(action) {
            *c = a.clamp(-1.0, 1.0);
        }
        let mut applied = commanded;
        if self.dr.enabled {
            add_action_noise(&mut applied, self.dr.action_noise, &mut self.noise_rng);
        }

        let goal = self.state.active_goal();
        let p = self.state.params;
        let s = &mut self.state;

        let max_step = p.v_max * p.dt;
        for i in 0..N_EFFECTORS {
            let old = s.effector_positions[i];
            let mut new = [
                old[0] + applied[3 * i] * max_step,
                old[1] + applied[3 * i + 1] * max_step,
                (old[2] + applied[3 * i + 2] * max_step).clamp(0.0, p.max_height),
            ];
            let r = new[0].hypot(new[1]);
            if r > p.arena_radius {
                new[0] *= p.arena_radius / r;
                new[1] *= p.arena_radius / r;
            }
            for d in 0..3 {
                s.effector_velocities[i][d] = (new[d] - old[d]) / p.dt;
            }
            s.effector_positions[i] = new;
        }

        s.prev_cube_position = s.cube_position;
        let tolerance = if s.held {
            2.0 * p.grasp_tolerance
        } else {
            p.grasp_tolerance
        };
        let holders =
            contact::holding_effectors(&s.effector_positions, &s.cube_position, p.cube_half_extent, tolerance);
        if holders.is_empty() {
            s.held = false;
            contact::drop(&mut s.cube_position, &p);
            contact::push(&mut s.cube_position, &s.effector_positions, &p);
        } else {
            s.held = true;
            contact::carry(&mut s.cube_position, &s.effector_positions, &holders, &p);
        }

        s.prev_action = commanded;
        s.step_index += 1;

        let achieved = s.cube_position;
        let done = s.step_index >= EPISODE_STEPS;
        let observation = self.observe();
        Ok(StepOutcome {
            observation,
            achieved_goal: achieved,
            goal,
            reward: compute_reward(&achieved, &goal, self.reward),
            success: is_success(&achieved, &goal),
            done,
        })
    }
}
