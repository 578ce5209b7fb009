use crate::env::rollout_log::StepRecord;
use crate::env::reward::xy_distance;
use crate::env::{is_success, CubeEnv, ACTION_DIM, EPISODE_STEPS, GOAL_THRESHOLD};
use crate::error::{Error, Result};
use crate::numerics::SeededRng;

use super::rollout::{Policy, PolicyKind};
use super::score::{score_episode, ScoreConfig};

/// Steps without x-y success before random actions are injected.
pub const STUCK_PATIENCE: usize = 50;
/// Number of uniformly random actions per injection.
pub const STUCK_BURST: usize = 7;

/// Counts consecutive steps the cube misses the active goal in x-y and
/// schedules a burst of random actions when the count reaches the patience.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StuckDetector {
    counter: usize,
    remaining_random: usize,
    last_goal: Option<[u64; 3]>,
}

impl StuckDetector {
    /// Whether the upcoming action should be random. Consumes one slot of
    /// the current burst.
    pub fn take_random(&mut self) -> bool {
        if self.remaining_random > 0 {
            self.remaining_random -= 1;
            if self.remaining_random == 0 {
                self.counter = 0;
            }
            return true;
        }
        false
    }

    /// Records the outcome of a policy-chosen step.
    pub fn observe(&mut self, cube: &[f64; 3], goal: &[f64; 3]) {
        let key = goal.map(f64::to_bits);
        if self.last_goal.is_some_and(|g| g != key) {
            self.counter = 0;
        }
        self.last_goal = Some(key);
        if xy_distance(cube, goal) > GOAL_THRESHOLD {
            self.counter += 1;
        } else {
            self.counter = 0;
        }
        if self.counter >= STUCK_PATIENCE {
            self.remaining_random = STUCK_BURST;
            self.counter = 0;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalEpisode {
    pub success: bool,
    pub score: f64,
    /// Step indices (0-based) that used an injected random action.
    pub injected_steps: Vec<usize>,
    pub records: Vec<StepRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub success_rate: f64,
    pub score_mean: f64,
    /// Sample standard deviation (n - 1); 0 for a single episode.
    pub score_std: f64,
    pub episodes: Vec<EvalEpisode>,
}

/// Runs one exploiting episode from the environment's current reset state.
pub fn run_eval_episode<P: Policy + ?Sized>(
    policy: &mut P,
    env: &mut CubeEnv,
    mut obs: Vec<f64>,
    stuck_recovery: bool,
    episode_index: usize,
    score_cfg: ScoreConfig,
    rng: &mut SeededRng,
) -> Result<EvalEpisode> {
    let mut detector = StuckDetector::default();
    let mut injected_steps = Vec::new();
    let mut records = Vec::with_capacity(EPISODE_STEPS);
    for t in 0..EPISODE_STEPS {
        let goal = env.state().active_goal();
        let random = stuck_recovery && detector.take_random();
        let action = if random {
            injected_steps.push(t);
            (0..ACTION_DIM).map(|_| rng.uniform_range(-1.0, 1.0)).collect()
        } else {
            policy.act(&obs, &goal, PolicyKind::Exploiting, rng)?
        };
        let out = env.step(&action)?;
        if stuck_recovery && !random {
            detector.observe(&out.achieved_goal, &out.goal);
        }
        records.push(StepRecord {
            episode: episode_index,
            step: t,
            action: env.state().prev_action.to_vec(),
            achieved: out.achieved_goal,
            goal: out.goal,
            reward: out.reward,
            success: out.success,
        });
        obs = out.observation;
    }
    let state = env.state();
    let success = is_success(&state.cube_position, &state.trajectory.final_goal());
    let score = score_episode(&records, score_cfg)?;
    Ok(EvalEpisode {
        success,
        score,
        injected_steps,
        records,
    })
}

/// `n_episodes` exploiting episodes with fresh resets drawn from `rng`.
pub fn evaluate<P: Policy + ?Sized>(
    policy: &mut P,
    env: &mut CubeEnv,
    n_episodes: usize,
    stuck_recovery: bool,
    score_cfg: ScoreConfig,
    rng: &mut SeededRng,
) -> Result<EvalReport> {
    if n_episodes == 0 {
        return Err(Error::Config("evaluation needs at least one episode".into()));
    }
    let mut episodes = Vec::with_capacity(n_episodes);
    for i in 0..n_episodes {
        let obs = env.reset(rng);
        episodes.push(run_eval_episode(policy, env, obs, stuck_recovery, i, score_cfg, rng)?);
    }
    Ok(summarize(episodes))
}

pub fn summarize(episodes: Vec<EvalEpisode>) -> EvalReport {
    let n = episodes.len() as f64;
    let success_rate = episodes.iter().filter(|e| e.success).count() as f64 / n;
    let score_mean = episodes.iter().map(|e| e.score).sum::<f64>() / n;
    let score_std = if episodes.len() > 1 {
        (episodes.iter().map(|e| (e.score - score_mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    EvalReport {
        success_rate,
        score_mean,
        score_std,
        episodes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detector_fires_after_patience_and_bursts() {
        let mut d = StuckDetector::default();
        let goal = [0.1, 0.0, 0.1];
        let far = [-0.1, 0.0, 0.0325];
        let mut injected = Vec::new();
        for step in 1..=200 {
            if d.take_random() {
                injected.push(step);
            } else {
                d.observe(&far, &goal);
            }
        }
        assert_eq!(&injected[..7], &[51, 52, 53, 54, 55, 56, 57]);
        assert_eq!(injected[7], 108);
        assert_eq!(injected.len() % 7, 0);
    }

    #[test]
    fn success_resets_counter() {
        let mut d = StuckDetector::default();
        let goal = [0.1, 0.0, 0.1];
        for _ in 0..49 {
            d.observe(&[-0.1, 0.0, 0.0], &goal);
        }
        d.observe(&[0.1, 0.0, 0.0325], &goal);
        for _ in 0..49 {
            d.observe(&[-0.1, 0.0, 0.0], &goal);
            assert!(!d.take_random());
        }
    }

    #[test]
    fn goal_change_resets_counter() {
        let mut d = StuckDetector::default();
        for _ in 0..49 {
            d.observe(&[-0.1, 0.0, 0.0], &[0.1, 0.0, 0.1]);
        }
        d.observe(&[-0.1, 0.0, 0.0], &[0.1, 0.05, 0.1]);
        assert!(!d.take_random());
    }

    #[test]
    fn summary_uses_sample_std() {
        let ep = |score| EvalEpisode {
            success: score > -1.0,
            score,
            injected_steps: vec![],
            records: vec![],
        };
        let r = summarize(vec![ep(-2.0), ep(-4.0), ep(-0.0)]);
        assert!((r.score_mean + 2.0).abs() < 1e-12);
        assert!((r.score_std - 2.0).abs() < 1e-12);
        assert!((r.success_rate - 1.0 / 3.0).abs() < 1e-12);
    }
}
