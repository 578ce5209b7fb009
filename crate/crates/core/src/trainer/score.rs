//! Competition-style episode score: negative cumulative normalized position error.

use crate::env::rollout_log::StepRecord;
use crate::env::EPISODE_STEPS;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreConfig {
    /// Normalizer for the x-y error (arena diameter), m.
    pub d_xy: f64,
    /// Normalizer for the height error, m.
    pub d_z: f64,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self { d_xy: 0.39, d_z: 0.27 }
    }
}

/// Per-step penalty `1/2 |e_xy| / d_xy + 1/2 |e_z| / d_z`.
pub fn step_error(achieved: &[f64; 3], goal: &[f64; 3], cfg: ScoreConfig) -> f64 {
    let e_xy = (achieved[0] - goal[0]).hypot(achieved[1] - goal[1]);
    let e_z = (achieved[2] - goal[2]).abs();
    0.5 * e_xy / cfg.d_xy + 0.5 * e_z / cfg.d_z
}

/// Score of one complete episode. Records must be steps `0..90` in order.
pub fn score_episode(records: &[StepRecord], cfg: ScoreConfig) -> Result<f64> {
    if records.len() != EPISODE_STEPS {
        return Err(Error::Input(format!(
            "episode has {} steps, expected {EPISODE_STEPS}",
            records.len()
        )));
    }
    let mut score = 0.0;
    for (i, r) in records.iter().enumerate() {
        if r.step != i {
            return Err(Error::Input(format!("expected step {i}, found step {}", r.step)));
        }
        score -= step_error(&r.achieved, &r.goal, cfg);
    }
    Ok(score)
}

/// Splits a multi-episode log into episodes, checking each one is complete.
/// Errors name the 1-based record (line) where the log breaks off.
pub fn split_episodes(records: &[StepRecord]) -> Result<Vec<&[StepRecord]>> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < records.len() {
        let ep = records[start].episode;
        let mut end = start;
        while end < records.len() && records[end].episode == ep {
            let expected = end - start;
            if records[end].step != expected {
                return Err(Error::Input(format!(
                    "line {}: episode {ep} expected step {expected}, found {}",
                    end + 1,
                    records[end].step
                )));
            }
            end += 1;
        }
        if end - start != EPISODE_STEPS {
            return Err(Error::Input(format!(
                "line {}: episode {ep} truncated after {} of {EPISODE_STEPS} steps",
                end,
                end - start
            )));
        }
        out.push(&records[start..end]);
        start = end;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn episode(achieved: [f64; 3], goal: [f64; 3]) -> Vec<StepRecord> {
        (0..EPISODE_STEPS)
            .map(|step| StepRecord {
                episode: 0,
                step,
                action: vec![0.0; 9],
                achieved,
                goal,
                reward: 0.0,
                success: false,
            })
            .collect()
    }

    #[test]
    fn perfect_tracking_scores_zero() {
        let g = [0.05, 0.02, 0.1];
        assert_eq!(score_episode(&episode(g, g), ScoreConfig::default()).unwrap(), 0.0);
    }

    #[test]
    fn constant_xy_error() {
        let s = score_episode(&episode([0.039, 0.0, 0.1], [0.0, 0.0, 0.1]), ScoreConfig::default()).unwrap();
        assert!((s + 4.5).abs() < 1e-12, "{s}");
    }

    #[test]
    fn monotone_in_error() {
        let cfg = ScoreConfig::default();
        let g = [0.0, 0.0, 0.1];
        let mut last = 0.0;
        for k in 1..10 {
            let e = k as f64 * 0.01;
            let s = score_episode(&episode([e, 0.0, 0.1 + e], g), cfg).unwrap();
            assert!(s <= last);
            last = s;
        }
    }

    #[test]
    fn incomplete_episode_rejected() {
        let mut recs = episode([0.0; 3], [0.0; 3]);
        recs.pop();
        assert!(score_episode(&recs, ScoreConfig::default()).is_err());
        let err = split_episodes(&recs).unwrap_err().to_string();
        assert!(err.contains("line 89"), "{err}");
    }

    #[test]
    fn split_two_episodes() {
        let mut recs = episode([0.0; 3], [0.0; 3]);
        let mut second = episode([0.1, 0.0, 0.0], [0.0; 3]);
        second.iter_mut().for_each(|r| r.episode = 1);
        recs.extend(second);
        let eps = split_episodes(&recs).unwrap();
        assert_eq!(eps.len(), 2);
        assert_eq!(eps[1][0].episode, 1);
    }
}
