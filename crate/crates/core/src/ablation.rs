//! Reward/relabeling ablation: each arm trains without randomization for the
//! same env-step budget; per-epoch eval success is compared across arms.

use crate::config::Preset;
use crate::error::{Error, Result};
use crate::trainer::{EpochMetrics, EpochPlan, Stage, TrainConfig, Trainer};

pub const ARMS: [Preset; 3] = [Preset::Final, Preset::HerStandard, Preset::HerBoth];
pub const CSV_HEADER: &str = "arm,seed,epoch,env_steps,eval_success";

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub arm: Preset,
    pub seed: u64,
    pub epoch: u64,
    pub env_steps: u64,
    pub eval_success: f64,
}

impl AblationRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.arm.name(),
            self.seed,
            self.epoch,
            self.env_steps,
            self.eval_success
        )
    }

    pub fn parse(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.split(',').collect();
        let bad = || Error::Input(format!("malformed ablation row {line:?}"));
        if f.len() != 5 {
            return Err(bad());
        }
        Ok(Self {
            arm: Preset::parse(f[0]).ok_or_else(bad)?,
            seed: f[1].parse().map_err(|_| bad())?,
            epoch: f[2].parse().map_err(|_| bad())?,
            env_steps: f[3].parse().map_err(|_| bad())?,
            eval_success: f[4].parse().map_err(|_| bad())?,
        })
    }
}

pub fn arm_config(base: &TrainConfig, arm: Preset, seed: u64) -> TrainConfig {
    let mut cfg = base.clone();
    arm.apply(&mut cfg);
    cfg.seed = seed;
    cfg
}

/// Whole epochs that fit in `budget_steps`. Independent of the arm.
pub fn epochs_for_budget(cfg: &TrainConfig, budget_steps: u64) -> u64 {
    budget_steps / cfg.steps_per_epoch()
}

/// Trains one arm for `epochs` epochs without randomization, reporting each epoch.
pub fn run_arm(
    cfg: TrainConfig,
    epochs: u64,
    mut on_epoch: impl FnMut(&EpochMetrics) -> Result<()>,
) -> Result<Vec<EpochMetrics>> {
    let mut trainer = Trainer::new(cfg)?;
    let plan = EpochPlan {
        stage: Stage::One,
        randomized: false,
        updates: true,
    };
    let mut out = Vec::with_capacity(epochs as usize);
    for _ in 0..epochs {
        let m = trainer.run_epoch(plan)?;
        on_epoch(&m)?;
        out.push(m);
    }
    Ok(out)
}

/// Median; mean of the two middle values for even counts.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Per-epoch `(env_steps, median eval success over seeds)` for one arm.
/// Only epochs every seed reached are included.
pub fn median_curve(rows: &[AblationRow], arm: Preset) -> Vec<(u64, f64)> {
    let mine: Vec<&AblationRow> = rows.iter().filter(|r| r.arm == arm).collect();
    let mut seeds: Vec<u64> = mine.iter().map(|r| r.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    let mut epochs: Vec<u64> = mine.iter().map(|r| r.epoch).collect();
    epochs.sort_unstable();
    epochs.dedup();
    epochs
        .into_iter()
        .filter_map(|e| {
            let at: Vec<&&AblationRow> = mine.iter().filter(|r| r.epoch == e).collect();
            (at.len() == seeds.len()).then(|| {
                let vals: Vec<f64> = at.iter().map(|r| r.eval_success).collect();
                (at[0].env_steps, median(&vals))
            })
        })
        .collect()
}

/// Env steps at which the curve first reaches `threshold`.
pub fn first_reaching(curve: &[(u64, f64)], threshold: f64) -> Option<u64> {
    curve.iter().find(|(_, s)| *s >= threshold).map(|(steps, _)| *steps)
}

fn value_at(curve: &[(u64, f64)], steps: u64) -> Option<f64> {
    curve.iter().find(|(s, _)| *s == steps).map(|(_, v)| *v)
}

/// Outcome of comparing the final method against standard sparse relabeling.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub final_half_steps: Option<u64>,
    pub final_at_half: Option<f64>,
    pub standard_at_half: Option<f64>,
    pub final_threshold_steps: Option<u64>,
    pub standard_threshold_steps: Option<u64>,
    /// Standard is strictly lower where final first reaches one half.
    pub lower_at_half: bool,
    /// Final reaches the threshold no later than standard.
    pub no_slower: bool,
}

pub fn compare(rows: &[AblationRow], threshold: f64) -> Comparison {
    let fin = median_curve(rows, Preset::Final);
    let std = median_curve(rows, Preset::HerStandard);
    let final_half_steps = first_reaching(&fin, 0.5);
    let final_at_half = final_half_steps.and_then(|s| value_at(&fin, s));
    let standard_at_half = final_half_steps.and_then(|s| value_at(&std, s));
    let final_threshold_steps = first_reaching(&fin, threshold);
    let standard_threshold_steps = first_reaching(&std, threshold);
    let lower_at_half = matches!((final_at_half, standard_at_half), (Some(f), Some(s)) if s < f);
    let no_slower = match (final_threshold_steps, standard_threshold_steps) {
        (Some(f), Some(s)) => f <= s,
        (Some(_), None) => true,
        _ => false,
    };
    Comparison {
        final_half_steps,
        final_at_half,
        standard_at_half,
        final_threshold_steps,
        standard_threshold_steps,
        lower_at_half,
        no_slower,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(arm: Preset, seed: u64, epoch: u64, s: f64) -> AblationRow {
        AblationRow {
            arm,
            seed,
            epoch,
            env_steps: epoch * 100,
            eval_success: s,
        }
    }

    #[test]
    fn median_odd_even_and_empty() {
        assert_eq!(median(&[0.3, 0.1, 0.2]), 0.2);
        assert_eq!(median(&[0.4, 0.1, 0.2, 0.3]), 0.25);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn row_csv_round_trip() {
        let r = row(Preset::HerBoth, 3, 7, 0.6);
        assert_eq!(AblationRow::parse(&r.csv_row()).unwrap(), r);
        assert!(AblationRow::parse("final,1,2").is_err());
    }

    #[test]
    fn curve_skips_epochs_missing_a_seed() {
        let rows = vec![
            row(Preset::Final, 0, 1, 0.2),
            row(Preset::Final, 1, 1, 0.4),
            row(Preset::Final, 0, 2, 0.9),
        ];
        assert_eq!(median_curve(&rows, Preset::Final), vec![(100, 0.30000000000000004)]);
    }

    #[test]
    fn comparison_directions() {
        let mut rows = Vec::new();
        for seed in 0..3 {
            for (e, (f, s)) in [(0.1, 0.0), (0.6, 0.2), (0.9, 0.5), (0.9, 0.8)].into_iter().enumerate() {
                rows.push(row(Preset::Final, seed, e as u64 + 1, f));
                rows.push(row(Preset::HerStandard, seed, e as u64 + 1, s));
            }
        }
        let c = compare(&rows, 0.8);
        assert_eq!(c.final_half_steps, Some(200));
        assert_eq!(c.standard_at_half, Some(0.2));
        assert!(c.lower_at_half);
        assert_eq!(c.final_threshold_steps, Some(300));
        assert_eq!(c.standard_threshold_steps, Some(400));
        assert!(c.no_slower);

        let swapped: Vec<AblationRow> = rows
            .iter()
            .map(|r| AblationRow {
                arm: if r.arm == Preset::Final { Preset::HerStandard } else { Preset::Final },
                ..r.clone()
            })
            .collect();
        let c = compare(&swapped, 0.8);
        assert!(!c.no_slower);
    }

    #[test]
    fn budget_is_whole_epochs() {
        let cfg = TrainConfig::default();
        assert_eq!(epochs_for_budget(&cfg, 2_000_000), 202);
        assert_eq!(epochs_for_budget(&cfg, 9_899), 0);
    }
}
