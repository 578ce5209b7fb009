use proptest::prelude::*;

use trajher::env::reward::{xy_reward, z_reward};
use trajher::env::{
    add_action_noise, compute_reward, is_success, CubeEnv, DrConfig, EnvParams, RewardConfig, RewardMode, ACTION_DIM,
    EPISODE_STEPS,
};
use trajher::numerics::{polyak_update, RunningNormalizer, SeededRng};
use trajher::trainer::score::step_error;
use trajher::trainer::ScoreConfig;

fn vec_pair(len: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (
        prop::collection::vec(-1e3..1e3f64, len),
        prop::collection::vec(-1e3..1e3f64, len),
    )
}

fn point() -> impl Strategy<Value = [f64; 3]> {
    (-0.3..0.3f64, -0.3..0.3f64, 0.0..0.3f64).prop_map(|(x, y, z)| [x, y, z])
}

proptest! {
    #[test]
    fn polyak_stays_between_target_and_main((t, m) in vec_pair(16), tau in 0.0..=1.0f64) {
        let mut out = t.clone();
        polyak_update(&mut out, &m, tau).unwrap();
        for i in 0..t.len() {
            prop_assert!(out[i] >= t[i].min(m[i]) && out[i] <= t[i].max(m[i]));
        }
    }

    #[test]
    fn polyak_extremes_are_exact((t, m) in vec_pair(8)) {
        let mut keep = t.clone();
        polyak_update(&mut keep, &m, 1.0).unwrap();
        prop_assert_eq!(&keep, &t);
        let mut copy = t.clone();
        polyak_update(&mut copy, &m, 0.0).unwrap();
        prop_assert_eq!(&copy, &m);
    }

    #[test]
    fn polyak_rejects_out_of_range_tau(tau in prop_oneof![-10.0..-1e-9f64, 1.0 + 1e-9..10.0f64]) {
        let mut t = vec![0.0; 3];
        prop_assert!(polyak_update(&mut t, &[1.0; 3], tau).is_err());
    }

    #[test]
    fn normalized_values_within_clip(
        data in prop::collection::vec(-50.0..50.0f64, 3..60),
        probe in prop::collection::vec(-1e4..1e4f64, 3),
    ) {
        let rows = data.len() / 3 * 3;
        let mut n = RunningNormalizer::new(3);
        n.update(&data[..rows]).unwrap();
        for v in n.normalize(&probe).unwrap() {
            prop_assert!(v.abs() <= 5.0);
        }
        for s in n.std() {
            prop_assert!(s >= 1e-2);
        }
    }

    #[test]
    fn duplicating_the_batch_leaves_normalization_unchanged(
        data in prop::collection::vec(-50.0..50.0f64, 4..40),
        probe in prop::collection::vec(-60.0..60.0f64, 2),
    ) {
        let rows = data.len() / 2 * 2;
        let batch = &data[..rows];
        let mut once = RunningNormalizer::new(2);
        once.update(batch).unwrap();
        let mut twice = RunningNormalizer::new(2);
        twice.update(&[batch, batch].concat()).unwrap();
        let a = once.normalize(&probe).unwrap();
        let b = twice.normalize(&probe).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0), "{} vs {}", x, y);
        }
    }

    #[test]
    fn rewards_are_nonpositive_and_consistent(a in point(), g in point()) {
        let full = RewardConfig::default();
        let r = compute_reward(&a, &g, full);
        prop_assert!(r <= 0.0);
        prop_assert_eq!(r, xy_reward(&a, &g) + z_reward(a[2], g[2], 20.0));
        let push = compute_reward(&a, &g, RewardConfig { mode: RewardMode::PushOnly, z_weight: 20.0 });
        prop_assert!(push == 0.0 || push == -1.0);
        let mut g_other_z = g;
        g_other_z[2] = a[2] + 0.1;
        prop_assert_eq!(push, compute_reward(&a, &g_other_z, RewardConfig { mode: RewardMode::PushOnly, z_weight: 20.0 }));
    }

    #[test]
    fn height_term_penalizes_below_twice_as_much(z in 0.0..0.3f64, d in 1e-4..0.1f64) {
        let below = z_reward(z, z + d, 20.0);
        let above = z_reward(z + d, z, 20.0);
        prop_assert!((below - 2.0 * above).abs() < 1e-12);
    }

    #[test]
    fn success_implies_zero_xy_reward(a in point(), g in point()) {
        if is_success(&a, &g) {
            prop_assert_eq!(xy_reward(&a, &g), 0.0);
        }
    }

    #[test]
    fn step_error_nonnegative_and_zero_only_on_goal(a in point(), g in point()) {
        let e = step_error(&a, &g, ScoreConfig::default());
        prop_assert!(e >= 0.0);
        prop_assert_eq!(step_error(&g, &g, ScoreConfig::default()), 0.0);
    }

    #[test]
    fn noisy_actions_stay_clipped(raw in prop::collection::vec(-1.0..=1.0f64, ACTION_DIM), sigma in 0.0..3.0f64, seed: u64) {
        let mut a = raw;
        add_action_noise(&mut a, sigma, &mut SeededRng::new(seed));
        prop_assert!(a.iter().all(|v| (-1.0..=1.0).contains(v)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_episodes_keep_world_in_bounds(seed: u64, randomized: bool) {
        let dr = DrConfig { enabled: randomized, ..DrConfig::default() };
        let mut env = CubeEnv::new(EnvParams::default(), dr, RewardConfig::default()).unwrap();
        let mut rng = SeededRng::new(seed);
        env.reset(&mut rng);
        let p = env.state().params;
        for _ in 0..EPISODE_STEPS {
            let a: Vec<f64> = (0..ACTION_DIM).map(|_| rng.uniform_range(-1.5, 1.5)).collect();
            let out = env.step(&a).unwrap();
            prop_assert!(out.reward <= 0.0);
            let s = env.state();
            let c = s.cube_position;
            prop_assert!(c[0].hypot(c[1]) <= p.arena_radius - p.cube_half_extent + 1e-12);
            prop_assert!(c[2] >= p.cube_half_extent - 1e-12 && c[2] <= p.max_height + 1e-12);
            for e in &s.effector_positions {
                prop_assert!(e[0].hypot(e[1]) <= p.arena_radius + 1e-12);
                prop_assert!(e[2] >= 0.0 && e[2] <= p.max_height);
            }
            prop_assert!(s.prev_action.iter().all(|v| (-1.0..=1.0).contains(v)));
        }
        prop_assert!(env.step(&[0.0; ACTION_DIM]).is_err());
    }
}
