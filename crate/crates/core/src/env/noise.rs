use crate::numerics::SeededRng;

/// Adds independent Gaussian noise of std `sigma` to every entry.
/// Draws nothing from `rng` when `sigma == 0`.
pub fn add_observation_noise(v: &mut [f64], sigma: f64, rng: &mut SeededRng) {
    if sigma <= 0.0 {
        return;
    }
    for x in v.iter_mut() {
        *x += sigma * rng.normal();
    }
}

/// Gaussian action noise followed by re-clipping to `[-1, 1]`.
pub fn add_action_noise(action: &mut [f64], sigma: f64, rng: &mut SeededRng) {
    add_observation_noise(action, sigma, rng);
    for a in action.iter_mut() {
        *a = a.clamp(-1.0, 1.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sigma_is_identity() {
        let mut rng = SeededRng::new(0);
        let before = rng.clone();
        let mut v = vec![0.3, -0.7, 1.0];
        add_action_noise(&mut v, 0.0, &mut rng);
        assert_eq!(v, vec![0.3, -0.7, 1.0]);
        assert_eq!(rng, before);
    }

    #[test]
    fn sample_std_matches_sigma() {
        let mut rng = SeededRng::new(42);
        let n = 100_000;
        let dims = 3;
        let mut sum = vec![0.0; dims];
        let mut sq = vec![0.0; dims];
        for _ in 0..n {
            let mut v = vec![0.0; dims];
            add_observation_noise(&mut v, 0.1, &mut rng);
            for d in 0..dims {
                sum[d] += v[d];
                sq[d] += v[d] * v[d];
            }
        }
        for d in 0..dims {
            let mean = sum[d] / n as f64;
            let std = (sq[d] / n as f64 - mean * mean).sqrt();
            assert!((std - 0.1).abs() < 0.002, "dim {d}: std {std}");
        }
    }

    #[test]
    fn noisy_actions_stay_in_bounds() {
        let mut rng = SeededRng::new(9);
        for _ in 0..2000 {
            let mut a = vec![0.99, -0.99, 0.0];
            add_action_noise(&mut a, 0.5, &mut rng);
            assert!(a.iter().all(|x| (-1.0..=1.0).contains(x)));
        }
    }
}
