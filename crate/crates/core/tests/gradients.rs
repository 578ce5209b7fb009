mod common;

use common::{actor_loss, critic_loss, finite_difference, random_agent, random_batch, relative_error};
use trajher::agent::DdpgAgent;
use trajher::numerics::{Mlp, OutputActivation, SeededRng};

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;
const FLOOR: f64 = 1e-6;

fn max_rel(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| relative_error(a, n, FLOOR))
        .fold(0.0, f64::max)
}

fn critic_gap(agent: &DdpgAgent, seed: u64) -> f64 {
    let batch = random_batch(6, &mut SeededRng::new(seed));
    let analytic = agent.critic_loss(&batch).unwrap();
    let oracle = critic_loss(agent, &batch, agent.critic.params());
    assert!((analytic.loss - oracle).abs() <= 1e-10 * oracle.abs().max(1.0));
    let numeric = finite_difference(agent.critic.params(), H, |p| critic_loss(agent, &batch, p));
    max_rel(&analytic.grads, &numeric)
}

fn actor_gap(agent: &DdpgAgent, seed: u64) -> f64 {
    let batch = random_batch(6, &mut SeededRng::new(seed));
    let analytic = agent.actor_loss(&batch).unwrap();
    let oracle = actor_loss(agent, &batch, agent.actor.params());
    assert!((analytic.loss - oracle).abs() <= 1e-10 * oracle.abs().max(1.0));
    let numeric = finite_difference(agent.actor.params(), H, |p| actor_loss(agent, &batch, p));
    max_rel(&analytic.grads, &numeric)
}

#[test]
fn critic_and_actor_gradients_match_finite_differences() {
    let mut rng = SeededRng::new(11);
    for k in 0..20 {
        let agent = random_agent(&mut rng);
        let c = critic_gap(&agent, 100 + k);
        let a = actor_gap(&agent, 200 + k);
        assert!(c < TOL, "network {k}: critic relative error {c}");
        assert!(a < TOL, "network {k}: actor relative error {a}");
    }
}

#[test]
fn clipped_targets_still_give_exact_gradients() {
    let mut rng = SeededRng::new(12);
    let mut agent = random_agent(&mut rng);
    agent.target_clip = (-0.5, -0.4);
    assert!(critic_gap(&agent, 7) < TOL);
}

#[test]
fn oracle_detects_a_wrong_gradient() {
    let mut rng = SeededRng::new(13);
    let agent = random_agent(&mut rng);
    let batch = random_batch(4, &mut SeededRng::new(3));
    let mut grads = agent.critic_loss(&batch).unwrap().grads;
    let numeric = finite_difference(agent.critic.params(), H, |p| critic_loss(&agent, &batch, p));
    let k = numeric
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .unwrap()
        .0;
    grads[k] *= 1.01;
    assert!(max_rel(&grads, &numeric) > TOL);
}

#[test]
fn single_network_backward_matches_finite_differences() {
    let mut rng = SeededRng::new(14);
    for act in [OutputActivation::Identity, OutputActivation::Tanh] {
        let sizes = [5, 7, 4, 3];
        let net = Mlp::new(&sizes, act, &mut rng).unwrap();
        let x: Vec<f64> = (0..5).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
        let w = [0.3, -1.2, 0.7];
        let loss = |p: &[f64]| {
            let y = common::mlp_forward(&sizes, p, act == OutputActivation::Tanh, &x);
            y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>()
        };
        let g = net.backward(&x, &w).unwrap();
        let numeric = finite_difference(net.params(), H, loss);
        assert!(max_rel(&g.params, &numeric) < TOL);
        let numeric_in = finite_difference(&x, H, |xx| {
            let y = common::mlp_forward(&sizes, net.params(), act == OutputActivation::Tanh, xx);
            y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>()
        });
        assert!(max_rel(&g.input, &numeric_in) < TOL);
    }
}
