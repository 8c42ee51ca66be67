#![allow(dead_code)]

use monas::controller::{ControllerConfig, ControllerState};
use monas::space::{SearchSpace, SpaceKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;

/// Largest relative error between the analytic gradient of
/// `reward · Σ log P(a_t)` and central differences, over `per_tensor`
/// random coordinates of every parameter tensor.
pub fn controller_gradcheck(
    kind: SpaceKind,
    hidden: usize,
    init_scale: f64,
    reward: f64,
    seed: u64,
    per_tensor: usize,
) -> f64 {
    let cfg = ControllerConfig {
        hidden,
        learning_rate: 0.01,
        init_scale,
        baseline_decay: None,
        clip_norm: None,
        seed,
    };
    let mut ctl = ControllerState::new(SearchSpace::build(kind), cfg).unwrap();
    let (seq, rollout) = ctl.sample_sequence().unwrap();
    let analytic = ctl.reward_gradient(&seq, &rollout, reward).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfd);
    let shapes: Vec<usize> = ctl.params().iter().map(|p| p.len()).collect();
    let mut worst = 0.0f64;
    for (t, &len) in shapes.iter().enumerate() {
        for _ in 0..per_tensor.min(len) {
            let i = rng.random_range(0..len);
            let original = ctl.params()[t][i];
            // Per-step log-probs are differenced before summing so the large
            // totals never cancel against each other.
            let mut log_probs = |v: f64| {
                ctl.params_mut()[t][i] = v;
                ctl.replay(&seq).unwrap().1
            };
            let plus = log_probs(original + FD_STEP);
            let minus = log_probs(original - FD_STEP);
            let numeric =
                reward * plus.iter().zip(&minus).map(|(p, m)| p - m).sum::<f64>() / (2.0 * FD_STEP);
            ctl.params_mut()[t][i] = original;
            let a = analytic.tensors[t][i];
            worst = worst.max(relative_error(a, numeric));
        }
    }
    worst
}

/// A central difference at step 1e-5 resolves a log-probability change only
/// to about 1e-16 · |log P| / 1e-5 ≈ 1e-11, so entries much smaller than
/// this floor are compared against it instead of their own magnitude.
pub const GRAD_FLOOR: f64 = 1e-6;

/// `|a − b| / max(|a|, |b|, GRAD_FLOOR)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(GRAD_FLOOR)
}

/// The 20 controller configurations used for gradient checking.
pub fn gradcheck_configs() -> Vec<(SpaceKind, usize, f64, f64, u64)> {
    let hidden = [4, 8, 16, 24, 32];
    let scales = [0.08, 0.3, 0.5, 1.0];
    (0..20u64)
        .map(|i| {
            let kind = SpaceKind::ALL[(i % 3) as usize];
            let reward = if i % 2 == 0 { 0.75 } else { -1.0 };
            (
                kind,
                hidden[(i % 5) as usize],
                scales[(i % 4) as usize],
                reward,
                100 + i,
            )
        })
        .collect()
}
