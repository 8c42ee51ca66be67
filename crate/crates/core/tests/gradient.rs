mod support;

use monas::nn::LstmCell;
use monas::space::SpaceKind;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{controller_gradcheck, gradcheck_configs, relative_error, FD_STEP};

#[test]
fn controller_gradient_matches_finite_differences() {
    for (kind, hidden, scale, reward, seed) in gradcheck_configs() {
        let err = controller_gradcheck(kind, hidden, scale, reward, seed, 16);
        assert!(
            err < 1e-4,
            "{kind} hidden={hidden} scale={scale} seed={seed}: {err:e}"
        );
    }
}

#[test]
fn default_sized_controllers_pass_gradcheck() {
    for kind in SpaceKind::ALL {
        let hidden = monas::controller::ControllerConfig::for_space(kind, 0).hidden;
        let err = controller_gradcheck(kind, hidden, 0.08, 1.0, 7, 8);
        assert!(err < 1e-4, "{kind}: {err:e}");
    }
}

/// Loss `Σ_t v_t · h_t` over a three-step unroll.
fn lstm_loss(cell: &LstmCell, xs: &[Vec<f64>], vs: &[Vec<f64>]) -> f64 {
    let hd = cell.hidden_dim();
    let (mut h, mut c) = (vec![0.0; hd], vec![0.0; hd]);
    let mut loss = 0.0;
    for (x, v) in xs.iter().zip(vs) {
        let (nh, nc, _) = cell.forward(x, &h, &c).unwrap();
        loss += nh.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        h = nh;
        c = nc;
    }
    loss
}

#[test]
fn lstm_three_step_gradient_every_entry() {
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (input, hidden) = (4, 3);
        let mut cell = LstmCell::uniform(input, hidden, 0.5, &mut rng);
        let xs: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..input).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let vs: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..hidden).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();

        let hd = cell.hidden_dim();
        let (mut h, mut c) = (vec![0.0; hd], vec![0.0; hd]);
        let mut caches = Vec::new();
        for x in &xs {
            let (nh, nc, cache) = cell.forward(x, &h, &c).unwrap();
            caches.push(cache);
            h = nh;
            c = nc;
        }
        let grads = cell.backward(&caches, &vs).unwrap();

        let mut check = |analytic: &[f64], get: &mut dyn FnMut(&mut LstmCell) -> &mut [f64]| {
            for (i, &a) in analytic.iter().enumerate() {
                let original = get(&mut cell)[i];
                get(&mut cell)[i] = original + FD_STEP;
                let plus = lstm_loss(&cell, &xs, &vs);
                get(&mut cell)[i] = original - FD_STEP;
                let minus = lstm_loss(&cell, &xs, &vs);
                get(&mut cell)[i] = original;
                let numeric = (plus - minus) / (2.0 * FD_STEP);
                let err = relative_error(a, numeric);
                assert!(err < 1e-4, "seed {seed} entry {i}: {} vs {numeric}", a);
            }
        };
        check(grads.w.data(), &mut |c| c.w.data_mut());
        check(grads.u.data(), &mut |c| c.u.data_mut());
        check(&grads.b, &mut |c| &mut c.b);

        for t in 0..xs.len() {
            for i in 0..input {
                let mut xp = xs.clone();
                xp[t][i] += FD_STEP;
                let mut xm = xs.clone();
                xm[t][i] -= FD_STEP;
                let numeric =
                    (lstm_loss(&cell, &xp, &vs) - lstm_loss(&cell, &xm, &vs)) / (2.0 * FD_STEP);
                let err = relative_error(grads.inputs[t][i], numeric);
                assert!(err < 1e-4, "seed {seed} input {t},{i}");
            }
        }
    }
}
