//! Minimal dense-network core: layers, activations, dropout, losses and
//! Adam with per-layer learning-rate multipliers.

mod adam;
mod layers;
mod loss;
mod network;
mod rng;
mod standardize;

pub use adam::{Adam, AdamConfig};
pub use layers::{dropout_forward, relu_backward, relu_forward, DenseGrads, DenseLayer};
pub use loss::{bce_with_logits_loss, mse_loss, sigmoid};
pub use network::{Gradients, Network, Stage, Trace};
pub use rng::{minibatches, seeded, Rng};
pub use standardize::Standardizer;
pub(crate) use standardize::{read_optional as read_standardizer, write_optional as write_standardizer};

/// Multipliers for `n_layers` dense layers, decaying by `factor` per layer
/// moving back from the head. Only the top `trainable` layers move; the
/// rest get 0 (frozen).
///
/// `layer_wise_decay(4, 10.0, 3)` gives `[0, 0.01, 0.1, 1]`.
pub fn layer_wise_decay(n_layers: usize, factor: f64, trainable: usize) -> Vec<f64> {
    (0..n_layers)
        .map(|i| {
            let depth = n_layers - 1 - i;
            if depth < trainable {
                factor.powi(-(depth as i32))
            } else {
                0.0
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::Rng as _;

    #[test]
    fn decay_schedule() {
        assert_eq!(layer_wise_decay(4, 10.0, 3), vec![0.0, 0.01, 0.1, 1.0]);
        assert_eq!(layer_wise_decay(2, 10.0, 2), vec![0.1, 1.0]);
        assert_eq!(layer_wise_decay(2, 10.0, 0), vec![0.0, 0.0]);
    }

    fn random_net(rng: &mut Rng, dims: &[usize], dropout: bool) -> Network {
        let mut stages = Vec::new();
        for (i, w) in dims.windows(2).enumerate() {
            let mut layer = DenseLayer::init_uniform(w[0], w[1], rng);
            layer.bias.mapv_inplace(|_| rng.random_range(-0.5..0.5));
            stages.push(Stage::Dense(layer));
            if i + 2 < dims.len() {
                if dropout {
                    stages.push(Stage::Dropout { p: 0.25 });
                }
                stages.push(Stage::Relu);
            }
        }
        Network::new(stages)
    }

    /// Worst relative error between backprop and central differences over
    /// every parameter, with the dropout mask pinned by reseeding.
    fn worst_gradient_error(net: &Network, x: &Array2<f64>, loss: &dyn Fn(&Array2<f64>) -> (f64, Array2<f64>)) -> f64 {
        let eval = |n: &Network| {
            let mut rng = seeded(99);
            let (out, trace) = n.forward_train(x.view(), &mut rng).unwrap();
            (out, trace)
        };
        let (out, trace) = eval(net);
        let grads = net.backward(&trace, loss(&out).1);
        let h = 1e-5;
        let mut worst = 0.0f64;
        let mut layer_idx = 0;
        for (s, stage) in net.stages.iter().enumerate() {
            let Stage::Dense(d) = stage else { continue };
            let analytic = &grads[layer_idx];
            layer_idx += 1;
            let n_w = d.weights.len();
            for p in 0..n_w + d.bias.len() {
                let perturbed = |delta: f64| {
                    let mut n = net.clone();
                    let Stage::Dense(d) = &mut n.stages[s] else { unreachable!() };
                    if p < n_w {
                        let (r, c) = (p / d.weights.ncols(), p % d.weights.ncols());
                        d.weights[[r, c]] += delta;
                    } else {
                        d.bias[p - n_w] += delta;
                    }
                    loss(&eval(&n).0).0
                };
                let numeric = (perturbed(h) - perturbed(-h)) / (2.0 * h);
                let a = if p < n_w {
                    analytic.weights[[p / d.weights.ncols(), p % d.weights.ncols()]]
                } else {
                    analytic.bias[p - n_w]
                };
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
                worst = worst.max(rel);
            }
        }
        worst
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let mut rng = seeded(11);
        for trial in 0..10 {
            let dims = [3, 6, 4, 2];
            let net = random_net(&mut rng, &dims, trial % 2 == 0);
            let x = Array2::from_shape_simple_fn((5, 3), || rng.random_range(-1.0..1.0));
            let target = Array2::from_shape_simple_fn((5, 2), || rng.random_range(-1.0..1.0));
            let mse = |out: &Array2<f64>| mse_loss(out, &target).unwrap();
            assert!(worst_gradient_error(&net, &x, &mse) < 1e-4);

            let head = random_net(&mut rng, &[3, 6, 1], trial % 2 == 1);
            let labels: Vec<f64> = (0..5).map(|i| (i % 2) as f64).collect();
            let bce = |out: &Array2<f64>| bce_with_logits_loss(out, &labels).unwrap();
            assert!(worst_gradient_error(&head, &x, &bce) < 1e-4);
        }
    }

    fn train(seed: u64, steps: usize) -> (Network, Vec<f64>) {
        let mut rng = seeded(seed);
        let mut net = random_net(&mut rng, &[4, 8, 4], true);
        let x = Array2::from_shape_simple_fn((16, 4), || rng.random_range(-1.0..1.0));
        let target = Array2::from_shape_simple_fn((16, 4), || rng.random_range(-1.0..1.0));
        let mut adam = Adam::new(AdamConfig::default(), &net);
        let mut losses = Vec::new();
        for _ in 0..steps {
            let (out, trace) = net.forward_train(x.view(), &mut rng).unwrap();
            let (l, g) = mse_loss(&out, &target).unwrap();
            losses.push(l);
            let grads = net.backward(&trace, g);
            adam.apply(&mut net, &grads).unwrap();
        }
        (net, losses)
    }

    #[test]
    fn training_is_bit_deterministic() {
        assert_eq!(train(5, 20).0, train(5, 20).0);
        assert_ne!(train(5, 20).0, train(6, 20).0);
    }

    #[test]
    fn fifty_adam_steps_reduce_loss() {
        let mut rng = seeded(8);
        let mut net = random_net(&mut rng, &[4, 8, 4], false);
        let x = Array2::from_shape_simple_fn((16, 4), || rng.random_range(-1.0..1.0));
        let target = Array2::from_shape_simple_fn((16, 4), || rng.random_range(-1.0..1.0));
        let mut adam = Adam::new(AdamConfig { learning_rate: 1e-2, ..Default::default() }, &net);
        let initial = mse_loss(&net.forward(x.view()).unwrap(), &target).unwrap().0;
        for _ in 0..50 {
            let (out, trace) = net.forward_train(x.view(), &mut rng).unwrap();
            let grads = net.backward(&trace, mse_loss(&out, &target).unwrap().1);
            adam.apply(&mut net, &grads).unwrap();
        }
        let after = mse_loss(&net.forward(x.view()).unwrap(), &target).unwrap().0;
        assert!(after < initial, "{after} >= {initial}");
    }

    #[test]
    fn frozen_first_layer_survives_training() {
        let mut rng = seeded(21);
        let mut net = random_net(&mut rng, &[3, 5, 2], false);
        net.set_lr_multipliers(&[0.0, 1.0]).unwrap();
        let first_before = net.dense_layers().next().unwrap().clone();
        let last_before = net.dense_layers().last().unwrap().clone();
        let x = Array2::from_shape_simple_fn((8, 3), || rng.random_range(-1.0..1.0));
        let target = Array2::zeros((8, 2));
        let mut adam = Adam::new(AdamConfig::default(), &net);
        for _ in 0..10 {
            let (out, trace) = net.forward_train(x.view(), &mut rng).unwrap();
            let grads = net.backward(&trace, mse_loss(&out, &target).unwrap().1);
            adam.apply(&mut net, &grads).unwrap();
        }
        assert_eq!(net.dense_layers().next().unwrap(), &first_before);
        assert_ne!(net.dense_layers().last().unwrap(), &last_before);
    }
}
