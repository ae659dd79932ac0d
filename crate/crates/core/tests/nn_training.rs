use agroyield_core::eval::evaluate;
use agroyield_core::nn::{self, gradient_check, Activation, Network, TrainConfig};
use agroyield_core::pipeline::{prepare_crop, train_method, ModelSettings};
use agroyield_core::rng::SplitMix64;
use agroyield_core::synthgen::{generate, GenConfig, ResponseSet};
use agroyield_core::baselines::Method;
use agroyield_core::Crop;

// Plain re-implementation of the forward pass, used as a reference loss.
fn reference_loss(net: &Network, x: &[f64], target: f64) -> f64 {
    let sizes = net.layer_sizes();
    let mut a = x.to_vec();
    let last = sizes.len() - 2;
    for l in 0..=last {
        let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
        let w = &net.weights()[l];
        let b = &net.biases()[l];
        let mut next = vec![0.0; fan_out];
        for j in 0..fan_out {
            let z = b[j] + (0..fan_in).map(|i| w[j * fan_in + i] * a[i]).sum::<f64>();
            next[j] = if l == last {
                z
            } else {
                match net.hidden_activation() {
                    Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
                    Activation::Relu => z.max(0.0),
                    Activation::Identity => z,
                }
            };
        }
        a = next;
    }
    0.5 * (a[0] - target).powi(2)
}

fn with_param(net: &Network, layer: usize, is_bias: bool, k: usize, delta: f64) -> Network {
    let mut w = net.weights().to_vec();
    let mut b = net.biases().to_vec();
    if is_bias {
        b[layer][k] += delta;
    } else {
        w[layer][k] += delta;
    }
    Network::from_parts(net.layer_sizes().to_vec(), net.hidden_activation(), w, b).unwrap()
}

fn random_input(rng: &mut SplitMix64, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect()
}

#[test]
fn backward_matches_independent_finite_differences() {
    let mut rng = SplitMix64::new(11);
    for (seed, sizes) in [[3usize, 5, 4, 1].as_slice(), &[6, 4, 1], &[2, 3, 3, 3, 1]].iter().enumerate() {
        let net = nn::init_network(sizes, Activation::Sigmoid, seed as u64).unwrap();
        let x = random_input(&mut rng, sizes[0]);
        let target = rng.uniform(-1.0, 1.0);
        let grads = net.backward(&net.forward(&x).unwrap(), target).unwrap();
        let eps = 1e-6;
        for l in 0..sizes.len() - 1 {
            for (is_bias, analytic) in [(false, &grads.weights[l]), (true, &grads.biases[l])] {
                for (k, &g) in analytic.iter().enumerate() {
                    let plus = reference_loss(&with_param(&net, l, is_bias, k, eps), &x, target);
                    let minus = reference_loss(&with_param(&net, l, is_bias, k, -eps), &x, target);
                    let numeric = (plus - minus) / (2.0 * eps);
                    assert!((g - numeric).abs() < 1e-7, "layer {l} bias {is_bias} k {k}: {g} vs {numeric}");
                }
            }
        }
    }
}

#[test]
fn forward_matches_reference() {
    let mut rng = SplitMix64::new(5);
    let net = nn::init_network(&nn::DEFAULT_LAYER_SIZES, Activation::Relu, 9).unwrap();
    for _ in 0..20 {
        let x = random_input(&mut rng, 46);
        let p = net.predict(&x).unwrap();
        assert!((0.5 * (p - 0.3).powi(2) - reference_loss(&net, &x, 0.3)).abs() < 1e-12);
    }
}

#[test]
fn gradient_check_on_deep_sigmoid_net() {
    let mut rng = SplitMix64::new(3);
    let net = nn::init_network(&[4, 5, 3, 2, 1], Activation::Sigmoid, 17).unwrap();
    for _ in 0..100 {
        let x = random_input(&mut rng, 4);
        let dev = gradient_check(&net, &x, rng.uniform(-1.0, 1.0), 1e-5).unwrap();
        assert!(dev < 1e-4, "{dev}");
    }
}

#[test]
fn gradient_check_on_relu_net_away_from_kinks() {
    let mut rng = SplitMix64::new(4);
    let net = nn::init_network(&[8, 16, 8, 4, 1], Activation::Relu, 21).unwrap();
    let mut checked = 0;
    while checked < 50 {
        let x = random_input(&mut rng, 8);
        if net.forward(&x).unwrap().min_hidden_pre_activation() < 1e-3 {
            continue;
        }
        let dev = gradient_check(&net, &x, rng.uniform(-1.0, 1.0), 1e-5).unwrap();
        assert!(dev < 1e-4, "{dev}");
        checked += 1;
    }
}

#[test]
fn xor_is_learned() {
    let x = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
    let y = vec![0.0, 1.0, 1.0, 0.0];
    let net = nn::init_network(&[2, 8, 8, 8, 1], Activation::Relu, 1).unwrap();
    let cfg = TrainConfig {
        learning_rate: 0.1,
        batch_size: 1,
        max_epochs: 200,
        patience: 200,
        seed: 1,
        validation_fraction: 0.0,
    };
    let (net, history) = nn::train(net, &x, &y, &cfg).unwrap();
    assert!(history.len() <= 200);
    let mse = net.mse(&x, &y).unwrap();
    assert!(mse < 0.01, "XOR mse {mse}");
}

#[test]
fn convex_full_batch_step_never_increases_mse() {
    let mut rng = SplitMix64::new(8);
    for seed in 0..20 {
        let x: Vec<Vec<f64>> = (0..30).map(|_| random_input(&mut rng, 5)).collect();
        let y: Vec<f64> = x.iter().map(|r| r.iter().sum::<f64>() + rng.uniform(-0.1, 0.1)).collect();
        let mut net = nn::init_network(&[5, 1], Activation::Identity, seed).unwrap();
        let before = net.mse(&x, &y).unwrap();
        let mut total = nn::Gradients::zeros_like(&net);
        for (xi, &yi) in x.iter().zip(&y) {
            total.add_assign(&net.backward(&net.forward(xi).unwrap(), yi).unwrap());
        }
        total.scale(1.0 / x.len() as f64);
        net.sgd_step(&total, 1e-3);
        assert!(net.mse(&x, &y).unwrap() <= before);
    }
}

#[test]
fn training_is_deterministic() {
    let mut rng = SplitMix64::new(2);
    let x: Vec<Vec<f64>> = (0..64).map(|_| random_input(&mut rng, 6)).collect();
    let y: Vec<f64> = x.iter().map(|r| (r[0] * r[1]).tanh()).collect();
    let cfg = TrainConfig { max_epochs: 30, seed: 99, ..TrainConfig::default() };
    let run = || {
        let net = nn::init_network(&[6, 8, 4, 1], Activation::Relu, 3).unwrap();
        nn::train(net, &x, &y, &cfg).unwrap()
    };
    let (a, ha) = run();
    let (b, hb) = run();
    assert_eq!(a, b);
    assert_eq!(ha, hb);
}

#[test]
fn noise_free_synthetic_data_is_learned() {
    let cfg = GenConfig {
        n_records: 1200,
        seed: 13,
        noise_sigma: 0.0,
        crops: vec![Crop::Jute],
        ..GenConfig::default()
    };
    let ds = generate(&cfg, &ResponseSet::shipped()).unwrap();
    let data = prepare_crop(&ds, Crop::Jute, 0.8, 13).unwrap();
    let trained = train_method(Method::Dnn, &data, &ModelSettings::default(), 13).unwrap();
    let metrics = evaluate(&trained.model, &data.test).unwrap();
    assert!(metrics.error_pct < 10.0, "MAPE {}", metrics.error_pct);
}
