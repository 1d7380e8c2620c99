//! Backward pass against central finite differences in f64.

mod common;

use common::{random_set, rel_err, rng, tiny_config, worst_param_error, FD_STEP as H};
use simvec_metric::model::{backward, forward, forward_tokens, init_params, Aggregate, Arch};
use simvec_metric::simvec::{token_inputs, tokenize, SimVecMode};

#[test]
fn transformer_parameter_gradients() {
    let (err, at) = worst_param_error(Arch::Transformer, SimVecMode::Full, Aggregate::None, 2, 0..10);
    println!("worst relative error {err:.3e} at {at}");
    assert!(err < 1e-4, "{err} at {at}");
}

#[test]
fn raw_feature_layout_gradients() {
    let (err, at) = worst_param_error(Arch::Transformer, SimVecMode::RawFeatures, Aggregate::None, 2, 0..3);
    assert!(err < 1e-4, "{err} at {at}");
}

#[test]
fn mlp_ablation_gradients() {
    let (err, at) = worst_param_error(Arch::MlpAblation, SimVecMode::Full, Aggregate::None, 3, 0..3);
    assert!(err < 1e-4, "{err} at {at}");
}

#[test]
fn aggregate_mean_gradients() {
    let (err, at) = worst_param_error(Arch::Transformer, SimVecMode::Full, Aggregate::Mean, 3, 0..3);
    assert!(err < 1e-4, "{err} at {at}");
}

#[test]
fn token_gradients() {
    let cfg = tiny_config(6, 5, Arch::Transformer, SimVecMode::Full, Aggregate::None);
    let mut worst = 0.0f64;
    for seed in 0..5 {
        let e = random_set(&mut rng(100 + seed), 6, 5, 3);
        let params = init_params(&cfg, seed).unwrap();
        let inputs = token_inputs(&e, &cfg.simvec).unwrap();
        let tokens = tokenize(&inputs, &params.projections, &params.cls).unwrap();
        let (_, trace) = forward_tokens(tokens.clone(), &params, &cfg.model).unwrap();
        let g = backward(&trace, 1.0, &params).unwrap();
        for k in 0..tokens.tokens.data.len() {
            let mut plus = tokens.clone();
            plus.tokens.data[k] += H;
            let mut minus = tokens.clone();
            minus.tokens.data[k] -= H;
            let fp = forward_tokens(plus, &params, &cfg.model).unwrap().0;
            let fm = forward_tokens(minus, &params, &cfg.model).unwrap().0;
            worst = worst.max(rel_err(g.tokens.data[k], (fp - fm) / (2.0 * H)));
        }
    }
    assert!(worst < 1e-4, "{worst}");
}

#[test]
fn zero_cotangent_gives_zero_gradients() {
    let cfg = tiny_config(6, 5, Arch::Transformer, SimVecMode::Full, Aggregate::None);
    let params = init_params(&cfg, 1).unwrap();
    let e = random_set(&mut rng(1), 6, 5, 2);
    let (_, trace) = forward(&token_inputs(&e, &cfg.simvec).unwrap(), &params, &cfg.model).unwrap();
    let g = backward(&trace, 0.0, &params).unwrap();
    assert!(g.params.tensors().iter().all(|t| t.iter().all(|&x| x == 0.0)));
    assert!(g.tokens.data.iter().all(|&x| x == 0.0));
    let a = backward(&trace, 1.0, &params).unwrap();
    let b = backward(&trace, 1.0, &params).unwrap();
    assert_eq!(a, b);
}
