#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simvec_metric::io::EmbeddingSet;
use simvec_metric::model::{
    backward_sample, forward_sample, init_params, Aggregate, Arch, MetricConfig, ModelConfig, ModelParams,
};
use simvec_metric::simvec::{SimVecConfig, SimVecMode};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec<R: Rng>(rng: &mut R, d: usize) -> Vec<f32> {
    (0..d).map(|_| rng.random_range(-1.0f32..1.0)).collect()
}

pub fn random_set<R: Rng>(rng: &mut R, d_clip: usize, d_text: usize, n: usize) -> EmbeddingSet {
    EmbeddingSet {
        image: random_vec(rng, d_clip),
        cand_clip: random_vec(rng, d_clip),
        refs_clip: (0..n).map(|_| random_vec(rng, d_clip)).collect(),
        cand_text: random_vec(rng, d_text),
        refs_text: (0..n).map(|_| random_vec(rng, d_text)).collect(),
    }
}

/// The small model used for gradient checks: d_model 8, one layer, two heads.
pub fn tiny_config(d_clip: usize, d_text: usize, arch: Arch, mode: SimVecMode, aggregate: Aggregate) -> MetricConfig {
    MetricConfig {
        simvec: SimVecConfig {
            d_clip,
            d_text,
            d_model: 8,
            max_refs: 8,
            mode,
        },
        model: ModelConfig {
            d_model: 8,
            n_layers: 1,
            n_heads: 2,
            ffn_mult: 4,
            head_hidden: 8,
            arch,
            aggregate,
        },
    }
}

/// Draws `n` values from `levels` distinct integers, so ties are frequent
/// when `levels` is small.
pub fn tied_values<R: Rng>(rng: &mut R, n: usize, levels: u32) -> Vec<f64> {
    (0..n).map(|_| f64::from(rng.random_range(0..levels))).collect()
}

/// All-pairs Kendall counts: (n, C, D, ties in x only, ties in y only).
pub fn brute_pairs(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64, f64) {
    let (mut c, mut d, mut tx, mut ty) = (0u64, 0u64, 0u64, 0u64);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 && dy == 0.0 {
                continue;
            } else if dx == 0.0 {
                tx += 1;
            } else if dy == 0.0 {
                ty += 1;
            } else if (dx > 0.0) == (dy > 0.0) {
                c += 1;
            } else {
                d += 1;
            }
        }
    }
    (x.len() as f64, c as f64, d as f64, tx as f64, ty as f64)
}

fn distinct(v: &[f64]) -> usize {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s.dedup_by(|a, b| a == b);
    s.len()
}

/// O(n²) tau-b with the library's formula order.
pub fn brute_tau_b(x: &[f64], y: &[f64]) -> Option<f64> {
    let (_, c, d, tx, ty) = brute_pairs(x, y);
    let denom = ((c + d + tx) * (c + d + ty)).sqrt();
    (denom != 0.0).then(|| (c - d) / denom)
}

/// O(n²) tau-c with m = min(distinct x, distinct y).
pub fn brute_tau_c(x: &[f64], y: &[f64]) -> Option<f64> {
    let (n, c, d, _, _) = brute_pairs(x, y);
    let m = distinct(x).min(distinct(y));
    if m < 2 {
        return None;
    }
    let m = m as f64;
    Some(2.0 * m * (c - d) / (n * n * (m - 1.0)))
}

/// Element-by-element product/difference groups, written independently of
/// the library: (h_clip, dd_clip, h_text, dd_text).
pub type Groups = (Vec<Vec<f32>>, Vec<Vec<f32>>, Vec<Vec<f32>>, Vec<Vec<f32>>);

pub fn brute_sim_vec(e: &EmbeddingSet) -> Groups {
    let mut clip_targets = vec![&e.image];
    clip_targets.extend(e.refs_clip.iter());
    let (mut h_clip, mut dd_clip, mut h_text, mut dd_text) = (vec![], vec![], vec![], vec![]);
    for t in &clip_targets {
        let mut h = vec![0.0f32; e.cand_clip.len()];
        let mut dd = vec![0.0f32; e.cand_clip.len()];
        for k in 0..e.cand_clip.len() {
            h[k] = e.cand_clip[k] * t[k];
            dd[k] = if e.cand_clip[k] >= t[k] {
                e.cand_clip[k] - t[k]
            } else {
                t[k] - e.cand_clip[k]
            };
        }
        h_clip.push(h);
        dd_clip.push(dd);
    }
    for r in &e.refs_text {
        let mut h = vec![0.0f32; r.len()];
        let mut dd = vec![0.0f32; r.len()];
        for k in 0..r.len() {
            h[k] = e.cand_text[k] * r[k];
            dd[k] = if e.cand_text[k] >= r[k] {
                e.cand_text[k] - r[k]
            } else {
                r[k] - e.cand_text[k]
            };
        }
        h_text.push(h);
        dd_text.push(dd);
    }
    (h_clip, dd_clip, h_text, dd_text)
}

/// Same references in a different order, clip and text sides kept paired.
pub fn permute_refs(e: &EmbeddingSet, order: &[usize]) -> EmbeddingSet {
    EmbeddingSet {
        image: e.image.clone(),
        cand_clip: e.cand_clip.clone(),
        refs_clip: order.iter().map(|&i| e.refs_clip[i].clone()).collect(),
        cand_text: e.cand_text.clone(),
        refs_text: order.iter().map(|&i| e.refs_text[i].clone()).collect(),
    }
}

/// Central-difference step for gradient checks.
pub const FD_STEP: f64 = 1e-5;

/// Relative error with a 1e-6 denominator floor. Central differences at
/// h = 1e-5 carry ~1e-11 of rounding noise, so gradients that are exactly
/// zero (e.g. key biases, which softmax cancels) stay well-defined.
pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

fn perturbed(p: &ModelParams<f64>, tensor: usize, idx: usize, delta: f64) -> ModelParams<f64> {
    let mut q = p.clone();
    q.tensors_mut()[tensor][idx] += delta;
    q
}

/// Largest relative error between backward and central differences over
/// every parameter, for `d_model = 8`, one layer, two heads.
pub fn worst_param_error(
    arch: Arch,
    mode: SimVecMode,
    aggregate: Aggregate,
    n_refs: usize,
    seeds: std::ops::Range<u64>,
) -> (f64, String) {
    let cfg = tiny_config(6, 5, arch, mode, aggregate);
    let mut worst = (0.0, String::new());
    for seed in seeds {
        let mut r = rng(seed);
        let e = random_set(&mut r, 6, 5, n_refs);
        let mut params = init_params(&cfg, seed).unwrap();
        // non-trivial norm parameters so their gradients are exercised
        for l in &mut params.layers {
            for (i, g) in l.norm_attn.gamma.iter_mut().enumerate() {
                *g = 1.0 + 0.1 * i as f64;
            }
            for (i, b) in l.norm_ffn.beta.iter_mut().enumerate() {
                *b = 0.05 * i as f64;
            }
        }
        let (_, trace) = forward_sample(&e, &params, &cfg).unwrap();
        let mut grads = params.zeros_like();
        backward_sample(&trace, 1.0, &params, &mut grads).unwrap();
        let names = params.tensor_names();
        let analytic = grads.tensors();
        for (t, (name, grad)) in names.iter().zip(&analytic).enumerate() {
            for (i, &g) in grad.iter().enumerate() {
                let plus = forward_sample(&e, &perturbed(&params, t, i, FD_STEP), &cfg).unwrap().0;
                let minus = forward_sample(&e, &perturbed(&params, t, i, -FD_STEP), &cfg).unwrap().0;
                let numeric = (plus - minus) / (2.0 * FD_STEP);
                let err = rel_err(g, numeric);
                if err > worst.0 {
                    worst = (
                        err,
                        format!("{name}[{i}] seed {seed}: analytic {g:.3e} numeric {numeric:.3e}"),
                    );
                }
            }
        }
    }
    worst
}
