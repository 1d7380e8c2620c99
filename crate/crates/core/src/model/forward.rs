use super::config::{Arch, ModelConfig};
use super::params::{EncoderLayer, HeadMlp, ModelParams};
use crate::error::{Error, Result};
use crate::nn::{gelu, sigmoid, softmax_in_place, Matrix, NormCache, Real};
use crate::simvec::{tokenize, SimVecTokens, TokenInputs};

/// Activations saved by one encoder layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTrace<T> {
    pub input: Matrix<T>,
    pub norm_attn: NormCache<T>,
    pub normed_attn: Matrix<T>,
    pub q: Matrix<T>,
    pub k: Matrix<T>,
    pub v: Matrix<T>,
    /// Attention probabilities, one `S × S` matrix per head.
    pub probs: Vec<Matrix<T>>,
    pub context: Matrix<T>,
    pub after_attn: Matrix<T>,
    pub norm_ffn: NormCache<T>,
    pub normed_ffn: Matrix<T>,
    pub ffn_pre: Matrix<T>,
    pub ffn_act: Matrix<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadTrace<T> {
    pub input: Vec<T>,
    pub pre: Vec<Vec<T>>,
    pub act: Vec<Vec<T>>,
    pub logit: T,
}

/// Everything backward needs, plus the inputs so the pass can be replayed.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace<T> {
    pub inputs: TokenInputs,
    pub tokens: SimVecTokens<T>,
    pub layers: Vec<LayerTrace<T>>,
    pub encoded: Matrix<T>,
    pub head: HeadTrace<T>,
    pub score: T,
    pub(crate) arch: Arch,
    pub(crate) n_heads: usize,
}

impl<T: Real> ForwardTrace<T> {
    /// Re-runs the forward pass from the stored inputs.
    pub fn replay(&self, params: &ModelParams<T>, cfg: &ModelConfig) -> Result<T> {
        Ok(forward(&self.inputs, params, cfg)?.0)
    }
}

/// Projects `inputs`, runs the encoder (or mean-pool for the MLP ablation)
/// and the head. Returns the sigmoid score and the trace.
pub fn forward<T: Real>(
    inputs: &TokenInputs,
    params: &ModelParams<T>,
    cfg: &ModelConfig,
) -> Result<(T, ForwardTrace<T>)> {
    let tokens = tokenize(inputs, &params.projections, &params.cls)?;
    let (score, mut trace) = forward_tokens(tokens, params, cfg)?;
    trace.inputs = inputs.clone();
    Ok((score, trace))
}

/// Forward pass over already-projected tokens. The returned trace has empty
/// `inputs`, so backward yields no projection gradients for it.
pub fn forward_tokens<T: Real>(
    tokens: SimVecTokens<T>,
    params: &ModelParams<T>,
    cfg: &ModelConfig,
) -> Result<(T, ForwardTrace<T>)> {
    let d = cfg.d_model;
    if tokens.tokens.cols != d || params.cls.len() != d {
        return Err(Error::Shape(format!(
            "token width {} does not match d_model {d}",
            tokens.tokens.cols
        )));
    }
    if tokens.len() < 2 || tokens.tokens.rows != tokens.len() {
        return Err(Error::Shape(format!("need at least 2 tokens, got {}", tokens.len())));
    }
    if params.layers.len() != cfg.encoder_layers() || params.head.hidden.len() != cfg.head_hidden_layers() {
        return Err(Error::Consistency("parameters do not match model config".into()));
    }
    if !tokens.tokens.all_finite() {
        return Err(Error::Numeric {
            what: "in input tokens".into(),
        });
    }

    let mut layers = Vec::with_capacity(params.layers.len());
    let (encoded, head_input) = match cfg.arch {
        Arch::Transformer => {
            let mut x = tokens.tokens.clone();
            for (idx, layer) in params.layers.iter().enumerate() {
                let (out, trace) = encoder_layer(x, layer, cfg.n_heads);
                if !out.all_finite() {
                    return Err(Error::Numeric {
                        what: format!("activation in encoder layer {idx}"),
                    });
                }
                layers.push(trace);
                x = out;
            }
            let cls = x.row(0).to_vec();
            (x, cls)
        }
        Arch::MlpAblation => {
            let x = &tokens.tokens;
            let n = T::lit((x.rows - 1) as f64);
            let mut pooled = vec![T::zero(); d];
            for t in 1..x.rows {
                for (p, &v) in pooled.iter_mut().zip(x.row(t)) {
                    *p += v;
                }
            }
            for p in &mut pooled {
                *p = *p / n;
            }
            (x.clone(), pooled)
        }
    };

    let head = head_forward(&params.head, head_input);
    if !head.logit.is_finite() {
        return Err(Error::Numeric {
            what: "in head output".into(),
        });
    }
    let score = sigmoid(head.logit);
    Ok((
        score,
        ForwardTrace {
            inputs: TokenInputs { items: Vec::new() },
            tokens,
            layers,
            encoded,
            head,
            score,
            arch: cfg.arch,
            n_heads: cfg.n_heads,
        },
    ))
}

fn encoder_layer<T: Real>(x: Matrix<T>, p: &EncoderLayer<T>, n_heads: usize) -> (Matrix<T>, LayerTrace<T>) {
    let s = x.rows;
    let d = x.cols;
    let dh = d / n_heads;
    let scale = T::one() / T::lit(dh as f64).sqrt();

    let (normed_attn, norm_attn) = p.norm_attn.forward(&x);
    let q = p.query.apply(&normed_attn);
    let k = p.key.apply(&normed_attn);
    let v = p.value.apply(&normed_attn);

    let mut context = Matrix::zeros(s, d);
    let mut probs = Vec::with_capacity(n_heads);
    for h in 0..n_heads {
        let cols = h * dh..(h + 1) * dh;
        let mut pm = Matrix::zeros(s, s);
        for i in 0..s {
            let qi = &q.row(i)[cols.clone()];
            let row = pm.row_mut(i);
            for (j, r) in row.iter_mut().enumerate() {
                let kj = &k.row(j)[cols.clone()];
                *r = qi.iter().zip(kj).map(|(&a, &b)| a * b).sum::<T>() * scale;
            }
            softmax_in_place(row);
        }
        for i in 0..s {
            let mut acc = vec![T::zero(); dh];
            for j in 0..s {
                let pij = pm.at(i, j);
                for (a, &vv) in acc.iter_mut().zip(&v.row(j)[cols.clone()]) {
                    *a += pij * vv;
                }
            }
            context.row_mut(i)[cols.clone()].copy_from_slice(&acc);
        }
        probs.push(pm);
    }
    let attn = p.attn_out.apply(&context);
    let after_attn = x.add(&attn);

    let (normed_ffn, norm_ffn) = p.norm_ffn.forward(&after_attn);
    let ffn_pre = p.ffn_in.apply(&normed_ffn);
    let ffn_act = Matrix {
        rows: ffn_pre.rows,
        cols: ffn_pre.cols,
        data: ffn_pre.data.iter().map(|&u| gelu(u)).collect(),
    };
    let ffn = p.ffn_out.apply(&ffn_act);
    let out = after_attn.add(&ffn);

    (
        out,
        LayerTrace {
            input: x,
            norm_attn,
            normed_attn,
            q,
            k,
            v,
            probs,
            context,
            after_attn,
            norm_ffn,
            normed_ffn,
            ffn_pre,
            ffn_act,
        },
    )
}

fn head_forward<T: Real>(head: &HeadMlp<T>, input: Vec<T>) -> HeadTrace<T> {
    let mut pre = Vec::with_capacity(head.hidden.len());
    let mut act = Vec::with_capacity(head.hidden.len());
    let mut x = input.clone();
    for l in &head.hidden {
        let z = l.apply_vec(&x);
        let a: Vec<T> = z.iter().map(|&u| gelu(u)).collect();
        pre.push(z);
        act.push(a.clone());
        x = a;
    }
    let logit = head.out.apply_vec(&x)[0];
    HeadTrace { input, pre, act, logit }
}
