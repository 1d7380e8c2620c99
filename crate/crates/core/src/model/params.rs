use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::MetricConfig;
use crate::error::{Error, Result};
use crate::nn::{LayerNorm, Linear, Matrix, Real};
use crate::simvec::Projections;

const CLS_INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLayer<T> {
    pub norm_attn: LayerNorm<T>,
    pub query: Linear<T>,
    pub key: Linear<T>,
    pub value: Linear<T>,
    pub attn_out: Linear<T>,
    pub norm_ffn: LayerNorm<T>,
    pub ffn_in: Linear<T>,
    pub ffn_out: Linear<T>,
}

/// Hidden affine+GELU stages followed by a scalar output map.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadMlp<T> {
    pub hidden: Vec<Linear<T>>,
    pub out: Linear<T>,
}

/// All trainable tensors. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub projections: Projections<T>,
    pub cls: Vec<T>,
    pub layers: Vec<EncoderLayer<T>>,
    pub head: HeadMlp<T>,
}

impl<T: Real> ModelParams<T> {
    /// All-zero tensors shaped for `cfg`.
    pub fn zeros(cfg: &MetricConfig) -> Self {
        let d = cfg.model.d_model;
        let f = cfg.model.ffn_hidden();
        let h = cfg.model.head_hidden;
        let layers = (0..cfg.model.encoder_layers())
            .map(|_| EncoderLayer {
                norm_attn: LayerNorm::zeros(d),
                query: Linear::zeros(d, d),
                key: Linear::zeros(d, d),
                value: Linear::zeros(d, d),
                attn_out: Linear::zeros(d, d),
                norm_ffn: LayerNorm::zeros(d),
                ffn_in: Linear::zeros(d, f),
                ffn_out: Linear::zeros(f, d),
            })
            .collect();
        let mut hidden = vec![Linear::zeros(d, h)];
        for _ in 1..cfg.model.head_hidden_layers() {
            hidden.push(Linear::zeros(h, h));
        }
        Self {
            projections: Projections {
                clip: Linear::zeros(cfg.simvec.d_clip, d),
                text: Linear::zeros(cfg.simvec.d_text, d),
            },
            cls: vec![T::zero(); d],
            layers,
            head: HeadMlp {
                hidden,
                out: Linear::zeros(h, 1),
            },
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(T::zero());
        }
        z
    }

    /// Every tensor in checkpoint order.
    pub fn tensors(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = Vec::new();
        push_linear(&mut out, &self.projections.clip);
        push_linear(&mut out, &self.projections.text);
        out.push(&self.cls);
        for l in &self.layers {
            out.push(&l.norm_attn.gamma);
            out.push(&l.norm_attn.beta);
            push_linear(&mut out, &l.query);
            push_linear(&mut out, &l.key);
            push_linear(&mut out, &l.value);
            push_linear(&mut out, &l.attn_out);
            out.push(&l.norm_ffn.gamma);
            out.push(&l.norm_ffn.beta);
            push_linear(&mut out, &l.ffn_in);
            push_linear(&mut out, &l.ffn_out);
        }
        for l in &self.head.hidden {
            push_linear(&mut out, l);
        }
        push_linear(&mut out, &self.head.out);
        out
    }

    /// Mutable view of [`tensors`](Self::tensors), same order.
    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::new();
        push_linear_mut(&mut out, &mut self.projections.clip);
        push_linear_mut(&mut out, &mut self.projections.text);
        out.push(&mut self.cls);
        for l in &mut self.layers {
            out.push(&mut l.norm_attn.gamma);
            out.push(&mut l.norm_attn.beta);
            push_linear_mut(&mut out, &mut l.query);
            push_linear_mut(&mut out, &mut l.key);
            push_linear_mut(&mut out, &mut l.value);
            push_linear_mut(&mut out, &mut l.attn_out);
            out.push(&mut l.norm_ffn.gamma);
            out.push(&mut l.norm_ffn.beta);
            push_linear_mut(&mut out, &mut l.ffn_in);
            push_linear_mut(&mut out, &mut l.ffn_out);
        }
        for l in &mut self.head.hidden {
            push_linear_mut(&mut out, l);
        }
        push_linear_mut(&mut out, &mut self.head.out);
        out
    }

    /// Human-readable tensor names, parallel to [`tensors`](Self::tensors).
    pub fn tensor_names(&self) -> Vec<String> {
        let mut names = vec![
            "proj.clip.weight".to_string(),
            "proj.clip.bias".into(),
            "proj.text.weight".into(),
            "proj.text.bias".into(),
            "cls".into(),
        ];
        for i in 0..self.layers.len() {
            for part in [
                "norm_attn.gamma",
                "norm_attn.beta",
                "query.weight",
                "query.bias",
                "key.weight",
                "key.bias",
                "value.weight",
                "value.bias",
                "attn_out.weight",
                "attn_out.bias",
                "norm_ffn.gamma",
                "norm_ffn.beta",
                "ffn_in.weight",
                "ffn_in.bias",
                "ffn_out.weight",
                "ffn_out.bias",
            ] {
                names.push(format!("layer{i}.{part}"));
            }
        }
        for i in 0..self.head.hidden.len() {
            names.push(format!("head.hidden{i}.weight"));
            names.push(format!("head.hidden{i}.bias"));
        }
        names.push("head.out.weight".into());
        names.push("head.out.bias".into());
        names
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Checks every tensor length against the shapes implied by `cfg`.
    pub fn check_shapes(&self, cfg: &MetricConfig) -> Result<()> {
        let want = ModelParams::<T>::zeros(cfg);
        let got = self.tensors();
        let exp = want.tensors();
        if got.len() != exp.len() {
            return Err(Error::Consistency(format!(
                "parameter set has {} tensors, config implies {}",
                got.len(),
                exp.len()
            )));
        }
        let names = want.tensor_names();
        for ((g, e), name) in got.iter().zip(&exp).zip(&names) {
            if g.len() != e.len() {
                return Err(Error::Consistency(format!(
                    "tensor {name} has {} values, config implies {}",
                    g.len(),
                    e.len()
                )));
            }
        }
        if self.projections.clip.in_dim() != cfg.simvec.d_clip || self.projections.text.in_dim() != cfg.simvec.d_text {
            return Err(Error::Consistency("projection input widths differ from config".into()));
        }
        Ok(())
    }

    /// `self += scale · other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &ModelParams<T>, scale: T) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }

    /// Element type conversion (e.g. `f64` training copy to `f32` inference).
    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        let lin = |l: &Linear<T>| Linear {
            weight: Matrix {
                rows: l.weight.rows,
                cols: l.weight.cols,
                data: l.weight.data.iter().map(|&x| U::lit(x.to_f64())).collect(),
            },
            bias: l.bias.iter().map(|&x| U::lit(x.to_f64())).collect(),
        };
        let vec = |v: &[T]| v.iter().map(|&x| U::lit(x.to_f64())).collect::<Vec<U>>();
        let ln = |n: &LayerNorm<T>| LayerNorm {
            gamma: vec(&n.gamma),
            beta: vec(&n.beta),
        };
        ModelParams {
            projections: Projections {
                clip: lin(&self.projections.clip),
                text: lin(&self.projections.text),
            },
            cls: vec(&self.cls),
            layers: self
                .layers
                .iter()
                .map(|l| EncoderLayer {
                    norm_attn: ln(&l.norm_attn),
                    query: lin(&l.query),
                    key: lin(&l.key),
                    value: lin(&l.value),
                    attn_out: lin(&l.attn_out),
                    norm_ffn: ln(&l.norm_ffn),
                    ffn_in: lin(&l.ffn_in),
                    ffn_out: lin(&l.ffn_out),
                })
                .collect(),
            head: HeadMlp {
                hidden: self.head.hidden.iter().map(lin).collect(),
                out: lin(&self.head.out),
            },
        }
    }
}

fn push_linear<'a, T>(out: &mut Vec<&'a [T]>, l: &'a Linear<T>) {
    out.push(&l.weight.data);
    out.push(&l.bias);
}

fn push_linear_mut<'a, T>(out: &mut Vec<&'a mut [T]>, l: &'a mut Linear<T>) {
    out.push(&mut l.weight.data);
    out.push(&mut l.bias);
}

/// Seeded initialization: affine weights `N(0, 1/fan_in)`, zero biases,
/// unit layer-norm scales, CLS `N(0, 0.02²)`.
pub fn init_params(cfg: &MetricConfig, seed: u64) -> Result<ModelParams<f64>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = cfg.model.d_model;
    let f = cfg.model.ffn_hidden();
    let h = cfg.model.head_hidden;
    let projections = Projections {
        clip: Linear::init(cfg.simvec.d_clip, d, &mut rng),
        text: Linear::init(cfg.simvec.d_text, d, &mut rng),
    };
    let cls_dist = Normal::new(0.0, CLS_INIT_STD).expect("valid normal");
    let cls = (0..d).map(|_| cls_dist.sample(&mut rng)).collect();
    let layers = (0..cfg.model.encoder_layers())
        .map(|_| EncoderLayer {
            norm_attn: LayerNorm::new(d),
            query: Linear::init(d, d, &mut rng),
            key: Linear::init(d, d, &mut rng),
            value: Linear::init(d, d, &mut rng),
            attn_out: Linear::init(d, d, &mut rng),
            norm_ffn: LayerNorm::new(d),
            ffn_in: Linear::init(d, f, &mut rng),
            ffn_out: Linear::init(f, d, &mut rng),
        })
        .collect();
    let mut hidden = vec![Linear::init(d, h, &mut rng)];
    for _ in 1..cfg.model.head_hidden_layers() {
        hidden.push(Linear::init(h, h, &mut rng));
    }
    let out = Linear::init(h, 1, &mut rng);
    Ok(ModelParams {
        projections,
        cls,
        layers,
        head: HeadMlp { hidden, out },
    })
}
