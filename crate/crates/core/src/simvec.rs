//! Similarity-vector features and token-sequence assembly.
//!
//! In the default layout the encoder never sees a raw embedding. It sees
//! elementwise products and absolute differences between the candidate and
//! the image and between the candidate and each reference:
//!
//! | group     | vectors                                   | width   |
//! |-----------|-------------------------------------------|---------|
//! | `h_clip`  | `cand ⊙ image`, `cand ⊙ ref_i` (i = 1..N)   | d_clip  |
//! | `dd_clip` | `|cand − image|`, `|cand − ref_i|`        | d_clip  |
//! | `h_text`  | `cand ⊙ ref_i`                            | d_text  |
//! | `dd_text` | `|cand − ref_i|`                          | d_text  |
//!
//! A learned CLS vector is prepended, giving `4N + 3` tokens. Each token is
//! mapped to the model width by an affine projection chosen by its source
//! width. No positional information is added, so the encoder output is
//! invariant to reference order.

use std::ops::{Mul, Sub};

use num_traits::Signed;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::EmbeddingSet;
use crate::nn::{Linear, Matrix, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimVecMode {
    /// Product/difference features for all references jointly.
    Full,
    /// The raw embeddings themselves, one token each (SVE ablation).
    RawFeatures,
    /// Full layout restricted to exactly one reference; the per-reference
    /// unit scored by the aggregate baselines.
    SingleRef,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimVecConfig {
    pub d_clip: usize,
    pub d_text: usize,
    pub d_model: usize,
    pub max_refs: usize,
    pub mode: SimVecMode,
}

impl SimVecConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_clip == 0 || self.d_text == 0 || self.d_model == 0 {
            return Err(Error::Config("feature widths must be positive".into()));
        }
        if self.max_refs == 0 {
            return Err(Error::Config("max_refs must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of tokens, CLS included, for `n_refs` references.
    pub fn token_count(&self, n_refs: usize) -> usize {
        match self.mode {
            SimVecMode::Full | SimVecMode::SingleRef => 4 * n_refs + 3,
            SimVecMode::RawFeatures => 2 * n_refs + 4,
        }
    }
}

/// Which embedding space a token came from; selects its projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Width {
    Clip,
    Text,
}

/// Origin of each token in the sequence. Index 0 of reference-bearing
/// variants is the first reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenSource {
    Cls,
    ClipProductImage,
    ClipProductRef(usize),
    ClipDiffImage,
    ClipDiffRef(usize),
    TextProductRef(usize),
    TextDiffRef(usize),
    RawCandClip,
    RawRefClip(usize),
    RawCandText,
    RawRefText(usize),
    RawImage,
}

impl TokenSource {
    pub fn reference(&self) -> Option<usize> {
        match *self {
            TokenSource::ClipProductRef(i)
            | TokenSource::ClipDiffRef(i)
            | TokenSource::TextProductRef(i)
            | TokenSource::TextDiffRef(i)
            | TokenSource::RawRefClip(i)
            | TokenSource::RawRefText(i) => Some(i),
            _ => None,
        }
    }
}

/// Output of the product/difference feature extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct SimVecFeatures {
    pub h_clip: Vec<Vec<f32>>,
    pub dd_clip: Vec<Vec<f32>>,
    pub h_text: Vec<Vec<f32>>,
    pub dd_text: Vec<Vec<f32>>,
}

/// Un-projected tokens (everything after CLS), in sequence order.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenInputs {
    pub items: Vec<TokenInput>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenInput {
    pub source: TokenSource,
    pub width: Width,
    pub values: Vec<f32>,
}

/// Projected token sequence, CLS at row 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SimVecTokens<T> {
    pub tokens: Matrix<T>,
    pub source_tags: Vec<TokenSource>,
}

impl<T> SimVecTokens<T> {
    pub fn len(&self) -> usize {
        self.source_tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source_tags.is_empty()
    }
}

/// The two source-width projections into the model width.
#[derive(Debug, Clone, PartialEq)]
pub struct Projections<T> {
    pub clip: Linear<T>,
    pub text: Linear<T>,
}

impl<T: Real> Projections<T> {
    pub fn for_width(&self, width: Width) -> &Linear<T> {
        match width {
            Width::Clip => &self.clip,
            Width::Text => &self.text,
        }
    }

    pub fn for_width_mut(&mut self, width: Width) -> &mut Linear<T> {
        match width {
            Width::Clip => &mut self.clip,
            Width::Text => &mut self.text,
        }
    }
}

pub fn hadamard<T: Copy + Mul<Output = T>>(a: &[T], b: &[T]) -> Result<Vec<T>> {
    check_len(a, b)?;
    Ok(a.iter().zip(b).map(|(&x, &y)| x * y).collect())
}

pub fn abs_diff<T: Copy + Sub<Output = T> + Signed>(a: &[T], b: &[T]) -> Result<Vec<T>> {
    check_len(a, b)?;
    Ok(a.iter().zip(b).map(|(&x, &y)| (x - y).abs()).collect())
}

fn check_len<T>(a: &[T], b: &[T]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "vector lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Builds the product/difference groups. Raw embeddings are not carried
/// into the output.
pub fn extract_sim_vec(e: &EmbeddingSet) -> Result<SimVecFeatures> {
    e.validate()?;
    let c = &e.cand_clip;
    let mut h_clip = Vec::with_capacity(e.n_refs() + 1);
    let mut dd_clip = Vec::with_capacity(e.n_refs() + 1);
    h_clip.push(hadamard(c, &e.image)?);
    dd_clip.push(abs_diff(c, &e.image)?);
    for r in &e.refs_clip {
        h_clip.push(hadamard(c, r)?);
        dd_clip.push(abs_diff(c, r)?);
    }
    let ct = &e.cand_text;
    let h_text = e
        .refs_text
        .iter()
        .map(|r| hadamard(ct, r))
        .collect::<Result<Vec<_>>>()?;
    let dd_text = e
        .refs_text
        .iter()
        .map(|r| abs_diff(ct, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(SimVecFeatures {
        h_clip,
        dd_clip,
        h_text,
        dd_text,
    })
}

impl SimVecFeatures {
    /// Flattens the groups in `(h_clip, dd_clip, h_text, dd_text)` order.
    pub fn into_inputs(self) -> TokenInputs {
        let mut items = Vec::new();
        let clip = |i: usize, img: TokenSource, r: fn(usize) -> TokenSource| if i == 0 { img } else { r(i - 1) };
        for (i, v) in self.h_clip.into_iter().enumerate() {
            items.push(TokenInput {
                source: clip(i, TokenSource::ClipProductImage, TokenSource::ClipProductRef),
                width: Width::Clip,
                values: v,
            });
        }
        for (i, v) in self.dd_clip.into_iter().enumerate() {
            items.push(TokenInput {
                source: clip(i, TokenSource::ClipDiffImage, TokenSource::ClipDiffRef),
                width: Width::Clip,
                values: v,
            });
        }
        for (i, v) in self.h_text.into_iter().enumerate() {
            items.push(TokenInput {
                source: TokenSource::TextProductRef(i),
                width: Width::Text,
                values: v,
            });
        }
        for (i, v) in self.dd_text.into_iter().enumerate() {
            items.push(TokenInput {
                source: TokenSource::TextDiffRef(i),
                width: Width::Text,
                values: v,
            });
        }
        TokenInputs { items }
    }
}

fn raw_inputs(e: &EmbeddingSet) -> TokenInputs {
    let mut items = vec![TokenInput {
        source: TokenSource::RawCandClip,
        width: Width::Clip,
        values: e.cand_clip.clone(),
    }];
    items.extend(e.refs_clip.iter().enumerate().map(|(i, r)| TokenInput {
        source: TokenSource::RawRefClip(i),
        width: Width::Clip,
        values: r.clone(),
    }));
    items.push(TokenInput {
        source: TokenSource::RawCandText,
        width: Width::Text,
        values: e.cand_text.clone(),
    });
    items.extend(e.refs_text.iter().enumerate().map(|(i, r)| TokenInput {
        source: TokenSource::RawRefText(i),
        width: Width::Text,
        values: r.clone(),
    }));
    items.push(TokenInput {
        source: TokenSource::RawImage,
        width: Width::Clip,
        values: e.image.clone(),
    });
    TokenInputs { items }
}

/// Builds the un-projected token list for `e` under `cfg`.
pub fn token_inputs(e: &EmbeddingSet, cfg: &SimVecConfig) -> Result<TokenInputs> {
    e.validate()?;
    if e.d_clip() != cfg.d_clip || e.d_text() != cfg.d_text {
        return Err(Error::Config(format!(
            "embedding widths ({}, {}) do not match configured ({}, {})",
            e.d_clip(),
            e.d_text(),
            cfg.d_clip,
            cfg.d_text
        )));
    }
    if e.n_refs() > cfg.max_refs {
        return Err(Error::Validation(format!(
            "{} references exceed max_refs = {}",
            e.n_refs(),
            cfg.max_refs
        )));
    }
    match cfg.mode {
        SimVecMode::Full => Ok(extract_sim_vec(e)?.into_inputs()),
        SimVecMode::SingleRef => {
            if e.n_refs() != 1 {
                return Err(Error::Validation(format!(
                    "single_ref layout takes exactly one reference, got {}",
                    e.n_refs()
                )));
            }
            Ok(extract_sim_vec(e)?.into_inputs())
        }
        SimVecMode::RawFeatures => Ok(raw_inputs(e)),
    }
}

/// Projects every input to the model width and prepends CLS.
pub fn tokenize<T: Real>(inputs: &TokenInputs, proj: &Projections<T>, cls: &[T]) -> Result<SimVecTokens<T>> {
    let d_model = cls.len();
    let mut tokens = Matrix::zeros(inputs.items.len() + 1, d_model);
    tokens.row_mut(0).copy_from_slice(cls);
    let mut tags = Vec::with_capacity(inputs.items.len() + 1);
    tags.push(TokenSource::Cls);
    for (row, item) in inputs.items.iter().enumerate() {
        let p = proj.for_width(item.width);
        if p.in_dim() != item.values.len() {
            return Err(Error::Config(format!(
                "no projection for width {} ({:?} projection takes {})",
                item.values.len(),
                item.width,
                p.in_dim()
            )));
        }
        if p.out_dim() != d_model {
            return Err(Error::Config(format!(
                "projection output {} differs from CLS width {d_model}",
                p.out_dim()
            )));
        }
        let x: Vec<T> = item.values.iter().map(|&v| T::from_f32(v)).collect();
        tokens.row_mut(row + 1).copy_from_slice(&p.apply_vec(&x));
        tags.push(item.source);
    }
    Ok(SimVecTokens {
        tokens,
        source_tags: tags,
    })
}
