//! Dataset records, the embedding data model and its on-disk cache, stub
//! embeddings and dataset splitting.

mod cache;
mod dataset;
mod split;
mod stub;

pub use cache::{read_cache, write_cache, EmbeddingCache, CACHE_MAGIC, CACHE_VERSION};
pub use dataset::{load_dataset, load_jsonl, normalize_judgment, parse_dataset, write_jsonl, CaptionSample};
pub use split::split_dataset;
pub use stub::stub_embed;

use crate::error::{Error, Result};

/// Default width of the image/text joint embedding space.
pub const DEFAULT_D_CLIP: usize = 512;
/// Default width of the sentence-encoder embedding space.
pub const DEFAULT_D_TEXT: usize = 768;

/// Frozen-encoder outputs for one candidate caption scored against an image
/// and its references.
///
/// `*_clip` vectors live in the joint image/text space, `*_text` vectors in
/// the sentence-encoder space. Reference lists are parallel: `refs_clip[i]`
/// and `refs_text[i]` encode the same reference caption.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    pub image: Vec<f32>,
    pub cand_clip: Vec<f32>,
    pub refs_clip: Vec<Vec<f32>>,
    pub cand_text: Vec<f32>,
    pub refs_text: Vec<Vec<f32>>,
}

impl EmbeddingSet {
    pub fn n_refs(&self) -> usize {
        self.refs_clip.len()
    }

    pub fn d_clip(&self) -> usize {
        self.cand_clip.len()
    }

    pub fn d_text(&self) -> usize {
        self.cand_text.len()
    }

    /// Checks widths and reference counts. `N = 0` is rejected.
    pub fn validate(&self) -> Result<()> {
        let d_clip = self.d_clip();
        let d_text = self.d_text();
        if d_clip == 0 || d_text == 0 {
            return Err(Error::Shape("embedding width must be positive".into()));
        }
        if self.refs_clip.len() != self.refs_text.len() {
            return Err(Error::Shape(format!(
                "reference count mismatch: {} clip vs {} text",
                self.refs_clip.len(),
                self.refs_text.len()
            )));
        }
        if self.refs_clip.is_empty() {
            return Err(Error::Domain("embedding set has no references".into()));
        }
        if self.image.len() != d_clip || self.refs_clip.iter().any(|r| r.len() != d_clip) {
            return Err(Error::Shape(format!("clip-side vectors must all have width {d_clip}")));
        }
        if self.refs_text.iter().any(|r| r.len() != d_text) {
            return Err(Error::Shape(format!("text-side vectors must all have width {d_text}")));
        }
        Ok(())
    }

    /// A copy restricted to the given reference indices, in the given order.
    pub fn select_refs(&self, indices: &[usize]) -> Result<EmbeddingSet> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n_refs()) {
            return Err(Error::Validation(format!(
                "reference index {bad} out of range for {} references",
                self.n_refs()
            )));
        }
        Ok(EmbeddingSet {
            image: self.image.clone(),
            cand_clip: self.cand_clip.clone(),
            refs_clip: indices.iter().map(|&i| self.refs_clip[i].clone()).collect(),
            cand_text: self.cand_text.clone(),
            refs_text: indices.iter().map(|&i| self.refs_text[i].clone()).collect(),
        })
    }

    /// Keeps only the first `n` references.
    pub fn first_refs(&self, n: usize) -> Result<EmbeddingSet> {
        if n > self.n_refs() {
            return Err(Error::Validation(format!(
                "need {n} references, only {} available",
                self.n_refs()
            )));
        }
        self.select_refs(&(0..n).collect::<Vec<_>>())
    }

    /// L2-normalizes every vector in place. Zero vectors are left untouched.
    pub fn normalize(&mut self) {
        for vec in self.vectors_mut() {
            l2_normalize(vec);
        }
    }

    pub fn normalized(mut self) -> Self {
        self.normalize();
        self
    }

    fn vectors_mut(&mut self) -> impl Iterator<Item = &mut Vec<f32>> {
        std::iter::once(&mut self.image)
            .chain(std::iter::once(&mut self.cand_clip))
            .chain(self.refs_clip.iter_mut())
            .chain(std::iter::once(&mut self.cand_text))
            .chain(self.refs_text.iter_mut())
    }
}

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &std::path::Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Validation(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub(crate) fn l2_normalize(vec: &mut [f32]) {
    let norm = vec.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in vec.iter_mut() {
            *x = (f64::from(*x) / norm) as f32;
        }
    }
}

pub(crate) fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(&x, &y)| f64::from(x) * f64::from(y)).sum();
    let na: f64 = a.iter().map(|&x| f64::from(x).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|&x| f64::from(x).powi(2)).sum::<f64>().sqrt();
    dot / (na * nb)
}
