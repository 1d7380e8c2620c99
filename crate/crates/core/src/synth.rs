//! Synthetic evaluation suites built from stub embeddings.
//!
//! Every caption is a blend of its image's embedding and a caption-specific
//! noise direction. A blend weight `q` ("quality") near 1 gives a caption
//! that matches its image; near 0 gives an unrelated one. The same `q`
//! applies in both embedding spaces, where the text-side anchor is a
//! separate per-image stub. References are high-quality blends of the same
//! anchors.
//!
//! Human judgments follow a fixed latent rule,
//!
//! ```text
//! human_score = sigmoid(8 · (cos(cand_clip, image) − 0.5))
//! ```
//!
//! so they increase monotonically with candidate–image alignment and
//! weakly aligned ("corrupted") candidates score low. A FOIL pair keeps the
//! caption's noise direction and lowers `q` by at least 0.25, which models
//! a one-word hallucination. The generator verifies that the latent rule
//! ranks every correct caption above its foil.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::eval::{Category, FoilRecord, PascalRecord};
use crate::io::{cosine, l2_normalize, stub_embed, CaptionSample, EmbeddingCache, EmbeddingSet};
use crate::nn::sigmoid;

pub const LATENT_SLOPE: f64 = 8.0;
pub const LATENT_CENTER: f64 = 0.5;
/// Blend weight of the image anchor inside a reference caption.
const REFERENCE_QUALITY: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub count: usize,
    pub foil_pairs: usize,
    pub pascal_items: usize,
    pub max_refs: usize,
    pub pascal_refs: usize,
    pub d_clip: usize,
    pub d_text: usize,
    pub seed: u64,
}

impl SynthConfig {
    /// `count` scored samples plus `count / 4` FOIL pairs and PASCAL items.
    pub fn new(count: usize, seed: u64) -> Self {
        Self {
            count,
            foil_pairs: (count / 4).max(1),
            pascal_items: (count / 4).max(4),
            max_refs: 4,
            pascal_refs: 8,
            d_clip: crate::io::DEFAULT_D_CLIP,
            d_text: crate::io::DEFAULT_D_TEXT,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSuite {
    pub samples: Vec<CaptionSample>,
    pub foil: Vec<FoilRecord>,
    pub pascal: Vec<PascalRecord>,
    pub cache: EmbeddingCache,
}

/// The latent judgment rule applied to an embedding set.
pub fn latent_score(e: &EmbeddingSet) -> f64 {
    sigmoid(LATENT_SLOPE * (cosine(&e.cand_clip, &e.image) - LATENT_CENTER))
}

struct Anchors {
    image: Vec<f32>,
    text: Vec<f32>,
    refs_clip: Vec<Vec<f32>>,
    refs_text: Vec<Vec<f32>>,
}

struct Gen {
    cfg: SynthConfig,
}

impl Gen {
    fn stub(&self, key: &str, dim: usize) -> Result<Vec<f32>> {
        stub_embed(key, dim, self.cfg.seed)
    }

    fn blend(anchor: &[f32], noise: &[f32], q: f64) -> Vec<f32> {
        let r = (1.0 - q * q).max(0.0).sqrt();
        let mut v: Vec<f32> = anchor
            .iter()
            .zip(noise)
            .map(|(&a, &n)| (q * f64::from(a) + r * f64::from(n)) as f32)
            .collect();
        l2_normalize(&mut v);
        v
    }

    fn anchors(&self, key: &str, n_refs: usize) -> Result<Anchors> {
        let image = self.stub(&format!("{key}/image"), self.cfg.d_clip)?;
        let text = self.stub(&format!("{key}/scene"), self.cfg.d_text)?;
        let mut refs_clip = Vec::with_capacity(n_refs);
        let mut refs_text = Vec::with_capacity(n_refs);
        for j in 0..n_refs {
            let nc = self.stub(&format!("{key}/ref{j}/clip"), self.cfg.d_clip)?;
            let nt = self.stub(&format!("{key}/ref{j}/text"), self.cfg.d_text)?;
            refs_clip.push(Self::blend(&image, &nc, REFERENCE_QUALITY));
            refs_text.push(Self::blend(&text, &nt, REFERENCE_QUALITY));
        }
        Ok(Anchors {
            image,
            text,
            refs_clip,
            refs_text,
        })
    }

    /// A candidate of quality `q` whose noise directions are keyed by `cand_key`.
    fn candidate(&self, a: &Anchors, cand_key: &str, q: f64) -> Result<EmbeddingSet> {
        let nc = self.stub(&format!("{cand_key}/clip"), self.cfg.d_clip)?;
        let nt = self.stub(&format!("{cand_key}/text"), self.cfg.d_text)?;
        Ok(EmbeddingSet {
            image: a.image.clone(),
            cand_clip: Self::blend(&a.image, &nc, q),
            refs_clip: a.refs_clip.clone(),
            cand_text: Self::blend(&a.text, &nt, q),
            refs_text: a.refs_text.clone(),
        })
    }
}

fn reference_texts(key: &str, n: usize) -> Vec<String> {
    (0..n).map(|j| format!("reference {j} for {key}")).collect()
}

/// Generates the full suite deterministically from `cfg.seed`.
pub fn generate(cfg: SynthConfig) -> Result<SynthSuite> {
    if cfg.count == 0 {
        return Err(Error::Domain("synthetic sample count must be at least 1".into()));
    }
    if cfg.max_refs == 0 || cfg.pascal_refs == 0 {
        return Err(Error::Domain("reference counts must be at least 1".into()));
    }
    let g = Gen { cfg };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut cache = EmbeddingCache::new(cfg.d_clip, cfg.d_text);

    let mut samples = Vec::with_capacity(cfg.count);
    for i in 0..cfg.count {
        let key = format!("s{i}");
        let n_refs = rng.random_range(1..=cfg.max_refs);
        let q = rng.random_range(0.05..0.95);
        let anchors = g.anchors(&key, n_refs)?;
        let set = g.candidate(&anchors, &format!("{key}/cand"), q)?;
        samples.push(CaptionSample {
            id: key.clone(),
            image_ref: format!("{key}/image"),
            candidate: format!("candidate caption for {key} (q={q:.3})"),
            references: reference_texts(&key, n_refs),
            human_score: Some(latent_score(&set)),
        });
        cache.insert(key, set)?;
    }

    let mut foil = Vec::with_capacity(cfg.foil_pairs);
    for k in 0..cfg.foil_pairs {
        let key = format!("f{k}");
        let anchors = g.anchors(&key, cfg.max_refs)?;
        let q_correct = rng.random_range(0.55..0.95);
        let q_foil = q_correct - rng.random_range(0.25..0.45);
        let correct = g.candidate(&anchors, &format!("{key}/cand"), q_correct)?;
        let foiled = g.candidate(&anchors, &format!("{key}/cand"), q_foil)?;
        if latent_score(&correct) <= latent_score(&foiled) {
            return Err(Error::Consistency(format!(
                "latent rule does not prefer the correct caption of pair {key}"
            )));
        }
        let record = FoilRecord {
            id: key.clone(),
            image_ref: format!("{key}/image"),
            correct: format!("correct caption for {key}"),
            foil: format!("foiled caption for {key}"),
            references: reference_texts(&key, cfg.max_refs),
        };
        cache.insert(record.correct_key(), correct)?;
        cache.insert(record.foil_key(), foiled)?;
        foil.push(record);
    }

    let mut pascal = Vec::with_capacity(cfg.pascal_items);
    for k in 0..cfg.pascal_items {
        let key = format!("p{k}");
        let category = Category::ALL[k % 4];
        // quality ranges per side loosely mirror the category semantics
        let (ra, rb) = match category {
            Category::HC => ((0.7, 0.95), (0.7, 0.95)),
            Category::HI => ((0.7, 0.95), (0.05, 0.45)),
            Category::HM => ((0.6, 0.95), (0.3, 0.8)),
            Category::MM => ((0.3, 0.8), (0.3, 0.8)),
        };
        let (mut qa, mut qb) = (rng.random_range(ra.0..ra.1), rng.random_range(rb.0..rb.1));
        if rng.random_bool(0.5) {
            std::mem::swap(&mut qa, &mut qb);
        }
        let anchors = g.anchors(&key, cfg.pascal_refs)?;
        let a = g.candidate(&anchors, &format!("{key}/a"), qa)?;
        let b = g.candidate(&anchors, &format!("{key}/b"), qb)?;
        let majority = if latent_score(&a) >= latent_score(&b) { "A" } else { "B" };
        cache.insert(format!("{key}/a"), a)?;
        cache.insert(format!("{key}/b"), b)?;
        pascal.push(PascalRecord {
            id: key.clone(),
            image_ref: format!("{key}/image"),
            caption_a: format!("caption A for {key}"),
            caption_b: format!("caption B for {key}"),
            references: reference_texts(&key, cfg.pascal_refs),
            category: category.to_string(),
            majority_label: majority.into(),
        });
    }

    Ok(SynthSuite {
        samples,
        foil,
        pascal,
        cache,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            d_clip: 32,
            d_text: 48,
            ..SynthConfig::new(40, 5)
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(generate(small()).unwrap(), generate(small()).unwrap());
    }

    #[test]
    fn scores_in_unit_interval_and_records_cached() {
        let s = generate(small()).unwrap();
        assert_eq!(s.samples.len(), 40);
        for sample in &s.samples {
            let y = sample.human_score.unwrap();
            assert!((0.0..=1.0).contains(&y));
            let e = s.cache.require(&sample.id).unwrap();
            assert_eq!(e.n_refs(), sample.references.len());
            assert_eq!(latent_score(e), y);
        }
    }

    #[test]
    fn latent_rule_prefers_every_correct_caption() {
        let s = generate(small()).unwrap();
        for r in &s.foil {
            let c = latent_score(s.cache.require(&r.correct_key()).unwrap());
            let f = latent_score(s.cache.require(&r.foil_key()).unwrap());
            assert!(c > f);
        }
    }

    #[test]
    fn latent_rule_is_monotone_in_quality() {
        // brute-force check that the judgment tracks the blend weight
        let g = Gen { cfg: small() };
        let a = g.anchors("mono", 1).unwrap();
        let mut last = -1.0;
        for step in 1..19 {
            let q = step as f64 * 0.05;
            let y = latent_score(&g.candidate(&a, "mono/cand", q).unwrap());
            assert!(y > last, "q={q}");
            last = y;
        }
    }
}
