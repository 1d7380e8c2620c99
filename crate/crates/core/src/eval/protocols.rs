use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{EmbeddingCache, EmbeddingSet};
use crate::model::MetricScorer;
use crate::nn::Real;

/// Anything that maps one embedding set to a score.
pub trait Scorer {
    fn score(&self, e: &EmbeddingSet) -> Result<f64>;
}

impl<F> Scorer for F
where
    F: Fn(&EmbeddingSet) -> Result<f64>,
{
    fn score(&self, e: &EmbeddingSet) -> Result<f64> {
        self(e)
    }
}

impl<T: Real> Scorer for MetricScorer<T> {
    fn score(&self, e: &EmbeddingSet) -> Result<f64> {
        Ok(MetricScorer::score(self, e)?.to_f64())
    }
}

/// Scores `items` in order. With `threads > 1` the work is split into
/// contiguous chunks; results are identical to the sequential path.
pub fn score_all<S: Scorer + Sync>(scorer: &S, items: &[EmbeddingSet], threads: usize) -> Result<Vec<f64>> {
    if threads <= 1 || items.len() < 2 {
        return items.iter().map(|e| scorer.score(e)).collect();
    }
    let chunk = items.len().div_ceil(threads);
    let parts: Vec<Result<Vec<f64>>> = std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| s.spawn(move || c.iter().map(|e| scorer.score(e)).collect::<Result<Vec<_>>>()))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("scoring thread panicked"))
            .collect()
    });
    let mut out = Vec::with_capacity(items.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub id: String,
    pub correct_score: f64,
    pub foil_score: f64,
}

impl ScoredPair {
    /// Strictly higher for the correct caption; ties fail.
    pub fn passed(&self) -> bool {
        self.correct_score > self.foil_score
    }
}

/// Percentage of pairs whose correct caption scores strictly higher.
pub fn pairwise_accuracy(pairs: &[ScoredPair]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Domain("no pairs to evaluate".into()));
    }
    if pairs
        .iter()
        .any(|p| !p.correct_score.is_finite() || !p.foil_score.is_finite())
    {
        return Err(Error::Numeric {
            what: "in pair scores".into(),
        });
    }
    let hits = pairs.iter().filter(|p| p.passed()).count();
    Ok(100.0 * hits as f64 / pairs.len() as f64)
}

/// A correct caption and its one-word-hallucinated twin for the same image
/// and references.
#[derive(Debug, Clone, PartialEq)]
pub struct FoilPair {
    pub id: String,
    pub correct: EmbeddingSet,
    pub foil: EmbeddingSet,
}

/// One line of a FOIL pair file. Cache ids are `{id}/correct` and
/// `{id}/foil`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoilRecord {
    pub id: String,
    pub image_ref: String,
    pub correct: String,
    pub foil: String,
    pub references: Vec<String>,
}

impl FoilRecord {
    pub fn correct_key(&self) -> String {
        format!("{}/correct", self.id)
    }

    pub fn foil_key(&self) -> String {
        format!("{}/foil", self.id)
    }
}

pub fn foil_pairs_from(records: &[FoilRecord], cache: &EmbeddingCache) -> Result<Vec<FoilPair>> {
    records
        .iter()
        .map(|r| {
            Ok(FoilPair {
                id: r.id.clone(),
                correct: cache.require(&r.correct_key())?.clone(),
                foil: cache.require(&r.foil_key())?.clone(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoilOutcome {
    pub accuracy: f64,
    pub n_refs: usize,
    pub pairs: Vec<ScoredPair>,
}

/// Pairwise hallucination accuracy using the first `n_refs` references for
/// both members of every pair.
pub fn foil_accuracy<S: Scorer + ?Sized>(scorer: &S, pairs: &[FoilPair], n_refs: usize) -> Result<FoilOutcome> {
    if n_refs == 0 {
        return Err(Error::Validation("n_refs must be at least 1".into()));
    }
    let mut scored = Vec::with_capacity(pairs.len());
    for p in pairs {
        let have = p.correct.n_refs().min(p.foil.n_refs());
        if have < n_refs {
            return Err(Error::Validation(format!(
                "pair {:?} has {have} references, {n_refs} required",
                p.id
            )));
        }
        scored.push(ScoredPair {
            id: p.id.clone(),
            correct_score: scorer.score(&p.correct.first_refs(n_refs)?)?,
            foil_score: scorer.score(&p.foil.first_refs(n_refs)?)?,
        });
    }
    Ok(FoilOutcome {
        accuracy: pairwise_accuracy(&scored)?,
        n_refs,
        pairs: scored,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    HC,
    HI,
    HM,
    MM,
}

impl Category {
    pub const ALL: [Category; 4] = [Category::HC, Category::HI, Category::HM, Category::MM];
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Category::HC => "HC",
            Category::HI => "HI",
            Category::HM => "HM",
            Category::MM => "MM",
        };
        f.write_str(s)
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "HC" => Ok(Category::HC),
            "HI" => Ok(Category::HI),
            "HM" => Ok(Category::HM),
            "MM" => Ok(Category::MM),
            other => Err(Error::Validation(format!("unknown PASCAL-50S category {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Choice {
    A,
    B,
}

impl FromStr for Choice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(Choice::A),
            "B" | "b" => Ok(Choice::B),
            other => Err(Error::Validation(format!(
                "majority label must be A or B, got {other:?}"
            ))),
        }
    }
}

/// One line of a PASCAL-50S file. Cache ids are `{id}/a` and `{id}/b`; both
/// records carry the full reference list in the same order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PascalRecord {
    pub id: String,
    pub image_ref: String,
    pub caption_a: String,
    pub caption_b: String,
    pub references: Vec<String>,
    pub category: String,
    pub majority_label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pascal50sItem {
    pub id: String,
    pub category: Category,
    pub majority: Choice,
    pub a: EmbeddingSet,
    pub b: EmbeddingSet,
}

pub fn pascal_items_from(records: &[PascalRecord], cache: &EmbeddingCache) -> Result<Vec<Pascal50sItem>> {
    records
        .iter()
        .map(|r| {
            if r.references.is_empty() {
                return Err(Error::Validation(format!("item {:?} has no references", r.id)));
            }
            Ok(Pascal50sItem {
                id: r.id.clone(),
                category: r.category.parse()?,
                majority: r.majority_label.parse()?,
                a: cache.require(&format!("{}/a", r.id))?.clone(),
                b: cache.require(&format!("{}/b", r.id))?.clone(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PascalOutcome {
    pub per_category: BTreeMap<Category, f64>,
    pub counts: BTreeMap<Category, usize>,
    /// Unweighted mean over the categories present.
    pub mean: f64,
}

/// Majority-vote agreement on caption pairs. Each item draws
/// `refs_per_item` references without replacement from a single seeded
/// stream (consumed in item order); both captions see the same draw.
pub fn pascal50s_accuracy<S: Scorer + ?Sized>(
    scorer: &S,
    items: &[Pascal50sItem],
    refs_per_item: usize,
    seed: u64,
) -> Result<PascalOutcome> {
    if items.is_empty() {
        return Err(Error::Domain("no PASCAL-50S items".into()));
    }
    if refs_per_item == 0 {
        return Err(Error::Validation("refs_per_item must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits: BTreeMap<Category, usize> = BTreeMap::new();
    let mut counts: BTreeMap<Category, usize> = BTreeMap::new();
    for item in items {
        let available = item.a.n_refs();
        if item.b.n_refs() != available {
            return Err(Error::Validation(format!(
                "item {:?}: captions carry different reference counts",
                item.id
            )));
        }
        if refs_per_item > available {
            return Err(Error::Validation(format!(
                "item {:?} has {available} references, {refs_per_item} requested",
                item.id
            )));
        }
        let mut picked = index::sample(&mut rng, available, refs_per_item).into_vec();
        picked.sort_unstable();
        let sa = scorer.score(&item.a.select_refs(&picked)?)?;
        let sb = scorer.score(&item.b.select_refs(&picked)?)?;
        let predicted = if sa > sb {
            Some(Choice::A)
        } else if sb > sa {
            Some(Choice::B)
        } else {
            None
        };
        *counts.entry(item.category).or_default() += 1;
        let hit = hits.entry(item.category).or_default();
        if predicted == Some(item.majority) {
            *hit += 1;
        }
    }
    let per_category: BTreeMap<Category, f64> = counts
        .iter()
        .map(|(&c, &n)| (c, 100.0 * hits[&c] as f64 / n as f64))
        .collect();
    let mean = per_category.values().sum::<f64>() / per_category.len() as f64;
    Ok(PascalOutcome {
        per_category,
        counts,
        mean,
    })
}
