//! Kendall rank correlation with tie handling, via Knight's O(n log n)
//! sort-and-count.

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Pair classification over all `n(n−1)/2` pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PairCounts {
    pub n: u64,
    pub concordant: u64,
    pub discordant: u64,
    /// Tied in x, not in y.
    pub ties_x_only: u64,
    /// Tied in y, not in x.
    pub ties_y_only: u64,
    pub ties_both: u64,
    pub distinct_x: u64,
    pub distinct_y: u64,
}

fn cmp(a: f64, b: f64) -> Ordering {
    a.partial_cmp(&b).expect("NaN rejected up front")
}

fn tied_pairs(run: u64) -> u64 {
    run * run.saturating_sub(1) / 2
}

/// Sum of `t(t−1)/2` over runs of equal keys in an already sorted sequence,
/// plus the number of runs.
fn runs<F: Fn(usize, usize) -> bool>(len: usize, same: F) -> (u64, u64) {
    let mut pairs = 0;
    let mut groups = 0;
    let mut start = 0;
    for i in 1..=len {
        if i == len || !same(i - 1, i) {
            pairs += tied_pairs((i - start) as u64);
            groups += 1;
            start = i;
        }
    }
    (pairs, groups)
}

/// Merge sort that returns the number of strict inversions.
fn sort_count_inversions(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = sort_count_inversions(&mut v[..mid], &mut buf[..mid]);
    swaps += sort_count_inversions(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if cmp(v[j], v[i]) == Ordering::Less {
            swaps += (mid - i) as u64;
            buf[k] = v[j];
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

pub fn pair_counts(x: &[f64], y: &[f64]) -> Result<PairCounts> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::Domain("Kendall tau needs at least two observations".into()));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::Domain("Kendall tau input contains NaN".into()));
    }
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| cmp(x[a], x[b]).then(cmp(y[a], y[b])));

    let (ties_x, distinct_x) = runs(n, |a, b| cmp(x[order[a]], x[order[b]]) == Ordering::Equal);
    let (ties_xy, _) = runs(n, |a, b| {
        cmp(x[order[a]], x[order[b]]) == Ordering::Equal && cmp(y[order[a]], y[order[b]]) == Ordering::Equal
    });

    let mut ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let mut buf = vec![0.0; n];
    let discordant = sort_count_inversions(&mut ys, &mut buf);
    let (ties_y, distinct_y) = runs(n, |a, b| cmp(ys[a], ys[b]) == Ordering::Equal);

    let total = tied_pairs(n as u64);
    let untied = total + ties_xy - ties_x - ties_y;
    Ok(PairCounts {
        n: n as u64,
        concordant: untied - discordant,
        discordant,
        ties_x_only: ties_x - ties_xy,
        ties_y_only: ties_y - ties_xy,
        ties_both: ties_xy,
        distinct_x,
        distinct_y,
    })
}

impl PairCounts {
    /// τb = (C − D) / √((C + D + Tx)(C + D + Ty)).
    pub fn tau_b(&self) -> Result<f64> {
        let c = self.concordant as f64;
        let d = self.discordant as f64;
        let denom = ((c + d + self.ties_x_only as f64) * (c + d + self.ties_y_only as f64)).sqrt();
        if denom == 0.0 {
            return Err(Error::Domain("tau-b undefined: a variable is constant".into()));
        }
        Ok((c - d) / denom)
    }

    /// τc = 2m(C − D) / (n²(m − 1)), m = min(distinct x, distinct y).
    pub fn tau_c(&self) -> Result<f64> {
        let m = self.distinct_x.min(self.distinct_y);
        if m < 2 {
            return Err(Error::Domain("tau-c undefined: fewer than two distinct values".into()));
        }
        let m = m as f64;
        let n = self.n as f64;
        let c = self.concordant as f64;
        let d = self.discordant as f64;
        Ok(2.0 * m * (c - d) / (n * n * (m - 1.0)))
    }
}

pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<f64> {
    pair_counts(x, y)?.tau_b()
}

pub fn kendall_tau_c(x: &[f64], y: &[f64]) -> Result<f64> {
    pair_counts(x, y)?.tau_c()
}
