use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Seeded shuffle followed by a train/validation/test partition.
///
/// Sizes use the largest-remainder rule: every part gets `floor(n·ratio)`,
/// then leftover items go one at a time to the parts with the largest
/// fractional remainders (ties resolved toward train, then validation).
pub fn split_dataset<T>(items: Vec<T>, ratios: [f64; 3], seed: u64) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    if items.is_empty() {
        return Err(Error::Domain("cannot split an empty dataset".into()));
    }
    if ratios.iter().any(|r| !r.is_finite() || *r < 0.0) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!(
            "split ratios {ratios:?} must be non-negative and sum to 1"
        )));
    }
    let sizes = partition_sizes(items.len(), ratios);

    let mut items = items;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    items.shuffle(&mut rng);

    let test = items.split_off(sizes[0] + sizes[1]);
    let val = items.split_off(sizes[0]);
    Ok((items, val, test))
}

fn partition_sizes(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let exact = ratios.map(|r| n as f64 * r);
    let mut sizes = exact.map(|x| x.floor() as usize);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let mut left = n - sizes.iter().sum::<usize>();
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        sizes[i] += 1;
        left -= 1;
    }
    sizes
}
