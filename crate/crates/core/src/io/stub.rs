use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Deterministic unit vector standing in for a frozen encoder output.
///
/// The key and seed are hashed with SHA-256 into a ChaCha20 seed, `dim`
/// standard normals are drawn and the result is L2-normalized in `f64`
/// before rounding to `f32`.
pub fn stub_embed(key: &str, dim: usize, seed: u64) -> Result<Vec<f32>> {
    if dim == 0 {
        return Err(Error::Domain("stub embedding dimension must be positive".into()));
    }
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(key.as_bytes());
    let digest: [u8; 32] = hasher.finalize().into();
    let mut rng = ChaCha20Rng::from_seed(digest);
    let draws: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = draws.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(draws.into_iter().map(|x| (x / norm) as f32).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm(v: &[f32]) -> f64 {
        v.iter().map(|&x| f64::from(x).powi(2)).sum::<f64>().sqrt()
    }

    #[test]
    fn deterministic() {
        let a = stub_embed("img-1", 64, 7).unwrap();
        let b = stub_embed("img-1", 64, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, stub_embed("img-1", 64, 8).unwrap());
        assert_ne!(a, stub_embed("img-2", 64, 7).unwrap());
    }

    #[test]
    fn unit_norm_for_common_widths() {
        for dim in [1, 4, 64, 512, 768] {
            for k in 0..20 {
                let v = stub_embed(&format!("k{k}"), dim, 3).unwrap();
                assert_eq!(v.len(), dim);
                assert!((norm(&v) - 1.0).abs() < 1e-6, "dim {dim}");
            }
        }
    }

    #[test]
    fn zero_dim_rejected() {
        assert!(matches!(stub_embed("x", 0, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn distinct_keys_nearly_orthogonal() {
        // std of the cosine at dim 512 is about 0.044; 0.3 is ~7 sigma
        let mut worst = 0.0f64;
        for i in 0..1000 {
            let a = stub_embed(&format!("a{i}"), 512, 11).unwrap();
            let b = stub_embed(&format!("b{i}"), 512, 11).unwrap();
            worst = worst.max(crate::io::cosine(&a, &b).abs());
        }
        assert!(worst < 0.3, "max |cos| = {worst}");
    }
}
