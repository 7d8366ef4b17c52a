// Copyright 2026 The vsyn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Monte-Carlo confidence radii for sums of i.i.d. Laplace noise.
//!
//! These are post-processing only, so an ordinary seeded RNG is used. The
//! seed is derived from the inputs, which makes every radius a pure function
//! of `(n_vars, scale, alpha, samples)`.

use std::collections::HashMap;

use parking_lot::RwLock;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{invalid, Result};
use crate::synopsis::{inverse_laplace, uniform_from_bits};

pub const DEFAULT_ALPHA: f64 = 0.99;
pub const DEFAULT_MC_SAMPLES: usize = 10_000;

fn sampler_seed(n_vars: u64, alpha: f64, samples: usize) -> u64 {
    let mut hasher = Sha256::new();
    for word in [n_vars, alpha.to_bits(), samples as u64] {
        hasher.update(word.to_be_bytes());
    }
    let digest = hasher.finalize();
    u64::from_be_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

/// Radius `c` such that a fraction `alpha` of simulated
/// `|Σ Laplace(scale)|` draws over `n_vars` variables is at most `c`.
/// Simulated at unit scale and multiplied by `scale`, so radii are exactly
/// linear in the scale.
pub fn confidence_interval(n_vars: u64, scale: f64, alpha: f64, mc_samples: usize) -> Result<f64> {
    check_scale(scale)?;
    Ok(unit_radius(n_vars, alpha, mc_samples)? * scale)
}

fn check_scale(scale: f64) -> Result<()> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(invalid(format!("scale must be positive and finite, got {scale}")));
    }
    Ok(())
}

fn unit_radius(n_vars: u64, alpha: f64, mc_samples: usize) -> Result<f64> {
    if mc_samples == 0 {
        return Err(invalid("confidence interval needs at least one Monte-Carlo sample"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if n_vars == 0 {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sampler_seed(n_vars, alpha, mc_samples));
    let mut sums: Vec<f64> = (0..mc_samples)
        .map(|_| {
            (0..n_vars)
                .map(|_| inverse_laplace(uniform_from_bits(rng.random()), 1.0))
                .sum::<f64>()
                .abs()
        })
        .collect();
    let rank = ((alpha * mc_samples as f64).ceil() as usize).clamp(1, mc_samples) - 1;
    let (_, radius, _) = sums.select_nth_unstable_by(rank, f64::total_cmp);
    Ok(*radius)
}

/// Shared cache of confidence radii. Any number of readers and writers may
/// race; equal keys always compute equal values.
#[derive(Debug)]
pub struct CiCache {
    samples: usize,
    /// Unit-scale radii keyed by `(n_vars, alpha bits)`.
    entries: RwLock<HashMap<(u64, u64), f64>>,
}

impl Default for CiCache {
    fn default() -> Self {
        Self::new(DEFAULT_MC_SAMPLES)
    }
}

impl CiCache {
    pub fn new(samples: usize) -> Self {
        Self {
            samples,
            entries: RwLock::new(HashMap::new()),
        }
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn radius(&self, n_vars: u64, scale: f64, alpha: f64) -> Result<f64> {
        check_scale(scale)?;
        let key = (n_vars, alpha.to_bits());
        if let Some(&unit) = self.entries.read().get(&key) {
            return Ok(unit * scale);
        }
        let unit = unit_radius(n_vars, alpha, self.samples)?;
        Ok(*self.entries.write().entry(key).or_insert(unit) * scale)
    }

    pub fn len(&self) -> usize {
        self.entries.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Smallest ε for which one Laplace(1/ε) term stays below one vertical pixel
/// (`ymax / pixels` counts) with probability `alpha`, using the one-sided
/// quantile `F⁻¹(alpha) = ln(1 / (2(1 - alpha)))`. For `alpha <= 0.5` there is
/// no constraint and the result is 0.
pub fn min_epsilon_subpixel(pixels: u32, ymax: f64, alpha: f64) -> f64 {
    let quantile = (1.0 / (2.0 * (1.0 - alpha))).ln();
    quantile.max(0.0) * pixels as f64 / ymax
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_laplace_radius_matches_closed_form() {
        let c = confidence_interval(1, 1.0, 0.99, 200_000).unwrap();
        assert!((c - 100f64.ln()).abs() < 0.1, "{c}");
    }

    #[test]
    fn radius_matches_brute_force_oracle() {
        // 10^7-sample numpy estimate of the 0.95 quantile of |L1 + L2 + L3|, L ~ Laplace(2).
        const ORACLE: f64 = 9.935695274651867;
        let c = confidence_interval(3, 2.0, 0.95, 100_000).unwrap();
        assert!((c - ORACLE).abs() / ORACLE < 0.02, "{c}");
    }

    #[test]
    fn radius_vanishes_as_alpha_goes_to_zero() {
        let c = confidence_interval(2, 5.0, 1e-9, 10_000).unwrap();
        assert!(c < 0.05, "{c}");
    }

    #[test]
    fn rejects_zero_samples() {
        assert!(confidence_interval(1, 1.0, 0.9, 0).is_err());
        assert!(confidence_interval(1, 1.0, 1.0, 10).is_err());
    }

    #[test]
    fn radius_is_deterministic_and_cached() {
        let cache = CiCache::new(2_000);
        let a = cache.radius(4, 3.0, 0.99).unwrap();
        let b = confidence_interval(4, 3.0, 0.99, 2_000).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(cache.len(), 1);
        assert_eq!(cache.radius(4, 3.0, 0.99).unwrap().to_bits(), a.to_bits());
        assert_eq!(cache.radius(0, 3.0, 0.99).unwrap(), 0.0);
    }

    #[test]
    fn radius_is_linear_in_scale() {
        let cache = CiCache::new(3_000);
        let a = cache.radius(5, 2.0, 0.99).unwrap();
        let b = cache.radius(5, 20.0, 0.99).unwrap();
        assert!((b / a - 10.0).abs() < 1e-12);
        assert_eq!(cache.len(), 1);
    }

    #[test]
    fn concurrent_inserts_agree() {
        let cache = CiCache::new(1_000);
        let values: Vec<u64> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..8)
                .map(|_| s.spawn(|| cache.radius(3, 1.5, 0.9).unwrap().to_bits()))
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        assert!(values.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(cache.len(), 1);
    }

    #[test]
    fn subpixel_epsilon_examples() {
        assert!((min_epsilon_subpixel(100, 100.0, 0.95) - 10f64.ln()).abs() < 1e-12);
        assert!((min_epsilon_subpixel(100, 2303.0, 0.95) - 0.1).abs() < 1e-3);
        assert_eq!(min_epsilon_subpixel(100, 100.0, 1e-6), 0.0);
    }
}
