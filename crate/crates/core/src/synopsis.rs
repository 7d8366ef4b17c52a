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

//! Virtual hierarchical-histogram synopsis.
//!
//! The synopsis is never materialized. Every node of the b-ary tree over a
//! quantized domain owns one Laplace sample, derived on demand from a keyed
//! PRF over the node's coordinates. A range count is the true count plus the
//! noise of every node in the range's b-adic decomposition (Cartesian product
//! of per-dimension decompositions for rectangles).

use std::fmt;

use hmac::{Hmac, KeyInit, Mac};
use rand::{CryptoRng, RngCore};
use sha2::Sha256;

use crate::error::{invalid, Error, Result};

type HmacSha256 = Hmac<Sha256>;

/// Version byte leading every PRF message.
pub const MESSAGE_VERSION: u8 = 0x01;

/// Length of a table key in bytes.
pub const KEY_LEN: usize = 32;

/// One b-aligned interval `[start, start + size)` of a quantized domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TreeNode {
    pub start: u64,
    pub size: u64,
}

impl TreeNode {
    pub fn end(&self) -> u64 {
        self.start + self.size
    }
}

/// Half-open interval `[lo, hi)` of quantum indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct QuantumRange {
    pub lo: u64,
    pub hi: u64,
}

impl QuantumRange {
    pub fn new(lo: u64, hi: u64) -> Result<Self> {
        if lo > hi {
            return Err(invalid(format!("range [{lo}, {hi}) has lo > hi")));
        }
        Ok(Self { lo, hi })
    }

    pub fn len(&self) -> u64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi == self.lo
    }

    pub fn contains(&self, index: u64) -> bool {
        self.lo <= index && index < self.hi
    }
}

impl fmt::Display for QuantumRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.lo, self.hi)
    }
}

/// Purpose of a PRF evaluation; the tag keeps the three noise families apart.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum NoiseTag {
    TreeNode = 0x01,
    NullCount = 0x02,
    DistinctCount = 0x03,
}

/// The 32-byte table key. It has no serde implementation on purpose and its
/// `Debug` output is redacted.
#[derive(Clone, PartialEq, Eq)]
pub struct SecretKey([u8; KEY_LEN]);

impl SecretKey {
    pub fn from_bytes(bytes: [u8; KEY_LEN]) -> Self {
        Self(bytes)
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self> {
        let bytes: [u8; KEY_LEN] = bytes
            .try_into()
            .map_err(|_| Error::Key(format!("expected {KEY_LEN} key bytes, got {}", bytes.len())))?;
        Ok(Self(bytes))
    }

    pub fn from_hex(text: &str) -> Result<Self> {
        let bytes = hex::decode(text.trim()).map_err(|e| Error::Key(e.to_string()))?;
        Self::from_slice(&bytes)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn as_bytes(&self) -> &[u8; KEY_LEN] {
        &self.0
    }

    /// Fresh key from the thread-local CSPRNG.
    pub fn generate() -> Self {
        Self::generate_with(&mut rand::rng())
    }

    pub fn generate_with<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let mut bytes = [0u8; KEY_LEN];
        rng.fill_bytes(&mut bytes);
        Self(bytes)
    }
}

impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SecretKey(..)")
    }
}

/// Public parameters of one synopsis (one column set of one table).
#[derive(Clone, Debug, PartialEq)]
pub struct SynopsisParams {
    pub branching: u32,
    pub domain_sizes: Vec<u64>,
    pub epsilon: f64,
    pub column_set_id: u32,
}

impl SynopsisParams {
    pub fn new(branching: u32, domain_sizes: Vec<u64>, epsilon: f64, column_set_id: u32) -> Result<Self> {
        let params = Self {
            branching,
            domain_sizes,
            epsilon,
            column_set_id,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.branching < 2 {
            return Err(invalid(format!(
                "branching factor must be >= 2, got {}",
                self.branching
            )));
        }
        if self.domain_sizes.is_empty() || self.domain_sizes.len() > u8::MAX as usize {
            return Err(invalid(format!(
                "a synopsis needs between 1 and 255 dimensions, got {}",
                self.domain_sizes.len()
            )));
        }
        if let Some(m) = self.domain_sizes.iter().find(|&&m| m == 0) {
            return Err(invalid(format!("domain size must be positive, got {m}")));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(invalid(format!(
                "epsilon must be positive and finite, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    pub fn dimensions(&self) -> usize {
        self.domain_sizes.len()
    }
}

/// Smallest `p` with `b^p >= m`, i.e. `⌈log_b m⌉` computed without floating point.
pub fn tree_depth(m: u64, b: u32) -> u32 {
    let b = b as u128;
    let m = m as u128;
    let mut depth = 0;
    let mut reach = 1u128;
    while reach < m {
        reach *= b;
        depth += 1;
    }
    depth
}

/// Laplace scale for every node: `max(1, ∏ ⌈log_b m_i⌉) / ε`.
pub fn laplace_scale(params: &SynopsisParams) -> Result<f64> {
    params.validate()?;
    let depth_product: f64 = params
        .domain_sizes
        .iter()
        .map(|&m| tree_depth(m, params.branching) as f64)
        .product();
    Ok(depth_product.max(1.0) / params.epsilon)
}

/// Splits `[lo, hi)` into the minimal list of b-aligned power-of-b blocks,
/// sorted by start.
pub fn b_adic_decomposition(range: QuantumRange, b: u32) -> Result<Vec<TreeNode>> {
    if b < 2 {
        return Err(invalid(format!("branching factor must be >= 2, got {b}")));
    }
    let mut nodes = Vec::new();
    decompose_into(range, b as u64, &mut nodes);
    Ok(nodes)
}

fn decompose_into(range: QuantumRange, b: u64, nodes: &mut Vec<TreeNode>) {
    let mut start = range.lo;
    while start < range.hi {
        let remaining = range.hi - start;
        let mut fit = 1u64;
        while fit <= remaining / b {
            fit *= b;
        }
        // Largest power of b dividing `start`, capped by what still fits.
        let size = if start == 0 {
            fit
        } else {
            let mut size = 1u64;
            while size < fit && start.is_multiple_of(size * b) {
                size *= b;
            }
            size
        };
        nodes.push(TreeNode { start, size });
        start += size;
    }
}

/// Bit-exact PRF message: version, tag, id (u32 BE), dimension count, then
/// `start` and `size` (u64 BE) per node.
pub fn encode_message(tag: NoiseTag, id: u32, nodes: &[TreeNode]) -> Vec<u8> {
    let mut buf = Vec::with_capacity(7 + 16 * nodes.len());
    encode_into(&mut buf, tag, id, nodes);
    buf
}

fn encode_into(buf: &mut Vec<u8>, tag: NoiseTag, id: u32, nodes: &[TreeNode]) {
    debug_assert!(nodes.len() <= u8::MAX as usize);
    buf.clear();
    buf.push(MESSAGE_VERSION);
    buf.push(tag as u8);
    buf.extend_from_slice(&id.to_be_bytes());
    buf.push(nodes.len() as u8);
    for node in nodes {
        buf.extend_from_slice(&node.start.to_be_bytes());
        buf.extend_from_slice(&node.size.to_be_bytes());
    }
}

/// Maps the top 53 bits of a word into the open interval (0, 1).
pub(crate) fn uniform_from_bits(word: u64) -> f64 {
    ((word >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// HMAC-SHA256 keyed once; cloning the keyed state skips re-deriving the pads.
#[derive(Clone)]
pub struct Prf {
    keyed: HmacSha256,
}

impl Prf {
    pub fn new(key: &SecretKey) -> Self {
        let keyed = <HmacSha256 as KeyInit>::new_from_slice(key.as_bytes()).expect("HMAC accepts 32-byte keys");
        Self { keyed }
    }

    pub fn uniform(&self, message: &[u8]) -> f64 {
        let mut mac = self.keyed.clone();
        mac.update(message);
        let digest = mac.finalize().into_bytes();
        let word = u64::from_be_bytes(digest[..8].try_into().expect("digest is 32 bytes"));
        uniform_from_bits(word)
    }
}

impl fmt::Debug for Prf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Prf(..)")
    }
}

/// Uniform sample in (0, 1) determined by `(key, message)`.
pub fn prf_uniform(key: &SecretKey, message: &[u8]) -> f64 {
    Prf::new(key).uniform(message)
}

/// Inverse Laplace CDF: `-s · sgn(u - 0.5) · ln(1 - 2|u - 0.5|)`.
pub fn laplace_from_uniform(u: f64, scale: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(invalid(format!("uniform sample must lie in (0, 1), got {u}")));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(invalid(format!(
            "Laplace scale must be positive and finite, got {scale}"
        )));
    }
    Ok(inverse_laplace(u, scale))
}

#[inline]
pub(crate) fn inverse_laplace(u: f64, scale: f64) -> f64 {
    let centered = u - 0.5;
    let sign = if centered > 0.0 {
        1.0
    } else if centered < 0.0 {
        -1.0
    } else {
        return 0.0;
    };
    -scale * sign * (1.0 - 2.0 * centered.abs()).ln()
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSample {
    pub value: f64,
    /// One node per dimension.
    pub nodes: Vec<TreeNode>,
    pub scale: f64,
}

/// Noise summed over a range decomposition together with the number of
/// Laplace variables that went into it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RangeNoise {
    pub value: f64,
    pub n_vars: u64,
}

/// A synopsis bound to its key. Holds nothing but the keyed PRF and the
/// public parameters.
#[derive(Clone, Debug)]
pub struct VirtualSynopsis {
    prf: Prf,
    params: SynopsisParams,
    scale: f64,
}

impl VirtualSynopsis {
    pub fn new(key: &SecretKey, params: SynopsisParams) -> Result<Self> {
        let scale = laplace_scale(&params)?;
        Ok(Self {
            prf: Prf::new(key),
            params,
            scale,
        })
    }

    pub fn params(&self) -> &SynopsisParams {
        &self.params
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn node_noise(&self, nodes: &[TreeNode]) -> Result<NoiseSample> {
        self.check_nodes(nodes)?;
        let mut buf = Vec::new();
        Ok(NoiseSample {
            value: self.noise_at(&mut buf, nodes),
            nodes: nodes.to_vec(),
            scale: self.scale,
        })
    }

    fn noise_at(&self, buf: &mut Vec<u8>, nodes: &[TreeNode]) -> f64 {
        encode_into(buf, NoiseTag::TreeNode, self.params.column_set_id, nodes);
        inverse_laplace(self.prf.uniform(buf), self.scale)
    }

    fn check_nodes(&self, nodes: &[TreeNode]) -> Result<()> {
        if nodes.len() != self.params.dimensions() {
            return Err(invalid(format!(
                "expected one node per dimension ({}), got {}",
                self.params.dimensions(),
                nodes.len()
            )));
        }
        for (node, &m) in nodes.iter().zip(&self.params.domain_sizes) {
            if node.size == 0 || node.start.checked_add(node.size).is_none_or(|end| end > m) {
                return Err(invalid(format!(
                    "node ({}, {}) lies outside domain of size {m}",
                    node.start, node.size
                )));
            }
        }
        Ok(())
    }

    /// Per-dimension b-adic decompositions of a rectangle.
    pub fn decompose(&self, ranges: &[QuantumRange]) -> Result<Vec<Vec<TreeNode>>> {
        if ranges.len() != self.params.dimensions() {
            return Err(invalid(format!(
                "expected one range per dimension ({}), got {}",
                self.params.dimensions(),
                ranges.len()
            )));
        }
        ranges
            .iter()
            .zip(&self.params.domain_sizes)
            .map(|(range, &m)| {
                if range.lo > range.hi || range.hi > m {
                    return Err(invalid(format!("range {range} exceeds domain of size {m}")));
                }
                b_adic_decomposition(*range, self.params.branching)
            })
            .collect()
    }

    /// Sum of node noise over the Cartesian product of the decompositions.
    pub fn range_noise(&self, ranges: &[QuantumRange]) -> Result<RangeNoise> {
        let axes = self.decompose(ranges)?;
        if axes.iter().any(Vec::is_empty) {
            return Ok(RangeNoise { value: 0.0, n_vars: 0 });
        }
        let mut cursor = vec![0usize; axes.len()];
        let mut nodes: Vec<TreeNode> = axes.iter().map(|axis| axis[0]).collect();
        let mut buf = Vec::with_capacity(7 + 16 * axes.len());
        let mut value = 0.0;
        let mut n_vars = 0u64;
        loop {
            value += self.noise_at(&mut buf, &nodes);
            n_vars += 1;
            // Odometer over the product, last dimension fastest.
            let mut dim = axes.len();
            loop {
                if dim == 0 {
                    return Ok(RangeNoise { value, n_vars });
                }
                dim -= 1;
                cursor[dim] += 1;
                if cursor[dim] < axes[dim].len() {
                    nodes[dim] = axes[dim][cursor[dim]];
                    break;
                }
                cursor[dim] = 0;
                nodes[dim] = axes[dim][0];
            }
        }
    }

    pub fn noisy_count(&self, ranges: &[QuantumRange], true_count: f64) -> Result<RangeNoise> {
        let noise = self.range_noise(ranges)?;
        Ok(RangeNoise {
            value: true_count + noise.value,
            n_vars: noise.n_vars,
        })
    }
}

pub fn node_noise(key: &SecretKey, params: &SynopsisParams, nodes: &[TreeNode]) -> Result<NoiseSample> {
    VirtualSynopsis::new(key, params.clone())?.node_noise(nodes)
}

pub fn noisy_range_count(
    key: &SecretKey,
    params: &SynopsisParams,
    ranges: &[QuantumRange],
    true_count: f64,
) -> Result<f64> {
    Ok(VirtualSynopsis::new(key, params.clone())?
        .noisy_count(ranges, true_count)?
        .value)
}

/// Lap(1/ε) noise for a per-column count release (null or distinct count).
pub fn count_release_noise(key: &SecretKey, tag: NoiseTag, column_id: u32, epsilon: f64) -> Result<f64> {
    if tag == NoiseTag::TreeNode {
        return Err(invalid("count releases use the null-count or distinct-count tag"));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(invalid(format!("epsilon must be positive and finite, got {epsilon}")));
    }
    let u = prf_uniform(key, &encode_message(tag, column_id, &[]));
    laplace_from_uniform(u, 1.0 / epsilon)
}
