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

//! Accuracy and slowdown benchmarks.
//!
//! Accuracy compares the hierarchical synopsis with an identity baseline
//! that perturbs every quantum independently at scale `1/ε`. Slowdown
//! compares plain histograms over raw values with the full private
//! pipeline on the same data.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::confidence::CiCache;
use crate::engine::Dataset;
use crate::error::{invalid, Error, Result};
use crate::policy::{BucketBoundaries, ColumnPolicy, ColumnSetPolicy, NumericQuantization, Quantization, TablePolicy};
use crate::query::{HistogramRequest, QueryContext};
use crate::schema::ColumnType;
use crate::synopsis::{
    encode_message, laplace_from_uniform, NoiseTag, Prf, QuantumRange, SecretKey, SynopsisParams, TreeNode,
    VirtualSynopsis,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    Hierarchical,
    Identity,
}

impl FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hierarchical" => Ok(Self::Hierarchical),
            "identity" => Ok(Self::Identity),
            other => Err(invalid(format!("unknown mechanism `{other}`"))),
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Hierarchical => "hierarchical",
            Self::Identity => "identity",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    pub queries: usize,
    pub seed: u64,
    pub columns: Vec<String>,
    pub domain_sizes: Vec<u64>,
    pub epsilon: f64,
    pub branching: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryError {
    /// One range per dimension.
    pub ranges: Vec<QuantumRange>,
    pub error: f64,
}

impl QueryError {
    /// Number of quanta covered, the product over dimensions.
    pub fn volume(&self) -> u64 {
        self.ranges.iter().map(QuantumRange::len).product()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub mechanism: Mechanism,
    pub workload: Workload,
    pub total_l1: f64,
    pub mean_l1: f64,
    pub median_l1: f64,
    pub elapsed_ms: f64,
    #[serde(skip)]
    pub per_query: Vec<QueryError>,
}

impl BenchReport {
    /// Mean absolute error over the queries matching `keep`, if any.
    pub fn mean_where(&self, keep: impl Fn(&QueryError) -> bool) -> Option<f64> {
        let (sum, n) = self
            .per_query
            .iter()
            .filter(|q| keep(q))
            .fold((0.0, 0usize), |(s, n), q| (s + q.error, n + 1));
        (n > 0).then(|| sum / n as f64)
    }
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        (values[mid - 1] + values[mid]) / 2.0
    }
}

/// Uniform random `[lo, hi)` with `lo < hi`, endpoints drawn from `0..=m`.
pub fn random_interval<R: Rng>(rng: &mut R, m: u64) -> QuantumRange {
    loop {
        let a = rng.random_range(0..=m);
        let b = rng.random_range(0..=m);
        if a != b {
            return QuantumRange {
                lo: a.min(b),
                hi: a.max(b),
            };
        }
    }
}

/// Exact counts per quantum with inclusive prefix sums, 1-D or 2-D.
struct PrefixCounts {
    dims: Vec<u64>,
    sums: Vec<f64>,
}

impl PrefixCounts {
    fn from_cells(dims: &[u64], cells: &[f64]) -> Self {
        let dims = dims.to_vec();
        match dims.as_slice() {
            [m] => {
                let mut sums = vec![0.0; *m as usize + 1];
                for (i, c) in cells.iter().enumerate() {
                    sums[i + 1] = sums[i] + c;
                }
                Self { dims, sums }
            }
            [mx, my] => {
                let (w, h) = (*mx as usize + 1, *my as usize + 1);
                let mut sums = vec![0.0; w * h];
                for x in 0..*mx as usize {
                    for y in 0..*my as usize {
                        sums[(x + 1) * h + y + 1] =
                            cells[x * *my as usize + y] + sums[x * h + y + 1] + sums[(x + 1) * h + y] - sums[x * h + y];
                    }
                }
                Self { dims, sums }
            }
            _ => unreachable!("one or two dimensions"),
        }
    }

    fn range(&self, ranges: &[QuantumRange]) -> f64 {
        match ranges {
            [r] => self.sums[r.hi as usize] - self.sums[r.lo as usize],
            [x, y] => {
                let h = self.dims[1] as usize + 1;
                let at = |i: u64, j: u64| self.sums[i as usize * h + j as usize];
                at(x.hi, y.hi) - at(x.lo, y.hi) - at(x.hi, y.lo) + at(x.lo, y.lo)
            }
            _ => unreachable!("one or two dimensions"),
        }
    }
}

/// Identity mechanism: every quantum (cell) receives independent PRF
/// Laplace noise of scale `1/ε` from a tree-node message over unit nodes.
pub fn identity_cell_noise(key: &SecretKey, column_set_id: u32, dims: &[u64], epsilon: f64) -> Result<Vec<f64>> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(invalid(format!("epsilon must be positive and finite, got {epsilon}")));
    }
    let cells: u64 = dims.iter().product();
    let prf = Prf::new(key);
    let scale = 1.0 / epsilon;
    let mut out = Vec::with_capacity(cells as usize);
    let mut nodes: Vec<TreeNode> = dims.iter().map(|_| TreeNode { start: 0, size: 1 }).collect();
    for cell in 0..cells {
        let mut rest = cell;
        for (node, &m) in nodes.iter_mut().zip(dims).rev() {
            node.start = rest % m;
            rest /= m;
        }
        let u = prf.uniform(&encode_message(NoiseTag::TreeNode, column_set_id, &nodes));
        out.push(laplace_from_uniform(u, scale)?);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug)]
pub struct AccuracyConfig {
    pub mechanism: Mechanism,
    pub queries: usize,
    pub seed: u64,
    /// Replaces the column set's ε when set.
    pub epsilon: Option<f64>,
}

impl AccuracyConfig {
    pub fn new(mechanism: Mechanism, queries: usize, seed: u64) -> Self {
        Self {
            mechanism,
            queries,
            seed,
            epsilon: None,
        }
    }
}

/// Random-interval (or rectangle) ℓ1 error of one mechanism on the exact
/// quantized counts of `columns`, using the policy's column set.
pub fn bench_accuracy(
    dataset: &Dataset,
    policy: &TablePolicy,
    key: &SecretKey,
    columns: &[&str],
    config: AccuracyConfig,
) -> Result<BenchReport> {
    let AccuracyConfig {
        mechanism,
        queries,
        seed,
        epsilon,
    } = config;
    let set = policy.column_set_for(columns)?;
    // Work in the column set's dimension order.
    let ordered: Vec<&str> = set.columns.iter().map(String::as_str).collect();
    let quantizations = ordered
        .iter()
        .map(|c| {
            policy
                .quantization(c)
                .ok_or_else(|| Error::Policy(format!("column `{c}` has no quantization")))
        })
        .collect::<Result<Vec<&Quantization>>>()?;
    let mut params = policy.synopsis_params(set)?;
    if let Some(epsilon) = epsilon {
        params.epsilon = epsilon;
        params.validate()?;
    }
    let dims = params.domain_sizes.clone();
    if dims.len() > 2 {
        return Err(invalid("accuracy benchmarks support one or two columns"));
    }
    let cells: u64 = dims.iter().product();
    if cells > 1 << 24 {
        return Err(invalid(format!("{cells} cells is too many for an exhaustive baseline")));
    }

    let start = Instant::now();
    let exact = exact_cells(dataset, &ordered, &quantizations, &dims)?;
    let truth = PrefixCounts::from_cells(&dims, &exact);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let workload: Vec<Vec<QuantumRange>> = (0..queries)
        .map(|_| dims.iter().map(|&m| random_interval(&mut rng, m)).collect())
        .collect();

    let per_query = match mechanism {
        Mechanism::Hierarchical => {
            let synopsis = VirtualSynopsis::new(key, params.clone())?;
            workload
                .into_iter()
                .map(|ranges| {
                    let noisy = synopsis.noisy_count(&ranges, truth.range(&ranges))?;
                    Ok(QueryError {
                        error: (noisy.value - truth.range(&ranges)).abs(),
                        ranges,
                    })
                })
                .collect::<Result<Vec<_>>>()?
        }
        Mechanism::Identity => {
            let noise = identity_cell_noise(key, set.id, &dims, params.epsilon)?;
            let noisy: Vec<f64> = exact.iter().zip(&noise).map(|(c, n)| c + n).collect();
            let noisy = PrefixCounts::from_cells(&dims, &noisy);
            workload
                .into_iter()
                .map(|ranges| {
                    Ok(QueryError {
                        error: (noisy.range(&ranges) - truth.range(&ranges)).abs(),
                        ranges,
                    })
                })
                .collect::<Result<Vec<_>>>()?
        }
    };

    let total_l1: f64 = per_query.iter().map(|q| q.error).sum();
    let mut errors: Vec<f64> = per_query.iter().map(|q| q.error).collect();
    Ok(BenchReport {
        mechanism,
        workload: Workload {
            queries,
            seed,
            columns: ordered.iter().map(|c| c.to_string()).collect(),
            domain_sizes: dims,
            epsilon: params.epsilon,
            branching: params.branching,
        },
        total_l1,
        mean_l1: if queries == 0 { 0.0 } else { total_l1 / queries as f64 },
        median_l1: median(&mut errors),
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        per_query,
    })
}

fn exact_cells(dataset: &Dataset, columns: &[&str], qs: &[&Quantization], dims: &[u64]) -> Result<Vec<f64>> {
    let units = |m: u64| (0..m).map(|i| QuantumRange { lo: i, hi: i + 1 }).collect::<Vec<_>>();
    match (columns, qs, dims) {
        ([c], [q], [m]) => Ok(dataset
            .quantized_histogram(c, q, &units(*m))?
            .counts
            .into_iter()
            .map(|c| c as f64)
            .collect()),
        ([cx, cy], [qx, qy], [mx, my]) => Ok(dataset
            .quantized_heatmap((cx, qx, &units(*mx)), (cy, qy, &units(*my)))?
            .counts
            .into_iter()
            .map(|c| c as f64)
            .collect()),
        _ => Err(invalid("accuracy benchmarks support one or two columns")),
    }
}

/// Mean absolute noise of a 1-D mechanism over intervals of exactly length
/// `t`, averaged across `trials` independent keys and random placements.
pub fn fixed_length_error(
    mechanism: Mechanism,
    branching: u32,
    m: u64,
    t: u64,
    epsilon: f64,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if t == 0 || t > m {
        return Err(invalid(format!("interval length {t} must be in 1..={m}")));
    }
    let params = SynopsisParams::new(branching, vec![m], epsilon, 0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for _ in 0..trials {
        let key = SecretKey::generate_with(&mut rng);
        let lo = rng.random_range(0..=m - t);
        let range = QuantumRange { lo, hi: lo + t };
        let noise = match mechanism {
            Mechanism::Hierarchical => VirtualSynopsis::new(&key, params.clone())?.range_noise(&[range])?.value,
            Mechanism::Identity => {
                let prf = Prf::new(&key);
                let mut sum = 0.0;
                for i in range.lo..range.hi {
                    let u = prf.uniform(&encode_message(
                        NoiseTag::TreeNode,
                        0,
                        &[TreeNode { start: i, size: 1 }],
                    ));
                    sum += laplace_from_uniform(u, 1.0 / epsilon)?;
                }
                sum
            }
        };
        total += noise.abs();
    }
    Ok(total / trials as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerfEntry {
    pub name: String,
    pub plain_ms: f64,
    pub private_ms: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerfReport {
    pub rows: usize,
    pub runs: usize,
    pub warmup: usize,
    pub buckets: usize,
    pub entries: Vec<PerfEntry>,
    pub geometric_mean: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct PerfConfig {
    pub runs: usize,
    pub warmup: usize,
    pub buckets: usize,
}

impl Default for PerfConfig {
    fn default() -> Self {
        Self {
            runs: 5,
            warmup: 3,
            buckets: 50,
        }
    }
}

fn median_time(runs: usize, warmup: usize, mut f: impl FnMut() -> Result<()>) -> Result<Duration> {
    for _ in 0..warmup {
        f()?;
    }
    let mut times = Vec::with_capacity(runs);
    for _ in 0..runs.max(1) {
        let start = Instant::now();
        f()?;
        times.push(start.elapsed().as_secs_f64());
    }
    Ok(Duration::from_secs_f64(median(&mut times)))
}

fn equal_width(q: &NumericQuantization, buckets: usize) -> BucketBoundaries {
    let width = (q.qmax - q.qmin) / buckets as f64;
    let mut b: Vec<f64> = (0..buckets).map(|i| q.qmin + i as f64 * width).collect();
    b.push(q.qmax);
    BucketBoundaries::Numeric(b)
}

fn numeric_quantization<'a>(policy: &'a TablePolicy, column: &str) -> Result<&'a NumericQuantization> {
    match policy.quantization(column) {
        Some(Quantization::Numeric(q)) => Ok(q),
        _ => Err(Error::Policy(format!("column `{column}` has no numeric quantization"))),
    }
}

/// Times the plain histogram over `[qmin, qmax]` of each column against
/// the private one over the same bucket edges; with `pair`, also the plain
/// against the private heatmap of those two columns.
pub fn bench_perf(
    dataset: &Dataset,
    policy: &TablePolicy,
    key: &SecretKey,
    columns: &[&str],
    pair: Option<(&str, &str)>,
    config: PerfConfig,
) -> Result<PerfReport> {
    let ci = CiCache::default();
    let ctx = QueryContext::new(dataset, policy, key, &ci);
    let mut entries = Vec::new();
    let mut record = |name: String, plain: Duration, private: Duration| {
        let (plain_ms, private_ms) = (plain.as_secs_f64() * 1e3, private.as_secs_f64() * 1e3);
        entries.push(PerfEntry {
            name,
            plain_ms,
            private_ms,
            ratio: private_ms / plain_ms,
        });
    };
    for &column in columns {
        let q = numeric_quantization(policy, column)?;
        let request = HistogramRequest::histogram(column, equal_width(q, config.buckets));
        let plain = median_time(config.runs, config.warmup, || {
            std::hint::black_box(dataset.histogram(column, q.qmin, q.qmax, config.buckets)?);
            Ok(())
        })?;
        let private = median_time(config.runs, config.warmup, || {
            std::hint::black_box(ctx.histogram(&request)?);
            Ok(())
        })?;
        record(format!("histogram:{column}"), plain, private);
    }
    if let Some((x, y)) = pair {
        let (qx, qy) = (numeric_quantization(policy, x)?, numeric_quantization(policy, y)?);
        let side = (config.buckets as f64).sqrt().ceil() as usize;
        let request = HistogramRequest::heatmap(x, equal_width(qx, side), y, equal_width(qy, side));
        let plain = median_time(config.runs, config.warmup, || {
            std::hint::black_box(dataset.heatmap((x, qx.qmin, qx.qmax, side), (y, qy.qmin, qy.qmax, side))?);
            Ok(())
        })?;
        let private = median_time(config.runs, config.warmup, || {
            std::hint::black_box(ctx.heatmap(&request)?);
            Ok(())
        })?;
        record(format!("heatmap:{x},{y}"), plain, private);
    }
    if entries.is_empty() {
        return Err(invalid("nothing to benchmark"));
    }
    let geometric_mean = (entries.iter().map(|e| e.ratio.ln()).sum::<f64>() / entries.len() as f64).exp();
    Ok(PerfReport {
        rows: dataset.rows(),
        runs: config.runs,
        warmup: config.warmup,
        buckets: config.buckets,
        entries,
        geometric_mean,
    })
}

/// Uniform synthetic table: numeric columns with values in `[0, m)`,
/// unit-width quantization (so `m` quanta), one column set per column with
/// ids `1..`, and for two or more columns a set over the first two with id
/// `100`.
pub fn synthetic_table(
    name: &str,
    columns: &[&str],
    rows: usize,
    m: u64,
    branching: u32,
    epsilon: f64,
    seed: u64,
) -> Result<(Dataset, TablePolicy)> {
    if m == 0 {
        return Err(invalid("domain size must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let upper = m as f64;
    let cols = columns
        .iter()
        .map(|c| crate::engine::Column::real(*c, (0..rows).map(|_| Some(rng.random_range(0.0..upper)))))
        .collect();
    let dataset = Dataset::new(name, cols)?;
    let mut policy = TablePolicy::new(name);
    policy.set_branching(branching)?;
    for (i, c) in columns.iter().enumerate() {
        policy.set_column(
            *c,
            ColumnPolicy {
                column_type: ColumnType::Real,
                quantization: Some(Quantization::Numeric(NumericQuantization::new(0.0, upper, 1.0)?)),
            },
        )?;
        policy.add_column_set(ColumnSetPolicy::new(i as u32 + 1, [*c], epsilon))?;
    }
    if let [x, y, ..] = columns {
        policy.add_column_set(ColumnSetPolicy::new(100, [*x, *y], epsilon))?;
    }
    policy.validate()?;
    Ok((dataset, policy))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(epsilon: f64, branching: u32) -> (Dataset, TablePolicy) {
        synthetic_table("u", &["a", "b"], 5000, 64, branching, epsilon, 1).unwrap()
    }

    #[test]
    fn prefix_counts_match_brute_force() {
        let cells: Vec<f64> = (0..12).map(|i| (i * i % 7) as f64).collect();
        let p = PrefixCounts::from_cells(&[3, 4], &cells);
        let x = QuantumRange { lo: 1, hi: 3 };
        let y = QuantumRange { lo: 0, hi: 2 };
        let brute: f64 = (1..3)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| cells[i * 4 + j])
            .sum();
        assert_eq!(p.range(&[x, y]), brute);
        let p1 = PrefixCounts::from_cells(&[12], &cells);
        assert_eq!(
            p1.range(&[QuantumRange { lo: 2, hi: 5 }]),
            cells[2] + cells[3] + cells[4]
        );
    }

    #[test]
    fn vanishing_noise_gives_zero_error() {
        let (ds, p) = setup(1e12, 2);
        let key = SecretKey::generate();
        for mech in [Mechanism::Hierarchical, Mechanism::Identity] {
            for cols in [&["a"][..], &["b", "a"][..]] {
                let r = bench_accuracy(&ds, &p, &key, cols, AccuracyConfig::new(mech, 200, 3)).unwrap();
                assert!(r.mean_l1 < 1e-6, "{mech} {cols:?} {}", r.mean_l1);
            }
        }
    }

    #[test]
    fn epsilon_override_rescales_noise() {
        let (ds, p) = setup(1.0, 2);
        let key = SecretKey::generate();
        let base = AccuracyConfig::new(Mechanism::Identity, 100, 1);
        let a = bench_accuracy(&ds, &p, &key, &["a"], base).unwrap();
        let b = bench_accuracy(
            &ds,
            &p,
            &key,
            &["a"],
            AccuracyConfig {
                epsilon: Some(0.1),
                ..base
            },
        )
        .unwrap();
        assert!((b.total_l1 / a.total_l1 - 10.0).abs() < 1e-6);
        assert_eq!(b.workload.epsilon, 0.1);
    }

    #[test]
    fn reports_are_reproducible() {
        let (ds, p) = setup(0.5, 2);
        let key = SecretKey::from_bytes([9; 32]);
        let a = bench_accuracy(
            &ds,
            &p,
            &key,
            &["a"],
            AccuracyConfig::new(Mechanism::Hierarchical, 300, 7),
        )
        .unwrap();
        let b = bench_accuracy(
            &ds,
            &p,
            &key,
            &["a"],
            AccuracyConfig::new(Mechanism::Hierarchical, 300, 7),
        )
        .unwrap();
        assert_eq!(a.total_l1, b.total_l1);
        assert_eq!(a.per_query, b.per_query);
        assert!(a.per_query.iter().all(|q| q.ranges[0].lo < q.ranges[0].hi));
        let c = bench_accuracy(
            &ds,
            &p,
            &key,
            &["a"],
            AccuracyConfig::new(Mechanism::Hierarchical, 300, 8),
        )
        .unwrap();
        assert_ne!(a.total_l1, c.total_l1);
    }

    #[test]
    fn identity_error_grows_like_sqrt_length() {
        let e4 = fixed_length_error(Mechanism::Identity, 2, 1024, 4, 1.0, 3000, 1).unwrap();
        let e64 = fixed_length_error(Mechanism::Identity, 2, 1024, 64, 1.0, 3000, 2).unwrap();
        // E|sum of t Laplace(1)| ≈ sqrt(2t)·sqrt(2/π) for large t
        let expected64 = (2.0 * 64.0f64).sqrt() * (2.0 / std::f64::consts::PI).sqrt();
        assert!((e64 / expected64 - 1.0).abs() < 0.06, "{e64} vs {expected64}");
        assert!((e64 / e4 - 4.0).abs() < 0.5, "{}", e64 / e4);
    }

    #[test]
    fn mechanism_names() {
        assert_eq!("identity".parse::<Mechanism>().unwrap(), Mechanism::Identity);
        assert!("laplace".parse::<Mechanism>().is_err());
        assert_eq!(Mechanism::Hierarchical.to_string(), "hierarchical");
    }

    #[test]
    fn perf_report_shape() {
        let (ds, p) = setup(1.0, 2);
        let key = SecretKey::generate();
        let cfg = PerfConfig {
            runs: 1,
            warmup: 0,
            buckets: 16,
        };
        let r = bench_perf(&ds, &p, &key, &["a"], Some(("a", "b")), cfg).unwrap();
        assert_eq!(r.entries.len(), 2);
        assert!(r.geometric_mean > 0.0);
    }
}
