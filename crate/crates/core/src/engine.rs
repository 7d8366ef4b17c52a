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

//! In-memory columnar backend.
//!
//! Quantization is applied per row during the scan; a quantized copy of a
//! column is never built, so the working set of a query depends on the number
//! of buckets and not on the size of the quantized domain.

use std::collections::HashSet;
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::policy::{NumericQuantizer, Quantization, StringQuantization};
use crate::schema::{ColumnSpec, ColumnType, Schema};
use crate::synopsis::QuantumRange;

/// Binds `$b` to a bucket closure specialized to the locator's kind.
macro_rules! with_locator {
    ($locator:expr, |$b:ident| $body:expr) => {
        match $locator {
            Locator::Uniform(u) => {
                let $b = |i: u64| u.bucket(i);
                $body
            }
            Locator::Search(s) => {
                let $b = |i: u64| s.bucket(i);
                $body
            }
        }
    };
}

#[derive(Clone, Debug, PartialEq)]
pub enum ColumnData {
    /// Missing cells hold NaN.
    Real(Vec<f64>),
    /// Missing cells hold an empty string.
    String(Vec<String>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    spec: ColumnSpec,
    data: ColumnData,
    missing: Vec<bool>,
}

impl Column {
    pub fn real(name: impl Into<String>, values: impl IntoIterator<Item = Option<f64>>) -> Self {
        let (data, missing): (Vec<f64>, Vec<bool>) = values
            .into_iter()
            .map(|v| match v {
                Some(v) if !v.is_nan() => (v, false),
                _ => (f64::NAN, true),
            })
            .unzip();
        Self {
            spec: ColumnSpec::new(name, ColumnType::Real),
            data: ColumnData::Real(data),
            missing,
        }
    }

    pub fn string<S: Into<String>>(name: impl Into<String>, values: impl IntoIterator<Item = Option<S>>) -> Self {
        let (data, missing): (Vec<String>, Vec<bool>) = values
            .into_iter()
            .map(|v| match v {
                Some(v) => (v.into(), false),
                None => (String::new(), true),
            })
            .unzip();
        Self {
            spec: ColumnSpec::new(name, ColumnType::String),
            data: ColumnData::String(data),
            missing,
        }
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn column_type(&self) -> ColumnType {
        self.spec.column_type
    }

    pub fn data(&self) -> &ColumnData {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.missing.len()
    }

    pub fn is_empty(&self) -> bool {
        self.missing.is_empty()
    }

    pub fn is_missing(&self, row: usize) -> bool {
        self.missing[row]
    }

    pub fn non_null(&self) -> u64 {
        self.missing.iter().filter(|&&m| !m).count() as u64
    }
}

/// Immutable columnar table.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    name: String,
    rows: usize,
    columns: Vec<Column>,
    parse_warnings: u64,
}

/// Whether raw statistics may be read from a table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Visibility {
    Public,
    Private,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bound {
    Real(f64),
    String(String),
}

/// `min`/`max` are `None` when the column has no non-null value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangeStats {
    pub min: Option<Bound>,
    pub max: Option<Bound>,
    pub rows: u64,
    pub non_null: u64,
}

/// Exact per-bucket counts before noise.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrueHistogram {
    pub counts: Vec<u64>,
    /// Rows that are missing or outside the quantization range.
    pub null_count: u64,
}

/// Exact cell counts of a heatmap, row-major over `(x bucket, y bucket)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrueHeatmap {
    pub x_buckets: usize,
    pub y_buckets: usize,
    pub counts: Vec<u64>,
    pub null_count: u64,
}

impl TrueHeatmap {
    pub fn get(&self, x: usize, y: usize) -> u64 {
        self.counts[x * self.y_buckets + y]
    }
}

impl Dataset {
    pub fn new(name: impl Into<String>, columns: Vec<Column>) -> Result<Self> {
        let rows = columns.first().map_or(0, Column::len);
        if let Some(c) = columns.iter().find(|c| c.len() != rows) {
            return Err(Error::Schema(format!(
                "column `{}` has {} rows, expected {rows}",
                c.name(),
                c.len()
            )));
        }
        Schema::new(columns.iter().map(|c| c.spec.clone()).collect())?;
        Ok(Self {
            name: name.into(),
            rows,
            columns,
            parse_warnings: 0,
        })
    }

    /// Reads a headered CSV. Empty fields are missing; unparsable numbers
    /// become missing and are counted in [`Dataset::parse_warnings`].
    pub fn load_csv(name: impl Into<String>, path: &Path, schema: &Schema) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(File::open(path)?);
        let headers = reader.headers()?.clone();
        let positions = schema
            .columns()
            .iter()
            .map(|spec| {
                headers
                    .iter()
                    .position(|h| h.trim() == spec.name)
                    .ok_or_else(|| Error::Schema(format!("CSV has no column `{}`", spec.name)))
            })
            .collect::<Result<Vec<_>>>()?;

        let mut reals: Vec<Vec<Option<f64>>> = vec![Vec::new(); schema.columns().len()];
        let mut strings: Vec<Vec<Option<String>>> = vec![Vec::new(); schema.columns().len()];
        let mut warnings = 0;
        for record in reader.records() {
            let record = record?;
            for (i, (spec, &pos)) in schema.columns().iter().zip(&positions).enumerate() {
                let field = record.get(pos).unwrap_or("");
                match spec.column_type {
                    ColumnType::Real => {
                        let field = field.trim();
                        let value = if field.is_empty() {
                            None
                        } else {
                            match field.parse::<f64>() {
                                Ok(v) if v.is_finite() => Some(v),
                                _ => {
                                    warnings += 1;
                                    None
                                }
                            }
                        };
                        reals[i].push(value);
                    }
                    ColumnType::String => strings[i].push((!field.is_empty()).then(|| field.to_string())),
                }
            }
        }
        let columns = schema
            .columns()
            .iter()
            .enumerate()
            .map(|(i, spec)| match spec.column_type {
                ColumnType::Real => Column::real(&spec.name, std::mem::take(&mut reals[i])),
                ColumnType::String => Column::string(&spec.name, std::mem::take(&mut strings[i])),
            })
            .collect();
        let mut dataset = Self::new(name, columns)?;
        dataset.parse_warnings = warnings;
        Ok(dataset)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn parse_warnings(&self) -> u64 {
        self.parse_warnings
    }

    pub fn schema(&self) -> Schema {
        Schema::new(self.columns.iter().map(|c| c.spec.clone()).collect()).expect("dataset columns are unique")
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.columns
            .iter()
            .find(|c| c.name() == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn column_position(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c.name() == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    /// Exact min, max, row count and non-null count over raw values.
    pub fn raw_range_stats(&self, column: &str, visibility: Visibility) -> Result<RangeStats> {
        if visibility == Visibility::Private {
            return Err(Error::Access(format!(
                "raw statistics of `{column}` are not available on a private table"
            )));
        }
        let col = self.column(column)?;
        let (min, max) = match &col.data {
            ColumnData::Real(values) => {
                let present = values.iter().copied().filter(|v| !v.is_nan());
                let (min, max) = present.fold((None::<f64>, None::<f64>), |(lo, hi), v| {
                    (Some(lo.map_or(v, |lo| lo.min(v))), Some(hi.map_or(v, |hi| hi.max(v))))
                });
                (min.map(Bound::Real), max.map(Bound::Real))
            }
            ColumnData::String(values) => {
                let present = values.iter().zip(&col.missing).filter(|(_, &m)| !m).map(|(v, _)| v);
                let min = present.clone().min().cloned();
                let max = present.max().cloned();
                (min.map(Bound::String), max.map(Bound::String))
            }
        };
        Ok(RangeStats {
            min,
            max,
            rows: self.rows as u64,
            non_null: col.non_null(),
        })
    }

    /// Exact counts per quantum range, quantizing each row on the fly.
    pub fn quantized_histogram(
        &self,
        column: &str,
        quantization: &Quantization,
        ranges: &[QuantumRange],
    ) -> Result<TrueHistogram> {
        let col = self.column(column)?;
        let locator = Locator::new(ranges, quantization.domain_size())?;
        let mut counts = vec![0u64; ranges.len()];
        let null_count = match (&col.data, quantization) {
            (ColumnData::Real(values), Quantization::Numeric(q)) => {
                scan_fused(values, &FusedBuckets::new(&q.quantizer(), ranges), &mut counts)
            }
            (ColumnData::String(values), Quantization::String(q)) => {
                let indices = strings_quantized(values, &col.missing, q);
                match locator {
                    Locator::Uniform(u) => scan_1d(indices, |i| u.bucket(i), &mut counts),
                    Locator::Search(s) => scan_1d(indices, |i| s.bucket(i), &mut counts),
                }
            }
            _ => return Err(type_mismatch(col)),
        };
        Ok(TrueHistogram { counts, null_count })
    }

    /// 2-D analogue of [`Dataset::quantized_histogram`]; a row is counted only
    /// when both coordinates quantize.
    pub fn quantized_heatmap(
        &self,
        (column_x, quantization_x, ranges_x): (&str, &Quantization, &[QuantumRange]),
        (column_y, quantization_y, ranges_y): (&str, &Quantization, &[QuantumRange]),
    ) -> Result<TrueHeatmap> {
        let x = ColumnQuantizer::new(self.column(column_x)?, quantization_x)?;
        let y = ColumnQuantizer::new(self.column(column_y)?, quantization_y)?;
        let locate_x = Locator::new(ranges_x, quantization_x.domain_size())?;
        let locate_y = Locator::new(ranges_y, quantization_y.domain_size())?;
        let (nx, ny) = (ranges_x.len(), ranges_y.len());
        let mut counts = vec![0u64; nx * ny];
        if let (ColumnQuantizer::Real(xs, qx), ColumnQuantizer::Real(ys, qy)) = (&x, &y) {
            let (fx, fy) = (FusedBuckets::new(qx, ranges_x), FusedBuckets::new(qy, ranges_y));
            let stride = fy.cells();
            let mut tally = vec![0u64; fx.cells() * stride];
            for (&vx, &vy) in xs.iter().zip(ys.iter()) {
                let cell = &mut tally[fx.locate(vx) * stride + fy.locate(vy)];
                *cell = cell.wrapping_add(1);
            }
            for bx in 0..nx {
                counts[bx * ny..(bx + 1) * ny].copy_from_slice(&tally[bx * stride..bx * stride + ny]);
            }
            let null_count = (0..fx.cells())
                .flat_map(|bx| (0..stride).map(move |by| (bx, by)))
                .filter(|&(bx, by)| bx == fx.null || by == fy.null)
                .map(|(bx, by)| tally[bx * stride + by])
                .sum();
            return Ok(TrueHeatmap {
                x_buckets: nx,
                y_buckets: ny,
                counts,
                null_count,
            });
        }
        let null_count = with_locator!(&locate_x, |bx| {
            with_locator!(&locate_y, |by| scan_2d(
                (0..self.rows).map(|row| (x.index(row), y.index(row))),
                &bx,
                &by,
                ny,
                &mut counts
            ))
        });
        Ok(TrueHeatmap {
            x_buckets: nx,
            y_buckets: ny,
            counts,
            null_count,
        })
    }

    /// Rows that are missing or fall outside the quantization, if any.
    pub fn null_count(&self, column: &str, quantization: Option<&Quantization>) -> Result<u64> {
        let col = self.column(column)?;
        match quantization {
            Some(quantization) => {
                let q = ColumnQuantizer::new(col, quantization)?;
                Ok((0..self.rows).filter(|&row| q.index(row).is_none()).count() as u64)
            }
            None => Ok(self.rows as u64 - col.non_null()),
        }
    }

    /// Distinct non-missing raw values.
    pub fn distinct_count(&self, column: &str) -> Result<u64> {
        let col = self.column(column)?;
        let distinct = match &col.data {
            ColumnData::Real(values) => values
                .iter()
                .filter(|v| !v.is_nan())
                .map(|&v| if v == 0.0 { 0u64 } else { v.to_bits() })
                .collect::<HashSet<_>>()
                .len(),
            ColumnData::String(values) => values
                .iter()
                .zip(&col.missing)
                .filter(|(_, &m)| !m)
                .map(|(v, _)| v.as_str())
                .collect::<HashSet<_>>()
                .len(),
        };
        Ok(distinct as u64)
    }

    /// Plain equal-width histogram over raw values in `[l, r]`, no
    /// quantization and no noise. `r` falls into the last bucket.
    pub fn histogram(&self, column: &str, l: f64, r: f64, buckets: usize) -> Result<Vec<u64>> {
        if !(l < r) || buckets == 0 {
            return Err(invalid(format!(
                "histogram needs l < r and at least one bucket, got [{l}, {r}] / {buckets}"
            )));
        }
        let values = match &self.column(column)?.data {
            ColumnData::Real(values) => values,
            ColumnData::String(_) => return Err(invalid(format!("`{column}` is not numeric"))),
        };
        let scale = buckets as f64 / (r - l);
        let last = buckets - 1;
        let mut counts = vec![0u64; buckets];
        for &v in values {
            if v >= l && v <= r {
                counts[(((v - l) * scale) as usize).min(last)] += 1;
            }
        }
        Ok(counts)
    }

    /// Plain equal-width 2-D histogram over raw values.
    pub fn heatmap(&self, x: (&str, f64, f64, usize), y: (&str, f64, f64, usize)) -> Result<Vec<u64>> {
        let raw = |(name, l, r, buckets): (&str, f64, f64, usize)| -> Result<(&[f64], f64, f64, usize)> {
            if !(l < r) || buckets == 0 {
                return Err(invalid("heatmap needs l < r and at least one bucket per axis"));
            }
            match &self.column(name)?.data {
                ColumnData::Real(values) => Ok((values, l, buckets as f64 / (r - l), buckets)),
                ColumnData::String(_) => Err(invalid(format!("`{name}` is not numeric"))),
            }
        };
        let (xs, xl, xscale, nx) = raw(x)?;
        let (ys, yl, yscale, ny) = raw(y)?;
        let (xr, yr) = (x.2, y.2);
        let mut counts = vec![0u64; nx * ny];
        for (&vx, &vy) in xs.iter().zip(ys) {
            if vx >= xl && vx <= xr && vy >= yl && vy <= yr {
                let bx = (((vx - xl) * xscale) as usize).min(nx - 1);
                let by = (((vy - yl) * yscale) as usize).min(ny - 1);
                counts[bx * ny + by] += 1;
            }
        }
        Ok(counts)
    }
}

fn type_mismatch(col: &Column) -> Error {
    invalid(format!("quantization kind does not match the type of `{}`", col.name()))
}

fn strings_quantized<'a>(
    values: &'a [String],
    missing: &'a [bool],
    q: &'a StringQuantization,
) -> impl Iterator<Item = Option<u64>> + 'a {
    values
        .iter()
        .zip(missing)
        .map(move |(v, &m)| if m { None } else { q.index(v) })
}

#[inline]
fn scan_1d(
    indices: impl Iterator<Item = Option<u64>>,
    bucket: impl Fn(u64) -> Option<usize>,
    counts: &mut [u64],
) -> u64 {
    let mut nulls = 0;
    for index in indices {
        match index {
            Some(i) => {
                if let Some(b) = bucket(i) {
                    counts[b] += 1;
                }
            }
            None => nulls += 1,
        }
    }
    nulls
}

#[inline]
fn scan_2d(
    pairs: impl Iterator<Item = (Option<u64>, Option<u64>)>,
    bucket_x: &impl Fn(u64) -> Option<usize>,
    bucket_y: &impl Fn(u64) -> Option<usize>,
    ny: usize,
    counts: &mut [u64],
) -> u64 {
    let mut nulls = 0;
    for pair in pairs {
        match pair {
            (Some(i), Some(j)) => {
                if let (Some(bx), Some(by)) = (bucket_x(i), bucket_y(j)) {
                    counts[bx * ny + by] += 1;
                }
            }
            _ => nulls += 1,
        }
    }
    nulls
}

/// Quantize-then-bucket for a numeric column, done in value space against
/// the representatives of the range boundaries. Holds one edge per range,
/// never one entry per quantum.
struct FusedBuckets {
    qmin: f64,
    qmax: f64,
    first_edge: f64,
    inv_width: f64,
    last: i64,
    /// `-inf`, then the slot boundaries, then `+inf`. Slot `k` is
    /// `[edges[k + 1], edges[k + 2])`; a boundary at the end of the domain
    /// is infinite, so the last quantum also holds `qmax`.
    edges: Vec<f64>,
    /// Tally cell per padded slot: outside, each slot's bucket (outside for
    /// gaps between ranges), outside.
    cells: Vec<usize>,
    /// Slot boundaries drift at most half a slot from equal width, so a
    /// linear guess is off by at most one.
    guess: bool,
    null: usize,
}

impl FusedBuckets {
    /// `ranges` must be ordered, disjoint and inside the domain.
    fn new(q: &NumericQuantizer, ranges: &[QuantumRange]) -> Self {
        let outside = ranges.len();
        let mut points: Vec<u64> = Vec::with_capacity(ranges.len() + 1);
        let mut cells = vec![outside];
        for (b, r) in ranges.iter().enumerate().filter(|(_, r)| !r.is_empty()) {
            match points.last() {
                None => points.push(r.lo),
                Some(&p) if p != r.lo => {
                    cells.push(outside);
                    points.push(r.lo);
                }
                Some(_) => {}
            }
            cells.push(b);
            points.push(r.hi);
        }
        let m = q.domain_size();
        let mut edges = vec![f64::NEG_INFINITY];
        let (mut guess, mut inv_width, mut first_edge) = (false, 0.0, f64::INFINITY);
        if let (Some(&p0), Some(&pn)) = (points.first(), points.last()) {
            let n = (points.len() - 1) as f64;
            let step = (pn - p0) as f64 / n;
            guess = points
                .iter()
                .enumerate()
                .all(|(k, &p)| ((p - p0) as f64 - k as f64 * step).abs() <= 0.5 * step);
            inv_width = n / (q.representative(pn) - q.representative(p0));
            first_edge = q.representative(p0);
            edges.extend(
                points
                    .iter()
                    .map(|&p| if p == m { f64::INFINITY } else { q.representative(p) }),
            );
        } else {
            edges.push(f64::INFINITY);
        }
        edges.push(f64::INFINITY);
        cells.push(outside);
        Self {
            qmin: q.qmin,
            qmax: q.qmax,
            first_edge,
            inv_width,
            last: edges.len() as i64 - 4,
            edges,
            cells,
            guess,
            null: outside + 1,
        }
    }

    /// Cells in a tally: one per bucket, then outside, then null.
    fn cells(&self) -> usize {
        self.null + 1
    }

    #[inline]
    fn locate(&self, v: f64) -> usize {
        let padded = if self.guess {
            let k = (((v - self.first_edge) * self.inv_width) as i64).clamp(0, self.last.max(0)) as usize;
            let (below, above) = (v < self.edges[k + 1], v >= self.edges[k + 2]);
            k + 1 + above as usize - below as usize
        } else {
            self.edges.partition_point(|&e| e <= v).max(1) - 1
        };
        if v >= self.qmin && v <= self.qmax {
            self.cells[padded]
        } else {
            self.null
        }
    }
}

/// Fills `counts` per bucket and returns the null count.
fn scan_fused(values: &[f64], fused: &FusedBuckets, counts: &mut [u64]) -> u64 {
    let mut tally = vec![0u64; fused.cells()];
    for &v in values {
        let cell = &mut tally[fused.locate(v)];
        *cell = cell.wrapping_add(1);
    }
    counts.copy_from_slice(&tally[..counts.len()]);
    tally[fused.null]
}

enum ColumnQuantizer<'a> {
    Real(&'a [f64], NumericQuantizer),
    String(&'a [String], &'a [bool], &'a StringQuantization),
}

impl<'a> ColumnQuantizer<'a> {
    fn new(col: &'a Column, q: &'a Quantization) -> Result<Self> {
        match (&col.data, q) {
            (ColumnData::Real(values), Quantization::Numeric(q)) => Ok(Self::Real(values, q.quantizer())),
            (ColumnData::String(values), Quantization::String(q)) => Ok(Self::String(values, &col.missing, q)),
            _ => Err(type_mismatch(col)),
        }
    }

    #[inline]
    fn index(&self, row: usize) -> Option<u64> {
        match self {
            Self::Real(values, q) => q.index(values[row]),
            Self::String(values, missing, q) => {
                if missing[row] {
                    None
                } else {
                    q.index(&values[row])
                }
            }
        }
    }
}

/// Maps a quantum index to the bucket whose range holds it.
enum Locator<'a> {
    Uniform(UniformLocator),
    Search(SearchLocator<'a>),
}

impl<'a> Locator<'a> {
    fn new(ranges: &'a [QuantumRange], domain_size: u64) -> Result<Self> {
        for (i, r) in ranges.iter().enumerate() {
            if r.lo > r.hi || r.hi > domain_size {
                return Err(invalid(format!("range {r} exceeds domain of size {domain_size}")));
            }
            if i > 0 && ranges[i - 1].hi > r.lo {
                return Err(invalid("quantum ranges must be disjoint and ordered"));
            }
        }
        let width = ranges.first().map_or(0, QuantumRange::len);
        let contiguous = ranges.windows(2).all(|w| w[0].hi == w[1].lo);
        if width > 0 && contiguous && ranges.iter().all(|r| r.len() == width) {
            Ok(Locator::Uniform(UniformLocator::new(
                ranges[0].lo,
                width,
                ranges.len() as u64,
            )))
        } else {
            Ok(Locator::Search(SearchLocator { ranges }))
        }
    }
}

struct UniformLocator {
    lo: u64,
    width: u64,
    inv_width: f64,
    span: u64,
}

impl UniformLocator {
    fn new(lo: u64, width: u64, buckets: u64) -> Self {
        Self {
            lo,
            width,
            inv_width: 1.0 / width as f64,
            span: width * buckets,
        }
    }

    #[inline]
    fn bucket(&self, index: u64) -> Option<usize> {
        let offset = index.wrapping_sub(self.lo);
        if offset >= self.span {
            return None;
        }
        // Float reciprocal instead of a hardware divide, then fix rounding.
        let mut b = (offset as i64 as f64 * self.inv_width) as i64 as u64;
        if b * self.width > offset {
            b -= 1;
        } else if (b + 1) * self.width <= offset {
            b += 1;
        }
        Some(b as usize)
    }
}

struct SearchLocator<'a> {
    ranges: &'a [QuantumRange],
}

impl SearchLocator<'_> {
    #[inline]
    fn bucket(&self, index: u64) -> Option<usize> {
        let b = self.ranges.partition_point(|r| r.hi <= index);
        (b < self.ranges.len() && self.ranges[b].lo <= index).then_some(b)
    }
}

#[cfg(test)]
mod tests {
    use std::io::Write;

    use proptest::prelude::*;

    use super::*;
    use crate::policy::{NumericQuantization, StringQuantization};

    fn unit(qmax: f64) -> Quantization {
        Quantization::Numeric(NumericQuantization::new(0.0, qmax, 1.0).unwrap())
    }

    fn r(lo: u64, hi: u64) -> QuantumRange {
        QuantumRange { lo, hi }
    }

    fn sample() -> Dataset {
        Dataset::new(
            "s",
            vec![
                Column::real("x", [Some(1.0), Some(2.0), Some(2.0), Some(5.0), None]),
                Column::string("c", [Some("a"), Some("a"), Some("b"), None, Some("c")]),
            ],
        )
        .unwrap()
    }

    fn csv_file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_csv_reads_typed_columns() {
        let f = csv_file("x,name\n1.5,a\n,b\n3,\n");
        let schema = Schema::from_json(r#"[{"name":"x","type":"real"},{"name":"name","type":"string"}]"#).unwrap();
        let ds = Dataset::load_csv("t", f.path(), &schema).unwrap();
        assert_eq!(ds.rows(), 3);
        let x = ds.column("x").unwrap();
        assert!(!x.is_missing(0) && x.is_missing(1) && !x.is_missing(2));
        assert!(ds.column("name").unwrap().is_missing(2));
        assert_eq!(ds.parse_warnings(), 0);
    }

    #[test]
    fn load_csv_counts_parse_failures_as_missing() {
        let f = csv_file("x\nabc\n");
        let schema = Schema::from_json(r#"[{"name":"x","type":"real"}]"#).unwrap();
        let ds = Dataset::load_csv("t", f.path(), &schema).unwrap();
        assert_eq!(ds.rows(), 1);
        assert!(ds.column("x").unwrap().is_missing(0));
        assert_eq!(ds.parse_warnings(), 1);
    }

    #[test]
    fn load_csv_errors() {
        let schema = Schema::from_json(r#"[{"name":"y","type":"real"}]"#).unwrap();
        let f = csv_file("x\n1\n");
        assert!(matches!(
            Dataset::load_csv("t", f.path(), &schema),
            Err(Error::Schema(_))
        ));
        assert!(matches!(
            Dataset::load_csv("t", Path::new("/nonexistent/file.csv"), &schema),
            Err(Error::Io(_))
        ));
    }

    #[test]
    fn range_stats_examples() {
        let ds = sample();
        let stats = ds.raw_range_stats("x", Visibility::Public).unwrap();
        assert_eq!(
            stats,
            RangeStats {
                min: Some(Bound::Real(1.0)),
                max: Some(Bound::Real(5.0)),
                rows: 5,
                non_null: 4
            }
        );

        let empty = Dataset::new("e", vec![Column::real("x", [None, None])]).unwrap();
        let stats = empty.raw_range_stats("x", Visibility::Public).unwrap();
        assert_eq!((stats.min, stats.max, stats.rows, stats.non_null), (None, None, 2, 0));

        let single = Dataset::new("one", vec![Column::real("x", [Some(7.0)])]).unwrap();
        let stats = single.raw_range_stats("x", Visibility::Public).unwrap();
        assert_eq!(stats.min, Some(Bound::Real(7.0)));
        assert_eq!(stats.max, Some(Bound::Real(7.0)));

        let strings = ds.raw_range_stats("c", Visibility::Public).unwrap();
        assert_eq!(strings.min, Some(Bound::String("a".into())));
        assert_eq!(strings.max, Some(Bound::String("c".into())));

        assert!(matches!(
            ds.raw_range_stats("x", Visibility::Private),
            Err(Error::Access(_))
        ));
    }

    #[test]
    fn quantized_histogram_examples() {
        let ds = sample();
        let hist = ds.quantized_histogram("x", &unit(8.0), &[r(0, 4), r(4, 8)]).unwrap();
        assert_eq!(
            hist,
            TrueHistogram {
                counts: vec![3, 1],
                null_count: 1
            }
        );

        let empty = Dataset::new("e", vec![Column::real("x", Vec::<Option<f64>>::new())]).unwrap();
        let hist = empty.quantized_histogram("x", &unit(8.0), &[r(0, 4), r(4, 8)]).unwrap();
        assert_eq!(hist.counts, vec![0, 0]);

        let full = ds.quantized_histogram("x", &unit(8.0), &[r(0, 8)]).unwrap();
        assert_eq!(full.counts, vec![4]);
    }

    #[test]
    fn quantized_histogram_rejects_bad_ranges() {
        let ds = sample();
        assert!(ds.quantized_histogram("x", &unit(8.0), &[r(0, 9)]).is_err());
        assert!(ds.quantized_histogram("x", &unit(8.0), &[r(0, 4), r(3, 8)]).is_err());
        assert!(ds.quantized_histogram("nope", &unit(8.0), &[r(0, 4)]).is_err());
        let strings = Quantization::String(StringQuantization::new(["a"], true).unwrap());
        assert!(ds.quantized_histogram("x", &strings, &[r(0, 1)]).is_err());
    }

    #[test]
    fn string_histogram() {
        let ds = sample();
        let q = Quantization::String(StringQuantization::new(["a", "b"], false).unwrap());
        let hist = ds.quantized_histogram("c", &q, &[r(0, 1), r(1, 2)]).unwrap();
        // "c" lies above the last boundary and include_upper is off.
        assert_eq!(
            hist,
            TrueHistogram {
                counts: vec![2, 1],
                null_count: 2
            }
        );
    }

    #[test]
    fn heatmap_examples() {
        let ds = Dataset::new(
            "h",
            vec![
                Column::real("x", [Some(1.0), Some(1.0)]),
                Column::real("y", [Some(1.0), Some(5.0)]),
            ],
        )
        .unwrap();
        let q = unit(8.0);
        let split = [r(0, 4), r(4, 8)];
        let map = ds.quantized_heatmap(("x", &q, &split), ("y", &q, &split)).unwrap();
        assert_eq!(map.counts, vec![1, 1, 0, 0]);
        assert_eq!(map.get(0, 1), 1);

        let whole = ds
            .quantized_heatmap(("x", &q, &[r(0, 8)]), ("y", &q, &[r(0, 8)]))
            .unwrap();
        assert_eq!(whole.counts.iter().sum::<u64>(), map.counts.iter().sum::<u64>());

        let empty = Dataset::new(
            "e",
            vec![
                Column::real("x", Vec::<Option<f64>>::new()),
                Column::real("y", Vec::<Option<f64>>::new()),
            ],
        )
        .unwrap();
        let map = empty.quantized_heatmap(("x", &q, &split), ("y", &q, &split)).unwrap();
        assert_eq!(map.counts, vec![0; 4]);
    }

    #[test]
    fn null_and_distinct_counts() {
        let ds = Dataset::new("d", vec![Column::string("s", [Some("a"), Some("a"), Some("b"), None])]).unwrap();
        let q = Quantization::String(StringQuantization::new(["a", "b"], true).unwrap());
        assert_eq!(ds.distinct_count("s").unwrap(), 2);
        assert_eq!(ds.null_count("s", Some(&q)).unwrap(), 1);

        let empty = Dataset::new("e", vec![Column::string("s", Vec::<Option<String>>::new())]).unwrap();
        assert_eq!(
            (
                empty.distinct_count("s").unwrap(),
                empty.null_count("s", Some(&q)).unwrap()
            ),
            (0, 0)
        );

        let far = Dataset::new("f", vec![Column::real("x", [Some(50.0), Some(-1.0)])]).unwrap();
        assert_eq!(far.null_count("x", Some(&unit(8.0))).unwrap(), 2);
        assert_eq!(far.distinct_count("x").unwrap(), 2);
        assert_eq!(sample().null_count("x", None).unwrap(), 1);
    }

    #[test]
    fn plain_histogram_includes_right_edge() {
        let ds = Dataset::new(
            "p",
            vec![Column::real("x", [Some(0.0), Some(4.9), Some(10.0), Some(11.0)])],
        )
        .unwrap();
        assert_eq!(ds.histogram("x", 0.0, 10.0, 2).unwrap(), vec![2, 1]);
        assert!(ds.histogram("x", 1.0, 1.0, 2).is_err());
    }

    fn naive_histogram(values: &[Option<f64>], q: &NumericQuantization, ranges: &[QuantumRange]) -> (Vec<u64>, u64) {
        let quantized: Vec<Option<u64>> = values.iter().map(|&v| q.quantize(v)).collect();
        let mut counts = vec![0; ranges.len()];
        let mut nulls = 0;
        for idx in quantized {
            match idx {
                None => nulls += 1,
                Some(i) => {
                    if let Some(b) = ranges.iter().position(|r| r.contains(i)) {
                        counts[b] += 1;
                    }
                }
            }
        }
        (counts, nulls)
    }

    proptest! {
        #[test]
        fn matches_naive_oracle(
            values in proptest::collection::vec(proptest::option::weighted(0.9, -10.0f64..300.0), 0..2000),
            m in 1u64..256,
            cuts in proptest::collection::vec(0u64..256, 0..10),
        ) {
            let q = NumericQuantization::new(0.0, m as f64, 1.0).unwrap();
            let mut edges: Vec<u64> = cuts.into_iter().map(|c| c % (m + 1)).collect();
            edges.push(0);
            edges.push(m);
            edges.sort_unstable();
            edges.dedup();
            let ranges: Vec<QuantumRange> = edges.windows(2).map(|w| r(w[0], w[1])).collect();
            let ds = Dataset::new("p", vec![Column::real("x", values.clone())]).unwrap();
            let hist = ds.quantized_histogram("x", &Quantization::Numeric(q.clone()), &ranges).unwrap();
            let (counts, nulls) = naive_histogram(&values, &q, &ranges);
            prop_assert_eq!(&hist.counts, &counts);
            prop_assert_eq!(hist.null_count, nulls);
            // Full-domain cover partitions the rows.
            prop_assert_eq!(hist.counts.iter().sum::<u64>() + hist.null_count, values.len() as u64);
        }

        #[test]
        fn fused_buckets_match_brute_force(
            qmin in -50.0f64..50.0,
            span in 0.5f64..40.0,
            g in 0.05f64..3.0,
            lo_frac in 0.0f64..1.0,
            width in 1u64..9,
            buckets in 1u64..12,
            uneven in proptest::collection::vec((0u64..40, any::<bool>()), 0..10),
            values in proptest::collection::vec(-60.0f64..100.0, 0..300),
            picks in proptest::collection::vec(0usize..400, 0..40),
        ) {
            let nq = NumericQuantization::new(qmin, qmin + span, g).unwrap();
            let m = nq.domain_size();
            let ranges: Vec<QuantumRange> = if uneven.is_empty() {
                let lo = ((m as f64 * lo_frac) as u64).min(m - 1);
                let buckets = buckets.min((m - lo) / width);
                prop_assume!(buckets > 0);
                (0..buckets).map(|k| r(lo + k * width, lo + (k + 1) * width)).collect()
            } else {
                // Cut points with optional gaps before each range.
                let mut cuts: Vec<u64> = uneven.iter().map(|(c, _)| c % (m + 1)).collect();
                cuts.sort_unstable();
                cuts.dedup();
                let mut out = Vec::new();
                let mut skip = uneven.iter().map(|(_, gap)| *gap);
                for w in cuts.windows(2) {
                    if !skip.next().unwrap_or(false) {
                        out.push(r(w[0], w[1]));
                    }
                }
                out
            };
            // Exercise exact representatives and both domain ends.
            let mut values: Vec<Option<f64>> = values.into_iter().map(Some).collect();
            values.extend(picks.iter().map(|&i| Some(nq.representative(i as u64 % (m + 1)))));
            values.extend([Some(nq.qmin), Some(nq.qmax), Some(f64::NAN), None]);
            let brute = |v: Option<f64>| -> Option<u64> {
                let v = v.filter(|v| *v >= nq.qmin && *v <= nq.qmax)?;
                (0..m).rev().find(|&i| nq.representative(i) <= v)
            };
            let mut counts = vec![0u64; ranges.len()];
            let mut nulls = 0;
            for &v in &values {
                match brute(v) {
                    None => nulls += 1,
                    Some(i) => if let Some(b) = ranges.iter().position(|r| r.contains(i)) { counts[b] += 1 },
                }
            }
            let q = Quantization::Numeric(nq.clone());
            let ds = Dataset::new("p", vec![Column::real("x", values.clone()), Column::real("y", values.iter().rev().copied())]).unwrap();
            let hist = ds.quantized_histogram("x", &q, &ranges).unwrap();
            prop_assert_eq!(&hist.counts, &counts);
            prop_assert_eq!(hist.null_count, nulls);

            let map = ds.quantized_heatmap(("x", &q, &ranges), ("y", &q, &ranges)).unwrap();
            let n = ranges.len();
            let mut cells = vec![0u64; n * n];
            let mut cell_nulls = 0;
            for (&vx, &vy) in values.iter().zip(values.iter().rev()) {
                match (brute(vx), brute(vy)) {
                    (Some(i), Some(j)) => {
                        let bx = ranges.iter().position(|r| r.contains(i));
                        let by = ranges.iter().position(|r| r.contains(j));
                        if let (Some(bx), Some(by)) = (bx, by) {
                            cells[bx * n + by] += 1;
                        }
                    }
                    _ => cell_nulls += 1,
                }
            }
            prop_assert_eq!(&map.counts, &cells);
            prop_assert_eq!(map.null_count, cell_nulls);
        }

        #[test]
        fn splitting_a_bucket_preserves_its_count(
            values in proptest::collection::vec(0.0f64..64.0, 0..500),
            lo in 0u64..64, len in 1u64..64, cut in 0.0f64..1.0,
        ) {
            let hi = (lo + len).min(64);
            prop_assume!(lo < hi);
            let mid = lo + ((hi - lo) as f64 * cut) as u64;
            let ds = Dataset::new("p", vec![Column::real("x", values.into_iter().map(Some))]).unwrap();
            let q = unit(64.0);
            let whole = ds.quantized_histogram("x", &q, &[r(lo, hi)]).unwrap();
            let split = ds.quantized_histogram("x", &q, &[r(lo, mid), r(mid, hi)]).unwrap();
            prop_assert_eq!(whole.counts[0], split.counts[0] + split.counts[1]);
        }
    }
}
