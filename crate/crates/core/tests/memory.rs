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

use std::alloc::{GlobalAlloc, Layout, System};
use std::sync::atomic::{AtomicUsize, Ordering};

use vsyn_core::{
    BucketBoundaries, CiCache, Column, ColumnPolicy, ColumnSetPolicy, ColumnType, Dataset, HistogramRequest,
    NumericQuantization, Quantization, QueryContext, SecretKey, TablePolicy,
};

struct Counting;

static LIVE: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let live = LIVE.fetch_add(layout.size(), Ordering::SeqCst) + layout.size();
        PEAK.fetch_max(live, Ordering::SeqCst);
        unsafe { System.alloc(layout) }
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        LIVE.fetch_sub(layout.size(), Ordering::SeqCst);
        unsafe { System.dealloc(ptr, layout) }
    }
}

#[global_allocator]
static ALLOCATOR: Counting = Counting;

fn policy(granularity: f64) -> TablePolicy {
    let mut p = TablePolicy::new("t");
    p.set_column(
        "x",
        ColumnPolicy {
            column_type: ColumnType::Real,
            quantization: Some(Quantization::Numeric(
                NumericQuantization::new(0.0, 1000.0, granularity).unwrap(),
            )),
        },
    )
    .unwrap();
    p.add_column_set(ColumnSetPolicy::new(1, ["x"], 1.0)).unwrap();
    p
}

/// Peak heap growth while answering one histogram with its CDF.
fn query_peak(ds: &Dataset, p: &TablePolicy, key: &SecretKey, ci: &CiCache, request: &HistogramRequest) -> usize {
    let ctx = QueryContext::new(ds, p, key, ci);
    // Warm the confidence-interval cache so only the query itself is measured.
    ctx.histogram(request).unwrap();
    let base = LIVE.load(Ordering::SeqCst);
    PEAK.store(base, Ordering::SeqCst);
    let resp = ctx.histogram(request).unwrap();
    let peak = PEAK.load(Ordering::SeqCst) - base;
    drop(resp);
    peak
}

#[test]
fn query_memory_does_not_depend_on_domain_size() {
    let values = (0..200_000).map(|i| Some((i * 7919 % 1_000_000) as f64 / 1000.0));
    let ds = Dataset::new("t", vec![Column::real("x", values)]).unwrap();
    let key = SecretKey::from_bytes([3; 32]);
    let ci = CiCache::new(2000);
    let edges: Vec<f64> = (0..=40).map(|i| i as f64 * 25.0).collect();
    let request = HistogramRequest::histogram("x", BucketBoundaries::Numeric(edges)).with_cdf();

    let coarse = policy(1.0);
    let fine = policy(0.001);
    assert_eq!(coarse.quantization("x").unwrap().domain_size(), 1_000);
    assert_eq!(fine.quantization("x").unwrap().domain_size(), 1_000_000);

    let small = query_peak(&ds, &coarse, &key, &ci, &request);
    let large = query_peak(&ds, &fine, &key, &ci, &request);
    assert!(large < small + 16 * 1024, "m=1e3: {small} B, m=1e6: {large} B");
    assert!(large < 256 * 1024, "{large} B");
}
