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

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use vsyn_core::{BucketBoundaries, HistogramRequest};
use vsyn_service::{Role, Service, ServiceConfig};

const PEOPLE: &str = "age,city\n34,Boston\n29,Austin\n,Denver\n51,Boston\n42,\n";
const SCHEMA: &str = r#"[{"name": "age", "type": "real"}, {"name": "city", "type": "string"}]"#;

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("people.csv"), PEOPLE).unwrap();
        std::fs::write(dir.path().join("schema.json"), SCHEMA).unwrap();
        Self { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn vsyn(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_vsyn"))
            .current_dir(self.dir.path())
            .env_remove("VSYN_KEY_FILE")
            .env_remove("VSYN_DATA_DIR")
            .args(args)
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.vsyn(args);
        assert!(
            out.status.success(),
            "vsyn {args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }

    fn json(&self, args: &[&str]) -> Value {
        let mut args = args.to_vec();
        args.push("--json");
        serde_json::from_str(&self.ok(&args)).unwrap()
    }

    fn ingest(&self) {
        self.ok(&[
            "ingest",
            "--table",
            "people",
            "--csv",
            "people.csv",
            "--schema",
            "schema.json",
        ]);
    }

    fn write_policy(&self, epsilon: f64) -> PathBuf {
        let policy = json!({
            "table": "people",
            "columns": {
                "age": {"type": "real", "quantization": {"kind": "numeric", "qmin": 0.0, "qmax": 100.0, "granularity": 1.0}},
                "city": {"type": "string", "quantization": {"kind": "string", "boundaries": ["A", "C", "E", "Z"]}}
            },
            "column_sets": [
                {"id": 1, "columns": ["age"], "epsilon": epsilon},
                {"id": 2, "columns": ["age", "city"], "epsilon": epsilon}
            ],
            "count_releases": {"age": {"null_epsilon": epsilon}}
        });
        let path = self.path("policy.json");
        std::fs::write(&path, policy.to_string()).unwrap();
        path
    }
}

fn counts(v: &Value, field: &str) -> Vec<f64> {
    v[field]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["count"].as_f64().unwrap())
        .collect()
}

#[test]
fn ingest_prints_a_summary() {
    let f = Fixture::new();
    let text = f.ok(&[
        "ingest",
        "--table",
        "people",
        "--csv",
        "people.csv",
        "--schema",
        "schema.json",
    ]);
    assert!(text.contains("table people: 5 rows"), "{text}");
    assert!(text.contains("age") && text.contains("4 non-null"), "{text}");
    assert!(f.path("data/keys").exists());
    assert!(f.path("data/people/policy.json").exists());
    let summary = f.json(&[
        "ingest",
        "--table",
        "people",
        "--csv",
        "people.csv",
        "--schema",
        "schema.json",
    ]);
    assert_eq!(summary["rows"], 5);
    assert_eq!(summary["columns"][1]["type"], "string");
}

#[test]
fn huge_epsilon_query_matches_truth() {
    let f = Fixture::new();
    f.ingest();
    let policy = f.write_policy(1e12);
    f.ok(&["policy", "set", "people", policy.to_str().unwrap()]);
    let hist = f.json(&[
        "query",
        "histogram",
        "people",
        "age",
        "--buckets",
        "0,30,40,100",
        "--cdf",
    ]);
    let rounded: Vec<f64> = counts(&hist, "buckets").iter().map(|c| c.round()).collect();
    assert_eq!(rounded, [1.0, 1.0, 2.0]);
    let cdf: Vec<f64> = counts(&hist, "cdf").iter().map(|c| c.round()).collect();
    assert_eq!(cdf, [1.0, 2.0, 4.0]);

    let map = f.json(&[
        "query",
        "heatmap",
        "people",
        "--x",
        "city",
        "--x-buckets",
        "A,C,Z",
        "--y",
        "age",
        "--y-buckets",
        "0,40,100",
    ]);
    let cells: Vec<Vec<f64>> = map["cells"]
        .as_array()
        .unwrap()
        .iter()
        .map(|row| {
            row.as_array()
                .unwrap()
                .iter()
                .map(|e| e["count"].as_f64().unwrap().round())
                .collect()
        })
        .collect();
    assert_eq!(cells, [vec![2.0, 1.0], vec![0.0, 0.0]]);

    let nulls = f.json(&["query", "counts", "people", "age"]);
    assert_eq!(nulls["null_count"]["count"].as_f64().unwrap().round(), 1.0);

    let table = f.ok(&["query", "histogram", "people", "age", "--buckets", "0,30,40,100"]);
    assert!(table.contains("[0, 30)") && table.contains("policy"), "{table}");
}

#[test]
fn publish_latches_the_policy() {
    let f = Fixture::new();
    f.ingest();
    let policy = f.write_policy(1.0);
    let policy = policy.to_str().unwrap();
    f.ok(&["policy", "set", "people", policy]);
    let status = f.json(&["policy", "publish", "people"]);
    assert_eq!(status["published"], true);
    assert_eq!(f.json(&["policy", "publish", "people"])["action"], "unchanged");

    let out = f.vsyn(&["policy", "set", "people", policy]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("published"));
    let out = f.vsyn(&[
        "ingest",
        "--table",
        "people",
        "--csv",
        "people.csv",
        "--schema",
        "schema.json",
    ]);
    assert!(!out.status.success());
}

#[test]
fn validate_lists_problems() {
    let f = Fixture::new();
    f.ingest();
    let bad = json!({
        "table": "people",
        "columns": {"age": {"type": "string"}},
        "column_sets": [{"id": 1, "columns": ["age"], "epsilon": -1.0}]
    });
    let path = f.path("bad.json");
    std::fs::write(&path, bad.to_string()).unwrap();
    let out = f.vsyn(&["policy", "validate", "people", path.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("invalid"), "{err}");
    f.ok(&["policy", "validate", "people"]);
}

#[test]
fn cli_and_service_give_identical_answers() {
    let f = Fixture::new();
    f.ingest();
    let policy = f.write_policy(0.5);
    f.ok(&["policy", "set", "people", policy.to_str().unwrap()]);
    f.ok(&["policy", "publish", "people"]);
    let cli = f.json(&[
        "query",
        "histogram",
        "people",
        "age",
        "--buckets",
        "0,25,50,75,100",
        "--cdf",
    ]);

    let config = ServiceConfig {
        listen: "127.0.0.1:0".parse().unwrap(),
        data_dir: f.path("data"),
        key_file: f.path("data/keys"),
        curator_token: "curator-token".into(),
        analyst_token: "analyst-token".into(),
        ci_samples: vsyn_core::confidence::DEFAULT_MC_SAMPLES,
    };
    let service = Service::open(&config).unwrap();
    let request =
        HistogramRequest::histogram("age", BucketBoundaries::Numeric(vec![0.0, 25.0, 50.0, 75.0, 100.0])).with_cdf();
    let served = service.histogram("people", Role::Analyst, &request).unwrap();
    assert_eq!(cli, serde_json::to_value(&served).unwrap());
}

#[test]
fn key_file_env_overrides_the_default() {
    let f = Fixture::new();
    let keys = f.path("elsewhere.keys");
    let out = Command::new(env!("CARGO_BIN_EXE_vsyn"))
        .current_dir(f.dir.path())
        .env("VSYN_KEY_FILE", &keys)
        .args([
            "ingest",
            "--table",
            "people",
            "--csv",
            "people.csv",
            "--schema",
            "schema.json",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(keys.exists());
    assert!(!f.path("data/keys").exists());
}

fn accuracy(f: &Fixture, extra: &[&str]) -> Value {
    let mut args = vec![
        "bench",
        "accuracy",
        "--rows",
        "2000",
        "--domain",
        "128",
        "--queries",
        "200",
    ];
    args.extend_from_slice(extra);
    f.json(&args)
}

#[test]
fn accuracy_bench_is_reproducible() {
    let f = Fixture::new();
    let a = accuracy(&f, &["--seed", "7"]);
    let b = accuracy(&f, &["--seed", "7"]);
    let strip = |mut v: Value| {
        for r in v.as_array_mut().unwrap() {
            r.as_object_mut().unwrap().remove("elapsed_ms");
        }
        v
    };
    assert_eq!(strip(a.clone()), strip(b));
    assert_eq!(a[0]["mechanism"], "hierarchical");
    assert_eq!(a[1]["mechanism"], "identity");
    assert_eq!(a[0]["workload"]["seed"], 7);
    assert_ne!(strip(a), strip(accuracy(&f, &["--seed", "8"])));

    let exact = accuracy(&f, &["--epsilon", "1e12", "--dims", "2"]);
    for r in exact.as_array().unwrap() {
        assert!(r["mean_l1"].as_f64().unwrap() < 1e-6, "{r}");
    }
    let out = f.vsyn(&["bench", "accuracy", "--mechanism", "wavelet"]);
    assert!(!out.status.success());
}

#[test]
fn accuracy_bench_on_a_stored_table() {
    let f = Fixture::new();
    f.ingest();
    let policy = f.write_policy(1e12);
    f.ok(&["policy", "set", "people", policy.to_str().unwrap()]);
    let r = f.json(&[
        "bench",
        "accuracy",
        "--table",
        "people",
        "--columns",
        "age",
        "--queries",
        "50",
    ]);
    assert_eq!(r[0]["workload"]["domain_sizes"][0], 100);
    assert!(r[0]["mean_l1"].as_f64().unwrap() < 1e-6);
    let noisy = f.json(&[
        "bench",
        "accuracy",
        "--table",
        "people",
        "--columns",
        "age",
        "--queries",
        "50",
        "--epsilon",
        "0.1",
    ]);
    assert!(noisy[0]["mean_l1"].as_f64().unwrap() > 1.0);
}

#[test]
fn perf_bench_reports_ratios() {
    let f = Fixture::new();
    let r = f.json(&[
        "bench",
        "perf",
        "--rows",
        "1e3",
        "--heatmap",
        "--runs",
        "2",
        "--warmup",
        "1",
    ]);
    assert_eq!(r["rows"], 1000);
    let names: Vec<&str> = r["entries"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["histogram:x", "histogram:y", "heatmap:x,y"]);
    assert!(r["geometric_mean"].as_f64().unwrap() > 0.0);
    let text = f.ok(&["bench", "perf", "--rows", "1000", "--runs", "1", "--warmup", "0"]);
    assert!(text.contains("geometric mean ratio"), "{text}");
}

#[test]
fn errors_exit_nonzero() {
    let f = Fixture::new();
    let out = f.vsyn(&["query", "histogram", "missing", "age", "--buckets", "0,1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown table"));
    f.ingest();
    let out = f.vsyn(&["query", "histogram", "people", "age", "--buckets", "0,x"]);
    assert!(!out.status.success());
    let out = f.vsyn(&["query", "counts", "people", "age"]);
    assert!(!out.status.success());
    assert!(Path::new(&f.path("data/people")).is_dir());
}
