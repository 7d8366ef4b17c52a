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

//! SQL text for running exact-count queries on an unmodified relational
//! database: range statistics, distinct values, bucketed histograms and
//! quantized views. Generation is schema-blind and performs no I/O.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{invalid, Result};
use crate::policy::{NumericQuantization, Quantization, StringQuantization, TablePolicy};

/// Alias attached to derived tables, which MySQL requires.
pub const DERIVED_ALIAS: &str = "bucketed";

pub trait Dialect: Send + Sync {
    fn name(&self) -> &'static str;

    /// Wraps a column reference so comparisons and ordering are bytewise.
    fn bytewise(&self, column: &str) -> String;

    fn quote_identifier(&self, ident: &str) -> String;

    fn is_reserved(&self, ident: &str) -> bool;

    fn derived_table_alias(&self) -> Option<&'static str>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct MySql;

const MYSQL_RESERVED: &[&str] = &[
    "add",
    "all",
    "alter",
    "and",
    "as",
    "asc",
    "between",
    "binary",
    "by",
    "case",
    "cast",
    "check",
    "column",
    "create",
    "cross",
    "current_date",
    "database",
    "default",
    "delete",
    "desc",
    "distinct",
    "div",
    "drop",
    "else",
    "exists",
    "false",
    "from",
    "group",
    "having",
    "if",
    "in",
    "index",
    "inner",
    "insert",
    "interval",
    "into",
    "is",
    "join",
    "key",
    "left",
    "like",
    "limit",
    "mod",
    "not",
    "null",
    "on",
    "or",
    "order",
    "outer",
    "primary",
    "range",
    "references",
    "right",
    "select",
    "set",
    "table",
    "then",
    "to",
    "true",
    "union",
    "unique",
    "unsigned",
    "update",
    "use",
    "using",
    "values",
    "when",
    "where",
    "with",
];

impl Dialect for MySql {
    fn name(&self) -> &'static str {
        "mysql"
    }

    fn bytewise(&self, column: &str) -> String {
        format!("BINARY {column}")
    }

    fn quote_identifier(&self, ident: &str) -> String {
        format!("`{ident}`")
    }

    fn is_reserved(&self, ident: &str) -> bool {
        let lower = ident.to_ascii_lowercase();
        MYSQL_RESERVED.binary_search(&lower.as_str()).is_ok()
    }

    fn derived_table_alias(&self) -> Option<&'static str> {
        Some(DERIVED_ALIAS)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResultKind {
    Integer,
    Real,
    String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultColumn {
    pub name: String,
    pub kind: ResultKind,
}

impl ResultColumn {
    fn new(name: impl Into<String>, kind: ResultKind) -> Self {
        Self {
            name: name.into(),
            kind,
        }
    }
}

/// Generated statement plus its expected result columns and the static
/// parameters baked into the text.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqlQueryPlan {
    pub sql: String,
    pub columns: Vec<ResultColumn>,
    pub params: BTreeMap<String, Value>,
}

pub struct SqlGenerator<D: Dialect = MySql> {
    dialect: D,
    materialize_views: bool,
}

impl Default for SqlGenerator<MySql> {
    fn default() -> Self {
        Self::new(MySql)
    }
}

fn is_plain_identifier(ident: &str) -> bool {
    let mut bytes = ident.bytes();
    matches!(bytes.next(), Some(b'A'..=b'Z' | b'a'..=b'z' | b'_'))
        && bytes.all(|c| c.is_ascii_alphanumeric() || c == b'_')
}

/// Numbers go through `f64` Display; negatives get parentheses so that
/// `C - -5` can never turn into a `--` comment.
fn number(v: f64) -> Result<String> {
    if !v.is_finite() {
        return Err(invalid(format!("non-finite literal {v}")));
    }
    let v = if v == 0.0 { 0.0 } else { v };
    Ok(if v < 0.0 { format!("({v})") } else { format!("{v}") })
}

/// Quoted for MySQL's default mode, where backslash is an escape.
pub fn string_literal(s: &str) -> String {
    format!("'{}'", s.replace('\\', "\\\\").replace('\'', "''"))
}

fn check_sorted(boundaries: &[String]) -> Result<()> {
    if boundaries.is_empty() {
        return Err(invalid("at least one boundary is required"));
    }
    if let Some(w) = boundaries.windows(2).find(|w| w[0].as_bytes() >= w[1].as_bytes()) {
        return Err(invalid(format!("boundaries not strictly increasing at {:?}", w[1])));
    }
    Ok(())
}

impl<D: Dialect> SqlGenerator<D> {
    pub fn new(dialect: D) -> Self {
        Self {
            dialect,
            materialize_views: false,
        }
    }

    /// Emit `CREATE TABLE` instead of `CREATE view` for quantized views.
    pub fn materialized(mut self, yes: bool) -> Self {
        self.materialize_views = yes;
        self
    }

    pub fn dialect(&self) -> &D {
        &self.dialect
    }

    pub fn identifier(&self, ident: &str) -> Result<String> {
        if !is_plain_identifier(ident) {
            return Err(invalid(format!("invalid SQL identifier {ident:?}")));
        }
        Ok(if self.dialect.is_reserved(ident) {
            self.dialect.quote_identifier(ident)
        } else {
            ident.to_string()
        })
    }

    fn close_derived(&self) -> String {
        match self.dialect.derived_table_alias() {
            Some(alias) => format!(") AS {alias}"),
            None => ")".to_string(),
        }
    }

    fn create_view(&self, view: &str) -> String {
        if self.materialize_views {
            format!("CREATE TABLE {view} as")
        } else {
            format!("CREATE view {view} as")
        }
    }

    pub fn range_query(&self, table: &str, column: &str) -> Result<SqlQueryPlan> {
        let (t, c) = (self.identifier(table)?, self.identifier(column)?);
        Ok(SqlQueryPlan {
            sql: format!("SELECT min({c}), max({c}), count(*), count({c})\nFROM {t}"),
            columns: vec![
                ResultColumn::new("min", ResultKind::Real),
                ResultColumn::new("max", ResultKind::Real),
                ResultColumn::new("rows", ResultKind::Integer),
                ResultColumn::new("non_null", ResultKind::Integer),
            ],
            params: BTreeMap::from([("table".into(), json!(table)), ("column".into(), json!(column))]),
        })
    }

    pub fn distinct_values_query(&self, table: &str, column: &str) -> Result<SqlQueryPlan> {
        let (t, c) = (self.identifier(table)?, self.identifier(column)?);
        let bc = self.dialect.bytewise(&c);
        Ok(SqlQueryPlan {
            sql: format!("SELECT DISTINCT {bc} AS {c} FROM {t}\nORDER BY {bc}"),
            columns: vec![ResultColumn::new(column, ResultKind::String)],
            params: BTreeMap::from([("table".into(), json!(table)), ("column".into(), json!(column))]),
        })
    }

    /// Equal-width numeric histogram over `[l, r]` with `buckets` buckets.
    /// Rows equal to `r` land in an extra bucket numbered `buckets`, which
    /// callers fold into the last one.
    pub fn histogram_query(&self, source: &str, column: &str, l: f64, r: f64, buckets: u32) -> Result<SqlQueryPlan> {
        if !(l < r) {
            return Err(invalid(format!("histogram range requires l < r, got [{l}, {r}]")));
        }
        if buckets == 0 {
            return Err(invalid("at least one bucket is required"));
        }
        let (s, c) = (self.identifier(source)?, self.identifier(column)?);
        let scale = buckets as f64 / (r - l);
        let (ls, rs, ss) = (number(l)?, number(r)?, number(scale)?);
        let sql = format!(
            "SELECT bucket, COUNT(bucket) FROM (\n  SELECT CAST(FLOOR(({c} - {ls}) * {ss})\n     AS UNSIGNED) AS bucket\n  FROM {s}\n  WHERE {c} between {ls} AND {rs}{}\nGROUP BY bucket",
            self.close_derived()
        );
        Ok(SqlQueryPlan {
            sql,
            columns: vec![
                ResultColumn::new("bucket", ResultKind::Integer),
                ResultColumn::new("count", ResultKind::Integer),
            ],
            params: BTreeMap::from([
                ("source".into(), json!(source)),
                ("column".into(), json!(column)),
                ("l".into(), json!(l)),
                ("r".into(), json!(r)),
                ("buckets".into(), json!(buckets)),
                ("scale".into(), json!(scale)),
            ]),
        })
    }

    /// Balanced `IF` search tree mapping a value to the index of its bucket
    /// `[h_i, h_{i+1})`; the last bucket is closed. One boundary yields `0`.
    pub fn string_bucket_expr(&self, column: &str, boundaries: &[String]) -> Result<String> {
        check_sorted(boundaries)?;
        let c = self.dialect.bytewise(&self.identifier(column)?);
        let leaves = (boundaries.len() - 1).max(1);
        let mut out = String::new();
        if_tree(&mut out, &c, 0, leaves, &|i| boundaries[i].as_str(), &|i, out| {
            write!(out, "{i}").unwrap()
        });
        Ok(out)
    }

    /// Maps each value to the greatest boundary below it, labels drawn from
    /// every boundary but the last.
    fn string_label_expr(&self, c: &str, labels: &[String]) -> String {
        let mut out = String::new();
        if_tree(&mut out, c, 0, labels.len(), &|i| labels[i].as_str(), &|i, out| {
            out.push_str(&string_literal(&labels[i]))
        });
        out
    }

    pub fn string_histogram_query(&self, source: &str, column: &str, boundaries: &[String]) -> Result<SqlQueryPlan> {
        let expr = self.string_bucket_expr(column, boundaries)?;
        let (s, c) = (self.identifier(source)?, self.identifier(column)?);
        let bc = self.dialect.bytewise(&c);
        let (first, last) = (&boundaries[0], &boundaries[boundaries.len() - 1]);
        let sql = format!(
            "SELECT bucket, count(bucket)\nFROM (\n  SELECT ({expr}) AS bucket\n  FROM {s}\n  WHERE {bc} BETWEEN {} AND {}{}\nGROUP BY bucket",
            string_literal(first),
            string_literal(last),
            self.close_derived()
        );
        Ok(SqlQueryPlan {
            sql,
            columns: vec![
                ResultColumn::new("bucket", ResultKind::Integer),
                ResultColumn::new("count", ResultKind::Integer),
            ],
            params: BTreeMap::from([
                ("source".into(), json!(source)),
                ("column".into(), json!(column)),
                ("boundaries".into(), json!(boundaries)),
            ]),
        })
    }

    pub fn quantized_view_numeric(
        &self,
        table: &str,
        view: &str,
        column: &str,
        qmin: f64,
        qmax: f64,
        g: f64,
    ) -> Result<SqlQueryPlan> {
        NumericQuantization::new(qmin, qmax, g)?;
        let (t, v, c) = (
            self.identifier(table)?,
            self.identifier(view)?,
            self.identifier(column)?,
        );
        let (lo, hi, gs) = (number(qmin)?, number(qmax)?, number(g)?);
        let sql = format!(
            "{}\n  (SELECT {lo} + FLOOR(({c}-{lo})/{gs})*{gs} AS {c}\n   FROM {t} WHERE {c} between {lo} AND {hi})",
            self.create_view(&v)
        );
        Ok(SqlQueryPlan {
            sql,
            columns: vec![ResultColumn::new(column, ResultKind::Real)],
            params: BTreeMap::from([
                ("table".into(), json!(table)),
                ("view".into(), json!(view)),
                ("column".into(), json!(column)),
                ("qmin".into(), json!(qmin)),
                ("qmax".into(), json!(qmax)),
                ("granularity".into(), json!(g)),
            ]),
        })
    }

    /// Single-column string view over `[first, last]`, labelling each value
    /// with the greatest boundary below it (the last boundary only bounds).
    pub fn quantized_view_string(
        &self,
        table: &str,
        view: &str,
        column: &str,
        boundaries: &[String],
    ) -> Result<SqlQueryPlan> {
        check_sorted(boundaries)?;
        let (t, v, c) = (
            self.identifier(table)?,
            self.identifier(view)?,
            self.identifier(column)?,
        );
        let bc = self.dialect.bytewise(&c);
        let labels = &boundaries[..(boundaries.len() - 1).max(1)];
        let sql = format!(
            "{}\n  (SELECT {} AS {c}\n   FROM {t}\n   WHERE {bc} BETWEEN {} AND {})",
            self.create_view(&v),
            self.string_label_expr(&bc, labels),
            string_literal(&boundaries[0]),
            string_literal(&boundaries[boundaries.len() - 1]),
        );
        Ok(SqlQueryPlan {
            sql,
            columns: vec![ResultColumn::new(column, ResultKind::String)],
            params: BTreeMap::from([
                ("table".into(), json!(table)),
                ("view".into(), json!(view)),
                ("column".into(), json!(column)),
                ("boundaries".into(), json!(boundaries)),
            ]),
        })
    }

    /// One view quantizing every policy column exactly as the in-memory
    /// engine does. Out-of-range values become NULL per column instead of
    /// dropping the row, so multi-column queries stay consistent.
    pub fn policy_view(&self, view: &str, policy: &TablePolicy) -> Result<SqlQueryPlan> {
        let t = self.identifier(policy.table())?;
        let v = self.identifier(view)?;
        let mut selects = Vec::new();
        let mut columns = Vec::new();
        for (name, column) in policy.columns() {
            let Some(q) = &column.quantization else { continue };
            let c = self.identifier(name)?;
            let expr = match q {
                Quantization::Numeric(n) => self.numeric_policy_expr(&c, n)?,
                Quantization::String(s) => self.string_policy_expr(&c, s)?,
            };
            selects.push(format!("{expr} AS {c}"));
            let kind = match q {
                Quantization::Numeric(_) => ResultKind::Real,
                Quantization::String(_) => ResultKind::String,
            };
            columns.push(ResultColumn::new(name.clone(), kind));
        }
        if selects.is_empty() {
            return Err(invalid("policy has no quantized columns"));
        }
        let sql = format!(
            "{}\n  (SELECT {}\n   FROM {t})",
            self.create_view(&v),
            selects.join(",\n          ")
        );
        Ok(SqlQueryPlan {
            sql,
            columns,
            params: BTreeMap::from([
                ("table".into(), json!(policy.table())),
                ("view".into(), json!(view)),
                ("policy_id".into(), json!(policy.snapshot_id())),
            ]),
        })
    }

    fn numeric_policy_expr(&self, c: &str, q: &NumericQuantization) -> Result<String> {
        let last = q.representative(q.domain_size() - 1);
        let (lo, hi, g, top) = (number(q.qmin)?, number(q.qmax)?, number(q.granularity)?, number(last)?);
        Ok(format!(
            "IF({c} between {lo} AND {hi}, LEAST({lo} + FLOOR(({c}-{lo})/{g})*{g}, {top}), NULL)"
        ))
    }

    fn string_policy_expr(&self, c: &str, q: &StringQuantization) -> Result<String> {
        check_sorted(&q.boundaries)?;
        let bc = self.dialect.bytewise(c);
        let first = string_literal(&q.boundaries[0]);
        let last = string_literal(&q.boundaries[q.boundaries.len() - 1]);
        let guard = if q.include_upper {
            format!("{bc} >= {first}")
        } else {
            format!("{bc} BETWEEN {first} AND {last}")
        };
        Ok(format!(
            "IF({guard}, {}, NULL)",
            self.string_label_expr(&bc, &q.boundaries)
        ))
    }
}

/// Writes a binary search over leaves `[lo, hi)`; leaf `i` is taken when
/// the value is at least `split(i)` and below `split(i + 1)`.
fn if_tree<'s>(
    out: &mut String,
    column: &str,
    lo: usize,
    hi: usize,
    split: &dyn Fn(usize) -> &'s str,
    leaf: &dyn Fn(usize, &mut String),
) {
    let n = hi - lo;
    if n <= 1 {
        leaf(lo, out);
        return;
    }
    let mid = lo + n / 2;
    write!(out, "IF({column}<{},", string_literal(split(mid))).unwrap();
    if_tree(out, column, lo, mid, split, leaf);
    out.push(',');
    if_tree(out, column, mid, hi, split, leaf);
    out.push(')');
}

/// Comparison form for generated SQL: drops `--` comments, bytewise
/// markers and the derived-table alias, collapses whitespace, and removes
/// spaces next to parentheses and commas.
pub fn normalize_sql(text: &str) -> String {
    let mut stripped = String::with_capacity(text.len());
    for line in text.lines() {
        let code = line.find("--").map_or(line, |i| &line[..i]);
        stripped.push_str(code);
        stripped.push(' ');
    }
    let stripped = stripped
        .replace("BINARY ", "")
        .replace(&format!(" AS {DERIVED_ALIAS}"), "");
    let collapsed = stripped.split_whitespace().collect::<Vec<_>>().join(" ");
    let mut out = String::with_capacity(collapsed.len());
    let chars: Vec<char> = collapsed.chars().collect();
    for (i, &ch) in chars.iter().enumerate() {
        if ch == ' ' {
            let prev = i.checked_sub(1).map(|j| chars[j]);
            let next = chars.get(i + 1).copied();
            let sticky = |c: Option<char>| matches!(c, Some('(' | ')' | ','));
            if sticky(prev) || sticky(next) {
                continue;
            }
        }
        out.push(ch);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn gen() -> SqlGenerator {
        SqlGenerator::default()
    }

    #[test]
    fn reserved_words_are_mysql_sorted() {
        assert!(MYSQL_RESERVED.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn identifiers() {
        let g = gen();
        assert_eq!(g.identifier("C").unwrap(), "C");
        assert_eq!(g.identifier("_a9").unwrap(), "_a9");
        assert_eq!(g.identifier("order").unwrap(), "`order`");
        for bad in ["", "9a", "a-b", "a b", "a`b", "é"] {
            assert!(g.identifier(bad).is_err(), "{bad}");
        }
        let plan = g.range_query("select", "C").unwrap();
        assert_eq!(plan.sql, "SELECT min(C), max(C), count(*), count(C)\nFROM `select`");
    }

    #[test]
    fn literals() {
        assert_eq!(string_literal("O'Hare"), "'O''Hare'");
        assert_eq!(string_literal(r"a\b'"), r"'a\\b'''");
        assert_eq!(number(-5.0).unwrap(), "(-5)");
        assert_eq!(number(-0.0).unwrap(), "0");
        assert_eq!(number(0.25).unwrap(), "0.25");
        assert!(number(f64::NAN).is_err());
    }

    #[test]
    fn histogram_scale_is_static() {
        let plan = gen().histogram_query("t", "C", 0.0, 10.0, 5).unwrap();
        assert!(plan.sql.contains("FLOOR((C - 0) * 0.5)"));
        assert_eq!(plan.params["scale"], json!(0.5));
        assert!(gen()
            .histogram_query("t", "C", 0.0, 10.0, 1)
            .unwrap()
            .sql
            .contains("* 0.1)"));
        assert!(gen().histogram_query("t", "C", 1.0, 1.0, 3).is_err());
        assert!(gen().histogram_query("t", "C", 0.0, 1.0, 0).is_err());
    }

    #[test]
    fn negative_bounds_never_form_comments() {
        let plan = gen().histogram_query("t", "C", -5.0, 5.0, 2).unwrap();
        assert!(!plan.sql.contains("--"));
        assert!(plan.sql.contains("(C - (-5))"));
        let view = gen().quantized_view_numeric("t", "QV", "C", -10.0, 10.0, 2.0).unwrap();
        assert!(view.sql.contains("(-10) + FLOOR((C-(-10))/2)*2"));
    }

    #[test]
    fn materialized_flag() {
        let g = gen().materialized(true);
        let plan = g.quantized_view_numeric("t", "QV", "C", 0.0, 100.0, 100.0).unwrap();
        assert!(plan.sql.starts_with("CREATE TABLE QV as"));
    }

    #[test]
    fn string_expr_edges() {
        let g = gen();
        assert_eq!(g.string_bucket_expr("C", &strings(&["A"])).unwrap(), "0");
        assert_eq!(g.string_bucket_expr("C", &strings(&["A", "B"])).unwrap(), "0");
        assert!(g.string_bucket_expr("C", &strings(&["B", "A"])).is_err());
        assert!(g.string_bucket_expr("C", &[]).is_err());
        let view = g.quantized_view_string("t", "QV", "C", &strings(&["A", "M"])).unwrap();
        assert!(view.sql.contains("SELECT 'A' AS C"));
    }

    #[test]
    fn normalization() {
        assert_eq!(
            normalize_sql("SELECT a ,  b\n FROM ( x ) -- note\n"),
            "SELECT a,b FROM(x)"
        );
        assert_eq!(normalize_sql(") AS bucketed\nGROUP BY b"), ")GROUP BY b");
    }

    // Interpreter for the generated IF trees.
    struct Interp<'a> {
        s: &'a [u8],
        pos: usize,
    }

    #[derive(Debug, PartialEq)]
    enum Val {
        Int(u64),
        Str(String),
    }

    impl<'a> Interp<'a> {
        fn eat(&mut self, tok: &str) -> bool {
            while self.s.get(self.pos) == Some(&b' ') {
                self.pos += 1;
            }
            if self.s[self.pos..].starts_with(tok.as_bytes()) {
                self.pos += tok.len();
                true
            } else {
                false
            }
        }

        fn literal(&mut self) -> String {
            assert!(self.eat("'"));
            let mut out = Vec::new();
            loop {
                let c = self.s[self.pos];
                self.pos += 1;
                if c == b'\\' {
                    out.push(self.s[self.pos]);
                    self.pos += 1;
                } else if c == b'\'' {
                    if self.s.get(self.pos) == Some(&b'\'') {
                        out.push(b'\'');
                        self.pos += 1;
                    } else {
                        return String::from_utf8(out).unwrap();
                    }
                } else {
                    out.push(c);
                }
            }
        }

        fn eval(&mut self, value: &str) -> Val {
            if self.eat("IF(") {
                assert!(self.eat("BINARY C<"));
                let pivot = self.literal();
                assert!(self.eat(","));
                let yes = self.eval(value);
                assert!(self.eat(","));
                let no = self.eval(value);
                assert!(self.eat(")"));
                if value.as_bytes() < pivot.as_bytes() {
                    yes
                } else {
                    no
                }
            } else if self.s[self.pos] == b'\'' {
                Val::Str(self.literal())
            } else {
                let start = self.pos;
                while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                Val::Int(std::str::from_utf8(&self.s[start..self.pos]).unwrap().parse().unwrap())
            }
        }
    }

    fn eval(expr: &str, value: &str) -> Val {
        Interp {
            s: expr.as_bytes(),
            pos: 0,
        }
        .eval(value)
    }

    fn tree_depth(expr: &str) -> usize {
        let mut depth: usize = 0;
        let mut best = 0;
        let mut i = 0;
        let b = expr.as_bytes();
        while i < b.len() {
            if b[i..].starts_with(b"IF(") {
                depth += 1;
                best = best.max(depth);
                i += 3;
                continue;
            }
            if b[i] == b')' {
                depth -= 1;
            }
            i += 1;
        }
        best
    }

    #[test]
    fn eight_boundaries_give_depth_three() {
        let b = strings(&["a", "c", "e", "g", "i", "k", "m", "o", "q"]);
        let expr = gen().string_bucket_expr("C", &b).unwrap();
        assert_eq!(tree_depth(&expr), 3);
        let probes = ["a", "b", "c", "f", "h", "j", "l", "n", "p", "q"];
        let want = [0, 0, 1, 2, 3, 4, 5, 6, 7, 7];
        for (probe, want) in probes.iter().zip(want) {
            assert_eq!(eval(&expr, probe), Val::Int(want), "{probe}");
        }
    }

    fn sorted_boundaries() -> impl Strategy<Value = Vec<String>> {
        proptest::collection::btree_set("[a-d'\\\\][a-d'\\\\]{0,2}", 1..12).prop_map(|s| s.into_iter().collect())
    }

    proptest! {
        #[test]
        fn bucket_tree_matches_partition(b in sorted_boundaries(), probes in proptest::collection::vec("[a-e'\\\\]{0,3}", 40)) {
            let expr = gen().string_bucket_expr("C", &b).unwrap();
            let buckets = (b.len() - 1).max(1);
            prop_assert!(tree_depth(&expr) <= (usize::BITS - (buckets - 1).leading_zeros()) as usize);
            for p in probes {
                if p.as_bytes() < b[0].as_bytes() || p.as_bytes() > b[b.len() - 1].as_bytes() {
                    continue;
                }
                let want = (b.partition_point(|x| x.as_bytes() <= p.as_bytes()) - 1).min(buckets - 1);
                prop_assert_eq!(eval(&expr, &p), Val::Int(want as u64));
            }
        }

        #[test]
        fn view_labels_match_quantizer(b in sorted_boundaries(), probes in proptest::collection::vec("[a-e'\\\\]{0,3}", 40)) {
            prop_assume!(b.len() >= 2);
            let q = StringQuantization::new(b.clone(), true).unwrap();
            let g = gen();
            let labels = &b[..b.len() - 1];
            let expr = g.string_label_expr("BINARY C", labels);
            for p in probes {
                if p.as_bytes() < b[0].as_bytes() || p.as_bytes() >= b[b.len() - 1].as_bytes() {
                    continue;
                }
                let i = q.index(&p).unwrap() as usize;
                prop_assert_eq!(eval(&expr, &p), Val::Str(b[i].clone()));
            }
        }

        #[test]
        fn policy_string_expr_matches_quantizer(b in sorted_boundaries(), upper: bool, probes in proptest::collection::vec("[a-e'\\\\]{0,3}", 40)) {
            let q = StringQuantization::new(b.clone(), upper).unwrap();
            let expr = gen().string_label_expr("BINARY C", &b);
            for p in probes {
                let Some(i) = q.index(&p) else { continue };
                prop_assert_eq!(eval(&expr, &p), Val::Str(b[i as usize].clone()));
            }
        }
    }
}
