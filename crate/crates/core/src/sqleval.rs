//! Text-to-SQL evaluation: exact-set-match (EM), execution accuracy (EX) and
//! per-hardness breakdowns over a suite of predictions.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::db::{Database, ExecLimits, SqlQuery, Value};
use crate::error::{Error, Result};
use crate::sql::{classify_hardness, exact_set_match_with_schema, parse_sql, ClauseMatch, Hardness, Schema};
use crate::tabular::profile_tables;

/// Relative tolerance for numeric cells.
pub const NUMERIC_TOLERANCE: f64 = 1e-6;

/// Limits used when executing gold and predicted queries. The row limit is
/// high so that result comparison sees complete results.
pub const EVAL_LIMITS: ExecLimits = ExecLimits {
    timeout: Duration::from_secs(30),
    row_limit: 1_000_000,
};

pub fn values_equal(a: &Value, b: &Value) -> bool {
    fn num(v: &Value) -> Option<f64> {
        match v {
            Value::Integer(i) => Some(*i as f64),
            Value::Real(f) => Some(*f),
            _ => None,
        }
    }
    match (a, b) {
        (Value::Integer(x), Value::Integer(y)) => x == y,
        (Value::Null, Value::Null) => true,
        (Value::Text(x), Value::Text(y)) => x == y,
        (Value::Blob(x), Value::Blob(y)) => x == y,
        _ => match (num(a), num(b)) {
            (Some(x), Some(y)) => x == y || (x - y).abs() <= NUMERIC_TOLERANCE * x.abs().max(y.abs()),
            _ => false,
        },
    }
}

fn rows_equal(a: &[Value], b: &[Value]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| values_equal(x, y))
}

/// Total order used to line rows up before the pairwise check.
fn cmp_value(a: &Value, b: &Value) -> Ordering {
    fn rank(v: &Value) -> u8 {
        match v {
            Value::Null => 0,
            Value::Integer(_) | Value::Real(_) => 1,
            Value::Text(_) => 2,
            Value::Blob(_) => 3,
        }
    }
    match (a, b) {
        (Value::Integer(x), Value::Integer(y)) => x.cmp(y),
        (Value::Text(x), Value::Text(y)) => x.cmp(y),
        (Value::Blob(x), Value::Blob(y)) => x.cmp(y),
        _ if rank(a) == 1 && rank(b) == 1 => {
            let f = |v: &Value| match v {
                Value::Integer(i) => *i as f64,
                Value::Real(r) => *r,
                _ => unreachable!(),
            };
            f(a).total_cmp(&f(b))
        }
        _ => rank(a).cmp(&rank(b)),
    }
}

fn cmp_row(a: &[Value], b: &[Value]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| cmp_value(x, y))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| a.len().cmp(&b.len()))
}

/// Compares two result sets as ordered sequences or as multisets of rows.
pub fn results_match(pred: &[Vec<Value>], gold: &[Vec<Value>], ordered: bool) -> bool {
    if pred.len() != gold.len() {
        return false;
    }
    if ordered {
        return pred.iter().zip(gold).all(|(p, g)| rows_equal(p, g));
    }
    let mut p: Vec<&Vec<Value>> = pred.iter().collect();
    let mut g: Vec<&Vec<Value>> = gold.iter().collect();
    p.sort_by(|a, b| cmp_row(a, b));
    g.sort_by(|a, b| cmp_row(a, b));
    if p.iter().zip(&g).all(|(a, b)| rows_equal(a, b)) {
        return true;
    }
    // Tolerance can reorder near-equal numbers; fall back to matching.
    let mut used = vec![false; g.len()];
    p.iter().all(|row| {
        match (0..g.len()).find(|&j| !used[j] && rows_equal(row, g[j])) {
            Some(j) => {
                used[j] = true;
                true
            }
            None => false,
        }
    })
}

fn gold_is_ordered(gold: &str) -> bool {
    match parse_sql(gold) {
        Ok(q) => !q.order_by.is_empty(),
        Err(_) => gold.to_ascii_lowercase().split_whitespace().collect::<Vec<_>>().windows(2).any(|w| w == ["order", "by"]),
    }
}

/// Runs both queries read-only and compares their results. A failing
/// prediction scores `false`; a failing gold query is an
/// [`Error::EvalError`].
pub fn execution_accuracy(pred: &str, gold: &str, db: &Database) -> Result<bool> {
    let gold_rows = SqlQuery::new(gold)
        .and_then(|q| db.execute(&q, EVAL_LIMITS))
        .map_err(|e| Error::EvalError(format!("gold query failed: {e}")))?;
    let pred_rows = match SqlQuery::new(pred).and_then(|q| db.execute(&q, EVAL_LIMITS)) {
        Ok(r) => r,
        Err(_) => return Ok(false),
    };
    Ok(results_match(&pred_rows.rows, &gold_rows.rows, gold_is_ordered(gold)))
}

/// Lowercased table → column map of a database.
pub fn schema_of(db: &Database) -> Result<Schema> {
    Ok(profile_tables(db, 0)?
        .into_iter()
        .map(|t| {
            let cols = t.columns.iter().map(|c| c.name.to_lowercase()).collect();
            (t.name.to_lowercase(), cols)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalPair {
    #[serde(default)]
    pub question: Option<String>,
    pub pred: String,
    pub gold: String,
    pub db_id: String,
}

/// Finds `<dir>/<id>/<id>.sqlite`, `<dir>/<id>.sqlite` or `<dir>/<id>.db`.
pub fn resolve_db(db_dir: &Path, db_id: &str) -> Option<PathBuf> {
    [
        db_dir.join(db_id).join(format!("{db_id}.sqlite")),
        db_dir.join(format!("{db_id}.sqlite")),
        db_dir.join(format!("{db_id}.db")),
    ]
    .into_iter()
    .find(|p| p.is_file())
}

fn split_sql_line(line: &str) -> (String, Option<String>) {
    match line.rsplit_once('\t') {
        Some((sql, db)) if !db.trim().is_empty() => (sql.trim().to_string(), Some(db.trim().to_string())),
        Some((sql, _)) => (sql.trim().to_string(), None),
        None => (line.trim().to_string(), None),
    }
}

/// Pairs a gold file (`SQL<TAB>db_id` per line) with a prediction file (one
/// SQL per line, db_id optional) line by line.
pub fn read_pairs(gold_path: &Path, pred_path: &Path) -> Result<Vec<EvalPair>> {
    let gold = std::fs::read_to_string(gold_path).map_err(|e| Error::io(gold_path, e))?;
    let pred = std::fs::read_to_string(pred_path).map_err(|e| Error::io(pred_path, e))?;
    pair_lines(&gold, &pred)
}

pub fn pair_lines(gold: &str, pred: &str) -> Result<Vec<EvalPair>> {
    let gold: Vec<&str> = gold.lines().collect();
    let pred: Vec<&str> = pred.lines().collect();
    if gold.len() != pred.len() {
        return Err(Error::InvalidInput(format!(
            "gold has {} lines but pred has {}",
            gold.len(),
            pred.len()
        )));
    }
    gold.iter()
        .zip(&pred)
        .enumerate()
        .map(|(i, (g, p))| {
            let (gold, db) = split_sql_line(g);
            let db_id = db.ok_or_else(|| Error::InvalidInput(format!("gold line {}: missing db_id", i + 1)))?;
            if gold.is_empty() {
                return Err(Error::InvalidInput(format!("gold line {}: empty query", i + 1)));
            }
            let (pred, _) = split_sql_line(p);
            Ok(EvalPair {
                question: None,
                pred,
                gold,
                db_id,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItemResult {
    pub index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub question: Option<String>,
    pub db_id: String,
    pub pred: String,
    pub gold: String,
    /// Hardness of the gold query; absent when it does not parse.
    pub hardness: Option<Hardness>,
    pub em: bool,
    pub ex: bool,
    pub clauses: Option<ClauseMatch>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Accuracy {
    pub count: usize,
    pub em: f64,
    pub ex: f64,
}

impl Accuracy {
    fn of<'a>(items: impl Iterator<Item = &'a ItemResult>) -> Self {
        let (mut n, mut em, mut ex) = (0usize, 0usize, 0usize);
        for it in items {
            n += 1;
            em += usize::from(it.em);
            ex += usize::from(it.ex);
        }
        if n == 0 {
            return Accuracy::default();
        }
        Accuracy {
            count: n,
            em: em as f64 / n as f64,
            ex: ex as f64 / n as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SqlSummary {
    pub overall: Accuracy,
    pub by_hardness: BTreeMap<Hardness, Accuracy>,
    pub errors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SqlEvalReport {
    pub items: Vec<ItemResult>,
    pub summary: SqlSummary,
}

impl SqlEvalReport {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for item in &self.items {
            out.push_str(&serde_json::to_string(item).expect("serializable"));
            out.push('\n');
        }
        out.push_str(&serde_json::json!({ "summary": self.summary }).to_string());
        out.push('\n');
        out
    }

    /// EM and EX per hardness level and overall.
    pub fn summary_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<8}  {:>6}  {:>6}  {:>6}", "level", "count", "EM", "EX");
        let row = |out: &mut String, name: &str, a: &Accuracy| {
            let _ = writeln!(out, "{:<8}  {:>6}  {:>6.3}  {:>6.3}", name, a.count, a.em, a.ex);
        };
        for h in Hardness::ALL {
            row(&mut out, h.as_str(), &self.summary.by_hardness[&h]);
        }
        row(&mut out, "all", &self.summary.overall);
        if self.summary.errors > 0 {
            let _ = writeln!(out, "{} item(s) recorded errors", self.summary.errors);
        }
        out
    }
}

fn evaluate_item(index: usize, pair: &EvalPair, db_dir: &Path) -> ItemResult {
    let mut item = ItemResult {
        index,
        question: pair.question.clone(),
        db_id: pair.db_id.clone(),
        pred: pair.pred.clone(),
        gold: pair.gold.clone(),
        hardness: parse_sql(&pair.gold).ok().map(|q| classify_hardness(&q)),
        em: false,
        ex: false,
        clauses: None,
        error: None,
    };
    let db = match resolve_db(db_dir, &pair.db_id) {
        Some(path) => Database::open(&path),
        None => Err(Error::DbUnreadable {
            path: db_dir.join(&pair.db_id),
            reason: "no database file for this db_id".into(),
        }),
    };
    let db = match db {
        Ok(db) => db,
        Err(e) => {
            item.error = Some(e.to_string());
            return item;
        }
    };
    let schema = schema_of(&db).unwrap_or_default();
    let em = exact_set_match_with_schema(&pair.pred, &pair.gold, &schema);
    item.em = em.matched;
    item.clauses = em.clauses;
    let mut errors: Vec<String> = em.reason.into_iter().collect();
    match execution_accuracy(&pair.pred, &pair.gold, &db) {
        Ok(ex) => item.ex = ex,
        Err(e) => errors.push(e.to_string()),
    }
    if !errors.is_empty() {
        item.error = Some(errors.join("; "));
    }
    item
}

/// Scores every pair. Per-item failures are recorded in the item and never
/// stop the suite. `jobs` = 0 uses one worker per core.
pub fn evaluate_suite(pairs: &[EvalPair], db_dir: &Path, jobs: usize) -> Result<SqlEvalReport> {
    if pairs.is_empty() {
        return Err(Error::InvalidInput("no query pairs to evaluate".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let items: Vec<ItemResult> = pool.install(|| {
        pairs
            .par_iter()
            .enumerate()
            .map(|(i, p)| evaluate_item(i, p, db_dir))
            .collect()
    });
    let by_hardness = Hardness::ALL
        .iter()
        .map(|&h| (h, Accuracy::of(items.iter().filter(|it| it.hardness == Some(h)))))
        .collect();
    let summary = SqlSummary {
        overall: Accuracy::of(items.iter()),
        by_hardness,
        errors: items.iter().filter(|it| it.error.is_some()).count(),
    };
    Ok(SqlEvalReport { items, summary })
}
