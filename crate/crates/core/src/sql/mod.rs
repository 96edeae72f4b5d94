//! SQL clause-set normal form for exact-set-match scoring.
//!
//! A query is parsed into [`ClauseSets`]: every clause becomes a sorted
//! multiset of normalized terms (`ORDER BY` stays an ordered list), with
//! identifiers lowercased, table aliases replaced by table names and every
//! literal replaced by a single placeholder. Two queries exact-set-match when
//! their clause sets are equal, so `SELECT a, b` matches `SELECT b, a` and
//! `age > 20` matches `age > 30`.
//!
//! The grammar is the `SELECT` subset used by text-to-SQL benchmarks: joins,
//! nested subqueries, `UNION`/`INTERSECT`/`EXCEPT`, aggregation, `GROUP BY`,
//! `HAVING`, `ORDER BY`, `LIMIT`. No window functions, `CASE`, or recursive
//! CTEs.

mod hardness;
mod lexer;
mod normalize;
mod parser;
mod render;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

pub use hardness::{classify_hardness, ComponentCounts, Hardness};

/// Table name → column names, all lowercase. Lets the parser qualify bare
/// column names with the one table in scope that owns them.
pub type Schema = BTreeMap<String, BTreeSet<String>>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("parse error at byte {offset}: expected {}, found {found}", expected.join(" | "))]
pub struct ParseError {
    pub offset: usize,
    pub expected: Vec<String>,
    pub found: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AggFunc {
    Count,
    Sum,
    Avg,
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Concat,
}

/// A normalized scalar expression.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Expr {
    /// `table.column`, bare `column`, `*` or `table.*`.
    Column(String),
    /// Any literal.
    Value,
    Agg {
        func: AggFunc,
        distinct: bool,
        arg: Box<Expr>,
    },
    Func {
        name: String,
        args: Vec<Expr>,
    },
    Binary {
        op: ArithOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Neg(Box<Expr>),
    Subquery(Box<ClauseSets>),
}

impl Expr {
    pub fn has_agg(&self) -> bool {
        match self {
            Expr::Agg { .. } => true,
            Expr::Column(_) | Expr::Value | Expr::Subquery(_) => false,
            Expr::Func { args, .. } => args.iter().any(Expr::has_agg),
            Expr::Binary { lhs, rhs, .. } => lhs.has_agg() || rhs.has_agg(),
            Expr::Neg(e) => e.has_agg(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum CmpOp {
    Eq,
    /// `!=` and `<>`.
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
    Between,
    In,
    Like,
    Is,
    Exists,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Predicate {
    pub negated: bool,
    pub op: CmpOp,
    pub lhs: Expr,
    pub rhs: Vec<Expr>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Connector {
    And,
    Or,
}

/// A flattened boolean condition: the multiset of its predicates and the
/// multiset of `AND`/`OR` connectives between them.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Condition {
    pub predicates: Vec<Predicate>,
    pub connectors: Vec<Connector>,
}

impl Condition {
    pub fn is_empty(&self) -> bool {
        self.predicates.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum TableTerm {
    Table(String),
    Subquery(Box<ClauseSets>),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct FromClause {
    pub tables: Vec<TableTerm>,
    /// `ON` predicates of every join.
    pub joins: Vec<Predicate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Asc,
    Desc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SetOp {
    Union,
    UnionAll,
    Intersect,
    Except,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct SetOperation {
    pub op: SetOp,
    pub rhs: Box<ClauseSets>,
}

/// Clause-wise normal form of one `SELECT` (plus any set-operation chain).
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ClauseSets {
    pub distinct: bool,
    pub select: Vec<Expr>,
    pub from: FromClause,
    #[serde(rename = "where")]
    pub where_: Condition,
    pub group_by: Vec<Expr>,
    pub having: Condition,
    pub order_by: Vec<(Expr, Direction)>,
    pub limit: bool,
    pub set_op: Option<SetOperation>,
}

impl ClauseSets {
    /// Subqueries used as predicate operands in `WHERE` and `HAVING`, in
    /// clause order.
    pub fn nested(&self) -> Vec<&ClauseSets> {
        fn collect<'a>(e: &'a Expr, out: &mut Vec<&'a ClauseSets>) {
            match e {
                Expr::Subquery(q) => out.push(q),
                Expr::Agg { arg, .. } | Expr::Neg(arg) => collect(arg, out),
                Expr::Func { args, .. } => args.iter().for_each(|a| collect(a, out)),
                Expr::Binary { lhs, rhs, .. } => {
                    collect(lhs, out);
                    collect(rhs, out);
                }
                Expr::Column(_) | Expr::Value => {}
            }
        }
        let mut out = Vec::new();
        for p in self.where_.predicates.iter().chain(&self.having.predicates) {
            collect(&p.lhs, &mut out);
            p.rhs.iter().for_each(|e| collect(e, &mut out));
        }
        out
    }

    /// Renders the normal form back to SQL; parsing the result yields the
    /// same clause sets.
    pub fn to_sql(&self) -> String {
        render::render(self)
    }
}

impl fmt::Display for ClauseSets {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_sql())
    }
}

/// Parses one statement into clause sets. Bare column names stay
/// unqualified.
pub fn parse_sql(text: &str) -> Result<ClauseSets, ParseError> {
    let raw = parser::parse(text)?;
    Ok(normalize::normalize(&raw, None))
}

/// Like [`parse_sql`], but qualifies bare column names using `schema`.
pub fn parse_sql_with_schema(text: &str, schema: &Schema) -> Result<ClauseSets, ParseError> {
    let raw = parser::parse(text)?;
    Ok(normalize::normalize(&raw, Some(schema)))
}

/// Per-clause outcome of an exact-set-match comparison.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClauseMatch {
    pub select: bool,
    pub from: bool,
    #[serde(rename = "where")]
    pub where_: bool,
    pub group_by: bool,
    pub having: bool,
    pub order_by: bool,
    pub limit: bool,
    pub set_op: bool,
}

impl ClauseMatch {
    pub fn compare(pred: &ClauseSets, gold: &ClauseSets) -> Self {
        ClauseMatch {
            select: pred.distinct == gold.distinct && pred.select == gold.select,
            from: pred.from == gold.from,
            where_: pred.where_ == gold.where_,
            group_by: pred.group_by == gold.group_by,
            having: pred.having == gold.having,
            order_by: pred.order_by == gold.order_by,
            limit: pred.limit == gold.limit,
            set_op: pred.set_op == gold.set_op,
        }
    }

    pub fn all(&self) -> bool {
        self.select
            && self.from
            && self.where_
            && self.group_by
            && self.having
            && self.order_by
            && self.limit
            && self.set_op
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExactMatch {
    pub matched: bool,
    /// Absent when either side failed to parse.
    pub clauses: Option<ClauseMatch>,
    pub reason: Option<String>,
}

fn exact_set_match_impl(
    pred: &str,
    gold: &str,
    parse: impl Fn(&str) -> Result<ClauseSets, ParseError>,
) -> ExactMatch {
    let failed = |side: &str, e: ParseError| ExactMatch {
        matched: false,
        clauses: None,
        reason: Some(format!("{side}: {e}")),
    };
    let p = match parse(pred) {
        Ok(p) => p,
        Err(e) => return failed("pred", e),
    };
    let g = match parse(gold) {
        Ok(g) => g,
        Err(e) => return failed("gold", e),
    };
    let clauses = ClauseMatch::compare(&p, &g);
    ExactMatch {
        matched: clauses.all(),
        clauses: Some(clauses),
        reason: None,
    }
}

/// Clause-by-clause comparison of two queries with literal values ignored.
/// A side that fails to parse scores `false` with the reason recorded.
pub fn exact_set_match(pred: &str, gold: &str) -> ExactMatch {
    exact_set_match_impl(pred, gold, parse_sql)
}

pub fn exact_set_match_with_schema(pred: &str, gold: &str, schema: &Schema) -> ExactMatch {
    exact_set_match_impl(pred, gold, |s| parse_sql_with_schema(s, schema))
}
