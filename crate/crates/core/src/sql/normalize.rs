use std::collections::BTreeMap;

use super::parser::{RawCond, RawExpr, RawPred, RawSelect, RawTable};
use super::{
    ArithOp, ClauseSets, CmpOp, Condition, Connector, Expr, FromClause, Predicate, Schema, SetOperation, TableTerm,
};

pub(super) fn normalize(raw: &RawSelect, schema: Option<&Schema>) -> ClauseSets {
    Normalizer { schema }.select(raw, None)
}

/// Names visible in one `SELECT`. A `None` target marks a derived table,
/// whose qualifier is dropped.
struct Scope<'p> {
    names: BTreeMap<String, Option<String>>,
    tables: Vec<String>,
    parent: Option<&'p Scope<'p>>,
}

impl Scope<'_> {
    fn resolve(&self, qualifier: &str) -> Option<&Option<String>> {
        self.names
            .get(qualifier)
            .or_else(|| self.parent.and_then(|p| p.resolve(qualifier)))
    }
}

struct Normalizer<'s> {
    schema: Option<&'s Schema>,
}

type Aliases<'r> = BTreeMap<String, &'r RawExpr>;

impl Normalizer<'_> {
    fn select(&self, raw: &RawSelect, parent: Option<&Scope<'_>>) -> ClauseSets {
        let mut scope = Scope {
            names: BTreeMap::new(),
            tables: Vec::new(),
            parent,
        };
        let mut tables = Vec::new();
        for t in &raw.tables {
            match t {
                RawTable::Named { name, alias } => {
                    let name = name.to_lowercase();
                    scope.names.insert(name.clone(), Some(name.clone()));
                    if let Some(a) = alias {
                        scope.names.insert(a.to_lowercase(), Some(name.clone()));
                    }
                    scope.tables.push(name.clone());
                    tables.push(TableTerm::Table(name));
                }
                RawTable::Derived { query, alias } => {
                    if let Some(a) = alias {
                        scope.names.insert(a.to_lowercase(), None);
                    }
                    tables.push(TableTerm::Subquery(Box::new(self.select(query, parent))));
                }
            }
        }
        tables.sort();

        let none = Aliases::new();
        let aliases: Aliases<'_> = raw
            .items
            .iter()
            .filter_map(|(e, a)| a.as_ref().map(|a| (a.to_lowercase(), e)))
            .collect();

        let mut joins: Vec<Predicate> = raw
            .join_conds
            .iter()
            .flat_map(|c| self.condition(c, &scope, &none).predicates)
            .collect();
        joins.sort();

        let mut select: Vec<Expr> = raw.items.iter().map(|(e, _)| self.expr(e, &scope, &none)).collect();
        select.sort();
        let mut group_by: Vec<Expr> = raw.group_by.iter().map(|e| self.expr(e, &scope, &aliases)).collect();
        group_by.sort();

        ClauseSets {
            distinct: raw.distinct,
            select,
            from: FromClause { tables, joins },
            where_: raw
                .where_
                .as_ref()
                .map(|c| self.condition(c, &scope, &none))
                .unwrap_or_default(),
            group_by,
            having: raw
                .having
                .as_ref()
                .map(|c| self.condition(c, &scope, &aliases))
                .unwrap_or_default(),
            order_by: raw
                .order_by
                .iter()
                .map(|(e, d)| (self.expr(e, &scope, &aliases), *d))
                .collect(),
            limit: raw.limit,
            set_op: raw.set_op.as_ref().map(|(op, rhs)| SetOperation {
                op: *op,
                rhs: Box::new(self.select(rhs, parent)),
            }),
        }
    }

    fn condition(&self, c: &RawCond, scope: &Scope<'_>, aliases: &Aliases<'_>) -> Condition {
        let mut out = Condition::default();
        self.flatten(c, false, scope, aliases, &mut out);
        out.predicates.sort();
        out.connectors.sort();
        out
    }

    /// Pushes `NOT` down to the predicates (De Morgan) while collecting
    /// predicates and connectives.
    fn flatten(&self, c: &RawCond, negate: bool, scope: &Scope<'_>, aliases: &Aliases<'_>, out: &mut Condition) {
        match c {
            RawCond::Not(inner) => self.flatten(inner, !negate, scope, aliases, out),
            RawCond::And(l, r) | RawCond::Or(l, r) => {
                let is_and = matches!(c, RawCond::And(..));
                out.connectors.push(if is_and != negate { Connector::And } else { Connector::Or });
                self.flatten(l, negate, scope, aliases, out);
                self.flatten(r, negate, scope, aliases, out);
            }
            RawCond::Pred(p) => out.predicates.push(self.predicate(p, negate, scope, aliases)),
        }
    }

    fn predicate(&self, p: &RawPred, negate: bool, scope: &Scope<'_>, aliases: &Aliases<'_>) -> Predicate {
        let mut lhs = self.expr(&p.lhs, scope, aliases);
        let mut rhs: Vec<Expr> = p.rhs.iter().map(|e| self.expr(e, scope, aliases)).collect();
        let mut negated = p.negated != negate;
        let mut op = p.op;
        if negated {
            let flipped = match op {
                CmpOp::Eq => Some(CmpOp::Ne),
                CmpOp::Ne => Some(CmpOp::Eq),
                CmpOp::Lt => Some(CmpOp::Ge),
                CmpOp::Ge => Some(CmpOp::Lt),
                CmpOp::Gt => Some(CmpOp::Le),
                CmpOp::Le => Some(CmpOp::Gt),
                _ => None,
            };
            if let Some(f) = flipped {
                op = f;
                negated = false;
            }
        }
        let mirrored = match op {
            CmpOp::Eq | CmpOp::Ne => Some(op),
            CmpOp::Lt => Some(CmpOp::Gt),
            CmpOp::Gt => Some(CmpOp::Lt),
            CmpOp::Le => Some(CmpOp::Ge),
            CmpOp::Ge => Some(CmpOp::Le),
            _ => None,
        };
        if let Some(m) = mirrored {
            if rhs[0] < lhs {
                std::mem::swap(&mut lhs, &mut rhs[0]);
                op = m;
            }
        }
        Predicate { negated, op, lhs, rhs }
    }

    fn expr(&self, e: &RawExpr, scope: &Scope<'_>, aliases: &Aliases<'_>) -> Expr {
        match e {
            RawExpr::Column { qualifier: Some(q), name } => {
                let name = name.to_lowercase();
                let q = q.to_lowercase();
                match scope.resolve(&q) {
                    Some(Some(table)) => Expr::Column(format!("{table}.{name}")),
                    Some(None) => Expr::Column(name),
                    None => Expr::Column(format!("{q}.{name}")),
                }
            }
            RawExpr::Column { qualifier: None, name } => {
                let name = name.to_lowercase();
                if let Some(target) = aliases.get(&name) {
                    if self.owner(&name, scope).is_none() {
                        return self.expr(target, scope, &Aliases::new());
                    }
                }
                match self.owner(&name, scope) {
                    Some(table) => Expr::Column(format!("{table}.{name}")),
                    None => Expr::Column(name),
                }
            }
            RawExpr::Star { qualifier: None } => Expr::Column("*".into()),
            RawExpr::Star { qualifier: Some(q) } => {
                let q = q.to_lowercase();
                match scope.resolve(&q) {
                    Some(Some(table)) => Expr::Column(format!("{table}.*")),
                    Some(None) => Expr::Column("*".into()),
                    None => Expr::Column(format!("{q}.*")),
                }
            }
            RawExpr::Literal => Expr::Value,
            RawExpr::Agg { func, distinct, arg } => Expr::Agg {
                func: *func,
                distinct: *distinct,
                arg: Box::new(self.expr(arg, scope, aliases)),
            },
            RawExpr::Func { name, args } => Expr::Func {
                name: name.to_lowercase(),
                args: args.iter().map(|a| self.expr(a, scope, aliases)).collect(),
            },
            RawExpr::Binary { op, lhs, rhs } => {
                let mut l = self.expr(lhs, scope, aliases);
                let mut r = self.expr(rhs, scope, aliases);
                if matches!(op, ArithOp::Add | ArithOp::Mul) && r < l {
                    std::mem::swap(&mut l, &mut r);
                }
                Expr::Binary {
                    op: *op,
                    lhs: Box::new(l),
                    rhs: Box::new(r),
                }
            }
            RawExpr::Neg(inner) => match self.expr(inner, scope, aliases) {
                Expr::Value => Expr::Value,
                other => Expr::Neg(Box::new(other)),
            },
            RawExpr::Subquery(q) => Expr::Subquery(Box::new(self.select(q, Some(scope)))),
            RawExpr::List(items) => {
                let mut args: Vec<Expr> = items.iter().map(|a| self.expr(a, scope, aliases)).collect();
                if args.iter().all(|a| *a == Expr::Value) {
                    Expr::Value
                } else {
                    args.sort();
                    Expr::Func {
                        name: "list".into(),
                        args,
                    }
                }
            }
        }
    }

    /// The single table in the nearest enclosing scope that has `column`.
    fn owner(&self, column: &str, scope: &Scope<'_>) -> Option<String> {
        let schema = self.schema?;
        let mut cur = Some(scope);
        while let Some(s) = cur {
            let mut owners = s
                .tables
                .iter()
                .filter(|t| schema.get(*t).is_some_and(|cols| cols.contains(column)));
            match (owners.next(), owners.next()) {
                (Some(t), None) => return Some(t.clone()),
                (Some(_), Some(_)) => return None,
                _ => cur = s.parent,
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::super::{parse_sql, parse_sql_with_schema, Schema};
    use super::*;

    fn col(s: &str) -> Expr {
        Expr::Column(s.into())
    }

    #[test]
    fn resolves_aliases_and_lowercases() {
        let q = parse_sql("SELECT T1.Name FROM Singer AS T1").unwrap();
        assert_eq!(q.select, [col("singer.name")]);
        assert_eq!(q.from.tables, [TableTerm::Table("singer".into())]);
    }

    #[test]
    fn literals_become_placeholders() {
        let q = parse_sql("SELECT a FROM t WHERE b = -3 AND c IN (1, 2) AND d LIKE '%x%'").unwrap();
        assert!(q.where_.predicates.iter().all(|p| p.rhs == [Expr::Value]));
        assert_eq!(q.where_.connectors, [Connector::And, Connector::And]);
    }

    #[test]
    fn not_is_pushed_into_predicates() {
        let a = parse_sql("SELECT a FROM t WHERE NOT (x = 1 OR y > 2)").unwrap();
        let b = parse_sql("SELECT a FROM t WHERE x <> 1 AND y <= 2").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mirrored_comparisons_agree() {
        let a = parse_sql("SELECT a FROM t WHERE 5 < age").unwrap();
        let b = parse_sql("SELECT a FROM t WHERE age > 7").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn select_alias_substituted_in_order_by() {
        let a = parse_sql("SELECT count(*) AS n FROM t GROUP BY x ORDER BY n DESC").unwrap();
        let b = parse_sql("SELECT count(*) FROM t GROUP BY x ORDER BY count(*) DESC").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn correlated_subquery_sees_outer_alias() {
        let q = parse_sql("SELECT a FROM t AS o WHERE EXISTS (SELECT 1 FROM u WHERE u.k = o.k)").unwrap();
        let inner = q.nested()[0];
        assert_eq!(inner.where_.predicates[0].rhs, [col("u.k")]);
        assert_eq!(inner.where_.predicates[0].lhs, col("t.k"));
    }

    #[test]
    fn schema_qualifies_unambiguous_columns() {
        let mut schema = Schema::new();
        schema.insert("singer".into(), ["name".to_string(), "id".to_string()].into());
        schema.insert("concert".into(), ["id".to_string(), "year".to_string()].into());
        let q = parse_sql_with_schema("SELECT name, id, year FROM singer JOIN concert", &schema).unwrap();
        assert_eq!(q.select, [col("concert.year"), col("id"), col("singer.name")]);
        let a = parse_sql_with_schema("SELECT name FROM singer", &schema).unwrap();
        let b = parse_sql_with_schema("SELECT T1.name FROM singer T1", &schema).unwrap();
        assert_eq!(a, b);
    }
}
