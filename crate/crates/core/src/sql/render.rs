use std::fmt::Write;

use super::{AggFunc, ArithOp, ClauseSets, CmpOp, Condition, Connector, Direction, Expr, Predicate, SetOp, TableTerm};

pub(super) fn render(q: &ClauseSets) -> String {
    let mut out = String::new();
    select(q, &mut out);
    out
}

fn select(q: &ClauseSets, out: &mut String) {
    out.push_str("SELECT ");
    if q.distinct {
        out.push_str("DISTINCT ");
    }
    list(&q.select, out);
    if !q.from.tables.is_empty() {
        out.push_str(" FROM ");
        for (i, t) in q.from.tables.iter().enumerate() {
            if i > 0 {
                out.push_str(" JOIN ");
            }
            match t {
                TableTerm::Table(name) => out.push_str(&ident(name)),
                TableTerm::Subquery(s) => subquery(s, out),
            }
        }
        if !q.from.joins.is_empty() {
            out.push_str(" ON ");
            for (i, p) in q.from.joins.iter().enumerate() {
                if i > 0 {
                    out.push_str(" AND ");
                }
                predicate(p, out);
            }
        }
    }
    if !q.where_.is_empty() {
        out.push_str(" WHERE ");
        condition(&q.where_, out);
    }
    if !q.group_by.is_empty() {
        out.push_str(" GROUP BY ");
        list(&q.group_by, out);
    }
    if !q.having.is_empty() {
        out.push_str(" HAVING ");
        condition(&q.having, out);
    }
    if !q.order_by.is_empty() {
        out.push_str(" ORDER BY ");
        for (i, (e, d)) in q.order_by.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            expr(e, out);
            out.push_str(match d {
                Direction::Asc => " ASC",
                Direction::Desc => " DESC",
            });
        }
    }
    if q.limit {
        out.push_str(" LIMIT 1");
    }
    if let Some(s) = &q.set_op {
        out.push_str(match s.op {
            SetOp::Union => " UNION ",
            SetOp::UnionAll => " UNION ALL ",
            SetOp::Intersect => " INTERSECT ",
            SetOp::Except => " EXCEPT ",
        });
        select(&s.rhs, out);
    }
}

fn subquery(q: &ClauseSets, out: &mut String) {
    out.push('(');
    select(q, out);
    out.push(')');
}

fn list(items: &[Expr], out: &mut String) {
    for (i, e) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        expr(e, out);
    }
}

/// Predicates and connectives are both multisets, so any interleaving
/// flattens back to the same condition.
fn condition(c: &Condition, out: &mut String) {
    for (i, p) in c.predicates.iter().enumerate() {
        if i > 0 {
            out.push_str(match c.connectors.get(i - 1) {
                Some(Connector::Or) => " OR ",
                _ => " AND ",
            });
        }
        predicate(p, out);
    }
}

fn predicate(p: &Predicate, out: &mut String) {
    let not = if p.negated { "NOT " } else { "" };
    if p.op == CmpOp::Exists {
        out.push_str(not);
        out.push_str("EXISTS ");
        expr(&p.lhs, out);
        return;
    }
    expr(&p.lhs, out);
    match p.op {
        CmpOp::Between => {
            let _ = write!(out, " {not}BETWEEN ");
            expr(&p.rhs[0], out);
            out.push_str(" AND ");
            expr(&p.rhs[1], out);
        }
        CmpOp::In => {
            let _ = write!(out, " {not}IN ");
            match &p.rhs[0] {
                Expr::Func { name, args } if name == "list" => {
                    out.push('(');
                    list(args, out);
                    out.push(')');
                }
                Expr::Subquery(_) => expr(&p.rhs[0], out),
                other => {
                    out.push('(');
                    expr(other, out);
                    out.push(')');
                }
            }
        }
        CmpOp::Like => {
            let _ = write!(out, " {not}LIKE ");
            expr(&p.rhs[0], out);
        }
        CmpOp::Is => {
            let _ = write!(out, " IS {not}");
            expr(&p.rhs[0], out);
        }
        op => {
            out.push_str(match op {
                CmpOp::Eq => " = ",
                CmpOp::Ne => " != ",
                CmpOp::Lt => " < ",
                CmpOp::Gt => " > ",
                CmpOp::Le => " <= ",
                _ => " >= ",
            });
            expr(&p.rhs[0], out);
        }
    }
}

fn expr(e: &Expr, out: &mut String) {
    match e {
        Expr::Column(c) => match c.split_once('.') {
            Some((t, "*")) => {
                let _ = write!(out, "{}.*", ident(t));
            }
            Some((t, name)) => {
                let _ = write!(out, "{}.{}", ident(t), ident(name));
            }
            None if c == "*" => out.push('*'),
            None => out.push_str(&ident(c)),
        },
        Expr::Value => out.push_str("'value'"),
        Expr::Agg { func, distinct, arg } => {
            out.push_str(match func {
                AggFunc::Count => "count(",
                AggFunc::Sum => "sum(",
                AggFunc::Avg => "avg(",
                AggFunc::Min => "min(",
                AggFunc::Max => "max(",
            });
            if *distinct {
                out.push_str("DISTINCT ");
            }
            expr(arg, out);
            out.push(')');
        }
        Expr::Func { name, args } => {
            out.push_str(&ident(name));
            out.push('(');
            list(args, out);
            out.push(')');
        }
        Expr::Binary { op, lhs, rhs } => {
            out.push('(');
            expr(lhs, out);
            out.push_str(match op {
                ArithOp::Add => " + ",
                ArithOp::Sub => " - ",
                ArithOp::Mul => " * ",
                ArithOp::Div => " / ",
                ArithOp::Mod => " % ",
                ArithOp::Concat => " || ",
            });
            expr(rhs, out);
            out.push(')');
        }
        Expr::Neg(inner) => {
            out.push_str("-(");
            expr(inner, out);
            out.push(')');
        }
        Expr::Subquery(q) => subquery(q, out),
    }
}

fn ident(s: &str) -> String {
    let plain = s.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_')
        && s.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '$')
        && !super::parser::is_reserved(s);
    if plain {
        s.to_string()
    } else {
        format!("`{s}`")
    }
}
